#include <doctest.h>

#include <cstring>
#include <vector>

#include "motionkit/errors.hpp"
#include "motionkit/splitmix.hpp"
#include "motionkit/tensor.hpp"
#include "test_util.hpp"

using namespace motionkit;

namespace {

LatentTensor random_latent(std::vector<std::size_t> shape, std::uint64_t seed) {
    LatentTensor t = make_latent(std::move(shape));
    SplitMix64 rng(seed);
    for (Eigen::Index i = 0; i < t.data.size(); ++i) t.data[i] = rng.next_uniform(-3.0, 3.0);
    return t;
}

}  // namespace

TEST_CASE("fmat encoding round trips and is byte deterministic") {
    const LatentTensor t = random_latent({2, 3, 4}, 17);
    const std::vector<std::uint8_t> bytes = encode_fmat(t);

    // header: magic + version + ndim + 3 u64 dims, then 24 doubles
    CHECK(bytes.size() == 4 + 4 + 4 + 3 * 8 + 24 * 8);
    CHECK(std::memcmp(bytes.data(), "FMAT", 4) == 0);

    const LatentTensor back = decode_fmat(bytes.data(), bytes.size());
    REQUIRE(back.shape == t.shape);
    for (Eigen::Index i = 0; i < t.data.size(); ++i) CHECK(back.data[i] == t.data[i]);

    CHECK(encode_fmat(back) == bytes);

    // rank-1 and scalar-free edge: single element tensor
    const LatentTensor one = random_latent({1}, 3);
    const auto one_bytes = encode_fmat(one);
    CHECK(decode_fmat(one_bytes.data(), one_bytes.size()).data[0] == one.data[0]);
}

TEST_CASE("fmat decoding rejects malformed buffers") {
    const LatentTensor t = random_latent({2, 2}, 4);
    std::vector<std::uint8_t> bytes = encode_fmat(t);

    SUBCASE("bad magic") {
        bytes[0] = 'G';
        CHECK_THROWS_AS(decode_fmat(bytes.data(), bytes.size()), ParseError);
    }
    SUBCASE("unsupported version") {
        bytes[4] = 2;
        CHECK_THROWS_AS(decode_fmat(bytes.data(), bytes.size()), SchemaError);
    }
    SUBCASE("truncated payload") {
        CHECK_THROWS_AS(decode_fmat(bytes.data(), bytes.size() - 1), ParseError);
        CHECK_THROWS_AS(decode_fmat(bytes.data(), 10), ParseError);
        CHECK_THROWS_AS(decode_fmat(bytes.data(), 0), ParseError);
    }
    SUBCASE("trailing bytes") {
        bytes.push_back(0);
        CHECK_THROWS_AS(decode_fmat(bytes.data(), bytes.size()), ParseError);
    }
    SUBCASE("zero dimension") {
        // shape (2,2) -> overwrite first dim with 0
        std::uint64_t zero = 0;
        std::memcpy(bytes.data() + 12, &zero, 8);
        CHECK_THROWS_AS(decode_fmat(bytes.data(), bytes.size()), SchemaError);
    }
    SUBCASE("element count overflowing the buffer") {
        std::uint64_t big = 1ull << 20;  // passes shape checks, exceeds the payload
        std::memcpy(bytes.data() + 12, &big, 8);
        CHECK_THROWS_AS(decode_fmat(bytes.data(), bytes.size()), ParseError);
    }
    SUBCASE("dimension too large to allocate") {
        std::uint64_t huge = 1ull << 40;
        std::memcpy(bytes.data() + 12, &huge, 8);
        CHECK_THROWS_AS(decode_fmat(bytes.data(), bytes.size()), ArgumentError);
    }
}

TEST_CASE("shape helpers police their inputs") {
    CHECK(shape_product({2, 3, 4}) == 24);
    CHECK_THROWS_AS(shape_product({2, 0, 4}), ArgumentError);
    CHECK_THROWS_AS(shape_product({}), ArgumentError);
    CHECK_THROWS_AS(shape_product({1ull << 32, 1ull << 32}), ArgumentError);
    CHECK_THROWS_AS(make_latent({0}), ArgumentError);

    const LatentTensor a = make_latent({2, 3});
    const LatentTensor b = make_latent({2, 3});
    const LatentTensor c = make_latent({3, 2});
    CHECK(same_shape(a, b));
    CHECK_FALSE(same_shape(a, c));
    CHECK_NOTHROW(require_same_shape(a, b));
    CHECK_THROWS_AS(require_same_shape(a, c), ShapeError);
}

TEST_CASE("fmat files round trip through disk") {
    testutil::TempDir dir;
    const LatentTensor t = random_latent({4, 8, 8}, 21);
    const std::string path = dir.file("z.fmat");
    write_fmat(path, t);
    const LatentTensor back = read_fmat(path);
    REQUIRE(back.shape == t.shape);
    for (Eigen::Index i = 0; i < t.data.size(); ++i) CHECK(back.data[i] == t.data[i]);

    CHECK_THROWS_AS(read_fmat(dir.file("missing.fmat")), IoError);
}

TEST_CASE("matrix bridging preserves row-major layout") {
    Eigen::MatrixXd m(2, 3);
    m << 1, 2, 3, 4, 5, 6;
    const LatentTensor t = matrix_to_latent(m);
    REQUIRE(t.shape == std::vector<std::size_t>{2, 3});
    CHECK(t.data[0] == 1.0);
    CHECK(t.data[1] == 2.0);  // row-major: (0,1) comes second
    CHECK(t.data[3] == 4.0);

    const Eigen::MatrixXd back = latent_to_matrix(t);
    CHECK(back.cwiseEqual(m).all());

    CHECK_THROWS_AS(latent_to_matrix(make_latent({2, 2, 2})), ShapeError);

    testutil::TempDir dir;
    const std::string path = dir.file("m.fmat");
    write_feature_matrix(path, m);
    CHECK(read_feature_matrix(path).cwiseEqual(m).all());
    write_fmat(path, make_latent({2, 2, 2}));
    CHECK_THROWS_AS(read_feature_matrix(path), ShapeError);
}

TEST_CASE("tensor packs sort by name and round trip") {
    testutil::TempDir dir;
    const std::string path = dir.file("pack.fpak");

    const LatentTensor a = random_latent({3, 2}, 1);
    const LatentTensor b = random_latent({5}, 2);
    const LatentTensor c = random_latent({2, 2, 2}, 3);

    write_tensor_pack(path, {{"zeta", c}, {"alpha", a}, {"mid", b}});
    const auto loaded = read_tensor_pack(path);
    REQUIRE(loaded.size() == 3);
    CHECK(loaded[0].first == "alpha");
    CHECK(loaded[1].first == "mid");
    CHECK(loaded[2].first == "zeta");
    CHECK(loaded[0].second.shape == a.shape);
    for (Eigen::Index i = 0; i < a.data.size(); ++i) CHECK(loaded[0].second.data[i] == a.data[i]);
    for (Eigen::Index i = 0; i < c.data.size(); ++i) CHECK(loaded[2].second.data[i] == c.data[i]);

    // insertion order does not leak into the bytes
    const std::string path2 = dir.file("pack2.fpak");
    write_tensor_pack(path2, {{"alpha", a}, {"mid", b}, {"zeta", c}});
    CHECK(testutil::slurp(path) == testutil::slurp(path2));

    CHECK_THROWS_AS(write_tensor_pack(dir.file("dup.fpak"), {{"x", a}, {"x", b}}), ArgumentError);
    CHECK_THROWS_AS(read_tensor_pack(dir.file("missing.fpak")), IoError);
}

TEST_CASE("tensor pack parsing rejects corruption") {
    testutil::TempDir dir;
    const std::string path = dir.file("pack.fpak");
    write_tensor_pack(path, {{"only", random_latent({2, 2}, 9)}});
    std::string bytes = testutil::slurp(path);

    SUBCASE("bad magic") {
        bytes[0] = 'X';
        testutil::spit(path, bytes);
        CHECK_THROWS_AS(read_tensor_pack(path), ParseError);
    }
    SUBCASE("truncated blob section") {
        testutil::spit(path, bytes.substr(0, bytes.size() - 4));
        CHECK_THROWS_AS(read_tensor_pack(path), ParseError);
    }
    SUBCASE("truncated manifest") {
        testutil::spit(path, bytes.substr(0, 12));
        CHECK_THROWS_AS(read_tensor_pack(path), ParseError);
    }
}
