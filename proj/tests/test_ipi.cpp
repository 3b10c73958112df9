#include <doctest.h>

#include <cmath>
#include <string>
#include <vector>

#include "motionkit/errors.hpp"
#include "motionkit/ipi.hpp"
#include "motionkit/splitmix.hpp"
#include "motionkit/topology.hpp"
#include "test_util.hpp"

using namespace motionkit;

namespace {

Eigen::MatrixXd random_matrix(Eigen::Index rows, Eigen::Index cols, SplitMix64& rng) {
    Eigen::MatrixXd m(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i)
        for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = rng.next_uniform(-1.0, 1.0);
    return m;
}

// Scalar-loop reference implementation, kept deliberately free of matrix
// algebra so it cannot share a bug with the library.
double ref_gelu(double u) { return 0.5 * u * (1.0 + std::erf(u / std::sqrt(2.0))); }

Eigen::MatrixXd ref_layer_norm(const Eigen::MatrixXd& x, const Eigen::VectorXd& gain,
                               const Eigen::VectorXd& bias) {
    const Eigen::Index d = x.cols();
    Eigen::MatrixXd out(x.rows(), d);
    for (Eigen::Index r = 0; r < x.rows(); ++r) {
        double mean = 0.0;
        for (Eigen::Index j = 0; j < d; ++j) mean += x(r, j);
        mean /= static_cast<double>(d);
        double var = 0.0;
        for (Eigen::Index j = 0; j < d; ++j) var += (x(r, j) - mean) * (x(r, j) - mean);
        var /= static_cast<double>(d);
        const double inv = 1.0 / std::sqrt(var + kLayerNormEps);
        for (Eigen::Index j = 0; j < d; ++j)
            out(r, j) = gain(j) * ((x(r, j) - mean) * inv) + bias(j);
    }
    return out;
}

Eigen::MatrixXd ref_matmul(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
    Eigen::MatrixXd out = Eigen::MatrixXd::Zero(a.rows(), b.cols());
    for (Eigen::Index i = 0; i < a.rows(); ++i)
        for (Eigen::Index k = 0; k < a.cols(); ++k)
            for (Eigen::Index j = 0; j < b.cols(); ++j) out(i, j) += a(i, k) * b(k, j);
    return out;
}

Eigen::MatrixXd ref_attention(const Eigen::MatrixXd& q, const Eigen::MatrixXd& kv,
                              const IPILayerParams& layer, int heads) {
    const Eigen::Index d = q.cols();
    const Eigen::Index hd = d / heads;
    const Eigen::MatrixXd qp = ref_matmul(q, layer.Wq);
    const Eigen::MatrixXd kp = ref_matmul(kv, layer.Wk);
    const Eigen::MatrixXd vp = ref_matmul(kv, layer.Wv);
    const double scale = 1.0 / std::sqrt(static_cast<double>(hd));

    Eigen::MatrixXd concat(q.rows(), d);
    for (int h = 0; h < heads; ++h) {
        const Eigen::Index base = h * hd;
        for (Eigen::Index r = 0; r < q.rows(); ++r) {
            std::vector<double> logits(static_cast<std::size_t>(kv.rows()));
            double hi = -1e300;
            for (Eigen::Index c = 0; c < kv.rows(); ++c) {
                double s = 0.0;
                for (Eigen::Index j = 0; j < hd; ++j) s += qp(r, base + j) * kp(c, base + j);
                logits[static_cast<std::size_t>(c)] = s * scale;
                hi = std::max(hi, s * scale);
            }
            double total = 0.0;
            for (double& l : logits) {
                l = std::exp(l - hi);
                total += l;
            }
            for (Eigen::Index j = 0; j < hd; ++j) {
                double acc = 0.0;
                for (Eigen::Index c = 0; c < kv.rows(); ++c)
                    acc += (logits[static_cast<std::size_t>(c)] / total) * vp(c, base + j);
                concat(r, base + j) = acc;
            }
        }
    }
    return ref_matmul(concat, layer.Wo);
}

Eigen::MatrixXd ref_forward(const Eigen::MatrixXd& q_m, const Eigen::MatrixXd& f_phi,
                            const IPIParams& params, const IPIConfig& config) {
    Eigen::MatrixXd x = q_m;
    for (const IPILayerParams& layer : params.layers) {
        const Eigen::MatrixXd attn = ref_attention(x, f_phi, layer, config.num_heads);
        x = ref_layer_norm(x + attn, layer.ln1_gain, layer.ln1_bias);
        Eigen::MatrixXd u = ref_matmul(x, layer.W1);
        for (Eigen::Index r = 0; r < u.rows(); ++r)
            for (Eigen::Index j = 0; j < u.cols(); ++j) u(r, j) = ref_gelu(u(r, j) + layer.b1(j));
        Eigen::MatrixXd f = ref_matmul(u, layer.W2);
        for (Eigen::Index r = 0; r < f.rows(); ++r)
            for (Eigen::Index j = 0; j < f.cols(); ++j) f(r, j) += layer.b2(j);
        x = ref_layer_norm(x + f, layer.ln2_gain, layer.ln2_bias);
    }
    return x;
}

IPIConfig small_config() {
    IPIConfig config;
    config.depth = 2;
    config.model_dim = 4;
    config.num_heads = 2;
    config.ffn_dim = 8;
    config.query_tokens = 3;
    return config;
}

}  // namespace

TEST_CASE("forward pass matches a scalar-loop reference") {
    const IPIConfig config = small_config();
    const IPIParams params = init_params(config, 31);
    SplitMix64 rng(32);
    const Eigen::MatrixXd q_m = random_matrix(3, 4, rng);
    const Eigen::MatrixXd f_phi = random_matrix(5, 4, rng);

    const Eigen::MatrixXd got = ipi_forward(q_m, f_phi, params, config);
    const Eigen::MatrixXd want = ref_forward(q_m, f_phi, params, config);
    REQUIRE(got.rows() == want.rows());
    CHECK((got - want).cwiseAbs().maxCoeff() < 1e-10);

    // single-head path too
    IPIConfig one_head = config;
    one_head.num_heads = 1;
    const IPIParams params1 = init_params(one_head, 33);
    const Eigen::MatrixXd got1 = ipi_forward(q_m, f_phi, params1, one_head);
    const Eigen::MatrixXd want1 = ref_forward(q_m, f_phi, params1, one_head);
    CHECK((got1 - want1).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("keypoint encoder embeds visible joints and zeroes the rest") {
    IPIConfig config;
    config.depth = 1;
    config.model_dim = 6;
    config.num_heads = 2;
    config.ffn_dim = 8;
    config.query_tokens = kBodyJointCount;
    const IPIParams params = init_params(config, 41);

    SplitMix64 rng(42);
    BodyPose pose = testutil::jittered_pose(rng);
    pose.joints[kRElbow].confidence = 0.2;  // below the cutoff

    const Eigen::MatrixXd q_p = encode_keypoints(pose, params, config);
    REQUIRE(q_p.rows() == kBodyJointCount);
    REQUIRE(q_p.cols() == 6);

    for (int i = 0; i < kBodyJointCount; ++i) {
        const Keypoint2D& kp = pose.joints[static_cast<std::size_t>(i)];
        Eigen::RowVector3d in(kp.x, kp.y, kp.confidence);
        if (kp.confidence < kMinConfidence) in.setZero();
        Eigen::MatrixXd row = in * params.embed + params.pos.row(i);
        row = ref_layer_norm(row, params.enc_gain, params.enc_bias);
        CHECK((q_p.row(i) - row.row(0)).cwiseAbs().maxCoeff() < 1e-12);
    }

    IPIConfig short_config = config;
    short_config.query_tokens = 17;
    const IPIParams short_params = init_params(short_config, 41);
    CHECK_THROWS_AS(encode_keypoints(pose, short_params, short_config), ArgumentError);
}

TEST_CASE("query merge is an elementwise sum") {
    SplitMix64 rng(43);
    const Eigen::MatrixXd a = random_matrix(4, 3, rng);
    const Eigen::MatrixXd b = random_matrix(4, 3, rng);
    CHECK(merge_query(a, b).cwiseEqual(a + b).all());
    CHECK_THROWS_AS(merge_query(a, random_matrix(3, 4, rng)), ShapeError);

    // zero-initialized learnable query leaves the pose encoding untouched
    const Eigen::MatrixXd zero = Eigen::MatrixXd::Zero(4, 3);
    CHECK(merge_query(a, zero).cwiseEqual(a).all());
}

TEST_CASE("attention over a single context row copies its value projection") {
    const IPIConfig config = small_config();
    const IPIParams params = init_params(config, 51);
    SplitMix64 rng(52);
    const Eigen::MatrixXd q = random_matrix(6, 4, rng);
    const Eigen::MatrixXd kv = random_matrix(1, 4, rng);

    const Eigen::MatrixXd out = cross_attention(q, kv, params.layers[0], config.num_heads);
    const Eigen::MatrixXd want = (kv * params.layers[0].Wv) * params.layers[0].Wo;
    for (Eigen::Index r = 0; r < out.rows(); ++r)
        CHECK((out.row(r) - want.row(0)).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("attention rejects overflowing logits") {
    const IPIConfig config = small_config();
    const IPIParams params = init_params(config, 53);
    const Eigen::MatrixXd q = Eigen::MatrixXd::Constant(2, 4, 1e200);
    const Eigen::MatrixXd kv = Eigen::MatrixXd::Constant(3, 4, 1e200);
    CHECK_THROWS_AS(cross_attention(q, kv, params.layers[0], config.num_heads), NumericError);
}

TEST_CASE("motion attention gates on alpha") {
    const IPIConfig config = small_config();
    const IPIParams params = init_params(config, 54);
    SplitMix64 rng(55);
    const Eigen::MatrixXd x = random_matrix(3, 4, rng);
    const Eigen::MatrixXd f_i = random_matrix(5, 4, rng);
    const IPILayerParams& layer = params.layers[0];

    const Eigen::MatrixXd off = motion_attention(x, f_i, layer, config.num_heads, 0.0);
    CHECK(off.cwiseEqual(x).all());  // bitwise passthrough

    const Eigen::MatrixXd full = motion_attention(x, f_i, layer, config.num_heads, 1.0);
    const Eigen::MatrixXd by_default = motion_attention(x, f_i, layer, config.num_heads);
    CHECK(full.cwiseEqual(by_default).all());

    const Eigen::MatrixXd attn = cross_attention(x, f_i, layer, config.num_heads);
    CHECK((full - (x + attn)).cwiseAbs().maxCoeff() == 0.0);

    const Eigen::MatrixXd half = motion_attention(x, f_i, layer, config.num_heads, 0.5);
    CHECK(((full - x) - 2.0 * (half - x)).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("backward pass reports zero blocks and respects zero upstream") {
    const IPIConfig config = small_config();
    const IPIParams params = init_params(config, 61);
    SplitMix64 rng(62);
    const Eigen::MatrixXd q_m = random_matrix(3, 4, rng);
    const Eigen::MatrixXd f_phi = random_matrix(4, 4, rng);

    const IPIGradients zero =
        ipi_backward(q_m, f_phi, params, config, Eigen::MatrixXd::Zero(3, 4));
    CHECK(zero.q_m.cwiseAbs().maxCoeff() == 0.0);
    CHECK(zero.f_phi_d.cwiseAbs().maxCoeff() == 0.0);
    for (const IPILayerParams& g : zero.layers) {
        CHECK(g.Wq.cwiseAbs().maxCoeff() == 0.0);
        CHECK(g.W2.cwiseAbs().maxCoeff() == 0.0);
        CHECK(g.ln2_bias.cwiseAbs().maxCoeff() == 0.0);
    }

    const IPIGradients grads = ipi_backward(q_m, f_phi, params, config, random_matrix(3, 4, rng));
    // encoder-side tensors never feed ipi_forward: reported as zero blocks
    CHECK(grads.embed.cwiseAbs().maxCoeff() == 0.0);
    CHECK(grads.pos.cwiseAbs().maxCoeff() == 0.0);
    CHECK(grads.enc_gain.cwiseAbs().maxCoeff() == 0.0);
    CHECK(grads.enc_bias.cwiseAbs().maxCoeff() == 0.0);
    CHECK(grads.q_l.cwiseAbs().maxCoeff() == 0.0);
    // while the live path carries signal
    CHECK(grads.q_m.cwiseAbs().maxCoeff() > 0.0);
    CHECK(grads.f_phi_d.cwiseAbs().maxCoeff() > 0.0);
    CHECK(grads.layers[1].Wo.cwiseAbs().maxCoeff() > 0.0);

    CHECK_THROWS_AS(ipi_backward(q_m, f_phi, params, config, Eigen::MatrixXd::Zero(2, 4)),
                    ShapeError);
}

TEST_CASE("analytic gradients agree with finite differences") {
    IPIConfig tiny;
    tiny.depth = 1;
    tiny.model_dim = 4;
    tiny.num_heads = 1;
    tiny.ffn_dim = 6;
    tiny.query_tokens = 3;
    const GradCheckReport a = gradcheck(tiny, 71);
    CHECK(a.passed());
    CHECK(a.worst() < 1e-5);
    REQUIRE(a.entries.size() == 19);
    CHECK(a.entries[0].name == "embed");
    CHECK(a.entries[4].name == "q_l");
    CHECK(a.entries[5].name == "layer0.Wq");
    CHECK(a.entries[17].name == "q_m");
    CHECK(a.entries[18].name == "f_phi_d");

    IPIConfig wider;
    wider.depth = 2;
    wider.model_dim = 8;
    wider.num_heads = 2;
    wider.ffn_dim = 12;
    wider.query_tokens = 4;
    const GradCheckReport b = gradcheck(wider, 72);
    CHECK(b.passed());
    REQUIRE(b.entries.size() == 31);
    CHECK(b.entries[5 + 12].name == "layer1.Wq");
    CHECK(b.entries[5 + 12 + 11].name == "layer1.ln2_bias");
}

TEST_CASE("parameter shapes are validated and persisted") {
    const IPIConfig config = small_config();
    IPIParams params = init_params(config, 81);
    CHECK_NOTHROW(validate_params(params, config));

    IPIParams bent = params;
    bent.layers[1].W1.resize(4, 9);
    CHECK_THROWS_AS(validate_params(bent, config), ShapeError);
    IPIParams shallow = params;
    shallow.layers.pop_back();
    CHECK_THROWS_AS(validate_params(shallow, config), ShapeError);

    testutil::TempDir dir;
    const std::string path = dir.file("params.fpak");
    save_params(path, params);
    const IPIParams back = load_params(path, config);
    CHECK((back.embed - params.embed).cwiseAbs().maxCoeff() == 0.0);
    CHECK((back.q_l - params.q_l).cwiseAbs().maxCoeff() == 0.0);
    for (std::size_t i = 0; i < params.layers.size(); ++i) {
        CHECK((back.layers[i].Wq - params.layers[i].Wq).cwiseAbs().maxCoeff() == 0.0);
        CHECK((back.layers[i].b1 - params.layers[i].b1).cwiseAbs().maxCoeff() == 0.0);
        CHECK((back.layers[i].ln2_gain - params.layers[i].ln2_gain).cwiseAbs().maxCoeff() == 0.0);
    }

    // a deeper config expects tensors the file does not contain
    IPIConfig deeper = config;
    deeper.depth = 3;
    CHECK_THROWS_AS(load_params(path, deeper), SchemaError);
}

TEST_CASE("config validation") {
    IPIConfig config = small_config();
    CHECK_NOTHROW(config.validate());
    config.num_heads = 3;  // does not divide model_dim = 4
    CHECK_THROWS_AS(config.validate(), ArgumentError);
    config = small_config();
    config.depth = 0;
    CHECK_THROWS_AS(config.validate(), ArgumentError);
    config = small_config();
    config.ffn_dim = 0;
    CHECK_THROWS_AS(config.validate(), ArgumentError);
    config = small_config();
    config.query_tokens = 0;
    CHECK_THROWS_AS(config.validate(), ArgumentError);
}

TEST_CASE("untrained query merge keeps the pose encoding") {
    IPIConfig config;
    config.depth = 1;
    config.model_dim = 4;
    config.num_heads = 2;
    config.ffn_dim = 6;
    config.query_tokens = kBodyJointCount;
    const IPIParams params = init_params(config, 91);
    CHECK(params.q_l.cwiseAbs().maxCoeff() == 0.0);

    SplitMix64 rng(92);
    const BodyPose pose = testutil::jittered_pose(rng);
    const Eigen::MatrixXd q_p = encode_keypoints(pose, params, config);
    CHECK(merge_query(q_p, params.q_l).cwiseEqual(q_p).all());
}
