#include <doctest.h>

#include <string>
#include <vector>

#include "motionkit/errors.hpp"
#include "motionkit/pose_io.hpp"
#include "motionkit/pose_pool.hpp"
#include "motionkit/splitmix.hpp"
#include "test_util.hpp"

using namespace motionkit;

namespace {

std::string write_sequence(const testutil::TempDir& dir, const std::string& name, int frames,
                           SplitMix64& rng) {
    std::vector<BodyPose> bodies;
    for (int f = 0; f < frames; ++f) bodies.push_back(testutil::jittered_pose(rng));
    const std::string path = dir.file(name);
    testutil::spit(path, serialize_pose_sequence(testutil::wrap_frames(bodies)) + "\n");
    return path;
}

}  // namespace

TEST_CASE("pool harvest walks each file at the requested stride") {
    testutil::TempDir dir;
    SplitMix64 rng(3);
    const std::string f_path = write_sequence(dir, "f.json", 7, rng);
    const std::string g_path = write_sequence(dir, "g.json", 3, rng);

    const PosePool pool = build_pool({f_path, g_path}, 5);
    REQUIRE(pool.size() == 3);
    CHECK(pool.entries[0].id == "f.json#0");
    CHECK(pool.entries[1].id == "f.json#5");
    CHECK(pool.entries[2].id == "g.json#0");

    // stride 1 keeps every frame
    CHECK(build_pool({f_path, g_path}, 1).size() == 10);
    // ids stay sorted even when files arrive out of order
    const PosePool swapped = build_pool({g_path, f_path}, 5);
    CHECK(swapped.entries[0].id == "f.json#0");
    CHECK(swapped.entries[2].id == "g.json#0");
}

TEST_CASE("pool harvest filters bodies without a usable torso") {
    testutil::TempDir dir;
    SplitMix64 rng(4);
    std::vector<BodyPose> bodies;
    bodies.push_back(testutil::jittered_pose(rng));
    BodyPose headless = testutil::jittered_pose(rng);
    headless.joints[kNeck].confidence = 0.0;
    bodies.push_back(headless);
    BodyPose hipless = testutil::jittered_pose(rng);
    hipless.joints[kRHip].confidence = 0.0;
    hipless.joints[kLHip].confidence = 0.0;
    bodies.push_back(hipless);
    const std::string path = dir.file("seq.json");
    testutil::spit(path, serialize_pose_sequence(testutil::wrap_frames(bodies)) + "\n");

    const PosePool pool = build_pool({path}, 1);
    REQUIRE(pool.size() == 1);
    CHECK(pool.entries[0].id == "seq.json#0");

    // one hip is enough
    std::vector<BodyPose> onehip;
    BodyPose b = testutil::jittered_pose(rng);
    b.joints[kLHip].confidence = 0.0;
    onehip.push_back(b);
    const std::string path2 = dir.file("onehip.json");
    testutil::spit(path2, serialize_pose_sequence(testutil::wrap_frames(onehip)) + "\n");
    CHECK(build_pool({path2}, 1).size() == 1);
}

TEST_CASE("pool harvest error cases") {
    testutil::TempDir dir;
    SplitMix64 rng(5);
    const std::string path = write_sequence(dir, "a.json", 2, rng);

    CHECK_THROWS_AS(build_pool({path}, 0), ArgumentError);
    CHECK_THROWS_AS(build_pool({dir.file("missing.json")}, 1), IoError);

    // duplicate basenames from different directories collide on id
    testutil::TempDir other;
    SplitMix64 rng2(6);
    const std::string clash = write_sequence(other, "a.json", 2, rng2);
    CHECK_THROWS_AS(build_pool({path, clash}, 1), PoolError);

    // nothing survives the torso filter
    std::vector<BodyPose> bodies;
    BodyPose bad = testutil::jittered_pose(rng);
    bad.joints[kNeck].confidence = 0.0;
    bodies.push_back(bad);
    const std::string path3 = dir.file("empty.json");
    testutil::spit(path3, serialize_pose_sequence(testutil::wrap_frames(bodies)) + "\n");
    CHECK_THROWS_AS(build_pool({path3}, 1), EmptyPoolError);
    CHECK_THROWS_AS(build_pool({}, 1), EmptyPoolError);
}

TEST_CASE("pool serialization round trip is byte stable") {
    testutil::TempDir dir;
    SplitMix64 rng(7);
    const std::string p1 = write_sequence(dir, "x.json", 4, rng);
    const std::string p2 = write_sequence(dir, "y.json", 4, rng);
    const PosePool pool = build_pool({p1, p2}, 2);

    const std::string text = serialize_pose_pool(pool);
    CHECK(text.rfind("{\"version\":1,\"entries\":[{\"id\":\"x.json#0\",\"body\":[[", 0) == 0);

    const PosePool back = parse_pose_pool(text);
    REQUIRE(back.size() == pool.size());
    for (std::size_t i = 0; i < pool.size(); ++i) {
        CHECK(back.entries[i].id == pool.entries[i].id);
        for (int j = 0; j < kBodyJointCount; ++j) {
            CHECK(back.entries[i].body.joints[j].x ==
                  doctest::Approx(pool.entries[i].body.joints[j].x).epsilon(1e-12));
        }
    }
    CHECK(serialize_pose_pool(back) == text);

    const std::string file = dir.file("pool.json");
    save_pose_pool(pool, file);
    const PosePool loaded = load_pose_pool(file);
    CHECK(serialize_pose_pool(loaded) == text);
    CHECK(testutil::slurp(file) == text);
}

TEST_CASE("pool parsing rejects malformed documents") {
    testutil::TempDir dir;
    SplitMix64 rng(8);
    const std::string path = write_sequence(dir, "z.json", 3, rng);
    const PosePool pool = build_pool({path}, 1);
    const std::string text = serialize_pose_pool(pool);

    CHECK_THROWS_AS(parse_pose_pool("nope"), ParseError);
    CHECK_THROWS_AS(parse_pose_pool("{\"version\":2,\"entries\":[]}"), SchemaError);

    // unsorted ids
    std::string swapped = text;
    const auto a = swapped.find("z.json#0");
    const auto b = swapped.find("z.json#2");
    REQUIRE(a != std::string::npos);
    REQUIRE(b != std::string::npos);
    swapped.replace(b, 8, "z.json#0");
    swapped.replace(a, 8, "z.json#2");
    CHECK_THROWS_AS(parse_pose_pool(swapped), SchemaError);

    // duplicate ids
    std::string duped = text;
    duped.replace(duped.find("z.json#1"), 8, "z.json#0");
    CHECK_THROWS_AS(parse_pose_pool(duped), SchemaError);

    // an anchor that cannot serve (invisible torso) is rejected on parse
    PosePool broken = pool;
    broken.entries[0].body.joints[kNeck].confidence = 0.0;
    CHECK_THROWS_AS(parse_pose_pool(serialize_pose_pool(broken)), SchemaError);

    // confidence outside [0, 1]
    PosePool hot = pool;
    hot.entries[0].body.joints[kNose].confidence = 1.5;
    CHECK_THROWS_AS(parse_pose_pool(serialize_pose_pool(hot)), SchemaError);
}

TEST_CASE("anchor lookup is positional over the sorted ids") {
    testutil::TempDir dir;
    SplitMix64 rng(9);
    const std::string path = write_sequence(dir, "w.json", 6, rng);
    const PosePool pool = build_pool({path}, 2);
    REQUIRE(pool.size() == 3);

    CHECK(sample_anchor(pool, 0).id == "w.json#0");
    CHECK(sample_anchor(pool, 1).id == "w.json#2");
    CHECK(sample_anchor(pool, 2).id == "w.json#4");
    CHECK_THROWS_AS(sample_anchor(pool, 3), IndexError);
}
