#include "motionkit/pose_pool.hpp"

#include <algorithm>
#include <cmath>

#include <json.hpp>

#include "motionkit/errors.hpp"
#include "motionkit/file_util.hpp"
#include "motionkit/pose_io.hpp"

namespace motionkit {
namespace {

using nlohmann::json;

bool torso_visible(const BodyPose& body) {
    const auto& j = body.joints;
    return j[kNeck].visible(kMinConfidence) &&
           (j[kRHip].visible(kMinConfidence) || j[kLHip].visible(kMinConfidence));
}

}  // namespace

PosePool build_pool(const std::vector<std::string>& sequence_files, std::size_t frame_stride) {
    if (frame_stride == 0) throw ArgumentError("frame stride must be positive");

    PosePool pool;
    pool.source_manifest = sequence_files;
    for (const std::string& path : sequence_files) {
        const PoseSequence seq = parse_pose_sequence(read_text_file(path));
        const std::string base = path_basename(path);
        for (std::size_t f = 0; f < seq.frames.size(); f += frame_stride) {
            const BodyPose& body = seq.frames[f].body;
            if (!torso_visible(body)) continue;
            pool.entries.push_back({base + "#" + std::to_string(f), body});
        }
    }
    std::sort(pool.entries.begin(), pool.entries.end(),
              [](const PoolEntry& a, const PoolEntry& b) { return a.id < b.id; });
    for (std::size_t i = 1; i < pool.entries.size(); ++i) {
        if (pool.entries[i - 1].id == pool.entries[i].id)
            throw PoolError("duplicate pool id '" + pool.entries[i].id +
                            "' (input basenames must be unique)");
    }
    if (pool.entries.empty())
        throw EmptyPoolError("no usable anchor poses after torso-visibility filtering");
    return pool;
}

const PoolEntry& sample_anchor(const PosePool& pool, std::size_t index) {
    if (index >= pool.entries.size())
        throw IndexError("anchor index " + std::to_string(index) + " out of range for pool of " +
                         std::to_string(pool.entries.size()));
    return pool.entries[index];
}

std::string serialize_pose_pool(const PosePool& pool) {
    std::string out = "{\"version\":1,\"entries\":[";
    for (std::size_t i = 0; i < pool.entries.size(); ++i) {
        if (i > 0) out += ',';
        const PoolEntry& e = pool.entries[i];
        out += "{\"id\":\"";
        out += e.id;
        out += "\",\"body\":[";
        for (std::size_t j = 0; j < kBodyJointCount; ++j) {
            if (j > 0) out += ',';
            const Keypoint2D& kp = e.body.joints[j];
            out += '[';
            out += format_real(kp.x);
            out += ',';
            out += format_real(kp.y);
            out += ',';
            out += format_real(kp.confidence);
            out += ']';
        }
        out += "]}";
    }
    out += "]}";
    return out;
}

PosePool parse_pose_pool(std::string_view text) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        const std::size_t off = e.byte > 0 ? e.byte - 1 : 0;
        std::size_t line = 1;
        for (std::size_t i = 0; i < std::min(off, text.size()); ++i)
            if (text[i] == '\n') ++line;
        throw ParseError(e.what(), line, off);
    }
    if (!doc.is_object()) throw SchemaError("$", "pool document must be an object");
    auto it_v = doc.find("version");
    if (it_v == doc.end() || !it_v->is_number_integer() || it_v->get<int>() != 1)
        throw SchemaError("version", "unsupported version, expected 1");
    auto it_e = doc.find("entries");
    if (it_e == doc.end() || !it_e->is_array()) throw SchemaError("entries", "must be an array");

    PosePool pool;
    for (std::size_t i = 0; i < it_e->size(); ++i) {
        const std::string scope = "entries[" + std::to_string(i) + "].";
        const json& node = (*it_e)[i];
        if (!node.is_object())
            throw SchemaError("entries[" + std::to_string(i) + "]", "must be an object");
        auto it_id = node.find("id");
        if (it_id == node.end() || !it_id->is_string() || it_id->get<std::string>().empty())
            throw SchemaError(scope + "id", "must be a non-empty string");
        auto it_b = node.find("body");
        if (it_b == node.end() || !it_b->is_array() || it_b->size() != kBodyJointCount)
            throw SchemaError(scope + "body", "must be an array of 18 keypoints");

        PoolEntry entry;
        entry.id = it_id->get<std::string>();
        for (std::size_t j = 0; j < kBodyJointCount; ++j) {
            const json& kp = (*it_b)[j];
            const std::string field = scope + "body[" + std::to_string(j) + "]";
            if (!kp.is_array() || kp.size() != 3)
                throw SchemaError(field, "keypoint must be an array [x, y, confidence]");
            for (const auto& c : kp) {
                if (!c.is_number()) throw SchemaError(field, "keypoint components must be numbers");
            }
            Keypoint2D& out = entry.body.joints[j];
            out.x = kp[0].get<double>();
            out.y = kp[1].get<double>();
            out.confidence = kp[2].get<double>();
            if (!std::isfinite(out.x) || !std::isfinite(out.y) || !std::isfinite(out.confidence))
                throw SchemaError(field, "value must be finite");
            if (out.confidence < 0.0 || out.confidence > 1.0)
                throw SchemaError(field, "confidence must lie in [0, 1]");
        }
        if (!torso_visible(entry.body))
            throw SchemaError(scope + "body", "anchor must have a visible neck and hip");
        pool.entries.push_back(std::move(entry));
    }
    for (std::size_t i = 1; i < pool.entries.size(); ++i) {
        if (!(pool.entries[i - 1].id < pool.entries[i].id))
            throw SchemaError("entries", "ids must be unique and sorted");
    }
    return pool;
}

PosePool load_pose_pool(const std::string& path) {
    return parse_pose_pool(read_text_file(path));
}

void save_pose_pool(const PosePool& pool, const std::string& path) {
    write_text_file(path, serialize_pose_pool(pool));
}

}  // namespace motionkit
