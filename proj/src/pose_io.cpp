#include "motionkit/pose_io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

#include <json.hpp>

#include "motionkit/errors.hpp"

namespace motionkit {
namespace {

using nlohmann::json;

// nlohmann reports a 1-based byte count; convert to our 0-based offset and a
// 1-based line number so diagnostics stay usable on hand-edited files.
std::size_t offset_of_byte(std::size_t byte) { return byte > 0 ? byte - 1 : 0; }

std::size_t line_of_offset(std::string_view text, std::size_t offset) {
    std::size_t line = 1;
    const std::size_t end = std::min(offset, text.size());
    for (std::size_t i = 0; i < end; ++i) {
        if (text[i] == '\n') ++line;
    }
    return line;
}

double require_finite(double v, const std::string& field) {
    if (!std::isfinite(v)) throw SchemaError(field, "value must be finite");
    return v;
}

Keypoint2D parse_keypoint(const json& node, const std::string& field) {
    if (!node.is_array() || node.size() != 3)
        throw SchemaError(field, "keypoint must be an array [x, y, confidence]");
    for (const auto& c : node) {
        if (!c.is_number()) throw SchemaError(field, "keypoint components must be numbers");
    }
    Keypoint2D kp;
    kp.x = require_finite(node[0].get<double>(), field);
    kp.y = require_finite(node[1].get<double>(), field);
    kp.confidence = require_finite(node[2].get<double>(), field);
    if (kp.confidence < 0.0 || kp.confidence > 1.0)
        throw SchemaError(field, "confidence must lie in [0, 1]");
    return kp;
}

std::vector<Keypoint2D> parse_keypoint_list(const json& node, std::size_t expected,
                                            const std::string& field) {
    if (!node.is_array() || node.size() != expected)
        throw SchemaError(field, "expected an array of " + std::to_string(expected) + " keypoints");
    std::vector<Keypoint2D> out;
    out.reserve(expected);
    for (std::size_t i = 0; i < expected; ++i)
        out.push_back(parse_keypoint(node[i], field + "[" + std::to_string(i) + "]"));
    return out;
}

const json& require_member(const json& obj, const char* key, const std::string& scope) {
    auto it = obj.find(key);
    if (it == obj.end()) throw SchemaError(scope + key, "missing required field");
    return *it;
}

void append_keypoint(std::string& out, const Keypoint2D& kp) {
    out += '[';
    out += format_real(kp.x);
    out += ',';
    out += format_real(kp.y);
    out += ',';
    out += format_real(kp.confidence);
    out += ']';
}

void append_keypoint_group(std::string& out, const char* key,
                           const std::optional<std::vector<Keypoint2D>>& group) {
    out += '"';
    out += key;
    out += "\":";
    if (!group.has_value()) {
        out += "null";
        return;
    }
    out += '[';
    for (std::size_t i = 0; i < group->size(); ++i) {
        if (i > 0) out += ',';
        append_keypoint(out, (*group)[i]);
    }
    out += ']';
}

}  // namespace

std::string format_real(double value) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.9f", value);
    return buf;
}

PoseSequence parse_pose_sequence(std::string_view text) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        const std::size_t off = offset_of_byte(e.byte);
        throw ParseError(e.what(), line_of_offset(text, off), off);
    }
    if (!doc.is_object()) throw SchemaError("$", "document root must be an object");

    const json& version = require_member(doc, "version", "");
    if (!version.is_number_integer() || version.get<int>() != 1)
        throw SchemaError("version", "unsupported version, expected 1");

    PoseSequence seq;
    const json& cw = require_member(doc, "canvas_width", "");
    const json& ch = require_member(doc, "canvas_height", "");
    if (!cw.is_number_integer() || cw.get<long long>() <= 0)
        throw SchemaError("canvas_width", "must be a positive integer");
    if (!ch.is_number_integer() || ch.get<long long>() <= 0)
        throw SchemaError("canvas_height", "must be a positive integer");
    seq.canvas_width = cw.get<int>();
    seq.canvas_height = ch.get<int>();

    const json& fps = require_member(doc, "fps", "");
    if (!fps.is_number()) throw SchemaError("fps", "must be a number");
    seq.fps = require_finite(fps.get<double>(), "fps");
    if (seq.fps <= 0.0) throw SchemaError("fps", "must be positive");

    const json& frames = require_member(doc, "frames", "");
    if (!frames.is_array()) throw SchemaError("frames", "must be an array");
    if (frames.empty()) throw SchemaError("frames", "must contain at least one frame");

    seq.frames.reserve(frames.size());
    for (std::size_t f = 0; f < frames.size(); ++f) {
        const std::string scope = "frames[" + std::to_string(f) + "].";
        const json& fr = frames[f];
        if (!fr.is_object())
            throw SchemaError("frames[" + std::to_string(f) + "]", "frame must be an object");

        FullPose pose;
        const json& body = require_member(fr, "body", scope);
        auto body_list = parse_keypoint_list(body, kBodyJointCount, scope + "body");
        std::copy(body_list.begin(), body_list.end(), pose.body.joints.begin());

        const json& face = require_member(fr, "face", scope);
        if (!face.is_null()) pose.face = parse_keypoint_list(face, kFaceKeypointCount, scope + "face");
        const json& lh = require_member(fr, "left_hand", scope);
        if (!lh.is_null())
            pose.left_hand = parse_keypoint_list(lh, kHandKeypointCount, scope + "left_hand");
        const json& rh = require_member(fr, "right_hand", scope);
        if (!rh.is_null())
            pose.right_hand = parse_keypoint_list(rh, kHandKeypointCount, scope + "right_hand");
        seq.frames.push_back(std::move(pose));
    }

    validate_pose_sequence(seq);
    return seq;
}

void validate_pose_sequence(const PoseSequence& seq) {
    if (seq.canvas_width <= 0) throw SchemaError("canvas_width", "must be a positive integer");
    if (seq.canvas_height <= 0) throw SchemaError("canvas_height", "must be a positive integer");
    if (!std::isfinite(seq.fps) || seq.fps <= 0.0) throw SchemaError("fps", "must be positive");
    if (seq.frames.empty()) throw SchemaError("frames", "must contain at least one frame");

    const bool has_face = seq.frames.front().face.has_value();
    const bool has_lh = seq.frames.front().left_hand.has_value();
    const bool has_rh = seq.frames.front().right_hand.has_value();
    for (std::size_t f = 0; f < seq.frames.size(); ++f) {
        const std::string scope = "frames[" + std::to_string(f) + "].";
        const FullPose& pose = seq.frames[f];
        for (std::size_t j = 0; j < kBodyJointCount; ++j) {
            const Keypoint2D& kp = pose.body.joints[j];
            const std::string field = scope + "body[" + std::to_string(j) + "]";
            if (!std::isfinite(kp.x) || !std::isfinite(kp.y) || !std::isfinite(kp.confidence))
                throw SchemaError(field, "value must be finite");
            if (kp.confidence < 0.0 || kp.confidence > 1.0)
                throw SchemaError(field, "confidence must lie in [0, 1]");
        }
        if (pose.face.has_value() != has_face)
            throw SchemaError(scope + "face", "optional group must be present in all frames or none");
        if (pose.left_hand.has_value() != has_lh)
            throw SchemaError(scope + "left_hand",
                              "optional group must be present in all frames or none");
        if (pose.right_hand.has_value() != has_rh)
            throw SchemaError(scope + "right_hand",
                              "optional group must be present in all frames or none");
        if (pose.face && pose.face->size() != kFaceKeypointCount)
            throw SchemaError(scope + "face", "expected 68 keypoints");
        if (pose.left_hand && pose.left_hand->size() != kHandKeypointCount)
            throw SchemaError(scope + "left_hand", "expected 21 keypoints");
        if (pose.right_hand && pose.right_hand->size() != kHandKeypointCount)
            throw SchemaError(scope + "right_hand", "expected 21 keypoints");
    }
}

std::string serialize_pose_sequence(const PoseSequence& seq) {
    validate_pose_sequence(seq);
    std::string out;
    out.reserve(seq.frames.size() * 2048 + 256);
    out += "{\"version\":1,\"canvas_width\":";
    out += std::to_string(seq.canvas_width);
    out += ",\"canvas_height\":";
    out += std::to_string(seq.canvas_height);
    out += ",\"fps\":";
    out += format_real(seq.fps);
    out += ",\"frames\":[";
    for (std::size_t f = 0; f < seq.frames.size(); ++f) {
        if (f > 0) out += ',';
        const FullPose& pose = seq.frames[f];
        out += "{\"body\":[";
        for (std::size_t j = 0; j < kBodyJointCount; ++j) {
            if (j > 0) out += ',';
            append_keypoint(out, pose.body.joints[j]);
        }
        out += "],";
        append_keypoint_group(out, "face", pose.face);
        out += ',';
        append_keypoint_group(out, "left_hand", pose.left_hand);
        out += ',';
        append_keypoint_group(out, "right_hand", pose.right_hand);
        out += '}';
    }
    out += "]}";
    return out;
}

}  // namespace motionkit
