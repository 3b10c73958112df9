#include "motionkit/epi.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include <json.hpp>

#include "motionkit/errors.hpp"
#include "motionkit/pose_io.hpp"
#include "motionkit/splitmix.hpp"

namespace motionkit {
namespace {

using nlohmann::json;

Eigen::Vector2d at(const BodyPose& pose, int j) {
    const Keypoint2D& kp = pose.joints[static_cast<std::size_t>(j)];
    return {kp.x, kp.y};
}

void put(BodyPose& pose, int j, const Eigen::Vector2d& p) {
    Keypoint2D& kp = pose.joints[static_cast<std::size_t>(j)];
    kp.x = p.x();
    kp.y = p.y();
}

bool vis(const BodyPose& pose, int j) {
    return pose.joints[static_cast<std::size_t>(j)].visible(kMinConfidence);
}

void translate_group(std::optional<std::vector<Keypoint2D>>& group, const Eigen::Vector2d& d) {
    if (!group) return;
    for (Keypoint2D& kp : *group) {
        kp.x += d.x();
        kp.y += d.y();
    }
}

void scale_group_about(std::optional<std::vector<Keypoint2D>>& group, const Eigen::Vector2d& c,
                       double f) {
    if (!group) return;
    for (Keypoint2D& kp : *group) {
        kp.x = c.x() + f * (kp.x - c.x());
        kp.y = c.y() + f * (kp.y - c.y());
    }
}

void silence_group(std::optional<std::vector<Keypoint2D>>& group) {
    if (!group) return;
    for (Keypoint2D& kp : *group) kp.confidence = 0.0;
}

// Moves a satellite group with its attachment joint and scales its internal
// geometry: kp -> new_attach + ratio * (kp - old_attach).
void follow_attachment(std::optional<std::vector<Keypoint2D>>& group,
                       const Eigen::Vector2d& old_attach, const Eigen::Vector2d& new_attach,
                       double ratio) {
    if (!group) return;
    for (Keypoint2D& kp : *group) {
        const Eigen::Vector2d p = new_attach + ratio * (Eigen::Vector2d(kp.x, kp.y) - old_attach);
        kp.x = p.x();
        kp.y = p.y();
    }
}

void rescale_frame(FullPose& pose, const RescaleOp& op, const SkeletonTopology& topo) {
    BodyPose& b = pose.body;
    const double f = op.factor;

    switch (op.kind) {
        case RescaleKind::kScaleBody: {
            if (!vis(b, kNeck)) break;
            const Eigen::Vector2d neck = at(b, kNeck);
            const struct { int hip, knee, ankle; } sides[] = {{kRHip, kRKnee, kRAnkle},
                                                              {kLHip, kLKnee, kLAnkle}};
            for (const auto& s : sides) {
                if (!vis(b, s.hip)) continue;
                const Eigen::Vector2d old = at(b, s.hip);
                const Eigen::Vector2d moved = neck + f * (old - neck);
                const Eigen::Vector2d d = moved - old;
                put(b, s.hip, moved);
                put(b, s.knee, at(b, s.knee) + d);
                put(b, s.ankle, at(b, s.ankle) + d);
            }
            break;
        }
        case RescaleKind::kScaleShoulder: {
            if (!vis(b, kNeck)) break;
            const Eigen::Vector2d neck = at(b, kNeck);
            const struct {
                int shoulder, elbow, wrist;
                std::optional<std::vector<Keypoint2D>>* hand;
            } sides[] = {{kRShoulder, kRElbow, kRWrist, &pose.right_hand},
                         {kLShoulder, kLElbow, kLWrist, &pose.left_hand}};
            for (const auto& s : sides) {
                if (!vis(b, s.shoulder)) continue;
                const Eigen::Vector2d old = at(b, s.shoulder);
                const Eigen::Vector2d moved = neck + f * (old - neck);
                const Eigen::Vector2d d = moved - old;
                put(b, s.shoulder, moved);
                put(b, s.elbow, at(b, s.elbow) + d);
                put(b, s.wrist, at(b, s.wrist) + d);
                translate_group(*s.hand, d);
            }
            break;
        }
        case RescaleKind::kScaleNeck: {
            if (!vis(b, kNeck) || !vis(b, kNose)) break;
            const Eigen::Vector2d neck = at(b, kNeck);
            const Eigen::Vector2d old = at(b, kNose);
            const Eigen::Vector2d moved = neck + f * (old - neck);
            const Eigen::Vector2d d = moved - old;
            put(b, kNose, moved);
            for (int j : {kREye, kLEye, kREar, kLEar}) put(b, j, at(b, j) + d);
            translate_group(pose.face, d);
            break;
        }
        case RescaleKind::kScaleFace: {
            if (!vis(b, kNose)) break;
            const Eigen::Vector2d nose = at(b, kNose);
            for (int j : {kREye, kLEye, kREar, kLEar}) put(b, j, nose + f * (at(b, j) - nose));
            scale_group_about(pose.face, nose, f);
            break;
        }
        case RescaleKind::kScaleArm: {
            const struct {
                int shoulder, elbow, wrist;
                std::optional<std::vector<Keypoint2D>>* hand;
            } sides[] = {{kRShoulder, kRElbow, kRWrist, &pose.right_hand},
                         {kLShoulder, kLElbow, kLWrist, &pose.left_hand}};
            for (const auto& s : sides) {
                if (!vis(b, s.shoulder) || !vis(b, s.elbow)) continue;
                const Eigen::Vector2d sh = at(b, s.shoulder);
                const Eigen::Vector2d elbow_old = at(b, s.elbow);
                const Eigen::Vector2d elbow_new = sh + f * (elbow_old - sh);
                put(b, s.elbow, elbow_new);
                if (!vis(b, s.wrist)) continue;
                const Eigen::Vector2d wrist_old = at(b, s.wrist);
                const Eigen::Vector2d wrist_new = elbow_new + f * (wrist_old - elbow_old);
                put(b, s.wrist, wrist_new);
                translate_group(*s.hand, wrist_new - wrist_old);
            }
            break;
        }
        case RescaleKind::kScaleLeg: {
            const struct { int hip, knee, ankle; } sides[] = {{kRHip, kRKnee, kRAnkle},
                                                              {kLHip, kLKnee, kLAnkle}};
            for (const auto& s : sides) {
                if (!vis(b, s.hip) || !vis(b, s.knee)) continue;
                const Eigen::Vector2d hip = at(b, s.hip);
                const Eigen::Vector2d knee_old = at(b, s.knee);
                const Eigen::Vector2d knee_new = hip + f * (knee_old - hip);
                put(b, s.knee, knee_new);
                if (!vis(b, s.ankle)) continue;
                put(b, s.ankle, knee_new + f * (at(b, s.ankle) - knee_old));
            }
            break;
        }
        case RescaleKind::kDropPart: {
            for (int j : topo.part_joints(op.part))
                b.joints[static_cast<std::size_t>(j)].confidence = 0.0;
            if (op.part == BodyPart::kLeftArm) silence_group(pose.left_hand);
            if (op.part == BodyPart::kRightArm) silence_group(pose.right_hand);
            break;
        }
        case RescaleKind::kAddPart: {
            const auto& pj = topo.part_joints(op.part);
            const bool entirely_missing =
                std::all_of(pj.begin(), pj.end(), [&](int j) {
                    return b.joints[static_cast<std::size_t>(j)].confidence == 0.0;
                });
            if (!entirely_missing) break;
            const int att = topo.part_attachment(op.part);
            if (!vis(b, att)) break;

            const BodyPose& t = topo.template_pose;
            double scale = 1.0;
            if (vis(b, kNeck) && vis(b, kRHip) && vis(b, kLHip)) {
                const double frame_torso =
                    (at(b, kNeck) - 0.5 * (at(b, kRHip) + at(b, kLHip))).norm();
                const double tmpl_torso = (at(t, kNeck) - 0.5 * (at(t, kRHip) + at(t, kLHip))).norm();
                scale = frame_torso / tmpl_torso;
            } else if (vis(b, kNeck) && vis(b, kRHip)) {
                scale = (at(b, kNeck) - at(b, kRHip)).norm() / (at(t, kNeck) - at(t, kRHip)).norm();
            } else if (vis(b, kNeck) && vis(b, kLHip)) {
                scale = (at(b, kNeck) - at(b, kLHip)).norm() / (at(t, kNeck) - at(t, kLHip)).norm();
            } else if (vis(b, kNeck) && vis(b, kNose)) {
                scale = (at(b, kNeck) - at(b, kNose)).norm() / (at(t, kNeck) - at(t, kNose)).norm();
            }
            const Eigen::Vector2d anchor_pt = at(b, att);
            const Eigen::Vector2d t_anchor = at(t, att);
            for (int j : pj) {
                put(b, j, anchor_pt + scale * (at(t, j) - t_anchor));
                b.joints[static_cast<std::size_t>(j)].confidence = 1.0;
            }
            break;
        }
    }
}

const char* kKindNames[kRescaleKindCount] = {"ScaleBody", "ScaleShoulder", "ScaleNeck",
                                             "ScaleFace", "ScaleArm",      "ScaleLeg",
                                             "DropPart",  "AddPart"};

}  // namespace

bool is_scale_kind(RescaleKind kind) {
    return kind != RescaleKind::kDropPart && kind != RescaleKind::kAddPart;
}

const char* rescale_kind_name(RescaleKind kind) { return kKindNames[static_cast<int>(kind)]; }

RescaleKind rescale_kind_from_name(const std::string& name) {
    for (int i = 0; i < kRescaleKindCount; ++i) {
        if (name == kKindNames[i]) return static_cast<RescaleKind>(i);
    }
    throw ArgumentError("unknown rescale kind '" + name + "'");
}

RescaleOp RescaleOp::scale(RescaleKind kind, double factor) {
    if (!is_scale_kind(kind)) throw ArgumentError("kind does not take a factor");
    if (!std::isfinite(factor) || factor <= 0.0)
        throw ArgumentError("scale factor must be a positive real");
    RescaleOp op;
    op.kind = kind;
    op.factor = factor;
    return op;
}

RescaleOp RescaleOp::drop_part(BodyPart part) {
    RescaleOp op;
    op.kind = RescaleKind::kDropPart;
    op.part = part;
    return op;
}

RescaleOp RescaleOp::add_part(BodyPart part) {
    RescaleOp op;
    op.kind = RescaleKind::kAddPart;
    op.part = part;
    return op;
}

RescaleConfig RescaleConfig::defaults() {
    RescaleConfig cfg;
    cfg.p_op.fill(0.25);
    cfg.range[static_cast<int>(RescaleKind::kScaleBody)] = {0.7, 1.4};
    cfg.range[static_cast<int>(RescaleKind::kScaleShoulder)] = {0.6, 1.5};
    cfg.range[static_cast<int>(RescaleKind::kScaleNeck)] = {0.5, 2.0};
    cfg.range[static_cast<int>(RescaleKind::kScaleFace)] = {0.6, 1.8};
    cfg.range[static_cast<int>(RescaleKind::kScaleArm)] = {0.5, 1.5};
    cfg.range[static_cast<int>(RescaleKind::kScaleLeg)] = {0.4, 1.6};
    cfg.range[static_cast<int>(RescaleKind::kDropPart)] = {1.0, 1.0};
    cfg.range[static_cast<int>(RescaleKind::kAddPart)] = {1.0, 1.0};
    return cfg;
}

void RescaleConfig::validate() const {
    for (int i = 0; i < kRescaleKindCount; ++i) {
        if (!std::isfinite(p_op[i]) || p_op[i] < 0.0 || p_op[i] > 1.0)
            throw ArgumentError(std::string("inclusion probability for ") + kKindNames[i] +
                                " must lie in [0, 1]");
        const FactorRange& r = range[i];
        if (!std::isfinite(r.lo) || !std::isfinite(r.hi) || r.lo <= 0.0 || r.lo > r.hi)
            throw ArgumentError(std::string("factor range for ") + kKindNames[i] +
                                " must satisfy 0 < lo <= hi");
    }
}

PoseSequence realign(const PoseSequence& driving, const BodyPose& anchor,
                     const SkeletonTopology& topo) {
    validate_topology(topo);
    if (!vis(anchor, kNeck) || (!vis(anchor, kRHip) && !vis(anchor, kLHip)))
        throw AnchorError("anchor must have a visible neck and at least one visible hip");

    std::size_t ref = driving.frames.size();
    for (std::size_t f = 0; f < driving.frames.size(); ++f) {
        if (vis(driving.frames[f].body, kNeck)) {
            ref = f;
            break;
        }
    }
    if (ref == driving.frames.size())
        throw ArgumentError("driving sequence has no frame with a visible neck");
    const Eigen::Vector2d offset = at(anchor, kNeck) - at(driving.frames[ref].body, kNeck);

    const bool head_in_anchor = vis(anchor, kNeck) && vis(anchor, kNose);
    const double anchor_head = head_in_anchor ? (at(anchor, kNose) - at(anchor, kNeck)).norm() : 0.0;

    PoseSequence out = driving;
    for (std::size_t f = 0; f < driving.frames.size(); ++f) {
        const FullPose& din = driving.frames[f];
        FullPose& dout = out.frames[f];
        const BodyPose& bin = din.body;
        BodyPose& bout = dout.body;

        std::array<bool, kBodyJointCount> alive{};
        if (vis(bin, kNeck)) {
            alive[kNeck] = true;
            put(bout, kNeck, at(bin, kNeck) + offset);
        }
        for (const Bone& bone : topo.bones) {
            const auto p = static_cast<std::size_t>(bone.parent);
            const auto c = static_cast<std::size_t>(bone.child);
            if (!alive[p] || !vis(bin, bone.parent) || !vis(bin, bone.child)) {
                bout.joints[c].confidence = 0.0;
                continue;
            }
            const Eigen::Vector2d v = at(bin, bone.child) - at(bin, bone.parent);
            const double driving_len = v.norm();
            double len = driving_len;
            if (vis(anchor, bone.parent) && vis(anchor, bone.child))
                len = (at(anchor, bone.child) - at(anchor, bone.parent)).norm();
            const Eigen::Vector2d dir =
                driving_len > 0.0 ? Eigen::Vector2d(v / driving_len) : Eigen::Vector2d(0.0, 0.0);
            put(bout, bone.child, at(bout, bone.parent) + dir * len);
            alive[c] = true;
        }

        double ratio = 1.0;
        if (head_in_anchor && vis(bin, kNeck) && vis(bin, kNose)) {
            const double driving_head = (at(bin, kNose) - at(bin, kNeck)).norm();
            if (driving_head > 0.0) ratio = anchor_head / driving_head;
        }
        if (dout.face) {
            if (alive[kNose]) {
                follow_attachment(dout.face, at(bin, kNose), at(bout, kNose), ratio);
            } else {
                silence_group(dout.face);
            }
        }
        const struct {
            int wrist;
            std::optional<std::vector<Keypoint2D>>* hand;
        } hands[] = {{kRWrist, &dout.right_hand}, {kLWrist, &dout.left_hand}};
        for (const auto& h : hands) {
            if (!*h.hand) continue;
            if (alive[static_cast<std::size_t>(h.wrist)]) {
                follow_attachment(*h.hand, at(bin, h.wrist), at(bout, h.wrist), ratio);
            } else {
                silence_group(*h.hand);
            }
        }
    }
    return out;
}

PoseSequence apply_rescale(const PoseSequence& seq, const RescaleOp& op,
                           const SkeletonTopology& topo) {
    PoseSequence out = seq;
    for (FullPose& frame : out.frames) rescale_frame(frame, op, topo);
    return out;
}

TransformPlan sample_plan(std::uint64_t seed, double lambda, const RescaleConfig& config,
                          std::size_t pool_size) {
    if (pool_size == 0) throw PoolError("cannot sample a plan from an empty pool");
    if (!std::isfinite(lambda) || lambda < 0.0 || lambda > 1.0)
        throw ArgumentError("lambda must lie in [0, 1]");
    config.validate();

    TransformPlan plan;
    plan.seed = seed;
    plan.lambda = lambda;
    SplitMix64 rng(seed);
    plan.applied = rng.next_double() < lambda;
    if (!plan.applied) return plan;

    plan.anchor_index = rng.next_index(pool_size);
    for (RescaleKind kind : kRescaleSamplingOrder) {
        const int k = static_cast<int>(kind);
        if (rng.next_double() >= config.p_op[k]) continue;
        RescaleOp op;
        op.kind = kind;
        if (is_scale_kind(kind)) {
            op.factor = rng.next_uniform(config.range[k].lo, config.range[k].hi);
        } else {
            op.part = static_cast<BodyPart>(rng.next_index(kBodyPartCount));
        }
        plan.ops.push_back(op);
    }
    return plan;
}

PoseSequence apply_plan(const PoseSequence& seq, const TransformPlan& plan, const BodyPose& anchor,
                        const SkeletonTopology& topo) {
    if (!plan.applied) return seq;
    PoseSequence out = realign(seq, anchor, topo);
    for (const RescaleOp& op : plan.ops) out = apply_rescale(out, op, topo);
    return out;
}

std::string serialize_transform_plan(const TransformPlan& plan) {
    std::string out = "{\"seed\":";
    out += std::to_string(plan.seed);
    out += ",\"lambda\":";
    out += format_real(plan.lambda);
    out += ",\"applied\":";
    out += plan.applied ? "true" : "false";
    out += ",\"anchor_id\":";
    if (plan.applied) {
        out += '"';
        out += plan.anchor_id;
        out += '"';
    } else {
        out += "null";
    }
    out += ",\"ops\":[";
    for (std::size_t i = 0; i < plan.ops.size(); ++i) {
        if (i > 0) out += ',';
        const RescaleOp& op = plan.ops[i];
        out += "{\"kind\":\"";
        out += rescale_kind_name(op.kind);
        out += "\",\"factor\":";
        out += is_scale_kind(op.kind) ? format_real(op.factor) : "null";
        out += ",\"part\":";
        if (is_scale_kind(op.kind)) {
            out += "null";
        } else {
            out += '"';
            out += body_part_name(op.part);
            out += '"';
        }
        out += '}';
    }
    out += "]}";
    return out;
}

TransformPlan parse_transform_plan(std::string_view text) {
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
    if (!doc.is_object()) throw SchemaError("$", "plan document must be an object");

    auto member = [&](const char* key) -> const json& {
        auto it = doc.find(key);
        if (it == doc.end()) throw SchemaError(key, "missing required field");
        return *it;
    };

    TransformPlan plan;
    const json& seed = member("seed");
    if (!seed.is_number_unsigned() && !(seed.is_number_integer() && seed.get<long long>() >= 0))
        throw SchemaError("seed", "must be an unsigned integer");
    plan.seed = seed.get<std::uint64_t>();

    const json& lambda = member("lambda");
    if (!lambda.is_number()) throw SchemaError("lambda", "must be a number");
    plan.lambda = lambda.get<double>();
    if (!std::isfinite(plan.lambda) || plan.lambda < 0.0 || plan.lambda > 1.0)
        throw SchemaError("lambda", "must lie in [0, 1]");

    const json& applied = member("applied");
    if (!applied.is_boolean()) throw SchemaError("applied", "must be a boolean");
    plan.applied = applied.get<bool>();

    const json& anchor_id = member("anchor_id");
    const json& ops = member("ops");
    if (!ops.is_array()) throw SchemaError("ops", "must be an array");
    if (!plan.applied) {
        if (!anchor_id.is_null()) throw SchemaError("anchor_id", "must be null when not applied");
        if (!ops.empty()) throw SchemaError("ops", "must be empty when not applied");
        return plan;
    }
    if (!anchor_id.is_string()) throw SchemaError("anchor_id", "must be a string when applied");
    plan.anchor_id = anchor_id.get<std::string>();

    for (std::size_t i = 0; i < ops.size(); ++i) {
        const std::string scope = "ops[" + std::to_string(i) + "].";
        const json& node = ops[i];
        if (!node.is_object()) throw SchemaError("ops[" + std::to_string(i) + "]", "must be an object");
        auto it_kind = node.find("kind");
        if (it_kind == node.end() || !it_kind->is_string())
            throw SchemaError(scope + "kind", "must be a string");
        RescaleKind kind;
        try {
            kind = rescale_kind_from_name(it_kind->get<std::string>());
        } catch (const ArgumentError& e) {
            throw SchemaError(scope + "kind", e.what());
        }
        RescaleOp op;
        if (is_scale_kind(kind)) {
            auto it_f = node.find("factor");
            if (it_f == node.end() || !it_f->is_number())
                throw SchemaError(scope + "factor", "scale ops require a numeric factor");
            try {
                op = RescaleOp::scale(kind, it_f->get<double>());
            } catch (const ArgumentError& e) {
                throw SchemaError(scope + "factor", e.what());
            }
        } else {
            auto it_p = node.find("part");
            if (it_p == node.end() || !it_p->is_string())
                throw SchemaError(scope + "part", "Add/Drop ops require a part name");
            BodyPart part;
            try {
                part = body_part_from_name(it_p->get<std::string>());
            } catch (const ArgumentError& e) {
                throw SchemaError(scope + "part", e.what());
            }
            op = kind == RescaleKind::kDropPart ? RescaleOp::drop_part(part)
                                                : RescaleOp::add_part(part);
        }
        plan.ops.push_back(op);
    }
    return plan;
}

}  // namespace motionkit
