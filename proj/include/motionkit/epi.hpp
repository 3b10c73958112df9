#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "motionkit/pose_types.hpp"
#include "motionkit/topology.hpp"

namespace motionkit {

enum class RescaleKind : int {
    kScaleBody = 0,
    kScaleShoulder = 1,
    kScaleNeck = 2,
    kScaleFace = 3,
    kScaleArm = 4,
    kScaleLeg = 5,
    kDropPart = 6,
    kAddPart = 7,
};

inline constexpr int kRescaleKindCount = 8;

// Fixed sampling (and application) order of the op pool.
inline constexpr std::array<RescaleKind, kRescaleKindCount> kRescaleSamplingOrder = {
    RescaleKind::kScaleBody, RescaleKind::kScaleShoulder, RescaleKind::kScaleNeck,
    RescaleKind::kScaleFace, RescaleKind::kScaleArm,      RescaleKind::kScaleLeg,
    RescaleKind::kDropPart,  RescaleKind::kAddPart,
};

bool is_scale_kind(RescaleKind kind);
const char* rescale_kind_name(RescaleKind kind);
RescaleKind rescale_kind_from_name(const std::string& name);  // ArgumentError on unknown

// One pose transformation. Scale kinds carry a factor; Add/Drop carry a part.
struct RescaleOp {
    RescaleKind kind = RescaleKind::kScaleBody;
    double factor = 1.0;
    BodyPart part = BodyPart::kLeftArm;

    static RescaleOp scale(RescaleKind kind, double factor);  // ArgumentError on non-scale kind
    static RescaleOp drop_part(BodyPart part);
    static RescaleOp add_part(BodyPart part);
};

struct FactorRange {
    double lo = 1.0;
    double hi = 1.0;
};

// Per-kind inclusion probabilities and factor ranges, indexed by RescaleKind.
struct RescaleConfig {
    std::array<double, kRescaleKindCount> p_op{};
    std::array<FactorRange, kRescaleKindCount> range{};

    static RescaleConfig defaults();
    void validate() const;  // ArgumentError on out-of-range values
};

// Outcome of one λ-probabilistic sampling pass. A pure function of
// (seed, lambda, config, pool size); see sample_plan.
struct TransformPlan {
    std::uint64_t seed = 0;
    double lambda = 0.0;
    bool applied = false;
    std::size_t anchor_index = 0;  // meaningful iff applied
    std::string anchor_id;         // resolved against a pose pool; empty until resolved
    std::vector<RescaleOp> ops;
};

// Retargets the driving sequence onto the anchor's body shape: bone
// directions (and hence the motion) come from the driving frames, bone
// lengths from the anchor, positions rebuilt from the neck outward. The neck
// track is translated so the first frame's neck lands on the anchor's neck.
// Face keypoints follow the nose, hands follow their wrists; both scale by
// the anchor/driving head-size ratio. A bone endpoint missing in a driving
// frame silences that child's whole subtree; a bone missing in the anchor
// falls back to the driving length.
// Throws AnchorError when the anchor lacks a visible neck or hip.
PoseSequence realign(const PoseSequence& driving, const BodyPose& anchor,
                     const SkeletonTopology& topo = default_topology());

// Applies one op to every frame. Scale ops re-do the affected bones and
// rigidly translate dependent joints; chains freeze at the first invisible
// joint so no motion is invented for meaningless coordinates. DropPart
// zeroes part confidences (arms take their hand along); AddPart instantiates
// an entirely-missing part (all confidences exactly 0) from the template
// pose scaled by the frame's torso length.
PoseSequence apply_rescale(const PoseSequence& seq, const RescaleOp& op,
                           const SkeletonTopology& topo = default_topology());

// Draws a plan from a splitmix64 stream seeded by `seed`, in this exact
// order: the λ Bernoulli (early return when it fails), the anchor index,
// then per kind in kRescaleSamplingOrder an inclusion draw followed — only
// when included — by a factor draw (scale kinds) or a part draw (Add/Drop).
// Throws PoolError when pool_size is 0, ArgumentError on bad lambda/config.
TransformPlan sample_plan(std::uint64_t seed, double lambda, const RescaleConfig& config,
                          std::size_t pool_size);

// Realigns to the anchor, then applies plan.ops in order. Not-applied plans
// return the input unchanged.
PoseSequence apply_plan(const PoseSequence& seq, const TransformPlan& plan,
                        const BodyPose& anchor, const SkeletonTopology& topo = default_topology());

// Audit sidecar: {"seed","lambda","applied","anchor_id","ops"}; byte-
// deterministic for identical plans.
std::string serialize_transform_plan(const TransformPlan& plan);
TransformPlan parse_transform_plan(std::string_view text);

}  // namespace motionkit
