#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "motionkit/pose_types.hpp"

namespace motionkit {

struct Bone {
    int parent = -1;
    int child = -1;

    friend bool operator==(const Bone& a, const Bone& b) {
        return a.parent == b.parent && a.child == b.child;
    }
};

enum class BodyPart : int {
    kLeftArm = 0,
    kRightArm = 1,
    kLeftLeg = 2,
    kRightLeg = 3,
};

inline constexpr int kBodyPartCount = 4;

const char* body_part_name(BodyPart part);
BodyPart body_part_from_name(const std::string& name);  // ArgumentError on unknown

// Skeleton structure shared by every module: the joint tree rooted at the
// neck, its bone list in drawing order, named part groups, and a canonical
// template pose used when instantiating missing parts.
struct SkeletonTopology {
    std::array<std::string, kBodyJointCount> joint_names;
    std::array<int, kBodyJointCount> parent;  // -1 at the root (neck)
    std::vector<Bone> bones;                  // 17 edges, parents precede children

    // Named groups; groups overlap only at attachment joints.
    std::vector<int> shoulders_group;
    std::vector<int> neck_group;
    std::vector<int> face_group;
    std::vector<int> arms_group;
    std::vector<int> legs_group;
    std::vector<int> torso_group;

    // Neutral upright stance with fixed proportions: torso 0.25 canvas
    // units, 0.22 per leg segment, 0.13 per arm segment, head 0.10.
    BodyPose template_pose;

    int bone_index(const Bone& bone) const;  // -1 when absent
    std::vector<int> subtree(int joint) const;  // joint plus all descendants
    const std::array<int, 3>& part_joints(BodyPart part) const;
    int part_attachment(BodyPart part) const;  // parent of the part's root joint

    std::array<std::array<int, 3>, kBodyPartCount> part_joint_table;
};

const SkeletonTopology& default_topology();

// child − parent displacement, or nullopt when either endpoint falls below
// min_confidence. The bone must belong to the topology (TopologyError).
std::optional<Eigen::Vector2d> bone_vector(const BodyPose& pose, const Bone& bone,
                                           const SkeletonTopology& topo,
                                           double min_confidence = kMinConfidence);

// Tree/shape sanity for externally constructed topologies. Throws
// TopologyError on violation.
void validate_topology(const SkeletonTopology& topo);

}  // namespace motionkit
