#include "motionkit/topology.hpp"

#include <algorithm>

#include "motionkit/errors.hpp"

namespace motionkit {

const char* body_part_name(BodyPart part) {
    switch (part) {
        case BodyPart::kLeftArm: return "left_arm";
        case BodyPart::kRightArm: return "right_arm";
        case BodyPart::kLeftLeg: return "left_leg";
        case BodyPart::kRightLeg: return "right_leg";
    }
    return "unknown";
}

BodyPart body_part_from_name(const std::string& name) {
    if (name == "left_arm") return BodyPart::kLeftArm;
    if (name == "right_arm") return BodyPart::kRightArm;
    if (name == "left_leg") return BodyPart::kLeftLeg;
    if (name == "right_leg") return BodyPart::kRightLeg;
    throw ArgumentError("unknown body part '" + name + "'");
}

int SkeletonTopology::bone_index(const Bone& bone) const {
    const auto it = std::find(bones.begin(), bones.end(), bone);
    return it == bones.end() ? -1 : static_cast<int>(it - bones.begin());
}

std::vector<int> SkeletonTopology::subtree(int joint) const {
    std::vector<int> out{joint};
    for (std::size_t i = 0; i < out.size(); ++i) {
        for (int j = 0; j < kBodyJointCount; ++j) {
            if (parent[static_cast<std::size_t>(j)] == out[i]) out.push_back(j);
        }
    }
    return out;
}

const std::array<int, 3>& SkeletonTopology::part_joints(BodyPart part) const {
    return part_joint_table[static_cast<std::size_t>(part)];
}

int SkeletonTopology::part_attachment(BodyPart part) const {
    return parent[static_cast<std::size_t>(part_joints(part)[0])];
}

namespace {

Keypoint2D kp(double x, double y) { return Keypoint2D{x, y, 1.0}; }

SkeletonTopology build_default() {
    SkeletonTopology t;
    t.joint_names = {"nose",       "neck",       "r_shoulder", "r_elbow", "r_wrist",
                     "l_shoulder", "l_elbow",    "l_wrist",    "r_hip",   "r_knee",
                     "r_ankle",    "l_hip",      "l_knee",     "l_ankle", "r_eye",
                     "l_eye",      "r_ear",      "l_ear"};
    t.parent = {kNeck, -1,    kNeck, kRShoulder, kRElbow, kNeck, kLShoulder, kLElbow, kNeck,
                kRHip, kRKnee, kNeck, kLHip,     kLKnee,  kNose, kNose,      kREye,   kLEye};
    // Drawing order fixes the palette assignment; parents precede children.
    t.bones = {{kNeck, kRShoulder}, {kNeck, kLShoulder}, {kRShoulder, kRElbow},
               {kRElbow, kRWrist},  {kLShoulder, kLElbow}, {kLElbow, kLWrist},
               {kNeck, kRHip},      {kRHip, kRKnee},     {kRKnee, kRAnkle},
               {kNeck, kLHip},      {kLHip, kLKnee},     {kLKnee, kLAnkle},
               {kNeck, kNose},      {kNose, kREye},      {kREye, kREar},
               {kNose, kLEye},      {kLEye, kLEar}};

    t.shoulders_group = {kNeck, kRShoulder, kLShoulder};
    t.neck_group = {kNeck, kNose};
    t.face_group = {kNose, kREye, kLEye, kREar, kLEar};
    t.arms_group = {kRShoulder, kRElbow, kRWrist, kLShoulder, kLElbow, kLWrist};
    t.legs_group = {kRHip, kRKnee, kRAnkle, kLHip, kLKnee, kLAnkle};
    t.torso_group = {kNeck, kRHip, kLHip};

    t.part_joint_table = {{{kLShoulder, kLElbow, kLWrist},
                           {kRShoulder, kRElbow, kRWrist},
                           {kLHip, kLKnee, kLAnkle},
                           {kRHip, kRKnee, kRAnkle}}};

    auto& j = t.template_pose.joints;
    j[kNose] = kp(0.500, 0.180);
    j[kNeck] = kp(0.500, 0.280);
    j[kRShoulder] = kp(0.420, 0.280);
    j[kRElbow] = kp(0.420, 0.410);
    j[kRWrist] = kp(0.420, 0.540);
    j[kLShoulder] = kp(0.580, 0.280);
    j[kLElbow] = kp(0.580, 0.410);
    j[kLWrist] = kp(0.580, 0.540);
    j[kRHip] = kp(0.455, 0.530);
    j[kRKnee] = kp(0.455, 0.750);
    j[kRAnkle] = kp(0.455, 0.970);
    j[kLHip] = kp(0.545, 0.530);
    j[kLKnee] = kp(0.545, 0.750);
    j[kLAnkle] = kp(0.545, 0.970);
    j[kREye] = kp(0.480, 0.155);
    j[kLEye] = kp(0.520, 0.155);
    j[kREar] = kp(0.460, 0.165);
    j[kLEar] = kp(0.540, 0.165);

    validate_topology(t);
    return t;
}

}  // namespace

const SkeletonTopology& default_topology() {
    static const SkeletonTopology topo = build_default();
    return topo;
}

void validate_topology(const SkeletonTopology& topo) {
    int roots = 0;
    for (int j = 0; j < kBodyJointCount; ++j) {
        const int p = topo.parent[static_cast<std::size_t>(j)];
        if (p == -1) {
            ++roots;
            if (j != kNeck) throw TopologyError("root joint must be the neck");
        } else if (p < 0 || p >= kBodyJointCount) {
            throw TopologyError("parent index out of range");
        }
    }
    if (roots != 1) throw TopologyError("topology must have exactly one root");

    if (topo.bones.size() != kBodyJointCount - 1)
        throw TopologyError("an 18-joint tree must have exactly 17 bones");

    std::array<bool, kBodyJointCount> seen_child{};
    std::array<bool, kBodyJointCount> placed{};
    placed[kNeck] = true;
    for (const Bone& b : topo.bones) {
        if (b.parent < 0 || b.parent >= kBodyJointCount || b.child < 0 ||
            b.child >= kBodyJointCount)
            throw TopologyError("bone endpoint out of range");
        if (topo.parent[static_cast<std::size_t>(b.child)] != b.parent)
            throw TopologyError("bone list disagrees with the parent relation");
        if (seen_child[static_cast<std::size_t>(b.child)])
            throw TopologyError("joint appears as child of two bones");
        if (!placed[static_cast<std::size_t>(b.parent)])
            throw TopologyError("bone list must place parents before children");
        seen_child[static_cast<std::size_t>(b.child)] = true;
        placed[static_cast<std::size_t>(b.child)] = true;
    }
    for (int j = 0; j < kBodyJointCount; ++j) {
        if (j != kNeck && !seen_child[static_cast<std::size_t>(j)])
            throw TopologyError("non-root joint missing from the bone list");
    }

    std::array<bool, kBodyJointCount> covered{};
    for (const auto* group : {&topo.shoulders_group, &topo.neck_group, &topo.face_group,
                              &topo.arms_group, &topo.legs_group, &topo.torso_group}) {
        for (int j : *group) {
            if (j < 0 || j >= kBodyJointCount) throw TopologyError("group joint out of range");
            covered[static_cast<std::size_t>(j)] = true;
        }
    }
    if (!std::all_of(covered.begin(), covered.end(), [](bool b) { return b; }))
        throw TopologyError("part groups must cover all 18 joints");
}

std::optional<Eigen::Vector2d> bone_vector(const BodyPose& pose, const Bone& bone,
                                           const SkeletonTopology& topo,
                                           double min_confidence) {
    if (topo.bone_index(bone) < 0) throw TopologyError("bone is not part of the topology");
    const Keypoint2D& p = pose.joints[static_cast<std::size_t>(bone.parent)];
    const Keypoint2D& c = pose.joints[static_cast<std::size_t>(bone.child)];
    if (!p.visible(min_confidence) || !c.visible(min_confidence)) return std::nullopt;
    return Eigen::Vector2d(c.x - p.x, c.y - p.y);
}

}  // namespace motionkit
