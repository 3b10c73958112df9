#pragma once

#include <array>
#include <optional>
#include <vector>

namespace motionkit {

// Joints below this confidence are treated as missing by all geometry and
// rendering code.
inline constexpr double kMinConfidence = 0.3;

inline constexpr int kBodyJointCount = 18;
inline constexpr int kFaceKeypointCount = 68;
inline constexpr int kHandKeypointCount = 21;

// One detected keypoint in normalized canvas coordinates: x rightward,
// y downward, both nominally in [0, 1]. confidence == 0 marks a missing
// detection whose coordinates carry no meaning.
struct Keypoint2D {
    double x = 0.0;
    double y = 0.0;
    double confidence = 0.0;

    bool visible(double min_confidence = kMinConfidence) const {
        return confidence >= min_confidence;
    }
};

// OpenPose-18 joint order.
enum Joint : int {
    kNose = 0,
    kNeck = 1,
    kRShoulder = 2,
    kRElbow = 3,
    kRWrist = 4,
    kLShoulder = 5,
    kLElbow = 6,
    kLWrist = 7,
    kRHip = 8,
    kRKnee = 9,
    kRAnkle = 10,
    kLHip = 11,
    kLKnee = 12,
    kLAnkle = 13,
    kREye = 14,
    kLEye = 15,
    kREar = 16,
    kLEar = 17,
};

struct BodyPose {
    std::array<Keypoint2D, kBodyJointCount> joints{};
};

// A body pose plus optional satellite keypoint groups. Optional groups are
// either absent or complete (68 face / 21 per hand entries).
struct FullPose {
    BodyPose body;
    std::optional<std::vector<Keypoint2D>> face;
    std::optional<std::vector<Keypoint2D>> left_hand;
    std::optional<std::vector<Keypoint2D>> right_hand;
};

// An ordered pose track. Canvas dimensions and fps are metadata only;
// coordinates stay normalized. All frames share the same set of present
// optional groups.
struct PoseSequence {
    int canvas_width = 0;
    int canvas_height = 0;
    double fps = 0.0;
    std::vector<FullPose> frames;
};

}  // namespace motionkit
