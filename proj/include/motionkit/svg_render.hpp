#pragma once

#include <array>
#include <string>

#include "motionkit/pose_types.hpp"
#include "motionkit/topology.hpp"

namespace motionkit {

// 18 hues evenly spaced on the HSV wheel (saturation 1, value 1); index i
// maps to hue i*360/18. Bones and joints both index into this palette.
std::array<std::uint8_t, 3> palette_color(int index);

// Draws one <line> per bone whose endpoints both meet min_confidence and one
// <circle> per visible joint, scaled to the given canvas. Body only: face and
// hand satellites are carried by the file format but not drawn here.
// Deterministic: identical inputs yield byte-identical SVG.
// Throws ArgumentError when canvas dimensions are not positive.
std::string render_svg(const FullPose& pose, int canvas_width, int canvas_height,
                       double min_confidence = kMinConfidence,
                       const SkeletonTopology& topo = default_topology());

}  // namespace motionkit
