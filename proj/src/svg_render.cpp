#include "motionkit/svg_render.hpp"

#include <cmath>
#include <cstdio>

#include "motionkit/errors.hpp"

namespace motionkit {
namespace {

std::string fmt3(double v) {
    char buf[48];
    std::snprintf(buf, sizeof(buf), "%.3f", v);
    return buf;
}

std::string hex_color(const std::array<std::uint8_t, 3>& rgb) {
    char buf[8];
    std::snprintf(buf, sizeof(buf), "#%02x%02x%02x", rgb[0], rgb[1], rgb[2]);
    return buf;
}

}  // namespace

std::array<std::uint8_t, 3> palette_color(int index) {
    const double h = static_cast<double>(index) * 360.0 / 18.0;
    // HSV -> RGB with s = v = 1.
    const double hp = h / 60.0;
    const int sector = static_cast<int>(std::floor(hp)) % 6;
    const double f = hp - std::floor(hp);
    const double q = 1.0 - f;
    const double t = f;
    double r = 0, g = 0, b = 0;
    switch (sector) {
        case 0: r = 1; g = t; b = 0; break;
        case 1: r = q; g = 1; b = 0; break;
        case 2: r = 0; g = 1; b = t; break;
        case 3: r = 0; g = q; b = 1; break;
        case 4: r = t; g = 0; b = 1; break;
        default: r = 1; g = 0; b = q; break;
    }
    auto channel = [](double v) {
        return static_cast<std::uint8_t>(std::lround(v * 255.0));
    };
    return {channel(r), channel(g), channel(b)};
}

std::string render_svg(const FullPose& pose, int canvas_width, int canvas_height,
                       double min_confidence, const SkeletonTopology& topo) {
    if (canvas_width <= 0 || canvas_height <= 0)
        throw ArgumentError("canvas dimensions must be positive");

    const double W = canvas_width;
    const double H = canvas_height;
    const std::string stroke_width = fmt3(H / 120.0);
    const std::string radius = fmt3(H / 200.0);

    std::string out;
    out.reserve(4096);
    out += "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"";
    out += std::to_string(canvas_width);
    out += "\" height=\"";
    out += std::to_string(canvas_height);
    out += "\" viewBox=\"0 0 ";
    out += std::to_string(canvas_width);
    out += ' ';
    out += std::to_string(canvas_height);
    out += "\">\n<rect width=\"";
    out += std::to_string(canvas_width);
    out += "\" height=\"";
    out += std::to_string(canvas_height);
    out += "\" fill=\"#000000\"/>\n";

    for (std::size_t i = 0; i < topo.bones.size(); ++i) {
        const Bone& bone = topo.bones[i];
        const Keypoint2D& p = pose.body.joints[static_cast<std::size_t>(bone.parent)];
        const Keypoint2D& c = pose.body.joints[static_cast<std::size_t>(bone.child)];
        if (!p.visible(min_confidence) || !c.visible(min_confidence)) continue;
        out += "<line x1=\"" + fmt3(p.x * W) + "\" y1=\"" + fmt3(p.y * H) + "\" x2=\"" +
               fmt3(c.x * W) + "\" y2=\"" + fmt3(c.y * H) + "\" stroke=\"" +
               hex_color(palette_color(static_cast<int>(i))) + "\" stroke-width=\"" +
               stroke_width + "\" stroke-linecap=\"round\"/>\n";
    }
    for (int j = 0; j < kBodyJointCount; ++j) {
        const Keypoint2D& kp = pose.body.joints[static_cast<std::size_t>(j)];
        if (!kp.visible(min_confidence)) continue;
        out += "<circle cx=\"" + fmt3(kp.x * W) + "\" cy=\"" + fmt3(kp.y * H) + "\" r=\"" +
               radius + "\" fill=\"" + hex_color(palette_color(j)) + "\"/>\n";
    }
    out += "</svg>\n";
    return out;
}

}  // namespace motionkit
