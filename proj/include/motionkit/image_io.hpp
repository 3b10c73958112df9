#pragma once

#include <string>
#include <vector>

#include "motionkit/metrics.hpp"

namespace motionkit {

// 8-bit PNG decode; palette/16-bit/alpha inputs are normalized down to plain
// gray or RGB and samples are scaled to [0, 1].
ImageF read_png(const std::string& path);

// 8-bit PNG encode (gray for 1 channel, RGB for 3); samples are clamped to
// [0, 1] and rounded to the nearest byte.
void write_png(const std::string& path, const ImageF& img);

// ASCII netpbm: P2 (gray) and P3 (RGB), any maxval in [1, 65535] on read.
ImageF read_pnm(const std::string& path);
void write_pnm(const std::string& path, const ImageF& img);

// Dispatch on extension: .png, .ppm (RGB), .pgm (gray). ArgumentError otherwise.
ImageF read_image(const std::string& path);
void write_image(const std::string& path, const ImageF& img);

// Regular files in dir with a recognized image extension, sorted by filename.
std::vector<std::string> list_image_files(const std::string& dir);

}  // namespace motionkit
