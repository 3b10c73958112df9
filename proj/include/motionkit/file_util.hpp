#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace motionkit {

// Whole-file helpers; all throw IoError naming the path on failure.
std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, std::string_view content);
std::vector<std::uint8_t> read_binary_file(const std::string& path);
void write_binary_file(const std::string& path, const std::uint8_t* data, std::size_t size);

// Final path component ("dir/a.json" -> "a.json").
std::string path_basename(const std::string& path);

}  // namespace motionkit
