#include "motionkit/file_util.hpp"

#include <cstdio>
#include <memory>

#include "motionkit/errors.hpp"

namespace motionkit {
namespace {

struct FileCloser {
    void operator()(std::FILE* f) const {
        if (f) std::fclose(f);
    }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

FilePtr open_file(const std::string& path, const char* mode) {
    FilePtr f(std::fopen(path.c_str(), mode));
    if (!f) throw IoError(path, "cannot open file");
    return f;
}

std::vector<std::uint8_t> read_all(const std::string& path) {
    FilePtr f = open_file(path, "rb");
    std::vector<std::uint8_t> data;
    std::uint8_t buf[1 << 16];
    std::size_t n;
    while ((n = std::fread(buf, 1, sizeof(buf), f.get())) > 0) data.insert(data.end(), buf, buf + n);
    if (std::ferror(f.get())) throw IoError(path, "read failed");
    return data;
}

}  // namespace

std::string read_text_file(const std::string& path) {
    auto data = read_all(path);
    return {reinterpret_cast<const char*>(data.data()), data.size()};
}

std::vector<std::uint8_t> read_binary_file(const std::string& path) { return read_all(path); }

void write_text_file(const std::string& path, std::string_view content) {
    write_binary_file(path, reinterpret_cast<const std::uint8_t*>(content.data()), content.size());
}

void write_binary_file(const std::string& path, const std::uint8_t* data, std::size_t size) {
    FilePtr f = open_file(path, "wb");
    if (size > 0 && std::fwrite(data, 1, size, f.get()) != size)
        throw IoError(path, "write failed");
    if (std::fflush(f.get()) != 0) throw IoError(path, "write failed");
}

std::string path_basename(const std::string& path) {
    const std::size_t slash = path.find_last_of('/');
    return slash == std::string::npos ? path : path.substr(slash + 1);
}

}  // namespace motionkit
