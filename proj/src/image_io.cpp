#include "motionkit/image_io.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <csetjmp>
#include <cstdio>
#include <filesystem>
#include <sstream>

#include <png.h>

#include "motionkit/errors.hpp"

namespace motionkit {
namespace {

struct FileGuard {
    FILE* f = nullptr;
    ~FileGuard() {
        if (f) std::fclose(f);
    }
};

std::string lower_extension(const std::string& path) {
    std::string ext = std::filesystem::path(path).extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(),
                   [](unsigned char c) { return std::tolower(c); });
    return ext;
}

unsigned char to_byte(double v) {
    const double clamped = std::clamp(v, 0.0, 1.0);
    return static_cast<unsigned char>(std::lround(clamped * 255.0));
}

// Skips whitespace and '#' comments, then reads one non-negative integer.
int next_pnm_int(std::istringstream& in, const char* what) {
    for (;;) {
        in >> std::ws;
        if (in.peek() == '#') {
            std::string line;
            std::getline(in, line);
            continue;
        }
        break;
    }
    long long v = 0;
    if (!(in >> v) || v < 0)
        throw ParseError(std::string("expected a non-negative integer for ") + what, 1, 0);
    return static_cast<int>(v);
}

}  // namespace

ImageF read_png(const std::string& path) {
    FileGuard file{std::fopen(path.c_str(), "rb")};
    if (!file.f) throw IoError(path, "cannot open file for reading");

    unsigned char sig[8];
    if (std::fread(sig, 1, 8, file.f) != 8 || png_sig_cmp(sig, 0, 8))
        throw ParseError("file does not start with a PNG signature", 1, 0);

    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png) throw IoError(path, "failed to allocate PNG reader");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_read_struct(&png, nullptr, nullptr);
        throw IoError(path, "failed to allocate PNG info");
    }

    std::vector<unsigned char> pixels;
    std::vector<png_bytep> rows;
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw ParseError("corrupt PNG data", 1, 0);
    }

    png_init_io(png, file.f);
    png_set_sig_bytes(png, 8);
    png_read_info(png, info);

    const png_uint_32 width = png_get_image_width(png, info);
    const png_uint_32 height = png_get_image_height(png, info);
    const int color_type = png_get_color_type(png, info);
    const int bit_depth = png_get_bit_depth(png, info);

    if (color_type == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
    if (color_type == PNG_COLOR_TYPE_GRAY && bit_depth < 8) png_set_expand_gray_1_2_4_to_8(png);
    if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
    if (bit_depth == 16) png_set_strip_16(png);
    png_set_strip_alpha(png);
    png_read_update_info(png, info);

    const int channels = png_get_channels(png, info);
    if (channels != 1 && channels != 3) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw ShapeError("PNG decoded to an unsupported channel count");
    }

    const std::size_t rowbytes = png_get_rowbytes(png, info);
    pixels.resize(rowbytes * height);
    rows.resize(height);
    for (png_uint_32 y = 0; y < height; ++y) rows[y] = pixels.data() + y * rowbytes;
    png_read_image(png, rows.data());
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);

    ImageF img = make_image(static_cast<int>(width), static_cast<int>(height), channels);
    const std::size_t samples_per_row = static_cast<std::size_t>(width) * channels;
    for (png_uint_32 y = 0; y < height; ++y)
        for (std::size_t i = 0; i < samples_per_row; ++i)
            img.data[y * samples_per_row + i] = pixels[y * rowbytes + i] / 255.0;
    return img;
}

void write_png(const std::string& path, const ImageF& img) {
    validate_image(img);
    FileGuard file{std::fopen(path.c_str(), "wb")};
    if (!file.f) throw IoError(path, "cannot open file for writing");

    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png) throw IoError(path, "failed to allocate PNG writer");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_write_struct(&png, nullptr);
        throw IoError(path, "failed to allocate PNG info");
    }

    std::vector<unsigned char> bytes(img.data.size());
    std::vector<png_bytep> rows(static_cast<std::size_t>(img.height));
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw IoError(path, "failed to write PNG data");
    }

    png_init_io(png, file.f);
    png_set_IHDR(png, info, static_cast<png_uint_32>(img.width),
                 static_cast<png_uint_32>(img.height), 8,
                 img.channels == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB,
                 PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);

    for (std::size_t i = 0; i < img.data.size(); ++i) bytes[i] = to_byte(img.data[i]);
    const std::size_t samples_per_row =
        static_cast<std::size_t>(img.width) * static_cast<std::size_t>(img.channels);
    for (int y = 0; y < img.height; ++y)
        rows[static_cast<std::size_t>(y)] = bytes.data() + static_cast<std::size_t>(y) * samples_per_row;
    png_write_image(png, rows.data());
    png_write_end(png, info);
    png_destroy_write_struct(&png, &info);

    if (std::fflush(file.f) != 0) throw IoError(path, "failed to flush file");
}

ImageF read_pnm(const std::string& path) {
    std::string text;
    {
        FileGuard file{std::fopen(path.c_str(), "rb")};
        if (!file.f) throw IoError(path, "cannot open file for reading");
        std::fseek(file.f, 0, SEEK_END);
        const long size = std::ftell(file.f);
        if (size < 0) throw IoError(path, "failed to determine file size");
        std::fseek(file.f, 0, SEEK_SET);
        text.resize(static_cast<std::size_t>(size));
        if (size > 0 && std::fread(text.data(), 1, text.size(), file.f) != text.size())
            throw IoError(path, "failed to read file");
    }
    std::istringstream in(text);
    std::string magic;
    in >> magic;
    int channels = 0;
    if (magic == "P2")
        channels = 1;
    else if (magic == "P3")
        channels = 3;
    else
        throw ParseError("expected netpbm magic P2 or P3", 1, 0);

    const int width = next_pnm_int(in, "width");
    const int height = next_pnm_int(in, "height");
    const int maxval = next_pnm_int(in, "maxval");
    if (width < 1 || height < 1) throw ParseError("image dimensions must be positive", 1, 0);
    if (maxval < 1 || maxval > 65535) throw ParseError("maxval must lie in [1, 65535]", 1, 0);

    ImageF img = make_image(width, height, channels);
    for (std::size_t i = 0; i < img.data.size(); ++i) {
        const int v = next_pnm_int(in, "sample");
        if (v > maxval) throw ParseError("sample exceeds maxval", 1, 0);
        img.data[i] = static_cast<double>(v) / maxval;
    }
    return img;
}

void write_pnm(const std::string& path, const ImageF& img) {
    validate_image(img);
    std::string out;
    out += img.channels == 1 ? "P2\n" : "P3\n";
    out += std::to_string(img.width) + " " + std::to_string(img.height) + "\n255\n";
    for (int y = 0; y < img.height; ++y) {
        for (int x = 0; x < img.width; ++x) {
            for (int c = 0; c < img.channels; ++c) {
                if (c || x) out += ' ';
                out += std::to_string(static_cast<int>(to_byte(img.at(x, y, c))));
            }
        }
        out += '\n';
    }
    FileGuard file{std::fopen(path.c_str(), "wb")};
    if (!file.f) throw IoError(path, "cannot open file for writing");
    if (std::fwrite(out.data(), 1, out.size(), file.f) != out.size() ||
        std::fflush(file.f) != 0)
        throw IoError(path, "failed to write file");
}

ImageF read_image(const std::string& path) {
    const std::string ext = lower_extension(path);
    if (ext == ".png") return read_png(path);
    if (ext == ".ppm" || ext == ".pgm") return read_pnm(path);
    throw ArgumentError("unsupported image extension '" + ext + "'");
}

void write_image(const std::string& path, const ImageF& img) {
    const std::string ext = lower_extension(path);
    if (ext == ".png") {
        write_png(path, img);
        return;
    }
    if (ext == ".ppm") {
        if (img.channels != 3) throw ArgumentError(".ppm output requires a 3-channel image");
        write_pnm(path, img);
        return;
    }
    if (ext == ".pgm") {
        if (img.channels != 1) throw ArgumentError(".pgm output requires a 1-channel image");
        write_pnm(path, img);
        return;
    }
    throw ArgumentError("unsupported image extension '" + ext + "'");
}

std::vector<std::string> list_image_files(const std::string& dir) {
    namespace fs = std::filesystem;
    std::error_code ec;
    if (!fs::is_directory(dir, ec)) throw IoError(dir, "not a directory");
    std::vector<std::string> files;
    for (const fs::directory_entry& entry : fs::directory_iterator(dir, ec)) {
        if (!entry.is_regular_file()) continue;
        const std::string ext = lower_extension(entry.path().string());
        if (ext == ".png" || ext == ".ppm" || ext == ".pgm")
            files.push_back(entry.path().string());
    }
    if (ec) throw IoError(dir, "failed to list directory");
    std::sort(files.begin(), files.end(), [](const std::string& a, const std::string& b) {
        return fs::path(a).filename().string() < fs::path(b).filename().string();
    });
    return files;
}

}  // namespace motionkit
