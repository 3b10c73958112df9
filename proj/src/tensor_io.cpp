#include "motionkit/tensor.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>

#include <json.hpp>

#include "motionkit/errors.hpp"
#include "motionkit/file_util.hpp"

namespace motionkit {
namespace {

constexpr std::size_t kMaxElements = std::size_t(1) << 32;
constexpr std::size_t kMaxDims = 32;

void store_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void store_u64(std::vector<std::uint8_t>& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void store_f64(std::vector<std::uint8_t>& out, double d) {
    store_u64(out, std::bit_cast<std::uint64_t>(d));
}

// Bounds-checked little-endian reader over a byte span.
struct Reader {
    const std::uint8_t* p;
    std::size_t size;
    std::size_t pos = 0;

    void need(std::size_t n) const {
        if (pos + n > size) throw ParseError("unexpected end of FMAT data", 1, pos);
    }
    std::uint32_t u32() {
        need(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= std::uint32_t(p[pos + i]) << (8 * i);
        pos += 4;
        return v;
    }
    std::uint64_t u64() {
        need(8);
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= std::uint64_t(p[pos + i]) << (8 * i);
        pos += 8;
        return v;
    }
    double f64() { return std::bit_cast<double>(u64()); }
};

}  // namespace

std::size_t shape_product(const std::vector<std::size_t>& shape) {
    if (shape.empty()) throw ArgumentError("tensor shape must have at least one dimension");
    std::size_t n = 1;
    for (std::size_t d : shape) {
        if (d == 0) throw ArgumentError("tensor dimensions must be positive");
        if (d > kMaxElements / n) throw ArgumentError("tensor shape too large");
        n *= d;
    }
    return n;
}

LatentTensor make_latent(std::vector<std::size_t> shape) {
    const std::size_t n = shape_product(shape);
    LatentTensor t;
    t.shape = std::move(shape);
    t.data = Eigen::ArrayXd::Zero(static_cast<Eigen::Index>(n));
    return t;
}

bool same_shape(const LatentTensor& a, const LatentTensor& b) { return a.shape == b.shape; }

void require_same_shape(const LatentTensor& a, const LatentTensor& b) {
    if (!same_shape(a, b)) throw ShapeError("tensor shapes do not match");
}

std::vector<std::uint8_t> encode_fmat(const LatentTensor& t) {
    const std::size_t n = shape_product(t.shape);
    if (n != t.size()) throw ShapeError("tensor data length does not match its shape");
    std::vector<std::uint8_t> out;
    out.reserve(12 + 8 * t.shape.size() + 8 * n);
    out.insert(out.end(), {'F', 'M', 'A', 'T'});
    store_u32(out, 1);
    store_u32(out, static_cast<std::uint32_t>(t.shape.size()));
    for (std::size_t d : t.shape) store_u64(out, d);
    for (Eigen::Index i = 0; i < t.data.size(); ++i) store_f64(out, t.data[i]);
    return out;
}

LatentTensor decode_fmat(const std::uint8_t* bytes, std::size_t size) {
    Reader r{bytes, size};
    r.need(4);
    if (std::memcmp(bytes, "FMAT", 4) != 0) throw ParseError("bad FMAT magic", 1, 0);
    r.pos = 4;
    const std::uint32_t version = r.u32();
    if (version != 1) throw SchemaError("version", "unsupported FMAT version");
    const std::uint32_t ndim = r.u32();
    if (ndim == 0 || ndim > kMaxDims) throw SchemaError("ndim", "must be between 1 and 32");

    LatentTensor t;
    t.shape.reserve(ndim);
    for (std::uint32_t i = 0; i < ndim; ++i) {
        const std::uint64_t d = r.u64();
        if (d == 0) throw SchemaError("dims", "dimensions must be positive");
        t.shape.push_back(static_cast<std::size_t>(d));
    }
    const std::size_t n = shape_product(t.shape);
    r.need(8 * n);
    t.data.resize(static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i) {
        const double v = r.f64();
        if (!std::isfinite(v)) throw SchemaError("data", "tensor values must be finite");
        t.data[static_cast<Eigen::Index>(i)] = v;
    }
    if (r.pos != size) throw ParseError("trailing bytes after FMAT payload", 1, r.pos);
    return t;
}

LatentTensor read_fmat(const std::string& path) {
    const auto bytes = read_binary_file(path);
    return decode_fmat(bytes.data(), bytes.size());
}

void write_fmat(const std::string& path, const LatentTensor& t) {
    const auto bytes = encode_fmat(t);
    write_binary_file(path, bytes.data(), bytes.size());
}

LatentTensor matrix_to_latent(const Eigen::MatrixXd& m) {
    LatentTensor t;
    t.shape = {static_cast<std::size_t>(m.rows()), static_cast<std::size_t>(m.cols())};
    t.data.resize(m.size());
    Eigen::Index k = 0;
    for (Eigen::Index i = 0; i < m.rows(); ++i)
        for (Eigen::Index j = 0; j < m.cols(); ++j) t.data[k++] = m(i, j);
    return t;
}

Eigen::MatrixXd latent_to_matrix(const LatentTensor& t) {
    if (t.shape.size() != 2) throw ShapeError("feature matrices must be rank-2 tensors");
    const auto rows = static_cast<Eigen::Index>(t.shape[0]);
    const auto cols = static_cast<Eigen::Index>(t.shape[1]);
    Eigen::MatrixXd m(rows, cols);
    Eigen::Index k = 0;
    for (Eigen::Index i = 0; i < rows; ++i)
        for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = t.data[k++];
    return m;
}

Eigen::MatrixXd read_feature_matrix(const std::string& path) {
    return latent_to_matrix(read_fmat(path));
}

void write_feature_matrix(const std::string& path, const Eigen::MatrixXd& m) {
    write_fmat(path, matrix_to_latent(m));
}

void write_tensor_pack(const std::string& path,
                       const std::vector<std::pair<std::string, LatentTensor>>& tensors) {
    std::vector<std::pair<std::string, LatentTensor>> sorted = tensors;
    std::sort(sorted.begin(), sorted.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });
    for (std::size_t i = 1; i < sorted.size(); ++i) {
        if (sorted[i - 1].first == sorted[i].first)
            throw ArgumentError("duplicate tensor name '" + sorted[i].first + "'");
    }

    std::vector<std::uint8_t> blobs;
    std::string manifest = "{\"entries\":[";
    for (std::size_t i = 0; i < sorted.size(); ++i) {
        if (i > 0) manifest += ',';
        manifest += "{\"name\":\"" + sorted[i].first +
                    "\",\"offset\":" + std::to_string(blobs.size()) + "}";
        const auto rec = encode_fmat(sorted[i].second);
        blobs.insert(blobs.end(), rec.begin(), rec.end());
    }
    manifest += "]}";

    std::vector<std::uint8_t> out;
    out.reserve(16 + manifest.size() + blobs.size());
    out.insert(out.end(), {'F', 'P', 'A', 'K'});
    store_u32(out, 1);
    store_u64(out, manifest.size());
    out.insert(out.end(), manifest.begin(), manifest.end());
    out.insert(out.end(), blobs.begin(), blobs.end());
    write_binary_file(path, out.data(), out.size());
}

std::vector<std::pair<std::string, LatentTensor>> read_tensor_pack(const std::string& path) {
    const auto bytes = read_binary_file(path);
    Reader r{bytes.data(), bytes.size()};
    r.need(4);
    if (std::memcmp(bytes.data(), "FPAK", 4) != 0) throw ParseError("bad FPAK magic", 1, 0);
    r.pos = 4;
    if (r.u32() != 1) throw SchemaError("version", "unsupported FPAK version");
    const std::uint64_t mlen = r.u64();
    r.need(mlen);
    const std::string manifest(reinterpret_cast<const char*>(bytes.data() + r.pos),
                               static_cast<std::size_t>(mlen));
    r.pos += static_cast<std::size_t>(mlen);
    const std::size_t blob_base = r.pos;

    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(manifest);
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError(e.what(), 1, blob_base - mlen + (e.byte > 0 ? e.byte - 1 : 0));
    }
    auto it = doc.find("entries");
    if (it == doc.end() || !it->is_array()) throw SchemaError("entries", "must be an array");

    std::vector<std::pair<std::string, std::size_t>> entries;
    for (const auto& node : *it) {
        if (!node.is_object() || !node.contains("name") || !node["name"].is_string() ||
            !node.contains("offset") || !node["offset"].is_number_unsigned())
            throw SchemaError("entries", "each entry needs a name and an unsigned offset");
        const auto offset = node["offset"].get<std::uint64_t>();
        if (blob_base + offset > bytes.size()) throw SchemaError("offset", "points past end of file");
        entries.emplace_back(node["name"].get<std::string>(), static_cast<std::size_t>(offset));
    }

    // Records are concatenated; each one ends where the next offset begins.
    std::vector<std::pair<std::string, LatentTensor>> out;
    for (const auto& [name, offset] : entries) {
        std::size_t end = bytes.size();
        for (const auto& [other_name, other] : entries) {
            (void)other_name;
            if (other > offset && blob_base + other < end) end = blob_base + other;
        }
        out.emplace_back(name, decode_fmat(bytes.data() + blob_base + offset, end - (blob_base + offset)));
    }
    return out;
}

}  // namespace motionkit
