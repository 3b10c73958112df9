#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

namespace motionkit {

// Dense real tensor: row-major flat data plus a positive-dims shape.
struct LatentTensor {
    std::vector<std::size_t> shape;
    Eigen::ArrayXd data;  // length = product(shape), row-major order

    std::size_t size() const { return static_cast<std::size_t>(data.size()); }
};

std::size_t shape_product(const std::vector<std::size_t>& shape);  // ArgumentError on zero dims

// Zero-filled tensor of the given shape.
LatentTensor make_latent(std::vector<std::size_t> shape);

bool same_shape(const LatentTensor& a, const LatentTensor& b);
void require_same_shape(const LatentTensor& a, const LatentTensor& b);  // ShapeError

// FMAT container: "FMAT", u32 version=1, u32 ndim, u64 dims[ndim], then
// little-endian IEEE f64 payload in row-major order.
std::vector<std::uint8_t> encode_fmat(const LatentTensor& t);
LatentTensor decode_fmat(const std::uint8_t* bytes, std::size_t size);  // ParseError/SchemaError

LatentTensor read_fmat(const std::string& path);
void write_fmat(const std::string& path, const LatentTensor& t);

// Rank-2 FMAT convenience for feature matrices (rows = tokens).
Eigen::MatrixXd read_feature_matrix(const std::string& path);
void write_feature_matrix(const std::string& path, const Eigen::MatrixXd& m);

LatentTensor matrix_to_latent(const Eigen::MatrixXd& m);
Eigen::MatrixXd latent_to_matrix(const LatentTensor& t);  // ShapeError unless rank 2

// Named-tensor pack: "FPAK", u32 version=1, u64 manifest length, JSON
// manifest {"entries":[{"name":…,"offset":…}…]} (offsets into the blob
// section that follows), then concatenated FMAT records. Entries are sorted
// by name so identical content yields identical bytes.
void write_tensor_pack(const std::string& path,
                       const std::vector<std::pair<std::string, LatentTensor>>& tensors);
std::vector<std::pair<std::string, LatentTensor>> read_tensor_pack(const std::string& path);

}  // namespace motionkit
