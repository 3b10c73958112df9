#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "motionkit/pose_types.hpp"

namespace motionkit {

inline constexpr double kLayerNormEps = 1e-5;

// Query-transformer extractor dimensions. model_dim must be divisible by
// num_heads; query_tokens is the number of query rows (one per body joint by
// default).
struct IPIConfig {
    int depth = 2;
    int model_dim = 64;
    int num_heads = 4;
    int ffn_dim = 256;
    int query_tokens = kBodyJointCount;

    void validate() const;  // ArgumentError
};

struct IPILayerParams {
    Eigen::MatrixXd Wq, Wk, Wv, Wo;  // d×d projections
    Eigen::MatrixXd W1, W2;          // d×ffn, ffn×d
    Eigen::VectorXd b1, b2;          // ffn, d
    Eigen::VectorXd ln1_gain, ln1_bias;  // post-attention norm
    Eigen::VectorXd ln2_gain, ln2_bias;  // post-FFN norm
};

struct IPIParams {
    Eigen::MatrixXd embed;  // 3×d keypoint embedding
    Eigen::MatrixXd pos;    // M_q×d positional table
    Eigen::VectorXd enc_gain, enc_bias;  // encoder layer norm
    Eigen::MatrixXd q_l;    // M_q×d learnable query
    std::vector<IPILayerParams> layers;
};

// Uniform(−0.1, 0.1) from a splitmix64 stream, tensors filled in declaration
// order (embed, pos, enc_gain, enc_bias, per-layer Wq Wk Wv Wo W1 b1 W2 b2
// ln1_gain ln1_bias ln2_gain ln2_bias), except q_l which starts at zero so an
// untrained merge is the identity on q_p.
IPIParams init_params(const IPIConfig& config, std::uint64_t seed);
void validate_params(const IPIParams& params, const IPIConfig& config);  // ShapeError

// q_p: token i = LayerNorm(embed([x_i, y_i, c_i]) + pos_i); keypoints below
// min_confidence embed as [0,0,0]. Requires config.query_tokens == 18.
Eigen::MatrixXd encode_keypoints(const BodyPose& pose, const IPIParams& params,
                                 const IPIConfig& config, double min_confidence = kMinConfidence);

// q_m = q_p + q_l (elementwise; ShapeError on mismatch).
Eigen::MatrixXd merge_query(const Eigen::MatrixXd& q_p, const Eigen::MatrixXd& q_l);

// Multi-head cross-attention: per head softmax((QW_Q)(KW_K)ᵀ/√(d/h))(KW_V),
// heads concatenated then projected by W_O. Output has Q's shape.
Eigen::MatrixXd cross_attention(const Eigen::MatrixXd& Q, const Eigen::MatrixXd& KV,
                                const IPILayerParams& layer, int num_heads);

// N stacked post-norm blocks: x ← LN1(x + CrossAttn(x, f_φ)); x ← LN2(x + FFN(x))
// with exact-erf GELU inside the FFN. Returns f_i (query-shaped).
Eigen::MatrixXd ipi_forward(const Eigen::MatrixXd& q_m, const Eigen::MatrixXd& f_phi_d,
                            const IPIParams& params, const IPIConfig& config);

// Residual injection x + α·CrossAttn(x, f_i); α = 0 returns x bitwise.
Eigen::MatrixXd motion_attention(const Eigen::MatrixXd& x, const Eigen::MatrixXd& f_i,
                                 const IPILayerParams& layer, int num_heads,
                                 double alpha = 1.0);

// Gradients of ⟨f_i, upstream⟩. Tensors not reachable from ipi_forward
// (encoder tables, q_l) are reported as zero blocks.
struct IPIGradients {
    Eigen::MatrixXd embed, pos, q_l;
    Eigen::VectorXd enc_gain, enc_bias;
    std::vector<IPILayerParams> layers;
    Eigen::MatrixXd q_m, f_phi_d;
};

IPIGradients ipi_backward(const Eigen::MatrixXd& q_m, const Eigen::MatrixXd& f_phi_d,
                          const IPIParams& params, const IPIConfig& config,
                          const Eigen::MatrixXd& upstream_grad);

struct GradCheckEntry {
    std::string name;
    double max_rel_error = 0.0;
};

struct GradCheckReport {
    std::vector<GradCheckEntry> entries;
    double tolerance = 1e-5;

    double worst() const;
    bool passed() const;
};

// Seeds random params/inputs, compares ipi_backward against central finite
// differences (step 1e-5). Per-tensor error = max |a−n| normalized by
// max(1e-6, ‖a‖_∞, ‖n‖_∞). Covers every parameter tensor plus both inputs.
GradCheckReport gradcheck(const IPIConfig& config, std::uint64_t seed);

// Params container on disk (named-tensor pack). Load validates shapes
// against the supplied config.
void save_params(const std::string& path, const IPIParams& params);
IPIParams load_params(const std::string& path, const IPIConfig& config);

}  // namespace motionkit
