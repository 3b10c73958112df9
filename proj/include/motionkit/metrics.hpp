#pragma once

#include <cstddef>
#include <vector>

#include <Eigen/Core>

namespace motionkit {

// Planar-free image container: row-major scanlines, channels interleaved,
// samples normalized to [0, 1]. channels is 1 (gray) or 3 (RGB).
struct ImageF {
    int width = 0;
    int height = 0;
    int channels = 0;
    std::vector<double> data;

    double at(int x, int y, int c) const {
        return data[(static_cast<std::size_t>(y) * static_cast<std::size_t>(width) +
                     static_cast<std::size_t>(x)) *
                        static_cast<std::size_t>(channels) +
                    static_cast<std::size_t>(c)];
    }
    double& at(int x, int y, int c) {
        return data[(static_cast<std::size_t>(y) * static_cast<std::size_t>(width) +
                     static_cast<std::size_t>(x)) *
                        static_cast<std::size_t>(channels) +
                    static_cast<std::size_t>(c)];
    }
};

// ArgumentError on non-positive dims or channels outside {1, 3}.
ImageF make_image(int width, int height, int channels, double fill = 0.0);

// ShapeError on inconsistent dims/buffer, ArgumentError on samples outside [0, 1].
void validate_image(const ImageF& img);

// Mean absolute difference over every sample. ShapeError on mismatched shapes.
double l1(const ImageF& a, const ImageF& b);

// Mean squared difference over every sample. ShapeError on mismatched shapes.
double mse(const ImageF& a, const ImageF& b);

// 10·log10(1 / MSE) for unit-range images. DegenerateError when MSE is zero.
double psnr(const ImageF& a, const ImageF& b);

// Sequence PSNR: one MSE pooled across all frame pairs before the log, with the
// pooled MSE floored at 1e-10 so identical sequences report the 100 dB cap.
double psnr_star(const std::vector<ImageF>& a, const std::vector<ImageF>& b);

inline constexpr double kPsnrStarFloor = 1e-10;

// Structural similarity with an 11×11 Gaussian window (σ = 1.5), C1 = 0.01²,
// C2 = 0.03², averaged over valid windows only; multichannel images average
// the per-channel scores. ShapeError when min(width, height) < 11.
double ssim(const ImageF& a, const ImageF& b);

struct GaussianStats {
    Eigen::VectorXd mean;
    Eigen::MatrixXd cov;
};

// Column-wise mean and unbiased covariance (1/(n−1)) of row samples, with the
// covariance symmetrized as (C + Cᵀ)/2. ArgumentError when rows < 2.
GaussianStats gaussian_stats(const Eigen::MatrixXd& samples);

// ‖μp−μq‖² + Tr(Σp + Σq − 2·sqrt((ΣpΣq + (ΣpΣq)ᵀ)/2)), eigenvalues clamped at
// zero before the square root and the result clamped at zero. ShapeError on
// dimension mismatches, NumericError if the eigensolver fails.
double frechet_distance(const Eigen::VectorXd& mean_p, const Eigen::MatrixXd& cov_p,
                        const Eigen::VectorXd& mean_q, const Eigen::MatrixXd& cov_q);

inline double frechet_distance(const GaussianStats& p, const GaussianStats& q) {
    return frechet_distance(p.mean, p.cov, q.mean, q.cov);
}

}  // namespace motionkit
