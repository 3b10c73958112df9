#include "motionkit/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include <Eigen/Dense>

#include "motionkit/errors.hpp"

namespace motionkit {
namespace {

constexpr int kSsimWindow = 11;
constexpr double kSsimSigma = 1.5;
constexpr double kSsimC1 = 0.01 * 0.01;
constexpr double kSsimC2 = 0.03 * 0.03;

void require_same_shape(const ImageF& a, const ImageF& b) {
    if (a.width != b.width || a.height != b.height || a.channels != b.channels)
        throw ShapeError("images must have identical width, height and channel count");
}

double sum_abs_diff(const ImageF& a, const ImageF& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.data.size(); ++i) s += std::abs(a.data[i] - b.data[i]);
    return s;
}

double sum_sq_diff(const ImageF& a, const ImageF& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.data.size(); ++i) {
        const double d = a.data[i] - b.data[i];
        s += d * d;
    }
    return s;
}

Eigen::VectorXd ssim_window_weights() {
    Eigen::VectorXd g(kSsimWindow);
    const int half = kSsimWindow / 2;
    for (int i = 0; i < kSsimWindow; ++i) {
        const double d = i - half;
        g[i] = std::exp(-d * d / (2.0 * kSsimSigma * kSsimSigma));
    }
    return g / g.sum();
}

Eigen::MatrixXd channel_plane(const ImageF& img, int c) {
    Eigen::MatrixXd m(img.height, img.width);
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x) m(y, x) = img.at(x, y, c);
    return m;
}

// Separable valid-mode blur: output is (h−10)×(w−10).
Eigen::MatrixXd blur_valid(const Eigen::MatrixXd& m, const Eigen::VectorXd& g) {
    const Eigen::Index span = g.size();
    Eigen::MatrixXd horiz(m.rows(), m.cols() - span + 1);
    for (Eigen::Index x = 0; x < horiz.cols(); ++x)
        horiz.col(x) = m.middleCols(x, span) * g;
    Eigen::MatrixXd out(m.rows() - span + 1, horiz.cols());
    for (Eigen::Index y = 0; y < out.rows(); ++y)
        out.row(y) = g.transpose() * horiz.middleRows(y, span);
    return out;
}

}  // namespace

ImageF make_image(int width, int height, int channels, double fill) {
    if (width < 1 || height < 1) throw ArgumentError("image dimensions must be positive");
    if (channels != 1 && channels != 3) throw ArgumentError("channel count must be 1 or 3");
    if (!(fill >= 0.0 && fill <= 1.0)) throw ArgumentError("fill value must lie in [0, 1]");
    ImageF img;
    img.width = width;
    img.height = height;
    img.channels = channels;
    img.data.assign(static_cast<std::size_t>(width) * static_cast<std::size_t>(height) *
                        static_cast<std::size_t>(channels),
                    fill);
    return img;
}

void validate_image(const ImageF& img) {
    if (img.width < 1 || img.height < 1)
        throw ShapeError("image dimensions must be positive");
    if (img.channels != 1 && img.channels != 3)
        throw ShapeError("channel count must be 1 or 3");
    const std::size_t expected = static_cast<std::size_t>(img.width) *
                                 static_cast<std::size_t>(img.height) *
                                 static_cast<std::size_t>(img.channels);
    if (img.data.size() != expected)
        throw ShapeError("image buffer size does not match its dimensions");
    for (double v : img.data)
        if (!(v >= 0.0 && v <= 1.0)) throw ArgumentError("image samples must lie in [0, 1]");
}

double l1(const ImageF& a, const ImageF& b) {
    require_same_shape(a, b);
    return sum_abs_diff(a, b) / static_cast<double>(a.data.size());
}

double mse(const ImageF& a, const ImageF& b) {
    require_same_shape(a, b);
    return sum_sq_diff(a, b) / static_cast<double>(a.data.size());
}

double psnr(const ImageF& a, const ImageF& b) {
    const double m = mse(a, b);
    if (m == 0.0) throw DegenerateError("psnr is undefined for identical images");
    return 10.0 * std::log10(1.0 / m);
}

double psnr_star(const std::vector<ImageF>& a, const std::vector<ImageF>& b) {
    if (a.empty() || b.empty()) throw ArgumentError("psnr_star requires at least one frame pair");
    if (a.size() != b.size())
        throw ArgumentError("psnr_star requires the same number of frames on both sides");
    double sum = 0.0;
    std::size_t count = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        require_same_shape(a[i], b[i]);
        sum += sum_sq_diff(a[i], b[i]);
        count += a[i].data.size();
    }
    const double pooled = std::max(sum / static_cast<double>(count), kPsnrStarFloor);
    return 10.0 * std::log10(1.0 / pooled);
}

double ssim(const ImageF& a, const ImageF& b) {
    require_same_shape(a, b);
    if (a.width < kSsimWindow || a.height < kSsimWindow)
        throw ShapeError("ssim requires images at least 11 pixels in each dimension");
    const Eigen::VectorXd g = ssim_window_weights();
    double total = 0.0;
    for (int c = 0; c < a.channels; ++c) {
        const Eigen::MatrixXd x = channel_plane(a, c);
        const Eigen::MatrixXd y = channel_plane(b, c);
        const Eigen::MatrixXd mu_x = blur_valid(x, g);
        const Eigen::MatrixXd mu_y = blur_valid(y, g);
        const Eigen::MatrixXd sxx = blur_valid(x.cwiseProduct(x), g) - mu_x.cwiseProduct(mu_x);
        const Eigen::MatrixXd syy = blur_valid(y.cwiseProduct(y), g) - mu_y.cwiseProduct(mu_y);
        const Eigen::MatrixXd sxy = blur_valid(x.cwiseProduct(y), g) - mu_x.cwiseProduct(mu_y);
        const Eigen::ArrayXXd numer = (2.0 * mu_x.cwiseProduct(mu_y).array() + kSsimC1) *
                                      (2.0 * sxy.array() + kSsimC2);
        const Eigen::ArrayXXd denom =
            (mu_x.array().square() + mu_y.array().square() + kSsimC1) *
            (sxx.array() + syy.array() + kSsimC2);
        total += (numer / denom).mean();
    }
    return total / a.channels;
}

GaussianStats gaussian_stats(const Eigen::MatrixXd& samples) {
    if (samples.rows() < 2)
        throw ArgumentError("covariance estimation requires at least two samples");
    if (samples.cols() < 1) throw ArgumentError("samples must have at least one feature");
    GaussianStats stats;
    stats.mean = samples.colwise().mean();
    const Eigen::MatrixXd centered = samples.rowwise() - stats.mean.transpose();
    Eigen::MatrixXd cov =
        centered.transpose() * centered / static_cast<double>(samples.rows() - 1);
    stats.cov = 0.5 * (cov + cov.transpose());
    return stats;
}

double frechet_distance(const Eigen::VectorXd& mean_p, const Eigen::MatrixXd& cov_p,
                        const Eigen::VectorXd& mean_q, const Eigen::MatrixXd& cov_q) {
    const Eigen::Index n = mean_p.size();
    if (mean_q.size() != n) throw ShapeError("mean vectors must have the same dimension");
    if (cov_p.rows() != n || cov_p.cols() != n || cov_q.rows() != n || cov_q.cols() != n)
        throw ShapeError("covariance matrices must be square and match the mean dimension");

    const Eigen::MatrixXd prod = cov_p * cov_q;
    const Eigen::MatrixXd sym = 0.5 * (prod + prod.transpose());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(sym);
    if (solver.info() != Eigen::Success)
        throw NumericError("eigendecomposition failed in frechet_distance");
    // Negative eigenvalues are numerical noise from the symmetrized product.
    const Eigen::ArrayXd roots = solver.eigenvalues().array().max(0.0).sqrt();
    const double trace_sqrt = roots.sum();

    const double mean_term = (mean_p - mean_q).squaredNorm();
    const double value = mean_term + cov_p.trace() + cov_q.trace() - 2.0 * trace_sqrt;
    return std::max(value, 0.0);
}

}  // namespace motionkit
