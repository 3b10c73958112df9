#include "motionkit/diffusion.hpp"

#include <cmath>
#include <numbers>

#include "motionkit/errors.hpp"
#include "motionkit/pose_io.hpp"

namespace motionkit {
namespace {

void check_step(int t, int T) {
    if (t < 1 || t > T) throw IndexError("step index " + std::to_string(t) + " outside [1, T]");
}

}  // namespace

ScheduleKind schedule_kind_from_name(const std::string& name) {
    if (name == "linear") return ScheduleKind::kLinear;
    if (name == "cosine") return ScheduleKind::kCosine;
    throw ArgumentError("unknown schedule kind '" + name + "'");
}

const char* schedule_kind_name(ScheduleKind kind) {
    return kind == ScheduleKind::kLinear ? "linear" : "cosine";
}

double NoiseSchedule::beta(int t) const {
    check_step(t, T);
    return betas[t - 1];
}

double NoiseSchedule::alpha(int t) const {
    check_step(t, T);
    return alphas[t - 1];
}

double NoiseSchedule::alpha_bar(int t) const {
    if (t == 0) return 1.0;
    check_step(t, T);
    return alpha_bars[t - 1];
}

NoiseSchedule make_schedule(int T, ScheduleKind kind, double beta_start, double beta_end) {
    if (T < 1) throw ArgumentError("schedule length T must be at least 1");

    NoiseSchedule s;
    s.T = T;
    s.betas.resize(T);
    if (kind == ScheduleKind::kLinear) {
        if (!(beta_start > 0.0) || !(beta_start <= beta_end) || !(beta_end < 1.0))
            throw ArgumentError("linear schedule requires 0 < beta_start <= beta_end < 1");
        for (int t = 1; t <= T; ++t) {
            s.betas[t - 1] =
                T == 1 ? beta_start
                       : beta_start + (beta_end - beta_start) * double(t - 1) / double(T - 1);
        }
    } else {
        const double sh = 0.008;
        auto profile = [&](double t) {
            const double c = std::cos(((t / T + sh) / (1.0 + sh)) * std::numbers::pi / 2.0);
            return c * c;
        };
        const double f0 = profile(0.0);
        double prev = 1.0;  // ᾱ_0 of the raw profile
        for (int t = 1; t <= T; ++t) {
            const double cur = profile(double(t)) / f0;
            double beta = 1.0 - cur / prev;
            if (beta > 0.999) beta = 0.999;
            if (beta <= 0.0) beta = 1e-12;  // guards fp rounding at tiny t for huge T
            s.betas[t - 1] = beta;
            prev = cur;
        }
    }

    s.alphas = 1.0 - s.betas;
    s.alpha_bars.resize(T);
    double bar = 1.0;
    for (int t = 1; t <= T; ++t) {
        bar *= s.alphas[t - 1];
        s.alpha_bars[t - 1] = bar;
    }
    for (int t = 1; t <= T; ++t) {
        if (s.alpha_bar(t) >= s.alpha_bar(t - 1))
            throw ScheduleError("alpha_bar must be strictly decreasing");
    }
    if (s.alpha_bar(T) <= 0.0) throw ScheduleError("alpha_bar(T) underflowed to zero");
    return s;
}

std::string serialize_schedule(const NoiseSchedule& s) {
    auto dump = [](const Eigen::ArrayXd& a) {
        std::string out = "[";
        for (Eigen::Index i = 0; i < a.size(); ++i) {
            if (i > 0) out += ',';
            out += format_real(a[i]);
        }
        out += ']';
        return out;
    };
    return "{\"T\":" + std::to_string(s.T) + ",\"betas\":" + dump(s.betas) +
           ",\"alphas\":" + dump(s.alphas) + ",\"alpha_bars\":" + dump(s.alpha_bars) + "}";
}

LatentTensor q_step(const LatentTensor& z_prev, int t, const LatentTensor& noise,
                    const NoiseSchedule& s) {
    require_same_shape(z_prev, noise);
    const double b = s.beta(t);
    LatentTensor out = z_prev;
    out.data = std::sqrt(1.0 - b) * z_prev.data + std::sqrt(b) * noise.data;
    return out;
}

LatentTensor q_sample(const LatentTensor& z0, int t, const LatentTensor& noise,
                      const NoiseSchedule& s) {
    require_same_shape(z0, noise);
    const double ab = s.alpha_bar(t);
    LatentTensor out = z0;
    out.data = std::sqrt(ab) * z0.data + std::sqrt(1.0 - ab) * noise.data;
    return out;
}

LatentTensor ddpm_step(const LatentTensor& z_t, const LatentTensor& eps_hat, int t,
                       const LatentTensor& noise, const NoiseSchedule& s) {
    require_same_shape(z_t, eps_hat);
    require_same_shape(z_t, noise);
    const double b = s.beta(t);
    const double a = s.alpha(t);
    const double ab = s.alpha_bar(t);
    const double ab_prev = s.alpha_bar(t - 1);
    const double sigma = std::sqrt(b * (1.0 - ab_prev) / (1.0 - ab));
    LatentTensor out = z_t;
    out.data = (z_t.data - (b / std::sqrt(1.0 - ab)) * eps_hat.data) / std::sqrt(a) +
               sigma * noise.data;
    return out;
}

LatentTensor ddim_step(const LatentTensor& z_t, const LatentTensor& eps_hat, int t, int t_prev,
                       double eta, const LatentTensor* noise, const NoiseSchedule& s) {
    require_same_shape(z_t, eps_hat);
    if (t_prev < 0 || t_prev >= t) throw IndexError("ddim_step requires 0 <= t_prev < t");
    if (!(eta >= 0.0)) throw ArgumentError("eta must be nonnegative");
    const double ab_t = s.alpha_bar(t);
    const double ab_p = s.alpha_bar(t_prev);

    const double sigma =
        eta * std::sqrt((1.0 - ab_p) / (1.0 - ab_t)) * std::sqrt(1.0 - ab_t / ab_p);
    double rad = 1.0 - ab_p - sigma * sigma;
    if (rad < 0.0) {
        if (rad < -1e-12) throw ScheduleError("eta too large: direction radicand is negative");
        rad = 0.0;
    }
    LatentTensor out = z_t;
    out.data = std::sqrt(ab_p) * (z_t.data - std::sqrt(1.0 - ab_t) * eps_hat.data) /
                   std::sqrt(ab_t) +
               std::sqrt(rad) * eps_hat.data;
    if (sigma > 0.0) {
        if (noise == nullptr) throw ArgumentError("stochastic ddim_step requires noise");
        require_same_shape(z_t, *noise);
        out.data += sigma * noise->data;
    }
    return out;
}

std::vector<int> ddim_timesteps(int T, int steps) {
    if (steps < 1) throw ArgumentError("steps must be at least 1");
    if (steps > T) throw ArgumentError("steps cannot exceed T");
    std::vector<int> ts;
    ts.reserve(static_cast<std::size_t>(steps) + 1);
    for (int i = steps; i >= 1; --i)
        ts.push_back(static_cast<int>(std::llround(double(i) * T / steps)));
    ts.push_back(0);
    return ts;
}

LatentTensor sample(const Denoiser& denoiser, const LatentTensor& z_T, const NoiseSchedule& s,
                    int steps, double eta, const std::function<double()>& noise_source,
                    const void* condition) {
    if (!denoiser) throw ArgumentError("a denoiser is required");
    const std::vector<int> ts = ddim_timesteps(s.T, steps);
    LatentTensor z = z_T;
    for (std::size_t k = 0; k + 1 < ts.size(); ++k) {
        const int t = ts[k];
        const int t_prev = ts[k + 1];
        LatentTensor eps = denoiser(z, t, condition);
        if (!same_shape(eps, z))
            throw ContractError("denoiser returned a wrong-shape tensor at step t=" +
                                std::to_string(t));
        if (eta > 0.0 && t_prev > 0) {
            if (!noise_source)
                throw ArgumentError("eta > 0 requires a noise source");
            LatentTensor noise = z;
            for (Eigen::Index i = 0; i < noise.data.size(); ++i) noise.data[i] = noise_source();
            z = ddim_step(z, eps, t, t_prev, eta, &noise, s);
        } else {
            z = ddim_step(z, eps, t, t_prev, eta, nullptr, s);
        }
    }
    return z;
}

double training_loss(const LatentTensor& eps, const LatentTensor& eps_hat) {
    require_same_shape(eps, eps_hat);
    return (eps.data - eps_hat.data).square().mean();
}

Denoiser make_oracle_denoiser(LatentTensor z0, const NoiseSchedule& s) {
    // Copy the schedule so the closure owns everything it needs.
    NoiseSchedule sched = s;
    return [z0 = std::move(z0), sched = std::move(sched)](const LatentTensor& z_t, int t,
                                                          const void*) {
        require_same_shape(z_t, z0);
        const double ab = sched.alpha_bar(t);
        LatentTensor eps = z_t;
        eps.data = (z_t.data - std::sqrt(ab) * z0.data) / std::sqrt(1.0 - ab);
        return eps;
    };
}

}  // namespace motionkit
