#pragma once

#include <functional>
#include <string>
#include <vector>

#include "motionkit/tensor.hpp"

namespace motionkit {

enum class ScheduleKind { kLinear, kCosine };

ScheduleKind schedule_kind_from_name(const std::string& name);  // ArgumentError on unknown
const char* schedule_kind_name(ScheduleKind kind);

// β_1…β_T with the derived α_t = 1 − β_t and running products ᾱ_t. Arrays are
// 0-based storage for 1-based step indices; ᾱ_0 ≡ 1 by convention.
struct NoiseSchedule {
    int T = 0;
    Eigen::ArrayXd betas;
    Eigen::ArrayXd alphas;
    Eigen::ArrayXd alpha_bars;

    double beta(int t) const;       // 1 ≤ t ≤ T, IndexError otherwise
    double alpha(int t) const;      // ditto
    double alpha_bar(int t) const;  // 0 ≤ t ≤ T; alpha_bar(0) == 1
};

// linear: β interpolated evenly from beta_start to beta_end (requires
// 0 < beta_start ≤ beta_end < 1). cosine: ᾱ_t from the squared-cosine
// profile (s = 0.008), β_t = 1 − ᾱ_t/ᾱ_{t−1} clipped to at most 0.999, then
// ᾱ recomputed as the running product so ᾱ_t = α_t·ᾱ_{t−1} holds exactly
// (this keeps ᾱ_T > 0 where the raw profile reaches 0 at t = T).
NoiseSchedule make_schedule(int T, ScheduleKind kind, double beta_start = 1e-4,
                            double beta_end = 0.02);

// Inspection dump: {"T":…,"kind-free" arrays of betas/alphas/alpha_bars}.
std::string serialize_schedule(const NoiseSchedule& s);

// One forward step: √(1−β_t)·z_prev + √β_t·noise.
LatentTensor q_step(const LatentTensor& z_prev, int t, const LatentTensor& noise,
                    const NoiseSchedule& s);

// Closed-form jump to step t: √ᾱ_t·z0 + √(1−ᾱ_t)·noise.
LatentTensor q_sample(const LatentTensor& z0, int t, const LatentTensor& noise,
                      const NoiseSchedule& s);

// Ancestral reverse step with ε-parameterized mean and fixed posterior
// variance σ_t² = β_t(1−ᾱ_{t−1})/(1−ᾱ_t); σ_1 = 0.
LatentTensor ddpm_step(const LatentTensor& z_t, const LatentTensor& eps_hat, int t,
                       const LatentTensor& noise, const NoiseSchedule& s);

// Generalized (possibly strided) reverse step:
//   x0_pred = (z_t − √(1−ᾱ_t)·eps_hat)/√ᾱ_t
//   σ = eta·√((1−ᾱ_{t_prev})/(1−ᾱ_t))·√(1−ᾱ_t/ᾱ_{t_prev})
//   out = √ᾱ_{t_prev}·x0_pred + √(1−ᾱ_{t_prev}−σ²)·eps_hat + σ·noise
// noise may be null when σ = 0. Throws ScheduleError when the direction
// radicand goes negative (eta too large for the stride).
LatentTensor ddim_step(const LatentTensor& z_t, const LatentTensor& eps_hat, int t, int t_prev,
                       double eta, const LatentTensor* noise, const NoiseSchedule& s);

// Strided timestep ladder [t_steps … t_1, 0] with t_i = round(i·T/steps);
// strictly decreasing because T/steps ≥ 1.
std::vector<int> ddim_timesteps(int T, int steps);

// ε-predictor stand-in: must return a tensor of z_t's shape for step t.
// `condition` is opaque pass-through context.
using Denoiser =
    std::function<LatentTensor(const LatentTensor& z_t, int t, const void* condition)>;

// Runs ddim_step down the strided ladder, calling the denoiser once per step
// (exactly `steps` calls). Deterministic when eta = 0; eta > 0 draws per-step
// noise from noise_source. Wrong-shape denoiser output → ContractError.
LatentTensor sample(const Denoiser& denoiser, const LatentTensor& z_T, const NoiseSchedule& s,
                    int steps, double eta = 0.0,
                    const std::function<double()>& noise_source = nullptr,
                    const void* condition = nullptr);

// Mean squared difference between true and predicted noise.
double training_loss(const LatentTensor& eps, const LatentTensor& eps_hat);

// Test double with perfect knowledge of z0: returns the exact ε implied by
// z_t = √ᾱ_t·z0 + √(1−ᾱ_t)·ε, making sampler inversion exactly checkable.
Denoiser make_oracle_denoiser(LatentTensor z0, const NoiseSchedule& s);

}  // namespace motionkit
