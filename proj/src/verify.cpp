#include "motionkit/verify.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>

#include "motionkit/diffusion.hpp"
#include "motionkit/epi.hpp"
#include "motionkit/errors.hpp"
#include "motionkit/ipi.hpp"
#include "motionkit/metrics.hpp"
#include "motionkit/splitmix.hpp"

namespace motionkit {
namespace {

std::string fmt(const char* pattern, double a, double b = 0.0) {
    char buf[160];
    std::snprintf(buf, sizeof(buf), pattern, a, b);
    return buf;
}

class Harness {
public:
    Harness(VerifyReport& report, const std::string& suite) : report_(report), suite_(suite) {}

    // fn returns an empty string on success, a failure note otherwise.
    void run(const std::string& name, const std::function<std::string()>& fn) {
        VerifyCheck check;
        check.name = suite_ + "/" + name;
        try {
            check.detail = fn();
            check.passed = check.detail.empty();
        } catch (const std::exception& e) {
            check.passed = false;
            check.detail = e.what();
        }
        report_.checks.push_back(std::move(check));
    }

private:
    VerifyReport& report_;
    std::string suite_;
};

BodyPose jittered_pose(const SkeletonTopology& topo, SplitMix64& rng) {
    BodyPose pose = topo.template_pose;
    for (Keypoint2D& kp : pose.joints) {
        kp.x += rng.next_uniform(-0.04, 0.04);
        kp.y += rng.next_uniform(-0.04, 0.04);
        kp.confidence = 1.0;
    }
    return pose;
}

BodyPose rigid_move(const BodyPose& base, double angle, double dx, double dy) {
    const Keypoint2D& pivot = base.joints[kNeck];
    const double c = std::cos(angle), s = std::sin(angle);
    BodyPose out = base;
    for (std::size_t j = 0; j < out.joints.size(); ++j) {
        const double rx = base.joints[j].x - pivot.x;
        const double ry = base.joints[j].y - pivot.y;
        out.joints[j].x = pivot.x + c * rx - s * ry + dx;
        out.joints[j].y = pivot.y + s * rx + c * ry + dy;
    }
    return out;
}

PoseSequence wrap_frames(std::vector<BodyPose> bodies) {
    PoseSequence seq;
    seq.canvas_width = 512;
    seq.canvas_height = 512;
    seq.fps = 30.0;
    for (BodyPose& b : bodies) {
        FullPose fp;
        fp.body = b;
        seq.frames.push_back(std::move(fp));
    }
    return seq;
}

double angle_between(const Eigen::Vector2d& a, const Eigen::Vector2d& b) {
    return std::abs(std::atan2(a.x() * b.y() - a.y() * b.x(), a.dot(b)));
}

void epi_suite(Harness& h, std::uint64_t seed) {
    const SkeletonTopology topo = default_topology();

    h.run("realign-preserves-motion", [&]() -> std::string {
        SplitMix64 rng(seed);
        double worst_angle = 0.0, worst_len = 0.0;
        for (int trial = 0; trial < 20; ++trial) {
            const BodyPose base = jittered_pose(topo, rng);
            const BodyPose anchor = jittered_pose(topo, rng);
            std::vector<BodyPose> frames;
            for (int f = 0; f < 6; ++f)
                frames.push_back(rigid_move(base, rng.next_uniform(-0.6, 0.6),
                                            rng.next_uniform(-0.05, 0.05),
                                            rng.next_uniform(-0.05, 0.05)));
            const PoseSequence driving = wrap_frames(frames);
            const PoseSequence out = realign(driving, anchor, topo);
            for (std::size_t f = 0; f < out.frames.size(); ++f) {
                for (const Bone& bone : topo.bones) {
                    const auto dv = bone_vector(driving.frames[f].body, bone, topo);
                    const auto ov = bone_vector(out.frames[f].body, bone, topo);
                    const auto av = bone_vector(anchor, bone, topo);
                    if (!dv || !ov || !av) return "expected every bone visible";
                    worst_angle = std::max(worst_angle, angle_between(*dv, *ov));
                    worst_len = std::max(worst_len, std::abs(ov->norm() - av->norm()));
                }
            }
        }
        if (worst_angle > 1e-7) return fmt("direction drift %.3e rad", worst_angle);
        if (worst_len > 1e-9) return fmt("length drift %.3e", worst_len);
        return "";
    });

    h.run("realign-idempotent", [&]() -> std::string {
        SplitMix64 rng(seed + 1);
        const BodyPose anchor = jittered_pose(topo, rng);
        std::vector<BodyPose> frames;
        const BodyPose base = jittered_pose(topo, rng);
        for (int f = 0; f < 4; ++f) frames.push_back(rigid_move(base, 0.2 * f, 0.01 * f, 0.0));
        const PoseSequence once = realign(wrap_frames(frames), anchor, topo);
        const PoseSequence twice = realign(once, anchor, topo);
        double worst = 0.0;
        for (std::size_t f = 0; f < once.frames.size(); ++f)
            for (int j = 0; j < kBodyJointCount; ++j) {
                const auto& a = once.frames[f].body.joints[static_cast<std::size_t>(j)];
                const auto& b = twice.frames[f].body.joints[static_cast<std::size_t>(j)];
                worst = std::max({worst, std::abs(a.x - b.x), std::abs(a.y - b.y),
                                  std::abs(a.confidence - b.confidence)});
            }
        return worst <= 1e-12 ? "" : fmt("re-alignment moved joints by %.3e", worst);
    });

    h.run("plan-sampling-deterministic", [&]() -> std::string {
        const RescaleConfig config = RescaleConfig::defaults();
        const std::string a = serialize_transform_plan(sample_plan(seed, 0.9, config, 7));
        const std::string b = serialize_transform_plan(sample_plan(seed, 0.9, config, 7));
        if (a != b) return "two samples from one seed differ";
        const TransformPlan parsed = parse_transform_plan(a);
        if (serialize_transform_plan(parsed) != a) return "serialize/parse round trip differs";
        return "";
    });

    h.run("lambda-gate", [&]() -> std::string {
        const RescaleConfig config = RescaleConfig::defaults();
        int applied = 0;
        for (std::uint64_t s = 0; s < 2000; ++s) {
            if (sample_plan(seed + s, 0.0, config, 5).applied) return "applied with lambda = 0";
            if (sample_plan(seed + s, 0.5, config, 5).applied) ++applied;
        }
        const double rate = applied / 2000.0;
        if (rate < 0.42 || rate > 0.58) return fmt("lambda 0.5 applied rate %.3f", rate);
        return "";
    });

    h.run("rescale-op-semantics", [&]() -> std::string {
        SplitMix64 rng(seed + 2);
        const BodyPose pose = jittered_pose(topo, rng);
        const PoseSequence seq = wrap_frames({pose});

        const PoseSequence unit = apply_rescale(seq, RescaleOp::scale(RescaleKind::kScaleArm, 1.0), topo);
        for (int j = 0; j < kBodyJointCount; ++j) {
            const auto& a = seq.frames[0].body.joints[static_cast<std::size_t>(j)];
            const auto& b = unit.frames[0].body.joints[static_cast<std::size_t>(j)];
            if (std::abs(a.x - b.x) > 1e-12 || std::abs(a.y - b.y) > 1e-12)
                return "unit arm scale is not an identity";
        }

        const PoseSequence dropped =
            apply_rescale(seq, RescaleOp::drop_part(BodyPart::kLeftArm), topo);
        for (int j : topo.part_joints(BodyPart::kLeftArm))
            if (dropped.frames[0].body.joints[static_cast<std::size_t>(j)].confidence != 0.0)
                return "dropped joint kept its confidence";

        const PoseSequence tmpl = wrap_frames({topo.template_pose});
        const PoseSequence gone =
            apply_rescale(tmpl, RescaleOp::drop_part(BodyPart::kLeftArm), topo);
        const PoseSequence restored =
            apply_rescale(gone, RescaleOp::add_part(BodyPart::kLeftArm), topo);
        for (int j : topo.part_joints(BodyPart::kLeftArm)) {
            const auto& want = topo.template_pose.joints[static_cast<std::size_t>(j)];
            const auto& got = restored.frames[0].body.joints[static_cast<std::size_t>(j)];
            if (std::abs(want.x - got.x) > 1e-12 || std::abs(want.y - got.y) > 1e-12 ||
                got.confidence != 1.0)
                return "re-added part does not match the template";
        }
        return "";
    });
}

void diffusion_suite(Harness& h, std::uint64_t seed, VerifyFault fault) {
    h.run("linear-schedule-invariants", [&]() -> std::string {
        NoiseSchedule s = make_schedule(1000, ScheduleKind::kLinear);
        if (fault == VerifyFault::kScheduleMonotonicity)
            s.alpha_bars[s.T / 2] = s.alpha_bars[s.T / 2 - 1] * 1.01;
        for (int t = 1; t <= s.T; ++t) {
            if (!(s.beta(t) >= 1e-4 && s.beta(t) <= 0.02)) return "beta out of range";
            if (s.alpha(t) != 1.0 - s.beta(t)) return "alpha != 1 - beta";
            if (!(s.alpha_bar(t) > 0.0 && s.alpha_bar(t) <= 1.0)) return "alpha_bar out of (0,1]";
            if (!(s.alpha_bar(t) < s.alpha_bar(t - 1)))
                return fmt("alpha_bar not strictly decreasing at t = %.0f", double(t));
            if (s.alpha_bar(t) != s.alpha(t) * s.alpha_bar(t - 1))
                return fmt("alpha_bar product identity broken at t = %.0f", double(t));
        }
        return "";
    });

    h.run("cosine-schedule-invariants", [&]() -> std::string {
        const NoiseSchedule s = make_schedule(500, ScheduleKind::kCosine);
        for (int t = 1; t <= s.T; ++t) {
            if (!(s.beta(t) > 0.0 && s.beta(t) <= 0.999)) return "beta out of (0, 0.999]";
            if (!(s.alpha_bar(t) < s.alpha_bar(t - 1))) return "alpha_bar not strictly decreasing";
            if (s.alpha_bar(t) != s.alpha(t) * s.alpha_bar(t - 1))
                return "alpha_bar product identity broken";
        }
        if (!(s.alpha_bar(s.T) > 0.0)) return "terminal alpha_bar is not positive";
        return "";
    });

    h.run("oracle-inversion", [&]() -> std::string {
        const NoiseSchedule s = make_schedule(40, ScheduleKind::kLinear);
        LatentTensor z0 = make_latent({2, 3, 4});
        LatentTensor noise = make_latent({2, 3, 4});
        NormalSampler normal(seed);
        for (Eigen::Index i = 0; i < z0.data.size(); ++i) z0.data[i] = normal.next();
        for (Eigen::Index i = 0; i < noise.data.size(); ++i) noise.data[i] = normal.next();
        const LatentTensor z_T = q_sample(z0, s.T, noise, s);
        const LatentTensor recon = sample(make_oracle_denoiser(z0, s), z_T, s, s.T);
        const double err = (recon.data - z0.data).abs().maxCoeff();
        return err <= 1e-6 ? "" : fmt("reconstruction error %.3e", err);
    });

    h.run("eta1-matches-ancestral", [&]() -> std::string {
        const NoiseSchedule s = make_schedule(100, ScheduleKind::kLinear);
        NormalSampler normal(seed + 1);
        SplitMix64 rng(seed + 2);
        for (int trial = 0; trial < 10; ++trial) {
            const int t = 2 + static_cast<int>(rng.next_index(99));
            LatentTensor z = make_latent({3, 3}), eps = make_latent({3, 3}), n = make_latent({3, 3});
            for (Eigen::Index i = 0; i < z.data.size(); ++i) {
                z.data[i] = normal.next();
                eps.data[i] = normal.next();
                n.data[i] = normal.next();
            }
            const LatentTensor a = ddpm_step(z, eps, t, n, s);
            const LatentTensor b = ddim_step(z, eps, t, t - 1, 1.0, &n, s);
            const double diff = (a.data - b.data).abs().maxCoeff();
            if (diff > 1e-10) return fmt("eta=1 step differs from ancestral by %.3e", diff);
        }
        return "";
    });

    h.run("timestep-ladder", [&]() -> std::string {
        const std::vector<int> full = ddim_timesteps(7, 7);
        if (full != std::vector<int>{7, 6, 5, 4, 3, 2, 1, 0}) return "full ladder malformed";
        const std::vector<int> strided = ddim_timesteps(1000, 50);
        if (strided.size() != 51 || strided.front() != 1000 || strided.back() != 0)
            return "strided ladder endpoints wrong";
        for (std::size_t i = 1; i < strided.size(); ++i)
            if (strided[i] >= strided[i - 1]) return "ladder is not strictly decreasing";
        return "";
    });

    h.run("denoiser-call-count", [&]() -> std::string {
        const NoiseSchedule s = make_schedule(100, ScheduleKind::kLinear);
        LatentTensor z = make_latent({2, 2});
        int calls = 0;
        const Denoiser counting = [&calls](const LatentTensor& z_t, int, const void*) {
            ++calls;
            LatentTensor eps = z_t;
            eps.data.setZero();
            return eps;
        };
        sample(counting, z, s, 13);
        return calls == 13 ? "" : fmt("expected 13 denoiser calls, got %.0f", double(calls));
    });
}

void ipi_suite(Harness& h, std::uint64_t seed) {
    h.run("gradient-check", [&]() -> std::string {
        IPIConfig config;
        config.depth = 1;
        config.model_dim = 4;
        config.num_heads = 1;
        config.ffn_dim = 8;
        config.query_tokens = 3;
        const GradCheckReport report = gradcheck(config, seed);
        if (report.entries.size() != 19) return "unexpected gradcheck tensor count";
        return report.passed() ? "" : fmt("worst relative error %.3e", report.worst());
    });

    h.run("attention-rows-normalized", [&]() -> std::string {
        IPIConfig config;
        config.model_dim = 4;
        config.num_heads = 2;
        config.query_tokens = 3;
        IPIParams params = init_params(config, seed);
        IPILayerParams layer = params.layers[0];
        layer.Wv = Eigen::MatrixXd::Identity(4, 4);
        layer.Wo = Eigen::MatrixXd::Identity(4, 4);
        SplitMix64 rng(seed + 1);
        Eigen::MatrixXd q(3, 4), kv(5, 4);
        for (Eigen::Index i = 0; i < q.size(); ++i) q.data()[i] = rng.next_uniform(-1, 1);
        for (Eigen::Index i = 0; i < kv.size(); ++i) kv.data()[i] = rng.next_uniform(-1, 1);
        kv.col(3).setConstant(0.7);  // probes the softmax row sums
        const Eigen::MatrixXd out = cross_attention(q, kv, layer, config.num_heads);
        const double drift = (out.col(3).array() - 0.7).abs().maxCoeff();
        return drift <= 1e-12 ? "" : fmt("softmax row sums drift by %.3e", drift);
    });

    h.run("kv-permutation-invariance", [&]() -> std::string {
        IPIConfig config;
        config.model_dim = 8;
        config.num_heads = 2;
        config.query_tokens = 4;
        const IPIParams params = init_params(config, seed + 2);
        SplitMix64 rng(seed + 3);
        Eigen::MatrixXd q(4, 8), kv(6, 8);
        for (Eigen::Index i = 0; i < q.size(); ++i) q.data()[i] = rng.next_uniform(-1, 1);
        for (Eigen::Index i = 0; i < kv.size(); ++i) kv.data()[i] = rng.next_uniform(-1, 1);
        Eigen::MatrixXd shuffled(6, 8);
        const int order[6] = {4, 2, 0, 5, 1, 3};
        for (int i = 0; i < 6; ++i) shuffled.row(i) = kv.row(order[i]);
        const Eigen::MatrixXd a = cross_attention(q, kv, params.layers[0], config.num_heads);
        const Eigen::MatrixXd b = cross_attention(q, shuffled, params.layers[0], config.num_heads);
        const double diff = (a - b).cwiseAbs().maxCoeff();
        return diff <= 1e-12 ? "" : fmt("permuting context rows moved output by %.3e", diff);
    });

    h.run("motion-attention-gate", [&]() -> std::string {
        IPIConfig config;
        config.model_dim = 4;
        config.num_heads = 1;
        const IPIParams params = init_params(config, seed + 4);
        SplitMix64 rng(seed + 5);
        Eigen::MatrixXd x(3, 4), f(2, 4);
        for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = rng.next_uniform(-1, 1);
        for (Eigen::Index i = 0; i < f.size(); ++i) f.data()[i] = rng.next_uniform(-1, 1);
        const Eigen::MatrixXd off = motion_attention(x, f, params.layers[0], 1, 0.0);
        if (!(off.array() == x.array()).all()) return "alpha = 0 is not an exact identity";
        const Eigen::MatrixXd half = motion_attention(x, f, params.layers[0], 1, 0.5);
        const Eigen::MatrixXd full = motion_attention(x, f, params.layers[0], 1);
        const double lin = ((full - x) - 2.0 * (half - x)).cwiseAbs().maxCoeff();
        return lin <= 1e-12 ? "" : fmt("alpha scaling is not linear (%.3e)", lin);
    });

    h.run("params-roundtrip", [&]() -> std::string {
        IPIConfig config;
        config.depth = 2;
        config.model_dim = 8;
        config.num_heads = 2;
        config.ffn_dim = 16;
        config.query_tokens = 5;
        const IPIParams params = init_params(config, seed + 6);
        const std::string path =
            (std::filesystem::temp_directory_path() / "motionkit_verify_params.fpak").string();
        save_params(path, params);
        const IPIParams back = load_params(path, config);
        std::filesystem::remove(path);
        double diff = (params.embed - back.embed).cwiseAbs().maxCoeff();
        diff = std::max(diff, (params.q_l - back.q_l).cwiseAbs().maxCoeff());
        for (std::size_t i = 0; i < params.layers.size(); ++i) {
            diff = std::max(diff,
                            (params.layers[i].Wq - back.layers[i].Wq).cwiseAbs().maxCoeff());
            diff = std::max(diff,
                            (params.layers[i].b1 - back.layers[i].b1).cwiseAbs().maxCoeff());
            diff = std::max(
                diff, (params.layers[i].ln2_bias - back.layers[i].ln2_bias).cwiseAbs().maxCoeff());
        }
        return diff == 0.0 ? "" : fmt("round trip drifted by %.3e", diff);
    });
}

void metrics_suite(Harness& h, std::uint64_t seed) {
    h.run("psnr-closed-forms", [&]() -> std::string {
        const ImageF a = make_image(16, 16, 3, 0.25);
        const ImageF b = make_image(16, 16, 3, 0.75);
        if (std::abs(psnr(a, b) - 6.0205999132796239) > 1e-9) return "0.5-offset psnr wrong";
        const ImageF c = make_image(16, 16, 1, 0.5);
        const ImageF d = make_image(16, 16, 1, 0.6);
        if (std::abs(psnr(c, d) - 20.0) > 1e-9) return "0.1-offset psnr wrong";
        if (std::abs(l1(c, d) - 0.1) > 1e-12) return "l1 wrong";
        return "";
    });

    h.run("ssim-properties", [&]() -> std::string {
        SplitMix64 rng(seed);
        ImageF a = make_image(16, 14, 3), b = make_image(16, 14, 3);
        for (double& v : a.data) v = rng.next_double();
        for (double& v : b.data) v = rng.next_double();
        if (std::abs(ssim(a, a) - 1.0) > 1e-12) return "self ssim is not 1";
        if (std::abs(ssim(a, b) - ssim(b, a)) > 1e-12) return "ssim is not symmetric";
        if (ssim(a, b) > 1.0 + 1e-12) return "ssim exceeded 1";
        const double flat = ssim(make_image(12, 12, 1, 0.0), make_image(12, 12, 1, 1.0));
        if (std::abs(flat - 1e-4 / (1.0 + 1e-4)) > 1e-12) return "flat-image ssim wrong";
        return "";
    });

    h.run("psnr-star-pooling", [&]() -> std::string {
        const ImageF z = make_image(8, 8, 1, 0.0);
        ImageF half = make_image(8, 8, 1, 0.5);
        if (std::abs(psnr_star({z, z}, {z, z}) - 100.0) > 1e-12) return "identical cap wrong";
        // pooled MSE of (0, 0.25): (0 + 0.0625) / 2 -> 10·log10(32)
        ImageF quarter = make_image(8, 8, 1, 0.25);
        const double got = psnr_star({z, z}, {z, quarter});
        const double want = 10.0 * std::log10(2.0 / 0.0625);
        return std::abs(got - want) <= 1e-9 ? "" : fmt("pooled psnr %.6f != %.6f", got, want);
    });

    h.run("frechet-closed-forms", [&]() -> std::string {
        Eigen::VectorXd mp(1), mq(1);
        mp << 0.0;
        mq << 1.0;
        Eigen::MatrixXd cp(1, 1), cq(1, 1);
        cp << 1.0;
        cq << 1.0;
        if (std::abs(frechet_distance(mp, cp, mq, cq) - 1.0) > 1e-9) return "1-d distance wrong";
        if (frechet_distance(mp, cp, mp, cp) > 1e-12) return "self distance non-zero";
        SplitMix64 rng(seed + 1);
        Eigen::MatrixXd x(40, 3), y(40, 3);
        for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = rng.next_uniform(-1, 1);
        for (Eigen::Index i = 0; i < y.size(); ++i) y.data()[i] = rng.next_uniform(-1, 1);
        const GaussianStats sp = gaussian_stats(x), sq = gaussian_stats(y);
        const double pq = frechet_distance(sp, sq), qp = frechet_distance(sq, sp);
        return std::abs(pq - qp) <= 1e-9 ? "" : fmt("asymmetric distance %.3e", std::abs(pq - qp));
    });

    h.run("gaussian-stats", [&]() -> std::string {
        Eigen::MatrixXd s(4, 1);
        s << 0.0, 1.0, 2.0, 3.0;
        const GaussianStats st = gaussian_stats(s);
        if (std::abs(st.mean[0] - 1.5) > 1e-12) return "mean wrong";
        if (std::abs(st.cov(0, 0) - 5.0 / 3.0) > 1e-12) return "unbiased covariance wrong";
        return "";
    });
}

}  // namespace

bool VerifyReport::all_passed() const {
    return std::all_of(checks.begin(), checks.end(),
                       [](const VerifyCheck& c) { return c.passed; });
}

const std::vector<std::string>& verify_suite_names() {
    static const std::vector<std::string> names = {"epi", "diffusion", "ipi", "metrics", "all"};
    return names;
}

VerifyReport run_verify_suite(const std::string& suite, std::uint64_t seed, VerifyFault fault) {
    const auto& names = verify_suite_names();
    if (std::find(names.begin(), names.end(), suite) == names.end())
        throw ArgumentError("unknown verify suite '" + suite + "'");
    VerifyReport report;
    if (suite == "epi" || suite == "all") {
        Harness h(report, "epi");
        epi_suite(h, seed);
    }
    if (suite == "diffusion" || suite == "all") {
        Harness h(report, "diffusion");
        diffusion_suite(h, seed, fault);
    }
    if (suite == "ipi" || suite == "all") {
        Harness h(report, "ipi");
        ipi_suite(h, seed);
    }
    if (suite == "metrics" || suite == "all") {
        Harness h(report, "metrics");
        metrics_suite(h, seed);
    }
    return report;
}

}  // namespace motionkit
