#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "motionkit/diffusion.hpp"
#include "motionkit/epi.hpp"
#include "motionkit/errors.hpp"
#include "motionkit/file_util.hpp"
#include "motionkit/image_io.hpp"
#include "motionkit/ipi.hpp"
#include "motionkit/metrics.hpp"
#include "motionkit/pose_io.hpp"
#include "motionkit/pose_pool.hpp"
#include "motionkit/splitmix.hpp"
#include "motionkit/svg_render.hpp"
#include "motionkit/tensor.hpp"
#include "motionkit/verify.hpp"

namespace mk = motionkit;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitVerifyFailed = 1;
constexpr int kExitUsage = 2;
constexpr int kExitData = 3;

// Shared settings: the global seed/quiet flags plus --config overrides.
struct CliSettings {
    std::uint64_t seed = 0;
    bool quiet = false;

    mk::RescaleConfig rescale = mk::RescaleConfig::defaults();
    bool has_lambda = false;
    double lambda = 0.0;
    mk::ScheduleKind schedule_kind = mk::ScheduleKind::kLinear;
    double beta_start = 1e-4;
    double beta_end = 0.02;
};

double require_number(const nlohmann::json& v, const std::string& field) {
    if (!v.is_number()) throw mk::SchemaError(field, "expected a number");
    return v.get<double>();
}

void apply_rescale_overrides(const nlohmann::json& node, CliSettings& s) {
    if (!node.is_object()) throw mk::SchemaError("rescale", "expected an object");
    for (const auto& [name, body] : node.items()) {
        const mk::RescaleKind kind = [&] {
            try {
                return mk::rescale_kind_from_name(name);
            } catch (const mk::ArgumentError&) {
                throw mk::SchemaError("rescale." + name, "unknown op kind");
            }
        }();
        if (!body.is_object()) throw mk::SchemaError("rescale." + name, "expected an object");
        const int idx = static_cast<int>(kind);
        for (const auto& [key, value] : body.items()) {
            const std::string field = "rescale." + name + "." + key;
            if (key == "p") {
                s.rescale.p_op[static_cast<std::size_t>(idx)] = require_number(value, field);
            } else if (key == "lo" || key == "hi") {
                if (!mk::is_scale_kind(kind))
                    throw mk::SchemaError(field, "factor range only applies to scale ops");
                auto& range = s.rescale.range[static_cast<std::size_t>(idx)];
                (key == "lo" ? range.lo : range.hi) = require_number(value, field);
            } else {
                throw mk::SchemaError(field, "unknown key");
            }
        }
    }
    s.rescale.validate();
}

void apply_schedule_overrides(const nlohmann::json& node, CliSettings& s) {
    if (!node.is_object()) throw mk::SchemaError("schedule", "expected an object");
    for (const auto& [key, value] : node.items()) {
        const std::string field = "schedule." + key;
        if (key == "kind") {
            if (!value.is_string()) throw mk::SchemaError(field, "expected a string");
            s.schedule_kind = mk::schedule_kind_from_name(value.get<std::string>());
        } else if (key == "beta_start") {
            s.beta_start = require_number(value, field);
        } else if (key == "beta_end") {
            s.beta_end = require_number(value, field);
        } else {
            throw mk::SchemaError(field, "unknown key");
        }
    }
}

void load_cli_config(const std::string& path, CliSettings& s) {
    const std::string text = mk::read_text_file(path);
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw mk::ParseError(e.what(), 1, e.byte > 0 ? e.byte - 1 : 0);
    }
    if (!doc.is_object()) throw mk::SchemaError("config", "expected a JSON object");
    for (const auto& [key, value] : doc.items()) {
        if (key == "lambda") {
            s.lambda = require_number(value, "lambda");
            s.has_lambda = true;
        } else if (key == "rescale") {
            apply_rescale_overrides(value, s);
        } else if (key == "schedule") {
            apply_schedule_overrides(value, s);
        } else {
            throw mk::SchemaError(key, "unknown config key");
        }
    }
}

std::vector<std::string> list_json_files(const std::string& dir) {
    namespace fs = std::filesystem;
    std::error_code ec;
    if (!fs::is_directory(dir, ec)) throw mk::IoError(dir, "not a directory");
    std::vector<std::string> files;
    for (const fs::directory_entry& entry : fs::directory_iterator(dir, ec)) {
        if (!entry.is_regular_file()) continue;
        if (entry.path().extension() == ".json") files.push_back(entry.path().string());
    }
    if (ec) throw mk::IoError(dir, "failed to list directory");
    std::sort(files.begin(), files.end(), [](const std::string& a, const std::string& b) {
        return std::filesystem::path(a).filename().string() <
               std::filesystem::path(b).filename().string();
    });
    return files;
}

std::vector<std::size_t> parse_shape(const std::string& text) {
    std::vector<std::size_t> dims;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        const std::size_t next = std::min(text.find('x', pos), text.size());
        const std::string token = text.substr(pos, next - pos);
        if (token.empty() || token.find_first_not_of("0123456789") != std::string::npos)
            throw mk::ArgumentError("shape must look like 4x8x8");
        dims.push_back(static_cast<std::size_t>(std::stoull(token)));
        pos = next + 1;
        if (next == text.size()) break;
    }
    return dims;
}

int cmd_transform(const CliSettings& s, const std::string& in, const std::string& pool_path,
                  const std::string& out, const std::string& plan_out, double lambda) {
    const mk::PoseSequence seq = mk::parse_pose_sequence(mk::read_text_file(in));
    mk::validate_pose_sequence(seq);
    const mk::PosePool pool = mk::load_pose_pool(pool_path);

    mk::TransformPlan plan = mk::sample_plan(s.seed, lambda, s.rescale, pool.size());
    mk::PoseSequence result;
    if (plan.applied) {
        const mk::PoolEntry& anchor = mk::sample_anchor(pool, plan.anchor_index);
        plan.anchor_id = anchor.id;
        result = mk::apply_plan(seq, plan, anchor.body);
    } else {
        result = seq;
    }
    mk::write_text_file(out, mk::serialize_pose_sequence(result) + "\n");
    if (!plan_out.empty())
        mk::write_text_file(plan_out, mk::serialize_transform_plan(plan) + "\n");
    if (!s.quiet) {
        if (plan.applied)
            std::printf("applied %zu op(s) against anchor %s\n", plan.ops.size(),
                        plan.anchor_id.c_str());
        else
            std::printf("plan not applied (lambda gate)\n");
    }
    return kExitOk;
}

int cmd_pool_build(const CliSettings& s, const std::string& in_dir, std::size_t stride,
                   const std::string& out) {
    const std::vector<std::string> files = list_json_files(in_dir);
    if (files.empty()) throw mk::EmptyPoolError("no .json sequence files in '" + in_dir + "'");
    const mk::PosePool pool = mk::build_pool(files, stride);
    mk::save_pose_pool(pool, out);
    if (!s.quiet)
        std::printf("pool: %zu entries from %zu file(s)\n", pool.size(), files.size());
    return kExitOk;
}

int cmd_pool_inspect(const std::string& in) {
    const mk::PosePool pool = mk::load_pose_pool(in);
    std::printf("entries: %zu\n", pool.size());
    for (const mk::PoolEntry& e : pool.entries) std::printf("%s\n", e.id.c_str());
    return kExitOk;
}

int cmd_render(const CliSettings& s, const std::string& in, std::size_t frame,
               const std::string& out, int width, int height) {
    const mk::PoseSequence seq = mk::parse_pose_sequence(mk::read_text_file(in));
    mk::validate_pose_sequence(seq);
    if (frame >= seq.frames.size())
        throw mk::IndexError("frame " + std::to_string(frame) + " out of range (sequence has " +
                             std::to_string(seq.frames.size()) + ")");
    const int w = width > 0 ? width : seq.canvas_width;
    const int h = height > 0 ? height : seq.canvas_height;
    mk::write_text_file(out, mk::render_svg(seq.frames[frame], w, h));
    if (!s.quiet) std::printf("rendered frame %zu to %s (%dx%d)\n", frame, out.c_str(), w, h);
    return kExitOk;
}

int cmd_ddim_demo(const CliSettings& s, int T, int steps, const std::string& shape,
                  const std::string& out) {
    const mk::NoiseSchedule schedule =
        mk::make_schedule(T, s.schedule_kind, s.beta_start, s.beta_end);
    const std::vector<std::size_t> dims = parse_shape(shape);

    mk::LatentTensor z0 = mk::make_latent(dims);
    mk::LatentTensor noise = mk::make_latent(dims);
    mk::NormalSampler normal(s.seed);
    for (Eigen::Index i = 0; i < z0.data.size(); ++i) z0.data[i] = normal.next();
    for (Eigen::Index i = 0; i < noise.data.size(); ++i) noise.data[i] = normal.next();

    const mk::LatentTensor z_T = mk::q_sample(z0, T, noise, schedule);
    const mk::LatentTensor recon =
        mk::sample(mk::make_oracle_denoiser(z0, schedule), z_T, schedule, steps);
    const double err = (recon.data - z0.data).abs().maxCoeff();
    std::printf("max|recon - z0| = %.9e\n", err);
    if (!out.empty()) mk::write_fmat(out, recon);
    return kExitOk;
}

double sequence_l1(const std::vector<mk::ImageF>& a, const std::vector<mk::ImageF>& b) {
    double total = 0.0;
    std::size_t count = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        total += mk::l1(a[i], b[i]) * static_cast<double>(a[i].data.size());
        count += a[i].data.size();
    }
    return total / static_cast<double>(count);
}

int cmd_metrics(const CliSettings& s, const std::string& dir_a, const std::string& dir_b,
                const std::string& features_a, const std::string& features_b,
                const std::string& metric_list, const std::string& out) {
    std::vector<std::string> wanted;
    for (std::size_t pos = 0; pos <= metric_list.size();) {
        const std::size_t next = std::min(metric_list.find(',', pos), metric_list.size());
        const std::string token = metric_list.substr(pos, next - pos);
        if (!token.empty()) wanted.push_back(token);
        pos = next + 1;
        if (next == metric_list.size()) break;
    }
    if (wanted.empty()) throw mk::ArgumentError("--metrics must name at least one metric");

    const bool wants_frechet =
        std::find(wanted.begin(), wanted.end(), "frechet") != wanted.end();
    const bool wants_images = wanted.size() > (wants_frechet ? 1u : 0u);

    std::vector<mk::ImageF> frames_a, frames_b;
    if (wants_images) {
        if (dir_a.empty() || dir_b.empty())
            throw mk::ArgumentError("image metrics require --a and --b frame directories");
        const std::vector<std::string> files_a = mk::list_image_files(dir_a);
        const std::vector<std::string> files_b = mk::list_image_files(dir_b);
        if (files_a.empty()) throw mk::ArgumentError("no image frames in '" + dir_a + "'");
        if (files_a.size() != files_b.size())
            throw mk::ArgumentError("frame count mismatch: " + std::to_string(files_a.size()) +
                                    " vs " + std::to_string(files_b.size()));
        for (const std::string& f : files_a) frames_a.push_back(mk::read_image(f));
        for (const std::string& f : files_b) frames_b.push_back(mk::read_image(f));
    }

    std::string report = "{";
    bool first = true;
    for (const std::string& name : wanted) {
        double value = 0.0;
        if (name == "frechet") {
            if (features_a.empty() || features_b.empty())
                throw mk::ArgumentError("frechet requires --features-a and --features-b");
            const Eigen::MatrixXd fa = mk::read_feature_matrix(features_a);
            const Eigen::MatrixXd fb = mk::read_feature_matrix(features_b);
            value = mk::frechet_distance(mk::gaussian_stats(fa), mk::gaussian_stats(fb));
        } else if (name == "l1") {
            value = sequence_l1(frames_a, frames_b);
        } else if (name == "psnr") {
            double sum = 0.0;
            for (std::size_t i = 0; i < frames_a.size(); ++i)
                sum += mk::psnr(frames_a[i], frames_b[i]);
            value = sum / static_cast<double>(frames_a.size());
        } else if (name == "psnr_star") {
            value = mk::psnr_star(frames_a, frames_b);
        } else if (name == "ssim") {
            double sum = 0.0;
            for (std::size_t i = 0; i < frames_a.size(); ++i)
                sum += mk::ssim(frames_a[i], frames_b[i]);
            value = sum / static_cast<double>(frames_a.size());
        } else {
            throw mk::ArgumentError("unknown metric '" + name + "'");
        }
        if (!first) report += ",";
        report += "\"" + name + "\":" + mk::format_real(value);
        first = false;
        if (!s.quiet) std::printf("%s = %s\n", name.c_str(), mk::format_real(value).c_str());
    }
    report += "}";
    if (!out.empty()) mk::write_text_file(out, report + "\n");
    return kExitOk;
}

int cmd_verify(const CliSettings& s, const std::string& suite, bool inject_fault) {
    const mk::VerifyReport report = mk::run_verify_suite(
        suite, s.seed,
        inject_fault ? mk::VerifyFault::kScheduleMonotonicity : mk::VerifyFault::kNone);
    std::size_t passed = 0;
    for (const mk::VerifyCheck& check : report.checks) {
        if (check.passed) ++passed;
        if (s.quiet && check.passed) continue;
        std::printf("[%s] %s%s%s\n", check.passed ? "PASS" : "FAIL", check.name.c_str(),
                    check.detail.empty() ? "" : ": ", check.detail.c_str());
    }
    std::printf("%zu/%zu checks passed\n", passed, report.checks.size());
    return report.all_passed() ? kExitOk : kExitVerifyFailed;
}

int dispatch(int argc, char** argv) {
    CLI::App app{"Pose-driven animation toolkit: augmentation, sampling and metrics"};
    app.require_subcommand(1);

    CliSettings settings;
    std::string config_path;
    app.add_option("--seed", settings.seed, "Global RNG seed")->capture_default_str();
    app.add_option("--config", config_path, "JSON settings file");
    app.add_flag("--quiet", settings.quiet, "Suppress informational output");

    auto* transform = app.add_subcommand("transform", "Realign and rescale a pose sequence");
    std::string t_in, t_pool, t_out, t_plan;
    double t_lambda = 0.98;
    transform->add_option("--in", t_in, "Driving pose sequence (JSON)")->required();
    transform->add_option("--pool", t_pool, "Anchor pose pool (JSON)")->required();
    transform->add_option("--out", t_out, "Output pose sequence path")->required();
    transform->add_option("--plan-out", t_plan, "Optional plan sidecar path");
    transform->add_option("--lambda", t_lambda, "Probability the augmentation applies")
        ->capture_default_str();

    auto* pool = app.add_subcommand("pool", "Anchor pool maintenance");
    pool->require_subcommand(1);
    auto* pool_build = pool->add_subcommand("build", "Harvest anchors from sequence files");
    std::string pb_in, pb_out;
    std::size_t pb_stride = 10;
    pool_build->add_option("--in", pb_in, "Directory of pose sequence JSON files")->required();
    pool_build->add_option("--stride", pb_stride, "Keep every k-th frame")
        ->capture_default_str();
    pool_build->add_option("--out", pb_out, "Output pool path")->required();
    auto* pool_inspect = pool->add_subcommand("inspect", "List the entries of a pool");
    std::string pi_in;
    pool_inspect->add_option("--in", pi_in, "Pool file")->required();

    auto* render = app.add_subcommand("render", "Render one frame to SVG");
    std::string r_in, r_out;
    std::size_t r_frame = 0;
    int r_width = 0, r_height = 0;
    render->add_option("--in", r_in, "Pose sequence (JSON)")->required();
    render->add_option("--frame", r_frame, "Frame index")->capture_default_str();
    render->add_option("--out", r_out, "Output SVG path")->required();
    render->add_option("--width", r_width, "Canvas width (defaults to sequence metadata)");
    render->add_option("--height", r_height, "Canvas height (defaults to sequence metadata)");

    auto* ddim = app.add_subcommand("ddim-demo", "Round-trip a latent through the sampler");
    int d_T = 1000, d_steps = 50;
    std::string d_shape = "4x8x8", d_out;
    ddim->add_option("--t", d_T, "Schedule length T")->capture_default_str();
    ddim->add_option("--steps", d_steps, "Sampling steps")->capture_default_str();
    ddim->add_option("--shape", d_shape, "Latent shape, e.g. 4x8x8")->capture_default_str();
    ddim->add_option("--out", d_out, "Optional output tensor path");

    auto* metrics = app.add_subcommand("metrics", "Compare frame directories or feature sets");
    std::string m_a, m_b, m_fa, m_fb, m_list, m_out;
    metrics->add_option("--a", m_a, "First frame directory");
    metrics->add_option("--b", m_b, "Second frame directory");
    metrics->add_option("--features-a", m_fa, "First feature matrix (FMAT)");
    metrics->add_option("--features-b", m_fb, "Second feature matrix (FMAT)");
    metrics->add_option("--metrics", m_list, "Comma-separated list, e.g. l1,psnr_star,ssim")
        ->required();
    metrics->add_option("--out", m_out, "Report JSON path");

    auto* verify = app.add_subcommand("verify", "Run the built-in self checks");
    std::string v_suite = "all";
    bool v_fault = false;
    verify->add_option("--suite", v_suite, "epi, diffusion, ipi, metrics or all")
        ->capture_default_str();
    verify->add_flag("--inject-fault", v_fault)->group("");  // test hook, hidden from help

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitUsage;
    }

    if (!config_path.empty()) load_cli_config(config_path, settings);
    // Explicit flags win over --config values.
    if (settings.has_lambda && transform->count("--lambda") == 0) t_lambda = settings.lambda;

    if (transform->parsed())
        return cmd_transform(settings, t_in, t_pool, t_out, t_plan, t_lambda);
    if (pool_build->parsed()) return cmd_pool_build(settings, pb_in, pb_stride, pb_out);
    if (pool_inspect->parsed()) return cmd_pool_inspect(pi_in);
    if (render->parsed()) return cmd_render(settings, r_in, r_frame, r_out, r_width, r_height);
    if (ddim->parsed()) return cmd_ddim_demo(settings, d_T, d_steps, d_shape, d_out);
    if (metrics->parsed()) return cmd_metrics(settings, m_a, m_b, m_fa, m_fb, m_list, m_out);
    if (verify->parsed()) return cmd_verify(settings, v_suite, v_fault);
    return kExitUsage;
}

}  // namespace

int main(int argc, char** argv) {
    try {
        return dispatch(argc, argv);
    } catch (const mk::ParseError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitUsage;
    } catch (const mk::SchemaError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitUsage;
    } catch (const mk::ArgumentError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitUsage;
    } catch (const mk::ShapeError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitUsage;
    } catch (const mk::IndexError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitUsage;
    } catch (const mk::ScheduleError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitUsage;
    } catch (const mk::ContractError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitUsage;
    } catch (const mk::TopologyError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitUsage;
    } catch (const mk::Error& e) {
        // IoError, PoolError, AnchorError, DegenerateError, NumericError: bad
        // data or environment rather than bad invocation.
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitData;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitData;
    }
}
