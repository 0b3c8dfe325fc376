#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "cartoonlab/guidance.hpp"
#include "cartoonlab/latent.hpp"
#include "cartoonlab/mixture.hpp"
#include "cartoonlab/rng.hpp"
#include "cartoonlab/schedule.hpp"
#include "cartoonlab/trajectory.hpp"

namespace cartoonlab {

// Deterministic DDIM update (eta = 0):
//   x_prev = sqrt(abar_prev) * (x_t - sqrt(1-abar_t) eps) / sqrt(abar_t)
//          + sqrt(1-abar_prev) * eps
inline Latent ddim_step(const Latent& x_t, const Latent& eps_t, int t, int t_prev,
                        const NoiseSchedule& sched) {
    if (t <= t_prev || t_prev < 0)
        throw std::invalid_argument("ddim_step: need t > t_prev >= 0, got t=" +
                                    std::to_string(t) + " t_prev=" + std::to_string(t_prev));
    check_same_dim(x_t, eps_t, "ddim_step");
    double ab_t = sched.alpha_bar(t);
    double ab_prev = sched.alpha_bar(t_prev);
    double sqrt_ab_t = std::sqrt(ab_t);
    double sqrt_one_minus_ab_t = std::sqrt(1.0 - ab_t);
    double sqrt_ab_prev = std::sqrt(ab_prev);
    double sqrt_one_minus_ab_prev = std::sqrt(1.0 - ab_prev);

    Latent out(x_t.size());
    for (std::size_t i = 0; i < x_t.size(); ++i) {
        double pred_x0 = (x_t[i] - sqrt_one_minus_ab_t * eps_t[i]) / sqrt_ab_t;
        out[i] = sqrt_ab_prev * pred_x0 + sqrt_one_minus_ab_prev * eps_t[i];
    }
    return out;
}

// Which reading of the disturbance window applies. Algorithm pseudo-code
// implies t <= s; the prose says t < s. The algorithm reading is the default.
enum class ActivationRule { AtOrBelowS, BelowS };

inline bool disturbance_active(const DisturbanceStrategy& strategy, int t, ActivationRule rule) {
    if (strategy.kind == StrategyKind::None) return false;
    return rule == ActivationRule::AtOrBelowS ? t <= strategy.s : t < strategy.s;
}

struct StepRow {
    int t = 0;
    SigmaSource sigma_source = SigmaSource::SameAsText;
    double deviation_norm = 0.0;   // ||eps*_cfg - eps_cfg||
    double null_branch_gap = 0.0;  // ||eps_null(x_sigma) - eps_null(x_t)||
};

struct RunConfigSnapshot {
    SamplingMode mode = SamplingMode::FreeGeneration;
    StrategyKind strategy = StrategyKind::None;
    int b = 0;
    int s = 0;
    double gamma = 7.5;
    std::uint64_t seed = 0;
    int prompt_class = 0;
    int T = 0;
    int N = 0;
};

struct RunRecord {
    RunConfigSnapshot config;
    std::vector<StepRow> rows;
    Latent final_sample;
    Latent baseline_final;  // same-seed run with strategy None / plain img2img
};

struct SamplerOptions {
    ActivationRule activation = ActivationRule::AtOrBelowS;
    bool record_baseline = true;  // rerun with the disturbance off for displacement metrics
};

namespace detail {

struct ChainResult {
    Latent final_sample;
    Trajectory trajectory;
    std::vector<StepRow> rows;
};

// One descent over a sub-range of the grid. Shared by free generation,
// cartoonization, and the plain img2img baseline; the caller controls the
// start index, the initial latent, and the disturbance.
inline ChainResult run_chain(const Denoiser& denoiser, const NoiseSchedule& sched,
                             const DdimGrid& grid, const Condition& p, double gamma,
                             const DisturbanceStrategy& strategy, SamplingMode mode,
                             std::size_t start_index, Latent x_start,
                             const std::optional<Latent>& cached_eps, ActivationRule rule) {
    ChainResult res;
    Latent x = std::move(x_start);
    res.trajectory.record(grid.timesteps[start_index], x);

    for (std::size_t i = start_index; i + 1 < grid.timesteps.size(); ++i) {
        int t = grid.timesteps[i];
        int t_prev = grid.timesteps[i + 1];

        bool active = disturbance_active(strategy, t, rule);
        auto [x_sigma, source] =
            select_sigma(strategy, t, active, x, res.trajectory, sched, grid, cached_eps, mode);

        Latent eps_text = denoiser.epsilon(x, p, t);
        Latent eps_null_sigma = denoiser.epsilon(x_sigma, Condition::null_text(), t);
        Latent eps = cfg_combine(eps_text, eps_null_sigma, gamma);

        StepRow row;
        row.t = t;
        row.sigma_source = source;
        if (source == SigmaSource::SameAsText) {
            row.deviation_norm = 0.0;
            row.null_branch_gap = 0.0;
        } else {
            Latent eps_null_xt = denoiser.epsilon(x, Condition::null_text(), t);
            Latent eps_plain = cfg_combine(eps_text, eps_null_xt, gamma);
            row.deviation_norm = distance(eps, eps_plain);
            row.null_branch_gap = distance(eps_null_sigma, eps_null_xt);
        }
        res.rows.push_back(row);

        x = ddim_step(x, eps, t, t_prev, sched);
        res.trajectory.record(t_prev, x);
    }
    res.final_sample = std::move(x);
    return res;
}

}  // namespace detail

struct SampleResult {
    Latent final_sample;
    RunRecord record;
    Trajectory trajectory;
};

// Free generation: start from seeded Gaussian noise at the top grid timestep
// and descend the whole grid. BackD replays the recorded trajectory once the
// disturbance window opens.
inline SampleResult sample_free(const Denoiser& denoiser, const NoiseSchedule& sched,
                                const DdimGrid& grid, const Condition& p, double gamma,
                                const DisturbanceStrategy& strategy, std::uint64_t seed,
                                const SamplerOptions& opts = {}) {
    if (strategy.kind == StrategyKind::ImageD)
        throw std::invalid_argument(
            "sample_free: ImageD needs a reference image; use cartoonize");
    strategy.validate(sched, grid, denoiser.dimension());
    GuidanceConfig{gamma}.validate();

    NormalSampler rng(seed);
    Latent x_top = rng.vector(static_cast<std::size_t>(denoiser.dimension()));

    auto chain = detail::run_chain(denoiser, sched, grid, p, gamma, strategy,
                                   SamplingMode::FreeGeneration, 0, x_top, std::nullopt,
                                   opts.activation);

    SampleResult out;
    out.final_sample = chain.final_sample;
    out.trajectory = std::move(chain.trajectory);
    out.record.config = {SamplingMode::FreeGeneration, strategy.kind,     strategy.b,
                         strategy.s,                   gamma,             seed,
                         p.is_null() ? -1 : *p.label,  sched.T,           grid.N};
    out.record.rows = std::move(chain.rows);
    out.record.final_sample = out.final_sample;

    if (strategy.kind == StrategyKind::None || !opts.record_baseline) {
        out.record.baseline_final = out.final_sample;
    } else {
        SamplerOptions base_opts = opts;
        base_opts.record_baseline = false;
        out.record.baseline_final =
            sample_free(denoiser, sched, grid, p, gamma, DisturbanceStrategy::none(), seed,
                        base_opts)
                .final_sample;
    }
    return out;
}

namespace detail {

inline std::size_t grid_index_of(const DdimGrid& grid, int t) {
    for (std::size_t i = 0; i < grid.timesteps.size(); ++i)
        if (grid.timesteps[i] == t) return i;
    throw std::invalid_argument("timestep " + std::to_string(t) + " is not on the grid");
}

}  // namespace detail

// Plain img2img: noise x_ref to level s, then run the undisturbed CFG
// descent. The baseline every image-guided comparison is made against.
inline SampleResult img2img_baseline(const Denoiser& denoiser, const NoiseSchedule& sched,
                                     const DdimGrid& grid, const Condition& p, double gamma,
                                     int s, const Latent& x_ref, std::uint64_t seed,
                                     const SamplerOptions& opts = {}) {
    // s = 0 is allowed here: no noise is added and no steps run, the output
    // is x_ref itself
    if (s < 0 || s >= sched.T || s % grid.stride != 0)
        throw std::invalid_argument("img2img: s=" + std::to_string(s) +
                                    " must be a grid timestep inside [0, T)");
    GuidanceConfig{gamma}.validate();

    NormalSampler rng(seed);
    Latent eps = rng.vector(x_ref.size());
    Latent x_s = forward_noise(sched, x_ref, s, eps);

    auto chain = detail::run_chain(denoiser, sched, grid, p, gamma, DisturbanceStrategy::none(),
                                   SamplingMode::ImageGuided, detail::grid_index_of(grid, s),
                                   std::move(x_s), std::nullopt, opts.activation);

    SampleResult out;
    out.final_sample = chain.final_sample;
    out.trajectory = std::move(chain.trajectory);
    out.record.config = {SamplingMode::ImageGuided, StrategyKind::None, 0, s, gamma, seed,
                         p.is_null() ? -1 : *p.label, sched.T, grid.N};
    out.record.rows = std::move(chain.rows);
    out.record.final_sample = out.final_sample;
    out.record.baseline_final = out.final_sample;
    return out;
}

// Image cartoonization: noise x_ref to level s, descend with the disturbance
// active at every step. k = s*N/T steps get executed. BackD re-noises x_ref
// with the same eps that produced x_s; ImageD feeds x_ref directly.
inline SampleResult cartoonize(const Denoiser& denoiser, const NoiseSchedule& sched,
                               const DdimGrid& grid, const Condition& p, double gamma,
                               DisturbanceStrategy strategy, const Latent& x_ref,
                               std::uint64_t seed, const SamplerOptions& opts = {}) {
    if (strategy.kind == StrategyKind::None)
        throw std::invalid_argument(
            "cartoonize: strategy none is plain img2img; use the baseline mode");
    if (x_ref.size() != static_cast<std::size_t>(denoiser.dimension()) || !all_finite(x_ref))
        throw std::invalid_argument("cartoonize: x_ref must be finite with the run dimension");
    // BackD re-noises the input image; ImageD may carry a substituted
    // null-branch latent already (the correlation experiment uses that).
    if (strategy.kind == StrategyKind::BackD || strategy.x_ref.empty())
        strategy.x_ref = x_ref;
    strategy.validate(sched, grid, denoiser.dimension());
    GuidanceConfig{gamma}.validate();

    int s = strategy.s;
    NormalSampler rng(seed);
    Latent eps = rng.vector(x_ref.size());
    Latent x_s = forward_noise(sched, x_ref, s, eps);

    // disturbance applies from the first step at s: force the window open
    DisturbanceStrategy active_strategy = strategy;
    active_strategy.s = s;

    auto chain = detail::run_chain(denoiser, sched, grid, p, gamma, active_strategy,
                                   SamplingMode::ImageGuided, detail::grid_index_of(grid, s),
                                   std::move(x_s), std::optional<Latent>(eps),
                                   ActivationRule::AtOrBelowS);

    SampleResult out;
    out.final_sample = chain.final_sample;
    out.trajectory = std::move(chain.trajectory);
    out.record.config = {SamplingMode::ImageGuided, strategy.kind, strategy.b, s, gamma, seed,
                         p.is_null() ? -1 : *p.label, sched.T, grid.N};
    out.record.rows = std::move(chain.rows);
    out.record.final_sample = out.final_sample;

    if (opts.record_baseline) {
        SamplerOptions base_opts = opts;
        base_opts.record_baseline = false;
        out.record.baseline_final =
            img2img_baseline(denoiser, sched, grid, p, gamma, s, x_ref, seed, base_opts)
                .final_sample;
    } else {
        out.record.baseline_final = out.final_sample;
    }
    return out;
}

}  // namespace cartoonlab
