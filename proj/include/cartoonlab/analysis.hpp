#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "cartoonlab/latent.hpp"
#include "cartoonlab/mixture.hpp"
#include "cartoonlab/rng.hpp"
#include "cartoonlab/sampler.hpp"
#include "cartoonlab/schedule.hpp"

namespace cartoonlab {

// ---------------------------------------------------------------- sweeps ---

struct SweepSpec {
    SamplingMode mode = SamplingMode::FreeGeneration;

    // axes; an empty axis collapses to the fixed value below
    std::vector<std::optional<int>> b_values;  // nullopt = no disturbance (baseline cell)
    std::vector<int> s_values;
    std::vector<double> gamma_values;
    std::vector<int> n_values;
    std::vector<std::uint64_t> seeds;

    int T = 1000;
    double beta_start = 1e-4;
    double beta_end = 0.02;
    std::optional<int> fixed_b = 300;
    int fixed_s = 300;
    double fixed_gamma = 7.5;
    int fixed_n = 100;

    int prompt_class = 0;
    Latent x_ref;               // required in ImageGuided mode
    bool image_d = false;       // image-guided cells use ImageD instead of BackD
    std::size_t cell_cap = 4096;
};

struct SweepRow {
    std::optional<int> b;  // nullopt = baseline
    int s = 0;
    double gamma = 0.0;
    int n = 0;
    std::uint64_t seed = 0;
    double mean_deviation = 0.0;
    double max_deviation = 0.0;
    double displacement = 0.0;       // ||final - same-seed baseline final||
    double final_loglik = 0.0;       // under the prompt-class clean mixture
    double nearest_mode_dist = 0.0;
    int nearest_mode_class = 0;
    Latent final_sample;
    std::vector<StepRow> steps;      // kept for the deviation-identity checks
};

struct SkippedCell {
    std::optional<int> b;
    int s = 0;
    int n = 0;
    std::string reason;
};

struct SweepTable {
    std::vector<SweepRow> rows;
    std::vector<SkippedCell> skipped;
};

namespace detail {

template <typename T>
inline std::vector<T> axis_or(const std::vector<T>& axis, T fallback) {
    if (!axis.empty()) return axis;
    return {fallback};
}

}  // namespace detail

inline SweepTable run_sweep(const LabeledMixture& mixture, const SweepSpec& spec) {
    if (spec.seeds.empty()) throw std::invalid_argument("sweep: needs at least one seed");
    if (spec.mode == SamplingMode::ImageGuided &&
        spec.x_ref.size() != static_cast<std::size_t>(mixture.dimension))
        throw std::invalid_argument("sweep: image-guided mode needs x_ref with run dimension");

    NoiseSchedule sched = make_linear_schedule(spec.T, spec.beta_start, spec.beta_end);
    GmmDenoiser denoiser(mixture, sched);
    Condition prompt = Condition::prompt(spec.prompt_class);

    auto b_axis = detail::axis_or(spec.b_values, spec.fixed_b);
    auto s_axis = detail::axis_or(spec.s_values, spec.fixed_s);
    auto g_axis = detail::axis_or(spec.gamma_values, spec.fixed_gamma);
    auto n_axis = detail::axis_or(spec.n_values, spec.fixed_n);

    SweepTable table;
    std::size_t cells = 0;
    bool none_cell_done = false;  // free-gen baseline ignores s; emit it once per (gamma, N)

    for (int n : n_axis) {
        for (double gamma : g_axis) {
            none_cell_done = false;
            for (const auto& b : b_axis) {
                for (int s : s_axis) {
                    bool baseline = !b.has_value();
                    if (baseline && spec.mode == SamplingMode::FreeGeneration) {
                        if (none_cell_done) continue;
                        none_cell_done = true;
                    }

                    if (++cells > spec.cell_cap)
                        throw std::runtime_error("sweep: cell cap " +
                                                 std::to_string(spec.cell_cap) + " exceeded");

                    DdimGrid grid;
                    try {
                        grid = make_grid(sched, n);
                        if (!baseline || spec.mode == SamplingMode::ImageGuided) {
                            if (s % grid.stride != 0 || s <= 0 || s >= spec.T)
                                throw std::invalid_argument(
                                    "s=" + std::to_string(s) +
                                    " not grid-aligned (stride " +
                                    std::to_string(grid.stride) + ")");
                        }
                        if (!baseline && !spec.image_d) {
                            if (*b % grid.stride != 0 || *b <= 0 || *b >= spec.T)
                                throw std::invalid_argument(
                                    "b=" + std::to_string(*b) +
                                    " not grid-aligned (stride " +
                                    std::to_string(grid.stride) + ")");
                        }
                    } catch (const std::exception& e) {
                        table.skipped.push_back({b, s, n, e.what()});
                        continue;
                    }

                    for (std::uint64_t seed : spec.seeds) {
                        SampleResult res;
                        if (spec.mode == SamplingMode::FreeGeneration) {
                            DisturbanceStrategy strat =
                                baseline ? DisturbanceStrategy::none()
                                         : DisturbanceStrategy::back_d(*b, s);
                            res = sample_free(denoiser, sched, grid, prompt, gamma, strat, seed);
                        } else if (baseline) {
                            res = img2img_baseline(denoiser, sched, grid, prompt, gamma, s,
                                                   spec.x_ref, seed);
                        } else {
                            DisturbanceStrategy strat =
                                spec.image_d ? DisturbanceStrategy::image_d({}, s)
                                             : DisturbanceStrategy::back_d(*b, s);
                            res = cartoonize(denoiser, sched, grid, prompt, gamma, strat,
                                             spec.x_ref, seed);
                        }

                        SweepRow row;
                        row.b = baseline ? std::nullopt : b;
                        row.s = s;
                        row.gamma = gamma;
                        row.n = n;
                        row.seed = seed;
                        double sum = 0.0, mx = 0.0;
                        for (const auto& r : res.record.rows) {
                            sum += r.deviation_norm;
                            mx = std::max(mx, r.deviation_norm);
                        }
                        row.mean_deviation =
                            res.record.rows.empty() ? 0.0 : sum / res.record.rows.size();
                        row.max_deviation = mx;
                        row.displacement =
                            distance(res.final_sample, res.record.baseline_final);
                        row.final_loglik = log_density_clean(mixture, res.final_sample, prompt);
                        auto nm = nearest_mode(mixture, res.final_sample);
                        row.nearest_mode_dist = nm.dist;
                        row.nearest_mode_class = nm.class_label;
                        row.final_sample = res.final_sample;
                        row.steps = res.record.rows;
                        table.rows.push_back(std::move(row));
                    }
                }
            }
        }
    }
    return table;
}

// --------------------------------------------------- correlation study ---

enum class CorrelationSetting { Irrelevant, Isomorphic, RolledBack, Reference };

inline const char* to_string(CorrelationSetting s) {
    switch (s) {
        case CorrelationSetting::Irrelevant: return "irrelevant";
        case CorrelationSetting::Isomorphic: return "isomorphic";
        case CorrelationSetting::RolledBack: return "rolled_back";
        case CorrelationSetting::Reference: return "reference";
    }
    return "?";
}

struct CorrelationConfig {
    int T = 1000;
    double beta_start = 1e-4;
    double beta_end = 0.02;
    int n = 100;
    int s = 300;
    int b = 200;
    int t_probe = 150;  // where the input-correlation proxy is measured (s/2)
    double gamma = 7.5;
    int prompt_class = 0;
    int irrelevant_class = 1;       // declared distinct source for x_irr
    double iso_norm_frac = 1.0;     // perturbation norm as a fraction of ||x_ref||
    std::vector<std::uint64_t> seeds;
};

struct CorrelationRow {
    CorrelationSetting setting = CorrelationSetting::Reference;
    double proxy_mean = 0.0;   // cosine input-correlation proxy, averaged over seeds
    double proxy_min = 0.0;
    double proxy_max = 0.0;
    double gap_mean = 0.0;     // null-branch gap averaged over steps and seeds
    double gap_max = 0.0;
    double displacement_mean = 0.0;
    double final_loglik_mean = 0.0;
    double perturbation_norm = 0.0;  // recorded for the isomorphic setting
};

struct CorrelationTable {
    std::vector<CorrelationRow> rows;  // always four, in enum order
};

// Fixed-norm smooth perturbation: a low-frequency sinusoid scaled to the
// requested norm. Stands in for a structure-preserving remake of x_ref.
inline Latent smooth_perturbation(std::size_t d, double target_norm) {
    Latent delta(d);
    for (std::size_t i = 0; i < d; ++i)
        delta[i] = std::sin(2.0 * M_PI * 3.0 * (static_cast<double>(i) + 0.5) /
                            static_cast<double>(d));
    double n = norm(delta);
    if (n == 0.0) throw std::logic_error("smooth_perturbation: degenerate pattern");
    for (auto& v : delta) v *= target_norm / n;
    return delta;
}

inline CorrelationTable correlation_experiment(const LabeledMixture& mixture, const Latent& x_ref,
                                               const CorrelationConfig& cfg) {
    if (cfg.seeds.empty()) throw std::invalid_argument("correlation: needs seeds");
    NoiseSchedule sched = make_linear_schedule(cfg.T, cfg.beta_start, cfg.beta_end);
    DdimGrid grid = make_grid(sched, cfg.n);
    if (cfg.t_probe % grid.stride != 0 || cfg.t_probe <= 0 || cfg.t_probe >= cfg.s)
        throw std::invalid_argument("correlation: t_probe must be a grid timestep inside (0, s)");
    GmmDenoiser denoiser(mixture, sched);
    Condition prompt = Condition::prompt(cfg.prompt_class);

    double iso_norm = cfg.iso_norm_frac * norm(x_ref);
    Latent x_iso = x_ref;
    {
        Latent delta = smooth_perturbation(x_ref.size(), iso_norm);
        for (std::size_t i = 0; i < x_iso.size(); ++i) x_iso[i] += delta[i];
    }

    CorrelationTable table;
    const CorrelationSetting settings[] = {
        CorrelationSetting::Irrelevant, CorrelationSetting::Isomorphic,
        CorrelationSetting::RolledBack, CorrelationSetting::Reference};

    for (auto setting : settings) {
        CorrelationRow row;
        row.setting = setting;
        if (setting == CorrelationSetting::Isomorphic) row.perturbation_norm = iso_norm;
        double proxy_sum = 0.0;
        row.proxy_min = 1.0;
        row.proxy_max = -1.0;
        double gap_sum = 0.0, disp_sum = 0.0, ll_sum = 0.0;
        std::size_t gap_count = 0;

        for (std::uint64_t seed : cfg.seeds) {
            // the chain eps draw replays NormalSampler(seed); side draws use
            // split streams so they cannot shift the chain
            SplitMix64 pick(derive_stream_seed(seed, 1));
            NormalSampler side_noise(derive_stream_seed(seed, 2));

            Latent x_sigma_clean;
            SampleResult res;
            double proxy = 0.0;

            switch (setting) {
                case CorrelationSetting::Irrelevant: {
                    x_sigma_clean = draw_mixture_sample(
                        mixture, Condition::prompt(cfg.irrelevant_class), pick, side_noise);
                    proxy = cosine(x_sigma_clean, x_ref);
                    res = cartoonize(denoiser, sched, grid, prompt, cfg.gamma,
                                     DisturbanceStrategy::image_d(x_sigma_clean, cfg.s), x_ref,
                                     seed);
                    break;
                }
                case CorrelationSetting::Isomorphic: {
                    proxy = cosine(x_iso, x_ref);
                    res = cartoonize(denoiser, sched, grid, prompt, cfg.gamma,
                                     DisturbanceStrategy::image_d(x_iso, cfg.s), x_ref, seed);
                    break;
                }
                case CorrelationSetting::RolledBack: {
                    res = cartoonize(denoiser, sched, grid, prompt, cfg.gamma,
                                     DisturbanceStrategy::back_d(cfg.b, cfg.s), x_ref, seed);
                    // proxy: the rolled-back latent at the probe step against a
                    // comparably-noised x_ref with an independent noise draw
                    NormalSampler chain_rng(seed);
                    Latent eps = chain_rng.vector(x_ref.size());
                    int level = std::min(cfg.t_probe + cfg.b, sched.T);
                    Latent x_sigma = forward_noise(sched, x_ref, level, eps);
                    Latent comparable =
                        forward_noise(sched, x_ref, level, side_noise.vector(x_ref.size()));
                    proxy = cosine(x_sigma, comparable);
                    break;
                }
                case CorrelationSetting::Reference: {
                    proxy = 1.0;  // cos(x_ref, x_ref), by construction
                    res = cartoonize(denoiser, sched, grid, prompt, cfg.gamma,
                                     DisturbanceStrategy::image_d(x_ref, cfg.s), x_ref, seed);
                    break;
                }
            }

            proxy_sum += proxy;
            row.proxy_min = std::min(row.proxy_min, proxy);
            row.proxy_max = std::max(row.proxy_max, proxy);
            for (const auto& r : res.record.rows) {
                gap_sum += r.null_branch_gap;
                row.gap_max = std::max(row.gap_max, r.null_branch_gap);
                ++gap_count;
            }
            disp_sum += distance(res.final_sample, res.record.baseline_final);
            ll_sum += log_density_clean(mixture, res.final_sample, prompt);
        }

        double nseeds = static_cast<double>(cfg.seeds.size());
        row.proxy_mean = proxy_sum / nseeds;
        row.gap_mean = gap_count ? gap_sum / static_cast<double>(gap_count) : 0.0;
        row.displacement_mean = disp_sum / nseeds;
        row.final_loglik_mean = ll_sum / nseeds;
        table.rows.push_back(row);
    }
    return table;
}

// ----------------------------------------------------------- diversity ---

struct DiversityRow {
    double backd = 0.0;
    double imaged = 0.0;
    double baseline = 0.0;
    int n_seeds = 0;
};

struct DiversityConfig {
    int T = 1000;
    double beta_start = 1e-4;
    double beta_end = 0.02;
    int n = 100;
    int s = 300;
    int b = 300;
    double gamma = 7.5;
    int prompt_class = 0;
    std::uint64_t master_seed = 0;
};

inline double mean_pairwise_distance(const std::vector<Latent>& xs) {
    if (xs.size() < 2) throw std::invalid_argument("diversity: need at least 2 samples");
    double sum = 0.0;
    std::size_t count = 0;
    for (std::size_t i = 0; i < xs.size(); ++i)
        for (std::size_t j = i + 1; j < xs.size(); ++j) {
            sum += distance(xs[i], xs[j]);
            ++count;
        }
    return sum / static_cast<double>(count);
}

inline DiversityRow diversity_report(const LabeledMixture& mixture, const Latent& x_ref,
                                     int n_seeds, const DiversityConfig& cfg) {
    if (n_seeds < 2) throw std::invalid_argument("diversity_report: n_seeds must be >= 2");
    NoiseSchedule sched = make_linear_schedule(cfg.T, cfg.beta_start, cfg.beta_end);
    DdimGrid grid = make_grid(sched, cfg.n);
    GmmDenoiser denoiser(mixture, sched);
    Condition prompt = Condition::prompt(cfg.prompt_class);

    std::vector<Latent> backd, imaged, baseline;
    SamplerOptions opts;
    opts.record_baseline = false;
    for (int i = 0; i < n_seeds; ++i) {
        std::uint64_t seed = derive_stream_seed(cfg.master_seed, static_cast<std::uint64_t>(i));
        backd.push_back(cartoonize(denoiser, sched, grid, prompt, cfg.gamma,
                                   DisturbanceStrategy::back_d(cfg.b, cfg.s), x_ref, seed, opts)
                            .final_sample);
        imaged.push_back(cartoonize(denoiser, sched, grid, prompt, cfg.gamma,
                                    DisturbanceStrategy::image_d({}, cfg.s), x_ref, seed, opts)
                             .final_sample);
        baseline.push_back(
            img2img_baseline(denoiser, sched, grid, prompt, cfg.gamma, cfg.s, x_ref, seed, opts)
                .final_sample);
    }
    DiversityRow row;
    row.backd = mean_pairwise_distance(backd);
    row.imaged = mean_pairwise_distance(imaged);
    row.baseline = mean_pairwise_distance(baseline);
    row.n_seeds = n_seeds;
    return row;
}

}  // namespace cartoonlab
