#pragma once

#include <chrono>
#include <cstdint>
#include <ctime>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "cartoonlab/analysis.hpp"
#include "cartoonlab/config.hpp"
#include "cartoonlab/csv.hpp"
#include "cartoonlab/manifest.hpp"
#include "cartoonlab/sampler.hpp"
#include "cartoonlab/svg.hpp"

// Command implementations shared by the CLI and the test suites: each takes a
// validated RunConfig, runs the experiment, and writes an artifact bundle.

namespace cartoonlab {

inline std::string timestamp_line() {
    auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    char buf[64];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));
    return std::string("generated-at: ") + buf;
}

inline std::string record_to_csv(const RunRecord& rec) {
    CsvWriter csv({"t", "sigma_source", "deviation_norm", "null_branch_gap"});
    csv.add_comment(timestamp_line());
    csv.add_comment("record-format: v1");
    for (const auto& row : rec.rows)
        csv.add_row({std::to_string(row.t), to_string(row.sigma_source),
                     format_double(row.deviation_norm), format_double(row.null_branch_gap)});
    return csv.str();
}

inline nlohmann::json summary_json(const RunRecord& rec, const LabeledMixture& mixture,
                                   const Condition& prompt) {
    nlohmann::json j;
    j["final_sample"] = rec.final_sample;
    j["baseline_final"] = rec.baseline_final;
    j["displacement"] = distance(rec.final_sample, rec.baseline_final);
    j["final_loglik"] = log_density_clean(mixture, rec.final_sample, prompt);
    auto nm = nearest_mode(mixture, rec.final_sample);
    j["nearest_mode_class"] = nm.class_label;
    j["nearest_mode_dist"] = nm.dist;
    j["executed_steps"] = rec.rows.size();
    j["strategy"] = rec.config.strategy == StrategyKind::None
                        ? "none"
                        : (rec.config.strategy == StrategyKind::BackD ? "backd" : "imaged");
    j["gamma"] = rec.config.gamma;
    j["seed"] = rec.config.seed;
    return j;
}

namespace detail {

inline void write_run_svg(ArtifactBundle& bundle, const Dataset& ds, const SampleResult& res,
                          std::uint64_t seed) {
    if (ds.mixture.dimension != 2) return;
    SvgScatter svg;
    SplitMix64 pick(derive_stream_seed(seed, 0xDA7A));
    NormalSampler noise(derive_stream_seed(seed, 0xDA7B));
    std::vector<Latent> samples;
    for (int i = 0; i < 200; ++i)
        samples.push_back(draw_mixture_sample(ds.mixture, Condition::null_text(), pick, noise));
    svg.add_dataset_samples(samples);
    svg.add_mixture_means(ds.mixture);
    std::vector<Latent> path;
    for (const auto& [t, x] : res.trajectory.entries()) path.push_back(x);
    svg.add_trajectory(path);
    svg.add_final_sample(res.final_sample);
    bundle.write_file("run.svg", svg.str());
}

inline ActivationRule activation_from(const RunConfig& c) {
    return c.activation_rule == "prose" ? ActivationRule::BelowS : ActivationRule::AtOrBelowS;
}

}  // namespace detail

// Free generation (sample command).
inline std::filesystem::path cmd_sample(const RunConfig& cfg) {
    if (cfg.mode != "free") throw ConfigError("mode: cmd_sample requires mode=free");
    Dataset ds = load_dataset(cfg.dataset_path);
    NoiseSchedule sched = make_linear_schedule(cfg.T, cfg.beta_start, cfg.beta_end);
    DdimGrid grid = make_grid(sched, cfg.steps);
    GmmDenoiser denoiser(ds.mixture, sched);
    Condition prompt = Condition::prompt(cfg.prompt_class);

    DisturbanceStrategy strat = cfg.strategy == "none"
                                    ? DisturbanceStrategy::none()
                                    : DisturbanceStrategy::back_d(cfg.b, cfg.s);
    SamplerOptions opts;
    opts.activation = detail::activation_from(cfg);
    SampleResult res = sample_free(denoiser, sched, grid, prompt, cfg.gamma, strat, cfg.seed, opts);

    ArtifactBundle bundle(cfg.out_dir);
    bundle.write_file("config.json", to_json(cfg).dump(2) + "\n");
    bundle.write_file("record.csv", record_to_csv(res.record));
    bundle.write_file("summary.json", summary_json(res.record, ds.mixture, prompt).dump(2) + "\n");
    detail::write_run_svg(bundle, ds, res, cfg.seed);
    bundle.finalize();
    return bundle.dir();
}

// Image cartoonization (cartoonize command), including the plain img2img
// baseline behind strategy=baseline.
inline std::filesystem::path cmd_cartoonize(const RunConfig& cfg) {
    if (cfg.mode != "cartoonize") throw ConfigError("mode: cmd_cartoonize requires mode=cartoonize");
    Dataset ds = load_dataset(cfg.dataset_path);
    NoiseSchedule sched = make_linear_schedule(cfg.T, cfg.beta_start, cfg.beta_end);
    DdimGrid grid = make_grid(sched, cfg.steps);
    GmmDenoiser denoiser(ds.mixture, sched);
    Condition prompt = Condition::prompt(cfg.prompt_class);
    Latent x_ref = resolve_ref(cfg, ds);

    SampleResult res;
    if (cfg.strategy == "baseline") {
        res = img2img_baseline(denoiser, sched, grid, prompt, cfg.gamma, cfg.s, x_ref, cfg.seed);
    } else {
        DisturbanceStrategy strat = cfg.strategy == "backd"
                                        ? DisturbanceStrategy::back_d(cfg.b, cfg.s)
                                        : DisturbanceStrategy::image_d({}, cfg.s);
        res = cartoonize(denoiser, sched, grid, prompt, cfg.gamma, strat, x_ref, cfg.seed);
    }

    ArtifactBundle bundle(cfg.out_dir);
    bundle.write_file("config.json", to_json(cfg).dump(2) + "\n");
    bundle.write_file("record.csv", record_to_csv(res.record));
    bundle.write_file("summary.json", summary_json(res.record, ds.mixture, prompt).dump(2) + "\n");
    detail::write_run_svg(bundle, ds, res, cfg.seed);
    bundle.finalize();
    return bundle.dir();
}

inline SweepSpec sweep_spec_from(const RunConfig& cfg, const Dataset& ds) {
    if (!cfg.sweep) throw ConfigError("sweep: config has no sweep section");
    SweepSpec spec;
    spec.mode = cfg.mode == "cartoonize" ? SamplingMode::ImageGuided
                                         : SamplingMode::FreeGeneration;
    spec.b_values = cfg.sweep->b_values;
    spec.s_values = cfg.sweep->s_values;
    spec.gamma_values = cfg.sweep->gamma_values;
    spec.n_values = cfg.sweep->n_values;
    spec.T = cfg.T;
    spec.beta_start = cfg.beta_start;
    spec.beta_end = cfg.beta_end;
    spec.fixed_b = cfg.strategy == "none" ? std::optional<int>{} : std::optional<int>{cfg.b};
    spec.fixed_s = cfg.s;
    spec.fixed_gamma = cfg.gamma;
    spec.fixed_n = cfg.steps;
    spec.prompt_class = cfg.prompt_class;
    spec.image_d = cfg.sweep->image_d;
    spec.cell_cap = cfg.sweep->cell_cap;
    if (spec.mode == SamplingMode::ImageGuided) spec.x_ref = resolve_ref(cfg, ds);
    for (int i = 0; i < cfg.sweep->n_seeds; ++i)
        spec.seeds.push_back(derive_stream_seed(cfg.seed, static_cast<std::uint64_t>(i)));
    return spec;
}

inline std::string sweep_to_csv(const SweepTable& table, int dimension) {
    std::vector<std::string> cols = {"b",      "s",    "gamma",        "steps",
                                     "seed",   "mean_deviation", "max_deviation",
                                     "displacement", "final_loglik", "nearest_mode_dist",
                                     "nearest_mode_class"};
    for (int i = 0; i < dimension; ++i) cols.push_back("final_" + std::to_string(i));
    CsvWriter csv(cols);
    csv.add_comment(timestamp_line());
    csv.add_comment("sweep-format: v1");
    for (const auto& r : table.rows) {
        std::vector<std::string> cells = {r.b ? std::to_string(*r.b) : "",
                                          std::to_string(r.s),
                                          format_double(r.gamma),
                                          std::to_string(r.n),
                                          std::to_string(r.seed),
                                          format_double(r.mean_deviation),
                                          format_double(r.max_deviation),
                                          format_double(r.displacement),
                                          format_double(r.final_loglik),
                                          format_double(r.nearest_mode_dist),
                                          std::to_string(r.nearest_mode_class)};
        for (double v : r.final_sample) cells.push_back(format_double(v));
        csv.add_row(std::move(cells));
    }
    return csv.str();
}

inline std::filesystem::path cmd_sweep(const RunConfig& cfg) {
    Dataset ds = load_dataset(cfg.dataset_path);
    SweepSpec spec = sweep_spec_from(cfg, ds);
    SweepTable table = run_sweep(ds.mixture, spec);

    ArtifactBundle bundle(cfg.out_dir);
    bundle.write_file("config.json", to_json(cfg).dump(2) + "\n");
    bundle.write_file("sweep.csv", sweep_to_csv(table, ds.mixture.dimension));
    if (!table.skipped.empty()) {
        CsvWriter skipped({"b", "s", "steps", "reason"});
        skipped.add_comment(timestamp_line());
        for (const auto& sc : table.skipped)
            skipped.add_row({sc.b ? std::to_string(*sc.b) : "", std::to_string(sc.s),
                             std::to_string(sc.n), "\"" + sc.reason + "\""});
        bundle.write_file("skipped.csv", skipped.str());
    }
    bundle.finalize();
    return bundle.dir();
}

// Summarize previously written bundles, one CSV row per bundle.
inline std::filesystem::path cmd_analyze_bundles(const std::vector<std::string>& bundle_dirs,
                                                 const std::string& out_dir) {
    CsvWriter csv({"bundle", "strategy", "gamma", "seed", "executed_steps", "displacement",
                   "final_loglik", "nearest_mode_class", "nearest_mode_dist"});
    csv.add_comment(timestamp_line());
    for (const auto& dir : bundle_dirs) {
        nlohmann::json s;
        try {
            s = nlohmann::json::parse(
                read_file((std::filesystem::path(dir) / "summary.json").string()));
        } catch (const std::exception& e) {
            throw ConfigError("analyze: cannot read bundle '" + dir + "': " + e.what());
        }
        csv.add_row({dir, s.at("strategy").get<std::string>(),
                     format_double(s.at("gamma").get<double>()),
                     std::to_string(s.at("seed").get<std::uint64_t>()),
                     std::to_string(s.at("executed_steps").get<std::size_t>()),
                     format_double(s.at("displacement").get<double>()),
                     format_double(s.at("final_loglik").get<double>()),
                     std::to_string(s.at("nearest_mode_class").get<int>()),
                     format_double(s.at("nearest_mode_dist").get<double>())});
    }
    ArtifactBundle bundle(out_dir);
    bundle.write_file("analyze.csv", csv.str());
    bundle.finalize();
    return bundle.dir();
}

inline std::string correlation_to_csv(const CorrelationTable& table) {
    CsvWriter csv({"setting", "proxy_mean", "proxy_min", "proxy_max", "gap_mean", "gap_max",
                   "displacement_mean", "final_loglik_mean", "perturbation_norm"});
    csv.add_comment(timestamp_line());
    for (const auto& r : table.rows)
        csv.add_row({to_string(r.setting), format_double(r.proxy_mean),
                     format_double(r.proxy_min), format_double(r.proxy_max),
                     format_double(r.gap_mean), format_double(r.gap_max),
                     format_double(r.displacement_mean), format_double(r.final_loglik_mean),
                     format_double(r.perturbation_norm)});
    return csv.str();
}

inline std::filesystem::path cmd_analyze_correlation(const RunConfig& cfg, int n_seeds,
                                                     int irrelevant_class,
                                                     double iso_norm_frac) {
    Dataset ds = load_dataset(cfg.dataset_path);
    Latent x_ref = resolve_ref(cfg, ds);
    CorrelationConfig cc;
    cc.T = cfg.T;
    cc.beta_start = cfg.beta_start;
    cc.beta_end = cfg.beta_end;
    cc.n = cfg.steps;
    cc.s = cfg.s;
    cc.b = cfg.b;
    cc.t_probe = cfg.s / 2;
    cc.gamma = cfg.gamma;
    cc.prompt_class = cfg.prompt_class;
    cc.irrelevant_class = irrelevant_class;
    cc.iso_norm_frac = iso_norm_frac;
    for (int i = 0; i < n_seeds; ++i)
        cc.seeds.push_back(derive_stream_seed(cfg.seed, static_cast<std::uint64_t>(i)));
    CorrelationTable table = correlation_experiment(ds.mixture, x_ref, cc);

    ArtifactBundle bundle(cfg.out_dir);
    bundle.write_file("config.json", to_json(cfg).dump(2) + "\n");
    bundle.write_file("correlation.csv", correlation_to_csv(table));
    bundle.finalize();
    return bundle.dir();
}

inline std::filesystem::path cmd_analyze_diversity(const RunConfig& cfg, int n_seeds) {
    Dataset ds = load_dataset(cfg.dataset_path);
    Latent x_ref = resolve_ref(cfg, ds);
    DiversityConfig dc;
    dc.T = cfg.T;
    dc.beta_start = cfg.beta_start;
    dc.beta_end = cfg.beta_end;
    dc.n = cfg.steps;
    dc.s = cfg.s;
    dc.b = cfg.b;
    dc.gamma = cfg.gamma;
    dc.prompt_class = cfg.prompt_class;
    dc.master_seed = cfg.seed;
    DiversityRow row = diversity_report(ds.mixture, x_ref, n_seeds, dc);

    CsvWriter csv({"strategy", "mean_pairwise_distance", "n_seeds"});
    csv.add_comment(timestamp_line());
    csv.add_row({"backd", format_double(row.backd), std::to_string(row.n_seeds)});
    csv.add_row({"imaged", format_double(row.imaged), std::to_string(row.n_seeds)});
    csv.add_row({"baseline", format_double(row.baseline), std::to_string(row.n_seeds)});

    ArtifactBundle bundle(cfg.out_dir);
    bundle.write_file("config.json", to_json(cfg).dump(2) + "\n");
    bundle.write_file("diversity.csv", csv.str());
    bundle.finalize();
    return bundle.dir();
}

}  // namespace cartoonlab
