// cartoonlab: guided-diffusion sampling lab over analytic Gaussian mixtures.
//
// Subcommands: sample | cartoonize | sweep | analyze.
// Exit codes: 0 success, 2 configuration error, 3 runtime numerical error.

#include <cstdint>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "cartoonlab/config.hpp"
#include "cartoonlab/runner.hpp"

namespace {

struct Overrides {
    std::optional<std::string> config_path;
    std::optional<double> gamma;
    std::optional<int> b;
    std::optional<int> s;
    std::optional<int> steps;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> strategy;
    std::optional<int> prompt_class;
    std::optional<std::string> ref;  // "i1,i2,..." inline or "@k" index
    std::optional<std::string> dataset;
    std::optional<std::string> out;
};

void add_common_flags(CLI::App* cmd, Overrides& ov) {
    cmd->add_option("--config", ov.config_path, "run configuration file (JSON)");
    cmd->add_option("--gamma", ov.gamma, "guidance scale");
    cmd->add_option("--b", ov.b, "rollback steps");
    cmd->add_option("--s", ov.s, "disturbance time");
    cmd->add_option("--steps", ov.steps, "DDIM sampling steps N");
    cmd->add_option("--seed", ov.seed, "master seed");
    cmd->add_option("--strategy", ov.strategy, "none|backd|imaged|baseline");
    cmd->add_option("--prompt-class", ov.prompt_class, "prompt class label");
    cmd->add_option("--ref", ov.ref, "reference: comma-separated vector or @index");
    cmd->add_option("--dataset", ov.dataset, "mixture dataset file (JSON)");
    cmd->add_option("--out", ov.out, "output bundle directory");
}

cartoonlab::RunConfig build_config(const Overrides& ov, const std::string& default_mode) {
    cartoonlab::RunConfig cfg;
    if (ov.config_path) cfg = cartoonlab::load_config(*ov.config_path);
    cfg.mode = default_mode;
    if (ov.gamma) cfg.gamma = *ov.gamma;
    if (ov.b) cfg.b = *ov.b;
    if (ov.s) cfg.s = *ov.s;
    if (ov.steps) cfg.steps = *ov.steps;
    if (ov.seed) cfg.seed = *ov.seed;
    if (ov.strategy) cfg.strategy = *ov.strategy;
    if (ov.prompt_class) cfg.prompt_class = *ov.prompt_class;
    if (ov.dataset) cfg.dataset_path = *ov.dataset;
    if (ov.out) cfg.out_dir = *ov.out;
    if (ov.ref) {
        cfg.ref_inline.reset();
        cfg.ref_index.reset();
        if (!ov.ref->empty() && (*ov.ref)[0] == '@') {
            cfg.ref_index = std::stoi(ov.ref->substr(1));
        } else {
            cartoonlab::Latent v;
            std::stringstream ss(*ov.ref);
            std::string cell;
            while (std::getline(ss, cell, ',')) v.push_back(std::stod(cell));
            cfg.ref_inline = v;
        }
    }
    return cfg;
}

int run_guarded(const std::function<void()>& fn) {
    try {
        fn();
        return 0;
    } catch (const cartoonlab::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const std::invalid_argument& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "runtime error: " << e.what() << "\n";
        return 3;
    }
}

void echo(const cartoonlab::RunConfig& cfg, const std::vector<std::string>& warnings) {
    for (const auto& w : warnings) std::cerr << "warning: " << w << "\n";
    std::cout << cartoonlab::to_json(cfg).dump(2) << "\n";
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"guided-diffusion sampling lab over Gaussian-mixture data"};
    app.require_subcommand(1);

    Overrides ov_sample, ov_cartoon, ov_sweep, ov_analyze;
    auto* cmd_sample = app.add_subcommand("sample", "free generation (optionally with Back-D)");
    add_common_flags(cmd_sample, ov_sample);
    auto* cmd_cartoon =
        app.add_subcommand("cartoonize", "image cartoonization (Back-D, Image-D, or baseline)");
    add_common_flags(cmd_cartoon, ov_cartoon);
    auto* cmd_sweep = app.add_subcommand("sweep", "hyper-parameter sweep to CSV");
    add_common_flags(cmd_sweep, ov_sweep);

    auto* cmd_analyze = app.add_subcommand("analyze", "summarize bundles or run studies");
    add_common_flags(cmd_analyze, ov_analyze);
    std::vector<std::string> bundles;
    bool do_correlation = false, do_diversity = false;
    int n_seeds = 8, irrelevant_class = 1;
    double iso_norm_frac = 1.0;
    cmd_analyze->add_option("bundles", bundles, "bundle directories to summarize");
    cmd_analyze->add_flag("--correlation", do_correlation,
                          "run the null-branch input correlation study");
    cmd_analyze->add_flag("--diversity", do_diversity, "run the diversity study");
    cmd_analyze->add_option("--n-seeds", n_seeds, "seeds per study cell");
    cmd_analyze->add_option("--irrelevant-class", irrelevant_class,
                            "class the unrelated latent is drawn from");
    cmd_analyze->add_option("--iso-norm-frac", iso_norm_frac,
                            "isomorphic perturbation norm as a fraction of ||x_ref||");

    CLI11_PARSE(app, argc, argv);

    if (cmd_sample->parsed()) {
        return run_guarded([&] {
            auto cfg = build_config(ov_sample, "free");
            if (cfg.strategy == "imaged" || cfg.strategy == "baseline")
                throw cartoonlab::ConfigError("strategy.kind: '" + cfg.strategy +
                                              "' is not valid for free generation");
            echo(cfg, cartoonlab::validate_config(cfg));
            auto dir = cartoonlab::cmd_sample(cfg);
            std::cout << "bundle: " << dir.string() << "\n";
        });
    }
    if (cmd_cartoon->parsed()) {
        return run_guarded([&] {
            auto cfg = build_config(ov_cartoon, "cartoonize");
            echo(cfg, cartoonlab::validate_config(cfg));
            auto dir = cartoonlab::cmd_cartoonize(cfg);
            std::cout << "bundle: " << dir.string() << "\n";
        });
    }
    if (cmd_sweep->parsed()) {
        return run_guarded([&] {
            auto cfg = build_config(ov_sweep, ov_sweep.strategy &&
                                                     (*ov_sweep.strategy == "imaged" ||
                                                      *ov_sweep.strategy == "baseline")
                                                 ? "cartoonize"
                                                 : "free");
            if (ov_sweep.config_path) {
                auto loaded = cartoonlab::load_config(*ov_sweep.config_path);
                cfg.mode = loaded.mode;  // sweep keeps the configured mode
            }
            if (!cfg.sweep) throw cartoonlab::ConfigError("sweep: config needs a sweep section");
            echo(cfg, cartoonlab::validate_config(cfg));
            auto dir = cartoonlab::cmd_sweep(cfg);
            std::cout << "bundle: " << dir.string() << "\n";
        });
    }
    if (cmd_analyze->parsed()) {
        return run_guarded([&] {
            if (do_correlation || do_diversity) {
                auto cfg = build_config(ov_analyze, "cartoonize");
                echo(cfg, cartoonlab::validate_config(cfg));
                if (do_correlation) {
                    auto dir = cartoonlab::cmd_analyze_correlation(cfg, n_seeds,
                                                                   irrelevant_class,
                                                                   iso_norm_frac);
                    std::cout << "bundle: " << dir.string() << "\n";
                }
                if (do_diversity) {
                    auto dir = cartoonlab::cmd_analyze_diversity(cfg, n_seeds);
                    std::cout << "bundle: " << dir.string() << "\n";
                }
                return;
            }
            if (bundles.empty())
                throw cartoonlab::ConfigError(
                    "analyze: give bundle directories or --correlation/--diversity");
            std::string out = ov_analyze.out.value_or("out/analyze");
            auto dir = cartoonlab::cmd_analyze_bundles(bundles, out);
            std::cout << "bundle: " << dir.string() << "\n";
        });
    }
    return 0;
}
