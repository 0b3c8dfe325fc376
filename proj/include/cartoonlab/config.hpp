#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "cartoonlab/analysis.hpp"
#include "cartoonlab/guidance.hpp"
#include "cartoonlab/latent.hpp"
#include "cartoonlab/manifest.hpp"
#include "cartoonlab/mixture.hpp"
#include "cartoonlab/sampler.hpp"
#include "cartoonlab/schedule.hpp"

namespace cartoonlab {

// Configuration / usage error; mapped to exit code 2 by the CLI.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// ----------------------------------------------------------- datasets ---

struct Dataset {
    LabeledMixture mixture;
    std::vector<Latent> ref_points;  // optional reference images bundled with the data
};

inline Dataset parse_dataset(const nlohmann::json& j) {
    Dataset ds;
    try {
        ds.mixture.dimension = j.at("dimension").get<int>();
        ds.mixture.class_priors = j.at("class_priors").get<std::vector<double>>();
        for (const auto& jc : j.at("classes")) {
            MixtureClass cls;
            cls.label = jc.at("label").get<int>();
            for (const auto& jk : jc.at("components")) {
                MixtureComponent comp;
                comp.weight = jk.at("weight").get<double>();
                comp.mean = jk.at("mean").get<Latent>();
                comp.variances = jk.at("variances").get<Latent>();
                cls.components.push_back(std::move(comp));
            }
            ds.mixture.classes.push_back(std::move(cls));
        }
        if (j.contains("ref_points"))
            ds.ref_points = j.at("ref_points").get<std::vector<Latent>>();
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("dataset: malformed file: ") + e.what());
    }
    try {
        ds.mixture.validate();
    } catch (const std::exception& e) {
        throw ConfigError(std::string("dataset: ") + e.what());
    }
    for (const auto& r : ds.ref_points)
        if (r.size() != static_cast<std::size_t>(ds.mixture.dimension))
            throw ConfigError("dataset: ref_points entry dimension mismatch");
    return ds;
}

inline Dataset load_dataset(const std::string& path) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(read_file(path));
    } catch (const std::exception& e) {
        throw ConfigError("dataset: cannot load '" + path + "': " + e.what());
    }
    return parse_dataset(j);
}

// ---------------------------------------------------------- run config ---

enum class RunMode { Sample, Cartoonize, Sweep, Analyze };

struct SweepSpecConfig {
    std::vector<std::optional<int>> b_values;
    std::vector<int> s_values;
    std::vector<double> gamma_values;
    std::vector<int> n_values;
    int n_seeds = 8;
    bool image_d = false;
    std::size_t cell_cap = 4096;

    bool operator==(const SweepSpecConfig&) const = default;
};

// Everything a run needs; loads from JSON, saves back losslessly.
struct RunConfig {
    int T = 1000;
    double beta_start = 1e-4;
    double beta_end = 0.02;
    int steps = 100;  // N

    std::string mode = "free";  // free | cartoonize
    std::string strategy = "backd";  // none | backd | imaged | baseline
    int b = 300;
    int s = 300;
    double gamma = 7.5;
    int prompt_class = 0;

    std::string dataset_path;
    std::optional<Latent> ref_inline;
    std::optional<int> ref_index;

    std::uint64_t seed = 0;
    std::string out_dir = "out";
    std::string activation_rule = "algorithm";  // algorithm (t <= s) | prose (t < s)

    std::optional<SweepSpecConfig> sweep;

    bool operator==(const RunConfig&) const = default;
};

inline nlohmann::json to_json(const RunConfig& c) {
    nlohmann::json j;
    j["schedule"] = {{"T", c.T}, {"beta_start", c.beta_start}, {"beta_end", c.beta_end}};
    j["steps"] = c.steps;
    j["mode"] = c.mode;
    j["strategy"] = {{"kind", c.strategy}, {"b", c.b}, {"s", c.s}};
    j["gamma"] = c.gamma;
    j["prompt_class"] = c.prompt_class;
    j["dataset"] = c.dataset_path;
    if (c.ref_inline) j["ref"] = *c.ref_inline;
    if (c.ref_index) j["ref"] = {{"index", *c.ref_index}};
    j["seed"] = c.seed;
    j["out"] = c.out_dir;
    j["activation_rule"] = c.activation_rule;
    if (c.sweep) {
        nlohmann::json axes;
        if (!c.sweep->b_values.empty()) {
            axes["b"] = nlohmann::json::array();
            for (const auto& b : c.sweep->b_values)
                axes["b"].push_back(b ? nlohmann::json(*b) : nlohmann::json(nullptr));
        }
        if (!c.sweep->s_values.empty()) axes["s"] = c.sweep->s_values;
        if (!c.sweep->gamma_values.empty()) axes["gamma"] = c.sweep->gamma_values;
        if (!c.sweep->n_values.empty()) axes["steps"] = c.sweep->n_values;
        j["sweep"] = {{"axes", axes},
                      {"n_seeds", c.sweep->n_seeds},
                      {"image_d", c.sweep->image_d},
                      {"cell_cap", c.sweep->cell_cap}};
    }
    return j;
}

inline RunConfig config_from_json(const nlohmann::json& j) {
    RunConfig c;
    try {
        if (j.contains("schedule")) {
            const auto& s = j.at("schedule");
            if (s.contains("T")) c.T = s.at("T").get<int>();
            if (s.contains("beta_start")) c.beta_start = s.at("beta_start").get<double>();
            if (s.contains("beta_end")) c.beta_end = s.at("beta_end").get<double>();
        }
        if (j.contains("steps")) c.steps = j.at("steps").get<int>();
        if (j.contains("mode")) c.mode = j.at("mode").get<std::string>();
        if (j.contains("strategy")) {
            const auto& s = j.at("strategy");
            if (s.contains("kind")) c.strategy = s.at("kind").get<std::string>();
            if (s.contains("b")) c.b = s.at("b").get<int>();
            if (s.contains("s")) c.s = s.at("s").get<int>();
        }
        if (j.contains("gamma")) c.gamma = j.at("gamma").get<double>();
        if (j.contains("prompt_class")) c.prompt_class = j.at("prompt_class").get<int>();
        if (j.contains("dataset")) c.dataset_path = j.at("dataset").get<std::string>();
        if (j.contains("ref")) {
            const auto& r = j.at("ref");
            if (r.is_array())
                c.ref_inline = r.get<Latent>();
            else if (r.is_object() && r.contains("index"))
                c.ref_index = r.at("index").get<int>();
            else
                throw ConfigError("ref: must be an inline vector or {\"index\": k}");
        }
        if (j.contains("seed")) c.seed = j.at("seed").get<std::uint64_t>();
        if (j.contains("out")) c.out_dir = j.at("out").get<std::string>();
        if (j.contains("activation_rule"))
            c.activation_rule = j.at("activation_rule").get<std::string>();
        if (j.contains("sweep")) {
            SweepSpecConfig sw;
            const auto& js = j.at("sweep");
            if (js.contains("axes")) {
                const auto& axes = js.at("axes");
                if (axes.contains("b"))
                    for (const auto& v : axes.at("b"))
                        sw.b_values.push_back(v.is_null()
                                                  ? std::optional<int>{}
                                                  : std::optional<int>{v.get<int>()});
                if (axes.contains("s")) sw.s_values = axes.at("s").get<std::vector<int>>();
                if (axes.contains("gamma"))
                    sw.gamma_values = axes.at("gamma").get<std::vector<double>>();
                if (axes.contains("steps"))
                    sw.n_values = axes.at("steps").get<std::vector<int>>();
            }
            if (js.contains("n_seeds")) sw.n_seeds = js.at("n_seeds").get<int>();
            if (js.contains("image_d")) sw.image_d = js.at("image_d").get<bool>();
            if (js.contains("cell_cap")) sw.cell_cap = js.at("cell_cap").get<std::size_t>();
            c.sweep = sw;
        }
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("config: malformed file: ") + e.what());
    }
    return c;
}

inline RunConfig load_config(const std::string& path) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(read_file(path));
    } catch (const std::exception& e) {
        throw ConfigError("config: cannot load '" + path + "': " + e.what());
    }
    return config_from_json(j);
}

// Cross-field validation with field-named messages. Returns warnings
// (non-fatal advice) for the CLI to print.
inline std::vector<std::string> validate_config(const RunConfig& c) {
    std::vector<std::string> warnings;

    if (c.T < 2) throw ConfigError("schedule.T: must be >= 2, got " + std::to_string(c.T));
    if (!(c.beta_start > 0.0) || !(c.beta_start <= c.beta_end) || !(c.beta_end < 1.0))
        throw ConfigError("schedule.beta_start/beta_end: need 0 < beta_start <= beta_end < 1");
    if (c.steps < 1 || c.T % c.steps != 0)
        throw ConfigError("steps: " + std::to_string(c.steps) + " must divide schedule.T=" +
                          std::to_string(c.T));
    int stride = c.T / c.steps;

    if (c.mode != "free" && c.mode != "cartoonize")
        throw ConfigError("mode: must be 'free' or 'cartoonize', got '" + c.mode + "'");
    if (c.strategy != "none" && c.strategy != "backd" && c.strategy != "imaged" &&
        c.strategy != "baseline")
        throw ConfigError("strategy.kind: must be none|backd|imaged|baseline, got '" +
                          c.strategy + "'");
    if (c.activation_rule != "algorithm" && c.activation_rule != "prose")
        throw ConfigError("activation_rule: must be 'algorithm' or 'prose'");

    auto check_grid_step = [&](int v, const char* field) {
        if (v <= 0 || v >= c.T)
            throw ConfigError(std::string(field) + ": " + std::to_string(v) +
                              " must lie strictly inside (0, " + std::to_string(c.T) + ")");
        if (v % stride != 0)
            throw ConfigError(std::string(field) + ": " + std::to_string(v) +
                              " must be a multiple of the grid stride " +
                              std::to_string(stride));
        if (v > 400)
            warnings.push_back(std::string(field) + "=" + std::to_string(v) +
                               " is above the recommended maximum of 400");
    };

    bool needs_s = c.strategy == "backd" || c.strategy == "imaged" ||
                   c.strategy == "baseline" || c.mode == "cartoonize";
    if (c.strategy == "backd") check_grid_step(c.b, "strategy.b");
    if (needs_s) check_grid_step(c.s, "strategy.s");

    if (!std::isfinite(c.gamma) || c.gamma < 0.0)
        throw ConfigError("gamma: must be finite and >= 0");
    if (c.dataset_path.empty()) throw ConfigError("dataset: path is required");

    if (c.mode == "free") {
        if (c.strategy == "imaged")
            throw ConfigError("strategy.kind: imaged needs a reference image; use mode=cartoonize");
        if (c.strategy == "baseline")
            throw ConfigError("strategy.kind: baseline img2img needs mode=cartoonize");
    }
    if (c.mode == "cartoonize") {
        if (c.strategy == "none")
            throw ConfigError(
                "strategy.kind: none is not a cartoonize strategy; use 'baseline' for plain "
                "img2img");
        if (!c.ref_inline && !c.ref_index)
            throw ConfigError("ref: cartoonize needs a reference (inline vector or index)");
    }
    if (c.ref_inline && c.ref_index)
        throw ConfigError("ref: give either an inline vector or an index, not both");

    if (c.sweep) {
        if (c.sweep->n_seeds < 1) throw ConfigError("sweep.n_seeds: must be >= 1");
        if (c.sweep->cell_cap < 1) throw ConfigError("sweep.cell_cap: must be >= 1");
    }
    return warnings;
}

// Resolve the reference latent against the loaded dataset.
inline Latent resolve_ref(const RunConfig& c, const Dataset& ds) {
    if (c.ref_inline) {
        if (c.ref_inline->size() != static_cast<std::size_t>(ds.mixture.dimension))
            throw ConfigError("ref: inline vector has dimension " +
                              std::to_string(c.ref_inline->size()) + ", dataset needs " +
                              std::to_string(ds.mixture.dimension));
        return *c.ref_inline;
    }
    if (c.ref_index) {
        if (*c.ref_index < 0 ||
            static_cast<std::size_t>(*c.ref_index) >= ds.ref_points.size())
            throw ConfigError("ref.index: " + std::to_string(*c.ref_index) +
                              " out of range; dataset has " +
                              std::to_string(ds.ref_points.size()) + " ref_points");
        return ds.ref_points[static_cast<std::size_t>(*c.ref_index)];
    }
    throw ConfigError("ref: no reference configured");
}

}  // namespace cartoonlab
