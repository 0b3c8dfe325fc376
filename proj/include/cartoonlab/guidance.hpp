#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>

#include "cartoonlab/latent.hpp"
#include "cartoonlab/mixture.hpp"
#include "cartoonlab/schedule.hpp"
#include "cartoonlab/trajectory.hpp"

namespace cartoonlab {

struct GuidanceConfig {
    double gamma = 7.5;

    void validate() const {
        if (!std::isfinite(gamma) || gamma < 0.0)
            throw std::invalid_argument("gamma must be finite and >= 0");
    }
};

enum class StrategyKind { None, BackD, ImageD };

// Null-text disturbance strategy: the knob this whole lab is about.
//   BackD  — feed the null branch a noisier latent from b steps back,
//            active once t reaches the disturbance time s.
//   ImageD — feed the null branch the clean reference image throughout.
struct DisturbanceStrategy {
    StrategyKind kind = StrategyKind::None;
    int b = 0;              // rollback steps (BackD)
    int s = 0;              // disturbance time (BackD, ImageD)
    Latent x_ref;           // clean reference (ImageD)

    static DisturbanceStrategy none() { return {}; }
    static DisturbanceStrategy back_d(int b, int s) {
        DisturbanceStrategy d;
        d.kind = StrategyKind::BackD;
        d.b = b;
        d.s = s;
        return d;
    }
    static DisturbanceStrategy image_d(Latent x_ref, int s) {
        DisturbanceStrategy d;
        d.kind = StrategyKind::ImageD;
        d.s = s;
        d.x_ref = std::move(x_ref);
        return d;
    }

    void validate(const NoiseSchedule& sched, const DdimGrid& grid, int dimension) const {
        auto check_step = [&](int v, const char* name) {
            if (v <= 0 || v >= sched.T)
                throw std::invalid_argument(std::string(name) + "=" + std::to_string(v) +
                                            " must lie strictly inside (0, " +
                                            std::to_string(sched.T) + ")");
            if (v % grid.stride != 0)
                throw std::invalid_argument(std::string(name) + "=" + std::to_string(v) +
                                            " must be a multiple of the grid stride " +
                                            std::to_string(grid.stride));
        };
        switch (kind) {
            case StrategyKind::None:
                break;
            case StrategyKind::BackD:
                check_step(b, "b");
                check_step(s, "s");
                break;
            case StrategyKind::ImageD:
                check_step(s, "s");
                if (x_ref.size() != static_cast<std::size_t>(dimension))
                    throw std::invalid_argument("x_ref dimension mismatch");
                if (!all_finite(x_ref))
                    throw std::invalid_argument("x_ref must be finite");
                break;
        }
    }
};

// Where the null-branch input came from, kept per step for the run record.
enum class SigmaSource { SameAsText, FromTrajectory, ForwardNoised, CleanReference };

inline const char* to_string(SigmaSource s) {
    switch (s) {
        case SigmaSource::SameAsText: return "same_as_text";
        case SigmaSource::FromTrajectory: return "from_trajectory";
        case SigmaSource::ForwardNoised: return "forward_noised";
        case SigmaSource::CleanReference: return "clean_reference";
    }
    return "?";
}

enum class SamplingMode { FreeGeneration, ImageGuided };

// eps_null + gamma (eps_text - eps_null), evaluated as the affine blend
// (1 - gamma) eps_null + gamma eps_text so that gamma = 0 and gamma = 1
// return the respective branch bit-exactly.
inline Latent cfg_combine(const Latent& eps_text, const Latent& eps_null, double gamma) {
    check_same_dim(eps_text, eps_null, "cfg_combine");
    Latent out(eps_text.size());
    double w = 1.0 - gamma;
    for (std::size_t i = 0; i < out.size(); ++i)
        out[i] = w * eps_null[i] + gamma * eps_text[i];
    return out;
}

// Pick the null-branch input x_sigma for the current step.
//   inactive             -> x_t itself
//   BackD, free gen      -> replay the latent visited at t + b (clamped to
//                           the top grid timestep)
//   BackD, image guided  -> re-noise x_ref to level t + b (clamped to T)
//                           with the same eps used for the initial noising
//   ImageD               -> the clean reference
inline std::pair<Latent, SigmaSource> select_sigma(const DisturbanceStrategy& strategy, int t,
                                                   bool active, const Latent& x_t,
                                                   const Trajectory& trajectory,
                                                   const NoiseSchedule& sched,
                                                   const DdimGrid& grid,
                                                   const std::optional<Latent>& cached_eps,
                                                   SamplingMode mode) {
    if (strategy.kind == StrategyKind::None || !active)
        return {x_t, SigmaSource::SameAsText};

    if (strategy.kind == StrategyKind::BackD) {
        if (mode == SamplingMode::FreeGeneration) {
            int lookup = std::min(t + strategy.b, grid.top());
            return {trajectory.at(lookup), SigmaSource::FromTrajectory};
        }
        if (!cached_eps)
            throw std::logic_error("select_sigma: image-guided BackD needs the cached eps");
        int level = std::min(t + strategy.b, sched.T);
        return {forward_noise(sched, strategy.x_ref, level, *cached_eps),
                SigmaSource::ForwardNoised};
    }

    return {strategy.x_ref, SigmaSource::CleanReference};
}

// Algorithm core: eps = eps(x_sigma | null) + gamma (eps(x_t | p) - eps(x_sigma | null)).
// Both branches are evaluated at the current t, including the clean
// reference of ImageD; that misalignment is the method.
inline Latent disturbed_epsilon(const Denoiser& denoiser, const Latent& x_t,
                                const Latent& x_sigma, const Condition& p, double gamma, int t) {
    check_same_dim(x_t, x_sigma, "disturbed_epsilon");
    Latent eps_text = denoiser.epsilon(x_t, p, t);
    Latent eps_null = denoiser.epsilon(x_sigma, Condition::null_text(), t);
    return cfg_combine(eps_text, eps_null, gamma);
}

}  // namespace cartoonlab
