#pragma once

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "cartoonlab/latent.hpp"

namespace cartoonlab {

// Discrete variance schedule of the forward process.
//
// alpha_bars has T+1 entries with alpha_bars[0] = 1 exactly, so the final
// denoising step (t_prev = 0) needs no special casing: it emits the
// predicted clean sample.
struct NoiseSchedule {
    int T = 0;
    std::vector<double> betas;       // betas[i] is the variance of step i+1
    std::vector<double> alpha_bars;  // alpha_bars[t] = prod_{i<t} (1 - betas[i])

    double alpha_bar(int t) const {
        if (t < 0 || t > T)
            throw std::invalid_argument("alpha_bar: t=" + std::to_string(t) +
                                        " outside [0, " + std::to_string(T) + "]");
        return alpha_bars[static_cast<std::size_t>(t)];
    }
};

inline NoiseSchedule make_linear_schedule(int T, double beta_start, double beta_end) {
    if (T < 2)
        throw std::invalid_argument("make_linear_schedule: T must be >= 2, got " +
                                    std::to_string(T));
    if (!(beta_start > 0.0) || !(beta_start <= beta_end) || !(beta_end < 1.0))
        throw std::invalid_argument(
            "make_linear_schedule: need 0 < beta_start <= beta_end < 1, got beta_start=" +
            std::to_string(beta_start) + " beta_end=" + std::to_string(beta_end));

    NoiseSchedule s;
    s.T = T;
    s.betas.resize(static_cast<std::size_t>(T));
    for (int i = 0; i < T; ++i)
        s.betas[static_cast<std::size_t>(i)] =
            beta_start + (beta_end - beta_start) * static_cast<double>(i) /
                             static_cast<double>(T - 1);

    s.alpha_bars.resize(static_cast<std::size_t>(T) + 1);
    s.alpha_bars[0] = 1.0;
    double acc = 1.0;
    for (int t = 1; t <= T; ++t) {
        acc *= 1.0 - s.betas[static_cast<std::size_t>(t - 1)];
        s.alpha_bars[static_cast<std::size_t>(t)] = acc;
    }
    return s;
}

// x_t = sqrt(abar_t) x0 + sqrt(1 - abar_t) eps
inline Latent forward_noise(const NoiseSchedule& s, const Latent& x0, int t, const Latent& eps) {
    if (t < 0 || t > s.T)
        throw std::invalid_argument("forward_noise: t=" + std::to_string(t) +
                                    " outside [0, " + std::to_string(s.T) + "]");
    check_same_dim(x0, eps, "forward_noise");
    double ab = s.alpha_bar(t);
    double a = std::sqrt(ab);
    double b = std::sqrt(1.0 - ab);
    Latent out(x0.size());
    for (std::size_t i = 0; i < x0.size(); ++i) out[i] = a * x0[i] + b * eps[i];
    return out;
}

// Uniform subsequence of timesteps for deterministic sampling, descending
// from T - stride down to 0. Requires exact divisibility so rollback
// lookups at t + b stay on the lattice.
struct DdimGrid {
    int N = 0;
    int stride = 0;
    std::vector<int> timesteps;  // size N, timesteps[i] = T - (i+1)*stride

    int top() const { return timesteps.front(); }

    bool contains(int t) const {
        return t >= 0 && t <= timesteps.front() && t % stride == 0;
    }
};

inline DdimGrid make_grid(const NoiseSchedule& s, int N) {
    if (N < 1 || N > s.T || s.T % N != 0)
        throw std::invalid_argument("make_grid: N=" + std::to_string(N) +
                                    " must divide T=" + std::to_string(s.T));
    DdimGrid g;
    g.N = N;
    g.stride = s.T / N;
    g.timesteps.resize(static_cast<std::size_t>(N));
    for (int i = 0; i < N; ++i)
        g.timesteps[static_cast<std::size_t>(i)] = s.T - (i + 1) * g.stride;
    return g;
}

}  // namespace cartoonlab
