#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "cartoonlab/latent.hpp"
#include "cartoonlab/schedule.hpp"

namespace cartoonlab {

// Conditioning signal: a class label ("prompt") or null-text.
struct Condition {
    std::optional<int> label;

    static Condition null_text() { return Condition{std::nullopt}; }
    static Condition prompt(int label) { return Condition{label}; }

    bool is_null() const { return !label.has_value(); }
};

struct MixtureComponent {
    double weight = 1.0;
    Latent mean;
    Latent variances;  // diagonal covariance
};

struct MixtureClass {
    int label = 0;
    std::vector<MixtureComponent> components;
};

// Class-conditional diagonal Gaussian mixture. The exactly solvable stand-in
// for the data distribution: under the forward process each component stays
// Gaussian with mean sqrt(abar) mu and variance abar*sigma^2 + (1 - abar),
// so the score (and hence the ideal noise prediction) is closed-form.
struct LabeledMixture {
    int dimension = 0;
    std::vector<MixtureClass> classes;
    std::vector<double> class_priors;

    void validate() const {
        if (dimension < 1) throw std::invalid_argument("mixture: dimension must be >= 1");
        if (classes.empty()) throw std::invalid_argument("mixture: no classes");
        if (class_priors.size() != classes.size())
            throw std::invalid_argument("mixture: class_priors size != class count");
        double prior_sum = 0.0;
        for (double p : class_priors) {
            if (p < 0.0) throw std::invalid_argument("mixture: negative class prior");
            prior_sum += p;
        }
        if (std::abs(prior_sum - 1.0) > 1e-12)
            throw std::invalid_argument("mixture: class_priors must sum to 1");
        for (const auto& cls : classes) {
            if (cls.components.empty())
                throw std::invalid_argument("mixture: class " + std::to_string(cls.label) +
                                            " has no components");
            double wsum = 0.0;
            for (const auto& comp : cls.components) {
                if (comp.mean.size() != static_cast<std::size_t>(dimension) ||
                    comp.variances.size() != static_cast<std::size_t>(dimension))
                    throw std::invalid_argument("mixture: component dimension mismatch in class " +
                                                std::to_string(cls.label));
                for (double v : comp.variances)
                    if (!(v > 0.0))
                        throw std::invalid_argument("mixture: variances must be > 0");
                if (comp.weight < 0.0)
                    throw std::invalid_argument("mixture: negative component weight");
                wsum += comp.weight;
            }
            if (std::abs(wsum - 1.0) > 1e-12)
                throw std::invalid_argument("mixture: component weights of class " +
                                            std::to_string(cls.label) + " must sum to 1");
        }
    }

    const MixtureClass& find_class(int label) const {
        for (const auto& c : classes)
            if (c.label == label) return c;
        throw std::invalid_argument("mixture: unknown class label " + std::to_string(label));
    }

    // Flattened component list under a condition: the class mixture for a
    // prompt, the prior-weighted marginal for null-text.
    std::vector<std::pair<double, const MixtureComponent*>> conditioned(const Condition& c) const {
        std::vector<std::pair<double, const MixtureComponent*>> out;
        if (c.is_null()) {
            for (std::size_t k = 0; k < classes.size(); ++k)
                for (const auto& comp : classes[k].components)
                    out.emplace_back(class_priors[k] * comp.weight, &comp);
        } else {
            const auto& cls = find_class(*c.label);
            for (const auto& comp : cls.components) out.emplace_back(comp.weight, &comp);
        }
        return out;
    }
};

namespace detail {

inline double log_gaussian_diag(const Latent& x, const Latent& mean, const Latent& var,
                                double mean_scale, double var_scale, double var_shift) {
    // N(x; mean_scale*mean, var_scale*var + var_shift), diagonal
    double lp = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        double m = mean_scale * mean[i];
        double v = var_scale * var[i] + var_shift;
        double d = x[i] - m;
        lp += -0.5 * (std::log(2.0 * M_PI * v) + d * d / v);
    }
    return lp;
}

}  // namespace detail

// log p_t(x | c): density of the diffused mixture at timestep t (t = 0 gives
// the clean data density). Log-sum-exp over components.
inline double log_density(const LabeledMixture& mix, const NoiseSchedule& sched, const Latent& x,
                          const Condition& c, int t) {
    if (x.size() != static_cast<std::size_t>(mix.dimension))
        throw std::invalid_argument("log_density: latent dimension mismatch");
    double ab = sched.alpha_bar(t);
    double mean_scale = std::sqrt(ab);
    double var_shift = 1.0 - ab;

    auto comps = mix.conditioned(c);
    double max_lp = -std::numeric_limits<double>::infinity();
    std::vector<double> lps(comps.size());
    for (std::size_t k = 0; k < comps.size(); ++k) {
        lps[k] = std::log(comps[k].first) +
                 detail::log_gaussian_diag(x, comps[k].second->mean, comps[k].second->variances,
                                           mean_scale, ab, var_shift);
        max_lp = std::max(max_lp, lps[k]);
    }
    double acc = 0.0;
    for (double lp : lps) acc += std::exp(lp - max_lp);
    return max_lp + std::log(acc);
}

inline double log_density_clean(const LabeledMixture& mix, const Latent& x, const Condition& c) {
    // clean data density; bypasses the schedule (abar = 1)
    auto comps = mix.conditioned(c);
    double max_lp = -std::numeric_limits<double>::infinity();
    std::vector<double> lps(comps.size());
    for (std::size_t k = 0; k < comps.size(); ++k) {
        lps[k] = std::log(comps[k].first) +
                 detail::log_gaussian_diag(x, comps[k].second->mean, comps[k].second->variances,
                                           1.0, 1.0, 0.0);
        max_lp = std::max(max_lp, lps[k]);
    }
    double acc = 0.0;
    for (double lp : lps) acc += std::exp(lp - max_lp);
    return max_lp + std::log(acc);
}

// Exact noise prediction for the diffused mixture:
//   eps*(x, c, t) = -sqrt(1 - abar_t) * grad_x log p_t(x | c)
// computed from component responsibilities (softmax over log weights +
// log densities) and the per-component Gaussian score.
inline Latent gmm_epsilon(const LabeledMixture& mix, const NoiseSchedule& sched, const Latent& x,
                          const Condition& c, int t) {
    if (x.size() != static_cast<std::size_t>(mix.dimension))
        throw std::invalid_argument("gmm_epsilon: latent dimension mismatch");
    if (t < 1 || t > sched.T)
        throw std::invalid_argument("gmm_epsilon: t=" + std::to_string(t) +
                                    " outside [1, " + std::to_string(sched.T) + "]");
    if (!all_finite(x)) throw std::invalid_argument("gmm_epsilon: non-finite latent");

    double ab = sched.alpha_bar(t);
    double mean_scale = std::sqrt(ab);
    double var_shift = 1.0 - ab;

    auto comps = mix.conditioned(c);
    std::vector<double> lps(comps.size());
    double max_lp = -std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < comps.size(); ++k) {
        lps[k] = std::log(comps[k].first) +
                 detail::log_gaussian_diag(x, comps[k].second->mean, comps[k].second->variances,
                                           mean_scale, ab, var_shift);
        max_lp = std::max(max_lp, lps[k]);
    }
    double z = 0.0;
    for (double lp : lps) z += std::exp(lp - max_lp);

    Latent score(x.size(), 0.0);
    for (std::size_t k = 0; k < comps.size(); ++k) {
        double resp = std::exp(lps[k] - max_lp) / z;
        const auto& comp = *comps[k].second;
        for (std::size_t i = 0; i < x.size(); ++i) {
            double m = mean_scale * comp.mean[i];
            double v = ab * comp.variances[i] + var_shift;
            score[i] += resp * (m - x[i]) / v;
        }
    }
    double coeff = std::sqrt(1.0 - ab);
    Latent eps(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) eps[i] = -coeff * score[i];
    return eps;
}

// Central-difference cross-check of gmm_epsilon built only on log_density,
// so the two never share a differentiation path.
inline Latent finite_difference_epsilon(const LabeledMixture& mix, const NoiseSchedule& sched,
                                        const Latent& x, const Condition& c, int t,
                                        double h = 1e-5) {
    if (!(h > 0.0)) throw std::invalid_argument("finite_difference_epsilon: h must be > 0");
    if (t < 1 || t > sched.T)
        throw std::invalid_argument("finite_difference_epsilon: t outside [1, T]");
    double coeff = std::sqrt(1.0 - sched.alpha_bar(t));
    Latent eps(x.size());
    Latent probe = x;
    for (std::size_t i = 0; i < x.size(); ++i) {
        double xi = x[i];
        probe[i] = xi + h;
        double lp_plus = log_density(mix, sched, probe, c, t);
        probe[i] = xi - h;
        double lp_minus = log_density(mix, sched, probe, c, t);
        probe[i] = xi;
        eps[i] = -coeff * (lp_plus - lp_minus) / (2.0 * h);
    }
    return eps;
}

// Draw one sample from the (clean) mixture under a condition.
template <typename Rng, typename Normal>
inline Latent draw_mixture_sample(const LabeledMixture& mix, const Condition& c, Rng& pick,
                                  Normal& noise) {
    auto comps = mix.conditioned(c);
    double u = pick.next_double();
    std::size_t chosen = comps.size() - 1;
    double acc = 0.0;
    for (std::size_t k = 0; k < comps.size(); ++k) {
        acc += comps[k].first;
        if (u < acc) {
            chosen = k;
            break;
        }
    }
    const auto& comp = *comps[chosen].second;
    Latent x(comp.mean.size());
    for (std::size_t i = 0; i < x.size(); ++i)
        x[i] = comp.mean[i] + std::sqrt(comp.variances[i]) * noise.next();
    return x;
}

// Nearest component mean over every class; the crude "which mode did we land
// on" classifier used by the analysis metrics.
struct NearestMode {
    int class_label = 0;
    double dist = 0.0;
};

inline NearestMode nearest_mode(const LabeledMixture& mix, const Latent& x) {
    NearestMode best{0, std::numeric_limits<double>::infinity()};
    for (const auto& cls : mix.classes) {
        for (const auto& comp : cls.components) {
            double d = distance(x, comp.mean);
            if (d < best.dist) best = {cls.label, d};
        }
    }
    return best;
}

// Abstract epsilon predictor so samplers stay agnostic of the mixture.
class Denoiser {
public:
    virtual ~Denoiser() = default;
    virtual Latent epsilon(const Latent& x, const Condition& c, int t) const = 0;
    virtual int dimension() const = 0;
};

class GmmDenoiser final : public Denoiser {
public:
    GmmDenoiser(LabeledMixture mixture, NoiseSchedule schedule)
        : mixture_(std::move(mixture)), schedule_(std::move(schedule)) {
        mixture_.validate();
    }

    Latent epsilon(const Latent& x, const Condition& c, int t) const override {
        return gmm_epsilon(mixture_, schedule_, x, c, t);
    }

    int dimension() const override { return mixture_.dimension; }

    const LabeledMixture& mixture() const { return mixture_; }
    const NoiseSchedule& schedule() const { return schedule_; }

private:
    LabeledMixture mixture_;
    NoiseSchedule schedule_;
};

}  // namespace cartoonlab
