#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace cartoonlab {

// A latent state: the single vector carrier for noisy samples, clean
// references, and noise predictions alike.
using Latent = std::vector<double>;

inline bool all_finite(const Latent& v) {
    for (double x : v)
        if (!std::isfinite(x)) return false;
    return true;
}

inline void check_same_dim(const Latent& a, const Latent& b, const char* where) {
    if (a.size() != b.size())
        throw std::invalid_argument(std::string(where) + ": dimension mismatch (" +
                                    std::to_string(a.size()) + " vs " +
                                    std::to_string(b.size()) + ")");
}

inline double dot(const Latent& a, const Latent& b) {
    check_same_dim(a, b, "dot");
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

inline double norm(const Latent& a) { return std::sqrt(dot(a, a)); }

inline double distance(const Latent& a, const Latent& b) {
    check_same_dim(a, b, "distance");
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        double d = a[i] - b[i];
        s += d * d;
    }
    return std::sqrt(s);
}

// cos(a, b); 0 if either vector is null.
inline double cosine(const Latent& a, const Latent& b) {
    double na = norm(a), nb = norm(b);
    if (na == 0.0 || nb == 0.0) return 0.0;
    return dot(a, b) / (na * nb);
}

inline Latent axpy(double alpha, const Latent& x, const Latent& y) {
    check_same_dim(x, y, "axpy");
    Latent out(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = alpha * x[i] + y[i];
    return out;
}

inline Latent scaled(double alpha, const Latent& x) {
    Latent out(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = alpha * x[i];
    return out;
}

}  // namespace cartoonlab
