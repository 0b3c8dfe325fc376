#pragma once

#include <cstdint>
#include <cmath>
#include <vector>

namespace cartoonlab {

// splitmix64, the usual Vigna finalizer. Used both as a stream generator and
// as the mixing function for counter-based seed derivation, so sweep cells
// get independent streams regardless of execution order.
class SplitMix64 {
public:
    explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next() {
        std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    // uniform in [0, 1), 53-bit mantissa
    double next_double() {
        return static_cast<double>(next() >> 11) * 0x1.0p-53;
    }

private:
    std::uint64_t state_;
};

// Counter-based stream split: chain i of a master seed. Pure function of
// (master, index), so parallel sweeps cannot perturb each other's draws.
inline std::uint64_t derive_stream_seed(std::uint64_t master, std::uint64_t index) {
    SplitMix64 mix(master ^ (0x9e3779b97f4a7c15ULL * (index + 1)));
    std::uint64_t a = mix.next();
    std::uint64_t b = mix.next();
    return a ^ (b >> 1);
}

// Standard normal draws via Box-Muller on splitmix uniforms. Avoids
// std::normal_distribution, whose output is implementation-defined.
class NormalSampler {
public:
    explicit NormalSampler(std::uint64_t seed) : rng_(seed) {}

    double next() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u1 = rng_.next_double();
        double u2 = rng_.next_double();
        while (u1 <= 0.0) u1 = rng_.next_double();
        double r = std::sqrt(-2.0 * std::log(u1));
        double theta = 2.0 * M_PI * u2;
        spare_ = r * std::sin(theta);
        have_spare_ = true;
        return r * std::cos(theta);
    }

    std::vector<double> vector(std::size_t n) {
        std::vector<double> out(n);
        for (auto& v : out) v = next();
        return out;
    }

private:
    SplitMix64 rng_;
    double spare_ = 0.0;
    bool have_spare_ = false;
};

}  // namespace cartoonlab
