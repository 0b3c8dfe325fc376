#pragma once

#include <map>
#include <stdexcept>
#include <string>

#include "cartoonlab/latent.hpp"

namespace cartoonlab {

// Ordered record of visited latents keyed by grid timestep (descending
// insertion order). The lookup source for rolled-back latents x_{t+b}.
class Trajectory {
public:
    void record(int t, Latent x) {
        auto [it, inserted] = entries_.emplace(t, std::move(x));
        if (!inserted)
            throw std::logic_error("trajectory: timestep " + std::to_string(t) +
                                   " recorded twice");
    }

    const Latent& at(int t) const {
        auto it = entries_.find(t);
        if (it == entries_.end())
            throw std::logic_error("trajectory: no latent recorded at timestep " +
                                   std::to_string(t) + " (grid bookkeeping bug)");
        return it->second;
    }

    bool has(int t) const { return entries_.count(t) != 0; }

    std::size_t size() const { return entries_.size(); }

    const std::map<int, Latent, std::greater<int>>& entries() const { return entries_; }

private:
    std::map<int, Latent, std::greater<int>> entries_;
};

}  // namespace cartoonlab
