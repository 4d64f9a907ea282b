#include <cmath>
#include <stdexcept>
#include <vector>

#include "cs2dspec/bpdn.hpp"

namespace cs2d {

// Active-set threshold search (Michelot). Each pass recomputes the threshold
// from the entries still above it; the set only shrinks, so the loop ends in
// at most n passes with the exact soft-threshold level. Index-order sums keep
// the result independent of how ties among moduli are arranged.
ComplexSeries project_l1_ball(std::span<const Complex> v, double radius) {
    if (!(radius >= 0.0)) {
        throw std::invalid_argument("project_l1_ball: radius must be nonnegative");
    }
    if (!all_finite(v)) {
        throw std::invalid_argument("project_l1_ball: non-finite input");
    }

    std::vector<double> moduli(v.size());
    double total = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i) {
        moduli[i] = std::abs(v[i]);
        total += moduli[i];
    }
    if (total <= radius) return {v.begin(), v.end()};

    ComplexSeries out(v.size(), Complex{});
    if (radius == 0.0) return out;

    std::vector<std::size_t> active;
    active.reserve(v.size());
    for (std::size_t i = 0; i < v.size(); ++i)
        if (moduli[i] > 0.0) active.push_back(i);

    double threshold = 0.0;
    for (;;) {
        double sum = 0.0;
        for (std::size_t i : active) sum += moduli[i];
        threshold = (sum - radius) / static_cast<double>(active.size());

        std::size_t kept = 0;
        for (std::size_t i : active)
            if (moduli[i] > threshold) active[kept++] = i;
        if (kept == active.size()) break;
        active.resize(kept);
    }

    for (std::size_t i : active) {
        const double shrunk = moduli[i] - threshold;
        out[i] = v[i] * (shrunk / moduli[i]);
    }
    return out;
}

}  // namespace cs2d
