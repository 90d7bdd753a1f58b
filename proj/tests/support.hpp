#pragma once

#include "flutterid/frf.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <random>
#include <vector>

namespace flutterid::testing {

inline double rel_err(double got, double want) { return std::abs(got - want) / std::abs(want); }

inline double rel_err(cplx got, cplx want) { return std::abs(got - want) / std::abs(want); }

inline double median(std::vector<double> v)
{
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

/// Index of the mode in `set` whose frequency is closest to `hz`.
inline std::size_t nearest_mode(const ModalParameterSet& set, double hz)
{
    std::size_t best = 0;
    for (std::size_t i = 1; i < set.size(); ++i) {
        if (std::abs(set[i].frequency_hz - hz) < std::abs(set[best].frequency_hz - hz)) best = i;
    }
    return best;
}

/// Smallest relative distance from `p` to any element of `set`.
inline double nearest_rel(const std::vector<cplx>& set, cplx p)
{
    double best = INFINITY;
    for (const cplx q : set) best = std::min(best, std::abs(q - p) / std::abs(p));
    return best;
}

/// Modal model with random real shapes over `channels` outputs.
inline ModalParameterSet random_modes(std::mt19937_64& rng, int count, Eigen::Index channels, double lo_hz,
                                      double hi_hz)
{
    std::uniform_real_distribution<double> freq(lo_hz, hi_hz);
    std::uniform_real_distribution<double> zeta(0.005, 0.08);
    std::uniform_real_distribution<double> amp(-1.0, 1.0);
    std::vector<Mode> modes;
    while (static_cast<int>(modes.size()) < count) {
        const double f = freq(rng);
        bool crowded = false;
        for (const Mode& m : modes) crowded |= std::abs(m.frequency_hz - f) < 0.1 * f;
        if (crowded) continue;
        Eigen::VectorXcd shape(channels);
        for (Eigen::Index c = 0; c < channels; ++c) shape(c) = amp(rng) + (c == 0 ? 1.5 : 0.0);
        modes.push_back(Mode::from_modal(f, zeta(rng), shape));
    }
    return {std::move(modes), SourceMethod::external};
}

} // namespace flutterid::testing
