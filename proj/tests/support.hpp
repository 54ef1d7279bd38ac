// Shared helpers for the test suites.
#pragma once

#include <cmath>

#include "fpns/grid.hpp"
#include "fpns/rng.hpp"

namespace fpns::testing {

/// Unit-mass density with cellwise values uniform in [lo, 1] before normalization.
inline ScalarField random_density(const TorusGrid& g, std::uint64_t seed, double lo = 0.2) {
    Rng rng(seed);
    ScalarField rho(g);
    for (auto& x : rho.values) x = rng.uniform(lo, 1.0);
    const double m = rho.integral();
    for (auto& x : rho.values) x /= m;
    return rho;
}

inline VectorField random_velocity(const TorusGrid& g, std::uint64_t seed, double amp = 1.0) {
    Rng rng(seed);
    VectorField v(g);
    for (std::size_t c = 0; c < v.size(); ++c) v.set(c, {rng.uniform(-amp, amp), rng.uniform(-amp, amp)});
    return v;
}

inline ScalarField random_scalar(const TorusGrid& g, std::uint64_t seed) {
    Rng rng(seed);
    ScalarField a(g);
    for (auto& x : a.values) x = rng.uniform(-1.0, 1.0);
    return a;
}

inline double max_abs_diff(const ScalarField& a, const ScalarField& b) {
    double m = 0.0;
    for (std::size_t c = 0; c < a.size(); ++c) m = std::max(m, std::abs(a[c] - b[c]));
    return m;
}

}  // namespace fpns::testing
