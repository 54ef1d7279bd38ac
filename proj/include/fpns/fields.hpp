#pragma once

#include <cmath>

#include "fpns/fft.hpp"
#include "fpns/grid.hpp"
#include "fpns/parallel.hpp"

namespace fpns {

/// Density and momentum by midpoint quadrature in v.
inline MacroFields moments(const DistributionField& f) {
    const auto& vg = f.vgrid;
    const int nv = vg.points;
    const double w = vg.cell_area();
    MacroFields out{ScalarField(f.xgrid), VectorField(f.xgrid)};
    parallel_for(f.xgrid.cells(), [&](std::size_t c) {
        auto block = f.cell(c);
        double r = 0.0, m1 = 0.0, m2 = 0.0;
        for (int k = 0; k < nv; ++k) {
            const double v1 = vg.coord(k);
            double row = 0.0, row2 = 0.0;
            for (int l = 0; l < nv; ++l) {
                const double x = block[static_cast<std::size_t>(k) * nv + l];
                row += x;
                row2 += vg.coord(l) * x;
            }
            r += row;
            m1 += v1 * row;
            m2 += row2;
        }
        out.rho[c] = r * w;
        out.momentum.c1[c] = m1 * w;
        out.momentum.c2[c] = m2 * w;
    });
    return out;
}

/// Gaussian multiplier exp(-eps^2 |k|^2 / 2): mean preserving and divergence-free preserving.
inline double mollifier_symbol(double eps, double k1, double k2) {
    return std::exp(-0.5 * eps * eps * (k1 * k1 + k2 * k2));
}

inline void check_mollifier_scale(double eps, const TorusGrid& g) {
    if (!(eps > 0.0) || eps > 0.25 * g.length)
        throw ParameterError("mollification scale must lie in (0, L/4]");
}

inline ScalarField mollify(const ScalarField& a, double eps) {
    check_mollifier_scale(eps, a.grid);
    return apply_multiplier(a, [eps](double k1, double k2) { return mollifier_symbol(eps, k1, k2); });
}

inline VectorField mollify(const VectorField& a, double eps) {
    return VectorField{mollify(a.c1, eps), mollify(a.c2, eps)};
}

/// sqrt(sum |g|^2 weight hx^2).
inline double weighted_norm_L2(const VectorField& g, const ScalarField& weight) {
    double sum = 0.0;
    for (std::size_t c = 0; c < g.size(); ++c) sum += g.at(c).norm2() * weight[c];
    return std::sqrt(sum * g.grid().cell_area());
}

inline double kinetic_energy(const DistributionField& f) {
    const auto& vg = f.vgrid;
    const int nv = vg.points;
    RealVector v2(vg.cells());
    for (int k = 0; k < nv; ++k)
        for (int l = 0; l < nv; ++l) v2[static_cast<std::size_t>(k) * nv + l] = vg.coord(k) * vg.coord(k) + vg.coord(l) * vg.coord(l);
    double sum = 0.0;
    for (std::size_t c = 0; c < f.xgrid.cells(); ++c) {
        auto block = f.cell(c);
        for (std::size_t a = 0; a < block.size(); ++a) sum += v2[a] * block[a];
    }
    return 0.5 * sum * f.phase_cell_volume();
}

inline double fluid_energy(const VectorField& u) {
    double sum = 0.0;
    for (std::size_t c = 0; c < u.size(); ++c) sum += u.at(c).norm2();
    return 0.5 * sum * u.grid().cell_area();
}

/// Normalized Maxwellian exp(-|v-g|^2/2 sigma) / (|Omega| 2 pi sigma) at a velocity point.
inline double maxwellian_value(double v1, double v2, Vec2 g, double sigma, double area) {
    const double d1 = v1 - g.x, d2 = v2 - g.y;
    return std::exp(-(d1 * d1 + d2 * d2) / (2.0 * sigma)) / (area * 2.0 * M_PI * sigma);
}

/// Write `scale * mu_g` (mu without the 1/|Omega| factor times `scale`) into one velocity block.
inline void fill_gaussian(std::span<double> block, const VelocityGrid& vg, Vec2 g, double sigma, double scale) {
    const int nv = vg.points;
    for (int k = 0; k < nv; ++k) {
        const double e1 = std::exp(-(vg.coord(k) - g.x) * (vg.coord(k) - g.x) / (2.0 * sigma));
        for (int l = 0; l < nv; ++l) {
            const double d2 = vg.coord(l) - g.y;
            block[static_cast<std::size_t>(k) * nv + l] = scale * e1 * std::exp(-d2 * d2 / (2.0 * sigma)) / (2.0 * M_PI * sigma);
        }
    }
}

/// Sampled global Maxwellian mu_g (uniform in x).
inline DistributionField maxwellian(const TorusGrid& xg, const VelocityGrid& vg, double sigma, Vec2 g = {}) {
    DistributionField f(xg, vg);
    RealVector block(vg.cells());
    fill_gaussian(block, vg, g, sigma, 1.0 / xg.area());
    for (std::size_t c = 0; c < xg.cells(); ++c) std::copy(block.begin(), block.end(), f.cell(c).begin());
    return f;
}

/// L1 distance sum |f - g| dx dv.
inline double l1_distance(const DistributionField& f, const DistributionField& g) {
    double sum = 0.0;
    for (std::size_t a = 0; a < f.size(); ++a) sum += std::abs(f.values[a] - g.values[a]);
    return sum * f.phase_cell_volume();
}

/// Total particle momentum v-bar = sum v f dx dv.
inline Vec2 total_momentum(const MacroFields& m) {
    return {m.momentum.c1.integral(), m.momentum.c2.integral()};
}

}  // namespace fpns
