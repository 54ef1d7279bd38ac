#pragma once

#include <algorithm>
#include <cmath>

#include "fpns/fft.hpp"
#include "fpns/fields.hpp"

namespace fpns {

/// Fourier coefficients of both velocity components on the half spectrum.
struct SpectralState {
    TorusGrid grid;
    ComplexVector c1;
    ComplexVector c2;

    static SpectralState from(const VectorField& u) { return {u.grid(), fft2(u.c1), fft2(u.c2)}; }
    VectorField to_physical() const { return {ifft2(c1, grid), ifft2(c2, grid)}; }
};

/// Retained modes: |p|, |q| <= cutoff (integer modes).  cutoff < 0 keeps all but Nyquist.
inline bool retained(int p, int q, int n, int cutoff) {
    const int lim = cutoff < 0 ? n / 2 - 1 : cutoff;
    return std::abs(signed_mode(p, n)) <= lim && std::abs(signed_mode(q, n)) <= lim;
}

/// Two-thirds rule cutoff.
inline int dealias_cutoff(int n) { return n / 3; }

/// (I - k k^T / |k|^2) on every retained mode, zero outside, k = 0 untouched.
inline void leray_project(SpectralState& s, int cutoff = -1) {
    const int n = s.grid.points;
    for_each_mode(s.grid, [&](std::size_t idx, double k1, double k2, int p, int q) {
        if (p == 0 && q == 0) return;
        if (!retained(p, q, n, cutoff)) {
            s.c1[idx] = 0.0;
            s.c2[idx] = 0.0;
            return;
        }
        const double kk = k1 * k1 + k2 * k2;
        const Complex dot = k1 * s.c1[idx] + k2 * s.c2[idx];
        s.c1[idx] -= k1 * dot / kk;
        s.c2[idx] -= k2 * dot / kk;
    });
}

inline VectorField leray_project(const VectorField& u, int cutoff = -1) {
    SpectralState s = SpectralState::from(u);
    leray_project(s, cutoff);
    return s.to_physical();
}

/// Spectral divergence.
inline ScalarField divergence(const VectorField& u) {
    ScalarField d = spectral_derivative(u.c1, 0);
    const ScalarField d2 = spectral_derivative(u.c2, 1);
    for (std::size_t c = 0; c < d.size(); ++c) d[c] += d2[c];
    return d;
}

/// max |div u| / (max |grad u| scale), with scale 2 pi / L * max|u| (0 for u = 0).
inline double relative_divergence(const VectorField& u) {
    double umax = 0.0, dmax = 0.0;
    for (std::size_t c = 0; c < u.size(); ++c) umax = std::max(umax, u.at(c).norm());
    const ScalarField d = divergence(u);
    for (double x : d.values) dmax = std::max(dmax, std::abs(x));
    if (umax == 0.0) return dmax;
    return dmax / (umax * 2.0 * M_PI / u.grid().length);
}

/// ||grad u||^2 = sum_ij |d_i u_j|^2 hx^2.
inline double enstrophy(const VectorField& u) {
    double sum = 0.0;
    for (const ScalarField* comp : {&u.c1, &u.c2})
        for (int axis = 0; axis < 2; ++axis) {
            const ScalarField d = spectral_derivative(*comp, axis);
            for (double x : d.values) sum += x * x;
        }
    return sum * u.grid().cell_area();
}

/// F = gamma * mollify(m - rho u_eps, eps), (rho, m) the moments of f.
inline VectorField brinkman_force(const MacroFields& macro, const VectorField& u, double eps, double gamma) {
    const VectorField ue = mollify(u, eps);
    VectorField drag(u.grid());
    for (std::size_t c = 0; c < u.size(); ++c) drag.set(c, macro.momentum.at(c) - ue.at(c) * macro.rho[c]);
    VectorField F = mollify(drag, eps);
    for (std::size_t c = 0; c < u.size(); ++c) F.set(c, F.at(c) * gamma);
    return F;
}

inline VectorField brinkman_force(const DistributionField& f, const VectorField& u, double eps, double gamma) {
    return brinkman_force(moments(f), u, eps, gamma);
}

namespace detail {

/// P_mask( -(u.grad)u + F ) in spectral form, u given by its spectrum.
inline SpectralState ns_rhs(const SpectralState& uh, const VectorField& F) {
    const VectorField u = uh.to_physical();
    const auto& g = uh.grid;
    const ScalarField d11 = spectral_derivative(u.c1, 0), d21 = spectral_derivative(u.c1, 1);
    const ScalarField d12 = spectral_derivative(u.c2, 0), d22 = spectral_derivative(u.c2, 1);
    VectorField rhs(g);
    for (std::size_t c = 0; c < u.size(); ++c) {
        const double a = u.c1[c], b = u.c2[c];
        rhs.c1[c] = -(a * d11[c] + b * d21[c]) + F.c1[c];
        rhs.c2[c] = -(a * d12[c] + b * d22[c]) + F.c2[c];
    }
    SpectralState out = SpectralState::from(rhs);
    leray_project(out, dealias_cutoff(g.points));
    return out;
}

}  // namespace detail

/// Integrating-factor Heun step for u_t + (u.grad)u + grad p = nu Lap u + F with F frozen.
inline void ns_step(VectorField& u, const VectorField& F, double nu, double dt) {
    const auto& g = u.grid();
    double umax = 0.0;
    for (std::size_t c = 0; c < u.size(); ++c) umax = std::max(umax, u.at(c).norm());
    if (umax * dt / g.spacing() > 1.0 + 1e-12) throw StepSizeError("fluid CFL violated");
    SpectralState uh = SpectralState::from(u);
    ComplexVector decay(uh.c1.size());
    for_each_mode(g, [&](std::size_t idx, double k1, double k2, int, int) {
        decay[idx] = std::exp(-nu * (k1 * k1 + k2 * k2) * dt);
    });
    const SpectralState n0 = detail::ns_rhs(uh, F);
    SpectralState pred = uh;
    for (std::size_t i = 0; i < decay.size(); ++i) {
        pred.c1[i] = decay[i] * (uh.c1[i] + dt * n0.c1[i]);
        pred.c2[i] = decay[i] * (uh.c2[i] + dt * n0.c2[i]);
    }
    const SpectralState n1 = detail::ns_rhs(pred, F);
    for (std::size_t i = 0; i < decay.size(); ++i) {
        uh.c1[i] = decay[i] * uh.c1[i] + 0.5 * dt * (decay[i] * n0.c1[i] + n1.c1[i]);
        uh.c2[i] = decay[i] * uh.c2[i] + 0.5 * dt * (decay[i] * n0.c2[i] + n1.c2[i]);
    }
    u = uh.to_physical();
}

}  // namespace fpns
