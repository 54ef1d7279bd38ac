#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "fpns/averaging.hpp"
#include "fpns/config.hpp"
#include "fpns/fft.hpp"
#include "fpns/fields.hpp"
#include "fpns/parallel.hpp"

namespace fpns {

/// b = -beta u_eps - alpha s_rho [v]_rho and s = beta + alpha s_rho, plus the
/// quantities they were built from (reused by diagnostics).
struct DriftField {
    ScalarField s;
    VectorField b;
    MacroFields macro;
    VectorField u_eps;
    Averages averages;

    /// Thermalization center c = -b / s.
    Vec2 center(std::size_t c) const { return b.at(c) * (-1.0 / s[c]); }
};

inline DriftField assemble_drift(const DistributionField& f, const VectorField& u, const AveragingModel& model,
                                 const SimParams& p) {
    DriftField d;
    d.macro = moments(f);
    d.u_eps = mollify(u, p.epsilon);
    d.averages = model.evaluate(d.macro.rho, d.macro.momentum);
    d.s = ScalarField(f.xgrid);
    d.b = VectorField(f.xgrid);
    for (std::size_t c = 0; c < f.xgrid.cells(); ++c) {
        d.s[c] = p.beta + p.alpha * d.averages.strength[c];
        d.b.set(c, d.u_eps.at(c) * (-p.beta) - d.averages.weighted.at(c) * p.alpha);
    }
    return d;
}

// ---------------------------------------------------------------- transport

namespace detail {

/// Conservative linear-interpolation shift of a periodic n x n slice by (a, b) grid cells.
inline void shift_linear(const double* in, double* out, int n, double a, double b) {
    std::vector<double> tmp(static_cast<std::size_t>(n) * n);
    auto split = [](double d, int& whole, double& frac) {
        const double fl = std::floor(d);
        whole = static_cast<int>(fl);
        frac = d - fl;
    };
    int ia, ib;
    double fa, fb;
    split(a, ia, fa);
    split(b, ib, fb);
    auto wrapi = [n](int i) { return ((i % n) + n) % n; };
    for (int i = 0; i < n; ++i) {
        const int s0 = wrapi(i - ia), s1 = wrapi(i - ia - 1);
        for (int j = 0; j < n; ++j) tmp[i * n + j] = (1.0 - fa) * in[s0 * n + j] + fa * in[s1 * n + j];
    }
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            const int s0 = wrapi(j - ib), s1 = wrapi(j - ib - 1);
            out[i * n + j] = (1.0 - fb) * tmp[i * n + s0] + fb * tmp[i * n + s1];
        }
}

}  // namespace detail

/// Free streaming f(x, v) <- f(x - v dt, v): exact spectral shift per velocity slice,
/// with a positive linear-interpolation shift for any slice the spectral shift would
/// make negative.  Returns the number of slices that used the fallback.
inline std::size_t transport_step(DistributionField& f, double dt) {
    const auto& xg = f.xgrid;
    const auto& vg = f.vgrid;
    const int n = xg.points;
    const int nv = vg.points;
    const double courant = vg.max_speed() * std::abs(dt) / xg.spacing();
    if (courant > 1.0 + 1e-12)
        throw StepSizeError("transport CFL violated: max|v| dt / hx = " + std::to_string(courant));
    const auto& plan = SpectralPlan::get(n);
    const std::size_t block = vg.cells();
    const int half = plan.half();
    std::vector<std::size_t> fallback(block, 0);
    parallel_for(block, [&](std::size_t slice) {
        const int k = static_cast<int>(slice) / nv;
        const int l = static_cast<int>(slice) % nv;
        const double a = vg.coord(k) * dt, b = vg.coord(l) * dt;
        RealVector in(plan.real_size()), out(plan.real_size());
        ComplexVector spec(plan.complex_size());
        for (std::size_t c = 0; c < plan.real_size(); ++c) in[c] = f.values[c * block + slice];
        plan.forward(in.data(), spec.data());
        std::vector<Complex> e1(n), e2(half);
        for (int p = 0; p < n; ++p)
            e1[p] = p == n / 2 ? Complex(std::cos(xg.wavenumber(p) * a)) : std::polar(1.0, -xg.wavenumber(p) * a);
        for (int q = 0; q < half; ++q)
            e2[q] = q == n / 2 ? Complex(std::cos(xg.wavenumber(q) * b)) : std::polar(1.0, -xg.wavenumber(q) * b);
        for (int p = 0; p < n; ++p)
            for (int q = 0; q < half; ++q) spec[static_cast<std::size_t>(p) * half + q] *= e1[p] * e2[q];
        plan.inverse(spec.data(), out.data());
        bool negative = false;
        for (double x : out) negative = negative || x < 0.0;
        if (negative) {
            detail::shift_linear(in.data(), out.data(), n, a / xg.spacing(), b / xg.spacing());
            fallback[slice] = 1;
        }
        for (std::size_t c = 0; c < plan.real_size(); ++c) f.values[c * block + slice] = out[c];
    });
    std::size_t count = 0;
    for (auto x : fallback) count += x;
    return count;
}

// ------------------------------------------------------------ velocity step

namespace detail {

/// Logarithmic mean (b - a) / (log b - log a); 0 when either argument vanishes.
inline double log_mean(double a, double b) {
    if (!(a > 0.0) || !(b > 0.0)) return 0.0;
    const double r = b / a - 1.0;
    if (std::abs(r) < 1e-3) return a * (1.0 + r * (0.5 + r * (-1.0 / 12.0 + r / 24.0)));
    return (b - a) / std::log1p(r);
}

/// Log-mean mobility theta and log-gradient a = sigma dlog f / h + v_face on the interior faces
/// of one velocity direction (axis 0: v1, 1: v2) in one x-cell, with the weighted sums
/// P = sum theta h hv, abar = sum theta a h hv / P, Q = sum theta |a - abar|^2 h hv.
struct FaceData {
    std::vector<std::size_t> lo, hi;
    std::vector<double> theta, a;
    double P = 0.0, abar = 0.0, Q = 0.0;
};

/// Visit every interior face along `axis` as fn(lo_index, hi_index, v_face).
template <typename Fn>
void for_each_face(const VelocityGrid& vg, int axis, Fn&& fn) {
    const int nv = vg.points;
    const double h = vg.spacing();
    for (int j = 0; j + 1 < nv; ++j) {
        const double vf = vg.coord(j) + 0.5 * h;
        for (int t = 0; t < nv; ++t) {
            const std::size_t lo = axis == 0 ? static_cast<std::size_t>(j) * nv + t : static_cast<std::size_t>(t) * nv + j;
            const std::size_t hi = axis == 0 ? lo + nv : lo + 1;
            fn(lo, hi, vf);
        }
    }
}

/// `logs` holds log F (unused where F = 0).
inline void face_data(const double* F, const double* logs, const VelocityGrid& vg, int axis, double sigma, FaceData& out) {
    const double h = vg.spacing();
    const std::size_t nf = static_cast<std::size_t>(vg.points - 1) * vg.points;
    out.lo.resize(nf);
    out.hi.resize(nf);
    out.theta.resize(nf);
    out.a.resize(nf);
    std::size_t i = 0;
    double P = 0.0, A = 0.0;
    for_each_face(vg, axis, [&](std::size_t lo, std::size_t hi, double vf) {
        out.lo[i] = lo;
        out.hi[i] = hi;
        double th = 0.0, av = vf;
        if (F[lo] > 0.0 && F[hi] > 0.0) {
            const double d = logs[hi] - logs[lo];
            th = std::abs(d) < 1e-3 ? log_mean(F[lo], F[hi]) : (F[hi] - F[lo]) / d;
            av += sigma * d / h;
        }
        out.theta[i] = th;
        out.a[i] = av;
        P += th;
        A += th * av;
        ++i;
    });
    out.P = P * h * h;
    out.abar = P > 0.0 ? A / P : 0.0;
    double Q = 0.0;
    for (std::size_t k = 0; k < nf; ++k) {
        const double d = out.a[k] - out.abar;
        Q += out.theta[k] * d * d;
    }
    out.Q = Q * h * h;
}

inline void fill_logs(const double* F, std::size_t m, std::vector<double>& logs) {
    logs.resize(m);
    for (std::size_t k = 0; k < m; ++k) logs[k] = F[k] > 0.0 ? std::log(F[k]) : 0.0;
}

/// Fitted corrections are used when P >= kFittedMobility * M0.
inline constexpr double kFittedMobility = 0.25;

/// Right side of d_t F = s div_v(sigma grad F + (v - c_t) F) in a log-mean flux form
/// J = s theta (lambda (a - abar) + abar - c), no flux through the box boundary.  Per direction,
/// c makes the momentum rate equal -s (M1 - c_t M0), and lambda = 1 + O(h^2) makes the entropy
/// rate equal -s Q - s rho vmacro (vmacro - c_t), with Q the intrinsic Fisher information.
inline void velocity_rhs(const double* F, double* out, const VelocityGrid& vg, double s, double sigma, Vec2 target,
                         std::vector<double>& logs, FaceData& fd) {
    const int nv = vg.points;
    const double h = vg.spacing();
    const std::size_t m = vg.cells();
    double m0 = 0.0, m1 = 0.0, m2 = 0.0;
    for (int k = 0; k < nv; ++k)
        for (int l = 0; l < nv; ++l) {
            const double x = F[static_cast<std::size_t>(k) * nv + l];
            m0 += x;
            m1 += vg.coord(k) * x;
            m2 += vg.coord(l) * x;
        }
    const double w = vg.cell_area();
    m0 *= w;
    m1 *= w;
    m2 *= w;
    fill_logs(F, m, logs);
    std::fill(out, out + m, 0.0);
    for (int axis = 0; axis < 2; ++axis) {
        face_data(F, logs.data(), vg, axis, sigma, fd);
        if (!(fd.P > 0.0)) continue;
        const double ct = axis == 0 ? target.x : target.y;
        const double mom = axis == 0 ? m1 : m2;
        const double gap = mom - ct * m0;  // rho (vmacro - c_t)
        // Fitted corrections need the mobility to carry most of the mass; on sparse data
        // (many empty neighbours) fall back to the plain flux s theta (a - c_t).
        const bool fitted = fd.P >= kFittedMobility * m0;
        const double c = fitted ? fd.abar - gap / fd.P : ct;
        double lambda = 1.0;
        if (fitted && fd.Q > 0.0 && m0 > 0.0) lambda = std::clamp(1.0 + gap * (mom / m0 - fd.abar) / fd.Q, 0.5, 2.0);
        for (std::size_t i = 0; i < fd.theta.size(); ++i) {
            const double J = s * fd.theta[i] * (lambda * (fd.a[i] - fd.abar) + fd.abar - c) / h;
            out[fd.lo[i]] += J;
            out[fd.hi[i]] -= J;
        }
    }
}

}  // namespace detail

/// Velocity sub-step: per x-cell, d_t f = s div_v(sigma grad_v f + (v - c) f), c = -b/s,
/// integrated with Heun (SSP-RK2) substeps.  The substep count doubles until every stage
/// stays nonnegative, so positivity holds for any dt.  The sampled Maxwellian centered at
/// c is an exact stationary state, and the discrete momentum rate equals the continuous one.
inline void velocity_step(DistributionField& f, const DriftField& drift, double sigma, double dt) {
    const auto& vg = f.vgrid;
    const std::size_t m = vg.cells();
    parallel_for(f.xgrid.cells(), [&](std::size_t c) {
        double* block = f.values.data() + c * m;
        const double s = drift.s[c];
        const Vec2 target = drift.center(c);
        std::vector<double> x0(block, block + m), x(m), k1(m), y(m), logs;
        detail::FaceData fd;
        for (int n = 1; n <= (1 << 20); n *= 2) {
            const double tau = dt / n;
            std::copy(x0.begin(), x0.end(), x.begin());
            bool ok = true;
            for (int step = 0; step < n && ok; ++step) {
                detail::velocity_rhs(x.data(), k1.data(), vg, s, sigma, target, logs, fd);
                for (std::size_t a = 0; a < m; ++a) {
                    y[a] = x[a] + tau * k1[a];
                    ok = ok && y[a] >= 0.0;
                }
                if (!ok) break;
                detail::velocity_rhs(y.data(), k1.data(), vg, s, sigma, target, logs, fd);
                for (std::size_t a = 0; a < m; ++a) {
                    x[a] = 0.5 * (x[a] + y[a] + tau * k1[a]);
                    ok = ok && x[a] >= 0.0;
                }
            }
            if (ok) break;
        }
        for (double v : x)
            if (v < 0.0) throw StepSizeError("velocity step: positivity not reached within 2^20 substeps");
        std::copy(x.begin(), x.end(), block);
    });
}

/// Strang splitting T(dt/2) V(dt) T(dt/2) with the drift assembled once from the
/// incoming state.
inline void fp_step(DistributionField& f, const VectorField& u, const AveragingModel& model, const SimParams& p,
                    double dt) {
    const DriftField drift = assemble_drift(f, u, model, p);
    transport_step(f, 0.5 * dt);
    velocity_step(f, drift, p.sigma, dt);
    transport_step(f, 0.5 * dt);
}

/// Same step with a prescribed drift (used by the Picard iteration).
inline void fp_step(DistributionField& f, const DriftField& drift, double sigma, double dt) {
    transport_step(f, 0.5 * dt);
    velocity_step(f, drift, sigma, dt);
    transport_step(f, 0.5 * dt);
}

}  // namespace fpns
