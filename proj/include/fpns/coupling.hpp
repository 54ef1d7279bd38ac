#pragma once

#include <algorithm>
#include <cmath>
#include <string>

#include "fpns/averaging.hpp"
#include "fpns/config.hpp"
#include "fpns/fluid.hpp"
#include "fpns/kinetic.hpp"
#include "fpns/rng.hpp"

namespace fpns {

struct SimState {
    double t = 0.0;
    long step = 0;
    DistributionField f;
    VectorField u;
};

/// Lie splitting: kinetic step with u frozen, then the fluid step driven by the Brinkman
/// force of the updated f.  With k_picard > 0 the coefficients are re-evaluated at the
/// midpoint of the previous iterate and the step is redone.
inline void fpns_step(SimState& st, const AveragingModel& model, const SimParams& p, double dt, int k_picard = 0) {
    DistributionField f = st.f;
    VectorField u = st.u;
    fp_step(f, st.u, model, p, dt);
    ns_step(u, brinkman_force(f, st.u, p.epsilon, p.gamma), p.nu, dt);
    for (int it = 0; it < k_picard; ++it) {
        DistributionField fm = st.f;
        for (std::size_t a = 0; a < fm.size(); ++a) fm.values[a] = 0.5 * (fm.values[a] + f.values[a]);
        VectorField um(st.u.grid());
        for (std::size_t c = 0; c < um.size(); ++c) um.set(c, (st.u.at(c) + u.at(c)) * 0.5);
        const DriftField drift = assemble_drift(fm, um, model, p);
        f = st.f;
        fp_step(f, drift, p.sigma, dt);
        fm = st.f;
        for (std::size_t a = 0; a < fm.size(); ++a) fm.values[a] = 0.5 * (fm.values[a] + f.values[a]);
        u = st.u;
        ns_step(u, brinkman_force(fm, um, p.epsilon, p.gamma), p.nu, dt);
    }
    st.f = std::move(f);
    st.u = std::move(u);
    st.t += dt;
    ++st.step;
}

/// Step size: the configured dt, capped by cfl_safety * hx / max(|v|, |u|) when adaptive.
inline double choose_dt(const SimState& st, const TimeSpec& ts) {
    const double hx = st.f.xgrid.spacing();
    double speed = st.f.vgrid.max_speed();
    for (std::size_t c = 0; c < st.u.size(); ++c) speed = std::max(speed, st.u.at(c).norm());
    double dt = ts.dt;
    if (ts.adaptive) dt = std::min(dt, ts.cfl_safety * hx / speed);
    return dt;
}

// ------------------------------------------------------------ initial data

/// Sampled Gaussian in one velocity cell block, renormalized so its discrete mass is `mass`.
inline void fill_local_maxwellian(std::span<double> block, const VelocityGrid& vg, Vec2 g, double sigma, double mass) {
    fill_gaussian(block, vg, g, sigma, 1.0);
    double sum = 0.0;
    for (double x : block) sum += x;
    const double scale = mass / (sum * vg.cell_area());
    for (double& x : block) x *= scale;
}

/// Center of the 1D sampled Gaussian whose discrete mean equals `mean`.
inline double moment_matched_center(const VelocityGrid& vg, double sigma, double mean) {
    double g = mean;
    for (int it = 0; it < 50; ++it) {
        double s0 = 0.0, s1 = 0.0, s2 = 0.0;
        for (int k = 0; k < vg.points; ++k) {
            const double v = vg.coord(k);
            const double w = std::exp(-(v - g) * (v - g) / (2.0 * sigma));
            s0 += w;
            s1 += v * w;
            s2 += v * v * w;
        }
        const double m = s1 / s0;
        const double var = s2 / s0 - m * m;  // d m / d g = var / sigma
        const double step = (m - mean) * sigma / var;
        g -= step;
        if (std::abs(step) < 1e-16 * (1.0 + std::abs(g))) break;
    }
    return g;
}

inline void normalize_mass(DistributionField& f) {
    const double m = f.mass();
    for (double& x : f.values) x /= m;
}

/// Velocity field built from periodic sines (divergence free by construction).
inline VectorField shear_field(const TorusGrid& g, Vec2 mean, double amplitude) {
    VectorField u(g);
    const double k = 2.0 * M_PI / g.length;
    for (int i = 0; i < g.points; ++i)
        for (int j = 0; j < g.points; ++j)
            u.set(static_cast<std::size_t>(i) * g.points + j,
                  {mean.x + amplitude * std::sin(k * g.coord(j)), mean.y + amplitude * std::sin(k * g.coord(i))});
    return u;
}

inline VectorField taylor_green(const TorusGrid& g, double amplitude, double nu = 0.0, double t = 0.0) {
    VectorField u(g);
    const double k = 2.0 * M_PI / g.length;
    const double decay = std::exp(-2.0 * nu * k * k * t);
    for (int i = 0; i < g.points; ++i)
        for (int j = 0; j < g.points; ++j) {
            const double x = g.coord(i), y = g.coord(j);
            u.set(static_cast<std::size_t>(i) * g.points + j,
                  {amplitude * decay * std::sin(k * x) * std::cos(k * y), -amplitude * decay * std::cos(k * x) * std::sin(k * y)});
        }
    return u;
}

/// Periodic bump exp(kappa (cos(2 pi (x - x0)/L) + cos(2 pi (y - y0)/L) - 2)).
inline double periodic_bump(double x, double y, Vec2 center, double L, double kappa) {
    const double k = 2.0 * M_PI / L;
    return std::exp(kappa * (std::cos(k * (x - center.x)) + std::cos(k * (y - center.y)) - 2.0));
}

/// Local-Maxwellian state f = rho(x) mu_{g(x)} with rho, g given per x-cell.
template <typename RhoFn, typename VelFn>
DistributionField local_maxwellian_state(const TorusGrid& xg, const VelocityGrid& vg, double sigma, RhoFn&& rho,
                                         VelFn&& vel) {
    DistributionField f(xg, vg);
    for (int i = 0; i < xg.points; ++i)
        for (int j = 0; j < xg.points; ++j) {
            const std::size_t c = static_cast<std::size_t>(i) * xg.points + j;
            fill_local_maxwellian(f.cell(c), vg, vel(xg.coord(i), xg.coord(j)), sigma, rho(xg.coord(i), xg.coord(j)));
        }
    normalize_mass(f);
    return f;
}

/// Initial states.  All f are positive with mass 1; all u are divergence free.
///  equilibrium            f = mu_wbar (moment matched on the grid), u = wbar
///  shifted-maxwellians    f = rho(x) mu_{g(x)}, rho = 1 + 0.3 cos(2pi x1) cos(2pi x2),
///                         g = (0.5 sin(2pi x2), 0.5 cos(2pi x1)); u = shear about u_mean
///  two-bump               f = 0.3 background at rest + 0.4 bump at (L/4, L/2) moving (1, 0.5)
///                         + 0.3 bump at (3L/4, L/2) moving (-0.8, -0.3); u = shear about u_mean
///  random-smooth          random low modes (|k| <= 3) for rho, g and u, drawn from `seed`
///  taylor-green-fluid-only  f = mu at rest, u = Taylor-Green vortex of amplitude u_amplitude
inline SimState initial_data(const InitialSpec& init, const TorusGrid& xg, const VelocityGrid& vg, const SimParams& p) {
    SimState st;
    const double L = xg.length;
    const double kx = 2.0 * M_PI / L;
    const double sigma = p.sigma;
    if (init.preset == "equilibrium") {
        const Vec2 g{moment_matched_center(vg, sigma, init.wbar.x), moment_matched_center(vg, sigma, init.wbar.y)};
        st.f = local_maxwellian_state(xg, vg, sigma, [](double, double) { return 1.0; }, [g](double, double) { return g; });
        st.u = VectorField(xg, init.wbar);
    } else if (init.preset == "shifted-maxwellians") {
        st.f = local_maxwellian_state(
            xg, vg, sigma, [&](double x, double y) { return 1.0 + 0.3 * std::cos(kx * x) * std::cos(kx * y); },
            [&](double x, double y) { return Vec2{0.5 * std::sin(kx * y), 0.5 * std::cos(kx * x)}; });
        st.u = leray_project(shear_field(xg, init.u_mean, init.u_amplitude));
    } else if (init.preset == "two-bump") {
        const Vec2 ca{0.25 * L, 0.5 * L}, cb{0.75 * L, 0.5 * L};
        const Vec2 va{1.0, 0.5}, vb{-0.8, -0.3};
        const double kappa = 4.0;
        double za = 0.0, zb = 0.0;
        for (int i = 0; i < xg.points; ++i)
            for (int j = 0; j < xg.points; ++j) {
                za += periodic_bump(xg.coord(i), xg.coord(j), ca, L, kappa);
                zb += periodic_bump(xg.coord(i), xg.coord(j), cb, L, kappa);
            }
        za *= xg.cell_area();
        zb *= xg.cell_area();
        DistributionField f(xg, vg);
        RealVector tmp(vg.cells());
        for (int i = 0; i < xg.points; ++i)
            for (int j = 0; j < xg.points; ++j) {
                const std::size_t c = static_cast<std::size_t>(i) * xg.points + j;
                auto block = f.cell(c);
                const double x = xg.coord(i), y = xg.coord(j);
                const double parts[3] = {0.3 / xg.area(), 0.4 * periodic_bump(x, y, ca, L, kappa) / za,
                                         0.3 * periodic_bump(x, y, cb, L, kappa) / zb};
                const Vec2 vels[3] = {Vec2{}, va, vb};
                for (int a = 0; a < 3; ++a) {
                    fill_local_maxwellian(tmp, vg, vels[a], sigma, parts[a]);
                    for (std::size_t q = 0; q < tmp.size(); ++q) block[q] += tmp[q];
                }
            }
        normalize_mass(f);
        st.f = std::move(f);
        st.u = leray_project(shear_field(xg, init.u_mean, init.u_amplitude));
    } else if (init.preset == "random-smooth") {
        Rng rng(init.seed);
        struct Mode {
            int k1, k2;
            double a, phase;
        };
        auto draw = [&](double amp) {
            std::vector<Mode> modes;
            double total = 0.0;
            for (int k1 = -3; k1 <= 3; ++k1)
                for (int k2 = 0; k2 <= 3; ++k2) {
                    if ((k1 == 0 && k2 == 0) || (k2 == 0 && k1 < 0) || k1 * k1 + k2 * k2 > 9) continue;
                    Mode m{k1, k2, rng.uniform(-1, 1), rng.uniform(0, 2 * M_PI)};
                    total += std::abs(m.a);
                    modes.push_back(m);
                }
            for (auto& m : modes) m.a *= amp / total;
            return modes;
        };
        auto eval = [&](const std::vector<Mode>& modes, double x, double y) {
            double s = 0.0;
            for (const auto& m : modes) s += m.a * std::cos(kx * (m.k1 * x + m.k2 * y) + m.phase);
            return s;
        };
        const auto mr = draw(0.6), mg1 = draw(0.6), mg2 = draw(0.6), mu1 = draw(1.0), mu2 = draw(1.0);
        st.f = local_maxwellian_state(
            xg, vg, sigma, [&](double x, double y) { return 1.0 + eval(mr, x, y); },
            [&](double x, double y) { return Vec2{eval(mg1, x, y), eval(mg2, x, y)}; });
        VectorField u(xg);
        for (int i = 0; i < xg.points; ++i)
            for (int j = 0; j < xg.points; ++j)
                u.set(static_cast<std::size_t>(i) * xg.points + j,
                      Vec2{init.u_mean.x + init.u_amplitude * eval(mu1, xg.coord(i), xg.coord(j)),
                           init.u_mean.y + init.u_amplitude * eval(mu2, xg.coord(i), xg.coord(j))});
        st.u = leray_project(u);
    } else if (init.preset == "taylor-green-fluid-only") {
        st.f = local_maxwellian_state(xg, vg, sigma, [](double, double) { return 1.0; }, [](double, double) { return Vec2{}; });
        st.u = taylor_green(xg, init.u_amplitude);
    } else {
        throw ConfigError("initial.preset", "unknown preset '" + init.preset + "'");
    }
    return st;
}

}  // namespace fpns
