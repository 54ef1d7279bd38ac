#pragma once

#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "fpns/averaging.hpp"
#include "fpns/config.hpp"
#include "fpns/coupling.hpp"
#include "fpns/fluid.hpp"
#include "fpns/kinetic.hpp"

namespace fpns {

/// Values at or below this are treated as vacuum in log / division diagnostics.
inline constexpr double kDensityFloor = 1e-30;

// ------------------------------------------------------------------ entropy

/// sigma * sum f log(f / mu_g) dx dv over cells with f > floor.
inline double relative_entropy(const DistributionField& f, double sigma, Vec2 g = {}) {
    const auto& vg = f.vgrid;
    const int nv = vg.points;
    const double logZ = std::log(f.xgrid.area() * 2.0 * M_PI * sigma);
    std::vector<double> q(vg.cells());
    for (int k = 0; k < nv; ++k)
        for (int l = 0; l < nv; ++l) {
            const double a = vg.coord(k) - g.x, b = vg.coord(l) - g.y;
            q[static_cast<std::size_t>(k) * nv + l] = (a * a + b * b) / (2.0 * sigma) + logZ;  // -log mu_g
        }
    double sum = 0.0;
    for (std::size_t c = 0; c < f.xgrid.cells(); ++c) {
        auto block = f.cell(c);
        for (std::size_t a = 0; a < block.size(); ++a) {
            const double x = block[a];
            if (x > kDensityFloor) sum += x * (std::log(x) + q[a]);
        }
    }
    return sigma * sum * f.phase_cell_volume();
}

/// Weights of the fluid terms in the centered entropy; zero fluid weight when gamma = 0.
inline double fluid_weight(const SimParams& p) { return p.gamma > 0.0 ? p.beta / (2.0 * p.gamma) : 0.0; }
inline double momentum_gap_weight(const SimParams& p, double area) {
    return p.beta * area / (2.0 * (p.gamma + p.beta * area));
}

inline Vec2 fluid_mean(const VectorField& u) { return u.mean(); }

/// sigma int f log(f/mu_vbar) + beta/(2 gamma) int |u - ubar|^2 + beta|Omega|/(2(gamma+beta|Omega|)) |ubar - vbar|^2
inline double centered_entropy(const DistributionField& f, const VectorField& u, const SimParams& p) {
    const Vec2 vbar = total_momentum(moments(f));
    const Vec2 ubar = fluid_mean(u);
    double var = 0.0;
    for (std::size_t c = 0; c < u.size(); ++c) var += (u.at(c) - ubar).norm2();
    var *= u.grid().cell_area();
    return relative_entropy(f, p.sigma, vbar) + fluid_weight(p) * var +
           momentum_gap_weight(p, u.grid().area()) * (ubar - vbar).norm2();
}

/// E = H + beta/(2 gamma) ||u||^2.
inline double total_energy(const DistributionField& f, const VectorField& u, const SimParams& p) {
    return relative_entropy(f, p.sigma) + fluid_weight(p) * 2.0 * fluid_energy(u);
}

inline Vec2 conserved_x1(Vec2 vbar, Vec2 ubar, const SimParams& p, double area) {
    return vbar * p.gamma + ubar * (p.beta * area);
}

inline double conserved_x2(Vec2 vbar, Vec2 ubar, const SimParams& p, double area) {
    const double fluid = p.gamma > 0.0 ? p.beta * area / (2.0 * p.gamma) * ubar.norm2()
                                       : std::numeric_limits<double>::quiet_NaN();
    return 0.5 * vbar.norm2() + fluid - momentum_gap_weight(p, area) * (ubar - vbar).norm2();
}

/// Common limit velocity (gamma vbar + beta |Omega| ubar) / (gamma + beta |Omega|).
inline Vec2 limit_velocity(Vec2 vbar, Vec2 ubar, const SimParams& p, double area) {
    return conserved_x1(vbar, ubar, p, area) * (1.0 / (p.gamma + p.beta * area));
}

// ------------------------------------------------------------------- Fisher

namespace detail {

/// Second-order derivative of a log-profile along one axis (centered inside,
/// one-sided at the ends); exact for quadratics.
inline double log_derivative(const double* L, int j, int n, std::ptrdiff_t stride, double h) {
    if (j == 0) return (-3.0 * L[0] + 4.0 * L[stride] - L[2 * stride]) / (2.0 * h);
    if (j == n - 1) return (3.0 * L[j * stride] - 4.0 * L[(j - 1) * stride] + L[(j - 2) * stride]) / (2.0 * h);
    return (L[(j + 1) * stride] - L[(j - 1) * stride]) / (2.0 * h);
}

/// grad_v log f on one velocity block; `ok` marks points whose stencil is above the floor.
inline void velocity_log_gradient(std::span<const double> block, int nv, double h, std::vector<double>& g1,
                                  std::vector<double>& g2, std::vector<char>& ok) {
    const std::size_t m = block.size();
    std::vector<double> L(m);
    std::vector<char> pos(m);
    for (std::size_t a = 0; a < m; ++a) {
        pos[a] = block[a] > kDensityFloor;
        L[a] = pos[a] ? std::log(block[a]) : 0.0;
    }
    g1.assign(m, 0.0);
    g2.assign(m, 0.0);
    ok.assign(m, 0);
    auto stencil_ok = [&](int k, int l, int axis) {
        const int j = axis == 0 ? k : l;
        int lo = j - 1, hi = j + 1;
        if (j == 0) lo = 0, hi = 2;
        if (j == nv - 1) lo = nv - 3, hi = nv - 1;
        for (int t = lo; t <= hi; ++t) {
            const std::size_t idx = axis == 0 ? static_cast<std::size_t>(t) * nv + l : static_cast<std::size_t>(k) * nv + t;
            if (!pos[idx]) return false;
        }
        return true;
    };
    for (int k = 0; k < nv; ++k)
        for (int l = 0; l < nv; ++l) {
            const std::size_t a = static_cast<std::size_t>(k) * nv + l;
            if (!pos[a] || !stencil_ok(k, l, 0) || !stencil_ok(k, l, 1)) continue;
            ok[a] = 1;
            g1[a] = log_derivative(L.data() + l, k, nv, nv, h);
            g2[a] = log_derivative(L.data() + static_cast<std::size_t>(k) * nv, l, nv, 1, h);
        }
}

}  // namespace detail

/// Per-cell pieces of the partial Fisher information: the intrinsic part
/// I0 = sum f |a - <a>_f|^2 dv with a = sigma grad_v log f + v, and the moments.
/// The partial information about g is I^g = I0 + rho |v_macro - g|^2, so that
/// I^g - I^{v_macro} = rho |v_macro - g|^2 exactly and I^g = 0 at a Maxwellian centered at g.
struct FisherCells {
    ScalarField intrinsic;
    MacroFields macro;
    VectorField velocity;
};

/// Intrinsic part per x-cell in the log-mean face form used by the velocity step:
/// sum over faces of theta |a - abar|^2 h hv per direction, a = sigma dlog f / h + v_face.
/// It vanishes on sampled Maxwellians and makes the discrete entropy balance exact in v.
inline FisherCells fisher_cells(const DistributionField& f, double sigma) {
    const auto& vg = f.vgrid;
    FisherCells out{ScalarField(f.xgrid), moments(f), VectorField(f.xgrid)};
    out.velocity = out.macro.velocity(out.macro.default_floor());
    parallel_for(f.xgrid.cells(), [&](std::size_t c) {
        const double* F = f.cell(c).data();
        std::vector<double> logs;
        detail::FaceData fd;
        detail::fill_logs(F, vg.cells(), logs);
        double I0 = 0.0;
        for (int axis = 0; axis < 2; ++axis) {
            detail::face_data(F, logs.data(), vg, axis, sigma, fd);
            I0 += fd.Q;
        }
        out.intrinsic[c] = I0;
    });
    return out;
}

/// int weight |sigma grad_v f + (v - g) f|^2 / f with g a field (per cell) and weight a field.
inline double fisher_partial(const FisherCells& fc, const VectorField& g, const ScalarField& weight) {
    double sum = 0.0;
    for (std::size_t c = 0; c < fc.intrinsic.size(); ++c) {
        const double rho = fc.macro.rho[c];
        // rho |v - g|^2 = |m - rho g|^2 / rho
        const Vec2 d = fc.macro.momentum.at(c) - g.at(c) * rho;
        const double q = rho > 0.0 ? d.norm2() / rho : 0.0;
        sum += weight[c] * (fc.intrinsic[c] + q);
    }
    return sum * fc.intrinsic.grid.cell_area();
}

inline double fisher_partial(const DistributionField& f, const VectorField& g, const ScalarField& weight, double sigma) {
    return fisher_partial(fisher_cells(f, sigma), g, weight);
}

inline double fisher_partial(const DistributionField& f, Vec2 g, double sigma) {
    return fisher_partial(fisher_cells(f, sigma), VectorField(f.xgrid, g), ScalarField(f.xgrid, 1.0));
}

struct FullFisher {
    double I_vv = 0.0;
    double I_xv = 0.0;
    double I_xx = 0.0;
    double masked_mass = 0.0;
};

/// Informations of h = f / mu_vbar against d mu:  grad_v log h = grad_v log f + (v - vbar)/sigma,
/// grad_x log h = grad_x f / f (spectral in x).
inline FullFisher fisher_full(const DistributionField& f, Vec2 vbar, double sigma) {
    const auto& xg = f.xgrid;
    const auto& vg = f.vgrid;
    const int nv = vg.points;
    const std::size_t block = vg.cells();
    RealVector dx1(f.size()), dx2(f.size());
    parallel_for(block, [&](std::size_t slice) {
        ScalarField s(xg);
        for (std::size_t c = 0; c < xg.cells(); ++c) s[c] = f.values[c * block + slice];
        const ScalarField a = spectral_derivative(s, 0), b = spectral_derivative(s, 1);
        for (std::size_t c = 0; c < xg.cells(); ++c) {
            dx1[c * block + slice] = a[c];
            dx2[c * block + slice] = b[c];
        }
    });
    std::vector<double> vv(xg.cells()), xv(xg.cells()), xx(xg.cells()), lost(xg.cells());
    parallel_for(xg.cells(), [&](std::size_t c) {
        auto blk = f.cell(c);
        std::vector<double> g1, g2;
        std::vector<char> ok;
        detail::velocity_log_gradient(blk, nv, vg.spacing(), g1, g2, ok);
        double a = 0.0, b = 0.0, d = 0.0, m = 0.0;
        for (int k = 0; k < nv; ++k)
            for (int l = 0; l < nv; ++l) {
                const std::size_t q = static_cast<std::size_t>(k) * nv + l;
                const double x = blk[q];
                if (!ok[q]) {
                    m += x;
                    continue;
                }
                const double w1 = g1[q] + (vg.coord(k) - vbar.x) / sigma;
                const double w2 = g2[q] + (vg.coord(l) - vbar.y) / sigma;
                const double y1 = dx1[c * block + q] / x, y2 = dx2[c * block + q] / x;
                a += x * (w1 * w1 + w2 * w2);
                b += x * (y1 * w1 + y2 * w2);
                d += x * (y1 * y1 + y2 * y2);
            }
        vv[c] = a;
        xv[c] = b;
        xx[c] = d;
        lost[c] = m;
    });
    FullFisher out;
    for (std::size_t c = 0; c < xg.cells(); ++c) {
        out.I_vv += vv[c];
        out.I_xv += xv[c];
        out.I_xx += xx[c];
        out.masked_mass += lost[c];
    }
    const double w = f.phase_cell_volume();
    out.I_vv *= w;
    out.I_xv *= w;
    out.I_xx *= w;
    out.masked_mass *= w;
    return out;
}

// ------------------------------------------------------------ other measures

inline double concentration_measure(const ScalarField& rho, double c1) {
    std::size_t count = 0;
    for (double x : rho.values) count += x >= c1 ? 1 : 0;
    return static_cast<double>(count) * rho.grid.cell_area();
}

/// ||v_macro - w||_{L^2(rho)} computed as sqrt(sum |m - rho w|^2 / rho).
inline double macro_velocity_deviation(const MacroFields& m, Vec2 w) {
    double sum = 0.0;
    for (std::size_t c = 0; c < m.rho.size(); ++c) {
        const double r = m.rho[c];
        if (r > 0.0) sum += (m.momentum.at(c) - w * r).norm2() / r;
    }
    return std::sqrt(sum * m.rho.grid.cell_area());
}

inline double fluid_deviation(const VectorField& u, Vec2 w) {
    double sum = 0.0;
    for (std::size_t c = 0; c < u.size(); ++c) sum += (u.at(c) - w).norm2();
    return std::sqrt(sum * u.grid().cell_area());
}

/// sigma int rho log rho.
inline double density_entropy(const ScalarField& rho, double sigma) {
    double sum = 0.0;
    for (double x : rho.values)
        if (x > kDensityFloor) sum += x * std::log(x);
    return sigma * sum * rho.grid.cell_area();
}

// ----------------------------------------------------------------- records

struct DiagnosticsRecord {
    double t = 0.0;
    double mass = 0.0;
    Vec2 vbar;
    Vec2 ubar;
    Vec2 X1;
    double X2 = 0.0;
    double H = 0.0;
    double E_bar = 0.0;
    double E_total = 0.0;
    double enstrophy = 0.0;
    double I_align = 0.0;  // I_vv^{v_macro, s_rho}
    double I_drag = 0.0;   // I_vv^{u_eps}
    double I_vv = 0.0;
    double I_xv = 0.0;
    double I_xx = 0.0;
    double Y = 0.0;
    double f_dist = 0.0;   // ||f - mu_wbar||_1
    double v_dist = 0.0;   // ||v_macro - wbar||_{L^2(rho)}
    double u_dist = 0.0;   // ||u - wbar||_2
    double alignment = 0.0;  // ||v - vbar||^2_kappa - (v - vbar, [v - vbar])_kappa
    double law_rhs = 0.0;
    double thickness = 0.0;
    double concentration = 0.0;
    double min_f = 0.0;
    double masked_mass = 0.0;
    double rho_log_rho = 0.0;
    double ck_lhs = 0.0;   // (sigma/2) ||f - mu||_1^2
    double energy_lhs = 0.0;  // ||u||^2 + int |v|^2 f
    double residual = std::numeric_limits<double>::quiet_NaN();
};

/// Column order of the CSV output.
inline const std::vector<std::string>& record_columns() {
    static const std::vector<std::string> cols{
        "t",       "mass",     "vbar1",    "vbar2",     "ubar1",     "ubar2",         "X1_1",      "X1_2",
        "X2",      "H",        "E_bar",    "E_total",   "enstrophy", "I_align",       "I_drag",    "I_vv",
        "I_xv",    "I_xx",     "Y",        "f_dist",    "v_dist",    "u_dist",        "alignment", "law_rhs",
        "thickness", "concentration", "min_f", "masked_mass", "rho_log_rho", "ck_lhs", "energy_lhs", "residual"};
    return cols;
}

inline std::vector<double> record_values(const DiagnosticsRecord& r) {
    return {r.t,         r.mass,        r.vbar.x,     r.vbar.y,     r.ubar.x,   r.ubar.y,        r.X1.x,      r.X1.y,
            r.X2,        r.H,           r.E_bar,      r.E_total,    r.enstrophy, r.I_align,      r.I_drag,    r.I_vv,
            r.I_xv,      r.I_xx,        r.Y,          r.f_dist,     r.v_dist,   r.u_dist,        r.alignment, r.law_rhs,
            r.thickness, r.concentration, r.min_f,    r.masked_mass, r.rho_log_rho, r.ck_lhs,    r.energy_lhs, r.residual};
}

/// Evaluate every monitored functional on a state.  `wbar` is the predicted common velocity.
inline DiagnosticsRecord compute_record(const SimState& st, const AveragingModel& model, const SimParams& p,
                                        const DiagnosticsSpec& ds, Vec2 wbar) {
    const auto& f = st.f;
    const auto& u = st.u;
    const double area = f.xgrid.area();
    DiagnosticsRecord r;
    r.t = st.t;
    r.mass = f.mass();
    const DriftField drift = assemble_drift(f, u, model, p);
    const MacroFields& macro = drift.macro;
    r.vbar = total_momentum(macro);
    r.ubar = fluid_mean(u);
    r.X1 = conserved_x1(r.vbar, r.ubar, p, area);
    r.X2 = conserved_x2(r.vbar, r.ubar, p, area);
    r.H = relative_entropy(f, p.sigma);
    r.E_bar = centered_entropy(f, u, p);
    r.E_total = total_energy(f, u, p);
    r.enstrophy = enstrophy(u);

    const FisherCells fc = fisher_cells(f, p.sigma);
    r.I_align = fisher_partial(fc, fc.velocity, drift.averages.strength);
    r.I_drag = fisher_partial(fc, drift.u_eps, ScalarField(f.xgrid, 1.0));

    // alignment term with kappa = rho s_rho; [v - vbar] = [v] - vbar
    double a2 = 0.0, cross = 0.0;
    for (std::size_t c = 0; c < macro.rho.size(); ++c) {
        const double kappa = macro.rho[c] * drift.averages.strength[c];
        const Vec2 dv = fc.velocity.at(c) - r.vbar;
        a2 += kappa * dv.norm2();
        cross += kappa * dv.dot(drift.averages.average.at(c) - r.vbar);
    }
    r.alignment = (a2 - cross) * f.xgrid.cell_area();
    const double fluid_diss = p.gamma > 0.0 ? p.beta * p.nu / p.gamma * r.enstrophy : 0.0;
    r.law_rhs = -p.alpha * r.I_align - p.beta * r.I_drag - p.alpha * r.alignment - fluid_diss;

    const FullFisher ff = fisher_full(f, r.vbar, p.sigma);
    r.I_vv = ff.I_vv;
    r.I_xv = ff.I_xv;
    r.I_xx = ff.I_xx;
    r.masked_mass = ff.masked_mass;
    r.Y = r.I_vv + r.I_xv + r.I_xx + ds.C_hypo * r.E_bar;

    r.f_dist = l1_distance(f, maxwellian(f.xgrid, f.vgrid, p.sigma, wbar));
    r.v_dist = macro_velocity_deviation(macro, wbar);
    r.u_dist = fluid_deviation(u, wbar);
    r.thickness = global_thickness(macro.rho, model.radius());
    r.concentration = concentration_measure(macro.rho, ds.c1);
    r.min_f = f.min_value();
    r.rho_log_rho = density_entropy(macro.rho, p.sigma);
    const double l1 = l1_distance(f, maxwellian(f.xgrid, f.vgrid, p.sigma));
    r.ck_lhs = 0.5 * p.sigma * l1 * l1;
    r.energy_lhs = 2.0 * fluid_energy(u) + 2.0 * kinetic_energy(f);
    return r;
}

/// Constant in sigma int rho log rho <= H + c: c = -sigma log |Omega|.
inline double rho_log_rho_constant(double sigma, double area) { return -sigma * std::log(area); }

/// ||u||^2 + int |v|^2 f <= energy_factor * E + energy_constant.
inline double energy_factor(const SimParams& p) { return std::max(5.0, p.gamma > 0.0 ? 2.0 * p.gamma / p.beta : 0.0); }
inline double energy_constant(double sigma) { return 4.0 * sigma * std::log(2.0); }

/// Fill the `residual` field: central difference of E_bar minus the law's right side at
/// interior records with uniform spacing; returns the max (NaN when unavailable).
inline double entropy_law_residual(std::vector<DiagnosticsRecord>& recs) {
    double worst = std::numeric_limits<double>::quiet_NaN();
    for (auto& r : recs) r.residual = std::numeric_limits<double>::quiet_NaN();
    const auto uniform = [&](std::size_t lo, std::size_t hi) {
        const double h = recs[lo + 1].t - recs[lo].t;
        if (!(h > 0.0)) return false;
        for (std::size_t k = lo + 1; k < hi; ++k)
            if (std::abs(recs[k + 1].t - recs[k].t - h) > 1e-9 * h) return false;
        return true;
    };
    // fourth-order central difference; records without four uniform neighbours stay NaN
    for (std::size_t i = 2; i + 2 < recs.size(); ++i) {
        if (!uniform(i - 2, i + 2)) continue;
        const double h = recs[i + 1].t - recs[i].t;
        const double rate =
            (-recs[i + 2].E_bar + 8.0 * recs[i + 1].E_bar - 8.0 * recs[i - 1].E_bar + recs[i - 2].E_bar) / (12.0 * h);
        recs[i].residual = rate - recs[i].law_rhs;
        if (std::isnan(worst) || recs[i].residual > worst) worst = recs[i].residual;
    }
    return worst;
}

/// Checked variant: throws when fewer than five records are available.
inline double entropy_law_residual_checked(std::vector<DiagnosticsRecord>& recs) {
    if (recs.size() < 5) throw InsufficientDataError("entropy-law residual needs at least 5 records");
    return entropy_law_residual(recs);
}

struct DecayFit {
    double rate = 0.0;
    double r2 = 0.0;
    std::size_t samples = 0;
};

/// Least-squares line through (t, log y) on t in [t0, t1]; rate is the negated slope.
inline DecayFit decay_fit(const std::vector<double>& t, const std::vector<double>& y, double t0, double t1) {
    std::vector<double> xs, ys;
    for (std::size_t i = 0; i < t.size(); ++i) {
        if (t[i] < t0 || t[i] > t1) continue;
        if (!(y[i] > 0.0)) throw ParameterError("decay fit needs positive samples in the window");
        xs.push_back(t[i]);
        ys.push_back(std::log(y[i]));
    }
    if (xs.size() < 2) throw InsufficientDataError("decay fit needs at least two samples in the window");
    const double n = static_cast<double>(xs.size());
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        mx += xs[i];
        my += ys[i];
    }
    mx /= n;
    my /= n;
    double sxx = 0.0, sxy = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        sxx += (xs[i] - mx) * (xs[i] - mx);
        sxy += (xs[i] - mx) * (ys[i] - my);
        syy += (ys[i] - my) * (ys[i] - my);
    }
    if (!(sxx > 0.0)) throw InsufficientDataError("decay fit window has no time spread");
    DecayFit fit;
    const double slope = sxy / sxx;
    fit.rate = -slope;
    double sse = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        const double e = ys[i] - (my + slope * (xs[i] - mx));
        sse += e * e;
    }
    fit.r2 = syy > 0.0 ? 1.0 - sse / syy : 1.0;
    fit.samples = xs.size();
    return fit;
}

}  // namespace fpns
