#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <vector>

#include "fpns/config.hpp"
#include "fpns/fft.hpp"
#include "fpns/fields.hpp"
#include "fpns/rng.hpp"

namespace fpns {

/// Floor applied to rho*phi before dividing (MT, Beta, Phi and the CS average).
inline constexpr double kConvolutionFloor = 1e-12;
/// Dense kernel matrices are only formed up to this many points per dimension.
inline constexpr int kDenseLimit = 48;

/// Periodic minimum-image displacement.
inline double wrap(double d, double L) { return d - L * std::floor(d / L + 0.5); }

/// Smooth bump exp(-1/(1-r^2)) on r < 1.
inline double bump(double r) { return r < 1.0 ? std::exp(-1.0 / (1.0 - r * r)) : 0.0; }

/// A periodic radial kernel sampled on the torus with its convolution symbol.
struct Kernel {
    ScalarField values;   // phi(x_i) with x measured from the origin
    ComplexVector symbol; // fft(values) * hx^2

    Kernel() = default;
    explicit Kernel(ScalarField v) : values(std::move(v)) {
        symbol = fft2(values);
        const double w = values.grid.cell_area();
        for (auto& s : symbol) s *= w;
    }

    const TorusGrid& grid() const { return values.grid; }
    double at_offset(int di, int dj) const {
        const int n = grid().points;
        return values(((di % n) + n) % n, ((dj % n) + n) % n);
    }
    /// (phi * a)(x_i) = sum_j phi(x_i - x_j) a_j hx^2, spectrally.
    ScalarField convolve(const ScalarField& a) const {
        ComplexVector s = fft2(a);
        for (std::size_t c = 0; c < s.size(); ++c) s[c] *= symbol[c];
        return ifft2(std::move(s), a.grid);
    }
    VectorField convolve(const VectorField& a) const { return {convolve(a.c1), convolve(a.c2)}; }
    double integral() const { return values.integral(); }
};

/// Radial profile sampled at periodic distance, normalized to discrete integral `mass` when mass > 0.
template <typename Fn>
ScalarField radial_field(const TorusGrid& g, Fn&& profile, double mass) {
    ScalarField out(g);
    for (int i = 0; i < g.points; ++i)
        for (int j = 0; j < g.points; ++j) {
            const double dx = wrap(g.coord(i), g.length), dy = wrap(g.coord(j), g.length);
            out(i, j) = profile(std::sqrt(dx * dx + dy * dy));
        }
    if (mass > 0.0) {
        const double total = out.integral();
        if (!(total > 0.0)) throw ParameterError("kernel radius too small for the grid");
        for (auto& v : out.values) v *= mass / total;
    }
    return out;
}

/// Direct periodic convolution (nonnegative inputs give exactly nonnegative output).
inline ScalarField direct_convolution(const ScalarField& a, const ScalarField& b) {
    const auto& g = a.grid;
    const int n = g.points;
    ScalarField out(g);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            double sum = 0.0;
            for (int p = 0; p < n; ++p)
                for (int q = 0; q < n; ++q) sum += a(p, q) * b((i - p + n) % n, (j - q + n) % n);
            out(i, j) = sum * g.cell_area();
        }
    return out;
}

inline Kernel make_kernel(const KernelSpec& spec, const TorusGrid& g) {
    if (spec.profile == "global") return Kernel(ScalarField(g, spec.amplitude));
    if (spec.profile == "indicator") {
        const double r0 = spec.radius;
        return Kernel(radial_field(g, [&](double r) { return r < r0 ? spec.amplitude : 0.0; }, 0.0));
    }
    const double a = 0.5 * spec.radius;
    ScalarField psi = radial_field(g, [&](double r) { return bump(r / a); }, 1.0);
    ScalarField phi = direct_convolution(psi, psi);
    for (auto& v : phi.values) v *= spec.amplitude;
    return Kernel(std::move(phi));
}

/// Standard radial mollifier of radius r0, normalized to discrete mass 1.
inline Kernel thickness_mollifier(const TorusGrid& g, double r0) {
    if (!(r0 > 0.0 && r0 < 0.5 * g.length)) throw ParameterError("thickness radius must lie in (0, L/2)");
    return Kernel(radial_field(g, [&](double r) { return bump(r / r0); }, 1.0));
}

/// theta(rho, x) = int rho(x - r0 y) chi(y) dy on every grid point.
inline ScalarField thickness(const ScalarField& rho, double r0) {
    ScalarField t = thickness_mollifier(rho.grid, r0).convolve(rho);
    for (auto& v : t.values) v = std::max(v, 0.0);
    return t;
}

inline double global_thickness(const ScalarField& rho, double r0) {
    const auto t = thickness(rho, r0);
    return *std::min_element(t.values.begin(), t.values.end());
}

/// Strength, weighted average s[v] and average [v] of one velocity field.
struct Averages {
    ScalarField strength;
    VectorField weighted;
    VectorField average;
};

struct ContractivityReport {
    double worst_ratio = 0.0;
    bool passed = false;
};

struct BallPositivityReport {
    double min_eigenvalue = 0.0;
    bool passed = false;
};

class AveragingModel {
public:
    AveragingModel(const ModelSpec& spec, const TorusGrid& g) : spec_(spec), grid_(g) {
        spec.validate(g);
        phi_ = make_kernel(spec.kernel, g);
        if (spec.variant == Variant::Phi) {
            // the symmetric model needs int phi = 1
            ScalarField v = phi_.values;
            const double total = v.integral();
            for (auto& x : v.values) x /= total;
            phi_ = Kernel(std::move(v));
        }
        if (spec.variant == Variant::Seg) {
            const int parts = spec.seg.parts;
            parts_.assign(parts, ScalarField(g));
            for (int i = 0; i < g.points; ++i)
                for (int j = 0; j < g.points; ++j) {
                    double total = 0.0;
                    std::vector<double> w(parts);
                    for (int l = 0; l < parts; ++l) {
                        w[l] = std::exp(spec.seg.sharpness * std::cos(2.0 * M_PI * (g.coord(i) / g.length - double(l) / parts)));
                        total += w[l];
                    }
                    for (int l = 0; l < parts; ++l) parts_[l](i, j) = w[l] / total;
                }
        }
    }

    const ModelSpec& spec() const { return spec_; }
    const TorusGrid& grid() const { return grid_; }
    const Kernel& kernel() const { return phi_; }
    const std::vector<ScalarField>& partition() const { return parts_; }
    /// Communication radius used for thickness.
    double radius() const { return std::min(spec_.kernel.radius, 0.49 * grid_.length); }
    bool conservative() const {
        return spec_.variant == Variant::CS || spec_.variant == Variant::Phi || spec_.variant == Variant::Seg;
    }

    /// Averages of v given density and momentum m = rho v (avoids dividing by rho).
    Averages evaluate(const ScalarField& rho, const VectorField& m) const {
        Averages out{ScalarField(grid_, 1.0), VectorField(grid_), VectorField(grid_)};
        if (spec_.variant == Variant::Seg) {
            for (const auto& gl : parts_) {
                double z = 0.0, q1 = 0.0, q2 = 0.0;
                for (std::size_t c = 0; c < rho.size(); ++c) {
                    z += gl[c] * rho[c];
                    q1 += gl[c] * m.c1[c];
                    q2 += gl[c] * m.c2[c];
                }
                if (!(z > 0.0)) throw DegenerateModelError("segregated community carries no mass");
                for (std::size_t c = 0; c < rho.size(); ++c) {
                    out.average.c1[c] += gl[c] * q1 / z;
                    out.average.c2[c] += gl[c] * q2 / z;
                }
            }
            out.weighted = out.average;
            return out;
        }
        const ScalarField cr = phi_.convolve(rho);
        const VectorField cm = phi_.convolve(m);
        for (std::size_t c = 0; c < rho.size(); ++c) {
            const double d = std::max(cr[c], kConvolutionFloor);
            out.average.set(c, cm.at(c) * (1.0 / d));
        }
        switch (spec_.variant) {
            case Variant::CS:
                out.strength = cr;
                out.weighted = cm;
                break;
            case Variant::MT:
                out.weighted = out.average;
                break;
            case Variant::Beta:
                for (std::size_t c = 0; c < rho.size(); ++c) {
                    out.strength[c] = std::pow(std::max(cr[c], 0.0), spec_.beta_exponent);
                    out.weighted.set(c, out.average.at(c) * out.strength[c]);
                }
                break;
            case Variant::Phi:
                out.average = phi_.convolve(out.average);
                out.weighted = out.average;
                break;
            case Variant::Seg: break;
        }
        return out;
    }

    ScalarField strength(const ScalarField& rho) const { return evaluate(rho, VectorField(grid_)).strength; }

    /// [v]_rho for a velocity field v (multiplied by rho internally).
    VectorField average(const ScalarField& rho, const VectorField& v) const {
        VectorField m(grid_);
        for (std::size_t c = 0; c < rho.size(); ++c) m.set(c, v.at(c) * rho[c]);
        return evaluate(rho, m).average;
    }

    /// Dense reproducing kernel phi_rho(x_i, x_j) on the flattened grid.
    Eigen::MatrixXd kernel_matrix(const ScalarField& rho) const {
        const int n = grid_.points;
        if (n > kDenseLimit) throw ParameterError("dense kernel matrix limited to Nx <= 48");
        const Eigen::Index M = static_cast<Eigen::Index>(grid_.cells());
        if (spec_.variant == Variant::Seg) {
            Eigen::MatrixXd K = Eigen::MatrixXd::Zero(M, M);
            for (const auto& gl : parts_) {
                double z = 0.0;
                for (std::size_t c = 0; c < rho.size(); ++c) z += gl[c] * rho[c];
                z *= grid_.cell_area();
                if (!(z > 0.0)) throw DegenerateModelError("segregated community carries no mass");
                Eigen::Map<const Eigen::VectorXd> g(gl.values.data(), M);
                K.noalias() += g * g.transpose() / z;
            }
            return K;
        }
        Eigen::MatrixXd base(M, M);
        for (int i1 = 0; i1 < n; ++i1)
            for (int i2 = 0; i2 < n; ++i2)
                for (int j1 = 0; j1 < n; ++j1)
                    for (int j2 = 0; j2 < n; ++j2)
                        base(i1 * n + i2, j1 * n + j2) = phi_.at_offset(i1 - j1, i2 - j2);
        if (spec_.variant == Variant::CS) return base;
        const ScalarField cr = phi_.convolve(rho);
        for (std::size_t c = 0; c < cr.size(); ++c)
            if (cr[c] < kConvolutionFloor) throw DegenerateModelError("thin flock: rho*phi vanishes below floor");
        switch (spec_.variant) {
            case Variant::MT:
                for (Eigen::Index i = 0; i < M; ++i) base.row(i) /= cr[i];
                return base;
            case Variant::Beta:
                for (Eigen::Index i = 0; i < M; ++i) base.row(i) /= std::pow(cr[i], 1.0 - spec_.beta_exponent);
                return base;
            case Variant::Phi: {
                Eigen::VectorXd w(M);
                for (Eigen::Index i = 0; i < M; ++i) w[i] = grid_.cell_area() / cr[i];
                return base * w.asDiagonal() * base.transpose();
            }
            default: return base;
        }
    }

private:
    ModelSpec spec_;
    TorusGrid grid_;
    Kernel phi_;
    std::vector<ScalarField> parts_;
};

inline Eigen::Map<const Eigen::VectorXd> as_vector(const ScalarField& a) {
    return {a.values.data(), static_cast<Eigen::Index>(a.size())};
}

/// max_i | sum_j Phi_ij rho_j hx^2 - s(x_i) |
inline double check_stochasticity(const AveragingModel& model, const ScalarField& rho) {
    const Eigen::MatrixXd K = model.kernel_matrix(rho);
    const Eigen::VectorXd row = K * as_vector(rho) * rho.grid.cell_area();
    return (row - as_vector(model.strength(rho))).cwiseAbs().maxCoeff();
}

/// max_j | sum_i rho_i Phi_ij hx^2 - s(x_j) |
inline double check_conservative(const AveragingModel& model, const ScalarField& rho) {
    const Eigen::MatrixXd K = model.kernel_matrix(rho);
    const Eigen::VectorXd col = K.transpose() * as_vector(rho) * rho.grid.cell_area();
    return (col - as_vector(model.strength(rho))).cwiseAbs().maxCoeff();
}

/// Norm of a vector field in L^p(kappa), p = 1, 2 or infinity (p <= 0 means infinity).
inline double kappa_norm(const VectorField& v, const ScalarField& kappa, double p) {
    double acc = 0.0;
    for (std::size_t c = 0; c < v.size(); ++c) {
        if (!(kappa[c] > 0.0)) continue;
        const double a = v.at(c).norm();
        if (p <= 0.0) acc = std::max(acc, a);
        else acc += std::pow(a, p) * kappa[c];
    }
    if (p <= 0.0) return acc;
    return std::pow(acc * v.grid().cell_area(), 1.0 / p);
}

/// kappa = rho * s.
inline ScalarField kappa_weight(const ScalarField& rho, const ScalarField& s) {
    ScalarField k(rho.grid);
    for (std::size_t c = 0; c < rho.size(); ++c) k[c] = rho[c] * s[c];
    return k;
}

/// Worst ||[v]||/||v|| in L^p(kappa) over `trials` random fields.
inline ContractivityReport check_contractive(const AveragingModel& model, const ScalarField& rho, double p,
                                             int trials = 20, std::uint64_t seed = 7) {
    Rng rng(seed);
    const ScalarField s = model.strength(rho);
    const ScalarField kappa = kappa_weight(rho, s);
    ContractivityReport rep;
    for (int t = 0; t < trials; ++t) {
        VectorField v(rho.grid);
        for (std::size_t c = 0; c < v.size(); ++c) v.set(c, {rng.uniform(-1, 1), rng.uniform(-1, 1)});
        const double denom = kappa_norm(v, kappa, p);
        if (!(denom > 0.0)) continue;
        rep.worst_ratio = std::max(rep.worst_ratio, kappa_norm(model.average(rho, v), kappa, p) / denom);
    }
    rep.passed = rep.worst_ratio <= 1.0 + 1e-10;
    return rep;
}

/// Support of the weight rho*s (cells where both are positive).
inline std::vector<Eigen::Index> weight_support(const ScalarField& rho, const ScalarField& s) {
    std::vector<Eigen::Index> idx;
    for (std::size_t c = 0; c < rho.size(); ++c)
        if (rho[c] > 0.0 && s[c] > 0.0) idx.push_back(static_cast<Eigen::Index>(c));
    return idx;
}

/// Averaging operator in the coordinates y = sqrt(kappa) v, restricted to the support:
/// A_y = D Phi D hx^2 with D = diag(sqrt(rho / s)).
inline Eigen::MatrixXd averaging_operator_y(const AveragingModel& model, const ScalarField& rho,
                                            const std::vector<Eigen::Index>& support, const ScalarField& s) {
    const Eigen::MatrixXd K = model.kernel_matrix(rho);
    const Eigen::Index m = static_cast<Eigen::Index>(support.size());
    Eigen::VectorXd d(m);
    for (Eigen::Index a = 0; a < m; ++a) d[a] = std::sqrt(rho[support[a]] / s[support[a]]);
    Eigen::MatrixXd A(m, m);
    for (Eigen::Index a = 0; a < m; ++a)
        for (Eigen::Index b = 0; b < m; ++b) A(a, b) = d[a] * K(support[a], support[b]) * d[b];
    return A * rho.grid.cell_area();
}

/// (v, [v])_kappa >= ||[v]||_kappa^2 for all v  <=>  sym(A_y) - A_y^T A_y >= 0.
inline BallPositivityReport check_ball_positive(const AveragingModel& model, const ScalarField& rho) {
    const ScalarField s = model.strength(rho);
    const auto support = weight_support(rho, s);
    if (support.empty()) throw DegenerateModelError("weight rho*s vanishes identically");
    const Eigen::MatrixXd A = averaging_operator_y(model, rho, support, s);
    const Eigen::MatrixXd Q = 0.5 * (A + A.transpose()) - A.transpose() * A;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(Q, Eigen::EigenvaluesOnly);
    BallPositivityReport rep;
    rep.min_eigenvalue = es.eigenvalues().minCoeff();
    rep.passed = rep.min_eigenvalue >= -1e-10;
    return rep;
}

/// delta = 1 - max over rho-mean-zero v of (v, [v])_kappa / ||v||_kappa^2.
inline double spectral_gap(const AveragingModel& model, const ScalarField& rho) {
    if (global_thickness(rho, model.radius()) < 1e-6)
        throw DegenerateModelError("flock too thin for the spectral gap (global thickness < 1e-6)");
    const ScalarField s = model.strength(rho);
    const auto support = weight_support(rho, s);
    if (support.size() < 2) throw DegenerateModelError("weight rho*s vanishes identically");
    const Eigen::MatrixXd A = averaging_operator_y(model, rho, support, s);
    const Eigen::Index m = A.rows();
    Eigen::MatrixXd K = 0.5 * (A + A.transpose());
    Eigen::VectorXd q(m);
    for (Eigen::Index a = 0; a < m; ++a) q[a] = std::sqrt(rho[support[a]] / s[support[a]]);
    q.normalize();
    const Eigen::MatrixXd P = Eigen::MatrixXd::Identity(m, m) - q * q.transpose();
    const double shift = 1.0 + K.cwiseAbs().rowwise().sum().maxCoeff();
    K = P * K * P - shift * q * q.transpose();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (K + K.transpose()), Eigen::EigenvaluesOnly);
    return 1.0 - es.eigenvalues().maxCoeff();
}

/// Unit-mass densities rho_k = background_k + bump at the torus center, with backgrounds
/// 2^{-k} (k = 0..n-1): global thickness decreases along the family.
inline std::vector<ScalarField> thickness_family(const TorusGrid& g, int n = 5) {
    std::vector<ScalarField> out;
    const double L = g.length;
    for (int k = 0; k < n; ++k) {
        const double bg = std::ldexp(1.0, -k);
        ScalarField rho(g);
        for (int i = 0; i < g.points; ++i)
            for (int j = 0; j < g.points; ++j) {
                const double dx = wrap(g.coord(i) - 0.5 * L, L) / (0.25 * L);
                const double dy = wrap(g.coord(j) - 0.5 * L, L) / (0.25 * L);
                rho(i, j) = bg + std::exp(1.0) * bump(std::sqrt(dx * dx + dy * dy));
            }
        const double mass = rho.integral();
        for (auto& x : rho.values) x /= mass;
        out.push_back(std::move(rho));
    }
    return out;
}

}  // namespace fpns
