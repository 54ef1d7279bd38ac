// Fluid solver: Leray projection, Brinkman force, integrating-factor Navier-Stokes step.
#include <gtest/gtest.h>

#include "fpns/averaging.hpp"
#include "fpns/coupling.hpp"
#include "fpns/fluid.hpp"
#include "support.hpp"

using namespace fpns;
using fpns::testing::random_velocity;

namespace {

double max_diff(const VectorField& a, const VectorField& b) {
    double m = 0.0;
    for (std::size_t c = 0; c < a.size(); ++c) m = std::max(m, (a.at(c) - b.at(c)).norm());
    return m;
}

/// Smooth divergence-free field from random low modes of a stream function, max speed amp.
VectorField smooth_field(const TorusGrid& g, std::uint64_t seed, double amp) {
    Rng rng(seed);
    const double k = 2.0 * M_PI / g.length;
    VectorField u(g);
    for (int a = -3; a <= 3; ++a)
        for (int b = -3; b <= 3; ++b) {
            if (a == 0 && b == 0) continue;
            const double c = rng.uniform(-1, 1) / (a * a + b * b), ph = rng.uniform(0, 2 * M_PI);
            for (int i = 0; i < g.points; ++i)
                for (int j = 0; j < g.points; ++j) {
                    const double arg = k * (a * g.coord(i) + b * g.coord(j)) + ph;
                    // psi = c cos(arg): u = (d_y psi, -d_x psi)
                    const std::size_t cell = static_cast<std::size_t>(i) * g.points + j;
                    u.c1[cell] += -c * k * b * std::sin(arg);
                    u.c2[cell] += c * k * a * std::sin(arg);
                }
        }
    double top = 0.0;
    for (std::size_t c = 0; c < u.size(); ++c) top = std::max(top, u.at(c).norm());
    for (std::size_t c = 0; c < u.size(); ++c) u.set(c, u.at(c) * (amp / top));
    return u;
}

/// Periodized Gaussian of variance eps^2 sampled on the grid: the physical-space mollifier.
ScalarField gaussian_kernel(const TorusGrid& g, double eps) {
    ScalarField k(g);
    for (int i = 0; i < g.points; ++i)
        for (int j = 0; j < g.points; ++j) {
            double s = 0.0;
            for (int n1 = -2; n1 <= 2; ++n1)
                for (int n2 = -2; n2 <= 2; ++n2) {
                    const double x = g.coord(i) + n1 * g.length, y = g.coord(j) + n2 * g.length;
                    s += std::exp(-(x * x + y * y) / (2 * eps * eps));
                }
            k(i, j) = s / (2 * M_PI * eps * eps);
        }
    return k;
}

}  // namespace

TEST(Leray, GradientAnnihilated) {
    TorusGrid g(1.0, 16);
    const auto phi = fpns::testing::random_scalar(g, 1);
    const VectorField grad(spectral_derivative(phi, 0), spectral_derivative(phi, 1));
    const auto p = leray_project(grad);
    for (std::size_t c = 0; c < p.size(); ++c) EXPECT_LT(p.at(c).norm(), 1e-12);
}

TEST(Leray, DivergenceFreeUnchangedAndIdempotent) {
    TorusGrid g(1.0, 16);
    const auto u = smooth_field(g, 2, 1.0);
    EXPECT_LT(max_diff(leray_project(u), u), 1e-14 * 10);
    const auto p = leray_project(random_velocity(g, 3));
    EXPECT_LT(max_diff(leray_project(p), p), 1e-14 * 10);
    EXPECT_LT(relative_divergence(p), 1e-12);
    // the mean mode is untouched
    const VectorField c(g, {0.3, -0.1});
    EXPECT_LT(max_diff(leray_project(c), c), 1e-15);
}

TEST(Brinkman, SynchronizedStateHasNoForce) {
    TorusGrid xg(1.0, 16);
    VelocityGrid vg(6.0, 32);
    const Vec2 c{0.3, -0.2};
    const Vec2 g{moment_matched_center(vg, 1.0, c.x), moment_matched_center(vg, 1.0, c.y)};
    auto f = maxwellian(xg, vg, 1.0, g);
    const auto F = brinkman_force(f, VectorField(xg, c), 0.1, 2.0);
    for (std::size_t k = 0; k < F.size(); ++k) EXPECT_LT(F.at(k).norm(), 1e-12);
    const auto F0 = brinkman_force(maxwellian(xg, vg, 1.0), VectorField(xg), 0.1, 2.0);
    for (std::size_t k = 0; k < F0.size(); ++k) EXPECT_LT(F0.at(k).norm(), 1e-15);
}

TEST(Brinkman, DirectQuadratureAndConvolutionOracle) {
    TorusGrid xg(1.0, 32);
    VelocityGrid vg(6.0, 16);
    const double eps = 0.1, gamma = 1.5;
    DistributionField f(xg, vg);
    Rng rng(4);
    for (double& x : f.values) x = rng.uniform(0.0, 1.0);
    const auto u = smooth_field(xg, 5, 1.0);
    const auto F = brinkman_force(f, u, eps, gamma);

    const auto K = gaussian_kernel(xg, eps);
    const VectorField ue(direct_convolution(K, u.c1), direct_convolution(K, u.c2));
    VectorField drag(xg);
    for (std::size_t c = 0; c < xg.cells(); ++c) {
        double rho = 0, m1 = 0, m2 = 0;
        for (int k = 0; k < vg.points; ++k)
            for (int l = 0; l < vg.points; ++l) {
                const double x = f.values[c * vg.cells() + static_cast<std::size_t>(k) * vg.points + l] * vg.cell_area();
                rho += x;
                m1 += vg.coord(k) * x;
                m2 += vg.coord(l) * x;
            }
        drag.set(c, Vec2{m1, m2} - ue.at(c) * rho);
    }
    const VectorField oracle(direct_convolution(K, drag.c1), direct_convolution(K, drag.c2));
    for (std::size_t c = 0; c < xg.cells(); ++c) {
        EXPECT_NEAR(F.c1[c], gamma * oracle.c1[c], 1e-10);
        EXPECT_NEAR(F.c2[c], gamma * oracle.c2[c], 1e-10);
    }
}

TEST(Brinkman, DragPairingIsSymmetric) {
    TorusGrid xg(1.0, 16);
    VelocityGrid vg(6.0, 16);
    DistributionField f(xg, vg);
    Rng rng(6);
    for (double& x : f.values) x = rng.uniform(0.0, 1.0);
    const auto u = smooth_field(xg, 7, 1.0);
    const double eps = 0.1, gamma = 2.0;
    const auto F = brinkman_force(f, u, eps, gamma);
    const auto m = moments(f);
    const auto ue = mollify(u, eps);
    double lhs = 0.0, rhs = 0.0;
    for (std::size_t c = 0; c < xg.cells(); ++c) {
        lhs += u.at(c).dot(F.at(c));
        rhs += gamma * ue.at(c).dot(m.momentum.at(c) - ue.at(c) * m.rho[c]);
    }
    EXPECT_NEAR(lhs, rhs, 1e-12 * std::abs(rhs));
}

TEST(NavierStokes, ShearModeHeatFactor) {
    TorusGrid g(1.0, 32);
    const double nu = 0.05, dt = 0.01;
    const int k0 = 2;
    VectorField u(g);
    for (int i = 0; i < 32; ++i)
        for (int j = 0; j < 32; ++j) u.c1[static_cast<std::size_t>(i) * 32 + j] = std::sin(2 * M_PI * k0 * g.coord(j));
    const double e0 = fluid_energy(u);
    ns_step(u, VectorField(g), nu, dt);
    const double kk = std::pow(2 * M_PI * k0, 2);
    EXPECT_NEAR(fluid_energy(u) / e0, std::exp(-2 * nu * kk * dt), 1e-10);
}

TEST(NavierStokes, TaylorGreenClosedForm) {
    TorusGrid g(1.0, 64);
    const double nu = 0.01, amp = 1.0;
    auto u = taylor_green(g, amp);
    const double T = 1.0;  // one turnover: L / U
    const int n = 200;
    for (int i = 0; i < n; ++i) ns_step(u, VectorField(g), nu, T / n);
    EXPECT_LT(max_diff(u, taylor_green(g, amp, nu, T)), 1e-6);
    EXPECT_LT(relative_divergence(u), 1e-12);
}

TEST(NavierStokes, InviscidEnergyConservation) {
    TorusGrid g(1.0, 32);
    auto u = leray_project(smooth_field(g, 8, 0.5), dealias_cutoff(32));
    const double e0 = fluid_energy(u);
    for (int i = 0; i < 100; ++i) ns_step(u, VectorField(g), 0.0, 1e-3);
    EXPECT_NEAR(fluid_energy(u), e0, 1e-8 * std::max(1.0, e0));
    EXPECT_LT(relative_divergence(u), 1e-12);
}

TEST(NavierStokes, ForcedStepStaysDivergenceFree) {
    TorusGrid g(1.0, 32);
    auto u = smooth_field(g, 9, 0.5);
    const auto F = random_velocity(g, 10);  // not divergence free: projected inside the step
    for (int i = 0; i < 10; ++i) ns_step(u, F, 0.1, 1e-3);
    EXPECT_LT(relative_divergence(u), 1e-12);
}

TEST(NavierStokes, MeanModeFollowsMeanForce) {
    TorusGrid g(1.0, 32);
    auto u = smooth_field(g, 11, 0.5);
    for (std::size_t c = 0; c < u.size(); ++c) u.set(c, u.at(c) + Vec2{0.2, 0.1});
    const auto F = random_velocity(g, 12);
    const Vec2 m0 = u.mean(), fbar = F.mean();
    const double dt = 2e-3;
    ns_step(u, F, 0.1, dt);
    EXPECT_NEAR(u.mean().x, m0.x + dt * fbar.x, 1e-13);
    EXPECT_NEAR(u.mean().y, m0.y + dt * fbar.y, 1e-13);
}

TEST(NavierStokes, EnergyIdentityRate) {
    // 1/2 d|u|^2/dt = -nu |grad u|^2 + <u, F>; over one step the energy change matches the
    // trapezoidal integral of the right side to O(dt^3)
    TorusGrid g(1.0, 32);
    const double nu = 0.1;
    const auto u0 = leray_project(smooth_field(g, 13, 0.5), dealias_cutoff(32));
    const auto F = leray_project(smooth_field(g, 14, 1.0), dealias_cutoff(32));
    auto rate = [&](const VectorField& u) {
        double pair = 0.0;
        for (std::size_t c = 0; c < u.size(); ++c) pair += u.at(c).dot(F.at(c));
        return -nu * enstrophy(u) + pair * g.cell_area();
    };
    const double r0 = rate(u0);
    auto defect = [&](double dt) {
        auto u = u0;
        ns_step(u, F, nu, dt);
        return std::abs((fluid_energy(u) - fluid_energy(u0)) / dt - 0.5 * (r0 + rate(u)));
    };
    const double d1 = defect(1e-3), d2 = defect(5e-4);
    EXPECT_LT(d1, 1e-3 * std::abs(r0));
    RecordProperty("ratio", std::to_string(d1 / d2));
    EXPECT_GT(d1 / d2, 3.0);
}

TEST(NavierStokes, CflViolationRejected) {
    TorusGrid g(1.0, 16);
    auto u = VectorField(g, {10.0, 0.0});
    EXPECT_THROW(ns_step(u, VectorField(g), 0.1, 0.01), StepSizeError);
}
