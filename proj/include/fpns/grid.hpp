#pragma once

#include <cmath>
#include <cstddef>
#include <cstdlib>
#include <new>
#include <span>
#include <vector>

#include "fpns/error.hpp"

namespace fpns {

/// 64-byte aligned storage so FFTW plans can be reused across buffers.
template <typename T>
struct AlignedAllocator {
    using value_type = T;
    static constexpr std::size_t alignment = 64;

    AlignedAllocator() noexcept = default;
    template <typename U>
    AlignedAllocator(const AlignedAllocator<U>&) noexcept {}

    T* allocate(std::size_t n) {
        if (n == 0) return nullptr;
        std::size_t bytes = ((n * sizeof(T) + alignment - 1) / alignment) * alignment;
        void* p = std::aligned_alloc(alignment, bytes);
        if (p == nullptr) throw std::bad_alloc();
        return static_cast<T*>(p);
    }
    void deallocate(T* p, std::size_t) noexcept { std::free(p); }

    template <typename U>
    bool operator==(const AlignedAllocator<U>&) const noexcept { return true; }
};

using RealVector = std::vector<double, AlignedAllocator<double>>;

/// Uniform periodic grid on [0, L)^2 with points x_i = i * h.
struct TorusGrid {
    double length = 1.0;
    int points = 32;

    TorusGrid() = default;
    TorusGrid(double L, int n) : length(L), points(n) { validate(); }

    void validate() const {
        if (!(length > 0.0)) throw ParameterError("torus side length must be positive");
        if (points < 8 || points % 2 != 0)
            throw ParameterError("torus grid needs an even number of points >= 8");
    }

    double spacing() const { return length / points; }
    double cell_area() const { return spacing() * spacing(); }
    double area() const { return length * length; }
    std::size_t cells() const { return static_cast<std::size_t>(points) * points; }
    double coord(int i) const { return i * spacing(); }
    /// Angular wavenumber of FFT index p (p in [0, n)).
    double wavenumber(int p) const {
        const int k = p <= points / 2 ? p : p - points;
        return 2.0 * M_PI * k / length;
    }
    bool operator==(const TorusGrid&) const = default;
};

/// Midpoint grid on the velocity box [-V, V]^2.
struct VelocityGrid {
    double half_width = 6.0;
    int points = 32;

    VelocityGrid() = default;
    VelocityGrid(double V, int n) : half_width(V), points(n) { validate(); }

    void validate() const {
        if (!(half_width > 0.0)) throw ParameterError("velocity half width must be positive");
        if (points < 16) throw ParameterError("velocity grid needs at least 16 points per dimension");
    }

    double spacing() const { return 2.0 * half_width / points; }
    double cell_area() const { return spacing() * spacing(); }
    std::size_t cells() const { return static_cast<std::size_t>(points) * points; }
    double coord(int k) const { return -half_width + (k + 0.5) * spacing(); }
    double max_speed() const { return half_width - 0.5 * spacing(); }
    bool operator==(const VelocityGrid&) const = default;
};

struct Vec2 {
    double x = 0.0;
    double y = 0.0;

    Vec2 operator+(Vec2 o) const { return {x + o.x, y + o.y}; }
    Vec2 operator-(Vec2 o) const { return {x - o.x, y - o.y}; }
    Vec2 operator*(double a) const { return {a * x, a * y}; }
    double dot(Vec2 o) const { return x * o.x + y * o.y; }
    double norm2() const { return x * x + y * y; }
    double norm() const { return std::sqrt(norm2()); }
    bool operator==(const Vec2&) const = default;
};

inline Vec2 operator*(double a, Vec2 v) { return v * a; }

/// Scalar field on the torus, row-major (x1, x2).
struct ScalarField {
    TorusGrid grid;
    RealVector values;

    ScalarField() = default;
    explicit ScalarField(const TorusGrid& g, double fill = 0.0) : grid(g), values(g.cells(), fill) {}

    double& operator()(int i, int j) { return values[static_cast<std::size_t>(i) * grid.points + j]; }
    double operator()(int i, int j) const { return values[static_cast<std::size_t>(i) * grid.points + j]; }
    double& operator[](std::size_t c) { return values[c]; }
    double operator[](std::size_t c) const { return values[c]; }
    std::size_t size() const { return values.size(); }

    double integral() const {
        double sum = 0.0;
        for (double v : values) sum += v;
        return sum * grid.cell_area();
    }
    double mean() const { return integral() / grid.area(); }
};

/// Two-component vector field on the torus.
struct VectorField {
    ScalarField c1;
    ScalarField c2;

    VectorField() = default;
    explicit VectorField(const TorusGrid& g, Vec2 fill = {}) : c1(g, fill.x), c2(g, fill.y) {}
    VectorField(ScalarField a, ScalarField b) : c1(std::move(a)), c2(std::move(b)) {}

    const TorusGrid& grid() const { return c1.grid; }
    Vec2 at(std::size_t c) const { return {c1[c], c2[c]}; }
    void set(std::size_t c, Vec2 v) {
        c1[c] = v.x;
        c2[c] = v.y;
    }
    std::size_t size() const { return c1.size(); }
    Vec2 mean() const { return {c1.mean(), c2.mean()}; }
};

/// Kinetic density f[i, j, k, l] on torus^2 x velocity^2, row-major in that order.
struct DistributionField {
    TorusGrid xgrid;
    VelocityGrid vgrid;
    RealVector values;

    DistributionField() = default;
    DistributionField(const TorusGrid& xg, const VelocityGrid& vg, double fill = 0.0)
        : xgrid(xg), vgrid(vg), values(xg.cells() * vg.cells(), fill) {}

    std::size_t velocity_block() const { return vgrid.cells(); }
    std::size_t size() const { return values.size(); }

    std::span<double> cell(std::size_t c) {
        return {values.data() + c * velocity_block(), velocity_block()};
    }
    std::span<const double> cell(std::size_t c) const {
        return {values.data() + c * velocity_block(), velocity_block()};
    }
    double& at(int i, int j, int k, int l) {
        return values[((static_cast<std::size_t>(i) * xgrid.points + j) * vgrid.points + k) * vgrid.points + l];
    }
    double at(int i, int j, int k, int l) const {
        return values[((static_cast<std::size_t>(i) * xgrid.points + j) * vgrid.points + k) * vgrid.points + l];
    }

    double phase_cell_volume() const { return xgrid.cell_area() * vgrid.cell_area(); }
    double mass() const {
        double sum = 0.0;
        for (double v : values) sum += v;
        return sum * phase_cell_volume();
    }
    double min_value() const {
        double lo = values.empty() ? 0.0 : values[0];
        for (double v : values) lo = v < lo ? v : lo;
        return lo;
    }
};

/// Density, momentum and (floored) macroscopic velocity.
struct MacroFields {
    ScalarField rho;
    VectorField momentum;

    /// v = m / rho where rho > floor, 0 elsewhere.
    VectorField velocity(double floor) const {
        VectorField v(rho.grid);
        for (std::size_t c = 0; c < rho.size(); ++c) {
            if (rho[c] > floor) v.set(c, momentum.at(c) * (1.0 / rho[c]));
        }
        return v;
    }
    /// Default vacuum floor: 1e-14 * mass / |Omega|.
    double default_floor() const { return 1e-14 * rho.integral() / rho.grid.area(); }
};

}  // namespace fpns
