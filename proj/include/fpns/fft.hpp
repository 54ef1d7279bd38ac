#pragma once

#include <fftw3.h>

#include <complex>
#include <map>
#include <memory>
#include <mutex>

#include "fpns/grid.hpp"

namespace fpns {

using Complex = std::complex<double>;
using ComplexVector = std::vector<Complex, AlignedAllocator<Complex>>;

// Real <-> half-complex 2D transform of an n x n periodic array.
// Plans are built once per size with FFTW_ESTIMATE (deterministic) and executed
// through the new-array interface, which is thread safe.
class SpectralPlan {
public:
    static const SpectralPlan& get(int n) {
        static std::mutex mutex;
        static std::map<int, std::unique_ptr<SpectralPlan>> cache;
        std::lock_guard<std::mutex> lock(mutex);
        auto& slot = cache[n];
        if (!slot) slot.reset(new SpectralPlan(n));
        return *slot;
    }

    SpectralPlan(const SpectralPlan&) = delete;
    SpectralPlan& operator=(const SpectralPlan&) = delete;
    ~SpectralPlan() {
        fftw_destroy_plan(fwd_);
        fftw_destroy_plan(inv_);
    }

    int size() const { return n_; }
    int half() const { return n_ / 2 + 1; }
    std::size_t real_size() const { return static_cast<std::size_t>(n_) * n_; }
    std::size_t complex_size() const { return static_cast<std::size_t>(n_) * half(); }

    /// Unnormalized forward transform; `in` is preserved.
    void forward(const double* in, Complex* out) const {
        fftw_execute_dft_r2c(fwd_, const_cast<double*>(in), reinterpret_cast<fftw_complex*>(out));
    }
    /// Inverse transform including the 1/n^2 factor; `in` is destroyed.
    void inverse(Complex* in, double* out) const {
        fftw_execute_dft_c2r(inv_, reinterpret_cast<fftw_complex*>(in), out);
        const double scale = 1.0 / static_cast<double>(real_size());
        for (std::size_t c = 0; c < real_size(); ++c) out[c] *= scale;
    }

private:
    explicit SpectralPlan(int n) : n_(n) {
        RealVector r(real_size());
        ComplexVector c(complex_size());
        auto* cp = reinterpret_cast<fftw_complex*>(c.data());
        fwd_ = fftw_plan_dft_r2c_2d(n, n, r.data(), cp, FFTW_ESTIMATE);
        inv_ = fftw_plan_dft_c2r_2d(n, n, cp, r.data(), FFTW_ESTIMATE);
    }

    int n_;
    fftw_plan fwd_ = nullptr;
    fftw_plan inv_ = nullptr;
};

/// Signed integer frequency of FFT index p.
inline int signed_mode(int p, int n) { return p <= n / 2 ? p : p - n; }

inline ComplexVector fft2(const ScalarField& a) {
    const auto& plan = SpectralPlan::get(a.grid.points);
    ComplexVector out(plan.complex_size());
    plan.forward(a.values.data(), out.data());
    return out;
}

/// Inverse transform; `spec` is consumed.
inline ScalarField ifft2(ComplexVector spec, const TorusGrid& g) {
    ScalarField out(g);
    SpectralPlan::get(g.points).inverse(spec.data(), out.values.data());
    return out;
}

/// Visit every stored half-spectrum mode with its angular wavenumbers and integer modes.
template <typename Fn>
void for_each_mode(const TorusGrid& g, Fn&& fn) {
    const int n = g.points;
    const int h = n / 2 + 1;
    for (int p = 0; p < n; ++p) {
        const double k1 = g.wavenumber(p);
        for (int q = 0; q < h; ++q) {
            fn(static_cast<std::size_t>(p) * h + q, k1, g.wavenumber(q), p, q);
        }
    }
}

/// Apply a real, even Fourier multiplier m(k1, k2) to a scalar field.
template <typename Fn>
ScalarField apply_multiplier(const ScalarField& a, Fn&& m) {
    ComplexVector s = fft2(a);
    for_each_mode(a.grid, [&](std::size_t idx, double k1, double k2, int, int) { s[idx] *= m(k1, k2); });
    return ifft2(std::move(s), a.grid);
}

/// Spectral partial derivative (axis 0 = x1, 1 = x2); Nyquist modes are dropped.
inline ScalarField spectral_derivative(const ScalarField& a, int axis) {
    const int n = a.grid.points;
    ComplexVector s = fft2(a);
    for_each_mode(a.grid, [&](std::size_t idx, double k1, double k2, int p, int q) {
        const bool nyquist = (axis == 0 ? p : q) == n / 2;
        s[idx] *= nyquist ? Complex(0.0) : Complex(0.0, axis == 0 ? k1 : k2);
    });
    return ifft2(std::move(s), a.grid);
}

}  // namespace fpns
