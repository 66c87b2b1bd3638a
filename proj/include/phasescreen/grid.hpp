#pragma once

#include <array>
#include <cmath>
#include <complex>
#include <cstddef>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "phasescreen/error.hpp"

namespace phasescreen {

using Complex = std::complex<double>;

/// Periodic grid on the torus [-L/2, L/2)^d with N points per axis.
///
/// Point j on an axis sits at x_j = -L/2 + j*dx. Spectral arrays use FFT
/// order: storage index k maps to mode l = k for k < N/2 and l = k - N
/// otherwise, so l ranges over [-N/2, N/2).
struct GridSpec {
    int dim = 1;
    double length = 0.0;
    std::size_t points = 0;
    double dx = 0.0;
    double dk = 0.0;

    std::size_t size() const { return dim == 1 ? points : points * points; }

    double coordinate(std::size_t j) const { return -0.5 * length + static_cast<double>(j) * dx; }

    long mode(std::size_t k) const {
        const auto n = static_cast<long>(points);
        const auto kk = static_cast<long>(k);
        return kk < n / 2 ? kk : kk - n;
    }

    std::size_t storage_index(long l) const {
        const auto n = static_cast<long>(points);
        return static_cast<std::size_t>(l >= 0 ? l : l + n);
    }

    double wavenumber(std::size_t k) const { return dk * static_cast<double>(mode(k)); }

    /// |xi|^2 for a flat spectral index.
    double wavenumber_squared(std::size_t flat) const {
        if (dim == 1) {
            const double xi = wavenumber(flat);
            return xi * xi;
        }
        const double a = wavenumber(flat / points);
        const double b = wavenumber(flat % points);
        return a * a + b * b;
    }

    /// Cell volume dx^d.
    double cell_volume() const { return dim == 1 ? dx : dx * dx; }

    friend bool operator==(const GridSpec& a, const GridSpec& b) {
        return a.dim == b.dim && a.length == b.length && a.points == b.points;
    }
};

inline bool is_power_of_two(std::size_t n) { return n != 0 && (n & (n - 1)) == 0; }

inline GridSpec make_grid(int dim, double length, std::size_t points) {
    detail::require(dim == 1 || dim == 2, "grid dimension must be 1 or 2, got " + std::to_string(dim));
    detail::require(length > 0.0 && std::isfinite(length), "grid length must be positive");
    detail::require(points >= 2 && is_power_of_two(points),
                    "grid points must be a power of two, got " + std::to_string(points));
    GridSpec g;
    g.dim = dim;
    g.length = length;
    g.points = points;
    g.dx = length / static_cast<double>(points);
    g.dk = 2.0 * std::numbers::pi / length;
    return g;
}

/// Wavefield sampled at grid points (row-major, axis 0 slowest).
struct ComplexField {
    GridSpec grid;
    std::vector<Complex> values;

    ComplexField() = default;
    explicit ComplexField(const GridSpec& g) : grid(g), values(g.size()) {}
    ComplexField(const GridSpec& g, std::vector<Complex> v) : grid(g), values(std::move(v)) {
        detail::require(values.size() == grid.size(), "field length does not match grid");
    }

    std::size_t size() const { return values.size(); }
    Complex& operator[](std::size_t i) { return values[i]; }
    const Complex& operator[](std::size_t i) const { return values[i]; }
};

/// Spectral coefficients f_l in FFT order, normalized so f_0 is the mean.
struct SpectralField {
    GridSpec grid;
    std::vector<Complex> values;

    SpectralField() = default;
    explicit SpectralField(const GridSpec& g) : grid(g), values(g.size()) {}

    std::size_t size() const { return values.size(); }
    Complex& operator[](std::size_t i) { return values[i]; }
    const Complex& operator[](std::size_t i) const { return values[i]; }
};

struct RealField {
    GridSpec grid;
    std::vector<double> values;

    RealField() = default;
    explicit RealField(const GridSpec& g) : grid(g), values(g.size()) {}

    std::size_t size() const { return values.size(); }
    double& operator[](std::size_t i) { return values[i]; }
    const double& operator[](std::size_t i) const { return values[i]; }
};

/// Squared distance from the origin of grid point `flat`.
inline double radius_squared(const GridSpec& g, std::size_t flat) {
    if (g.dim == 1) {
        const double x = g.coordinate(flat);
        return x * x;
    }
    const double x = g.coordinate(flat / g.points);
    const double y = g.coordinate(flat % g.points);
    return x * x + y * y;
}

/// Index of the grid point at the origin.
inline std::size_t center_index(const GridSpec& g) {
    const std::size_t c = g.points / 2;
    return g.dim == 1 ? c : c * g.points + c;
}

/// u0(x) = exp(-|x|^2 / 2).
inline ComplexField gaussian_beam(const GridSpec& g) {
    ComplexField u(g);
    for (std::size_t i = 0; i < u.size(); ++i) u[i] = std::exp(-0.5 * radius_squared(g, i));
    return u;
}

/// Discrete L2 norm (sum |f_j|^2 dx^d)^(1/2).
inline double l2_norm(const ComplexField& f) {
    double s = 0.0;
    for (const auto& v : f.values) s += std::norm(v);
    return std::sqrt(s * f.grid.cell_volume());
}

inline double l2_distance(const ComplexField& a, const ComplexField& b) {
    detail::require(a.grid == b.grid, "l2_distance: grid mismatch");
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += std::norm(a[i] - b[i]);
    return std::sqrt(s * a.grid.cell_volume());
}

}  // namespace phasescreen
