#pragma once

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <cmath>
#include <numbers>

#include "phasescreen/covariance.hpp"
#include "phasescreen/grid.hpp"

namespace phasescreen {

/// Free beam A0(z, x) = theta(z)^-d exp(-|x|^2 / (2 theta^2)), theta = (1 + 2 i kappa z)^(1/2),
/// for diffraction coefficient kappa (principal branch).
inline Complex free_space(double z, double x_squared, int dim = 1, double kappa = 1.0) {
    const Complex t2 = Complex(1.0, 2.0 * kappa * z);
    const Complex t = std::sqrt(t2);
    const Complex pre = dim == 1 ? 1.0 / t : 1.0 / t2;
    return pre * std::exp(-x_squared / (2.0 * t2));
}

inline ComplexField free_space_field(const GridSpec& g, double z, double kappa = 1.0) {
    ComplexField u(g);
    for (std::size_t i = 0; i < u.size(); ++i) u[i] = free_space(z, radius_squared(g, i), g.dim, kappa);
    return u;
}

/// E u(z, x) = exp(-R(0) z / 2) A0(z, x) with R(0) = sigma sqrt(pi) (d = 1, kappa1 = 1).
inline Complex analytic_mean(double z, double x, double sigma) {
    return std::exp(-0.5 * sigma * std::sqrt(std::numbers::pi) * z) * free_space(z, x * x);
}

/// Absolute error budget of analytic_second_moment.
inline constexpr double second_moment_tolerance = 1e-9;

/// E|u(z, x)|^2 = (4 pi)^-1/2 int exp(-xi^2 (z^2 + 1/4) + i xi x)
///               * exp(sigma sqrt(pi) int_0^z (exp(-4 pi^2 xi^2 s^2) - 1) ds) dxi,
/// integrated over |xi| <= 12 by adaptive Gauss-Kronrod (d = 1, kappa1 = 1).
inline double analytic_second_moment(double z, double x, double sigma) {
    constexpr double pi = std::numbers::pi;
    const double a = sigma * std::sqrt(pi);
    auto inner = [z](double xi) {
        const double t = 2.0 * pi * xi * z;
        if (std::abs(t) < 1e-8) return z;
        return std::sqrt(pi) * std::erf(t) / (4.0 * pi * xi);
    };
    auto integrand = [&](double xi) {
        return 2.0 * std::cos(xi * x) * std::exp(-xi * xi * (z * z + 0.25) + a * (inner(xi) - z));
    };
    double err = 0.0;
    const double v = boost::math::quadrature::gauss_kronrod<double, 31>::integrate(integrand, 0.0, 12.0, 20, 1e-13, &err);
    const double result = v / std::sqrt(4.0 * pi);
    if (!(err / std::sqrt(4.0 * pi) <= second_moment_tolerance) || !std::isfinite(result))
        throw NumericalError("analytic_second_moment: quadrature did not converge");
    return result;
}

}  // namespace phasescreen
