#pragma once

#include <cmath>
#include <numbers>

#include "phasescreen/error.hpp"

namespace phasescreen {

/// Separable Gaussian medium spectrum C(s,k) = Rhat(k) * f(s) with
///   Rhat(k) = sigma * exp(-|k|^2 / (4 pi^2)),
///   f(s)    = exp(-s^2 / (4 pi^2)) / (2 pi^(3/2)),  integral of f over R = 1,
/// so that integral C(s,k) ds = Rhat(k) holds exactly.
struct CovarianceModel {
    double sigma = 0.0;

    /// Power spectrum Rhat(k) as a function of |k|^2.
    double power_spectrum(double k_squared) const {
        return sigma * std::exp(-k_squared / (4.0 * std::numbers::pi * std::numbers::pi));
    }

    /// Unit-integral axial correlation profile f(s).
    static double axial_profile(double s) {
        constexpr double pi = std::numbers::pi;
        return std::exp(-s * s / (4.0 * pi * pi)) / (2.0 * pi * std::sqrt(pi));
    }

    /// C(s,k).
    double spectrum(double s, double k_squared) const { return power_spectrum(k_squared) * axial_profile(s); }

    /// R(x) = (2 pi)^-d integral Rhat(k) exp(i k.x) dk = sigma pi^(d/2) exp(-pi^2 |x|^2).
    double correlation(double x_squared, int dim) const {
        constexpr double pi = std::numbers::pi;
        return sigma * std::pow(pi, 0.5 * dim) * std::exp(-pi * pi * x_squared);
    }
};

inline CovarianceModel make_covariance(double sigma) {
    detail::require(sigma >= 0.0 && std::isfinite(sigma), "sigma must be non-negative");
    return CovarianceModel{sigma};
}

/// R(0), the damping rate of the white-noise model.
inline double r_zero(const CovarianceModel& cov, int dim) { return cov.correlation(0.0, dim); }

}  // namespace phasescreen
