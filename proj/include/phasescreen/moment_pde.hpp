#pragma once

#include <cmath>
#include <limits>
#include <numbers>
#include <variant>
#include <vector>

#include "phasescreen/covariance.hpp"
#include "phasescreen/fft.hpp"
#include "phasescreen/grid.hpp"
#include "phasescreen/kappa.hpp"
#include "phasescreen/medium.hpp"

namespace phasescreen {

/// mu(z, x, y) = E u(z, x) conj(u(z, y)) on the tensor grid, flat index i * N + j.
struct Mu11Field {
    GridSpec grid;  ///< the d = 1 grid of each variable
    std::vector<Complex> values;

    Complex operator()(std::size_t i, std::size_t j) const { return values[i * grid.points + j]; }
    Complex diagonal(std::size_t i) const { return values[i * grid.points + i]; }
};

/// Transport applied continuously (internal Strang sub-steps per step).
struct ContinuousPhi {
    std::size_t substeps = 16;
};

/// Transport concentrated at the collocation points (n + gamma) dz.
struct SplitPhi {
    double gamma = 1.0;
};

using PhiMode = std::variant<ContinuousPhi, SplitPhi>;

inline Mu11Field initial_mu11(const GridSpec& g) {
    const ComplexField u0 = gaussian_beam(g);
    Mu11Field mu{g, std::vector<Complex>(g.points * g.points)};
    for (std::size_t i = 0; i < g.points; ++i)
        for (std::size_t j = 0; j < g.points; ++j) mu.values[i * g.points + j] = u0[i] * std::conj(u0[j]);
    return mu;
}

/// R_c(x) = (dk / 2 pi) sum over retained q of Rhat(q) exp(i q x), at offsets x = k dx.
inline std::vector<double> retained_correlation(const GridSpec& g, const CovarianceModel& cov, double cutoff) {
    MediumSpec spec{cov, cutoff, g, ItoModel{}};
    const RetainedModes modes = retained_modes(spec);
    SpectralField c(g);
    const double w = g.dk / (2.0 * std::numbers::pi);
    for (std::size_t r = 0; r < modes.size(); ++r) {
        const double v = w * cov.power_spectrum(modes.k_squared[r]);
        c[modes.index[r]] = v;
        c[modes.partner[r]] = v;
    }
    // Plain inverse DFT: offsets are measured from 0, not from the grid origin -L/2.
    fft_in_place(g, c.values, FftDirection::backward);
    std::vector<double> out(g.points);
    for (std::size_t k = 0; k < g.points; ++k) out[k] = c[k].real();
    return out;
}

/// Split-step solver for d mu/dz = i phi(z) (d_xx - d_yy) mu + (R_c(x - y) - R_c(0)) mu.
class MomentPdeSolver {
public:
    MomentPdeSolver(const GridSpec& grid, const CovarianceModel& cov, Kappa1Profile kappa1, double cutoff)
        : grid_(grid), tensor_(make_grid(2, grid.length, grid.points)), kappa1_(std::move(kappa1)) {
        detail::require(grid.dim == 1, "moment PDE requires a d = 1 grid");
        const auto rc = retained_correlation(grid, cov, cutoff);
        const std::size_t n = grid.points;
        potential_.resize(n * n);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j) potential_[i * n + j] = rc[(i + n - j) % n] - rc[0];
        multiplier_.resize(n * n);
        factor_.resize(n * n);
    }

    const GridSpec& grid() const { return grid_; }

    /// Multiplication by exp(h (R_c(x - y) - R_c(0))).
    void potential(Mu11Field& mu, double h) {
        if (h != factor_h_) {
            for (std::size_t k = 0; k < factor_.size(); ++k) factor_[k] = std::exp(h * potential_[k]);
            factor_h_ = h;
        }
        for (std::size_t k = 0; k < mu.values.size(); ++k) mu.values[k] *= factor_[k];
    }

    /// Exact transport with spectral multiplier exp(-i t (xi^2 - zeta^2)).
    void transport(Mu11Field& mu, double t) {
        if (t != multiplier_t_) {
            const double scale = 1.0 / static_cast<double>(tensor_.size());
            const std::size_t n = grid_.points;
            for (std::size_t a = 0; a < n; ++a) {
                const double xi = grid_.wavenumber(a);
                for (std::size_t b = 0; b < n; ++b) {
                    const double zeta = grid_.wavenumber(b);
                    multiplier_[a * n + b] = std::polar(scale, -t * (xi * xi - zeta * zeta));
                }
            }
            multiplier_t_ = t;
        }
        fft_in_place(tensor_, mu.values, FftDirection::forward);
        for (std::size_t k = 0; k < mu.values.size(); ++k) mu.values[k] *= multiplier_[k];
        fft_in_place(tensor_, mu.values, FftDirection::backward);
    }

    /// Advances mu over step n of size dz (steps of [0, Z]).
    void step(Mu11Field& mu, std::size_t n, double dz, const PhiMode& phi) {
        const double z0 = static_cast<double>(n) * dz;
        if (const auto* s = std::get_if<SplitPhi>(&phi)) {
            const double first = s->gamma * dz;
            if (first > 0.0) potential(mu, first);
            transport(mu, dz * kappa1_((static_cast<double>(n) + s->gamma) * dz));
            if (dz - first > 0.0) potential(mu, dz - first);
            return;
        }
        const std::size_t m = std::get<ContinuousPhi>(phi).substeps;
        const double h = dz / static_cast<double>(m);
        for (std::size_t k = 0; k < m; ++k) {
            const double a = z0 + static_cast<double>(k) * h;
            potential(mu, 0.5 * h);
            transport(mu, chi(kappa1_, a, a + h));
            potential(mu, 0.5 * h);
        }
    }

    /// Integrates from the Gaussian-beam initial condition; observer(n, mu) at z_0..z_N.
    template <class Observer>
    void run(double Z, std::size_t steps, const PhiMode& phi, Observer&& observer) {
        detail::require(Z > 0.0 && steps >= 1, "moment PDE: need Z > 0 and at least one step");
        if (const auto* c = std::get_if<ContinuousPhi>(&phi))
            detail::require(c->substeps >= 1, "moment PDE: substeps must be positive");
        if (const auto* s = std::get_if<SplitPhi>(&phi))
            detail::require(s->gamma >= 0.0 && s->gamma <= 1.0, "moment PDE: gamma must lie in [0, 1]");
        kappa1_.validate_positive(Z);
        const double dz = Z / static_cast<double>(steps);
        Mu11Field mu = initial_mu11(grid_);
        observer(std::size_t{0}, static_cast<const Mu11Field&>(mu));
        for (std::size_t n = 0; n < steps; ++n) {
            step(mu, n, dz, phi);
            observer(n + 1, static_cast<const Mu11Field&>(mu));
        }
    }

private:
    GridSpec grid_;
    GridSpec tensor_;
    Kappa1Profile kappa1_;
    std::vector<double> potential_;
    std::vector<Complex> multiplier_;
    std::vector<double> factor_;
    double multiplier_t_ = std::numeric_limits<double>::quiet_NaN();
    double factor_h_ = std::numeric_limits<double>::quiet_NaN();
};

/// Full trajectory mu(z_n) for n = 0..steps. The cutoff defaults to the whole grid.
inline std::vector<Mu11Field> moment_pde_solve(const GridSpec& grid, const CovarianceModel& cov,
                                               const Kappa1Profile& kappa1, double Z, std::size_t steps,
                                               const PhiMode& phi,
                                               double cutoff = std::numeric_limits<double>::infinity()) {
    MomentPdeSolver solver(grid, cov, kappa1, cutoff);
    std::vector<Mu11Field> out;
    out.reserve(steps + 1);
    solver.run(Z, steps, phi, [&](std::size_t, const Mu11Field& mu) { out.push_back(mu); });
    return out;
}

/// max |mu(x, y) - conj(mu(y, x))|.
inline double hermitian_defect(const Mu11Field& mu) {
    const std::size_t n = mu.grid.points;
    double d = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i; j < n; ++j) d = std::max(d, std::abs(mu(i, j) - std::conj(mu(j, i))));
    return d;
}

/// max over the diagonal of |Im mu| and of the negative part of Re mu.
inline double diagonal_defect(const Mu11Field& mu) {
    double d = 0.0;
    for (std::size_t i = 0; i < mu.grid.points; ++i) {
        const Complex v = mu.diagonal(i);
        d = std::max({d, std::abs(v.imag()), std::max(0.0, -v.real())});
    }
    return d;
}

/// sum_x mu(x, x) dx.
inline double mu11_trace(const Mu11Field& mu) {
    double s = 0.0;
    for (std::size_t i = 0; i < mu.grid.points; ++i) s += mu.diagonal(i).real();
    return s * mu.grid.dx;
}

}  // namespace phasescreen
