#pragma once

#include <cmath>
#include <numbers>
#include <string>
#include <vector>

#include "phasescreen/fft.hpp"
#include "phasescreen/grid.hpp"
#include "phasescreen/kappa.hpp"
#include "phasescreen/medium.hpp"

namespace phasescreen {

struct SplittingSpec {
    double Z = 1.0;
    std::size_t steps = 1;
    double dz = 1.0;  ///< always Z / steps
    double gamma = 1.0;
    Kappa1Profile kappa1;
    MediumModel model = ItoModel{};
};

inline SplittingSpec make_splitting(double Z, std::size_t steps, double gamma, Kappa1Profile kappa1,
                                    MediumModel model) {
    detail::require(Z > 0.0, "Z must be positive");
    detail::require(steps >= 1, "number of steps must be at least 1");
    detail::require(gamma >= 0.0 && gamma <= 1.0, "gamma must lie in [0, 1]");
    kappa1.validate_positive(Z);
    return SplittingSpec{Z, steps, Z / static_cast<double>(steps), gamma, std::move(kappa1), model};
}

/// G(t) = F^-1 exp(-i t |xi|^2) F.
inline ComplexField diffraction_step(const ComplexField& f, double t) {
    SpectralField c = forward_transform(f);
    for (std::size_t k = 0; k < c.size(); ++k) c[k] *= std::polar(1.0, -t * f.grid.wavenumber_squared(k));
    return inverse_transform(c);
}

/// u -> exp(i W) u pointwise.
inline ComplexField potential_step(const ComplexField& f, const RealField& w) {
    detail::require(f.grid == w.grid, "potential_step: grid mismatch");
    ComplexField out(f.grid);
    for (std::size_t i = 0; i < f.size(); ++i) out[i] = f[i] * std::polar(1.0, w[i]);
    return out;
}

/// Applies the splitting scheme step by step with reusable workspaces.
///
/// For step n the field is multiplied by exp(i W) for each screen preceding the
/// diffraction, diffracted with t = chi(z_n, z_{n+1}), then multiplied by the
/// remaining screens.
class Propagator {
public:
    Propagator(const SplittingSpec& spec, const GridSpec& grid)
        : spec_(spec), grid_(grid), work_(grid.size()), multiplier_(grid.size()) {}

    const SplittingSpec& spec() const { return spec_; }

    void check(const ScreenSet& screens) const {
        detail::require(screens.grid == grid_, "screens: grid mismatch");
        detail::require(screens.steps == spec_.steps, "screens: step count mismatch");
        detail::require(std::abs(screens.dz - spec_.dz) <= 1e-12 * spec_.dz, "screens: dz mismatch");
        detail::require(screens.gamma == spec_.gamma, "screens: gamma mismatch");
        detail::require(same_model(screens.model, spec_.model), "screens: medium model mismatch");
    }

    void step(ComplexField& u, std::size_t n, const ScreenSet& screens) {
        detail::require(n < spec_.steps, "step index out of range");
        for (std::size_t s = 0; s < screens.before_diffraction; ++s) apply_screen(u, screens, n, s);
        const double z0 = static_cast<double>(n) * spec_.dz;
        const double z1 = n + 1 == spec_.steps ? spec_.Z : static_cast<double>(n + 1) * spec_.dz;
        diffract(u, chi(spec_.kappa1, z0, z1));
        for (std::size_t s = screens.before_diffraction; s < screens.subs_per_step; ++s)
            apply_screen(u, screens, n, s);
    }

    /// Propagates over all steps, calling observer(n, u) at z_0..z_N.
    template <class Observer>
    void run(ComplexField& u, const ScreenSet& screens, Observer&& observer) {
        check(screens);
        detail::require(u.grid == grid_, "initial field: grid mismatch");
        observer(std::size_t{0}, static_cast<const ComplexField&>(u));
        for (std::size_t n = 0; n < spec_.steps; ++n) {
            step(u, n, screens);
            observer(n + 1, static_cast<const ComplexField&>(u));
        }
    }

    void diffract(ComplexField& u, double t) {
        if (t != cached_t_) {
            const double scale = 1.0 / static_cast<double>(grid_.size());
            for (std::size_t k = 0; k < multiplier_.size(); ++k)
                multiplier_[k] = std::polar(scale, -t * grid_.wavenumber_squared(k));
            cached_t_ = t;
        }
        fft_in_place(grid_, u.values, FftDirection::forward);
        for (std::size_t k = 0; k < u.size(); ++k) u[k] *= multiplier_[k];
        fft_in_place(grid_, u.values, FftDirection::backward);
    }

private:
    void apply_screen(ComplexField& u, const ScreenSet& screens, std::size_t n, std::size_t sub) {
        const auto c = screens.coefficients(n, sub);
        const RetainedModes& modes = *screens.modes;
        const double scale = grid_.dim == 1 ? 1.0 / (2.0 * std::numbers::pi)
                                           : 1.0 / (4.0 * std::numbers::pi * std::numbers::pi);
        std::fill(work_.begin(), work_.end(), Complex{});
        for (std::size_t r = 0; r < modes.size(); ++r) {
            const std::size_t k = modes.index[r];
            work_[k] = scale * detail::alternating_sign(grid_, k) * c[r];
            if (!modes.self_conjugate(r)) {
                const std::size_t kp = modes.partner[r];
                work_[kp] = scale * detail::alternating_sign(grid_, kp) * std::conj(c[r]);
            }
        }
        fft_in_place(grid_, work_, FftDirection::backward);
        for (std::size_t i = 0; i < u.size(); ++i) {
            if (std::abs(work_[i].imag()) > screen_imag_tolerance)
                throw NumericalError("propagator: synthesized screen is not real");
            u[i] *= std::polar(1.0, work_[i].real());
        }
    }

    SplittingSpec spec_;
    GridSpec grid_;
    std::vector<Complex> work_;
    std::vector<Complex> multiplier_;
    double cached_t_ = std::numeric_limits<double>::quiet_NaN();
};

/// One full step of the scheme from z_n to z_{n+1}.
inline ComplexField step(const ComplexField& f, std::size_t n, const ScreenSet& screens, const SplittingSpec& spec) {
    Propagator p(spec, f.grid);
    p.check(screens);
    ComplexField u = f;
    p.step(u, n, screens);
    return u;
}

/// Fields at the requested grid points z_n (in the order given).
inline std::vector<ComplexField> propagate(const ComplexField& u0, const ScreenSet& screens, const SplittingSpec& spec,
                                           const std::vector<std::size_t>& snapshots) {
    for (const auto s : snapshots)
        detail::require(s <= spec.steps, "snapshot index " + std::to_string(s) + " beyond final step");
    std::vector<ComplexField> stored(spec.steps + 1);
    std::vector<bool> wanted(spec.steps + 1, false);
    for (const auto s : snapshots) wanted[s] = true;
    Propagator p(spec, u0.grid);
    ComplexField u = u0;
    p.run(u, screens, [&](std::size_t n, const ComplexField& f) {
        if (wanted[n]) stored[n] = f;
    });
    std::vector<ComplexField> out;
    out.reserve(snapshots.size());
    for (const auto s : snapshots) out.push_back(stored[s]);
    return out;
}

}  // namespace phasescreen
