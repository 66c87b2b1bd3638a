#pragma once

#include <boost/random/normal_distribution.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <memory>
#include <numbers>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "phasescreen/covariance.hpp"
#include "phasescreen/fft.hpp"
#include "phasescreen/grid.hpp"
#include "phasescreen/rng.hpp"

namespace phasescreen {

/// Paraxial medium with wavelength-to-correlation-length ratio theta.
struct ParaxialModel {
    double theta = 1.0;
};

/// White-noise (Ito-Schroedinger) limit.
struct ItoModel {};

using MediumModel = std::variant<ParaxialModel, ItoModel>;

inline bool is_ito(const MediumModel& m) { return std::holds_alternative<ItoModel>(m); }

inline bool same_model(const MediumModel& a, const MediumModel& b) {
    if (a.index() != b.index()) return false;
    if (const auto* p = std::get_if<ParaxialModel>(&a)) return p->theta == std::get<ParaxialModel>(b).theta;
    return true;
}

inline std::string model_name(const MediumModel& m) { return is_ito(m) ? "ito" : "paraxial"; }

struct MediumSpec {
    CovarianceModel cov;
    double cutoff = 0.0;  ///< K_k; modes with any |q_axis| > K_k/2 are dropped
    GridSpec grid;
    MediumModel model = ItoModel{};
};

inline MediumSpec make_medium(const CovarianceModel& cov, double cutoff, const GridSpec& grid,
                              const MediumModel& model) {
    detail::require(cutoff > 0.0, "spectral cutoff must be positive");
    detail::require(cov.sigma >= 0.0, "sigma must be non-negative");
    if (const auto* p = std::get_if<ParaxialModel>(&model))
        detail::require(p->theta > 0.0 && p->theta <= 1.0, "theta must lie in (0, 1]");
    return MediumSpec{cov, cutoff, grid, model};
}

/// Integer lattice index of a lateral Fourier mode q = dk * (lx, ly).
struct Mode {
    long lx = 0;
    long ly = 0;
};

struct Interval {
    double begin = 0.0;
    double end = 0.0;
    double length() const { return end - begin; }
};

inline bool is_retained(const MediumSpec& spec, const Mode& q) {
    const long half = static_cast<long>(spec.grid.points / 2);
    // Nyquist modes have no distinct conjugate partner on the grid and are dropped.
    auto axis_ok = [&](long l) {
        return std::abs(l) < half && std::abs(spec.grid.dk * static_cast<double>(l)) <= 0.5 * spec.cutoff * (1.0 + 1e-12);
    };
    return axis_ok(q.lx) && (spec.grid.dim == 1 ? q.ly == 0 : axis_ok(q.ly));
}

/// Retained modes, one representative per conjugate pair {q, -q}.
struct RetainedModes {
    std::vector<Mode> modes;
    std::vector<std::size_t> index;    ///< flat storage index of q
    std::vector<std::size_t> partner;  ///< flat storage index of -q
    std::vector<double> k_squared;

    std::size_t size() const { return modes.size(); }
    bool self_conjugate(std::size_t r) const { return index[r] == partner[r]; }
};

inline RetainedModes retained_modes(const MediumSpec& spec) {
    const GridSpec& g = spec.grid;
    RetainedModes out;
    auto flat = [&](long lx, long ly) {
        return g.dim == 1 ? g.storage_index(lx) : g.storage_index(lx) * g.points + g.storage_index(ly);
    };
    auto add = [&](long lx, long ly) {
        const Mode q{lx, ly};
        if (!is_retained(spec, q)) return;
        out.modes.push_back(q);
        out.index.push_back(flat(lx, ly));
        out.partner.push_back(flat(-lx, -ly));
        const double kx = g.dk * static_cast<double>(lx);
        const double ky = g.dk * static_cast<double>(ly);
        out.k_squared.push_back(kx * kx + ky * ky);
    };
    const long half = static_cast<long>(g.points / 2);
    if (g.dim == 1) {
        for (long l = 0; l < half; ++l) add(l, 0);
    } else {
        for (long ly = 0; ly < half; ++ly) add(0, ly);
        for (long lx = 1; lx < half; ++lx)
            for (long ly = -half + 1; ly < half; ++ly) add(lx, ly);
    }
    return out;
}

/// (2 pi dk)^d, the lattice weight of one retained mode.
inline double lattice_weight(const GridSpec& g) {
    const double w = 2.0 * std::numbers::pi * g.dk;
    return g.dim == 1 ? w : w * w;
}

namespace detail {

// theta^-1 * double integral over I x J of f((s - t)/theta) for the unit Gaussian
// axial profile. Written as (1/2)*sum(+-|u|) + sum(+-T(|u|)) so the linear
// growth cancels exactly and only the rapidly decaying part T is evaluated.
inline double paraxial_window_covariance(double theta, const Interval& i, const Interval& j) {
    const double a = 1.0 / (2.0 * std::numbers::pi * theta);
    const double sqrt_pi_theta = std::sqrt(std::numbers::pi) * theta;
    auto tail = [&](double u) {
        u = std::abs(u);
        return sqrt_pi_theta * std::exp(-a * a * u * u) - 0.5 * u * std::erfc(a * u);
    };
    const double u1 = i.end - j.begin;
    const double u2 = i.end - j.end;
    const double u3 = i.begin - j.begin;
    const double u4 = i.begin - j.end;
    const double linear = 0.5 * (std::abs(u1) - std::abs(u2) - std::abs(u3) + std::abs(u4));
    return linear + (tail(u1) - tail(u2) - tail(u3) + tail(u4));
}

inline double ito_window_covariance(const Interval& i, const Interval& j) {
    return std::max(0.0, std::min(i.end, j.end) - std::max(i.begin, j.begin));
}

inline double window_covariance(const MediumModel& model, const Interval& i, const Interval& j) {
    if (const auto* p = std::get_if<ParaxialModel>(&model)) return paraxial_window_covariance(p->theta, i, j);
    return ito_window_covariance(i, j);
}

inline bool is_integer_ratio(double num, double den, std::size_t& out) {
    const double r = num / den;
    const double rr = std::round(r);
    if (rr < 1.0 || std::abs(r - rr) > 1e-9 * rr) return false;
    out = static_cast<std::size_t>(rr);
    return true;
}

inline double quantize(double x, int exponent) {
    return std::ldexp(std::nearbyint(std::ldexp(x, -exponent)), exponent);
}

}  // namespace detail

/// E[W_I(q) conj(W_J(q))] for the physical-unit screen coefficient of mode q over
/// axial intervals I and J:
///   paraxial: (2 pi dk)^d theta^-1 int_I int_J C((s - t)/theta, q) ds dt
///   Ito:      (2 pi dk)^d |I n J| Rhat(q)
/// Zero for modes outside the cutoff.
inline double screen_covariance(const MediumSpec& spec, const Mode& q, const Interval& i, const Interval& j) {
    detail::require(i.length() >= 0.0 && j.length() >= 0.0, "screen_covariance: negative-length interval");
    if (!is_retained(spec, q)) return 0.0;
    const double kx = spec.grid.dk * static_cast<double>(q.lx);
    const double ky = spec.grid.dk * static_cast<double>(q.ly);
    const double lateral = lattice_weight(spec.grid) * spec.cov.power_spectrum(kx * kx + ky * ky);
    return lateral * detail::window_covariance(spec.model, i, j);
}

/// Finest-granularity screen coefficients w_{m,q} for m = 0..steps-1 over the
/// retained modes. Values lie on a per-mode dyadic lattice, so any sum of them
/// is exact and independent of summation order.
class NoiseLadder {
public:
    const MediumSpec& medium() const { return medium_; }
    const RetainedModes& modes() const { return *modes_; }
    std::shared_ptr<const RetainedModes> shared_modes() const { return modes_; }
    std::uint64_t seed() const { return seed_; }
    double dz_fine() const { return dz_fine_; }
    std::size_t steps() const { return steps_; }

    Complex coefficient(std::size_t step, std::size_t r) const { return coeffs_[step * modes_->size() + r]; }
    std::span<const Complex> step_coefficients(std::size_t step) const {
        return {coeffs_.data() + step * modes_->size(), modes_->size()};
    }

private:
    friend class LadderSampler;
    MediumSpec medium_;
    std::shared_ptr<const RetainedModes> modes_;
    std::uint64_t seed_ = 0;
    double dz_fine_ = 0.0;
    std::size_t steps_ = 0;
    std::vector<Complex> coeffs_;
};

/// Precomputes everything that does not depend on the seed, then draws ladders.
///
/// Ito increments are independent across steps. Paraxial sequences are
/// stationary per mode and share the axial shape c(k) (times the lateral factor
/// of the mode); they are drawn by circulant embedding of c(k).
class LadderSampler {
public:
    LadderSampler(const MediumSpec& spec, double Z, double dz_fine) : spec_(spec), dz_fine_(dz_fine) {
        detail::require(dz_fine > 0.0 && Z > 0.0, "ladder: Z and dz_fine must be positive");
        detail::require(detail::is_integer_ratio(Z, dz_fine, steps_),
                        "ladder: Z / dz_fine must be a positive integer");
        modes_ = std::make_shared<RetainedModes>(retained_modes(spec));
        const double weight = lattice_weight(spec.grid);
        lateral_sd_.resize(modes_->size());
        for (std::size_t r = 0; r < modes_->size(); ++r)
            lateral_sd_[r] = std::sqrt(weight * spec.cov.power_spectrum(modes_->k_squared[r]));

        const double c0 = detail::window_covariance(spec.model, {0.0, dz_fine}, {0.0, dz_fine});
        const int p = static_cast<int>(std::ceil(std::log2(std::max<double>(2.0, static_cast<double>(steps_)))));
        lattice_bits_ = 46 - p;
        detail::require(lattice_bits_ >= 20, "ladder: too many fine steps");
        exponent_.resize(modes_->size());
        for (std::size_t r = 0; r < modes_->size(); ++r) {
            const double sd = lateral_sd_[r] * std::sqrt(c0);
            exponent_[r] = sd > 0.0 ? std::ilogb(sd) + 1 - lattice_bits_ : 0;
        }
        unit_.resize(modes_->size());
        unit_inverse_.resize(modes_->size());
        for (std::size_t r = 0; r < modes_->size(); ++r) {
            unit_[r] = std::ldexp(1.0, exponent_[r]);
            unit_inverse_[r] = std::ldexp(1.0, -exponent_[r]);
        }
        if (!is_ito(spec.model)) build_embedding();
    }

    std::size_t steps() const { return steps_; }
    std::size_t embedding_size() const { return embedding_size_; }
    /// Most negative circulant eigenvalue clipped to zero, relative to the largest.
    double clipped_eigenvalue() const { return clipped_; }

    NoiseLadder sample(std::uint64_t seed) const {
        NoiseLadder ladder;
        ladder.medium_ = spec_;
        ladder.modes_ = modes_;
        ladder.seed_ = seed;
        ladder.dz_fine_ = dz_fine_;
        ladder.steps_ = steps_;
        const std::size_t nrep = modes_->size();
        ladder.coeffs_.assign(steps_ * nrep, Complex{});
        if (spec_.cov.sigma == 0.0) return ladder;
        if (is_ito(spec_.model))
            sample_ito(seed, ladder.coeffs_);
        else
            sample_paraxial(seed, ladder.coeffs_);
        return ladder;
    }

private:
    void store(std::vector<Complex>& out, std::size_t m, std::size_t r, double re, double im) const {
        // multiplications by powers of two are exact, so this equals quantize(., exponent_[r])
        const double up = unit_inverse_[r];
        const double down = unit_[r];
        out[m * modes_->size() + r] = {std::nearbyint(re * up) * down, std::nearbyint(im * up) * down};
    }

    void sample_ito(std::uint64_t seed, std::vector<Complex>& out) const {
        const double step_sd = std::sqrt(dz_fine_);
        boost::random::normal_distribution<double> normal;
        for (std::size_t m = 0; m < steps_; ++m) {
            for (std::size_t r = 0; r < modes_->size(); ++r) {
                CounterStream stream(derive_key(seed, r, m));
                const double g1 = normal(stream);
                const double g2 = normal(stream);
                const double sd = lateral_sd_[r] * step_sd;
                if (modes_->self_conjugate(r))
                    store(out, m, r, sd * g1, 0.0);
                else
                    store(out, m, r, sd * std::sqrt(0.5) * g1, sd * std::sqrt(0.5) * g2);
            }
        }
    }

    void sample_paraxial(std::uint64_t seed, std::vector<Complex>& out) const {
        const std::size_t m_size = embedding_size_;
        std::vector<Complex> buf(m_size);
        boost::random::normal_distribution<double> normal;
        constexpr std::uint64_t paraxial_tag = 0x7061726178ULL;
        for (std::size_t r = 0; r < modes_->size(); ++r) {
            CounterStream stream(derive_key(seed, r, paraxial_tag));
            for (std::size_t j = 0; j < m_size; ++j) {
                const double a = normal(stream);
                const double b = normal(stream);
                buf[j] = embedding_sd_[j] * Complex(a, b);
            }
            fft_1d_in_place(buf, FftDirection::forward);
            const double sd = lateral_sd_[r];
            for (std::size_t m = 0; m < steps_; ++m) {
                if (modes_->self_conjugate(r))
                    store(out, m, r, sd * buf[m].real(), 0.0);
                else
                    store(out, m, r, sd * std::sqrt(0.5) * buf[m].real(), sd * std::sqrt(0.5) * buf[m].imag());
            }
        }
    }

    void build_embedding() {
        const auto theta = std::get<ParaxialModel>(spec_.model).theta;
        auto lag = [&](std::size_t k) {
            const double z = static_cast<double>(k) * dz_fine_;
            return detail::paraxial_window_covariance(theta, {0.0, dz_fine_}, {z, z + dz_fine_});
        };
        const double c0 = lag(0);
        // Correlation support in fine steps: lags beyond this are below 1e-17 c0.
        std::size_t support = 1;
        while (support < (std::size_t{1} << 23) && std::abs(lag(support)) > 1e-17 * c0) ++support;
        std::size_t m = 2;
        while (m < 2 * std::max(steps_, support)) m *= 2;
        detail::require(m <= (std::size_t{1} << 24), "ladder: circulant embedding too large; reduce Z/theta");
        embedding_size_ = m;
        std::vector<Complex> row(m);
        for (std::size_t k = 0; k <= m / 2; ++k) {
            const double c = k < support + 1 ? lag(k) : 0.0;
            row[k] = c;
            if (k > 0 && k < m / 2) row[m - k] = c;
        }
        fft_1d_in_place(row, FftDirection::forward);
        double lmax = 0.0;
        double lmin = 0.0;
        for (const auto& v : row) {
            lmax = std::max(lmax, v.real());
            lmin = std::min(lmin, v.real());
        }
        clipped_ = lmax > 0.0 ? -lmin / lmax : 0.0;
        if (clipped_ > 1e-8)
            throw NumericalError("ladder: circulant embedding is not non-negative definite (relative eigenvalue " +
                                 std::to_string(-clipped_) + ")");
        embedding_sd_.resize(m);
        for (std::size_t j = 0; j < m; ++j)
            embedding_sd_[j] = std::sqrt(std::max(0.0, row[j].real()) / static_cast<double>(m));
    }

    MediumSpec spec_;
    double dz_fine_;
    std::size_t steps_ = 0;
    std::shared_ptr<RetainedModes> modes_;
    std::vector<double> lateral_sd_;
    std::vector<int> exponent_;
    std::vector<double> unit_, unit_inverse_;
    int lattice_bits_ = 0;
    std::size_t embedding_size_ = 0;
    std::vector<double> embedding_sd_;
    double clipped_ = 0.0;
};

inline NoiseLadder sample_noise_ladder(const MediumSpec& spec, double Z, double dz_fine, std::uint64_t seed) {
    return LadderSampler(spec, Z, dz_fine).sample(seed);
}

/// Per-step screen coefficients aggregated from a ladder.
///
/// Each coarse step is split at z_n + gamma*dz. Sub-intervals of zero length
/// are omitted, so gamma in {0, 1} yields one screen per step and interior
/// gamma yields two; `before_diffraction` of them precede the diffraction.
struct ScreenSet {
    GridSpec grid;
    std::shared_ptr<const RetainedModes> modes;
    MediumModel model;
    std::uint64_t seed = 0;
    double dz = 0.0;
    double gamma = 1.0;
    std::size_t steps = 0;
    std::size_t subs_per_step = 1;
    std::size_t before_diffraction = 1;
    std::vector<Complex> coeffs;  ///< (step, sub, representative)

    std::span<const Complex> coefficients(std::size_t n, std::size_t sub) const {
        detail::require(n < steps && sub < subs_per_step, "screen index out of range");
        const std::size_t nrep = modes->size();
        return {coeffs.data() + (n * subs_per_step + sub) * nrep, nrep};
    }
};

inline ScreenSet aggregate_screens(const NoiseLadder& ladder, double dz_coarse, double gamma) {
    detail::require(gamma >= 0.0 && gamma <= 1.0, "gamma must lie in [0, 1]");
    std::size_t ratio = 0;
    detail::require(detail::is_integer_ratio(dz_coarse, ladder.dz_fine(), ratio),
                    "aggregate_screens: dz_coarse must be an integer multiple of the ladder step");
    detail::require(ladder.steps() % ratio == 0, "aggregate_screens: dz_coarse must divide Z");
    const double first = gamma * static_cast<double>(ratio);
    const double first_r = std::round(first);
    detail::require(std::abs(first - first_r) <= 1e-9 * std::max(1.0, first),
                    "aggregate_screens: gamma*dz must be an integer multiple of the ladder step");
    const auto split = static_cast<std::size_t>(first_r);

    ScreenSet s;
    s.grid = ladder.medium().grid;
    s.modes = ladder.shared_modes();
    s.model = ladder.medium().model;
    s.seed = ladder.seed();
    s.dz = dz_coarse;
    s.gamma = gamma;
    s.steps = ladder.steps() / ratio;

    std::vector<std::pair<std::size_t, std::size_t>> subs;  // fine offsets [a, b) within a step
    if (split > 0) subs.emplace_back(0, split);
    if (split < ratio) subs.emplace_back(split, ratio);
    s.subs_per_step = subs.size();
    s.before_diffraction = split > 0 ? 1 : 0;

    const std::size_t nrep = s.modes->size();
    s.coeffs.assign(s.steps * s.subs_per_step * nrep, Complex{});
    for (std::size_t n = 0; n < s.steps; ++n) {
        for (std::size_t k = 0; k < subs.size(); ++k) {
            Complex* dst = s.coeffs.data() + (n * s.subs_per_step + k) * nrep;
            for (std::size_t m = subs[k].first; m < subs[k].second; ++m) {
                const auto src = ladder.step_coefficients(n * ratio + m);
                for (std::size_t r = 0; r < nrep; ++r) dst[r] += src[r];
            }
        }
    }
    return s;
}

/// Fills `spectrum` with the screen coefficients of (n, sub) scaled by (2 pi)^-d.
inline void screen_spectrum(const ScreenSet& screens, std::size_t n, std::size_t sub, SpectralField& spectrum) {
    const auto c = screens.coefficients(n, sub);
    const RetainedModes& modes = *screens.modes;
    const double scale = screens.grid.dim == 1 ? 1.0 / (2.0 * std::numbers::pi)
                                              : 1.0 / (4.0 * std::numbers::pi * std::numbers::pi);
    spectrum = SpectralField(screens.grid);
    for (std::size_t r = 0; r < modes.size(); ++r) {
        spectrum[modes.index[r]] = scale * c[r];
        if (!modes.self_conjugate(r)) spectrum[modes.partner[r]] = scale * std::conj(c[r]);
    }
}

/// Largest |Im W| tolerated after synthesis.
inline constexpr double screen_imag_tolerance = 1e-12;

/// W(x) = sum_q chi_c(q) w_q exp(i q.x) / (2 pi)^d for step n, sub-interval `sub`.
inline RealField screen_field(const ScreenSet& screens, std::size_t n, std::size_t sub) {
    SpectralField spectrum;
    screen_spectrum(screens, n, sub, spectrum);
    const ComplexField w = inverse_transform(spectrum);
    RealField out(screens.grid);
    for (std::size_t i = 0; i < w.size(); ++i) {
        if (std::abs(w[i].imag()) > screen_imag_tolerance)
            throw NumericalError("screen_field: synthesized screen is not real");
        out[i] = w[i].real();
    }
    return out;
}

}  // namespace phasescreen
