#include <gtest/gtest.h>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <cmath>
#include <numbers>

#include "phasescreen/covariance.hpp"
#include "phasescreen/medium.hpp"

using namespace phasescreen;
using boost::math::quadrature::gauss_kronrod;

namespace {

constexpr double pi = std::numbers::pi;
constexpr double default_cutoff = 2.0 * pi * 16.0;

MediumSpec small_medium(double sigma, MediumModel model, std::size_t points = 64, double length = 16.0) {
    return make_medium(make_covariance(sigma), default_cutoff, make_grid(1, length, points), model);
}

// theta^-1 * int_I int_J f((s - t)/theta) ds dt rewritten as
// theta^-1 * int f(u/theta) |I n (J + u)| du and integrated piecewise between kinks.
double brute_force_window(double theta, Interval i, Interval j) {
    auto overlap = [&](double u) {
        return std::max(0.0, std::min(i.end, j.end + u) - std::max(i.begin, j.begin + u));
    };
    auto f = [&](double u) { return CovarianceModel::axial_profile(u / theta) / theta * overlap(u); };
    std::vector<double> cuts = {i.begin - j.end, i.begin - j.begin, i.end - j.end, i.end - j.begin, 0.0};
    std::sort(cuts.begin(), cuts.end());
    double v = 0.0;
    for (std::size_t k = 0; k + 1 < cuts.size(); ++k)
        if (cuts[k + 1] > cuts[k]) v += gauss_kronrod<double, 61>::integrate(f, cuts[k], cuts[k + 1], 12, 1e-12);
    return v;
}

}  // namespace

TEST(Covariance, RZeroExamples) {
    EXPECT_EQ(r_zero(make_covariance(0.0), 1), 0.0);
    EXPECT_NEAR(r_zero(make_covariance(1.0), 1), 1.7724539, 1e-7);
    EXPECT_NEAR(r_zero(make_covariance(0.125), 1), 0.2215567, 1e-7);
}

TEST(Covariance, RZeroIsSpectrumIntegral) {
    const CovarianceModel cov = make_covariance(0.7);
    auto f = [&](double k) { return cov.power_spectrum(k * k) / (2.0 * pi); };
    const double v = gauss_kronrod<double, 61>::integrate(f, -200.0, 200.0, 20, 1e-14);
    EXPECT_NEAR(r_zero(cov, 1), v, 1e-12);
}

TEST(Covariance, AxialProfileHasUnitMass) {
    auto f = [](double s) { return CovarianceModel::axial_profile(s); };
    const double mass = gauss_kronrod<double, 61>::integrate(f, -100.0, 100.0, 20, 1e-15);
    EXPECT_NEAR(mass, 1.0, 1e-13);
}

TEST(ScreenCovariance, ItoDisjointIntervalsAreUncorrelated) {
    const MediumSpec m = make_medium(make_covariance(0.125), default_cutoff, make_grid(1, 64.0, 1024), ItoModel{});
    EXPECT_EQ(screen_covariance(m, {0, 0}, {0.0, 0.25}, {0.25, 0.5}), 0.0);
    EXPECT_EQ(screen_covariance(m, {3, 0}, {0.0, 0.1}, {0.6, 0.7}), 0.0);
}

TEST(ScreenCovariance, ItoReferenceValue) {
    const MediumSpec m = make_medium(make_covariance(0.125), default_cutoff, make_grid(1, 64.0, 1024), ItoModel{});
    const double dz = std::ldexp(1.0, -5);
    const double v = screen_covariance(m, {0, 0}, {0.0, dz}, {0.0, dz});
    EXPECT_NEAR(v, 2.0 * pi * (2.0 * pi / 64.0) * dz * 0.125, 1e-15);
    EXPECT_NEAR(v, 2.4087e-3, 1e-3 * 2.4087e-3);
}

TEST(ScreenCovariance, ItoOverlapLength) {
    const MediumSpec m = small_medium(1.0, ItoModel{});
    const double full = screen_covariance(m, {2, 0}, {0.0, 1.0}, {0.0, 1.0});
    EXPECT_NEAR(screen_covariance(m, {2, 0}, {0.2, 0.8}, {0.5, 1.0}), 0.3 * full, 1e-15);
}

TEST(ScreenCovariance, ModesOutsideCutoffVanish) {
    const MediumSpec m = make_medium(make_covariance(1.0), 2.0, make_grid(1, 16.0, 64), ItoModel{});
    EXPECT_GT(screen_covariance(m, {2, 0}, {0.0, 1.0}, {0.0, 1.0}), 0.0);
    EXPECT_EQ(screen_covariance(m, {3, 0}, {0.0, 1.0}, {0.0, 1.0}), 0.0);
    EXPECT_EQ(screen_covariance(m, {-3, 0}, {0.0, 1.0}, {0.0, 1.0}), 0.0);
    // Nyquist
    const MediumSpec wide = make_medium(make_covariance(1.0), 1e6, make_grid(1, 16.0, 64), ItoModel{});
    EXPECT_EQ(screen_covariance(wide, {32, 0}, {0.0, 1.0}, {0.0, 1.0}), 0.0);
}

TEST(ScreenCovariance, RejectsNegativeLength) {
    const MediumSpec m = small_medium(1.0, ItoModel{});
    EXPECT_THROW(screen_covariance(m, {0, 0}, {0.5, 0.25}, {0.0, 1.0}), ConfigError);
}

TEST(ScreenCovariance, ParaxialMatchesQuadrature) {
    const MediumSpec m = small_medium(0.5, ParaxialModel{std::ldexp(1.0, -6)});
    const double lateral = lattice_weight(m.grid) * m.cov.power_spectrum(std::pow(m.grid.dk, 2));
    const double theta = std::ldexp(1.0, -6);
    const std::vector<std::pair<Interval, Interval>> cases = {
        {{0.0, 0.03125}, {0.0, 0.03125}},
        {{0.0, 0.03125}, {0.03125, 0.0625}},
        {{0.0, 0.01}, {0.005, 0.04}},
        {{0.1, 0.2}, {0.0, 0.02}},
        {{0.0, 0.25}, {0.0, 0.125}},
    };
    for (const auto& [i, j] : cases) {
        const double expected = lateral * brute_force_window(theta, i, j);
        const double got = screen_covariance(m, {1, 0}, i, j);
        EXPECT_NEAR(got, expected, 1e-10 * lateral) << i.begin << "," << i.end << " x " << j.begin << "," << j.end;
        EXPECT_NEAR(screen_covariance(m, {1, 0}, j, i), got, 1e-15);
    }
}

TEST(ScreenCovariance, ParaxialEqualStepLagZeroFormula) {
    // (4 pi dk) theta int_0^{dz/theta} (dz/theta - s) f(s) ds Rhat(q)
    const double theta = std::ldexp(1.0, -9);
    const MediumSpec m = make_medium(make_covariance(0.125), default_cutoff, make_grid(1, 64.0, 1024),
                                     ParaxialModel{theta});
    for (double dz : {std::ldexp(1.0, -5), std::ldexp(1.0, -8), std::ldexp(1.0, -10)}) {
        const double a = dz / theta;
        auto f = [&](double s) { return (a - s) * CovarianceModel::axial_profile(s); };
        const double integral = gauss_kronrod<double, 61>::integrate(f, 0.0, a, 12, 1e-13);
        for (long l : {0L, 5L}) {
            const double rhat = m.cov.power_spectrum(std::pow(m.grid.dk * l, 2));
            const double expected = 4.0 * pi * m.grid.dk * theta * integral * rhat;
            EXPECT_NEAR(screen_covariance(m, {l, 0}, {0.0, dz}, {0.0, dz}), expected, 1e-12 * expected);
        }
    }
}

TEST(ScreenCovariance, ParaxialApproachesItoAsThetaShrinks) {
    const double len = 0.25;
    auto relative_gap = [&](double theta) {
        const MediumSpec p = small_medium(0.125, ParaxialModel{theta});
        const MediumSpec w = small_medium(0.125, ItoModel{});
        const double ito = screen_covariance(w, {0, 0}, {0.0, len}, {0.0, len});
        return std::abs(screen_covariance(p, {0, 0}, {0.0, len}, {0.0, len}) - ito) / ito;
    };
    EXPECT_LT(relative_gap(std::ldexp(1.0, -12)), 0.01);
    // first-order approach: gap halves with theta
    const double g1 = relative_gap(std::ldexp(1.0, -10));
    const double g2 = relative_gap(std::ldexp(1.0, -11));
    EXPECT_NEAR(g1 / g2, 2.0, 1e-6);
    EXPECT_NEAR(g1, 2.0 * std::sqrt(pi) * std::ldexp(1.0, -10) / len, 1e-9);
}

TEST(RetainedModes, CutoffAndPairs) {
    const MediumSpec m = make_medium(make_covariance(1.0), 2.0 * pi * 2.0, make_grid(1, 16.0, 64), ItoModel{});
    const RetainedModes r = retained_modes(m);
    // dk = 2 pi / 16, |q| <= 2 pi  ->  l = 0..16
    ASSERT_EQ(r.size(), 17u);
    EXPECT_TRUE(r.self_conjugate(0));
    for (std::size_t k = 1; k < r.size(); ++k) {
        EXPECT_FALSE(r.self_conjugate(k));
        EXPECT_EQ(m.grid.mode(r.partner[k]), -m.grid.mode(r.index[k]));
    }
    const MediumSpec m2 = make_medium(make_covariance(1.0), 1e9, make_grid(2, 8.0, 8), ItoModel{});
    const RetainedModes r2 = retained_modes(m2);
    // 7 x 7 non-Nyquist modes, one representative per pair plus the zero mode
    EXPECT_EQ(r2.size(), (49u - 1u) / 2u + 1u);
}

TEST(NoiseLadder, ZeroSigmaGivesZeroLadder) {
    for (const MediumModel& model : {MediumModel{ItoModel{}}, MediumModel{ParaxialModel{std::ldexp(1.0, -9)}}}) {
        const NoiseLadder l = sample_noise_ladder(small_medium(0.0, model), 1.0, 1.0 / 64.0, 7);
        EXPECT_EQ(l.steps(), 64u);
        for (std::size_t m = 0; m < l.steps(); ++m)
            for (const auto& c : l.step_coefficients(m)) EXPECT_EQ(c, Complex{});
    }
}

TEST(NoiseLadder, RejectsNonDivisibleStep) {
    EXPECT_THROW(sample_noise_ladder(small_medium(1.0, ItoModel{}), 1.0, 0.3, 1), ConfigError);
    EXPECT_THROW(sample_noise_ladder(small_medium(1.0, ItoModel{}), 1.0, 2.0, 1), ConfigError);
}

TEST(NoiseLadder, DeterministicInSeed) {
    const LadderSampler s(small_medium(1.0, ParaxialModel{std::ldexp(1.0, -6)}), 0.5, 1.0 / 64.0);
    const NoiseLadder a = s.sample(42);
    const NoiseLadder b = s.sample(42);
    const NoiseLadder c = s.sample(43);
    bool differs = false;
    for (std::size_t m = 0; m < a.steps(); ++m)
        for (std::size_t r = 0; r < a.modes().size(); ++r) {
            EXPECT_EQ(a.coefficient(m, r), b.coefficient(m, r));
            differs |= a.coefficient(m, r) != c.coefficient(m, r);
        }
    EXPECT_TRUE(differs);
}

TEST(NoiseLadder, SelfConjugateModeIsReal) {
    const NoiseLadder l = sample_noise_ladder(small_medium(1.0, ItoModel{}), 1.0, 1.0 / 16.0, 3);
    for (std::size_t m = 0; m < l.steps(); ++m) EXPECT_EQ(l.coefficient(m, 0).imag(), 0.0);
}

// Empirical second moments of ladder coefficients over many seeds.
struct LadderMoments {
    std::vector<double> var;       // E|w_m|^2 per representative, averaged over m
    std::vector<double> var_se;
    std::vector<Complex> lag1;     // E w_m conj(w_{m+1})
    std::vector<double> lag1_se;
    std::vector<Complex> pseudo;   // E w_m w_m
};

LadderMoments ladder_moments(const MediumSpec& spec, double Z, double dz, std::size_t samples) {
    const LadderSampler sampler(spec, Z, dz);
    const std::size_t nrep = retained_modes(spec).size();
    LadderMoments out{std::vector<double>(nrep), std::vector<double>(nrep), std::vector<Complex>(nrep),
                      std::vector<double>(nrep), std::vector<Complex>(nrep)};
    std::vector<double> v2(nrep), l2(nrep);
    for (std::size_t s = 0; s < samples; ++s) {
        const NoiseLadder l = sampler.sample(sample_seed(99, s));
        for (std::size_t r = 0; r < nrep; ++r) {
            // one pair of consecutive steps per sample keeps draws independent
            const Complex a = l.coefficient(0, r);
            const Complex b = l.coefficient(1, r);
            out.var[r] += std::norm(a);
            v2[r] += std::norm(a) * std::norm(a);
            out.lag1[r] += a * std::conj(b);
            l2[r] += std::norm(a * std::conj(b));
            out.pseudo[r] += a * a;
        }
    }
    const double n = static_cast<double>(samples);
    for (std::size_t r = 0; r < nrep; ++r) {
        out.var[r] /= n;
        out.lag1[r] /= n;
        out.pseudo[r] /= n;
        out.var_se[r] = std::sqrt((v2[r] / n - out.var[r] * out.var[r]) / n);
        out.lag1_se[r] = std::sqrt((l2[r] / n - std::norm(out.lag1[r])) / n);
    }
    return out;
}

TEST(NoiseLadder, ItoCoefficientStatistics) {
    const MediumSpec spec = small_medium(0.5, ItoModel{});
    const double dz = 1.0 / 32.0;
    const LadderMoments mo = ladder_moments(spec, 0.25, dz, 4000);
    const RetainedModes modes = retained_modes(spec);
    for (std::size_t r : {std::size_t{0}, std::size_t{1}, std::size_t{4}, std::size_t{10}}) {
        const double expected = screen_covariance(spec, modes.modes[r], {0.0, dz}, {0.0, dz});
        EXPECT_NEAR(mo.var[r], expected, 4.0 * mo.var_se[r]) << "mode " << r;
        EXPECT_LE(std::abs(mo.lag1[r]), 4.0 * mo.lag1_se[r]) << "mode " << r;
        if (r > 0) EXPECT_LE(std::abs(mo.pseudo[r]), 4.0 * expected / std::sqrt(4000.0)) << "mode " << r;
    }
}

TEST(NoiseLadder, ParaxialLagOneCorrelation) {
    const double theta = std::ldexp(1.0, -9);
    const double dz = std::ldexp(1.0, -9);
    const MediumSpec spec = small_medium(0.5, ParaxialModel{theta});
    const LadderMoments mo = ladder_moments(spec, 1.0 / 16.0, dz, 4000);
    const RetainedModes modes = retained_modes(spec);
    for (std::size_t r : {std::size_t{0}, std::size_t{1}, std::size_t{6}}) {
        const double lateral = lattice_weight(spec.grid) * spec.cov.power_spectrum(modes.k_squared[r]);
        const double var = lateral * brute_force_window(theta, {0.0, dz}, {0.0, dz});
        const double lag = lateral * brute_force_window(theta, {0.0, dz}, {dz, 2.0 * dz});
        EXPECT_GT(lag, 0.05 * var);
        EXPECT_NEAR(mo.var[r], var, 4.0 * mo.var_se[r]) << "mode " << r;
        EXPECT_NEAR(mo.lag1[r].real(), lag, 4.0 * mo.lag1_se[r]) << "mode " << r;
        EXPECT_NEAR(mo.lag1[r].imag(), 0.0, 4.0 * mo.lag1_se[r]) << "mode " << r;
    }
}

TEST(NoiseLadder, ParaxialEmbeddingIsValid) {
    const LadderSampler s(make_medium(make_covariance(0.125), default_cutoff, make_grid(1, 64.0, 1024),
                                      ParaxialModel{std::ldexp(1.0, -9)}),
                          1.0, std::ldexp(1.0, -10));
    EXPECT_GE(s.embedding_size(), 2 * s.steps());
    EXPECT_LE(s.clipped_eigenvalue(), 1e-8);
}

TEST(AggregateScreens, UnitRatioReproducesLadder) {
    const NoiseLadder l = sample_noise_ladder(small_medium(1.0, ItoModel{}), 1.0, 1.0 / 16.0, 5);
    const ScreenSet s = aggregate_screens(l, 1.0 / 16.0, 1.0);
    ASSERT_EQ(s.steps, 16u);
    ASSERT_EQ(s.subs_per_step, 1u);
    for (std::size_t n = 0; n < 16; ++n)
        for (std::size_t r = 0; r < l.modes().size(); ++r) EXPECT_EQ(s.coefficients(n, 0)[r], l.coefficient(n, r));
}

TEST(AggregateScreens, HalfScreensSumExactly) {
    for (const MediumModel& model : {MediumModel{ItoModel{}}, MediumModel{ParaxialModel{std::ldexp(1.0, -7)}}}) {
        const NoiseLadder l = sample_noise_ladder(small_medium(1.0, model), 1.0, 1.0 / 64.0, 17);
        const ScreenSet full = aggregate_screens(l, 1.0 / 8.0, 1.0);
        const ScreenSet half = aggregate_screens(l, 1.0 / 8.0, 0.5);
        ASSERT_EQ(half.subs_per_step, 2u);
        EXPECT_EQ(half.before_diffraction, 1u);
        for (std::size_t n = 0; n < full.steps; ++n)
            for (std::size_t r = 0; r < l.modes().size(); ++r)
                EXPECT_EQ(half.coefficients(n, 0)[r] + half.coefficients(n, 1)[r], full.coefficients(n, 0)[r]);
    }
}

TEST(AggregateScreens, GammaEndpointsUseOneScreen) {
    const NoiseLadder l = sample_noise_ladder(small_medium(1.0, ItoModel{}), 1.0, 1.0 / 16.0, 5);
    const ScreenSet s0 = aggregate_screens(l, 1.0 / 4.0, 0.0);
    EXPECT_EQ(s0.subs_per_step, 1u);
    EXPECT_EQ(s0.before_diffraction, 0u);
    const ScreenSet s1 = aggregate_screens(l, 1.0 / 4.0, 1.0);
    EXPECT_EQ(s1.before_diffraction, 1u);
    for (std::size_t n = 0; n < s0.steps; ++n)
        for (std::size_t r = 0; r < l.modes().size(); ++r)
            EXPECT_EQ(s0.coefficients(n, 0)[r], s1.coefficients(n, 0)[r]);
}

TEST(AggregateScreens, CoarseScreensAreSumsOfFinerOnes) {
    const NoiseLadder l = sample_noise_ladder(small_medium(1.0, ParaxialModel{std::ldexp(1.0, -6)}), 1.0,
                                              1.0 / 128.0, 23);
    const ScreenSet fine = aggregate_screens(l, 1.0 / 32.0, 1.0);
    const ScreenSet coarse = aggregate_screens(l, 1.0 / 8.0, 1.0);
    for (std::size_t n = 0; n < coarse.steps; ++n)
        for (std::size_t r = 0; r < l.modes().size(); ++r) {
            Complex s{};
            for (std::size_t k = 0; k < 4; ++k) s += fine.coefficients(4 * n + k, 0)[r];
            EXPECT_EQ(s, coarse.coefficients(n, 0)[r]);
        }
}

TEST(AggregateScreens, ItoVarianceScalesWithLength) {
    const MediumSpec spec = small_medium(1.0, ItoModel{});
    const double dz = 1.0 / 8.0;
    const RetainedModes modes = retained_modes(spec);
    EXPECT_NEAR(screen_covariance(spec, modes.modes[2], {0.0, dz}, {0.0, dz}),
                2.0 * screen_covariance(spec, modes.modes[2], {0.0, dz / 2}, {0.0, dz / 2}), 1e-15);
    const LadderSampler sampler(spec, dz, dz / 2);
    double full = 0.0, half = 0.0;
    const std::size_t n = 3000;
    for (std::size_t s = 0; s < n; ++s) {
        const NoiseLadder l = sampler.sample(sample_seed(5, s));
        const ScreenSet h = aggregate_screens(l, dz, 0.5);
        full += std::norm(h.coefficients(0, 0)[2] + h.coefficients(0, 1)[2]);
        half += std::norm(h.coefficients(0, 0)[2]);
    }
    // |w|^2 of a circular Gaussian is exponential: relative SE 1/sqrt(n), ratio SE about sqrt(2/n) * 2
    EXPECT_NEAR(full / half, 2.0, 4.0 * 2.0 * std::sqrt(2.0 / n));
}

TEST(AggregateScreens, RejectsIncompatibleSteps) {
    const NoiseLadder l = sample_noise_ladder(small_medium(1.0, ItoModel{}), 1.0, 1.0 / 16.0, 5);
    EXPECT_THROW(aggregate_screens(l, 0.1, 1.0), ConfigError);
    EXPECT_THROW(aggregate_screens(l, 1.0 / 16.0, 0.5), ConfigError);
    EXPECT_THROW(aggregate_screens(l, 1.0 / 4.0, 0.3), ConfigError);
    EXPECT_THROW(aggregate_screens(l, 3.0 / 16.0, 1.0), ConfigError);
}

TEST(ScreenField, ZeroCoefficientsGiveZeroField) {
    const NoiseLadder l = sample_noise_ladder(small_medium(0.0, ItoModel{}), 1.0, 0.25, 1);
    const RealField w = screen_field(aggregate_screens(l, 0.25, 1.0), 0, 0);
    for (double v : w.values) EXPECT_EQ(v, 0.0);
}

TEST(ScreenField, SinglePairIsCosine) {
    const NoiseLadder l = sample_noise_ladder(small_medium(0.0, ItoModel{}), 1.0, 1.0, 1);
    ScreenSet s = aggregate_screens(l, 1.0, 1.0);
    const std::size_t r = 3;
    s.coeffs[r] = 1.0;
    const RealField w = screen_field(s, 0, 0);
    const GridSpec& g = s.grid;
    const double q = g.dk * static_cast<double>(s.modes->modes[r].lx);
    double best = -1.0;
    std::size_t arg = 0;
    for (std::size_t j = 0; j < g.points; ++j) {
        EXPECT_NEAR(w[j], std::cos(q * g.coordinate(j)) / pi, 1e-14);
        if (w[j] > best + 1e-14) {
            best = w[j];
            arg = j;
        }
    }
    EXPECT_EQ(g.coordinate(arg), 0.0);
}

TEST(ScreenField, RandomScreensAreRealWithExpectedVariance) {
    const MediumSpec spec = small_medium(0.5, ItoModel{});
    const double dz = 1.0 / 16.0;
    const RetainedModes modes = retained_modes(spec);
    double expected = 0.0;
    for (std::size_t r = 0; r < modes.size(); ++r)
        expected += (modes.self_conjugate(r) ? 1.0 : 2.0) * screen_covariance(spec, modes.modes[r], {0.0, dz}, {0.0, dz});
    expected /= 4.0 * pi * pi;
    const LadderSampler sampler(spec, dz, dz);
    const std::size_t n = 3000;
    double s2 = 0.0, s4 = 0.0;
    const std::size_t probe = 17;
    for (std::size_t k = 0; k < n; ++k) {
        const RealField w = screen_field(aggregate_screens(sampler.sample(sample_seed(1, k)), dz, 1.0), 0, 0);
        s2 += w[probe] * w[probe];
        s4 += std::pow(w[probe], 4);
    }
    const double m2 = s2 / n;
    const double se = std::sqrt((s4 / n - m2 * m2) / n);
    EXPECT_NEAR(m2, expected, 4.0 * se);
}
