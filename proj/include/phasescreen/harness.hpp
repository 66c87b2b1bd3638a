#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <exception>
#include <functional>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include "phasescreen/grid.hpp"
#include "phasescreen/kappa.hpp"
#include "phasescreen/medium.hpp"
#include "phasescreen/moment_pde.hpp"
#include "phasescreen/moments.hpp"
#include "phasescreen/propagator.hpp"
#include "phasescreen/rng.hpp"

namespace phasescreen {

struct SlopeFit {
    double slope = 0.0;
    double intercept = 0.0;
    double r_squared = 0.0;
    std::vector<std::pair<double, double>> points;  ///< (log dz, log err)
};

/// Ordinary least squares of log(err) on log(dz).
inline SlopeFit fit_slope(const std::vector<std::pair<double, double>>& data) {
    detail::require(data.size() >= 2, "fit_slope: need at least two points");
    SlopeFit fit;
    for (const auto& [dz, err] : data) {
        detail::require(dz > 0.0 && err > 0.0, "fit_slope: step sizes and errors must be positive");
        fit.points.emplace_back(std::log(dz), std::log(err));
    }
    const double n = static_cast<double>(fit.points.size());
    double mx = 0.0, my = 0.0;
    for (const auto& [x, y] : fit.points) {
        mx += x;
        my += y;
    }
    mx /= n;
    my /= n;
    double sxx = 0.0, sxy = 0.0, syy = 0.0;
    for (const auto& [x, y] : fit.points) {
        sxx += (x - mx) * (x - mx);
        sxy += (x - mx) * (y - my);
        syy += (y - my) * (y - my);
    }
    detail::require(sxx > 0.0, "fit_slope: step sizes must not all be equal");
    fit.slope = sxy / sxx;
    fit.intercept = my - fit.slope * mx;
    double ss_res = 0.0;
    for (const auto& [x, y] : fit.points) {
        const double r = y - fit.intercept - fit.slope * x;
        ss_res += r * r;
    }
    fit.r_squared = syy > 0.0 ? std::clamp(1.0 - ss_res / syy, 0.0, 1.0) : 1.0;
    return fit;
}

namespace detail {

inline std::string number(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.12g", v);
    return buf;
}

/// Smallest r in [1, 1024] with gamma * r an integer (0 if none).
inline std::size_t gamma_refinement(double gamma) {
    for (std::size_t r = 1; r <= 1024; ++r) {
        const double v = gamma * static_cast<double>(r);
        if (std::abs(v - std::round(v)) <= 1e-9 * std::max(1.0, v)) return r;
    }
    return 0;
}

/// Fine ladder subdivision of the reference step; `requested` 0 means automatic.
inline std::size_t ladder_subdivision(double gamma, std::size_t requested) {
    if (requested == 0) {
        const std::size_t r = gamma_refinement(gamma);
        require(r > 0, "gamma " + number(gamma) + " is not a ratio with a small denominator");
        return r;
    }
    const double v = gamma * static_cast<double>(requested);
    require(std::abs(v - std::round(v)) <= 1e-9 * std::max(1.0, v),
            "gamma=" + number(gamma) + " is incompatible with ladder_refine=" + std::to_string(requested) +
                ": gamma*dz must be a multiple of the fine ladder step");
    return requested;
}

/// Runs body(chunk) for chunk = 0..chunks-1 on up to `threads` workers.
/// Results are written per chunk, so the outcome does not depend on scheduling.
inline void parallel_chunks(std::size_t chunks, std::size_t threads, const std::function<void(std::size_t)>& body) {
    threads = std::max<std::size_t>(1, std::min(threads, chunks));
    if (threads == 1) {
        for (std::size_t c = 0; c < chunks; ++c) body(c);
        return;
    }
    std::mutex mutex;
    std::size_t next = 0;
    std::exception_ptr error;
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < threads; ++t) {
        pool.emplace_back([&] {
            for (;;) {
                std::size_t c;
                {
                    std::lock_guard<std::mutex> lock(mutex);
                    if (next >= chunks || error) return;
                    c = next++;
                }
                try {
                    body(c);
                } catch (...) {
                    std::lock_guard<std::mutex> lock(mutex);
                    if (!error) error = std::current_exception();
                }
            }
        });
    }
    for (auto& th : pool) th.join();
    if (error) std::rethrow_exception(error);
}

inline std::pair<std::size_t, std::size_t> chunk_range(std::size_t samples, std::size_t chunks, std::size_t c) {
    return {samples * c / chunks, samples * (c + 1) / chunks};
}

}  // namespace detail

struct SweepConfig {
    MediumSpec medium;
    Kappa1Profile kappa1;
    double gamma = 1.0;
    double Z = 1.0;
    std::vector<double> dz_list;
    double dz_ref = 0.0;
    std::size_t samples = 0;
    std::uint64_t seed = 0;
    std::size_t ladder_refine = 0;  ///< fine ladder steps per reference step; 0 = automatic
    std::vector<int> powers{2, 4};
    std::vector<int> fourier_modes{1, 3, 5};
    std::size_t threads = 1;
    std::size_t chunks = 4;  ///< fixed work units; results do not depend on `threads`
};

struct SweepPoint {
    double dz = 0.0;
    double error = 0.0;
    double std_error = 0.0;
    std::size_t samples = 0;
};

enum class MomentErrorKind { sup, fourier };

struct MomentSweepPoint {
    double dz = 0.0;
    MomentErrorKind kind = MomentErrorKind::sup;
    int p = 2;
    int m = 0;
    double error = 0.0;
    double std_error = 0.0;
    std::size_t samples = 0;
};

struct SweepResult {
    std::vector<SweepPoint> pathwise;
    std::vector<MomentSweepPoint> moments;
};

inline void validate_sweep(const SweepConfig& cfg) {
    detail::require(cfg.samples >= 1, "sweep: samples must be at least 1");
    detail::require(cfg.Z > 0.0, "sweep: Z must be positive");
    detail::require(cfg.gamma >= 0.0 && cfg.gamma <= 1.0, "sweep: gamma must lie in [0, 1]");
    detail::require(!cfg.dz_list.empty(), "sweep: dz_list is empty");
    detail::require(cfg.chunks >= 1, "sweep: chunks must be positive");
    std::size_t r = 0;
    detail::require(detail::is_integer_ratio(cfg.Z, cfg.dz_ref, r), "sweep: dz_ref must divide Z");
    detail::ladder_subdivision(cfg.gamma, cfg.ladder_refine);
    for (const double dz : cfg.dz_list) {
        detail::require(detail::is_integer_ratio(dz, cfg.dz_ref, r),
                        "sweep: dz_ref=" + detail::number(cfg.dz_ref) + " does not divide dz=" + detail::number(dz));
        detail::require(detail::is_integer_ratio(cfg.Z, dz, r), "sweep: dz=" + detail::number(dz) + " does not divide Z");
    }
    for (const int p : cfg.powers) detail::require(p >= 1, "sweep: moment powers must be positive");
    cfg.kappa1.validate_positive(cfg.Z);
}

namespace detail {

// Per-chunk sums of coupled differences, indexed by (dz, n).
struct CoupledSums {
    struct Level {
        std::size_t ratio = 0;  ///< dz / dz_ref
        std::size_t steps = 0;
        std::vector<double> path, path_sq;                 ///< [n]
        std::vector<double> diff, diff_sq;                 ///< [(n * P + p) * size + j]
        std::vector<Complex> proj;                         ///< [(n * P + p) * M + m]
        std::vector<double> proj_sq;
    };
    std::vector<Level> levels;
    std::size_t count = 0;

    void merge(const CoupledSums& o) {
        for (std::size_t a = 0; a < levels.size(); ++a) {
            auto add = [](auto& dst, const auto& src) {
                for (std::size_t k = 0; k < dst.size(); ++k) dst[k] += src[k];
            };
            add(levels[a].path, o.levels[a].path);
            add(levels[a].path_sq, o.levels[a].path_sq);
            add(levels[a].diff, o.levels[a].diff);
            add(levels[a].diff_sq, o.levels[a].diff_sq);
            add(levels[a].proj, o.levels[a].proj);
            add(levels[a].proj_sq, o.levels[a].proj_sq);
        }
        count += o.count;
    }
};

inline double fourier_phase_x(const GridSpec& g, std::size_t i) { return g.coordinate(g.dim == 1 ? i : i / g.points); }

}  // namespace detail

/// Coupled dz sweep: every sample draws one ladder at the fine step, and the
/// reference (dz_ref) and each coarse dz propagate aggregations of it.
inline SweepResult coupled_sweep(const SweepConfig& cfg, bool want_pathwise = true, bool want_moments = true) {
    validate_sweep(cfg);
    const GridSpec& g = cfg.medium.grid;
    const std::size_t sub = detail::ladder_subdivision(cfg.gamma, cfg.ladder_refine);
    const double dz_fine = cfg.dz_ref / static_cast<double>(sub);
    const LadderSampler sampler(cfg.medium, cfg.Z, dz_fine);
    std::size_t ref_steps = 0;
    detail::is_integer_ratio(cfg.Z, cfg.dz_ref, ref_steps);
    const SplittingSpec ref_spec = make_splitting(cfg.Z, ref_steps, cfg.gamma, cfg.kappa1, cfg.medium.model);
    std::vector<SplittingSpec> specs;
    detail::CoupledSums proto;
    const std::size_t P = want_moments ? cfg.powers.size() : 0;
    const std::size_t M = cfg.fourier_modes.size();
    const std::size_t size = g.size();
    for (const double dz : cfg.dz_list) {
        detail::CoupledSums::Level lv;
        detail::is_integer_ratio(dz, cfg.dz_ref, lv.ratio);
        detail::is_integer_ratio(cfg.Z, dz, lv.steps);
        specs.push_back(make_splitting(cfg.Z, lv.steps, cfg.gamma, cfg.kappa1, cfg.medium.model));
        const std::size_t nz = lv.steps + 1;
        if (want_pathwise) lv.path.assign(nz, 0.0), lv.path_sq.assign(nz, 0.0);
        lv.diff.assign(nz * P * size, 0.0);
        lv.diff_sq.assign(nz * P * size, 0.0);
        lv.proj.assign(nz * P * M, Complex{});
        lv.proj_sq.assign(nz * P * M, 0.0);
        proto.levels.push_back(std::move(lv));
    }
    std::vector<std::vector<double>> phase_re(M), phase_im(M);
    for (std::size_t m = 0; m < M; ++m) {
        phase_re[m].resize(size);
        phase_im[m].resize(size);
        for (std::size_t i = 0; i < size; ++i) {
            const double ph = cfg.fourier_modes[m] * std::numbers::pi * detail::fourier_phase_x(g, i) / g.length;
            phase_re[m][i] = std::cos(ph) * g.cell_volume();
            phase_im[m][i] = std::sin(ph) * g.cell_volume();
        }
    }

    const std::size_t chunks = std::min(cfg.chunks, cfg.samples);
    std::vector<detail::CoupledSums> partial(chunks, proto);
    detail::parallel_chunks(chunks, cfg.threads, [&](std::size_t c) {
        detail::CoupledSums& acc = partial[c];
        Propagator ref_prop(ref_spec, g);
        std::vector<Propagator> props;
        for (const auto& s : specs) props.emplace_back(s, g);
        std::vector<ComplexField> ref_traj(ref_steps + 1);
        std::vector<double> d(size);
        const auto [lo, hi] = detail::chunk_range(cfg.samples, chunks, c);
        for (std::size_t i = lo; i < hi; ++i) {
            const NoiseLadder ladder = sampler.sample(sample_seed(cfg.seed, i));
            ComplexField u = gaussian_beam(g);
            ref_prop.run(u, aggregate_screens(ladder, cfg.dz_ref, cfg.gamma),
                         [&](std::size_t n, const ComplexField& f) { ref_traj[n] = f; });
            for (std::size_t a = 0; a < specs.size(); ++a) {
                auto& lv = acc.levels[a];
                ComplexField v = gaussian_beam(g);
                props[a].run(v, aggregate_screens(ladder, cfg.dz_list[a], cfg.gamma),
                             [&](std::size_t n, const ComplexField& f) {
                                 const ComplexField& r = ref_traj[n * lv.ratio];
                                 if (want_pathwise) {
                                     const double e = l2_distance(f, r);
                                     lv.path[n] += e * e;
                                     lv.path_sq[n] += e * e * e * e;
                                 }
                                 for (std::size_t p = 0; p < P; ++p) {
                                     const int pw = cfg.powers[p];
                                     double* ds = lv.diff.data() + (n * P + p) * size;
                                     double* dq = lv.diff_sq.data() + (n * P + p) * size;
                                     for (std::size_t j = 0; j < size; ++j) {
                                         const double x = intensity_power(f[j], pw) - intensity_power(r[j], pw);
                                         d[j] = x;
                                         ds[j] += x;
                                         dq[j] += x * x;
                                     }
                                     for (std::size_t m = 0; m < M; ++m) {
                                         double re = 0.0, im = 0.0;
                                         for (std::size_t j = 0; j < size; ++j) {
                                             re += d[j] * phase_re[m][j];
                                             im += d[j] * phase_im[m][j];
                                         }
                                         lv.proj[(n * P + p) * M + m] += Complex(re, im);
                                         lv.proj_sq[(n * P + p) * M + m] += re * re + im * im;
                                     }
                                 }
                             });
            }
            ++acc.count;
        }
    });
    detail::CoupledSums total = partial.front();
    for (std::size_t c = 1; c < chunks; ++c) total.merge(partial[c]);

    const double ns = static_cast<double>(total.count);
    SweepResult out;
    // sup-norm errors use the central half N/4 <= j <= 3N/4 of every axis
    auto in_central = [&](std::size_t j) {
        auto ok = [&](std::size_t k) { return k >= g.points / 4 && k <= 3 * g.points / 4; };
        return g.dim == 1 ? ok(j) : ok(j / g.points) && ok(j % g.points);
    };
    for (std::size_t a = 0; a < specs.size(); ++a) {
        const auto& lv = total.levels[a];
        if (want_pathwise) {
            SweepPoint pt{cfg.dz_list[a], 0.0, 0.0, total.count};
            for (std::size_t n = 1; n <= lv.steps; ++n) {
                const double mean = lv.path[n] / ns;
                const double err = std::sqrt(mean);
                if (err >= pt.error) {
                    pt.error = err;
                    const double var = ns > 1 ? std::max(0.0, lv.path_sq[n] / ns - mean * mean) / (ns - 1.0) : 0.0;
                    pt.std_error = err > 0.0 ? std::sqrt(var) / (2.0 * err) : 0.0;
                }
            }
            out.pathwise.push_back(pt);
        }
        for (std::size_t p = 0; p < P; ++p) {
            MomentSweepPoint sup{cfg.dz_list[a], MomentErrorKind::sup, cfg.powers[p], 0, 0.0, 0.0, total.count};
            std::vector<MomentSweepPoint> four;
            for (std::size_t m = 0; m < M; ++m)
                four.push_back({cfg.dz_list[a], MomentErrorKind::fourier, cfg.powers[p], cfg.fourier_modes[m], 0.0, 0.0,
                                total.count});
            for (std::size_t n = 1; n <= lv.steps; ++n) {
                const double* ds = lv.diff.data() + (n * P + p) * size;
                const double* dq = lv.diff_sq.data() + (n * P + p) * size;
                for (std::size_t j = 0; j < size; ++j) {
                    if (!in_central(j)) continue;
                    const double mean = ds[j] / ns;
                    if (std::abs(mean) >= sup.error) {
                        sup.error = std::abs(mean);
                        sup.std_error = ns > 1 ? std::sqrt(std::max(0.0, dq[j] / ns - mean * mean) / (ns - 1.0)) : 0.0;
                    }
                }
                for (std::size_t m = 0; m < M; ++m) {
                    const Complex mean = lv.proj[(n * P + p) * M + m] / ns;
                    const double e = std::abs(mean);
                    if (e >= four[m].error) {
                        four[m].error = e;
                        const double var = std::max(0.0, lv.proj_sq[(n * P + p) * M + m] / ns - std::norm(mean));
                        four[m].std_error = ns > 1 ? std::sqrt(var / (ns - 1.0)) : 0.0;
                    }
                }
            }
            out.moments.push_back(sup);
            for (const auto& f : four) out.moments.push_back(f);
        }
    }
    return out;
}

inline std::vector<SweepPoint> pathwise_error_sweep(const SweepConfig& cfg) { return coupled_sweep(cfg, true, false).pathwise; }

inline std::vector<MomentSweepPoint> moment_error_sweep(const SweepConfig& cfg) {
    return coupled_sweep(cfg, false, true).moments;
}

struct StrangPoint {
    double dz = 0.0;
    double error = 0.0;
};

struct StrangResult {
    std::vector<StrangPoint> points;
    SlopeFit fit;
};

/// Deterministic splitting-order check: sup over z_n and x of the diagonal
/// discrepancy between the Split{gamma} and Continuous moment PDE solutions.
inline StrangResult strang_order_sweep(const GridSpec& grid, const CovarianceModel& cov, const Kappa1Profile& kappa1,
                                       double Z, const std::vector<double>& dz_list, double gamma,
                                       double cutoff = std::numeric_limits<double>::infinity(),
                                       std::size_t substeps = 16) {
    detail::require(!dz_list.empty(), "strang_order_sweep: dz_list is empty");
    StrangResult out;
    MomentPdeSolver solver(grid, cov, kappa1, cutoff);
    for (const double dz : dz_list) {
        std::size_t steps = 0;
        detail::require(detail::is_integer_ratio(Z, dz, steps), "strang_order_sweep: dz must divide Z");
        std::vector<std::vector<double>> reference(steps + 1, std::vector<double>(grid.points));
        solver.run(Z, steps, ContinuousPhi{substeps}, [&](std::size_t n, const Mu11Field& mu) {
            for (std::size_t i = 0; i < grid.points; ++i) reference[n][i] = mu.diagonal(i).real();
        });
        double err = 0.0;
        solver.run(Z, steps, SplitPhi{gamma}, [&](std::size_t n, const Mu11Field& mu) {
            for (std::size_t i = 0; i < grid.points; ++i)
                err = std::max(err, std::abs(mu.diagonal(i).real() - reference[n][i]));
        });
        out.points.push_back({dz, err});
    }
    std::vector<std::pair<double, double>> data;
    for (const auto& p : out.points)
        if (p.error > 0.0) data.emplace_back(p.dz, p.error);
    if (data.size() >= 2) out.fit = fit_slope(data);
    return out;
}

/// Plain Monte Carlo over independent realizations at a single step size.
struct MonteCarloConfig {
    MediumSpec medium;
    Kappa1Profile kappa1;
    double gamma = 1.0;
    double Z = 1.0;
    std::size_t steps = 1;
    std::size_t samples = 0;
    std::uint64_t seed = 0;
    std::size_t ladder_refine = 0;
    std::size_t threads = 1;
    std::size_t chunks = 32;
    std::vector<ProjectionSpec> projections;
};

/// Per-chunk accumulators [chunk][k] for the requested snapshot indices.
inline std::vector<std::vector<MomentAccumulator>> monte_carlo(const MonteCarloConfig& cfg,
                                                               const std::vector<std::size_t>& snapshots) {
    detail::require(cfg.samples >= 1, "monte carlo: samples must be at least 1");
    detail::require(cfg.chunks >= 1, "monte carlo: chunks must be positive");
    for (const auto s : snapshots) detail::require(s <= cfg.steps, "monte carlo: snapshot beyond final step");
    const GridSpec& g = cfg.medium.grid;
    const SplittingSpec spec = make_splitting(cfg.Z, cfg.steps, cfg.gamma, cfg.kappa1, cfg.medium.model);
    const std::size_t sub = detail::ladder_subdivision(cfg.gamma, cfg.ladder_refine);
    const LadderSampler sampler(cfg.medium, cfg.Z, spec.dz / static_cast<double>(sub));
    std::vector<std::vector<std::size_t>> slot(cfg.steps + 1);
    for (std::size_t k = 0; k < snapshots.size(); ++k) slot[snapshots[k]].push_back(k);
    const std::size_t chunks = std::min(cfg.chunks, cfg.samples);
    std::vector<std::vector<MomentAccumulator>> out(
        chunks, std::vector<MomentAccumulator>(snapshots.size(), MomentAccumulator(g, cfg.projections)));
    detail::parallel_chunks(chunks, cfg.threads, [&](std::size_t c) {
        Propagator prop(spec, g);
        const auto [lo, hi] = detail::chunk_range(cfg.samples, chunks, c);
        for (std::size_t i = lo; i < hi; ++i) {
            const NoiseLadder ladder = sampler.sample(sample_seed(cfg.seed, i));
            ComplexField u = gaussian_beam(g);
            prop.run(u, aggregate_screens(ladder, spec.dz, cfg.gamma), [&](std::size_t n, const ComplexField& f) {
                for (const auto k : slot[n]) out[c][k].accumulate(f);
            });
        }
    });
    return out;
}

inline std::vector<MomentAccumulator> merge_chunks(const std::vector<std::vector<MomentAccumulator>>& parts) {
    std::vector<MomentAccumulator> total = parts.front();
    for (std::size_t c = 1; c < parts.size(); ++c)
        for (std::size_t k = 0; k < total.size(); ++k) total[k].merge(parts[c][k]);
    return total;
}

struct ScintillationPoint {
    double sigma = 0.0;
    std::size_t n = 0;
    double z = 0.0;
    double index = 0.0;
    double std_error = 0.0;  ///< batch-means standard error over chunks
    std::size_t samples = 0;
};

/// Scintillation index at the beam center at every z_n for each sigma.
inline std::vector<ScintillationPoint> scintillation_sweep(const MonteCarloConfig& cfg,
                                                           const std::vector<double>& sigma_list) {
    std::vector<ScintillationPoint> out;
    std::vector<std::size_t> snaps(cfg.steps);
    for (std::size_t n = 0; n < cfg.steps; ++n) snaps[n] = n + 1;
    const std::size_t center = center_index(cfg.medium.grid);
    for (const double sigma : sigma_list) {
        MonteCarloConfig c = cfg;
        c.medium.cov = make_covariance(sigma);
        const auto parts = monte_carlo(c, snaps);
        const auto total = merge_chunks(parts);
        const double nb = static_cast<double>(parts.size());
        for (std::size_t k = 0; k < snaps.size(); ++k) {
            ScintillationPoint pt;
            pt.sigma = sigma;
            pt.n = snaps[k];
            pt.z = static_cast<double>(snaps[k]) * cfg.Z / static_cast<double>(cfg.steps);
            pt.samples = total[k].count();
            pt.index = total[k].count() >= 2 ? scintillation_index(total[k], center) : 0.0;
            if (parts.size() >= 2) {
                double s1 = 0.0, s2 = 0.0;
                for (const auto& part : parts) {
                    const double s = part[k].count() >= 2 ? scintillation_index(part[k], center) : 0.0;
                    s1 += s;
                    s2 += s * s;
                }
                const double mean = s1 / nb;
                pt.std_error = std::sqrt(std::max(0.0, s2 / nb - mean * mean) / (nb - 1.0));
            }
            out.push_back(pt);
        }
    }
    return out;
}

}  // namespace phasescreen
