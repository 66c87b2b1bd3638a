// Command-line runner: phasescreen <command> [--config file] [--key value ...]

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include "phasescreen/phasescreen.hpp"

namespace ps = phasescreen;
namespace fs = std::filesystem;

namespace {

using ps::detail::format_double;

struct Outputs {
    fs::path dir;
    std::vector<std::string> checks;
    bool failed = false;

    void check(const std::string& name, double value, double tolerance, bool ok) {
        checks.push_back("# check " + name + " = " + format_double(value) + " tolerance " + format_double(tolerance) +
                         (ok ? " pass" : " FAIL"));
        failed = failed || !ok;
    }

    void note(const std::string& line) { checks.push_back("# " + line); }
};

std::ofstream open_out(const fs::path& p) {
    std::ofstream out(p);
    if (!out) throw ps::NumericalError("cannot write '" + p.string() + "'");
    return out;
}

void write_manifest(const Outputs& o, const ps::RunConfig& cfg, const std::string& command) {
    auto out = open_out(o.dir / "manifest.txt");
    out << "# phasescreen " << ps::version << "\n# command = " << command << "\n";
    out << ps::serialize_config(cfg);
    for (const auto& c : o.checks) out << c << "\n";
}

std::string slope_line(const std::string& what, const ps::SlopeFit& f) {
    return "fit " + what + " slope = " + format_double(f.slope) + " r_squared = " + format_double(f.r_squared);
}

/// Fine ladder step for a single-step-size run.
double ladder_step(const ps::RunConfig& cfg) {
    const std::size_t sub = ps::detail::ladder_subdivision(cfg.gamma, cfg.ladder_refine);
    return cfg.Z / static_cast<double>(cfg.steps) / static_cast<double>(sub);
}

void cmd_propagate(const ps::RunConfig& cfg, Outputs& o) {
    const ps::MediumSpec medium = ps::config_medium(cfg);
    const ps::Kappa1Profile kappa = ps::parse_kappa1(cfg.kappa1);
    const ps::SplittingSpec spec = ps::make_splitting(cfg.Z, cfg.steps, cfg.gamma, kappa, medium.model);
    const ps::NoiseLadder ladder = ps::sample_noise_ladder(medium, cfg.Z, ladder_step(cfg), cfg.seed);
    const ps::ScreenSet screens = ps::aggregate_screens(ladder, spec.dz, cfg.gamma);
    const ps::ComplexField u0 = ps::gaussian_beam(medium.grid);
    const auto snaps = ps::config_snapshots(cfg);
    auto wanted = snaps;
    wanted.push_back(cfg.steps);
    auto fields = ps::propagate(u0, screens, spec, wanted);
    const ps::ComplexField final_field = fields.back();
    fields.pop_back();

    ps::write_snapshots((o.dir / "snapshots.bspf").string(), {medium.grid, cfg.Z, spec.dz, fields});
    auto csv = open_out(o.dir / "propagate.csv");
    csv << "n,z,l2_norm,center_re,center_im\n";
    const std::size_t c = ps::center_index(medium.grid);
    for (std::size_t k = 0; k < fields.size(); ++k) {
        csv << snaps[k] << "," << format_double(static_cast<double>(snaps[k]) * spec.dz) << ","
            << format_double(ps::l2_norm(fields[k])) << "," << format_double(fields[k][c].real()) << ","
            << format_double(fields[k][c].imag()) << "\n";
    }
    const double n0 = ps::l2_norm(u0);
    double drift = 0.0;
    for (const auto& f : fields) drift = std::max(drift, std::abs(ps::l2_norm(f) - n0) / n0);
    o.check("l2_norm_drift", drift, 1e-10, drift <= 1e-10);
    if (cfg.sigma == 0.0) {
        const ps::ComplexField ref = ps::free_space_field(medium.grid, ps::chi(kappa, 0.0, cfg.Z));
        const double err = ps::l2_distance(final_field, ref) / ps::l2_norm(ref);
        o.check("free_space_rel_l2", err, 1e-8, err <= 1e-8);
        double worst = 0.0;
        for (std::size_t i = 0; i < ref.size(); ++i) worst = std::max(worst, std::abs(final_field[i] - ref[i]));
        o.check("free_space_max_abs", worst, 1e-8, worst <= 1e-8);
    }
}

void cmd_sweep_pathwise(const ps::RunConfig& cfg, Outputs& o) {
    const auto pts = ps::pathwise_error_sweep(ps::config_sweep(cfg));
    auto csv = open_out(o.dir / "sweep_pathwise.csv");
    csv << "dz,err,stderr,samples\n";
    std::vector<std::pair<double, double>> data;
    for (const auto& p : pts) {
        csv << format_double(p.dz) << "," << format_double(p.error) << "," << format_double(p.std_error) << ","
            << p.samples << "\n";
        if (p.error > 0.0) data.emplace_back(p.dz, p.error);
    }
    if (data.size() >= 2) o.note(slope_line("pathwise_rms", ps::fit_slope(data)));
}

void cmd_sweep_moments(const ps::RunConfig& cfg, Outputs& o) {
    const auto pts = ps::moment_error_sweep(ps::config_sweep(cfg));
    auto wanted = [&](const std::string& k) {
        return std::find(cfg.error_kinds.begin(), cfg.error_kinds.end(), k) != cfg.error_kinds.end();
    };
    auto csv = open_out(o.dir / "sweep_moments.csv");
    csv << "dz,kind,p,m,err,stderr,samples\n";
    std::map<std::string, std::vector<std::pair<double, double>>> series;
    for (const auto& p : pts) {
        const std::string kind = p.kind == ps::MomentErrorKind::sup ? "moment_sup" : "fourier_mode";
        if (!wanted(kind)) continue;
        csv << format_double(p.dz) << "," << kind << "," << p.p << "," << p.m << "," << format_double(p.error) << ","
            << format_double(p.std_error) << "," << p.samples << "\n";
        if (p.error > 0.0)
            series[kind + " p=" + std::to_string(p.p) + " m=" + std::to_string(p.m)].emplace_back(p.dz, p.error);
    }
    for (const auto& [name, data] : series)
        if (data.size() >= 2) o.note(slope_line(name, ps::fit_slope(data)));
}

void cmd_strang_order(const ps::RunConfig& cfg, Outputs& o) {
    const ps::GridSpec g = ps::config_grid(cfg);
    ps::detail::require(g.dim == 1, "strang-order requires dim = 1");
    const auto res = ps::strang_order_sweep(g, ps::make_covariance(cfg.sigma), ps::parse_kappa1(cfg.kappa1), cfg.Z,
                                            cfg.strang_dz_list, cfg.gamma, cfg.cutoff, cfg.substeps);
    auto csv = open_out(o.dir / "strang_order.csv");
    csv << "dz,err\n";
    for (const auto& p : res.points) csv << format_double(p.dz) << "," << format_double(p.error) << "\n";
    if (res.fit.points.size() >= 2) o.note(slope_line("strang gamma=" + format_double(cfg.gamma), res.fit));
}

void cmd_oracle_mu11(const ps::RunConfig& cfg, Outputs& o) {
    const ps::GridSpec g = ps::config_grid(cfg);
    ps::detail::require(g.dim == 1, "oracle-mu11 requires dim = 1");
    ps::MomentPdeSolver solver(g, ps::make_covariance(cfg.sigma), ps::parse_kappa1(cfg.kappa1), cfg.cutoff);
    ps::Mu11Field last;
    double trace_drift = 0.0, herm = 0.0;
    double trace0 = 0.0;
    solver.run(cfg.Z, cfg.steps, ps::ContinuousPhi{cfg.substeps}, [&](std::size_t n, const ps::Mu11Field& mu) {
        const double t = ps::mu11_trace(mu);
        if (n == 0) trace0 = t;
        trace_drift = std::max(trace_drift, std::abs(t - trace0));
        herm = std::max(herm, ps::hermitian_defect(mu));
        if (n == cfg.steps) last = mu;
    });
    auto csv = open_out(o.dir / "oracle_mu11.csv");
    csv << "x,analytic,pde,abs_diff\n";
    double worst = 0.0;
    const bool analytic_ok = ps::parse_kappa1(cfg.kappa1).is_constant() && ps::parse_kappa1(cfg.kappa1)(0.0) == 1.0;
    for (std::size_t i = 0; i < g.points; ++i) {
        const double x = g.coordinate(i);
        const double pde = last.diagonal(i).real();
        const double an = analytic_ok ? ps::analytic_second_moment(cfg.Z, x, cfg.sigma) : 0.0;
        if (i >= g.points / 4 && i <= 3 * g.points / 4) worst = std::max(worst, std::abs(an - pde));
        csv << format_double(x) << "," << format_double(an) << "," << format_double(pde) << ","
            << format_double(std::abs(an - pde)) << "\n";
    }
    o.check("mu11_trace_drift", trace_drift, 1e-8, trace_drift <= 1e-8);
    o.check("mu11_hermitian_defect", herm, 1e-10, herm <= 1e-10);
    if (analytic_ok) o.check("mu11_analytic_vs_pde", worst, 1e-4, worst <= 1e-4);
}

void cmd_scintillation(const ps::RunConfig& cfg, Outputs& o) {
    const auto pts = ps::scintillation_sweep(ps::config_monte_carlo(cfg), cfg.sigma_list);
    auto csv = open_out(o.dir / "scintillation.csv");
    csv << "sigma,n,z,S,stderr,samples\n";
    for (const auto& p : pts)
        csv << format_double(p.sigma) << "," << p.n << "," << format_double(p.z) << "," << format_double(p.index) << ","
            << format_double(p.std_error) << "," << p.samples << "\n";
    o.note("scintillation batches = " + std::to_string(cfg.batches));
}

void cmd_selftest(const ps::RunConfig& cfg, Outputs& o) {
    (void)cfg;
    auto report = [&](const std::string& name, double value, double tol) {
        const bool ok = value <= tol;
        std::cout << (ok ? "PASS " : "FAIL ") << name << " = " << format_double(value) << " (<= " << format_double(tol)
                  << ")\n";
        o.check(name, value, tol, ok);
    };
    const ps::GridSpec g = ps::make_grid(1, 64.0, 1024);
    {
        ps::ComplexField f(g);
        ps::CounterStream rng(ps::derive_key(7, 1));
        boost::random::normal_distribution<double> normal;
        for (auto& v : f.values) v = {normal(rng), normal(rng)};
        const auto back = ps::inverse_transform(ps::forward_transform(f));
        report("fft_round_trip", ps::l2_distance(back, f) / ps::l2_norm(f), 1e-12);
    }
    const ps::ComplexField u0 = ps::gaussian_beam(g);
    {
        const ps::MediumSpec m = ps::make_medium(ps::make_covariance(0.0), 2.0 * std::numbers::pi * 16.0, g, ps::ItoModel{});
        const auto spec = ps::make_splitting(1.0, 64, 1.0, ps::Kappa1Profile{}, m.model);
        const auto screens = ps::aggregate_screens(ps::sample_noise_ladder(m, 1.0, 1.0 / 64, 1), 1.0 / 64, 1.0);
        const auto u = ps::propagate(u0, screens, spec, {64}).front();
        const auto ref = ps::free_space_field(g, 1.0);
        report("free_space_rel_l2", ps::l2_distance(u, ref) / ps::l2_norm(ref), 1e-8);
    }
    {
        const ps::MediumSpec m =
            ps::make_medium(ps::make_covariance(0.125), 2.0 * std::numbers::pi * 16.0, g, ps::ParaxialModel{1.0 / 512});
        const auto ladder = ps::sample_noise_ladder(m, 1.0, 1.0 / 256, 3);
        const auto fine = ps::aggregate_screens(ladder, 1.0 / 128, 1.0);
        const auto coarse = ps::aggregate_screens(ladder, 1.0 / 32, 1.0);
        double mismatch = 0.0;
        for (std::size_t n = 0; n < coarse.steps; ++n) {
            for (std::size_t r = 0; r < coarse.modes->size(); ++r) {
                ps::Complex s{};
                for (std::size_t k = 0; k < 4; ++k) s += fine.coefficients(4 * n + k, 0)[r];
                mismatch = std::max(mismatch, std::abs(s - coarse.coefficients(n, 0)[r]));
            }
        }
        report("coupling_bit_identity", mismatch, 0.0);
        double imag = 0.0;
        for (std::size_t n = 0; n < coarse.steps; ++n) {
            ps::SpectralField sp;
            ps::screen_spectrum(coarse, n, 0, sp);
            const auto w = ps::inverse_transform(sp);
            for (const auto& v : w.values) imag = std::max(imag, std::abs(v.imag()));
        }
        report("screen_realness", imag, 1e-12);
        const auto spec = ps::make_splitting(1.0, 128, 1.0, ps::Kappa1Profile{}, m.model);
        const auto snaps = ps::propagate(u0, fine, spec, {0, 32, 64, 128});
        double drift = 0.0;
        for (const auto& f : snaps) drift = std::max(drift, std::abs(ps::l2_norm(f) - ps::l2_norm(u0)));
        report("l2_conservation", drift, 1e-10);
    }
    {
        const ps::GridSpec small = ps::make_grid(1, 16.0, 64);
        ps::MomentPdeSolver solver(small, ps::make_covariance(0.125), ps::Kappa1Profile{},
                                   std::numeric_limits<double>::infinity());
        double t0 = 0.0, drift = 0.0;
        solver.run(1.0, 32, ps::SplitPhi{0.5}, [&](std::size_t n, const ps::Mu11Field& mu) {
            if (n == 0) t0 = ps::mu11_trace(mu);
            drift = std::max(drift, std::abs(ps::mu11_trace(mu) - t0));
        });
        report("mu11_trace_drift", drift, 1e-8);
    }
    {
        const ps::RunConfig defaults;
        report("config_round_trip", ps::parse_config_text(ps::serialize_config(defaults)) == defaults ? 0.0 : 1.0, 0.0);
        report("chi_split_midpoint_affine",
               std::abs(ps::chi_split(ps::AffineKappa{1.0, 2.0}, 0.5, 0.125, 0.0, 1.0) -
                        ps::chi(ps::AffineKappa{1.0, 2.0}, 0.0, 1.0)),
               1e-14);
    }
}

const char* csv_help =
    "CSV outputs (written to output_dir, 17 significant digits):\n"
    "  propagate       propagate.csv       n,z,l2_norm,center_re,center_im  (+ snapshots.bspf)\n"
    "  sweep-pathwise  sweep_pathwise.csv  dz,err,stderr,samples\n"
    "  sweep-moments   sweep_moments.csv   dz,kind,p,m,err,stderr,samples  (kind: moment_sup | fourier_mode)\n"
    "  strang-order    strang_order.csv    dz,err\n"
    "  oracle-mu11     oracle_mu11.csv     x,analytic,pde,abs_diff\n"
    "  scintillation   scintillation.csv   sigma,n,z,S,stderr,samples\n"
    "Every command also writes manifest.txt (resolved config, version, checks).\n"
    "BSPF snapshots: \"BSPF\", u16 version, u32 d, u32 N_x per axis, u32 count, f64 L, Z, dz,\n"
    "then interleaved little-endian (re, im) f64 pairs, row-major.\n"
    "Exit codes: 0 success, 1 invalid configuration, 2 runtime error, 3 selftest failure.";

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Split-step phase-screen propagation of beams in random media"};
    app.footer(csv_help);
    app.require_subcommand(1, 1);
    std::string config_path;
    app.add_option("--config", config_path, "configuration file (key = value, [sections], # comments)");
    std::map<std::string, std::string> values;
    std::vector<std::pair<std::string, CLI::Option*>> options;
    for (const auto& k : ps::config_keys()) {
        std::string names = "--" + k.name;
        std::string dashed = k.name;
        std::replace(dashed.begin(), dashed.end(), '_', '-');
        if (dashed != k.name) names += ",--" + dashed;
        auto* opt = app.add_option(names, values[k.name], k.help + " [" + k.section + "]");
        opt->group("Parameters");
        options.emplace_back(k.name, opt);
    }

    struct Command {
        const char* name;
        const char* help;
        void (*run)(const ps::RunConfig&, Outputs&);
    };
    const std::vector<Command> commands = {
        {"propagate", "propagate one realization and store snapshots", cmd_propagate},
        {"sweep-pathwise", "coupled dz sweep of the rms pathwise error", cmd_sweep_pathwise},
        {"sweep-moments", "coupled dz sweep of moment errors (sup-norm and Fourier-mode)", cmd_sweep_moments},
        {"strang-order", "deterministic splitting-order check on the second-moment equation", cmd_strang_order},
        {"oracle-mu11", "second moment at z = Z: quadrature versus moment equation", cmd_oracle_mu11},
        {"scintillation", "scintillation index at the beam center for each sigma in sigma_list", cmd_scintillation},
        {"selftest", "run the invariant checks", cmd_selftest},
    };
    for (const auto& c : commands) app.add_subcommand(c.name, c.help)->fallthrough();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    const Command* chosen = nullptr;
    for (const auto& c : commands)
        if (app.got_subcommand(c.name)) chosen = &c;

    try {
        std::vector<std::pair<std::string, std::string>> overrides;
        for (const auto& [name, opt] : options)
            if (opt->count() > 0) overrides.emplace_back(name, values[name]);
        const ps::RunConfig cfg = ps::parse_config(config_path, overrides);
        Outputs o;
        o.dir = cfg.output_dir;
        fs::create_directories(o.dir);
        chosen->run(cfg, o);
        write_manifest(o, cfg, chosen->name);
        if (o.failed) {
            std::cerr << "phasescreen: " << chosen->name << ": one or more checks failed (see manifest.txt)\n";
            return std::string(chosen->name) == "selftest" ? 3 : 2;
        }
        return 0;
    } catch (const ps::ConfigError& e) {
        std::cerr << "phasescreen: configuration error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "phasescreen: error: " << e.what() << "\n";
        return 2;
    }
}
