#pragma once

#include <cerrno>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <map>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include "phasescreen/error.hpp"
#include "phasescreen/grid.hpp"
#include "phasescreen/harness.hpp"
#include "phasescreen/kappa.hpp"
#include "phasescreen/medium.hpp"

namespace phasescreen {

/// Every tunable of the command-line runner. Defaults describe the reference
/// experiment: d=1, L=64, N_x=1024, Z=1, kappa1=1, gamma=1, sigma=0.125,
/// theta=2^-9, K_k=2 pi 2^4.
struct RunConfig {
    std::string output_dir = "out";
    std::size_t threads = 1;
    std::uint64_t seed = 20240601;
    std::size_t chunks = 4;
    std::size_t batches = 32;

    int dim = 1;
    double length = 64.0;
    std::size_t points = 1024;

    std::string model = "paraxial";
    double sigma = 0.125;
    double theta = 0.001953125;
    double cutoff = 2.0 * std::numbers::pi * 16.0;

    double Z = 1.0;
    std::size_t steps = 1024;
    double gamma = 1.0;
    std::string kappa1 = "constant:1";
    std::size_t ladder_refine = 0;

    std::vector<double> dz_list{0.03125, 0.015625, 0.0078125, 0.00390625, 0.001953125};
    double dz_ref = 0.0009765625;
    std::size_t samples = 512;
    std::vector<std::string> error_kinds{"pathwise_rms", "moment_sup", "fourier_mode"};
    std::vector<int> powers{2, 4};
    std::vector<int> fourier_modes{1, 3, 5};

    std::string snapshots = "final";

    std::size_t substeps = 16;
    std::vector<double> strang_dz_list{0.0625, 0.03125, 0.015625, 0.0078125, 0.00390625};

    std::vector<double> sigma_list{0.125, 0.5, 1.0};

    friend bool operator==(const RunConfig&, const RunConfig&) = default;
};

namespace detail {

inline std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

inline std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::string cur;
    std::istringstream in(s);
    while (std::getline(in, cur, sep)) out.push_back(trim(cur));
    if (!s.empty() && s.back() == sep) out.emplace_back();
    return out;
}

inline double parse_double(const std::string& key, const std::string& text) {
    const std::string t = trim(text);
    char* end = nullptr;
    errno = 0;
    const double v = std::strtod(t.c_str(), &end);
    if (t.empty() || end != t.c_str() + t.size() || errno == ERANGE || !std::isfinite(v))
        throw ConfigError("invalid value for key '" + key + "': expected a real number, got '" + text + "'");
    return v;
}

inline long long parse_integer(const std::string& key, const std::string& text) {
    const std::string t = trim(text);
    char* end = nullptr;
    errno = 0;
    const long long v = std::strtoll(t.c_str(), &end, 10);
    if (t.empty() || end != t.c_str() + t.size() || errno == ERANGE)
        throw ConfigError("invalid value for key '" + key + "': expected an integer, got '" + text + "'");
    return v;
}

inline std::size_t parse_count(const std::string& key, const std::string& text) {
    const long long v = parse_integer(key, text);
    if (v < 0) throw ConfigError("invalid value for key '" + key + "': must be non-negative, got '" + text + "'");
    return static_cast<std::size_t>(v);
}

inline std::uint64_t parse_u64(const std::string& key, const std::string& text) {
    const std::string t = trim(text);
    char* end = nullptr;
    errno = 0;
    const unsigned long long v = std::strtoull(t.c_str(), &end, 10);
    if (t.empty() || t[0] == '-' || end != t.c_str() + t.size() || errno == ERANGE)
        throw ConfigError("invalid value for key '" + key + "': expected an unsigned integer, got '" + text + "'");
    return v;
}

template <class T, class F>
std::vector<T> parse_list(const std::string& key, const std::string& text, F item) {
    std::vector<T> out;
    if (trim(text).empty()) return out;
    for (const auto& part : split(text, ',')) out.push_back(item(key, part));
    return out;
}

template <class T, class F>
std::string join(const std::vector<T>& v, F fmt) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) s += ",";
        s += fmt(v[i]);
    }
    return s;
}

}  // namespace detail

/// kappa1 grammar: "constant:c", "affine:a,b", "polynomial:c0,c1,...", "tabulated:z0=v0;z1=v1;...".
inline Kappa1Profile parse_kappa1(const std::string& text) {
    const std::string key = "kappa1";
    const auto colon = text.find(':');
    if (colon == std::string::npos)
        throw ConfigError("invalid value for key 'kappa1': expected kind:parameters, got '" + text + "'");
    const std::string kind = detail::trim(text.substr(0, colon));
    const std::string args = text.substr(colon + 1);
    if (kind == "constant") return ConstantKappa{detail::parse_double(key, args)};
    if (kind == "affine") {
        const auto v = detail::parse_list<double>(key, args, detail::parse_double);
        if (v.size() != 2) throw ConfigError("invalid value for key 'kappa1': affine needs a,b");
        return AffineKappa{v[0], v[1]};
    }
    if (kind == "polynomial") {
        const auto v = detail::parse_list<double>(key, args, detail::parse_double);
        if (v.empty()) throw ConfigError("invalid value for key 'kappa1': polynomial needs coefficients");
        return PolynomialKappa{v};
    }
    if (kind == "tabulated") {
        TabulatedKappa t;
        for (const auto& pair : detail::split(args, ';')) {
            const auto eq = pair.find('=');
            if (eq == std::string::npos) throw ConfigError("invalid value for key 'kappa1': tabulated entries are z=v");
            t.nodes.push_back(detail::parse_double(key, pair.substr(0, eq)));
            t.values.push_back(detail::parse_double(key, pair.substr(eq + 1)));
        }
        return t;
    }
    throw ConfigError("invalid value for key 'kappa1': unknown profile kind '" + kind + "'");
}

inline std::string format_kappa1(const Kappa1Profile& k) {
    return std::visit(
        [](const auto& v) -> std::string {
            using T = std::decay_t<decltype(v)>;
            if constexpr (std::is_same_v<T, ConstantKappa>) {
                return "constant:" + detail::format_double(v.value);
            } else if constexpr (std::is_same_v<T, AffineKappa>) {
                return "affine:" + detail::format_double(v.a) + "," + detail::format_double(v.b);
            } else if constexpr (std::is_same_v<T, PolynomialKappa>) {
                return "polynomial:" + detail::join(v.coeffs, detail::format_double);
            } else {
                std::string s = "tabulated:";
                for (std::size_t i = 0; i < v.nodes.size(); ++i) {
                    if (i) s += ";";
                    s += detail::format_double(v.nodes[i]) + "=" + detail::format_double(v.values[i]);
                }
                return s;
            }
        },
        k.variant());
}

struct ConfigKey {
    std::string name;
    std::string section;
    std::string help;
    std::function<void(RunConfig&, const std::string&)> set;
    std::function<std::string(const RunConfig&)> get;
};

inline const std::vector<ConfigKey>& config_keys() {
    using namespace detail;
    auto real = [](const char* name, const char* section, const char* help, double RunConfig::*m) {
        return ConfigKey{name, section, help,
                         [=](RunConfig& c, const std::string& v) { c.*m = parse_double(name, v); },
                         [=](const RunConfig& c) { return format_double(c.*m); }};
    };
    auto count = [](const char* name, const char* section, const char* help, std::size_t RunConfig::*m) {
        return ConfigKey{name, section, help,
                         [=](RunConfig& c, const std::string& v) { c.*m = parse_count(name, v); },
                         [=](const RunConfig& c) { return std::to_string(c.*m); }};
    };
    auto text = [](const char* name, const char* section, const char* help, std::string RunConfig::*m) {
        return ConfigKey{name, section, help, [=](RunConfig& c, const std::string& v) { c.*m = trim(v); },
                         [=](const RunConfig& c) { return c.*m; }};
    };
    auto reals = [](const char* name, const char* section, const char* help, std::vector<double> RunConfig::*m) {
        return ConfigKey{name, section, help,
                         [=](RunConfig& c, const std::string& v) { c.*m = parse_list<double>(name, v, parse_double); },
                         [=](const RunConfig& c) { return join(c.*m, format_double); }};
    };
    auto ints = [](const char* name, const char* section, const char* help, std::vector<int> RunConfig::*m) {
        return ConfigKey{name, section, help,
                         [=](RunConfig& c, const std::string& v) {
                             c.*m = parse_list<int>(name, v, [](const std::string& k, const std::string& s) {
                                 return static_cast<int>(parse_integer(k, s));
                             });
                         },
                         [=](const RunConfig& c) { return join(c.*m, [](int i) { return std::to_string(i); }); }};
    };
    static const std::vector<ConfigKey> keys = {
        text("output_dir", "run", "directory for CSV, snapshot and manifest files", &RunConfig::output_dir),
        count("threads", "run", "worker threads", &RunConfig::threads),
        ConfigKey{"seed", "run", "master seed",
                  [](RunConfig& c, const std::string& v) { c.seed = parse_u64("seed", v); },
                  [](const RunConfig& c) { return std::to_string(c.seed); }},
        count("chunks", "run", "fixed work units of a coupled sweep", &RunConfig::chunks),
        count("batches", "run", "Monte Carlo batches (batch-means standard errors)", &RunConfig::batches),
        ConfigKey{"dim", "grid", "lateral dimension (1 or 2)",
                  [](RunConfig& c, const std::string& v) { c.dim = static_cast<int>(parse_integer("dim", v)); },
                  [](const RunConfig& c) { return std::to_string(c.dim); }},
        real("length", "grid", "period L", &RunConfig::length),
        count("points", "grid", "points per axis N_x (power of two)", &RunConfig::points),
        text("model", "medium", "paraxial or ito", &RunConfig::model),
        real("sigma", "medium", "noise level", &RunConfig::sigma),
        real("theta", "medium", "paraxial correlation parameter", &RunConfig::theta),
        real("cutoff", "medium", "spectral cutoff K_k", &RunConfig::cutoff),
        real("Z", "splitting", "final distance", &RunConfig::Z),
        count("steps", "splitting", "number of steps N_z", &RunConfig::steps),
        real("gamma", "splitting", "collocation parameter", &RunConfig::gamma),
        text("kappa1", "splitting", "constant:c | affine:a,b | polynomial:c0,c1,.. | tabulated:z=v;..",
             &RunConfig::kappa1),
        count("ladder_refine", "splitting", "fine noise steps per (reference) step; 0 = automatic",
              &RunConfig::ladder_refine),
        reals("dz_list", "sweep", "coarse step sizes (decreasing)", &RunConfig::dz_list),
        real("dz_ref", "sweep", "reference step size", &RunConfig::dz_ref),
        count("samples", "sweep", "Monte Carlo samples", &RunConfig::samples),
        ConfigKey{"error_kinds", "sweep", "subset of pathwise_rms,moment_sup,fourier_mode",
                  [](RunConfig& c, const std::string& v) {
                      c.error_kinds.clear();
                      if (!trim(v).empty())
                          for (const auto& s : split(v, ',')) c.error_kinds.push_back(s);
                  },
                  [](const RunConfig& c) { return join(c.error_kinds, [](const std::string& s) { return s; }); }},
        ints("powers", "sweep", "moment powers p", &RunConfig::powers),
        ints("fourier_modes", "sweep", "Fourier-mode indices m", &RunConfig::fourier_modes),
        text("snapshots", "propagate", "final | all | comma-separated step indices (final allowed in the list)", &RunConfig::snapshots),
        count("substeps", "moment_pde", "internal sub-steps of the continuous moment solver", &RunConfig::substeps),
        reals("strang_dz_list", "moment_pde", "step sizes of strang-order", &RunConfig::strang_dz_list),
        reals("sigma_list", "scintillation", "noise levels of scintillation", &RunConfig::sigma_list),
    };
    return keys;
}

inline const ConfigKey* find_key(const std::string& name) {
    for (const auto& k : config_keys())
        if (k.name == name) return &k;
    return nullptr;
}

/// Sets one key from text; unknown keys are rejected.
inline void set_config_value(RunConfig& cfg, const std::string& name, const std::string& value) {
    const ConfigKey* k = find_key(name);
    if (k == nullptr) throw ConfigError("unknown key '" + name + "'");
    k->set(cfg, value);
}

inline GridSpec config_grid(const RunConfig& c) { return make_grid(c.dim, c.length, c.points); }

inline MediumModel config_model(const RunConfig& c) {
    if (c.model == "ito") return ItoModel{};
    if (c.model == "paraxial") return ParaxialModel{c.theta};
    throw ConfigError("invalid value for key 'model': expected paraxial or ito, got '" + c.model + "'");
}

inline MediumSpec config_medium(const RunConfig& c) {
    return make_medium(make_covariance(c.sigma), c.cutoff, config_grid(c), config_model(c));
}

/// Snapshot indices selected by the `snapshots` key for N_z steps.
inline std::vector<std::size_t> config_snapshots(const RunConfig& c) {
    std::vector<std::size_t> out;
    if (c.snapshots == "final") return {c.steps};
    if (c.snapshots == "all") {
        for (std::size_t n = 0; n <= c.steps; ++n) out.push_back(n);
        return out;
    }
    for (const auto& s : detail::split(c.snapshots, ',')) {
        const std::size_t n = s == "final" ? c.steps : detail::parse_count("snapshots", s);
        detail::require(n <= c.steps, "invalid value for key 'snapshots': index " + std::to_string(n) +
                                          " exceeds steps=" + std::to_string(c.steps));
        out.push_back(n);
    }
    return out;
}

inline SweepConfig config_sweep(const RunConfig& c) {
    SweepConfig s;
    s.medium = config_medium(c);
    s.kappa1 = parse_kappa1(c.kappa1);
    s.gamma = c.gamma;
    s.Z = c.Z;
    s.dz_list = c.dz_list;
    s.dz_ref = c.dz_ref;
    s.samples = c.samples;
    s.seed = c.seed;
    s.ladder_refine = c.ladder_refine;
    s.powers = c.powers;
    s.fourier_modes = c.fourier_modes;
    s.threads = c.threads;
    s.chunks = c.chunks;
    return s;
}

inline MonteCarloConfig config_monte_carlo(const RunConfig& c) {
    MonteCarloConfig m;
    m.medium = config_medium(c);
    m.kappa1 = parse_kappa1(c.kappa1);
    m.gamma = c.gamma;
    m.Z = c.Z;
    m.steps = c.steps;
    m.samples = c.samples;
    m.seed = c.seed;
    m.ladder_refine = c.ladder_refine;
    m.threads = c.threads;
    m.chunks = c.batches;
    return m;
}

/// Checks every constraint that can be decided before running, naming the keys involved.
inline void validate_config(const RunConfig& c) {
    auto need = [](bool ok, const std::string& msg) {
        if (!ok) throw ConfigError(msg);
    };
    need(c.threads >= 1, "key 'threads' must be at least 1");
    need(c.chunks >= 1, "key 'chunks' must be at least 1");
    need(c.batches >= 2, "key 'batches' must be at least 2");
    need(c.dim == 1 || c.dim == 2, "key 'dim' must be 1 or 2");
    need(c.length > 0.0, "key 'length' must be positive");
    need(c.points >= 2 && is_power_of_two(c.points), "key 'points' must be a power of two");
    need(c.model == "ito" || c.model == "paraxial", "key 'model' must be paraxial or ito");
    need(c.sigma >= 0.0, "key 'sigma' must be non-negative");
    need(c.theta > 0.0 && c.theta <= 1.0, "key 'theta' must lie in (0, 1]");
    need(c.cutoff > 0.0, "key 'cutoff' must be positive");
    need(c.Z > 0.0, "key 'Z' must be positive");
    need(c.steps >= 1, "key 'steps' must be at least 1");
    need(c.gamma >= 0.0 && c.gamma <= 1.0, "key 'gamma' must lie in [0, 1]");
    const Kappa1Profile k = parse_kappa1(c.kappa1);
    try {
        k.validate_positive(c.Z);
    } catch (const ConfigError& e) {
        throw ConfigError(std::string("key 'kappa1': ") + e.what());
    }
    try {
        detail::ladder_subdivision(c.gamma, c.ladder_refine);
    } catch (const ConfigError& e) {
        throw ConfigError(std::string("keys 'gamma'/'ladder_refine': ") + e.what());
    }
    need(c.samples >= 1, "key 'samples' must be at least 1");
    need(c.dz_ref > 0.0, "key 'dz_ref' must be positive");
    std::size_t r = 0;
    need(detail::is_integer_ratio(c.Z, c.dz_ref, r),
         "key 'dz_ref': dz_ref=" + detail::format_double(c.dz_ref) + " does not divide Z=" + detail::format_double(c.Z));
    for (std::size_t i = 0; i < c.dz_list.size(); ++i) {
        const double dz = c.dz_list[i];
        need(dz > 0.0, "key 'dz_list': entries must be positive");
        need(detail::is_integer_ratio(dz, c.dz_ref, r), "key 'dz_list': dz=" + detail::format_double(dz) +
                                                            " is not an integer multiple of dz_ref=" +
                                                            detail::format_double(c.dz_ref));
        need(detail::is_integer_ratio(c.Z, dz, r),
             "key 'dz_list': dz=" + detail::format_double(dz) + " does not divide Z=" + detail::format_double(c.Z));
        if (i > 0) need(dz < c.dz_list[i - 1], "key 'dz_list': entries must be strictly decreasing");
    }
    for (const auto& kind : c.error_kinds)
        need(kind == "pathwise_rms" || kind == "moment_sup" || kind == "fourier_mode",
             "key 'error_kinds': unknown kind '" + kind + "'");
    for (const int p : c.powers) need(p >= 1, "key 'powers': entries must be positive");
    config_snapshots(c);
    need(c.substeps >= 1, "key 'substeps' must be at least 1");
    for (const double dz : c.strang_dz_list)
        need(dz > 0.0 && detail::is_integer_ratio(c.Z, dz, r),
             "key 'strang_dz_list': dz=" + detail::format_double(dz) + " does not divide Z");
    for (const double s : c.sigma_list) need(s >= 0.0, "key 'sigma_list': entries must be non-negative");
}

/// Parses flat `key = value` text with optional [section] headers and # comments.
inline RunConfig parse_config_text(const std::string& text, RunConfig cfg = {}) {
    std::istringstream in(text);
    std::string line;
    std::string section;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = detail::trim(line);
        if (line.empty()) continue;
        const std::string where = " (line " + std::to_string(lineno) + ")";
        if (line.front() == '[') {
            if (line.back() != ']') throw ConfigError("malformed section header" + where);
            section = detail::trim(line.substr(1, line.size() - 2));
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw ConfigError("expected key = value" + where);
        const std::string key = detail::trim(line.substr(0, eq));
        const ConfigKey* k = find_key(key);
        if (k == nullptr) throw ConfigError("unknown key '" + key + "'" + where);
        if (!section.empty() && section != k->section)
            throw ConfigError("key '" + key + "' belongs to section [" + k->section + "], found in [" + section + "]" +
                              where);
        k->set(cfg, line.substr(eq + 1));
    }
    validate_config(cfg);
    return cfg;
}

inline RunConfig parse_config_file(const std::string& path, RunConfig cfg = {}) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read config file '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_config_text(ss.str(), std::move(cfg));
}

/// parse_config: optional file, then key overrides in order.
inline RunConfig parse_config(const std::string& path, const std::vector<std::pair<std::string, std::string>>& overrides) {
    RunConfig cfg;
    if (!path.empty()) {
        std::ifstream in(path);
        if (!in) throw ConfigError("cannot read config file '" + path + "'");
        std::ostringstream ss;
        ss << in.rdbuf();
        cfg = parse_config_text(ss.str());
    }
    for (const auto& [k, v] : overrides) set_config_value(cfg, k, v);
    validate_config(cfg);
    return cfg;
}

/// Serializes every key, grouped by section, with 17 significant digits.
inline std::string serialize_config(const RunConfig& cfg) {
    std::string out;
    std::string section;
    for (const auto& k : config_keys()) {
        if (k.section != section) {
            section = k.section;
            out += (out.empty() ? "[" : "\n[") + section + "]\n";
        }
        out += k.name + " = " + k.get(cfg) + "\n";
    }
    return out;
}

}  // namespace phasescreen
