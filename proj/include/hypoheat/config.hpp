#pragma once

// Sweep configuration: a flat `key = value` text format, parsed into a
// SweepConfig, and its canonical form (the input of the config hash).

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "hypoheat/error.hpp"
#include "hypoheat/group.hpp"
#include "hypoheat/mollify.hpp"
#include "hypoheat/solve.hpp"

namespace hypoheat {

enum class Experiment { Existence, Uniqueness, Consistency };
enum class NormKind { Auto, L2, Hnu2, Linf, Lp };
enum class SolveMethod { Implicit, Duhamel, Oracle };

struct Perturbation {
    enum class Kind { None, Exp, OmegaPower };
    Kind kind = Kind::Exp;
    double power = 1.0;

    /// eta(eps): e^{-1/eps}, omega^power or 0.
    double amount(double eps, double w) const {
        switch (kind) {
        case Kind::Exp:
            return std::exp(-1.0 / eps);
        case Kind::OmegaPower:
            return std::pow(w, power);
        case Kind::None:
            break;
        }
        return 0.0;
    }
};

struct SweepConfig {
    GroupInstance group = GroupInstance::euclidean(1);
    std::vector<double> half_widths{1.0};
    std::vector<std::size_t> points{64};

    /// Text forms are kept for the canonical config; the specs are built on
    /// a grid by `potential_spec` / `initial_spec`.
    std::string potential = "delta";
    std::optional<SignClass> sign_class;
    std::string u0 = "bump:1:0.5";

    OmegaSchedule schedule = OmegaSchedule::polynomial();
    std::optional<OmegaSchedule> schedule_v;
    std::optional<OmegaSchedule> schedule_u0;
    std::vector<double> epsilons;
    std::optional<double> epsilon;

    double T = 0.25;
    double dt = 1.0 / 256.0;
    Experiment experiment = Experiment::Existence;
    NormKind norm = NormKind::Auto;
    double norm_p = 2.0;
    int k_max = 10;
    int N_max = 2;
    std::size_t picard_depth = kDefaultPicardDepth;
    std::size_t threads = 1;

    Perturbation perturbation;
    SolveMethod method = SolveMethod::Implicit;
    TimeScheme scheme = TimeScheme::BackwardEuler;
    double consistency_ratio = 0.1;
    double residual_tol = kDefaultResidualTolerance;
    std::size_t quadrature_points = kDefaultQuadraturePoints;

    /// Directory that relative `sampled:` paths resolve against.
    std::filesystem::path base_dir = ".";

    OmegaSchedule v_schedule() const { return schedule_v.value_or(schedule); }
    OmegaSchedule u0_schedule() const { return schedule_u0.value_or(schedule); }
    GridPtr make_grid() const { return hypoheat::make_grid(group, half_widths, points); }
};

namespace detail {

inline std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) {
        return "";
    }
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

inline std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::string item;
    std::istringstream in(s);
    while (std::getline(in, item, sep)) {
        out.push_back(trim(item));
    }
    return out;
}

inline double parse_double(const std::string& key, const std::string& v) {
    try {
        std::size_t pos = 0;
        const double d = std::stod(v, &pos);
        if (pos != v.size() || !std::isfinite(d)) {
            throw std::invalid_argument(v);
        }
        return d;
    } catch (const std::exception&) {
        throw ArgumentError("config: key '" + key + "' expects a number, got '" + v + "'");
    }
}

inline long parse_int(const std::string& key, const std::string& v) {
    const double d = parse_double(key, v);
    if (d != std::floor(d)) {
        throw ArgumentError("config: key '" + key + "' expects an integer, got '" + v + "'");
    }
    return static_cast<long>(d);
}

inline std::size_t parse_count(const std::string& key, const std::string& v) {
    const long n = parse_int(key, v);
    if (n < 0) {
        throw ArgumentError("config: key '" + key + "' must be nonnegative");
    }
    return static_cast<std::size_t>(n);
}

inline OmegaSchedule parse_schedule(const std::string& key, const std::string& v) {
    if (v == "poly") {
        return OmegaSchedule::polynomial();
    }
    if (v.rfind("log:", 0) == 0) {
        return OmegaSchedule::logarithmic(static_cast<int>(parse_int(key, v.substr(4))));
    }
    throw ArgumentError("config: key '" + key + "' expects poly or log:<n0>, got '" + v + "'");
}

inline std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline std::vector<double> read_numbers(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw IoError("cannot read sampled field '" + path.string() + "'");
    }
    std::vector<double> out;
    std::string line;
    while (std::getline(in, line)) {
        const std::string t = trim(line);
        if (t.empty() || t[0] == '#') {
            continue;
        }
        std::string cleaned = t;
        for (char& c : cleaned) {
            if (c == ',') {
                c = ' ';
            }
        }
        std::istringstream ls(cleaned);
        std::string tok;
        while (ls >> tok) {
            out.push_back(parse_double(path.string(), tok));
        }
    }
    return out;
}

inline Field read_sampled(const std::filesystem::path& path, const GridPtr& grid) {
    std::vector<double> v = read_numbers(path);
    if (v.size() != grid->dof()) {
        throw ArgumentError("sampled field '" + path.string() + "' has " + std::to_string(v.size()) +
                            " values, grid has " + std::to_string(grid->dof()) + " nodes");
    }
    return Field(grid, Eigen::Map<Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size())));
}

inline BumpProfile parse_bump(const std::string& key, const std::string& v) {
    const auto parts = split(v, ':');
    if (parts.size() != 3 || parts[0] != "bump") {
        throw ArgumentError("config: key '" + key + "' expects bump:<amplitude>:<radius>, got '" + v + "'");
    }
    BumpProfile b;
    b.amplitude = parse_double(key, parts[1]);
    b.radius = parse_double(key, parts[2]);
    if (!(b.radius > 0.0)) {
        throw ArgumentError("config: bump radius must be positive");
    }
    return b;
}

} // namespace detail

/// Builds the potential spec on `grid` (sampled files are read here).
inline PotentialSpec potential_spec(const SweepConfig& cfg, const GridPtr& grid) {
    const std::string& v = cfg.potential;
    auto with_sign = [&](PotentialSpec spec) {
        if (!cfg.sign_class || *cfg.sign_class == spec.sign_class()) {
            return spec;
        }
        return PotentialSpec(spec.variant(), *cfg.sign_class, spec.lp_classes());
    };
    if (v == "delta") {
        return with_sign(PotentialSpec::delta());
    }
    if (v.rfind("delta:", 0) == 0) {
        return with_sign(PotentialSpec::delta({}, detail::parse_double("potential", v.substr(6))));
    }
    if (v == "delta2") {
        return with_sign(PotentialSpec::delta_squared());
    }
    if (v.rfind("constant:", 0) == 0) {
        return with_sign(PotentialSpec::constant(detail::parse_double("potential", v.substr(9))));
    }
    if (v.rfind("sampled:", 0) == 0) {
        const std::filesystem::path p = cfg.base_dir / v.substr(8);
        return with_sign(PotentialSpec::sampled(detail::read_sampled(p, grid)));
    }
    if (v.rfind("bump:", 0) == 0) {
        return with_sign(PotentialSpec::bump(detail::parse_bump("potential", v)));
    }
    throw ArgumentError("config: unknown potential '" + v +
                        "' (delta|delta:<w>|delta2|constant:<c>|sampled:<path>|bump:<amp>:<radius>)");
}

inline InitialSpec initial_spec(const SweepConfig& cfg, const GridPtr& grid) {
    const std::string& v = cfg.u0;
    if (v.rfind("sampled:", 0) == 0) {
        return detail::read_sampled(cfg.base_dir / v.substr(8), grid);
    }
    return detail::parse_bump("u0", v);
}

/// Parses the flat config text. Unknown keys and malformed values raise
/// ArgumentError.
inline SweepConfig parse_config(const std::string& text, const std::filesystem::path& base_dir = ".") {
    SweepConfig cfg;
    cfg.base_dir = base_dir;
    std::map<std::string, std::string> kv;
    std::istringstream in(text);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) {
            line = line.substr(0, hash);
        }
        line = detail::trim(line);
        if (line.empty()) {
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw ArgumentError("config line " + std::to_string(lineno) + ": expected key = value");
        }
        const std::string key = detail::trim(line.substr(0, eq));
        const std::string value = detail::trim(line.substr(eq + 1));
        if (key.empty() || value.empty()) {
            throw ArgumentError("config line " + std::to_string(lineno) + ": empty key or value");
        }
        if (!kv.emplace(key, value).second) {
            throw ArgumentError("config: duplicate key '" + key + "'");
        }
    }

    for (const auto& [key, v] : kv) {
        if (key == "group") {
            if (v == "euclidean1") {
                cfg.group = GroupInstance::euclidean(1);
            } else if (v == "euclidean2") {
                cfg.group = GroupInstance::euclidean(2);
            } else if (v == "heisenberg1") {
                cfg.group = GroupInstance::heisenberg1();
            } else {
                throw ArgumentError("config: unknown group '" + v + "' (euclidean1|euclidean2|heisenberg1)");
            }
        } else if (key == "half_width") {
            cfg.half_widths.clear();
            for (const auto& s : detail::split(v, ',')) {
                cfg.half_widths.push_back(detail::parse_double(key, s));
            }
        } else if (key == "points") {
            cfg.points.clear();
            for (const auto& s : detail::split(v, ',')) {
                cfg.points.push_back(detail::parse_count(key, s));
            }
        } else if (key == "potential") {
            cfg.potential = v;
        } else if (key == "sign_class") {
            if (v == "nonneg") {
                cfg.sign_class = SignClass::NonNegative;
            } else if (v == "real") {
                cfg.sign_class = SignClass::Real;
            } else {
                throw ArgumentError("config: sign_class must be nonneg or real");
            }
        } else if (key == "u0") {
            cfg.u0 = v;
        } else if (key == "schedule") {
            cfg.schedule = detail::parse_schedule(key, v);
        } else if (key == "schedule_v") {
            cfg.schedule_v = detail::parse_schedule(key, v);
        } else if (key == "schedule_u0") {
            cfg.schedule_u0 = detail::parse_schedule(key, v);
        } else if (key == "epsilons") {
            cfg.epsilons.clear();
            for (const auto& s : detail::split(v, ',')) {
                cfg.epsilons.push_back(detail::parse_double(key, s));
            }
            (void)EpsilonNet(cfg.epsilons);
        } else if (key == "epsilon") {
            cfg.epsilon = detail::parse_double(key, v);
        } else if (key == "T") {
            cfg.T = detail::parse_double(key, v);
        } else if (key == "dt") {
            cfg.dt = detail::parse_double(key, v);
        } else if (key == "experiment") {
            if (v == "existence") {
                cfg.experiment = Experiment::Existence;
            } else if (v == "uniqueness") {
                cfg.experiment = Experiment::Uniqueness;
            } else if (v == "consistency") {
                cfg.experiment = Experiment::Consistency;
            } else {
                throw ArgumentError("config: unknown experiment '" + v + "'");
            }
        } else if (key == "norm") {
            if (v == "l2") {
                cfg.norm = NormKind::L2;
            } else if (v == "hnu2") {
                cfg.norm = NormKind::Hnu2;
            } else if (v == "linf") {
                cfg.norm = NormKind::Linf;
            } else if (v == "auto") {
                cfg.norm = NormKind::Auto;
            } else if (v.rfind("lp:", 0) == 0) {
                cfg.norm = NormKind::Lp;
                cfg.norm_p = detail::parse_double(key, v.substr(3));
                if (!(cfg.norm_p >= 1.0)) {
                    throw ArgumentError("config: lp norm needs p >= 1");
                }
            } else {
                throw ArgumentError("config: unknown norm '" + v + "' (l2|hnu2|linf|lp:<p>)");
            }
        } else if (key == "k_max") {
            cfg.k_max = static_cast<int>(detail::parse_int(key, v));
        } else if (key == "N_max") {
            cfg.N_max = static_cast<int>(detail::parse_int(key, v));
        } else if (key == "picard_depth") {
            cfg.picard_depth = detail::parse_count(key, v);
        } else if (key == "threads") {
            cfg.threads = std::max<std::size_t>(1, detail::parse_count(key, v));
        } else if (key == "perturbation") {
            if (v == "exp") {
                cfg.perturbation = {Perturbation::Kind::Exp, 1.0};
            } else if (v == "none") {
                cfg.perturbation = {Perturbation::Kind::None, 0.0};
            } else if (v.rfind("omega:", 0) == 0) {
                cfg.perturbation = {Perturbation::Kind::OmegaPower, detail::parse_double(key, v.substr(6))};
            } else {
                throw ArgumentError("config: perturbation must be exp, none or omega:<p>");
            }
        } else if (key == "method") {
            if (v == "implicit") {
                cfg.method = SolveMethod::Implicit;
            } else if (v == "duhamel") {
                cfg.method = SolveMethod::Duhamel;
            } else if (v == "oracle") {
                cfg.method = SolveMethod::Oracle;
            } else {
                throw ArgumentError("config: method must be implicit, duhamel or oracle");
            }
        } else if (key == "scheme") {
            if (v == "be") {
                cfg.scheme = TimeScheme::BackwardEuler;
            } else if (v == "cn") {
                cfg.scheme = TimeScheme::CrankNicolson;
            } else {
                throw ArgumentError("config: scheme must be be or cn");
            }
        } else if (key == "consistency_ratio") {
            cfg.consistency_ratio = detail::parse_double(key, v);
        } else if (key == "residual_tol") {
            cfg.residual_tol = detail::parse_double(key, v);
        } else if (key == "quadrature_points") {
            cfg.quadrature_points = detail::parse_count(key, v);
        } else {
            throw ArgumentError("config: unknown key '" + key + "'");
        }
    }

    if (!(cfg.T > 0.0) || !(cfg.dt > 0.0) || cfg.dt > cfg.T) {
        throw ArgumentError("config: need 0 < dt <= T");
    }
    if (cfg.residual_tol <= 0.0) {
        throw ArgumentError("config: residual_tol must be positive");
    }
    if (cfg.epsilon && !(*cfg.epsilon > 0.0 && *cfg.epsilon <= 1.0)) {
        throw ArgumentError("config: epsilon must lie in (0, 1]");
    }
    return cfg;
}

inline SweepConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw IoError("cannot read config '" + path.string() + "'");
    }
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str(), path.parent_path().empty() ? std::filesystem::path(".") : path.parent_path());
}

/// One `key = value` line per setting, sorted by key, defaults filled in and
/// numbers printed with %.17g. `threads` is omitted: it does not change
/// results.
inline std::string canonical_config(const SweepConfig& cfg) {
    std::map<std::string, std::string> kv;
    auto join = [](const auto& values) {
        std::string s;
        for (const auto& v : values) {
            if (!s.empty()) {
                s += ",";
            }
            if constexpr (std::is_floating_point_v<std::decay_t<decltype(v)>>) {
                s += detail::fmt(v);
            } else {
                s += std::to_string(v);
            }
        }
        return s;
    };
    kv["group"] = cfg.group.name();
    kv["half_width"] = join(cfg.half_widths);
    kv["points"] = join(cfg.points);
    kv["potential"] = cfg.potential;
    kv["sign_class"] = !cfg.sign_class ? "auto" : (*cfg.sign_class == SignClass::NonNegative ? "nonneg" : "real");
    kv["u0"] = cfg.u0;
    kv["schedule"] = cfg.schedule.to_string();
    kv["schedule_v"] = cfg.v_schedule().to_string();
    kv["schedule_u0"] = cfg.u0_schedule().to_string();
    kv["epsilons"] = join(cfg.epsilons);
    kv["epsilon"] = cfg.epsilon ? detail::fmt(*cfg.epsilon) : "none";
    kv["T"] = detail::fmt(cfg.T);
    kv["dt"] = detail::fmt(cfg.dt);
    static const char* experiments[] = {"existence", "uniqueness", "consistency"};
    kv["experiment"] = experiments[static_cast<int>(cfg.experiment)];
    static const char* norms[] = {"auto", "l2", "hnu2", "linf", "lp"};
    kv["norm"] = norms[static_cast<int>(cfg.norm)];
    if (cfg.norm == NormKind::Lp) {
        kv["norm"] += ":" + detail::fmt(cfg.norm_p);
    }
    kv["k_max"] = std::to_string(cfg.k_max);
    kv["N_max"] = std::to_string(cfg.N_max);
    kv["picard_depth"] = std::to_string(cfg.picard_depth);
    switch (cfg.perturbation.kind) {
    case Perturbation::Kind::Exp:
        kv["perturbation"] = "exp";
        break;
    case Perturbation::Kind::None:
        kv["perturbation"] = "none";
        break;
    case Perturbation::Kind::OmegaPower:
        kv["perturbation"] = "omega:" + detail::fmt(cfg.perturbation.power);
        break;
    }
    static const char* methods[] = {"implicit", "duhamel", "oracle"};
    kv["method"] = methods[static_cast<int>(cfg.method)];
    kv["scheme"] = cfg.scheme == TimeScheme::BackwardEuler ? "be" : "cn";
    kv["consistency_ratio"] = detail::fmt(cfg.consistency_ratio);
    kv["residual_tol"] = detail::fmt(cfg.residual_tol);
    kv["quadrature_points"] = std::to_string(cfg.quadrature_points);

    std::string out;
    for (const auto& [k, v] : kv) {
        out += k + " = " + v + "\n";
    }
    return out;
}

} // namespace hypoheat
