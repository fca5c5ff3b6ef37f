#pragma once

// epsilon-sweeps over regularised Cauchy problems: exponent fits,
// moderateness and negligibility verdicts, and the existence, uniqueness and
// consistency experiments.

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <exception>
#include <limits>
#include <optional>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "hypoheat/config.hpp"
#include "hypoheat/error.hpp"
#include "hypoheat/group.hpp"
#include "hypoheat/mollify.hpp"
#include "hypoheat/norms.hpp"
#include "hypoheat/operators.hpp"
#include "hypoheat/solve.hpp"

namespace hypoheat {

struct FitResult {
    double exponent = 0.0;
    double stderr_ = 0.0;
    double intercept = 0.0;
    std::size_t points = 0;
};

/// Least-squares slope of log(value) against log(1/omega). Needs >= 4 pairs,
/// positive values and strictly decreasing omega.
inline FitResult fit_exponent(const std::vector<std::pair<double, double>>& pairs) {
    const std::size_t n = pairs.size();
    if (n < 4) {
        throw ArgumentError("fit_exponent needs at least 4 points, got " + std::to_string(n));
    }
    for (std::size_t i = 0; i < n; ++i) {
        if (!(pairs[i].second > 0.0) || !std::isfinite(pairs[i].second)) {
            throw ArgumentError("fit_exponent: values must be positive and finite");
        }
        if (!(pairs[i].first > 0.0) || (i > 0 && !(pairs[i].first < pairs[i - 1].first))) {
            throw ArgumentError("fit_exponent: omega must be positive and strictly decreasing");
        }
    }
    std::vector<double> x(n), y(n);
    for (std::size_t i = 0; i < n; ++i) {
        x[i] = -std::log(pairs[i].first);
        y[i] = std::log(pairs[i].second);
    }
    const double xm = compensated_sum(x) / static_cast<double>(n);
    const double ym = compensated_sum(y) / static_cast<double>(n);
    std::vector<double> sxx(n), sxy(n);
    for (std::size_t i = 0; i < n; ++i) {
        sxx[i] = (x[i] - xm) * (x[i] - xm);
        sxy[i] = (x[i] - xm) * (y[i] - ym);
    }
    const double Sxx = compensated_sum(sxx);
    const double slope = compensated_sum(sxy) / Sxx;
    const double intercept = ym - slope * xm;
    std::vector<double> res(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double r = y[i] - (intercept + slope * x[i]);
        res[i] = r * r;
    }
    const double ssr = compensated_sum(res);
    return {slope, std::sqrt(ssr / static_cast<double>(n - 2) / Sxx), intercept, n};
}

struct Verdict {
    enum class Kind { Moderate, Negligible, Converged, Fail };
    Kind kind = Kind::Fail;
    /// N for Moderate, fitted decay order for Negligible, final error ratio
    /// for Converged.
    double value = 0.0;
    std::string reason;

    static Verdict moderate(double n) { return {Kind::Moderate, n, {}}; }
    static Verdict negligible(double order) { return {Kind::Negligible, order, {}}; }
    static Verdict converged(double ratio) { return {Kind::Converged, ratio, {}}; }
    static Verdict fail(std::string why) { return {Kind::Fail, 0.0, std::move(why)}; }

    bool passed() const { return kind != Kind::Fail; }

    std::string to_string() const {
        char buf[64];
        switch (kind) {
        case Kind::Moderate:
            std::snprintf(buf, sizeof buf, "Moderate(N=%.6g)", value);
            return buf;
        case Kind::Negligible:
            return "Negligible";
        case Kind::Converged:
            std::snprintf(buf, sizeof buf, "Converged(ratio=%.6g)", value);
            return buf;
        case Kind::Fail:
            break;
        }
        return "Fail(" + reason + ")";
    }
};

/// Moderate(N) iff N <= N_max + 3 stderr.
inline Verdict check_moderate(const FitResult& fit, int N_max) {
    if (fit.exponent <= N_max + 3.0 * fit.stderr_) {
        return Verdict::moderate(fit.exponent);
    }
    char buf[128];
    std::snprintf(buf, sizeof buf, "fitted exponent %.6g exceeds N_max=%d (stderr %.3g)", fit.exponent, N_max,
                  fit.stderr_);
    return Verdict::fail(buf);
}

struct NegligibleFit {
    std::optional<FitResult> fit;
    /// Which pairs entered the fit; zeros are left out.
    std::vector<bool> fitted;
};

/// Zero values are exact negligibility evidence and are left out of the fit.
/// Fewer than 4 remaining nonzero values leave nothing to contradict it.
inline NegligibleFit negligible_fit(const std::vector<std::pair<double, double>>& pairs) {
    if (pairs.empty()) {
        throw ArgumentError("check_negligible: empty net");
    }
    NegligibleFit out;
    std::vector<std::pair<double, double>> nonzero;
    for (const auto& p : pairs) {
        if (p.second < 0.0 || std::isnan(p.second)) {
            throw ArgumentError("check_negligible: values must be nonnegative");
        }
        out.fitted.push_back(p.second > 0.0);
        if (p.second > 0.0) {
            nonzero.push_back(p);
        }
    }
    if (nonzero.size() >= 4) {
        out.fit = fit_exponent(nonzero);
    } else {
        std::fill(out.fitted.begin(), out.fitted.end(), false);
    }
    return out;
}

/// Negligible iff the fitted slope is <= -k_max.
inline Verdict check_negligible(const std::vector<std::pair<double, double>>& pairs, int k_max) {
    const NegligibleFit nf = negligible_fit(pairs);
    if (!nf.fit) {
        return Verdict::negligible(std::numeric_limits<double>::infinity());
    }
    const double order = -nf.fit->exponent;
    if (order >= k_max) {
        return Verdict::negligible(order);
    }
    char buf[128];
    std::snprintf(buf, sizeof buf, "decay order %.6g below k_max=%d", order, k_max);
    return Verdict::fail(buf);
}

struct EpsilonRecord {
    double epsilon = 0.0;
    double omega = 0.0;
    double norm_sup_t = std::numeric_limits<double>::quiet_NaN();
    bool fitted = false;
    /// Existence only: the a priori majorant of the solution net and ||V_eps||_inf.
    double majorant = std::numeric_limits<double>::quiet_NaN();
    double v_linf = std::numeric_limits<double>::quiet_NaN();
    std::optional<std::string> error;
};

struct SweepReport {
    Experiment experiment = Experiment::Existence;
    std::vector<EpsilonRecord> records;
    /// Fit of norm_sup_t against omega(eps) of the solution schedule.
    std::optional<FitResult> fit;
    /// Same values fitted against eps itself.
    std::optional<FitResult> fit_epsilon;
    std::optional<FitResult> majorant_fit;
    Verdict verdict;
    std::string canonical_config;
    std::string started_utc;
    double wall_seconds = 0.0;
    std::vector<std::string> notes;
};

namespace detail {

/// Runs fn(i) for i in [0, n) on `threads` workers. Results are written by
/// index, so the outcome does not depend on scheduling.
template <typename Fn>
void parallel_for(std::size_t n, std::size_t threads, Fn&& fn) {
    std::vector<std::exception_ptr> errors(n);
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next++; i < n; i = next++) {
            try {
                fn(i);
            } catch (...) {
                errors[i] = std::current_exception();
            }
        }
    };
    const std::size_t k = std::min(std::max<std::size_t>(1, threads), n);
    if (k <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (std::size_t t = 0; t < k; ++t) {
            pool.emplace_back(worker);
        }
        for (auto& t : pool) {
            t.join();
        }
    }
    for (auto& e : errors) {
        if (e) {
            std::rethrow_exception(e);
        }
    }
}

inline bool recoverable(const std::exception_ptr& e) {
    try {
        std::rethrow_exception(e);
    } catch (const ArgumentError&) {
        return false;
    } catch (const IoError&) {
        return false;
    } catch (const Error&) {
        return true;
    } catch (...) {
        return false;
    }
}

inline std::string what(const std::exception_ptr& e) {
    try {
        std::rethrow_exception(e);
    } catch (const std::exception& ex) {
        return ex.what();
    } catch (...) {
        return "unknown error";
    }
}

inline Trajectory run_solver(const SweepConfig& cfg, const CauchyProblem& p, std::size_t thinning = 0) {
    SolverOptions o;
    o.scheme = cfg.scheme;
    o.residual_tolerance = cfg.residual_tol;
    o.thinning = thinning;
    switch (cfg.method) {
    case SolveMethod::Duhamel:
        return solve_duhamel(p, cfg.picard_depth, o);
    case SolveMethod::Oracle:
        return oracle_expm(p, o);
    case SolveMethod::Implicit:
        break;
    }
    return step_implicit(p, o);
}

inline std::string utc_now() {
    const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

/// Shared setup of one sweep: grid, operator, mollifier and specs.
struct SweepContext {
    const SweepConfig& cfg;
    GridPtr grid;
    DiscreteRockland op;
    Mollifier psi;
    PotentialSpec potential;
    InitialSpec u0;

    explicit SweepContext(const SweepConfig& c)
        : cfg(c), grid(c.make_grid()), op(build_canonical_operator(grid)), psi(grid->dimension()),
          potential(potential_spec(c, grid)), u0(initial_spec(c, grid)) {
        if (cfg.epsilons.empty()) {
            throw ArgumentError("sweep needs a nonempty epsilon net");
        }
        (void)EpsilonNet(cfg.epsilons);
    }

    Field V(double eps) const {
        return regularize_potential(potential, eps, cfg.v_schedule(), psi, grid, cfg.quadrature_points);
    }
    Field u0_eps(double eps) const {
        return regularize_initial(u0, eps, cfg.u0_schedule(), psi, grid, cfg.quadrature_points);
    }
    double omega(double eps) const { return hypoheat::omega(cfg.schedule, eps); }
};

template <typename Solve>
SweepReport run_sweep(const SweepConfig& cfg, Experiment kind, Solve&& solve_one) {
    const auto start = std::chrono::steady_clock::now();
    SweepReport report;
    report.experiment = kind;
    report.started_utc = utc_now();
    report.canonical_config = canonical_config(cfg);
    report.records.resize(cfg.epsilons.size());
    parallel_for(cfg.epsilons.size(), cfg.threads, [&](std::size_t i) {
        EpsilonRecord& r = report.records[i];
        r.epsilon = cfg.epsilons[i];
        try {
            solve_one(i, r);
        } catch (...) {
            auto e = std::current_exception();
            if (!recoverable(e)) {
                throw;
            }
            r.error = what(e);
        }
    });
    report.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return report;
}

inline std::optional<std::string> first_error(const SweepReport& r) {
    for (const auto& rec : r.records) {
        if (rec.error) {
            char buf[48];
            std::snprintf(buf, sizeof buf, "eps=%.6g: ", rec.epsilon);
            return buf + *rec.error;
        }
    }
    return std::nullopt;
}

inline std::vector<std::pair<double, double>> pairs_of(const SweepReport& r, bool use_epsilon = false) {
    std::vector<std::pair<double, double>> out;
    for (const auto& rec : r.records) {
        out.emplace_back(use_epsilon ? rec.epsilon : rec.omega, rec.norm_sup_t);
    }
    return out;
}

inline std::string fmt_fit(const char* label, const FitResult& f) {
    char buf[160];
    std::snprintf(buf, sizeof buf, "%s: %.17g (stderr %.3g, %zu points)", label, f.exponent, f.stderr_, f.points);
    return buf;
}

inline const char* kScopeNote =
    "scope: negligibility is tested for the configured perturbation family only, not for all moderate nets; "
    "'for all k' is approximated by a fitted decay order >= k_max";

} // namespace detail

/// For each eps: regularise V and u0, solve, record the sup over recorded
/// times of the norm under test; the verdict is check_moderate on the fit
/// against omega(eps).
inline SweepReport existence_experiment(const SweepConfig& cfg) {
    if (cfg.experiment != Experiment::Existence) {
        throw ArgumentError("existence_experiment needs experiment = existence");
    }
    const detail::SweepContext ctx(cfg);
    const bool nonneg = ctx.potential.sign_class() == SignClass::NonNegative;
    const NormKind norm = cfg.norm == NormKind::Auto ? (nonneg ? NormKind::Hnu2 : NormKind::L2) : cfg.norm;
    const double nu = ctx.op.degree();

    SweepReport report = detail::run_sweep(cfg, Experiment::Existence, [&](std::size_t, EpsilonRecord& r) {
        r.omega = ctx.omega(r.epsilon);
        const Field V = ctx.V(r.epsilon);
        const Field u0 = ctx.u0_eps(r.epsilon);
        r.v_linf = lp_norm(V, kInf);
        r.majorant = nonneg ? (1.0 + r.v_linf) * hs_norm(u0, 0.5 * nu, ctx.op)
                            : std::exp(cfg.T * r.v_linf) * lp_norm(u0, 2.0);
        const CauchyProblem p{ctx.op, V, u0, cfg.T, cfg.dt};
        const bool needs_states = norm == NormKind::Linf || norm == NormKind::Lp;
        const Trajectory traj = detail::run_solver(cfg, p, needs_states ? 1 : 0);
        double sup = 0.0;
        if (needs_states) {
            const double pp = norm == NormKind::Linf ? kInf : cfg.norm_p;
            for (const Field& u : traj.states) {
                sup = std::max(sup, lp_norm(u, pp));
            }
        } else {
            for (const NormRecord& n : traj.norms) {
                sup = std::max(sup, norm == NormKind::L2 ? n.l2 : n.h_nu2);
            }
        }
        r.norm_sup_t = sup;
    });

    if (auto err = detail::first_error(report)) {
        report.verdict = Verdict::fail(*err);
        return report;
    }
    for (auto& rec : report.records) {
        rec.fitted = true;
    }
    report.fit = fit_exponent(detail::pairs_of(report));
    report.fit_epsilon = fit_exponent(detail::pairs_of(report, true));
    std::vector<std::pair<double, double>> maj;
    for (const auto& rec : report.records) {
        maj.emplace_back(rec.omega, rec.majorant);
    }
    report.majorant_fit = fit_exponent(maj);
    report.verdict = check_moderate(*report.fit, cfg.N_max);
    report.notes.push_back(detail::fmt_fit("fitted_exponent_omega", *report.fit));
    report.notes.push_back(detail::fmt_fit("fitted_exponent_epsilon", *report.fit_epsilon));
    report.notes.push_back(detail::fmt_fit("majorant_exponent_omega", *report.majorant_fit));
    report.notes.push_back(std::string("norm: ") +
                           (norm == NormKind::L2     ? "l2"
                            : norm == NormKind::Hnu2 ? "hnu2"
                            : norm == NormKind::Linf ? "linf"
                                                     : "lp:" + detail::fmt(cfg.norm_p)));
    return report;
}

namespace detail {

/// sup_t ||u~(t) - u(t)||_{L^2}. For backward Euler the difference
/// U = u~ - u is integrated directly,
///   (I + dt (R + V~)) U^{n+1} = U^n - dt (V~ - V) u^{n+1},
/// which is the difference of the two runs without the cancellation error
/// of subtracting them.
inline double difference_sup(const SweepConfig& cfg, const CauchyProblem& p, const Field& V_tilde,
                             const Field& u0_tilde) {
    if (cfg.method != SolveMethod::Implicit || cfg.scheme != TimeScheme::BackwardEuler) {
        CauchyProblem q = p;
        q.V = V_tilde;
        q.u0 = u0_tilde;
        const Trajectory a = run_solver(cfg, p, 1);
        const Trajectory b = run_solver(cfg, q, 1);
        double sup = 0.0;
        for (std::size_t i = 0; i < a.states.size(); ++i) {
            sup = std::max(sup, lp_norm(b.states[i] - a.states[i], 2.0));
        }
        return sup;
    }
    p.validate();
    const double dt = p.effective_dt();
    for (const Field* v : {&p.V, &V_tilde}) {
        const double v_minus = std::max(0.0, -v->min());
        if (dt * v_minus >= 1.0) {
            throw StabilityError("dt = " + std::to_string(dt) + " too large for ||V^-||_inf = " +
                                 std::to_string(v_minus));
        }
    }
    CauchyProblem q = p;
    q.V = V_tilde;
    const ImplicitSolver base(shifted_operator(p, dt), cfg.residual_tol);
    const ImplicitSolver tilde(shifted_operator(q, dt), cfg.residual_tol);
    const Eigen::VectorXd dv = V_tilde.values() - p.V.values();
    Eigen::VectorXd u = p.u0.values();
    Eigen::VectorXd U = u0_tilde.values() - p.u0.values();
    double sup = lp_norm(Field(p.op.grid_ptr(), U), 2.0);
    for (std::size_t n = 1; n <= p.steps(); ++n) {
        u = base.solve(u);
        U = tilde.solve(U - dt * dv.cwiseProduct(u));
        sup = std::max(sup, lp_norm(Field(p.op.grid_ptr(), U), 2.0));
    }
    return sup;
}

} // namespace detail

/// Solves the eps-problems with (V_eps, u0_eps) and with the perturbed
/// (V_eps + eta, u0_eps + eta b), b a unit-L^2 bump, and checks that the
/// sup_t L^2 difference net is negligible.
inline SweepReport uniqueness_experiment(const SweepConfig& cfg) {
    if (cfg.experiment != Experiment::Uniqueness) {
        throw ArgumentError("uniqueness_experiment needs experiment = uniqueness");
    }
    const detail::SweepContext ctx(cfg);
    const GroupInstance g = ctx.grid->group();
    Field unit = Field::from_function(ctx.grid, [&](std::span<const double> x) {
        return BumpProfile{1.0, 0.5 * *std::min_element(cfg.half_widths.begin(), cfg.half_widths.end()), {}}(x, g);
    });
    unit = unit * (1.0 / lp_norm(unit, 2.0));

    SweepReport report = detail::run_sweep(cfg, Experiment::Uniqueness, [&](std::size_t, EpsilonRecord& r) {
        r.omega = ctx.omega(r.epsilon);
        const Field V = ctx.V(r.epsilon);
        const Field u0 = ctx.u0_eps(r.epsilon);
        const double eta = cfg.perturbation.amount(r.epsilon, r.omega);
        const Field V_tilde = V + Field::constant(ctx.grid, eta);
        const Field u0_tilde = u0 + eta * unit;
        const CauchyProblem p{ctx.op, V, u0, cfg.T, cfg.dt};
        r.norm_sup_t = eta == 0.0 ? 0.0 : detail::difference_sup(cfg, p, V_tilde, u0_tilde);
    });

    report.notes.push_back(detail::kScopeNote);
    if (auto err = detail::first_error(report)) {
        report.verdict = Verdict::fail(*err);
        return report;
    }
    const auto pairs = detail::pairs_of(report);
    const NegligibleFit nf = negligible_fit(pairs);
    for (std::size_t i = 0; i < report.records.size(); ++i) {
        report.records[i].fitted = nf.fitted[i];
    }
    report.fit = nf.fit;
    report.verdict = check_negligible(pairs, cfg.k_max);
    if (nf.fit) {
        report.notes.push_back(detail::fmt_fit("fitted_exponent_omega", *nf.fit));
    }
    return report;
}

/// e(eps) = sup_t ||u_eps(t) - u(t)||_{L^2} against the classical solution
/// with the unregularised V and u0. Passes when e is strictly decreasing and
/// the last value is below consistency_ratio * e(eps_max).
inline SweepReport consistency_experiment(const SweepConfig& cfg) {
    if (cfg.experiment != Experiment::Consistency) {
        throw ArgumentError("consistency_experiment needs experiment = consistency");
    }
    const detail::SweepContext ctx(cfg);
    const std::optional<Field> V_classical = ctx.potential.sample(ctx.grid);
    if (!V_classical) {
        throw ArgumentError("consistency needs a continuous potential (C0 hypothesis); delta-type potentials "
                            "have no classical solution");
    }
    const Field u0_classical = sample_initial(ctx.u0, ctx.grid);
    const Trajectory reference =
        detail::run_solver(cfg, CauchyProblem{ctx.op, *V_classical, u0_classical, cfg.T, cfg.dt}, 1);

    SweepReport report = detail::run_sweep(cfg, Experiment::Consistency, [&](std::size_t, EpsilonRecord& r) {
        r.omega = ctx.omega(r.epsilon);
        const CauchyProblem p{ctx.op, ctx.V(r.epsilon), ctx.u0_eps(r.epsilon), cfg.T, cfg.dt};
        r.v_linf = lp_norm(p.V - *V_classical, kInf);
        const Trajectory traj = detail::run_solver(cfg, p, 1);
        double sup = 0.0;
        for (std::size_t i = 0; i < traj.states.size(); ++i) {
            sup = std::max(sup, lp_norm(traj.states[i] - reference.states[i], 2.0));
        }
        r.norm_sup_t = sup;
    });

    if (auto err = detail::first_error(report)) {
        report.verdict = Verdict::fail(*err);
        return report;
    }
    const auto& rec = report.records;
    bool all_positive = true;
    for (const auto& x : rec) {
        all_positive = all_positive && x.norm_sup_t > 0.0;
    }
    if (all_positive && rec.size() >= 4) {
        report.fit = fit_exponent(detail::pairs_of(report));
        for (auto& x : report.records) {
            x.fitted = true;
        }
        report.notes.push_back(detail::fmt_fit("fitted_exponent_omega", *report.fit));
    }
    const double first = rec.front().norm_sup_t;
    const double last = rec.back().norm_sup_t;
    if (first == 0.0 && last == 0.0) {
        report.verdict = Verdict::converged(0.0);
        return report;
    }
    for (std::size_t i = 1; i < rec.size(); ++i) {
        if (!(rec[i].norm_sup_t < rec[i - 1].norm_sup_t)) {
            char buf[128];
            std::snprintf(buf, sizeof buf, "e(eps) not strictly decreasing at eps=%.6g", rec[i].epsilon);
            report.verdict = Verdict::fail(buf);
            return report;
        }
    }
    const double ratio = last / first;
    if (!(ratio < cfg.consistency_ratio)) {
        char buf[128];
        std::snprintf(buf, sizeof buf, "final error ratio %.6g not below %.6g", ratio, cfg.consistency_ratio);
        report.verdict = Verdict::fail(buf);
        return report;
    }
    report.verdict = Verdict::converged(ratio);
    return report;
}

inline SweepReport run_experiment(const SweepConfig& cfg) {
    switch (cfg.experiment) {
    case Experiment::Uniqueness:
        return uniqueness_experiment(cfg);
    case Experiment::Consistency:
        return consistency_experiment(cfg);
    case Experiment::Existence:
        break;
    }
    return existence_experiment(cfg);
}

} // namespace hypoheat
