#pragma once

// Time integration of u_t + R u + V u = 0, u(0) = u0: backward Euler (or
// Crank-Nicolson), a Duhamel/Picard integrator in spectral coordinates, and a
// dense matrix-exponential oracle for small grids.

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "hypoheat/error.hpp"
#include "hypoheat/group.hpp"
#include "hypoheat/norms.hpp"
#include "hypoheat/operators.hpp"

namespace hypoheat {

inline constexpr double kDefaultResidualTolerance = 1e-12;
inline constexpr std::size_t kDefaultPicardDepth = 8;
inline constexpr double kPicardTolerance = 1e-12;

struct CauchyProblem {
    DiscreteRockland op;
    Field V;
    Field u0;
    double T = 1.0;
    double dt = 0.01;

    void validate() const {
        op.check_grid(V);
        op.check_grid(u0);
        if (!(T > 0.0) || !std::isfinite(T)) {
            throw ArgumentError("T must be positive");
        }
        if (!(dt > 0.0) || !(dt <= T)) {
            throw ArgumentError("dt must satisfy 0 < dt <= T");
        }
    }

    /// ceil(T/dt), ignoring roundoff in the quotient.
    std::size_t steps() const {
        return static_cast<std::size_t>(std::max(1.0, std::ceil(T / dt - 1e-9)));
    }

    /// T / steps(); the step the integrators actually take.
    double effective_dt() const { return T / static_cast<double>(steps()); }
};

struct NormRecord {
    double l2 = 0.0;
    double sobolev_nu2 = 0.0;
    double h_nu2 = 0.0;
    /// Only defined for V >= 0.
    std::optional<double> energy;
};

struct Trajectory {
    std::vector<double> times;
    std::vector<NormRecord> norms;
    /// Thinned states; the first and last time are always kept.
    std::vector<double> state_times;
    std::vector<Field> states;

    const Field& final_state() const { return states.back(); }
};

enum class TimeScheme { BackwardEuler, CrankNicolson };

struct SolverOptions {
    TimeScheme scheme = TimeScheme::BackwardEuler;
    double residual_tolerance = kDefaultResidualTolerance;
    /// Keep every k-th state; 0 means max(1, steps/64).
    std::size_t thinning = 0;
};

/// E = ||sqrt(R) u||^2 + ||sqrt(V) u||^2; only defined for V >= 0.
inline double energy(const Field& u, const Field& V, const DiscreteRockland& op) {
    op.check_grid(u);
    op.check_grid(V);
    if (V.min() < 0.0) {
        throw ArgumentError("energy is only defined for V >= 0; use apriori_ratios(RealGronwall) for real V");
    }
    const double s = homogeneous_sobolev_norm(u, 0.5 * op.degree(), op);
    return s * s + inner(V.pointwise(u), u);
}

namespace detail {

inline NormRecord record_norms(const Field& u, const Field& V, const DiscreteRockland& op, bool with_energy) {
    NormRecord r;
    r.l2 = lp_norm(u, 2.0);
    r.sobolev_nu2 = homogeneous_sobolev_norm(u, 0.5 * op.degree(), op);
    r.h_nu2 = r.l2 + r.sobolev_nu2;
    if (with_energy) {
        r.energy = r.sobolev_nu2 * r.sobolev_nu2 + inner(V.pointwise(u), u);
    }
    return r;
}

class TrajectoryBuilder {
public:
    TrajectoryBuilder(const CauchyProblem& p, const SolverOptions& o)
        : p_(p), with_energy_(p.V.min() >= 0.0), steps_(p.steps()),
          thinning_(o.thinning > 0 ? o.thinning : std::max<std::size_t>(1, steps_ / 64)) {
        traj_.times.reserve(steps_ + 1);
        traj_.norms.reserve(steps_ + 1);
    }

    void push(std::size_t n, const Field& u) {
        const double t = n == steps_ ? p_.T : static_cast<double>(n) * p_.effective_dt();
        traj_.times.push_back(t);
        traj_.norms.push_back(record_norms(u, p_.V, p_.op, with_energy_));
        if (n % thinning_ == 0 || n == steps_) {
            traj_.state_times.push_back(t);
            traj_.states.push_back(u);
        }
    }

    Trajectory finish() { return std::move(traj_); }

private:
    const CauchyProblem& p_;
    bool with_energy_;
    std::size_t steps_;
    std::size_t thinning_;
    Trajectory traj_;
};

inline SparseMatrix shifted_operator(const CauchyProblem& p, double scale) {
    // I + scale (R + diag V)
    const auto n = static_cast<Eigen::Index>(p.op.grid().dof());
    SparseMatrix diag(n, n);
    std::vector<Eigen::Triplet<double>> t;
    t.reserve(static_cast<std::size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i) {
        t.emplace_back(i, i, 1.0 + scale * p.V.values()[i]);
    }
    diag.setFromTriplets(t.begin(), t.end());
    SparseMatrix a = diag + scale * p.op.matrix();
    a.makeCompressed();
    return a;
}

/// LDL^T solve with one pass of iterative refinement when the relative
/// residual misses the tolerance.
class ImplicitSolver {
public:
    ImplicitSolver(SparseMatrix a, double tolerance) : a_(std::move(a)), tolerance_(tolerance) {
        ldlt_.compute(a_);
        if (ldlt_.info() != Eigen::Success) {
            throw StabilityError("factorisation of I + dt (R + V) failed");
        }
    }

    Eigen::VectorXd solve(const Eigen::VectorXd& b) const {
        Eigen::VectorXd x = ldlt_.solve(b);
        const double bn = b.norm();
        if (bn == 0.0) {
            return x;
        }
        Eigen::VectorXd r = b - a_ * x;
        if (r.norm() > tolerance_ * bn) {
            x += ldlt_.solve(r);
            r = b - a_ * x;
            if (r.norm() > tolerance_ * bn) {
                throw StabilityError("linear solve residual " + std::to_string(r.norm() / bn) +
                                     " exceeds tolerance " + std::to_string(tolerance_));
            }
        }
        return x;
    }

    const SparseMatrix& matrix() const { return a_; }

private:
    SparseMatrix a_;
    double tolerance_;
    Eigen::SimplicialLDLT<SparseMatrix> ldlt_;
};

} // namespace detail

/// u^{n+1} = (I + dt (R + V))^{-1} u^n, norms recorded at every step.
/// Needs dt ||V^-||_inf < 1 (dt/2 for Crank-Nicolson) so the system is SPD.
inline Trajectory step_implicit(const CauchyProblem& p, const SolverOptions& options = {}) {
    p.validate();
    const double dt = p.effective_dt();
    const bool cn = options.scheme == TimeScheme::CrankNicolson;
    const double theta = cn ? 0.5 : 1.0;
    const double v_minus = std::max(0.0, -p.V.min());
    if (theta * dt * v_minus >= 1.0) {
        throw StabilityError("dt = " + std::to_string(dt) + " too large for ||V^-||_inf = " +
                             std::to_string(v_minus) + "; need dt < " + std::to_string(1.0 / (theta * v_minus)));
    }
    const detail::ImplicitSolver solver(detail::shifted_operator(p, theta * dt), options.residual_tolerance);
    SparseMatrix explicit_part;
    if (cn) {
        explicit_part = detail::shifted_operator(p, -0.5 * dt);
    }

    detail::TrajectoryBuilder out(p, options);
    Eigen::VectorXd u = p.u0.values();
    out.push(0, p.u0);
    for (std::size_t n = 1; n <= p.steps(); ++n) {
        u = solver.solve(cn ? Eigen::VectorXd(explicit_part * u) : u);
        out.push(n, Field(p.op.grid_ptr(), u));
    }
    return out.finish();
}

/// Picard iteration on the Duhamel form
///   u(t) = e^{-tR} u0 - int_0^t e^{-(t-s)R} (V u(s)) ds
/// with the trapezoid rule on the solver's time grid, carried out in the
/// spectral coordinates of R.
inline Trajectory solve_duhamel(const CauchyProblem& p, std::size_t n_picard = kDefaultPicardDepth,
                                const SolverOptions& options = {}) {
    p.validate();
    const Spectrum& spec = p.op.spectrum();
    const std::size_t steps = p.steps();
    const double dt = p.effective_dt();
    const Eigen::MatrixXd& lambda = spec.eigenvalues();
    const Eigen::MatrixXd decay = (-dt * lambda).array().exp().matrix();

    std::vector<Eigen::VectorXd> iterate(steps + 1);
    std::vector<Eigen::MatrixXcd> free(steps + 1);
    free[0] = spec.forward(p.u0.values());
    iterate[0] = p.u0.values();
    for (std::size_t n = 1; n <= steps; ++n) {
        free[n] = free[n - 1].cwiseProduct(decay.cast<std::complex<double>>());
        iterate[n] = spec.backward(free[n]);
    }

    double update = 0.0;
    for (std::size_t m = 0; m < n_picard; ++m) {
        std::vector<Eigen::MatrixXcd> w(steps + 1);
        for (std::size_t n = 0; n <= steps; ++n) {
            w[n] = spec.forward(p.V.values().cwiseProduct(iterate[n]));
        }
        std::vector<Eigen::VectorXd> next(steps + 1);
        next[0] = p.u0.values();
        Eigen::MatrixXcd acc = w[0];
        Eigen::MatrixXcd w0_decayed = w[0];
        double diff = 0.0, scale = 0.0;
        for (std::size_t n = 1; n <= steps; ++n) {
            acc = acc.cwiseProduct(decay.cast<std::complex<double>>()) + w[n];
            w0_decayed = w0_decayed.cwiseProduct(decay.cast<std::complex<double>>());
            const Eigen::MatrixXcd integral = dt * (acc - 0.5 * w0_decayed - 0.5 * w[n]);
            next[n] = spec.backward(free[n] - integral);
            diff = std::max(diff, (next[n] - iterate[n]).norm());
            scale = std::max(scale, iterate[n].norm());
        }
        iterate = std::move(next);
        update = scale > 0.0 ? diff / scale : diff;
        if (update < kPicardTolerance) {
            break;
        }
    }
    if (update > 1.0) {
        throw ConvergenceError("Picard iteration did not converge: relative update " + std::to_string(update) +
                               " after " + std::to_string(n_picard) + " iterations");
    }

    detail::TrajectoryBuilder out(p, options);
    for (std::size_t n = 0; n <= steps; ++n) {
        out.push(n, Field(p.op.grid_ptr(), iterate[n]));
    }
    return out.finish();
}

/// Exact u(t) = e^{-t(R + V)} u0 from a dense eigendecomposition of
/// R + diag(V), on the same time grid as step_implicit.
inline Trajectory oracle_expm(const CauchyProblem& p, const SolverOptions& options = {}) {
    p.validate();
    const std::size_t dof = p.op.grid().dof();
    if (dof > p.op.spectral_dof_limit()) {
        throw CapabilityError("oracle_expm needs dof <= " + std::to_string(p.op.spectral_dof_limit()) +
                              " but grid has " + std::to_string(dof));
    }
    Eigen::MatrixXd m = Eigen::MatrixXd(p.op.matrix());
    m.diagonal() += p.V.values();
    m = (0.5 * (m + m.transpose())).eval();
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(m);
    if (eig.info() != Eigen::Success) {
        throw CapabilityError("dense eigendecomposition of R + V failed");
    }
    const Eigen::VectorXd coeff0 = eig.eigenvectors().transpose() * p.u0.values();
    const double dt = p.effective_dt();

    detail::TrajectoryBuilder out(p, options);
    out.push(0, p.u0);
    for (std::size_t n = 1; n <= p.steps(); ++n) {
        const double t = n == p.steps() ? p.T : static_cast<double>(n) * dt;
        const Eigen::VectorXd c = coeff0.cwiseProduct((-t * eig.eigenvalues()).array().exp().matrix());
        out.push(n, Field(p.op.grid_ptr(), eig.eigenvectors() * c));
    }
    return out.finish();
}

enum class AprioriBound { PosLinf, PosLp, RealGronwall };

/// Measured norm over the a priori right-hand side (without its unknown
/// constant), at every recorded time.
///   PosLinf:      ||u||_{H^{nu/2}} / ((1 + ||V||_inf) ||u0||_{H^{nu/2}})
///   PosLp:        ||u||_{H^{nu/2}} / ((1 + ||V||_{2Q/nu}) (1 + ||V||_{Q/nu})^{1/2} ||u0||_{H^{nu/2}})
///   RealGronwall: ||u||_{L^2} / (exp(t ||V||_inf) ||u0||_{L^2})
inline std::vector<double> apriori_ratios(const Trajectory& traj, const Field& V, const Field& u0,
                                          const DiscreteRockland& op, AprioriBound which) {
    op.check_grid(V);
    op.check_grid(u0);
    const double Q = op.grid().group().homogeneous_dimension();
    const double nu = op.degree();
    if (which == AprioriBound::PosLp && !(Q > nu)) {
        throw ArgumentError("PosLp bound needs Q > nu, got Q = " + std::to_string(Q));
    }
    if (which != AprioriBound::RealGronwall && V.min() < 0.0) {
        throw ArgumentError("positive-potential bounds need V >= 0");
    }
    std::vector<double> out(traj.times.size(), 0.0);
    if (u0.values().cwiseAbs().maxCoeff() == 0.0) {
        return out;
    }
    const double vinf = lp_norm(V, kInf);
    double base = 0.0;
    switch (which) {
    case AprioriBound::PosLinf:
        base = (1.0 + vinf) * hs_norm(u0, 0.5 * nu, op);
        break;
    case AprioriBound::PosLp:
        base = (1.0 + lp_norm(V, 2.0 * Q / nu)) * std::sqrt(1.0 + lp_norm(V, Q / nu)) * hs_norm(u0, 0.5 * nu, op);
        break;
    case AprioriBound::RealGronwall:
        base = lp_norm(u0, 2.0);
        break;
    }
    for (std::size_t i = 0; i < traj.times.size(); ++i) {
        if (which == AprioriBound::RealGronwall) {
            out[i] = traj.norms[i].l2 / (std::exp(traj.times[i] * vinf) * base);
        } else {
            out[i] = traj.norms[i].h_nu2 / base;
        }
    }
    return out;
}

} // namespace hypoheat
