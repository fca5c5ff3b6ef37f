#pragma once

// L^p, homogeneous Sobolev and inhomogeneous H^s norms of grid functions.
// Sums run in node order with compensated summation, so results do not
// depend on how callers are scheduled.

#include <cmath>
#include <limits>
#include <span>

#include "hypoheat/error.hpp"
#include "hypoheat/group.hpp"
#include "hypoheat/operators.hpp"

namespace hypoheat {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

/// Neumaier-compensated sum in index order.
inline double compensated_sum(std::span<const double> values) {
    double sum = 0.0, c = 0.0;
    for (double v : values) {
        const double t = sum + v;
        if (std::abs(sum) >= std::abs(v)) {
            c += (sum - t) + v;
        } else {
            c += (v - t) + sum;
        }
        sum = t;
    }
    return sum + c;
}

/// <f, g>_{L^2} = sum f g |cell|.
inline double inner(const Field& f, const Field& g) {
    if (!f.same_grid(g)) {
        throw ArgumentError("inner: fields live on different grids");
    }
    const Eigen::VectorXd prod = f.values().cwiseProduct(g.values());
    return compensated_sum(std::span<const double>(prod.data(), static_cast<std::size_t>(prod.size()))) *
           f.grid().cell_volume();
}

/// (sum |f|^p |cell|)^{1/p}; p = infinity gives max |f|. Scaled by max |f|
/// so large p cannot overflow.
inline double lp_norm(const Field& f, double p) {
    if (std::isnan(p) || p < 1.0) {
        throw ArgumentError("lp_norm: p must be >= 1 or infinity");
    }
    const double m = f.values().cwiseAbs().maxCoeff();
    if (m == 0.0 || std::isinf(p)) {
        return m;
    }
    Eigen::VectorXd terms(f.values().size());
    for (Eigen::Index i = 0; i < terms.size(); ++i) {
        const double r = std::abs(f.values()[i]) / m;
        terms[i] = p == 2.0 ? r * r : (p == 1.0 ? r : std::pow(r, p));
    }
    const double s = compensated_sum(std::span<const double>(terms.data(), static_cast<std::size_t>(terms.size())));
    return m * std::pow(s * f.grid().cell_volume(), 1.0 / p);
}

/// ||R^{s/nu} f||_{L^2}. s = nu/2 goes through the quadratic form
/// sqrt(<Rf, f>) and s = nu through ||Rf||, which need no spectrum.
inline double homogeneous_sobolev_norm(const Field& f, double s, const DiscreteRockland& op) {
    op.check_grid(f);
    if (!(s >= 0.0) || !std::isfinite(s)) {
        throw ArgumentError("homogeneous_sobolev_norm: s must be a nonnegative real");
    }
    const double ratio = s / static_cast<double>(op.degree());
    if (ratio == 0.0) {
        return lp_norm(f, 2.0);
    }
    if (ratio == 0.5) {
        const Eigen::VectorXd rf = op.matrix() * f.values();
        const Eigen::VectorXd prod = rf.cwiseProduct(f.values());
        const double q = compensated_sum(std::span<const double>(prod.data(), static_cast<std::size_t>(prod.size()))) *
                         f.grid().cell_volume();
        return std::sqrt(std::max(q, 0.0));
    }
    if (ratio == 1.0) {
        return lp_norm(op.apply(f), 2.0);
    }
    return lp_norm(fractional_power(op, ratio, f), 2.0);
}

/// ||f||_{H^s} = ||f||_{L^2} + ||f||_{L^2_s homogeneous}.
inline double hs_norm(const Field& f, double s, const DiscreteRockland& op) {
    return lp_norm(f, 2.0) + homogeneous_sobolev_norm(f, s, op);
}

/// ||R^{a/nu} f||_{L^{q0}} / ||R^{b/nu} f||_{L^{q0~}} for exponents with
/// b - a = Q (1/q0~ - 1/q0).
inline double embedding_ratio(const Field& f, double q_tilde, double q0, double b, double a,
                              const DiscreteRockland& op, double Q) {
    if (!(1.0 < q_tilde && q_tilde < q0 && std::isfinite(q0))) {
        throw ArgumentError("embedding_ratio: need 1 < q0~ < q0 < infinity");
    }
    if (!(a >= 0.0 && b >= 0.0)) {
        throw ArgumentError("embedding_ratio: smoothness indices must be nonnegative");
    }
    if (std::abs((b - a) - Q * (1.0 / q_tilde - 1.0 / q0)) > 1e-12) {
        throw ArgumentError("embedding_ratio: exponents violate b - a = Q (1/q0~ - 1/q0)");
    }
    if (f.values().cwiseAbs().maxCoeff() == 0.0) {
        throw DegenerateInputError("embedding_ratio: f is identically zero");
    }
    const double nu = static_cast<double>(op.degree());
    const double denominator = lp_norm(fractional_power(op, b / nu, f), q_tilde);
    if (denominator <= 1e-12 * lp_norm(f, q_tilde) * std::pow(op.spectrum().max_eigenvalue(), b / nu)) {
        throw DegenerateInputError("embedding_ratio: ||R^{b/nu} f|| vanishes (f in the kernel)");
    }
    return lp_norm(fractional_power(op, a / nu, f), q0) / denominator;
}

} // namespace hypoheat
