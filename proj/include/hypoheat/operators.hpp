#pragma once

// Discrete positive Rockland operators: the periodic finite-difference
// Laplacian on R^d and the sub-Laplacian -(X^2 + Y^2) on H1, plus their
// spectral calculus (fractional powers, heat semigroup).

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <cmath>
#include <complex>
#include <cstddef>
#include <memory>
#include <mutex>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "hypoheat/error.hpp"
#include "hypoheat/group.hpp"

namespace hypoheat {

using SparseMatrix = Eigen::SparseMatrix<double>;

inline constexpr std::size_t kDefaultSpectralDofLimit = 6000;
inline constexpr double kEigenClampTolerance = 1e-10;

/// Eigendecomposition of a symmetric matrix that is circulant along the
/// last grid axis. A unitary DFT along that axis splits it into Hermitian
/// blocks R_m, one per wavenumber m; eigenvectors are phi_{j,m} (x) w_m.
/// A matrix without that structure is treated as a single dense block.
class Spectrum {
public:
    Spectrum(const SparseMatrix& matrix, std::size_t period) {
        const auto dof = static_cast<std::size_t>(matrix.rows());
        period_ = (period > 1 && dof % period == 0 && is_circulant(matrix, period)) ? period : 1;
        block_size_ = dof / period_;

        const double n = static_cast<double>(period_);
        dft_.resize(static_cast<Eigen::Index>(period_), static_cast<Eigen::Index>(period_));
        for (std::size_t k = 0; k < period_; ++k) {
            for (std::size_t m = 0; m < period_; ++m) {
                const double theta = 2.0 * std::numbers::pi * static_cast<double>(m * k % period_) / n;
                dft_(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(m)) =
                    std::polar(1.0 / std::sqrt(n), theta);
            }
        }

        Eigen::SparseMatrix<double, Eigen::RowMajor> rows(matrix);
        const auto P = static_cast<Eigen::Index>(block_size_);
        eigenvalues_.resize(P, static_cast<Eigen::Index>(period_));
        vectors_.reserve(period_);
        for (std::size_t m = 0; m < period_; ++m) {
            Eigen::MatrixXcd block = Eigen::MatrixXcd::Zero(P, P);
            const double theta = 2.0 * std::numbers::pi * static_cast<double>(m) / n;
            for (Eigen::Index p = 0; p < P; ++p) {
                const auto row = p * static_cast<Eigen::Index>(period_);
                for (decltype(rows)::InnerIterator it(rows, row); it; ++it) {
                    const auto col = static_cast<std::size_t>(it.col());
                    const auto q = static_cast<Eigen::Index>(col / period_);
                    const auto delta = static_cast<double>(col % period_);
                    block(p, q) += it.value() * std::polar(1.0, theta * delta);
                }
            }
            block = (0.5 * (block + block.adjoint())).eval();
            Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> solver(block);
            if (solver.info() != Eigen::Success) {
                throw CapabilityError("spectral decomposition failed for block " + std::to_string(m));
            }
            eigenvalues_.col(static_cast<Eigen::Index>(m)) = solver.eigenvalues();
            vectors_.push_back(solver.eigenvectors());
        }

        raw_min_ = eigenvalues_.minCoeff();
        max_ = eigenvalues_.maxCoeff();
        if (raw_min_ < -kEigenClampTolerance * std::max(max_, 0.0)) {
            throw DomainError("operator is not positive semidefinite: min eigenvalue " +
                              std::to_string(raw_min_));
        }
        // roundoff-level eigenvalues are kernel modes; small fractional
        // powers would otherwise lift them far above the noise floor
        const double floor = kEigenClampTolerance * std::max(max_, 0.0);
        eigenvalues_ = eigenvalues_.unaryExpr([floor](double l) { return l <= floor ? 0.0 : l; });
    }

    std::size_t period() const { return period_; }
    std::size_t block_size() const { return block_size_; }
    std::size_t size() const { return period_ * block_size_; }
    /// Eigenvalues with the roundoff floor snapped to zero; column m belongs to wavenumber block m.
    const Eigen::MatrixXd& eigenvalues() const { return eigenvalues_; }
    double max_eigenvalue() const { return max_; }
    /// Smallest eigenvalue before clamping roundoff negatives to zero.
    double raw_min_eigenvalue() const { return raw_min_; }

    /// Spectral coefficients <f, v_{j,m}> laid out like eigenvalues().
    Eigen::MatrixXcd forward(const Eigen::VectorXd& f) const {
        const auto P = static_cast<Eigen::Index>(block_size_);
        const auto N = static_cast<Eigen::Index>(period_);
        Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> fm(
            f.data(), P, N);
        Eigen::MatrixXcd F = fm.cast<std::complex<double>>() * dft_.conjugate();
        Eigen::MatrixXcd C(P, N);
        for (Eigen::Index m = 0; m < N; ++m) {
            C.col(m) = vectors_[static_cast<std::size_t>(m)].adjoint() * F.col(m);
        }
        return C;
    }

    Eigen::VectorXd backward(const Eigen::MatrixXcd& coefficients) const {
        const auto P = static_cast<Eigen::Index>(block_size_);
        const auto N = static_cast<Eigen::Index>(period_);
        Eigen::MatrixXcd F(P, N);
        for (Eigen::Index m = 0; m < N; ++m) {
            F.col(m) = vectors_[static_cast<std::size_t>(m)] * coefficients.col(m);
        }
        const Eigen::MatrixXd real = (F * dft_.transpose()).real();
        Eigen::VectorXd out(P * N);
        Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
            out.data(), P, N) = real;
        return out;
    }

    /// g(M) f for a scalar function g of the eigenvalue.
    template <typename Fn>
    Eigen::VectorXd apply(const Eigen::VectorXd& f, Fn&& g) const {
        Eigen::MatrixXcd c = forward(f);
        for (Eigen::Index m = 0; m < c.cols(); ++m) {
            for (Eigen::Index j = 0; j < c.rows(); ++j) {
                c(j, m) *= g(eigenvalues_(j, m));
            }
        }
        return backward(c);
    }

    /// Real unit eigenvector for eigenvalue (j, m). Real and imaginary parts
    /// of a complex eigenvector of a real symmetric matrix are eigenvectors.
    std::pair<double, Eigen::VectorXd> eigenpair(std::size_t j, std::size_t m) const {
        const auto P = static_cast<Eigen::Index>(block_size_);
        const auto N = static_cast<Eigen::Index>(period_);
        Eigen::MatrixXcd c = Eigen::MatrixXcd::Zero(P, N);
        c(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(m)) = 1.0;
        Eigen::MatrixXcd F(P, N);
        for (Eigen::Index k = 0; k < N; ++k) {
            F.col(k) = vectors_[static_cast<std::size_t>(k)] * c.col(k);
        }
        const Eigen::MatrixXcd full = F * dft_.transpose();
        Eigen::MatrixXd part = full.real();
        if (part.norm() < 0.5 * full.norm()) {
            part = full.imag();
        }
        Eigen::VectorXd v(P * N);
        Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
            v.data(), P, N) = part;
        v.normalize();
        return {eigenvalues_(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(m)), v};
    }

private:
    static bool is_circulant(const SparseMatrix& matrix, std::size_t period) {
        const auto dof = static_cast<std::size_t>(matrix.rows());
        auto shift = [&](const Eigen::VectorXd& f) {
            Eigen::VectorXd out(f.size());
            for (std::size_t i = 0; i < dof; ++i) {
                const std::size_t base = i - i % period;
                out[static_cast<Eigen::Index>(base + (i % period + 1) % period)] =
                    f[static_cast<Eigen::Index>(i)];
            }
            return out;
        };
        std::mt19937_64 rng(0x5eed);
        std::uniform_real_distribution<double> dist(-1.0, 1.0);
        Eigen::VectorXd f(static_cast<Eigen::Index>(dof));
        for (Eigen::Index i = 0; i < f.size(); ++i) {
            f[i] = dist(rng);
        }
        const Eigen::VectorXd lhs = matrix * shift(f);
        const Eigen::VectorXd rhs = shift(matrix * f);
        const double scale = std::max(1.0, (matrix * f).norm());
        return (lhs - rhs).norm() <= 1e-12 * scale;
    }

    std::size_t period_ = 1;
    std::size_t block_size_ = 0;
    Eigen::MatrixXcd dft_;
    Eigen::MatrixXd eigenvalues_;
    std::vector<Eigen::MatrixXcd> vectors_;
    double raw_min_ = 0.0;
    double max_ = 0.0;
};

/// Symmetric positive semidefinite operator on a grid, homogeneous of degree
/// nu. Copies share the lazily built spectral cache.
class DiscreteRockland {
public:
    DiscreteRockland(GridPtr grid, SparseMatrix matrix, int degree,
                     std::size_t spectral_dof_limit = kDefaultSpectralDofLimit)
        : grid_(std::move(grid)), matrix_(std::move(matrix)), degree_(degree),
          spectral_dof_limit_(spectral_dof_limit), cache_(std::make_shared<Cache>()) {
        if (static_cast<std::size_t>(matrix_.rows()) != grid_->dof() || matrix_.rows() != matrix_.cols()) {
            throw ArgumentError("operator matrix does not match grid dof");
        }
        if (degree_ < 1) {
            throw ArgumentError("operator degree must be positive");
        }
        matrix_.makeCompressed();
    }

    const Grid& grid() const { return *grid_; }
    const GridPtr& grid_ptr() const { return grid_; }
    const SparseMatrix& matrix() const { return matrix_; }
    int degree() const { return degree_; }
    std::size_t spectral_dof_limit() const { return spectral_dof_limit_; }

    Field apply(const Field& f) const {
        check_grid(f);
        return Field(grid_, matrix_ * f.values());
    }

    /// <Rf, f>_{L^2} with the grid's cell volume as measure.
    double quadratic_form(const Field& f) const {
        check_grid(f);
        return grid_->cell_volume() * f.values().dot(matrix_ * f.values());
    }

    bool has_spectrum() const {
        std::lock_guard lock(cache_->mutex);
        return cache_->spectrum != nullptr;
    }

    /// Spectral decomposition, built on first use. Throws CapabilityError
    /// above the dof limit.
    const Spectrum& spectrum() const {
        std::lock_guard lock(cache_->mutex);
        if (!cache_->spectrum) {
            if (grid_->dof() > spectral_dof_limit_) {
                throw CapabilityError("spectral decomposition needs dof <= " +
                                      std::to_string(spectral_dof_limit_) + " but grid has " +
                                      std::to_string(grid_->dof()) + "; use a smaller grid");
            }
            cache_->spectrum = std::make_shared<const Spectrum>(matrix_, grid_->points().back());
        }
        return *cache_->spectrum;
    }

    void check_grid(const Field& f) const {
        if (!(f.grid() == *grid_)) {
            throw ArgumentError("field lives on a different grid than the operator");
        }
    }

private:
    struct Cache {
        std::mutex mutex;
        std::shared_ptr<const Spectrum> spectrum;
    };

    GridPtr grid_;
    SparseMatrix matrix_;
    int degree_;
    std::size_t spectral_dof_limit_;
    std::shared_ptr<Cache> cache_;
};

inline DiscreteRockland build_euclidean_laplacian(const GridPtr& grid,
                                                  std::size_t spectral_dof_limit = kDefaultSpectralDofLimit) {
    if (grid->group().kind() != GroupKind::Euclidean) {
        throw ArgumentError("build_euclidean_laplacian needs a Euclidean grid, got " +
                            grid->group().name());
    }
    const std::size_t dof = grid->dof();
    std::vector<Eigen::Triplet<double>> triplets;
    triplets.reserve(dof * (1 + 2 * grid->dimension()));
    for (std::size_t i = 0; i < dof; ++i) {
        const auto row = static_cast<Eigen::Index>(i);
        for (std::size_t axis = 0; axis < grid->dimension(); ++axis) {
            const double w = 1.0 / (grid->spacing(axis) * grid->spacing(axis));
            triplets.emplace_back(row, row, 2.0 * w);
            triplets.emplace_back(row, static_cast<Eigen::Index>(grid->shifted(i, axis, 1)), -w);
            triplets.emplace_back(row, static_cast<Eigen::Index>(grid->shifted(i, axis, -1)), -w);
        }
    }
    const auto n = static_cast<Eigen::Index>(dof);
    SparseMatrix m(n, n);
    m.setFromTriplets(triplets.begin(), triplets.end());
    return DiscreteRockland(grid, std::move(m), grid->group().operator_degree(), spectral_dof_limit);
}

/// R = -(X^2 + Y^2) with X = d_a - (b/2) d_c and Y = d_b + (a/2) d_c,
/// expanded as
///   -d_aa - d_bb - ((a^2 + b^2)/4) d_cc + (b d_a - a d_b) d_c
/// and discretised with 3-point second differences and 4-point centered
/// mixed differences.
inline DiscreteRockland build_heisenberg_sublaplacian(const GridPtr& grid,
                                                      std::size_t spectral_dof_limit = kDefaultSpectralDofLimit) {
    if (grid->group().kind() != GroupKind::Heisenberg1) {
        throw ArgumentError("build_heisenberg_sublaplacian needs a Heisenberg grid, got " +
                            grid->group().name());
    }
    constexpr std::size_t A = 0, B = 1, C = 2;
    const double ha = grid->spacing(A), hb = grid->spacing(B), hc = grid->spacing(C);
    const std::size_t dof = grid->dof();
    std::vector<Eigen::Triplet<double>> triplets;
    triplets.reserve(dof * 15);
    for (std::size_t i = 0; i < dof; ++i) {
        const auto row = static_cast<Eigen::Index>(i);
        const double a = grid->coordinate(A, grid->axis_index(i, A));
        const double b = grid->coordinate(B, grid->axis_index(i, B));
        const double kappa = 0.25 * (a * a + b * b);
        auto add = [&](std::size_t col, double v) {
            triplets.emplace_back(row, static_cast<Eigen::Index>(col), v);
        };

        add(i, 2.0 / (ha * ha) + 2.0 / (hb * hb) + 2.0 * kappa / (hc * hc));
        add(grid->shifted(i, A, 1), -1.0 / (ha * ha));
        add(grid->shifted(i, A, -1), -1.0 / (ha * ha));
        add(grid->shifted(i, B, 1), -1.0 / (hb * hb));
        add(grid->shifted(i, B, -1), -1.0 / (hb * hb));
        add(grid->shifted(i, C, 1), -kappa / (hc * hc));
        add(grid->shifted(i, C, -1), -kappa / (hc * hc));

        const double wa = b / (4.0 * ha * hc);
        const double wb = -a / (4.0 * hb * hc);
        for (int sa : {1, -1}) {
            for (int sc : {1, -1}) {
                const double sign = sa * sc;
                add(grid->shifted(grid->shifted(i, A, sa), C, sc), sign * wa);
                add(grid->shifted(grid->shifted(i, B, sa), C, sc), sign * wb);
            }
        }
    }
    const auto n = static_cast<Eigen::Index>(dof);
    SparseMatrix m(n, n);
    m.setFromTriplets(triplets.begin(), triplets.end());
    SparseMatrix sym = 0.5 * (m + SparseMatrix(m.transpose()));
    sym.prune(0.0);
    return DiscreteRockland(grid, std::move(sym), grid->group().operator_degree(), spectral_dof_limit);
}

/// The canonical operator of the grid's group.
inline DiscreteRockland build_canonical_operator(const GridPtr& grid,
                                                 std::size_t spectral_dof_limit = kDefaultSpectralDofLimit) {
    if (grid->group().kind() == GroupKind::Heisenberg1) {
        return build_heisenberg_sublaplacian(grid, spectral_dof_limit);
    }
    return build_euclidean_laplacian(grid, spectral_dof_limit);
}

/// R^{s/nu} f = sum_k lambda_k^{s/nu} <f, v_k> v_k, with 0^0 = 1.
inline Field fractional_power(const DiscreteRockland& op, double s_over_nu, const Field& f) {
    op.check_grid(f);
    if (!(s_over_nu >= 0.0) || !std::isfinite(s_over_nu)) {
        throw ArgumentError("fractional_power: exponent must be a nonnegative real");
    }
    if (s_over_nu == 0.0) {
        return f;
    }
    const Spectrum& spec = op.spectrum();
    return Field(op.grid_ptr(), spec.apply(f.values(), [s_over_nu](double lambda) {
        return std::pow(lambda, s_over_nu);
    }));
}

/// e^{-tR} f through the spectral decomposition.
inline Field semigroup_apply(const DiscreteRockland& op, double t, const Field& f) {
    op.check_grid(f);
    if (!(t >= 0.0) || !std::isfinite(t)) {
        throw ArgumentError("semigroup_apply: t must be >= 0");
    }
    if (t == 0.0) {
        return f;
    }
    const Spectrum& spec = op.spectrum();
    return Field(op.grid_ptr(), spec.apply(f.values(), [t](double lambda) { return std::exp(-t * lambda); }));
}

} // namespace hypoheat
