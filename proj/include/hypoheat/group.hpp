#pragma once

// Graded groups (Euclidean R^d and the first Heisenberg group), their
// dilations and group laws, and the periodic grids every other module
// discretises on.
//
// Coordinates on H1 are exponential coordinates (a, b, c) with the law
//   (a1,b1,c1)(a2,b2,c2) = (a1+a2, b1+b2, c1+c2 + (a1*b2 - b1*a2)/2).
// Haar measure is Lebesgue measure in these coordinates, so the cell volume
// of a grid is the product of its spacings.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <memory>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "hypoheat/error.hpp"

namespace hypoheat {

using Point = std::vector<double>;

/// Dilation weights (nu_1, ..., nu_n) and the homogeneous dimension Q.
class DilationWeights {
public:
    explicit DilationWeights(std::vector<int> weights) : weights_(std::move(weights)) {
        if (weights_.empty()) {
            throw ArgumentError("dilation weights must be nonempty");
        }
        for (int w : weights_) {
            if (w < 1) {
                throw ArgumentError("dilation weights must be >= 1");
            }
        }
        homogeneous_dimension_ = std::accumulate(weights_.begin(), weights_.end(), 0);
    }

    const std::vector<int>& weights() const { return weights_; }
    int weight(std::size_t axis) const { return weights_.at(axis); }
    std::size_t size() const { return weights_.size(); }
    int homogeneous_dimension() const { return homogeneous_dimension_; }
    int min_weight() const { return *std::min_element(weights_.begin(), weights_.end()); }

    bool operator==(const DilationWeights&) const = default;

private:
    std::vector<int> weights_;
    int homogeneous_dimension_ = 0;
};

enum class GroupKind { Euclidean, Heisenberg1 };

class GroupInstance {
public:
    static GroupInstance euclidean(int d) {
        if (d < 1) {
            throw ArgumentError("Euclidean dimension must be >= 1");
        }
        return GroupInstance(GroupKind::Euclidean, DilationWeights(std::vector<int>(d, 1)));
    }

    static GroupInstance heisenberg1() {
        return GroupInstance(GroupKind::Heisenberg1, DilationWeights({1, 1, 2}));
    }

    GroupKind kind() const { return kind_; }
    const DilationWeights& weights() const { return weights_; }
    /// Topological dimension (number of coordinates).
    std::size_t dimension() const { return weights_.size(); }
    int homogeneous_dimension() const { return weights_.homogeneous_dimension(); }
    /// Homogeneous degree of the canonical Rockland operator (Laplacian or
    /// sub-Laplacian); 2 for both instances.
    int operator_degree() const { return 2; }

    std::string name() const {
        if (kind_ == GroupKind::Heisenberg1) {
            return "heisenberg1";
        }
        return "euclidean" + std::to_string(dimension());
    }

    bool operator==(const GroupInstance&) const = default;

private:
    GroupInstance(GroupKind kind, DilationWeights weights)
        : kind_(kind), weights_(std::move(weights)) {}

    GroupKind kind_;
    DilationWeights weights_;
};

/// D_r(x) = (r^{nu_1} x_1, ..., r^{nu_n} x_n).
inline Point dilate(std::span<const double> x, double r, const DilationWeights& w) {
    if (x.size() != w.size()) {
        throw ArgumentError("dilate: point has dimension " + std::to_string(x.size()) +
                            " but weights have " + std::to_string(w.size()));
    }
    if (!(r > 0.0)) {
        throw ArgumentError("dilate: r must be positive");
    }
    Point out(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        out[i] = std::pow(r, w.weight(i)) * x[i];
    }
    return out;
}

inline Point group_product(std::span<const double> x, std::span<const double> y,
                           const GroupInstance& g) {
    if (x.size() != g.dimension() || y.size() != g.dimension()) {
        throw ArgumentError("group_product: dimension mismatch");
    }
    Point out(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        out[i] = x[i] + y[i];
    }
    if (g.kind() == GroupKind::Heisenberg1) {
        out[2] += 0.5 * (x[0] * y[1] - x[1] * y[0]);
    }
    return out;
}

/// Inverse element; exponential coordinates make this plain negation on
/// both built-in groups.
inline Point group_inverse(std::span<const double> x, const GroupInstance& g) {
    if (x.size() != g.dimension()) {
        throw ArgumentError("group_inverse: dimension mismatch");
    }
    Point out(x.begin(), x.end());
    for (double& v : out) {
        v = -v;
    }
    return out;
}

enum class Boundary { Periodic };

/// Uniform periodic grid on the box prod_i [-L_i, L_i). Nodes sit at
/// x = -L_i + k h_i with h_i = 2 L_i / n_i; the last axis varies fastest in
/// the flat node index.
class Grid {
public:
    Grid(GroupInstance group, std::vector<double> half_widths, std::vector<std::size_t> points)
        : group_(std::move(group)), half_widths_(std::move(half_widths)), points_(std::move(points)) {
        const std::size_t n = group_.dimension();
        if (half_widths_.size() != n || points_.size() != n) {
            throw ArgumentError("grid: expected " + std::to_string(n) +
                                " half widths and point counts");
        }
        strides_.assign(n, 1);
        for (std::size_t i = n; i-- > 1;) {
            strides_[i - 1] = strides_[i] * points_[i];
        }
        dof_ = strides_[0] * points_[0];
        for (std::size_t i = 0; i < n; ++i) {
            spacing_.push_back(2.0 * half_widths_[i] / static_cast<double>(points_[i]));
        }
        cell_volume_ = std::accumulate(spacing_.begin(), spacing_.end(), 1.0, std::multiplies<>());
    }

    const GroupInstance& group() const { return group_; }
    std::size_t dimension() const { return group_.dimension(); }
    const std::vector<double>& half_widths() const { return half_widths_; }
    double half_width(std::size_t axis) const { return half_widths_.at(axis); }
    const std::vector<std::size_t>& points() const { return points_; }
    std::size_t points(std::size_t axis) const { return points_.at(axis); }
    double spacing(std::size_t axis) const { return spacing_.at(axis); }
    std::size_t stride(std::size_t axis) const { return strides_.at(axis); }
    std::size_t dof() const { return dof_; }
    double cell_volume() const { return cell_volume_; }
    Boundary boundary() const { return Boundary::Periodic; }

    double coordinate(std::size_t axis, std::size_t k) const {
        return -half_widths_[axis] + static_cast<double>(k) * spacing_[axis];
    }

    std::size_t axis_index(std::size_t flat, std::size_t axis) const {
        return (flat / strides_[axis]) % points_[axis];
    }

    Point node(std::size_t flat) const {
        Point x(dimension());
        for (std::size_t i = 0; i < x.size(); ++i) {
            x[i] = coordinate(i, axis_index(flat, i));
        }
        return x;
    }

    /// Flat index of the neighbour shifted by `offset` cells along `axis`,
    /// with periodic wrap.
    std::size_t shifted(std::size_t flat, std::size_t axis, long offset) const {
        const long n = static_cast<long>(points_[axis]);
        const long k = static_cast<long>(axis_index(flat, axis));
        const long wrapped = ((k + offset) % n + n) % n;
        return flat + static_cast<std::size_t>(wrapped - k) * strides_[axis];
    }

    bool contains(std::span<const double> x) const {
        if (x.size() != dimension()) {
            return false;
        }
        for (std::size_t i = 0; i < x.size(); ++i) {
            if (std::abs(x[i]) > half_widths_[i]) {
                return false;
            }
        }
        return true;
    }

    bool operator==(const Grid& other) const {
        return group_ == other.group_ && half_widths_ == other.half_widths_ &&
               points_ == other.points_;
    }

private:
    GroupInstance group_;
    std::vector<double> half_widths_;
    std::vector<std::size_t> points_;
    std::vector<std::size_t> strides_;
    std::vector<double> spacing_;
    std::size_t dof_ = 0;
    double cell_volume_ = 0.0;
};

using GridPtr = std::shared_ptr<const Grid>;

inline GridPtr make_grid(const GroupInstance& g, std::vector<double> half_widths,
                         std::vector<std::size_t> points) {
    if (half_widths.size() == 1 && g.dimension() > 1) {
        half_widths.assign(g.dimension(), half_widths.front());
    }
    if (points.size() == 1 && g.dimension() > 1) {
        points.assign(g.dimension(), points.front());
    }
    for (double L : half_widths) {
        if (!(L > 0.0) || !std::isfinite(L)) {
            throw ArgumentError("make_grid: half widths must be positive");
        }
    }
    for (std::size_t n : points) {
        if (n < 4) {
            throw ArgumentError("make_grid: need at least 4 points per axis, got " +
                                std::to_string(n));
        }
    }
    return std::make_shared<const Grid>(g, std::move(half_widths), std::move(points));
}

/// A real grid function. Values are always finite.
class Field {
public:
    explicit Field(GridPtr grid) : grid_(std::move(grid)), values_(Eigen::VectorXd::Zero(grid_->dof())) {}

    Field(GridPtr grid, Eigen::VectorXd values) : grid_(std::move(grid)), values_(std::move(values)) {
        if (static_cast<std::size_t>(values_.size()) != grid_->dof()) {
            throw ArgumentError("field: " + std::to_string(values_.size()) +
                                " values for a grid with " + std::to_string(grid_->dof()) + " dof");
        }
        if (!values_.allFinite()) {
            throw ArgumentError("field: values must be finite");
        }
    }

    static Field constant(GridPtr grid, double c) {
        const auto n = static_cast<Eigen::Index>(grid->dof());
        return Field(std::move(grid), Eigen::VectorXd::Constant(n, c));
    }

    template <typename Fn>
    static Field from_function(GridPtr grid, Fn&& fn) {
        Eigen::VectorXd v(static_cast<Eigen::Index>(grid->dof()));
        for (std::size_t i = 0; i < grid->dof(); ++i) {
            const Point x = grid->node(i);
            v[static_cast<Eigen::Index>(i)] = fn(std::span<const double>(x));
        }
        return Field(std::move(grid), std::move(v));
    }

    const Grid& grid() const { return *grid_; }
    const GridPtr& grid_ptr() const { return grid_; }
    const Eigen::VectorXd& values() const { return values_; }
    std::size_t size() const { return static_cast<std::size_t>(values_.size()); }
    double operator[](std::size_t i) const { return values_[static_cast<Eigen::Index>(i)]; }

    bool same_grid(const Field& other) const {
        return grid_ == other.grid_ || *grid_ == *other.grid_;
    }

    double min() const { return values_.minCoeff(); }
    double max() const { return values_.maxCoeff(); }

    Field operator+(const Field& o) const { return combine(o, values_ + o.values_); }
    Field operator-(const Field& o) const { return combine(o, values_ - o.values_); }
    Field operator*(double s) const { return Field(grid_, values_ * s); }
    friend Field operator*(double s, const Field& f) { return f * s; }

    Field pointwise(const Field& o) const {
        return combine(o, values_.cwiseProduct(o.values_));
    }

private:
    Field combine(const Field& o, Eigen::VectorXd v) const {
        if (!same_grid(o)) {
            throw ArgumentError("field arithmetic on different grids");
        }
        return Field(grid_, std::move(v));
    }

    GridPtr grid_;
    Eigen::VectorXd values_;
};

} // namespace hypoheat
