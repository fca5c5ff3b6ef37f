#pragma once

// Friedrichs mollifiers, the omega(eps) scale schedules and the regularised
// nets V_eps, u_{0,eps} built from them.

#include <boost/math/quadrature/tanh_sinh.hpp>

#include <cmath>
#include <cstddef>
#include <numbers>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "hypoheat/error.hpp"
#include "hypoheat/group.hpp"

namespace hypoheat {

/// Minimum support diameter of a grid-sampled psi_eps, in cells per axis.
inline constexpr double kMinSupportCells = 6.0;
inline constexpr std::size_t kDefaultQuadraturePoints = 24;

/// psi(z) = C exp(-1/(1 - |z|^2)) on the unit ball, |z| the Euclidean norm
/// of the coordinates, C chosen so that the integral is 1.
class Mollifier {
public:
    explicit Mollifier(std::size_t dimension) : dimension_(dimension) {
        if (dimension_ < 1) {
            throw ArgumentError("mollifier dimension must be >= 1");
        }
        const double n = static_cast<double>(dimension_);
        boost::math::quadrature::tanh_sinh<double> integrator;
        const double radial = integrator.integrate(
            [n](double r) {
                if (r >= 1.0) {
                    return 0.0;
                }
                return std::pow(r, n - 1.0) * std::exp(-1.0 / (1.0 - r * r));
            },
            0.0, 1.0);
        const double sphere = 2.0 * std::pow(std::numbers::pi, 0.5 * n) / std::tgamma(0.5 * n);
        normalisation_ = 1.0 / (sphere * radial);
    }

    std::size_t dimension() const { return dimension_; }
    double normalisation() const { return normalisation_; }
    double support_radius() const { return 1.0; }
    double peak() const { return normalisation_ * std::exp(-1.0); }

    double operator()(std::span<const double> z) const {
        double r2 = 0.0;
        for (double v : z) {
            r2 += v * v;
        }
        if (r2 >= 1.0) {
            return 0.0;
        }
        return normalisation_ * std::exp(-1.0 / (1.0 - r2));
    }

private:
    std::size_t dimension_;
    double normalisation_ = 0.0;
};

struct OmegaSchedule {
    enum class Kind { Polynomial, Logarithmic };
    Kind kind = Kind::Polynomial;
    int n0 = 1;

    static OmegaSchedule polynomial() { return {Kind::Polynomial, 1}; }
    static OmegaSchedule logarithmic(int n0) {
        if (n0 < 1) {
            throw ArgumentError("logarithmic schedule needs n0 >= 1");
        }
        return {Kind::Logarithmic, n0};
    }

    std::string to_string() const {
        return kind == Kind::Polynomial ? "poly" : "log:" + std::to_string(n0);
    }

    bool operator==(const OmegaSchedule&) const = default;
};

/// Polynomial: omega = eps. Logarithmic(n0): omega = (log eps^{-n0})^{-1/n0}.
inline double omega(const OmegaSchedule& s, double eps) {
    if (!(eps > 0.0 && eps <= 1.0)) {
        throw ArgumentError("omega: eps must lie in (0, 1], got " + std::to_string(eps));
    }
    if (s.kind == OmegaSchedule::Kind::Polynomial) {
        return eps;
    }
    if (eps == 1.0) {
        throw ArgumentError("omega: logarithmic schedule is undefined at eps = 1");
    }
    const double n0 = static_cast<double>(s.n0);
    return std::pow(n0 * std::log(1.0 / eps), -1.0 / n0);
}

/// Strictly decreasing sample points in (0, 1].
class EpsilonNet {
public:
    explicit EpsilonNet(std::vector<double> values) : values_(std::move(values)) {
        for (std::size_t i = 0; i < values_.size(); ++i) {
            if (!(values_[i] > 0.0 && values_[i] <= 1.0)) {
                throw ArgumentError("epsilon values must lie in (0, 1]");
            }
            if (i > 0 && !(values_[i] < values_[i - 1])) {
                throw ArgumentError("epsilon values must be strictly decreasing");
            }
        }
    }

    /// {2^-first, 2^-(first+1), ...}, `count` points.
    static EpsilonNet dyadic(int first, std::size_t count) {
        std::vector<double> v;
        for (std::size_t k = 0; k < count; ++k) {
            v.push_back(std::ldexp(1.0, -(first + static_cast<int>(k))));
        }
        return EpsilonNet(std::move(v));
    }

    const std::vector<double>& values() const& { return values_; }
    std::vector<double> values() && { return std::move(values_); }
    std::size_t size() const { return values_.size(); }
    bool empty() const { return values_.empty(); }

private:
    std::vector<double> values_;
};

/// amplitude * exp(1 - 1/(1 - r^2)), r = |center^{-1} x| / radius; a smooth
/// compactly supported profile with peak value `amplitude`.
struct BumpProfile {
    double amplitude = 1.0;
    double radius = 0.5;
    Point center;

    double operator()(std::span<const double> x, const GroupInstance& g) const {
        double r2 = 0.0;
        if (center.empty()) {
            for (double v : x) {
                r2 += v * v;
            }
        } else {
            const Point z = group_product(group_inverse(center, g), x, g);
            for (double v : z) {
                r2 += v * v;
            }
        }
        r2 /= radius * radius;
        if (r2 >= 1.0) {
            return 0.0;
        }
        return amplitude * std::exp(1.0 - 1.0 / (1.0 - r2));
    }
};

enum class SignClass { NonNegative, Real };

/// weight * delta_center; a negative weight gives a real (signed) potential.
struct DiracDelta {
    Point center;
    double weight = 1.0;
};
struct DiracDeltaSquared {
    Point center;
};
struct Sampled {
    Field field;
};
struct Constant {
    double value = 0.0;
};
struct Bump {
    BumpProfile profile;
};

/// Symbolic potential V. Delta-type variants are nonnegative by
/// construction.
class PotentialSpec {
public:
    using Variant = std::variant<DiracDelta, DiracDeltaSquared, Sampled, Constant, Bump>;

    PotentialSpec(Variant v, SignClass sign, std::set<double> lp_classes = {})
        : variant_(std::move(v)), sign_(sign), lp_classes_(std::move(lp_classes)) {
        if (const auto* d = std::get_if<DiracDelta>(&variant_)) {
            if (!std::isfinite(d->weight) || d->weight == 0.0) {
                throw ArgumentError("delta weight must be finite and nonzero");
            }
            if ((d->weight > 0.0) != (sign_ == SignClass::NonNegative)) {
                throw ArgumentError("a delta has sign class NonNegative iff its weight is positive");
            }
        }
        if (std::holds_alternative<DiracDeltaSquared>(variant_) && sign_ != SignClass::NonNegative) {
            throw ArgumentError("squared delta potentials are nonnegative; sign class must be NonNegative");
        }
        if (sign_ == SignClass::NonNegative) {
            bool negative = false;
            if (const auto* c = std::get_if<Constant>(&variant_)) {
                negative = c->value < 0.0;
            } else if (const auto* s = std::get_if<Sampled>(&variant_)) {
                negative = s->field.min() < 0.0;
            } else if (const auto* b = std::get_if<Bump>(&variant_)) {
                negative = b->profile.amplitude < 0.0;
            }
            if (negative) {
                throw ArgumentError("potential has negative values but sign class is NonNegative");
            }
        }
    }

    static PotentialSpec delta(Point center = {}, double weight = 1.0) {
        return {DiracDelta{std::move(center), weight}, weight > 0.0 ? SignClass::NonNegative : SignClass::Real};
    }
    static PotentialSpec delta_squared(Point center = {}) {
        return {DiracDeltaSquared{std::move(center)}, SignClass::NonNegative};
    }
    static PotentialSpec constant(double c) {
        return {Constant{c}, c >= 0.0 ? SignClass::NonNegative : SignClass::Real};
    }
    static PotentialSpec sampled(Field f) {
        const SignClass s = f.min() >= 0.0 ? SignClass::NonNegative : SignClass::Real;
        return {Sampled{std::move(f)}, s};
    }
    static PotentialSpec bump(BumpProfile p) {
        const SignClass s = p.amplitude >= 0.0 ? SignClass::NonNegative : SignClass::Real;
        return {Bump{std::move(p)}, s};
    }

    const Variant& variant() const { return variant_; }
    SignClass sign_class() const { return sign_; }
    const std::set<double>& lp_classes() const { return lp_classes_; }

    bool is_delta_type() const {
        return std::holds_alternative<DiracDelta>(variant_) ||
               std::holds_alternative<DiracDeltaSquared>(variant_);
    }

    /// Unregularised potential on the grid; only continuous variants have one.
    std::optional<Field> sample(const GridPtr& grid) const {
        if (const auto* c = std::get_if<Constant>(&variant_)) {
            return Field::constant(grid, c->value);
        }
        if (const auto* s = std::get_if<Sampled>(&variant_)) {
            return s->field;
        }
        if (const auto* b = std::get_if<Bump>(&variant_)) {
            const GroupInstance g = grid->group();
            return Field::from_function(grid, [&](std::span<const double> x) { return b->profile(x, g); });
        }
        return std::nullopt;
    }

private:
    Variant variant_;
    SignClass sign_;
    std::set<double> lp_classes_;
};

/// Initial datum: an analytic bump or a sampled field.
using InitialSpec = std::variant<BumpProfile, Field>;

inline Field sample_initial(const InitialSpec& spec, const GridPtr& grid) {
    if (const auto* f = std::get_if<Field>(&spec)) {
        return *f;
    }
    const auto& b = std::get<BumpProfile>(spec);
    const GroupInstance g = grid->group();
    return Field::from_function(grid, [&](std::span<const double> x) { return b(x, g); });
}

namespace detail {

inline double wrap_periodic(double x, double half_width) {
    const double period = 2.0 * half_width;
    double y = std::fmod(x + half_width, period);
    if (y < 0.0) {
        y += period;
    }
    return y - half_width;
}

inline void check_mollifier_fits(const Mollifier& psi, double w, const Grid& grid) {
    if (psi.dimension() != grid.dimension()) {
        throw ArgumentError("mollifier dimension does not match grid");
    }
    const auto& weights = grid.group().weights();
    for (std::size_t i = 0; i < grid.dimension(); ++i) {
        const double extent = std::pow(w, weights.weight(i)) * psi.support_radius();
        if (extent > grid.half_width(i)) {
            throw DomainError("scaled mollifier support " + std::to_string(extent) + " on axis " +
                              std::to_string(i) + " exceeds the box half width " +
                              std::to_string(grid.half_width(i)));
        }
        if (2.0 * extent < kMinSupportCells * grid.spacing(i) * (1.0 - 1e-12)) {
            throw DomainError("scaled mollifier support covers fewer than " +
                              std::to_string(static_cast<int>(kMinSupportCells)) +
                              " cells on axis " + std::to_string(i) + " (omega = " +
                              std::to_string(w) + "); refine the grid");
        }
    }
}

} // namespace detail

/// psi_eps(center^{-1} x) = omega^{-Q} psi(D_{1/omega}(center^{-1} x)) sampled at
/// the grid nodes.
inline Field mollifier_net(const Mollifier& psi, double eps, const OmegaSchedule& s, const GridPtr& grid,
                           const Point& center = {}) {
    const double w = omega(s, eps);
    detail::check_mollifier_fits(psi, w, *grid);
    const GroupInstance& g = grid->group();
    const double scale = std::pow(w, -g.homogeneous_dimension());
    const bool shifted = !center.empty();
    if (shifted && !grid->contains(center)) {
        throw ArgumentError("mollifier center lies outside the grid box");
    }
    const Point center_inv = shifted ? group_inverse(center, g) : Point{};
    return Field::from_function(grid, [&](std::span<const double> x) {
        Point z(x.begin(), x.end());
        if (shifted) {
            z = group_product(center_inv, x, g);
            for (std::size_t i = 0; i < z.size(); ++i) {
                z[i] = detail::wrap_periodic(z[i], grid->half_width(i));
            }
        }
        const Point zeta = dilate(z, 1.0 / w, g.weights());
        return scale * psi(zeta);
    });
}

/// Group convolution (f * g)(x) = sum_y f(y) g(y^{-1} x) |cell| on the
/// periodic grid. On H1 the c-coordinate of y^{-1}x falls between nodes and g
/// is linearly interpolated along c. Needs an even number of points per axis
/// so that the origin is a node.
inline Field convolve(const Field& f, const Field& g) {
    if (!f.same_grid(g)) {
        throw ArgumentError("convolve: fields live on different grids");
    }
    const Grid& grid = f.grid();
    for (std::size_t n : grid.points()) {
        if (n % 2 != 0) {
            throw ArgumentError("convolve: needs an even number of points per axis");
        }
    }
    const std::size_t dim = grid.dimension();
    const std::size_t dof = grid.dof();
    const bool heis = grid.group().kind() == GroupKind::Heisenberg1;
    const double vol = grid.cell_volume();
    const Eigen::VectorXd& fv = f.values();
    const Eigen::VectorXd& gv = g.values();
    Eigen::VectorXd out = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(dof));

    std::vector<std::size_t> xi(dim), yi(dim);
    for (std::size_t y = 0; y < dof; ++y) {
        const double fy = fv[static_cast<Eigen::Index>(y)];
        if (fy == 0.0) {
            continue;
        }
        for (std::size_t i = 0; i < dim; ++i) {
            yi[i] = grid.axis_index(y, i);
        }
        for (std::size_t x = 0; x < dof; ++x) {
            std::size_t base = 0;
            for (std::size_t i = 0; i < dim; ++i) {
                xi[i] = grid.axis_index(x, i);
            }
            const std::size_t last = heis ? dim - 1 : dim;
            for (std::size_t i = 0; i < last; ++i) {
                const std::size_t n = grid.points(i);
                base += ((xi[i] + n + n / 2 - yi[i]) % n) * grid.stride(i);
            }
            double value = 0.0;
            if (!heis) {
                value = gv[static_cast<Eigen::Index>(base)];
            } else {
                const std::size_t nc = grid.points(2);
                const double ax = grid.coordinate(0, xi[0]), bx = grid.coordinate(1, xi[1]);
                const double ay = grid.coordinate(0, yi[0]), by = grid.coordinate(1, yi[1]);
                const double shift = 0.5 * (by * ax - ay * bx) / grid.spacing(2);
                const double pos = static_cast<double>((xi[2] + nc + nc / 2 - yi[2]) % nc) + shift;
                const double fl = std::floor(pos);
                const double frac = pos - fl;
                const long n = static_cast<long>(nc);
                const long k0 = ((static_cast<long>(fl) % n) + n) % n;
                const long k1 = (k0 + 1) % n;
                value = (1.0 - frac) * gv[static_cast<Eigen::Index>(base + static_cast<std::size_t>(k0))];
                if (frac != 0.0) {
                    value += frac * gv[static_cast<Eigen::Index>(base + static_cast<std::size_t>(k1))];
                }
            }
            out[static_cast<Eigen::Index>(x)] += fy * value * vol;
        }
    }
    return Field(f.grid_ptr(), std::move(out));
}

/// (profile * psi_eps)(x) = int profile(x D_omega(z)^{-1}) psi(z) dz at every
/// node, by tensor midpoint quadrature over the unit cube holding psi's
/// support. The weights are renormalised to sum to one, so constants are
/// reproduced exactly. psi_eps is never sampled on the grid, so no
/// resolution guard is needed.
template <typename Profile>
Field mollify_profile(Profile&& profile, const Mollifier& psi, double eps, const OmegaSchedule& s,
                      const GridPtr& grid, std::size_t quadrature_points = kDefaultQuadraturePoints) {
    if (psi.dimension() != grid->dimension()) {
        throw ArgumentError("mollifier dimension does not match grid");
    }
    if (quadrature_points < 2) {
        throw ArgumentError("mollify_profile: need at least 2 quadrature points per axis");
    }
    const double w = omega(s, eps);
    const GroupInstance& g = grid->group();
    const std::size_t dim = grid->dimension();

    std::vector<Point> nodes;
    std::vector<double> weights;
    std::size_t total = 1;
    for (std::size_t i = 0; i < dim; ++i) {
        total *= quadrature_points;
    }
    const double step = 2.0 / static_cast<double>(quadrature_points);
    Point zeta(dim);
    double mass = 0.0;
    for (std::size_t q = 0; q < total; ++q) {
        std::size_t rem = q;
        for (std::size_t i = dim; i-- > 0;) {
            zeta[i] = -1.0 + (static_cast<double>(rem % quadrature_points) + 0.5) * step;
            rem /= quadrature_points;
        }
        const double value = psi(zeta);
        if (value == 0.0) {
            continue;
        }
        // x * z^{-1} for z = D_omega(zeta)
        nodes.push_back(group_inverse(dilate(zeta, w, g.weights()), g));
        weights.push_back(value);
        mass += value;
    }
    for (double& v : weights) {
        v /= mass;
    }

    const bool heis = g.kind() == GroupKind::Heisenberg1;
    Point y(dim);
    return Field::from_function(grid, [&](std::span<const double> x) {
        double acc = 0.0;
        for (std::size_t k = 0; k < nodes.size(); ++k) {
            const Point& z = nodes[k];
            for (std::size_t i = 0; i < dim; ++i) {
                y[i] = x[i] + z[i];
            }
            if (heis) {
                y[2] += 0.5 * (x[0] * z[1] - x[1] * z[0]);
            }
            acc += weights[k] * profile(std::span<const double>(y));
        }
        return acc;
    });
}

namespace detail {

/// psi_eps rescaled to unit discrete mass, so grid convolution reproduces
/// constants exactly instead of up to the rectangle-rule defect.
inline Field unit_mass_kernel(const Mollifier& psi, double eps, const OmegaSchedule& s, const GridPtr& grid) {
    const Field k = mollifier_net(psi, eps, s, grid);
    return k * (1.0 / (k.values().sum() * grid->cell_volume()));
}

} // namespace detail

/// V_eps for the given potential. Delta: psi_eps. Delta squared: psi_eps^2.
/// Sampled f: f * psi_eps. Constant c: c. Bump: exact convolution with
/// psi_eps evaluated at the nodes.
inline Field regularize_potential(const PotentialSpec& spec, double eps, const OmegaSchedule& s,
                                  const Mollifier& psi, const GridPtr& grid,
                                  std::size_t quadrature_points = kDefaultQuadraturePoints) {
    const GroupInstance g = grid->group();
    return std::visit(
        [&](const auto& v) -> Field {
            using T = std::decay_t<decltype(v)>;
            if constexpr (std::is_same_v<T, DiracDelta>) {
                const Field m = mollifier_net(psi, eps, s, grid, v.center);
                return v.weight == 1.0 ? m : m * v.weight;
            } else if constexpr (std::is_same_v<T, DiracDeltaSquared>) {
                const Field m = mollifier_net(psi, eps, s, grid, v.center);
                return m.pointwise(m);
            } else if constexpr (std::is_same_v<T, Sampled>) {
                if (!(v.field.grid() == *grid)) {
                    throw ArgumentError("sampled potential lives on a different grid");
                }
                return convolve(v.field, detail::unit_mass_kernel(psi, eps, s, grid));
            } else if constexpr (std::is_same_v<T, Constant>) {
                (void)omega(s, eps);
                return Field::constant(grid, v.value);
            } else {
                return mollify_profile(
                    [&](std::span<const double> x) { return v.profile(x, g); }, psi, eps, s, grid,
                    quadrature_points);
            }
        },
        spec.variant());
}

/// u_{0,eps} = u0 * psi_eps.
inline Field regularize_initial(const InitialSpec& spec, double eps, const OmegaSchedule& s,
                                const Mollifier& psi, const GridPtr& grid,
                                std::size_t quadrature_points = kDefaultQuadraturePoints) {
    if (const auto* f = std::get_if<Field>(&spec)) {
        if (!(f->grid() == *grid)) {
            throw ArgumentError("sampled initial datum lives on a different grid");
        }
        return convolve(*f, detail::unit_mass_kernel(psi, eps, s, grid));
    }
    const auto& b = std::get<BumpProfile>(spec);
    const GroupInstance g = grid->group();
    return mollify_profile([&](std::span<const double> x) { return b(x, g); }, psi, eps, s, grid,
                           quadrature_points);
}

} // namespace hypoheat
