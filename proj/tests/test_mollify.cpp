#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "hypoheat/harness.hpp"
#include "hypoheat/mollify.hpp"
#include "hypoheat/norms.hpp"

using namespace hypoheat;

namespace {

double discrete_integral(const Field& f) { return f.values().sum() * f.grid().cell_volume(); }

GridPtr line(std::size_t n, double L) { return make_grid(GroupInstance::euclidean(1), {L}, {n}); }

Field random_field(const GridPtr& g, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> d(-1.0, 1.0);
    Eigen::VectorXd v(static_cast<Eigen::Index>(g->dof()));
    for (Eigen::Index i = 0; i < v.size(); ++i) {
        v[i] = d(rng);
    }
    return Field(g, v);
}

Field discrete_delta(const GridPtr& g) {
    // Spike of height 1/|cell| at the origin node.
    std::size_t flat = 0;
    for (std::size_t i = 0; i < g->dimension(); ++i) {
        flat += (g->points(i) / 2) * g->stride(i);
    }
    Eigen::VectorXd v = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(g->dof()));
    v[static_cast<Eigen::Index>(flat)] = 1.0 / g->cell_volume();
    return Field(g, v);
}

} // namespace

TEST(Mollifier, UnitMassByTensorMidpointRule) {
    for (std::size_t d = 1; d <= 3; ++d) {
        const Mollifier psi(d);
        const std::size_t m = d == 1 ? 20000 : (d == 2 ? 1500 : 200);
        const double h = 2.0 / static_cast<double>(m);
        std::size_t total = 1;
        for (std::size_t i = 0; i < d; ++i) {
            total *= m;
        }
        double sum = 0.0;
        Point z(d);
        for (std::size_t q = 0; q < total; ++q) {
            std::size_t r = q;
            for (std::size_t i = 0; i < d; ++i) {
                z[i] = -1.0 + (static_cast<double>(r % m) + 0.5) * h;
                r /= m;
            }
            sum += psi(z);
        }
        EXPECT_NEAR(sum * std::pow(h, static_cast<double>(d)), 1.0, 1e-6) << "d=" << d;
    }
}

TEST(Mollifier, ProfileAndSupport) {
    const Mollifier psi(3);
    EXPECT_DOUBLE_EQ(psi(Point{0, 0, 0}), psi.peak());
    EXPECT_DOUBLE_EQ(psi.peak(), psi.normalisation() * std::exp(-1.0));
    EXPECT_EQ(psi(Point{0.6, 0.6, 0.6}), 0.0);
    EXPECT_GT(psi(Point{0.5, 0.5, 0.5}), 0.0);
    EXPECT_THROW(Mollifier(0), ArgumentError);
}

TEST(Omega, Examples) {
    EXPECT_DOUBLE_EQ(omega(OmegaSchedule::polynomial(), 0.1), 0.1);
    EXPECT_NEAR(omega(OmegaSchedule::logarithmic(1), std::exp(-10.0)), 0.1, 1e-15);
    EXPECT_NEAR(omega(OmegaSchedule::logarithmic(2), std::exp(-8.0)), 0.25, 1e-15);
}

TEST(Omega, Errors) {
    EXPECT_THROW(omega(OmegaSchedule::polynomial(), 0.0), ArgumentError);
    EXPECT_THROW(omega(OmegaSchedule::polynomial(), 1.5), ArgumentError);
    EXPECT_THROW(omega(OmegaSchedule::logarithmic(1), 1.0), ArgumentError);
    EXPECT_THROW(OmegaSchedule::logarithmic(0), ArgumentError);
}

TEST(Omega, PositiveAndVanishingAlongNets) {
    const EpsilonNet net = EpsilonNet::dyadic(1, 30);
    for (const auto& s : {OmegaSchedule::polynomial(), OmegaSchedule::logarithmic(1), OmegaSchedule::logarithmic(3)}) {
        double prev = std::numeric_limits<double>::infinity();
        for (double e : net.values()) {
            const double w = omega(s, e);
            EXPECT_GT(w, 0.0);
            EXPECT_LT(w, prev);
            prev = w;
        }
        EXPECT_LT(omega(s, 1e-300), 0.2);
    }
}

TEST(EpsilonNet, Invariants) {
    EXPECT_THROW(EpsilonNet({0.5, 0.5}), ArgumentError);
    EXPECT_THROW(EpsilonNet({0.25, 0.5}), ArgumentError);
    EXPECT_THROW(EpsilonNet({1.5}), ArgumentError);
    EXPECT_THROW(EpsilonNet({0.0}), ArgumentError);
    const auto net = EpsilonNet::dyadic(2, 3);
    EXPECT_EQ(net.values(), (std::vector<double>{0.25, 0.125, 0.0625}));
}

TEST(MollifierNet, UnitMassAndPeakAlongNet) {
    const auto g = line(640, 1.5);
    const Mollifier psi(1);
    for (double e : EpsilonNet::dyadic(1, 5).values()) {
        const Field f = mollifier_net(psi, e, OmegaSchedule::polynomial(), g);
        EXPECT_NEAR(discrete_integral(f), 1.0, 2e-3) << "eps=" << e;
        EXPECT_NEAR(f.max(), psi.peak() / e, 1e-12 * psi.peak() / e);
        // the rectangle-rule defect shrinks as the support gains cells
        const double coarse = std::abs(discrete_integral(f) - 1.0);
        const double fine = std::abs(discrete_integral(mollifier_net(psi, e, OmegaSchedule::polynomial(), line(2560, 1.5))) - 1.0);
        EXPECT_LE(fine, std::max(coarse * 0.1, 1e-12)) << "eps=" << e;
    }
    const auto h = make_grid(GroupInstance::heisenberg1(), {1.0, 1.0, 1.0}, {40, 40, 80});
    const Mollifier psi3(3);
    for (double e : {1.0, 0.75, 0.5}) {
        const Field f = mollifier_net(psi3, e, OmegaSchedule::polynomial(), h);
        EXPECT_NEAR(discrete_integral(f), 1.0, 1e-3) << "eps=" << e;
        EXPECT_NEAR(f.max(), psi3.peak() * std::pow(e, -4.0), 1e-12 * f.max());
    }
}

TEST(MollifierNet, LinfExponentIsQOnTheLine) {
    const auto g = line(640, 1.5);
    const Mollifier psi(1);
    std::vector<std::pair<double, double>> pairs;
    for (double e : EpsilonNet::dyadic(1, 5).values()) {
        pairs.emplace_back(e, lp_norm(mollifier_net(psi, e, OmegaSchedule::polynomial(), g), kInf));
    }
    EXPECT_NEAR(fit_exponent(pairs).exponent, 1.0, 0.05);
}

TEST(MollifierNet, LpExponentOfDeltaNet) {
    // ||psi_eps||_p = omega^{-Q(1 - 1/p)} ||psi||_p
    const auto g = line(640, 1.5);
    const Mollifier psi(1);
    for (double p : {2.0, 4.0}) {
        std::vector<std::pair<double, double>> pairs;
        for (double e : EpsilonNet::dyadic(1, 5).values()) {
            pairs.emplace_back(e, lp_norm(regularize_potential(PotentialSpec::delta(), e, OmegaSchedule::polynomial(),
                                                               psi, g),
                                          p));
        }
        const double expect = 1.0 - 1.0 / p;
        EXPECT_NEAR(fit_exponent(pairs).exponent, expect, 0.1 * expect) << "p=" << p;
    }
}

TEST(MollifierNet, SupportShrinksWithOmega) {
    const auto g = line(640, 1.5);
    const Mollifier psi(1);
    double prev = std::numeric_limits<double>::infinity();
    for (double e : EpsilonNet::dyadic(1, 5).values()) {
        const Field f = mollifier_net(psi, e, OmegaSchedule::polynomial(), g);
        double radius = 0.0;
        for (std::size_t i = 0; i < g->dof(); ++i) {
            if (f[i] > 0.0) {
                radius = std::max(radius, std::abs(g->node(i)[0]));
            }
        }
        EXPECT_LT(radius, prev);
        EXPECT_LE(radius, e);
        EXPECT_GT(radius, e - g->spacing(0) - 1e-12);
        prev = radius;
    }
}

TEST(MollifierNet, ResolutionGuardAndBoxFit) {
    const Mollifier psi(1);
    // support 2*omega must cover 6 cells: h = 0.1 needs omega >= 0.3
    const auto g = line(20, 1.0);
    EXPECT_NO_THROW(mollifier_net(psi, 0.3, OmegaSchedule::polynomial(), g));
    EXPECT_THROW(mollifier_net(psi, 0.25, OmegaSchedule::polynomial(), g), DomainError);
    // omega = 1 exceeds a half width of 0.5
    EXPECT_THROW(mollifier_net(psi, 1.0, OmegaSchedule::polynomial(), line(64, 0.5)), DomainError);
    // the c axis scales with omega^2
    const Mollifier psi3(3);
    const auto h = make_grid(GroupInstance::heisenberg1(), {1.0, 1.0, 1.0}, {32, 32, 16});
    EXPECT_NO_THROW(mollifier_net(psi3, 1.0, OmegaSchedule::polynomial(), h));
    EXPECT_THROW(mollifier_net(psi3, 0.5, OmegaSchedule::polynomial(), h), DomainError);
    EXPECT_THROW(mollifier_net(Mollifier(2), 0.5, OmegaSchedule::polynomial(), h), ArgumentError);
}

TEST(MollifierNet, CenteredAtGroupTranslate) {
    const auto h = make_grid(GroupInstance::heisenberg1(), {1.0, 1.0, 1.0}, {32, 32, 64});
    const Mollifier psi(3);
    const Point c{0.25, -0.125, 0.0625};
    const Field f = mollifier_net(psi, 0.6, OmegaSchedule::polynomial(), h, c);
    const auto g = h->group();
    for (std::size_t i = 0; i < h->dof(); i += 97) {
        const Point z = group_product(group_inverse(c, g), h->node(i), g);
        EXPECT_NEAR(f[i], std::pow(0.6, -4.0) * psi(dilate(z, 1.0 / 0.6, g.weights())), 1e-12);
    }
    EXPECT_NEAR(f.max(), psi.peak() * std::pow(0.6, -4.0), 1e-12 * f.max());
    EXPECT_THROW(mollifier_net(psi, 0.6, OmegaSchedule::polynomial(), h, Point{2, 0, 0}), ArgumentError);
}

TEST(PotentialSpec, SignClassRules) {
    EXPECT_EQ(PotentialSpec::delta().sign_class(), SignClass::NonNegative);
    EXPECT_EQ(PotentialSpec::delta_squared().sign_class(), SignClass::NonNegative);
    EXPECT_THROW(PotentialSpec(DiracDelta{}, SignClass::Real), ArgumentError);
    EXPECT_THROW(PotentialSpec(DiracDeltaSquared{}, SignClass::Real), ArgumentError);
    EXPECT_THROW(PotentialSpec(Constant{-1.0}, SignClass::NonNegative), ArgumentError);
    EXPECT_EQ(PotentialSpec::constant(-1.0).sign_class(), SignClass::Real);
    EXPECT_NO_THROW(PotentialSpec(Constant{1.0}, SignClass::Real));
    const auto g = line(16, 1.0);
    EXPECT_THROW(PotentialSpec(Sampled{Field::constant(g, -0.5)}, SignClass::NonNegative), ArgumentError);
    EXPECT_EQ(PotentialSpec::bump(BumpProfile{-2.0, 0.5, {}}).sign_class(), SignClass::Real);
    EXPECT_EQ(PotentialSpec::delta({}, -1.5).sign_class(), SignClass::Real);
    EXPECT_THROW(PotentialSpec(DiracDelta{{}, -1.0}, SignClass::NonNegative), ArgumentError);
    EXPECT_THROW(PotentialSpec::delta({}, 0.0), ArgumentError);
    const auto fine = line(640, 1.5);
    const Field neg =
        regularize_potential(PotentialSpec::delta({}, -1.5), 0.25, OmegaSchedule::polynomial(), Mollifier(1), fine);
    EXPECT_EQ(neg.values(),
              (regularize_potential(PotentialSpec::delta(), 0.25, OmegaSchedule::polynomial(), Mollifier(1), fine) * -1.5)
                  .values());
    EXPECT_TRUE(PotentialSpec::delta().is_delta_type());
    EXPECT_FALSE(PotentialSpec::delta().sample(g).has_value());
}

TEST(RegularizePotential, ConstantAndDeltaSquared) {
    const auto g = line(640, 1.5);
    const Mollifier psi(1);
    for (double e : {0.5, 0.125}) {
        const Field c = regularize_potential(PotentialSpec::constant(2.5), e, OmegaSchedule::polynomial(), psi, g);
        EXPECT_EQ(c.min(), 2.5);
        EXPECT_EQ(c.max(), 2.5);
        const Field d2 =
            regularize_potential(PotentialSpec::delta_squared(), e, OmegaSchedule::polynomial(), psi, g);
        EXPECT_NEAR(lp_norm(d2, kInf), std::pow(e, -2.0) * psi.peak() * psi.peak(), 1e-12 * lp_norm(d2, kInf));
    }
}

TEST(RegularizePotential, SampledContinuousConverges) {
    const auto g = line(256, 2.0);
    const Mollifier psi(1);
    const Field f = Field::from_function(g, [](std::span<const double> x) { return std::exp(-4.0 * x[0] * x[0]); });
    double prev = std::numeric_limits<double>::infinity();
    for (double e : EpsilonNet::dyadic(0, 5).values()) {
        const Field v = regularize_potential(PotentialSpec::sampled(f), e, OmegaSchedule::polynomial(), psi, g);
        const double err = lp_norm(v - f, kInf);
        EXPECT_LT(err, prev);
        prev = err;
    }
    EXPECT_LT(prev, 1e-2);
}

TEST(RegularizePotential, BumpMatchesGridConvolution) {
    const auto g = line(1024, 2.0);
    const Mollifier psi(1);
    const BumpProfile b{1.0, 0.5, {}};
    const Field sampled = sample_initial(InitialSpec{b}, g);
    for (double e : {0.5, 0.25, 0.125}) {
        const Field grid_conv = convolve(sampled, mollifier_net(psi, e, OmegaSchedule::polynomial(), g));
        const Field analytic = regularize_potential(PotentialSpec::bump(b), e, OmegaSchedule::polynomial(), psi, g, 64);
        EXPECT_LT(lp_norm(grid_conv - analytic, kInf), 1e-6) << "eps=" << e;
    }
}

TEST(RegularizeInitial, AnalyticQuadratureKeepsConstantsAndMass) {
    const auto h = make_grid(GroupInstance::heisenberg1(), {2.0}, {16});
    const Mollifier psi(3);
    const auto one = mollify_profile([](std::span<const double>) { return 1.0; }, psi, 0.5,
                                     OmegaSchedule::polynomial(), h);
    EXPECT_LT((one.values().array() - 1.0).abs().maxCoeff(), 1e-13);

    const auto fine = make_grid(GroupInstance::heisenberg1(), {2.0, 2.0, 2.5}, {32, 32, 32});
    const BumpProfile b{1.0, 1.0, {}};
    const Field u = sample_initial(InitialSpec{b}, fine);
    const Field ue = regularize_initial(InitialSpec{b}, 0.5, OmegaSchedule::polynomial(), psi, fine, 12);
    EXPECT_NEAR(discrete_integral(ue), discrete_integral(u), 1e-3 * discrete_integral(u));
    EXPECT_LT(ue.max(), u.max());
}

TEST(Convolve, DiscreteDeltaIsIdentity) {
    std::mt19937_64 rng(1);
    for (const auto& g : {line(16, 1.0), make_grid(GroupInstance::heisenberg1(), {1.0, 1.5, 2.0}, {6, 8, 10})}) {
        const Field f = random_field(g, rng);
        EXPECT_LT(lp_norm(convolve(f, discrete_delta(g)) - f, kInf), 1e-12);
        EXPECT_LT(lp_norm(convolve(discrete_delta(g), f) - f, kInf), 1e-12);
    }
}

TEST(Convolve, EuclideanMatchesDirectSum) {
    std::mt19937_64 rng(2);
    const auto g = make_grid(GroupInstance::euclidean(2), {1.0, 0.5}, {8, 6});
    const Field f = random_field(g, rng), k = random_field(g, rng);
    const Field c = convolve(f, k);
    auto index_of = [&](double x, std::size_t axis) {
        const double L = g->half_width(axis), period = 2 * L;
        double y = std::fmod(x + L, period);
        if (y < 0) {
            y += period;
        }
        return static_cast<std::size_t>(std::lround(y / g->spacing(axis))) % g->points(axis);
    };
    for (std::size_t i = 0; i < g->dof(); ++i) {
        const Point x = g->node(i);
        double expect = 0.0;
        for (std::size_t j = 0; j < g->dof(); ++j) {
            const Point y = g->node(j);
            const std::size_t kk = index_of(x[0] - y[0], 0) * g->stride(0) + index_of(x[1] - y[1], 1);
            expect += f[j] * k[kk] * g->cell_volume();
        }
        EXPECT_NEAR(c[i], expect, 1e-12);
    }
}

TEST(Convolve, HeisenbergPreservesMass) {
    std::mt19937_64 rng(3);
    const auto g = make_grid(GroupInstance::heisenberg1(), {1.0, 1.0, 2.0}, {8, 8, 8});
    const Field f = random_field(g, rng), k = random_field(g, rng);
    const double expect = discrete_integral(f) * discrete_integral(k);
    EXPECT_NEAR(discrete_integral(convolve(f, k)), expect, 1e-10 * std::abs(expect));
}

TEST(Convolve, HeisenbergOnPlanarFieldsIsPlanarConvolution) {
    // Fields independent of c see only the (a, b) part of the group law.
    std::mt19937_64 rng(4);
    const auto h = make_grid(GroupInstance::heisenberg1(), {1.0, 1.0, 2.0}, {6, 6, 8});
    const auto p = make_grid(GroupInstance::euclidean(2), {1.0, 1.0}, {6, 6});
    const Field f2 = random_field(p, rng), k2 = random_field(p, rng);
    auto lift = [&](const Field& f) {
        return Field::from_function(h, [&](std::span<const double> x) {
            const auto ia = static_cast<std::size_t>(std::lround((x[0] + 1.0) / h->spacing(0)));
            const auto ib = static_cast<std::size_t>(std::lround((x[1] + 1.0) / h->spacing(1)));
            return f[ia * 6 + ib];
        });
    };
    const Field c3 = convolve(lift(f2), lift(k2));
    const Field c2 = convolve(f2, k2);
    // the c integral contributes a factor 2 L_c = 4
    EXPECT_LT(lp_norm(c3 - 4.0 * lift(c2), kInf), 1e-12);
}

TEST(Convolve, Errors) {
    const auto g = line(16, 1.0);
    EXPECT_THROW(convolve(Field(g), Field(line(16, 2.0))), ArgumentError);
    const auto odd = line(15, 1.0);
    EXPECT_THROW(convolve(Field(odd), Field(odd)), ArgumentError);
}
