#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include "gbmpo/divergence.hpp"
#include "test_support.hpp"

namespace gbmpo {
namespace {

using testing::central_difference;
using testing::random_mirror_params;
using testing::random_simplex;

constexpr std::array<ActivationKind, 6> kAllKinds{ActivationKind::Cubic,      ActivationKind::Quadratic,
                                                  ActivationKind::SquareRoot, ActivationKind::CubeRoot,
                                                  ActivationKind::LogShifted, ActivationKind::Exponential};

TEST(Activation, WorkedValues) {
    EXPECT_DOUBLE_EQ(activation(ActivationKind::Cubic, 2.0), 8.0);
    EXPECT_NEAR(activation(ActivationKind::LogShifted, 0.0), std::log(1e-3), 1e-15);
    EXPECT_NEAR(activation(ActivationKind::LogShifted, 0.0), -6.9078, 1e-4);
    EXPECT_EQ(activation(ActivationKind::SquareRoot, -1.0), 0.0);
    EXPECT_EQ(activation(ActivationKind::CubeRoot, -8.0), 0.0);
    EXPECT_DOUBLE_EQ(activation(ActivationKind::CubeRoot, 8.0), 2.0);
    EXPECT_EQ(activation(ActivationKind::Quadratic, -3.0), 0.0);
    EXPECT_DOUBLE_EQ(activation(ActivationKind::Cubic, -2.0), -8.0);
}

TEST(Activation, ExponentialIsClampedAtSixty) {
    EXPECT_DOUBLE_EQ(activation(ActivationKind::Exponential, 1000.0), std::exp(60.0));
    EXPECT_TRUE(std::isfinite(activation(ActivationKind::Exponential, 1e6)));
}

TEST(Activation, UnitLayoutIsSixBlocksOfTwentyOne) {
    EXPECT_EQ(activation_of_unit(0), ActivationKind::Cubic);
    EXPECT_EQ(activation_of_unit(20), ActivationKind::Cubic);
    EXPECT_EQ(activation_of_unit(21), ActivationKind::Quadratic);
    EXPECT_EQ(activation_of_unit(62), ActivationKind::SquareRoot);
    EXPECT_EQ(activation_of_unit(63), ActivationKind::CubeRoot);
    EXPECT_EQ(activation_of_unit(104), ActivationKind::LogShifted);
    EXPECT_EQ(activation_of_unit(105), ActivationKind::Exponential);
    EXPECT_EQ(activation_of_unit(125), ActivationKind::Exponential);
}

TEST(Primitive, WorkedValues) {
    EXPECT_DOUBLE_EQ(primitive(ActivationKind::Exponential, 0.0, 1.0, 0.0), 1.0);
    EXPECT_DOUBLE_EQ(primitive(ActivationKind::Cubic, 1.0, 1.0, 0.0), 0.25);
}

TEST(Primitive, ZeroWeightIsDegenerate) {
    for (auto kind : kAllKinds) EXPECT_THROW(primitive(kind, 0.5, 0.0, 0.1), DegenerateWeightError);
}

// d/dy H(y) must equal g(w y + b): the 1/w in each primitive cancels the chain-rule w.
TEST(Primitive, DerivativeMatchesActivation) {
    const double y = 0.37, w = 1.3, b = -0.2, h = 1e-5;
    for (auto kind : kAllKinds) {
        const double fd = central_difference([&](double t) { return primitive(kind, t, w, b); }, y, h);
        const double expected = activation(kind, w * y + b);
        EXPECT_TRUE(testing::close_rel(fd, expected, 1e-5)) << to_string(kind) << ": fd " << fd << " vs " << expected;
    }
}

TEST(Primitive, DerivativeMatchesActivationBelowKinkAndPastClamp) {
    const double h = 1e-6;
    // u = w y + b < 0 for the guarded kinds.
    for (auto kind : kAllKinds) {
        const double fd = central_difference([&](double t) { return primitive(kind, t, 0.8, -0.9); }, 0.4, h);
        EXPECT_TRUE(testing::close_rel(fd, activation(kind, 0.8 * 0.4 - 0.9), 1e-5)) << to_string(kind);
    }
    // u > 60 for the exponential.
    const double fd = central_difference([&](double t) { return primitive(ActivationKind::Exponential, t, 10.0, 58.0); },
                                         0.5, 1e-7);
    EXPECT_TRUE(testing::close_rel(fd, std::exp(60.0), 1e-5));
}

TEST(PhiInverse, RecoversLogAndIdentity) {
    EXPECT_NEAR(phi_inverse(NeuralMirrorParams::entropic(), 0.5), std::log(0.5), 1e-15);
    EXPECT_NEAR(phi_inverse(NeuralMirrorParams::entropic(), 0.5), -0.6931, 1e-4);
    EXPECT_DOUBLE_EQ(phi_inverse(NeuralMirrorParams::euclidean(), 0.5), 0.5);
    EXPECT_EQ(phi_inverse(NeuralMirrorParams{}, 0.9), 0.0);
}

TEST(MirrorPotential, WorkedValues) {
    EXPECT_DOUBLE_EQ(mirror_potential(NeuralMirrorParams::entropic(), 1.0), -1.0);
    NeuralMirrorParams p;
    p.a = 2.0;
    EXPECT_DOUBLE_EQ(mirror_potential(p, 0.5), 0.25);
}

TEST(MirrorPotential, SkipsUnitsWithZeroOutputWeight) {
    NeuralMirrorParams p = NeuralMirrorParams::entropic();  // every w_j == 0
    EXPECT_NO_THROW(mirror_potential(p, 0.3));
    p.v[5] = 1.0;
    EXPECT_THROW(mirror_potential(p, 0.3), DegenerateWeightError);
}

TEST(MirrorPotential, DerivativeIsPhiInverse) {
    std::mt19937_64 rng(11);
    for (int draw = 0; draw < 20; ++draw) {
        const auto params = random_mirror_params(rng);
        for (double y : {0.1, 0.5, 0.9}) {
            const double fd = central_difference([&](double t) { return mirror_potential(params, t); }, y, 1e-6);
            EXPECT_TRUE(testing::close_rel(fd, phi_inverse(params, y), 1e-4, 1e-7)) << "draw " << draw << " y " << y;
        }
    }
}

TEST(BregmanPerAction, WorkedValues) {
    EXPECT_NEAR(bregman_per_action(NeuralMirrorParams::entropic(), 0.5, 0.25), 0.5 * std::log(2.0) - 0.25, 1e-15);
    EXPECT_NEAR(bregman_per_action(NeuralMirrorParams::entropic(), 0.5, 0.25), 0.09657, 1e-5);
    EXPECT_NEAR(bregman_per_action(NeuralMirrorParams::euclidean(), 0.7, 0.3), 0.08, 1e-15);
    std::mt19937_64 rng(3);
    EXPECT_EQ(bregman_per_action(random_mirror_params(rng), 0.4, 0.4), 0.0);
}

TEST(BregmanPerAction, MatchesGenericPotentialForm) {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> unit(0.01, 1.0);
    for (int draw = 0; draw < 20; ++draw) {
        const auto params = random_mirror_params(rng);
        for (int k = 0; k < 10; ++k) {
            const double y = unit(rng), y0 = unit(rng);
            const double generic =
                mirror_potential(params, y) - mirror_potential(params, y0) - phi_inverse(params, y0) * (y - y0);
            EXPECT_NEAR(bregman_per_action(params, y, y0), generic, 1e-9);
        }
    }
}

TEST(NeuralMirrorParams, FlattenRoundTripsInCanonicalOrder) {
    std::mt19937_64 rng(9);
    const auto params = random_mirror_params(rng);
    const auto flat = params.flatten();
    ASSERT_EQ(flat.size(), 380u);
    EXPECT_EQ(flat[0], params.v[0]);
    EXPECT_EQ(flat[126], params.w[0]);
    EXPECT_EQ(flat[252], params.b[0]);
    EXPECT_EQ(flat[378], params.a);
    EXPECT_EQ(flat[379], params.c);
    EXPECT_EQ(NeuralMirrorParams::unflatten(flat), params);
    EXPECT_THROW(NeuralMirrorParams::unflatten(std::vector<double>(379)), std::invalid_argument);
}

TEST(BregmanSimplex, WorkedValues) {
    const std::vector<double> one_zero{1.0, 0.0}, half{0.5, 0.5};
    EXPECT_DOUBLE_EQ(bregman_simplex(PotentialSpec::prob_l2(), one_zero, half), 0.25);
    const std::vector<double> p{0.75, 0.25}, q{0.25, 0.75};
    EXPECT_NEAR(bregman_simplex(PotentialSpec::kl(), p, q), 0.5 * std::log(3.0), 1e-15);
    EXPECT_NEAR(bregman_simplex(PotentialSpec::kl(), p, q), 0.5493, 1e-4);
}

TEST(BregmanSimplex, KlTreatsZeroMassAsZeroContribution) {
    const std::vector<double> p{1.0, 0.0}, q{0.5, 0.5};
    EXPECT_NEAR(bregman_simplex(PotentialSpec::kl(), p, q), std::log(2.0), 1e-15);
}

TEST(BregmanSimplex, DimensionMismatchThrows) {
    const std::vector<double> p{0.5, 0.5}, q{0.2, 0.3, 0.5};
    EXPECT_THROW(bregman_simplex(PotentialSpec::kl(), p, q), std::invalid_argument);
}

TEST(BregmanSimplex, AlphaTwoIsProbL2) {
    std::mt19937_64 rng(21);
    const auto alpha2 = PotentialSpec::alpha(2.0);
    for (int i = 0; i < 50; ++i) {
        const auto p = random_simplex(rng, 2 + i % 7), q = random_simplex(rng, 2 + i % 7);
        EXPECT_NEAR(bregman_simplex(alpha2, p, q), bregman_simplex(PotentialSpec::prob_l2(), p, q), 1e-10);
    }
}

TEST(PotentialSpec, AlphaRejectsZeroAndOne) {
    EXPECT_THROW(PotentialSpec::alpha(0.0), std::invalid_argument);
    EXPECT_THROW(PotentialSpec::alpha(1.0), std::invalid_argument);
    EXPECT_NO_THROW(PotentialSpec::alpha(-1.0));
}

TEST(GradPhi, WorkedValues) {
    const std::vector<double> p{0.3, 0.7};
    EXPECT_EQ(grad_phi(PotentialSpec::prob_l2(), p), p);
    const std::vector<double> e{1.0 / std::numbers::e, 1.0 - 1.0 / std::numbers::e};
    EXPECT_NEAR(grad_phi(PotentialSpec::kl(), e)[0], 0.0, 1e-15);
}

TEST(GradPhi, ConsistentWithDirectPotential) {
    std::mt19937_64 rng(31);
    const std::vector<PotentialSpec> specs{PotentialSpec::kl(), PotentialSpec::prob_l2(), PotentialSpec::alpha(-1.0),
                                           PotentialSpec::alpha(0.5), PotentialSpec::alpha(3.0),
                                           PotentialSpec::neural(random_mirror_params(rng))};
    for (const auto& spec : specs) {
        for (int i = 0; i < 50; ++i) {
            const auto p = random_simplex(rng, 2 + i % 9), q = random_simplex(rng, 2 + i % 9);
            const auto g = grad_phi(spec, q);
            double inner = 0.0;
            for (std::size_t k = 0; k < p.size(); ++k) inner += g[k] * (p[k] - q[k]);
            const double direct = testing::potential_value(spec, p) - testing::potential_value(spec, q) - inner;
            EXPECT_NEAR(bregman_simplex(spec, p, q), direct, 1e-8) << spec.name();
        }
    }
}

TEST(BregmanSimplex, NegativeNeuralValuesAreCounted) {
    NeuralMirrorParams concave;
    concave.a = -1.0;  // phi^{-1}(y) = -y: concave potential, divergence <= 0
    const auto spec = PotentialSpec::neural(concave);
    DivergenceStats stats;
    const Simplex p({0.9, 0.1}), q({0.5, 0.5});
    EXPECT_LT(bregman_simplex(spec, p, q, stats), 0.0);
    bregman_simplex(spec, p, p, stats);
    EXPECT_EQ(stats.evaluations, 2u);
    EXPECT_EQ(stats.negative, 1u);
}

TEST(Simplex, RejectsInvalidDistributions) {
    EXPECT_THROW(Simplex({1.0}), std::invalid_argument);
    EXPECT_THROW(Simplex({0.5, 0.6}), std::invalid_argument);
    EXPECT_THROW(Simplex({1.5, -0.5}), std::invalid_argument);
    EXPECT_NO_THROW(Simplex({0.25, 0.75}));
}

}  // namespace
}  // namespace gbmpo
