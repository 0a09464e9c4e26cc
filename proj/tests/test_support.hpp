// Shared generators and independent numerical oracles for the test suites.
// Nothing here calls into the code path it is used to check.

#ifndef GBMPO_TESTS_TEST_SUPPORT_HPP
#define GBMPO_TESTS_TEST_SUPPORT_HPP

#include <cmath>
#include <cstddef>
#include <functional>
#include <random>
#include <vector>

#include "gbmpo/gbmpo.hpp"

namespace gbmpo::testing {

/// Uniform draw on the simplex (normalized exponentials), every entry >= 1e-6.
inline std::vector<double> random_simplex(std::mt19937_64& rng, std::size_t dim) {
    std::exponential_distribution<double> expo(1.0);
    std::vector<double> p(dim);
    double total = 0.0;
    for (double& x : p) {
        x = expo(rng) + 1e-5;
        total += x;
    }
    for (double& x : p) x /= total;
    return p;
}

/// Mirror parameters with moderate values: inputs w in +-[0.5, 2], offsets
/// in [-1, 1], output weights ~ N(0, 0.3^2).
inline NeuralMirrorParams random_mirror_params(std::mt19937_64& rng) {
    std::normal_distribution<double> normal(0.0, 0.3);
    std::uniform_real_distribution<double> mag(0.5, 2.0), off(-1.0, 1.0);
    std::bernoulli_distribution sign(0.5);
    NeuralMirrorParams p;
    for (std::size_t j = 0; j < kMirrorUnits; ++j) {
        p.v[j] = normal(rng);
        p.w[j] = sign(rng) ? mag(rng) : -mag(rng);
        p.b[j] = off(rng);
    }
    p.a = normal(rng);
    p.c = normal(rng);
    return p;
}

inline double central_difference(const std::function<double(double)>& f, double x, double h) {
    return (f(x + h) - f(x - h)) / (2.0 * h);
}

/// Composite trapezoid rule on [lo, hi] with n panels.
inline double trapezoid(const std::function<double(double)>& f, double lo, double hi, std::size_t n) {
    const double h = (hi - lo) / static_cast<double>(n);
    double total = 0.5 * (f(lo) + f(hi));
    for (std::size_t i = 1; i < n; ++i) total += f(lo + h * static_cast<double>(i));
    return total * h;
}

/// phi(p) written out directly from each potential's definition.
inline double potential_value(const PotentialSpec& spec, const std::vector<double>& p) {
    double total = 0.0;
    if (std::holds_alternative<KlPotential>(spec.kind())) {
        for (double x : p) total += x * std::log(clamp_probability(x));
    } else if (std::holds_alternative<ProbL2Potential>(spec.kind())) {
        for (double x : p) total += 0.5 * x * x;
    } else if (const auto* a = std::get_if<AlphaPotential>(&spec.kind())) {
        const double al = a->alpha_param;
        for (double x : p) total += (std::pow(clamp_probability(x), al) - clamp_probability(x)) / (al * (al - 1.0));
    } else {
        const auto& params = std::get<NeuralPotential>(spec.kind()).params;
        for (double x : p) total += mirror_potential(params, x);
    }
    return total;
}

/// Central-difference gradient of f over every coordinate of a vector.
inline std::vector<double> numeric_gradient(const std::function<double(const std::vector<double>&)>& f,
                                            std::vector<double> x, double h) {
    std::vector<double> out(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double saved = x[i];
        x[i] = saved + h;
        const double up = f(x);
        x[i] = saved - h;
        const double down = f(x);
        x[i] = saved;
        out[i] = (up - down) / (2.0 * h);
    }
    return out;
}

inline bool close_rel(double actual, double expected, double rel, double abs_floor = 1e-9) {
    return std::abs(actual - expected) <= rel * std::max(std::abs(expected), std::abs(actual)) + abs_floor;
}

}  // namespace gbmpo::testing

#endif  // GBMPO_TESTS_TEST_SUPPORT_HPP
