#ifndef GBMPO_SIMPLEX_HPP
#define GBMPO_SIMPLEX_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace gbmpo {

/// Lower bound applied to every probability before a log or a power.
inline constexpr double kProbabilityFloor = 1e-6;

inline double clamp_probability(double y) { return std::clamp(y, kProbabilityFloor, 1.0); }

/// A probability distribution over a small action vocabulary.
///
/// Construction validates the simplex invariants: at least two entries, each
/// in [0, 1], summing to one within 1e-9.
class Simplex {
public:
    static constexpr double kSumTolerance = 1e-9;

    explicit Simplex(std::vector<double> probs) : probs_(std::move(probs)) {
        if (probs_.size() < 2) {
            throw std::invalid_argument("simplex needs at least 2 entries, got " +
                                        std::to_string(probs_.size()));
        }
        double total = 0.0;
        for (double p : probs_) {
            if (!(p >= 0.0 && p <= 1.0)) {
                throw std::invalid_argument("simplex entry outside [0, 1]: " + std::to_string(p));
            }
            total += p;
        }
        if (std::abs(total - 1.0) > kSumTolerance) {
            throw std::invalid_argument("simplex entries sum to " + std::to_string(total));
        }
    }

    [[nodiscard]] std::size_t size() const noexcept { return probs_.size(); }
    [[nodiscard]] double operator[](std::size_t i) const { return probs_[i]; }
    [[nodiscard]] std::span<const double> probs() const noexcept { return probs_; }
    [[nodiscard]] auto begin() const noexcept { return probs_.begin(); }
    [[nodiscard]] auto end() const noexcept { return probs_.end(); }

    friend bool operator==(const Simplex&, const Simplex&) = default;

private:
    std::vector<double> probs_;
};

/// Numerically stable softmax of a logit row.
inline Simplex softmax(std::span<const double> logits) {
    const double peak = *std::max_element(logits.begin(), logits.end());
    std::vector<double> out(logits.size());
    double total = 0.0;
    for (std::size_t i = 0; i < logits.size(); ++i) {
        out[i] = std::exp(logits[i] - peak);
        total += out[i];
    }
    for (double& p : out) p /= total;
    return Simplex(std::move(out));
}

}  // namespace gbmpo

#endif  // GBMPO_SIMPLEX_HPP
