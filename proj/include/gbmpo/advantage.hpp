#ifndef GBMPO_ADVANTAGE_HPP
#define GBMPO_ADVANTAGE_HPP

#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <stdexcept>
#include <vector>

namespace gbmpo {

enum class AdvantageMode : std::uint8_t { Grpo, DrGrpo };

struct AdvantageConfig {
    AdvantageMode mode = AdvantageMode::DrGrpo;
    double epsilon = 1e-4;  // std stabilizer, Grpo only

    void validate() const {
        if (epsilon < 0.0) throw std::invalid_argument("advantage epsilon must be >= 0");
        if (mode == AdvantageMode::Grpo && epsilon == 0.0)
            throw std::invalid_argument("grpo advantages require epsilon > 0");
    }
};

/// Group-relative advantages for the K rewards of one prompt.
///
/// Grpo: (r_i - mean) / (std + epsilon), population std (divide by K).
/// DrGrpo: r_i - mean.
///
/// A Grpo config with epsilon == 0 is accepted here (constant groups then
/// return zeros); AdvantageConfig::validate rejects it for training runs.
inline std::vector<double> advantages(const AdvantageConfig& cfg, std::span<const double> rewards) {
    if (rewards.size() < 2) throw std::invalid_argument("reward group needs K >= 2");
    const double k = static_cast<double>(rewards.size());
    const double mean = std::accumulate(rewards.begin(), rewards.end(), 0.0) / k;

    std::vector<double> out(rewards.size());
    for (std::size_t i = 0; i < rewards.size(); ++i) out[i] = rewards[i] - mean;
    if (cfg.mode == AdvantageMode::DrGrpo) return out;

    double ss = 0.0;
    for (double d : out) ss += d * d;
    const double denom = std::sqrt(ss / k) + cfg.epsilon;
    if (denom == 0.0) return std::vector<double>(rewards.size(), 0.0);
    for (double& d : out) d /= denom;
    return out;
}

}  // namespace gbmpo

#endif  // GBMPO_ADVANTAGE_HPP
