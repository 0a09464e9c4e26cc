#ifndef GBMPO_POLICY_HPP
#define GBMPO_POLICY_HPP

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "gbmpo/rng.hpp"
#include "gbmpo/simplex.hpp"

namespace gbmpo {

/// Dense (context x token) table of reals: policy logits and their gradients.
class LogitTable {
public:
    LogitTable() = default;
    LogitTable(std::size_t contexts, std::size_t vocab, double fill = 0.0)
        : contexts_(contexts), vocab_(vocab), values_(contexts * vocab, fill) {}

    [[nodiscard]] std::size_t contexts() const noexcept { return contexts_; }
    [[nodiscard]] std::size_t vocab() const noexcept { return vocab_; }
    [[nodiscard]] std::size_t size() const noexcept { return values_.size(); }

    [[nodiscard]] std::span<double> row(std::size_t ctx) { return {values_.data() + ctx * vocab_, vocab_}; }
    [[nodiscard]] std::span<const double> row(std::size_t ctx) const {
        return {values_.data() + ctx * vocab_, vocab_};
    }
    double& at(std::size_t ctx, std::size_t token) { return values_[ctx * vocab_ + token]; }
    [[nodiscard]] double at(std::size_t ctx, std::size_t token) const { return values_[ctx * vocab_ + token]; }

    [[nodiscard]] std::span<double> values() noexcept { return values_; }
    [[nodiscard]] std::span<const double> values() const noexcept { return values_; }

    /// this += scale * other
    void add_scaled(const LogitTable& other, double scale) {
        if (other.contexts_ != contexts_ || other.vocab_ != vocab_) throw std::invalid_argument("logit table shape mismatch");
        for (std::size_t i = 0; i < values_.size(); ++i) values_[i] += scale * other.values_[i];
    }

    [[nodiscard]] bool all_finite() const {
        for (double x : values_)
            if (!std::isfinite(x)) return false;
        return true;
    }

    friend bool operator==(const LogitTable&, const LogitTable&) = default;

private:
    std::size_t contexts_ = 0;
    std::size_t vocab_ = 0;
    std::vector<double> values_;
};

inline constexpr std::size_t kMaxVocab = 256;
inline constexpr std::size_t kMaxHorizon = 16;

/// Tabular autoregressive softmax policy with a fixed response horizon.
struct PolicyParams {
    LogitTable logits;
    std::size_t horizon = 1;

    PolicyParams() = default;
    PolicyParams(std::size_t contexts, std::size_t vocab, std::size_t horizon_)
        : logits(contexts, vocab), horizon(horizon_) {
        validate();
    }

    [[nodiscard]] std::size_t contexts() const noexcept { return logits.contexts(); }
    [[nodiscard]] std::size_t vocab() const noexcept { return logits.vocab(); }

    void validate() const {
        if (contexts() < 1) throw std::invalid_argument("policy needs at least one context");
        if (vocab() < 2 || vocab() > kMaxVocab) throw std::invalid_argument("vocab size must be in [2, 256]");
        if (horizon < 1 || horizon > kMaxHorizon) throw std::invalid_argument("horizon must be in [1, 16]");
        if (!logits.all_finite()) throw std::invalid_argument("policy logits must be finite");
    }

    friend bool operator==(const PolicyParams&, const PolicyParams&) = default;
};

struct Response {
    std::vector<std::uint32_t> tokens;
    bool terminal = true;

    friend bool operator==(const Response&, const Response&) = default;
};

/// Positional context: (prompt * T + prefix_length) mod C.
inline std::size_t context_of(std::uint64_t prompt_id, std::size_t prefix_length, std::size_t horizon,
                              std::size_t contexts) {
    if (prefix_length >= horizon) throw std::out_of_range("prefix length must be below the horizon");
    return static_cast<std::size_t>((prompt_id * horizon + prefix_length) % contexts);
}

inline std::size_t context_of(const PolicyParams& params, std::uint64_t prompt_id, std::size_t prefix_length) {
    return context_of(prompt_id, prefix_length, params.horizon, params.contexts());
}

inline Simplex token_distribution(const PolicyParams& params, std::size_t context_id) {
    if (context_id >= params.contexts()) throw std::out_of_range("context id out of range");
    return softmax(params.logits.row(context_id));
}

inline void check_response(const PolicyParams& params, const Response& response) {
    if (response.tokens.empty() || response.tokens.size() > params.horizon)
        throw std::invalid_argument("response length must be in [1, T]");
    for (auto tok : response.tokens)
        if (tok >= params.vocab()) throw std::invalid_argument("token id " + std::to_string(tok) + " out of vocabulary");
}

inline double log_prob(const PolicyParams& params, std::uint64_t prompt_id, const Response& response) {
    check_response(params, response);
    double total = 0.0;
    for (std::size_t t = 0; t < response.tokens.size(); ++t) {
        const auto dist = token_distribution(params, context_of(params, prompt_id, t));
        total += std::log(dist[response.tokens[t]]);
    }
    return total;
}

/// Inverse-CDF draw from a distribution; falls back to the last token on
/// rounding shortfall.
inline std::uint32_t sample_token(const Simplex& dist, Rng& rng) {
    const double u = uniform01(rng);
    double cumulative = 0.0;
    for (std::size_t v = 0; v < dist.size(); ++v) {
        cumulative += dist[v];
        if (u < cumulative) return static_cast<std::uint32_t>(v);
    }
    return static_cast<std::uint32_t>(dist.size() - 1);
}

inline Response sample_response(const PolicyParams& params, std::uint64_t prompt_id, Rng& rng) {
    Response out;
    out.tokens.reserve(params.horizon);
    for (std::size_t t = 0; t < params.horizon; ++t)
        out.tokens.push_back(sample_token(token_distribution(params, context_of(params, prompt_id, t)), rng));
    return out;
}

inline Response sample_response(const PolicyParams& params, std::uint64_t prompt_id, std::uint64_t rng_seed) {
    Rng rng(rng_seed);
    return sample_response(params, prompt_id, rng);
}

/// Argmax decoding, ties broken toward the lowest token id.
inline Response greedy_response(const PolicyParams& params, std::uint64_t prompt_id) {
    Response out;
    for (std::size_t t = 0; t < params.horizon; ++t) {
        const auto row = params.logits.row(context_of(params, prompt_id, t));
        std::size_t best = 0;
        for (std::size_t v = 1; v < row.size(); ++v)
            if (row[v] > row[best]) best = v;
        out.tokens.push_back(static_cast<std::uint32_t>(best));
    }
    return out;
}

/// Gradient of log_prob with respect to the logits: for every visited
/// context, onehot(chosen) - softmax, accumulated over steps.
inline LogitTable score_gradient(const PolicyParams& params, std::uint64_t prompt_id, const Response& response) {
    check_response(params, response);
    LogitTable grad(params.contexts(), params.vocab());
    for (std::size_t t = 0; t < response.tokens.size(); ++t) {
        const auto ctx = context_of(params, prompt_id, t);
        const auto dist = token_distribution(params, ctx);
        auto row = grad.row(ctx);
        for (std::size_t v = 0; v < row.size(); ++v) row[v] -= dist[v];
        row[response.tokens[t]] += 1.0;
    }
    return grad;
}

}  // namespace gbmpo

#endif  // GBMPO_POLICY_HPP
