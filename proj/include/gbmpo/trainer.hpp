#ifndef GBMPO_TRAINER_HPP
#define GBMPO_TRAINER_HPP

#include <chrono>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "gbmpo/advantage.hpp"
#include "gbmpo/divergence.hpp"
#include "gbmpo/policy.hpp"
#include "gbmpo/rng.hpp"
#include "gbmpo/tasks.hpp"

namespace gbmpo {

/// Which regularizer a run uses. KlPenalty is the KL baseline: the KL
/// potential weighted by kl_beta. Bregman uses `potential` weighted by
/// bregman_coeff. Both go through the same objective and gradient code.
enum class RegularizerMode : std::uint8_t { Bregman, KlPenalty };

enum class LrSchedule : std::uint8_t { Constant, Cosine };

enum class PolicyInitKind : std::uint8_t { Uniform, Random, Perfect };

struct PolicyInit {
    PolicyInitKind kind = PolicyInitKind::Uniform;
    double scale = 0.1;    // std of Random logits
    double margin = 30.0;  // logit given to the rewarded token under Perfect
};

struct TrainerConfig {
    std::size_t responses_per_prompt = 8;  // K
    RegularizerMode mode = RegularizerMode::Bregman;
    double bregman_coeff = 1e-4;
    double kl_beta = 0.01;
    double learning_rate = 0.5;
    LrSchedule schedule = LrSchedule::Constant;
    std::size_t steps = 1000;
    std::size_t length_norm = 0;  // 0 selects the horizon T
    AdvantageConfig advantage{};
    PotentialSpec potential = PotentialSpec::prob_l2();
    std::size_t contexts = 0;  // 0 selects num_prompts * T
    PolicyInit init{};
    std::size_t eval_every = 0;  // 0 disables periodic validation
    std::uint64_t seed = 0;

    [[nodiscard]] PotentialSpec active_potential() const {
        return mode == RegularizerMode::KlPenalty ? PotentialSpec::kl() : potential;
    }
    [[nodiscard]] double active_coeff() const { return mode == RegularizerMode::KlPenalty ? kl_beta : bregman_coeff; }
    [[nodiscard]] double length_normalizer(std::size_t horizon) const {
        return static_cast<double>(length_norm == 0 ? horizon : length_norm);
    }

    void validate() const {
        if (responses_per_prompt < 2) throw std::invalid_argument("responses_per_prompt (K) must be >= 2");
        if (bregman_coeff < 0.0) throw std::invalid_argument("bregman_coeff must be >= 0");
        if (kl_beta < 0.0) throw std::invalid_argument("kl_beta must be >= 0");
        if (!(learning_rate > 0.0)) throw std::invalid_argument("learning_rate must be > 0");
        advantage.validate();
    }
};

struct TrainState {
    PolicyParams policy;
    PolicyParams reference;  // frozen
    std::size_t step = 0;
    double reward_sum = 0.0;
    double divergence_sum = 0.0;
    double length_sum = 0.0;
    DivergenceStats divergence_stats{};
};

struct MetricRecord {
    std::size_t step = 0;
    double reward_mean = 0.0;
    double divergence_mean = 0.0;
    std::optional<double> validation_accuracy;
    double response_length = 0.0;
    double wall_clock = 0.0;  // seconds since epoch; not part of the reproducible log

    friend bool operator==(const MetricRecord& l, const MetricRecord& r) {
        return l.step == r.step && l.reward_mean == r.reward_mean && l.divergence_mean == r.divergence_mean &&
               l.validation_accuracy == r.validation_accuracy && l.response_length == r.response_length;
    }
};

class TrainingAborted : public std::runtime_error {
public:
    TrainingAborted(const std::string& potential, std::size_t step, const std::string& what)
        : std::runtime_error("training aborted at step " + std::to_string(step) + " (potential " + potential +
                             "): " + what),
          potential_(potential),
          step_(step) {}

    [[nodiscard]] const std::string& potential() const noexcept { return potential_; }
    [[nodiscard]] std::size_t step() const noexcept { return step_; }

private:
    std::string potential_;
    std::size_t step_;
};

// ---------------------------------------------------------------------------
// Divergence along a response
// ---------------------------------------------------------------------------

/// Sum over response steps of the per-token Bregman divergence between the
/// policy's and the reference's next-token distributions.
inline double sequence_divergence(const PotentialSpec& spec, const PolicyParams& policy, const PolicyParams& reference,
                                  std::uint64_t prompt_id, const Response& response,
                                  DivergenceStats* stats = nullptr) {
    check_response(policy, response);
    double total = 0.0;
    for (std::size_t t = 0; t < response.tokens.size(); ++t) {
        const auto ctx = context_of(policy, prompt_id, t);
        const auto p = token_distribution(policy, ctx);
        const auto q = token_distribution(reference, ctx);
        total += stats ? bregman_simplex(spec, p, q, *stats) : bregman_simplex(spec, p, q);
    }
    return total;
}

/// Exact gradient of sequence_divergence with respect to the policy logits:
/// per visited context, J_softmax^T (grad_phi(pi) - grad_phi(pi_ref)).
inline LogitTable divergence_gradient(const PotentialSpec& spec, const PolicyParams& policy,
                                      const PolicyParams& reference, std::uint64_t prompt_id,
                                      const Response& response) {
    check_response(policy, response);
    LogitTable grad(policy.contexts(), policy.vocab());
    for (std::size_t t = 0; t < response.tokens.size(); ++t) {
        const auto ctx = context_of(policy, prompt_id, t);
        const auto p = token_distribution(policy, ctx);
        const auto gp = grad_phi(spec, p);
        const auto gq = grad_phi(spec, token_distribution(reference, ctx));
        double mean = 0.0;
        for (std::size_t v = 0; v < p.size(); ++v) mean += p[v] * (gp[v] - gq[v]);
        auto row = grad.row(ctx);
        for (std::size_t v = 0; v < p.size(); ++v) row[v] += p[v] * ((gp[v] - gq[v]) - mean);
    }
    return grad;
}

/// Single-sample score-form estimator of the divergence gradient:
/// grad log pi(y_t) * (grad_phi(pi) - grad_phi(pi_ref)) at the sampled token,
/// summed over steps. Its expectation under the policy is divergence_gradient.
inline LogitTable sampled_divergence_gradient(const PotentialSpec& spec, const PolicyParams& policy,
                                              const PolicyParams& reference, std::uint64_t prompt_id,
                                              const Response& response) {
    check_response(policy, response);
    LogitTable grad(policy.contexts(), policy.vocab());
    for (std::size_t t = 0; t < response.tokens.size(); ++t) {
        const auto ctx = context_of(policy, prompt_id, t);
        const auto p = token_distribution(policy, ctx);
        const auto tok = response.tokens[t];
        const double weight = grad_phi(spec, p)[tok] - grad_phi(spec, token_distribution(reference, ctx))[tok];
        auto row = grad.row(ctx);
        for (std::size_t v = 0; v < p.size(); ++v) row[v] -= weight * p[v];
        row[tok] += weight;
    }
    return grad;
}

// ---------------------------------------------------------------------------
// Objective and gradient
// ---------------------------------------------------------------------------

/// One response's contribution to the objective before the 1/(K L) scaling.
inline double objective_term(double advantage, double log_ratio, double divergence, double coeff) {
    return advantage * log_ratio - coeff * divergence;
}

namespace detail {

inline void check_group(const TrainerConfig& cfg, std::span<const Response> responses, std::span<const double> rewards) {
    if (responses.size() != rewards.size()) throw std::invalid_argument("responses and rewards are misaligned");
    if (responses.size() != cfg.responses_per_prompt)
        throw std::invalid_argument("expected K = " + std::to_string(cfg.responses_per_prompt) + " responses");
}

}  // namespace detail

/// (1/K) sum_i [A_i (log pi(y_i) - log pi_ref(y_i)) - coeff * D(y_i)] / L
inline double objective(const TrainerConfig& cfg, const TrainState& state, std::uint64_t prompt_id,
                        std::span<const Response> responses, std::span<const double> rewards) {
    detail::check_group(cfg, responses, rewards);
    const auto adv = advantages(cfg.advantage, rewards);
    const auto spec = cfg.active_potential();
    const double coeff = cfg.active_coeff();
    double total = 0.0;
    for (std::size_t i = 0; i < responses.size(); ++i) {
        const double log_ratio =
            log_prob(state.policy, prompt_id, responses[i]) - log_prob(state.reference, prompt_id, responses[i]);
        const double div =
            coeff == 0.0 ? 0.0 : sequence_divergence(spec, state.policy, state.reference, prompt_id, responses[i]);
        total += objective_term(adv[i], log_ratio, div, coeff);
    }
    return total / (static_cast<double>(responses.size()) * cfg.length_normalizer(state.policy.horizon));
}

/// Gradient of `objective` with respect to the policy logits, with the
/// sampled responses and rewards held fixed.
inline LogitTable gradient(const TrainerConfig& cfg, const TrainState& state, std::uint64_t prompt_id,
                           std::span<const Response> responses, std::span<const double> rewards) {
    detail::check_group(cfg, responses, rewards);
    const auto adv = advantages(cfg.advantage, rewards);
    const auto spec = cfg.active_potential();
    const double coeff = cfg.active_coeff();
    const double scale =
        1.0 / (static_cast<double>(responses.size()) * cfg.length_normalizer(state.policy.horizon));

    LogitTable grad(state.policy.contexts(), state.policy.vocab());
    for (std::size_t i = 0; i < responses.size(); ++i) {
        if (adv[i] != 0.0) grad.add_scaled(score_gradient(state.policy, prompt_id, responses[i]), adv[i] * scale);
        if (coeff != 0.0)
            grad.add_scaled(divergence_gradient(spec, state.policy, state.reference, prompt_id, responses[i]),
                            -coeff * scale);
    }
    return grad;
}

// ---------------------------------------------------------------------------
// Training loop
// ---------------------------------------------------------------------------

inline PolicyParams initial_policy(const TrainerConfig& cfg, const TaskSpec& task) {
    const std::size_t contexts = cfg.contexts == 0 ? task.num_prompts() * task.horizon : cfg.contexts;
    PolicyParams policy(contexts, task.vocab_size, task.horizon);
    switch (cfg.init.kind) {
        case PolicyInitKind::Uniform: break;
        case PolicyInitKind::Random: {
            auto rng = make_rng(cfg.seed, {0x1417});
            std::normal_distribution<double> normal(0.0, cfg.init.scale);
            for (double& x : policy.logits.values()) x = normal(rng);
            break;
        }
        case PolicyInitKind::Perfect:
            for (std::uint64_t prompt = 0; prompt < task.num_prompts(); ++prompt) {
                const auto [step, token] = task.rewarded_token(prompt);
                policy.logits.at(context_of(policy, prompt, step), token) = cfg.init.margin;
            }
            break;
    }
    return policy;
}

struct TrainResult {
    TrainState state;
    std::vector<MetricRecord> metrics;
};

inline double learning_rate_at(const TrainerConfig& cfg, std::size_t step) {
    if (cfg.schedule == LrSchedule::Constant || cfg.steps <= 1) return cfg.learning_rate;
    const double progress = static_cast<double>(step - 1) / static_cast<double>(cfg.steps - 1);
    return 0.5 * cfg.learning_rate * (1.0 + std::cos(std::numbers::pi * progress));
}

inline double now_seconds() {
    return std::chrono::duration<double>(std::chrono::system_clock::now().time_since_epoch()).count();
}

/// Gradient ascent on the group objective. Each step draws one prompt from
/// inner_train, samples K responses, and moves the logits along the exact
/// gradient. Throws TrainingAborted on a non-finite gradient or divergence.
inline TrainResult train(const TrainerConfig& cfg, const TaskSpec& task, const Splits& splits) {
    cfg.validate();
    task.validate();
    if (splits.inner_train.empty()) throw std::invalid_argument("train needs a nonempty inner_train split");

    TrainResult result;
    auto& state = result.state;
    state.policy = initial_policy(cfg, task);
    state.reference = state.policy;

    const auto spec = cfg.active_potential();
    const std::size_t k = cfg.responses_per_prompt;
    auto rng = make_rng(cfg.seed, {0x7261});

    std::vector<Response> responses(k);
    std::vector<double> rewards(k);
    for (std::size_t step = 1; step <= cfg.steps; ++step) {
        const auto prompt = splits.inner_train[rng() % splits.inner_train.size()];
        double divergence = 0.0;
        double length = 0.0;
        for (std::size_t i = 0; i < k; ++i) {
            responses[i] = sample_response(state.policy, prompt, rng);
            rewards[i] = reward(task, prompt, responses[i]);
            divergence +=
                sequence_divergence(spec, state.policy, state.reference, prompt, responses[i], &state.divergence_stats);
            length += static_cast<double>(responses[i].tokens.size());
        }
        if (!std::isfinite(divergence)) throw TrainingAborted(spec.name(), step, "non-finite divergence");

        auto grad = gradient(cfg, state, prompt, responses, rewards);
        if (!grad.all_finite()) throw TrainingAborted(spec.name(), step, "non-finite gradient");
        state.policy.logits.add_scaled(grad, learning_rate_at(cfg, step));
        if (!state.policy.logits.all_finite()) throw TrainingAborted(spec.name(), step, "non-finite logits");

        MetricRecord rec;
        rec.step = step;
        for (double r : rewards) rec.reward_mean += r;
        rec.reward_mean /= static_cast<double>(k);
        rec.divergence_mean = divergence / static_cast<double>(k);
        rec.response_length = length / static_cast<double>(k);
        if (cfg.eval_every != 0 && step % cfg.eval_every == 0)
            rec.validation_accuracy =
                evaluate_accuracy(task, state.policy, splits.validation_or_train(), GreedyEval{});
        rec.wall_clock = now_seconds();

        state.step = step;
        state.reward_sum += rec.reward_mean;
        state.divergence_sum += rec.divergence_mean;
        state.length_sum += rec.response_length;
        result.metrics.push_back(rec);
    }
    return result;
}

}  // namespace gbmpo

#endif  // GBMPO_TRAINER_HPP
