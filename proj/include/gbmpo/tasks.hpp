#ifndef GBMPO_TASKS_HPP
#define GBMPO_TASKS_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <type_traits>
#include <utility>
#include <variant>
#include <vector>

#include "gbmpo/policy.hpp"
#include "gbmpo/rng.hpp"

namespace gbmpo {

/// Reward 1 iff the first token equals the prompt's target.
struct GroupBandit {
    std::vector<std::uint32_t> targets;  // indexed by prompt id
    friend bool operator==(const GroupBandit&, const GroupBandit&) = default;
};

/// Reward 1 iff the last token equals (a + b) mod modulus for the prompt's operands.
struct ArithmeticChain {
    std::uint32_t modulus = 2;
    std::vector<std::pair<std::uint32_t, std::uint32_t>> operands;  // indexed by prompt id
    friend bool operator==(const ArithmeticChain&, const ArithmeticChain&) = default;
};

struct TaskSpec {
    std::variant<GroupBandit, ArithmeticChain> kind;
    std::size_t vocab_size = 2;
    std::size_t horizon = 1;

    [[nodiscard]] std::size_t num_prompts() const {
        return std::visit(
            [](const auto& k) -> std::size_t {
                if constexpr (std::is_same_v<std::decay_t<decltype(k)>, GroupBandit>)
                    return k.targets.size();
                else
                    return k.operands.size();
            },
            kind);
    }

    [[nodiscard]] std::string name() const {
        return std::holds_alternative<GroupBandit>(kind) ? "group_bandit" : "arithmetic_chain";
    }

    /// Token that earns the reward for a prompt, and the step it must appear at.
    [[nodiscard]] std::pair<std::size_t, std::uint32_t> rewarded_token(std::uint64_t prompt_id) const {
        if (const auto* bandit = std::get_if<GroupBandit>(&kind)) return {0, bandit->targets.at(prompt_id)};
        const auto& chain = std::get<ArithmeticChain>(kind);
        const auto [a, b] = chain.operands.at(prompt_id);
        return {horizon - 1, (a + b) % chain.modulus};
    }

    void validate() const {
        if (vocab_size < 2 || vocab_size > kMaxVocab) throw std::invalid_argument("task vocab size must be in [2, 256]");
        if (horizon < 1 || horizon > kMaxHorizon) throw std::invalid_argument("task horizon must be in [1, 16]");
        if (num_prompts() == 0) throw std::invalid_argument("task needs at least one prompt");
        if (const auto* bandit = std::get_if<GroupBandit>(&kind)) {
            for (auto t : bandit->targets)
                if (t >= vocab_size) throw std::invalid_argument("bandit target " + std::to_string(t) + " >= vocab size");
        } else {
            const auto& chain = std::get<ArithmeticChain>(kind);
            if (chain.modulus < 1 || chain.modulus > vocab_size)
                throw std::invalid_argument("arithmetic modulus must be in [1, vocab size]");
            if (horizon < 2) throw std::invalid_argument("arithmetic chain needs horizon >= 2");
        }
    }

    friend bool operator==(const TaskSpec&, const TaskSpec&) = default;
};

/// Bandit whose targets repeat with the given period (0 means no repetition),
/// so prompts sharing a policy context share a target.
inline TaskSpec make_group_bandit(std::size_t num_prompts, std::size_t vocab, std::size_t horizon, std::uint64_t seed,
                                  std::size_t period = 0) {
    if (period == 0) period = num_prompts;
    auto rng = make_rng(seed, {0x7a76});
    std::vector<std::uint32_t> base(period);
    for (auto& t : base) t = static_cast<std::uint32_t>(rng() % vocab);
    GroupBandit bandit;
    for (std::size_t p = 0; p < num_prompts; ++p) bandit.targets.push_back(base[p % period]);
    TaskSpec spec{bandit, vocab, horizon};
    spec.validate();
    return spec;
}

inline TaskSpec make_arithmetic_chain(std::size_t num_prompts, std::uint32_t modulus, std::size_t vocab,
                                      std::size_t horizon, std::uint64_t seed) {
    auto rng = make_rng(seed, {0xa217});
    ArithmeticChain chain{modulus, {}};
    for (std::size_t p = 0; p < num_prompts; ++p)
        chain.operands.emplace_back(static_cast<std::uint32_t>(rng() % modulus),
                                    static_cast<std::uint32_t>(rng() % modulus));
    TaskSpec spec{chain, vocab, horizon};
    spec.validate();
    return spec;
}

inline double reward(const TaskSpec& spec, std::uint64_t prompt_id, const Response& response) {
    if (response.tokens.empty() || response.tokens.size() > spec.horizon)
        throw std::invalid_argument("response length must be in [1, T]");
    if (const auto* bandit = std::get_if<GroupBandit>(&spec.kind))
        return response.tokens.front() == bandit->targets.at(prompt_id) ? 1.0 : 0.0;
    const auto& chain = std::get<ArithmeticChain>(spec.kind);
    const auto [a, b] = chain.operands.at(prompt_id);
    return response.tokens.back() == (a + b) % chain.modulus ? 1.0 : 0.0;
}

// ---------------------------------------------------------------------------
// Evaluation
// ---------------------------------------------------------------------------

struct GreedyEval {};
struct SampledEval {
    std::size_t n = 10;
    std::uint64_t seed = 0;
};
using EvalMode = std::variant<GreedyEval, SampledEval>;

/// Greedy: fraction of prompts whose argmax response is rewarded.
/// Sampled(n): fraction of prompts with at least one rewarded response among
/// n draws. Draw j of prompt p uses stream (seed, p, j), so the first n1
/// draws of an n2 > n1 evaluation are exactly the n1 evaluation.
inline double evaluate_accuracy(const TaskSpec& spec, const PolicyParams& params, std::span<const std::uint64_t> prompts,
                                const EvalMode& mode) {
    if (prompts.empty()) throw std::invalid_argument("evaluate_accuracy needs a nonempty prompt set");
    std::size_t solved = 0;
    for (auto prompt : prompts) {
        if (std::holds_alternative<GreedyEval>(mode)) {
            if (reward(spec, prompt, greedy_response(params, prompt)) > 0.5) ++solved;
            continue;
        }
        const auto& sampled = std::get<SampledEval>(mode);
        for (std::size_t j = 0; j < sampled.n; ++j) {
            auto rng = make_rng(sampled.seed, {prompt, j});
            if (reward(spec, prompt, sample_response(params, prompt, rng)) > 0.5) {
                ++solved;
                break;
            }
        }
    }
    return static_cast<double>(solved) / static_cast<double>(prompts.size());
}

// ---------------------------------------------------------------------------
// Prompt splits
// ---------------------------------------------------------------------------

struct SplitSpec {
    double train_fraction = 0.8;
    double validation_fraction = 0.2;
    std::vector<std::uint64_t> outer_test;  // held out from the training pool
    std::uint64_t split_seed = 0;

    void validate() const {
        if (train_fraction <= 0.0 || validation_fraction < 0.0 ||
            std::abs(train_fraction + validation_fraction - 1.0) > 1e-12)
            throw std::invalid_argument("split fractions must be positive and sum to 1");
    }
};

struct Splits {
    std::vector<std::uint64_t> inner_train;
    std::vector<std::uint64_t> inner_validation;
    std::vector<std::uint64_t> outer_test;

    /// Prompts used for validation-style evaluation; the training prompts
    /// when no validation prompts exist.
    [[nodiscard]] std::span<const std::uint64_t> validation_or_train() const {
        return inner_validation.empty() ? std::span<const std::uint64_t>(inner_train) : inner_validation;
    }

    /// Every prompt in the training pool, ascending.
    [[nodiscard]] std::vector<std::uint64_t> pool() const {
        std::vector<std::uint64_t> out(inner_train);
        out.insert(out.end(), inner_validation.begin(), inner_validation.end());
        std::sort(out.begin(), out.end());
        return out;
    }
};

/// Partition prompt ids: outer_test is taken verbatim, the rest form the
/// training pool, which is shuffled by split_seed and cut by train_fraction.
inline Splits make_splits(const SplitSpec& spec, std::size_t num_prompts) {
    spec.validate();
    Splits out;
    std::vector<bool> held(num_prompts, false);
    for (auto p : spec.outer_test) {
        if (p >= num_prompts) throw std::invalid_argument("outer test prompt " + std::to_string(p) + " out of range");
        if (held[p]) throw std::invalid_argument("outer test prompt " + std::to_string(p) + " listed twice");
        held[p] = true;
        out.outer_test.push_back(p);
    }
    std::vector<std::uint64_t> pool;
    for (std::uint64_t p = 0; p < num_prompts; ++p)
        if (!held[p]) pool.push_back(p);
    if (pool.empty()) throw std::invalid_argument("training pool is empty");

    auto rng = make_rng(spec.split_seed, {0x5b1e});
    for (std::size_t i = pool.size(); i > 1; --i) std::swap(pool[i - 1], pool[rng() % i]);

    auto n_train = static_cast<std::size_t>(std::llround(spec.train_fraction * static_cast<double>(pool.size())));
    n_train = std::clamp<std::size_t>(n_train, 1, pool.size());
    out.inner_train.assign(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(n_train));
    out.inner_validation.assign(pool.begin() + static_cast<std::ptrdiff_t>(n_train), pool.end());
    std::sort(out.inner_train.begin(), out.inner_train.end());
    std::sort(out.inner_validation.begin(), out.inner_validation.end());
    return out;
}

}  // namespace gbmpo

#endif  // GBMPO_TASKS_HPP
