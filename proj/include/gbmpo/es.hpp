#ifndef GBMPO_ES_HPP
#define GBMPO_ES_HPP

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <exception>
#include <functional>
#include <limits>
#include <numeric>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "gbmpo/divergence.hpp"
#include "gbmpo/rng.hpp"
#include "gbmpo/tasks.hpp"
#include "gbmpo/trainer.hpp"

namespace gbmpo {

enum class FitnessKind : std::uint8_t { GreedyAccuracy, PassAtN };

struct FitnessMode {
    FitnessKind kind = FitnessKind::GreedyAccuracy;
    std::size_t n = 10;  // samples per prompt for PassAtN
};

struct EsConfig {
    static constexpr double kEliteFraction = 0.25;

    std::size_t population = 12;  // N
    std::size_t iterations = 15;  // G
    double sigma0 = 0.02;
    double decay = 1.0;  // gamma
    double es_learning_rate = 0.01;
    double init_sigma = 0.01;
    TrainerConfig inner_trainer{};
    std::size_t inner_steps = 200;
    FitnessMode fitness{};
    std::uint64_t seed = 0;
    std::size_t jobs = 1;  // concurrent fitness evaluations

    [[nodiscard]] std::size_t elite_count() const { return population / 4; }  // floor(N * 0.25)

    [[nodiscard]] double sigma_at(std::size_t g) const {
        return sigma0 * std::pow(decay, static_cast<double>(g - 1));
    }

    void validate() const {
        if (population < 2 || population % 2 != 0) throw std::invalid_argument("ES population must be even and >= 2");
        if (!(sigma0 > 0.0)) throw std::invalid_argument("ES sigma0 must be > 0");
        if (!(decay > 0.0 && decay <= 1.0)) throw std::invalid_argument("ES decay must be in (0, 1]");
        if (!(es_learning_rate > 0.0)) throw std::invalid_argument("ES learning rate must be > 0");
        if (!(init_sigma >= 0.0)) throw std::invalid_argument("ES init_sigma must be >= 0");
        if (fitness.kind == FitnessKind::PassAtN && fitness.n == 0) throw std::invalid_argument("pass@n needs n >= 1");
    }
};

/// A perturbation kept from a rejected iteration together with its fitness.
struct Elite {
    std::vector<double> perturbation;
    double fitness = 0.0;
};

struct EsState {
    NeuralMirrorParams psi{};
    double best_fitness = -std::numeric_limits<double>::infinity();
    std::vector<Elite> elites;
    std::size_t iteration = 0;   // completed iterations
    std::size_t inner_runs = 0;  // fitness evaluations actually performed
};

struct IterationRecord {
    std::size_t iteration = 0;
    double sigma = 0.0;
    double mean_fitness = 0.0;
    double max_fitness = 0.0;
    double best_fitness = 0.0;
    bool accepted = false;
    std::size_t fresh = 0;   // candidates evaluated this iteration
    std::size_t reused = 0;  // elites carried in with cached fitness
    std::size_t failed = 0;  // evaluations that threw and scored 0
};

/// Fitness of a candidate mirror map. The seed identifies the member's RNG
/// stream; implementations must be deterministic in (params, seed).
using FitnessFn = std::function<double(const NeuralMirrorParams&, std::uint64_t)>;

/// N/2 standard normal vectors, each followed by its negation.
inline std::vector<std::vector<double>> antithetic_sample(Rng& rng, std::size_t n, std::size_t dim = kMirrorParamCount) {
    if (n % 2 != 0) throw std::invalid_argument("antithetic sampling needs an even count");
    std::normal_distribution<double> normal(0.0, 1.0);
    std::vector<std::vector<double>> out;
    out.reserve(n);
    for (std::size_t i = 0; i < n / 2; ++i) {
        std::vector<double> eps(dim);
        for (double& x : eps) x = normal(rng);
        std::vector<double> neg(dim);
        std::transform(eps.begin(), eps.end(), neg.begin(), std::negate<>());
        out.push_back(std::move(eps));
        out.push_back(std::move(neg));
    }
    return out;
}

/// grad J = 1/(N sigma) sum_i F_i eps_i, on raw fitnesses.
inline std::vector<double> es_gradient(std::span<const std::vector<double>> perturbations, std::span<const double> fitnesses,
                                       double sigma) {
    if (!(sigma > 0.0)) throw std::invalid_argument("ES gradient needs sigma > 0");
    if (perturbations.size() != fitnesses.size() || perturbations.empty())
        throw std::invalid_argument("ES gradient: perturbation and fitness counts differ");
    const std::size_t dim = perturbations.front().size();
    std::vector<double> grad(dim, 0.0);
    for (std::size_t i = 0; i < perturbations.size(); ++i) {
        if (perturbations[i].size() != dim) throw std::invalid_argument("ES gradient: ragged perturbations");
        for (std::size_t d = 0; d < dim; ++d) grad[d] += fitnesses[i] * perturbations[i][d];
    }
    const double scale = 1.0 / (static_cast<double>(perturbations.size()) * sigma);
    for (double& g : grad) g *= scale;
    return grad;
}

inline NeuralMirrorParams perturb(const NeuralMirrorParams& psi, std::span<const double> direction, double scale) {
    auto flat = psi.flatten();
    for (std::size_t d = 0; d < flat.size(); ++d) flat[d] += scale * direction[d];
    return NeuralMirrorParams::unflatten(flat);
}

namespace detail {

/// Runs body(i) for i in [0, count) on up to `jobs` threads.
template <typename Body>
void parallel_for(std::size_t count, std::size_t jobs, Body&& body) {
    jobs = std::max<std::size_t>(1, std::min(jobs, count));
    if (jobs == 1) {
        for (std::size_t i = 0; i < count; ++i) body(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::jthread> workers;
    workers.reserve(jobs);
    for (std::size_t w = 0; w < jobs; ++w)
        workers.emplace_back([&] {
            for (std::size_t i = next++; i < count; i = next++) body(i);
        });
}

}  // namespace detail

/// One iteration of the accept/reject evolutionary search.
///
/// Elites saved by a previous rejection take the first slots with their
/// cached fitness; the remaining slots get fresh antithetic perturbations
/// (an odd remainder leaves the last one unpaired). A candidate whose fitness
/// evaluation throws scores 0.
inline EsState step(const EsState& state, const EsConfig& cfg, const FitnessFn& fitness,
                    IterationRecord* record = nullptr) {
    cfg.validate();
    const std::size_t n = cfg.population;
    const std::size_t g = state.iteration + 1;
    const double sigma = cfg.sigma_at(g);

    std::vector<std::vector<double>> perturbations;
    std::vector<double> fitnesses;
    perturbations.reserve(n);
    for (const auto& elite : state.elites) {
        if (perturbations.size() == n) break;
        perturbations.push_back(elite.perturbation);
        fitnesses.push_back(elite.fitness);
    }
    const std::size_t reused = perturbations.size();
    const std::size_t fresh = n - reused;

    auto rng = make_rng(cfg.seed, {g, 0xe5});
    auto drawn = antithetic_sample(rng, fresh + fresh % 2);
    drawn.resize(fresh);
    for (auto& eps : drawn) perturbations.push_back(std::move(eps));
    fitnesses.resize(n, 0.0);

    std::vector<char> failed(n, 0);
    detail::parallel_for(fresh, cfg.jobs, [&](std::size_t k) {
        const std::size_t slot = reused + k;
        try {
            const auto candidate = perturb(state.psi, perturbations[slot], sigma);
            const double f = fitness(candidate, derive_seed(cfg.seed, {g, slot}));
            if (std::isfinite(f)) {
                fitnesses[slot] = f;
            } else {
                failed[slot] = 1;
            }
        } catch (const std::exception&) {
            failed[slot] = 1;
        }
    });

    const auto grad = es_gradient(perturbations, fitnesses, sigma);
    const double mean = std::accumulate(fitnesses.begin(), fitnesses.end(), 0.0) / static_cast<double>(n);

    EsState next = state;
    next.iteration = g;
    next.inner_runs += fresh;
    const bool accepted = mean > state.best_fitness;
    if (accepted) {
        auto flat = state.psi.flatten();
        for (std::size_t d = 0; d < flat.size(); ++d) flat[d] += cfg.es_learning_rate * grad[d];
        next.psi = NeuralMirrorParams::unflatten(flat);
        next.best_fitness = mean;
        next.elites.clear();
    } else {
        std::vector<std::size_t> order(n);
        std::iota(order.begin(), order.end(), 0);
        std::stable_sort(order.begin(), order.end(),
                         [&](std::size_t l, std::size_t r) { return fitnesses[l] > fitnesses[r]; });
        next.elites.clear();
        for (std::size_t i = 0; i < cfg.elite_count(); ++i)
            next.elites.push_back({perturbations[order[i]], fitnesses[order[i]]});
    }

    if (record) {
        *record = IterationRecord{g,
                                  sigma,
                                  mean,
                                  *std::max_element(fitnesses.begin(), fitnesses.end()),
                                  next.best_fitness,
                                  accepted,
                                  fresh,
                                  reused,
                                  static_cast<std::size_t>(std::count(failed.begin(), failed.end(), 1))};
    }
    return next;
}

/// psi_0 drawn coordinate-wise from N(0, init_sigma^2).
inline NeuralMirrorParams initial_mirror_params(std::uint64_t seed, double init_sigma) {
    auto rng = make_rng(seed, {0x9510});
    std::normal_distribution<double> normal(0.0, 1.0);
    std::vector<double> flat(kMirrorParamCount);
    for (double& x : flat) x = init_sigma * normal(rng);
    return NeuralMirrorParams::unflatten(flat);
}

struct EsResult {
    NeuralMirrorParams initial;
    EsState state;
    std::vector<IterationRecord> history;
};

inline EsResult run(const EsConfig& cfg, const FitnessFn& fitness) {
    cfg.validate();
    EsResult result;
    result.initial = initial_mirror_params(cfg.seed, cfg.init_sigma);
    result.state.psi = result.initial;
    for (std::size_t g = 1; g <= cfg.iterations; ++g) {
        IterationRecord rec;
        result.state = step(result.state, cfg, fitness, &rec);
        result.history.push_back(rec);
    }
    return result;
}

/// Fitness of a mirror map: train a policy with it on inner_train, then
/// score the policy on the validation prompts.
inline FitnessFn make_training_fitness(const EsConfig& cfg, TaskSpec task, Splits splits) {
    return [cfg, task = std::move(task), splits = std::move(splits)](const NeuralMirrorParams& candidate,
                                                                      std::uint64_t member_seed) {
        TrainerConfig tc = cfg.inner_trainer;
        tc.mode = RegularizerMode::Bregman;
        tc.potential = PotentialSpec::neural(candidate);
        tc.steps = cfg.inner_steps;
        tc.eval_every = 0;
        tc.seed = member_seed;
        const auto trained = train(tc, task, splits);
        const auto prompts = splits.validation_or_train();
        if (cfg.fitness.kind == FitnessKind::GreedyAccuracy)
            return evaluate_accuracy(task, trained.state.policy, prompts, GreedyEval{});
        return evaluate_accuracy(task, trained.state.policy, prompts,
                                 SampledEval{cfg.fitness.n, derive_seed(member_seed, {0xf17})});
    };
}

inline EsState step(const EsState& state, const EsConfig& cfg, const TaskSpec& task, const Splits& splits,
                    IterationRecord* record = nullptr) {
    return step(state, cfg, make_training_fitness(cfg, task, splits), record);
}

inline EsResult run(const EsConfig& cfg, const TaskSpec& task, const Splits& splits) {
    return run(cfg, make_training_fitness(cfg, task, splits));
}

}  // namespace gbmpo

#endif  // GBMPO_ES_HPP
