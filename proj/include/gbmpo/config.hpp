#ifndef GBMPO_CONFIG_HPP
#define GBMPO_CONFIG_HPP

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "gbmpo/es.hpp"
#include "gbmpo/io.hpp"
#include "gbmpo/tasks.hpp"
#include "gbmpo/trainer.hpp"

namespace gbmpo {

inline constexpr int kSchemaVersion = 1;

class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// How the neural mirror map of a run is initialized.
struct NeuralInit {
    enum class Kind : std::uint8_t { Random, Fixed } kind = Kind::Random;
    double init_sigma = 0.01;      // Random: per-coordinate std, drawn from the run seed
    NeuralMirrorParams params{};   // Fixed
};

struct RunConfig {
    int schema_version = kSchemaVersion;
    std::string label;
    TaskSpec task;
    SplitSpec splits;
    TrainerConfig trainer;
    std::optional<NeuralInit> neural_init;  // set when the potential is neural
    std::optional<EsConfig> es;
    std::vector<std::uint64_t> seeds{0};
    std::string output_dir;
    // Recorded for completeness; the clipped-ratio objective is not supported.
    double gspo_epsilon = 3e-4;
    double gspo_epsilon_high = 4e-4;

    /// Trainer settings for one replicate seed, with the neural map resolved.
    [[nodiscard]] TrainerConfig trainer_for_seed(std::uint64_t seed) const {
        TrainerConfig tc = trainer;
        tc.seed = seed;
        if (neural_init) {
            tc.potential = PotentialSpec::neural(neural_init->kind == NeuralInit::Kind::Random
                                                     ? initial_mirror_params(seed, neural_init->init_sigma)
                                                     : neural_init->params);
        }
        return tc;
    }

    [[nodiscard]] EsConfig es_for_seed(std::uint64_t seed) const {
        EsConfig ec = es.value();
        ec.seed = seed;
        ec.inner_trainer = trainer_for_seed(seed);
        return ec;
    }
};

namespace detail {

using Json = nlohmann::json;

/// Typed access to one JSON object that remembers its location and rejects
/// keys nobody asked for.
class ObjectReader {
public:
    ObjectReader(const Json& j, std::string path) : j_(j), path_(std::move(path)) {
        if (!j_.is_object()) fail(path_.empty() ? "/" : path_, "expected an object");
    }

    [[nodiscard]] bool has(const std::string& key) {
        seen_.insert(key);
        return j_.contains(key);
    }

    [[nodiscard]] std::string at(const std::string& key) const { return path_ + "/" + key; }

    const Json& raw(const std::string& key) {
        seen_.insert(key);
        if (!j_.contains(key)) fail(at(key), "missing required key");
        return j_.at(key);
    }

    template <typename T>
    T get(const std::string& key) {
        return convert<T>(raw(key), at(key));
    }

    template <typename T>
    T get_or(const std::string& key, T fallback) {
        return has(key) ? convert<T>(j_.at(key), at(key)) : fallback;
    }

    void finish() const {
        for (auto it = j_.begin(); it != j_.end(); ++it)
            if (!seen_.count(it.key())) fail(at(it.key()), "unknown key");
    }

    [[noreturn]] static void fail(const std::string& where, const std::string& what) {
        throw ConfigError(where + ": " + what);
    }

    template <typename T>
    static T convert(const Json& v, const std::string& where) {
        if constexpr (std::is_same_v<T, bool>) {
            if (!v.is_boolean()) fail(where, "expected a boolean");
        } else if constexpr (std::is_same_v<T, std::string>) {
            if (!v.is_string()) fail(where, "expected a string");
        } else if constexpr (std::is_floating_point_v<T>) {
            if (!v.is_number()) fail(where, "expected a number");
        } else if constexpr (std::is_integral_v<T>) {
            if (!v.is_number_integer()) fail(where, "expected an integer");
            if (std::is_unsigned_v<T> && v.is_number_integer() && !v.is_number_unsigned())
                fail(where, "expected a non-negative integer");
        }
        return v.get<T>();
    }

private:
    const Json& j_;
    std::string path_;
    std::set<std::string> seen_;
};

template <typename T>
std::vector<T> read_array(const Json& v, const std::string& where) {
    if (!v.is_array()) ObjectReader::fail(where, "expected an array");
    std::vector<T> out;
    for (std::size_t i = 0; i < v.size(); ++i)
        out.push_back(ObjectReader::convert<T>(v[i], where + "/" + std::to_string(i)));
    return out;
}

inline TaskSpec parse_task(const Json& j, const std::string& path) {
    ObjectReader r(j, path);
    const auto kind = r.get<std::string>("kind");
    TaskSpec task;
    if (kind == "group_bandit") {
        const auto vocab = r.get<std::size_t>("vocab_size");
        const auto horizon = r.get_or<std::size_t>("horizon", 1);
        if (r.has("targets")) {
            if (r.has("num_prompts") || r.has("target_seed") || r.has("target_period"))
                ObjectReader::fail(r.at("targets"), "give either targets or num_prompts/target_seed, not both");
            task = TaskSpec{GroupBandit{read_array<std::uint32_t>(r.raw("targets"), r.at("targets"))}, vocab, horizon};
        } else {
            const auto n = r.get<std::size_t>("num_prompts");
            const auto seed = r.get_or<std::uint64_t>("target_seed", 0);
            const auto period = r.get_or<std::size_t>("target_period", 0);
            if (n == 0) ObjectReader::fail(r.at("num_prompts"), "must be >= 1");
            try {
                task = make_group_bandit(n, vocab, horizon, seed, period);
            } catch (const std::invalid_argument& e) {
                ObjectReader::fail(path, e.what());
            }
        }
    } else if (kind == "arithmetic_chain") {
        const auto vocab = r.get<std::size_t>("vocab_size");
        const auto horizon = r.get_or<std::size_t>("horizon", 2);
        const auto modulus = r.get<std::uint32_t>("modulus");
        ArithmeticChain chain{modulus, {}};
        if (r.has("operands")) {
            const auto& ops = r.raw("operands");
            if (!ops.is_array()) ObjectReader::fail(r.at("operands"), "expected an array of [a, b] pairs");
            for (std::size_t i = 0; i < ops.size(); ++i) {
                const auto pair = read_array<std::uint32_t>(ops[i], r.at("operands") + "/" + std::to_string(i));
                if (pair.size() != 2) ObjectReader::fail(r.at("operands") + "/" + std::to_string(i), "expected [a, b]");
                chain.operands.emplace_back(pair[0], pair[1]);
            }
            task = TaskSpec{chain, vocab, horizon};
        } else {
            const auto n = r.get<std::size_t>("num_prompts");
            const auto seed = r.get_or<std::uint64_t>("operand_seed", 0);
            if (modulus == 0) ObjectReader::fail(r.at("modulus"), "must be >= 1");
            if (n == 0) ObjectReader::fail(r.at("num_prompts"), "must be >= 1");
            try {
                task = make_arithmetic_chain(n, modulus, vocab, horizon, seed);
            } catch (const std::invalid_argument& e) {
                ObjectReader::fail(path, e.what());
            }
        }
    } else {
        ObjectReader::fail(r.at("kind"), "unknown task kind '" + kind + "'");
    }
    r.finish();
    try {
        task.validate();
    } catch (const std::invalid_argument& e) {
        ObjectReader::fail(path, e.what());
    }
    return task;
}

inline SplitSpec parse_splits(const Json& j, const std::string& path) {
    ObjectReader r(j, path);
    SplitSpec s;
    s.train_fraction = r.get_or("train_fraction", s.train_fraction);
    s.validation_fraction = r.get_or("validation_fraction", s.validation_fraction);
    if (r.has("outer_test")) s.outer_test = read_array<std::uint64_t>(r.raw("outer_test"), r.at("outer_test"));
    s.split_seed = r.get_or("split_seed", s.split_seed);
    r.finish();
    try {
        s.validate();
    } catch (const std::invalid_argument& e) {
        ObjectReader::fail(path, e.what());
    }
    return s;
}

inline void parse_potential(const Json& j, const std::string& path, RunConfig& cfg) {
    ObjectReader r(j, path);
    const auto kind = r.get<std::string>("kind");
    if (kind == "kl") {
        cfg.trainer.potential = PotentialSpec::kl();
    } else if (kind == "prob_l2") {
        cfg.trainer.potential = PotentialSpec::prob_l2();
    } else if (kind == "alpha") {
        const auto alpha = r.get<double>("alpha");
        if (alpha == 0.0 || alpha == 1.0) ObjectReader::fail(r.at("alpha"), "alpha must not be 0 or 1");
        cfg.trainer.potential = PotentialSpec::alpha(alpha);
    } else if (kind == "neural") {
        NeuralInit init;
        const auto how = r.get_or<std::string>("init", "random");
        if (how == "random") {
            init.init_sigma = r.get_or("init_sigma", init.init_sigma);
            if (init.init_sigma < 0.0) ObjectReader::fail(r.at("init_sigma"), "must be >= 0");
        } else if (how == "entropic" || how == "euclidean") {
            init.kind = NeuralInit::Kind::Fixed;
            init.params = how == "entropic" ? NeuralMirrorParams::entropic() : NeuralMirrorParams::euclidean();
        } else if (how == "params") {
            init.kind = NeuralInit::Kind::Fixed;
            const auto flat = read_array<double>(r.raw("params"), r.at("params"));
            if (flat.size() != kMirrorParamCount)
                ObjectReader::fail(r.at("params"), "expected " + std::to_string(kMirrorParamCount) + " numbers");
            init.params = NeuralMirrorParams::unflatten(flat);
        } else if (how == "checkpoint") {
            init.kind = NeuralInit::Kind::Fixed;
            const auto file = r.get<std::string>("checkpoint");
            try {
                init.params = load_checkpoint(file);
            } catch (const std::exception& e) {
                ObjectReader::fail(r.at("checkpoint"), e.what());
            }
        } else {
            ObjectReader::fail(r.at("init"), "unknown neural init '" + how + "'");
        }
        cfg.neural_init = init;
        cfg.trainer.potential = PotentialSpec::neural(init.params);
    } else {
        ObjectReader::fail(r.at("kind"), "unknown potential kind '" + kind + "'");
    }
    r.finish();
}

inline void parse_trainer(const Json& j, const std::string& path, RunConfig& cfg) {
    ObjectReader r(j, path);
    auto& t = cfg.trainer;
    const auto mode = r.get_or<std::string>("mode", "bregman");
    if (mode == "bregman") {
        t.mode = RegularizerMode::Bregman;
    } else if (mode == "kl_penalty") {
        t.mode = RegularizerMode::KlPenalty;
    } else if (mode == "gspo") {
        ObjectReader::fail(r.at("mode"), "unsupported mode 'gspo'");
    } else {
        ObjectReader::fail(r.at("mode"), "unsupported mode '" + mode + "'");
    }
    if (r.has("potential")) parse_potential(r.raw("potential"), r.at("potential"), cfg);
    if (t.mode == RegularizerMode::KlPenalty && r.has("potential") && !t.potential.is_kl())
        ObjectReader::fail(r.at("potential"), "kl_penalty mode always uses the kl potential");

    t.responses_per_prompt = r.get_or("responses_per_prompt", t.responses_per_prompt);
    t.bregman_coeff = r.get_or("bregman_coeff", t.bregman_coeff);
    t.kl_beta = r.get_or("kl_beta", t.kl_beta);
    t.learning_rate = r.get_or("learning_rate", t.learning_rate);
    const auto schedule = r.get_or<std::string>("lr_schedule", "constant");
    if (schedule == "constant")
        t.schedule = LrSchedule::Constant;
    else if (schedule == "cosine")
        t.schedule = LrSchedule::Cosine;
    else
        ObjectReader::fail(r.at("lr_schedule"), "expected 'constant' or 'cosine'");
    t.steps = r.get_or("steps", t.steps);
    t.length_norm = r.get_or("length_norm", t.length_norm);
    t.contexts = r.get_or("contexts", t.contexts);
    t.eval_every = r.get_or("eval_every", t.eval_every);
    cfg.gspo_epsilon = r.get_or("gspo_epsilon", cfg.gspo_epsilon);
    cfg.gspo_epsilon_high = r.get_or("gspo_epsilon_high", cfg.gspo_epsilon_high);

    if (r.has("advantage")) {
        ObjectReader a(r.raw("advantage"), r.at("advantage"));
        const auto am = a.get_or<std::string>("mode", "dr_grpo");
        if (am == "dr_grpo")
            t.advantage.mode = AdvantageMode::DrGrpo;
        else if (am == "grpo")
            t.advantage.mode = AdvantageMode::Grpo;
        else
            ObjectReader::fail(a.at("mode"), "expected 'grpo' or 'dr_grpo'");
        t.advantage.epsilon = a.get_or("epsilon", t.advantage.epsilon);
        a.finish();
    }
    if (r.has("init")) {
        ObjectReader in(r.raw("init"), r.at("init"));
        const auto kind = in.get<std::string>("kind");
        if (kind == "uniform")
            t.init.kind = PolicyInitKind::Uniform;
        else if (kind == "random")
            t.init.kind = PolicyInitKind::Random;
        else if (kind == "perfect")
            t.init.kind = PolicyInitKind::Perfect;
        else
            ObjectReader::fail(in.at("kind"), "expected 'uniform', 'random' or 'perfect'");
        t.init.scale = in.get_or("scale", t.init.scale);
        t.init.margin = in.get_or("margin", t.init.margin);
        in.finish();
    }
    r.finish();
    try {
        t.validate();
    } catch (const std::invalid_argument& e) {
        ObjectReader::fail(path, e.what());
    }
}

inline EsConfig parse_es(const Json& j, const std::string& path) {
    ObjectReader r(j, path);
    EsConfig es;
    es.population = r.get_or("population", es.population);
    es.iterations = r.get_or("iterations", es.iterations);
    es.sigma0 = r.get_or("sigma0", es.sigma0);
    es.decay = r.get_or("decay", es.decay);
    es.es_learning_rate = r.get_or("learning_rate", es.es_learning_rate);
    es.init_sigma = r.get_or("init_sigma", es.init_sigma);
    es.inner_steps = r.get_or("inner_steps", es.inner_steps);
    es.jobs = r.get_or("jobs", es.jobs);
    if (r.has("elite_fraction") && r.get<double>("elite_fraction") != EsConfig::kEliteFraction)
        ObjectReader::fail(r.at("elite_fraction"), "elite fraction is fixed at 0.25");
    if (r.has("fitness")) {
        ObjectReader f(r.raw("fitness"), r.at("fitness"));
        const auto kind = f.get<std::string>("kind");
        if (kind == "accuracy")
            es.fitness.kind = FitnessKind::GreedyAccuracy;
        else if (kind == "pass_at_n")
            es.fitness.kind = FitnessKind::PassAtN;
        else
            ObjectReader::fail(f.at("kind"), "expected 'accuracy' or 'pass_at_n'");
        es.fitness.n = f.get_or("n", es.fitness.n);
        f.finish();
    }
    r.finish();
    try {
        es.validate();
    } catch (const std::invalid_argument& e) {
        ObjectReader::fail(path, e.what());
    }
    return es;
}

inline std::string default_label(const RunConfig& cfg) {
    if (cfg.trainer.mode == RegularizerMode::KlPenalty) return "KL baseline";
    const auto& kind = cfg.trainer.potential.kind();
    if (std::holds_alternative<KlPotential>(kind)) return "KL";
    if (std::holds_alternative<ProbL2Potential>(kind)) return "ProbL2";
    if (const auto* a = std::get_if<AlphaPotential>(&kind)) return "Alpha(" + format_double(a->alpha_param) + ")";
    if (cfg.es) return "Neural ES";
    if (cfg.neural_init && cfg.neural_init->kind == NeuralInit::Kind::Random) return "Neural random-init";
    return "Neural";
}

}  // namespace detail

/// Parse and validate a run configuration from JSON text. `source` prefixes
/// error locations.
inline RunConfig parse_config_text(const std::string& text, const std::string& source = "<config>") {
    detail::Json j;
    try {
        j = detail::Json::parse(text);
    } catch (const detail::Json::parse_error& e) {
        throw ConfigError(source + ": " + e.what());
    }
    try {
        detail::ObjectReader r(j, "");
        RunConfig cfg;
        cfg.schema_version = r.get<int>("schema_version");
        if (cfg.schema_version != kSchemaVersion)
            detail::ObjectReader::fail("/schema_version", "unsupported schema version " +
                                                             std::to_string(cfg.schema_version));
        cfg.task = detail::parse_task(r.raw("task"), "/task");
        if (r.has("splits")) cfg.splits = detail::parse_splits(r.raw("splits"), "/splits");
        if (r.has("trainer")) detail::parse_trainer(r.raw("trainer"), "/trainer", cfg);
        if (r.has("es")) {
            cfg.es = detail::parse_es(r.raw("es"), "/es");
            if (cfg.trainer.mode != RegularizerMode::Bregman || !cfg.trainer.potential.is_neural())
                detail::ObjectReader::fail("/es", "evolutionary search needs a neural potential in bregman mode");
        }
        if (r.has("seeds")) {
            cfg.seeds = detail::read_array<std::uint64_t>(r.raw("seeds"), "/seeds");
            if (cfg.seeds.empty()) detail::ObjectReader::fail("/seeds", "at least one seed required");
            std::set<std::uint64_t> unique(cfg.seeds.begin(), cfg.seeds.end());
            if (unique.size() != cfg.seeds.size()) detail::ObjectReader::fail("/seeds", "duplicate seeds");
        }
        cfg.output_dir = r.get_or<std::string>("output_dir", "");
        cfg.label = r.get_or<std::string>("label", "");
        if (cfg.label.empty()) cfg.label = detail::default_label(cfg);
        r.finish();
        make_splits(cfg.splits, cfg.task.num_prompts());
        return cfg;
    } catch (const ConfigError& e) {
        throw ConfigError(source + ":" + e.what());
    } catch (const std::invalid_argument& e) {
        throw ConfigError(source + ": " + e.what());
    }
}

inline RunConfig parse_config(const std::filesystem::path& path) {
    if (!std::filesystem::exists(path)) throw ConfigError(path.string() + ": no such file");
    return parse_config_text(read_text_file(path), path.string());
}

}  // namespace gbmpo

#endif  // GBMPO_CONFIG_HPP
