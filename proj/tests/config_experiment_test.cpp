#include <gtest/gtest.h>

#include <filesystem>
#include <random>
#include <string>

#include "gbmpo/gbmpo.hpp"
#include "test_support.hpp"

namespace gbmpo {
namespace {

namespace fs = std::filesystem;

fs::path scratch_dir(const std::string& name) {
    const auto dir = fs::temp_directory_path() / ("gbmpo_test_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

std::string expect_config_error(const std::string& text) {
    try {
        parse_config_text(text, "cfg.json");
    } catch (const ConfigError& e) {
        return e.what();
    }
    ADD_FAILURE() << "config was accepted: " << text;
    return {};
}

constexpr const char* kMinimal =
    R"({"schema_version": 1, "task": {"kind": "group_bandit", "vocab_size": 4, "targets": [1, 2, 3]}})";

TEST(Config, MinimalConfigUsesDefaults) {
    const auto cfg = parse_config_text(kMinimal);
    EXPECT_EQ(cfg.trainer.kl_beta, 0.01);
    EXPECT_EQ(cfg.trainer.bregman_coeff, 1e-4);
    EXPECT_EQ(cfg.trainer.responses_per_prompt, 8u);
    EXPECT_TRUE(cfg.trainer.potential == PotentialSpec::prob_l2());
    EXPECT_EQ(cfg.label, "ProbL2");
    EXPECT_EQ(cfg.seeds, (std::vector<std::uint64_t>{0}));
    EXPECT_EQ(cfg.task.num_prompts(), 3u);
    EXPECT_FALSE(cfg.es.has_value());
}

TEST(Config, FullNeuralEsConfig) {
    const auto cfg = parse_config_text(R"({
        "schema_version": 1,
        "task": {"kind": "arithmetic_chain", "vocab_size": 8, "modulus": 5, "num_prompts": 10, "operand_seed": 3},
        "splits": {"train_fraction": 0.8, "validation_fraction": 0.2, "outer_test": [0, 1]},
        "trainer": {"potential": {"kind": "neural", "init": "random", "init_sigma": 0.02},
                    "advantage": {"mode": "grpo", "epsilon": 1e-4}, "steps": 20},
        "es": {"population": 4, "iterations": 2, "inner_steps": 5, "fitness": {"kind": "pass_at_n", "n": 3}},
        "seeds": [1, 2]
    })");
    EXPECT_EQ(cfg.label, "Neural ES");
    ASSERT_TRUE(cfg.es.has_value());
    EXPECT_EQ(cfg.es->population, 4u);
    EXPECT_EQ(cfg.es->fitness.kind, FitnessKind::PassAtN);
    EXPECT_EQ(cfg.trainer.advantage.mode, AdvantageMode::Grpo);
    const auto ec = cfg.es_for_seed(2);
    EXPECT_EQ(ec.seed, 2u);
    EXPECT_EQ(std::get<NeuralPotential>(cfg.trainer_for_seed(2).potential.kind()).params.flatten(),
              initial_mirror_params(2, 0.02).flatten());
}

TEST(Config, RejectsUnsupportedModesAndBadValues) {
    EXPECT_NE(expect_config_error(
                  R"({"schema_version": 1, "task": {"kind": "group_bandit", "vocab_size": 4, "targets": [1]},
                      "trainer": {"mode": "gspo"}})")
                  .find("unsupported mode 'gspo'"),
              std::string::npos);
    EXPECT_NE(expect_config_error(
                  R"({"schema_version": 1, "task": {"kind": "group_bandit", "vocab_size": 4, "targets": [1]},
                      "seeds": [3, 4, 3]})")
                  .find("duplicate seeds"),
              std::string::npos);
    for (const char* alpha : {"0", "1"}) {
        const auto msg = expect_config_error(
            std::string(R"({"schema_version": 1, "task": {"kind": "group_bandit", "vocab_size": 4, "targets": [1]},
                           "trainer": {"potential": {"kind": "alpha", "alpha": )") +
            alpha + "}}}");
        EXPECT_NE(msg.find("/trainer/potential/alpha"), std::string::npos) << msg;
    }
    EXPECT_NE(expect_config_error(R"({"schema_version": 2, "task": {}})").find("schema"), std::string::npos);
}

TEST(Config, UnknownKeysReportTheirLocation) {
    const auto msg = expect_config_error(
        R"({"schema_version": 1, "task": {"kind": "group_bandit", "vocab_size": 4, "targets": [1]},
            "trainer": {"lerning_rate": 0.1}})");
    EXPECT_NE(msg.find("cfg.json:/trainer/lerning_rate: unknown key"), std::string::npos) << msg;
}

TEST(Config, MissingFile) {
    try {
        parse_config("/nonexistent/config.json");
        FAIL();
    } catch (const ConfigError& e) {
        EXPECT_NE(std::string(e.what()).find("no such file"), std::string::npos);
    }
}

TEST(Experiment, PopulationStats) {
    const std::vector<double> xs{0.8, 0.9, 1.0};
    const auto s = population_stats(xs);
    EXPECT_NEAR(s.mean, 0.9, 1e-15);
    EXPECT_NEAR(s.std, 0.0816, 1e-4);
    EXPECT_TRUE(std::isnan(population_stats(std::vector<double>{}).mean));
}

TEST(Experiment, PerfectInitScoresOneWithZeroSpread) {
    const auto dir = scratch_dir("perfect");
    auto cfg = parse_config_text(R"({
        "schema_version": 1, "label": "ProbL2",
        "task": {"kind": "group_bandit", "vocab_size": 5, "num_prompts": 6, "target_seed": 2},
        "splits": {"train_fraction": 1.0, "validation_fraction": 0.0},
        "trainer": {"init": {"kind": "perfect"}, "steps": 0},
        "seeds": [0, 1, 2]
    })");
    const auto summary = run_experiment(cfg, {dir, 1});
    EXPECT_EQ(summary.runs_completed, 3u);
    EXPECT_EQ(summary.accuracy.mean, 1.0);
    EXPECT_EQ(summary.accuracy.std, 0.0);
    const auto report = compare_report({read_summary(dir / "probl2" / "summary.csv")});
    EXPECT_NE(report.text.find("1.000 ± 0.000"), std::string::npos) << report.text;
}

TEST(Experiment, RepeatedRunsWriteIdenticalFiles) {
    const auto text = R"({
        "schema_version": 1,
        "task": {"kind": "group_bandit", "vocab_size": 4, "num_prompts": 4, "horizon": 2},
        "trainer": {"potential": {"kind": "neural"}, "steps": 30, "eval_every": 5},
        "seeds": [7]
    })";
    const auto cfg = parse_config_text(text);
    const auto a = scratch_dir("repeat_a"), b = scratch_dir("repeat_b");
    run_experiment(cfg, {a, 1});
    run_experiment(cfg, {b, 1});
    const auto slug = slugify(cfg.label);
    for (const char* file : {"seed7.metrics.ndjson", "summary.csv", "runs.csv"})
        EXPECT_EQ(read_text_file(a / slug / file), read_text_file(b / slug / file)) << file;
    EXPECT_FALSE(read_text_file(a / slug / "seed7.metrics.ndjson").empty());
}

TEST(Experiment, AbortedRunsAreCountedNotFatal) {
    NeuralMirrorParams blowup;
    blowup.v[110] = 1e300;
    blowup.w[110] = 1.0;
    blowup.b[110] = 59.0;
    RunConfig cfg;
    cfg.label = "Neural";
    cfg.task = TaskSpec{GroupBandit{{1, 2}}, 3, 1};
    cfg.splits = SplitSpec{1.0, 0.0, {}, 0};
    cfg.trainer.potential = PotentialSpec::neural(blowup);
    cfg.trainer.bregman_coeff = 1e10;
    cfg.trainer.init.kind = PolicyInitKind::Random;
    cfg.trainer.steps = 5;
    cfg.seeds = {0, 1};
    const auto summary = run_experiment(cfg, {scratch_dir("aborted"), 1});
    EXPECT_TRUE(summary.incomplete());
    EXPECT_EQ(summary.runs_completed, 0u);
    EXPECT_NE(summary.runs[0].message.find("neural"), std::string::npos) << summary.runs[0].message;
}

TEST(Report, OrdersKnownMethodsAndSkipsMissingOnes) {
    auto make = [](const std::string& label, double acc) {
        ExperimentSummary s;
        s.label = label;
        s.runs_requested = s.runs_completed = 3;
        s.accuracy = {acc, 0.01};
        s.length = {1.0, 0.0};
        return s;
    };
    const auto report =
        compare_report({make("Neural ES", 0.9), make("Alpha(0.5)", 0.8), make("KL baseline", 0.7), make("ProbL2", 0.85)});
    const auto pos = [&](const std::string& s) { return report.text.find(s); };
    EXPECT_LT(pos("KL baseline"), pos("ProbL2"));
    EXPECT_LT(pos("ProbL2"), pos("Neural ES"));
    EXPECT_LT(pos("Neural ES"), pos("Alpha(0.5)"));
    EXPECT_EQ(pos("Neural random-init"), std::string::npos);
    EXPECT_THROW(compare_report({}), std::invalid_argument);
}

TEST(Checkpoint, RoundTripsBitExactly) {
    std::mt19937_64 rng(3);
    const auto params = testing::random_mirror_params(rng);
    const auto path = scratch_dir("ckpt") / "psi.txt";
    save_checkpoint(path, params);
    EXPECT_EQ(load_checkpoint(path).flatten(), params.flatten());
    write_text_file(path, "1.0\nabc\n");
    EXPECT_THROW(load_checkpoint(path), std::runtime_error);
    write_text_file(path, "1.0\n2.0\n");
    EXPECT_THROW(load_checkpoint(path), std::invalid_argument);
}

}  // namespace
}  // namespace gbmpo
