// Command-line front end: run experiments, validate configs, compare summaries.

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "gbmpo/gbmpo.hpp"

namespace {

constexpr const char* kOutputRootEnv = "GBMPO_OUTPUT_ROOT";

std::vector<std::uint64_t> parse_seed_list(const std::string& text) {
    std::vector<std::uint64_t> seeds;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        std::size_t used = 0;
        const auto value = std::stoull(item, &used);
        if (used != item.size()) throw std::invalid_argument("bad seed '" + item + "'");
        seeds.push_back(value);
    }
    if (seeds.empty()) throw std::invalid_argument("--seeds needs at least one seed");
    return seeds;
}

std::filesystem::path resolve_output_dir(const std::string& flag, const gbmpo::RunConfig& cfg) {
    if (!flag.empty()) return flag;
    if (!cfg.output_dir.empty()) return cfg.output_dir;
    if (const char* env = std::getenv(kOutputRootEnv); env && *env) return env;
    return "runs";
}

int cmd_run(const std::string& config_path, const std::string& seeds_flag, const std::string& output_flag,
            std::size_t jobs) {
    auto cfg = gbmpo::parse_config(config_path);
    if (!seeds_flag.empty()) {
        auto seeds = parse_seed_list(seeds_flag);
        std::set<std::uint64_t> unique(seeds.begin(), seeds.end());
        if (unique.size() != seeds.size()) throw gbmpo::ConfigError("--seeds: duplicate seeds");
        cfg.seeds = std::move(seeds);
    }
    gbmpo::ExperimentOptions options;
    options.output_dir = resolve_output_dir(output_flag, cfg);
    options.jobs = jobs;

    const auto summary = gbmpo::run_experiment(cfg, options);
    for (const auto& r : summary.runs) {
        if (r.completed) {
            std::cout << "seed " << r.seed << ": accuracy " << gbmpo::format_fixed(r.final_accuracy, 4) << "\n";
        } else {
            std::cerr << "seed " << r.seed << ": aborted: " << r.message << "\n";
        }
    }
    std::cout << gbmpo::compare_report({summary}).text;
    std::cout << "wrote " << (options.output_dir / gbmpo::slugify(cfg.label) / "summary.csv").string() << "\n";
    return summary.incomplete() ? 1 : 0;
}

int cmd_validate(const std::string& config_path) {
    const auto cfg = gbmpo::parse_config(config_path);
    const auto splits = gbmpo::make_splits(cfg.splits, cfg.task.num_prompts());
    std::cout << config_path << ": ok\n"
              << "  label: " << cfg.label << "\n"
              << "  task: " << cfg.task.name() << " (" << cfg.task.num_prompts() << " prompts, V=" << cfg.task.vocab_size
              << ", T=" << cfg.task.horizon << ")\n"
              << "  splits: " << splits.inner_train.size() << " train / " << splits.inner_validation.size()
              << " validation / " << splits.outer_test.size() << " test\n"
              << "  potential: " << cfg.trainer.active_potential().name() << " (coeff "
              << gbmpo::format_double(cfg.trainer.active_coeff()) << ")\n"
              << "  es: " << (cfg.es ? "yes" : "no") << "\n"
              << "  seeds: " << cfg.seeds.size() << "\n";
    return 0;
}

int cmd_report(const std::vector<std::string>& paths, const std::string& csv_out) {
    std::vector<gbmpo::ExperimentSummary> summaries;
    for (const auto& p : paths) summaries.push_back(gbmpo::read_summary(p));
    const auto report = gbmpo::compare_report(std::move(summaries));
    std::cout << report.text;
    if (!csv_out.empty()) gbmpo::write_text_file(csv_out, report.csv);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Group-based mirror policy optimization experiments"};
    app.require_subcommand(1);

    std::string config_path, seeds_flag, output_flag, csv_out;
    std::size_t jobs = 1;
    std::vector<std::string> summary_paths;

    auto* run = app.add_subcommand("run", "Train every replicate seed of a config and write metrics + summary");
    run->add_option("config", config_path, "Run configuration (JSON)")->required();
    run->add_option("--seeds", seeds_flag, "Comma-separated replicate seeds, overriding the config");
    run->add_option("--output-dir", output_flag,
                    std::string("Output root (default: config output_dir, then $") + kOutputRootEnv + ", then runs)");
    run->add_option("--jobs", jobs, "Maximum concurrent runs")->check(CLI::PositiveNumber);

    auto* validate = app.add_subcommand("validate", "Parse and check a config without running it");
    validate->add_option("config", config_path, "Run configuration (JSON)")->required();

    auto* report = app.add_subcommand("report", "Compare methods from summary.csv files");
    report->add_option("summaries", summary_paths, "summary.csv paths")->required();
    report->add_option("--csv", csv_out, "Also write the table as CSV");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*run) return cmd_run(config_path, seeds_flag, output_flag, jobs);
        if (*validate) return cmd_validate(config_path);
        if (*report) return cmd_report(summary_paths, csv_out);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
