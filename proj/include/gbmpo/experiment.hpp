#ifndef GBMPO_EXPERIMENT_HPP
#define GBMPO_EXPERIMENT_HPP

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "gbmpo/config.hpp"
#include "gbmpo/es.hpp"
#include "gbmpo/io.hpp"
#include "gbmpo/tasks.hpp"
#include "gbmpo/trainer.hpp"

namespace gbmpo {

struct PopulationStats {
    double mean = std::numeric_limits<double>::quiet_NaN();
    double std = std::numeric_limits<double>::quiet_NaN();
};

/// Mean and population standard deviation (divide by n); NaN when empty.
inline PopulationStats population_stats(std::span<const double> xs) {
    PopulationStats out;
    if (xs.empty()) return out;
    const double n = static_cast<double>(xs.size());
    double sum = 0.0;
    for (double x : xs) sum += x;
    out.mean = sum / n;
    double ss = 0.0;
    for (double x : xs) ss += (x - out.mean) * (x - out.mean);
    out.std = std::sqrt(ss / n);
    return out;
}

/// Lowercase label with runs of non-alphanumerics collapsed to '_'.
inline std::string slugify(const std::string& label) {
    std::string out;
    for (char ch : label) {
        const auto c = static_cast<unsigned char>(ch);
        if (std::isalnum(c)) {
            out.push_back(static_cast<char>(std::tolower(c)));
        } else if (!out.empty() && out.back() != '_') {
            out.push_back('_');
        }
    }
    while (!out.empty() && out.back() == '_') out.pop_back();
    return out.empty() ? "run" : out;
}

/// One line per step, fixed field order. Wall-clock times are excluded so the
/// file depends only on (config, seed).
inline std::string metrics_ndjson(const std::string& run_id, std::span<const MetricRecord> metrics) {
    std::string out;
    for (const auto& m : metrics) {
        out += "{\"run_id\":\"" + run_id + "\",\"step\":" + std::to_string(m.step) +
               ",\"reward_mean\":" + format_double(m.reward_mean) +
               ",\"divergence_mean\":" + format_double(m.divergence_mean) + ",\"validation_accuracy\":" +
               (m.validation_accuracy ? format_double(*m.validation_accuracy) : std::string("null")) +
               ",\"response_length\":" + format_double(m.response_length) + "}\n";
    }
    return out;
}

inline std::string timing_ndjson(const std::string& run_id, std::span<const MetricRecord> metrics) {
    std::string out;
    for (const auto& m : metrics)
        out += "{\"run_id\":\"" + run_id + "\",\"step\":" + std::to_string(m.step) +
               ",\"wall_clock\":" + format_fixed(m.wall_clock, 6) + "}\n";
    return out;
}

inline std::string es_history_csv(std::span<const IterationRecord> history) {
    std::string out = "iteration,sigma,mean_fitness,max_fitness,best_fitness,accepted,fresh,reused,failed\n";
    for (const auto& h : history)
        out += std::to_string(h.iteration) + "," + format_double(h.sigma) + "," + format_double(h.mean_fitness) + "," +
               format_double(h.max_fitness) + "," + format_double(h.best_fitness) + "," + (h.accepted ? "1" : "0") +
               "," + std::to_string(h.fresh) + "," + std::to_string(h.reused) + "," + std::to_string(h.failed) + "\n";
    return out;
}

struct RunOutcome {
    std::uint64_t seed = 0;
    bool completed = false;
    std::string message;
    double final_accuracy = std::numeric_limits<double>::quiet_NaN();
    double mean_length = std::numeric_limits<double>::quiet_NaN();
    std::uint64_t negative_divergences = 0;
};

struct ExperimentSummary {
    std::string label;
    std::size_t runs_requested = 0;
    std::size_t runs_completed = 0;
    PopulationStats accuracy;
    PopulationStats length;
    std::vector<RunOutcome> runs;

    [[nodiscard]] bool incomplete() const { return runs_completed < runs_requested; }
};

struct ExperimentOptions {
    std::filesystem::path output_dir = "runs";
    std::size_t jobs = 1;
};

/// Prompts a finished policy is scored on: the outer test set when one is
/// configured, otherwise the whole training pool.
inline std::vector<std::uint64_t> final_eval_prompts(const Splits& splits) {
    return splits.outer_test.empty() ? splits.pool() : splits.outer_test;
}

/// Train (after an ES search when configured) for one replicate seed and
/// write its files into `dir`.
inline RunOutcome run_single(const RunConfig& cfg, std::uint64_t seed, const std::filesystem::path& dir) {
    RunOutcome outcome;
    outcome.seed = seed;
    const std::string stem = "seed" + std::to_string(seed);
    const std::string run_id = slugify(cfg.label) + "-" + stem;
    try {
        const auto splits = make_splits(cfg.splits, cfg.task.num_prompts());
        auto tc = cfg.trainer_for_seed(seed);
        if (cfg.es) {
            const auto es = run(cfg.es_for_seed(seed), cfg.task, splits);
            save_checkpoint(dir / (stem + ".psi.txt"), es.state.psi);
            write_text_file(dir / (stem + ".es_history.csv"), es_history_csv(es.history));
            tc.potential = PotentialSpec::neural(es.state.psi);
        }
        const auto result = train(tc, cfg.task, splits);
        write_text_file(dir / (stem + ".metrics.ndjson"), metrics_ndjson(run_id, result.metrics));
        write_text_file(dir / (stem + ".timing.ndjson"), timing_ndjson(run_id, result.metrics));

        const auto prompts = final_eval_prompts(splits);
        outcome.final_accuracy = evaluate_accuracy(cfg.task, result.state.policy, prompts, GreedyEval{});
        double length = 0.0;
        for (auto p : prompts) length += static_cast<double>(greedy_response(result.state.policy, p).tokens.size());
        outcome.mean_length = length / static_cast<double>(prompts.size());
        outcome.negative_divergences = result.state.divergence_stats.negative;
        outcome.completed = true;
    } catch (const std::exception& e) {
        outcome.message = e.what();
    }
    return outcome;
}

inline std::string summary_csv(const ExperimentSummary& s) {
    std::string out =
        "# std columns are population standard deviations over completed runs\n"
        "label,runs_requested,runs_completed,incomplete,accuracy_mean,accuracy_std,length_mean,length_std\n";
    out += s.label + "," + std::to_string(s.runs_requested) + "," + std::to_string(s.runs_completed) + "," +
           (s.incomplete() ? "1" : "0") + "," + format_double(s.accuracy.mean) + "," + format_double(s.accuracy.std) +
           "," + format_double(s.length.mean) + "," + format_double(s.length.std) + "\n";
    return out;
}

inline std::string runs_csv(const ExperimentSummary& s) {
    std::string out = "seed,status,final_accuracy,mean_length,negative_divergence_evals,message\n";
    for (const auto& r : s.runs) {
        std::string msg = r.message;
        std::replace(msg.begin(), msg.end(), ',', ';');
        std::replace(msg.begin(), msg.end(), '\n', ' ');
        out += std::to_string(r.seed) + "," + (r.completed ? "ok" : "aborted") + "," + format_double(r.final_accuracy) +
               "," + format_double(r.mean_length) + "," + std::to_string(r.negative_divergences) + "," + msg + "\n";
    }
    return out;
}

/// Run every replicate seed (up to `jobs` at once), then write
/// `<output>/<label-slug>/summary.csv` and `runs.csv`.
inline ExperimentSummary run_experiment(const RunConfig& cfg, const ExperimentOptions& options = {}) {
    const auto dir = options.output_dir / slugify(cfg.label);
    std::filesystem::create_directories(dir);

    ExperimentSummary summary;
    summary.label = cfg.label;
    summary.runs_requested = cfg.seeds.size();
    summary.runs.resize(cfg.seeds.size());
    detail::parallel_for(cfg.seeds.size(), options.jobs,
                         [&](std::size_t i) { summary.runs[i] = run_single(cfg, cfg.seeds[i], dir); });

    std::vector<double> acc, len;
    for (const auto& r : summary.runs) {
        if (!r.completed) continue;
        acc.push_back(r.final_accuracy);
        len.push_back(r.mean_length);
    }
    summary.runs_completed = acc.size();
    summary.accuracy = population_stats(acc);
    summary.length = population_stats(len);

    write_text_file(dir / "summary.csv", summary_csv(summary));
    write_text_file(dir / "runs.csv", runs_csv(summary));
    return summary;
}

inline ExperimentSummary read_summary(const std::filesystem::path& path) {
    std::istringstream in(read_text_file(path));
    std::string line;
    std::vector<std::string> rows;
    while (std::getline(in, line)) {
        if (line.empty() || line.front() == '#') continue;
        rows.push_back(line);
    }
    if (rows.size() != 2) throw std::runtime_error(path.string() + ": expected a header and one data row");
    std::vector<std::string> cells;
    std::stringstream ss(rows[1]);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (cells.size() != 8) throw std::runtime_error(path.string() + ": expected 8 columns");
    auto num = [&](const std::string& s) { return std::stod(s); };
    ExperimentSummary out;
    out.label = cells[0];
    out.runs_requested = std::stoul(cells[1]);
    out.runs_completed = std::stoul(cells[2]);
    out.accuracy = {num(cells[4]), num(cells[5])};
    out.length = {num(cells[6]), num(cells[7])};
    return out;
}

struct Report {
    std::string text;
    std::string csv;
};

/// Method comparison table. Known methods appear in a fixed order, any others
/// follow alphabetically; methods without a summary are left out.
inline Report compare_report(std::vector<ExperimentSummary> summaries) {
    if (summaries.empty()) throw std::invalid_argument("compare_report needs at least one summary");
    static const std::array<std::string, 4> kOrder{"KL baseline", "ProbL2", "Neural random-init", "Neural ES"};
    auto rank = [](const std::string& label) {
        const auto it = std::find(kOrder.begin(), kOrder.end(), label);
        return static_cast<std::size_t>(it - kOrder.begin());
    };
    std::stable_sort(summaries.begin(), summaries.end(), [&](const auto& l, const auto& r) {
        const auto rl = rank(l.label), rr = rank(r.label);
        return rl != rr ? rl < rr : l.label < r.label;
    });

    Report out;
    out.csv = "method,accuracy_mean,accuracy_std,length_mean,length_std,runs_completed,runs_requested,incomplete\n";
    char line[256];
    std::snprintf(line, sizeof line, "%-22s %-18s %-16s %s\n", "method", "accuracy", "length", "runs");
    out.text = line;
    for (const auto& s : summaries) {
        const std::string accuracy = format_fixed(s.accuracy.mean, 3) + " ± " + format_fixed(s.accuracy.std, 3);
        const std::string length = format_fixed(s.length.mean, 1) + " ± " + format_fixed(s.length.std, 1);
        const std::string runs = std::to_string(s.runs_completed) + "/" + std::to_string(s.runs_requested) +
                                 (s.incomplete() ? " (incomplete)" : "");
        // "±" is two bytes, so pad one extra column.
        std::snprintf(line, sizeof line, "%-22s %-19s %-17s %s\n", s.label.c_str(), accuracy.c_str(), length.c_str(),
                      runs.c_str());
        out.text += line;
        out.csv += s.label + "," + format_double(s.accuracy.mean) + "," + format_double(s.accuracy.std) + "," +
                   format_double(s.length.mean) + "," + format_double(s.length.std) + "," +
                   std::to_string(s.runs_completed) + "," + std::to_string(s.runs_requested) + "," +
                   (s.incomplete() ? "1" : "0") + "\n";
    }
    out.text += "(std: population standard deviation across seeds)\n";
    return out;
}

}  // namespace gbmpo

#endif  // GBMPO_EXPERIMENT_HPP
