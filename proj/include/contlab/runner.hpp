#pragma once

#include "contlab/config.hpp"

namespace contlab {

struct ExperimentOptions {
    std::string out_dir;  // overrides config.output_dir when non-empty
    bool force = false;   // allow writing into a non-empty run directory
    int jobs = 1;
};

struct RunRecord {
    std::uint64_t class_order_seed = 0;
    std::uint64_t seed = 0;
    RunMetrics metrics;
    std::string accuracy_csv_path;
};

struct Aggregate {
    double avg_mean = 0.0;
    double avg_std = 0.0;
    double last_mean = 0.0;
    double last_std = 0.0;
    std::vector<double> first_task_curve_mean;
};

struct ExperimentSummary {
    std::string run_dir;
    std::string hash;
    std::vector<RunRecord> runs;
    Aggregate overall;
    std::vector<std::pair<std::uint64_t, Aggregate>> per_order_seed;
};

// Executes every (class_order_seed, seed) combination of the config and
// writes, under <out>/<name>-<hash>/: the normalized config, one accuracy
// CSV per run, a metrics record per run, the cross-seed aggregate, and
// first-task-curve data for plotting. Reruns of the same config produce
// byte-identical files. Throws on failure after writing a failure marker;
// completed per-run outputs are retained.
ExperimentSummary run_experiment(const RunConfig& config, const ExperimentOptions& options);

// Matching-count audit: per-task subset sizes and totals for the configured
// scheme next to the strong baseline, without any training. CSV text.
std::string audit_cost(const RunConfig& config);

}  // namespace contlab
