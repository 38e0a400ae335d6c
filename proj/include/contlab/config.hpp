#pragma once

#include <optional>

#include "contlab/harness.hpp"

namespace contlab {

struct BlobsDatasetConfig {
    BlobsParams params;
};

struct CsvDatasetConfig {
    std::string path;
    int classes_per_task = 1;
    double train_fraction = 0.8;
    std::uint64_t split_seed = 0;
};

// Complete description of one experiment: dataset, stream orders, model,
// scheme, optimizer, credit flag, training knobs, seeds, output directory.
// Every omitted field takes a documented default; render() echoes the fully
// resolved document, and parse(render()) reproduces the config.
struct RunConfig {
    std::string name = "run";
    std::variant<BlobsDatasetConfig, CsvDatasetConfig> dataset = BlobsDatasetConfig{};
    std::vector<std::uint64_t> class_order_seeds = {0};
    std::vector<int> hidden_dims = {64, 64};
    Activation activation = Activation::tanh;
    MatchingScheme scheme;
    UpdateRule::Kind update_rule = SgdRule{};
    bool credit_enabled = false;
    bool project_newer = false;
    int epochs_first = 40;
    int epochs_rest = 40;
    int batch_size = 32;
    double kl_weight = 1.0;
    double temperature = 2.0;
    bool normalize_kl = false;
    int log_every = 0;
    std::vector<std::uint64_t> seeds = {1, 2, 3, 4, 5};
    std::string output_dir = "out";

    int classes_per_task() const;
    TaskStream make_stream(std::uint64_t class_order_seed) const;
    RunOptions make_run_options(std::uint64_t seed) const;
};

// Strict parser: unknown keys are rejected with their full path, types are
// checked, ranges validated.
RunConfig parse_config(const std::string& text);
RunConfig load_config_file(const std::string& path);

// Normalized JSON document with every default filled in; stable key order.
std::string render_config(const RunConfig& config);

// Hash of the rendered document; names output directories and records.
std::string config_hash(const RunConfig& config);

}  // namespace contlab
