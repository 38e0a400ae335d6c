#include "contlab/runner.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <thread>

#include <json.hpp>

namespace contlab {

namespace fs = std::filesystem;
using Json = nlohmann::ordered_json;

namespace {

std::string format6(double value) {
    char buffer[32];
    std::snprintf(buffer, sizeof(buffer), "%.6f", value);
    return buffer;
}

void write_text_file(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) fail(Errc::io, "runner: cannot open " + path.string() + " for writing");
    out << text;
    if (!out) fail(Errc::io, "runner: write failed for " + path.string());
}

Aggregate aggregate_runs(const std::vector<const RunRecord*>& runs) {
    Aggregate agg;
    const double n = static_cast<double>(runs.size());
    for (const RunRecord* run : runs) {
        agg.avg_mean += run->metrics.avg;
        agg.last_mean += run->metrics.last;
    }
    agg.avg_mean /= n;
    agg.last_mean /= n;
    if (runs.size() > 1) {
        double avg_sq = 0.0;
        double last_sq = 0.0;
        for (const RunRecord* run : runs) {
            avg_sq += (run->metrics.avg - agg.avg_mean) * (run->metrics.avg - agg.avg_mean);
            last_sq += (run->metrics.last - agg.last_mean) * (run->metrics.last - agg.last_mean);
        }
        agg.avg_std = std::sqrt(avg_sq / (n - 1.0));
        agg.last_std = std::sqrt(last_sq / (n - 1.0));
    }
    const std::size_t tasks = runs.front()->metrics.first_task_curve.size();
    agg.first_task_curve_mean.assign(tasks, 0.0);
    for (const RunRecord* run : runs)
        for (std::size_t i = 0; i < tasks; ++i) agg.first_task_curve_mean[i] += run->metrics.first_task_curve[i] / n;
    return agg;
}

Json aggregate_to_json(const Aggregate& agg) {
    Json out;
    out["avg_mean"] = agg.avg_mean;
    out["avg_std"] = agg.avg_std;
    out["last_mean"] = agg.last_mean;
    out["last_std"] = agg.last_std;
    out["first_task_curve_mean"] = agg.first_task_curve_mean;
    return out;
}

std::string diagnostics_jsonl(const std::vector<DiagnosticsRecord>& records) {
    std::string out;
    for (const DiagnosticsRecord& rec : records) {
        Json line;
        line["iteration"] = rec.iteration;
        line["task"] = rec.task;
        line["conflicts"] = rec.diag.conflict_count;
        line["degenerate_pairs"] = rec.diag.degenerate_pairs;
        line["mean_phi"] = rec.diag.mean_phi;
        line["losses"] = rec.diag.component_losses;
        out += line.dump() + "\n";
    }
    return out;
}

}  // namespace

ExperimentSummary run_experiment(const RunConfig& config, const ExperimentOptions& options) {
    ExperimentSummary summary;
    summary.hash = config_hash(config);

    const fs::path base = options.out_dir.empty() ? fs::path(config.output_dir) : fs::path(options.out_dir);
    const fs::path run_dir = base / (config.name + "-" + summary.hash);
    summary.run_dir = run_dir.string();

    std::error_code ec;
    fs::create_directories(run_dir, ec);
    if (ec) fail(Errc::io, "runner: cannot create " + run_dir.string());
    if (!options.force && !fs::is_empty(run_dir))
        fail(Errc::io, "runner: " + run_dir.string() + " is not empty (rerun with force to overwrite)");

    write_text_file(run_dir / ("config_" + summary.hash + ".json"), render_config(config));

    struct Job {
        std::uint64_t order_seed;
        std::uint64_t seed;
    };
    std::vector<Job> jobs;
    for (std::uint64_t order_seed : config.class_order_seeds)
        for (std::uint64_t seed : config.seeds) jobs.push_back({order_seed, seed});

    // Streams are shared read-only across the runs of one order seed.
    std::vector<TaskStream> streams;
    for (std::uint64_t order_seed : config.class_order_seeds) streams.push_back(config.make_stream(order_seed));

    summary.runs.resize(jobs.size());
    std::vector<std::string> failures(jobs.size());
    std::atomic<std::size_t> next{0};

    auto worker = [&]() {
        for (;;) {
            const std::size_t k = next.fetch_add(1);
            if (k >= jobs.size()) return;
            const Job& job = jobs[k];
            try {
                const std::size_t stream_idx =
                    static_cast<std::size_t>(std::find(config.class_order_seeds.begin(),
                                                       config.class_order_seeds.end(), job.order_seed) -
                                             config.class_order_seeds.begin());
                RunResult result = run_continual(streams[stream_idx], config.make_run_options(job.seed));

                RunRecord record;
                record.class_order_seed = job.order_seed;
                record.seed = job.seed;
                record.metrics = result.metrics;
                const std::string stem =
                    "o" + std::to_string(job.order_seed) + "_s" + std::to_string(job.seed);
                const fs::path csv_path = run_dir / ("acc_" + summary.hash + "_" + stem + ".csv");
                write_text_file(csv_path, result.accuracy.to_csv());
                record.accuracy_csv_path = csv_path.string();
                if (config.log_every > 0)
                    write_text_file(run_dir / ("diag_" + summary.hash + "_" + stem + ".jsonl"),
                                    diagnostics_jsonl(result.diagnostics));
                summary.runs[k] = std::move(record);
            } catch (const std::exception& e) {
                failures[k] = e.what();
            }
        }
    };

    const int thread_count = std::max(1, std::min<int>(options.jobs, static_cast<int>(jobs.size())));
    if (thread_count == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (int i = 0; i < thread_count; ++i) pool.emplace_back(worker);
        for (std::thread& th : pool) th.join();
    }

    std::string failure_report;
    for (std::size_t k = 0; k < jobs.size(); ++k) {
        if (!failures[k].empty())
            failure_report += "order_seed=" + std::to_string(jobs[k].order_seed) + " seed=" +
                              std::to_string(jobs[k].seed) + ": " + failures[k] + "\n";
    }
    if (!failure_report.empty()) {
        write_text_file(run_dir / ("FAILED_" + summary.hash + ".txt"), failure_report);
        fail(Errc::state, "runner: " + std::to_string(std::count_if(failures.begin(), failures.end(),
                                                                    [](const std::string& s) { return !s.empty(); })) +
                              " run(s) failed; see " + (run_dir / ("FAILED_" + summary.hash + ".txt")).string());
    }

    // Metrics records, one line per run, in job order.
    std::string metrics_lines;
    for (std::size_t k = 0; k < jobs.size(); ++k) {
        const RunRecord& record = summary.runs[k];
        Json line;
        line["config_hash"] = summary.hash;
        line["name"] = config.name;
        line["class_order_seed"] = record.class_order_seed;
        line["seed"] = record.seed;
        line["avg"] = record.metrics.avg;
        line["last"] = record.metrics.last;
        line["first_task_curve"] = record.metrics.first_task_curve;
        line["final_task_accuracies"] = record.metrics.final_task_accuracies;
        metrics_lines += line.dump() + "\n";
    }
    write_text_file(run_dir / ("metrics_" + summary.hash + ".jsonl"), metrics_lines);

    std::vector<const RunRecord*> all_runs;
    for (const RunRecord& record : summary.runs) all_runs.push_back(&record);
    summary.overall = aggregate_runs(all_runs);
    for (std::uint64_t order_seed : config.class_order_seeds) {
        std::vector<const RunRecord*> subset;
        for (const RunRecord& record : summary.runs)
            if (record.class_order_seed == order_seed) subset.push_back(&record);
        summary.per_order_seed.emplace_back(order_seed, aggregate_runs(subset));
    }

    Json agg;
    agg["config_hash"] = summary.hash;
    agg["name"] = config.name;
    agg["runs"] = jobs.size();
    agg["overall"] = aggregate_to_json(summary.overall);
    Json per_order = Json::array();
    for (const auto& [order_seed, aggregate] : summary.per_order_seed) {
        Json entry = aggregate_to_json(aggregate);
        entry["class_order_seed"] = order_seed;
        per_order.push_back(entry);
    }
    agg["per_order_seed"] = per_order;
    write_text_file(run_dir / ("aggregate_" + summary.hash + ".json"), agg.dump(2) + "\n");

    // First-task forgetting curve, one column per run plus the mean.
    std::string curve = "after_task";
    for (std::size_t k = 0; k < jobs.size(); ++k)
        curve += ", o" + std::to_string(jobs[k].order_seed) + "_s" + std::to_string(jobs[k].seed);
    curve += ", mean\n";
    const std::size_t tasks = summary.overall.first_task_curve_mean.size();
    for (std::size_t i = 0; i < tasks; ++i) {
        curve += std::to_string(i + 1);
        for (const RunRecord& record : summary.runs) curve += ", " + format6(record.metrics.first_task_curve[i]);
        curve += ", " + format6(summary.overall.first_task_curve_mean[i]) + "\n";
    }
    write_text_file(run_dir / ("first_task_curve_" + summary.hash + ".csv"), curve);

    return summary;
}

std::string audit_cost(const RunConfig& config) {
    int num_classes = 0;
    if (const auto* blobs = std::get_if<BlobsDatasetConfig>(&config.dataset)) {
        num_classes = blobs->params.num_classes;
    } else {
        // Class count comes from the file; build the stream once, no training.
        num_classes = config.make_stream(config.class_order_seeds.front()).num_classes;
    }
    const int total_tasks = num_classes / config.classes_per_task();

    std::string out = "scheme, total_tasks, matchings, strong_matchings, reduction_percent\n";
    if (total_tasks < 2) {
        out += std::string(scheme_kind_name(config.scheme.kind)) + ", " + std::to_string(total_tasks) +
               ", 0, 0, 0.0\n";
        return out;
    }
    MatchingScheme strong;
    strong.kind = SchemeKind::strong;
    const long long strong_count = total_matching_count(strong, total_tasks);
    const long long scheme_count = total_matching_count(config.scheme, total_tasks);
    const double reduction =
        strong_count == 0 ? 0.0
                          : 100.0 * static_cast<double>(strong_count - scheme_count) / static_cast<double>(strong_count);
    char reduction_text[32];
    std::snprintf(reduction_text, sizeof(reduction_text), "%.1f", reduction);
    out += std::string(scheme_kind_name(config.scheme.kind)) + ", " + std::to_string(total_tasks) + ", " +
           std::to_string(scheme_count) + ", " + std::to_string(strong_count) + ", " + reduction_text + "\n";
    return out;
}

}  // namespace contlab
