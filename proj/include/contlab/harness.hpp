#pragma once

#include <functional>

#include "contlab/credit.hpp"
#include "contlab/data.hpp"

namespace contlab {

// R[i][j] = accuracy on task j+1's test set after finishing training on task
// i+1. Cells with j > i are undefined.
class AccuracyMatrix {
public:
    explicit AccuracyMatrix(int tasks)
        : tasks_(tasks), cells_(static_cast<std::size_t>(tasks) * static_cast<std::size_t>(tasks), -1.0) {}

    int task_count() const { return tasks_; }
    bool defined(int i, int j) const { return j <= i && cells_[index(i, j)] >= 0.0; }
    double at(int i, int j) const;
    void set(int i, int j, double accuracy);

    // Header "after_task, acc_task_1, ..., acc_task_T"; undefined cells stay
    // empty; accuracies printed with 6 decimal digits.
    std::string to_csv() const;

private:
    std::size_t index(int i, int j) const {
        if (i < 0 || j < 0 || i >= tasks_ || j >= tasks_) fail(Errc::index, "accuracy matrix: index out of range");
        return static_cast<std::size_t>(i) * static_cast<std::size_t>(tasks_) + static_cast<std::size_t>(j);
    }

    int tasks_;
    std::vector<double> cells_;
};

struct RunMetrics {
    double avg = 0.0;   // mean over t of the mean accuracy on tasks 1..t after task t
    double last = 0.0;  // mean per-task accuracy after the final task
    std::vector<double> first_task_curve;       // column 0 of R
    std::vector<double> final_task_accuracies;  // last row of R
};

RunMetrics compute_metrics(const AccuracyMatrix& r);

// Called for every training-sample fetch: (task being trained, task owning
// the sample, index within that task's train set). Lets tests prove that
// training task t never touches raw samples of earlier tasks.
using TrainAccessHook = std::function<void(int training_task, int accessed_task, std::size_t sample_index)>;

struct DiagnosticsRecord {
    int task = 0;
    long long iteration = 0;  // global iteration index within the run
    IterationDiagnostics diag;
};

struct RunOptions {
    MlpSpec net_spec;  // input_dim/total_classes filled from the stream when 0
    MatchingScheme scheme;
    UpdateRule::Kind update_rule = SgdRule{};
    bool credit_enabled = false;
    bool project_newer = false;  // swap projection roles in each conflict pair
    int epochs_first = 40;
    int epochs_rest = 40;
    int batch_size = 32;
    std::uint64_t seed = 1;
    MatchConfig match;
    int log_every = 0;  // 0 disables diagnostics records
    TrainAccessHook train_access_hook;
};

struct RunResult {
    AccuracyMatrix accuracy;
    RunMetrics metrics;
    std::vector<DiagnosticsRecord> diagnostics;
};

// Full class-incremental pass over the stream: train each task with the
// configured scheme/rule, snapshot after each task, evaluate all seen tasks
// by argmax over the classes seen so far (no task identity at inference).
RunResult run_continual(const TaskStream& stream, const RunOptions& options);

}  // namespace contlab
