#pragma once

#include "contlab/mlp.hpp"

namespace contlab {

// Frozen classifiers from completed tasks, appended in task order: entry i
// holds the model frozen after task i+1 (1-based task ids throughout).
class FunctionSet {
public:
    void append(Snapshot snap);
    const Snapshot& at_task(int task_id) const;  // 1-based
    int size() const { return static_cast<int>(snapshots_.size()); }
    bool empty() const { return snapshots_.empty(); }

private:
    std::vector<Snapshot> snapshots_;
};

enum class SchemeKind {
    strong,            // all previous functions
    prefix_plus_last,  // scheme 1: (t-1)th plus first fraction of earlier stages
    prefix_only,       // scheme 2: first fraction only
    interval,          // scheme 3: every step-th function anchored at 1
    random_subset,     // scheme 4: fixed-size random subset per task
    single_shot_last,  // match only the (t-1)th function
    single_function,   // match one fixed task's function
    plain_sgd,         // no matching at all
};

struct MatchingScheme {
    SchemeKind kind = SchemeKind::strong;
    double fraction = 0.5;   // prefix_plus_last / prefix_only
    int step = 2;            // interval
    int count = 2;           // random_subset
    std::uint64_t seed = 0;  // random_subset
    int index = 1;           // single_function

    void validate() const;
};

const char* scheme_kind_name(SchemeKind kind);
SchemeKind scheme_kind_from_name(const std::string& name);

// Task ids (1-based) of the functions matched while training task t, sorted
// ascending without duplicates. Deterministic for fixed (scheme, t).
std::vector<int> select_subset(const MatchingScheme& scheme, int t, int available);
std::vector<int> select_subset(const FunctionSet& set, const MatchingScheme& scheme, int t);

// Sum of subset sizes over t = 2..total_tasks: the number of function
// matchings a full run performs.
long long total_matching_count(const MatchingScheme& scheme, int total_tasks);

enum class LossKind { new_task_ce, match_kl };

// One summand of the per-iteration objective, with its teacher target already
// evaluated for a concrete input.
struct LossComponent {
    LossKind kind = LossKind::new_task_ce;
    int source_task = 0;  // teacher task id for match_kl, current task for new_task_ce
    ClassRange range;
    double weight = 1.0;
    LossSpec loss;
};

struct MatchConfig {
    double kl_weight = 1.0;  // lambda applied to every KL term
    double temperature = 2.0;
    bool normalize_kl = false;  // divide lambda by the subset size
};

// Assembles the loss list for one sample of task t: the new-task CE over all
// classes seen through task t, then one KL per selected snapshot whose target
// is the frozen teacher's tempered softmax over its own covered classes.
// Components are ordered [CE, KL_1, ..., KL_k] with KLs ascending by task.
std::vector<LossComponent> build_losses(const FunctionSet& set, const std::vector<int>& subset,
                                        std::span<const double> x, int label, int t, int seen_classes,
                                        const MatchConfig& config);

}  // namespace contlab
