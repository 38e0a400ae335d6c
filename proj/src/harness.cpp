#include "contlab/harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

namespace contlab {

double AccuracyMatrix::at(int i, int j) const {
    const double value = cells_[index(i, j)];
    if (j > i || value < 0.0) fail(Errc::state, "accuracy matrix: cell not populated");
    return value;
}

void AccuracyMatrix::set(int i, int j, double accuracy) {
    if (j > i) fail(Errc::index, "accuracy matrix: j must not exceed i");
    if (!(accuracy >= 0.0 && accuracy <= 1.0)) fail(Errc::range, "accuracy matrix: accuracy outside [0, 1]");
    cells_[index(i, j)] = accuracy;
}

std::string AccuracyMatrix::to_csv() const {
    std::string out = "after_task";
    for (int j = 0; j < tasks_; ++j) out += ", acc_task_" + std::to_string(j + 1);
    out += "\n";
    char buffer[32];
    for (int i = 0; i < tasks_; ++i) {
        out += std::to_string(i + 1);
        for (int j = 0; j < tasks_; ++j) {
            out += ", ";
            if (defined(i, j)) {
                std::snprintf(buffer, sizeof(buffer), "%.6f", at(i, j));
                out += buffer;
            }
        }
        out += "\n";
    }
    return out;
}

RunMetrics compute_metrics(const AccuracyMatrix& r) {
    const int tasks = r.task_count();
    for (int i = 0; i < tasks; ++i)
        for (int j = 0; j <= i; ++j)
            if (!r.defined(i, j)) fail(Errc::state, "compute_metrics: matrix not fully populated");

    RunMetrics metrics;
    double avg_acc = 0.0;
    for (int i = 0; i < tasks; ++i) {
        double stage = 0.0;
        for (int j = 0; j <= i; ++j) stage += r.at(i, j);
        avg_acc += stage / static_cast<double>(i + 1);
    }
    metrics.avg = avg_acc / static_cast<double>(tasks);

    double last_sum = 0.0;
    for (int j = 0; j < tasks; ++j) {
        const double value = r.at(tasks - 1, j);
        last_sum += value;
        metrics.final_task_accuracies.push_back(value);
    }
    metrics.last = last_sum / static_cast<double>(tasks);

    for (int i = 0; i < tasks; ++i) metrics.first_task_curve.push_back(r.at(i, 0));
    return metrics;
}

namespace {

// Maps global class ids onto the shared head: the class at position k of the
// permuted order is head index k, so tasks cover nested prefixes.
std::vector<int> head_index_map(const TaskStream& stream) {
    std::vector<int> map(static_cast<std::size_t>(stream.num_classes), -1);
    const std::vector<int> order = stream.class_order();
    for (std::size_t k = 0; k < order.size(); ++k) {
        const int cls = order[k];
        if (cls < 0 || cls >= stream.num_classes) fail(Errc::data, "task stream: class id out of range");
        if (map[static_cast<std::size_t>(cls)] != -1) fail(Errc::data, "task stream: duplicate class id");
        map[static_cast<std::size_t>(cls)] = static_cast<int>(k);
    }
    for (int m : map)
        if (m == -1) fail(Errc::data, "task stream: class ids do not cover all classes");
    return map;
}

double evaluate_accuracy(const Network& net, const LabeledDataset& test, const std::vector<int>& head_map,
                         int seen_classes) {
    if (test.samples.empty()) fail(Errc::data, "evaluate: empty test set");
    std::size_t correct = 0;
    for (const Sample& sample : test.samples) {
        Vec logits = forward(net, sample.features);
        int best = 0;
        for (int c = 1; c < seen_classes; ++c)
            if (logits[static_cast<std::size_t>(c)] > logits[static_cast<std::size_t>(best)]) best = c;
        if (best == head_map[static_cast<std::size_t>(sample.label)]) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(test.samples.size());
}

}  // namespace

RunResult run_continual(const TaskStream& stream, const RunOptions& options) {
    if (stream.tasks.empty()) fail(Errc::data, "run_continual: empty task stream");
    const int num_tasks = stream.task_count();

    MlpSpec spec = options.net_spec;
    if (spec.input_dim == 0) spec.input_dim = stream.feature_dim;
    if (spec.total_classes == 0) spec.total_classes = stream.num_classes;
    if (spec.input_dim != stream.feature_dim)
        fail(Errc::config, "run_continual: model input_dim does not match the stream");
    if (spec.total_classes < stream.num_classes)
        fail(Errc::config, "run_continual: model head smaller than the class count");
    spec.validate();

    const std::vector<int> head_map = head_index_map(stream);

    Network net = init_network(spec, options.seed);
    FunctionSet function_set;
    UpdateRule rule(options.update_rule);

    RunResult result{AccuracyMatrix(num_tasks), {}, {}};
    long long global_iteration = 0;

    for (int t = 1; t <= num_tasks; ++t) {
        const Task& task = stream.tasks[static_cast<std::size_t>(t - 1)];
        const int seen_classes = [&] {
            int count = 0;
            for (int u = 0; u < t; ++u)
                count += static_cast<int>(stream.tasks[static_cast<std::size_t>(u)].class_ids.size());
            return count;
        }();

        const std::vector<int> subset =
            t == 1 ? std::vector<int>{} : select_subset(function_set, options.scheme, t);

        const int epochs = t == 1 ? options.epochs_first : options.epochs_rest;
        const std::size_t train_size = task.train.samples.size();
        if (train_size == 0) fail(Errc::data, "run_continual: task " + std::to_string(t) + " has no training data");

        std::vector<std::size_t> indices(train_size);
        std::vector<Vec> batch_inputs;
        std::vector<std::vector<LossComponent>> batch_components;

        for (int epoch = 0; epoch < epochs; ++epoch) {
            for (std::size_t i = 0; i < train_size; ++i) indices[i] = i;
            Rng shuffle_rng = Rng::keyed({0x65706f63u, options.seed, static_cast<std::uint64_t>(t),
                                          static_cast<std::uint64_t>(epoch)});
            shuffle_rng.shuffle(indices);

            for (std::size_t start = 0; start < train_size; start += static_cast<std::size_t>(options.batch_size)) {
                const std::size_t stop = std::min(train_size, start + static_cast<std::size_t>(options.batch_size));
                batch_inputs.clear();
                batch_components.clear();
                for (std::size_t k = start; k < stop; ++k) {
                    const std::size_t idx = indices[k];
                    if (options.train_access_hook) options.train_access_hook(t, task.task_id, idx);
                    const Sample& sample = task.train.samples[idx];
                    batch_inputs.push_back(sample.features);
                    batch_components.push_back(build_losses(function_set, subset, sample.features,
                                                            head_map[static_cast<std::size_t>(sample.label)], t,
                                                            seen_classes, options.match));
                }
                IterationDiagnostics diag;
                try {
                    diag = credit_step(rule, net, batch_inputs, batch_components, options.credit_enabled,
                                       options.project_newer);
                } catch (const Error& e) {
                    if (e.code() == Errc::numeric)
                        fail(Errc::numeric, "run_continual: iteration " + std::to_string(global_iteration) +
                                                " aborted: " + e.what());
                    throw;
                }
                for (double loss : diag.component_losses)
                    if (!std::isfinite(loss))
                        fail(Errc::numeric, "run_continual: non-finite loss at iteration " +
                                                std::to_string(global_iteration));
                if (options.log_every > 0 && global_iteration % options.log_every == 0)
                    result.diagnostics.push_back({t, global_iteration, std::move(diag)});
                ++global_iteration;
            }
        }

        function_set.append(make_snapshot(net, ClassRange{0, seen_classes}));

        for (int j = 1; j <= t; ++j)
            result.accuracy.set(t - 1, j - 1,
                                evaluate_accuracy(net, stream.tasks[static_cast<std::size_t>(j - 1)].test,
                                                  head_map, seen_classes));
    }

    result.metrics = compute_metrics(result.accuracy);
    return result;
}

}  // namespace contlab
