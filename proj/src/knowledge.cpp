#include "contlab/knowledge.hpp"

#include <algorithm>
#include <cmath>

namespace contlab {

void FunctionSet::append(Snapshot snap) {
    if (!snapshots_.empty()) {
        const ClassRange prev = snapshots_.back().covered_classes();
        if (snap.covered_classes().end <= prev.end)
            fail(Errc::sequencing, "function set: covered classes must grow strictly");
    }
    snapshots_.push_back(std::move(snap));
}

const Snapshot& FunctionSet::at_task(int task_id) const {
    if (task_id < 1 || task_id > size()) fail(Errc::index, "function set: no snapshot for task " + std::to_string(task_id));
    return snapshots_[static_cast<std::size_t>(task_id - 1)];
}

void MatchingScheme::validate() const {
    switch (kind) {
        case SchemeKind::prefix_plus_last:
        case SchemeKind::prefix_only:
            if (!(fraction > 0.0 && fraction <= 1.0)) fail(Errc::config, "scheme: fraction must be in (0, 1]");
            break;
        case SchemeKind::interval:
            if (step < 2) fail(Errc::config, "scheme: step must be >= 2");
            break;
        case SchemeKind::random_subset:
            if (count < 1) fail(Errc::config, "scheme: count must be >= 1");
            break;
        case SchemeKind::single_function:
            if (index < 1) fail(Errc::config, "scheme: function index must be >= 1");
            break;
        default:
            break;
    }
}

const char* scheme_kind_name(SchemeKind kind) {
    switch (kind) {
        case SchemeKind::strong: return "strong";
        case SchemeKind::prefix_plus_last: return "scheme1";
        case SchemeKind::prefix_only: return "scheme2";
        case SchemeKind::interval: return "scheme3";
        case SchemeKind::random_subset: return "scheme4";
        case SchemeKind::single_shot_last: return "single_shot_last";
        case SchemeKind::single_function: return "single_function";
        case SchemeKind::plain_sgd: return "plain_sgd";
    }
    return "unknown";
}

SchemeKind scheme_kind_from_name(const std::string& name) {
    if (name == "strong") return SchemeKind::strong;
    if (name == "scheme1") return SchemeKind::prefix_plus_last;
    if (name == "scheme2") return SchemeKind::prefix_only;
    if (name == "scheme3") return SchemeKind::interval;
    if (name == "scheme4") return SchemeKind::random_subset;
    if (name == "single_shot_last") return SchemeKind::single_shot_last;
    if (name == "single_function") return SchemeKind::single_function;
    if (name == "plain_sgd") return SchemeKind::plain_sgd;
    fail(Errc::config, "scheme: unknown kind '" + name + "'");
}

namespace {

// floor(f * n) with a nudge so that decimal fractions like 0.3 hit their
// mathematical value despite binary rounding (0.3 * 10 < 3 in doubles).
int scaled_floor(double fraction, int n) {
    if (n <= 0) return 0;
    return static_cast<int>(std::floor(fraction * static_cast<double>(n) + 1e-9));
}

}  // namespace

std::vector<int> select_subset(const MatchingScheme& scheme, int t, int available) {
    scheme.validate();
    if (scheme.kind == SchemeKind::plain_sgd) return {};
    if (t < 2) fail(Errc::sequencing, "select_subset: matching schemes need t >= 2");
    if (available < t - 1) fail(Errc::sequencing, "select_subset: function set is missing snapshots");

    std::vector<int> subset;
    switch (scheme.kind) {
        case SchemeKind::strong:
            for (int i = 1; i <= t - 1; ++i) subset.push_back(i);
            break;
        case SchemeKind::prefix_plus_last: {
            int prefix = scaled_floor(scheme.fraction, t - 2);
            for (int i = 1; i <= prefix; ++i) subset.push_back(i);
            subset.push_back(t - 1);
            std::sort(subset.begin(), subset.end());
            subset.erase(std::unique(subset.begin(), subset.end()), subset.end());
            break;
        }
        case SchemeKind::prefix_only: {
            int prefix = std::max(1, scaled_floor(scheme.fraction, t - 1));
            for (int i = 1; i <= prefix; ++i) subset.push_back(i);
            break;
        }
        case SchemeKind::interval:
            for (int i = 1; i <= t - 1; i += scheme.step) subset.push_back(i);
            break;
        case SchemeKind::random_subset: {
            std::vector<int> pool;
            for (int i = 1; i <= t - 1; ++i) pool.push_back(i);
            if (scheme.count >= t - 1) return pool;
            Rng rng = Rng::keyed({0x73636834u, scheme.seed, static_cast<std::uint64_t>(t)});
            // Partial Fisher-Yates: draw `count` distinct indices.
            for (int k = 0; k < scheme.count; ++k) {
                std::size_t j = static_cast<std::size_t>(k) +
                                static_cast<std::size_t>(rng.next_below(pool.size() - static_cast<std::size_t>(k)));
                std::swap(pool[static_cast<std::size_t>(k)], pool[j]);
            }
            pool.resize(static_cast<std::size_t>(scheme.count));
            std::sort(pool.begin(), pool.end());
            return pool;
        }
        case SchemeKind::single_shot_last:
            subset.push_back(t - 1);
            break;
        case SchemeKind::single_function:
            if (scheme.index <= t - 1) subset.push_back(scheme.index);
            break;
        case SchemeKind::plain_sgd:
            break;
    }
    return subset;
}

std::vector<int> select_subset(const FunctionSet& set, const MatchingScheme& scheme, int t) {
    return select_subset(scheme, t, set.size());
}

long long total_matching_count(const MatchingScheme& scheme, int total_tasks) {
    if (total_tasks < 2) fail(Errc::range, "total_matching_count: need at least 2 tasks");
    long long total = 0;
    for (int t = 2; t <= total_tasks; ++t)
        total += static_cast<long long>(select_subset(scheme, t, t - 1).size());
    return total;
}

std::vector<LossComponent> build_losses(const FunctionSet& set, const std::vector<int>& subset,
                                        std::span<const double> x, int label, int t, int seen_classes,
                                        const MatchConfig& config) {
    if (label < 0 || label >= seen_classes) fail(Errc::range, "build_losses: label outside the seen class range");
    std::vector<LossComponent> components;
    components.reserve(subset.size() + 1);

    LossComponent ce;
    ce.kind = LossKind::new_task_ce;
    ce.source_task = t;
    ce.range = ClassRange{0, seen_classes};
    ce.weight = 1.0;
    ce.loss = CeLoss{label, ce.range};
    components.push_back(std::move(ce));

    const double kl_weight =
        config.normalize_kl && !subset.empty() ? config.kl_weight / static_cast<double>(subset.size())
                                               : config.kl_weight;
    for (int task_id : subset) {
        const Snapshot& teacher = set.at_task(task_id);
        const ClassRange range = teacher.covered_classes();
        Vec teacher_logits = forward(teacher, x);
        auto restricted = std::span<const double>(teacher_logits)
                              .subspan(static_cast<std::size_t>(range.begin), static_cast<std::size_t>(range.size()));
        LossComponent kl;
        kl.kind = LossKind::match_kl;
        kl.source_task = task_id;
        kl.range = range;
        kl.weight = kl_weight;
        kl.loss = KlLoss{softmax(restricted, config.temperature), range, config.temperature};
        components.push_back(std::move(kl));
    }
    return components;
}

}  // namespace contlab
