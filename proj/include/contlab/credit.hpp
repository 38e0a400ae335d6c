#pragma once

#include "contlab/knowledge.hpp"

namespace contlab {

// Per-objective gradients at one iteration, ordered oldest matched task first
// and the new-task gradient last.
using GradientSet = std::vector<Vec>;

// Symmetric matrix of pairwise cosine similarities between the gradients of
// one iteration. Degenerate (near-zero) gradients get similarity 0 everywhere,
// including their own diagonal entry.
class AssignmentMatrix {
public:
    explicit AssignmentMatrix(int n) : n_(n), phi_(static_cast<std::size_t>(n) * static_cast<std::size_t>(n), 0.0) {}

    int size() const { return n_; }
    double at(int a, int b) const { return phi_[index(a, b)]; }
    void set(int a, int b, double value) { phi_[index(a, b)] = value; }

    // Mean over the strict upper triangle; 0 for a single gradient.
    double mean_upper() const;

private:
    std::size_t index(int a, int b) const {
        if (a < 0 || b < 0 || a >= n_ || b >= n_) fail(Errc::index, "assignment matrix: index out of range");
        return static_cast<std::size_t>(a) * static_cast<std::size_t>(n_) + static_cast<std::size_t>(b);
    }

    int n_;
    std::vector<double> phi_;
};

// Upper-triangle pair with negative similarity at extraction time.
struct ConflictPair {
    int a = 0;
    int b = 0;
    bool operator==(const ConflictPair&) const = default;
};

AssignmentMatrix assignment_matrix(const GradientSet& grads);

// All (a, b), a < b, with phi[a][b] < 0, in row-major order.
std::vector<ConflictPair> extract_conflicts(const AssignmentMatrix& m);

struct ProjectionReport {
    int processed_pairs = 0;
    int degenerate_pairs = 0;  // pairs skipped because the target norm vanished
    // |dot(g_a', g_b)| / (|g_a before| * |g_b|) immediately after each
    // processed projection, in pair order.
    std::vector<double> residuals;
    // Norm of the projected gradient immediately before/after each processed
    // projection, in pair order.
    std::vector<double> norms_before;
    std::vector<double> norms_after;
};

// Projects g_a onto the normal plane of g_b for each conflicting pair, in the
// given order, mutating the working copy in place so later projections see
// earlier results. When project_newer is set the roles swap: g_b is projected
// onto the normal plane of g_a.
GradientSet resolve_conflicts(GradientSet grads, const std::vector<ConflictPair>& pairs,
                              ProjectionReport* report = nullptr, bool project_newer = false);

Vec combine(const GradientSet& grads, std::span<const double> weights);

struct SgdRule {
    double lr = 0.05;
};
struct AdamRule {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};
struct RmspropRule {
    double lr = 1e-3;
    double decay = 0.9;
    double eps = 1e-8;
};
struct AdadeltaRule {
    double decay = 0.95;
    double eps = 1e-6;
};

// Pluggable update rule with per-kind moment state, advanced exactly once per
// step. Hyperparameter defaults are the originally published values.
class UpdateRule {
public:
    using Kind = std::variant<SgdRule, AdamRule, RmspropRule, AdadeltaRule>;

    explicit UpdateRule(Kind kind) : kind_(std::move(kind)) {}

    const Kind& kind() const { return kind_; }
    const char* name() const;

    // theta <- theta - (rule-specific scaling of combined). Errors with
    // Errc::numeric on a non-finite combined gradient, leaving params and
    // state untouched.
    void step(Vec& params, const Vec& combined);

private:
    void ensure_state(std::size_t n);

    Kind kind_;
    long long step_count_ = 0;
    Vec m_;  // first moment (adam) / square accumulator (rmsprop, adadelta)
    Vec v_;  // second moment (adam) / delta accumulator (adadelta)
};

struct IterationDiagnostics {
    int conflict_count = 0;
    int degenerate_pairs = 0;
    double mean_phi = 0.0;
    // Per-component losses in gradient order (oldest matched KL ... CE last).
    std::vector<double> component_losses;
};

// One optimization step over a mini-batch: per-component mean gradients via
// backprop, optional conflict projection, weighted combination, rule update.
// Components must all carry the same structure for every sample; the
// components argument holds one evaluated list per sample in the batch.
IterationDiagnostics credit_step(UpdateRule& rule, Network& net, std::span<const Vec> inputs,
                                 const std::vector<std::vector<LossComponent>>& components, bool enabled,
                                 bool project_newer = false);

}  // namespace contlab
