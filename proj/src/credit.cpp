#include "contlab/credit.hpp"

#include <cmath>

namespace contlab {

double AssignmentMatrix::mean_upper() const {
    if (n_ < 2) return 0.0;
    double sum = 0.0;
    int count = 0;
    for (int a = 0; a < n_; ++a)
        for (int b = a + 1; b < n_; ++b) {
            sum += at(a, b);
            ++count;
        }
    return sum / static_cast<double>(count);
}

AssignmentMatrix assignment_matrix(const GradientSet& grads) {
    if (grads.empty()) fail(Errc::dimension, "assignment_matrix: empty gradient set");
    const std::size_t dim = grads[0].size();
    for (const Vec& g : grads)
        if (g.size() != dim) fail(Errc::dimension, "assignment_matrix: gradient lengths differ");
    const int n = static_cast<int>(grads.size());
    AssignmentMatrix m(n);
    // Compute the upper triangle plus diagonal and mirror.
    for (int a = 0; a < n; ++a) {
        for (int b = a; b < n; ++b) {
            double phi = cosine_similarity(grads[static_cast<std::size_t>(a)], grads[static_cast<std::size_t>(b)]);
            m.set(a, b, phi);
            m.set(b, a, phi);
        }
    }
    return m;
}

std::vector<ConflictPair> extract_conflicts(const AssignmentMatrix& m) {
    std::vector<ConflictPair> pairs;
    for (int a = 0; a < m.size(); ++a)
        for (int b = a + 1; b < m.size(); ++b)
            if (m.at(a, b) < 0.0) pairs.push_back({a, b});
    return pairs;
}

GradientSet resolve_conflicts(GradientSet grads, const std::vector<ConflictPair>& pairs,
                              ProjectionReport* report, bool project_newer) {
    for (const ConflictPair& pair : pairs) {
        if (pair.a < 0 || pair.b < 0 || pair.a >= static_cast<int>(grads.size()) ||
            pair.b >= static_cast<int>(grads.size()) || pair.a >= pair.b)
            fail(Errc::index, "resolve_conflicts: malformed conflict pair");
        const int victim = project_newer ? pair.b : pair.a;
        const int anchor = project_newer ? pair.a : pair.b;
        Vec& g = grads[static_cast<std::size_t>(victim)];
        const Vec& h = grads[static_cast<std::size_t>(anchor)];
        const double h_sq = dot(h, h);
        if (std::sqrt(h_sq) < kDegenerateNorm) {
            if (report) ++report->degenerate_pairs;
            continue;
        }
        const double g_norm_before = norm(g);
        const double coeff = dot(g, h) / h_sq;
        for (std::size_t i = 0; i < g.size(); ++i) g[i] -= coeff * h[i];
        if (report) {
            ++report->processed_pairs;
            const double scale = g_norm_before * std::sqrt(h_sq);
            report->residuals.push_back(scale > 0.0 ? std::abs(dot(g, h)) / scale : 0.0);
            report->norms_before.push_back(g_norm_before);
            report->norms_after.push_back(norm(g));
        }
    }
    return grads;
}

Vec combine(const GradientSet& grads, std::span<const double> weights) {
    if (grads.empty()) fail(Errc::dimension, "combine: empty gradient set");
    if (weights.size() != grads.size()) fail(Errc::dimension, "combine: one weight per gradient required");
    Vec out(grads[0].size(), 0.0);
    for (std::size_t k = 0; k < grads.size(); ++k) {
        if (grads[k].size() != out.size()) fail(Errc::dimension, "combine: gradient lengths differ");
        for (std::size_t i = 0; i < out.size(); ++i) out[i] += weights[k] * grads[k][i];
    }
    return out;
}

const char* UpdateRule::name() const {
    if (std::holds_alternative<SgdRule>(kind_)) return "sgd";
    if (std::holds_alternative<AdamRule>(kind_)) return "adam";
    if (std::holds_alternative<RmspropRule>(kind_)) return "rmsprop";
    return "adadelta";
}

void UpdateRule::ensure_state(std::size_t n) {
    if (std::holds_alternative<SgdRule>(kind_)) return;
    if (m_.size() != n) m_.assign(n, 0.0);
    if (std::holds_alternative<AdamRule>(kind_) || std::holds_alternative<AdadeltaRule>(kind_)) {
        if (v_.size() != n) v_.assign(n, 0.0);
    }
}

void UpdateRule::step(Vec& params, const Vec& combined) {
    if (params.size() != combined.size()) fail(Errc::dimension, "step: gradient length mismatch");
    if (!all_finite(combined)) fail(Errc::numeric, "step: non-finite combined gradient");
    ensure_state(params.size());
    ++step_count_;
    if (const auto* sgd = std::get_if<SgdRule>(&kind_)) {
        for (std::size_t i = 0; i < params.size(); ++i) params[i] -= sgd->lr * combined[i];
        return;
    }
    if (const auto* adam = std::get_if<AdamRule>(&kind_)) {
        const double bc1 = 1.0 - std::pow(adam->beta1, static_cast<double>(step_count_));
        const double bc2 = 1.0 - std::pow(adam->beta2, static_cast<double>(step_count_));
        for (std::size_t i = 0; i < params.size(); ++i) {
            m_[i] = adam->beta1 * m_[i] + (1.0 - adam->beta1) * combined[i];
            v_[i] = adam->beta2 * v_[i] + (1.0 - adam->beta2) * combined[i] * combined[i];
            params[i] -= adam->lr * (m_[i] / bc1) / (std::sqrt(v_[i] / bc2) + adam->eps);
        }
        return;
    }
    if (const auto* rms = std::get_if<RmspropRule>(&kind_)) {
        for (std::size_t i = 0; i < params.size(); ++i) {
            m_[i] = rms->decay * m_[i] + (1.0 - rms->decay) * combined[i] * combined[i];
            params[i] -= rms->lr * combined[i] / (std::sqrt(m_[i]) + rms->eps);
        }
        return;
    }
    const auto& ada = std::get<AdadeltaRule>(kind_);
    for (std::size_t i = 0; i < params.size(); ++i) {
        m_[i] = ada.decay * m_[i] + (1.0 - ada.decay) * combined[i] * combined[i];
        const double delta = -std::sqrt(v_[i] + ada.eps) / std::sqrt(m_[i] + ada.eps) * combined[i];
        v_[i] = ada.decay * v_[i] + (1.0 - ada.decay) * delta * delta;
        params[i] += delta;
    }
}

IterationDiagnostics credit_step(UpdateRule& rule, Network& net, std::span<const Vec> inputs,
                                 const std::vector<std::vector<LossComponent>>& components, bool enabled,
                                 bool project_newer) {
    if (inputs.empty() || components.size() != inputs.size())
        fail(Errc::dimension, "credit_step: one component list per input required");
    const std::size_t n_components = components[0].size();
    if (n_components == 0) fail(Errc::dimension, "credit_step: at least one loss component required");
    for (const auto& list : components)
        if (list.size() != n_components) fail(Errc::dimension, "credit_step: component lists differ in shape");

    // Gradient order: matched KL terms by ascending source task, CE last. The
    // builder emits [CE, KL...], so the CE component (index 0) moves to the
    // back.
    std::vector<std::size_t> order;
    for (std::size_t c = 1; c < n_components; ++c) order.push_back(c);
    order.push_back(0);

    const double inv_batch = 1.0 / static_cast<double>(inputs.size());
    GradientSet grads(n_components, Vec(net.params.size(), 0.0));
    Vec weights(n_components, 0.0);
    IterationDiagnostics diag;
    diag.component_losses.assign(n_components, 0.0);

    ForwardTrace trace;
    for (std::size_t g = 0; g < n_components; ++g) {
        const std::size_t c = order[g];
        weights[g] = components[0][c].weight;
        for (std::size_t s = 0; s < inputs.size(); ++s) {
            diag.component_losses[g] +=
                inv_batch * backward_accumulate(net, inputs[s], components[s][c].loss, grads[g], inv_batch, trace);
        }
    }

    if (n_components > 1) {
        AssignmentMatrix m = assignment_matrix(grads);
        diag.mean_phi = m.mean_upper();
        std::vector<ConflictPair> pairs = extract_conflicts(m);
        diag.conflict_count = static_cast<int>(pairs.size());
        if (enabled && !pairs.empty()) {
            ProjectionReport report;
            grads = resolve_conflicts(std::move(grads), pairs, &report, project_newer);
            diag.degenerate_pairs = report.degenerate_pairs;
        }
    }

    rule.step(net.params, combine(grads, weights));
    return diag;
}

}  // namespace contlab
