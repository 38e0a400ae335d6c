#include "contlab/numerics.hpp"

#include <algorithm>
#include <cmath>

namespace contlab {

ProbVec softmax(std::span<const double> logits, double temperature) {
    if (logits.empty()) fail(Errc::dimension, "softmax: empty logits");
    if (!(temperature > 0.0)) fail(Errc::range, "softmax: temperature must be positive");
    double max_logit = logits[0];
    for (double z : logits) {
        if (!std::isfinite(z)) fail(Errc::numeric, "softmax: non-finite logit");
        max_logit = std::max(max_logit, z);
    }
    ProbVec out;
    out.p.resize(logits.size());
    double sum = 0.0;
    for (std::size_t i = 0; i < logits.size(); ++i) {
        out.p[i] = std::exp((logits[i] - max_logit) / temperature);
        sum += out.p[i];
    }
    for (double& v : out.p) v /= sum;
    return out;
}

double kl_divergence(const ProbVec& p, const ProbVec& q) {
    if (p.size() != q.size()) fail(Errc::dimension, "kl_divergence: length mismatch");
    double acc = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        if (p.p[i] <= 0.0) continue;
        acc += p.p[i] * std::log(p.p[i] / std::max(q.p[i], kLogClamp));
    }
    return acc;
}

double cross_entropy(const ProbVec& p, std::size_t label) {
    if (label >= p.size()) fail(Errc::index, "cross_entropy: label out of range");
    return -std::log(std::max(p.p[label], kLogClamp));
}

double dot(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) fail(Errc::dimension, "dot: length mismatch");
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
    return acc;
}

double norm(std::span<const double> a) { return std::sqrt(dot(a, a)); }

double cosine_similarity(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) fail(Errc::dimension, "cosine_similarity: length mismatch");
    double na = norm(a);
    double nb = norm(b);
    if (na < kDegenerateNorm || nb < kDegenerateNorm) return 0.0;
    return dot(a, b) / (na * nb);
}

}  // namespace contlab
