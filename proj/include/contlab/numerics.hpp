#pragma once

#include <span>

#include "contlab/common.hpp"

namespace contlab {

// Floor applied to clamp probabilities before taking logs, keeping divergence
// and cross-entropy finite on saturated softmax outputs.
inline constexpr double kLogClamp = 1e-12;

// Below this norm a gradient is treated as degenerate: cosine similarity with
// anything is defined as 0 and projections onto it are skipped.
inline constexpr double kDegenerateNorm = 1e-12;

// Probability distribution over a class set: entries in [0, 1], summing to 1
// within 1e-9.
struct ProbVec {
    Vec p;

    std::size_t size() const { return p.size(); }
    double operator[](std::size_t i) const { return p[i]; }
};

// Numerically stable softmax with max-subtraction.
ProbVec softmax(std::span<const double> logits, double temperature);

// KL(p || q) = sum_i p_i * ln(p_i / q_i), with q clamped at kLogClamp before
// the log and p_i == 0 terms contributing zero.
double kl_divergence(const ProbVec& p, const ProbVec& q);

// -ln(max(p[label], kLogClamp)).
double cross_entropy(const ProbVec& p, std::size_t label);

// <a, b> / (|a| |b|); 0 when either norm falls below kDegenerateNorm.
double cosine_similarity(std::span<const double> a, std::span<const double> b);

double dot(std::span<const double> a, std::span<const double> b);
double norm(std::span<const double> a);

}  // namespace contlab
