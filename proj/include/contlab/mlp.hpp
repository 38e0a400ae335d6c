#pragma once

#include <iosfwd>
#include <span>
#include <variant>

#include "contlab/numerics.hpp"

namespace contlab {

enum class Activation { relu, tanh };

// Half-open range of class indices [begin, end) within the shared output head.
struct ClassRange {
    int begin = 0;
    int end = 0;

    int size() const { return end - begin; }
    bool operator==(const ClassRange&) const = default;
};

struct MlpSpec {
    int input_dim = 0;
    std::vector<int> hidden_dims;
    int total_classes = 0;
    Activation activation = Activation::relu;

    void validate() const;
    int layer_count() const { return static_cast<int>(hidden_dims.size()) + 1; }
    // fan_in * fan_out + fan_out summed over layers.
    std::size_t param_count() const;
    bool operator==(const MlpSpec&) const = default;
};

// Fully-connected classifier. Parameters are stored flattened, per layer:
// weights row-major (out x in), then biases.
struct Network {
    MlpSpec spec;
    Vec params;
};

// Frozen copy of a trained classifier together with the class prefix it was
// responsible for at freeze time. Outputs are bit-stable across calls.
class Snapshot {
public:
    Snapshot(const Network& net, ClassRange covered);

    const MlpSpec& spec() const { return spec_; }
    const Vec& params() const { return params_; }
    ClassRange covered_classes() const { return covered_; }

private:
    MlpSpec spec_;
    Vec params_;
    ClassRange covered_;
};

// Cross-entropy on softmax(logits[range]) at unit temperature.
struct CeLoss {
    int label = 0;  // index into the full head, must lie inside range
    ClassRange range;
};

// KL(target || softmax(logits[range] / temperature)).
struct KlLoss {
    ProbVec target;
    ClassRange range;
    double temperature = 1.0;
};

using LossSpec = std::variant<CeLoss, KlLoss>;

// Per-layer forward intermediates, reusable across calls to avoid churn in
// training loops.
struct ForwardTrace {
    std::vector<Vec> pre;  // pre-activation per layer (last entry = logits)
    std::vector<Vec> act;  // post-activation per hidden layer
    Vec dlogits;
    Vec delta;
    Vec delta_next;
};

Network init_network(const MlpSpec& spec, std::uint64_t seed);

Vec forward(const MlpSpec& spec, std::span<const double> params, std::span<const double> x);
inline Vec forward(const Network& net, std::span<const double> x) { return forward(net.spec, net.params, x); }
inline Vec forward(const Snapshot& snap, std::span<const double> x) { return forward(snap.spec(), snap.params(), x); }

double loss_value(const Network& net, std::span<const double> x, const LossSpec& loss);

// Exact gradient of the scalar loss with respect to the flattened parameters;
// adds grad scaled by `scale` into grad_accum and returns the loss value.
double backward_accumulate(const Network& net, std::span<const double> x, const LossSpec& loss,
                           std::span<double> grad_accum, double scale, ForwardTrace& trace);

Vec backward(const Network& net, std::span<const double> x, const LossSpec& loss);

Snapshot make_snapshot(const Network& net, ClassRange covered);

// Bit-exact snapshot round trip; format is an internal binary record.
void save_snapshot(const Snapshot& snap, std::ostream& out);
Snapshot load_snapshot(std::istream& in);
void save_snapshot_file(const Snapshot& snap, const std::string& path);
Snapshot load_snapshot_file(const std::string& path);

std::uint64_t param_digest(const Vec& params);

}  // namespace contlab
