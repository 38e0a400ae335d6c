#include "contlab/mlp.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <ostream>

namespace contlab {

namespace {

double activate(double z, Activation act) {
    return act == Activation::relu ? (z > 0.0 ? z : 0.0) : std::tanh(z);
}

double activate_grad(double z, Activation act) {
    if (act == Activation::relu) return z > 0.0 ? 1.0 : 0.0;
    double t = std::tanh(z);
    return 1.0 - t * t;
}

void check_range(const ClassRange& r, int total_classes, const char* what) {
    if (r.begin < 0 || r.end > total_classes || r.begin >= r.end)
        fail(Errc::range, std::string(what) + ": invalid class range");
}

// Loss gradient with respect to the restricted softmax output, then pulled
// back through the softmax Jacobian. Handles the log clamps exactly: a
// clamped coordinate contributes zero slope.
void loss_dlogits(const LossSpec& loss, std::span<const double> logits, int total_classes, Vec& dlogits,
                  double* loss_out) {
    dlogits.assign(static_cast<std::size_t>(total_classes), 0.0);
    if (const auto* ce = std::get_if<CeLoss>(&loss)) {
        check_range(ce->range, total_classes, "ce loss");
        if (ce->label < ce->range.begin || ce->label >= ce->range.end)
            fail(Errc::range, "ce loss: label outside class range");
        auto restricted = logits.subspan(static_cast<std::size_t>(ce->range.begin),
                                         static_cast<std::size_t>(ce->range.size()));
        ProbVec q = softmax(restricted, 1.0);
        std::size_t local_label = static_cast<std::size_t>(ce->label - ce->range.begin);
        if (loss_out) *loss_out = cross_entropy(q, local_label);
        if (q.p[local_label] > kLogClamp) {
            for (int i = 0; i < ce->range.size(); ++i)
                dlogits[static_cast<std::size_t>(ce->range.begin + i)] = q.p[static_cast<std::size_t>(i)];
            dlogits[static_cast<std::size_t>(ce->label)] -= 1.0;
        }
        return;
    }
    const auto& kl = std::get<KlLoss>(loss);
    check_range(kl.range, total_classes, "kl loss");
    if (static_cast<int>(kl.target.size()) != kl.range.size())
        fail(Errc::dimension, "kl loss: target length does not match class range");
    auto restricted = logits.subspan(static_cast<std::size_t>(kl.range.begin),
                                     static_cast<std::size_t>(kl.range.size()));
    ProbVec q = softmax(restricted, kl.temperature);
    if (loss_out) *loss_out = kl_divergence(kl.target, q);
    // dL/dq_i = -p_i / max(q_i, clamp), zero once the clamp is active, then
    // dL/dz_j = q_j * (dL/dq_j - sum_i dL/dq_i q_i) / T.
    double weighted_sum = 0.0;
    Vec dq(q.size(), 0.0);
    for (std::size_t i = 0; i < q.size(); ++i) {
        if (kl.target.p[i] > 0.0 && q.p[i] > kLogClamp) dq[i] = -kl.target.p[i] / q.p[i];
        weighted_sum += dq[i] * q.p[i];
    }
    for (int i = 0; i < kl.range.size(); ++i) {
        std::size_t j = static_cast<std::size_t>(i);
        dlogits[static_cast<std::size_t>(kl.range.begin + i)] =
            q.p[j] * (dq[j] - weighted_sum) / kl.temperature;
    }
}

}  // namespace

void MlpSpec::validate() const {
    if (input_dim <= 0) fail(Errc::config, "mlp spec: input_dim must be positive");
    if (total_classes <= 0) fail(Errc::config, "mlp spec: total_classes must be positive");
    for (int h : hidden_dims)
        if (h <= 0) fail(Errc::config, "mlp spec: hidden dims must be positive");
}

std::size_t MlpSpec::param_count() const {
    std::size_t count = 0;
    int fan_in = input_dim;
    for (int h : hidden_dims) {
        count += static_cast<std::size_t>(fan_in) * static_cast<std::size_t>(h) + static_cast<std::size_t>(h);
        fan_in = h;
    }
    count += static_cast<std::size_t>(fan_in) * static_cast<std::size_t>(total_classes) +
             static_cast<std::size_t>(total_classes);
    return count;
}

Network init_network(const MlpSpec& spec, std::uint64_t seed) {
    spec.validate();
    Network net{spec, Vec(spec.param_count(), 0.0)};
    Rng rng = Rng::keyed({0x6e657477u, seed});  // init stream
    std::size_t offset = 0;
    int fan_in = spec.input_dim;
    for (int layer = 0; layer < spec.layer_count(); ++layer) {
        int fan_out = layer < static_cast<int>(spec.hidden_dims.size())
                          ? spec.hidden_dims[static_cast<std::size_t>(layer)]
                          : spec.total_classes;
        double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
        for (int i = 0; i < fan_out * fan_in; ++i) net.params[offset++] = rng.uniform(-bound, bound);
        offset += static_cast<std::size_t>(fan_out);  // biases stay zero
        fan_in = fan_out;
    }
    return net;
}

Vec forward(const MlpSpec& spec, std::span<const double> params, std::span<const double> x) {
    if (static_cast<int>(x.size()) != spec.input_dim) fail(Errc::dimension, "forward: input length mismatch");
    if (params.size() != spec.param_count()) fail(Errc::dimension, "forward: parameter length mismatch");
    Vec current(x.begin(), x.end());
    Vec next;
    std::size_t offset = 0;
    int fan_in = spec.input_dim;
    for (int layer = 0; layer < spec.layer_count(); ++layer) {
        bool output_layer = layer == static_cast<int>(spec.hidden_dims.size());
        int fan_out = output_layer ? spec.total_classes : spec.hidden_dims[static_cast<std::size_t>(layer)];
        next.assign(static_cast<std::size_t>(fan_out), 0.0);
        const double* w = params.data() + offset;
        const double* b = w + static_cast<std::size_t>(fan_out) * static_cast<std::size_t>(fan_in);
        for (int o = 0; o < fan_out; ++o) {
            double z = b[o];
            const double* row = w + static_cast<std::size_t>(o) * static_cast<std::size_t>(fan_in);
            for (int i = 0; i < fan_in; ++i) z += row[i] * current[static_cast<std::size_t>(i)];
            next[static_cast<std::size_t>(o)] = output_layer ? z : activate(z, spec.activation);
        }
        offset += static_cast<std::size_t>(fan_out) * static_cast<std::size_t>(fan_in) +
                  static_cast<std::size_t>(fan_out);
        current.swap(next);
        fan_in = fan_out;
    }
    return current;
}

double loss_value(const Network& net, std::span<const double> x, const LossSpec& loss) {
    Vec logits = forward(net, x);
    if (const auto* ce = std::get_if<CeLoss>(&loss)) {
        check_range(ce->range, net.spec.total_classes, "ce loss");
        if (ce->label < ce->range.begin || ce->label >= ce->range.end)
            fail(Errc::range, "ce loss: label outside class range");
        auto restricted = std::span<const double>(logits).subspan(
            static_cast<std::size_t>(ce->range.begin), static_cast<std::size_t>(ce->range.size()));
        return cross_entropy(softmax(restricted, 1.0), static_cast<std::size_t>(ce->label - ce->range.begin));
    }
    const auto& kl = std::get<KlLoss>(loss);
    check_range(kl.range, net.spec.total_classes, "kl loss");
    auto restricted = std::span<const double>(logits).subspan(static_cast<std::size_t>(kl.range.begin),
                                                              static_cast<std::size_t>(kl.range.size()));
    return kl_divergence(kl.target, softmax(restricted, kl.temperature));
}

double backward_accumulate(const Network& net, std::span<const double> x, const LossSpec& loss,
                           std::span<double> grad_accum, double scale, ForwardTrace& trace) {
    const MlpSpec& spec = net.spec;
    if (static_cast<int>(x.size()) != spec.input_dim) fail(Errc::dimension, "backward: input length mismatch");
    if (grad_accum.size() != net.params.size()) fail(Errc::dimension, "backward: gradient length mismatch");

    const int layers = spec.layer_count();
    trace.pre.resize(static_cast<std::size_t>(layers));
    trace.act.resize(static_cast<std::size_t>(layers));

    // Forward pass, recording pre-activations and activations.
    std::span<const double> input = x;
    std::size_t offset = 0;
    int fan_in = spec.input_dim;
    for (int layer = 0; layer < layers; ++layer) {
        bool output_layer = layer == layers - 1;
        int fan_out = output_layer ? spec.total_classes : spec.hidden_dims[static_cast<std::size_t>(layer)];
        Vec& pre = trace.pre[static_cast<std::size_t>(layer)];
        Vec& act = trace.act[static_cast<std::size_t>(layer)];
        pre.assign(static_cast<std::size_t>(fan_out), 0.0);
        act.assign(static_cast<std::size_t>(fan_out), 0.0);
        const double* w = net.params.data() + offset;
        const double* b = w + static_cast<std::size_t>(fan_out) * static_cast<std::size_t>(fan_in);
        for (int o = 0; o < fan_out; ++o) {
            double z = b[o];
            const double* row = w + static_cast<std::size_t>(o) * static_cast<std::size_t>(fan_in);
            for (int i = 0; i < fan_in; ++i) z += row[i] * input[static_cast<std::size_t>(i)];
            pre[static_cast<std::size_t>(o)] = z;
            act[static_cast<std::size_t>(o)] = output_layer ? z : activate(z, spec.activation);
        }
        offset += static_cast<std::size_t>(fan_out) * static_cast<std::size_t>(fan_in) +
                  static_cast<std::size_t>(fan_out);
        input = act;
        fan_in = fan_out;
    }

    double loss_out = 0.0;
    loss_dlogits(loss, trace.pre.back(), spec.total_classes, trace.dlogits, &loss_out);

    // Backward pass.
    trace.delta = trace.dlogits;
    for (int layer = layers - 1; layer >= 0; --layer) {
        int fan_out = layer == layers - 1 ? spec.total_classes : spec.hidden_dims[static_cast<std::size_t>(layer)];
        int in_dim = layer == 0 ? spec.input_dim : spec.hidden_dims[static_cast<std::size_t>(layer - 1)];
        offset -= static_cast<std::size_t>(fan_out) * static_cast<std::size_t>(in_dim) +
                  static_cast<std::size_t>(fan_out);
        const double* w = net.params.data() + offset;
        std::span<const double> layer_input =
            layer == 0 ? x : std::span<const double>(trace.act[static_cast<std::size_t>(layer - 1)]);

        double* gw = grad_accum.data() + offset;
        double* gb = gw + static_cast<std::size_t>(fan_out) * static_cast<std::size_t>(in_dim);
        for (int o = 0; o < fan_out; ++o) {
            double d = trace.delta[static_cast<std::size_t>(o)] * scale;
            if (d != 0.0) {
                double* grow = gw + static_cast<std::size_t>(o) * static_cast<std::size_t>(in_dim);
                for (int i = 0; i < in_dim; ++i) grow[i] += d * layer_input[static_cast<std::size_t>(i)];
            }
            gb[o] += d;
        }

        if (layer > 0) {
            trace.delta_next.assign(static_cast<std::size_t>(in_dim), 0.0);
            for (int o = 0; o < fan_out; ++o) {
                double d = trace.delta[static_cast<std::size_t>(o)];
                if (d == 0.0) continue;
                const double* row = w + static_cast<std::size_t>(o) * static_cast<std::size_t>(in_dim);
                for (int i = 0; i < in_dim; ++i) trace.delta_next[static_cast<std::size_t>(i)] += d * row[i];
            }
            const Vec& pre_prev = trace.pre[static_cast<std::size_t>(layer - 1)];
            for (int i = 0; i < in_dim; ++i)
                trace.delta_next[static_cast<std::size_t>(i)] *=
                    activate_grad(pre_prev[static_cast<std::size_t>(i)], spec.activation);
            trace.delta.swap(trace.delta_next);
        }
    }
    return loss_out;
}

Vec backward(const Network& net, std::span<const double> x, const LossSpec& loss) {
    Vec grad(net.params.size(), 0.0);
    ForwardTrace trace;
    backward_accumulate(net, x, loss, grad, 1.0, trace);
    return grad;
}

Snapshot::Snapshot(const Network& net, ClassRange covered) : spec_(net.spec), params_(net.params), covered_(covered) {
    if (covered.begin != 0 || covered.end <= 0 || covered.end > spec_.total_classes)
        fail(Errc::range, "snapshot: covered classes must be a prefix of the head");
}

Snapshot make_snapshot(const Network& net, ClassRange covered) { return Snapshot(net, covered); }

namespace {

constexpr char kSnapshotMagic[8] = {'C', 'L', 'S', 'N', 'A', 'P', '0', '1'};

template <typename T>
void write_pod(std::ostream& out, const T& value) {
    out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T read_pod(std::istream& in) {
    T value{};
    in.read(reinterpret_cast<char*>(&value), sizeof(T));
    if (!in) fail(Errc::parse, "snapshot: truncated record");
    return value;
}

}  // namespace

void save_snapshot(const Snapshot& snap, std::ostream& out) {
    out.write(kSnapshotMagic, sizeof(kSnapshotMagic));
    write_pod(out, static_cast<std::uint32_t>(snap.spec().input_dim));
    write_pod(out, static_cast<std::uint32_t>(snap.spec().hidden_dims.size()));
    for (int h : snap.spec().hidden_dims) write_pod(out, static_cast<std::uint32_t>(h));
    write_pod(out, static_cast<std::uint32_t>(snap.spec().total_classes));
    write_pod(out, static_cast<std::uint32_t>(snap.spec().activation == Activation::relu ? 0 : 1));
    write_pod(out, static_cast<std::int32_t>(snap.covered_classes().begin));
    write_pod(out, static_cast<std::int32_t>(snap.covered_classes().end));
    write_pod(out, static_cast<std::uint64_t>(snap.params().size()));
    out.write(reinterpret_cast<const char*>(snap.params().data()),
              static_cast<std::streamsize>(snap.params().size() * sizeof(double)));
    if (!out) fail(Errc::io, "snapshot: write failed");
}

Snapshot load_snapshot(std::istream& in) {
    char magic[8];
    in.read(magic, sizeof(magic));
    if (!in || std::memcmp(magic, kSnapshotMagic, sizeof(magic)) != 0)
        fail(Errc::parse, "snapshot: bad magic");
    MlpSpec spec;
    spec.input_dim = static_cast<int>(read_pod<std::uint32_t>(in));
    auto hidden_count = read_pod<std::uint32_t>(in);
    spec.hidden_dims.resize(hidden_count);
    for (std::uint32_t i = 0; i < hidden_count; ++i)
        spec.hidden_dims[i] = static_cast<int>(read_pod<std::uint32_t>(in));
    spec.total_classes = static_cast<int>(read_pod<std::uint32_t>(in));
    spec.activation = read_pod<std::uint32_t>(in) == 0 ? Activation::relu : Activation::tanh;
    ClassRange covered;
    covered.begin = read_pod<std::int32_t>(in);
    covered.end = read_pod<std::int32_t>(in);
    auto count = read_pod<std::uint64_t>(in);
    if (count != spec.param_count()) fail(Errc::parse, "snapshot: parameter count does not match spec");
    Network net{spec, Vec(count, 0.0)};
    in.read(reinterpret_cast<char*>(net.params.data()), static_cast<std::streamsize>(count * sizeof(double)));
    if (!in) fail(Errc::parse, "snapshot: truncated parameters");
    return Snapshot(net, covered);
}

void save_snapshot_file(const Snapshot& snap, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) fail(Errc::io, "snapshot: cannot open " + path + " for writing");
    save_snapshot(snap, out);
}

Snapshot load_snapshot_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(Errc::io, "snapshot: cannot open " + path);
    return load_snapshot(in);
}

std::uint64_t param_digest(const Vec& params) {
    return fnv1a(params.data(), params.size() * sizeof(double));
}

}  // namespace contlab
