#include <doctest.h>

#include <cstring>
#include <sstream>

#include "contlab/knowledge.hpp"
#include "oracles.hpp"

using namespace contlab;

namespace {

MlpSpec small_spec() {
    MlpSpec spec;
    spec.input_dim = 2;
    spec.hidden_dims = {4};
    spec.total_classes = 2;
    return spec;
}

}  // namespace

TEST_CASE("init: parameter count follows the fan-in/fan-out formula") {
    CHECK(small_spec().param_count() == 2 * 4 + 4 + 4 * 2 + 2);
    Network net = init_network(small_spec(), 0);
    CHECK(net.params.size() == 22);
}

TEST_CASE("init: deterministic per seed") {
    Network a = init_network(small_spec(), 42);
    Network b = init_network(small_spec(), 42);
    Network c = init_network(small_spec(), 43);
    CHECK(a.params == b.params);
    CHECK(a.params != c.params);
    for (double w : a.params) CHECK(std::abs(w) <= std::sqrt(6.0 / 6.0));
}

TEST_CASE("forward: zero weights give zero logits") {
    Network net{small_spec(), Vec(small_spec().param_count(), 0.0)};
    Vec logits = forward(net, Vec{0.3, -0.7});
    for (double z : logits) CHECK(z == 0.0);
}

TEST_CASE("forward: identity single layer passes non-negative input through relu") {
    MlpSpec spec;
    spec.input_dim = 3;
    spec.total_classes = 3;
    Network net{spec, Vec(spec.param_count(), 0.0)};
    // weights = I, biases = 0
    for (int i = 0; i < 3; ++i) net.params[static_cast<std::size_t>(i * 3 + i)] = 1.0;
    Vec x{0.5, 0.0, 2.0};
    CHECK(forward(net, x) == x);
}

TEST_CASE("forward: matches a straight-line matrix-product oracle") {
    Rng rng(1337);
    for (int trial = 0; trial < 10; ++trial) {
        Network net = oracles::random_net(rng, trial % 2 == 0 ? Activation::relu : Activation::tanh);
        Vec x(static_cast<std::size_t>(net.spec.input_dim));
        for (double& v : x) v = rng.uniform(-1.0, 1.0);
        Vec expected = oracles::reference_forward(net.spec, net.params, x);
        Vec actual = forward(net, x);
        REQUIRE(actual.size() == expected.size());
        for (std::size_t i = 0; i < actual.size(); ++i)
            CHECK(actual[i] == doctest::Approx(expected[i]).epsilon(1e-12));
    }
}

TEST_CASE("forward: dimension mismatch") {
    Network net = init_network(small_spec(), 1);
    CHECK_THROWS_AS(forward(net, Vec{1.0, 2.0, 3.0}), Error);
}

TEST_CASE("backward: matches central finite differences for both loss kinds") {
    Rng rng(555);
    for (Activation act : {Activation::relu, Activation::tanh}) {
        for (int trial = 0; trial < 6; ++trial) {
            Network net = oracles::random_net(rng, act);
            Vec x = oracles::differentiable_input(net, rng);
            const int classes = net.spec.total_classes;
            const ClassRange range{0, classes};

            LossSpec ce = CeLoss{static_cast<int>(rng.next_below(static_cast<std::uint64_t>(classes))), range};
            CHECK(oracles::max_relative_error(backward(net, x, ce),
                                              oracles::finite_difference_gradient(net, x, ce, 1e-5)) < 1e-4);

            Vec target_logits(static_cast<std::size_t>(classes));
            for (double& z : target_logits) z = rng.uniform(-1.0, 1.0);
            LossSpec kl = KlLoss{softmax(target_logits, 2.0), range, 2.0};
            CHECK(oracles::max_relative_error(backward(net, x, kl),
                                              oracles::finite_difference_gradient(net, x, kl, 1e-5)) < 1e-4);
        }
    }
}

TEST_CASE("backward: restricted class range matches finite differences and masks the rest") {
    Rng rng(77);
    Network net = oracles::random_net(rng, Activation::tanh);
    REQUIRE(net.spec.total_classes >= 3);
    Vec x = oracles::differentiable_input(net, rng);
    const ClassRange range{0, 2};
    LossSpec ce = CeLoss{1, range};
    CHECK(oracles::max_relative_error(backward(net, x, ce),
                                      oracles::finite_difference_gradient(net, x, ce, 1e-5)) < 1e-4);

    // Output-layer rows for classes outside the range receive no gradient.
    Vec grad = backward(net, x, ce);
    const int last_hidden = net.spec.hidden_dims.back();
    std::size_t head_offset = net.params.size() -
                              static_cast<std::size_t>(net.spec.total_classes * last_hidden + net.spec.total_classes);
    for (int c = range.end; c < net.spec.total_classes; ++c) {
        for (int i = 0; i < last_hidden; ++i)
            CHECK(grad[head_offset + static_cast<std::size_t>(c * last_hidden + i)] == 0.0);
        CHECK(grad[net.params.size() - static_cast<std::size_t>(net.spec.total_classes - c)] == 0.0);
    }
}

TEST_CASE("backward: zero at a loss minimum") {
    MlpSpec spec;
    spec.input_dim = 2;
    spec.total_classes = 2;
    Network net{spec, Vec(spec.param_count(), 0.0)};
    // Saturate the head so the true class holds all the probability mass.
    net.params[spec.param_count() - 2] = 60.0;  // bias of class 0

    LossSpec ce = CeLoss{0, ClassRange{0, 2}};
    CHECK(loss_value(net, Vec{0.1, 0.2}, ce) == doctest::Approx(0.0).epsilon(1e-15));
    CHECK(norm(backward(net, Vec{0.1, 0.2}, ce)) < 1e-8);
}

TEST_CASE("backward: KL gradient vanishes when the target equals the current output") {
    Rng rng(31);
    Network net = oracles::random_net(rng, Activation::tanh);
    Vec x(static_cast<std::size_t>(net.spec.input_dim));
    for (double& v : x) v = rng.uniform(-1.0, 1.0);
    const ClassRange range{0, net.spec.total_classes};
    ProbVec target = softmax(forward(net, x), 2.0);
    LossSpec kl = KlLoss{target, range, 2.0};
    CHECK(loss_value(net, x, kl) == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(norm(backward(net, x, kl)) < 1e-8);
}

TEST_CASE("backward: invalid ranges are rejected") {
    Network net = init_network(small_spec(), 3);
    CHECK_THROWS_AS(backward(net, Vec{0.1, 0.2}, CeLoss{5, ClassRange{0, 6}}), Error);
    CHECK_THROWS_AS(backward(net, Vec{0.1, 0.2}, CeLoss{0, ClassRange{1, 1}}), Error);
    CHECK_THROWS_AS(backward(net, Vec{0.1, 0.2}, CeLoss{1, ClassRange{0, 1}}), Error);
}

TEST_CASE("snapshot: immutable under later training of the source network") {
    Network net = init_network(small_spec(), 9);
    Snapshot snap = make_snapshot(net, ClassRange{0, 2});
    const std::uint64_t digest_before = param_digest(snap.params());
    Vec x{0.4, -0.2};
    Vec before = forward(snap, x);

    for (double& w : net.params) w += 1.0;

    Vec after = forward(snap, x);
    CHECK(before == after);
    CHECK(param_digest(snap.params()) == digest_before);
}

TEST_CASE("snapshot: untrained copy forwards exactly like the source") {
    Network net = init_network(small_spec(), 12);
    Snapshot snap = make_snapshot(net, ClassRange{0, 2});
    Vec x{-0.8, 0.1};
    CHECK(forward(net, x) == forward(snap, x));
}

TEST_CASE("snapshot: serialization round trip is bit-exact") {
    MlpSpec spec;
    spec.input_dim = 5;
    spec.hidden_dims = {7, 3};
    spec.total_classes = 4;
    spec.activation = Activation::tanh;
    Network net = init_network(spec, 2718);
    Snapshot snap = make_snapshot(net, ClassRange{0, 2});

    std::stringstream buffer;
    save_snapshot(snap, buffer);
    Snapshot loaded = load_snapshot(buffer);

    CHECK(loaded.spec() == snap.spec());
    CHECK(loaded.covered_classes() == snap.covered_classes());
    REQUIRE(loaded.params().size() == snap.params().size());
    CHECK(std::memcmp(loaded.params().data(), snap.params().data(),
                      snap.params().size() * sizeof(double)) == 0);
}

TEST_CASE("snapshot: corrupt records are rejected") {
    std::stringstream buffer("not a snapshot");
    CHECK_THROWS_AS(load_snapshot(buffer), Error);
}

TEST_CASE("forward is pure given parameters and input") {
    Network net = init_network(small_spec(), 64);
    Vec x{0.25, -0.5};
    CHECK(forward(net, x) == forward(net, x));
}
