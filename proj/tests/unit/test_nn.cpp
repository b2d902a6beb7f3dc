#include <doctest.h>

#include <cmath>
#include <random>

#include "fedsim/error.hpp"
#include "fedsim/nn/autodiff.hpp"
#include "fedsim/nn/gradcheck.hpp"
#include "fedsim/nn/layers.hpp"
#include "fedsim/nn/loss.hpp"
#include "fedsim/nn/optim.hpp"

using namespace fedsim;
using namespace fedsim::nn;

namespace {

Tensor random_matrix(std::size_t r, std::size_t c, std::mt19937_64& rng) {
    std::normal_distribution<double> g(0.0, 1.0);
    Tensor t({r, c});
    for (double& v : t.data()) v = g(rng);
    return t;
}

double relu_d(double v) { return v > 0.0 ? v : 0.0; }

}  // namespace

TEST_CASE("tensor shape bookkeeping") {
    Tensor t({2, 3}, 1.5);
    CHECK(t.size() == 6);
    CHECK(t.rows() == 2);
    CHECK(t.cols() == 3);
    CHECK(t(1, 2) == 1.5);
    CHECK_THROWS(Tensor({2, 2}, std::vector<double>{1, 2, 3}));
    CHECK(Tensor::matrix(1, 2, {1, 2}).shape_string() == "(1, 2)");
}

TEST_CASE("param set keeps insertion order and rejects duplicates") {
    ParamSet p("s");
    p.add("b", Tensor({1, 1}));
    p.add("a", Tensor({2, 2}));
    CHECK(p.begin()->first == "b");
    CHECK(p.at("a").grad.same_shape(p.at("a").value));
    CHECK_THROWS_AS(p.add("a", Tensor({1, 1})), ConfigError);
    CHECK_THROWS_AS(p.at("zz"), ConfigError);
    CHECK(p.num_scalars() == 5);
}

TEST_CASE("mlp forward: identity affine layer") {
    ParamSet p("m");
    MlpSpec spec;
    spec.name = "id";
    spec.input_width = 2;
    spec.layers = {{2, Activation::identity}};
    p.add("id.W0", Tensor::matrix(2, 2, {1, 0, 0, 1}));
    p.add("id.b0", Tensor({1, 2}));
    Tape tape;
    Var y = mlp_forward(tape, p, spec, tape.constant(Tensor::matrix(1, 2, {1, 2})), false);
    CHECK(y.value() == Tensor::matrix(1, 2, {1, 2}));
}

TEST_CASE("mlp forward: zero weights give zero output") {
    std::mt19937_64 rng(1);
    auto spec = MlpSpec::one_hidden("z", 3, 4, 2);
    ParamSet p("m");
    init_mlp(p, spec, rng);
    for (auto& [name, param] : p) param.value.fill(0.0);
    Tape tape;
    Var y = mlp_forward(tape, p, spec, tape.constant(random_matrix(5, 3, rng)), false);
    for (double v : y.value().data()) CHECK(v == 0.0);
}

TEST_CASE("mlp forward: 2-3-1 against a straight-line evaluation") {
    std::mt19937_64 rng(0);
    auto spec = MlpSpec::one_hidden("h", 2, 3, 1);
    ParamSet p("m");
    init_mlp(p, spec, rng);
    p.at("h.b0").value = Tensor::matrix(1, 3, {0.1, -0.2, 0.3});
    p.at("h.b1").value = Tensor::matrix(1, 1, {0.05});
    const Tensor& w0 = p.at("h.W0").value;
    const Tensor& b0 = p.at("h.b0").value;
    const Tensor& w1 = p.at("h.W1").value;
    const Tensor& b1 = p.at("h.b1").value;
    double expected = b1[0];
    for (int j = 0; j < 3; ++j) expected += w1(j, 0) * relu_d(w0(0, j) * 1.0 + w0(1, j) * 1.0 + b0[j]);
    Tape tape;
    Var y = mlp_forward(tape, p, spec, tape.constant(Tensor::matrix(1, 2, {1, 1})), false);
    CHECK(y.value()[0] == doctest::Approx(expected).epsilon(1e-14));
}

TEST_CASE("mlp forward: dimension error names the layer") {
    std::mt19937_64 rng(0);
    auto spec = MlpSpec::one_hidden("h", 2, 3, 1);
    ParamSet p("m");
    init_mlp(p, spec, rng);
    Tape tape;
    try {
        mlp_forward(tape, p, spec, tape.constant(Tensor({1, 3})), false);
        FAIL("expected a dimension error");
    } catch (const DimensionError& e) {
        CHECK(std::string(e.what()).find("layer 0") != std::string::npos);
    }
}

TEST_CASE("conv k x 1: identity kernel, constant rows, hand oracle") {
    ParamSet p("m");
    ConvSpec spec{"c", 1, 1};
    p.add("c.kernel", Tensor::matrix(1, 1, {1}));
    p.add("c.bias", Tensor({1, 1}));
    Tensor x = Tensor::matrix(3, 2, {1, 2, 3, 4, 5, 6});
    {
        Tape tape;
        Var y = conv_k1_forward(tape, p, spec, tape.constant(x), 3);
        CHECK(y.value().data().size() == 6);
        for (std::size_t i = 0; i < 6; ++i) CHECK(y.value()[i] == x[i]);
    }
    ParamSet q("m");
    ConvSpec spec2{"c", 2, 1};
    q.add("c.kernel", Tensor::matrix(1, 2, {0.5, -2.0}));
    q.add("c.bias", Tensor::matrix(1, 1, {0.25}));
    {
        // constant rows along K
        Tape tape;
        Var y = conv_k1_forward(tape, q, spec2, tape.constant(Tensor::matrix(3, 2, {7, 1, 7, 1, 7, 1})), 3);
        CHECK(y.value()[0] == y.value()[2]);
        CHECK(y.value()[1] == y.value()[3]);
    }
    {
        // K=3, l_m=2, k_conv=2 sliding window
        Tape tape;
        Var y = conv_k1_forward(tape, q, spec2, tape.constant(x), 3);
        for (std::size_t pos = 0; pos < 2; ++pos)
            for (std::size_t f = 0; f < 2; ++f) {
                const double want = 0.25 + 0.5 * x(pos, f) - 2.0 * x(pos + 1, f);
                CHECK(y.value()[pos * 2 + f] == doctest::Approx(want));
            }
    }
    Tape tape;
    CHECK_THROWS_AS(conv_k1_forward(tape, q, ConvSpec{"c", 4, 1}, tape.constant(x), 3), ConfigError);
}

TEST_CASE("conv never mixes feature columns") {
    std::mt19937_64 rng(3);
    ConvSpec spec{"c", 2, 3};
    ParamSet p("m");
    init_conv(p, spec, rng);
    Tensor x = random_matrix(4, 3, rng);
    Tensor xs({4, 3});
    const std::size_t perm[] = {2, 0, 1};
    for (std::size_t r = 0; r < 4; ++r)
        for (std::size_t c = 0; c < 3; ++c) xs(r, c) = x(r, perm[c]);
    Tape t1, t2;
    const Tensor a = conv_k1_forward(t1, p, spec, t1.constant(x), 4).value();
    const Tensor b = conv_k1_forward(t2, p, spec, t2.constant(xs), 4).value();
    const std::size_t positions = 3;
    for (std::size_t ch = 0; ch < 3; ++ch)
        for (std::size_t pos = 0; pos < positions; ++pos)
            for (std::size_t c = 0; c < 3; ++c)
                CHECK(b[(ch * positions + pos) * 3 + c] == doctest::Approx(a[(ch * positions + pos) * 3 + perm[c]]));
}

TEST_CASE("backward: linear case and unused parameter") {
    ParamSet p("m");
    p.add("W", Tensor::matrix(2, 1, {0.3, -0.7}));
    p.add("unused", Tensor::matrix(1, 1, {4.0}));
    Tape tape;
    Tensor x = Tensor::matrix(3, 2, {1, 2, 3, 4, 5, 6});
    Var loss = sum(matmul(tape.constant(x), tape.param(p.at("W"))));
    tape.backward(loss);
    CHECK(p.at("W").grad[0] == doctest::Approx(9.0));
    CHECK(p.at("W").grad[1] == doctest::Approx(12.0));
    CHECK(p.at("unused").grad[0] == 0.0);
}

TEST_CASE("backward state errors and marked inputs") {
    Tape empty;
    CHECK_THROWS_AS(empty.backward(Var{}), StateError);
    Tape tape;
    Var x = tape.input(Tensor::matrix(1, 2, {1, 2}));
    CHECK_THROWS_AS(tape.grad(x), StateError);
    Var l = sum(scale(x, 3.0));
    tape.backward(l);
    CHECK(tape.grad(x) == Tensor::matrix(1, 2, {3, 3}));
    CHECK_THROWS_AS(tape.backward(l), StateError);
}

TEST_CASE("grad check: affine exact, MLP with sigmoid, every op") {
    std::mt19937_64 rng(11);
    ParamSet p("m");
    p.add("W", random_matrix(3, 2, rng));
    p.add("b", random_matrix(1, 2, rng));
    Tensor x = random_matrix(4, 3, rng);
    auto affine = tape_closure([&](Tape& t) { return sum(add_bias(matmul(t.constant(x), t.param(p.at("W"))), t.param(p.at("b")))); });
    CHECK(grad_check(affine, {&p}).max_relative_error < 1e-8);

    auto spec = MlpSpec::one_hidden("h", 2, 4, 1, Activation::sigmoid);
    ParamSet q("q");
    init_mlp(q, spec, rng);
    Tensor xi = random_matrix(6, 2, rng), y = random_matrix(6, 1, rng);
    auto mlp = tape_closure([&](Tape& t) { return loss(mlp_forward(t, q, spec, t.constant(xi), false), y, LossKind::mse); });
    CHECK(grad_check(mlp, {&q}).max_relative_error < 1e-4);

    // Exercises concat, repeat, scale_rows, permute, group_mean, conv and softmax CE.
    ParamSet r("r");
    r.add("a", random_matrix(2, 2, rng));
    r.add("w", random_matrix(6, 1, rng));
    r.add("k", random_matrix(2, 2, rng));
    r.add("kb", random_matrix(1, 2, rng));
    Tensor base = random_matrix(6, 1, rng);
    Tensor classes = Tensor::matrix(2, 1, {1, 0});
    auto mixed = tape_closure([&](Tape& t) {
        Var rep = repeat_rows(t.param(r.at("a")), 3);
        Var cat = concat_cols(rep, t.constant(base));
        Var wt = scale_rows(cat, sigmoid(t.param(r.at("w"))));
        Var perm = permute_rows(relu(wt), {2, 0, 1, 5, 3, 4});
        Var conv = conv_rows(perm, t.param(r.at("k")), t.param(r.at("kb")), 3);
        Var gm = group_mean(perm, 3);
        Var logits = concat_cols(matmul(conv, t.constant(Tensor({conv.value().cols(), 2}, 0.1))), gm);
        return add(loss(logits, classes, LossKind::softmax_cross_entropy), mean(gm));
    });
    CHECK(grad_check(mixed, {&r}).max_relative_error < 1e-4);
}

TEST_CASE("grad check: random 2-4-1 MLP + MSE") {
    std::mt19937_64 rng(5);
    auto spec = MlpSpec::one_hidden("h", 2, 4, 1);
    ParamSet p("m");
    init_mlp(p, spec, rng);
    Tensor x = random_matrix(8, 2, rng), y = random_matrix(8, 1, rng);
    auto c = tape_closure([&](Tape& t) { return loss(mlp_forward(t, p, spec, t.constant(x), false), y, LossKind::mse); });
    CHECK(grad_check(c, {&p}, 1e-5).max_relative_error < 1e-4);
}

TEST_CASE("grad check rejects dropout and non-finite losses") {
    std::mt19937_64 rng(5);
    ParamSet p("m");
    p.add("w", Tensor::matrix(1, 1, {1.0}));
    auto drop = tape_closure([&](Tape& t) { return sum(dropout(t.param(p.at("w")), 0.5, &rng, true)); });
    CHECK_THROWS_AS(grad_check(drop, {&p}), DeterminismError);
    auto nan = tape_closure([&](Tape& t) { return scale(sum(t.param(p.at("w"))), std::nan("")); });
    CHECK_THROWS_AS(grad_check(nan, {&p}), NumericError);
}

TEST_CASE("dropout is the identity outside training") {
    std::mt19937_64 rng(1);
    Tape tape;
    Tensor x = random_matrix(3, 3, rng);
    CHECK(dropout(tape.constant(x), 0.5, &rng, false).value() == x);
    CHECK_FALSE(tape.stochastic());
}

TEST_CASE("losses: analytic values") {
    Tape tape;
    CHECK(loss(tape.constant(Tensor::matrix(2, 1, {1, 2})), Tensor::matrix(2, 1, {1, 2}), LossKind::mse).value()[0] == 0.0);
    CHECK(loss(tape.constant(Tensor::matrix(1, 1, {0.5})), Tensor::matrix(1, 1, {1}), LossKind::binary_cross_entropy)
              .value()[0] == doctest::Approx(std::log(2.0)));
    CHECK(loss(tape.constant(Tensor({1, 3})), Tensor::matrix(1, 1, {0}), LossKind::softmax_cross_entropy).value()[0] ==
          doctest::Approx(std::log(3.0)));
    CHECK_THROWS_AS(parse_loss_kind("hinge"), ConfigError);
}

TEST_CASE("optimizers") {
    SUBCASE("sgd arithmetic") {
        ParamSet p("s");
        p.add("t", Tensor::matrix(1, 1, {1.0})).grad[0] = 2.0;
        OptimizerConfig c;
        c.kind = OptimizerKind::sgd;
        c.learning_rate = 0.1;
        Optimizer(c).step(p, 1);
        CHECK(p.at("t").value[0] == doctest::Approx(0.8));
    }
    SUBCASE("zero gradient is the identity for every variant") {
        for (auto kind : {OptimizerKind::sgd, OptimizerKind::adam, OptimizerKind::lamb}) {
            ParamSet p("s");
            p.add("t", Tensor::matrix(1, 2, {0.3, -1.2}));
            OptimizerConfig c;
            c.kind = kind;
            Optimizer opt(c);
            opt.step(p, 1);
            opt.step(p, 2);
            CHECK(p.at("t").value == Tensor::matrix(1, 2, {0.3, -1.2}));
        }
    }
    SUBCASE("adam first step") {
        ParamSet p("s");
        p.add("t", Tensor::matrix(1, 1, {0.5})).grad[0] = 1.0;
        OptimizerConfig c;
        c.kind = OptimizerKind::adam;
        c.learning_rate = 1e-3;
        c.epsilon = 1e-8;
        Optimizer(c).step(p, 1);
        // m_hat = 1, v_hat = 1
        CHECK(p.at("t").value[0] == doctest::Approx(0.5 - 1e-3 / (1.0 + 1e-8)).epsilon(1e-12));
    }
    SUBCASE("lamb trust ratio") {
        ParamSet p("s");
        Param& t = p.add("t", Tensor::matrix(1, 2, {3.0, 4.0}));
        t.grad = Tensor::matrix(1, 2, {1.0, 1.0});
        OptimizerConfig c;
        c.epsilon = 1e-12;
        c.learning_rate = 0.01;
        Optimizer(c).step(p, 1);
        // r = (1, 1), ||theta|| = 5, ||r|| = sqrt(2), ratio clipped to 10 is not reached
        const double ratio = 5.0 / std::sqrt(2.0);
        CHECK(p.at("t").value[0] == doctest::Approx(3.0 - 0.01 * ratio));
    }
    SUBCASE("nan gradient names the parameter") {
        ParamSet p("set");
        p.add("bad", Tensor::matrix(1, 1, {1.0})).grad[0] = std::nan("");
        Optimizer opt{OptimizerConfig{}};
        try {
            opt.step(p, 1);
            FAIL("expected a numeric error");
        } catch (const NumericError& e) {
            CHECK(std::string(e.what()).find("bad") != std::string::npos);
        }
    }
    SUBCASE("config validation") {
        OptimizerConfig c;
        c.beta1 = 1.0;
        CHECK_THROWS_AS(c.validate(), ConfigError);
        c = {};
        c.weight_decay = -1.0;
        CHECK_THROWS_AS(c.validate(), ConfigError);
    }
}
