#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "dlgn/optimizer.hpp"
#include "dlgn/tape.hpp"

#include <cmath>
#include <cstring>
#include <functional>

using namespace dlgn;

namespace {

Tensor random_tensor(Shape shape, Rng& rng, Scalar lo = -2.0, Scalar hi = 2.0) {
    Tensor t(std::move(shape));
    for (Index i = 0; i < t.size(); ++i) t[i] = rng.uniform(lo, hi);
    return t;
}

// Independent triple-loop product, kept free of the library's matmul path.
Tensor matmul_oracle(const Tensor& a, const Tensor& b) {
    Tensor y({a.dim(0), b.dim(1)});
    for (Index i = 0; i < a.dim(0); ++i)
        for (Index j = 0; j < b.dim(1); ++j) {
            Scalar acc = 0.0;
            for (Index k = 0; k < a.dim(1); ++k)
                acc += a.at({i, k}) * b.at({k, j});
            y.at({i, j}) = acc;
        }
    return y;
}

// Direct six-nested-loop cross-correlation with zero padding 1.
Tensor conv2d_oracle(const Tensor& x, const Tensor& k, const Tensor& bias) {
    const Index n = x.dim(0), ci = x.dim(1), h = x.dim(2), w = x.dim(3), co = k.dim(0);
    Tensor y({n, co, h, w});
    for (Index s = 0; s < n; ++s)
        for (Index o = 0; o < co; ++o)
            for (Index yy = 0; yy < h; ++yy)
                for (Index xx = 0; xx < w; ++xx) {
                    Scalar acc = bias.empty() ? 0.0 : bias[o];
                    for (Index c = 0; c < ci; ++c)
                        for (Index t = 0; t < 9; ++t) {
                            const Index dy = t / 3 - 1, dx = t % 3 - 1;
                            const Index sy = yy + dy, sx = xx + dx;
                            if (sy < 0 || sy >= h || sx < 0 || sx >= w) continue;
                            acc += x.at({s, c, sy, sx}) * k.at({o, c, dy + 1, dx + 1});
                        }
                    y.at({s, o, yy, xx}) = acc;
                }
    return y;
}

using LossFn = std::function<Scalar(const std::vector<Tensor>&)>;

// Central finite differences against the tape's gradients, h = 1e-5.
void check_gradients(const std::vector<Tensor>& inputs, const LossFn& eval,
                     const std::vector<Tensor>& grads, Scalar tol = 1e-6) {
    const Scalar h = 1e-5;
    for (std::size_t p = 0; p < inputs.size(); ++p) {
        for (Index i = 0; i < inputs[p].size(); ++i) {
            std::vector<Tensor> plus = inputs;
            std::vector<Tensor> minus = inputs;
            plus[p][i] += h;
            minus[p][i] -= h;
            const Scalar fd = (eval(plus) - eval(minus)) / (2.0 * h);
            const Scalar err = std::abs(grads[p][i] - fd) / std::max(std::abs(fd), 1.0);
            CAPTURE(p);
            CAPTURE(i);
            CHECK(err <= tol);
        }
    }
}

}  // namespace

TEST_CASE("matmul identity and hand sums") {
    Rng rng(7);
    Tensor m = random_tensor({3, 3}, rng);
    Tensor y = matmul(Tensor::identity(3), m);
    CHECK((y.array() - m.array()).abs().maxCoeff() == 0.0);

    Tensor a = Tensor::from({2, 2}, {1, 2, 3, 4});
    Tensor b = Tensor::from({2, 1}, {1, 1});
    Tensor c = matmul(a, b);
    CHECK(c.at({0, 0}) == 3.0);
    CHECK(c.at({1, 0}) == 7.0);
}

TEST_CASE("matmul vs triple-loop oracle") {
    Rng rng(11);
    for (int trial = 0; trial < 20; ++trial) {
        Tensor a = random_tensor({4, 5}, rng, -10.0, 10.0);
        Tensor b = random_tensor({5, 2}, rng, -10.0, 10.0);
        Tensor y = matmul(a, b);
        Tensor o = matmul_oracle(a, b);
        CHECK((y.array() - o.array()).abs().maxCoeff() <= 1e-12);
    }
}

TEST_CASE("matmul shape mismatch") {
    Tensor a({2, 3});
    Tensor b({4, 2});
    CHECK_THROWS_AS(matmul(a, b), DimensionError);
}

TEST_CASE("conv2d trivial cases") {
    Rng rng(3);
    Tensor x = random_tensor({2, 2, 4, 4}, rng);
    Tensor k0 = Tensor::zeros({3, 2, 3, 3});
    Tensor b = Tensor::from({3}, {0.5, -1.0, 2.0});
    Tensor y = conv2d(x, k0, b);
    for (Index n = 0; n < 2; ++n)
        for (Index c = 0; c < 3; ++c)
            for (Index i = 0; i < 16; ++i)
                CHECK(y[(n * 3 + c) * 16 + i] == b[c]);

    // center-tap-only kernel scales the input
    Tensor x1 = random_tensor({1, 1, 1, 1}, rng);
    Tensor kc = Tensor::zeros({1, 1, 3, 3});
    kc.at({0, 0, 1, 1}) = 2.5;
    Tensor y1 = conv2d(x1, kc, Tensor::zeros({1}));
    CHECK(y1[0] == doctest::Approx(2.5 * x1[0]).epsilon(1e-14));
}

TEST_CASE("conv2d vs nested-loop oracle") {
    Rng rng(5);
    for (int trial = 0; trial < 10; ++trial) {
        Tensor x = random_tensor({1, 2, 5, 5}, rng, -10.0, 10.0);
        Tensor k = random_tensor({3, 2, 3, 3}, rng, -10.0, 10.0);
        Tensor b = random_tensor({3}, rng, -10.0, 10.0);
        Tensor y = conv2d(x, k, b);
        Tensor o = conv2d_oracle(x, k, b);
        CHECK((y.array() - o.array()).abs().maxCoeff() <= 1e-12);
    }
}

TEST_CASE("conv2d channel mismatch") {
    Tensor x({1, 2, 4, 4});
    Tensor k({3, 5, 3, 3});
    CHECK_THROWS_AS(conv2d(x, k, Tensor()), DimensionError);
}

TEST_CASE("elementwise basics") {
    CHECK(sigmoid(Tensor::zeros({1}))[0] == 0.5);
    CHECK(sign(Tensor::zeros({3}))[1] == 0.0);
    CHECK(sign(Tensor::from({2}, {-3.0, 0.2}))[0] == -1.0);
    CHECK(gate_indicator(Tensor::from({2}, {0.0, 1e-12}))[0] == 0.0);
    CHECK(gate_indicator(Tensor::from({2}, {0.0, 1e-12}))[1] == 1.0);

    Tensor logits = Tensor::zeros({1, 10});
    CHECK(softmax_cross_entropy(logits, {4}).value() == doctest::Approx(std::log(10.0)).epsilon(1e-12));

    Tensor cmap = Tensor::full({2, 3, 4, 4}, 1.75);
    Tensor pooled = adaptive_avg_pool_1x1(cmap);
    for (Index i = 0; i < pooled.size(); ++i) CHECK(pooled[i] == doctest::Approx(1.75).epsilon(1e-14));

    CHECK_THROWS_AS(softmax_cross_entropy(Tensor::zeros({1, 4}), {7}), InputError);
}

TEST_CASE("backward: sum gives ones, sigmoid'(0) = 1/4") {
    Tape t;
    Var x = t.leaf(Tensor::from({2, 3}, {1, -2, 0.5, 3, 0, -1}));
    Var loss = sum(x);
    t.backward(loss);
    CHECK((x.grad().array() == 1.0).all());

    Tape t2;
    Var w = t2.leaf(Tensor::from({1, 2}, {1, 1}));
    Var v = t2.leaf(Tensor::from({2, 1}, {1, -1}));
    Var dot = matmul(w, v);  // exactly zero
    Var s = sum(sigmoid(dot));
    t2.backward(s);
    CHECK(t2.grad(dot.id)[0] == doctest::Approx(0.25).epsilon(1e-15));
}

TEST_CASE("backward requires scalar loss") {
    Tape t;
    Var x = t.leaf(Tensor::ones({3}));
    Var y = scale(x, 2.0);
    CHECK_THROWS_AS(t.backward(y), ContractError);
}

TEST_CASE("gradients of unused leaves are zero") {
    Tape t;
    Var x = t.leaf(Tensor::ones({2}));
    Var unused = t.leaf(Tensor::ones({4}));
    t.backward(sum(mul(x, x)));
    CHECK((unused.grad().array() == 0.0).all());
    CHECK(unused.grad().same_shape(unused.value()));
}

TEST_CASE("finite differences across the op suite") {
    Rng rng(17);

    SUBCASE("dense composite: matmul/add_bias/sigmoid/mul/mean") {
        std::vector<Tensor> in = {random_tensor({3, 4}, rng), random_tensor({4, 2}, rng),
                                  random_tensor({2}, rng), random_tensor({3, 2}, rng)};
        auto eval = [](const std::vector<Tensor>& v) {
            Tape t;
            Var a = t.leaf(v[0]), b = t.leaf(v[1]), c = t.leaf(v[2]), d = t.leaf(v[3]);
            Var y = mean(mul(sigmoid(add_bias(matmul(a, b), c)), d));
            return y.value().value();
        };
        Tape t;
        std::vector<Var> leaves;
        for (const Tensor& x : in) leaves.push_back(t.leaf(x));
        Var y = mean(mul(sigmoid(add_bias(matmul(leaves[0], leaves[1]), leaves[2])), leaves[3]));
        check_gradients(in, eval, gradients(t, y, leaves));
    }

    SUBCASE("tanh/softplus/scale/sub chain") {
        std::vector<Tensor> in = {random_tensor({5}, rng), random_tensor({5}, rng)};
        auto eval = [](const std::vector<Tensor>& v) {
            Tape t;
            Var a = t.leaf(v[0]), b = t.leaf(v[1]);
            Var y = sum(softplus(sub(tanh(scale(a, 1.7)), b)));
            return y.value().value();
        };
        Tape t;
        Var a = t.leaf(in[0]), b = t.leaf(in[1]);
        Var y = sum(softplus(sub(tanh(scale(a, 1.7)), b)));
        check_gradients(in, eval, gradients(t, y, {a, b}));
    }

    SUBCASE("conv2d + pool + softmax head") {
        std::vector<Tensor> in = {random_tensor({2, 2, 4, 4}, rng), random_tensor({3, 2, 3, 3}, rng),
                                  random_tensor({3}, rng), random_tensor({3, 2}, rng)};
        const std::vector<int> labels = {1, 0};
        auto eval = [&labels](const std::vector<Tensor>& v) {
            Tape t;
            Var x = t.leaf(v[0]), k = t.leaf(v[1]), b = t.leaf(v[2]), h = t.leaf(v[3]);
            Var y = softmax_cross_entropy(matmul(adaptive_avg_pool_1x1(conv2d(x, k, b)), h), labels);
            return y.value().value();
        };
        Tape t;
        std::vector<Var> leaves;
        for (const Tensor& x : in) leaves.push_back(t.leaf(x));
        Var y = softmax_cross_entropy(
            matmul(adaptive_avg_pool_1x1(conv2d(leaves[0], leaves[1], leaves[2])), leaves[3]), labels);
        check_gradients(in, eval, gradients(t, y, leaves));
    }

    SUBCASE("sigmoid_bce and scale_cols") {
        std::vector<Tensor> in = {random_tensor({4, 3}, rng), random_tensor({3, 1}, rng)};
        const std::vector<int> labels = {1, 0, 0, 1};
        const Tensor gate_mask = Tensor::from({3}, {1.0, 0.0, 1.0});
        auto eval = [&](const std::vector<Tensor>& v) {
            Tape t;
            Var a = t.leaf(v[0]), w = t.leaf(v[1]);
            Var y = sigmoid_bce(matmul(scale_cols(a, gate_mask), w), labels);
            return y.value().value();
        };
        Tape t;
        Var a = t.leaf(in[0]), w = t.leaf(in[1]);
        Var y = sigmoid_bce(matmul(scale_cols(a, gate_mask), w), labels);
        check_gradients(in, eval, gradients(t, y, {a, w}));
    }
}

TEST_CASE("backward linearity: d(l1 + l2) = d(l1) + d(l2)") {
    Rng rng(23);
    Tensor xv = random_tensor({3, 3}, rng);

    Tape t1;
    Var x1 = t1.leaf(xv);
    Var l1 = mean(mul(x1, x1));
    t1.backward(l1);
    Tensor g1 = x1.grad();

    Tape t2;
    Var x2 = t2.leaf(xv);
    Var l2 = sum(sigmoid(x2));
    t2.backward(l2);
    Tensor g2 = x2.grad();

    Tape t3;
    Var x3 = t3.leaf(xv);
    Var l3 = add(mean(mul(x3, x3)), sum(sigmoid(x3)));
    t3.backward(l3);

    CHECK((x3.grad().array() - (g1.array() + g2.array())).abs().maxCoeff() <= 1e-15);
}

TEST_CASE("ops are bitwise deterministic") {
    Rng rng(29);
    Tensor a = random_tensor({17, 31}, rng);
    Tensor b = random_tensor({31, 13}, rng);
    Tensor y1 = matmul(a, b);
    Tensor y2 = matmul(a, b);
    CHECK(std::memcmp(y1.data(), y2.data(), sizeof(Scalar) * static_cast<std::size_t>(y1.size())) == 0);

    Tensor x = random_tensor({2, 3, 8, 8}, rng);
    Tensor k = random_tensor({4, 3, 3, 3}, rng);
    Tensor c1 = conv2d(x, k, Tensor());
    Tensor c2 = conv2d(x, k, Tensor());
    CHECK(std::memcmp(c1.data(), c2.data(), sizeof(Scalar) * static_cast<std::size_t>(c1.size())) == 0);
}

TEST_CASE("optimizer: sgd and zero-gradient fixed points") {
    Tensor p = Tensor::from({2}, {1.0, -2.0});
    Tensor g = Tensor::from({2}, {0.5, 1.0});
    std::vector<Tensor*> params = {&p};
    OptimizerState st;
    OptimizerConfig cfg{OptimizerKind::Sgd, 0.1};
    optimizer_step(params, {g}, st, cfg);
    CHECK(p[0] == doctest::Approx(0.95).epsilon(1e-15));
    CHECK(p[1] == doctest::Approx(-2.1).epsilon(1e-15));

    for (OptimizerKind kind : {OptimizerKind::Sgd, OptimizerKind::Adam}) {
        Tensor q = Tensor::from({3}, {1.0, 2.0, 3.0});
        std::vector<Tensor*> qp = {&q};
        OptimizerState fresh;
        OptimizerConfig c2{kind, 0.1};
        optimizer_step(qp, {Tensor::zeros({3})}, fresh, c2);
        CHECK(q[0] == 1.0);
        CHECK(q[1] == 2.0);
        CHECK(q[2] == 3.0);
    }
}

TEST_CASE("optimizer: adaptive-moment first step vs hand reference") {
    Rng rng(31);
    Tensor p0 = random_tensor({6}, rng);
    Tensor g = random_tensor({6}, rng);
    Tensor p = p0;
    std::vector<Tensor*> params = {&p};
    OptimizerState st;
    OptimizerConfig cfg;  // adam defaults
    optimizer_step(params, {g}, st, cfg);

    for (Index i = 0; i < p.size(); ++i) {
        const Scalar m = (1.0 - cfg.beta1) * g[i];
        const Scalar v = (1.0 - cfg.beta2) * g[i] * g[i];
        const Scalar mhat = m / (1.0 - cfg.beta1);
        const Scalar vhat = v / (1.0 - cfg.beta2);
        const Scalar expect = p0[i] - cfg.lr * mhat / (std::sqrt(vhat) + cfg.eps);
        CHECK(std::abs(p[i] - expect) <= 1e-12);
    }
}

TEST_CASE("optimizer seed-for-seed determinism over a trajectory") {
    auto run = [] {
        Rng rng(123);
        Tensor p = random_tensor({8}, rng);
        OptimizerState st;
        OptimizerConfig cfg;
        std::vector<Tensor*> params = {&p};
        for (int i = 0; i < 25; ++i) {
            Tensor g = random_tensor({8}, rng);
            optimizer_step(params, {g}, st, cfg);
        }
        return p;
    };
    Tensor a = run();
    Tensor b = run();
    CHECK(std::memcmp(a.data(), b.data(), sizeof(Scalar) * 8) == 0);
}
