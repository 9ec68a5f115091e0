#include <doctest.h>

#include <cmath>
#include <functional>

#include "ourgan/autograd.hpp"
#include "ourgan/nn.hpp"
#include "ourgan/rng.hpp"

using namespace ourgan;
namespace ag = ourgan::ag;

namespace {

// Reference convolution, six explicit loops. Kept deliberately independent of
// the im2col path it checks.
Tensor conv_naive(const Tensor& x, const Tensor& w, const Tensor& b, int stride, int pad) {
    const int64_t n = x.dim(0), ci = x.dim(1), h = x.dim(2), wd = x.dim(3);
    const int64_t co = w.dim(0), kh = w.dim(2), kw = w.dim(3);
    const int64_t oh = (h + 2 * pad - kh) / stride + 1;
    const int64_t ow = (wd + 2 * pad - kw) / stride + 1;
    Tensor y({n, co, oh, ow});
    for (int64_t in = 0; in < n; ++in)
        for (int64_t oc = 0; oc < co; ++oc)
            for (int64_t i = 0; i < oh; ++i)
                for (int64_t j = 0; j < ow; ++j) {
                    double acc = b.numel() ? b[oc] : 0.0;
                    for (int64_t ic = 0; ic < ci; ++ic)
                        for (int64_t u = 0; u < kh; ++u)
                            for (int64_t v = 0; v < kw; ++v) {
                                int64_t ih = i * stride - pad + u;
                                int64_t iw = j * stride - pad + v;
                                if (ih < 0 || ih >= h || iw < 0 || iw >= wd) continue;
                                acc += static_cast<double>(x.at(in, ic, ih, iw)) *
                                       w.at(oc, ic, u, v);
                            }
                    y.at(in, oc, i, j) = static_cast<float>(acc);
                }
    return y;
}

double fd_slope(const std::function<double()>& f, float& cell, double eps) {
    const float orig = cell;
    cell = static_cast<float>(orig + eps);
    double lp = f();
    cell = static_cast<float>(orig - eps);
    double lm = f();
    cell = orig;
    return (lp - lm) / (2.0 * eps);
}

}  // namespace

TEST_CASE("conv2d forward matches the naive reference") {
    Rng rng(11);
    for (int stride : {1, 2}) {
        Tensor x = rng.normal_tensor({2, 3, 9, 7});
        Tensor w = rng.normal_tensor({4, 3, 3, 3}, 0.5f);
        Tensor b = rng.normal_tensor({4}, 0.1f);
        Tensor expected = conv_naive(x, w, b, stride, 1);
        ag::Var y = ag::conv2d(ag::constant(x), ag::constant(w), ag::constant(b), stride, 1);
        CHECK(y->val.same_shape(expected));
        CHECK(max_abs_diff(y->val, expected) < 1e-4f);
    }
}

TEST_CASE("conv2d gradients match finite differences") {
    Rng rng(12);
    Tensor xv = rng.normal_tensor({1, 2, 6, 5});
    Tensor wv = rng.normal_tensor({3, 2, 3, 3}, 0.5f);
    Tensor bv = rng.normal_tensor({3}, 0.1f);

    auto loss_of = [&]() -> double {
        ag::Var y = ag::conv2d(ag::constant(xv), ag::constant(wv), ag::constant(bv), 1, 1);
        return ag::sum(ag::square(y))->val[0];
    };

    ag::Var x = ag::leaf(xv), w = ag::leaf(wv), b = ag::leaf(bv);
    ag::Var loss = ag::sum(ag::square(ag::conv2d(x, w, b, 1, 1)));
    ag::GradMap grads = ag::backward(loss);
    Tensor gx = grads.tensor_at(x), gw = grads.tensor_at(w), gb = grads.tensor_at(b);

    Rng pick(1);
    for (int probe = 0; probe < 8; ++probe) {
        int64_t ix = pick.index(xv.numel());
        double fd = fd_slope(loss_of, xv.data()[ix], 1e-2);
        CHECK(gx[ix] == doctest::Approx(fd).epsilon(5e-3));
        int64_t iw = pick.index(wv.numel());
        fd = fd_slope(loss_of, wv.data()[iw], 1e-2);
        CHECK(gw[iw] == doctest::Approx(fd).epsilon(5e-3));
    }
    double fdb = fd_slope(loss_of, bv.data()[1], 1e-2);
    CHECK(gb[1] == doctest::Approx(fdb).epsilon(5e-3));
}

TEST_CASE("elementwise op gradients match finite differences") {
    Rng rng(13);
    Tensor xv = rng.normal_tensor({1, 1, 4, 4});
    // Keep preactivations away from the leaky_relu kink so central differences
    // stay on one side of it.
    for (int64_t i = 0; i < xv.numel(); ++i)
        if (std::fabs(xv[i]) < 0.2f) xv[i] = xv[i] < 0 ? -0.3f : 0.3f;

    auto build = [&](const ag::Var& x) {
        ag::Var a = ag::leaky_relu(x, 0.2f);
        ag::Var t = ag::tanh_(ag::scale(a, 0.5f));
        ag::Var e = ag::exp_(ag::scale(t, 0.3f));
        ag::Var s = ag::softplus(ag::sub(e, ag::constant(Tensor(e->val.dims(), 0.5f))));
        ag::Var q = ag::sqrt_(ag::add_scalar(ag::square(s), 0.1f));
        return ag::mean(ag::mul(q, ag::abs_(x)));
    };
    auto loss_of = [&]() -> double { return build(ag::constant(xv))->val[0]; };

    ag::Var x = ag::leaf(xv);
    ag::GradMap grads = ag::backward(build(x));
    Tensor gx = grads.tensor_at(x);

    for (int64_t i = 0; i < xv.numel(); ++i) {
        double fd = fd_slope(loss_of, xv.data()[i], 1e-3);
        CHECK(gx[i] == doctest::Approx(fd).epsilon(2e-2));
    }
}

TEST_CASE("resize and coordinate-channel ops are linear with exact adjoints") {
    Rng rng(14);
    Tensor xv = rng.normal_tensor({1, 3, 8, 6});

    auto build = [&](const ag::Var& x) {
        ag::Var up = ag::resize(x, 13, 9, ResampleKernel::Bicubic);
        ag::Var withc = ag::append_vcoord(up);
        return ag::sum(ag::square(withc));
    };
    auto loss_of = [&]() -> double { return build(ag::constant(xv))->val[0]; };

    ag::Var x = ag::leaf(xv);
    ag::GradMap grads = ag::backward(build(x));
    Tensor gx = grads.tensor_at(x);

    Rng pick(2);
    for (int probe = 0; probe < 10; ++probe) {
        int64_t i = pick.index(xv.numel());
        double fd = fd_slope(loss_of, xv.data()[i], 1e-2);
        CHECK(gx[i] == doctest::Approx(fd).epsilon(5e-3));
    }
}

TEST_CASE("vertical coordinate channel values") {
    CHECK(ag::vcoord_value(0, 1) == 0.0f);  // single row: midpoint convention
    CHECK(ag::vcoord_value(0, 2) == -1.0f);
    CHECK(ag::vcoord_value(1, 2) == 1.0f);
    CHECK(ag::vcoord_value(1, 4) == doctest::Approx(-1.0 / 3.0));
    CHECK(ag::vcoord_value(2, 4) == doctest::Approx(1.0 / 3.0));

    ag::Var x = ag::constant(Tensor({2, 3, 4, 5}, 0.0f));
    ag::Var y = ag::append_vcoord(x);
    CHECK(y->val.dim(1) == 4);
    for (int64_t n = 0; n < 2; ++n)
        for (int64_t h = 0; h < 4; ++h)
            for (int64_t w = 0; w < 5; ++w)
                CHECK(y->val.at(n, 3, h, w) == ag::vcoord_value(h, 4));
}

TEST_CASE("second-order gradients: d/dw of an input-gradient norm") {
    // P(w) = sum_j (d mean(D(x)) / dx_j)^2 for a two-layer conv critic.
    // The analytic dP/dw from double backward must match central differences
    // of P evaluated through the (already FD-verified) first backward.
    Rng rng(15);
    Tensor xv = rng.normal_tensor({1, 2, 6, 6});
    Tensor w1v = rng.normal_tensor({3, 2, 3, 3}, 0.4f);
    Tensor b1v = rng.normal_tensor({3}, 0.5f);
    Tensor w2v = rng.normal_tensor({1, 3, 3, 3}, 0.4f);
    Tensor b2v = rng.normal_tensor({1}, 0.5f);

    auto gp = [&](bool with_grad, ag::Var* w1_out, ag::Var* w2_out) -> ag::Var {
        ag::Var x = ag::leaf(xv, true);
        ag::Var w1 = ag::leaf(w1v, with_grad), b1 = ag::constant(b1v);
        ag::Var w2 = ag::leaf(w2v, with_grad), b2 = ag::constant(b2v);
        ag::Var h = ag::leaky_relu(ag::conv2d(x, w1, b1, 1, 1), 0.2f);
        ag::Var score = ag::mean(ag::conv2d(h, w2, b2, 1, 1));
        ag::GradMap inner = ag::backward(score);
        ag::Var gx = inner.at(x);
        REQUIRE(gx != nullptr);
        if (w1_out) *w1_out = w1;
        if (w2_out) *w2_out = w2;
        return ag::sum(ag::square(gx));
    };

    auto penalty_value = [&]() -> double { return gp(false, nullptr, nullptr)->val[0]; };

    ag::Var w1, w2;
    ag::Var penalty = gp(true, &w1, &w2);
    ag::GradMap outer = ag::backward(penalty);
    Tensor gw1 = outer.tensor_at(w1);
    Tensor gw2 = outer.tensor_at(w2);

    Rng pick(3);
    for (int probe = 0; probe < 6; ++probe) {
        int64_t i1 = pick.index(w1v.numel());
        double fd = fd_slope(penalty_value, w1v.data()[i1], 1e-2);
        CHECK(gw1[i1] == doctest::Approx(fd).epsilon(2e-2));
        int64_t i2 = pick.index(w2v.numel());
        fd = fd_slope(penalty_value, w2v.data()[i2], 1e-2);
        CHECK(gw2[i2] == doctest::Approx(fd).epsilon(2e-2));
    }
}

TEST_CASE("adam drives a quadratic to its minimum and respects clipping") {
    nn::Param p;
    p.name = "x";
    p.value = Tensor({2}, {5.0f, -3.0f});
    nn::Adam opt({.lr = 0.05f, .beta1 = 0.9f, .beta2 = 0.999f});
    for (int i = 0; i < 800; ++i) {
        nn::Binder bind(nn::Binder::Mode::Train);
        ag::Var x = bind.bind(p);
        ag::Var loss = ag::sum(ag::square(ag::sub(x, ag::constant(Tensor({2}, {1.0f, 2.0f})))));
        ag::GradMap grads = ag::backward(loss);
        opt.step(bind.bindings(), grads, 5.0f);
    }
    CHECK(p.value[0] == doctest::Approx(1.0).epsilon(1e-2));
    CHECK(p.value[1] == doctest::Approx(2.0).epsilon(1e-2));
}

TEST_CASE("kl divergence identities") {
    Tensor zeros({1, 4, 3, 3});
    ag::Var kl = nn::kl_divergence(ag::constant(zeros), ag::constant(zeros));
    CHECK(kl->val[0] == doctest::Approx(0.0));

    Rng rng(16);
    for (int trial = 0; trial < 5; ++trial) {
        ag::Var mu = ag::constant(rng.normal_tensor({1, 4, 3, 3}));
        ag::Var logvar = ag::constant(rng.normal_tensor({1, 4, 3, 3}, 0.5f));
        CHECK(nn::kl_divergence(mu, logvar)->val[0] >= 0.0f);
    }
}

TEST_CASE("frozen subgraphs are pruned from the tape") {
    Rng rng(17);
    ag::Var frozen = ag::leaf(rng.normal_tensor({1, 1, 4, 4}), false);
    ag::Var live = ag::leaf(rng.normal_tensor({1, 1, 4, 4}), true);
    ag::Var out = ag::mul(ag::tanh_(frozen), live);
    // The tanh node keeps no parents because nothing upstream needs gradients.
    CHECK(out->parents.size() == 2);
    CHECK(out->parents[0]->parents.empty());
    ag::GradMap g = ag::backward(ag::sum(out));
    CHECK(g.at(live) != nullptr);
    CHECK(g.at(frozen) == nullptr);
}
