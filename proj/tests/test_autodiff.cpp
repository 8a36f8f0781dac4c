#include "doctest.h"

#include <cmath>

#include "mapden/adam.hpp"
#include "mapden/errors.hpp"
#include "mapden/rng.hpp"
#include "mapden/tape.hpp"
#include "testutil.hpp"

using namespace mapden;
using ad::Tape;
using ad::Tensor;
using ad::VarId;

namespace {

Tensor random_tensor(ad::Shape shape, Prng& rng, bool requires_grad = true,
                     double lo = -1.0, double hi = 1.0) {
    Tensor t = Tensor::zeros(std::move(shape), requires_grad);
    for (double& v : t.data) v = rng.uniform(lo, hi);
    return t;
}

// Weighted sum with fixed weights turns any output into a scalar loss that
// exercises every element.
VarId weighted_sum(Tape& tape, VarId y, const std::vector<double>& weights) {
    Tensor w(tape.shape(y), weights);
    return tape.sum(tape.mul(y, tape.constant(std::move(w))));
}

} // namespace

TEST_CASE("conv1d matches hand values") {
    Tensor x({1, 1, 4}, {1, 2, 3, 4});
    Tensor w({1, 1, 2}, {1, 1});
    Tensor b({1}, {0});
    Tape tape;
    VarId y = tape.conv1d(tape.leaf(x), tape.leaf(w), tape.leaf(b), 1, 0);
    CHECK(tape.value(y) == std::vector<double>{3, 5, 7});

    // K=1 unit kernel is the identity
    Tensor k1({1, 1, 1}, {1});
    Tape tape2;
    VarId same = tape2.conv1d(tape2.leaf(x), tape2.leaf(k1), tape2.leaf(b), 1, 0);
    CHECK(tape2.value(same) == x.data);
}

TEST_CASE("conv1d matches the naive loop oracle on random shapes") {
    Prng rng(802);
    for (int inst = 0; inst < 20; ++inst) {
        const std::size_t B = 1 + rng.below(3);
        const std::size_t Cin = 1 + rng.below(4);
        const std::size_t Cout = 1 + rng.below(4);
        const std::size_t L = 6 + rng.below(12);
        const std::size_t K = 1 + rng.below(4);
        const std::size_t stride = 1 + rng.below(2);
        const std::size_t pad = rng.below(K);

        Tensor x = random_tensor({B, Cin, L}, rng);
        Tensor w = random_tensor({Cout, Cin, K}, rng);
        Tensor b = random_tensor({Cout}, rng);

        std::size_t lout = 0;
        const auto expect = testutil::naive_conv1d(x.data, B, Cin, L, w.data, Cout, K, b.data,
                                                   stride, pad, lout);
        Tape tape;
        VarId y = tape.conv1d(tape.leaf(x), tape.leaf(w), tape.leaf(b), stride, pad);
        REQUIRE(tape.shape(y) == ad::Shape{B, Cout, lout});
        for (std::size_t i = 0; i < expect.size(); ++i) {
            CHECK(tape.value(y)[i] == doctest::Approx(expect[i]).epsilon(1e-10));
        }
    }
}

TEST_CASE("conv_transpose1d matches hand overlap-add and the naive oracle") {
    Tensor x({1, 1, 2}, {1, 1});
    Tensor w({1, 1, 3}, {1, 1, 1});
    Tensor b({1}, {0});
    Tape tape;
    VarId y = tape.conv_transpose1d(tape.leaf(x), tape.leaf(w), tape.leaf(b), 2, 0);
    CHECK(tape.value(y) == std::vector<double>{1, 1, 2, 1, 1});

    Tensor k1({1, 1, 1}, {1});
    Tensor x2({1, 1, 5}, {5, 4, 3, 2, 1});
    Tape tape2;
    VarId same = tape2.conv_transpose1d(tape2.leaf(x2), tape2.leaf(k1), tape2.leaf(b), 1, 0);
    CHECK(tape2.value(same) == x2.data);

    Prng rng(4242);
    for (int inst = 0; inst < 20; ++inst) {
        const std::size_t B = 1 + rng.below(3);
        const std::size_t Cin = 1 + rng.below(4);
        const std::size_t Cout = 1 + rng.below(4);
        const std::size_t L = 4 + rng.below(10);
        const std::size_t K = 1 + rng.below(4);
        const std::size_t stride = 1 + rng.below(2);
        const std::size_t pad = std::min<std::size_t>(rng.below(K), ((L - 1) * stride + K - 1) / 2);

        Tensor xr = random_tensor({B, Cin, L}, rng);
        Tensor wr = random_tensor({Cin, Cout, K}, rng);
        Tensor br = random_tensor({Cout}, rng);
        std::size_t lout = 0;
        const auto expect = testutil::naive_conv_transpose1d(
            xr.data, B, Cin, L, wr.data, Cout, K, br.data, stride, pad, lout);
        Tape t;
        VarId yr = t.conv_transpose1d(t.leaf(xr), t.leaf(wr), t.leaf(br), stride, pad);
        REQUIRE(t.shape(yr) == ad::Shape{B, Cout, lout});
        for (std::size_t i = 0; i < expect.size(); ++i) {
            CHECK(t.value(yr)[i] == doctest::Approx(expect[i]).epsilon(1e-10));
        }
    }
}

TEST_CASE("conv_transpose1d is the adjoint of conv1d") {
    // <conv_t(x; W), y> == <x, conv(y; W)> for matching geometry.
    Prng rng(7);
    for (int inst = 0; inst < 10; ++inst) {
        const std::size_t B = 1 + rng.below(2);
        const std::size_t C1 = 1 + rng.below(3);
        const std::size_t C2 = 1 + rng.below(3);
        const std::size_t L = 5 + rng.below(8);
        const std::size_t K = 2 + rng.below(3);
        const std::size_t stride = 1 + rng.below(2);
        const std::size_t pad = rng.below(K);

        Tensor x = random_tensor({B, C1, L}, rng, false);
        Tensor w = random_tensor({C1, C2, K}, rng, false);
        Tensor zero_c2 = Tensor::zeros({C2});
        Tensor zero_c1 = Tensor::zeros({C1});

        Tape t1;
        VarId up = t1.conv_transpose1d(t1.leaf(x), t1.leaf(w), t1.leaf(zero_c2), stride, pad);
        const std::size_t lout = t1.shape(up)[2];
        Tensor y = random_tensor({B, C2, lout}, rng, false);

        double lhs = 0.0;
        for (std::size_t i = 0; i < y.data.size(); ++i) lhs += t1.value(up)[i] * y.data[i];

        // conv1d with the same array viewed as [Cout=C1, Cin=C2, K]
        Tensor w_conv({C1, C2, K}, w.data);
        Tape t2;
        VarId down = t2.conv1d(t2.leaf(y), t2.leaf(w_conv), t2.leaf(zero_c1), stride, pad);
        REQUIRE(t2.shape(down) == ad::Shape{B, C1, L});
        double rhs = 0.0;
        for (std::size_t i = 0; i < x.data.size(); ++i) rhs += x.data[i] * t2.value(down)[i];

        CHECK(lhs == doctest::Approx(rhs).epsilon(1e-9));
    }
}

TEST_CASE("elementwise op values") {
    Tensor x({4}, {-1.0, 0.0, 2.0, -0.5});
    Tape tape;
    VarId relu = tape.leaky_relu(tape.leaf(x));
    CHECK(tape.value(relu) == std::vector<double>{-0.01, 0.0, 2.0, -0.005});

    Tensor a({3}, {1, 2, 3});
    Tape t2;
    VarId fl = t2.reshape(t2.leaf(a), {3, 1});
    VarId back = t2.reshape(fl, {3});
    CHECK(t2.value(back) == a.data);
    CHECK_THROWS_AS((void)t2.reshape(fl, {4}), ShapeError);

    Tensor z({1}, {0.0}, true);
    Tape t3;
    VarId e = t3.exp(t3.leaf(z));
    CHECK(t3.value(e)[0] == 1.0);
    t3.backward(e);
    CHECK(z.grad[0] == 1.0); // d/dx exp(x) at 0
}

TEST_CASE("sum and square gradients match the book values") {
    Tensor x({3}, {1, 2, 3}, true);
    {
        Tape tape;
        VarId loss = tape.sum(tape.leaf(x));
        tape.backward(loss);
        CHECK(x.grad == std::vector<double>{1, 1, 1});
    }
    x.zero_grad();
    {
        Tape tape;
        VarId loss = tape.sum(tape.square(tape.leaf(x)));
        tape.backward(loss);
        CHECK(x.grad == std::vector<double>{2, 4, 6});
    }
}

TEST_CASE("gradients accumulate until zero_grad") {
    Tensor x({2}, {1.0, -2.0}, true);
    for (int pass = 0; pass < 2; ++pass) {
        Tape tape;
        tape.backward(tape.sum(tape.leaf(x)));
    }
    CHECK(x.grad == std::vector<double>{2, 2});
    x.zero_grad();
    CHECK(x.grad == std::vector<double>{0, 0});
}

TEST_CASE("backward twice raises GraphConsumed") {
    Tensor x({2}, {1.0, 2.0}, true);
    Tape tape;
    VarId loss = tape.sum(tape.leaf(x));
    tape.backward(loss);
    CHECK_THROWS_AS(tape.backward(loss), GraphConsumedError);
}

TEST_CASE("non-finite forward values raise, naming the op") {
    Tensor x({1}, {1000.0});
    Tape tape;
    try {
        (void)tape.exp(tape.leaf(x)); // exp(1000) overflows
        FAIL("expected NonFiniteError");
    } catch (const NonFiniteError& e) {
        CHECK(std::string(e.what()).find("exp") != std::string::npos);
    }
}

TEST_CASE("shape errors name both shapes") {
    Tensor a({2, 3}, {1, 2, 3, 4, 5, 6});
    Tensor b({3, 2}, {1, 2, 3, 4, 5, 6});
    Tape tape;
    try {
        (void)tape.add(tape.leaf(a), tape.leaf(b));
        FAIL("expected ShapeError");
    } catch (const ShapeError& e) {
        const std::string msg = e.what();
        CHECK(msg.find("[2,3]") != std::string::npos);
        CHECK(msg.find("[3,2]") != std::string::npos);
    }
}

TEST_CASE("every op passes a central finite-difference check") {
    Prng rng(90210);

    const auto check = [&](const char* name, auto&& build, std::vector<Tensor*> params) {
        for (Tensor* p : params) p->zero_grad();
        const auto loss_value = [&]() {
            Tape tape;
            return tape.scalar_value(build(tape));
        };
        const auto compute = [&]() {
            Tape tape;
            tape.backward(build(tape));
        };
        const double err = testutil::max_grad_rel_error(params, loss_value, compute);
        INFO(name);
        CHECK(err < 1e-3);
    };

    for (int inst = 0; inst < 20; ++inst) {
        Tensor x = random_tensor({2, 3, 9}, rng);
        Tensor w = random_tensor({2, 3, 3}, rng);
        Tensor b = random_tensor({2}, rng);
        std::vector<double> wsum(2 * 2 * 4);
        for (double& v : wsum) v = rng.uniform(-1, 1);
        check("conv1d", [&](Tape& t) {
            VarId y = t.conv1d(t.leaf(x), t.leaf(w), t.leaf(b), 2, 0);
            return weighted_sum(t, y, wsum);
        }, {&x, &w, &b});

        Tensor xt = random_tensor({2, 2, 4}, rng);
        Tensor wt = random_tensor({2, 3, 3}, rng);
        Tensor bt = random_tensor({3}, rng);
        std::vector<double> wsum_t(2 * 3 * 9);
        for (double& v : wsum_t) v = rng.uniform(-1, 1);
        check("conv_transpose1d", [&](Tape& t) {
            VarId y = t.conv_transpose1d(t.leaf(xt), t.leaf(wt), t.leaf(bt), 2, 0);
            return weighted_sum(t, y, wsum_t);
        }, {&xt, &wt, &bt});

        Tensor xl = random_tensor({3, 5}, rng);
        Tensor wl = random_tensor({4, 5}, rng);
        Tensor bl = random_tensor({4}, rng);
        std::vector<double> wsum_l(12);
        for (double& v : wsum_l) v = rng.uniform(-1, 1);
        check("linear", [&](Tape& t) {
            return weighted_sum(t, t.linear(t.leaf(xl), t.leaf(wl), t.leaf(bl)), wsum_l);
        }, {&xl, &wl, &bl});

        Tensor u = random_tensor({6}, rng);
        Tensor v = random_tensor({6}, rng);
        std::vector<double> wsum_e(6);
        for (double& vv : wsum_e) vv = rng.uniform(-1, 1);
        check("mul+add+sub", [&](Tape& t) {
            VarId m = t.mul(t.leaf(u), t.leaf(v));
            VarId s = t.sub(t.add(m, t.leaf(u)), t.leaf(v));
            return weighted_sum(t, s, wsum_e);
        }, {&u, &v});
        check("exp+square+scale", [&](Tape& t) {
            VarId e = t.exp(t.scale(t.leaf(u), 0.5));
            return weighted_sum(t, t.square(t.add_scalar(e, -0.25)), wsum_e);
        }, {&u});
        // leaky_relu FD is unreliable near 0; keep inputs away from the kink
        Tensor far = random_tensor({6}, rng);
        for (double& vv : far.data) vv += (vv >= 0 ? 0.5 : -0.5);
        check("leaky_relu", [&](Tape& t) {
            return weighted_sum(t, t.leaky_relu(t.leaf(far)), wsum_e);
        }, {&far});

        Tensor nr = random_tensor({2, 6}, rng);
        std::vector<double> wsum_n(2 * 3);
        for (double& vv : wsum_n) vv = rng.uniform(-1, 1);
        check("narrow", [&](Tape& t) {
            return weighted_sum(t, t.narrow(t.leaf(nr), 1, 3), wsum_n);
        }, {&nr});
        check("mean", [&](Tape& t) {
            return t.mean(t.square(t.leaf(nr)));
        }, {&nr});
    }
}

TEST_CASE("forward passes are deterministic") {
    Prng rng(1);
    Tensor x = random_tensor({2, 3, 16}, rng, false);
    Tensor w = random_tensor({4, 3, 5}, rng, false);
    Tensor b = random_tensor({4}, rng, false);
    Tape t1, t2;
    VarId y1 = t1.conv1d(t1.leaf(x), t1.leaf(w), t1.leaf(b), 2, 2);
    VarId y2 = t2.conv1d(t2.leaf(x), t2.leaf(w), t2.leaf(b), 2, 2);
    CHECK(t1.value(y1) == t2.value(y2));
}

TEST_CASE("adam first step moves by about lr per element") {
    Tensor w({3}, {0.0, 1.0, -1.0}, true);
    w.grad = {0.5, -2.0, 1e-3};
    ad::AdamState state;
    ad::AdamConfig cfg;
    cfg.lr = 0.1;
    const std::vector<double> before = w.data;
    adam_step({&w}, state, cfg);
    for (std::size_t i = 0; i < 3; ++i) {
        const double delta = w.data[i] - before[i];
        CHECK(std::abs(delta) <= cfg.lr * (1.0 + 1e-6));
        CHECK(delta * w.grad[i] < 0.0); // moves against the gradient
        CHECK(std::abs(delta) == doctest::Approx(cfg.lr).epsilon(1e-3));
    }
}

TEST_CASE("adam with zero gradient leaves parameters unchanged") {
    Tensor w({2}, {0.3, -0.7}, true);
    ad::AdamState state;
    adam_step({&w}, state, {});
    CHECK(w.data == std::vector<double>{0.3, -0.7});
}

TEST_CASE("adam converges on (w-3)^2") {
    Tensor w({1}, {0.0}, true);
    ad::AdamState state;
    ad::AdamConfig cfg;
    cfg.lr = 0.1;
    for (int step = 0; step < 200; ++step) {
        w.zero_grad();
        Tape tape;
        VarId loss = tape.sum(tape.square(tape.add_scalar(tape.leaf(w), -3.0)));
        tape.backward(loss);
        adam_step({&w}, state, cfg);
    }
    CHECK(std::abs(w.data[0] - 3.0) < 0.05);
}

TEST_CASE("adam rejects mismatched state") {
    Tensor a({2}, {0, 0}, true);
    Tensor b({3}, {0, 0, 0}, true);
    a.grad = {1, 1};
    b.grad = {1, 1, 1};
    ad::AdamState state;
    adam_step({&a}, state, {});
    CHECK_THROWS_AS(adam_step({&a, &b}, state, {}), ShapeError);
}
