#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "saldiff/kernels.hpp"
#include "saldiff/numerics.hpp"
#include "saldiff/rng.hpp"
#include "saldiff/tape.hpp"

using namespace saldiff;

namespace {

// Triple-loop reference, independent of the kernel implementations.
Tensor matmul_bruteforce(const Tensor& a, const Tensor& b) {
    Tensor c({a.rows(), b.cols()});
    for (int i = 0; i < a.rows(); ++i)
        for (int j = 0; j < b.cols(); ++j) {
            double s = 0.0;
            for (int k = 0; k < a.cols(); ++k) s += a.at(i, k) * b.at(k, j);
            c.at(i, j) = s;
        }
    return c;
}

}  // namespace

TEST_CASE("matmul identity and selector") {
    Tensor eye({2, 2}, {1, 0, 0, 1});
    Tensor m({2, 2}, {1, 2, 3, 4});
    Tensor r = matmul(eye, m);
    CHECK(r.data == m.data);

    Tensor sel({1, 2}, {1, 0});
    Tensor col({2, 1}, {0, 5});
    CHECK(matmul(sel, col).data[0] == 0.0);
}

TEST_CASE("matmul matches triple-loop oracle exactly") {
    SeededRng rng(7);
    Tensor a = rng.normal_tensor({3, 4});
    Tensor b = rng.normal_tensor({4, 2});
    Tensor got = matmul(a, b);
    Tensor want = matmul_bruteforce(a, b);
    for (size_t i = 0; i < got.data.size(); ++i) CHECK(got.data[i] == want.data[i]);
}

TEST_CASE("matmul rejects mismatched shapes") {
    Tensor a({2, 3});
    Tensor b({2, 2});
    CHECK_THROWS_AS(matmul(a, b), ShapeError);
}

TEST_CASE("parallel kernels bitwise-match serial references") {
    SeededRng rng(11);
    const int m = 37, k = 53, n = 29;
    Tensor a = rng.normal_tensor({m, k});
    Tensor b = rng.normal_tensor({k, n});
    Tensor bt = rng.normal_tensor({n, k});
    Tensor at = rng.normal_tensor({k, m});

    Tensor c1({m, n}), c2({m, n});
    kern::mm_nn(a.data.data(), b.data.data(), c1.data.data(), m, k, n);
    kern::mm_nn_serial(a.data.data(), b.data.data(), c2.data.data(), m, k, n);
    CHECK(c1.data == c2.data);

    kern::mm_nt(a.data.data(), bt.data.data(), c1.data.data(), m, k, n);
    kern::mm_nt_serial(a.data.data(), bt.data.data(), c2.data.data(), m, k, n);
    CHECK(c1.data == c2.data);

    kern::mm_tn(at.data.data(), b.data.data(), c1.data.data(), m, k, n);
    kern::mm_tn_serial(at.data.data(), b.data.data(), c2.data.data(), m, k, n);
    CHECK(c1.data == c2.data);

    Tensor x = rng.normal_tensor({64, 33});
    Tensor y1({64, 33}), y2({64, 33});
    kern::softmax_rows(x.data.data(), y1.data.data(), 64, 33);
    kern::softmax_rows_serial(x.data.data(), y2.data.data(), 64, 33);
    CHECK(y1.data == y2.data);
    kern::layer_norm_rows(x.data.data(), y1.data.data(), 64, 33, 1e-6);
    kern::layer_norm_rows_serial(x.data.data(), y2.data.data(), 64, 33, 1e-6);
    CHECK(y1.data == y2.data);
}

TEST_CASE("softmax basics") {
    Tensor z({2}, {0, 0});
    Tensor r = softmax(z);
    CHECK(r.data[0] == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(r.data[1] == doctest::Approx(0.5).epsilon(1e-15));

    // Saturation is stable thanks to max subtraction.
    Tensor big({2}, {1000, 0});
    Tensor rb = softmax(big);
    CHECK(std::abs(rb.data[0] - 1.0) < 1e-12);
    CHECK(std::abs(rb.data[1] - 0.0) < 1e-12);

    // High-precision direct reference.
    Tensor v({3}, {1, 2, 3});
    Tensor rv = softmax(v);
    double den = std::exp(1.0 - 3.0) + std::exp(2.0 - 3.0) + std::exp(0.0);
    for (int i = 0; i < 3; ++i)
        CHECK(rv.data[i] == doctest::Approx(std::exp(v.data[i] - 3.0) / den).epsilon(1e-14));
}

TEST_CASE("softmax rows sum to one for random tensors") {
    SeededRng rng(3);
    for (int trial = 0; trial < 50; ++trial) {
        int r = rng.uniform_int(1, 8), c = rng.uniform_int(1, 12);
        Tensor x = rng.uniform_tensor({r, c}, -30.0, 30.0);
        Tensor y = softmax(x);
        for (int i = 0; i < r; ++i) {
            double s = 0.0;
            for (int j = 0; j < c; ++j) {
                CHECK(y.at(i, j) >= 0.0);
                s += y.at(i, j);
            }
            CHECK(std::abs(s - 1.0) < 1e-12);
        }
    }
}

TEST_CASE("softmax along a non-trailing axis") {
    Tensor x({2, 2}, {0, 10, 0, 10});
    Tensor y = softmax(x, 0);  // columns
    CHECK(y.at(0, 0) == doctest::Approx(0.5));
    CHECK(y.at(1, 0) == doctest::Approx(0.5));
    CHECK(y.at(0, 1) == doctest::Approx(0.5));
    CHECK(y.at(1, 1) == doctest::Approx(0.5));
}

TEST_CASE("layer_norm basics") {
    Tensor c({4}, {5, 5, 5, 5});
    Tensor rc = layer_norm(c);
    for (double v : rc.data) CHECK(v == 0.0);

    Tensor pm({2}, {1, -1});
    Tensor rpm = layer_norm(pm, 0.0);
    CHECK(rpm.data[0] == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(rpm.data[1] == doctest::Approx(-1.0).epsilon(1e-12));

    SeededRng rng(5);
    Tensor x = rng.normal_tensor({3, 16});
    Tensor y = layer_norm(x);
    for (int i = 0; i < 3; ++i) {
        double mean = 0.0, var = 0.0;
        for (int j = 0; j < 16; ++j) mean += y.at(i, j);
        mean /= 16;
        for (int j = 0; j < 16; ++j) var += (y.at(i, j) - mean) * (y.at(i, j) - mean);
        var /= 16;
        CHECK(std::abs(mean) < 1e-9);
        CHECK(std::abs(var - 1.0) < 1e-6);
    }
}

TEST_CASE("layer_norm shift and positive-rescale invariance") {
    SeededRng rng(6);
    Tensor x = rng.normal_tensor({1, 24});
    Tensor base = layer_norm(x);
    Tensor shifted = x, scaled = x;
    for (auto& v : shifted.data) v += 17.5;
    for (auto& v : scaled.data) v *= 3.25;
    Tensor ys = layer_norm(shifted), yc = layer_norm(scaled);
    for (size_t i = 0; i < base.data.size(); ++i) {
        CHECK(std::abs(ys.data[i] - base.data[i]) < 1e-6);
        CHECK(std::abs(yc.data[i] - base.data[i]) < 1e-6);
    }
}

TEST_CASE("grad_check on x^2") {
    auto f = [](const std::vector<Tensor>& p) { return p[0].data[0] * p[0].data[0]; };
    std::vector<Tensor> params = {Tensor({1}, {3.0})};
    std::vector<Tensor> analytic = {Tensor({1}, {6.0})};
    CHECK(grad_check(f, params, analytic) < 1e-10);
}

TEST_CASE("softmax conservation makes the gradient vanish") {
    // sum(softmax(x)) == 1 identically, so central differences are ~0.
    SeededRng rng(8);
    Tensor x = rng.normal_tensor({6});
    auto f = [](const std::vector<Tensor>& p) {
        Tensor y = softmax(p[0]);
        double s = 0.0;
        for (double v : y.data) s += v;
        return s;
    };
    const double h = 1e-5;
    std::vector<Tensor> params = {x};
    for (size_t i = 0; i < x.data.size(); ++i) {
        params[0].data[i] = x.data[i] + h;
        double fp = f(params);
        params[0].data[i] = x.data[i] - h;
        double fm = f(params);
        params[0].data[i] = x.data[i];
        CHECK(std::abs((fp - fm) / (2 * h)) < 1e-9);
    }
}

TEST_CASE("grad_check rejects non-finite evaluations") {
    auto f = [](const std::vector<Tensor>& p) { return std::log(p[0].data[0]); };
    std::vector<Tensor> params = {Tensor({1}, {1e-6})};
    std::vector<Tensor> analytic = {Tensor({1}, {1e6})};
    CHECK_THROWS_AS(grad_check(f, params, analytic, 1e-3), NumericError);
}

TEST_CASE("tape gradients match central differences per op") {
    SeededRng rng(21);
    // A composite expression exercising most ops.
    Tensor a0 = rng.normal_tensor({3, 4});
    Tensor b0 = rng.normal_tensor({4, 5});
    Tensor v0 = rng.normal_tensor({5});
    Tensor s0 = rng.normal_tensor({3});

    auto eval = [&](const std::vector<Tensor>& p, std::vector<Tensor>* grads) {
        Tape t;
        Var a = t.param(p[0]);
        Var b = t.param(p[1]);
        Var v = t.param(p[2]);
        Var s = t.param(p[3]);
        Var c = t.matmul(a, b);
        c = t.add_rowvec(c, v);
        c = t.layer_norm(c, 1e-6);
        c = t.softmax(c);
        c = t.mul_rowvec(c, v);
        c = t.scale_rows(c, s);
        c = t.gelu(c);
        c = t.silu(c);
        Var loss = t.mse(c, Tensor::full({3, 5}, 0.1));
        if (grads) {
            t.backward(loss);
            *grads = {t.grad(a), t.grad(b), t.grad(v), t.grad(s)};
        }
        return t.val(loss).data[0];
    };

    std::vector<Tensor> params = {a0, b0, v0, s0};
    std::vector<Tensor> analytic;
    eval(params, &analytic);
    auto f = [&](const std::vector<Tensor>& p) { return eval(p, nullptr); };
    CHECK(grad_check(f, params, analytic) < 1e-7);
}

TEST_CASE("tape gradients for attention-style composition") {
    SeededRng rng(22);
    Tensor q0 = rng.normal_tensor({2, 6});
    Tensor k0 = rng.normal_tensor({4, 6});
    Tensor w0 = rng.normal_tensor({6, 6});

    auto eval = [&](const std::vector<Tensor>& p, std::vector<Tensor>* grads) {
        Tape t;
        Var q = t.param(p[0]);
        Var k = t.param(p[1]);
        Var w = t.param(p[2]);
        Var kk = t.matmul(k, w);
        Var scores = t.scale(t.matmul_nt(q, kk), 1.0 / std::sqrt(6.0));
        Var attn = t.softmax(scores);
        Var ctx = t.matmul(attn, kk);
        Var lhs = t.slice_cols(ctx, 0, 3);
        Var rhs = t.slice_cols(ctx, 3, 6);
        Var both = t.concat_cols({lhs, rhs});
        Var stacked = t.concat_rows({both, t.scale(both, 0.5)});
        Var pooled = t.mean_rows(stacked);
        Var loss = t.mse(pooled, Tensor::full({1, 6}, 0.05));
        if (grads) {
            t.backward(loss);
            *grads = {t.grad(q), t.grad(k), t.grad(w)};
        }
        return t.val(loss).data[0];
    };

    std::vector<Tensor> params = {q0, k0, w0};
    std::vector<Tensor> analytic;
    eval(params, &analytic);
    auto f = [&](const std::vector<Tensor>& p) { return eval(p, nullptr); };
    CHECK(grad_check(f, params, analytic) < 1e-7);
}

TEST_CASE("rng determinism and stream independence") {
    SeededRng a(42), b(42), c(43);
    for (int i = 0; i < 100; ++i) {
        double x = a.normal();
        CHECK(x == b.normal());
        CHECK(std::isfinite(x));
    }
    bool differs = false;
    SeededRng a2(42);
    for (int i = 0; i < 10; ++i) differs = differs || (a2.normal() != c.normal());
    CHECK(differs);
}

TEST_CASE("ops reject shape violations") {
    Tape t;
    Var a = t.param(Tensor({2, 3}));
    Var b = t.param(Tensor({2, 2}));
    CHECK_THROWS_AS(t.matmul(a, b), ShapeError);
    CHECK_THROWS_AS(t.add(a, b), ShapeError);
    CHECK_THROWS_AS(t.slice_rows(a, 1, 5), ArgumentError);
}
