#include <doctest.h>

#include <random>

#include "ggt/autograd.hpp"

using namespace ggt;

TEST_CASE("linear weight gradient is the column sum of the input") {
    std::mt19937_64 rng(7);
    const Tensor x = random_uniform<double>({5, 3}, rng);
    Parameter<double> w(random_uniform<double>({3, 4}, rng));
    Parameter<double> unused(Tensor({2}, 1.0));
    Trace<double> tr;
    Var<double> loss = sum(linear(tr.constant(x), tr.param(w)));
    tr.param(unused);
    tr.backward(loss);
    for (std::size_t i = 0; i < 3; ++i) {
        double col = 0;
        for (std::size_t r = 0; r < 5; ++r) col += x.at(r, i);
        for (std::size_t j = 0; j < 4; ++j) CHECK(w.grad.at(i, j) == doctest::Approx(col).epsilon(1e-12));
    }
    for (double g : unused.grad.data()) CHECK(g == 0.0);
}

TEST_CASE("gradients accumulate across traces until zeroed") {
    Parameter<double> w(Tensor({2}, 3.0));
    for (int i = 0; i < 2; ++i) {
        Trace<double> tr;
        tr.backward(sum(scale(tr.param(w), 2.0)));
    }
    CHECK(w.grad[0] == 4.0);
    w.zero_grad();
    CHECK(w.grad[0] == 0.0);
}

TEST_CASE("backward state errors") {
    Parameter<double> w(Tensor({2, 2}, 1.0));
    {
        Trace<double> tr;
        CHECK_THROWS_AS(tr.backward(tr.constant(Tensor({1}))), StateError);
    }
    {
        Trace<double> tr;
        Var<double> y = matmul(tr.param(w), tr.param(w));
        CHECK_THROWS_AS(tr.backward(y), DimensionError);
        Var<double> loss = sum(y);
        tr.backward(loss);
        CHECK_THROWS_AS(tr.backward(loss), StateError);
    }
    {
        Trace<double> tr(GradMode::off);
        CHECK_THROWS_AS(tr.backward(sum(tr.param(w))), StateError);
    }
    {
        Trace<double> a, b;
        Var<double> loss = sum(a.param(w));
        CHECK_THROWS_AS(b.backward(loss), StateError);
        CHECK_THROWS_AS(add(a.param(w), b.param(w)), StateError);
    }
}

TEST_CASE("trace records scoped costs") {
    Parameter<double> w(Tensor({3, 4}, 0.5));
    Trace<double> tr(GradMode::off);
    {
        ScopeGuard<double> outer(tr, "outer");
        ScopeGuard<double> inner(tr, "inner");
        Var<double> y = linear(tr.constant(Tensor({5, 3})), tr.param(w));
        softmax_rows(y);
    }
    CHECK(tr.scope().empty());
    REQUIRE(tr.records().size() == 2);
    CHECK(tr.records()[0].scope == "outer.inner");
    CHECK(tr.records()[0].macs == 5 * 3 * 4);
    CHECK(tr.records()[1].elementwise == 20);
    REQUIRE(tr.parameters().size() == 1);
    CHECK(tr.parameters()[0].numel == 12);
}

TEST_CASE("finite difference checker") {
    Parameter<double> w(Tensor(Shape{4}, std::vector<double>{0.3, -1.2, 2.0, 0.7}));
    Parameter<double>* ps[] = {&w};
    auto square = [&](Trace<double>& tr) {
        Var<double> v = tr.param(w);
        return sum(matmul(reshape(v, {1, 4}), reshape(v, {4, 1})));
    };
    const FdReport r = finite_diff_check(square, ps, 1e-8);
    CHECK(r.passed);
    CHECK(r.max_rel_error < 1e-9);
    CHECK(r.checked == 4);

    const FdReport strict = finite_diff_check([&](Trace<double>& tr) {
        Var<double> v = tr.param(w);
        return sum(gelu(v));
    }, ps, 0.0);
    CHECK_FALSE(strict.passed);

    Parameter<double> big(Tensor({1}, 1e308));
    Parameter<double>* bp[] = {&big};
    CHECK_THROWS_AS(finite_diff_check([&](Trace<double>& tr) {
        Var<double> v = tr.param(big);
        return sum(scale(v, 1e10));
    }, bp, 1e-4), NumericError);
}

TEST_CASE("primitive gradients match central differences") {
    std::mt19937_64 rng(99);
    auto pick = [&] { return std::uniform_int_distribution<std::size_t>(2, 6)(rng); };
    for (int trial = 0; trial < 3; ++trial) {
        const std::size_t n = pick(), c = pick(), k = pick() + 1;
        Parameter<double> x(random_uniform<double>({n, c}, rng));
        Parameter<double> w(random_uniform<double>({c, k}, rng));
        Parameter<double> b(random_uniform<double>({k}, rng));
        Parameter<double> g(random_uniform<double>({k}, rng)), be(random_uniform<double>({k}, rng));
        const Tensor mix = random_uniform<double>({n, k}, rng);
        Parameter<double>* ps[] = {&x, &w, &b, &g, &be};
        const FdReport r = finite_diff_check([&](Trace<double>& tr) {
            Var<double> h = linear(tr.param(x), tr.param(w), tr.param(b));
            h = layer_norm(gelu(h), tr.param(g), tr.param(be));
            return weighted_sum(softmax_rows(h), mix);
        }, ps, 1e-5);
        CHECK(r.passed);
        CHECK(r.max_rel_error <= 1e-5);
    }
}
