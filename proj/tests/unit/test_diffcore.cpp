#include <doctest.h>

#include <cmath>

#include "djcm/diffcore.hpp"
#include "djcm/gradcheck_suite.hpp"
#include "helpers.hpp"

using namespace djcm;
using namespace djcm::ad;

namespace {
Var grad_of(Var (*op)(const Var&), double x0, double* value) {
    Var x = parameter(Tensor::scalar(x0));
    Var y = op(x);
    *value = y->item();
    backward(y);
    return x;
}
}  // namespace

TEST_CASE("softplus values and gradients") {
    double v = 0.0;
    Var x = grad_of(softplus, 0.0, &v);
    CHECK(v == doctest::Approx(std::log(2.0)).epsilon(1e-12));
    CHECK(x->grad.data[0] == 0.5);

    x = grad_of(softplus, 50.0, &v);
    CHECK(std::isfinite(v));
    CHECK(v == doctest::Approx(50.0 + std::exp(-50.0)).epsilon(1e-15));
    CHECK(x->grad.data[0] == doctest::Approx(1.0));

    x = grad_of(softplus, -50.0, &v);
    CHECK(v == doctest::Approx(std::exp(-50.0)).epsilon(1e-12));
    CHECK(v > 0.0);
    CHECK(x->grad.data[0] > 0.0);
    CHECK(x->grad.data[0] == doctest::Approx(std::exp(-50.0)).epsilon(1e-12));
}

TEST_CASE("uniform noise node") {
    const auto spec = build_spec(4, 1.0);
    const double d = spec.spacing();
    Var x = parameter(Tensor({1000, 1000}, 0.0));
    Var y = uniform_noise(x, d, {5, 0});
    for (double v : y->value.data) {
        REQUIRE(v > -d);
        REQUIRE(v < d);
    }
    CHECK(d == doctest::Approx(0.70711).epsilon(1e-5));
    CHECK(uniform_noise(x, d, {5, 0})->value == y->value);
    backward(sum(y));
    for (double g : x->grad.data) REQUIRE(g == 1.0);
    CHECK(error_kind([&] { uniform_noise(x, 0.0, {5, 0}); }) == ErrorKind::InvalidParams);

    const auto r = gradient_check([](const Var& v) { return sum(mul(uniform_noise(v, 0.3, {2, 2}), v)); },
                                  Tensor({3}, std::vector<double>{0.2, -0.4, 0.9}));
    CHECK(r.max_rel_err <= 1e-6);
}

TEST_CASE("clip node") {
    Var x = parameter(Tensor({4}, std::vector<double>{0.3, 5.0, -0.7, 0.7}));
    Var y = clip(x, 0.7);
    CHECK(y->value.data == std::vector<double>{0.3, 0.7, -0.7, 0.7});
    backward(sum(y));
    CHECK(x->grad.data == std::vector<double>{1.0, 0.0, 1.0, 1.0});
    CHECK(error_kind([&] { clip(x, 0.0); }) == ErrorKind::InvalidParams);

    const auto rep = run_gradcheck_suite(17, 100);
    for (const auto& row : rep.rows) {
        if (row.node == "clip") CHECK(row.max_rel_err <= 1e-6);
    }
}

TEST_CASE("ste quantize node") {
    const auto spec = build_spec(16, 1.0);
    const double d = spec.spacing();
    Var x = parameter(Tensor({5}, std::vector<double>{0.0, 2.0 * d, -0.13, 9.0, -4.0 * d}));
    Var q = ste_quantize(x, spec);
    for (std::size_t i = 0; i < 5; ++i) CHECK(q->value.data[i] == spec.quantize(x->value.data[i]));
    backward(sum(q));
    for (double g : x->grad.data) CHECK(g == 1.0);

    // MSE downstream: d/dx mean((q(x) - t)^2) = 2 (q(x) - t) / n, passed straight through.
    Var x3 = parameter(Tensor({3}, std::vector<double>{0.1, -0.5, 0.8}));
    const Tensor t({3}, std::vector<double>{0.2, 0.0, -0.1});
    Var loss = mse(ste_quantize(x3, spec), constant(t));
    backward(loss);
    for (std::size_t i = 0; i < 3; ++i) {
        CHECK(x3->grad.data[i] == doctest::Approx(2.0 * (spec.quantize(x3->value.data[i]) - t.data[i]) / 3.0));
    }

    const auto r = gradient_check([&](const Var& v) { return mse(ste_quantize(v, spec), constant(t)); },
                                  Tensor({3}, std::vector<double>{0.1, -0.5, 0.8}));
    CHECK(r.max_rel_err > 1e-3);  // reported, not an error
}

TEST_CASE("gradient_check") {
    const auto quad = gradient_check([](const Var& v) { return sum(mul(v, v)); },
                                     Tensor({4}, std::vector<double>{0.3, -1.2, 2.0, 0.7}));
    CHECK(quad.max_rel_err <= 1e-8);

    CHECK(error_kind([] {
              gradient_check([](const Var& v) { return sum(v); }, Tensor({2}, 1.0), 1e-8);
          }) == ErrorKind::InvalidParams);
    CHECK(error_kind([] {
              gradient_check([](const Var& v) { return sum(v); }, Tensor({2}, 1.0), 1e-2);
          }) == ErrorKind::InvalidParams);

    std::uint64_t counter = 0;
    CHECK(error_kind([&] {
              gradient_check([&](const Var& v) { return sum(uniform_noise(v, 0.5, {counter++, 0})); },
                             Tensor({2}, 1.0));
          }) == ErrorKind::Determinism);
}

TEST_CASE("backward contracts") {
    Var a = constant(Tensor({2}, 1.0));
    Var b = constant(Tensor({2}, 2.0));
    Var s = sum(mul(a, b));
    CHECK_FALSE(s->requires_grad);
    backward(s);
    CHECK(a->grad.size() == 0);

    // Diamond: x feeds two paths; gradient accumulates once per path.
    Var x = parameter(Tensor::scalar(3.0));
    Var y = add(mul(x, x), scale(x, 2.0));
    backward(sum(y));
    CHECK(x->grad.data[0] == 8.0);

    CHECK(error_kind([] { add(constant(Tensor({2}, 0.0)), constant(Tensor({3}, 0.0))); }) == ErrorKind::Shape);
    CHECK(error_kind([] { matmul(constant(Tensor({2, 3}, 0.0)), constant(Tensor({2, 3}, 0.0))); }) ==
          ErrorKind::Shape);
    CHECK(error_kind([] { Tensor({2, 2}, std::vector<double>{1.0}); }) == ErrorKind::Shape);
}

TEST_CASE("deterministic replay") {
    auto run = [] {
        Var w = parameter(Tensor({2, 2}, std::vector<double>{0.1, -0.3, 0.7, 0.2}));
        Var x = constant(Tensor({3, 2}, std::vector<double>{1, 2, 3, 4, 5, 6}));
        Var y = uniform_noise(ad::tanh(matmul(x, w)), 0.2, {9, 9});
        Var l = mse(y, constant(Tensor({3, 2}, 0.0)));
        backward(l);
        return std::make_pair(l->item(), w->grad.data);
    };
    CHECK(run() == run());
}

TEST_CASE("gradient suite") {
    const auto rep = run_gradcheck_suite();
    CHECK(rep.passed());
    std::vector<std::string> names;
    for (const auto& row : rep.rows) {
        names.push_back(row.node);
        CHECK(row.cases == 100);
        if (row.gated) CHECK(row.max_rel_err <= 1e-5);
    }
    for (const char* n : {"softplus", "clip", "uniform_noise", "ste_quantize", "relaxed_chain", "gu_rate"}) {
        CHECK(std::find(names.begin(), names.end(), n) != names.end());
    }

    ad::testing::inject_gradient_fault("softplus");
    const auto bad = run_gradcheck_suite();
    ad::testing::clear_gradient_fault();
    CHECK_FALSE(bad.passed());
    for (const auto& row : bad.rows) CHECK(row.passed == (row.node != "softplus" && row.gated));
}

TEST_CASE("adam moves toward the minimum") {
    Var x = parameter(Tensor({2}, std::vector<double>{3.0, -2.0}));
    Adam opt({x}, 0.1);
    for (int i = 0; i < 500; ++i) {
        opt.zero_grad();
        backward(sum(mul(x, x)));
        opt.step();
    }
    CHECK(std::abs(x->value.data[0]) < 1e-2);
    CHECK(std::abs(x->value.data[1]) < 1e-2);
}

TEST_CASE("power limit rows") {
    Var x = parameter(Tensor({2, 4}, std::vector<double>{2, 0, 0, 0, 0.1, 0.1, 0, 0}));
    const std::vector<int> active{2, 2};
    Var y = power_limit_rows(x, active, 1.0);
    CHECK((y->value.at(0, 0) * y->value.at(0, 0)) / 2.0 == doctest::Approx(1.0));
    CHECK(y->value.at(1, 0) == 0.1);
}
