#include <doctest.h>

#include <cmath>

#include "djcm/constellation.hpp"
#include "djcm/rng.hpp"
#include "helpers.hpp"

using namespace djcm;

TEST_CASE("build_spec geometry") {
    const auto s4 = build_spec(4, 1.0);
    CHECK(s4.spacing() == doctest::Approx(std::sqrt(0.5)).epsilon(1e-12));
    CHECK(s4.bound() == doctest::Approx(0.70711).epsilon(1e-5));
    CHECK(s4.side() == 2);

    const auto s1024 = build_spec(1024, 1.0);
    const double limit = std::sqrt(1.5);
    CHECK(32.0 * s1024.spacing() == doctest::Approx(32.0 * std::sqrt(3.0 / 2046.0)).epsilon(1e-12));
    CHECK(std::abs(32.0 * s1024.spacing() - limit) / limit < 1e-3);
}

TEST_CASE("build_spec errors") {
    CHECK(error_kind([] { build_spec(5, 1.0); }) == ErrorKind::InvalidOrder);
    CHECK(error_kind([] { build_spec(1, 1.0); }) == ErrorKind::InvalidOrder);
    CHECK(error_kind([] { build_spec(0, 1.0); }) == ErrorKind::InvalidOrder);
    CHECK(error_kind([] { build_spec(16, 0.0); }) == ErrorKind::InvalidPower);
    CHECK(error_kind([] { build_spec(16, -1.0); }) == ErrorKind::InvalidPower);
    CHECK_NOTHROW(build_spec(36, 1.0));
}

TEST_CASE("grid energy equals the budget") {
    for (int m : {4, 16, 36, 64, 256, 1024}) {
        for (double p : {0.5, 1.0, 2.0}) {
            const auto spec = build_spec(m, p);
            double e = 0.0;
            const auto pts = spec.points();
            REQUIRE(pts.size() == static_cast<std::size_t>(m));
            for (auto z : pts) e += std::norm(z);
            CHECK(std::abs(e / m - p) / p < 1e-12);
        }
    }
}

TEST_CASE("sqrt(M) d approaches its limit monotonically") {
    const double limit = std::sqrt(1.5);
    double prev = 1e9;
    for (int m : {4, 16, 64, 256, 1024, 4096}) {
        const auto spec = build_spec(m, 1.0);
        const double gap = std::abs(spec.side() * spec.spacing() - limit);
        CHECK(gap < prev);
        CHECK(spec.bound() < spec.side() * spec.spacing());
        prev = gap;
    }
}

TEST_CASE("grid_quantize examples") {
    const auto s4 = build_spec(4, 1.0);
    const auto q = grid_quantize(SymbolBlock(std::vector<Sample>{{0.6, 0.9}}), s4);
    CHECK(q[0].real() == doctest::Approx(0.70711).epsilon(1e-5));
    CHECK(q[0].imag() == doctest::Approx(0.70711).epsilon(1e-5));

    const auto s16 = build_spec(16, 1.0);
    const auto sat = grid_quantize(SymbolBlock(std::vector<Sample>{{10.0, -10.0}}), s16);
    CHECK(sat[0].real() == doctest::Approx(3.0 * std::sqrt(0.1)).epsilon(1e-12));
    CHECK(sat[0].imag() == doctest::Approx(-0.94868).epsilon(1e-5));

    const SymbolBlock grid(s16.points());
    CHECK(grid_quantize(grid, s16) == grid);

    CHECK(error_kind([&] { grid_quantize(SymbolBlock(std::vector<Sample>{{NAN, 0.0}}), s16); }) == ErrorKind::InvalidSample);
    CHECK(error_kind([&] { grid_quantize(SymbolBlock(std::vector<Sample>{{0.0, INFINITY}}), s16); }) == ErrorKind::InvalidSample);
}

TEST_CASE("ties go to the larger magnitude") {
    const auto s16 = build_spec(16, 1.0);
    const double d = s16.spacing();
    CHECK(s16.quantize(0.0) == doctest::Approx(d));
    CHECK(s16.quantize(2.0 * d) == doctest::Approx(3.0 * d));
    CHECK(s16.quantize(-2.0 * d) == doctest::Approx(-3.0 * d));
    const auto s4 = build_spec(4, 1.0);
    CHECK(s4.quantize(0.0) > 0.0);
}

TEST_CASE("clip examples") {
    const auto s4 = build_spec(4, 1.0);
    const double A = s4.bound();
    const auto c = clip(SymbolBlock(std::vector<Sample>{{5.0, 0.3}, {-A, -7.0}}), s4);
    CHECK(c[0].real() == doctest::Approx(0.70711).epsilon(1e-5));
    CHECK(c[0].imag() == 0.3);
    CHECK(c[1].real() == -A);
    CHECK(c[1].imag() == -A);
    CHECK(error_kind([&] { clip(SymbolBlock(std::vector<Sample>{{NAN, 0.0}}), s4); }) == ErrorKind::InvalidSample);
}

TEST_CASE("average_power") {
    const auto s4 = build_spec(4, 1.0);
    const double d = s4.spacing();
    CHECK(average_power(SymbolBlock(std::vector<Sample>(10, {d, d}))) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(average_power(SymbolBlock(std::vector<Sample>(5))) == 0.0);
    CHECK(error_kind([] { average_power(SymbolBlock()); }) == ErrorKind::InvalidLength);

    // Uniform draws over the 16 points: mean energy 1 within 3 MC standard errors.
    const auto s16 = build_spec(16, 1.0);
    const auto pts = s16.points();
    double var = 0.0;
    for (auto z : pts) var += (std::norm(z) - 1.0) * (std::norm(z) - 1.0);
    var /= 16.0;
    const std::size_t n = 1'000'000;
    Rng rng({11, 0});
    std::vector<Sample> draws(n);
    for (auto& z : draws) z = pts[rng.next_u64() % 16];
    CHECK(std::abs(average_power(draws) - 1.0) <= 3.0 * std::sqrt(var / n));
}

TEST_CASE("quantizer invariants on random inputs") {
    Rng rng({3, 0});
    for (int m : {4, 16, 64, 256, 1024}) {
        const auto spec = build_spec(m, 1.0);
        for (int i = 0; i < 20000; ++i) {
            const double x = rng.uniform(-3.0, 3.0);
            const double q = spec.quantize(x);
            CHECK_FALSE(spec.quantize(q) != q);
            CHECK_FALSE(spec.quantize(spec.clip(x)) != q);
            CHECK_FALSE(spec.quantize(-x) != -q);
        }
    }
}
