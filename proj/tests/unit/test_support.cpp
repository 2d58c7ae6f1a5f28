#include <doctest.h>

#include <cmath>
#include <cstdlib>
#include <set>

#include "djcm/csv.hpp"
#include "djcm/dist_oracle.hpp"
#include "djcm/parallel.hpp"
#include "djcm/quadrature.hpp"
#include "djcm/rng.hpp"
#include "helpers.hpp"

using namespace djcm;

TEST_CASE("rng streams") {
    Rng a({1, 0}), b({1, 0}), c({1, 1});
    std::set<std::uint64_t> seen;
    for (int i = 0; i < 1000; ++i) {
        const auto x = a.next_u64();
        CHECK(x == b.next_u64());
        seen.insert(x);
        seen.insert(c.next_u64());
    }
    CHECK(seen.size() == 2000);
    CHECK(named_stream({1, 0}, "noise1") != named_stream({1, 0}, "noise2"));
    CHECK(substream({1, 0}, 3) == substream({1, 0}, 3));
    CHECK(substream({1, 0}, 3) != substream({1, 0}, 4));
    Rng u({2, 0});
    double mean = 0.0;
    for (int i = 0; i < 100000; ++i) {
        const double v = u.uniform();
        REQUIRE(v > 0.0);
        REQUIRE(v < 1.0);
        mean += v;
    }
    CHECK(std::abs(mean / 100000 - 0.5) < 5.0 * std::sqrt(1.0 / 12.0 / 100000));
}

TEST_CASE("Monte Carlo results do not depend on the worker count") {
    const auto spec = build_spec(16, 1.0);
    const ChannelParams p{ChannelKind::Awgn, 5.0, 1.0};
    setenv("DJCM_THREADS", "1", 1);
    const auto one = mc_hard_pmf(uniform_source(spec), p, spec, 300000, {4, 0});
    setenv("DJCM_THREADS", "3", 1);
    const auto three = mc_hard_pmf(uniform_source(spec), p, spec, 300000, {4, 0});
    unsetenv("DJCM_THREADS");
    CHECK(one == three);
}

TEST_CASE("quadrature") {
    CHECK(integrate([](double x) { return std::exp(x); }, 0.0, 1.0, 1e-12) == doctest::Approx(std::exp(1.0) - 1.0).epsilon(1e-13));
    CHECK(integrate_pieces([](double x) { return std::abs(x); }, {-1.0, 0.0, 2.0}, 1e-12) == doctest::Approx(2.5).epsilon(1e-13));
    const auto& r = default_rule();
    double w = 0.0;
    for (double v : r.weights) w += v;
    CHECK(w == doctest::Approx(2.0).epsilon(1e-14));
}

TEST_CASE("csv") {
    csv::Writer w({"a", "b"});
    w.cell(0.1).cell(3).end_row();
    CHECK(w.str() == "a,b\n0.1,3\n");
    w.cell(1.0);
    CHECK(error_kind([&] { w.end_row(); }) == ErrorKind::Shape);
    CHECK(csv::format(1e-7) == "1e-07");
    const auto rows = csv::parse("x,y\n1,2\n");
    CHECK(rows.size() == 2);
    CHECK(rows[1][1] == "2");
}
