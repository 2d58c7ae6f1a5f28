#include <doctest.h>

#include <cmath>

#include "../support/oracles.hpp"
#include "djcm/channel.hpp"
#include "djcm/density.hpp"
#include "djcm/dist_oracle.hpp"
#include "djcm/modem.hpp"
#include "helpers.hpp"

using namespace djcm;

namespace {
SymbolBlock zeros(std::size_t n) { return SymbolBlock(std::vector<Sample>(n)); }
constexpr double kInf = std::numeric_limits<double>::infinity();
}  // namespace

TEST_CASE("noise_sigma2") {
    CHECK(noise_sigma2({ChannelKind::Awgn, 10.0, 1.0}) == doctest::Approx(0.1).epsilon(1e-14));
    CHECK(noise_sigma2({ChannelKind::Awgn, 0.0, 1.0}) == 1.0);
    CHECK(noise_sigma2({ChannelKind::Awgn, 13.0, 2.0}) == doctest::Approx(2.0 / std::pow(10.0, 1.3)).epsilon(1e-14));
    CHECK(noise_sigma2({ChannelKind::Awgn, 13.0, 2.0}) == doctest::Approx(0.100237).epsilon(1e-5));
    CHECK(noise_sigma2({ChannelKind::Awgn, kInf, 1.0}) == 0.0);
    CHECK(error_kind([] { validate({ChannelKind::Awgn, NAN, 1.0}); }) == ErrorKind::InvalidParams);
    CHECK(error_kind([] { validate({ChannelKind::Awgn, 10.0, 0.0}); }) == ErrorKind::InvalidParams);
}

TEST_CASE("noiseless channels are identities") {
    const auto spec = build_spec(64, 1.0);
    const SymbolBlock s(spec.points());
    CHECK(transmit(s, {ChannelKind::Awgn, kInf, 1.0}, {1, 2}) == s);
    CHECK(transmit(s, {ChannelKind::Rayleigh, kInf, 1.0}, {1, 2}) == s);
}

TEST_CASE("AWGN statistics") {
    const std::size_t n = 1'000'000;
    const SymbolBlock out = transmit(zeros(n), {ChannelKind::Awgn, 10.0, 1.0}, {5, 0});
    double si = 0.0, sq = 0.0, sii = 0.0, sqq = 0.0, siq = 0.0;
    for (const auto& z : out.samples) {
        si += z.real(), sq += z.imag();
        sii += z.real() * z.real(), sqq += z.imag() * z.imag(), siq += z.real() * z.imag();
    }
    const double var = sii / n;
    // Var of the sample variance of a Gaussian: 2 sigma^4 / n.
    CHECK(std::abs(var - 0.05) <= 3.0 * std::sqrt(2.0 * 0.05 * 0.05 / n));
    CHECK(std::abs(si / n) < 4.0 * std::sqrt(0.05 / n));
    CHECK(std::abs(sq / n) < 4.0 * std::sqrt(0.05 / n));
    const double corr = siq / std::sqrt(sii * sqq);
    CHECK(std::abs(corr) < 4.0 / std::sqrt(static_cast<double>(n)));
}

TEST_CASE("equalized Rayleigh error is heavy tailed") {
    // One gain per block, so use many short blocks.
    double s2 = 0.0, s4 = 0.0;
    std::size_t n = 0;
    for (std::uint64_t b = 0; b < 250'000; ++b) {
        const SymbolBlock e = transmit(zeros(4), {ChannelKind::Rayleigh, 10.0, 1.0}, substream({9, 0}, b));
        for (const auto& z : e.samples) {
            const double x = z.real();
            s2 += x * x, s4 += x * x * x * x;
            ++n;
        }
    }
    const double m2 = s2 / n, m4 = s4 / n;
    CHECK(m4 / (m2 * m2) - 3.0 > 0.0);
}

TEST_CASE("channel determinism and redraw metadata") {
    const auto spec = build_spec(16, 1.0);
    const SymbolBlock s(spec.points());
    const ChannelParams p{ChannelKind::Rayleigh, 7.0, 1.0};
    const auto a = transmit_detailed(s, p, {4, 1});
    const auto b = transmit_detailed(s, p, {4, 1});
    CHECK(a.output == b.output);
    CHECK(a.gain == b.gain);
    CHECK(std::abs(a.gain) >= 1e-12);
    CHECK(a.stream_used.seed == 4);
    CHECK(a.stream_used.stream == 1 + static_cast<std::uint64_t>(a.redraws));
}

TEST_CASE("hard chain") {
    const auto s4 = build_spec(4, 1.0);
    const ChannelParams clean{ChannelKind::Awgn, kInf, 1.0};
    const SymbolBlock on_grid(s4.points());
    const auto h = hard_chain(on_grid, s4, clean, {1, 0});
    CHECK(h.modulated == on_grid);
    CHECK(h.demodulated == on_grid);

    const auto h2 = hard_chain(SymbolBlock(std::vector<Sample>{{0.6, 0.3}}), s4, clean, {1, 0});
    CHECK(h2.demodulated[0].real() == doctest::Approx(0.70711).epsilon(1e-5));
    CHECK(h2.demodulated[0].imag() == doctest::Approx(0.70711).epsilon(1e-5));

    CHECK(error_kind([&] { hard_chain(SymbolBlock(std::vector<Sample>{{0.9, 0.0}}), s4, clean, {1, 0}); }) ==
          ErrorKind::ConstraintViolation);

    // Stage decomposition against manual composition.
    const ChannelParams noisy{ChannelKind::Awgn, 10.0, 1.0};
    const auto s16 = build_spec(16, 1.0);
    SymbolBlock s({{0.1, -0.5}, {0.9, 0.2}, {-0.3, 0.0}});
    const auto st = hard_chain(s, s16, noisy, {2, 0});
    CHECK(st.modulated == grid_quantize(s, s16));
    CHECK(st.received == transmit(st.modulated, noisy, named_stream({2, 0}, "channel")));
    CHECK(st.demodulated == grid_quantize(st.received, s16));
}

TEST_CASE("hard chain symbol-change rate matches the oracle") {
    // Per component: P(level changes) = sum over levels of P(source in cell t) P(error leaves band t).
    const auto spec = build_spec(4, 1.0);
    const ChannelParams p{ChannelKind::Awgn, 10.0, 1.0};
    const double A = spec.bound(), sd = std::sqrt(noise_sigma2(p) / 2.0);
    // Source uniform on [-A, A]: each component sits on +-A after modulation; error flips the sign
    // when it exceeds A in the wrong direction.
    const double flip = 0.5 * std::erfc(A / (sd * std::sqrt(2.0)));
    const double p_change = 1.0 - (1.0 - flip) * (1.0 - flip);

    const std::size_t n = 1'000'000;
    Rng rng({21, 0});
    std::vector<Sample> src(n);
    for (auto& z : src) z = {rng.uniform(-A, A), rng.uniform(-A, A)};
    const auto st = hard_chain(SymbolBlock(std::move(src)), spec, p, {21, 1});
    std::size_t changed = 0;
    for (std::size_t i = 0; i < n; ++i) changed += st.demodulated[i] != st.modulated[i];
    const double rate = static_cast<double>(changed) / n;
    CHECK(std::abs(rate - p_change) <= 5.0 * oracle::binomial_se(p_change, n));

    // Same figure via the library's per-component quadrature.
    const auto pmf_src = ScalarDensity::point_mass(A);
    const auto err = awgn_error(p);
    const auto pmf = hard_pmf(pmf_src, err, spec);
    CHECK(pmf[0] == doctest::Approx(flip).epsilon(1e-6));
}

TEST_CASE("relaxed chain") {
    const auto s64 = build_spec(64, 1.0);
    const ChannelParams clean{ChannelKind::Awgn, kInf, 1.0};
    SymbolBlock s({{0.1, -0.5}, {0.9, 0.2}, {-0.3, 0.0}});
    const auto r = relaxed_chain(s, s64, clean, {1, 0}, Dither::Zero);
    CHECK(r.output == s);

    const ChannelParams noisy{ChannelKind::Awgn, 10.0, 1.0};
    const auto st = relaxed_chain(s, s64, noisy, {3, 0});
    CHECK(st.dithered == add_uniform_noise(s, s64.spacing(), named_stream({3, 0}, "noise1")));
    CHECK(st.received == transmit(st.dithered, noisy, named_stream({3, 0}, "channel")));
    CHECK(st.output == add_uniform_noise(st.received, s64.spacing(), named_stream({3, 0}, "noise2")));
    CHECK(error_kind([&] { relaxed_chain(SymbolBlock(std::vector<Sample>{{5.0, 0.0}}), s64, noisy, {1, 0}); }) ==
          ErrorKind::ConstraintViolation);
}

TEST_CASE("relaxed chain dither is uniform on (-d, d)") {
    const auto s4 = build_spec(4, 1.0);
    const double d = s4.spacing();
    const std::size_t n = 500'000;  // complex samples: 10^6 components
    const auto st = relaxed_chain(zeros(n), s4, {ChannelKind::Awgn, kInf, 1.0}, {8, 0});
    std::vector<double> u;
    u.reserve(2 * n);
    for (const auto& z : st.dithered.samples) {
        u.push_back(z.real());
        u.push_back(z.imag());
    }
    for (double v : u) {
        REQUIRE(v > -d);
        REQUIRE(v < d);
    }
    CHECK(oracle::ks_statistic(u, oracle::uniform_cdf(d)) < oracle::ks_critical_1pct(u.size()));
}
