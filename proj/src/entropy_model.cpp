#include "djcm/entropy_model.hpp"

#include <atomic>
#include <cmath>
#include <numbers>

#include "djcm/error.hpp"

namespace djcm {

namespace {
std::atomic<std::uint64_t> g_scale_clamps{0};
std::atomic<std::uint64_t> g_likelihood_floors{0};

double clamp_scale(double scale) {
    if (scale < kScaleMin) {
        g_scale_clamps.fetch_add(1, std::memory_order_relaxed);
        return kScaleMin;
    }
    return scale;
}
}  // namespace

EntropyDiagnostics entropy_diagnostics() {
    return {g_scale_clamps.load(std::memory_order_relaxed), g_likelihood_floors.load(std::memory_order_relaxed)};
}

void reset_entropy_diagnostics() {
    g_scale_clamps = 0;
    g_likelihood_floors = 0;
}

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

double logistic_cdf(double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

double gu_likelihood(double y, double mean, double scale) {
    scale = clamp_scale(scale);
    // Reflect into the lower tail: Phi(b) - Phi(a) = Phi(-a) - Phi(-b).
    const double v = -std::abs(y - mean);
    const double upper = (v + 0.5) / scale;
    const double lower = (v - 0.5) / scale;
    return normal_cdf(upper) - normal_cdf(lower);
}

double sequence_rate_bits(std::span<const double> y, const EntropyParams& params) {
    if (params.mean.size() != y.size() || params.scale.size() != y.size()) {
        throw Error(ErrorKind::Shape, "rate: latent and entropy parameter lengths differ");
    }
    double bits = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) {
        double p = gu_likelihood(y[i], params.mean[i], params.scale[i]);
        if (p < kLikelihoodFloor) {
            g_likelihood_floors.fetch_add(1, std::memory_order_relaxed);
            p = kLikelihoodFloor;
        }
        bits -= std::log2(p);
    }
    return bits;
}

double factorized_prior_likelihood(double z, double loc, double scale) {
    scale = clamp_scale(scale);
    const double v = -std::abs(z - loc);
    return logistic_cdf((v + 0.5) / scale) - logistic_cdf((v - 0.5) / scale);
}

std::vector<double> add_training_noise(std::span<const double> y, const RngState& rng, Dither dither) {
    std::vector<double> out(y.begin(), y.end());
    if (dither == Dither::Zero) return out;
    Rng gen(rng);
    for (double& v : out) v += gen.uniform(-0.5, 0.5);
    return out;
}

}  // namespace djcm
