#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "djcm/modem.hpp"
#include "djcm/rng.hpp"

namespace djcm {

inline constexpr double kScaleMin = 1e-6;
// 2^-50
inline constexpr double kLikelihoodFloor = 8.8817841970012523e-16;

// Per-element Gaussian parameters predicted from the hyperprior.
struct EntropyParams {
    std::vector<double> mean;
    std::vector<double> scale;
};

struct EntropyDiagnostics {
    std::uint64_t scale_clamps = 0;
    std::uint64_t likelihood_floors = 0;
};

// Process-wide counters (atomic underneath).
EntropyDiagnostics entropy_diagnostics();
void reset_entropy_diagnostics();

// Standard normal CDF.
double normal_cdf(double x);
// Logistic CDF 1 / (1 + e^-x).
double logistic_cdf(double x);

/// Mass of N(mean, scale^2) convolved with U(-1/2, 1/2) at y:
/// Phi((y - mean + 1/2)/scale) - Phi((y - mean - 1/2)/scale), evaluated on
/// the tail that keeps precision. Scales below kScaleMin are clamped.
double gu_likelihood(double y, double mean, double scale);

// Sum of -log2 gu_likelihood with each likelihood floored at 2^-50.
double sequence_rate_bits(std::span<const double> y, const EntropyParams& params);

/// Logistic(loc, scale) convolved with U(-1/2, 1/2), evaluated at z. Stands
/// in for the learned non-parametric factorized prior of the side latent.
double factorized_prior_likelihood(double z, double loc, double scale);

// y + u with u ~ U(-1/2, 1/2) per element.
std::vector<double> add_training_noise(std::span<const double> y, const RngState& rng,
                                       Dither dither = Dither::Random);

}  // namespace djcm
