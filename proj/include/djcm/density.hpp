#pragma once

#include <vector>

#include "djcm/channel.hpp"
#include "djcm/constellation.hpp"
#include "djcm/rng.hpp"

namespace djcm {

enum class DensityKind { UniformClipped, TruncatedGaussian, Empirical, PointMass };

const char* to_string(DensityKind kind) noexcept;

/// A one-dimensional density with compact support, used for per-component
/// source and channel-error laws. PointMass is the degenerate law of a
/// noiseless channel error.
class ScalarDensity {
  public:
    // Uniform on [-half_width, half_width].
    static ScalarDensity uniform(double half_width);
    // N(mean, scale^2) restricted to [lo, hi] and renormalized.
    static ScalarDensity truncated_gaussian(double mean, double scale, double lo, double hi);
    // Zero-mean Gaussian with the given variance, tails cut where the density
    // drops below 1e-16 of its peak (|x| > 8.58 sd). Zero variance gives a
    // point mass at 0.
    static ScalarDensity gaussian_error(double variance);
    static ScalarDensity point_mass(double at = 0.0);
    // Piecewise-constant density on edges[i] .. edges[i+1]; renormalized.
    static ScalarDensity empirical(std::vector<double> edges, std::vector<double> heights);

    DensityKind kind() const noexcept { return kind_; }
    double lo() const noexcept { return lo_; }
    double hi() const noexcept { return hi_; }
    // Kind-specific: uniform {half_width}; gaussian {mean, scale};
    // point mass {location}; empirical {} (see edges()).
    const std::vector<double>& params() const noexcept { return params_; }
    const std::vector<double>& edges() const noexcept { return edges_; }

    double pdf(double x) const;
    // Probability of [a, b]; quadrature for continuous kinds.
    double mass(double a, double b, double abs_tol = 1e-14) const;
    // Points where the density is not smooth (support ends, bin edges).
    std::vector<double> breakpoints() const;
    double sample(Rng& rng) const;
    // |integral of pdf over the support - 1|, by quadrature.
    double normalization_error() const;

  private:
    ScalarDensity() = default;

    DensityKind kind_ = DensityKind::PointMass;
    double lo_ = 0.0;
    double hi_ = 0.0;
    double norm_ = 1.0;
    std::vector<double> params_;
    std::vector<double> edges_;
    std::vector<double> heights_;
    std::vector<double> cumulative_;
};

// Reference source: uniform on [-A, A].
ScalarDensity uniform_source(const ConstellationSpec& spec);
// Second fixture: N(0, (A/2)^2) truncated to [-A, A].
ScalarDensity truncated_gaussian_source(const ConstellationSpec& spec);
// Per-component AWGN error, variance sigma^2/2. Rayleigh has no oracle.
ScalarDensity awgn_error(const ChannelParams& params);

}  // namespace djcm
