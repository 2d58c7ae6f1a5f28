#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "djcm/channel.hpp"
#include "djcm/constellation.hpp"
#include "djcm/density.hpp"
#include "djcm/modem.hpp"
#include "djcm/rng.hpp"

namespace djcm {

// Level indices are 1-based as m = 1 .. sqrt(M); level m sits at
// (2m - sqrt(M) - 1) d. Levels 1 and sqrt(M) are the edge levels.
enum class Edge { Lower, Upper };

// Probability that the demodulated component equals inner level m
// (2 <= m <= sqrt(M)-1) under the hard chain. Throws WrongRegion otherwise.
double inner_pmf(int m, const ScalarDensity& source, const ScalarDensity& error, const ConstellationSpec& spec);

// Probability of an edge level; its decision region runs to infinity.
double edge_pmf(const ScalarDensity& source, const ScalarDensity& error, const ConstellationSpec& spec,
                Edge edge = Edge::Upper);

// All sqrt(M) level probabilities, index 0 = level m = 1.
std::vector<double> hard_pmf(const ScalarDensity& source, const ScalarDensity& error, const ConstellationSpec& spec);

/// Density of one component of the relaxed-chain output at x:
/// p_s * U(-d,d) * p_e * U(-d,d), evaluated as an outer integral over the
/// dithered transmit value nu of two band masses of width 2d. Absolute error
/// below 1e-8.
double relaxed_density(double x, const ScalarDensity& source, const ScalarDensity& error,
                       const ConstellationSpec& spec);

inline constexpr std::uint64_t kMinMonteCarloSamples = 10'000;
// Per-component samples handled by one sub-stream.
inline constexpr std::uint64_t kMonteCarloChunk = 1u << 16;

// Level frequencies of the hard chain from n per-component source draws.
// Chunk c of the work uses substream(rng, c), so the result does not depend
// on the number of workers.
std::vector<double> mc_hard_pmf(const ScalarDensity& source, const ChannelParams& params,
                                const ConstellationSpec& spec, std::uint64_t n, const RngState& rng);

struct Histogram {
    double lo = 0.0;
    double hi = 0.0;
    std::vector<double> density;
    std::vector<std::uint64_t> counts;
    std::uint64_t in_range = 0;
    std::uint64_t out_of_range = 0;

    double width() const { return (hi - lo) / static_cast<double>(density.size()); }
    double center(std::size_t b) const { return lo + (static_cast<double>(b) + 0.5) * width(); }
    // Bin containing x, clamped to the range.
    std::size_t bin_of(double x) const;
    double value_at(double x) const { return density[bin_of(x)]; }
};

/// Normalized histogram of per-component relaxed-chain outputs over
/// [-sqrt(M) d - 4 sigma, sqrt(M) d + 4 sigma] (sigma^2 the complex noise
/// variance). Normalized by the in-range count so it integrates to one.
/// A positive kernel_bandwidth applies Gaussian smoothing afterwards.
Histogram mc_relaxed_density(const ScalarDensity& source, const ChannelParams& params,
                             const ConstellationSpec& spec, std::uint64_t n, const RngState& rng, int bins,
                             double kernel_bandwidth = 0.0, Dither dither = Dither::Random);

struct LevelRecord {
    int level_index = 0;  // m
    double level_value = 0.0;
    bool edge = false;
    double hard_pmf = 0.0;
    double relaxed_density = 0.0;
    double scaled_density = 0.0;  // 2d p
    double mc_pmf = 0.0;
    double mc_density = 0.0;
    double abs_err = 0.0;  // |P - 2d p|
    double rel_err = 0.0;  // |P - 2d p| / P
};

struct DistReport {
    int order = 0;
    double snr_db = 0.0;
    std::uint64_t mc_samples = 0;
    std::vector<LevelRecord> levels;
    double delta_inner = 0.0;
    double delta_edge = 0.0;
    double pmf_sum = 0.0;
    // Largest |mc_pmf - P| / sqrt(P (1 - P) / n) over levels.
    double mc_max_z = 0.0;
};

struct ReportOptions {
    // Histogram bins for the informational mc_density column; 0 picks 16 sqrt(M).
    int bins = 0;
    bool monte_carlo = true;
};

/// Fills a DistReport for an AWGN channel. Delta_inner and Delta_edge come
/// from the quadrature oracles only; the Monte Carlo columns are diagnostics.
DistReport equivalence_report(const ConstellationSpec& spec, const ChannelParams& params,
                              const ScalarDensity& source, std::uint64_t n, const RngState& rng,
                              const ReportOptions& options = {});

// One row per (component type, level); header included.
std::string report_csv(const DistReport& report);

}  // namespace djcm
