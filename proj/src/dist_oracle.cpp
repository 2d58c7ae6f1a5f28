#include "djcm/dist_oracle.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "djcm/csv.hpp"
#include "djcm/error.hpp"
#include "djcm/parallel.hpp"
#include "djcm/quadrature.hpp"

namespace djcm {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kBandTol = 1e-14;

// Source mass of the decision cell of level t (1-based); edge cells are open.
double cell_mass(int t, const ScalarDensity& source, const ConstellationSpec& spec) {
    const double d = spec.spacing();
    const double c = spec.level(t - 1);
    const double lo = t == 1 ? -kInf : c - d;
    const double hi = t == spec.side() ? kInf : c + d;
    return source.mass(std::max(lo, source.lo()), std::min(hi, source.hi()), kBandTol);
}

// P(component sent at level t is demodulated to level m).
double transition(int m, int t, const ScalarDensity& error, const ConstellationSpec& spec) {
    const double d = spec.spacing();
    const double lo = m == 1 ? -kInf : (2.0 * (m - t) - 1.0) * d;
    const double hi = m == spec.side() ? kInf : (2.0 * (m - t) + 1.0) * d;
    return error.mass(std::max(lo, error.lo()), std::min(hi, error.hi()), kBandTol);
}

double level_pmf(int m, const std::vector<double>& cells, const ScalarDensity& error,
                 const ConstellationSpec& spec) {
    double acc = 0.0;
    for (int t = 1; t <= spec.side(); ++t) {
        if (cells[t - 1] == 0.0) continue;
        acc += cells[t - 1] * transition(m, t, error, spec);
    }
    return acc;
}

std::vector<double> all_cells(const ScalarDensity& source, const ConstellationSpec& spec) {
    std::vector<double> cells(spec.side());
    for (int t = 1; t <= spec.side(); ++t) cells[t - 1] = cell_mass(t, source, spec);
    return cells;
}

std::uint64_t chunk_count(std::uint64_t n) { return (n + kMonteCarloChunk - 1) / kMonteCarloChunk; }

std::uint64_t chunk_size(std::uint64_t n, std::uint64_t c) {
    return std::min<std::uint64_t>(kMonteCarloChunk, n - c * kMonteCarloChunk);
}

// Draws `count` per-component source values, packed two per complex sample
// and clipped to [-A, A].
SymbolBlock source_block(const ScalarDensity& source, const ConstellationSpec& spec, std::uint64_t count,
                         const RngState& rng) {
    Rng gen(named_stream(rng, "source"));
    SymbolBlock block;
    block.samples.resize((count + 1) / 2);
    for (Sample& s : block.samples) {
        const double re = source.sample(gen);
        const double im = source.sample(gen);
        s = {spec.clip(re), spec.clip(im)};
    }
    return block;
}

double component(const SymbolBlock& block, std::uint64_t j) {
    const Sample& s = block[j / 2];
    return j % 2 == 0 ? s.real() : s.imag();
}

void require_samples(std::uint64_t n) {
    if (n < kMinMonteCarloSamples) {
        throw Error(ErrorKind::InsufficientSamples,
                    "need at least " + std::to_string(kMinMonteCarloSamples) + " samples, got " + std::to_string(n));
    }
}

}  // namespace

double inner_pmf(int m, const ScalarDensity& source, const ScalarDensity& error, const ConstellationSpec& spec) {
    if (m < 2 || m > spec.side() - 1) {
        throw Error(ErrorKind::WrongRegion, "level " + std::to_string(m) + " is not an inner level");
    }
    return level_pmf(m, all_cells(source, spec), error, spec);
}

double edge_pmf(const ScalarDensity& source, const ScalarDensity& error, const ConstellationSpec& spec, Edge edge) {
    const int m = edge == Edge::Upper ? spec.side() : 1;
    return level_pmf(m, all_cells(source, spec), error, spec);
}

std::vector<double> hard_pmf(const ScalarDensity& source, const ScalarDensity& error, const ConstellationSpec& spec) {
    const std::vector<double> cells = all_cells(source, spec);
    std::vector<double> out(spec.side());
    for (int m = 1; m <= spec.side(); ++m) out[m - 1] = level_pmf(m, cells, error, spec);
    return out;
}

double relaxed_density(double x, const ScalarDensity& source, const ScalarDensity& error,
                       const ConstellationSpec& spec) {
    const double d = spec.spacing();
    const double lo = std::max(source.lo() - d, x - d - error.hi());
    const double hi = std::min(source.hi() + d, x + d - error.lo());
    if (!(hi > lo)) return 0.0;

    std::vector<double> breaks{lo, hi};
    auto add = [&](double b) {
        if (b > lo && b < hi) breaks.push_back(b);
    };
    for (double b : source.breakpoints()) {
        add(b - d);
        add(b + d);
    }
    for (double b : error.breakpoints()) {
        add(x - d - b);
        add(x + d - b);
    }
    const double inv = 1.0 / (4.0 * d * d);
    auto outer = [&](double nu) {
        const double ms = source.mass(nu - d, nu + d, kBandTol);
        if (ms == 0.0) return 0.0;
        return ms * error.mass(x - d - nu, x + d - nu, kBandTol) * inv;
    };
    return integrate_pieces(outer, std::move(breaks), 1e-10);
}

std::vector<double> mc_hard_pmf(const ScalarDensity& source, const ChannelParams& params,
                                const ConstellationSpec& spec, std::uint64_t n, const RngState& rng) {
    require_samples(n);
    const std::uint64_t chunks = chunk_count(n);
    std::vector<std::vector<std::uint64_t>> per_chunk(chunks);
    parallel_for(chunks, [&](std::size_t c) {
        const std::uint64_t count = chunk_size(n, c);
        const RngState cs = substream(rng, c);
        const HardStages stages = hard_chain(source_block(source, spec, count, cs), spec, params, cs);
        std::vector<std::uint64_t> counts(spec.side(), 0);
        for (std::uint64_t j = 0; j < count; ++j) ++counts[spec.nearest_index(component(stages.demodulated, j))];
        per_chunk[c] = std::move(counts);
    });
    std::vector<std::uint64_t> total(spec.side(), 0);
    for (const auto& counts : per_chunk) {
        for (int k = 0; k < spec.side(); ++k) total[k] += counts[k];
    }
    std::vector<double> freq(spec.side());
    for (int k = 0; k < spec.side(); ++k) freq[k] = static_cast<double>(total[k]) / static_cast<double>(n);
    return freq;
}

std::size_t Histogram::bin_of(double x) const {
    const double t = (x - lo) / width();
    if (!(t > 0.0)) return 0;
    return std::min(static_cast<std::size_t>(t), density.size() - 1);
}

Histogram mc_relaxed_density(const ScalarDensity& source, const ChannelParams& params,
                             const ConstellationSpec& spec, std::uint64_t n, const RngState& rng, int bins,
                             double kernel_bandwidth, Dither dither) {
    require_samples(n);
    if (bins < 32) throw Error(ErrorKind::InvalidParams, "need at least 32 bins");
    const double reach = spec.side() * spec.spacing() + 4.0 * std::sqrt(noise_sigma2(params));
    Histogram h;
    h.lo = -reach;
    h.hi = reach;
    h.density.assign(bins, 0.0);
    h.counts.assign(bins, 0);

    const std::uint64_t chunks = chunk_count(n);
    std::vector<std::vector<std::uint64_t>> per_chunk(chunks);
    std::vector<std::uint64_t> outside(chunks, 0);
    const double scale = bins / (h.hi - h.lo);
    parallel_for(chunks, [&](std::size_t c) {
        const std::uint64_t count = chunk_size(n, c);
        const RngState cs = substream(rng, c);
        const RelaxedStages stages = relaxed_chain(source_block(source, spec, count, cs), spec, params, cs, dither);
        std::vector<std::uint64_t> counts(bins, 0);
        for (std::uint64_t j = 0; j < count; ++j) {
            const double v = component(stages.output, j);
            const double t = (v - h.lo) * scale;
            if (t >= 0.0 && t < bins) {
                ++counts[static_cast<std::size_t>(t)];
            } else {
                ++outside[c];
            }
        }
        per_chunk[c] = std::move(counts);
    });
    for (std::uint64_t c = 0; c < chunks; ++c) {
        for (int b = 0; b < bins; ++b) h.counts[b] += per_chunk[c][b];
        h.out_of_range += outside[c];
    }
    h.in_range = n - h.out_of_range;
    if (h.in_range == 0) throw Error(ErrorKind::InsufficientSamples, "no samples fell inside the histogram range");
    const double w = h.width();
    for (int b = 0; b < bins; ++b) h.density[b] = static_cast<double>(h.counts[b]) / (static_cast<double>(h.in_range) * w);

    if (kernel_bandwidth > 0.0) {
        const int radius = static_cast<int>(std::ceil(4.0 * kernel_bandwidth / w));
        std::vector<double> kernel(2 * radius + 1);
        for (int k = -radius; k <= radius; ++k) {
            const double z = k * w / kernel_bandwidth;
            kernel[k + radius] = std::exp(-0.5 * z * z);
        }
        std::vector<double> smoothed(bins, 0.0);
        for (int b = 0; b < bins; ++b) {
            for (int k = -radius; k <= radius; ++k) {
                const int src = b + k;
                if (src >= 0 && src < bins) smoothed[b] += kernel[k + radius] * h.density[src];
            }
        }
        double total = 0.0;
        for (double v : smoothed) total += v * w;
        for (double& v : smoothed) v /= total;
        h.density = std::move(smoothed);
    }
    return h;
}

DistReport equivalence_report(const ConstellationSpec& spec, const ChannelParams& params,
                              const ScalarDensity& source, std::uint64_t n, const RngState& rng,
                              const ReportOptions& options) {
    const ScalarDensity error = awgn_error(params);
    const double d = spec.spacing();
    DistReport report;
    report.order = spec.order();
    report.snr_db = params.snr_db;
    report.mc_samples = options.monte_carlo ? n : 0;

    const std::vector<double> pmf = hard_pmf(source, error, spec);
    std::vector<double> density(spec.side());
    parallel_for(spec.side(), [&](std::size_t k) {
        density[k] = relaxed_density(spec.level(static_cast<int>(k)), source, error, spec);
    });

    std::vector<double> mc_pmf(spec.side(), 0.0);
    Histogram hist;
    if (options.monte_carlo) {
        mc_pmf = mc_hard_pmf(source, params, spec, n, named_stream(rng, "mc_hard"));
        const int bins = options.bins > 0 ? options.bins : 16 * spec.side();
        hist = mc_relaxed_density(source, params, spec, n, named_stream(rng, "mc_relaxed"), bins);
    }

    for (int m = 1; m <= spec.side(); ++m) {
        LevelRecord rec;
        rec.level_index = m;
        rec.level_value = spec.level(m - 1);
        rec.edge = m == 1 || m == spec.side();
        rec.hard_pmf = pmf[m - 1];
        rec.relaxed_density = density[m - 1];
        rec.scaled_density = 2.0 * d * rec.relaxed_density;
        rec.abs_err = std::abs(rec.hard_pmf - rec.scaled_density);
        rec.rel_err = rec.hard_pmf > 0.0 ? rec.abs_err / rec.hard_pmf : (rec.abs_err == 0.0 ? 0.0 : kInf);
        if (options.monte_carlo) {
            rec.mc_pmf = mc_pmf[m - 1];
            rec.mc_density = hist.value_at(rec.level_value);
            const double se = std::sqrt(rec.hard_pmf * (1.0 - rec.hard_pmf) / static_cast<double>(n));
            const double diff = std::abs(rec.mc_pmf - rec.hard_pmf);
            const double z = se > 0.0 ? diff / se : (diff == 0.0 ? 0.0 : kInf);
            report.mc_max_z = std::max(report.mc_max_z, z);
        }
        report.pmf_sum += rec.hard_pmf;
        if (rec.edge) {
            report.delta_edge = std::max(report.delta_edge, rec.rel_err);
        } else {
            report.delta_inner = std::max(report.delta_inner, rec.rel_err);
        }
        report.levels.push_back(rec);
    }
    return report;
}

std::string report_csv(const DistReport& report) {
    csv::Writer w{"order",        "snr_db",     "component", "level_index", "level_value",
                  "hard_pmf",     "relaxed_density", "scaled_density", "mc_pmf", "mc_density",
                  "abs_err",      "rel_err"};
    for (const LevelRecord& r : report.levels) {
        w.cell(report.order)
            .cell(report.snr_db)
            .cell(r.edge ? "edge" : "inner")
            .cell(r.level_index)
            .cell(r.level_value)
            .cell(r.hard_pmf)
            .cell(r.relaxed_density)
            .cell(r.scaled_density)
            .cell(r.mc_pmf)
            .cell(r.mc_density)
            .cell(r.abs_err)
            .cell(r.rel_err);
        w.end_row();
    }
    return w.str();
}

}  // namespace djcm
