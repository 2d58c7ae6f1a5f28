#include "djcm/density.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "djcm/error.hpp"
#include "djcm/quadrature.hpp"

namespace djcm {

namespace {
// exp(-t^2/2) = 1e-16
const double kTailCut = std::sqrt(2.0 * std::log(1e16));

double std_normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }
}  // namespace

const char* to_string(DensityKind kind) noexcept {
    switch (kind) {
        case DensityKind::UniformClipped: return "uniform";
        case DensityKind::TruncatedGaussian: return "truncated-gaussian";
        case DensityKind::Empirical: return "empirical";
        case DensityKind::PointMass: return "point-mass";
    }
    return "unknown";
}

ScalarDensity ScalarDensity::uniform(double half_width) {
    if (!(half_width > 0.0)) throw Error(ErrorKind::InvalidParams, "uniform half width must be positive");
    ScalarDensity d;
    d.kind_ = DensityKind::UniformClipped;
    d.lo_ = -half_width;
    d.hi_ = half_width;
    d.params_ = {half_width};
    return d;
}

ScalarDensity ScalarDensity::truncated_gaussian(double mean, double scale, double lo, double hi) {
    if (!(scale > 0.0) || !(hi > lo)) throw Error(ErrorKind::InvalidParams, "bad truncated gaussian parameters");
    ScalarDensity d;
    d.kind_ = DensityKind::TruncatedGaussian;
    d.lo_ = lo;
    d.hi_ = hi;
    d.params_ = {mean, scale};
    d.norm_ = std_normal_cdf((hi - mean) / scale) - std_normal_cdf((lo - mean) / scale);
    return d;
}

ScalarDensity ScalarDensity::gaussian_error(double variance) {
    if (variance < 0.0 || !std::isfinite(variance)) throw Error(ErrorKind::InvalidParams, "negative error variance");
    if (variance == 0.0) return point_mass(0.0);
    const double sd = std::sqrt(variance);
    return truncated_gaussian(0.0, sd, -kTailCut * sd, kTailCut * sd);
}

ScalarDensity ScalarDensity::point_mass(double at) {
    ScalarDensity d;
    d.kind_ = DensityKind::PointMass;
    d.lo_ = d.hi_ = at;
    d.params_ = {at};
    return d;
}

ScalarDensity ScalarDensity::empirical(std::vector<double> edges, std::vector<double> heights) {
    if (edges.size() < 2 || heights.size() + 1 != edges.size()) {
        throw Error(ErrorKind::InvalidParams, "empirical density needs n+1 edges for n heights");
    }
    ScalarDensity d;
    d.kind_ = DensityKind::Empirical;
    d.cumulative_.assign(1, 0.0);
    for (std::size_t i = 0; i < heights.size(); ++i) {
        if (!(edges[i + 1] > edges[i]) || heights[i] < 0.0) {
            throw Error(ErrorKind::InvalidParams, "empirical edges must increase and heights be nonnegative");
        }
        d.cumulative_.push_back(d.cumulative_.back() + heights[i] * (edges[i + 1] - edges[i]));
    }
    const double total = d.cumulative_.back();
    if (!(total > 0.0)) throw Error(ErrorKind::InvalidParams, "empirical density has zero mass");
    for (double& h : heights) h /= total;
    for (double& c : d.cumulative_) c /= total;
    d.lo_ = edges.front();
    d.hi_ = edges.back();
    d.edges_ = std::move(edges);
    d.heights_ = std::move(heights);
    return d;
}

double ScalarDensity::pdf(double x) const {
    if (kind_ == DensityKind::PointMass || x < lo_ || x > hi_) return 0.0;
    switch (kind_) {
        case DensityKind::UniformClipped: return 0.5 / params_[0];
        case DensityKind::TruncatedGaussian: {
            const double z = (x - params_[0]) / params_[1];
            return std::exp(-0.5 * z * z) / (params_[1] * std::sqrt(2.0 * std::numbers::pi) * norm_);
        }
        case DensityKind::Empirical: {
            auto it = std::upper_bound(edges_.begin(), edges_.end(), x);
            std::size_t bin = it == edges_.begin() ? 0 : static_cast<std::size_t>(it - edges_.begin()) - 1;
            bin = std::min(bin, heights_.size() - 1);
            return heights_[bin];
        }
        case DensityKind::PointMass: break;
    }
    return 0.0;
}

std::vector<double> ScalarDensity::breakpoints() const {
    if (kind_ == DensityKind::Empirical) return edges_;
    return {lo_, hi_};
}

double ScalarDensity::mass(double a, double b, double abs_tol) const {
    if (!(b >= a)) return 0.0;
    if (kind_ == DensityKind::PointMass) return (params_[0] >= a && params_[0] <= b) ? 1.0 : 0.0;
    const double lo = std::max(a, lo_);
    const double hi = std::min(b, hi_);
    if (!(hi > lo)) return 0.0;
    if (kind_ == DensityKind::UniformClipped) return (hi - lo) * 0.5 / params_[0];
    std::vector<double> breaks{lo, hi};
    for (double e : breakpoints()) {
        if (e > lo && e < hi) breaks.push_back(e);
    }
    return integrate_pieces([this](double x) { return pdf(x); }, std::move(breaks), abs_tol);
}

double ScalarDensity::sample(Rng& rng) const {
    switch (kind_) {
        case DensityKind::PointMass: return params_[0];
        case DensityKind::UniformClipped: return rng.uniform(lo_, hi_);
        case DensityKind::TruncatedGaussian:
            for (;;) {
                const double x = params_[0] + params_[1] * rng.normal();
                if (x >= lo_ && x <= hi_) return x;
            }
        case DensityKind::Empirical: {
            const double u = rng.uniform();
            auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), u);
            std::size_t bin = static_cast<std::size_t>(it - cumulative_.begin());
            bin = std::clamp<std::size_t>(bin, 1, heights_.size()) - 1;
            return rng.uniform(edges_[bin], edges_[bin + 1]);
        }
    }
    return 0.0;
}

double ScalarDensity::normalization_error() const {
    if (kind_ == DensityKind::PointMass) return 0.0;
    return std::abs(mass(lo_, hi_, 1e-12) - 1.0);
}

ScalarDensity uniform_source(const ConstellationSpec& spec) { return ScalarDensity::uniform(spec.bound()); }

ScalarDensity truncated_gaussian_source(const ConstellationSpec& spec) {
    return ScalarDensity::truncated_gaussian(0.0, spec.bound() / 2.0, -spec.bound(), spec.bound());
}

ScalarDensity awgn_error(const ChannelParams& params) {
    if (params.kind != ChannelKind::Awgn) {
        throw Error(ErrorKind::InvalidParams, "no quadrature error density for the Rayleigh channel; use Monte Carlo");
    }
    return ScalarDensity::gaussian_error(noise_sigma2(params) / 2.0);
}

}  // namespace djcm
