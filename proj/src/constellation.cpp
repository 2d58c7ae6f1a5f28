#include "djcm/constellation.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "djcm/error.hpp"

namespace djcm {

const char* to_string(ErrorKind kind) noexcept {
    switch (kind) {
        case ErrorKind::InvalidOrder: return "invalid-order";
        case ErrorKind::InvalidPower: return "invalid-power";
        case ErrorKind::InvalidSample: return "invalid-sample";
        case ErrorKind::InvalidLength: return "invalid-length";
        case ErrorKind::InvalidParams: return "invalid-params";
        case ErrorKind::ConstraintViolation: return "constraint-violation";
        case ErrorKind::WrongRegion: return "wrong-region";
        case ErrorKind::InsufficientSamples: return "insufficient-samples";
        case ErrorKind::Shape: return "shape";
        case ErrorKind::InvalidRate: return "invalid-rate";
        case ErrorKind::Bounds: return "bounds";
        case ErrorKind::Configuration: return "configuration";
        case ErrorKind::Division: return "division";
        case ErrorKind::Determinism: return "determinism";
        case ErrorKind::TrainingDiverged: return "training-diverged";
        case ErrorKind::PhaseOrder: return "phase-order";
        case ErrorKind::Io: return "io";
    }
    return "unknown";
}

void require_finite(const SymbolBlock& block) {
    for (std::size_t i = 0; i < block.size(); ++i) {
        if (!std::isfinite(block[i].real()) || !std::isfinite(block[i].imag())) {
            throw Error(ErrorKind::InvalidSample, "non-finite component at sample " + std::to_string(i));
        }
    }
}

ConstellationSpec build_spec(int order, double power) {
    if (order < 4) throw Error(ErrorKind::InvalidOrder, "order " + std::to_string(order) + " is below 4");
    const int side = static_cast<int>(std::lround(std::sqrt(static_cast<double>(order))));
    if (side * side != order) {
        throw Error(ErrorKind::InvalidOrder, "order " + std::to_string(order) + " is not a perfect square");
    }
    if (!(power > 0.0) || !std::isfinite(power)) {
        throw Error(ErrorKind::InvalidPower, "power must be positive and finite");
    }
    const double d = std::sqrt(3.0 * power / (2.0 * (order - 1)));
    return ConstellationSpec(order, side, power, d);
}

std::vector<double> ConstellationSpec::levels() const {
    std::vector<double> out(side_);
    for (int k = 0; k < side_; ++k) out[k] = level(k);
    return out;
}

std::vector<Sample> ConstellationSpec::points() const {
    std::vector<Sample> out;
    out.reserve(order_);
    for (int i = 0; i < side_; ++i) {
        for (int q = 0; q < side_; ++q) out.emplace_back(level(i), level(q));
    }
    return out;
}

int ConstellationSpec::nearest_index(double x) const {
    const double t = (x + bound_) / (2.0 * spacing_);
    if (!(t > 0.0)) return 0;
    if (t >= side_ - 1) return side_ - 1;
    const int lo = static_cast<int>(std::floor(t));
    const int hi = lo + 1;
    const double dlo = std::abs(x - level(lo));
    const double dhi = std::abs(x - level(hi));
    if (dlo < dhi) return lo;
    if (dhi < dlo) return hi;
    // Exact tie: larger magnitude wins; at zero (even side) take the positive level.
    return std::abs(level(lo)) > std::abs(level(hi)) ? lo : hi;
}

double ConstellationSpec::clip(double x) const { return std::clamp(x, -bound_, bound_); }

SymbolBlock grid_quantize(const SymbolBlock& block, const ConstellationSpec& spec) {
    require_finite(block);
    SymbolBlock out;
    out.samples.reserve(block.size());
    for (const Sample& s : block.samples) out.samples.emplace_back(spec.quantize(s.real()), spec.quantize(s.imag()));
    return out;
}

SymbolBlock clip(const SymbolBlock& block, const ConstellationSpec& spec) {
    require_finite(block);
    SymbolBlock out;
    out.samples.reserve(block.size());
    for (const Sample& s : block.samples) out.samples.emplace_back(spec.clip(s.real()), spec.clip(s.imag()));
    return out;
}

double average_power(std::span<const Sample> samples) {
    if (samples.empty()) throw Error(ErrorKind::InvalidLength, "average power of an empty block");
    double acc = 0.0;
    for (const Sample& s : samples) acc += std::norm(s);
    return acc / static_cast<double>(samples.size());
}

double average_power(const SymbolBlock& block) { return average_power(std::span<const Sample>(block.samples)); }

}  // namespace djcm
