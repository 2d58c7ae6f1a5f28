#pragma once

#include <complex>
#include <cstddef>
#include <span>
#include <vector>

namespace djcm {

using Sample = std::complex<double>;

// A run of complex channel samples (I = real part, Q = imaginary part).
// The same type carries every stage of both chains; the stage is known from
// where the block came from.
struct SymbolBlock {
    std::vector<Sample> samples;

    SymbolBlock() = default;
    explicit SymbolBlock(std::vector<Sample> s) : samples(std::move(s)) {}

    std::size_t size() const noexcept { return samples.size(); }
    bool empty() const noexcept { return samples.empty(); }
    const Sample& operator[](std::size_t i) const { return samples[i]; }
    Sample& operator[](std::size_t i) { return samples[i]; }

    friend bool operator==(const SymbolBlock&, const SymbolBlock&) = default;
};

// Throws InvalidSample if any component is NaN or infinite.
void require_finite(const SymbolBlock& block);

/// Square M-QAM geometry under a mean-energy budget.
///
/// Per-component levels are (2k - sqrt(M) + 1) d for k = 0 .. sqrt(M)-1, so
/// adjacent levels sit 2d apart and the outermost level is A = (sqrt(M)-1) d.
class ConstellationSpec {
  public:
    int order() const noexcept { return order_; }
    // sqrt(M): number of levels per real component.
    int side() const noexcept { return side_; }
    double power() const noexcept { return power_; }
    double spacing() const noexcept { return spacing_; }
    double bound() const noexcept { return bound_; }

    double level(int index) const noexcept { return (2 * index - side_ + 1) * spacing_; }
    std::vector<double> levels() const;
    // All M points, in-phase index major.
    std::vector<Sample> points() const;

    // Index of the nearest level; ties go to the level of larger magnitude.
    int nearest_index(double x) const;
    double quantize(double x) const { return level(nearest_index(x)); }
    double clip(double x) const;

    friend ConstellationSpec build_spec(int order, double power);

  private:
    ConstellationSpec(int order, int side, double power, double spacing)
        : order_(order), side_(side), power_(power), spacing_(spacing),
          bound_((side - 1) * spacing) {}

    int order_;
    int side_;
    double power_;
    double spacing_;
    double bound_;
};

// d = sqrt(3 Es / (2 (M - 1))): uniform use of the M points meets Es exactly.
ConstellationSpec build_spec(int order, double power);

SymbolBlock grid_quantize(const SymbolBlock& block, const ConstellationSpec& spec);
SymbolBlock clip(const SymbolBlock& block, const ConstellationSpec& spec);

// Mean of |s|^2 over the block.
double average_power(const SymbolBlock& block);
double average_power(std::span<const Sample> samples);

}  // namespace djcm
