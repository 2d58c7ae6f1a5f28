#pragma once

#include <array>
#include <cstdint>
#include <string_view>

namespace djcm {

// Identifies one reproducible draw sequence. Equal states yield equal
// sequences; distinct streams under one seed are statistically independent.
struct RngState {
    std::uint64_t seed = 0;
    std::uint64_t stream = 0;

    friend bool operator==(const RngState&, const RngState&) = default;
};

// Child stream `index` of `parent`. Deterministic and collision-resistant.
RngState substream(const RngState& parent, std::uint64_t index);

// Child stream keyed by a name such as "channel" or "noise1".
RngState named_stream(const RngState& parent, std::string_view name);

// The stream immediately after `state` (used for redraws).
inline RngState next_stream(const RngState& state) { return {state.seed, state.stream + 1}; }

/// Philox4x32-10 counter-based generator.
///
/// The key is the 64-bit seed, the upper half of the 128-bit counter holds
/// the stream id and the lower half counts blocks, so any (seed, stream)
/// pair can be opened anywhere without sequential warm-up.
class Rng {
  public:
    explicit Rng(const RngState& state);

    std::uint64_t next_u64();

    // Uniform on the open interval (0, 1), 53-bit resolution.
    double uniform();
    // Uniform on the open interval (lo, hi).
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
    // Standard normal via Box-Muller (one variate per call).
    double normal();

    const RngState& state() const noexcept { return state_; }

  private:
    void refill();

    RngState state_;
    std::uint64_t block_ = 0;
    std::array<std::uint32_t, 4> buffer_{};
    int used_ = 4;
};

std::uint64_t splitmix64(std::uint64_t x);

}  // namespace djcm
