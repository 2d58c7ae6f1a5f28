#pragma once

#include "djcm/channel.hpp"
#include "djcm/constellation.hpp"
#include "djcm/rng.hpp"

namespace djcm {

// Whether the uniform substitution noise is drawn or pinned to zero.
enum class Dither { Random, Zero };

struct HardStages {
    SymbolBlock modulated;    // s-hat = q(s)
    SymbolBlock received;     // s-tilde = channel(s-hat)
    SymbolBlock demodulated;  // s-bar = q(s-tilde)
};

struct RelaxedStages {
    SymbolBlock dithered;  // o-hat = s + u1
    SymbolBlock received;  // o-tilde = channel(o-hat)
    SymbolBlock output;    // o-bar = o-tilde + u2
};

// Throws ConstraintViolation if any component lies outside [-A, A].
void require_clipped(const SymbolBlock& s, const ConstellationSpec& spec);

// Adds independent U(-half_width, half_width) draws to each I and Q component.
SymbolBlock add_uniform_noise(const SymbolBlock& block, double half_width, const RngState& rng,
                              Dither dither = Dither::Random);

// Modulate, transmit, demodulate. Channel draws use named_stream(rng, "channel").
HardStages hard_chain(const SymbolBlock& s, const ConstellationSpec& spec, const ChannelParams& params,
                      const RngState& rng);

// The uniform-noise surrogate of hard_chain: U(-d, d) replaces both
// quantizers. Noise draws use the "noise1" and "noise2" sub-streams.
RelaxedStages relaxed_chain(const SymbolBlock& s, const ConstellationSpec& spec, const ChannelParams& params,
                            const RngState& rng, Dither dither = Dither::Random);

}  // namespace djcm
