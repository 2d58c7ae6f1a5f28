#pragma once

#include <cstdint>

#include "djcm/constellation.hpp"
#include "djcm/rng.hpp"

namespace djcm {

enum class ChannelKind { Awgn, Rayleigh };

// snr_db = +infinity denotes the noiseless channel (sigma^2 = 0).
struct ChannelParams {
    ChannelKind kind = ChannelKind::Awgn;
    double snr_db = 10.0;
    double power = 1.0;
};

void validate(const ChannelParams& params);

// sigma^2 = Es / 10^(snr_db / 10): total complex noise variance.
double noise_sigma2(const ChannelParams& params);

struct TransmitResult {
    SymbolBlock output;
    Sample gain{1.0, 0.0};
    // Stream actually used; differs from the requested one after a redraw.
    RngState stream_used;
    int redraws = 0;
};

/// Channel model. AWGN adds circular Gaussian noise with per-component
/// variance sigma^2/2. Rayleigh draws one CN(0,1) gain per block and
/// zero-forces at the receiver: out = (h s + n) / h.
TransmitResult transmit_detailed(const SymbolBlock& block, const ChannelParams& params, const RngState& rng);

inline SymbolBlock transmit(const SymbolBlock& block, const ChannelParams& params, const RngState& rng) {
    return transmit_detailed(block, params, rng).output;
}

}  // namespace djcm
