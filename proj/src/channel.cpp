#include "djcm/channel.hpp"

#include <cmath>

#include "djcm/error.hpp"

namespace djcm {

namespace {
constexpr double kMinGain = 1e-12;
constexpr int kMaxRedraws = 64;
}  // namespace

void validate(const ChannelParams& params) {
    if (!(params.power > 0.0) || !std::isfinite(params.power)) {
        throw Error(ErrorKind::InvalidParams, "channel power must be positive and finite");
    }
    if (std::isnan(params.snr_db) || params.snr_db == -INFINITY) {
        throw Error(ErrorKind::InvalidParams, "snr_db must be finite or +inf");
    }
}

double noise_sigma2(const ChannelParams& params) {
    validate(params);
    if (std::isinf(params.snr_db)) return 0.0;
    return params.power / std::pow(10.0, params.snr_db / 10.0);
}

TransmitResult transmit_detailed(const SymbolBlock& block, const ChannelParams& params, const RngState& rng) {
    require_finite(block);
    const double sigma2 = noise_sigma2(params);
    const double component_std = std::sqrt(sigma2 / 2.0);

    TransmitResult result;
    RngState state = rng;
    for (int attempt = 0;; ++attempt) {
        Rng gen(state);
        Sample h{1.0, 0.0};
        if (params.kind == ChannelKind::Rayleigh) {
            const double re = gen.normal() * std::sqrt(0.5);
            const double im = gen.normal() * std::sqrt(0.5);
            h = {re, im};
            if (std::abs(h) < kMinGain) {
                if (attempt + 1 >= kMaxRedraws) throw Error(ErrorKind::InvalidParams, "fading gain redraw limit hit");
                state = next_stream(state);
                continue;
            }
        }
        result.output.samples.resize(block.size());
        for (std::size_t i = 0; i < block.size(); ++i) {
            Sample n{0.0, 0.0};
            if (sigma2 > 0.0) {
                const double nr = gen.normal() * component_std;
                const double ni = gen.normal() * component_std;
                n = {nr, ni};
            }
            // (h s + n) / h written as s + n / h so a noiseless block passes bit-exactly.
            result.output[i] = params.kind == ChannelKind::Rayleigh ? block[i] + n / h : block[i] + n;
        }
        result.gain = h;
        result.stream_used = state;
        result.redraws = attempt;
        return result;
    }
}

}  // namespace djcm
