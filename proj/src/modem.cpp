#include "djcm/modem.hpp"

#include <cmath>
#include <string>

#include "djcm/error.hpp"

namespace djcm {

void require_clipped(const SymbolBlock& s, const ConstellationSpec& spec) {
    require_finite(s);
    const double a = spec.bound();
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (std::abs(s[i].real()) > a || std::abs(s[i].imag()) > a) {
            throw Error(ErrorKind::ConstraintViolation,
                        "sample " + std::to_string(i) + " lies outside the clipping bound; clip before modulating");
        }
    }
}

SymbolBlock add_uniform_noise(const SymbolBlock& block, double half_width, const RngState& rng, Dither dither) {
    SymbolBlock out = block;
    if (dither == Dither::Zero) return out;
    Rng gen(rng);
    for (Sample& s : out.samples) {
        const double ur = gen.uniform(-half_width, half_width);
        const double ui = gen.uniform(-half_width, half_width);
        s += Sample(ur, ui);
    }
    return out;
}

HardStages hard_chain(const SymbolBlock& s, const ConstellationSpec& spec, const ChannelParams& params,
                      const RngState& rng) {
    require_clipped(s, spec);
    HardStages out;
    out.modulated = grid_quantize(s, spec);
    out.received = transmit(out.modulated, params, named_stream(rng, "channel"));
    out.demodulated = grid_quantize(out.received, spec);
    return out;
}

RelaxedStages relaxed_chain(const SymbolBlock& s, const ConstellationSpec& spec, const ChannelParams& params,
                            const RngState& rng, Dither dither) {
    require_clipped(s, spec);
    const double d = spec.spacing();
    RelaxedStages out;
    out.dithered = add_uniform_noise(s, d, named_stream(rng, "noise1"), dither);
    out.received = transmit(out.dithered, params, named_stream(rng, "channel"));
    out.output = add_uniform_noise(out.received, d, named_stream(rng, "noise2"), dither);
    return out;
}

}  // namespace djcm
