#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace djcm {

using Mask = std::vector<std::uint8_t>;

// Two-stage symbol allocation for l embeddings of C symbols each.
struct MaskPlan {
    int embedding_count = 0;
    int channel_width = 0;  // C
    double eta1 = 0.0;
    double eta2 = 0.0;
    std::vector<double> rates;  // bits per embedding
    std::vector<int> lengths1;
    std::vector<int> lengths2;
    std::vector<Mask> masks1;
    std::vector<Mask> masks2;

    int total_symbols() const;  // sum of stage-2 lengths
};

// round-half-away-from-zero(eta * rate_bits) clamped to [0, cap].
int symbol_length(double rate_bits, double eta, int cap);

// k leading ones followed by cap - k zeros.
Mask mask_vector(int k, int cap);

// Requires eta1 > eta2 > 0. Stage-2 masks nest inside stage-1 masks.
MaskPlan hierarchical_plan(std::span<const double> rates, double eta1, double eta2, int cap);

// Channel bandwidth ratio: complex symbols per source dimension.
double cbr(long long n_symbols, long long n_source);

// Columns: embedding,rate_bits,k1,k2
std::string plan_csv(const MaskPlan& plan);

}  // namespace djcm
