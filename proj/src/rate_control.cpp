#include "djcm/rate_control.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "djcm/csv.hpp"
#include "djcm/error.hpp"

namespace djcm {

int MaskPlan::total_symbols() const { return std::accumulate(lengths2.begin(), lengths2.end(), 0); }

int symbol_length(double rate_bits, double eta, int cap) {
    if (!(rate_bits >= 0.0)) throw Error(ErrorKind::InvalidRate, "rate must be nonnegative");
    if (!(eta > 0.0)) throw Error(ErrorKind::Configuration, "eta must be positive");
    if (cap < 1) throw Error(ErrorKind::Configuration, "cap must be at least 1");
    const double scaled = eta * rate_bits;
    if (scaled >= cap) return cap;
    // std::round rounds halves away from zero.
    return std::clamp(static_cast<int>(std::round(scaled)), 0, cap);
}

Mask mask_vector(int k, int cap) {
    if (cap < 0 || k < 0 || k > cap) {
        throw Error(ErrorKind::Bounds, "mask length " + std::to_string(k) + " outside [0, " + std::to_string(cap) + "]");
    }
    Mask m(cap, 0);
    std::fill_n(m.begin(), k, std::uint8_t{1});
    return m;
}

MaskPlan hierarchical_plan(std::span<const double> rates, double eta1, double eta2, int cap) {
    if (!(eta2 > 0.0) || !(eta1 > eta2)) throw Error(ErrorKind::Configuration, "need eta1 > eta2 > 0");
    MaskPlan plan;
    plan.embedding_count = static_cast<int>(rates.size());
    plan.channel_width = cap;
    plan.eta1 = eta1;
    plan.eta2 = eta2;
    plan.rates.assign(rates.begin(), rates.end());
    for (double r : rates) {
        const int k1 = symbol_length(r, eta1, cap);
        const int k2 = symbol_length(r, eta2, cap);
        plan.lengths1.push_back(k1);
        plan.lengths2.push_back(k2);
        plan.masks1.push_back(mask_vector(k1, cap));
        plan.masks2.push_back(mask_vector(k2, cap));
    }
    return plan;
}

double cbr(long long n_symbols, long long n_source) {
    if (n_source <= 0) throw Error(ErrorKind::Division, "source length must be positive");
    if (n_symbols < 0) throw Error(ErrorKind::InvalidLength, "symbol count must be nonnegative");
    return static_cast<double>(n_symbols) / static_cast<double>(n_source);
}

std::string plan_csv(const MaskPlan& plan) {
    csv::Writer w{"embedding", "rate_bits", "k1", "k2"};
    for (int i = 0; i < plan.embedding_count; ++i) {
        w.cell(i).cell(plan.rates[i]).cell(plan.lengths1[i]).cell(plan.lengths2[i]);
        w.end_row();
    }
    return w.str();
}

}  // namespace djcm
