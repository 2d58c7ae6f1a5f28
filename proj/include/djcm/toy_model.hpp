#pragma once

#include <cstdint>
#include <initializer_list>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "djcm/channel.hpp"
#include "djcm/constellation.hpp"
#include "djcm/diffcore.hpp"
#include "djcm/rng.hpp"

namespace djcm::toy {

inline constexpr std::size_t kSourceDim = 64;   // n_x
inline constexpr std::size_t kLatentDim = 32;   // n_y
inline constexpr std::size_t kHyperDim = 8;     // n_z
inline constexpr std::size_t kHidden = 128;
inline constexpr int kSymbolsPerEmbedding = 8;  // C
inline constexpr int kEmbeddings = 4;           // l
inline constexpr std::size_t kLatentsPerEmbedding = kLatentDim / kEmbeddings;
// Each embedding owns C complex symbols = 2C real encoder outputs.
inline constexpr std::size_t kChannelReals = 2 * kSymbolsPerEmbedding * kEmbeddings;
inline constexpr int kOrderSet[] = {4, 16, 64, 256, 1024};  // one-hot positions

struct TrainConfig {
    double lambda = 100.0;
    int steps1 = 2000;
    int steps2 = 2000;
    int steps3 = 500;
    double lr1 = 1e-3;
    double lr2 = 1e-3;
    double lr3 = 1e-4;
    std::vector<int> orders{4, 16, 64, 256, 1024};
    double snr_min = 0.0;
    double snr_max = 13.0;
    double eta1 = 0.4;
    double eta2 = 0.2;
    double power = 1.0;
    int batch = 32;
    std::uint64_t seed = 1;
    ChannelKind channel = ChannelKind::Awgn;
    int trace_every = 10;

    void validate() const;
};

// Gauss-Markov rows (rho = 0.9, unit marginal variance) before squashing.
ad::Tensor gauss_markov_batch(std::size_t n, const RngState& rng, double rho = 0.9);
// The same rows squashed affinely into [0, 1].
ad::Tensor make_source_batch(std::size_t n, const RngState& rng);
double squash(double v);

struct Dense {
    ad::Var w;  // [in, out]
    ad::Var b;  // [out]
    ad::Var operator()(const ad::Var& x) const { return ad::affine(x, w, b); }
};

// feature * softplus(MLP(c)) + onehot(M) W
struct ConditioningBlock {
    Dense gate1;
    Dense gate2;
    ad::Var shift;  // [|order set|, width]

    ad::Var operator()(const ad::Var& feature, const ad::Tensor& condition, const ad::Tensor& onehot) const;
};

enum class ParamGroup { SourceCoder, Transmitter, Receiver, Prior, JscEncoder, JscDecoder };

class ToyModel {
  public:
    explicit ToyModel(std::uint64_t seed);

    // Independent copy of every parameter array.
    ToyModel clone() const;

    std::vector<std::pair<std::string, ad::Var>> named_parameters() const;
    std::vector<ad::Var> parameters(std::initializer_list<ParamGroup> groups) const;
    // Sets requires_grad on everything and zeroes gradients of the rest.
    void set_trainable(std::initializer_list<ParamGroup> groups);

    Dense ga1, ga2, ga3;
    Dense gs1, gs2, gs3;
    Dense ha1, ha2;
    Dense hs1, hs2;
    ad::Var prior_loc, prior_scale;  // [n_z]; scale passes through softplus
    Dense fa1;
    ConditioningBlock fa_cond;
    Dense fa2, fa3;
    Dense ref1, ref2;
    Dense fd1;
    ConditioningBlock fd_cond;
    Dense fd2;

    int completed_phase = 0;
    double lambda = 0.0;

  private:
    ToyModel() = default;
    std::vector<std::pair<std::string, ad::Var>> grouped(ParamGroup g) const;
};

enum class Chain { Hard, Relaxed };
enum class Latents { Noisy, Rounded };

struct ForwardOptions {
    bool use_channel = true;
    Chain chain = Chain::Relaxed;
    Latents latents = Latents::Noisy;
    int order = 4;
    double snr_db = 10.0;
    ChannelKind channel = ChannelKind::Awgn;
    double power = 1.0;
    double eta1 = 0.4;
    double eta2 = 0.2;
    double lambda = 0.0;
    RngState rng;
};

struct ForwardResult {
    ad::Var loss;
    ad::Var rate;     // (rate_y + rate_z) bits per source dimension, batch mean
    ad::Var mse_md;   // D(x, x_hat_md); null without channel
    ad::Var mse_aux;  // D(x, g_s(y_tilde))
    ad::Var y;        // analysis output before noise/rounding
    ad::Tensor transmitted;  // s (relaxed) or s-hat (hard), masked
    ad::Tensor mask1;
    ad::Tensor mask2;
    std::vector<int> symbols;  // stage-2 complex symbols per row
    double max_power = 0.0;    // largest per-row mean energy per active symbol
};

/// rate_y + rate_z + lambda (D(x, x_hat_md) + D(x, x_hat)).
ad::Var loss_rd(const ad::Var& x, const ad::Var& x_hat, const ad::Var& x_hat_md, const ad::Var& rate_y,
                const ad::Var& rate_z, double lambda);

ForwardResult forward(const ToyModel& model, const ad::Tensor& x, const ForwardOptions& options);

// Condition vector [snr/20, log2(M)/10] and one-hot over kOrderSet, repeated per row.
ad::Tensor condition_rows(std::size_t rows, int order, double snr_db);
ad::Tensor onehot_rows(std::size_t rows, int order);

// Largest alpha in (0, 1] with mean |q(alpha s)|^2 over the active symbols <= power.
double hard_power_scale(std::span<const double> row, int active_symbols, const ConstellationSpec& spec,
                        double power);

}  // namespace djcm::toy
