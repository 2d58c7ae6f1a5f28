#include "djcm/toy_model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "djcm/entropy_model.hpp"
#include "djcm/error.hpp"
#include "djcm/rate_control.hpp"

namespace djcm::toy {

using namespace ad;

void TrainConfig::validate() const {
    if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw Error(ErrorKind::Configuration, "lambda must be >= 0");
    if (steps1 <= 0 || steps2 <= 0 || steps3 <= 0) {
        throw Error(ErrorKind::Configuration, "phase step counts must be positive");
    }
    if (!(lr1 > 0.0) || !(lr2 > 0.0) || !(lr3 > 0.0)) {
        throw Error(ErrorKind::Configuration, "learning rates must be positive");
    }
    if (orders.empty()) throw Error(ErrorKind::Configuration, "order set is empty");
    for (int m : orders) (void)build_spec(m, power);
    if (!(snr_min <= snr_max) || !std::isfinite(snr_min) || !std::isfinite(snr_max)) {
        throw Error(ErrorKind::Configuration, "snr range must satisfy min <= max");
    }
    if (!(eta1 > eta2 && eta2 > 0.0)) throw Error(ErrorKind::Configuration, "eta1 > eta2 > 0 required");
    if (!(power > 0.0)) throw Error(ErrorKind::Configuration, "power must be positive");
    if (batch <= 0) throw Error(ErrorKind::Configuration, "batch must be positive");
    if (trace_every <= 0) throw Error(ErrorKind::Configuration, "trace_every must be positive");
}

Tensor gauss_markov_batch(std::size_t n, const RngState& rng, double rho) {
    if (n == 0) throw Error(ErrorKind::InvalidParams, "batch size must be at least 1");
    Tensor out({n, kSourceDim});
    const double innov = std::sqrt(1.0 - rho * rho);
    for (std::size_t i = 0; i < n; ++i) {
        Rng gen(substream(rng, i));
        double v = gen.normal();
        out.at(i, 0) = v;
        for (std::size_t j = 1; j < kSourceDim; ++j) {
            v = rho * v + innov * gen.normal();
            out.at(i, j) = v;
        }
    }
    return out;
}

double squash(double v) { return std::clamp((v + 4.0) / 8.0, 0.0, 1.0); }

Tensor make_source_batch(std::size_t n, const RngState& rng) {
    Tensor t = gauss_markov_batch(n, rng);
    for (double& v : t.data) v = squash(v);
    return t;
}

Var ConditioningBlock::operator()(const Var& feature, const Tensor& condition, const Tensor& onehot) const {
    Var gate = softplus(gate2(relu(gate1(constant(condition)))));
    return add(mul(feature, gate), matmul(constant(onehot), shift));
}

namespace {

Dense make_dense(Rng& rng, std::size_t in, std::size_t out) {
    const double bound = std::sqrt(6.0 / static_cast<double>(in + out));
    Tensor w({in, out});
    for (double& v : w.data) v = rng.uniform(-bound, bound);
    return {parameter(std::move(w)), parameter(Tensor({out}, 0.0))};
}

ConditioningBlock make_block(Rng& rng, std::size_t width) {
    ConditioningBlock b;
    b.gate1 = make_dense(rng, 2, 16);
    b.gate2 = make_dense(rng, 16, width);
    Tensor shift({std::size(kOrderSet), width});
    for (double& v : shift.data) v = rng.uniform(-0.1, 0.1);
    b.shift = parameter(std::move(shift));
    return b;
}

void push(std::vector<std::pair<std::string, Var>>& out, const std::string& name, const Dense& d) {
    out.emplace_back(name + ".w", d.w);
    out.emplace_back(name + ".b", d.b);
}

void push(std::vector<std::pair<std::string, Var>>& out, const std::string& name, const ConditioningBlock& c) {
    push(out, name + ".gate1", c.gate1);
    push(out, name + ".gate2", c.gate2);
    out.emplace_back(name + ".shift", c.shift);
}

double max_row_power(const Tensor& s, std::span<const int> active) {
    double best = 0.0;
    for (std::size_t i = 0; i < s.rows(); ++i) {
        if (active[i] <= 0) continue;
        double e = 0.0;
        for (std::size_t j = 0; j < s.cols(); ++j) e += s.at(i, j) * s.at(i, j);
        best = std::max(best, e / active[i]);
    }
    return best;
}

}  // namespace

ToyModel::ToyModel(std::uint64_t seed) {
    Rng rng(named_stream(RngState{seed, 0}, "init"));
    ga1 = make_dense(rng, kSourceDim, kHidden);
    ga2 = make_dense(rng, kHidden, kHidden);
    ga3 = make_dense(rng, kHidden, kLatentDim);
    gs1 = make_dense(rng, kLatentDim, kHidden);
    gs2 = make_dense(rng, kHidden, kHidden);
    gs3 = make_dense(rng, kHidden, kSourceDim);
    ha1 = make_dense(rng, kLatentDim, 32);
    ha2 = make_dense(rng, 32, kHyperDim);
    hs1 = make_dense(rng, kHyperDim, 32);
    hs2 = make_dense(rng, 32, 2 * kLatentDim);
    prior_loc = parameter(Tensor({kHyperDim}, 0.0));
    prior_scale = parameter(Tensor({kHyperDim}, 0.5));
    fa1 = make_dense(rng, kLatentDim, kHidden);
    fa_cond = make_block(rng, kHidden);
    fa2 = make_dense(rng, kHidden, kChannelReals);
    fa3 = make_dense(rng, kChannelReals, kChannelReals);
    ref1 = make_dense(rng, 2 * kChannelReals, kChannelReals);
    ref2 = make_dense(rng, kChannelReals, kChannelReals);
    fd1 = make_dense(rng, kChannelReals, kHidden);
    fd_cond = make_block(rng, kHidden);
    fd2 = make_dense(rng, kHidden, kLatentDim);
}

std::vector<std::pair<std::string, Var>> ToyModel::grouped(ParamGroup g) const {
    std::vector<std::pair<std::string, Var>> out;
    switch (g) {
        case ParamGroup::SourceCoder:
            push(out, "ga1", ga1), push(out, "ga2", ga2), push(out, "ga3", ga3);
            push(out, "ha1", ha1), push(out, "ha2", ha2);
            push(out, "hs1", hs1), push(out, "hs2", hs2);
            push(out, "gs1", gs1), push(out, "gs2", gs2), push(out, "gs3", gs3);
            break;
        case ParamGroup::Prior:
            out.emplace_back("prior.loc", prior_loc);
            out.emplace_back("prior.scale", prior_scale);
            break;
        case ParamGroup::JscEncoder:
            push(out, "fa1", fa1), push(out, "fa_cond", fa_cond), push(out, "fa2", fa2), push(out, "fa3", fa3);
            break;
        case ParamGroup::JscDecoder:
            push(out, "ref1", ref1), push(out, "ref2", ref2);
            push(out, "fd1", fd1), push(out, "fd_cond", fd_cond), push(out, "fd2", fd2);
            break;
        case ParamGroup::Transmitter:
            push(out, "ga1", ga1), push(out, "ga2", ga2), push(out, "ga3", ga3);
            push(out, "ha1", ha1), push(out, "ha2", ha2);
            for (auto& p : grouped(ParamGroup::JscEncoder)) out.push_back(p);
            break;
        case ParamGroup::Receiver:
            push(out, "hs1", hs1), push(out, "hs2", hs2);
            push(out, "gs1", gs1), push(out, "gs2", gs2), push(out, "gs3", gs3);
            for (auto& p : grouped(ParamGroup::JscDecoder)) out.push_back(p);
            break;
    }
    return out;
}

std::vector<std::pair<std::string, Var>> ToyModel::named_parameters() const {
    std::vector<std::pair<std::string, Var>> out;
    for (ParamGroup g : {ParamGroup::SourceCoder, ParamGroup::Prior, ParamGroup::JscEncoder, ParamGroup::JscDecoder}) {
        for (auto& p : grouped(g)) out.push_back(std::move(p));
    }
    return out;
}

std::vector<Var> ToyModel::parameters(std::initializer_list<ParamGroup> groups) const {
    std::vector<Var> out;
    for (ParamGroup g : groups) {
        for (auto& [name, v] : grouped(g)) {
            if (std::find(out.begin(), out.end(), v) == out.end()) out.push_back(v);
        }
    }
    return out;
}

void ToyModel::set_trainable(std::initializer_list<ParamGroup> groups) {
    const std::vector<Var> live = parameters(groups);
    for (auto& [name, v] : named_parameters()) {
        const bool on = std::find(live.begin(), live.end(), v) != live.end();
        v->requires_grad = on;
        if (!on) v->grad = Tensor(v->value.shape, 0.0);
    }
}

ToyModel ToyModel::clone() const {
    ToyModel copy = *this;  // shares nodes until rebound
    auto rebind = [](Var& v) {
        auto n = std::make_shared<Node>(*v);
        n->grad = Tensor();
        v = n;
    };
    for (Dense* d : {&copy.ga1, &copy.ga2, &copy.ga3, &copy.gs1, &copy.gs2, &copy.gs3, &copy.ha1, &copy.ha2,
                     &copy.hs1, &copy.hs2, &copy.fa1, &copy.fa2, &copy.fa3, &copy.ref1, &copy.ref2, &copy.fd1,
                     &copy.fd2, &copy.fa_cond.gate1, &copy.fa_cond.gate2, &copy.fd_cond.gate1, &copy.fd_cond.gate2}) {
        rebind(d->w);
        rebind(d->b);
    }
    rebind(copy.fa_cond.shift);
    rebind(copy.fd_cond.shift);
    rebind(copy.prior_loc);
    rebind(copy.prior_scale);
    return copy;
}

Var loss_rd(const Var& x, const Var& x_hat, const Var& x_hat_md, const Var& rate_y, const Var& rate_z,
            double lambda) {
    Var distortion = add(mse(x, x_hat_md), mse(x, x_hat));
    return add(add(rate_y, rate_z), scale(distortion, lambda));
}

Tensor condition_rows(std::size_t rows, int order, double snr_db) {
    Tensor c({rows, 2});
    const double snr = std::isfinite(snr_db) ? snr_db : 40.0;
    for (std::size_t i = 0; i < rows; ++i) {
        c.at(i, 0) = snr / 20.0;
        c.at(i, 1) = std::log2(static_cast<double>(order)) / 10.0;
    }
    return c;
}

Tensor onehot_rows(std::size_t rows, int order) {
    Tensor h({rows, std::size(kOrderSet)}, 0.0);
    for (std::size_t k = 0; k < std::size(kOrderSet); ++k) {
        if (kOrderSet[k] != order) continue;
        for (std::size_t i = 0; i < rows; ++i) h.at(i, k) = 1.0;
    }
    return h;
}

double hard_power_scale(std::span<const double> row, int active_symbols, const ConstellationSpec& spec,
                        double power) {
    if (active_symbols <= 0) return 1.0;
    auto energy = [&](double alpha) {
        double e = 0.0;
        for (double v : row) {
            if (v == 0.0) continue;  // masked positions stay zero after re-masking
            const double q = spec.quantize(alpha * v);
            e += q * q;
        }
        return e / active_symbols;
    };
    if (energy(1.0) <= power) return 1.0;
    double lo = 0.0, hi = 1.0;
    for (int it = 0; it < 60; ++it) {
        const double mid = 0.5 * (lo + hi);
        (energy(mid) <= power ? lo : hi) = mid;
    }
    return lo > 0.0 ? lo : std::numeric_limits<double>::min();
}

ForwardResult forward(const ToyModel& m, const Tensor& x_in, const ForwardOptions& opt) {
    const std::size_t batch = x_in.rows();
    const double n_source = static_cast<double>(batch * kSourceDim);
    ForwardResult out;
    Var x = constant(x_in);

    Var y = m.ga3(relu(m.ga2(relu(m.ga1(x)))));
    Var z = m.ha2(relu(m.ha1(y)));
    out.y = y;
    auto latent = [&](const Var& v, const char* name) {
        if (opt.latents == Latents::Noisy) return uniform_noise(v, 0.5, named_stream(opt.rng, name));
        Tensor r = v->value;
        for (double& e : r.data) e = std::round(e);
        return constant(std::move(r));
    };
    Var z_t = latent(z, "noise_z");
    Var y_t = latent(y, "noise_y");

    Var rate_z =
        logistic_rate_bits(z_t, broadcast_rows(m.prior_loc, batch), softplus(broadcast_rows(m.prior_scale, batch)));
    Var hs = m.hs2(relu(m.hs1(z_t)));
    Var mu = slice_cols(hs, 0, kLatentDim);
    Var sigma = softplus(slice_cols(hs, kLatentDim, kLatentDim));
    Var rate_y = gu_rate_bits(y_t, mu, sigma);
    rate_y = scale(rate_y, 1.0 / n_source);
    rate_z = scale(rate_z, 1.0 / n_source);
    out.rate = add(rate_y, rate_z);

    Var x_hat = m.gs3(relu(m.gs2(relu(m.gs1(y_t)))));
    out.mse_aux = mse(x, x_hat);
    if (!opt.use_channel) {
        out.loss = add(out.rate, scale(out.mse_aux, opt.lambda));
        return out;
    }

    // Rate matching from the entropy model.
    const ConstellationSpec spec = build_spec(opt.order, opt.power);
    out.mask1 = Tensor({batch, kChannelReals}, 0.0);
    out.mask2 = Tensor({batch, kChannelReals}, 0.0);
    out.symbols.assign(batch, 0);
    for (std::size_t i = 0; i < batch; ++i) {
        std::vector<double> rates(kEmbeddings, 0.0);
        for (std::size_t j = 0; j < kLatentDim; ++j) {
            const double p = std::max(
                gu_likelihood(y_t->value.at(i, j), mu->value.at(i, j), sigma->value.at(i, j)), kLikelihoodFloor);
            rates[j / kLatentsPerEmbedding] -= std::log2(p);
        }
        const MaskPlan plan = hierarchical_plan(rates, opt.eta1, opt.eta2, kSymbolsPerEmbedding);
        for (int e = 0; e < kEmbeddings; ++e) {
            const std::size_t base = static_cast<std::size_t>(e) * 2 * kSymbolsPerEmbedding;
            for (int k = 0; k < plan.lengths1[e]; ++k) {
                out.mask1.at(i, base + 2 * k) = out.mask1.at(i, base + 2 * k + 1) = 1.0;
            }
            for (int k = 0; k < plan.lengths2[e]; ++k) {
                out.mask2.at(i, base + 2 * k) = out.mask2.at(i, base + 2 * k + 1) = 1.0;
            }
        }
        out.symbols[i] = plan.total_symbols();
    }

    const Tensor cond = condition_rows(batch, opt.order, opt.snr_db);
    const Tensor onehot = onehot_rows(batch, opt.order);
    Var h = m.fa_cond(relu(m.fa1(y_t)), cond, onehot);
    Var u = mul_constant(m.fa2(h), out.mask1);
    Var v = mul_constant(m.fa3(u), out.mask2);
    Var s = clip(power_limit_rows(v, out.symbols, opt.power), spec.bound());

    ChannelParams params{opt.channel, opt.snr_db, opt.power};
    Var o_bar;
    if (opt.chain == Chain::Relaxed) {
        out.transmitted = s->value;
        Var o = mul_constant(uniform_noise(s, spec.spacing(), named_stream(opt.rng, "noise1")), out.mask2);
        Var o_t = channel(o, params, named_stream(opt.rng, "channel"), &out.mask2);
        o_bar = mul_constant(uniform_noise(o_t, spec.spacing(), named_stream(opt.rng, "noise2")), out.mask2);
    } else {
        Tensor alpha({batch, kChannelReals}, 1.0);
        for (std::size_t i = 0; i < batch; ++i) {
            const std::span<const double> row(s->value.data.data() + i * kChannelReals, kChannelReals);
            const double a = hard_power_scale(row, out.symbols[i], spec, opt.power);
            for (std::size_t j = 0; j < kChannelReals; ++j) alpha.at(i, j) = a;
        }
        Var s_hat = mul_constant(ste_quantize(mul_constant(s, alpha), spec), out.mask2);
        out.transmitted = s_hat->value;
        Var s_t = channel(s_hat, params, named_stream(opt.rng, "channel"), &out.mask2);
        o_bar = mul_constant(ste_quantize(s_t, spec), out.mask2);
    }
    out.max_power = max_row_power(out.transmitted, out.symbols);

    Var r = m.ref2(relu(m.ref1(concat_cols(o_bar, constant(out.mask2)))));
    r = add(o_bar, r);
    Var y_md = m.fd2(m.fd_cond(relu(m.fd1(r)), cond, onehot));
    Var x_hat_md = m.gs3(relu(m.gs2(relu(m.gs1(y_md)))));
    out.mse_md = mse(x, x_hat_md);
    out.loss = loss_rd(x, x_hat, x_hat_md, rate_y, rate_z, opt.lambda);
    return out;
}

}  // namespace djcm::toy
