#include "djcm/training.hpp"

#include <cmath>
#include <string>

#include "djcm/csv.hpp"
#include "djcm/error.hpp"

namespace djcm::toy {

using namespace ad;

std::string trace_csv(const std::vector<TraceRow>& rows) {
    csv::Writer w({"step", "phase", "loss", "rate_bits", "mse_hard", "mse_relaxed"});
    for (const auto& r : rows) {
        w.cell(r.step).cell(r.phase).cell(r.loss).cell(r.rate_bits).cell(r.mse_hard).cell(r.mse_relaxed);
        w.end_row();
    }
    return w.str();
}

EvalSettings settings_from(const TrainConfig& config) {
    EvalSettings s;
    s.channel = config.channel;
    s.power = config.power;
    s.eta1 = config.eta1;
    s.eta2 = config.eta2;
    return s;
}

namespace {

RngState step_state(const TrainConfig& config, int phase, int step) {
    const RngState train = named_stream(RngState{config.seed, 0}, "train");
    return substream(named_stream(train, "phase" + std::to_string(phase)), static_cast<std::uint64_t>(step));
}

ForwardOptions base_options(const TrainConfig& config, const RngState& st) {
    ForwardOptions o;
    o.channel = config.channel;
    o.power = config.power;
    o.eta1 = config.eta1;
    o.eta2 = config.eta2;
    o.lambda = config.lambda;
    o.rng = st;
    Rng pick(named_stream(st, "condition"));
    const auto idx = static_cast<std::size_t>(pick.uniform() * static_cast<double>(config.orders.size()));
    o.order = config.orders[std::min(idx, config.orders.size() - 1)];
    o.snr_db = config.snr_min == config.snr_max ? config.snr_min : pick.uniform(config.snr_min, config.snr_max);
    return o;
}

template <class Body>
void train_loop(ToyModel& model, const TrainConfig& config, int phase, int steps, double lr, Body&& body,
                std::vector<TraceRow>* trace) {
    std::vector<Var> params;
    for (auto& [name, v] : model.named_parameters()) {
        if (v->requires_grad) params.push_back(v);
    }
    Adam opt(params, lr);
    for (int step = 0; step < steps; ++step) {
        const RngState st = step_state(config, phase, step);
        const Tensor x = make_source_batch(static_cast<std::size_t>(config.batch), named_stream(st, "source"));
        const bool record = trace && (step % config.trace_every == 0 || step == steps - 1);
        opt.zero_grad();
        TraceRow row;
        const Var loss = body(x, st, record ? &row : nullptr);
        if (!std::isfinite(loss->item())) {
            throw Error(ErrorKind::TrainingDiverged,
                        "loss is not finite in phase " + std::to_string(phase) + " at step " + std::to_string(step));
        }
        backward(loss);
        opt.step();
        if (record) {
            row.step = step;
            row.phase = phase;
            row.loss = loss->item();
            trace->push_back(row);
        }
    }
    model.completed_phase = phase;
    model.lambda = config.lambda;
}

}  // namespace

void run_phase1(ToyModel& model, const TrainConfig& config, std::vector<TraceRow>* trace) {
    config.validate();
    model.set_trainable({ParamGroup::SourceCoder, ParamGroup::Prior});
    train_loop(
        model, config, 1, config.steps1, config.lr1,
        [&](const Tensor& x, const RngState& st, TraceRow* row) {
            ForwardOptions o = base_options(config, st);
            o.use_channel = false;
            ForwardResult r = forward(model, x, o);
            if (row) {
                row->rate_bits = r.rate->item();
                row->mse_relaxed = r.mse_aux->item();
                o.latents = Latents::Rounded;
                row->mse_hard = forward(model, x, o).mse_aux->item();
            }
            return r.loss;
        },
        trace);
}

void run_phase2(ToyModel& model, const TrainConfig& config, std::vector<TraceRow>* trace, Arm arm) {
    config.validate();
    if (model.completed_phase < 1) throw Error(ErrorKind::PhaseOrder, "phase 2 needs phase-1 parameters");
    model.set_trainable({ParamGroup::SourceCoder, ParamGroup::Prior, ParamGroup::JscEncoder, ParamGroup::JscDecoder});
    const Chain chain = arm == Arm::TwoPhase ? Chain::Relaxed : Chain::Hard;
    train_loop(
        model, config, 2, config.steps2, config.lr2,
        [&](const Tensor& x, const RngState& st, TraceRow* row) {
            ForwardOptions o = base_options(config, st);
            o.chain = chain;
            ForwardResult r = forward(model, x, o);
            if (row) {
                row->rate_bits = r.rate->item();
                ForwardOptions other = o;
                other.chain = chain == Chain::Hard ? Chain::Relaxed : Chain::Hard;
                const double alt = forward(model, x, other).mse_md->item();
                row->mse_hard = chain == Chain::Hard ? r.mse_md->item() : alt;
                row->mse_relaxed = chain == Chain::Relaxed ? r.mse_md->item() : alt;
            }
            return r.loss;
        },
        trace);
}

void run_phase3(ToyModel& model, const TrainConfig& config, std::vector<TraceRow>* trace) {
    config.validate();
    if (model.completed_phase < 2) throw Error(ErrorKind::PhaseOrder, "phase 3 needs phase-2 parameters");
    model.set_trainable({ParamGroup::Receiver});
    train_loop(
        model, config, 3, config.steps3, config.lr3,
        [&](const Tensor& x, const RngState& st, TraceRow* row) {
            ForwardOptions o = base_options(config, st);
            o.chain = Chain::Hard;
            o.latents = Latents::Rounded;
            ForwardResult r = forward(model, x, o);
            if (row) {
                row->rate_bits = r.rate->item();
                row->mse_hard = r.mse_md->item();
                ForwardOptions other = o;
                other.chain = Chain::Relaxed;
                row->mse_relaxed = forward(model, x, other).mse_md->item();
            }
            return r.loss;
        },
        trace);
}

EvalResult evaluate(const ToyModel& model, int order, double snr_db, Chain chain, std::size_t n_eval,
                    std::uint64_t seed, const EvalSettings& settings) {
    if (model.completed_phase < 2) throw Error(ErrorKind::PhaseOrder, "evaluation needs a phase-2 model");
    if (n_eval == 0) throw Error(ErrorKind::InvalidParams, "n_eval must be positive");
    const RngState root = named_stream(RngState{seed, 0}, "eval");
    double sq_err = 0.0, symbols = 0.0;
    EvalResult res;
    for (std::size_t start = 0, b = 0; start < n_eval; start += settings.batch, ++b) {
        const std::size_t n = std::min(settings.batch, n_eval - start);
        const RngState st = substream(root, b);
        const Tensor x = make_source_batch(n, named_stream(st, "source"));
        ForwardOptions o;
        o.chain = chain;
        o.latents = Latents::Rounded;
        o.order = order;
        o.snr_db = snr_db;
        o.channel = settings.channel;
        o.power = settings.power;
        o.eta1 = settings.eta1;
        o.eta2 = settings.eta2;
        o.rng = st;
        const ForwardResult r = forward(model, x, o);
        sq_err += r.mse_md->item() * static_cast<double>(n * kSourceDim);
        for (int k : r.symbols) symbols += k;
        res.max_power = std::max(res.max_power, r.max_power);
    }
    res.mse = sq_err / static_cast<double>(n_eval * kSourceDim);
    res.psnr_db = 10.0 * std::log10(1.0 / res.mse);
    res.cbr = symbols / static_cast<double>(n_eval * kSourceDim);
    return res;
}

}  // namespace djcm::toy
