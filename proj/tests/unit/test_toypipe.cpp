#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "djcm/checkpoint.hpp"
#include "djcm/training.hpp"
#include "helpers.hpp"

using namespace djcm;
using namespace djcm::ad;
using namespace djcm::toy;

namespace {

TrainConfig small_config() {
    TrainConfig c;
    c.lambda = 1000.0;
    c.steps1 = 300;
    c.steps2 = 300;
    c.steps3 = 100;
    c.batch = 16;
    c.seed = 3;
    c.trace_every = 25;
    return c;
}

// Trained once and shared by the structural tests below.
struct Trained {
    TrainConfig config = small_config();
    ToyModel after1{3};
    ToyModel after2{3};
    ToyModel after3{3};
    std::vector<TraceRow> trace;

    Trained() {
        run_phase1(after1, config, &trace);
        after2 = after1.clone();
        run_phase2(after2, config, &trace);
        after3 = after2.clone();
        run_phase3(after3, config, &trace);
    }
};

const Trained& trained() {
    static const Trained t;
    return t;
}

ForwardOptions options(int order, double snr, Chain chain, std::uint64_t seed = 1) {
    ForwardOptions o;
    o.order = order;
    o.snr_db = snr;
    o.chain = chain;
    o.rng = {seed, 0};
    o.lambda = 1000.0;
    return o;
}

}  // namespace

TEST_CASE("source batches") {
    const Tensor raw = gauss_markov_batch(100000, {1, 0});
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < raw.rows(); ++i) {
        for (std::size_t j = 0; j + 1 < kSourceDim; ++j) num += raw.at(i, j) * raw.at(i, j + 1);
        for (std::size_t j = 0; j < kSourceDim; ++j) den += raw.at(i, j) * raw.at(i, j);
    }
    const double rho = num / (static_cast<double>(raw.rows() * (kSourceDim - 1))) /
                       (den / static_cast<double>(raw.rows() * kSourceDim));
    CHECK(std::abs(rho - 0.9) <= 0.01);

    const Tensor a = make_source_batch(64, {2, 0});
    CHECK(a == make_source_batch(64, {2, 0}));
    for (double v : a.data) {
        CHECK(v >= 0.0);
        CHECK(v <= 1.0);
    }
    CHECK(error_kind([] { make_source_batch(0, {1, 0}); }) == ErrorKind::InvalidParams);
}

TEST_CASE("loss_rd arithmetic") {
    // Inputs chosen so the two MSE terms are 0.1 and 0.2 exactly in the arithmetic.
    const Var x = constant(Tensor({1, 1}, std::vector<double>{0.0}));
    const Var xh = constant(Tensor({1, 1}, std::vector<double>{std::sqrt(0.2)}));
    const Var xmd = constant(Tensor({1, 1}, std::vector<double>{std::sqrt(0.1)}));
    const Var l = loss_rd(x, xh, xmd, constant_scalar(2.0), constant_scalar(0.5), 10.0);
    CHECK(l->item() == doctest::Approx(5.5).epsilon(1e-12));
    const Var l0 = loss_rd(x, xh, xmd, constant_scalar(2.0), constant_scalar(0.5), 0.0);
    CHECK(l0->item() == 2.5);
    CHECK(error_kind([&] {
              loss_rd(x, constant(Tensor({1, 2}, 0.0)), xmd, constant_scalar(0.0), constant_scalar(0.0), 1.0);
          }) == ErrorKind::Shape);
}

TEST_CASE("gradient of the full loss through the relaxed chain") {
    ToyModel model(5);
    const Tensor x = make_source_batch(4, {8, 0});
    ForwardOptions o = options(64, 10.0, Chain::Relaxed, 8);
    // Leaf: the bias of the last encoder layer (downstream of the rate-matched masks).
    auto f = [&](const Var& b) {
        const Var saved = model.fa3.b;
        model.fa3.b = b;
        Var loss = forward(model, x, o).loss;
        model.fa3.b = saved;
        return loss;
    };
    const auto r = gradient_check(f, model.fa3.b->value, 1e-6);
    CHECK(r.max_rel_err <= 1e-5);
}

TEST_CASE("phase ordering") {
    ToyModel fresh(1);
    const TrainConfig c = small_config();
    CHECK(error_kind([&] { run_phase2(fresh, c); }) == ErrorKind::PhaseOrder);
    CHECK(error_kind([&] { run_phase3(fresh, c); }) == ErrorKind::PhaseOrder);
    CHECK(error_kind([&] { evaluate(fresh, 4, 10.0, Chain::Hard, 10, 1); }) == ErrorKind::PhaseOrder);
    ToyModel one = trained().after1.clone();
    CHECK(error_kind([&] { run_phase3(one, c); }) == ErrorKind::PhaseOrder);
}

TEST_CASE("config validation") {
    TrainConfig c = small_config();
    c.eta1 = 0.1;
    CHECK(error_kind([&] { c.validate(); }) == ErrorKind::Configuration);
    c = small_config();
    c.steps2 = 0;
    CHECK(error_kind([&] { c.validate(); }) == ErrorKind::Configuration);
    c = small_config();
    c.orders = {5};
    CHECK(error_kind([&] { c.validate(); }) == ErrorKind::InvalidOrder);
}

TEST_CASE("divergence is reported with the step") {
    ToyModel model(2);
    TrainConfig c = small_config();
    c.lr1 = 1e300;
    c.steps1 = 5;
    try {
        run_phase1(model, c);
        FAIL("expected divergence");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::TrainingDiverged);
        CHECK(std::string(e.what()).find("step") != std::string::npos);
    }
}

TEST_CASE("phase 1 with lambda 0 drives the rate down") {
    ToyModel model(4);
    TrainConfig c = small_config();
    c.lambda = 0.0;
    c.lr1 = 1e-2;
    c.steps1 = 150;
    c.trace_every = 1;
    std::vector<TraceRow> trace;
    run_phase1(model, c, &trace);
    REQUIRE(trace.size() == 150);
    std::vector<double> windows;
    for (std::size_t w = 0; w + 10 <= trace.size(); w += 10) {
        double acc = 0.0;
        for (std::size_t i = w; i < w + 10; ++i) acc += trace[i].rate_bits;
        windows.push_back(acc / 10.0);
    }
    // Warmup: the first two windows.
    for (std::size_t i = 3; i < windows.size(); ++i) CHECK(windows[i] <= windows[i - 1]);
}

TEST_CASE("training is deterministic") {
    TrainConfig c = small_config();
    c.steps1 = 30;
    std::vector<TraceRow> t1, t2;
    ToyModel a(9), b(9);
    run_phase1(a, c, &t1);
    run_phase1(b, c, &t2);
    CHECK(trace_csv(t1) == trace_csv(t2));
    CHECK(t1.back().loss == t2.back().loss);
}

TEST_CASE("phase 3 freezes the transmitter") {
    const Trained& t = trained();
    for (ParamGroup g : {ParamGroup::Transmitter, ParamGroup::Prior}) {
        const auto before = t.after2.parameters({g});
        const auto after = t.after3.parameters({g});
        REQUIRE(before.size() == after.size());
        for (std::size_t i = 0; i < before.size(); ++i) {
            CHECK(before[i]->value == after[i]->value);
            for (double gr : after[i]->grad.data) CHECK(gr == 0.0);
        }
    }
    // Receiver did move.
    bool moved = false;
    const auto rb = t.after2.parameters({ParamGroup::Receiver});
    const auto ra = t.after3.parameters({ParamGroup::Receiver});
    for (std::size_t i = 0; i < rb.size(); ++i) moved = moved || rb[i]->value != ra[i]->value;
    CHECK(moved);
}

TEST_CASE("masks and power in the chains") {
    const Trained& t = trained();
    const Tensor x = make_source_batch(32, {77, 0});
    for (Chain chain : {Chain::Relaxed, Chain::Hard}) {
        for (int order : {4, 16, 1024}) {
            const auto r = forward(t.after2, x, options(order, 7.0, chain));
            for (std::size_t i = 0; i < r.transmitted.size(); ++i) {
                if (r.mask2.data[i] == 0.0) CHECK(r.transmitted.data[i] == 0.0);
                CHECK(r.mask2.data[i] <= r.mask1.data[i]);
            }
            CHECK(r.max_power <= 1.0 * (1.0 + 1e-6));
            if (chain == Chain::Hard) {
                const auto spec = build_spec(order, 1.0);
                for (std::size_t i = 0; i < r.transmitted.size(); ++i) {
                    if (r.mask2.data[i] != 0.0) CHECK(spec.quantize(r.transmitted.data[i]) == r.transmitted.data[i]);
                }
            }
        }
    }
}

TEST_CASE("conditioning path is live") {
    const Trained& t = trained();
    const Tensor x = make_source_batch(8, {5, 0});
    ForwardOptions lo = options(4, 0.0, Chain::Relaxed);
    ForwardOptions hi = options(1024, 13.0, Chain::Relaxed);
    const auto a = forward(t.after2, x, lo);
    const auto b = forward(t.after2, x, hi);
    double worst = 0.0;
    for (std::size_t i = 0; i < a.transmitted.size(); ++i) {
        if (a.mask2.data[i] != 0.0) worst = std::max(worst, std::abs(a.transmitted.data[i] - b.transmitted.data[i]));
    }
    CHECK(worst > 1e-3);
}

TEST_CASE("evaluation") {
    const Trained& t = trained();
    const EvalResult a = evaluate(t.after3, 64, 10.0, Chain::Hard, 300, 4);
    CHECK(a == evaluate(t.after3, 64, 10.0, Chain::Hard, 300, 4));
    CHECK(a.psnr_db == doctest::Approx(10.0 * std::log10(1.0 / a.mse)));
    CHECK(a.cbr > 0.0);
    CHECK(a.max_power <= 1.0 + 1e-6);

    const double inf = std::numeric_limits<double>::infinity();
    const EvalResult hard = evaluate(t.after3, 1024, inf, Chain::Hard, 500, 4);
    const EvalResult relaxed = evaluate(t.after3, 1024, inf, Chain::Relaxed, 500, 4);
    CHECK(std::abs(hard.mse - relaxed.mse) / relaxed.mse < 0.05);

    for (int order : {4, 64, 1024}) {
        CHECK(evaluate(t.after3, order, 18.0, Chain::Hard, 500, 4).psnr_db >=
              evaluate(t.after3, order, 4.0, Chain::Hard, 500, 4).psnr_db);
    }
}

TEST_CASE("checkpoint round trip") {
    const Trained& t = trained();
    const auto dir = std::filesystem::temp_directory_path() / "djcm_ckpt_test";
    std::filesystem::create_directories(dir);
    const std::string prefix = (dir / "m").string();
    save_checkpoint(t.after3, prefix);
    const ToyModel back = load_checkpoint(prefix);
    CHECK(back.completed_phase == 3);
    CHECK(back.lambda == t.config.lambda);
    const auto a = t.after3.named_parameters();
    const auto b = back.named_parameters();
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(a[i].first == b[i].first);
        CHECK(a[i].second->value == b[i].second->value);
    }
    CHECK(error_kind([&] { load_checkpoint((dir / "missing").string()); }) == ErrorKind::Io);
}
