#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "djcm/toy_model.hpp"

namespace djcm::toy {

struct TraceRow {
    int step = 0;
    int phase = 0;
    double loss = 0.0;
    double rate_bits = 0.0;  // per source dimension
    double mse_hard = 0.0;
    double mse_relaxed = 0.0;
};

// Columns: step,phase,loss,rate_bits,mse_hard,mse_relaxed
std::string trace_csv(const std::vector<TraceRow>& rows);

// TwoPhase trains phase 2 through the relaxed chain; AllSte uses the hard
// chain with straight-through gradients instead.
enum class Arm { TwoPhase, AllSte };

void run_phase1(ToyModel& model, const TrainConfig& config, std::vector<TraceRow>* trace = nullptr);
void run_phase2(ToyModel& model, const TrainConfig& config, std::vector<TraceRow>* trace = nullptr,
                Arm arm = Arm::TwoPhase);
void run_phase3(ToyModel& model, const TrainConfig& config, std::vector<TraceRow>* trace = nullptr);

struct EvalSettings {
    ChannelKind channel = ChannelKind::Awgn;
    double power = 1.0;
    double eta1 = 0.4;
    double eta2 = 0.2;
    std::size_t batch = 250;
};

struct EvalResult {
    double mse = 0.0;
    double psnr_db = 0.0;
    double cbr = 0.0;
    double max_power = 0.0;  // worst per-row transmitted power over all batches
    friend bool operator==(const EvalResult&, const EvalResult&) = default;
};

EvalResult evaluate(const ToyModel& model, int order, double snr_db, Chain chain, std::size_t n_eval,
                    std::uint64_t seed, const EvalSettings& settings = {});

EvalSettings settings_from(const TrainConfig& config);

}  // namespace djcm::toy
