#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "djcm/toy_model.hpp"

namespace djcm {

// Exit statuses shared by every command.
inline constexpr int kExitOk = 0;
inline constexpr int kExitThreshold = 1;
inline constexpr int kExitConfig = 2;

struct DistThresholds {
    double pmf_sum_tol = 1e-6;
    double mc_max_z = 5.0;
    double max_seconds = 60.0;
};

struct ExperimentConfig {
    std::uint64_t seed = 1;
    std::string output_dir = "out";
    // Oracle grid (verify-dist) and evaluation grid (train-toy, sweep).
    std::vector<int> orders{64, 1024};
    std::vector<double> snr_db{10.0, 18.0};
    std::uint64_t mc_samples = 10000000;
    int bins = 0;
    std::string source = "uniform";  // uniform | truncated_gaussian
    DistThresholds thresholds;
    // Training.
    toy::TrainConfig train;
    std::size_t eval_samples = 1000;
};

// Thrown for malformed or out-of-schema configs; carries a 1-based line (0 if unknown).
class ConfigError : public std::runtime_error {
  public:
    ConfigError(int line, const std::string& what);
    int line() const noexcept { return line_; }

  private:
    int line_;
};

ExperimentConfig parse_config(const std::string& text, const std::string& origin = "<config>");
ExperimentConfig load_config(const std::string& path);

int cmd_verify_dist(const std::string& config_path, const std::optional<std::string>& out_dir, std::ostream& out,
                    std::ostream& err);
int cmd_gradcheck(std::ostream& out, std::ostream& err, const std::string& inject_fault = "");
int cmd_train_toy(const std::string& config_path, const std::optional<std::string>& resume, std::ostream& out,
                  std::ostream& err);
int cmd_sweep(const std::string& config_path, const std::vector<std::string>& checkpoints, std::ostream& out,
              std::ostream& err);

}  // namespace djcm
