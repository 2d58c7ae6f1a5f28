#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "djcm/experiment.hpp"

int main(int argc, char** argv) {
    CLI::App app{"Digital joint coding-modulation laboratory"};
    app.require_subcommand(1);

    std::string config, out_dir, resume, fault;
    std::vector<std::string> checkpoints;

    auto* verify = app.add_subcommand("verify-dist", "Compare hard and relaxed chain distributions");
    verify->add_option("--config", config, "JSON config")->required();
    verify->add_option("--out", out_dir, "Output directory (overrides the config)");

    auto* grad = app.add_subcommand("gradcheck", "Run the gradient checker suite");
    grad->add_option("--inject-fault", fault, "Corrupt the gradient of one op")->group("");

    auto* train = app.add_subcommand("train-toy", "Train the toy pipeline through all three phases");
    train->add_option("--config", config, "JSON config")->required();
    train->add_option("--resume", resume, "Start at phase2 or phase3 from the saved checkpoint");

    auto* sweep = app.add_subcommand("sweep", "Evaluate checkpoints over an order/SNR grid");
    sweep->add_option("--config", config, "JSON config")->required();
    sweep->add_option("--checkpoint", checkpoints, "Checkpoint prefix (repeatable)")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : djcm::kExitConfig;
    }

    try {
        if (*verify) {
            std::optional<std::string> out;
            if (!out_dir.empty()) out = out_dir;
            return djcm::cmd_verify_dist(config, out, std::cout, std::cerr);
        }
        if (*grad) return djcm::cmd_gradcheck(std::cout, std::cerr, fault);
        if (*train) {
            std::optional<std::string> r;
            if (!resume.empty()) r = resume;
            return djcm::cmd_train_toy(config, r, std::cout, std::cerr);
        }
        if (*sweep) return djcm::cmd_sweep(config, checkpoints, std::cout, std::cerr);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return djcm::kExitThreshold;
    }
    return djcm::kExitConfig;
}
