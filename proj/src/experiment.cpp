#include "djcm/experiment.hpp"

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <json.hpp>

#include "djcm/checkpoint.hpp"
#include "djcm/csv.hpp"
#include "djcm/density.hpp"
#include "djcm/dist_oracle.hpp"
#include "djcm/error.hpp"
#include "djcm/gradcheck_suite.hpp"
#include "djcm/training.hpp"

namespace djcm {

namespace fs = std::filesystem;
using nlohmann::json;

ConfigError::ConfigError(int line, const std::string& what) : std::runtime_error(what), line_(line) {}

namespace {

int line_at(const std::string& text, std::size_t pos) {
    pos = std::min(pos, text.size());
    return 1 + static_cast<int>(std::count(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(pos), '\n'));
}

// Position of `"key"` used as an object key, searching from `from`.
std::size_t key_pos(const std::string& text, const std::string& key, std::size_t from = 0) {
    const std::string quoted = "\"" + key + "\"";
    for (std::size_t p = text.find(quoted, from); p != std::string::npos; p = text.find(quoted, p + 1)) {
        std::size_t q = p + quoted.size();
        while (q < text.size() && std::isspace(static_cast<unsigned char>(text[q]))) ++q;
        if (q < text.size() && text[q] == ':') return p;
    }
    return std::string::npos;
}

class Reader {
  public:
    Reader(const std::string& text, const json& obj, std::string section, std::size_t anchor)
        : text_(text), obj_(obj), section_(std::move(section)), anchor_(anchor) {}

    int line(const std::string& key) const {
        const std::size_t p = key_pos(text_, key, anchor_);
        return p == std::string::npos ? 0 : line_at(text_, p);
    }
    std::size_t pos(const std::string& key) const { return key_pos(text_, key, anchor_); }

    [[noreturn]] void fail(const std::string& key, const std::string& what) const {
        throw ConfigError(line(key), section_ + key + ": " + what);
    }

    void reject_unknown(std::initializer_list<const char*> allowed) const {
        for (auto it = obj_.begin(); it != obj_.end(); ++it) {
            bool ok = false;
            for (const char* a : allowed) ok = ok || it.key() == a;
            if (!ok) fail(it.key(), "unknown key");
        }
    }

    bool has(const char* key) const { return obj_.contains(key); }
    const json& at(const char* key) const { return obj_.at(key); }

    double number(const char* key) const {
        const json& v = obj_.at(key);
        if (!v.is_number()) fail(key, "expected a number");
        return v.get<double>();
    }
    long long integer(const char* key) const {
        const json& v = obj_.at(key);
        if (!v.is_number_integer()) fail(key, "expected an integer");
        return v.get<long long>();
    }
    std::string string(const char* key) const {
        const json& v = obj_.at(key);
        if (!v.is_string()) fail(key, "expected a string");
        return v.get<std::string>();
    }
    std::vector<double> numbers(const char* key) const {
        const json& v = obj_.at(key);
        if (!v.is_array()) fail(key, "expected an array of numbers");
        std::vector<double> out;
        for (const json& e : v) {
            if (!e.is_number()) fail(key, "expected an array of numbers");
            out.push_back(e.get<double>());
        }
        return out;
    }
    std::vector<int> integers(const char* key) const {
        const json& v = obj_.at(key);
        if (!v.is_array()) fail(key, "expected an array of integers");
        std::vector<int> out;
        for (const json& e : v) {
            if (!e.is_number_integer()) fail(key, "expected an array of integers");
            out.push_back(e.get<int>());
        }
        return out;
    }

  private:
    const std::string& text_;
    const json& obj_;
    std::string section_;
    std::size_t anchor_;
};

std::string pair_name(int order, double snr) {
    std::string s = csv::format(snr);
    for (char& c : s) {
        if (c == '.') c = 'p';
        if (c == '-') c = 'm';
    }
    return "dist_M" + std::to_string(order) + "_snr" + s + ".csv";
}

int config_failure(const std::string& origin, const ConfigError& e, std::ostream& err) {
    err << origin;
    if (e.line() > 0) err << ':' << e.line();
    err << ": " << e.what() << '\n';
    return kExitConfig;
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError(0, "cannot read config file");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace

ExperimentConfig parse_config(const std::string& text, const std::string& origin) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ConfigError(line_at(text, e.byte > 0 ? e.byte - 1 : 0), std::string("malformed JSON: ") + e.what());
    }
    (void)origin;
    if (!doc.is_object()) throw ConfigError(1, "top level must be an object");

    ExperimentConfig cfg;
    const Reader r(text, doc, "", 0);
    r.reject_unknown({"seed", "output_dir", "orders", "snr_db", "mc_samples", "bins", "source", "thresholds",
                      "lambda", "steps", "learning_rates", "train_orders", "snr_range", "eta1", "eta2", "power",
                      "batch", "channel", "trace_every", "eval_samples"});

    if (r.has("seed")) {
        const long long s = r.integer("seed");
        if (s < 0) r.fail("seed", "must be non-negative");
        cfg.seed = static_cast<std::uint64_t>(s);
    }
    if (r.has("output_dir")) cfg.output_dir = r.string("output_dir");
    if (r.has("orders")) cfg.orders = r.integers("orders");
    if (cfg.orders.empty()) r.fail("orders", "must not be empty");
    if (r.has("power")) cfg.train.power = r.number("power");
    if (!(cfg.train.power > 0.0)) r.fail("power", "must be positive");
    for (int m : cfg.orders) {
        try {
            (void)build_spec(m, cfg.train.power);
        } catch (const Error&) {
            r.fail("orders", "invalid order " + std::to_string(m) + " (need a square number >= 4)");
        }
    }
    if (r.has("snr_db")) cfg.snr_db = r.numbers("snr_db");
    if (cfg.snr_db.empty()) r.fail("snr_db", "must not be empty");
    if (r.has("mc_samples")) {
        const long long n = r.integer("mc_samples");
        if (n != 0 && n < static_cast<long long>(kMinMonteCarloSamples)) {
            r.fail("mc_samples", "must be 0 or at least " + std::to_string(kMinMonteCarloSamples));
        }
        cfg.mc_samples = static_cast<std::uint64_t>(n);
    }
    if (r.has("bins")) {
        cfg.bins = static_cast<int>(r.integer("bins"));
        if (cfg.bins != 0 && cfg.bins < 32) r.fail("bins", "must be 0 (automatic) or at least 32");
    }
    if (r.has("source")) {
        cfg.source = r.string("source");
        if (cfg.source != "uniform" && cfg.source != "truncated_gaussian") {
            r.fail("source", "expected \"uniform\" or \"truncated_gaussian\"");
        }
    }
    if (r.has("thresholds")) {
        const json& t = r.at("thresholds");
        if (!t.is_object()) r.fail("thresholds", "expected an object");
        const Reader tr(text, t, "thresholds.", r.pos("thresholds"));
        tr.reject_unknown({"pmf_sum_tol", "mc_max_z", "max_seconds"});
        if (tr.has("pmf_sum_tol")) cfg.thresholds.pmf_sum_tol = tr.number("pmf_sum_tol");
        if (tr.has("mc_max_z")) cfg.thresholds.mc_max_z = tr.number("mc_max_z");
        if (tr.has("max_seconds")) cfg.thresholds.max_seconds = tr.number("max_seconds");
        if (!(cfg.thresholds.pmf_sum_tol > 0.0)) tr.fail("pmf_sum_tol", "must be positive");
        if (!(cfg.thresholds.mc_max_z > 0.0)) tr.fail("mc_max_z", "must be positive");
        if (!(cfg.thresholds.max_seconds > 0.0)) tr.fail("max_seconds", "must be positive");
    }

    toy::TrainConfig& t = cfg.train;
    t.seed = cfg.seed;
    if (r.has("lambda")) t.lambda = r.number("lambda");
    if (r.has("steps")) {
        const auto s = r.integers("steps");
        if (s.size() != 3) r.fail("steps", "expected three phase step counts");
        t.steps1 = s[0], t.steps2 = s[1], t.steps3 = s[2];
    }
    if (r.has("learning_rates")) {
        const auto s = r.numbers("learning_rates");
        if (s.size() != 3) r.fail("learning_rates", "expected three learning rates");
        t.lr1 = s[0], t.lr2 = s[1], t.lr3 = s[2];
    }
    if (r.has("train_orders")) t.orders = r.integers("train_orders");
    if (r.has("snr_range")) {
        const auto s = r.numbers("snr_range");
        if (s.size() != 2) r.fail("snr_range", "expected [min, max]");
        t.snr_min = s[0], t.snr_max = s[1];
    }
    if (r.has("eta1")) t.eta1 = r.number("eta1");
    if (r.has("eta2")) t.eta2 = r.number("eta2");
    if (r.has("batch")) t.batch = static_cast<int>(r.integer("batch"));
    if (r.has("trace_every")) t.trace_every = static_cast<int>(r.integer("trace_every"));
    if (r.has("channel")) {
        const std::string c = r.string("channel");
        if (c == "awgn") {
            t.channel = ChannelKind::Awgn;
        } else if (c == "rayleigh") {
            t.channel = ChannelKind::Rayleigh;
        } else {
            r.fail("channel", "expected \"awgn\" or \"rayleigh\"");
        }
    }
    if (r.has("eval_samples")) {
        const long long n = r.integer("eval_samples");
        if (n <= 0) r.fail("eval_samples", "must be positive");
        cfg.eval_samples = static_cast<std::size_t>(n);
    }
    try {
        t.validate();
    } catch (const Error& e) {
        throw ConfigError(0, e.what());
    }
    return cfg;
}

ExperimentConfig load_config(const std::string& path) { return parse_config(read_file(path), path); }

int cmd_verify_dist(const std::string& config_path, const std::optional<std::string>& out_dir, std::ostream& out,
                    std::ostream& err) {
    ExperimentConfig cfg;
    try {
        cfg = load_config(config_path);
    } catch (const ConfigError& e) {
        return config_failure(config_path, e, err);
    }
    const fs::path dir = out_dir ? fs::path(*out_dir) : fs::path(cfg.output_dir);
    fs::create_directories(dir);

    const RngState root = named_stream(RngState{cfg.seed, 0}, "verify");
    csv::Writer summary({"order", "snr_db", "delta_inner", "delta_edge"});
    bool ok = true;
    for (int order : cfg.orders) {
        for (double snr : cfg.snr_db) {
            const ConstellationSpec spec = build_spec(order, cfg.train.power);
            const ChannelParams params{ChannelKind::Awgn, snr, cfg.train.power};
            const ScalarDensity source =
                cfg.source == "uniform" ? uniform_source(spec) : truncated_gaussian_source(spec);
            ReportOptions options;
            options.bins = cfg.bins;
            options.monte_carlo = cfg.mc_samples > 0;
            const std::string name = pair_name(order, snr);
            const auto t0 = std::chrono::steady_clock::now();
            const DistReport rep = equivalence_report(spec, params, source, cfg.mc_samples,
                                                      named_stream(root, name), options);
            const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
            csv::write_atomic(dir / name, report_csv(rep));
            summary.cell(order).cell(snr).cell(rep.delta_inner).cell(rep.delta_edge).end_row();

            const bool sum_ok = std::abs(rep.pmf_sum - 1.0) <= cfg.thresholds.pmf_sum_tol;
            const bool mc_ok = !options.monte_carlo || rep.mc_max_z <= cfg.thresholds.mc_max_z;
            const bool time_ok = secs <= cfg.thresholds.max_seconds;
            out << "M=" << order << " snr=" << csv::format(snr) << " delta_inner=" << csv::format(rep.delta_inner)
                << " delta_edge=" << csv::format(rep.delta_edge) << " pmf_sum=" << csv::format(rep.pmf_sum)
                << " mc_max_z=" << csv::format(rep.mc_max_z) << " seconds=" << secs << '\n';
            if (!sum_ok) err << name << ": pmf sum " << csv::format(rep.pmf_sum) << " outside tolerance\n";
            if (!mc_ok) err << name << ": Monte Carlo z " << csv::format(rep.mc_max_z) << " above threshold\n";
            if (!time_ok) err << name << ": took " << secs << " s\n";
            ok = ok && sum_ok && mc_ok && time_ok;
        }
    }
    csv::write_atomic(dir / "summary.csv", summary.str());
    return ok ? kExitOk : kExitThreshold;
}

int cmd_gradcheck(std::ostream& out, std::ostream& err, const std::string& inject_fault) {
    if (!inject_fault.empty()) ad::testing::inject_gradient_fault(inject_fault);
    const GradCheckReport rep = run_gradcheck_suite();
    ad::testing::clear_gradient_fault();
    out << rep.csv();
    if (rep.passed()) return kExitOk;
    for (const auto& row : rep.rows) {
        if (row.gated && !row.passed) {
            err << "gradient check failed for " << row.node << ": max rel err " << csv::format(row.max_rel_err)
                << " (" << row.worst_case << ")\n";
        }
    }
    return kExitThreshold;
}

int cmd_train_toy(const std::string& config_path, const std::optional<std::string>& resume, std::ostream& out,
                  std::ostream& err) {
    ExperimentConfig cfg;
    try {
        cfg = load_config(config_path);
    } catch (const ConfigError& e) {
        return config_failure(config_path, e, err);
    }
    int first = 1;
    if (resume) {
        if (*resume == "phase2" || *resume == "2") {
            first = 2;
        } else if (*resume == "phase3" || *resume == "3") {
            first = 3;
        } else {
            err << "--resume expects phase2 or phase3\n";
            return kExitConfig;
        }
    }
    const fs::path dir(cfg.output_dir);
    fs::create_directories(dir);
    auto ckpt = [&](int phase) { return (dir / ("ckpt_phase" + std::to_string(phase))).string(); };

    toy::ToyModel model(cfg.seed);
    if (first > 1) {
        try {
            model = toy::load_checkpoint(ckpt(first - 1));
        } catch (const Error& e) {
            err << e.what() << '\n';
            return kExitConfig;
        }
        if (model.completed_phase != first - 1) {
            err << ckpt(first - 1) << ": holds phase " << model.completed_phase << '\n';
            return kExitConfig;
        }
    }
    try {
        for (int phase = first; phase <= 3; ++phase) {
            std::vector<toy::TraceRow> trace;
            if (phase == 1) toy::run_phase1(model, cfg.train, &trace);
            if (phase == 2) toy::run_phase2(model, cfg.train, &trace);
            if (phase == 3) toy::run_phase3(model, cfg.train, &trace);
            toy::save_checkpoint(model, ckpt(phase));
            csv::write_atomic(dir / ("trace_phase" + std::to_string(phase) + ".csv"), toy::trace_csv(trace));
            out << "phase " << phase << " done, final loss " << csv::format(trace.back().loss) << '\n';
        }
    } catch (const Error& e) {
        err << e.what() << '\n';
        return e.kind() == ErrorKind::TrainingDiverged ? kExitThreshold : kExitConfig;
    }
    const toy::EvalSettings settings = toy::settings_from(cfg.train);
    for (int order : cfg.orders) {
        for (double snr : cfg.snr_db) {
            const toy::EvalResult r =
                toy::evaluate(model, order, snr, toy::Chain::Hard, cfg.eval_samples, cfg.seed, settings);
            out << "M=" << order << " snr=" << csv::format(snr) << " mse=" << csv::format(r.mse)
                << " psnr_db=" << csv::format(r.psnr_db) << " cbr=" << csv::format(r.cbr) << '\n';
        }
    }
    return kExitOk;
}

int cmd_sweep(const std::string& config_path, const std::vector<std::string>& checkpoints, std::ostream& out,
              std::ostream& err) {
    ExperimentConfig cfg;
    try {
        cfg = load_config(config_path);
    } catch (const ConfigError& e) {
        return config_failure(config_path, e, err);
    }
    if (checkpoints.empty()) {
        err << "sweep needs at least one --checkpoint\n";
        return kExitConfig;
    }
    std::vector<toy::ToyModel> models;
    for (const auto& path : checkpoints) {
        try {
            models.push_back(toy::load_checkpoint(path));
        } catch (const Error& e) {
            err << e.what() << '\n';
            return kExitConfig;
        }
        if (models.back().completed_phase < 2) {
            err << path << ": checkpoint has not completed phase 2\n";
            return kExitConfig;
        }
    }
    const toy::EvalSettings settings = toy::settings_from(cfg.train);
    csv::Writer w({"lambda", "M", "snr_db", "chain", "mse", "psnr_db", "cbr"});
    for (const auto& model : models) {
        for (int order : cfg.orders) {
            for (toy::Chain chain : {toy::Chain::Hard, toy::Chain::Relaxed}) {
                for (double snr : cfg.snr_db) {
                    const toy::EvalResult r =
                        toy::evaluate(model, order, snr, chain, cfg.eval_samples, cfg.seed, settings);
                    w.cell(model.lambda).cell(order).cell(snr);
                    w.cell(std::string(chain == toy::Chain::Hard ? "hard" : "relaxed"));
                    w.cell(r.mse).cell(r.psnr_db).cell(r.cbr).end_row();
                }
            }
        }
    }
    const fs::path dir(cfg.output_dir);
    fs::create_directories(dir);
    csv::write_atomic(dir / "sweep.csv", w.str());
    out << "wrote " << (dir / "sweep.csv").string() << '\n';
    return kExitOk;
}

}  // namespace djcm
