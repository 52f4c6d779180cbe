// Command-line front end: run, dry-run, eval, heatmap.

#include <CLI11.hpp>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "dmsc/experiment.hpp"
#include "dmsc/io.hpp"
#include "dmsc/metrics.hpp"

namespace {

constexpr int kOk = 0;
constexpr int kConfigError = 2;
constexpr int kRuntimeError = 3;

void write_failure(const dmsc::ExperimentConfig& config, const std::string& stage, const std::string& message) {
    if (config.report.empty()) return;
    try {
        const auto path = config.resolve(config.report);
        if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
        std::ofstream(path) << dmsc::failure_report(config, stage, message).dump(2) << '\n';
    } catch (const std::exception&) {
        // The primary error is already on stderr.
    }
}

int run(const std::string& path, bool dry) {
    dmsc::ExperimentConfig config;
    try {
        config = dmsc::load_config(path);
        dmsc::apply_environment(config);
    } catch (const dmsc::ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kConfigError;
    }
    if (dry) {
        try {
            dmsc::print_dry_run(std::cout, config, dmsc::dry_run(config));
            return kOk;
        } catch (const dmsc::ConfigError& e) {
            std::cerr << "config error: " << e.what() << '\n';
            return kConfigError;
        } catch (const std::exception& e) {
            std::cerr << "dry-run failed: " << e.what() << '\n';
            return kRuntimeError;
        }
    }
    try {
        const dmsc::RunResult result = dmsc::run_experiment(config);
        try {
            dmsc::emit_outputs(config, result);
        } catch (const std::exception& e) {
            throw dmsc::StageError("output", e.what());
        }
        if (result.report.contains("metrics")) {
            const auto& m = result.report["metrics"];
            std::cout << "acc " << m["acc"].get<double>() << "  nmi " << m["nmi"].get<double>() << "  ari "
                      << m["ari"].get<double>() << '\n';
        }
        std::cout << "done in " << result.seconds << " s\n";
        return kOk;
    } catch (const dmsc::ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        write_failure(config, "config", e.what());
        return kConfigError;
    } catch (const dmsc::StageError& e) {
        std::cerr << "failed in stage " << e.what() << '\n';
        write_failure(config, e.stage(), e.what());
        return kRuntimeError;
    } catch (const std::exception& e) {
        std::cerr << "failed: " << e.what() << '\n';
        write_failure(config, "unknown", e.what());
        return kRuntimeError;
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Deep multimodal subspace clustering"};
    app.require_subcommand(1);

    std::string config_path;
    bool dry = false;
    auto* run_cmd = app.add_subcommand("run", "Run the experiment described by a config file");
    run_cmd->add_option("config", config_path, "Config file")->required();
    run_cmd->add_flag("--dry-run", dry, "Validate and print parameter counts only");

    std::string dry_path;
    auto* dry_cmd = app.add_subcommand("dry-run", "Validate a config and print parameter counts");
    dry_cmd->add_option("config", dry_path, "Config file")->required();

    std::string pred_path, truth_path;
    auto* eval_cmd = app.add_subcommand("eval", "Score predicted labels against ground truth");
    eval_cmd->add_option("pred", pred_path, "Predicted labels CSV (index,label)")->required();
    eval_cmd->add_option("truth", truth_path, "True labels CSV (index,label)")->required();

    std::string w_path, pgm_path, order_path;
    auto* heat_cmd = app.add_subcommand("heatmap", "Render an affinity dump as a PGM image");
    heat_cmd->add_option("affinity", w_path, "Matrix dump (.bin)")->required();
    heat_cmd->add_option("out", pgm_path, "Output PGM")->required();
    heat_cmd->add_option("--labels", order_path, "Labels CSV used to group rows and columns");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kOk : kConfigError;
    }

    if (*run_cmd) return run(config_path, dry);
    if (*dry_cmd) return run(dry_path, true);
    try {
        if (*eval_cmd) {
            const auto s = dmsc::evaluate_clustering(dmsc::read_labels_csv(pred_path), dmsc::read_labels_csv(truth_path));
            std::cout << "acc " << s.acc << "\nnmi " << s.nmi << "\nari " << s.ari << '\n';
            return kOk;
        }
        const Eigen::MatrixXd w = dmsc::read_matrix_bin(w_path);
        std::optional<std::vector<std::size_t>> order;
        if (!order_path.empty()) order = dmsc::label_order(dmsc::read_labels_csv(order_path));
        dmsc::write_pgm(pgm_path, dmsc::heatmap(w, order));
        return kOk;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kConfigError;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kRuntimeError;
    }
}
