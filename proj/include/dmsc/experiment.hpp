#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "dmsc/data.hpp"
#include "dmsc/network.hpp"
#include "dmsc/selfexpressive.hpp"

namespace dmsc {

class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A failure inside the pipeline, tagged with the stage that raised it.
class StageError : public std::runtime_error {
public:
    StageError(std::string stage, const std::string& message)
        : std::runtime_error(stage + ": " + message), stage_(std::move(stage)) {}
    const std::string& stage() const { return stage_; }

private:
    std::string stage_;
};

enum class Mode { Early, Intermediate, Late, Affinity, Ssc, Lrr, AeSsc };

std::string to_string(Mode mode);
bool is_spatial(Mode mode);
bool is_baseline(Mode mode);

struct ExperimentConfig {
    std::map<std::string, std::string> entries;  ///< raw `section.key` -> value, for the report echo
    std::filesystem::path base_dir;              ///< relative paths resolve against this

    // dataset
    std::string dataset_kind;
    std::string dataset_name;
    SynthSpec synth;
    std::vector<std::string> idx_images, idx_labels, modality_names;
    std::string image_root;
    std::optional<std::size_t> samples_per_class;
    std::optional<std::size_t> num_samples;

    // model
    Mode mode = Mode::Affinity;
    std::optional<FusionKind> fusion_kind;
    std::string architecture;
    std::optional<double> baseline_lambda;
    std::size_t view = 0;

    HyperParams hp;

    // output
    std::string run_id = "run";
    std::string report;
    std::string artifact_dir;
    std::string metrics_csv;

    std::filesystem::path resolve(const std::string& path) const;
};

/// Parses `section.key = value` lines; `#` starts a comment. Unknown keys,
/// duplicates, malformed values and incompatible combinations raise
/// ConfigError.
ExperimentConfig parse_config(const std::string& text, const std::filesystem::path& base_dir = {});
ExperimentConfig load_config(const std::string& path);

/// Applies DMSC_SEED when set.
void apply_environment(ExperimentConfig& config);

ModalityBundle load_dataset(const ExperimentConfig& config);

/// Architecture with the configured fusion override applied.
NetworkSpec load_architecture(const ExperimentConfig& config);

struct RunResult {
    nlohmann::ordered_json report;
    Eigen::MatrixXd coeffs;
    Eigen::MatrixXd affinity;
    std::vector<int> predicted;
    std::optional<std::vector<int>> truth;
    LossHistory pretrain_loss;
    LossHistory train_loss;
    double seconds = 0.0;
};

/// load -> (pretrain -> self-expressive training) or baseline solve ->
/// normalize -> affinity -> spectral clustering -> evaluation.
RunResult run_experiment(const ExperimentConfig& config);

/// Report JSON, metrics CSV row, loss CSVs, coefficient/affinity dumps,
/// predicted labels and the affinity heatmap.
void emit_outputs(const ExperimentConfig& config, const RunResult& result);

/// Report written when a stage fails.
nlohmann::ordered_json failure_report(const ExperimentConfig& config, const std::string& stage,
                                      const std::string& message);

struct DryRunSummary {
    std::size_t num_samples = 0;
    std::size_t network_parameters = 0;
    std::size_t self_expressive_parameters = 0;
    std::vector<std::pair<std::string, Shape>> kernels;
};

/// Validates the configuration and builds the network without training.
DryRunSummary dry_run(const ExperimentConfig& config);
void print_dry_run(std::ostream& out, const ExperimentConfig& config, const DryRunSummary& summary);

inline constexpr const char* kVersion = "dmsc 0.1.0";

}  // namespace dmsc
