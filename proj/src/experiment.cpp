#include "dmsc/experiment.hpp"

#include <charconv>
#include <chrono>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <iomanip>
#include <set>
#include <sstream>

#include "dmsc/baselines.hpp"
#include "dmsc/io.hpp"
#include "dmsc/metrics.hpp"
#include "dmsc/spectral.hpp"

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace dmsc {

std::string to_string(Mode mode) {
    switch (mode) {
        case Mode::Early: return "early";
        case Mode::Intermediate: return "intermediate";
        case Mode::Late: return "late";
        case Mode::Affinity: return "affinity";
        case Mode::Ssc: return "ssc";
        case Mode::Lrr: return "lrr";
        case Mode::AeSsc: return "ae_ssc";
    }
    return "?";
}

bool is_spatial(Mode mode) { return mode == Mode::Early || mode == Mode::Intermediate || mode == Mode::Late; }
bool is_baseline(Mode mode) { return mode == Mode::Ssc || mode == Mode::Lrr; }

fs::path ExperimentConfig::resolve(const std::string& path) const {
    const fs::path p(path);
    return p.is_absolute() || base_dir.empty() ? p : base_dir / p;
}

// ---------------------------------------------------------------------------
// Config parsing

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
}

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(trim(item));
    return out;
}

std::size_t to_size(const std::string& key, const std::string& v) {
    std::size_t out = 0;
    const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc{} || ptr != v.data() + v.size())
        throw ConfigError(key + ": expected a nonnegative integer, got '" + v + "'");
    return out;
}

double to_double(const std::string& key, const std::string& v) {
    char* end = nullptr;
    const double out = std::strtod(v.c_str(), &end);
    if (v.empty() || end != v.c_str() + v.size() || !std::isfinite(out))
        throw ConfigError(key + ": expected a number, got '" + v + "'");
    return out;
}

bool to_bool(const std::string& key, const std::string& v) {
    if (v == "true") return true;
    if (v == "false") return false;
    throw ConfigError(key + ": expected true or false, got '" + v + "'");
}

std::vector<std::size_t> to_size_list(const std::string& key, const std::string& v) {
    std::vector<std::size_t> out;
    for (const auto& item : split_list(v)) out.push_back(to_size(key, item));
    return out;
}

Mode parse_mode(const std::string& v) {
    static const std::map<std::string, Mode> modes{{"early", Mode::Early},   {"intermediate", Mode::Intermediate},
                                                   {"late", Mode::Late},     {"affinity", Mode::Affinity},
                                                   {"ssc", Mode::Ssc},       {"lrr", Mode::Lrr},
                                                   {"ae_ssc", Mode::AeSsc}};
    auto it = modes.find(v);
    if (it == modes.end())
        throw ConfigError("model.mode: unknown mode '" + v + "' (early|intermediate|late|affinity|ssc|lrr|ae_ssc)");
    return it->second;
}

using Setter = std::function<void(ExperimentConfig&, const std::string& key, const std::string& value)>;

const std::map<std::string, Setter>& setters() {
    static const std::map<std::string, Setter> table{
        {"dataset.kind", [](auto& c, auto&, auto& v) { c.dataset_kind = v; }},
        {"dataset.name", [](auto& c, auto&, auto& v) { c.dataset_name = v; }},
        {"dataset.num_samples", [](auto& c, auto& k, auto& v) { c.num_samples = to_size(k, v); }},
        {"dataset.samples_per_class", [](auto& c, auto& k, auto& v) { c.samples_per_class = to_size(k, v); }},
        {"dataset.ambient_dim", [](auto& c, auto& k, auto& v) { c.synth.ambient_dim = to_size(k, v); }},
        {"dataset.num_subspaces", [](auto& c, auto& k, auto& v) { c.synth.num_subspaces = to_size(k, v); }},
        {"dataset.subspace_dims", [](auto& c, auto& k, auto& v) { c.synth.subspace_dims = to_size_list(k, v); }},
        {"dataset.points_per_subspace",
         [](auto& c, auto& k, auto& v) { c.synth.points_per_subspace = to_size_list(k, v); }},
        {"dataset.noise_sigma", [](auto& c, auto& k, auto& v) { c.synth.noise_sigma = to_double(k, v); }},
        {"dataset.num_views", [](auto& c, auto& k, auto& v) { c.synth.num_views = to_size(k, v); }},
        {"dataset.view_dim", [](auto& c, auto& k, auto& v) { c.synth.view_dim = to_size(k, v); }},
        {"dataset.orthogonal", [](auto& c, auto& k, auto& v) { c.synth.orthogonal = to_bool(k, v); }},
        {"dataset.seed", [](auto& c, auto& k, auto& v) { c.synth.seed = to_size(k, v); }},
        {"dataset.images", [](auto& c, auto&, auto& v) { c.idx_images = split_list(v); }},
        {"dataset.labels", [](auto& c, auto&, auto& v) { c.idx_labels = split_list(v); }},
        {"dataset.modalities", [](auto& c, auto&, auto& v) { c.modality_names = split_list(v); }},
        {"dataset.root", [](auto& c, auto&, auto& v) { c.image_root = v; }},
        {"model.mode", [](auto& c, auto&, auto& v) { c.mode = parse_mode(v); }},
        {"model.fusion_kind",
         [](auto& c, auto& k, auto& v) {
             try {
                 c.fusion_kind = parse_fusion_kind(v);
             } catch (const std::exception& e) {
                 throw ConfigError(k + ": " + e.what());
             }
         }},
        {"model.architecture", [](auto& c, auto&, auto& v) { c.architecture = v; }},
        {"model.lambda", [](auto& c, auto& k, auto& v) { c.baseline_lambda = to_double(k, v); }},
        {"model.view", [](auto& c, auto& k, auto& v) { c.view = to_size(k, v); }},
        {"hyperparams.lambda1", [](auto& c, auto& k, auto& v) { c.hp.lambda1 = to_double(k, v); }},
        {"hyperparams.lambda2", [](auto& c, auto& k, auto& v) { c.hp.lambda2 = to_double(k, v); }},
        {"hyperparams.p", [](auto& c, auto& k, auto& v) { c.hp.p = to_double(k, v); }},
        {"hyperparams.lr", [](auto& c, auto& k, auto& v) { c.hp.learning_rate = to_double(k, v); }},
        {"hyperparams.pretrain_epochs", [](auto& c, auto& k, auto& v) { c.hp.pretrain_epochs = to_size(k, v); }},
        {"hyperparams.train_epochs", [](auto& c, auto& k, auto& v) { c.hp.train_epochs = to_size(k, v); }},
        {"hyperparams.batch_size", [](auto& c, auto& k, auto& v) { c.hp.batch_size = to_size(k, v); }},
        {"hyperparams.seed", [](auto& c, auto& k, auto& v) { c.hp.seed = to_size(k, v); }},
        {"output.run_id", [](auto& c, auto&, auto& v) { c.run_id = v; }},
        {"output.report", [](auto& c, auto&, auto& v) { c.report = v; }},
        {"output.artifact_dir", [](auto& c, auto&, auto& v) { c.artifact_dir = v; }},
        {"output.metrics_csv", [](auto& c, auto&, auto& v) { c.metrics_csv = v; }},
    };
    return table;
}

AdmmConfig admm_config(double lambda) {
    AdmmConfig cfg;
    cfg.lambda = lambda;
    return cfg;
}

void require(const ExperimentConfig& c, const std::string& key) {
    if (!c.entries.count(key)) throw ConfigError("missing required key '" + key + "'");
}

void forbid(const ExperimentConfig& c, const std::string& key, const std::string& why) {
    if (c.entries.count(key)) throw ConfigError("key '" + key + "' is not allowed " + why);
}

void validate(const ExperimentConfig& c) {
    require(c, "dataset.kind");
    require(c, "model.mode");

    static const std::set<std::string> synth_keys{"dataset.ambient_dim", "dataset.num_subspaces",
                                                  "dataset.subspace_dims", "dataset.points_per_subspace",
                                                  "dataset.noise_sigma", "dataset.num_views",
                                                  "dataset.view_dim", "dataset.orthogonal",
                                                  "dataset.seed"};
    if (c.dataset_kind == "synthetic") {
        for (const char* k : {"dataset.images", "dataset.labels", "dataset.root", "dataset.modalities",
                              "dataset.samples_per_class"})
            forbid(c, k, "for synthetic datasets");
        try {
            c.synth.validate();
        } catch (const std::invalid_argument& e) {
            throw ConfigError(e.what());
        }
    } else if (c.dataset_kind == "idx" || c.dataset_kind == "image_dir") {
        for (const auto& k : synth_keys) forbid(c, k, "for " + c.dataset_kind + " datasets");
        if (c.dataset_kind == "idx") {
            require(c, "dataset.images");
            forbid(c, "dataset.root", "for idx datasets");
            if (!c.idx_labels.empty() && c.idx_labels.size() != c.idx_images.size())
                throw ConfigError("dataset.labels must list one file per entry of dataset.images");
            if (c.idx_labels.empty() && c.samples_per_class)
                throw ConfigError("dataset.samples_per_class needs dataset.labels");
            if (!c.modality_names.empty() && c.modality_names.size() != c.idx_images.size())
                throw ConfigError("dataset.modalities must name every entry of dataset.images");
        } else {
            require(c, "dataset.root");
            require(c, "dataset.modalities");
            forbid(c, "dataset.images", "for image_dir datasets");
            forbid(c, "dataset.labels", "for image_dir datasets");
        }
    } else {
        throw ConfigError("dataset.kind: unknown kind '" + c.dataset_kind + "' (synthetic|idx|image_dir)");
    }

    const std::string mode = to_string(c.mode);
    if (is_spatial(c.mode) || c.mode == Mode::Affinity || c.mode == Mode::AeSsc) {
        require(c, "model.architecture");
        forbid(c, "model.view", "with mode " + mode);
    } else {
        forbid(c, "model.architecture", "with mode " + mode);
        for (const char* k : {"hyperparams.lambda1", "hyperparams.lambda2", "hyperparams.p", "hyperparams.lr",
                              "hyperparams.pretrain_epochs", "hyperparams.train_epochs", "hyperparams.batch_size"})
            forbid(c, k, "with mode " + mode);
    }
    if (!is_spatial(c.mode)) forbid(c, "model.fusion_kind", "with mode " + mode);
    if (is_baseline(c.mode) || c.mode == Mode::AeSsc) {
        require(c, "model.lambda");
    } else {
        forbid(c, "model.lambda", "with mode " + mode);
    }
    if (c.mode == Mode::AeSsc)
        for (const char* k : {"hyperparams.lambda1", "hyperparams.lambda2", "hyperparams.p",
                              "hyperparams.train_epochs"})
            forbid(c, k, "with mode ae_ssc");
    try {
        c.hp.validate();
        if (c.baseline_lambda) admm_config(*c.baseline_lambda).validate();
    } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
    }
}

}  // namespace

ExperimentConfig parse_config(const std::string& text, const fs::path& base_dir) {
    ExperimentConfig c;
    c.base_dir = base_dir;
    std::istringstream in(text);
    std::string raw;
    for (int line_no = 1; std::getline(in, raw); ++line_no) {
        const std::string line = trim(raw.substr(0, raw.find('#')));
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError("line " + std::to_string(line_no) + ": expected 'section.key = value'");
        const std::string key = trim(line.substr(0, eq)), value = trim(line.substr(eq + 1));
        const auto& table = setters();
        auto it = table.find(key);
        if (it == table.end()) throw ConfigError("line " + std::to_string(line_no) + ": unknown key '" + key + "'");
        if (c.entries.count(key)) throw ConfigError("line " + std::to_string(line_no) + ": duplicate key '" + key + "'");
        if (value.empty()) throw ConfigError("line " + std::to_string(line_no) + ": empty value for '" + key + "'");
        it->second(c, key, value);
        c.entries[key] = value;
    }
    validate(c);
    return c;
}

ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str(), fs::absolute(path).parent_path());
}

void apply_environment(ExperimentConfig& config) {
    const char* env = std::getenv("DMSC_SEED");
    if (!env) return;
    config.hp.seed = to_size("DMSC_SEED", env);
    config.entries["hyperparams.seed"] = env;
}

// ---------------------------------------------------------------------------
// Data and architecture

namespace {

std::vector<std::string> modality_names_for(const ExperimentConfig& c) {
    if (c.dataset_kind == "synthetic") {
        std::vector<std::string> names;
        for (std::size_t v = 0; v < c.synth.num_views; ++v) names.push_back("view" + std::to_string(v + 1));
        return names;
    }
    if (!c.modality_names.empty()) return c.modality_names;
    std::vector<std::string> names;
    for (std::size_t v = 0; v < c.idx_images.size(); ++v) names.push_back("view" + std::to_string(v + 1));
    return names;
}

std::string dataset_label(const ExperimentConfig& c) {
    return c.dataset_name.empty() ? c.dataset_kind : c.dataset_name;
}

}  // namespace

ModalityBundle load_dataset(const ExperimentConfig& c) {
    ModalityBundle bundle;
    if (c.dataset_kind == "synthetic") {
        bundle = generate_union_of_subspaces(c.synth).bundle;
    } else if (c.dataset_kind == "idx") {
        const auto names = modality_names_for(c);
        std::vector<LabeledImages> raw;
        for (std::size_t m = 0; m < c.idx_images.size(); ++m) {
            LabeledImages li;
            li.name = names[m];
            li.images = load_idx(c.resolve(c.idx_images[m]).string());
            if (!c.idx_labels.empty()) {
                const Tensor labels = load_idx(c.resolve(c.idx_labels[m]).string());
                for (double v : labels.values()) li.labels.push_back(static_cast<int>(v));
            } else {
                li.labels.assign(li.images.dim(0), 0);
            }
            raw.push_back(std::move(li));
        }
        PreprocessOptions opts;
        opts.samples_per_class = c.samples_per_class;
        opts.seed = c.hp.seed;
        opts.aligned = c.idx_labels.empty();
        bundle = preprocess_bundle(raw, opts);
        if (c.idx_labels.empty()) bundle.labels.reset();
    } else {
        PreprocessOptions opts;
        opts.samples_per_class = c.samples_per_class;
        opts.seed = c.hp.seed;
        opts.aligned = true;
        bundle = preprocess_bundle(load_image_dir(c.resolve(c.image_root).string(), c.modality_names), opts);
    }
    bundle.name = dataset_label(c);
    bundle.validate();
    if (c.num_samples && *c.num_samples != bundle.size())
        throw DataError("dataset.num_samples is " + std::to_string(*c.num_samples) + " but the dataset has " +
                        std::to_string(bundle.size()) + " samples");
    return bundle;
}

NetworkSpec load_architecture(const ExperimentConfig& c) {
    NetworkSpec spec = load_network_spec(c.resolve(c.architecture).string());
    if (c.fusion_kind) override_fusion(spec, *c.fusion_kind);
    infer_shapes(spec);
    if (c.mode == Mode::Affinity && !spec.is_affinity())
        throw ConfigError("mode affinity needs an architecture with one latent per modality; '" + spec.name +
                          "' declares one");
    if (is_spatial(c.mode) && spec.is_affinity())
        throw ConfigError("mode " + to_string(c.mode) + " needs a single fused latent; '" + spec.name +
                          "' declares one per modality");
    const auto names = modality_names_for(c);
    for (const auto& in : spec.inputs)
        if (std::find(names.begin(), names.end(), in.name) == names.end())
            throw ConfigError("architecture input '" + in.name + "' is not a dataset modality");
    return spec;
}

namespace {

// Bundle restricted to and ordered by the spec's inputs.
ModalityBundle align_bundle(const NetworkSpec& spec, const ModalityBundle& bundle) {
    ModalityBundle out;
    out.name = bundle.name;
    out.labels = bundle.labels;
    for (const auto& in : spec.inputs) {
        auto it = std::find(bundle.modality_names.begin(), bundle.modality_names.end(), in.name);
        if (it == bundle.modality_names.end())
            throw ShapeError("architecture input '" + in.name + "' is not a dataset modality");
        const Tensor& t = bundle.modalities[static_cast<std::size_t>(it - bundle.modality_names.begin())];
        const Shape expected{t.dim(0), in.height, in.width, in.channels};
        if (t.shape() != expected)
            throw ShapeError("modality '" + in.name + "' has shape " + shape_to_string(t.shape()) +
                             " but the architecture expects " + shape_to_string(expected));
        out.modality_names.push_back(in.name);
        out.modalities.push_back(t);
    }
    return out;
}

Eigen::MatrixXd to_matrix(const Tensor& t) {
    const std::size_t rows = t.dim(0), cols = t.size() / rows;
    Eigen::MatrixXd m(rows, cols);
    for (std::size_t i = 0; i < rows; ++i)
        for (std::size_t j = 0; j < cols; ++j)
            m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = t[i * cols + j];
    return m;
}

template <typename F>
auto stage(const std::string& name, F&& body) {
    try {
        return body();
    } catch (const ConfigError&) {
        throw;
    } catch (const StageError&) {
        throw;
    } catch (const std::exception& e) {
        throw StageError(name, e.what());
    }
}

ordered_json admm_json(const AdmmResult& r) {
    return {{"converged", r.converged}, {"iterations", r.iterations}, {"final_objective", r.objective.back()}};
}

}  // namespace

RunResult run_experiment(const ExperimentConfig& c) {
    const auto start = std::chrono::steady_clock::now();
    RunResult result;
    ordered_json& report = result.report;
    report["version"] = kVersion;
    report["run_id"] = c.run_id;
    report["status"] = "ok";
    report["mode"] = to_string(c.mode);
    report["dataset"] = dataset_label(c);
    report["seed"] = c.hp.seed;
    report["config"] = ordered_json(c.entries);

    const ModalityBundle bundle = stage("load", [&] { return load_dataset(c); });
    const std::size_t n = bundle.size();
    const std::size_t k = bundle.num_clusters();
    if (k == 0) throw StageError("load", "the dataset has no labels, so the cluster count is unknown");
    report["num_samples"] = n;
    report["num_modalities"] = bundle.num_modalities();
    report["num_clusters"] = k;
    result.truth = bundle.labels;

    if (is_baseline(c.mode)) {
        if (c.view >= bundle.num_modalities())
            throw ConfigError("model.view " + std::to_string(c.view) + " out of range for " +
                              std::to_string(bundle.num_modalities()) + " modalities");
        const AdmmResult r = stage("solve", [&] {
            const Eigen::MatrixXd x = bundle.data_matrix(c.view);
            const AdmmConfig cfg = admm_config(*c.baseline_lambda);
            return c.mode == Mode::Ssc ? ssc_solve(x, cfg) : lrr_solve(x, cfg);
        });
        report["view"] = bundle.modality_names[c.view];
        report["lambda"] = *c.baseline_lambda;
        report["admm"] = admm_json(r);
        result.coeffs = r.coeffs;
    } else {
        const NetworkSpec spec = stage("architecture", [&] { return load_architecture(c); });
        const ModalityBundle aligned = stage("architecture", [&] { return align_bundle(spec, bundle); });
        NetworkParams params = build_network(spec, c.hp.seed);
        report["architecture"] = spec.name;
        report["network_parameters"] = params.parameter_count();

        result.pretrain_loss = stage("pretrain", [&] { return pretrain(spec, params, aligned, c.hp); });
        if (c.mode == Mode::AeSsc) {
            const AdmmResult r = stage("solve", [&] {
                const auto out = autoencode(params, spec, bundle_inputs(aligned));
                Eigen::MatrixXd z(static_cast<Eigen::Index>(n), 0);
                for (const Var& latent : out.latents) {
                    const Eigen::MatrixXd part = to_matrix(latent.value());
                    Eigen::MatrixXd joined(z.rows(), z.cols() + part.cols());
                    joined << z, part;
                    z = std::move(joined);
                }
                return ssc_solve(z.transpose(), admm_config(*c.baseline_lambda));
            });
            report["lambda"] = *c.baseline_lambda;
            report["admm"] = admm_json(r);
            result.coeffs = r.coeffs;
        } else {
            const double lambda2 = c.hp.lambda2_or_rule(k);
            report["lambda1"] = c.hp.lambda1;
            report["lambda2"] = lambda2;
            report["p"] = c.hp.p;
            SelfExpressiveLayer layer(n);
            result.train_loss =
                stage("train", [&] { return train_self_expressive(spec, params, layer, aligned, c.hp); });
            result.coeffs = to_matrix(layer.coeffs().value());
            if (!result.train_loss.empty()) report["final_loss"] = result.train_loss.back();
        }
        if (!result.pretrain_loss.empty()) report["final_pretrain_loss"] = result.pretrain_loss.back();
    }

    const ClusterLabeling labeling = stage("cluster", [&] {
        result.affinity = build_affinity(normalize_coefficients(result.coeffs));
        return spectral_cluster(result.affinity, k, c.hp.seed);
    });
    result.predicted = labeling.labels;

    if (result.truth) {
        const ClusteringScores s = stage("evaluate", [&] { return evaluate_clustering(result.predicted, *result.truth); });
        report["metrics"] = {{"acc", s.acc}, {"nmi", s.nmi}, {"ari", s.ari}};
    }
    result.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    report["seconds"] = result.seconds;
    return result;
}

ordered_json failure_report(const ExperimentConfig& c, const std::string& stage_name, const std::string& message) {
    ordered_json report;
    report["version"] = kVersion;
    report["run_id"] = c.run_id;
    report["status"] = "failed";
    report["mode"] = to_string(c.mode);
    report["dataset"] = dataset_label(c);
    report["seed"] = c.hp.seed;
    report["config"] = ordered_json(c.entries);
    report["stage"] = stage_name;
    report["error"] = message;
    return report;
}

// ---------------------------------------------------------------------------
// Outputs

namespace {

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
    out << text;
    if (!out) throw std::runtime_error("failed writing '" + path.string() + "'");
}

std::string csv_number(double v) {
    std::ostringstream s;
    s << std::setprecision(10) << v;
    return s.str();
}

}  // namespace

void emit_outputs(const ExperimentConfig& c, const RunResult& r) {
    ordered_json report = r.report;
    if (!c.artifact_dir.empty()) {
        const fs::path dir = c.resolve(c.artifact_dir);
        fs::create_directories(dir);
        write_matrix_bin((dir / "coeffs.bin").string(), r.coeffs);
        write_matrix_bin((dir / "affinity.bin").string(), r.affinity);
        write_labels_csv((dir / "labels.csv").string(), r.predicted);
        std::optional<std::vector<std::size_t>> order;
        if (r.truth) order = label_order(*r.truth);
        write_pgm((dir / "affinity.pgm").string(), heatmap(r.affinity, order));
        ordered_json losses = ordered_json::object();
        if (!r.pretrain_loss.empty()) {
            write_loss_csv((dir / "pretrain_loss.csv").string(), r.pretrain_loss);
            losses["pretrain"] = "pretrain_loss.csv";
        }
        if (!r.train_loss.empty()) {
            write_loss_csv((dir / "train_loss.csv").string(), r.train_loss);
            losses["train"] = "train_loss.csv";
        }
        report["loss_history"] = losses;
        report["artifacts"] = {"coeffs.bin", "affinity.bin", "affinity.pgm", "labels.csv"};
    }
    if (!c.report.empty()) {
        const fs::path path = c.resolve(c.report);
        if (path.has_parent_path()) fs::create_directories(path.parent_path());
        write_text(path, report.dump(2) + "\n");
    }
    if (!c.metrics_csv.empty()) {
        const fs::path path = c.resolve(c.metrics_csv);
        if (path.has_parent_path()) fs::create_directories(path.parent_path());
        const bool fresh = !fs::exists(path) || fs::file_size(path) == 0;
        std::ofstream out(path, std::ios::app);
        if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
        if (fresh) out << "run_id,mode,dataset,acc,nmi,ari,seconds,seed\n";
        out << c.run_id << ',' << to_string(c.mode) << ',' << dataset_label(c) << ',';
        if (report.contains("metrics")) {
            const auto& m = report["metrics"];
            out << csv_number(m["acc"]) << ',' << csv_number(m["nmi"]) << ',' << csv_number(m["ari"]);
        } else {
            out << ",,";
        }
        out << ',' << csv_number(r.seconds) << ',' << c.hp.seed << '\n';
        if (!out) throw std::runtime_error("failed writing '" + path.string() + "'");
    }
}

// ---------------------------------------------------------------------------
// Dry run

DryRunSummary dry_run(const ExperimentConfig& c) {
    DryRunSummary s;
    s.num_samples = c.num_samples ? *c.num_samples : load_dataset(c).size();
    if (!is_baseline(c.mode)) {
        const NetworkSpec spec = load_architecture(c);
        const auto shapes = infer_shapes(spec);
        for (const auto& layer : spec.layers) {
            if (layer.kind == LayerKind::Fusion) continue;
            s.kernels.emplace_back(layer.name, kernel_shape(spec, layer, shapes));
        }
        s.network_parameters = network_parameter_count(spec);
    }
    if (!is_baseline(c.mode) && c.mode != Mode::AeSsc) s.self_expressive_parameters = s.num_samples * s.num_samples;
    return s;
}

void print_dry_run(std::ostream& out, const ExperimentConfig& c, const DryRunSummary& s) {
    out << "mode: " << to_string(c.mode) << '\n';
    out << "dataset: " << dataset_label(c) << " (N = " << s.num_samples << ")\n";
    if (!is_baseline(c.mode)) {
        out << "architecture: " << c.architecture << '\n';
        for (const auto& [name, shape] : s.kernels)
            out << "  " << std::left << std::setw(16) << name << shape_to_string(shape) << ' '
                << shape_numel(shape) << '\n';
        out << "network parameters: " << s.network_parameters << '\n';
    }
    if (is_baseline(c.mode) || c.mode == Mode::AeSsc)
        out << "coefficient matrix entries: " << s.num_samples * s.num_samples << '\n';
    else
        out << "self-expressive parameters: " << s.self_expressive_parameters << '\n';
    out << "total trainable parameters: " << s.network_parameters + s.self_expressive_parameters << '\n';
}

}  // namespace dmsc
