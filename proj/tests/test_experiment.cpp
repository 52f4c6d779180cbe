#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "dmsc/experiment.hpp"
#include "dmsc/io.hpp"

using namespace dmsc;
namespace fs = std::filesystem;

namespace {

const std::string kSpecs = DMSC_SPEC_DIR;
const std::string kConfigs = DMSC_CONFIG_DIR;
const std::string kCli = DMSC_CLI;

fs::path scratch(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("dmsc_exp_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

std::string small_deep(const std::string& out) {
    return "dataset.kind = synthetic\n"
           "dataset.num_subspaces = 3\n"
           "dataset.points_per_subspace = 8\n"
           "model.mode = affinity\n"
           "model.architecture = " + kSpecs + "/synth_affinity.spec\n"
           "hyperparams.pretrain_epochs = 10\n"
           "hyperparams.train_epochs = 10\n"
           "hyperparams.batch_size = 8\n"
           "hyperparams.seed = 3\n"
           "output.run_id = small\n"
           "output.report = " + out + "/report.json\n"
           "output.artifact_dir = " + out + "\n"
           "output.metrics_csv = " + out + "/metrics.csv\n";
}

std::string ssc_config(const std::string& out) {
    return "dataset.kind = synthetic\n"
           "model.mode = ssc\n"
           "model.lambda = 100\n"
           "output.run_id = ssc\n"
           "output.report = " + out + "/report.json\n"
           "output.artifact_dir = " + out + "\n"
           "output.metrics_csv = " + out + "/metrics.csv\n";
}

void write_file(const fs::path& p, const std::string& text) { std::ofstream(p) << text; }

std::string read_file(const fs::path& p) {
    std::ifstream in(p);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

int cli(const std::string& args, const fs::path& capture = {}) {
    std::string cmd = kCli + " " + args;
    cmd += capture.empty() ? " >/dev/null 2>&1" : " >" + capture.string() + " 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string config_error(const std::string& text) {
    try {
        parse_config(text);
    } catch (const ConfigError& e) {
        return e.what();
    }
    return "";
}

}  // namespace

TEST(Config, ParsesAndEchoes) {
    const auto c = parse_config(ssc_config("/tmp/x") + "# comment\n\n", "/base");
    EXPECT_EQ(c.mode, Mode::Ssc);
    EXPECT_EQ(*c.baseline_lambda, 100.0);
    EXPECT_EQ(c.entries.at("model.lambda"), "100");
    EXPECT_EQ(c.resolve("rel/a.json"), fs::path("/base/rel/a.json"));
    EXPECT_EQ(c.resolve("/abs/a.json"), fs::path("/abs/a.json"));
}

TEST(Config, Errors) {
    const std::string base = "dataset.kind = synthetic\nmodel.mode = ssc\nmodel.lambda = 1\n";
    EXPECT_NE(config_error(base + "model.colour = red\n").find("unknown key"), std::string::npos);
    EXPECT_NE(config_error(base + "model.lambda = 2\n").find("duplicate"), std::string::npos);
    EXPECT_NE(config_error(base + "garbage\n").find("line 4"), std::string::npos);
    EXPECT_NE(config_error("dataset.kind = synthetic\nmodel.mode = ssc\n").find("model.lambda"), std::string::npos);
    EXPECT_NE(config_error(base + "hyperparams.lr = 0.1\n").find("hyperparams.lr"), std::string::npos);
    EXPECT_NE(config_error(base + "model.fusion_kind = sum\n").find("fusion_kind"), std::string::npos);
    EXPECT_NE(config_error("dataset.kind = synthetic\nmodel.mode = wavelet\n").find("unknown mode"), std::string::npos);
    EXPECT_NE(config_error("dataset.kind = synthetic\nmodel.mode = affinity\n").find("model.architecture"),
              std::string::npos);
    EXPECT_NE(config_error(base + "dataset.noise_sigma = abc\n").find("expected a number"), std::string::npos);
    EXPECT_NE(config_error("dataset.kind = tape\nmodel.mode = ssc\nmodel.lambda = 1\n").find("unknown kind"),
              std::string::npos);
    EXPECT_NE(config_error(base + "dataset.root = /x\n").find("dataset.root"), std::string::npos);
    EXPECT_FALSE(config_error(base + "model.lambda2 = 1\n").empty());
}

TEST(Config, EnvironmentSeedOverride) {
    auto c = parse_config(ssc_config("/tmp/x") + "hyperparams.seed = 4\n");
    ::setenv("DMSC_SEED", "77", 1);
    apply_environment(c);
    ::unsetenv("DMSC_SEED");
    EXPECT_EQ(c.hp.seed, 77u);
    EXPECT_EQ(c.entries.at("hyperparams.seed"), "77");
}

TEST(Experiment, DeepRunIsDeterministic) {
    const auto dir = scratch("det");
    const auto c = parse_config(small_deep(dir.string()));
    const RunResult a = run_experiment(c), b = run_experiment(c);
    EXPECT_EQ(a.coeffs, b.coeffs);
    EXPECT_EQ(a.predicted, b.predicted);
    EXPECT_EQ(a.train_loss, b.train_loss);
    EXPECT_EQ(a.pretrain_loss.size(), 10u);
    EXPECT_EQ(a.train_loss.size(), 10u);
    EXPECT_EQ(a.affinity, a.affinity.transpose());
    EXPECT_GE(a.affinity.minCoeff(), 0.0);
    for (Eigen::Index i = 0; i < a.coeffs.rows(); ++i) EXPECT_EQ(a.coeffs(i, i), 0.0);
    EXPECT_EQ(a.report["num_samples"], 24);
    EXPECT_EQ(a.report["num_clusters"], 3);
    EXPECT_NEAR(a.report["lambda2"].get<double>(), std::pow(10.0, 0.3 - 3.0), 1e-15);
}

TEST(Experiment, MissingArchitectureFailsInStage) {
    std::string text = small_deep(scratch("arch").string());
    text.replace(text.find("synth_affinity.spec"), 19, "nonexistent.spec");
    try {
        run_experiment(parse_config(text));
        FAIL();
    } catch (const StageError& e) {
        EXPECT_EQ(e.stage(), "architecture");
    }
}

TEST(Cli, RunWritesArtifactsAndCsv) {
    const auto dir = scratch("cli_ssc");
    write_file(dir / "ssc.conf", ssc_config(dir.string()));
    ASSERT_EQ(cli("run " + (dir / "ssc.conf").string()), 0);
    ASSERT_EQ(cli("run " + (dir / "ssc.conf").string()), 0);
    for (const char* f : {"report.json", "coeffs.bin", "affinity.bin", "labels.csv", "affinity.pgm"})
        EXPECT_TRUE(fs::exists(dir / f)) << f;

    std::ifstream csv(dir / "metrics.csv");
    std::string header, row1, row2, extra;
    std::getline(csv, header);
    std::getline(csv, row1);
    std::getline(csv, row2);
    EXPECT_EQ(header, "run_id,mode,dataset,acc,nmi,ari,seconds,seed");
    EXPECT_EQ(row1.rfind("ssc,ssc,", 0), 0u);
    EXPECT_FALSE(row2.empty());
    EXPECT_FALSE(std::getline(csv, extra));

    const auto report = nlohmann::json::parse(read_file(dir / "report.json"));
    EXPECT_EQ(report["status"], "ok");
    EXPECT_EQ(report["metrics"]["ari"], 1.0);

    // Diagonal-block mass of the dumped affinity.
    const Eigen::MatrixXd w = read_matrix_bin((dir / "affinity.bin").string());
    double in_block = 0.0;
    for (Eigen::Index i = 0; i < w.rows(); ++i)
        for (Eigen::Index j = 0; j < w.cols(); ++j)
            if (i / 50 == j / 50) in_block += w(i, j);
    EXPECT_GT(in_block / w.sum(), 0.9);

    EXPECT_EQ(cli("eval " + (dir / "labels.csv").string() + " " + (dir / "labels.csv").string(), dir / "eval.txt"), 0);
    EXPECT_NE(read_file(dir / "eval.txt").find("ari 1"), std::string::npos);
    EXPECT_EQ(cli("heatmap " + (dir / "affinity.bin").string() + " " + (dir / "h.pgm").string() + " --labels " +
                  (dir / "labels.csv").string()),
              0);
    EXPECT_EQ(read_pgm((dir / "h.pgm").string()).width, 250u);
}

TEST(Cli, ExitCodes) {
    const auto dir = scratch("cli_codes");
    write_file(dir / "bad.conf", "dataset.kind = synthetic\nmodel.bogus = 1\n");
    EXPECT_EQ(cli("run " + (dir / "bad.conf").string()), 2);
    EXPECT_EQ(cli("run " + (dir / "missing.conf").string()), 2);
    EXPECT_EQ(cli("frobnicate"), 2);

    std::string text = small_deep(dir.string());
    text.replace(text.find("synth_affinity.spec"), 19, "nonexistent.spec");
    write_file(dir / "fail.conf", text);
    EXPECT_EQ(cli("run " + (dir / "fail.conf").string()), 3);
    const auto report = nlohmann::json::parse(read_file(dir / "report.json"));
    EXPECT_EQ(report["status"], "failed");
    EXPECT_EQ(report["stage"], "architecture");

    write_file(dir / "empty.csv", "index,label\n");
    EXPECT_EQ(cli("eval " + (dir / "empty.csv").string() + " " + (dir / "empty.csv").string()), 2);
}

TEST(Cli, DryRunSelfExpressiveCounts) {
    const std::vector<std::pair<std::string, std::string>> cases{
        {"digits_affinity.conf", "4000000"}, {"arl_affinity.conf", "4665600"}, {"yaleb_affinity.conf", "5914624"}};
    const auto dir = scratch("dry");
    for (const auto& [conf, count] : cases) {
        EXPECT_EQ(cli("dry-run " + kConfigs + "/" + conf, dir / "out.txt"), 0) << conf;
        EXPECT_NE(read_file(dir / "out.txt").find(count), std::string::npos) << conf;
    }
}

TEST(Cli, DryRunOfEveryShippedConfig) {
    for (const auto& e : fs::directory_iterator(kConfigs))
        if (e.path().extension() == ".conf") EXPECT_EQ(cli("dry-run " + e.path().string()), 0) << e.path();
}

TEST(Cli, IdenticalRunsGiveIdenticalReports) {
    const auto dir = scratch("cli_repro");
    write_file(dir / "small.conf", small_deep(dir.string()));
    std::vector<nlohmann::ordered_json> reports;
    for (int i = 0; i < 2; ++i) {
        ASSERT_EQ(cli("run " + (dir / "small.conf").string()), 0);
        auto r = nlohmann::ordered_json::parse(read_file(dir / "report.json"));
        r.erase("seconds");
        reports.push_back(r);
    }
    EXPECT_EQ(reports[0].dump(), reports[1].dump());
}
