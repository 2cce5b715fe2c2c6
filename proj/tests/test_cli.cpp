#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

#include <nlohmann/json.hpp>

namespace fs = std::filesystem;

namespace {

const fs::path kRoot = fs::temp_directory_path() / "eeg2vec_test_cli";

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), {}};
}

int run(const std::string& args) {
    const std::string cmd = std::string(EEG2VEC_CLI_PATH) + " " + args + " >>" + (kRoot / "log.txt").string() + " 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

class Cli : public ::testing::Test {
protected:
    static void SetUpTestSuite() {
        fs::remove_all(kRoot);
        fs::create_directories(kRoot);
        const nlohmann::json cfg = {{"format_version", 1},
                                    {"seed", 7},
                                    {"benchmark", {{"trials_per_cell", 6}}},
                                    {"split", {{"folds", 2}}},
                                    {"train", {{"max_epochs", 2}, {"batch_size", 32}}},
                                    {"evaluate", {{"generated_per_class", 2}}}};
        std::ofstream(config()) << cfg.dump(2);
    }
    static std::string config() { return (kRoot / "tiny.json").string(); }
    static std::string common(const std::string& out) { return "--config " + config() + " -q --out " + (kRoot / out).string(); }
};

}  // namespace

TEST_F(Cli, BenchgenTrainEvaluateChain) {
    ASSERT_EQ(run("benchgen " + common("run")), 0) << slurp(kRoot / "log.txt");
    const auto data = (kRoot / "run" / "data" / "manifest.json").string();
    ASSERT_TRUE(fs::exists(data));
    EXPECT_TRUE(fs::exists(kRoot / "run" / "data" / "ground_truth.csv"));
    EXPECT_TRUE(fs::exists(kRoot / "run" / "config.resolved.json"));

    ASSERT_EQ(run("split --data " + data + " " + common("run")), 0) << slurp(kRoot / "log.txt");
    const auto split = (kRoot / "run" / "split.json").string();
    ASSERT_EQ(run("train --data " + data + " --split " + split + " " + common("run")), 0) << slurp(kRoot / "log.txt");
    const auto ckpt = (kRoot / "run" / "checkpoints" / "fold0.ckpt").string();
    ASSERT_TRUE(fs::exists(ckpt));
    EXPECT_TRUE(fs::exists(kRoot / "run" / "reports" / "cv_summary.csv"));
    EXPECT_TRUE(fs::exists(kRoot / "run" / "reports" / "history_fold1.csv"));

    ASSERT_EQ(run("evaluate --data " + data + " --split " + split + " --checkpoint " + ckpt + " " + common("run")), 0)
        << slurp(kRoot / "log.txt");
    EXPECT_TRUE(fs::exists(kRoot / "run" / "reports" / "eval_report.csv"));
    EXPECT_TRUE(fs::exists(kRoot / "run" / "reports" / "psd_gaps.csv"));

    ASSERT_EQ(run("encode --data " + data + " --checkpoint " + ckpt + " " + common("run")), 0);
    EXPECT_TRUE(fs::exists(kRoot / "run" / "latents" / "latents.csv"));
    ASSERT_EQ(run("generate --checkpoint " + ckpt + " --y 1 --p 0 --count 3 " + common("run")), 0);
    EXPECT_TRUE(fs::exists(kRoot / "run" / "generated" / "manifest.json"));

    // Same config and seed: identical checkpoint bytes.
    ASSERT_EQ(run("train --data " + data + " --split " + split + " --fold 0 " + common("again")), 0);
    EXPECT_EQ(slurp(ckpt), slurp(kRoot / "again" / "checkpoints" / "fold0.ckpt"));
}

TEST_F(Cli, UsageAndInputErrorsExitNonZero) {
    EXPECT_NE(run("train --no-such-flag " + common("bad")), 0);
    EXPECT_NE(run("frobnicate"), 0);
    EXPECT_NE(run("train --data /nonexistent/manifest.json " + common("bad")), 0);
    EXPECT_EQ(run("--help"), 0);
}

TEST_F(Cli, StrictConfigIsEnforced) {
    const auto bad = kRoot / "bad.json";
    std::ofstream(bad) << R"({"format_version": 1, "train": {"seed": 3}})";
    EXPECT_NE(run("benchgen --config " + bad.string() + " -q --out " + (kRoot / "bad").string()), 0);
}
