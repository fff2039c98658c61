#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <string>

#include "json.hpp"

namespace fs = std::filesystem;

namespace {

struct Outcome {
    int code = -1;
    std::string err;
};

fs::path scratch() {
    static const fs::path dir = [] {
        auto d = fs::temp_directory_path() / "rotigcv_cli_test";
        fs::create_directories(d);
        return d;
    }();
    return dir;
}

std::string slurp(const fs::path& p) {
    std::ifstream f(p, std::ios::binary);
    return std::string(std::istreambuf_iterator<char>(f), {});
}

Outcome run_cli(const std::string& args) {
    const auto err =
        scratch() / (std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()) + ".err");
    const std::string cmd = std::string(ROTIGCV_CLI_PATH) + " " + args + " 2>" + err.string();
    const int status = std::system(cmd.c_str());
    Outcome o;
    o.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    o.err = slurp(err);
    return o;
}

std::string config(const std::string& name) { return std::string(ROTIGCV_CONFIG_DIR) + "/" + name; }

fs::path write_config(const std::string& name, const std::string& text) {
    const auto p = scratch() / name;
    std::ofstream(p) << text;
    return p;
}

std::vector<std::string> lines(const std::string& s) {
    std::vector<std::string> out;
    std::istringstream in(s);
    for (std::string l; std::getline(in, l);) out.push_back(l);
    return out;
}

// every stderr line must be a JSON object with an "error" key
void expect_json_records(const std::string& err) {
    for (const auto& l : lines(err)) {
        const auto j = nlohmann::json::parse(l);
        EXPECT_TRUE(j.contains("error")) << l;
        EXPECT_TRUE(j.contains("message")) << l;
    }
}

}  // namespace

TEST(Cli, SmokeRunWritesCsv) {
    const auto out = scratch() / "smoke.csv";
    const auto o = run_cli("run " + config("smoke.ini") + " --out " + out.string());
    EXPECT_EQ(o.code, 0) << o.err;
    const auto l = lines(slurp(out));
    ASSERT_GT(l.size(), 1u);
    EXPECT_EQ(l.front(), "method,lambda,metric_value,exact_risk,seed,resample,r2_hat,sigma2_hat,tuned");
    // 8 curves over 20 lambdas
    EXPECT_EQ(l.size(), 1u + 8u * 20u);
}

TEST(Cli, TwoRunsAreByteIdentical) {
    const auto a = scratch() / "a.csv";
    const auto b = scratch() / "b.csv";
    ASSERT_EQ(run_cli("run " + config("smoke.ini") + " --seeds 1..3 --out " + a.string()).code, 0);
    ASSERT_EQ(run_cli("run " + config("smoke.ini") + " --seeds 1..3 --threads 3 --out " + b.string()).code, 0);
    EXPECT_EQ(slurp(a), slurp(b));
    EXPECT_FALSE(slurp(a).empty());
}

TEST(Cli, SeedsOverrideAndJsonLines) {
    const auto out = scratch() / "smoke.jsonl";
    const auto o = run_cli("run " + config("smoke.ini") + " --seeds 4,9 --format jsonl --out " + out.string());
    ASSERT_EQ(o.code, 0) << o.err;
    std::set<int> seeds;
    for (const auto& l : lines(slurp(out))) seeds.insert(nlohmann::json::parse(l)["seed"].get<int>());
    EXPECT_EQ(seeds, (std::set<int>{4, 9}));
}

TEST(Cli, ScaleShrinksRun) {
    const auto out = scratch() / "scaled.csv";
    const auto o = run_cli("run " + config("gaussian.ini") + " --scale 0.05 --out " + out.string());
    EXPECT_EQ(o.code, 0) << o.err;
    EXPECT_GT(lines(slurp(out)).size(), 1u);
}

TEST(Cli, StdoutIsDefaultOutput) {
    const auto out = scratch() / "stdout.csv";
    const auto o = run_cli("run " + config("smoke.ini") + " > " + out.string());
    EXPECT_EQ(o.code, 0);
    EXPECT_EQ(lines(slurp(out)).size(), 1u + 8u * 20u);
}

TEST(Cli, EmptyMethodsIsConfigErrorAndWritesNothing) {
    auto text = slurp(config("smoke.ini"));
    const auto pos = text.find("methods = ");
    text.replace(pos, text.find('\n', pos) - pos, "methods =");
    const auto cfg = write_config("empty_methods.ini", text);
    const auto out = scratch() / "never.csv";
    fs::remove(out);
    const auto o = run_cli("run " + cfg.string() + " --out " + out.string());
    EXPECT_EQ(o.code, 2);
    EXPECT_FALSE(fs::exists(out));
    ASSERT_FALSE(o.err.empty());
    expect_json_records(o.err);
    EXPECT_EQ(nlohmann::json::parse(lines(o.err).front())["error"], "config");
}

TEST(Cli, MissingConfigAndBadFlagsExitTwo) {
    auto o = run_cli("run /nonexistent/cfg.ini");
    EXPECT_EQ(o.code, 2);
    expect_json_records(o.err);
    o = run_cli("run " + config("smoke.ini") + " --format xml");
    EXPECT_EQ(o.code, 2);
    expect_json_records(o.err);
    o = run_cli("");
    EXPECT_EQ(o.code, 2);
    o = run_cli("run " + config("smoke.ini") + " --seeds 3..1");
    EXPECT_EQ(o.code, 2);
    expect_json_records(o.err);
}

TEST(Cli, UnwritableOutputExitsOne) {
    const auto o = run_cli("run " + config("smoke.ini") + " --out /nonexistent/dir/out.csv");
    EXPECT_EQ(o.code, 1);
    expect_json_records(o.err);
    EXPECT_EQ(nlohmann::json::parse(lines(o.err).back())["error"], "io");
}

TEST(Cli, FailedCellsExitThreeWithRecords) {
    // every direction aligned: the reduced model is empty in every cell
    const auto cfg = write_config("all_aligned.ini", R"(
[experiment]
methods = aroti_gcv
n_noise_resamples = 2
[ensemble]
family = gaussian_iid
n = 20
p = 10
[signal]
r2 = 1
[aroti]
aligned = top:10
[test]
coupled = 0
)");
    const auto out = scratch() / "failed.csv";
    const auto o = run_cli("run " + cfg.string() + " --out " + out.string());
    EXPECT_EQ(o.code, 3);
    expect_json_records(o.err);
    int cell_records = 0;
    for (const auto& l : lines(o.err)) {
        const auto j = nlohmann::json::parse(l);
        if (j.contains("resample")) {
            EXPECT_EQ(j["seed"], 1);
            ++cell_records;
        }
    }
    EXPECT_EQ(cell_records, 2);
}

TEST(Cli, WarningGoesToStderr) {
    auto text = slurp(config("smoke.ini"));
    text.replace(text.find("[noise]"), 7, "[noise]\nfamily = rademacher_scaled");
    const auto cfg = write_config("rademacher.ini", text);
    const auto out = scratch() / "warn.csv";
    const auto o = run_cli("run " + cfg.string() + " --out " + out.string());
    EXPECT_EQ(o.code, 0);
    ASSERT_EQ(lines(o.err).size(), 1u);
    EXPECT_EQ(nlohmann::json::parse(o.err)["error"], "warning");
}
