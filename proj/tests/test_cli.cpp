#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <regex>
#include <sstream>
#include <string>

namespace fs = std::filesystem;

namespace {

int run(const std::string& args) {
    const std::string cmd = std::string(MDHP_CLI_PATH) + " " + args + " >/dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::size_t lines(const fs::path& p) {
    const std::string s = slurp(p);
    return static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n'));
}

class Cli : public ::testing::Test {
protected:
    void SetUp() override {
        dir = fs::temp_directory_path() / ("mdhp_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
        fs::remove_all(dir);
        fs::create_directories(dir);
    }
    void TearDown() override { fs::remove_all(dir); }
    std::string p(const std::string& name) const { return (dir / name).string(); }
    fs::path dir;
};

}  // namespace

TEST_F(Cli, GenSplitsAndIsDeterministic) {
    ASSERT_EQ(run("gen --count 100 --scenario 0 --seed 5 --out " + p("a")), 0);
    EXPECT_EQ(lines(dir / "a" / "train.jsonl"), 80u);
    EXPECT_EQ(lines(dir / "a" / "val.jsonl"), 20u);
    ASSERT_EQ(run("gen --count 100 --scenario 0 --seed 5 --workers 2 --out " + p("b")), 0);
    for (const char* f : {"train.jsonl", "val.jsonl", "manifest.json"}) {
        EXPECT_EQ(slurp(dir / "a" / f), slurp(dir / "b" / f)) << f;
    }
    ASSERT_EQ(run("gen --count 100 --scenario 0 --seed 6 --out " + p("c")), 0);
    EXPECT_NE(slurp(dir / "a" / "train.jsonl"), slurp(dir / "c" / "train.jsonl"));
}

TEST_F(Cli, ExitCodes) {
    EXPECT_EQ(run("gen --scenario 11 --out " + p("x")), 2);
    EXPECT_EQ(run("gen --count 10 --dims 1 --out " + p("x")), 2);
    std::ofstream(p("bad.json")) << "{\"bogus\": 1}";
    EXPECT_EQ(run("gen --config " + p("bad.json") + " --out " + p("x")), 2);
    std::ofstream(p("broken.json")) << "{not json";
    EXPECT_EQ(run("gen --config " + p("broken.json") + " --out " + p("x")), 2);
    EXPECT_EQ(run("estimate --in " + p("missing.jsonl")), 3);
    EXPECT_EQ(run("eval --in " + p("missing") + " --checkpoint " + p("nope.bin")), 3);
    std::ofstream(p("junk.jsonl")) << "{\"split\": 3}\n";
    EXPECT_EQ(run("estimate --in " + p("junk.jsonl") + " --dims 6 --out " + p("d.jsonl")), 5);
    EXPECT_EQ(run("no-such-command"), 2);
}

TEST_F(Cli, NumericFailureExitCode) {
    ASSERT_EQ(run("gen --count 8 --scenario 0 --out " + p("ds")), 0);
    ASSERT_EQ(run("estimate --in " + p("ds") + " --epochs 5 --out " + p("dump.jsonl")), 0);
    std::ofstream(p("huge.json")) << R"({"train": {"learning_rate": 1e300, "hidden": 4, "layers": 1}})";
    EXPECT_EQ(run("train --config " + p("huge.json") + " --in " + p("ds") + " --dump " + p("dump.jsonl") +
                  " --epochs 3 --checkpoint " + p("m.bin")),
              4);
}

TEST_F(Cli, EmptyDatasetGivesEmptyDump) {
    std::ofstream(p("empty.jsonl")).flush();
    ASSERT_EQ(run("estimate --in " + p("empty.jsonl") + " --dims 6 --out " + p("e.jsonl")), 0);
    EXPECT_EQ(slurp(dir / "e.jsonl"), "");
    EXPECT_EQ(slurp(dir / "e.jsonl.report.tsv"), "Dim\tMax-T-Len\tMin-T-Len\tWindow-Cost\tThroughput\n");
}

TEST_F(Cli, ReportCdfNeedsBothLabels) {
    ASSERT_EQ(run("gen --count 10 --scenario 0 --out " + p("ds")), 0);
    ASSERT_EQ(run("estimate --in " + p("ds") + " --epochs 5 --out " + p("dump.jsonl")), 0);
    EXPECT_EQ(run("report-cdf --dump " + p("dump.jsonl") + " --pair 0,1 --out " + p("cdf.tsv")), 0);
    EXPECT_GT(lines(dir / "cdf.tsv"), 1u);
    std::ofstream single(p("single.jsonl"));
    std::istringstream all(slurp(dir / "dump.jsonl"));
    for (std::string line; std::getline(all, line);) {
        if (line.find("\"normal\"") != std::string::npos) single << line << '\n';
    }
    single.close();
    EXPECT_EQ(run("report-cdf --dump " + p("single.jsonl")), 5);
}

TEST_F(Cli, TrainEvalRoundtrip) {
    ASSERT_EQ(run("gen --count 20 --scenario 0 --out " + p("ds")), 0);
    ASSERT_EQ(run("estimate --in " + p("ds") + " --epochs 5 --out " + p("dump.jsonl")), 0);
    std::ofstream(p("small.json")) << R"({"train": {"hidden": 4, "layers": 1}})";
    ASSERT_EQ(run("train --config " + p("small.json") + " --in " + p("ds") + " --dump " + p("dump.jsonl") +
                  " --epochs 2 --checkpoint " + p("m.bin")),
              0);
    EXPECT_TRUE(fs::exists(dir / "m.bin.json"));
    EXPECT_EQ(lines(dir / "m.bin.trace.tsv"), 3u);
    ASSERT_EQ(run("eval --in " + p("ds") + " --dump " + p("dump.jsonl") + " --checkpoint " + p("m.bin") +
                  " --split all --out " + p("metrics.json")),
              0);
    const std::string metrics = slurp(dir / "metrics.json");
    for (const char* key : {"accuracy", "precision", "recall", "f1", "auc"}) {
        EXPECT_NE(metrics.find(key), std::string::npos) << key;
    }
}
