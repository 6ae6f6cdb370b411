#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "ordcrowd/cli.hpp"

namespace fs = std::filesystem;
using namespace ordcrowd;

namespace {

struct Invocation {
    int code;
    std::string out;
    std::string err;
};

Invocation call(std::vector<std::string> args) {
    args.insert(args.begin(), "ordcrowd");
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    std::ostringstream out, err;
    const int code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
    return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::size_t data_rows(const fs::path& p) {
    std::ifstream in(p);
    std::string line;
    std::size_t n = 0;
    std::getline(in, line);
    while (std::getline(in, line))
        if (!line.empty()) ++n;
    return n;
}

class CliTest : public ::testing::Test {
protected:
    void SetUp() override {
        dir = fs::temp_directory_path() /
              ("ordcrowd_cli_" + std::to_string(::getpid()) + "_" +
               ::testing::UnitTest::GetInstance()->current_test_info()->name());
        fs::create_directories(dir);
        prefix = (dir / "toy").string();
        const auto r = call({"synth", "--m", "40", "--n", "8", "--c", "2", "--ratings-per-instance", "3", "--seed", "3",
                             "--out-prefix", prefix});
        ASSERT_EQ(r.code, 0) << r.err;
    }
    void TearDown() override { fs::remove_all(dir); }

    std::string path(const std::string& name) const { return (dir / name).string(); }

    fs::path dir;
    std::string prefix;
};

} // namespace

TEST_F(CliTest, SynthWritesAllFiles) {
    EXPECT_EQ(data_rows(prefix + ".ratings.tsv"), 120u);
    EXPECT_EQ(data_rows(prefix + ".truth.tsv"), 40u);
    EXPECT_EQ(data_rows(prefix + ".categories.tsv"), 40u);
    const auto params = nlohmann::json::parse(slurp(prefix + ".params.json"));
    EXPECT_EQ(params["tau"].size(), 8u);
    EXPECT_EQ(params["delta"].size(), 2u);
}

TEST_F(CliTest, InferWritesEstimatesAndSidecar) {
    const auto est = path("odm.tsv");
    const auto r = call({"infer", "--ratings", prefix + ".ratings.tsv", "--method", "odm", "--restarts", "2",
                         "--categories", prefix + ".categories.tsv", "--out", est});
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_EQ(data_rows(est), 40u);
    EXPECT_EQ(slurp(est).substr(0, 15), "instance\tz_hat\n");
    const auto side = nlohmann::json::parse(slurp(est + ".json"));
    EXPECT_EQ(side["restarts_run"], 2);
    EXPECT_EQ(side["spamminess"].size(), 8u);
    EXPECT_TRUE(side.contains("trace"));
}

TEST_F(CliTest, InferIsDeterministicAndDefaultsMatchExplicitFlags) {
    const auto a = path("a.tsv"), b = path("b.tsv"), c = path("c.tsv");
    ASSERT_EQ(call({"infer", "--ratings", prefix + ".ratings.tsv", "--method", "dawid-skene", "--out", a}).code, 0);
    ASSERT_EQ(call({"infer", "--ratings", prefix + ".ratings.tsv", "--method", "dawid-skene", "--out", b}).code, 0);
    ASSERT_EQ(call({"infer", "--ratings", prefix + ".ratings.tsv", "--method", "dawid-skene", "--restarts", "10",
                    "--max-iters", "1000", "--tol", "0.1", "--seed", "0", "--out", c})
                  .code,
              0);
    EXPECT_EQ(slurp(a), slurp(b));
    EXPECT_EQ(slurp(a), slurp(c));
    EXPECT_EQ(slurp(a + ".json"), slurp(c + ".json"));
}

TEST_F(CliTest, EveryMethodRuns) {
    for (const char* m : {"odm", "dawid-skene", "glad", "ord-binary", "continuous", "mean", "median", "majority"}) {
        const auto est = path(std::string(m) + ".tsv");
        const auto r = call({"infer", "--ratings", prefix + ".ratings.tsv", "--method", m, "--restarts", "1", "--out", est});
        EXPECT_EQ(r.code, 0) << m << ": " << r.err;
        EXPECT_EQ(data_rows(est), 40u) << m;
    }
}

TEST_F(CliTest, EvaluatePerfectEstimates) {
    // The truth file doubles as a perfect estimates file.
    const auto est = path("perfect.tsv");
    {
        std::ofstream f(est);
        f << "instance\tz_hat\n";
        std::ifstream in(prefix + ".truth.tsv");
        std::string line;
        std::getline(in, line);
        while (std::getline(in, line)) f << line << '\n';
    }
    const auto r = call({"evaluate", "--estimates", est, "--truth", prefix + ".truth.tsv", "--queries",
                         prefix + ".categories.tsv", "--label", "oracle"});
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_EQ(r.out.substr(0, r.out.find('\n')), "method\tspam_level\tmse\tcorrelation\tndcg");
    EXPECT_NE(r.out.find("oracle\t0\t0\t1\t1"), std::string::npos) << r.out;
    const auto js = nlohmann::json::parse(slurp(est + ".metrics.json"));
    EXPECT_EQ(js["mse"], 0.0);
    EXPECT_EQ(js["covered"], 40);
    EXPECT_EQ(js["per_query_ndcg"].size(), 2u);
}

TEST_F(CliTest, EvaluatePartialTruth) {
    const auto est = path("est.tsv");
    ASSERT_EQ(call({"infer", "--ratings", prefix + ".ratings.tsv", "--method", "mean", "--out", est}).code, 0);
    const auto truth = path("partial.tsv");
    {
        std::ofstream f(truth);
        f << "instance\tvalue\ni0\t1.0\ni1\t2.0\ni2\t3.5\n";
    }
    const auto r = call({"evaluate", "--estimates", est, "--truth", truth, "--json", path("m.json")});
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_EQ(nlohmann::json::parse(slurp(path("m.json")))["covered"], 3);
}

TEST_F(CliTest, ErrorsGiveNonzeroExitCodes) {
    EXPECT_EQ(call({"infer", "--ratings", prefix + ".ratings.tsv", "--method", "bogus", "--out", path("x")}).code, 1);
    EXPECT_NE(call({"evaluate", "--estimates", prefix + ".truth.tsv", "--truth", path("missing.tsv")}).code, 0);
    EXPECT_EQ(call({"spam-bench", "--ratings", prefix + ".ratings.tsv", "--truth", prefix + ".truth.tsv", "--methods",
                    "mean,bogus", "--levels", "0..1"})
                  .code,
              1);
    EXPECT_EQ(call({"spam-bench", "--ratings", prefix + ".ratings.tsv", "--truth", prefix + ".truth.tsv", "--methods",
                    "mean", "--levels", "3..12"})
                  .code,
              1);
    {
        std::ofstream f(path("bad.tsv"));
        f << "instance\tannotator\trating\ni\ta\t7\n";
    }
    const auto r = call({"infer", "--ratings", path("bad.tsv"), "--method", "mean", "--out", path("y")});
    EXPECT_EQ(r.code, 2);
    EXPECT_NE(r.err.find("error"), std::string::npos);
    EXPECT_EQ(call({"--help"}).code, 0);
}

TEST_F(CliTest, SpamBenchRowsAndDeterminism) {
    const std::vector<std::string> args{"spam-bench", "--ratings", prefix + ".ratings.tsv", "--truth",
                                        prefix + ".truth.tsv", "--queries", prefix + ".categories.tsv",
                                        "--methods", "mean,majority", "--levels", "0..2"};
    const auto a = call(args), b = call(args);
    ASSERT_EQ(a.code, 0) << a.err;
    EXPECT_EQ(a.out, b.out);
    std::istringstream in(a.out);
    std::string line;
    std::size_t rows = 0;
    std::getline(in, line);
    while (std::getline(in, line)) ++rows;
    EXPECT_EQ(rows, 6u);
    EXPECT_NE(a.out.find("majority\t2\t"), std::string::npos);
}

TEST_F(CliTest, BinaryExitCodes) {
    const std::string bin = ORDCROWD_CLI_PATH;
    auto status = [](const std::string& cmd) {
        const int s = std::system((cmd + " >/dev/null 2>&1").c_str());
        return WIFEXITED(s) ? WEXITSTATUS(s) : -1;
    };
    EXPECT_EQ(status(bin + " --help"), 0);
    EXPECT_EQ(status(bin + " infer --method nope --ratings " + prefix + ".ratings.tsv --out " + path("z")), 1);
    EXPECT_EQ(status(bin + " infer --method mean --ratings " + prefix + ".ratings.tsv --out " + path("z")), 0);
    EXPECT_EQ(data_rows(path("z")), 40u);
}
