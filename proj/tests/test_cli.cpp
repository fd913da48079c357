#include "relunet/experiment.hpp"

#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

using namespace relunet;
namespace fs = std::filesystem;

namespace {

const Json kAbsProblem = Json::parse(R"({
  "target": {"domain": [0, 1], "breakpoints": [0, "1/2", 1], "pieces": [["1/2", -1], ["-1/2", 1]]},
  "density": {"domain": [0, 1], "pieces": [[1]]}
})");

const Json kZeroProblem = Json::parse(R"({"target": {"domain": [0, 1], "pieces": [[0]]}})");

Json read_json(const fs::path& p) {
    std::ifstream in(p);
    return Json::parse(in);
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

fs::path scratch(const std::string& name) {
    auto p = fs::temp_directory_path() / ("relunet_cli_" + name);
    fs::remove_all(p);
    return p;
}

fs::path write_config(const std::string& name, const Json& j) {
    auto p = fs::temp_directory_path() / ("relunet_cli_cfg_" + name + ".json");
    std::ofstream(p) << j.dump();
    return p;
}

int run_cli(const std::string& args) {
    const std::string cmd = std::string(RELUNET_CLI) + " " + args + " > /dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string config(const std::string& name) { return std::string(CONFIG_DIR) + "/" + name; }

Rational rat(const Json& j) { return scalar_from_json<Rational>(j); }

}  // namespace

TEST(CliExitCodes, Check) {
    EXPECT_EQ(run_cli("check --config " + config("check_representable.json")), 0);
    EXPECT_EQ(run_cli("check --config " + config("check_not_representable.json")), 3);
    auto bad = fs::temp_directory_path() / "relunet_cli_malformed.json";
    std::ofstream(bad) << "{\"function\": [1, 2";
    EXPECT_EQ(run_cli("check --config " + bad.string()), 2);
    EXPECT_EQ(run_cli("check --config /nonexistent/config.json"), 2);
    EXPECT_EQ(run_cli("check"), 2);
    EXPECT_EQ(run_cli("frobnicate --config " + config("check_representable.json")), 2);
}

TEST(CliExitCodes, GradcheckAndNegativeControl) {
    EXPECT_EQ(run_cli("gradcheck --config " + config("gradcheck.json")), 0);
    EXPECT_EQ(run_cli("gradcheck --config " + config("gradcheck.json") + " --corrupt-gradient"), 4);
}

TEST(CliExitCodes, ValidationLeavesNoOutput) {
    Json cfg{{"problem", kZeroProblem}, {"width", 1}, {"dynamics", {{"gamma", -1.0}}}};
    auto out = scratch("invalid");
    EXPECT_EQ(run_cli("train --config " + write_config("invalid", cfg).string() + " --out " + out.string()), 2);
    EXPECT_FALSE(fs::exists(out));
}

TEST(CliExitCodes, AllDiverged) {
    Json cfg{{"problem", kAbsProblem},
             {"width", 2},
             {"seed", 1},
             {"dynamics", {{"gamma", 100.0}, {"steps", 1000}, {"inits", 3}}}};
    auto out = scratch("diverged");
    EXPECT_EQ(run_cli("multistart --config " + write_config("diverged", cfg).string() + " --out " + out.string()), 5);
    auto report = read_json(out / "report.json");
    EXPECT_EQ(report["diverged_count"], 3);
}

TEST(CliCheck, ReportsOneBasedWitness) {
    // slopes (0, 1): the relation is the single zero slope
    auto res = run_command("check", Json::parse(R"({"function": {"knots": [0, "1/2", 1], "values": [0, 0, "1/2"]}, "width": 1})"), {});
    EXPECT_EQ(res.exit_code, kExitOk);
    EXPECT_EQ(res.report["witness_indices"], Json::array({1}));
    EXPECT_EQ(res.report["breakpoints"], 1);
    ASSERT_TRUE(res.report.contains("witness_theta"));
    // Node form and polynomial form describe the same function.
    auto pp = run_command("check", Json::parse(R"({"function": {"domain": [0, 1], "breakpoints": [0, "1/2", 1], "pieces": [[0], ["-1/2", 1]]}, "width": 1})"), {});
    EXPECT_EQ(pp.report, res.report);
}

TEST(CliRisk, ExactValues) {
    Json cfg{{"problem", kZeroProblem}, {"width", 1}, {"theta", {1, 0, 1, 0}}};
    auto res = run_command("grad", cfg, {});
    EXPECT_EQ(rat(res.report["risk"]), Rational(1, 3));
    std::vector<Rational> want{Rational(2, 3), Rational(1), Rational(2, 3), Rational(1)};
    for (std::size_t i = 0; i < 4; ++i) EXPECT_EQ(rat(res.report["gradient"][i]), want[i]);
    // the same net written as a (1, 1, 1) architecture through the deep path
    Json deep{{"problem", kZeroProblem}, {"architecture", {{"layers", {1, 1, 1, 1}}}}, {"theta", {1, 0, 1, 0, 1, 0}}};
    EXPECT_EQ(rat(run_command("risk", deep, {}).report["risk"]), Rational(1, 3));
}

TEST(CliApprox, RiskDoesNotIncrease) {
    Json cfg{{"problem", kAbsProblem}, {"width", 2}, {"theta", {3, 1, -1, "1/4", 2, "-1/2", "1/3"}}};
    auto res = run_command("approx", cfg, {});
    EXPECT_LE(rat(res.report["risk_after"]), rat(res.report["risk_before"]));
    EXPECT_LE(res.report["breakpoints_after"].get<int>(), res.report["breakpoints_before"].get<int>());
    EXPECT_LE(rat(res.report["lipschitz_after"]), rat(res.report["lipschitz_bound"]));
    EXPECT_LE(rat(res.report["sup_after"]), rat(res.report["sup_bound"]));
}

TEST(CliRejects, BadConfigs) {
    Json base{{"problem", kAbsProblem}, {"width", 2}, {"theta", {1, 2, 3, 4, 5, 6, 7}}};
    EXPECT_NO_THROW(run_command("risk", base, {}));
    auto extra = base;
    extra["colour"] = "blue";
    EXPECT_THROW(run_command("risk", extra, {}), InvalidInput);
    auto short_theta = base;
    short_theta["theta"] = {1, 2};
    EXPECT_THROW(run_command("risk", short_theta, {}), InvalidInput);
    RunOptions rational;
    rational.mode = "rational";
    EXPECT_THROW(run_command("train", Json{{"problem", kAbsProblem}, {"width", 2}}, rational), InvalidInput);
    EXPECT_THROW(run_command("widthscan", Json{{"problem", kAbsProblem}, {"widthscan", {{"widths", {1}}, {"budget", 0}}}}, {}),
                 InvalidInput);
    Json discontinuous = base;
    discontinuous["problem"]["target"] = Json::parse(R"({"domain": [0, 1], "breakpoints": [0, "1/2", 1], "pieces": [[0], [1]]})");
    EXPECT_THROW(run_command("risk", discontinuous, {}), InvalidInput);
    EXPECT_THROW(run_command("nope", base, {}), InvalidInput);
}

TEST(CliGradcheck, ZeroSamplesPassVacuously) {
    Json cfg{{"problem", kAbsProblem}, {"width", 2}, {"gradcheck", {{"samples", 0}}}};
    auto res = run_command("gradcheck", cfg, {});
    EXPECT_EQ(res.exit_code, kExitOk);
    EXPECT_EQ(res.report["max_relative_error"], 0.0);
}

TEST(CliGradcheck, DeepArchitecture) {
    Json cfg{{"problem", kAbsProblem}, {"architecture", {{"layers", {1, 4, 4, 1}}}}, {"gradcheck", {{"samples", 20}}}};
    auto res = run_command("gradcheck", cfg, {});
    EXPECT_EQ(res.exit_code, kExitOk) << res.report.dump();
}

TEST(CliTrain, ZeroHorizonGivesOneRow) {
    Json cfg{{"problem", kAbsProblem}, {"width", 2}, {"dynamics", {{"method", "gf"}, {"T", 0.0}}}};
    auto res = run_command("train", cfg, {});
    const auto& csv = res.files.at("trajectory_0.csv");
    EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 2);
    EXPECT_EQ(csv.substr(0, csv.find('\n')), "step_or_time,risk,grad_norm,theta_0,theta_1,theta_2,theta_3,theta_4,theta_5,theta_6");
    EXPECT_TRUE(res.files.count("plotdata.dat"));
    EXPECT_TRUE(res.files.count("report.json"));
}

TEST(CliTrain, ExplicitInitAndGD) {
    Json cfg{{"problem", kZeroProblem}, {"width", 1}, {"theta", {1, 0, 1, 0}}, {"dynamics", {{"gamma", 0.1}, {"steps", 1}}}};
    auto res = run_command("train", cfg, {});
    std::istringstream csv(res.files.at("trajectory_0.csv"));
    std::string header, first, second;
    std::getline(csv, header);
    std::getline(csv, first);
    std::getline(csv, second);
    EXPECT_EQ(second.substr(0, 2), "1,");
    EXPECT_NE(second.find(",-0.1,"), std::string::npos);
}

TEST(CliMultistart, SmokeConfigReachesSmallRisk) {
    auto cfg = read_json(config("multistart_smoke.json"));
    auto res = run_command("multistart", cfg, {});
    EXPECT_EQ(res.exit_code, kExitOk);
    EXPECT_LE(res.report["final_risk"].get<double>(), 1e-3);
    EXPECT_EQ(res.files.count("trajectory_63.csv"), 1u);
    EXPECT_EQ(res.files.size(), 64u + 2u);
}

TEST(CliWidthscan, RepresentableWidthIsExact) {
    auto res = run_command("widthscan", read_json(config("widthscan.json")), {});
    const auto& rows = res.report["rows"];
    ASSERT_EQ(rows.size(), 3u);
    EXPECT_EQ(rows[1]["min_width"], 2);
    EXPECT_EQ(rows[1]["best_risk"], 0.0);
    const auto& csv = res.files.at("widthscan.csv");
    EXPECT_EQ(csv.substr(0, csv.find('\n')), "min_width,best_risk,seeds_used");
    EXPECT_NE(csv.find("\n2,0,4\n"), std::string::npos);
}

TEST(CliDeterminism, ByteIdenticalAcrossRunsAndJobs) {
    for (const std::string cmd : {"multistart", "widthscan", "train"}) {
        const std::string cfg_name = cmd == "multistart" ? "multistart_smoke.json" : cmd == "widthscan" ? "widthscan.json" : "train_gf.json";
        auto a = scratch(cmd + "_a"), b = scratch(cmd + "_b");
        ASSERT_EQ(run_cli(cmd + " --config " + config(cfg_name) + " --jobs 1 --out " + a.string()), 0);
        ASSERT_EQ(run_cli(cmd + " --config " + config(cfg_name) + " --jobs 3 --out " + b.string()), 0);
        std::size_t files = 0;
        for (const auto& entry : fs::directory_iterator(a)) {
            ++files;
            EXPECT_EQ(slurp(entry.path()), slurp(b / entry.path().filename())) << cmd << " " << entry.path();
        }
        EXPECT_GT(files, 0u);
    }
}

TEST(CliSeeds, OverrideChangesTheRun) {
    auto cfg = read_json(config("widthscan.json"));
    RunOptions a, b;
    a.seed = 1;
    b.seed = 2;
    EXPECT_NE(run_command("widthscan", cfg, a).files.at("widthscan.csv"), run_command("widthscan", cfg, b).files.at("widthscan.csv"));
    EXPECT_EQ(run_command("widthscan", cfg, a).files.at("widthscan.csv"), run_command("widthscan", cfg, a).files.at("widthscan.csv"));
}
