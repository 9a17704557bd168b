#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "roughctl/errors.hpp"
#include "roughctl/harness.hpp"

using namespace roughctl;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream s;
    s << in.rdbuf();
    return s.str();
}

// A small additive configuration that runs in well under a second.
ExperimentConfig small(const std::string& out) {
    ExperimentConfig c;
    c.out = out;
    c.grid = 16;
    c.n_paths = 6;
    c.mesh_size = 121;
    c.control_points = 17;
    c.riccati_refine = 4;
    c.checks.enabled = {"lower", "upper"};
    return c;
}

}  // namespace

TEST(Config, RoundTripsThroughJson) {
    ExperimentConfig c;
    c.fixture = "custom";
    c.custom.drift = {0.1, -0.2};
    c.custom.policy = {0.0, 1.0};
    c.penalty.type = "custom";
    c.penalty.running = {0.5};
    c.checks.enabled = {"lower", "upper"};
    c.hjb.level_max = 7;
    c.seed = 18446744073709551615ull;
    c.emit_timings = true;
    EXPECT_EQ(parse_config(to_json(c)), c);
    EXPECT_EQ(parse_config_text("{}"), ExperimentConfig{});
}

TEST(Config, SeedMayBeDecimalString) {
    EXPECT_EQ(parse_config_text(R"({"seed": "18446744073709551615"})").seed, 18446744073709551615ull);
}

TEST(Config, RejectsUnknownKeysAndBadValues) {
    EXPECT_THROW(parse_config_text(R"({"n_path": 5})"), ConfigError);
    EXPECT_THROW(parse_config_text(R"({"hjb": {"levels": 3}})"), ConfigError);
    EXPECT_THROW(parse_config_text(R"({"grid": "many"})"), ConfigError);
    EXPECT_THROW(parse_config_text(R"({"fixture": "quartic"})"), ConfigError);
    EXPECT_THROW(parse_config_text("[1, 2"), ConfigError);
    try {
        parse_config_text(R"({"pmp": {"grid": -1}})");
        FAIL();
    } catch (const ConfigError& e) {
        EXPECT_NE(std::string(e.what()).find("pmp.grid"), std::string::npos) << e.what();
    }
}

TEST(Config, ZeroPathsIsAnInvalidArgument) {
    ExperimentConfig c;
    c.n_paths = 0;
    EXPECT_THROW(validate(c), std::invalid_argument);
    const RunRecord r = run_command("bound", c);
    EXPECT_EQ(r.exit_code, 2);
    EXPECT_EQ(r.record["error"]["kind"], "invalid-argument");
}

TEST(Run, UnknownCommandAndBadJsonExitWithTwo) {
    EXPECT_EQ(run_command_text("frobnicate", "{}").exit_code, 2);
    const RunRecord r = run_command_text("bound", R"({"bogus": 1})");
    EXPECT_EQ(r.exit_code, 2);
    EXPECT_EQ(r.record["error"]["kind"], "config");
}

TEST(Run, NumericalBlowUpExitsWithThree) {
    ExperimentConfig c = small("harness_blowup");
    c.fixture = "custom";
    c.custom.drift = {0.0, 0.0, 0.0, 10.0};
    c.custom.policy = {0.0};
    c.penalty.type = "zero";
    c.x0 = 3.0;
    c.mesh_lower = -5.0;
    c.mesh_upper = 5.0;
    const RunRecord r = run_command("bound", c);
    EXPECT_EQ(r.exit_code, 3) << r.record.dump();
}

TEST(Run, BoundWritesRecordAndCsv) {
    const ExperimentConfig c = small("harness_bound");
    const RunRecord r = run_command("bound", c);
    ASSERT_EQ(r.exit_code, 0) << r.record.dump();
    EXPECT_TRUE(fs::exists("harness_bound/duality.csv"));
    const json rec = json::parse(slurp("harness_bound/record.json"));
    EXPECT_EQ(rec["command"], "bound");
    EXPECT_EQ(parse_config(rec["config"]), c);
    EXPECT_FALSE(rec.contains("timings"));
}

TEST(Run, IdenticalConfigGivesIdenticalFiles) {
    ExperimentConfig a = small("harness_det_a");
    ExperimentConfig b = small("harness_det_b");
    b.workers = 3;
    ASSERT_EQ(run_command("lqc-verify", a).exit_code, 0);
    ASSERT_EQ(run_command("lqc-verify", b).exit_code, 0);
    EXPECT_EQ(slurp("harness_det_a/duality.csv"), slurp("harness_det_b/duality.csv"));
    ASSERT_EQ(run_command("sample-path", a).exit_code, 0);
    ASSERT_EQ(run_command("sample-path", b).exit_code, 0);
    EXPECT_EQ(slurp("harness_det_a/path.txt"), slurp("harness_det_b/path.txt"));
}

TEST(Run, CustomFixtureRejectsRogersPenalty) {
    ExperimentConfig c = small("harness_custom");
    c.fixture = "custom";
    c.custom.policy = {0.0, -1.0};
    EXPECT_EQ(run_command("bound", c).exit_code, 2);
    c.penalty.type = "zero";
    const RunRecord ok = run_command("bound", c);
    EXPECT_EQ(ok.exit_code, 0) << ok.record.dump();
}

TEST(Run, TimingsOnlyWhenRequested) {
    ExperimentConfig c = small("harness_timed");
    c.emit_timings = true;
    const RunRecord r = run_command("sample-path", c);
    ASSERT_EQ(r.exit_code, 0);
    EXPECT_TRUE(r.record.contains("timings"));
}
