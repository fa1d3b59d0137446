#include <sys/wait.h>

#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>

#include <gtest/gtest.h>

#include "simgap/config.hpp"
#include "simgap/error.hpp"
#include "simgap/io.hpp"
#include "simgap/pipeline.hpp"
#include "test_support.hpp"

namespace simgap {
namespace {

namespace fs = std::filesystem;

Json config_json(const fs::path& out) {
  Json j = Json::parse(R"({
    "name": "small",
    "model": {"kind": "pendulum", "tau": 0.005},
    "state_box": {"lower": [-0.2, -0.5], "upper": [0.2, 0.5]},
    "inputs": {"lower": [-1.2], "upper": [1.2], "step": [0.2]},
    "oracle": {"kind": "surrogate", "surrogate": "damped-pendulum"},
    "sampling": {"epsilon": 0.04, "sweep": [0.08, 0.04]},
    "scp": {"basis": "quadratic"},
    "lipschitz": {"l1": "estimate", "pairs": 1000, "seed": 3},
    "validate": {"trials": 2000, "seed": 5},
    "synthesis": {
      "eta": [0.005, 0.025],
      "hold": 8,
      "spec": {"kind": "invariance", "safe": {"lower": [0.0, -0.5], "upper": [0.2, 0.5]}}
    },
    "simulate": {"steps": 100, "all_winning_cells": true},
    "jobs": 2
  })");
  j["output"] = {{"dir", out.string()}};
  return j;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

std::size_t lines(const fs::path& p) {
  std::ifstream in(p);
  std::string s;
  std::size_t n = 0;
  while (std::getline(in, s)) ++n;
  return n;
}

TEST(Config, UnknownKeyIsRejected) {
  Json j = config_json("unused");
  j["sampling"]["epsilom"] = 0.1;
  try {
    parse_config(j);
    FAIL() << "no error";
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("epsilom"), std::string::npos);
  }
}

TEST(Config, CrossFieldChecks) {
  Json j = config_json("unused");
  j["synthesis"]["eta"] = {0.01};
  EXPECT_THROW(parse_config(j), ConfigError);
  j = config_json("unused");
  j["synthesis"]["spec"]["safe"]["upper"] = {0.3, 0.5};
  EXPECT_THROW(parse_config(j), ConfigError);
  j = config_json("unused");
  j["lipschitz"]["l1"] = "analytic";
  j["oracle"] = {{"kind", "external"}, {"command", {"/bin/true"}}};
  EXPECT_THROW(parse_config(j), ConfigError);
}

TEST(Config, EffectiveConfigRoundTrips) {
  const PipelineConfig c = parse_config(config_json("out/x"));
  const Json eff = c.to_json();
  EXPECT_EQ(eff["lipschitz"]["inflation"], 1.1);
  EXPECT_EQ(eff["validate"]["trials"], 2000);
  const PipelineConfig again = parse_config(eff);
  EXPECT_EQ(again.hash(), c.hash());
  Json j = config_json("out/x");
  j["validate"]["seed"] = 6;
  EXPECT_NE(parse_config(j).hash(), c.hash());
}

TEST(Config, ShippedConfigsParse) {
  for (const char* name : {"pendulum.json", "pendulum_demo.json", "pendulum_identity.json", "unicycle.json"}) {
    EXPECT_NO_THROW(load_config(test::source_path(std::string("configs/") + name))) << name;
  }
}

TEST(Pipeline, DeterministicArtifactsAndResume) {
  test::TempDir dir;
  const fs::path a = dir.path() / "a", b = dir.path() / "b";
  Pipeline pa(parse_config(config_json(a)));
  pa.run();
  Json jb = config_json(b);
  jb["jobs"] = 1;
  Pipeline pb(parse_config(jb));
  pb.run();
  for (const char* f : {"samples.csv", "fit.json", "estimate.json", "gap.json", "sup_gamma.json",
                        "sup_gamma_sweep.csv", "validation.json", "controller_gap.csv",
                        "controller_nogap.csv", "winning_gap.csv", "simulate.json"}) {
    ASSERT_TRUE(fs::exists(a / f)) << f;
    EXPECT_EQ(slurp(a / f), slurp(b / f)) << f;
  }
  for (Stage s : all_stages()) EXPECT_TRUE(pa.completed(s)) << to_string(s);

  // winning set csv: header plus one row per winning cell
  const Json syn = read_json(a / "synth.json");
  EXPECT_EQ(lines(a / "winning_gap.csv"), syn["gap"]["winning"].get<std::size_t>() + 1);
  EXPECT_EQ(lines(a / "winning_nogap.csv"), syn["nogap"]["winning"].get<std::size_t>() + 1);
  // sweep table: header plus one row per dimension, one column per epsilon
  EXPECT_EQ(lines(a / "sup_gamma_sweep.csv"), 3U);
  const std::string report = slurp(a / "report.md");
  EXPECT_NE(report.find(pa.config().hash()), std::string::npos);

  // a synthesis-only change leaves the data stages valid
  Json jc = config_json(a);
  jc["synthesis"]["hold"] = 4;
  Pipeline pc(parse_config(jc));
  EXPECT_TRUE(pc.completed(Stage::collect));
  EXPECT_TRUE(pc.completed(Stage::validate));
  EXPECT_FALSE(pc.completed(Stage::synth));
  EXPECT_FALSE(pc.completed(Stage::report));
  const auto before = fs::last_write_time(a / "samples.csv");
  pc.run();
  EXPECT_EQ(fs::last_write_time(a / "samples.csv"), before);
  EXPECT_TRUE(pc.completed(Stage::report));
  EXPECT_FALSE(pa.completed(Stage::synth));
}

TEST(Pipeline, MissingPrerequisiteIsReported) {
  test::TempDir dir;
  Pipeline p(parse_config(config_json(dir.path() / "x")));
  EXPECT_THROW(p.run_stage(Stage::fit), ConfigError);
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(SIMGAP_CLI) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

TEST(Cli, ExitCodes) {
  test::TempDir dir;
  const fs::path cfg = dir.path() / "c.json";
  write_json(cfg, config_json(dir.path() / "out"));
  EXPECT_EQ(run_cli("explain --config " + cfg.string()), 0);
  EXPECT_EQ(run_cli("cover --config " + cfg.string()), 0);
  EXPECT_EQ(run_cli("cover --config " + cfg.string() + " --budget 10"), 4);
  EXPECT_EQ(run_cli("fit --config " + cfg.string() + " --out " + (dir.path() / "empty").string()), 2);
  EXPECT_EQ(run_cli("frobnicate"), 2);
  EXPECT_EQ(run_cli("cover --config " + (dir.path() / "missing.json").string()), 2);

  Json bad = config_json(dir.path() / "out");
  bad["sampling"]["epsilon"] = -1.0;
  write_json(cfg, bad);
  EXPECT_EQ(run_cli("cover --config " + cfg.string()), 2);

  // an oracle process that dies immediately
  Json ext = config_json(dir.path() / "ext");
  ext["oracle"] = {{"kind", "external"}, {"command", {"/bin/false"}}, {"timeout_ms", 2000}, {"retries", 0}};
  write_json(cfg, ext);
  EXPECT_EQ(run_cli("pipeline --config " + cfg.string()), 3);
}

}  // namespace
}  // namespace simgap
