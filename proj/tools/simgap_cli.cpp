// simgap command-line tool: one subcommand per pipeline stage plus `pipeline`
// and `explain`.
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "simgap/config.hpp"
#include "simgap/error.hpp"
#include "simgap/pipeline.hpp"
#include "simgap/util.hpp"

namespace {

struct Common {
  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> budget;
  std::optional<unsigned> jobs;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--config", c.config, "Pipeline configuration (JSON)")->required()->check(CLI::ExistingFile);
  cmd->add_option("--out", c.out, "Output directory (overrides output.dir)");
  cmd->add_option("--seed", c.seed, "Seed for Lipschitz sampling and validation");
  cmd->add_option("--budget", c.budget, "Maximum number of records N*M for data collection");
  cmd->add_option("--jobs", c.jobs, "Worker threads")->check(CLI::PositiveNumber);
}

simgap::PipelineConfig load(const Common& c) {
  simgap::PipelineConfig cfg = simgap::load_config(c.config);
  if (!c.out.empty()) cfg.out_dir = c.out;
  if (c.seed) {
    cfg.seed = *c.seed;
    cfg.validate_seed = *c.seed;
  }
  if (c.budget) cfg.record_budget = *c.budget;
  if (c.jobs) cfg.jobs = *c.jobs;
  cfg.validate();
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Simulation-gap quantification and gap-aware symbolic controller synthesis"};
  app.require_subcommand(1);
  Common common;
  std::string stage;

  struct StageCmd {
    const char* name;
    const char* help;
    simgap::Stage stage;
  };
  const StageCmd stage_cmds[] = {
      {"cover", "Build the epsilon-cover of the state box", simgap::Stage::cover},
      {"collect", "Collect paired nominal/oracle data on the cover", simgap::Stage::collect},
      {"fit", "Solve the per-dimension scenario programs", simgap::Stage::fit},
      {"lipschitz", "Compute the L1/L2 Lipschitz constants", simgap::Stage::lipschitz},
      {"gamma", "Assemble the gap function and its supremum (and the epsilon sweep)", simgap::Stage::gamma},
      {"validate", "Check the gap bound at fresh off-grid points", simgap::Stage::validate},
      {"synth", "Synthesize controllers with and without the gap", simgap::Stage::synth},
      {"simulate", "Run the controllers in closed loop against the oracle", simgap::Stage::simulate},
      {"report", "Write the markdown summary", simgap::Stage::report},
  };
  std::optional<simgap::Stage> chosen;
  for (const auto& sc : stage_cmds) {
    auto* cmd = app.add_subcommand(sc.name, sc.help);
    add_common(cmd, common);
    cmd->callback([&chosen, s = sc.stage] { chosen = s; });
  }
  auto* pipeline = app.add_subcommand("pipeline", "Run all stages, skipping those already up to date");
  add_common(pipeline, common);
  pipeline->add_option("--stage", stage, "Re-run from this stage onward");
  auto* explain = app.add_subcommand("explain", "Print the effective configuration");
  add_common(explain, common);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : static_cast<int>(simgap::ExitCode::config);
  }

  try {
    const simgap::PipelineConfig cfg = load(common);
    if (explain->parsed()) {
      std::cout << cfg.to_json().dump(2) << "\n";
      std::cout << "# config hash " << cfg.hash() << "\n";
      return 0;
    }
    simgap::Pipeline p(cfg);
    if (pipeline->parsed()) {
      std::optional<simgap::Stage> from;
      if (!stage.empty()) from = simgap::parse_stage(stage);
      p.run(from);
      std::cout << "report: " << p.path("report.md").string() << "\n";
      return 0;
    }
    p.run_stage(*chosen);
    if (*chosen == simgap::Stage::report) std::cout << p.path("report.md").string() << "\n";
    return 0;
  } catch (const simgap::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return static_cast<int>(e.exit_code());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return static_cast<int>(simgap::ExitCode::failure);
  }
}
