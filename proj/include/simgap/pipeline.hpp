#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "simgap/config.hpp"
#include "simgap/gap.hpp"
#include "simgap/runtime.hpp"
#include "simgap/sampling.hpp"
#include "simgap/synthesis.hpp"

namespace simgap {

enum class Stage { cover, collect, fit, lipschitz, gamma, validate, synth, simulate, report };

const std::vector<Stage>& all_stages();
std::string to_string(Stage stage);
Stage parse_stage(const std::string& name);

/// Runs the stages against artifacts in the output directory. Every stage
/// reads its inputs from disk, so stages can run in separate invocations.
/// A manifest records which stages completed under which config hash; `run`
/// skips those and re-runs everything after the first stage that is missing,
/// stale, or explicitly requested.
class Pipeline {
 public:
  explicit Pipeline(PipelineConfig config);

  const PipelineConfig& config() const { return config_; }
  const std::filesystem::path& dir() const { return config_.out_dir; }

  void run(std::optional<Stage> from = std::nullopt);
  void run_stage(Stage stage);
  bool completed(Stage stage) const;

  std::filesystem::path path(const std::string& name) const { return dir() / name; }
  std::filesystem::path samples_csv() const { return path("samples.csv"); }

  // Loaders for downstream stages and tests.
  Cover load_cover() const;
  std::vector<ScpSolution> load_solutions() const;
  GapModel load_gap() const;
  Abstraction abstraction(bool with_gap) const;
  ControllerTable load_controller(bool with_gap) const;

 private:
  void stage_cover();
  void stage_collect();
  void stage_fit();
  void stage_lipschitz();
  void stage_gamma();
  void stage_validate();
  void stage_synth();
  void stage_simulate();
  void stage_report();
  void mark_done(Stage stage);
  void require(Stage stage) const;

  PipelineConfig config_;
};

/// Sub-directory used for one epsilon of the sweep.
std::string sweep_label(double epsilon);

}  // namespace simgap
