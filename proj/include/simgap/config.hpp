#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "simgap/io.hpp"
#include "simgap/model.hpp"
#include "simgap/oracle.hpp"
#include "simgap/scp.hpp"
#include "simgap/synthesis.hpp"

namespace simgap {

enum class L1Mode { estimate, analytic, fixed };

struct PipelineConfig {
  std::string name = "run";

  // model
  ModelKind model_kind = ModelKind::pendulum;
  double tau = 0.005;
  std::map<std::string, double> model_params;
  std::vector<Vec> affine_a;
  std::vector<Vec> affine_b;
  Vec state_lower;
  Vec state_upper;
  Json inputs;  // {"points": ...} or {"lower","upper","step"}

  // oracle
  std::string oracle_kind = "surrogate";  // surrogate | external
  SurrogateSpec surrogate;
  ExternalSpec external;

  // sampling
  double epsilon = 0.01;
  std::size_t record_budget = 50'000'000;
  std::size_t checkpoint_every = 10'000;
  std::vector<double> sweep;

  // scp
  std::vector<std::vector<std::string>> basis;  // per dimension, term names
  double scp_tol = 1e-9;

  // lipschitz
  L1Mode l1_mode = L1Mode::estimate;
  std::size_t pairs = 10'000;
  std::optional<double> pair_radius;  // default 2 * epsilon
  double inflation = 1.1;
  std::uint64_t seed = 1;
  std::size_t block_size = 100;
  Vec l1_fixed;

  // validate
  std::size_t validate_trials = 100'000;
  std::uint64_t validate_seed = 7;

  // synthesis
  Vec eta_grid;
  unsigned hold = 1;
  std::size_t cell_budget = 5'000'000;
  SpecKind spec_kind = SpecKind::invariance;
  std::optional<Vec> safe_lower, safe_upper;
  std::optional<Vec> target_lower, target_upper;
  std::vector<std::pair<Vec, Vec>> obstacles;

  // simulate
  std::size_t steps = 500;
  std::vector<Vec> initial_states;
  /// Demonstration initial states (pinned artifact choices).
  std::vector<Vec> demo_states;
  /// Also simulate from every winning cell center of the gap-aware controller.
  bool all_winning_cells = false;

  std::filesystem::path out_dir = "out";
  unsigned jobs = 1;

  NominalModel model() const;
  StateBox state_box() const;
  InputGrid input_grid() const;
  std::unique_ptr<Oracle> oracle() const;
  BasisSpec basis_for(std::size_t dim) const;
  SpecDef spec() const;
  double pair_radius_or_default() const { return pair_radius.value_or(2.0 * epsilon); }

  /// Cross-field checks; throws ConfigError.
  void validate() const;
  /// The effective configuration with every default filled in.
  Json to_json() const;
  std::string hash() const;
};

/// Parses and validates; unknown keys are rejected.
PipelineConfig parse_config(const Json& j);
PipelineConfig load_config(const std::filesystem::path& path);

std::string to_string(L1Mode mode);

}  // namespace simgap
