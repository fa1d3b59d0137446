#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "simgap/oracle.hpp"
#include "simgap/synthesis.hpp"

namespace simgap {

enum class Verdict { satisfied, violated, left_domain };

std::string to_string(Verdict v);

/// States x(0..K') and the inputs applied between them (inputs.size() == states.size() - 1).
struct Trajectory {
  std::vector<Vec> states;
  std::vector<std::size_t> inputs;
  std::vector<std::int64_t> cells;
  Verdict verdict = Verdict::satisfied;
  std::string reason;
  std::optional<std::size_t> violation_step;
  /// Warning: x(0) was not in the winning set.
  bool outside_winning_set = false;
  /// Decision points whose cell had no policy entry (the previous input was held).
  std::size_t unmanaged_steps = 0;
  /// First step whose state lies in a cell meeting an obstacle.
  std::optional<std::size_t> obstacle_cell_step;
  /// Reach-avoid: first step in the target box.
  std::optional<std::size_t> reached_step;
};

struct ClosedLoopOptions {
  std::size_t steps = 500;
  /// Stop as soon as a reach-avoid run enters the target.
  bool stop_at_target = true;
};

/// Runs the controller against the oracle from x0. Inputs are chosen from the
/// current cell every `table.hold` steps and held in between; angle coordinates
/// of the model are wrapped to [-pi, pi) after each step.
Trajectory run_closed_loop(const ControllerTable& table, const Abstraction& abstraction,
                           const SpecDef& spec, Oracle& oracle, VecView x0,
                           const ClosedLoopOptions& options = {});

struct VerdictCheck {
  Verdict verdict = Verdict::satisfied;
  std::optional<std::size_t> violation_step;
};

/// Re-derives the verdict from the raw states alone.
VerdictCheck check_verdict(const std::vector<Vec>& states, const SpecDef& spec,
                           const StateBox& domain);

/// Replays the logged inputs through the oracle from the logged x(0).
std::vector<Vec> replay(const Trajectory& trajectory, Oracle& oracle, const InputGrid& inputs,
                        const std::vector<std::size_t>& angle_dims);

/// k,x_1..x_n,cell,u_index,u_1..u_m (the last row has no input).
void write_trajectory_csv(const std::filesystem::path& path, const Trajectory& trajectory,
                          const InputGrid& inputs);

}  // namespace simgap
