#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "simgap/gap.hpp"
#include "simgap/model.hpp"

namespace simgap {

/// Uniform partition of a state box into cells of half-width eta (the last cell
/// along an axis may be shrunk). Cell indices enumerate dimension 0 fastest.
class AbstractGrid {
 public:
  AbstractGrid(StateBox box, Vec eta, std::size_t cell_budget = 5'000'000);

  const StateBox& box() const { return box_; }
  const Vec& eta() const { return eta_; }
  std::size_t dim() const { return box_.dim(); }
  const std::vector<std::size_t>& counts() const { return counts_; }
  std::size_t size() const { return size_; }

  std::vector<std::size_t> multi_index(std::size_t cell) const;
  std::size_t index(const std::vector<std::size_t>& multi) const;
  double cell_lower(std::size_t j, std::size_t i) const;
  double cell_upper(std::size_t j, std::size_t i) const;
  Vec lower(std::size_t cell) const;
  Vec upper(std::size_t cell) const;
  Vec center(std::size_t cell) const;
  Vec half_width(std::size_t cell) const;
  /// Cell containing x; points on a shared face go to the upper cell.
  std::optional<std::size_t> locate(VecView x) const;
  /// Range [first, last] of axis-j cells meeting the closed interval [lo, hi],
  /// clipped to the grid.
  std::pair<std::size_t, std::size_t> axis_range(std::size_t j, double lo, double hi) const;

 private:
  StateBox box_;
  Vec eta_;
  std::vector<std::size_t> counts_;
  std::size_t size_;
};

std::size_t projected_grid_size(const StateBox& box, VecView eta);

struct Interval {
  Vec lo;
  Vec hi;
  bool inside(const StateBox& box) const { return box.contains(lo, hi); }
};

enum class SpecKind { invariance, reach_avoid };

std::string to_string(SpecKind kind);
SpecKind parse_spec_kind(const std::string& name);

struct SpecDef {
  SpecKind kind = SpecKind::invariance;
  std::optional<StateBox> safe;
  std::optional<StateBox> target;
  std::vector<StateBox> obstacles;

  static SpecDef invariance(StateBox safe);
  static SpecDef reach_avoid(StateBox target, std::vector<StateBox> obstacles);

  /// ConfigError unless the boxes lie in `domain` and the target misses every obstacle.
  void check(const StateBox& domain) const;
  std::string descriptor() const;
};

struct SynthesisOptions {
  unsigned jobs = 1;
};

/// Successor over-approximation of the disturbance-inflated model
///   x+ in f(x,u) + [-gamma(x,u), gamma(x,u)]
/// on boxes: f(c,u) +- (K h + gamma(c,u) + L2 |h|), with K the global Jacobian
/// bound. Without a gap the inflation term is zero.
class Abstraction {
 public:
  Abstraction(AbstractGrid grid, NominalModel model, InputGrid inputs,
              std::optional<GapModel> gap, unsigned hold = 1);

  const AbstractGrid& grid() const { return grid_; }
  const NominalModel& model() const { return model_; }
  const InputGrid& inputs() const { return inputs_; }
  const std::optional<GapModel>& gap() const { return gap_; }
  const Eigen::MatrixXd& jacobian() const { return k_; }
  /// Steps each input is held for; one abstract transition covers `hold` steps.
  unsigned hold() const { return hold_; }

  /// One-step image of the box [lo, hi] under input u.
  Interval step_box(VecView lo, VecView hi, std::size_t u) const;
  /// The `hold` successive images of a cell; stops early (returning fewer
  /// boxes) once an image leaves the state box.
  std::vector<Interval> images(std::size_t cell, std::size_t u) const;

 private:
  AbstractGrid grid_;
  NominalModel model_;
  InputGrid inputs_;
  std::optional<GapModel> gap_;
  Eigen::MatrixXd k_;
  Vec l2_;
  unsigned hold_;
};

/// Single-step successor interval of a cell (hold = 1).
Interval post_interval(const Abstraction& abstraction, std::size_t cell, std::size_t u);

struct ControllerTable {
  static constexpr std::int32_t kNone = -1;

  SpecKind kind = SpecKind::invariance;
  std::size_t cell_count = 0;
  /// Sorted winning cells.
  std::vector<std::size_t> winning;
  /// Per cell: input index, or kNone (losing cells and reach-avoid target cells).
  std::vector<std::int32_t> policy;
  /// Per cell: fixed-point iteration at which the cell was certified
  /// (reach-avoid: distance to target in transitions); kNone when losing.
  std::vector<std::int32_t> rank;
  std::size_t iterations = 0;
  unsigned hold = 1;
  std::string spec_hash;

  bool wins(std::size_t cell) const { return rank[cell] != kNone; }
};

ControllerTable solve_invariance(const Abstraction& abstraction, const SpecDef& spec,
                                 const SynthesisOptions& options = {});
ControllerTable solve_reach_avoid(const Abstraction& abstraction, const SpecDef& spec,
                                  const SynthesisOptions& options = {});
ControllerTable synthesize(const Abstraction& abstraction, const SpecDef& spec,
                           const SynthesisOptions& options = {});

/// Independently recomputes every policy edge and returns the cells whose
/// images break the specification's fixed-point condition.
std::vector<std::size_t> closure_violations(const Abstraction& abstraction, const SpecDef& spec,
                                            const ControllerTable& table);

/// Cells fully inside the box.
std::vector<char> cells_inside(const AbstractGrid& grid, const StateBox& box);
/// Cells meeting the closed box.
std::vector<char> cells_meeting(const AbstractGrid& grid, const StateBox& box);

}  // namespace simgap
