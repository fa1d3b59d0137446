#include "simgap/runtime.hpp"

#include <sstream>

#include "simgap/error.hpp"
#include "simgap/util.hpp"

namespace simgap {

std::string to_string(Verdict v) {
  switch (v) {
    case Verdict::satisfied: return "satisfied";
    case Verdict::violated: return "violated";
    case Verdict::left_domain: return "left-domain";
  }
  return "unknown";
}

namespace {

bool in_any(const std::vector<StateBox>& boxes, VecView x) {
  for (const auto& b : boxes) {
    if (b.contains(x)) return true;
  }
  return false;
}

void wrap(Vec& x, const std::vector<std::size_t>& angle_dims) {
  for (std::size_t j : angle_dims) x[j] = wrap_angle(x[j]);
}

}  // namespace

Trajectory run_closed_loop(const ControllerTable& table, const Abstraction& abs,
                           const SpecDef& spec, Oracle& oracle, VecView x0,
                           const ClosedLoopOptions& options) {
  const AbstractGrid& grid = abs.grid();
  const StateBox& domain = grid.box();
  check_dim(x0, grid.dim(), "closed loop: initial state");
  if (table.cell_count != grid.size()) throw UsageError("closed loop: controller does not match the grid");
  std::vector<char> obstacle(grid.size(), 0);
  for (const auto& o : spec.obstacles) {
    const auto meet = cells_meeting(grid, o);
    for (std::size_t c = 0; c < grid.size(); ++c) obstacle[c] |= meet[c];
  }
  const auto angle_dims = abs.model().angle_dims();
  const unsigned hold = std::max(1U, table.hold);

  Trajectory t;
  Vec x(x0.begin(), x0.end());
  std::optional<std::size_t> current;
  auto record_state = [&](std::size_t k) {
    t.states.push_back(x);
    const auto cell = grid.locate(x);
    t.cells.push_back(cell ? static_cast<std::int64_t>(*cell) : -1);
    // after the target is reached nothing else counts
    if (t.reached_step) return domain.contains(x);
    if (cell && obstacle[*cell] && !t.obstacle_cell_step) t.obstacle_cell_step = k;
    if (!domain.contains(x)) {
      t.verdict = Verdict::left_domain;
      t.reason = "state left the domain";
      t.violation_step = k;
      return false;
    }
    if (spec.kind == SpecKind::invariance) {
      if (!spec.safe->contains(x) && !t.violation_step) {
        t.verdict = Verdict::violated;
        t.reason = "left the safe box";
        t.violation_step = k;
      }
      return true;
    }
    if (in_any(spec.obstacles, x) && !t.violation_step) {
      t.verdict = Verdict::violated;
      t.reason = "entered an obstacle";
      t.violation_step = k;
    }
    if (spec.target->contains(x) && !t.reached_step) {
      t.reached_step = k;
      if (options.stop_at_target) return false;
    }
    return true;
  };

  const auto first = grid.locate(x);
  t.outside_winning_set = !first || !table.wins(*first);
  bool running = record_state(0);
  for (std::size_t k = 0; running && k < options.steps; ++k) {
    if (k % hold == 0) {
      const auto cell = grid.locate(x);
      const std::int32_t u = cell ? table.policy[*cell] : ControllerTable::kNone;
      if (u >= 0) {
        current = static_cast<std::size_t>(u);
      } else {
        ++t.unmanaged_steps;
        if (!current) current = 0;
      }
    }
    x = oracle.query(x, abs.inputs()[*current]);
    wrap(x, angle_dims);
    t.inputs.push_back(*current);
    running = record_state(k + 1);
  }
  if (spec.kind == SpecKind::reach_avoid && t.verdict == Verdict::satisfied && !t.reached_step) {
    t.verdict = Verdict::violated;
    t.reason = "target not reached within " + std::to_string(options.steps) + " steps";
  }
  return t;
}

VerdictCheck check_verdict(const std::vector<Vec>& states, const SpecDef& spec,
                           const StateBox& domain) {
  VerdictCheck out;
  for (std::size_t k = 0; k < states.size(); ++k) {
    const Vec& x = states[k];
    if (!domain.contains(x)) {
      out.verdict = Verdict::left_domain;
      out.violation_step = k;
      return out;
    }
    if (spec.kind == SpecKind::invariance) {
      if (!spec.safe->contains(x)) {
        // a later exit from the domain still reports left-domain
        for (std::size_t r = k + 1; r < states.size(); ++r) {
          if (!domain.contains(states[r])) {
            out.verdict = Verdict::left_domain;
            out.violation_step = r;
            return out;
          }
        }
        out.verdict = Verdict::violated;
        out.violation_step = k;
        return out;
      }
      continue;
    }
    if (spec.target->contains(x)) return out;
    for (const auto& o : spec.obstacles) {
      if (o.contains(x)) {
        out.verdict = Verdict::violated;
        out.violation_step = k;
        for (std::size_t r = k + 1; r < states.size(); ++r) {
          if (!domain.contains(states[r])) {
            out.verdict = Verdict::left_domain;
            out.violation_step = r;
            return out;
          }
        }
        return out;
      }
    }
  }
  if (spec.kind == SpecKind::reach_avoid) out.verdict = Verdict::violated;
  return out;
}

std::vector<Vec> replay(const Trajectory& trajectory, Oracle& oracle, const InputGrid& inputs,
                        const std::vector<std::size_t>& angle_dims) {
  std::vector<Vec> out;
  if (trajectory.states.empty()) return out;
  Vec x = trajectory.states.front();
  out.push_back(x);
  for (std::size_t u : trajectory.inputs) {
    x = oracle.query(x, inputs[u]);
    wrap(x, angle_dims);
    out.push_back(x);
  }
  return out;
}

void write_trajectory_csv(const std::filesystem::path& path, const Trajectory& t,
                          const InputGrid& inputs) {
  std::ostringstream os;
  const std::size_t n = t.states.empty() ? 0 : t.states.front().size();
  const std::size_t m = inputs.dim();
  os << 'k';
  for (std::size_t j = 0; j < n; ++j) os << ",x_" << j + 1;
  os << ",cell,u_index";
  for (std::size_t j = 0; j < m; ++j) os << ",u_" << j + 1;
  os << '\n';
  for (std::size_t k = 0; k < t.states.size(); ++k) {
    os << k;
    for (double v : t.states[k]) os << ',' << format_double(v);
    os << ',' << t.cells[k];
    if (k < t.inputs.size()) {
      os << ',' << t.inputs[k];
      for (double v : inputs[t.inputs[k]]) os << ',' << format_double(v);
    } else {
      os << ',';
      for (std::size_t j = 0; j < m; ++j) os << ',';
    }
    os << '\n';
  }
  write_text(path, os.str());
}

}  // namespace simgap
