#include "simgap/synthesis.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <sstream>
#include <thread>

#include "simgap/error.hpp"
#include "simgap/util.hpp"

namespace simgap {

namespace {

std::size_t axis_count(double width, double eta) {
  return static_cast<std::size_t>(std::ceil(width / (2.0 * eta) * (1.0 - 1e-12)));
}

// Runs fn(w) for w in [0, jobs) on separate threads (inline when jobs == 1).
void run_workers(unsigned jobs, const std::function<void(unsigned)>& fn) {
  if (jobs <= 1) {
    fn(0);
    return;
  }
  std::vector<std::exception_ptr> errors(jobs);
  {
    std::vector<std::jthread> pool;
    for (unsigned w = 0; w < jobs; ++w) {
      pool.emplace_back([&, w] {
        try {
          fn(w);
        } catch (...) {
          errors[w] = std::current_exception();
        }
      });
    }
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

}  // namespace

std::size_t projected_grid_size(const StateBox& box, VecView eta) {
  check_dim(eta, box.dim(), "grid: eta");
  double total = 1.0;
  for (std::size_t j = 0; j < box.dim(); ++j) {
    if (!(eta[j] > 0)) throw ConfigError("grid: eta must be positive in every dimension");
    total *= static_cast<double>(std::max<std::size_t>(1, axis_count(box.width(j), eta[j])));
  }
  if (total > 1e18) return std::numeric_limits<std::size_t>::max();
  return static_cast<std::size_t>(total);
}

AbstractGrid::AbstractGrid(StateBox box, Vec eta, std::size_t cell_budget)
    : box_(std::move(box)), eta_(std::move(eta)) {
  const std::size_t projected = projected_grid_size(box_, eta_);
  if (projected > cell_budget) {
    throw ResourceError("grid: " + std::to_string(projected) + " cells exceed the budget of " +
                        std::to_string(cell_budget));
  }
  size_ = 1;
  for (std::size_t j = 0; j < dim(); ++j) {
    counts_.push_back(std::max<std::size_t>(1, axis_count(box_.width(j), eta_[j])));
    size_ *= counts_.back();
  }
}

std::vector<std::size_t> AbstractGrid::multi_index(std::size_t cell) const {
  if (cell >= size_) throw UsageError("grid: cell index out of range");
  std::vector<std::size_t> out(dim());
  for (std::size_t j = 0; j < dim(); ++j) {
    out[j] = cell % counts_[j];
    cell /= counts_[j];
  }
  return out;
}

std::size_t AbstractGrid::index(const std::vector<std::size_t>& multi) const {
  if (multi.size() != dim()) throw UsageError("grid: multi-index has the wrong length");
  std::size_t cell = 0;
  for (std::size_t j = dim(); j-- > 0;) {
    if (multi[j] >= counts_[j]) throw UsageError("grid: multi-index out of range");
    cell = cell * counts_[j] + multi[j];
  }
  return cell;
}

double AbstractGrid::cell_lower(std::size_t j, std::size_t i) const {
  return box_.lower(j) + 2.0 * eta_[j] * static_cast<double>(i);
}

double AbstractGrid::cell_upper(std::size_t j, std::size_t i) const {
  if (i + 1 >= counts_[j]) return box_.upper(j);
  return std::min(box_.upper(j), box_.lower(j) + 2.0 * eta_[j] * static_cast<double>(i + 1));
}

Vec AbstractGrid::lower(std::size_t cell) const {
  const auto mi = multi_index(cell);
  Vec out(dim());
  for (std::size_t j = 0; j < dim(); ++j) out[j] = cell_lower(j, mi[j]);
  return out;
}

Vec AbstractGrid::upper(std::size_t cell) const {
  const auto mi = multi_index(cell);
  Vec out(dim());
  for (std::size_t j = 0; j < dim(); ++j) out[j] = cell_upper(j, mi[j]);
  return out;
}

Vec AbstractGrid::center(std::size_t cell) const {
  const auto mi = multi_index(cell);
  Vec out(dim());
  for (std::size_t j = 0; j < dim(); ++j) {
    out[j] = 0.5 * (cell_lower(j, mi[j]) + cell_upper(j, mi[j]));
  }
  return out;
}

Vec AbstractGrid::half_width(std::size_t cell) const {
  const auto mi = multi_index(cell);
  Vec out(dim());
  for (std::size_t j = 0; j < dim(); ++j) {
    out[j] = 0.5 * (cell_upper(j, mi[j]) - cell_lower(j, mi[j]));
  }
  return out;
}

std::optional<std::size_t> AbstractGrid::locate(VecView x) const {
  check_dim(x, dim(), "grid: state");
  if (!box_.contains(x)) return std::nullopt;
  std::size_t cell = 0;
  for (std::size_t j = dim(); j-- > 0;) {
    auto i = static_cast<std::size_t>(std::floor((x[j] - box_.lower(j)) / (2.0 * eta_[j])));
    i = std::min(i, counts_[j] - 1);
    // the division can be off by one ulp; agree with cell_lower exactly
    while (i > 0 && x[j] < cell_lower(j, i)) --i;
    while (i + 1 < counts_[j] && x[j] >= cell_lower(j, i + 1)) ++i;
    cell = cell * counts_[j] + i;
  }
  return cell;
}

std::pair<std::size_t, std::size_t> AbstractGrid::axis_range(std::size_t j, double lo,
                                                             double hi) const {
  const double w = 2.0 * eta_[j];
  const auto last_index = static_cast<double>(counts_[j] - 1);
  // ceil(.) - 1 keeps a cell whose upper face touches lo
  double first = std::ceil((lo - box_.lower(j)) / w) - 1.0;
  double last = std::floor((hi - box_.lower(j)) / w);
  first = std::clamp(first, 0.0, last_index);
  last = std::clamp(last, 0.0, last_index);
  auto a = static_cast<std::size_t>(first);
  auto b = static_cast<std::size_t>(last);
  // settle rounding against the stored cell faces
  while (a > 0 && cell_upper(j, a - 1) >= lo) --a;
  while (a < b && cell_upper(j, a) < lo) ++a;
  while (b + 1 < counts_[j] && cell_lower(j, b + 1) <= hi) ++b;
  while (b > a && cell_lower(j, b) > hi) --b;
  return {a, b};
}

std::string to_string(SpecKind kind) {
  return kind == SpecKind::invariance ? "invariance" : "reach-avoid";
}

SpecKind parse_spec_kind(const std::string& name) {
  if (name == "invariance") return SpecKind::invariance;
  if (name == "reach-avoid") return SpecKind::reach_avoid;
  throw ConfigError("unknown specification kind '" + name + "' (expected invariance or reach-avoid)");
}

SpecDef SpecDef::invariance(StateBox safe) {
  SpecDef s;
  s.kind = SpecKind::invariance;
  s.safe = std::move(safe);
  return s;
}

SpecDef SpecDef::reach_avoid(StateBox target, std::vector<StateBox> obstacles) {
  SpecDef s;
  s.kind = SpecKind::reach_avoid;
  s.target = std::move(target);
  s.obstacles = std::move(obstacles);
  return s;
}

void SpecDef::check(const StateBox& domain) const {
  auto inside = [&](const StateBox& b, const char* what) {
    if (b.dim() != domain.dim()) {
      throw ConfigError(std::string("spec: ") + what + " box has the wrong dimension");
    }
    if (!domain.contains(b)) {
      throw ConfigError(std::string("spec: ") + what + " box is not contained in the state box");
    }
  };
  if (kind == SpecKind::invariance) {
    if (!safe) throw ConfigError("spec: invariance needs a safe box");
    inside(*safe, "safe");
    return;
  }
  if (!target) throw ConfigError("spec: reach-avoid needs a target box");
  inside(*target, "target");
  for (const auto& o : obstacles) {
    inside(o, "obstacle");
    if (o.intersects(target->lower(), target->upper())) {
      throw ConfigError("spec: target box intersects an obstacle");
    }
  }
}

std::string SpecDef::descriptor() const {
  std::ostringstream os;
  auto box = [&](const StateBox& b) {
    os << '[';
    for (std::size_t j = 0; j < b.dim(); ++j) {
      os << (j ? "," : "") << format_double(b.lower(j)) << ':' << format_double(b.upper(j));
    }
    os << ']';
  };
  os << to_string(kind);
  if (safe) {
    os << ";safe=";
    box(*safe);
  }
  if (target) {
    os << ";target=";
    box(*target);
  }
  for (const auto& o : obstacles) {
    os << ";obstacle=";
    box(o);
  }
  return os.str();
}

std::vector<char> cells_inside(const AbstractGrid& grid, const StateBox& box) {
  std::vector<char> out(grid.size(), 0);
  for (std::size_t c = 0; c < grid.size(); ++c) out[c] = box.contains(grid.lower(c), grid.upper(c));
  return out;
}

std::vector<char> cells_meeting(const AbstractGrid& grid, const StateBox& box) {
  std::vector<char> out(grid.size(), 0);
  for (std::size_t c = 0; c < grid.size(); ++c) {
    out[c] = box.intersects(grid.lower(c), grid.upper(c));
  }
  return out;
}

Abstraction::Abstraction(AbstractGrid grid, NominalModel model, InputGrid inputs,
                         std::optional<GapModel> gap, unsigned hold)
    : grid_(std::move(grid)),
      model_(std::move(model)),
      inputs_(std::move(inputs)),
      gap_(std::move(gap)),
      hold_(hold) {
  if (hold_ < 1) throw ConfigError("synthesis: hold must be at least 1");
  if (grid_.dim() != model_.n() || inputs_.dim() != model_.m()) {
    throw ConfigError("synthesis: grid/input dimensions do not match the model");
  }
  k_ = jacobian_bound(model_, grid_.box(), inputs_);
  l2_.assign(model_.n(), 0.0);
  if (gap_) {
    if (gap_->n() != model_.n()) throw ConfigError("synthesis: gap dimension does not match the model");
    if (!gap_->domain().contains(grid_.box())) {
      throw ConfigError("synthesis: the gap's domain does not cover the state box");
    }
    for (std::size_t i = 0; i < model_.n(); ++i) l2_[i] = gap_->component(i).l2.value;
  }
}

Interval Abstraction::step_box(VecView lo, VecView hi, std::size_t u) const {
  const std::size_t n = model_.n();
  Vec c(n), h(n);
  double hnorm = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    c[j] = 0.5 * (lo[j] + hi[j]);
    h[j] = 0.5 * (hi[j] - lo[j]);
    hnorm += h[j] * h[j];
  }
  hnorm = std::sqrt(hnorm);
  const Vec& uv = inputs_[u];
  const Vec fc = model_.step(c, uv);
  Vec g(n, 0.0);
  if (gap_) g = gap_->eval(c, uv);
  Interval out{Vec(n), Vec(n)};
  constexpr double inf = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < n; ++i) {
    double r = 0.0;
    for (std::size_t j = 0; j < n; ++j) r += k_(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) * h[j];
    if (gap_) r += std::max(0.0, g[i] + l2_[i] * hnorm);
    out.lo[i] = std::nextafter(fc[i] - r, -inf);
    out.hi[i] = std::nextafter(fc[i] + r, inf);
  }
  return out;
}

std::vector<Interval> Abstraction::images(std::size_t cell, std::size_t u) const {
  std::vector<Interval> out;
  out.reserve(hold_);
  Vec lo = grid_.lower(cell);
  Vec hi = grid_.upper(cell);
  for (unsigned k = 0; k < hold_; ++k) {
    out.push_back(step_box(lo, hi, u));
    if (!out.back().inside(grid_.box())) break;
    lo = out.back().lo;
    hi = out.back().hi;
  }
  return out;
}

Interval post_interval(const Abstraction& abstraction, std::size_t cell, std::size_t u) {
  return abstraction.step_box(abstraction.grid().lower(cell), abstraction.grid().upper(cell), u);
}

namespace {

// Calls fn(cell) for every grid cell meeting the interval until fn returns false.
bool all_cells(const AbstractGrid& grid, const Interval& box,
               const std::function<bool(std::size_t)>& fn) {
  const std::size_t n = grid.dim();
  std::vector<std::size_t> first(n), last(n), cur(n);
  for (std::size_t j = 0; j < n; ++j) {
    std::tie(first[j], last[j]) = grid.axis_range(j, box.lo[j], box.hi[j]);
    cur[j] = first[j];
  }
  while (true) {
    if (!fn(grid.index(cur))) return false;
    std::size_t j = 0;
    while (j < n && cur[j] == last[j]) {
      cur[j] = first[j];
      ++j;
    }
    if (j == n) return true;
    ++cur[j];
  }
}

bool portion_inside(const AbstractGrid& grid, std::size_t cell, const Interval& box,
                    const StateBox& target) {
  const Vec lo = grid.lower(cell);
  const Vec hi = grid.upper(cell);
  Vec a(lo.size()), b(lo.size());
  for (std::size_t j = 0; j < lo.size(); ++j) {
    a[j] = std::max(lo[j], box.lo[j]);
    b[j] = std::min(hi[j], box.hi[j]);
  }
  return target.contains(a, b);
}

std::string spec_hash(const SpecDef& spec) { return hash_hex(spec.descriptor()); }

ControllerTable empty_table(const Abstraction& abs, const SpecDef& spec) {
  ControllerTable t;
  t.kind = spec.kind;
  t.cell_count = abs.grid().size();
  t.policy.assign(t.cell_count, ControllerTable::kNone);
  t.rank.assign(t.cell_count, ControllerTable::kNone);
  t.hold = abs.hold();
  t.spec_hash = spec_hash(spec);
  return t;
}

// Invariance condition for one edge against the winning indicator `w`.
bool invariance_edge(const Abstraction& abs, const StateBox& safe, const std::vector<char>& w,
                     std::size_t cell, std::size_t u) {
  const auto imgs = abs.images(cell, u);
  if (imgs.size() != abs.hold()) return false;
  for (std::size_t k = 0; k + 1 < imgs.size(); ++k) {
    if (!imgs[k].inside(safe)) return false;
  }
  const Interval& last = imgs.back();
  if (!last.inside(abs.grid().box())) return false;
  return all_cells(abs.grid(), last, [&](std::size_t d) { return w[d] != 0; });
}

}  // namespace

ControllerTable solve_invariance(const Abstraction& abs, const SpecDef& spec,
                                 const SynthesisOptions& options) {
  if (spec.kind != SpecKind::invariance) throw ConfigError("solve_invariance: spec is not invariance");
  spec.check(abs.grid().box());
  const AbstractGrid& grid = abs.grid();
  const std::size_t cells = grid.size();
  const std::size_t inputs = abs.inputs().size();
  ControllerTable table = empty_table(abs, spec);

  std::vector<char> w = cells_inside(grid, *spec.safe);
  // inputs that failed against W_k also fail against every later (smaller) W
  std::vector<std::size_t> start(cells, 0);
  const unsigned jobs = std::max(1U, options.jobs);
  while (true) {
    ++table.iterations;
    std::vector<char> next(cells, 0);
    run_workers(jobs, [&](unsigned wk) {
      for (std::size_t c = wk; c < cells; c += jobs) {
        if (!w[c]) continue;
        for (std::size_t u = start[c]; u < inputs; ++u) {
          if (invariance_edge(abs, *spec.safe, w, c, u)) {
            next[c] = 1;
            start[c] = u;
            break;
          }
        }
        if (!next[c]) start[c] = inputs;
      }
    });
    const bool changed = next != w;
    w.swap(next);
    if (!changed) break;
  }
  for (std::size_t c = 0; c < cells; ++c) {
    if (!w[c]) continue;
    table.winning.push_back(c);
    table.policy[c] = static_cast<std::int32_t>(start[c]);
    table.rank[c] = 0;
  }
  return table;
}

ControllerTable solve_reach_avoid(const Abstraction& abs, const SpecDef& spec,
                                  const SynthesisOptions& options) {
  if (spec.kind != SpecKind::reach_avoid) throw ConfigError("solve_reach_avoid: spec is not reach-avoid");
  spec.check(abs.grid().box());
  const AbstractGrid& grid = abs.grid();
  const std::size_t cells = grid.size();
  const std::size_t inputs = abs.inputs().size();
  ControllerTable table = empty_table(abs, spec);

  const std::vector<char> target = cells_inside(grid, *spec.target);
  std::vector<char> obstacle(cells, 0);
  for (const auto& o : spec.obstacles) {
    const auto meet = cells_meeting(grid, o);
    for (std::size_t c = 0; c < cells; ++c) obstacle[c] |= meet[c];
  }

  // Memoized edges: for each (cell, u) the cells its final image still depends
  // on; pending[c * M + u] < 0 marks an edge that can never certify.
  std::vector<std::int32_t> pending(cells * inputs, -1);
  std::vector<std::vector<std::uint32_t>> deps(cells);
  std::vector<std::vector<std::uint32_t>> dep_offsets(cells);
  const unsigned jobs = std::max(1U, options.jobs);
  run_workers(jobs, [&](unsigned wk) {
    for (std::size_t c = wk; c < cells; c += jobs) {
      if (target[c] || obstacle[c]) continue;
      auto& list = deps[c];
      auto& offs = dep_offsets[c];
      offs.assign(inputs + 1, 0);
      for (std::size_t u = 0; u < inputs; ++u) {
        offs[u] = static_cast<std::uint32_t>(list.size());
        const auto imgs = abs.images(c, u);
        if (imgs.size() != abs.hold() || !imgs.back().inside(grid.box())) continue;
        bool ok = true;
        for (std::size_t k = 0; ok && k + 1 < imgs.size(); ++k) {
          ok = all_cells(grid, imgs[k], [&](std::size_t d) { return !obstacle[d]; });
        }
        if (!ok) continue;
        const std::size_t mark = list.size();
        ok = all_cells(grid, imgs.back(), [&](std::size_t d) {
          if (obstacle[d]) return false;
          if (target[d] || portion_inside(grid, d, imgs.back(), *spec.target)) return true;
          if (d == c) return false;  // self-loops never certify progress
          list.push_back(static_cast<std::uint32_t>(d));
          return true;
        });
        if (!ok) {
          list.resize(mark);
          continue;
        }
        pending[c * inputs + u] = static_cast<std::int32_t>(list.size() - mark);
      }
      offs[inputs] = static_cast<std::uint32_t>(list.size());
    }
  });

  // reverse relation: cell d -> edges waiting on d
  std::vector<std::size_t> rev_start(cells + 1, 0);
  for (std::size_t c = 0; c < cells; ++c) {
    for (std::size_t u = 0; u < inputs && !deps[c].empty(); ++u) {
      if (pending[c * inputs + u] < 0) continue;
      for (std::uint32_t k = dep_offsets[c][u]; k < dep_offsets[c][u + 1]; ++k) {
        ++rev_start[deps[c][k] + 1];
      }
    }
  }
  for (std::size_t d = 0; d < cells; ++d) rev_start[d + 1] += rev_start[d];
  std::vector<std::size_t> rev(rev_start[cells]);
  {
    std::vector<std::size_t> fill(rev_start.begin(), rev_start.end() - 1);
    for (std::size_t c = 0; c < cells; ++c) {
      for (std::size_t u = 0; u < inputs && !deps[c].empty(); ++u) {
        if (pending[c * inputs + u] < 0) continue;
        for (std::uint32_t k = dep_offsets[c][u]; k < dep_offsets[c][u + 1]; ++k) {
          rev[fill[deps[c][k]]++] = c * inputs + u;
        }
      }
    }
  }
  deps.clear();
  dep_offsets.clear();

  std::vector<std::size_t> layer;
  for (std::size_t c = 0; c < cells; ++c) {
    if (target[c]) table.rank[c] = 0;
  }
  // candidates for the next layer: cells with an edge whose count reached zero
  std::vector<std::size_t> candidates;
  for (std::size_t c = 0; c < cells; ++c) {
    if (table.rank[c] != ControllerTable::kNone) continue;
    for (std::size_t u = 0; u < inputs; ++u) {
      if (pending[c * inputs + u] == 0) {
        candidates.push_back(c);
        break;
      }
    }
  }
  std::int32_t k = 0;
  table.iterations = 1;
  while (!candidates.empty()) {
    ++k;
    ++table.iterations;
    std::sort(candidates.begin(), candidates.end());
    candidates.erase(std::unique(candidates.begin(), candidates.end()), candidates.end());
    layer.clear();
    for (std::size_t c : candidates) {
      if (table.rank[c] != ControllerTable::kNone) continue;
      for (std::size_t u = 0; u < inputs; ++u) {
        if (pending[c * inputs + u] == 0) {
          table.policy[c] = static_cast<std::int32_t>(u);
          table.rank[c] = k;
          layer.push_back(c);
          break;
        }
      }
    }
    candidates.clear();
    for (std::size_t d : layer) {
      for (std::size_t e = rev_start[d]; e < rev_start[d + 1]; ++e) {
        const std::size_t edge = rev[e];
        if (--pending[edge] == 0 && table.rank[edge / inputs] == ControllerTable::kNone) {
          candidates.push_back(edge / inputs);
        }
      }
    }
  }
  for (std::size_t c = 0; c < cells; ++c) {
    if (table.rank[c] != ControllerTable::kNone) table.winning.push_back(c);
  }
  return table;
}

ControllerTable synthesize(const Abstraction& abs, const SpecDef& spec,
                           const SynthesisOptions& options) {
  return spec.kind == SpecKind::invariance ? solve_invariance(abs, spec, options)
                                           : solve_reach_avoid(abs, spec, options);
}

std::vector<std::size_t> closure_violations(const Abstraction& abs, const SpecDef& spec,
                                            const ControllerTable& table) {
  const AbstractGrid& grid = abs.grid();
  std::vector<std::size_t> bad;
  if (table.cell_count != grid.size() || table.policy.size() != grid.size()) {
    throw UsageError("closure check: controller does not match the grid");
  }
  if (spec.kind == SpecKind::invariance) {
    std::vector<char> w(grid.size(), 0);
    for (std::size_t c : table.winning) w[c] = 1;
    for (std::size_t c : table.winning) {
      const auto u = table.policy[c];
      if (u < 0 || !invariance_edge(abs, *spec.safe, w, c, static_cast<std::size_t>(u))) {
        bad.push_back(c);
      }
    }
    return bad;
  }
  std::vector<char> obstacle(grid.size(), 0);
  for (const auto& o : spec.obstacles) {
    const auto meet = cells_meeting(grid, o);
    for (std::size_t c = 0; c < grid.size(); ++c) obstacle[c] |= meet[c];
  }
  for (std::size_t c : table.winning) {
    const std::int32_t r = table.rank[c];
    if (obstacle[c]) {
      bad.push_back(c);
      continue;
    }
    if (r == 0) {
      if (!spec.target->contains(grid.lower(c), grid.upper(c))) bad.push_back(c);
      continue;
    }
    const auto u = table.policy[c];
    if (u < 0) {
      bad.push_back(c);
      continue;
    }
    const auto imgs = abs.images(c, static_cast<std::size_t>(u));
    bool ok = imgs.size() == abs.hold() && imgs.back().inside(grid.box());
    for (std::size_t k = 0; ok && k + 1 < imgs.size(); ++k) {
      ok = all_cells(grid, imgs[k], [&](std::size_t d) { return !obstacle[d]; });
    }
    if (ok) {
      ok = all_cells(grid, imgs.back(), [&](std::size_t d) {
        if (obstacle[d]) return false;
        if (table.rank[d] != ControllerTable::kNone && table.rank[d] < r) return true;
        return portion_inside(grid, d, imgs.back(), *spec.target);
      });
    }
    if (!ok) bad.push_back(c);
  }
  return bad;
}

}  // namespace simgap
