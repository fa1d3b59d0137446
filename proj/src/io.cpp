#include "simgap/io.hpp"

#include <fstream>
#include <sstream>

#include "simgap/error.hpp"
#include "simgap/util.hpp"

namespace simgap {

namespace {

template <typename T>
T field(const Json& j, const char* key, const char* what) {
  if (!j.contains(key)) throw ConfigError(std::string(what) + ": missing field '" + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const Json::exception& e) {
    throw ConfigError(std::string(what) + ": bad field '" + key + "': " + e.what());
  }
}

}  // namespace

Json box_to_json(const StateBox& box) { return {{"lower", box.lower()}, {"upper", box.upper()}}; }

StateBox box_from_json(const Json& j) {
  return StateBox(field<Vec>(j, "lower", "box"), field<Vec>(j, "upper", "box"));
}

Json inputs_to_json(const InputGrid& inputs) { return {{"points", inputs.points()}}; }

InputGrid inputs_from_json(const Json& j) {
  if (j.contains("points")) return InputGrid(field<std::vector<Vec>>(j, "points", "inputs"));
  return InputGrid::lattice(field<Vec>(j, "lower", "inputs"), field<Vec>(j, "upper", "inputs"),
                            field<Vec>(j, "step", "inputs"));
}

Json solution_to_json(const ScpSolution& s) {
  return {{"dim", s.dim + 1},
          {"basis", s.basis.names()},
          {"q", s.q},
          {"q_reported", s.reported_q()},
          {"eta", s.eta},
          {"eta_lp", s.eta_lp},
          {"tol", s.tol},
          {"samples", s.samples},
          {"dedup_count", s.dedup_count},
          {"active", s.active},
          {"max_violation", s.max_violation},
          {"iterations", s.iterations}};
}

ScpSolution solution_from_json(const Json& j, std::size_t n, std::size_t m) {
  ScpSolution s;
  const auto dim = field<std::size_t>(j, "dim", "solution");
  if (dim < 1 || dim > n) throw ConfigError("solution: dim out of range");
  s.dim = dim - 1;
  s.basis = BasisSpec::parse(n, m, field<std::vector<std::string>>(j, "basis", "solution"));
  s.q = field<Vec>(j, "q", "solution");
  if (s.q.size() != s.basis.size()) throw ConfigError("solution: q does not match the basis");
  s.eta = field<double>(j, "eta", "solution");
  s.eta_lp = j.value("eta_lp", s.eta);
  s.tol = j.value("tol", 1e-9);
  s.samples = j.value("samples", std::size_t{0});
  s.dedup_count = j.value("dedup_count", std::size_t{0});
  s.active = j.value("active", std::size_t{0});
  s.max_violation = j.value("max_violation", 0.0);
  s.iterations = j.value("iterations", std::size_t{0});
  return s;
}

Json lipschitz_to_json(const LipschitzEstimate& e) {
  Json j = {{"value", e.value},
            {"method", to_string(e.method)},
            {"inflation", e.inflation},
            {"pair_count", e.pair_count},
            {"max_observed_slope", e.max_observed_slope},
            {"seed", e.seed},
            {"fallbacks", e.fallbacks}};
  if (e.fit) {
    j["fit"] = {{"location", e.fit->location},
                {"scale", e.fit->scale},
                {"shape", e.fit->shape},
                {"log_likelihood", e.fit->log_likelihood}};
  }
  return j;
}

LipschitzEstimate lipschitz_from_json(const Json& j) {
  LipschitzEstimate e;
  e.value = field<double>(j, "value", "lipschitz");
  const auto method = j.value("method", std::string("analytic"));
  if (method == "max-slope") {
    e.method = LipschitzMethod::max_slope;
  } else if (method == "extreme-value") {
    e.method = LipschitzMethod::extreme_value;
  } else if (method == "analytic") {
    e.method = LipschitzMethod::analytic;
  } else {
    throw ConfigError("lipschitz: unknown method '" + method + "'");
  }
  e.inflation = j.value("inflation", 1.0);
  e.pair_count = j.value("pair_count", std::size_t{0});
  e.max_observed_slope = j.value("max_observed_slope", 0.0);
  e.seed = j.value("seed", std::uint64_t{0});
  e.fallbacks = j.value("fallbacks", std::size_t{0});
  if (j.contains("fit")) {
    const auto& f = j["fit"];
    e.fit = ReverseWeibullFit{f.at("location").get<double>(), f.at("scale").get<double>(),
                              f.at("shape").get<double>(), f.at("log_likelihood").get<double>()};
  }
  if (e.value < 0) throw ConfigError("lipschitz: negative constant");
  return e;
}

Json estimate_to_json(std::size_t dim, const LipschitzEstimate& l1, const LipschitzEstimate& l2) {
  return {{"dim", dim + 1},
          {"L1", l1.value},
          {"L2", l2.value},
          {"L", l1.value + l2.value},
          {"method", to_string(l1.method)},
          {"inflation", l1.inflation},
          {"seed", l1.seed},
          {"max_observed_slope", l1.max_observed_slope},
          {"l1", lipschitz_to_json(l1)},
          {"l2", lipschitz_to_json(l2)}};
}

Json gap_to_json(const GapModel& gap) {
  Json comps = Json::array();
  for (std::size_t i = 0; i < gap.n(); ++i) {
    const auto& c = gap.component(i);
    comps.push_back({{"dim", i + 1},
                     {"basis", c.basis.names()},
                     {"q", c.q},
                     {"eta", c.eta},
                     {"L1", c.l1.value},
                     {"L2", c.l2.value},
                     {"epsilon", gap.epsilon()},
                     {"const_total", gap.const_total(i)},
                     {"l1", lipschitz_to_json(c.l1)},
                     {"l2", lipschitz_to_json(c.l2)}});
  }
  return {{"epsilon", gap.epsilon()},
          {"domain", box_to_json(gap.domain())},
          {"inputs", inputs_to_json(gap.inputs())},
          {"dataset_hash", gap.dataset_hash},
          {"components", comps}};
}

GapModel gap_from_json(const Json& j) {
  const StateBox domain = box_from_json(field<Json>(j, "domain", "gap"));
  const InputGrid inputs = inputs_from_json(field<Json>(j, "inputs", "gap"));
  std::vector<GapComponent> comps;
  for (const auto& c : field<Json>(j, "components", "gap")) {
    GapComponent g;
    g.basis = BasisSpec::parse(domain.dim(), inputs.dim(),
                               field<std::vector<std::string>>(c, "basis", "gap component"));
    g.q = field<Vec>(c, "q", "gap component");
    g.eta = c.value("eta", 0.0);
    if (c.contains("l1")) {
      g.l1 = lipschitz_from_json(c["l1"]);
      g.l2 = lipschitz_from_json(c["l2"]);
    } else {
      g.l1.value = field<double>(c, "L1", "gap component");
      g.l2.value = field<double>(c, "L2", "gap component");
    }
    comps.push_back(std::move(g));
  }
  GapModel gap(field<double>(j, "epsilon", "gap"), domain, inputs, std::move(comps));
  gap.dataset_hash = j.value("dataset_hash", std::string());
  return gap;
}

Json sup_gamma_to_json(const SupGamma& s) {
  return {{"sup", s.value},
          {"argmax_x", s.argmax_x},
          {"argmax_u", s.argmax_u},
          {"exact", s.exact},
          {"slack", s.slack}};
}

Json validation_to_json(const ValidationReport& r) {
  return {{"trials", r.trials},
          {"seed", r.seed},
          {"violations", r.violations},
          {"violations_per_dim", r.violations_per_dim},
          {"worst_margin", r.worst_margin},
          {"worst_x", r.worst_x},
          {"worst_u", r.worst_u},
          {"histogram", r.histogram},
          {"hist_lo", r.hist_lo},
          {"hist_hi", r.hist_hi},
          {"negative_gamma", r.negative_gamma}};
}

std::string validation_text(const ValidationReport& r) {
  std::ostringstream os;
  os << "validation: " << r.trials << " trials (seed " << r.seed << "), " << r.violations
     << " violating trials\n";
  for (std::size_t i = 0; i < r.worst_margin.size(); ++i) {
    os << "  dim " << i + 1 << ": violations " << r.violations_per_dim[i] << ", worst margin "
       << format_double(r.worst_margin[i]) << ", margin range [" << format_double(r.hist_lo[i])
       << ", " << format_double(r.hist_hi[i]) << "]\n";
  }
  if (r.negative_gamma > 0) {
    os << "  warning: " << r.negative_gamma
       << " negative gamma evaluations (Lipschitz constants are likely invalid)\n";
  }
  return os.str();
}

void write_controller(const std::filesystem::path& csv, const ControllerTable& table,
                      const AbstractGrid& grid) {
  std::ostringstream os;
  os << "cell_index,input_index,rank\n";
  for (std::size_t c : table.winning) os << c << ',' << table.policy[c] << ',' << table.rank[c] << '\n';
  write_text(csv, os.str());
  auto meta = csv;
  meta.replace_extension(".meta.json");
  write_json(meta, {{"kind", to_string(table.kind)},
                    {"cells", table.cell_count},
                    {"winning", table.winning.size()},
                    {"iterations", table.iterations},
                    {"hold", table.hold},
                    {"spec_hash", table.spec_hash},
                    {"grid", {{"box", box_to_json(grid.box())}, {"eta", grid.eta()}, {"counts", grid.counts()}}}});
}

ControllerTable read_controller(const std::filesystem::path& csv, std::size_t cell_count) {
  ControllerTable t;
  t.cell_count = cell_count;
  t.policy.assign(cell_count, ControllerTable::kNone);
  t.rank.assign(cell_count, ControllerTable::kNone);
  auto meta = csv;
  meta.replace_extension(".meta.json");
  if (std::filesystem::exists(meta)) {
    const Json j = read_json(meta);
    t.kind = parse_spec_kind(j.value("kind", std::string("invariance")));
    t.iterations = j.value("iterations", std::size_t{0});
    t.hold = j.value("hold", 1U);
    t.spec_hash = j.value("spec_hash", std::string());
    if (j.value("cells", cell_count) != cell_count) {
      throw ConfigError("controller " + csv.string() + " was built for a different grid");
    }
  }
  std::istringstream is(read_text(csv));
  std::string line;
  std::getline(is, line);
  if (line != "cell_index,input_index,rank") {
    throw ConfigError("controller " + csv.string() + ": unexpected header '" + line + "'");
  }
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    long long c = 0, u = 0, r = 0;
    char s1 = 0, s2 = 0;
    std::istringstream ls(line);
    if (!(ls >> c >> s1 >> u >> s2 >> r) || s1 != ',' || s2 != ',' || c < 0 ||
        static_cast<std::size_t>(c) >= cell_count) {
      throw ConfigError("controller " + csv.string() + ": bad row '" + line + "'");
    }
    t.winning.push_back(static_cast<std::size_t>(c));
    t.policy[static_cast<std::size_t>(c)] = static_cast<std::int32_t>(u);
    t.rank[static_cast<std::size_t>(c)] = static_cast<std::int32_t>(r);
  }
  std::sort(t.winning.begin(), t.winning.end());
  return t;
}

void write_winning_set(const std::filesystem::path& csv, const ControllerTable& table,
                       const AbstractGrid& grid) {
  std::ostringstream os;
  for (std::size_t j = 0; j < grid.dim(); ++j) os << (j ? "," : "") << "x_" << j + 1;
  os << '\n';
  for (std::size_t c : table.winning) {
    const Vec x = grid.center(c);
    for (std::size_t j = 0; j < x.size(); ++j) os << (j ? "," : "") << format_double(x[j]);
    os << '\n';
  }
  write_text(csv, os.str());
}

void write_json(const std::filesystem::path& path, const Json& j) {
  write_text(path, j.dump(2) + "\n");
}

Json read_json(const std::filesystem::path& path) {
  try {
    return Json::parse(read_text(path));
  } catch (const Json::parse_error& e) {
    throw ConfigError(path.string() + ": invalid JSON: " + e.what());
  }
}

}  // namespace simgap
