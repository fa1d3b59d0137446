#include "simgap/config.hpp"

#include <set>

#include "simgap/error.hpp"
#include "simgap/util.hpp"

namespace simgap {

std::string to_string(L1Mode mode) {
  switch (mode) {
    case L1Mode::estimate: return "estimate";
    case L1Mode::analytic: return "analytic";
    case L1Mode::fixed: return "fixed";
  }
  return "unknown";
}

namespace {

class Section {
 public:
  Section(const Json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(path_ + ": expected an object");
  }

  bool has(const char* key) {
    seen_.insert(key);
    return j_.contains(key) && !j_.at(key).is_null();
  }

  template <typename T>
  T get(const char* key, T fallback) {
    if (!has(key)) return fallback;
    return as<T>(key);
  }

  template <typename T>
  T need(const char* key) {
    if (!has(key)) throw ConfigError(path_ + "." + key + ": required");
    return as<T>(key);
  }

  Section sub(const char* key) {
    seen_.insert(key);
    static const Json empty = Json::object();
    if (!j_.contains(key)) return Section(empty, path_ + "." + key);
    return Section(j_.at(key), path_ + "." + key);
  }

  const Json& raw(const char* key) {
    seen_.insert(key);
    return j_.at(key);
  }

  std::string where(const char* key) const { return path_ + "." + key; }

  /// Rejects keys that were never looked at.
  void finish() const {
    for (const auto& [k, v] : j_.items()) {
      if (!seen_.count(k)) throw ConfigError(path_ + ": unknown key '" + k + "'");
    }
  }

 private:
  template <typename T>
  T as(const char* key) {
    try {
      return j_.at(key).get<T>();
    } catch (const Json::exception& e) {
      throw ConfigError(path_ + "." + key + ": " + e.what());
    }
  }

  const Json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

std::vector<std::string> named_basis(const std::string& name, std::size_t n, std::size_t m) {
  if (name == "quadratic") return BasisSpec::quadratic(n, m).names();
  if (name == "linear") return BasisSpec::linear(n, m).names();
  if (name == "constant") return {"1"};
  throw ConfigError("scp.basis: unknown basis '" + name + "' (quadratic, linear, constant or a term list)");
}

Vec vec_or_throw(const std::optional<Vec>& v, const char* what) {
  if (!v) throw ConfigError(std::string(what) + ": required");
  return *v;
}

}  // namespace

NominalModel PipelineConfig::model() const {
  switch (model_kind) {
    case ModelKind::pendulum: {
      auto p = [&](const char* k, double d) {
        const auto it = model_params.find(k);
        return it == model_params.end() ? d : it->second;
      };
      return NominalModel::pendulum(tau, p("mass", 1.0), p("gravity", 9.81), p("length", 1.0));
    }
    case ModelKind::unicycle:
      return NominalModel::unicycle(tau);
    case ModelKind::affine_test: {
      if (affine_a.empty() || affine_b.size() != affine_a.size()) {
        throw ConfigError("model: affine-test needs matrices a (n x n) and b (n x m)");
      }
      const auto n = static_cast<Eigen::Index>(affine_a.size());
      const auto m = static_cast<Eigen::Index>(affine_b.front().size());
      Eigen::MatrixXd a(n, n), b(n, m);
      for (Eigen::Index i = 0; i < n; ++i) {
        if (static_cast<Eigen::Index>(affine_a[i].size()) != n ||
            static_cast<Eigen::Index>(affine_b[i].size()) != m) {
          throw ConfigError("model: affine-test matrices have inconsistent shapes");
        }
        for (Eigen::Index j = 0; j < n; ++j) a(i, j) = affine_a[i][j];
        for (Eigen::Index j = 0; j < m; ++j) b(i, j) = affine_b[i][j];
      }
      return NominalModel::affine(a, b, tau);
    }
  }
  throw ConfigError("model: unsupported kind");
}

StateBox PipelineConfig::state_box() const { return StateBox(state_lower, state_upper); }

InputGrid PipelineConfig::input_grid() const { return inputs_from_json(inputs); }

std::unique_ptr<Oracle> PipelineConfig::oracle() const {
  const NominalModel m = model();
  if (oracle_kind == "external") {
    return std::make_unique<ExternalOracle>(external, m.n(), m.m(), m.tau(), state_box());
  }
  return std::make_unique<SurrogateOracle>(m, surrogate, state_box());
}

BasisSpec PipelineConfig::basis_for(std::size_t dim) const {
  const NominalModel m = model();
  return BasisSpec::parse(m.n(), m.m(), basis.at(dim));
}

SpecDef PipelineConfig::spec() const {
  if (spec_kind == SpecKind::invariance) {
    return SpecDef::invariance(StateBox(vec_or_throw(safe_lower, "synthesis.spec.safe"),
                                        vec_or_throw(safe_upper, "synthesis.spec.safe")));
  }
  std::vector<StateBox> obs;
  for (const auto& [lo, hi] : obstacles) obs.emplace_back(lo, hi);
  return SpecDef::reach_avoid(StateBox(vec_or_throw(target_lower, "synthesis.spec.target"),
                                       vec_or_throw(target_upper, "synthesis.spec.target")),
                              std::move(obs));
}

void PipelineConfig::validate() const {
  const NominalModel m = model();
  const StateBox x = state_box();
  if (x.dim() != m.n()) {
    throw ConfigError("state_box: dimension " + std::to_string(x.dim()) +
                      " does not match the model's n = " + std::to_string(m.n()));
  }
  const InputGrid u = input_grid();
  if (u.dim() != m.m()) {
    throw ConfigError("inputs: dimension " + std::to_string(u.dim()) +
                      " does not match the model's m = " + std::to_string(m.m()));
  }
  if (oracle_kind == "surrogate") {
    const bool ok = surrogate.kind == SurrogateKind::identity ||
                    (surrogate.kind == SurrogateKind::damped_pendulum && m.kind() == ModelKind::pendulum) ||
                    (surrogate.kind == SurrogateKind::slipping_unicycle && m.kind() == ModelKind::unicycle);
    if (!ok) {
      throw ConfigError("oracle: surrogate '" + to_string(surrogate.kind) +
                        "' does not fit model '" + to_string(m.kind()) + "'");
    }
  } else if (oracle_kind == "external") {
    if (external.command.empty()) throw ConfigError("oracle.command: required for an external oracle");
    if (external.retries < 0) throw ConfigError("oracle.retries: must be nonnegative");
  } else {
    throw ConfigError("oracle.kind: expected surrogate or external, got '" + oracle_kind + "'");
  }
  if (!(epsilon > 0)) throw ConfigError("sampling.epsilon: must be positive");
  for (double e : sweep) {
    if (!(e > 0)) throw ConfigError("sampling.sweep: entries must be positive");
  }
  if (basis.size() != m.n()) {
    throw ConfigError("scp.basis: expected " + std::to_string(m.n()) + " per-dimension entries");
  }
  for (std::size_t i = 0; i < m.n(); ++i) (void)basis_for(i);
  if (!(scp_tol > 0)) throw ConfigError("scp.tol: must be positive");
  if (l1_mode == L1Mode::analytic && oracle_kind != "surrogate") {
    throw ConfigError("lipschitz.l1: 'analytic' needs a surrogate oracle");
  }
  if (l1_mode == L1Mode::fixed) {
    if (l1_fixed.size() != m.n()) throw ConfigError("lipschitz.values: need one L1 per dimension");
    for (double v : l1_fixed) {
      if (!(v >= 0)) throw ConfigError("lipschitz.values: must be nonnegative");
    }
  }
  if (pairs < 1000) throw ConfigError("lipschitz.pairs: must be at least 1000");
  if (pair_radius && !(*pair_radius > 0)) throw ConfigError("lipschitz.pair_radius: must be positive");
  if (!(inflation > 0)) throw ConfigError("lipschitz.inflation: must be positive");
  if (block_size < 2) throw ConfigError("lipschitz.block_size: must be at least 2");
  if (validate_trials < 1) throw ConfigError("validate.trials: must be at least 1");
  if (eta_grid.size() != m.n()) throw ConfigError("synthesis.eta: need one half-width per dimension");
  for (double e : eta_grid) {
    if (!(e > 0)) throw ConfigError("synthesis.eta: must be positive");
  }
  if (hold < 1) throw ConfigError("synthesis.hold: must be at least 1");
  spec().check(x);
  for (const auto& s : initial_states) {
    if (s.size() != m.n()) throw ConfigError("simulate.initial_states: wrong dimension");
  }
  for (const auto& s : demo_states) {
    if (s.size() != m.n()) throw ConfigError("simulate.demo_states: wrong dimension");
  }
  if (jobs < 1) throw ConfigError("jobs: must be at least 1");
}

PipelineConfig parse_config(const Json& j) {
  PipelineConfig c;
  Section root(j, "config");
  c.name = root.get<std::string>("name", c.name);
  c.jobs = root.get<unsigned>("jobs", c.jobs);

  {
    Section s = root.sub("model");
    c.model_kind = parse_model_kind(s.need<std::string>("kind"));
    const double default_tau = c.model_kind == ModelKind::unicycle ? 0.01
                               : c.model_kind == ModelKind::pendulum ? 0.005 : 1.0;
    c.tau = s.get<double>("tau", default_tau);
    c.model_params = s.get<std::map<std::string, double>>("params", {});
    c.affine_a = s.get<std::vector<Vec>>("a", {});
    c.affine_b = s.get<std::vector<Vec>>("b", {});
    s.finish();
  }
  {
    Section s = root.sub("state_box");
    c.state_lower = s.need<Vec>("lower");
    c.state_upper = s.need<Vec>("upper");
    s.finish();
  }
  {
    if (!root.has("inputs")) throw ConfigError("config.inputs: required");
    c.inputs = root.raw("inputs");
    Section s = root.sub("inputs");
    if (s.has("points")) {
      (void)s.need<std::vector<Vec>>("points");
    } else {
      (void)s.need<Vec>("lower");
      (void)s.need<Vec>("upper");
      (void)s.need<Vec>("step");
    }
    s.finish();
  }
  {
    Section s = root.sub("oracle");
    c.oracle_kind = s.get<std::string>("kind", "surrogate");
    if (c.oracle_kind == "surrogate") {
      c.surrogate.kind = parse_surrogate_kind(s.get<std::string>("surrogate", "identity"));
      c.surrogate.damping = s.get<double>("damping", c.surrogate.damping);
      c.surrogate.length_scale = s.get<double>("length_scale", c.surrogate.length_scale);
      c.surrogate.semi_implicit = s.get<bool>("semi_implicit", c.surrogate.semi_implicit);
      c.surrogate.gain = s.get<double>("gain", c.surrogate.gain);
      c.surrogate.drift = s.get<double>("drift", c.surrogate.drift);
    } else {
      c.external.command = s.get<std::vector<std::string>>("command", {});
      c.external.timeout = std::chrono::milliseconds(s.get<long>("timeout_ms", 10000));
      c.external.retries = s.get<int>("retries", c.external.retries);
    }
    s.finish();
  }
  {
    Section s = root.sub("sampling");
    c.epsilon = s.need<double>("epsilon");
    c.record_budget = s.get<std::size_t>("budget", c.record_budget);
    c.checkpoint_every = s.get<std::size_t>("checkpoint_every", c.checkpoint_every);
    c.sweep = s.get<std::vector<double>>("sweep", {});
    s.finish();
  }
  const NominalModel model = c.model();
  {
    Section s = root.sub("scp");
    c.scp_tol = s.get<double>("tol", c.scp_tol);
    const std::string fallback = model.kind() == ModelKind::unicycle ? "linear" : "quadratic";
    if (!s.has("basis")) {
      c.basis.assign(model.n(), named_basis(fallback, model.n(), model.m()));
    } else {
      const Json& b = s.raw("basis");
      if (b.is_string()) {
        c.basis.assign(model.n(), named_basis(b.get<std::string>(), model.n(), model.m()));
      } else if (b.is_array()) {
        for (const auto& entry : b) {
          if (entry.is_string()) {
            c.basis.push_back(named_basis(entry.get<std::string>(), model.n(), model.m()));
          } else if (entry.is_array()) {
            c.basis.push_back(entry.get<std::vector<std::string>>());
          } else {
            throw ConfigError(s.where("basis") + ": entries must be names or term lists");
          }
        }
      } else {
        throw ConfigError(s.where("basis") + ": expected a name or a per-dimension list");
      }
    }
    s.finish();
  }
  {
    Section s = root.sub("lipschitz");
    const auto mode = s.get<std::string>("l1", "estimate");
    if (mode == "estimate") {
      c.l1_mode = L1Mode::estimate;
    } else if (mode == "analytic") {
      c.l1_mode = L1Mode::analytic;
    } else if (mode == "fixed") {
      c.l1_mode = L1Mode::fixed;
    } else {
      throw ConfigError(s.where("l1") + ": expected estimate, analytic or fixed");
    }
    c.l1_fixed = s.get<Vec>("values", {});
    c.pairs = s.get<std::size_t>("pairs", c.pairs);
    if (s.has("pair_radius")) c.pair_radius = s.need<double>("pair_radius");
    c.inflation = s.get<double>("inflation", c.inflation);
    c.seed = s.get<std::uint64_t>("seed", c.seed);
    c.block_size = s.get<std::size_t>("block_size", c.block_size);
    s.finish();
  }
  {
    Section s = root.sub("validate");
    c.validate_trials = s.get<std::size_t>("trials", c.validate_trials);
    c.validate_seed = s.get<std::uint64_t>("seed", c.validate_seed);
    s.finish();
  }
  {
    Section s = root.sub("synthesis");
    c.eta_grid = s.need<Vec>("eta");
    c.hold = s.get<unsigned>("hold", c.hold);
    c.cell_budget = s.get<std::size_t>("cell_budget", c.cell_budget);
    Section sp = s.sub("spec");
    c.spec_kind = parse_spec_kind(sp.need<std::string>("kind"));
    if (c.spec_kind == SpecKind::invariance) {
      Section b = sp.sub("safe");
      c.safe_lower = b.need<Vec>("lower");
      c.safe_upper = b.need<Vec>("upper");
      b.finish();
    } else {
      Section b = sp.sub("target");
      c.target_lower = b.need<Vec>("lower");
      c.target_upper = b.need<Vec>("upper");
      b.finish();
      if (sp.has("obstacles")) {
        for (const auto& o : sp.raw("obstacles")) {
          Section ob(o, sp.where("obstacles[]"));
          c.obstacles.emplace_back(ob.need<Vec>("lower"), ob.need<Vec>("upper"));
          ob.finish();
        }
      }
    }
    sp.finish();
    s.finish();
  }
  {
    Section s = root.sub("simulate");
    c.steps = s.get<std::size_t>("steps", c.steps);
    c.initial_states = s.get<std::vector<Vec>>("initial_states", {});
    c.demo_states = s.get<std::vector<Vec>>("demo_states", {});
    c.all_winning_cells = s.get<bool>("all_winning_cells", c.all_winning_cells);
    s.finish();
  }
  {
    Section s = root.sub("output");
    c.out_dir = s.get<std::string>("dir", "out/" + c.name);
    s.finish();
  }
  root.finish();
  c.validate();
  return c;
}

PipelineConfig load_config(const std::filesystem::path& path) {
  return parse_config(read_json(path));
}

Json PipelineConfig::to_json() const {
  Json model_j = {{"kind", to_string(model_kind)}, {"tau", tau}};
  if (model_kind == ModelKind::pendulum) {
    const NominalModel m = model();
    model_j["params"] = m.params();
  }
  if (model_kind == ModelKind::affine_test) {
    model_j["a"] = affine_a;
    model_j["b"] = affine_b;
  }
  Json oracle_j;
  if (oracle_kind == "surrogate") {
    oracle_j = {{"kind", "surrogate"},
                {"surrogate", to_string(surrogate.kind)},
                {"damping", surrogate.damping},
                {"length_scale", surrogate.length_scale},
                {"semi_implicit", surrogate.semi_implicit},
                {"gain", surrogate.gain},
                {"drift", surrogate.drift}};
  } else {
    oracle_j = {{"kind", "external"},
                {"command", external.command},
                {"timeout_ms", external.timeout.count()},
                {"retries", external.retries}};
  }
  Json spec_j = {{"kind", to_string(spec_kind)}};
  if (spec_kind == SpecKind::invariance) {
    spec_j["safe"] = {{"lower", *safe_lower}, {"upper", *safe_upper}};
  } else {
    spec_j["target"] = {{"lower", *target_lower}, {"upper", *target_upper}};
    Json obs = Json::array();
    for (const auto& [lo, hi] : obstacles) obs.push_back({{"lower", lo}, {"upper", hi}});
    spec_j["obstacles"] = obs;
  }
  Json lip = {{"l1", to_string(l1_mode)},
              {"pairs", pairs},
              {"pair_radius", pair_radius_or_default()},
              {"inflation", inflation},
              {"seed", seed},
              {"block_size", block_size}};
  if (l1_mode == L1Mode::fixed) lip["values"] = l1_fixed;
  return {{"name", name},
          {"jobs", jobs},
          {"model", model_j},
          {"state_box", {{"lower", state_lower}, {"upper", state_upper}}},
          {"inputs", inputs},
          {"oracle", oracle_j},
          {"sampling",
           {{"epsilon", epsilon},
            {"budget", record_budget},
            {"checkpoint_every", checkpoint_every},
            {"sweep", sweep}}},
          {"scp", {{"basis", basis}, {"tol", scp_tol}}},
          {"lipschitz", lip},
          {"validate", {{"trials", validate_trials}, {"seed", validate_seed}}},
          {"synthesis",
           {{"eta", eta_grid}, {"hold", hold}, {"cell_budget", cell_budget}, {"spec", spec_j}}},
          {"simulate",
           {{"steps", steps},
            {"initial_states", initial_states},
            {"demo_states", demo_states},
            {"all_winning_cells", all_winning_cells}}},
          {"output", {{"dir", out_dir.string()}}}};
}

std::string PipelineConfig::hash() const {
  Json j = to_json();
  // execution settings do not change results
  j.erase("jobs");
  j.erase("output");
  return hash_hex(j.dump());
}

}  // namespace simgap
