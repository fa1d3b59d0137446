#include "simgap/pipeline.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <thread>

#include "simgap/error.hpp"
#include "simgap/io.hpp"
#include "simgap/lipschitz.hpp"
#include "simgap/util.hpp"

namespace simgap {

namespace fs = std::filesystem;

const std::vector<Stage>& all_stages() {
  static const std::vector<Stage> stages = {Stage::cover,    Stage::collect,  Stage::fit,
                                            Stage::lipschitz, Stage::gamma,   Stage::validate,
                                            Stage::synth,    Stage::simulate, Stage::report};
  return stages;
}

std::string to_string(Stage stage) {
  switch (stage) {
    case Stage::cover: return "cover";
    case Stage::collect: return "collect";
    case Stage::fit: return "fit";
    case Stage::lipschitz: return "lipschitz";
    case Stage::gamma: return "gamma";
    case Stage::validate: return "validate";
    case Stage::synth: return "synth";
    case Stage::simulate: return "simulate";
    case Stage::report: return "report";
  }
  return "unknown";
}

Stage parse_stage(const std::string& name) {
  for (Stage s : all_stages()) {
    if (to_string(s) == name) return s;
  }
  throw ConfigError("unknown stage '" + name + "'");
}

std::string sweep_label(double epsilon) { return "eps_" + format_double(epsilon); }

namespace {

class Timer {
 public:
  explicit Timer(std::string what) : what_(std::move(what)), t0_(std::chrono::steady_clock::now()) {
    std::cerr << "[" << what_ << "] running\n";
  }
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0_).count();
  }
  ~Timer() { std::cerr << "[" << what_ << "] done in " << std::fixed << std::setprecision(2) << seconds() << " s\n"; }

 private:
  std::string what_;
  std::chrono::steady_clock::time_point t0_;
};

// Hash of the configuration sections a stage reads, chained to its inputs.
std::string stage_key(const PipelineConfig& c, Stage s) {
  const Json j = c.to_json();
  Json part;
  switch (s) {
    case Stage::cover:
      part = {j["model"], j["state_box"], j["inputs"], j["sampling"]["epsilon"], j["sampling"]["budget"]};
      break;
    case Stage::collect:
      part = {stage_key(c, Stage::cover), j["oracle"]};
      break;
    case Stage::fit:
      part = {stage_key(c, Stage::collect), j["scp"]};
      break;
    case Stage::lipschitz:
      part = {stage_key(c, Stage::fit), j["lipschitz"]};
      break;
    case Stage::gamma:
      part = {stage_key(c, Stage::lipschitz), j["sampling"]["sweep"]};
      break;
    case Stage::validate:
      part = {stage_key(c, Stage::gamma), j["validate"]};
      break;
    case Stage::synth:
      part = {stage_key(c, Stage::gamma), j["synthesis"]};
      break;
    case Stage::simulate:
      part = {stage_key(c, Stage::synth), j["simulate"]};
      break;
    case Stage::report:
      part = {stage_key(c, Stage::validate), stage_key(c, Stage::simulate), j["name"]};
      break;
  }
  return hash_hex(part.dump());
}

std::vector<Stage> prerequisites(Stage s) {
  switch (s) {
    case Stage::cover: return {};
    case Stage::collect: return {Stage::cover};
    case Stage::fit: return {Stage::collect};
    case Stage::lipschitz: return {Stage::fit};
    case Stage::gamma: return {Stage::lipschitz};
    case Stage::validate: return {Stage::gamma};
    case Stage::synth: return {Stage::gamma};
    case Stage::simulate: return {Stage::synth};
    case Stage::report: return {Stage::validate, Stage::simulate};
  }
  return {};
}

Json read_manifest(const fs::path& dir) {
  const fs::path p = dir / "manifest.json";
  if (!fs::exists(p)) return Json{{"stages", Json::object()}};
  return read_json(p);
}

void run_parallel(std::size_t count, unsigned jobs, const std::function<void(std::size_t)>& fn) {
  std::vector<std::exception_ptr> errors(count);
  auto body = [&](unsigned w) {
    for (std::size_t i = w; i < count; i += jobs) {
      try {
        fn(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  if (jobs <= 1) {
    body(0);
  } else {
    std::vector<std::jthread> pool;
    for (unsigned w = 0; w < jobs; ++w) pool.emplace_back(body, w);
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

std::string vec_text(VecView v) {
  std::string s = "(";
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? ", " : "") + format_double(v[i]);
  return s + ")";
}

// Six significant digits for human-facing tables.
std::string num(double v) {
  std::ostringstream os;
  os << std::setprecision(6) << v;
  return os.str();
}

std::string polynomial_text(const GapModel& gap, std::size_t i) {
  const auto& c = gap.component(i);
  const auto k = c.basis.constant_index();
  std::ostringstream os;
  bool first = true;
  for (std::size_t l = 0; l < c.basis.size(); ++l) {
    if (k && l == *k) continue;
    const double q = std::abs(c.q[l]) < 1e-6 ? 0.0 : c.q[l];
    if (q == 0.0) continue;
    os << (first ? (q < 0 ? "-" : "") : (q < 0 ? " - " : " + ")) << std::setprecision(4)
       << std::abs(q) << c.basis.name(l);
    first = false;
  }
  const double k0 = gap.const_total(i);
  os << (first ? "" : (k0 < 0 ? " - " : " + ")) << std::setprecision(6)
     << (first ? k0 : std::abs(k0));
  return os.str();
}

}  // namespace

Pipeline::Pipeline(PipelineConfig config) : config_(std::move(config)) { config_.validate(); }

bool Pipeline::completed(Stage stage) const {
  const Json m = read_manifest(dir());
  const auto& stages = m["stages"];
  return stages.contains(to_string(stage)) &&
         stages[to_string(stage)].get<std::string>() == stage_key(config_, stage);
}

void Pipeline::require(Stage stage) const {
  for (Stage p : prerequisites(stage)) {
    if (!completed(p)) {
      throw ConfigError("stage '" + to_string(stage) + "' needs the artifacts of stage '" +
                        to_string(p) + "', which are missing or stale in " + dir().string() +
                        "; run that stage first");
    }
  }
}

void Pipeline::mark_done(Stage stage) {
  Json m = read_manifest(dir());
  m["name"] = config_.name;
  m["config_hash"] = config_.hash();
  m["stages"][to_string(stage)] = stage_key(config_, stage);
  write_json(path("manifest.json"), m);
}

void Pipeline::run(std::optional<Stage> from) {
  fs::create_directories(dir());
  write_json(path("config.effective.json"), config_.to_json());
  bool dirty = false;
  for (Stage s : all_stages()) {
    if (from && s == *from) dirty = true;
    if (dirty || !completed(s)) {
      run_stage(s);
      dirty = true;
    } else {
      std::cerr << "[" << to_string(s) << "] up to date, skipped\n";
    }
  }
}

void Pipeline::run_stage(Stage stage) {
  require(stage);
  fs::create_directories(dir());
  try {
    switch (stage) {
      case Stage::cover: stage_cover(); break;
      case Stage::collect: stage_collect(); break;
      case Stage::fit: stage_fit(); break;
      case Stage::lipschitz: stage_lipschitz(); break;
      case Stage::gamma: stage_gamma(); break;
      case Stage::validate: stage_validate(); break;
      case Stage::synth: stage_synth(); break;
      case Stage::simulate: stage_simulate(); break;
      case Stage::report: stage_report(); break;
    }
  } catch (Error& e) {
    std::cerr << "[" << to_string(stage) << "] failed: " << e.what() << "\n";
    throw;
  }
  mark_done(stage);
}

Cover Pipeline::load_cover() const {
  const InputGrid inputs = config_.input_grid();
  return make_cover(config_.state_box(), config_.epsilon, inputs.size(), config_.record_budget);
}

std::vector<ScpSolution> Pipeline::load_solutions() const {
  const NominalModel model = config_.model();
  std::vector<ScpSolution> out;
  for (const auto& j : read_json(path("fit.json"))) out.push_back(solution_from_json(j, model.n(), model.m()));
  return out;
}

GapModel Pipeline::load_gap() const { return gap_from_json(read_json(path("gap.json"))); }

Abstraction Pipeline::abstraction(bool with_gap) const {
  AbstractGrid grid(config_.state_box(), config_.eta_grid, config_.cell_budget);
  std::optional<GapModel> gap;
  if (with_gap) gap = load_gap();
  return Abstraction(std::move(grid), config_.model(), config_.input_grid(), std::move(gap),
                     config_.hold);
}

ControllerTable Pipeline::load_controller(bool with_gap) const {
  AbstractGrid grid(config_.state_box(), config_.eta_grid, config_.cell_budget);
  return read_controller(path(with_gap ? "controller_gap.csv" : "controller_nogap.csv"), grid.size());
}

void Pipeline::stage_cover() {
  Timer t("cover");
  const Cover cover = load_cover();
  write_json(path("cover.json"), {{"epsilon", cover.epsilon()},
                                  {"n", cover.box().dim()},
                                  {"N", cover.size()},
                                  {"M", config_.input_grid().size()},
                                  {"records", cover.size() * config_.input_grid().size()},
                                  {"h", cover.half_width()},
                                  {"counts", cover.counts()},
                                  {"box", box_to_json(cover.box())}});
  std::cerr << "  N = " << cover.size() << " centers\n";
}

void Pipeline::stage_collect() {
  Timer t("collect");
  const Cover cover = load_cover();
  const InputGrid inputs = config_.input_grid();
  const NominalModel model = config_.model();
  auto oracle = config_.oracle();
  CollectOptions opts;
  opts.jobs = config_.jobs;
  opts.checkpoint = path("samples.partial.csv");
  opts.checkpoint_every = config_.checkpoint_every;
  const SampleSet samples = collect(cover, inputs, model, *oracle, opts);
  save_samples(samples_csv(), samples);
  std::cerr << "  " << samples.size() << " records\n";
}

void Pipeline::stage_fit() {
  Timer t("fit");
  const SampleSet samples = load_samples(samples_csv());
  const std::size_t n = samples.n();
  std::vector<ScpSolution> sols(n);
  ScpOptions opts;
  opts.tol = config_.scp_tol;
  run_parallel(n, config_.jobs, [&](std::size_t i) {
    sols[i] = solve_scp(samples, i, config_.basis_for(i), opts);
  });
  Json out = Json::array();
  for (const auto& s : sols) {
    out.push_back(solution_to_json(s));
    std::cerr << "  dim " << s.dim + 1 << ": eta = " << format_double(s.eta) << "\n";
  }
  write_json(path("fit.json"), out);
}

void Pipeline::stage_lipschitz() {
  Timer t("lipschitz");
  const auto sols = load_solutions();
  const NominalModel model = config_.model();
  const StateBox box = config_.state_box();
  const InputGrid inputs = config_.input_grid();
  auto oracle = config_.oracle();
  Json out = Json::array();
  for (std::size_t i = 0; i < model.n(); ++i) {
    LipschitzEstimate l1;
    switch (config_.l1_mode) {
      case L1Mode::estimate: {
        LipschitzOptions o;
        o.pairs = config_.pairs;
        o.pair_radius = config_.pair_radius_or_default();
        o.inflation = config_.inflation;
        o.seed = config_.seed + i;
        o.block_size = config_.block_size;
        o.jobs = config_.jobs;
        l1 = estimate_l1(*oracle, model, i, box, inputs, o);
        break;
      }
      case L1Mode::analytic: {
        const auto* s = dynamic_cast<const SurrogateOracle*>(oracle.get());
        if (!s) throw ConfigError("lipschitz: analytic L1 needs a surrogate oracle");
        l1.value = s->analytic_l1(i, box, inputs);
        l1.method = LipschitzMethod::analytic;
        break;
      }
      case L1Mode::fixed:
        l1.value = config_.l1_fixed[i];
        l1.method = LipschitzMethod::analytic;
        break;
    }
    const LipschitzEstimate l2 = analytic_l2(sols[i].basis, sols[i].q, box, inputs);
    out.push_back(estimate_to_json(i, l1, l2));
    std::cerr << "  dim " << i + 1 << ": L1 = " << format_double(l1.value) << " (" << to_string(l1.method)
              << "), L2 = " << format_double(l2.value) << "\n";
  }
  write_json(path("estimate.json"), out);
}

void Pipeline::stage_gamma() {
  Timer t("gamma");
  const auto sols = load_solutions();
  const Json est = read_json(path("estimate.json"));
  std::vector<LipschitzEstimate> l1, l2;
  for (const auto& e : est) {
    l1.push_back(lipschitz_from_json(e.at("l1")));
    l2.push_back(lipschitz_from_json(e.at("l2")));
  }
  const SampleMetadata meta = read_sample_metadata(metadata_path(samples_csv()));
  GapModel gap = assemble(sols, l1, l2, config_.epsilon, meta.epsilon, config_.state_box(),
                          config_.input_grid());
  gap.dataset_hash = hash_file(samples_csv());
  write_json(path("gap.json"), gap_to_json(gap));
  const SupGamma sup = sup_gamma(gap, gap.domain());
  write_json(path("sup_gamma.json"), sup_gamma_to_json(sup));
  for (std::size_t i = 0; i < sup.value.size(); ++i) {
    std::cerr << "  sup gamma_" << i + 1 << " = " << format_double(sup.value[i]) << "\n";
  }

  if (config_.sweep.empty()) {
    fs::remove(path("sup_gamma_sweep.csv"));
    return;
  }
  std::vector<Vec> table;  // per epsilon, per dim
  std::vector<Json> etas;
  for (double e : config_.sweep) {
    if (std::abs(e - config_.epsilon) <= 1e-15) {
      table.push_back(sup.value);
      continue;
    }
    PipelineConfig sub = config_;
    sub.epsilon = e;
    sub.sweep.clear();
    sub.out_dir = dir() / "sweep" / sweep_label(e);
    Pipeline p(sub);
    fs::create_directories(p.dir());
    for (Stage s : {Stage::cover, Stage::collect, Stage::fit, Stage::lipschitz, Stage::gamma}) {
      if (!p.completed(s)) p.run_stage(s);
    }
    const GapModel g = p.load_gap();
    table.push_back(sup_gamma(g, g.domain()).value);
  }
  std::ostringstream os;
  os << "dim";
  for (double e : config_.sweep) os << ",eps_" << format_double(e);
  os << '\n';
  for (std::size_t i = 0; i < gap.n(); ++i) {
    os << i + 1;
    for (const auto& row : table) os << ',' << format_double(row[i]);
    os << '\n';
  }
  write_text(path("sup_gamma_sweep.csv"), os.str());
}

void Pipeline::stage_validate() {
  Timer t("validate");
  const GapModel gap = load_gap();
  auto oracle = config_.oracle();
  ValidateOptions o;
  o.trials = config_.validate_trials;
  o.seed = config_.validate_seed;
  o.jobs = config_.jobs;
  const ValidationReport rep = validate(gap, config_.model(), *oracle, o);
  write_json(path("validation.json"), validation_to_json(rep));
  write_text(path("validation.txt"), validation_text(rep));
  std::ostringstream os;
  os << "dim,bin,lo,hi,count\n";
  for (std::size_t i = 0; i < rep.histogram.size(); ++i) {
    const double span = rep.hist_hi[i] - rep.hist_lo[i];
    const auto bins = rep.histogram[i].size();
    for (std::size_t b = 0; b < bins; ++b) {
      os << i + 1 << ',' << b << ',' << format_double(rep.hist_lo[i] + span * static_cast<double>(b) / static_cast<double>(bins))
         << ',' << format_double(rep.hist_lo[i] + span * static_cast<double>(b + 1) / static_cast<double>(bins)) << ','
         << rep.histogram[i][b] << '\n';
    }
  }
  write_text(path("tightness.csv"), os.str());
  std::cerr << validation_text(rep);
}

void Pipeline::stage_synth() {
  Timer t("synth");
  const SpecDef spec = config_.spec();
  SynthesisOptions so;
  so.jobs = config_.jobs;
  Json summary;
  std::vector<std::vector<std::size_t>> winning;
  for (bool with_gap : {false, true}) {
    const std::string label = with_gap ? "gap" : "nogap";
    const Abstraction abs = abstraction(with_gap);
    const auto t0 = std::chrono::steady_clock::now();
    const ControllerTable table = synthesize(abs, spec, so);
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const auto bad = closure_violations(abs, spec, table);
    if (!bad.empty()) {
      throw SolverError("synthesis (" + label + "): closure re-check failed for " +
                        std::to_string(bad.size()) + " cells, first " + std::to_string(bad.front()));
    }
    write_controller(path("controller_" + label + ".csv"), table, abs.grid());
    write_winning_set(path("winning_" + label + ".csv"), table, abs.grid());
    summary[label] = {{"winning", table.winning.size()},
                      {"iterations", table.iterations},
                      {"closure_violations", bad.size()},
                      {"seconds", secs}};
    summary["cells"] = abs.grid().size();
    summary["counts"] = abs.grid().counts();
    winning.push_back(table.winning);
    std::cerr << "  " << label << ": " << table.winning.size() << " of " << abs.grid().size()
              << " cells winning\n";
  }
  const bool subset = std::includes(winning[0].begin(), winning[0].end(), winning[1].begin(), winning[1].end());
  summary["gap_subset_of_nogap"] = subset;
  summary["removed"] = static_cast<long long>(winning[0].size()) - static_cast<long long>(winning[1].size());
  summary["hold"] = config_.hold;
  summary["eta"] = config_.eta_grid;
  summary["spec"] = config_.spec().descriptor();
  // timings vary between runs; keep them out of the deterministic bundle
  Json timing = {{"gap", summary["gap"]["seconds"]}, {"nogap", summary["nogap"]["seconds"]}};
  summary["gap"].erase("seconds");
  summary["nogap"].erase("seconds");
  write_json(path("synth.json"), summary);
  write_json(path("synth.timing.json"), timing);
}

void Pipeline::stage_simulate() {
  Timer t("simulate");
  const SpecDef spec = config_.spec();
  const InputGrid inputs = config_.input_grid();
  const NominalModel model = config_.model();
  fs::create_directories(path("trajectories"));
  Json runs = Json::array();
  ClosedLoopOptions opts;
  opts.steps = config_.steps;
  for (bool with_gap : {false, true}) {
    const std::string label = with_gap ? "gap" : "nogap";
    const Abstraction abs = abstraction(with_gap);
    const ControllerTable table = load_controller(with_gap);
    auto oracle = config_.oracle();
    auto replay_oracle = config_.oracle();
    auto one = [&](const std::string& set, std::size_t idx, const Vec& x0) {
      const Trajectory tr = run_closed_loop(table, abs, spec, *oracle, x0, opts);
      const VerdictCheck check = check_verdict(tr.states, spec, abs.grid().box());
      const bool replay_ok = replay(tr, *replay_oracle, inputs, model.angle_dims()) == tr.states;
      const std::string file = "trajectories/" + set + "_" + std::to_string(idx) + "_" + label + ".csv";
      write_trajectory_csv(path(file), tr, inputs);
      Json r = {{"set", set},
                {"index", idx},
                {"controller", label},
                {"x0", x0},
                {"file", file},
                {"verdict", to_string(tr.verdict)},
                {"reason", tr.reason},
                {"steps", tr.inputs.size()},
                {"outside_winning_set", tr.outside_winning_set},
                {"unmanaged_steps", tr.unmanaged_steps},
                {"checker_agrees", check.verdict == tr.verdict && check.violation_step == tr.violation_step},
                {"replay_identical", replay_ok}};
      r["violation_step"] = tr.violation_step ? Json(*tr.violation_step) : Json(nullptr);
      r["reached_step"] = tr.reached_step ? Json(*tr.reached_step) : Json(nullptr);
      r["obstacle_cell_step"] = tr.obstacle_cell_step ? Json(*tr.obstacle_cell_step) : Json(nullptr);
      runs.push_back(r);
      std::cerr << "  " << set << "[" << idx << "] " << label << " from " << vec_text(x0) << ": "
                << to_string(tr.verdict) << (tr.outside_winning_set ? " (outside winning set)" : "")
                << "\n";
    };
    for (std::size_t i = 0; i < config_.initial_states.size(); ++i) one("init", i, config_.initial_states[i]);
    for (std::size_t i = 0; i < config_.demo_states.size(); ++i) one("demo", i, config_.demo_states[i]);
  }
  Json summary = {{"runs", runs}};
  if (config_.all_winning_cells) {
    const Abstraction abs = abstraction(true);
    const ControllerTable table = load_controller(true);
    std::size_t ok = 0;
    std::vector<char> sat(table.winning.size(), 0);
    run_parallel(table.winning.size(), config_.jobs, [&](std::size_t k) {
      auto oracle = config_.oracle();
      const Trajectory tr = run_closed_loop(table, abs, spec, *oracle, abs.grid().center(table.winning[k]), opts);
      sat[k] = tr.verdict == Verdict::satisfied;
    });
    Json failures = Json::array();
    for (std::size_t k = 0; k < sat.size(); ++k) {
      if (sat[k]) {
        ++ok;
      } else {
        failures.push_back(table.winning[k]);
      }
    }
    summary["winning_cells"] = {{"total", table.winning.size()}, {"satisfied", ok}, {"failed_cells", failures}};
    std::cerr << "  winning-cell runs: " << ok << " of " << table.winning.size() << " satisfied\n";
  }
  write_json(path("simulate.json"), summary);
}

void Pipeline::stage_report() {
  Timer t("report");
  const PipelineConfig& c = config_;
  const Json cover = read_json(path("cover.json"));
  const Json fit = read_json(path("fit.json"));
  const Json est = read_json(path("estimate.json"));
  const GapModel gap = load_gap();
  const Json sup = read_json(path("sup_gamma.json"));
  const Json val = read_json(path("validation.json"));
  const Json syn = read_json(path("synth.json"));
  const Json sim = read_json(path("simulate.json"));

  std::ostringstream os;
  os << "# " << c.name << "\n\n";
  os << "- config hash: `" << c.hash() << "`\n";
  os << "- model: " << c.model().descriptor() << "\n";
  os << "- oracle: " << c.oracle()->id() << "\n";
  os << "- epsilon: " << num(c.epsilon) << ", N = " << cover["N"] << ", M = " << cover["M"]
     << ", records = " << cover["records"] << "\n";
  os << "- dataset hash: `" << gap.dataset_hash << "`\n\n";

  os << "## Scenario program\n\n| dim | eta | samples | merged rows | basis | q (|q| < 1e-6 shown as 0) |\n|---|---|---|---|---|---|\n";
  for (const auto& s : fit) {
    os << "| " << s["dim"] << " | " << num(s["eta"].get<double>()) << " | " << s["samples"] << " | "
       << s["dedup_count"] << " | " << s["basis"].size() << " terms | ";
    const auto q = s["q_reported"].get<Vec>();
    const auto names = s["basis"].get<std::vector<std::string>>();
    for (std::size_t l = 0; l < q.size(); ++l) os << (l ? ", " : "") << names[l] << ": " << num(q[l]);
    os << " |\n";
  }
  os << "\n## Lipschitz constants\n\n| dim | L1 | method | max observed slope | L2 | L |\n|---|---|---|---|---|---|\n";
  for (const auto& e : est) {
    os << "| " << e["dim"] << " | " << num(e["L1"].get<double>()) << " | " << e["method"].get<std::string>()
       << " | " << num(e["max_observed_slope"].get<double>()) << " | "
       << num(e["L2"].get<double>()) << " | " << num(e["L"].get<double>()) << " |\n";
  }
  os << "\n## Gap function\n\n";
  for (std::size_t i = 0; i < gap.n(); ++i) {
    os << "- gamma_" << i + 1 << "(x,u) = " << polynomial_text(gap, i) << "\n";
  }
  os << "\n| dim | sup gamma over X x U |\n|---|---|\n";
  for (std::size_t i = 0; i < gap.n(); ++i) {
    os << "| " << i + 1 << " | " << num(sup["sup"][i].get<double>()) << " |\n";
  }
  if (fs::exists(path("sup_gamma_sweep.csv"))) {
    os << "\n### sup gamma across epsilon\n\n";
    std::istringstream in(read_text(path("sup_gamma_sweep.csv")));
    std::string line;
    bool header = true;
    while (std::getline(in, line)) {
      std::istringstream ls(line);
      std::string cell;
      for (int col = 0; std::getline(ls, cell, ','); ++col) {
        os << "| " << (header || col == 0 ? cell : num(std::stod(cell))) << " ";
      }
      os << "|\n";
      if (header) {
        const auto cols = std::count(line.begin(), line.end(), ',') + 1;
        os << "|";
        for (long k = 0; k < cols; ++k) os << "---|";
        os << "\n";
        header = false;
      }
    }
  }
  os << "\n## Validation\n\n```\n" << validation_text([&] {
    ValidationReport r;
    r.trials = val["trials"];
    r.seed = val["seed"];
    r.violations = val["violations"];
    r.violations_per_dim = val["violations_per_dim"].get<std::vector<std::size_t>>();
    r.worst_margin = val["worst_margin"].get<Vec>();
    r.hist_lo = val["hist_lo"].get<Vec>();
    r.hist_hi = val["hist_hi"].get<Vec>();
    r.negative_gamma = val["negative_gamma"];
    return r;
  }()) << "```\n";
  os << "\n## Synthesis\n\n";
  os << "- spec: " << syn["spec"].get<std::string>() << "\n";
  os << "- grid: " << syn["cells"] << " cells, half-widths " << vec_text(syn["eta"].get<Vec>())
     << ", input held for " << syn["hold"] << " steps\n";
  os << "- winning cells without gamma: " << syn["nogap"]["winning"] << "\n";
  os << "- winning cells with gamma: " << syn["gap"]["winning"] << "\n";
  os << "- with-gamma set contained in without-gamma set: " << (syn["gap_subset_of_nogap"].get<bool>() ? "yes" : "no")
     << " (" << syn["removed"] << " cells removed)\n";
  os << "\n## Closed-loop runs\n\n| set | controller | x0 | verdict | steps | note |\n|---|---|---|---|---|---|\n";
  for (const auto& r : sim["runs"]) {
    os << "| " << r["set"].get<std::string>() << "[" << r["index"] << "] | " << r["controller"].get<std::string>()
       << " | " << vec_text(r["x0"].get<Vec>()) << " | " << r["verdict"].get<std::string>() << " | "
       << r["steps"] << " | " << r["reason"].get<std::string>()
       << (r["outside_winning_set"].get<bool>() ? " (x0 outside winning set)" : "") << " |\n";
  }
  if (sim.contains("winning_cells")) {
    const auto& w = sim["winning_cells"];
    os << "\nRuns from every winning cell center (with gamma): " << w["satisfied"] << " of " << w["total"]
       << " satisfied.\n";
  }
  os << "\n## Files\n\n";
  os << "- `samples.csv`, `samples.meta.json`: paired data\n";
  os << "- `fit.json`, `estimate.json`, `gap.json`, `sup_gamma.json`: gap function\n";
  os << "- `validation.json`, `validation.txt`, `tightness.csv`: validation and tightness histogram\n";
  os << "- `controller_{gap,nogap}.csv`, `winning_{gap,nogap}.csv`: controllers and winning-set centers\n";
  os << "- `trajectories/*.csv`: closed-loop runs\n";
  if (fs::exists(path("sup_gamma_sweep.csv"))) os << "- `sup_gamma_sweep.csv`: sup gamma per dimension and epsilon\n";
  write_text(path("report.md"), os.str());
}

}  // namespace simgap
