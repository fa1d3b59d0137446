#include "simgap/gap.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <limits>
#include <random>
#include <thread>

#include <Eigen/Dense>

#include "simgap/error.hpp"

namespace simgap {

GapModel::GapModel(double epsilon, StateBox domain, InputGrid inputs,
                   std::vector<GapComponent> components)
    : epsilon_(epsilon),
      domain_(std::move(domain)),
      inputs_(std::move(inputs)),
      components_(std::move(components)),
      negatives_(std::make_shared<std::atomic<std::uint64_t>>(0)) {
  if (!(epsilon_ > 0)) throw ConfigError("gap: epsilon must be positive");
  if (components_.size() != domain_.dim()) {
    throw ConfigError("gap: expected " + std::to_string(domain_.dim()) + " components, got " +
                      std::to_string(components_.size()));
  }
  for (std::size_t i = 0; i < components_.size(); ++i) {
    const auto& c = components_[i];
    if (c.basis.n() != domain_.dim() || c.basis.m() != inputs_.dim()) {
      throw ConfigError("gap: basis of dimension " + std::to_string(i + 1) +
                        " does not match the state/input dimensions");
    }
    if (c.q.size() != c.basis.size()) {
      throw ConfigError("gap: coefficient count of dimension " + std::to_string(i + 1) +
                        " does not match its basis");
    }
    if (c.l1.value < 0 || c.l2.value < 0) {
      throw ConfigError("gap: Lipschitz constants must be nonnegative");
    }
  }
}

double GapModel::const_total(std::size_t i) const {
  const auto& c = components_.at(i);
  const auto k = c.basis.constant_index();
  return (k ? c.q[*k] : 0.0) + c.lipschitz() * epsilon_;
}

double GapModel::gamma(std::size_t i, VecView x, VecView u) const {
  const auto& c = components_[i];
  const Vec p = eval_basis(c.basis, x, u);
  double v = 0.0;
  for (std::size_t l = 0; l < p.size(); ++l) v += c.q[l] * p[l];
  return v + c.lipschitz() * epsilon_;
}

Vec GapModel::eval(VecView x, VecView u) const {
  check_dim(x, domain_.dim(), "eval_gamma: state");
  check_dim(u, inputs_.dim(), "eval_gamma: input");
  if (!domain_.contains(x)) throw DomainError("eval_gamma: state outside the gap's domain");
  Vec out(n());
  for (std::size_t i = 0; i < n(); ++i) {
    out[i] = gamma(i, x, u);
    if (out[i] < 0) negatives_->fetch_add(1);
  }
  return out;
}

GapModel GapModel::with_epsilon(double epsilon) const {
  GapModel copy(epsilon, domain_, inputs_, components_);
  copy.dataset_hash = dataset_hash;
  return copy;
}

GapModel assemble(const std::vector<ScpSolution>& solutions,
                  const std::vector<LipschitzEstimate>& l1,
                  const std::vector<LipschitzEstimate>& l2, double epsilon,
                  double dataset_epsilon, const StateBox& domain, const InputGrid& inputs) {
  const std::size_t n = domain.dim();
  if (solutions.size() != n || l1.size() != n || l2.size() != n) {
    throw ConfigError("assemble: need one solution and one L1/L2 pair per state dimension (" +
                      std::to_string(n) + ")");
  }
  if (std::abs(epsilon - dataset_epsilon) > 1e-12 * std::max(1.0, std::abs(dataset_epsilon))) {
    throw ConfigError("assemble: epsilon " + std::to_string(epsilon) +
                      " does not match the dataset's covering radius " +
                      std::to_string(dataset_epsilon));
  }
  std::vector<GapComponent> comps(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (solutions[i].dim != i) {
      throw ConfigError("assemble: solution " + std::to_string(i) + " is for dimension " +
                        std::to_string(solutions[i].dim + 1));
    }
    comps[i].basis = solutions[i].basis;
    comps[i].q = solutions[i].q;
    comps[i].eta = solutions[i].eta;
    comps[i].l1 = l1[i];
    comps[i].l2 = l2[i];
  }
  return GapModel(epsilon, domain, inputs, std::move(comps));
}

namespace {

// gamma_i(., u) as c + g^T x + x^T H x / 2.
struct Quadratic {
  double c = 0.0;
  Eigen::VectorXd g;
  Eigen::MatrixXd h;
};

Quadratic quadratic_in_x(const GapModel& gap, std::size_t i, VecView u) {
  const auto& comp = gap.component(i);
  const std::size_t n = comp.basis.n();
  Quadratic quad;
  quad.g = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n));
  quad.h = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  quad.c = comp.lipschitz() * gap.epsilon();
  for (std::size_t l = 0; l < comp.basis.size(); ++l) {
    const auto& e = comp.basis.terms()[l];
    double w = comp.q[l];
    for (std::size_t k = 0; k < u.size(); ++k) {
      for (unsigned r = 0; r < e[n + k]; ++r) w *= u[k];
    }
    std::vector<std::size_t> vars;
    for (std::size_t j = 0; j < n; ++j) {
      for (unsigned r = 0; r < e[j]; ++r) vars.push_back(j);
    }
    const auto a = static_cast<Eigen::Index>(vars.empty() ? 0 : vars[0]);
    if (vars.empty()) {
      quad.c += w;
    } else if (vars.size() == 1) {
      quad.g(a) += w;
    } else if (vars[0] == vars[1]) {
      quad.h(a, a) += 2.0 * w;
    } else {
      const auto b = static_cast<Eigen::Index>(vars[1]);
      quad.h(a, b) += w;
      quad.h(b, a) += w;
    }
  }
  return quad;
}

void consider(double value, VecView x, std::size_t u, double& best, Vec& best_x,
              std::size_t& best_u) {
  if (value > best) {
    best = value;
    best_x.assign(x.begin(), x.end());
    best_u = u;
  }
}

// Max over the box by searching all 3^n faces for stationary points.
void maximize_exact(const GapModel& gap, std::size_t i, const StateBox& region, std::size_t ui,
                    double& best, Vec& best_x, std::size_t& best_u) {
  const Vec& u = gap.inputs()[ui];
  const Quadratic quad = quadratic_in_x(gap, i, u);
  const std::size_t n = region.dim();
  std::size_t faces = 1;
  for (std::size_t j = 0; j < n; ++j) faces *= 3;
  Vec x(n);
  std::vector<int> mode(n);
  for (std::size_t f = 0; f < faces; ++f) {
    std::size_t code = f;
    std::vector<Eigen::Index> free;
    for (std::size_t j = 0; j < n; ++j) {
      mode[j] = static_cast<int>(code % 3);
      code /= 3;
      if (mode[j] == 0) x[j] = region.lower(j);
      if (mode[j] == 1) x[j] = region.upper(j);
      if (mode[j] == 2) free.push_back(static_cast<Eigen::Index>(j));
    }
    if (!free.empty()) {
      const auto k = static_cast<Eigen::Index>(free.size());
      Eigen::MatrixXd hf(k, k);
      Eigen::VectorXd rhs(k);
      for (Eigen::Index a = 0; a < k; ++a) {
        rhs(a) = -quad.g(free[a]);
        for (std::size_t j = 0; j < n; ++j) {
          if (mode[j] != 2) rhs(a) -= quad.h(free[a], static_cast<Eigen::Index>(j)) * x[j];
        }
        for (Eigen::Index b = 0; b < k; ++b) hf(a, b) = quad.h(free[a], free[b]);
      }
      Eigen::FullPivLU<Eigen::MatrixXd> lu(hf);
      if (!lu.isInvertible()) continue;
      const Eigen::VectorXd y = lu.solve(rhs);
      bool inside = true;
      for (Eigen::Index a = 0; a < k; ++a) {
        const auto j = static_cast<std::size_t>(free[a]);
        if (!(y(a) >= region.lower(j) && y(a) <= region.upper(j))) {
          inside = false;
          break;
        }
        x[j] = y(a);
      }
      if (!inside) continue;
    }
    consider(gap.gamma(i, x, u), x, ui, best, best_x, best_u);
  }
}

}  // namespace

SupGamma sup_gamma(const GapModel& gap, const StateBox& region, std::optional<std::size_t> input,
                   const SupGammaOptions& options) {
  if (!gap.domain().contains(region)) {
    throw DomainError("sup_gamma: region is not contained in the gap's domain");
  }
  if (input && *input >= gap.inputs().size()) throw UsageError("sup_gamma: input index out of range");
  const std::size_t n = gap.n();
  SupGamma out;
  out.value.assign(n, -std::numeric_limits<double>::infinity());
  out.argmax_x.assign(n, Vec(n, 0.0));
  out.argmax_u.assign(n, 0);
  out.slack.assign(n, 0.0);
  const std::size_t u_begin = input ? *input : 0;
  const std::size_t u_end = input ? *input + 1 : gap.inputs().size();
  for (std::size_t i = 0; i < n; ++i) {
    const auto& comp = gap.component(i);
    if (comp.basis.state_degree() <= 2) {
      for (std::size_t ui = u_begin; ui < u_end; ++ui) {
        maximize_exact(gap, i, region, ui, out.value[i], out.argmax_x[i], out.argmax_u[i]);
      }
      continue;
    }
    out.exact = false;
    const std::size_t res = std::max<std::size_t>(2, options.fallback_resolution);
    double half_diag = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      const double s = 0.5 * region.width(j) / static_cast<double>(res - 1);
      half_diag += s * s;
    }
    out.slack[i] = comp.l2.value * std::sqrt(half_diag);
    std::size_t total = 1;
    for (std::size_t j = 0; j < n; ++j) total *= res;
    Vec x(n);
    for (std::size_t ui = u_begin; ui < u_end; ++ui) {
      for (std::size_t p = 0; p < total; ++p) {
        std::size_t code = p;
        for (std::size_t j = 0; j < n; ++j) {
          const std::size_t k = code % res;
          code /= res;
          x[j] = region.lower(j) + region.width(j) * static_cast<double>(k) /
                                       static_cast<double>(res - 1);
        }
        consider(gap.gamma(i, x, gap.inputs()[ui]), x, ui, out.value[i], out.argmax_x[i],
                 out.argmax_u[i]);
      }
    }
    out.value[i] += out.slack[i];
  }
  return out;
}

namespace {

constexpr std::size_t kChunk = 4096;

struct ChunkResult {
  std::vector<Vec> margins;  // per dim
  std::vector<Vec> xs;       // per dim, worst x
  std::vector<std::size_t> us;
  Vec worst;
  std::vector<std::size_t> violations;
};

}  // namespace

ValidationReport validate(const GapModel& gap, const NominalModel& model, const Oracle& oracle,
                          const ValidateOptions& options) {
  if (options.trials < 1) throw ConfigError("validate: trials must be at least 1");
  const std::size_t n = gap.n();
  if (model.n() != n || oracle.n() != n || model.m() != gap.inputs().dim()) {
    throw UsageError("validate: gap, model and oracle dimensions differ");
  }
  const std::uint64_t negatives_before = gap.negative_count();
  const std::size_t chunks = (options.trials + kChunk - 1) / kChunk;
  std::vector<ChunkResult> results(chunks);
  std::vector<std::exception_ptr> errors(chunks);
  const unsigned jobs = std::max(1U, options.jobs);
  const StateBox& box = gap.domain();

  auto work = [&](unsigned w) {
    std::unique_ptr<Oracle> handle = oracle.clone();
    for (std::size_t c = w; c < chunks; c += jobs) {
      try {
        std::seed_seq seq{static_cast<std::uint32_t>(options.seed),
                          static_cast<std::uint32_t>(options.seed >> 32),
                          static_cast<std::uint32_t>(c)};
        std::mt19937_64 rng(seq);
        std::uniform_real_distribution<double> unit(0.0, 1.0);
        std::uniform_int_distribution<std::size_t> pick(0, gap.inputs().size() - 1);
        const std::size_t begin = c * kChunk;
        const std::size_t end = std::min(options.trials, begin + kChunk);
        ChunkResult& res = results[c];
        res.margins.assign(n, {});
        res.xs.assign(n, Vec(n, 0.0));
        res.us.assign(n, 0);
        res.worst.assign(n, std::numeric_limits<double>::infinity());
        res.violations.assign(n, 0);
        Vec x(n);
        for (std::size_t t = begin; t < end; ++t) {
          for (std::size_t j = 0; j < n; ++j) x[j] = box.lower(j) + box.width(j) * unit(rng);
          const std::size_t ui = pick(rng);
          const Vec& u = gap.inputs()[ui];
          const Vec f = model.step(x, u);
          const Vec fhat = handle->query(x, u);
          const Vec g = gap.eval(x, u);
          for (std::size_t i = 0; i < n; ++i) {
            const double margin = g[i] - std::abs(fhat[i] - f[i]);
            res.margins[i].push_back(margin);
            if (margin < 0) ++res.violations[i];
            if (margin < res.worst[i]) {
              res.worst[i] = margin;
              res.xs[i] = x;
              res.us[i] = ui;
            }
          }
        }
      } catch (...) {
        errors[c] = std::current_exception();
        return;
      }
    }
  };
  if (jobs == 1) {
    work(0);
  } else {
    std::vector<std::jthread> pool;
    for (unsigned w = 0; w < jobs; ++w) pool.emplace_back(work, w);
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }

  ValidationReport rep;
  rep.trials = options.trials;
  rep.seed = options.seed;
  rep.violations_per_dim.assign(n, 0);
  rep.worst_margin.assign(n, std::numeric_limits<double>::infinity());
  rep.worst_x.assign(n, Vec(n, 0.0));
  rep.worst_u.assign(n, 0);
  rep.hist_lo.assign(n, std::numeric_limits<double>::infinity());
  rep.hist_hi.assign(n, -std::numeric_limits<double>::infinity());
  for (const auto& res : results) {
    for (std::size_t i = 0; i < n; ++i) {
      rep.violations_per_dim[i] += res.violations[i];
      if (res.worst[i] < rep.worst_margin[i]) {
        rep.worst_margin[i] = res.worst[i];
        rep.worst_x[i] = res.xs[i];
        rep.worst_u[i] = res.us[i];
      }
      for (double m : res.margins[i]) {
        rep.hist_lo[i] = std::min(rep.hist_lo[i], m);
        rep.hist_hi[i] = std::max(rep.hist_hi[i], m);
      }
    }
  }
  const std::size_t bins = std::max<std::size_t>(1, options.histogram_bins);
  rep.histogram.assign(n, std::vector<std::size_t>(bins, 0));
  for (std::size_t i = 0; i < n; ++i) {
    const double lo = rep.hist_lo[i];
    const double span = rep.hist_hi[i] - lo;
    for (const auto& res : results) {
      for (double m : res.margins[i]) {
        std::size_t b = 0;
        if (span > 0) {
          b = static_cast<std::size_t>((m - lo) / span * static_cast<double>(bins));
          b = std::min(b, bins - 1);
        }
        ++rep.histogram[i][b];
      }
    }
  }
  // a trial counts once even if several dimensions fail
  for (const auto& res : results) {
    const std::size_t count = res.margins.empty() ? 0 : res.margins[0].size();
    for (std::size_t t = 0; t < count; ++t) {
      for (std::size_t i = 0; i < n; ++i) {
        if (res.margins[i][t] < 0) {
          ++rep.violations;
          break;
        }
      }
    }
  }
  rep.negative_gamma = gap.negative_count() - negatives_before;
  return rep;
}

}  // namespace simgap
