#include "simgap/scp.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "simgap/error.hpp"

namespace simgap {

BasisSpec::BasisSpec(std::size_t n, std::size_t m, std::vector<Exponents> terms)
    : n_(n), m_(m), terms_(std::move(terms)) {
  if (terms_.empty()) throw ConfigError("basis: at least one term required");
  for (const auto& t : terms_) {
    if (t.size() != n_ + m_) throw ConfigError("basis: exponent vector has wrong length");
  }
  auto sorted = terms_;
  std::sort(sorted.begin(), sorted.end());
  if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) {
    throw ConfigError("basis: duplicate term");
  }
}

BasisSpec BasisSpec::parse(std::size_t n, std::size_t m, const std::vector<std::string>& terms) {
  std::vector<Exponents> out;
  for (const auto& raw : terms) {
    Exponents e(n + m, 0);
    std::string term;
    for (char c : raw) {
      if (!std::isspace(static_cast<unsigned char>(c))) term += c;
    }
    if (term != "1") {
      std::istringstream is(term);
      std::string factor;
      while (std::getline(is, factor, '*')) {
        unsigned power = 1;
        const auto caret = factor.find('^');
        std::string var = factor.substr(0, caret);
        if (caret != std::string::npos) power = static_cast<unsigned>(std::stoul(factor.substr(caret + 1)));
        if (var.size() < 2 || (var[0] != 'x' && var[0] != 'u')) {
          throw ConfigError("basis: cannot parse term '" + raw + "'");
        }
        std::size_t idx = 0;
        try {
          idx = std::stoul(var.substr(1));
        } catch (const std::exception&) {
          throw ConfigError("basis: cannot parse term '" + raw + "'");
        }
        const std::size_t limit = var[0] == 'x' ? n : m;
        if (idx == 0 || idx > limit) throw ConfigError("basis: variable out of range in '" + raw + "'");
        e[(var[0] == 'x' ? 0 : n) + idx - 1] += power;
      }
    }
    out.push_back(std::move(e));
  }
  return BasisSpec(n, m, std::move(out));
}

BasisSpec BasisSpec::quadratic(std::size_t n, std::size_t m) {
  std::vector<Exponents> terms;
  auto unit = [&](std::size_t k, unsigned p) {
    Exponents e(n + m, 0);
    e[k] = p;
    return e;
  };
  for (std::size_t i = 0; i < n; ++i) terms.push_back(unit(i, 2));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      Exponents e(n + m, 0);
      e[i] = e[j] = 1;
      terms.push_back(e);
    }
  }
  for (std::size_t i = 0; i < n; ++i) terms.push_back(unit(i, 1));
  for (std::size_t k = 0; k < m; ++k) terms.push_back(unit(n + k, 1));
  terms.emplace_back(n + m, 0);
  return BasisSpec(n, m, std::move(terms));
}

BasisSpec BasisSpec::linear(std::size_t n, std::size_t m) {
  std::vector<Exponents> terms;
  for (std::size_t i = 0; i < n; ++i) {
    Exponents e(n + m, 0);
    e[i] = 1;
    terms.push_back(e);
  }
  terms.emplace_back(n + m, 0);
  for (std::size_t k = 0; k < m; ++k) {
    Exponents e(n + m, 0);
    e[n + k] = 1;
    terms.push_back(e);
  }
  return BasisSpec(n, m, std::move(terms));
}

std::string BasisSpec::name(std::size_t l) const {
  const auto& e = terms_.at(l);
  std::string s;
  for (std::size_t k = 0; k < e.size(); ++k) {
    if (e[k] == 0) continue;
    if (!s.empty()) s += '*';
    s += k < n_ ? "x" + std::to_string(k + 1) : "u" + std::to_string(k - n_ + 1);
    if (e[k] > 1) s += "^" + std::to_string(e[k]);
  }
  return s.empty() ? "1" : s;
}

std::vector<std::string> BasisSpec::names() const {
  std::vector<std::string> out;
  for (std::size_t l = 0; l < size(); ++l) out.push_back(name(l));
  return out;
}

unsigned BasisSpec::degree() const {
  unsigned d = 0;
  for (const auto& e : terms_) d = std::max(d, std::accumulate(e.begin(), e.end(), 0U));
  return d;
}

unsigned BasisSpec::state_degree() const {
  unsigned d = 0;
  for (const auto& e : terms_) {
    d = std::max(d, std::accumulate(e.begin(), e.begin() + static_cast<std::ptrdiff_t>(n_), 0U));
  }
  return d;
}

std::optional<std::size_t> BasisSpec::constant_index() const {
  for (std::size_t l = 0; l < terms_.size(); ++l) {
    if (std::all_of(terms_[l].begin(), terms_[l].end(), [](unsigned p) { return p == 0; })) return l;
  }
  return std::nullopt;
}

void BasisSpec::eval(VecView x, VecView u, std::span<double> out) const {
  check_dim(x, n_, "eval_basis: state");
  check_dim(u, m_, "eval_basis: input");
  check_dim(out, terms_.size(), "eval_basis: output");
  for (std::size_t l = 0; l < terms_.size(); ++l) {
    double v = 1.0;
    const auto& e = terms_[l];
    for (std::size_t k = 0; k < e.size(); ++k) {
      const double base = k < n_ ? x[k] : u[k - n_];
      for (unsigned p = 0; p < e[k]; ++p) v *= base;
    }
    out[l] = v;
  }
}

Vec eval_basis(const BasisSpec& spec, VecView x, VecView u) {
  Vec out(spec.size());
  spec.eval(x, u, out);
  return out;
}

Vec ScpSolution::reported_q(double threshold) const {
  Vec out = q;
  for (auto& v : out) {
    if (std::abs(v) < threshold) v = 0.0;
  }
  return out;
}

ScpSolution solve_scp(const SampleSet& samples, std::size_t dim, const BasisSpec& spec,
                      const ScpOptions& options) {
  if (samples.empty()) throw UsageError("solve_scp: no samples");
  if (dim >= samples.n()) throw UsageError("solve_scp: dimension out of range");
  if (spec.n() != samples.n() || spec.m() != samples.m()) {
    throw UsageError("solve_scp: basis dimensions do not match the data");
  }
  const std::size_t z = spec.size();
  const std::size_t count = samples.size();

  // basis rows + residuals, then merge identical rows keeping the largest residual
  std::vector<double> p(count * z);
  std::vector<double> d(count);
  for (std::size_t k = 0; k < count; ++k) {
    const auto rec = samples[k];
    spec.eval(rec.x, rec.u, std::span<double>(p).subspan(k * z, z));
    d[k] = samples.residual(k, dim);
  }
  std::vector<std::size_t> order(count);
  std::iota(order.begin(), order.end(), 0);
  auto row_less = [&](std::size_t a, std::size_t b) {
    return std::lexicographical_compare(p.begin() + static_cast<std::ptrdiff_t>(a * z),
                                        p.begin() + static_cast<std::ptrdiff_t>((a + 1) * z),
                                        p.begin() + static_cast<std::ptrdiff_t>(b * z),
                                        p.begin() + static_cast<std::ptrdiff_t>((b + 1) * z));
  };
  std::stable_sort(order.begin(), order.end(), row_less);
  std::vector<std::size_t> unique_rows;
  std::vector<double> unique_d;
  for (std::size_t k : order) {
    if (!unique_rows.empty() && !row_less(unique_rows.back(), k)) {
      unique_d.back() = std::max(unique_d.back(), d[k]);
      continue;
    }
    unique_rows.push_back(k);
    unique_d.push_back(d[k]);
  }
  const std::size_t rows = unique_rows.size();

  // variables (q_1..q_z, eta); rows: q^T p - eta <= 0 and -q^T p <= -d
  InequalityLp lp;
  lp.g = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(2 * rows), static_cast<Eigen::Index>(z + 1));
  lp.h = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(2 * rows));
  lp.c = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(z + 1));
  lp.c(static_cast<Eigen::Index>(z)) = 1.0;
  for (std::size_t r = 0; r < rows; ++r) {
    const auto i = static_cast<Eigen::Index>(r);
    const auto j = static_cast<Eigen::Index>(rows + r);
    for (std::size_t l = 0; l < z; ++l) {
      const double v = p[unique_rows[r] * z + l];
      lp.g(i, static_cast<Eigen::Index>(l)) = v;
      lp.g(j, static_cast<Eigen::Index>(l)) = -v;
    }
    lp.g(i, static_cast<Eigen::Index>(z)) = -1.0;
    lp.h(j) = -unique_d[r];
  }

  const LpResult res = solve_inequality_lp(lp, options.simplex);
  if (res.status == LpStatus::infeasible) {
    if (!spec.constant_index()) {
      throw ConfigError("solve_scp: no q satisfies the data for dimension " +
                        std::to_string(dim + 1) +
                        "; the basis has no constant term, add \"1\" to it");
    }
    throw SolverError("solve_scp: LP reported infeasible despite a constant term");
  }
  if (res.status != LpStatus::optimal) {
    throw SolverError("solve_scp: simplex stopped with status " + to_string(res.status) +
                      " after " + std::to_string(res.iterations) + " iterations (" +
                      std::to_string(rows) + " unique rows, " + std::to_string(z) + " terms)");
  }

  ScpSolution sol;
  sol.dim = dim;
  sol.basis = spec;
  sol.q.assign(res.x.data(), res.x.data() + z);
  sol.eta_lp = res.x(static_cast<Eigen::Index>(z));
  sol.tol = options.tol;
  sol.samples = count;
  sol.dedup_count = count - rows;
  sol.iterations = res.iterations;

  double eta = -std::numeric_limits<double>::infinity();
  double violation = -std::numeric_limits<double>::infinity();
  std::vector<double> fitted(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    double v = 0.0;
    for (std::size_t l = 0; l < z; ++l) v += sol.q[l] * p[unique_rows[r] * z + l];
    fitted[r] = v;
    eta = std::max(eta, v);
    violation = std::max(violation, unique_d[r] - v);
  }
  sol.eta = eta;
  sol.max_violation = violation;
  for (std::size_t r = 0; r < rows; ++r) {
    if (fitted[r] - unique_d[r] <= options.tol || eta - fitted[r] <= options.tol) ++sol.active;
  }
  if (violation > options.tol) {
    throw SolverError("solve_scp: solution violates a data constraint by " +
                      std::to_string(violation) + " (tol " + std::to_string(options.tol) + ")");
  }
  if (std::abs(sol.eta - sol.eta_lp) > options.tol * std::max(1.0, std::abs(sol.eta))) {
    throw SolverError("solve_scp: LP optimum " + std::to_string(sol.eta_lp) +
                      " disagrees with re-evaluated max " + std::to_string(sol.eta));
  }
  return sol;
}

}  // namespace simgap
