#include "simgap/lp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "simgap/error.hpp"

namespace simgap {

std::string to_string(LpStatus status) {
  switch (status) {
    case LpStatus::optimal: return "optimal";
    case LpStatus::infeasible: return "infeasible";
    case LpStatus::unbounded: return "unbounded";
    case LpStatus::iteration_limit: return "iteration_limit";
  }
  return "unknown";
}

namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

enum class PhaseResult { optimal, unbounded, iteration_limit };

class Tableau {
 public:
  Tableau(const StandardLp& lp, const SimplexOptions& options)
      : opt_(options),
        rows_(lp.a.rows()),
        vars_(lp.a.cols()),
        t_(rows_, vars_ + rows_),
        rhs_(lp.b),
        sign_(Eigen::VectorXd::Ones(rows_)),
        basis_(static_cast<std::size_t>(rows_)) {
    t_.leftCols(vars_) = lp.a;
    t_.rightCols(rows_).setIdentity();
    for (Eigen::Index i = 0; i < rows_; ++i) {
      if (rhs_(i) < 0) {
        t_.row(i).head(vars_) *= -1.0;
        rhs_(i) = -rhs_(i);
        sign_(i) = -1.0;
      }
      basis_[static_cast<std::size_t>(i)] = vars_ + i;
    }
  }

  Eigen::Index rows() const { return rows_; }
  Eigen::Index vars() const { return vars_; }
  std::size_t iterations() const { return iterations_; }

  /// Loads reduced costs for cost vector `cost` (length vars + rows).
  void set_costs(const Eigen::VectorXd& cost) {
    cost_ = cost;
    d_ = cost;
    z_ = 0.0;
    for (Eigen::Index i = 0; i < rows_; ++i) {
      const double cb = cost(basis_[static_cast<std::size_t>(i)]);
      if (cb != 0.0) {
        d_.noalias() -= cb * t_.row(i).transpose();
        z_ += cb * rhs_(i);
      }
    }
  }

  double objective() const { return z_; }

  PhaseResult run(bool allow_artificial) {
    bool bland = opt_.pricing == PricingRule::bland;
    std::size_t degenerate = 0;
    const Eigen::Index limit = allow_artificial ? vars_ + rows_ : vars_;
    const double scale = std::max(1.0, cost_.cwiseAbs().maxCoeff());
    const double dtol = opt_.cost_tol * scale;
    for (;;) {
      if (iterations_ >= opt_.max_iterations) return PhaseResult::iteration_limit;
      Eigen::Index q = -1;
      if (bland) {
        for (Eigen::Index j = 0; j < limit; ++j) {
          if (d_(j) < -dtol) {
            q = j;
            break;
          }
        }
      } else {
        double best = -dtol;
        for (Eigen::Index j = 0; j < limit; ++j) {
          if (d_(j) < best) {
            best = d_(j);
            q = j;
          }
        }
      }
      if (q < 0) return PhaseResult::optimal;

      Eigen::Index p = -1;
      double best_ratio = std::numeric_limits<double>::infinity();
      for (Eigen::Index i = 0; i < rows_; ++i) {
        const double a = t_(i, q);
        if (a <= opt_.pivot_tol) continue;
        const double ratio = rhs_(i) / a;
        if (ratio < best_ratio - 1e-15 ||
            (ratio <= best_ratio + 1e-15 && p >= 0 &&
             basis_[static_cast<std::size_t>(i)] < basis_[static_cast<std::size_t>(p)])) {
          best_ratio = std::min(best_ratio, ratio);
          p = i;
        }
      }
      if (p < 0) return PhaseResult::unbounded;
      if (best_ratio <= 0.0) {
        if (++degenerate >= opt_.degenerate_run) bland = true;
      } else {
        degenerate = 0;
      }
      pivot(p, q);
      ++iterations_;
    }
  }

  void pivot(Eigen::Index p, Eigen::Index q) {
    const double a = t_(p, q);
    t_.row(p) /= a;
    rhs_(p) /= a;
    t_(p, q) = 1.0;
    for (Eigen::Index i = 0; i < rows_; ++i) {
      if (i == p) continue;
      const double f = t_(i, q);
      if (f == 0.0) continue;
      t_.row(i).noalias() -= f * t_.row(p);
      rhs_(i) -= f * rhs_(p);
      t_(i, q) = 0.0;
      if (rhs_(i) < 0.0 && rhs_(i) > -1e-13) rhs_(i) = 0.0;
    }
    const double dq = d_(q);
    if (dq != 0.0) {
      d_.noalias() -= dq * t_.row(p).transpose();
      z_ += dq * rhs_(p);
      d_(q) = 0.0;
    }
    basis_[static_cast<std::size_t>(p)] = q;
  }

  /// Pivots zero-level artificial variables out of the basis where possible.
  void drive_out_artificials() {
    for (Eigen::Index i = 0; i < rows_; ++i) {
      if (basis_[static_cast<std::size_t>(i)] < vars_) continue;
      Eigen::Index best = -1;
      double best_abs = opt_.pivot_tol;
      for (Eigen::Index j = 0; j < vars_; ++j) {
        if (std::abs(t_(i, j)) > best_abs) {
          best_abs = std::abs(t_(i, j));
          best = j;
        }
      }
      if (best >= 0) pivot(i, best);
    }
  }

  Eigen::VectorXd solution() const {
    Eigen::VectorXd x = Eigen::VectorXd::Zero(vars_);
    for (Eigen::Index i = 0; i < rows_; ++i) {
      const Eigen::Index b = basis_[static_cast<std::size_t>(i)];
      if (b < vars_) x(b) = rhs_(i);
    }
    return x;
  }

  Eigen::VectorXd duals() const {
    Eigen::VectorXd y = Eigen::VectorXd::Zero(rows_);
    for (Eigen::Index i = 0; i < rows_; ++i) {
      const double cb = cost_(basis_[static_cast<std::size_t>(i)]);
      if (cb != 0.0) y.noalias() += cb * t_.row(i).tail(rows_).transpose();
    }
    return y.cwiseProduct(sign_);
  }

 private:
  SimplexOptions opt_;
  Eigen::Index rows_;
  Eigen::Index vars_;
  RowMatrix t_;
  Eigen::VectorXd rhs_;
  Eigen::VectorXd sign_;
  std::vector<Eigen::Index> basis_;
  Eigen::VectorXd cost_;
  Eigen::VectorXd d_;
  double z_ = 0.0;
  std::size_t iterations_ = 0;
};

}  // namespace

LpResult simplex(const StandardLp& lp, const SimplexOptions& options) {
  if (lp.a.rows() != lp.b.size() || lp.a.cols() != lp.c.size()) {
    throw UsageError("simplex: inconsistent LP dimensions");
  }
  LpResult result;
  Tableau tab(lp, options);
  const Eigen::Index n = tab.vars();
  const Eigen::Index m = tab.rows();

  Eigen::VectorXd phase1 = Eigen::VectorXd::Zero(n + m);
  phase1.tail(m).setOnes();
  tab.set_costs(phase1);
  const PhaseResult r1 = tab.run(false);
  result.iterations = tab.iterations();
  if (r1 == PhaseResult::iteration_limit) {
    result.status = LpStatus::iteration_limit;
    return result;
  }
  const double bscale = std::max(1.0, lp.b.size() ? lp.b.cwiseAbs().maxCoeff() : 0.0);
  if (tab.objective() > options.feasibility_tol * bscale) {
    result.status = LpStatus::infeasible;
    return result;
  }
  tab.drive_out_artificials();

  Eigen::VectorXd phase2 = Eigen::VectorXd::Zero(n + m);
  phase2.head(n) = lp.c;
  tab.set_costs(phase2);
  const PhaseResult r2 = tab.run(false);
  result.iterations = tab.iterations();
  if (r2 == PhaseResult::iteration_limit) {
    result.status = LpStatus::iteration_limit;
    return result;
  }
  if (r2 == PhaseResult::unbounded) {
    result.status = LpStatus::unbounded;
    return result;
  }
  result.status = LpStatus::optimal;
  result.x = tab.solution();
  result.value = lp.c.dot(result.x);
  result.duals = tab.duals();
  return result;
}

LpResult solve_inequality_lp(const InequalityLp& lp, const SimplexOptions& options) {
  if (lp.g.rows() != lp.h.size() || lp.g.cols() != lp.c.size()) {
    throw UsageError("solve_inequality_lp: inconsistent LP dimensions");
  }
  StandardLp dual{lp.g.transpose(), -lp.c, lp.h};
  LpResult d = simplex(dual, options);
  LpResult out;
  out.iterations = d.iterations;
  switch (d.status) {
    case LpStatus::optimal:
      out.status = LpStatus::optimal;
      out.x = d.duals;
      out.value = lp.c.dot(out.x);
      out.duals = d.x;
      break;
    case LpStatus::unbounded:
      out.status = LpStatus::infeasible;
      break;
    case LpStatus::infeasible:
      out.status = LpStatus::unbounded;
      break;
    case LpStatus::iteration_limit:
      out.status = LpStatus::iteration_limit;
      break;
  }
  return out;
}

namespace {

struct VertexSearch {
  bool found = false;
  double value = std::numeric_limits<double>::infinity();
  Eigen::VectorXd x;
};

VertexSearch enumerate_vertices(const InequalityLp& lp, double box) {
  const Eigen::Index n = lp.g.cols();
  const Eigen::Index k0 = lp.g.rows();
  Eigen::MatrixXd g(k0 + 2 * n, n);
  Eigen::VectorXd h(k0 + 2 * n);
  g.topRows(k0) = lp.g;
  h.head(k0) = lp.h;
  g.block(k0, 0, n, n) = Eigen::MatrixXd::Identity(n, n);
  g.block(k0 + n, 0, n, n) = -Eigen::MatrixXd::Identity(n, n);
  h.tail(2 * n).setConstant(box);
  const Eigen::Index k = g.rows();

  VertexSearch best;
  std::vector<Eigen::Index> idx(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) idx[static_cast<std::size_t>(i)] = i;
  Eigen::MatrixXd sub(n, n);
  Eigen::VectorXd rhs(n);
  for (;;) {
    for (Eigen::Index r = 0; r < n; ++r) {
      sub.row(r) = g.row(idx[static_cast<std::size_t>(r)]);
      rhs(r) = h(idx[static_cast<std::size_t>(r)]);
    }
    Eigen::FullPivLU<Eigen::MatrixXd> lu(sub);
    if (lu.rank() == n) {
      const Eigen::VectorXd x = lu.solve(rhs);
      const Eigen::VectorXd slack = h - g * x;
      const double tol = 1e-9 * (1.0 + x.cwiseAbs().maxCoeff());
      if (slack.minCoeff() >= -tol) {
        const double v = lp.c.dot(x);
        if (!best.found || v < best.value) {
          best.found = true;
          best.value = v;
          best.x = x;
        }
      }
    }
    // next n-combination of k rows
    Eigen::Index pos = n - 1;
    while (pos >= 0 && idx[static_cast<std::size_t>(pos)] == k - n + pos) --pos;
    if (pos < 0) break;
    ++idx[static_cast<std::size_t>(pos)];
    for (Eigen::Index r = pos + 1; r < n; ++r) {
      idx[static_cast<std::size_t>(r)] = idx[static_cast<std::size_t>(r - 1)] + 1;
    }
  }
  return best;
}

double binomial(double k, double n) {
  double c = 1.0;
  for (double i = 0; i < n; ++i) c = c * (k - i) / (i + 1.0);
  return c;
}

}  // namespace

LpResult lp_oracle(const InequalityLp& lp, double box) {
  if (lp.g.rows() != lp.h.size() || lp.g.cols() != lp.c.size() || lp.g.cols() == 0) {
    throw UsageError("lp_oracle: inconsistent LP dimensions");
  }
  const double combos = binomial(static_cast<double>(lp.g.rows() + 2 * lp.g.cols()),
                                 static_cast<double>(lp.g.cols()));
  if (combos > 2e7) throw UsageError("lp_oracle: instance too large for vertex enumeration");

  LpResult out;
  const VertexSearch first = enumerate_vertices(lp, box);
  if (!first.found) {
    out.status = LpStatus::infeasible;
    return out;
  }
  const VertexSearch wider = enumerate_vertices(lp, 2.0 * box);
  if (wider.value < first.value - 1e-9 * (1.0 + std::abs(first.value))) {
    out.status = LpStatus::unbounded;
    return out;
  }
  out.status = LpStatus::optimal;
  out.value = first.value;
  out.x = first.x;
  return out;
}

}  // namespace simgap
