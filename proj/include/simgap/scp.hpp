#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "simgap/lp.hpp"
#include "simgap/model.hpp"
#include "simgap/sampling.hpp"

namespace simgap {

/// Ordered monomial basis p(x, u) over the n state and m input coordinates.
///
/// Each term is an exponent vector of length n + m (states first). Terms are
/// written as products of factors such as "1", "x1", "x2^2", "x1*x2", "u1".
class BasisSpec {
 public:
  using Exponents = std::vector<unsigned>;

  BasisSpec(std::size_t n, std::size_t m, std::vector<Exponents> terms);

  static BasisSpec parse(std::size_t n, std::size_t m, const std::vector<std::string>& terms);
  /// {x_i x_j (i<=j, squares first), x_1..x_n, u_1..u_m, 1}; for n=2 this is
  /// {x1^2, x2^2, x1*x2, x1, x2, u1, 1}.
  static BasisSpec quadratic(std::size_t n, std::size_t m);
  /// {x_1..x_n, 1, u_1..u_m}.
  static BasisSpec linear(std::size_t n, std::size_t m);

  std::size_t n() const { return n_; }
  std::size_t m() const { return m_; }
  std::size_t size() const { return terms_.size(); }
  const std::vector<Exponents>& terms() const { return terms_; }
  std::string name(std::size_t l) const;
  std::vector<std::string> names() const;
  /// Maximum total degree over terms.
  unsigned degree() const;
  /// Maximum degree in the state variables alone.
  unsigned state_degree() const;
  std::optional<std::size_t> constant_index() const;

  void eval(VecView x, VecView u, std::span<double> out) const;

  friend bool operator==(const BasisSpec&, const BasisSpec&) = default;

 private:
  std::size_t n_;
  std::size_t m_;
  std::vector<Exponents> terms_;
};

Vec eval_basis(const BasisSpec& spec, VecView x, VecView u);

struct ScpOptions {
  /// Feasibility / optimality tolerance asserted after the solve.
  double tol = 1e-9;
  SimplexOptions simplex;
};

struct ScpSolution {
  std::size_t dim = 0;
  BasisSpec basis{1, 1, {{0, 0}}};
  Vec q;
  /// max_r q^T p(x_r, u) over the data (the optimal eta of the program).
  double eta = 0.0;
  /// eta as returned by the LP before re-evaluation.
  double eta_lp = 0.0;
  double tol = 1e-9;
  std::size_t samples = 0;
  std::size_t dedup_count = 0;
  /// Rows with a tight constraint (either side) within tol.
  std::size_t active = 0;
  /// max_r (|fhat_i - f_i| - q^T p) ; <= tol by construction.
  double max_violation = 0.0;
  std::size_t iterations = 0;

  /// q with entries below 1e-6 in magnitude shown as zero.
  Vec reported_q(double threshold = 1e-6) const;
};

/// Solves, for state coordinate `dim`,
///   min eta  s.t.  q^T p(x_r,u) <= eta,  |fhat_i - f_i|(x_r,u) <= q^T p(x_r,u)
/// over every record of the data set. Rows with identical basis vectors are
/// merged (keeping the largest residual) before solving.
ScpSolution solve_scp(const SampleSet& samples, std::size_t dim, const BasisSpec& spec,
                      const ScpOptions& options = {});

}  // namespace simgap
