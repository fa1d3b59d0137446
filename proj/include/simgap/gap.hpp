#pragma once

#include <atomic>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "simgap/lipschitz.hpp"
#include "simgap/model.hpp"
#include "simgap/oracle.hpp"
#include "simgap/scp.hpp"

namespace simgap {

/// One coordinate of the gap: gamma_i(x,u) = q^T p(x,u) + (L1 + L2) * epsilon.
struct GapComponent {
  BasisSpec basis{1, 1, {{0, 0}}};
  Vec q;
  double eta = 0.0;
  LipschitzEstimate l1;
  LipschitzEstimate l2;
  std::string solution_hash;

  double lipschitz() const { return l1.value + l2.value; }
};

class GapModel {
 public:
  GapModel(double epsilon, StateBox domain, InputGrid inputs, std::vector<GapComponent> components);

  std::size_t n() const { return components_.size(); }
  double epsilon() const { return epsilon_; }
  const StateBox& domain() const { return domain_; }
  const InputGrid& inputs() const { return inputs_; }
  const std::vector<GapComponent>& components() const { return components_; }
  const GapComponent& component(std::size_t i) const { return components_[i]; }

  /// Constant part of gamma_i: q's constant coefficient plus L * epsilon.
  double const_total(std::size_t i) const;

  /// gamma_i without domain checks or bookkeeping.
  double gamma(std::size_t i, VecView x, VecView u) const;

  /// All components; throws DomainError outside the domain. Negative values are
  /// returned unchanged and counted.
  Vec eval(VecView x, VecView u) const;
  std::uint64_t negative_count() const { return negatives_->load(); }

  /// Same q and L at another covering radius.
  GapModel with_epsilon(double epsilon) const;

  std::string dataset_hash;

 private:
  double epsilon_;
  StateBox domain_;
  InputGrid inputs_;
  std::vector<GapComponent> components_;
  std::shared_ptr<std::atomic<std::uint64_t>> negatives_;
};

/// Builds the gap from per-dimension solutions and Lipschitz constants. Throws
/// ConfigError when `epsilon` differs from the dataset's covering radius.
GapModel assemble(const std::vector<ScpSolution>& solutions,
                  const std::vector<LipschitzEstimate>& l1,
                  const std::vector<LipschitzEstimate>& l2, double epsilon,
                  double dataset_epsilon, const StateBox& domain, const InputGrid& inputs);

/// eval_gamma(gap, x, u).
inline Vec eval_gamma(const GapModel& gap, VecView x, VecView u) { return gap.eval(x, u); }

struct SupGammaOptions {
  /// Points per axis for the dense-grid fallback (state degree above 2).
  std::size_t fallback_resolution = 201;
};

struct SupGamma {
  Vec value;
  /// Maximizers per dimension.
  std::vector<Vec> argmax_x;
  std::vector<std::size_t> argmax_u;
  /// False when the dense-grid fallback was used; `slack` is then added to value.
  bool exact = true;
  Vec slack;
};

/// Per-dimension maximum of gamma_i over region x U (or region x {u} when
/// `input` is given). Exact for bases of state degree <= 2: every face of the
/// region is searched for a stationary point of the quadratic.
SupGamma sup_gamma(const GapModel& gap, const StateBox& region,
                   std::optional<std::size_t> input = std::nullopt,
                   const SupGammaOptions& options = {});

struct ValidateOptions {
  std::size_t trials = 10'000;
  std::uint64_t seed = 7;
  unsigned jobs = 1;
  std::size_t histogram_bins = 20;
};

struct ValidationReport {
  std::size_t trials = 0;
  std::uint64_t seed = 0;
  std::size_t violations = 0;
  std::vector<std::size_t> violations_per_dim;
  /// min over trials of gamma_i - |fhat_i - f_i|, per dimension.
  Vec worst_margin;
  std::vector<Vec> worst_x;
  std::vector<std::size_t> worst_u;
  /// Tightness gamma_i - |fhat_i - f_i|: histogram over [hist_lo_i, hist_hi_i].
  std::vector<std::vector<std::size_t>> histogram;
  Vec hist_lo;
  Vec hist_hi;
  std::uint64_t negative_gamma = 0;
};

/// Checks |fhat_i - f_i| <= gamma_i at fresh uniform states and uniformly drawn
/// inputs. The trials are split into fixed chunks with their own seeds, so the
/// report does not depend on the number of jobs.
ValidationReport validate(const GapModel& gap, const NominalModel& model, const Oracle& oracle,
                          const ValidateOptions& options);

}  // namespace simgap
