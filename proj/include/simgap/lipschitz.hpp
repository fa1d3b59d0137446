#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>

#include "simgap/model.hpp"
#include "simgap/oracle.hpp"
#include "simgap/scp.hpp"

namespace simgap {

enum class LipschitzMethod { max_slope, extreme_value, analytic };

std::string to_string(LipschitzMethod method);

/// Three-parameter reverse Weibull, F(y) = exp(-((location - y) / scale)^shape), y < location.
struct ReverseWeibullFit {
  double location = 0.0;
  double scale = 0.0;
  double shape = 0.0;
  double log_likelihood = 0.0;
};

/// Maximum-likelihood fit (profile likelihood over the location). Returns
/// nullopt when the sample is degenerate or the endpoint is not identifiable.
std::optional<ReverseWeibullFit> fit_reverse_weibull(std::span<const double> maxima);

struct LipschitzEstimate {
  double value = 0.0;
  LipschitzMethod method = LipschitzMethod::analytic;
  double inflation = 1.0;
  std::size_t pair_count = 0;
  double max_observed_slope = 0.0;
  std::uint64_t seed = 0;
  /// Number of inputs whose extreme-value fit failed and fell back to max slope.
  std::size_t fallbacks = 0;
  /// Fit of the input that attained the maximum, if any.
  std::optional<ReverseWeibullFit> fit;
};

struct LipschitzOptions {
  /// Random pairs per input (J).
  std::size_t pairs = 10'000;
  /// Maximum pair distance; pairs satisfy 0 < |x - x'| <= pair_radius.
  double pair_radius = 0.02;
  double inflation = 1.1;
  std::uint64_t seed = 1;
  std::size_t block_size = 100;
  unsigned jobs = 1;
};

/// g(x, u) for fixed u; instances are used by one thread at a time.
using ScalarField = std::function<double(VecView x, VecView u)>;
/// Produces an independent field per worker.
using FieldFactory = std::function<ScalarField()>;

/// Data-driven Lipschitz constant (in x) of g over box x inputs: per input,
/// slopes of random close pairs are grouped into blocks, a reverse Weibull is
/// fitted to the block maxima and its location taken; the maximum over inputs
/// is multiplied by the inflation factor.
LipschitzEstimate estimate_lipschitz(const FieldFactory& field, const StateBox& box,
                                     const InputGrid& inputs, const LipschitzOptions& options);

/// L1 for coordinate `dim`: the Lipschitz constant of |fhat_i - f_i|.
LipschitzEstimate estimate_l1(const Oracle& oracle, const NominalModel& model, std::size_t dim,
                              const StateBox& box, const InputGrid& inputs,
                              const LipschitzOptions& options);

/// L2: sup over box x inputs of |grad_x q^T p(x, u)|, bounded by the Euclidean
/// norm of per-coordinate maxima of |d/dx_j q^T p|, which are attained at box
/// vertices since the derivatives are affine for degree <= 2.
LipschitzEstimate analytic_l2(const BasisSpec& spec, VecView q, const StateBox& box,
                              const InputGrid& inputs);

/// Gradient of q^T p with respect to x at (x, u).
Vec basis_gradient(const BasisSpec& spec, VecView q, VecView x, VecView u);

}  // namespace simgap
