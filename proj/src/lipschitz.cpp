#include "simgap/lipschitz.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <iostream>
#include <limits>
#include <random>
#include <thread>
#include <vector>

#include "simgap/error.hpp"

namespace simgap {

std::string to_string(LipschitzMethod method) {
  switch (method) {
    case LipschitzMethod::max_slope: return "max-slope";
    case LipschitzMethod::extreme_value: return "extreme-value";
    case LipschitzMethod::analytic: return "analytic";
  }
  return "unknown";
}

namespace {

struct ProfilePoint {
  double loglik = -std::numeric_limits<double>::infinity();
  double scale = 0.0;
  double shape = 0.0;
};

// Weibull MLE on t > 0 for fixed location. The shape equation
//   sum t^a ln t / sum t^a - 1/a - mean(ln t) = 0
// is increasing in a, so bisection on log a is safe.
ProfilePoint weibull_profile(const std::vector<double>& t) {
  const double count = static_cast<double>(t.size());
  double mean_t = 0.0;
  for (double v : t) mean_t += v;
  mean_t /= count;
  std::vector<double> lt(t.size());
  double mean_log = 0.0;
  for (std::size_t k = 0; k < t.size(); ++k) {
    lt[k] = std::log(t[k] / mean_t);
    mean_log += lt[k];
  }
  mean_log /= count;
  auto equation = [&](double a) {
    double s0 = 0.0;
    double s1 = 0.0;
    for (double l : lt) {
      const double w = std::exp(a * l);
      s0 += w;
      s1 += w * l;
    }
    return s1 / s0 - 1.0 / a - mean_log;
  };
  double lo = std::log(0.02);
  double hi = std::log(500.0);
  if (equation(std::exp(lo)) > 0 || equation(std::exp(hi)) < 0) return {};
  for (int it = 0; it < 80; ++it) {
    const double mid = 0.5 * (lo + hi);
    (equation(std::exp(mid)) > 0 ? hi : lo) = mid;
  }
  const double a = std::exp(0.5 * (lo + hi));
  double mean_pow = 0.0;
  for (double l : lt) mean_pow += std::exp(a * l);
  mean_pow /= count;
  const double log_scale_rel = std::log(mean_pow) / a;  // scale / mean_t, in logs
  ProfilePoint out;
  out.shape = a;
  out.scale = mean_t * std::exp(log_scale_rel);
  double ll = 0.0;
  const double log_scale = std::log(out.scale);
  for (std::size_t k = 0; k < t.size(); ++k) {
    const double z = std::log(t[k]) - log_scale;
    ll += std::log(a) - log_scale + (a - 1.0) * z - std::exp(a * z);
  }
  out.loglik = ll;
  return out;
}

}  // namespace

std::optional<ReverseWeibullFit> fit_reverse_weibull(std::span<const double> maxima) {
  if (maxima.size() < 3) return std::nullopt;
  const auto [mn, mx] = std::minmax_element(maxima.begin(), maxima.end());
  const double ymax = *mx;
  const double spread = ymax - *mn;
  if (!(spread > 1e-12 * std::max(std::abs(ymax), 1e-300))) return std::nullopt;

  std::vector<double> t(maxima.size());
  auto evaluate = [&](double log_delta) {
    const double loc = ymax + spread * std::exp(log_delta);
    for (std::size_t k = 0; k < maxima.size(); ++k) t[k] = loc - maxima[k];
    return weibull_profile(t);
  };

  // coarse log-grid over delta / spread in [1e-6, 1e3], then golden-section refinement
  const double lo = std::log(1e-6);
  const double hi = std::log(1e3);
  constexpr int grid = 120;
  int best = -1;
  double best_ll = -std::numeric_limits<double>::infinity();
  for (int i = 0; i <= grid; ++i) {
    const double ld = lo + (hi - lo) * i / grid;
    const ProfilePoint pp = evaluate(ld);
    if (pp.loglik > best_ll) {
      best_ll = pp.loglik;
      best = i;
    }
  }
  if (best < 0 || best == grid) return std::nullopt;
  double a = lo + (hi - lo) * std::max(0, best - 1) / grid;
  double b = lo + (hi - lo) * std::min(grid, best + 1) / grid;
  const double phi = 0.5 * (std::sqrt(5.0) - 1.0);
  double c = b - phi * (b - a);
  double d = a + phi * (b - a);
  double fc = evaluate(c).loglik;
  double fd = evaluate(d).loglik;
  for (int it = 0; it < 60; ++it) {
    if (fc > fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - phi * (b - a);
      fc = evaluate(c).loglik;
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + phi * (b - a);
      fd = evaluate(d).loglik;
    }
  }
  const double ld = 0.5 * (a + b);
  const ProfilePoint pp = evaluate(ld);
  if (!std::isfinite(pp.loglik)) return std::nullopt;
  ReverseWeibullFit fit;
  fit.location = ymax + spread * std::exp(ld);
  fit.scale = pp.scale;
  fit.shape = pp.shape;
  fit.log_likelihood = pp.loglik;
  return fit;
}

namespace {

struct PerInput {
  double value = 0.0;
  double max_slope = 0.0;
  bool fallback = false;
  std::optional<ReverseWeibullFit> fit;
};

PerInput estimate_for_input(ScalarField& g, const StateBox& box, VecView u,
                            const LipschitzOptions& opt, std::uint64_t seed) {
  const std::size_t n = box.dim();
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> normal(0.0, 1.0);
  Vec x(n), y(n), dir(n);
  std::vector<double> slopes;
  slopes.reserve(opt.pairs);
  while (slopes.size() < opt.pairs) {
    for (std::size_t j = 0; j < n; ++j) x[j] = box.lower(j) + box.width(j) * unit(rng);
    double norm = 0.0;
    for (auto& v : dir) {
      v = normal(rng);
      norm += v * v;
    }
    norm = std::sqrt(norm);
    if (norm == 0.0) continue;
    const double radius = opt.pair_radius * unit(rng);
    for (std::size_t j = 0; j < n; ++j) y[j] = x[j] + radius * dir[j] / norm;
    if (!box.contains(y)) continue;
    double dist = 0.0;
    for (std::size_t j = 0; j < n; ++j) dist += (x[j] - y[j]) * (x[j] - y[j]);
    dist = std::sqrt(dist);
    if (!(dist > 0.0)) continue;
    slopes.push_back(std::abs(g(x, u) - g(y, u)) / dist);
  }

  PerInput out;
  out.max_slope = *std::max_element(slopes.begin(), slopes.end());
  const std::size_t block = std::max<std::size_t>(1, opt.block_size);
  std::vector<double> maxima;
  for (std::size_t s = 0; s + block <= slopes.size(); s += block) {
    maxima.push_back(*std::max_element(slopes.begin() + static_cast<std::ptrdiff_t>(s),
                                       slopes.begin() + static_cast<std::ptrdiff_t>(s + block)));
  }
  out.fit = fit_reverse_weibull(maxima);
  if (out.fit) {
    out.value = std::max(out.fit->location, out.max_slope);
  } else {
    out.fallback = out.max_slope > 0.0;
    out.value = out.max_slope;
  }
  return out;
}

}  // namespace

LipschitzEstimate estimate_lipschitz(const FieldFactory& field, const StateBox& box,
                                     const InputGrid& inputs, const LipschitzOptions& options) {
  if (options.pairs < 1) throw ConfigError("lipschitz: pair budget must be positive");
  if (!(options.pair_radius > 0)) throw ConfigError("lipschitz: pair radius must be positive");
  if (!(options.inflation > 0)) throw ConfigError("lipschitz: inflation must be positive");

  const std::size_t count = inputs.size();
  std::vector<PerInput> results(count);
  std::vector<std::exception_ptr> errors(count);
  // per-input seeds derived from the base seed; independent of thread count
  std::vector<std::uint64_t> seeds(count);
  {
    std::seed_seq seq{static_cast<std::uint32_t>(options.seed),
                      static_cast<std::uint32_t>(options.seed >> 32)};
    std::vector<std::uint32_t> raw(2 * count);
    seq.generate(raw.begin(), raw.end());
    for (std::size_t i = 0; i < count; ++i) {
      seeds[i] = (static_cast<std::uint64_t>(raw[2 * i]) << 32) | raw[2 * i + 1];
    }
  }
  const unsigned jobs = std::max(1U, options.jobs);
  auto work = [&](unsigned w) {
    ScalarField g = field();
    for (std::size_t i = w; i < count; i += jobs) {
      try {
        results[i] = estimate_for_input(g, box, inputs[i], options, seeds[i]);
      } catch (...) {
        errors[i] = std::current_exception();
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

  LipschitzEstimate est;
  est.inflation = options.inflation;
  est.seed = options.seed;
  est.pair_count = options.pairs * count;
  est.method = LipschitzMethod::extreme_value;
  double best = 0.0;
  std::size_t fits = 0;
  for (const auto& r : results) {
    est.max_observed_slope = std::max(est.max_observed_slope, r.max_slope);
    if (r.fallback) ++est.fallbacks;
    if (r.fit) ++fits;
    if (r.value > best || (!est.fit && r.fit && r.value >= best)) {
      best = r.value;
      est.fit = r.fit;
    }
  }
  if (fits == 0) est.method = LipschitzMethod::max_slope;
  if (est.fallbacks > 0) {
    std::cerr << "warning: lipschitz: extreme-value fit failed for " << est.fallbacks << " of "
              << count << " inputs; used max observed slope\n";
  }
  est.value = best * options.inflation;
  return est;
}

LipschitzEstimate estimate_l1(const Oracle& oracle, const NominalModel& model, std::size_t dim,
                              const StateBox& box, const InputGrid& inputs,
                              const LipschitzOptions& options) {
  if (dim >= model.n()) throw UsageError("estimate_l1: dimension out of range");
  if (box.dim() != model.n() || inputs.dim() != model.m()) {
    throw UsageError("estimate_l1: box/input dimensions do not match the model");
  }
  FieldFactory factory = [&oracle, &model, dim]() -> ScalarField {
    std::shared_ptr<Oracle> handle = oracle.clone();
    return [handle, &model, dim](VecView x, VecView u) {
      return std::abs(handle->query(x, u)[dim] - model.step(x, u)[dim]);
    };
  };
  return estimate_lipschitz(factory, box, inputs, options);
}

Vec basis_gradient(const BasisSpec& spec, VecView q, VecView x, VecView u) {
  const std::size_t n = spec.n();
  Vec grad(n, 0.0);
  for (std::size_t l = 0; l < spec.size(); ++l) {
    if (q[l] == 0.0) continue;
    const auto& e = spec.terms()[l];
    for (std::size_t j = 0; j < n; ++j) {
      if (e[j] == 0) continue;
      double v = q[l] * e[j];
      for (std::size_t k = 0; k < e.size(); ++k) {
        const unsigned p = k == j ? e[k] - 1 : e[k];
        const double base = k < n ? x[k] : u[k - n];
        for (unsigned r = 0; r < p; ++r) v *= base;
      }
      grad[j] += v;
    }
  }
  return grad;
}

LipschitzEstimate analytic_l2(const BasisSpec& spec, VecView q, const StateBox& box,
                              const InputGrid& inputs) {
  if (spec.degree() > 2) {
    throw ConfigError("analytic_l2: basis degree " + std::to_string(spec.degree()) +
                      " is not supported (maximum 2)");
  }
  check_dim(q, spec.size(), "analytic_l2: coefficients");
  const auto vertices = box.vertices();
  Vec sup(spec.n(), 0.0);
  for (const auto& u : inputs.points()) {
    for (const auto& v : vertices) {
      const Vec g = basis_gradient(spec, q, v, u);
      for (std::size_t j = 0; j < g.size(); ++j) sup[j] = std::max(sup[j], std::abs(g[j]));
    }
  }
  double norm = 0.0;
  for (double s : sup) norm += s * s;
  LipschitzEstimate est;
  est.value = std::sqrt(norm);
  est.method = LipschitzMethod::analytic;
  est.inflation = 1.0;
  return est;
}

}  // namespace simgap
