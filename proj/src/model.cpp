#include "simgap/model.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include "simgap/error.hpp"
#include "simgap/util.hpp"

namespace simgap {

void check_dim(VecView v, std::size_t expected, const char* what) {
  if (v.size() != expected) {
    std::ostringstream os;
    os << what << ": expected dimension " << expected << ", got " << v.size();
    throw UsageError(os.str());
  }
}

StateBox::StateBox(Vec lower, Vec upper)
    : lower_(std::move(lower)), upper_(std::move(upper)) {
  if (lower_.empty() || lower_.size() != upper_.size()) {
    throw ConfigError("state box: lower/upper must be nonempty and of equal length");
  }
  for (std::size_t j = 0; j < lower_.size(); ++j) {
    if (!(lower_[j] < upper_[j])) {
      throw ConfigError("state box: lower[" + std::to_string(j) +
                        "] must be strictly below upper");
    }
  }
}

Vec StateBox::center() const {
  Vec c(dim());
  for (std::size_t j = 0; j < dim(); ++j) c[j] = 0.5 * (lower_[j] + upper_[j]);
  return c;
}

bool StateBox::contains(VecView x) const {
  if (x.size() != dim()) return false;
  for (std::size_t j = 0; j < dim(); ++j) {
    if (!(x[j] >= lower_[j] && x[j] <= upper_[j])) return false;
  }
  return true;
}

bool StateBox::contains(const StateBox& other) const {
  return contains(other.lower(), other.upper());
}

bool StateBox::contains(VecView lo, VecView hi) const {
  for (std::size_t j = 0; j < dim(); ++j) {
    if (!(lo[j] >= lower_[j] && hi[j] <= upper_[j])) return false;
  }
  return true;
}

bool StateBox::intersects(VecView lo, VecView hi) const {
  for (std::size_t j = 0; j < dim(); ++j) {
    if (hi[j] < lower_[j] || lo[j] > upper_[j]) return false;
  }
  return true;
}

std::vector<Vec> StateBox::vertices() const {
  const std::size_t n = dim();
  std::vector<Vec> out;
  out.reserve(std::size_t{1} << n);
  for (std::size_t mask = 0; mask < (std::size_t{1} << n); ++mask) {
    Vec v(n);
    for (std::size_t j = 0; j < n; ++j) v[j] = (mask >> j) & 1U ? upper_[j] : lower_[j];
    out.push_back(std::move(v));
  }
  return out;
}

InputGrid::InputGrid(std::vector<Vec> points) : points_(std::move(points)) {
  if (points_.empty()) throw ConfigError("input grid: empty");
  const std::size_t m = points_.front().size();
  if (m == 0) throw ConfigError("input grid: zero-dimensional points");
  for (const auto& p : points_) {
    if (p.size() != m) throw ConfigError("input grid: inconsistent point dimensions");
  }
  auto sorted = points_;
  std::sort(sorted.begin(), sorted.end());
  if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) {
    throw ConfigError("input grid: duplicate points");
  }
}

InputGrid InputGrid::lattice(VecView lo, VecView hi, VecView step) {
  if (lo.size() != hi.size() || lo.size() != step.size() || lo.empty()) {
    throw ConfigError("input lattice: lo/hi/step length mismatch");
  }
  std::vector<Vec> axes(lo.size());
  for (std::size_t k = 0; k < lo.size(); ++k) {
    if (!(step[k] > 0) || hi[k] < lo[k]) throw ConfigError("input lattice: bad axis");
    const auto count =
        static_cast<std::size_t>(std::floor((hi[k] - lo[k]) / step[k] + 1e-9)) + 1;
    for (std::size_t i = 0; i < count; ++i) {
      const double v = lo[k] + static_cast<double>(i) * step[k];
      axes[k].push_back(std::round(v * 1e12) / 1e12);
    }
  }
  std::vector<Vec> points{Vec{}};
  for (const auto& axis : axes) {
    std::vector<Vec> next;
    next.reserve(points.size() * axis.size());
    // dimension 0 fastest: outer loop over the new axis
    for (double v : axis) {
      for (const auto& p : points) {
        Vec q = p;
        q.push_back(v);
        next.push_back(std::move(q));
      }
    }
    points = std::move(next);
  }
  return InputGrid(std::move(points));
}

std::optional<std::size_t> InputGrid::index_of(VecView u) const {
  for (std::size_t i = 0; i < points_.size(); ++i) {
    if (std::equal(points_[i].begin(), points_[i].end(), u.begin(), u.end())) return i;
  }
  return std::nullopt;
}

Vec InputGrid::abs_max() const {
  Vec out(dim(), 0.0);
  for (const auto& p : points_) {
    for (std::size_t k = 0; k < p.size(); ++k) out[k] = std::max(out[k], std::abs(p[k]));
  }
  return out;
}

std::string to_string(ModelKind kind) {
  switch (kind) {
    case ModelKind::pendulum: return "pendulum";
    case ModelKind::unicycle: return "unicycle";
    case ModelKind::affine_test: return "affine-test";
  }
  return "unknown";
}

ModelKind parse_model_kind(const std::string& name) {
  if (name == "pendulum") return ModelKind::pendulum;
  if (name == "unicycle") return ModelKind::unicycle;
  if (name == "affine-test") return ModelKind::affine_test;
  throw ConfigError("unsupported model kind '" + name + "'");
}

NominalModel::NominalModel(ModelKind kind, std::size_t n, std::size_t m, double tau)
    : kind_(kind), n_(n), m_(m), tau_(tau) {
  if (!(tau > 0)) throw ConfigError("model: sampling time must be positive");
}

NominalModel NominalModel::pendulum(double tau, double mass, double gravity, double length) {
  if (!(mass > 0) || !(length > 0)) throw ConfigError("pendulum: mass and length must be positive");
  NominalModel model(ModelKind::pendulum, 2, 1, tau);
  model.params_ = {{"mass", mass}, {"gravity", gravity}, {"length", length}};
  return model;
}

NominalModel NominalModel::unicycle(double tau) {
  return NominalModel(ModelKind::unicycle, 3, 2, tau);
}

NominalModel NominalModel::affine(Eigen::MatrixXd a, Eigen::MatrixXd b, double tau) {
  if (a.rows() == 0 || a.rows() != a.cols() || b.rows() != a.rows() || b.cols() == 0) {
    throw ConfigError("affine-test: A must be square and B must have matching rows");
  }
  NominalModel model(ModelKind::affine_test, static_cast<std::size_t>(a.rows()),
                     static_cast<std::size_t>(b.cols()), tau);
  model.a_ = std::move(a);
  model.b_ = std::move(b);
  return model;
}

double NominalModel::param(const std::string& name) const {
  auto it = params_.find(name);
  if (it == params_.end()) throw ConfigError("model has no parameter '" + name + "'");
  return it->second;
}

Vec NominalModel::step(VecView x, VecView u) const {
  Vec out(n_);
  step(x, u, out);
  return out;
}

void NominalModel::step(VecView x, VecView u, std::span<double> out) const {
  check_dim(x, n_, "step: state");
  check_dim(u, m_, "step: input");
  check_dim(out, n_, "step: output");
  switch (kind_) {
    case ModelKind::pendulum: {
      const double m = params_.at("mass");
      const double g = params_.at("gravity");
      const double l = params_.at("length");
      const double x1 = x[0];
      const double x2 = x[1];
      out[0] = x1 + tau_ * x2;
      out[1] = -(3.0 * g * tau_ / (2.0 * l)) * std::sin(x1) + x2 + 3.0 * tau_ * u[0] / (m * l * l);
      break;
    }
    case ModelKind::unicycle: {
      const double theta = x[2];
      out[0] = x[0] + tau_ * u[0] * std::cos(theta);
      out[1] = x[1] + tau_ * u[0] * std::sin(theta);
      out[2] = theta + tau_ * u[1];
      break;
    }
    case ModelKind::affine_test: {
      for (std::size_t i = 0; i < n_; ++i) {
        double acc = 0.0;
        for (std::size_t j = 0; j < n_; ++j) acc += a_(i, j) * x[j];
        for (std::size_t k = 0; k < m_; ++k) acc += b_(i, k) * u[k];
        out[i] = acc;
      }
      break;
    }
  }
}

std::vector<std::size_t> NominalModel::angle_dims() const {
  if (kind_ == ModelKind::unicycle) return {2};
  return {};
}

std::string NominalModel::descriptor() const {
  std::ostringstream os;
  os << to_string(kind_) << ";n=" << n_ << ";m=" << m_ << ";tau=" << format_double(tau_);
  for (const auto& [k, v] : params_) os << ";" << k << "=" << format_double(v);
  if (kind_ == ModelKind::affine_test) {
    os << ";A=";
    for (Eigen::Index i = 0; i < a_.size(); ++i) os << format_double(a_.data()[i]) << ",";
    os << ";B=";
    for (Eigen::Index i = 0; i < b_.size(); ++i) os << format_double(b_.data()[i]) << ",";
  }
  return os.str();
}

Eigen::MatrixXd jacobian_bound(const NominalModel& model, const StateBox& box,
                               const InputGrid& inputs) {
  check_dim(box.lower(), model.n(), "jacobian_bound: box");
  const double tau = model.tau();
  switch (model.kind()) {
    case ModelKind::pendulum: {
      const double g = model.param("gravity");
      const double l = model.param("length");
      Eigen::MatrixXd k(2, 2);
      k << 1.0, tau, 3.0 * g * tau / (2.0 * l), 1.0;
      return k;
    }
    case ModelKind::unicycle: {
      const double v = inputs.abs_max()[0];
      Eigen::MatrixXd k = Eigen::MatrixXd::Identity(3, 3);
      k(0, 2) = tau * v;
      k(1, 2) = tau * v;
      return k;
    }
    case ModelKind::affine_test:
      return model.a().cwiseAbs();
  }
  throw ConfigError("jacobian_bound: unsupported model kind");
}

double wrap_angle(double a) {
  constexpr double two_pi = 2.0 * std::numbers::pi;
  double w = std::fmod(a + std::numbers::pi, two_pi);
  if (w < 0) w += two_pi;
  w -= std::numbers::pi;
  if (w >= std::numbers::pi) w -= two_pi;
  return w;
}

}  // namespace simgap
