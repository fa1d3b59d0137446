#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace simgap {

using Vec = std::vector<double>;
using VecView = std::span<const double>;

/// Axis-aligned hyper-rectangle with lower[j] < upper[j].
class StateBox {
 public:
  StateBox(Vec lower, Vec upper);

  std::size_t dim() const { return lower_.size(); }
  const Vec& lower() const { return lower_; }
  const Vec& upper() const { return upper_; }
  double lower(std::size_t j) const { return lower_[j]; }
  double upper(std::size_t j) const { return upper_[j]; }
  double width(std::size_t j) const { return upper_[j] - lower_[j]; }
  Vec center() const;

  /// Closed-set membership.
  bool contains(VecView x) const;
  bool contains(const StateBox& other) const;
  bool contains(VecView lo, VecView hi) const;
  bool intersects(VecView lo, VecView hi) const;

  /// All 2^n corners, dimension 0 varying fastest.
  std::vector<Vec> vertices() const;

  friend bool operator==(const StateBox&, const StateBox&) = default;

 private:
  Vec lower_;
  Vec upper_;
};

/// Finite input set U, kept in a fixed order; the order defines input indices.
class InputGrid {
 public:
  explicit InputGrid(std::vector<Vec> points);

  /// Cartesian product of per-axis lattices lo, lo+step, ..., hi
  /// (dimension 0 varying fastest). Values are snapped to 1e-12 so that
  /// nominal grid points such as 0 are exact.
  static InputGrid lattice(VecView lo, VecView hi, VecView step);

  std::size_t size() const { return points_.size(); }
  std::size_t dim() const { return points_.front().size(); }
  const Vec& operator[](std::size_t i) const { return points_[i]; }
  const std::vector<Vec>& points() const { return points_; }
  std::optional<std::size_t> index_of(VecView u) const;
  /// Per-coordinate max |u_k| over the set.
  Vec abs_max() const;

 private:
  std::vector<Vec> points_;
};

enum class ModelKind { pendulum, unicycle, affine_test };

std::string to_string(ModelKind kind);
ModelKind parse_model_kind(const std::string& name);

/// Known discrete-time map x(k+1) = f(x(k), u(k)).
class NominalModel {
 public:
  /// Inverted/hanging pendulum; defaults are the lab-scale values m=1, g=9.81, l=1, tau=0.005.
  static NominalModel pendulum(double tau = 0.005, double mass = 1.0,
                               double gravity = 9.81, double length = 1.0);
  static NominalModel unicycle(double tau = 0.01);
  /// x' = A x + B u.
  static NominalModel affine(Eigen::MatrixXd a, Eigen::MatrixXd b, double tau = 1.0);

  ModelKind kind() const { return kind_; }
  std::size_t n() const { return n_; }
  std::size_t m() const { return m_; }
  double tau() const { return tau_; }
  const std::map<std::string, double>& params() const { return params_; }
  double param(const std::string& name) const;
  const Eigen::MatrixXd& a() const { return a_; }
  const Eigen::MatrixXd& b() const { return b_; }

  Vec step(VecView x, VecView u) const;
  void step(VecView x, VecView u, std::span<double> out) const;

  /// State coordinates that are angles; closed-loop runs wrap them to [-pi, pi).
  std::vector<std::size_t> angle_dims() const;

  /// Stable textual description used for hashing and metadata.
  std::string descriptor() const;

 private:
  NominalModel(ModelKind kind, std::size_t n, std::size_t m, double tau);

  ModelKind kind_;
  std::size_t n_;
  std::size_t m_;
  double tau_;
  std::map<std::string, double> params_;
  Eigen::MatrixXd a_;
  Eigen::MatrixXd b_;
};

/// Entrywise bound K with |f_i(x,u) - f_i(c,u)| <= sum_j K(i,j) |x_j - c_j|
/// for all x, c in `box` and u in `inputs`.
Eigen::MatrixXd jacobian_bound(const NominalModel& model, const StateBox& box,
                               const InputGrid& inputs);

/// Wraps an angle to [-pi, pi).
double wrap_angle(double a);

void check_dim(VecView v, std::size_t expected, const char* what);

}  // namespace simgap
