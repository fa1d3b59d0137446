#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "simgap/error.hpp"
#include "simgap/lp.hpp"
#include "simgap/scp.hpp"
#include "test_support.hpp"

namespace simgap {
namespace {

// 1-D data set with the given (x, |residual|) rows; f = 0, fhat = residual.
SampleSet toy_samples(const std::vector<std::pair<double, double>>& rows) {
  SampleSet s(1, 1);
  std::size_t r = 0;
  for (const auto& [x, d] : rows) {
    const Vec xv{x}, u{0.0}, f{0.0}, fhat{d};
    s.add(r++, 0, xv, u, f, fhat);
  }
  return s;
}

TEST(Basis, EvalSimpleMonomials) {
  const auto b = BasisSpec::parse(2, 1, {"1", "x1", "x2^2"});
  const Vec p = eval_basis(b, Vec{2.0, 3.0}, Vec{0.0});
  EXPECT_EQ(p, (Vec{1.0, 2.0, 9.0}));
}

TEST(Basis, PendulumQuadratic) {
  const auto b = BasisSpec::quadratic(2, 1);
  EXPECT_EQ(b.names(), (std::vector<std::string>{"x1^2", "x2^2", "x1*x2", "x1", "x2", "u1", "1"}));
  const Vec p = eval_basis(b, Vec{0.1, 0.2}, Vec{1.0});
  const Vec want{0.01, 0.04, 0.02, 0.1, 0.2, 1.0, 1.0};
  ASSERT_EQ(p.size(), want.size());
  for (std::size_t l = 0; l < p.size(); ++l) EXPECT_NEAR(p[l], want[l], 1e-16);
}

TEST(Basis, OriginGivesOnlyConstant) {
  for (const auto& b : {BasisSpec::quadratic(3, 2), BasisSpec::linear(3, 2)}) {
    const Vec p = eval_basis(b, Vec{0, 0, 0}, Vec{0, 0});
    const auto c = b.constant_index();
    ASSERT_TRUE(c);
    for (std::size_t l = 0; l < p.size(); ++l) EXPECT_EQ(p[l], l == *c ? 1.0 : 0.0);
  }
}

TEST(Basis, ParseRoundTripAndErrors) {
  const auto b = BasisSpec::quadratic(2, 1);
  EXPECT_EQ(BasisSpec::parse(2, 1, b.names()), b);
  EXPECT_EQ(b.degree(), 2U);
  EXPECT_EQ(b.state_degree(), 2U);
  EXPECT_THROW(BasisSpec::parse(2, 1, {"x3"}), ConfigError);
  EXPECT_THROW(BasisSpec::parse(2, 1, {"y1"}), ConfigError);
}

TEST(Scp, ConstantBasisIsMaxResidual) {
  const auto s = toy_samples({{0.0, 0.1}, {1.0, 0.3}});
  const auto sol = solve_scp(s, 0, BasisSpec::parse(1, 1, {"1"}));
  ASSERT_EQ(sol.q.size(), 1U);
  EXPECT_NEAR(sol.q[0], 0.3, 1e-12);
  EXPECT_NEAR(sol.eta, 0.3, 1e-12);
}

TEST(Scp, AffineBasisHandExample) {
  const auto s = toy_samples({{0.0, 0.1}, {1.0, 0.3}});
  const auto sol = solve_scp(s, 0, BasisSpec::parse(1, 1, {"1", "x1"}));
  EXPECT_NEAR(sol.eta, 0.3, 1e-12);
  // feasibility at both samples
  EXPECT_GE(sol.q[0] + 1e-12, 0.1);
  EXPECT_GE(sol.q[0] + sol.q[1] + 1e-12, 0.3);
  EXPECT_LE(sol.max_violation, sol.tol);
}

TEST(Scp, HandExampleMatchesVertexEnumeration) {
  // variables (q0, q1, eta); rows q^T p - eta <= 0 and -q^T p <= -|d|
  InequalityLp lp;
  lp.g.resize(4, 3);
  lp.g << 1, 0, -1, 1, 1, -1, -1, 0, 0, -1, -1, 0;
  lp.h.resize(4);
  lp.h << 0, 0, -0.1, -0.3;
  lp.c.resize(3);
  lp.c << 0, 0, 1;
  const auto ref = lp_oracle(lp);
  ASSERT_EQ(ref.status, LpStatus::optimal);
  EXPECT_NEAR(ref.value, 0.3, 1e-12);
  const auto got = solve_inequality_lp(lp);
  ASSERT_EQ(got.status, LpStatus::optimal);
  EXPECT_NEAR(got.value, 0.3, 1e-12);
}

TEST(Lp, TrivialNonnegativeEta) {
  // min eta s.t. -eta <= 0
  InequalityLp lp;
  lp.g = Eigen::MatrixXd::Constant(1, 1, -1.0);
  lp.h = Eigen::VectorXd::Zero(1);
  lp.c = Eigen::VectorXd::Ones(1);
  EXPECT_NEAR(solve_inequality_lp(lp).value, 0.0, 1e-15);
  EXPECT_NEAR(lp_oracle(lp).value, 0.0, 1e-15);
}

TEST(Lp, DetectsInfeasibleAndUnbounded) {
  InequalityLp inf;
  inf.g.resize(2, 1);
  inf.g << 1, -1;
  inf.h.resize(2);
  inf.h << -1, -1;  // x <= -1 and x >= 1
  inf.c = Eigen::VectorXd::Ones(1);
  EXPECT_EQ(solve_inequality_lp(inf).status, LpStatus::infeasible);
  EXPECT_EQ(lp_oracle(inf).status, LpStatus::infeasible);

  InequalityLp unb;
  unb.g = Eigen::MatrixXd::Constant(1, 1, 1.0);
  unb.h = Eigen::VectorXd::Zero(1);
  unb.c = Eigen::VectorXd::Ones(1);  // min x s.t. x <= 0
  EXPECT_EQ(solve_inequality_lp(unb).status, LpStatus::unbounded);
  EXPECT_EQ(lp_oracle(unb).status, LpStatus::unbounded);
}

TEST(Lp, StandardFormSimplex) {
  // min -x1 - x2 s.t. x1 + 2 x2 + s1 = 4, 3 x1 + x2 + s2 = 6
  StandardLp lp;
  lp.a.resize(2, 4);
  lp.a << 1, 2, 1, 0, 3, 1, 0, 1;
  lp.b.resize(2);
  lp.b << 4, 6;
  lp.c.resize(4);
  lp.c << -1, -1, 0, 0;
  const auto r = simplex(lp);
  ASSERT_EQ(r.status, LpStatus::optimal);
  EXPECT_NEAR(r.value, -2.8, 1e-12);
  EXPECT_NEAR(r.x[0], 1.6, 1e-12);
  EXPECT_NEAR(r.x[1], 1.2, 1e-12);
}

TEST(Lp, SimplexMatchesVertexEnumerationOnRandomScpInstances) {
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> unit(-1.0, 1.0), res(0.0, 0.5);
  for (int t = 0; t < 100; ++t) {
    const int samples = 1 + static_cast<int>(rng() % 6);
    const int terms = 1 + static_cast<int>(rng() % 3);
    InequalityLp lp;
    lp.g = Eigen::MatrixXd::Zero(2 * samples, terms + 1);
    lp.h = Eigen::VectorXd::Zero(2 * samples);
    lp.c = Eigen::VectorXd::Zero(terms + 1);
    lp.c(terms) = 1.0;
    for (int r = 0; r < samples; ++r) {
      for (int l = 0; l < terms; ++l) {
        const double p = l == 0 ? 1.0 : unit(rng);
        lp.g(2 * r, l) = p;
        lp.g(2 * r + 1, l) = -p;
      }
      lp.g(2 * r, terms) = -1.0;
      lp.h(2 * r + 1) = -res(rng);
    }
    const auto ref = lp_oracle(lp);
    const auto got = solve_inequality_lp(lp);
    ASSERT_EQ(ref.status, LpStatus::optimal) << "instance " << t;
    ASSERT_EQ(got.status, LpStatus::optimal) << "instance " << t;
    EXPECT_NEAR(got.value, ref.value, 1e-7) << "instance " << t;
  }
}

TEST(Lp, BlandAndDantzigAgree) {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  for (int t = 0; t < 50; ++t) {
    InequalityLp lp;
    lp.g.resize(8, 3);
    lp.h.resize(8);
    for (int r = 0; r < 8; ++r) {
      for (int j = 0; j < 3; ++j) lp.g(r, j) = unit(rng);
      lp.h(r) = 1.0 + std::abs(unit(rng));
    }
    lp.c = Eigen::Vector3d(unit(rng), unit(rng), unit(rng));
    SimplexOptions bland;
    bland.pricing = PricingRule::bland;
    const auto a = solve_inequality_lp(lp, bland);
    const auto b = solve_inequality_lp(lp);
    const auto ref = lp_oracle(lp);
    ASSERT_EQ(a.status, ref.status);
    ASSERT_EQ(b.status, ref.status);
    if (ref.status == LpStatus::optimal) {
      EXPECT_NEAR(a.value, ref.value, 1e-7);
      EXPECT_NEAR(b.value, ref.value, 1e-7);
    }
  }
}

SampleSet pendulum_data(double eps) {
  const auto model = NominalModel::pendulum();
  const auto box = test::pendulum_box();
  SurrogateOracle o(model, test::damped_spec(), box);
  return collect(make_cover(box, eps), InputGrid::lattice(Vec{-1.2}, Vec{1.2}, Vec{0.3}), model, o);
}

TEST(Scp, IdentityOracleGivesZeroEta) {
  const auto model = NominalModel::pendulum();
  const auto box = test::pendulum_box();
  SurrogateOracle o(model, SurrogateSpec{}, box);
  const auto s = collect(make_cover(box, 0.05), test::pendulum_inputs(), model, o);
  for (std::size_t i = 0; i < 2; ++i) {
    const auto sol = solve_scp(s, i, BasisSpec::quadratic(2, 1));
    EXPECT_LE(std::abs(sol.eta), 1e-12);
  }
}

TEST(Scp, SolutionInvariantsHold) {
  const auto s = pendulum_data(0.04);
  for (std::size_t i = 0; i < 2; ++i) {
    const auto sol = solve_scp(s, i, BasisSpec::quadratic(2, 1));
    double max_p = -INFINITY;
    double worst = -INFINITY;
    for (std::size_t k = 0; k < s.size(); ++k) {
      const auto rec = s[k];
      const Vec p = eval_basis(sol.basis, rec.x, rec.u);
      double v = 0.0;
      for (std::size_t l = 0; l < p.size(); ++l) v += sol.q[l] * p[l];
      max_p = std::max(max_p, v);
      worst = std::max(worst, s.residual(k, i) - v);
    }
    EXPECT_LE(worst, sol.tol);
    EXPECT_NEAR(sol.eta, max_p, 1e-15);
    EXPECT_GT(sol.active, 0U);
    EXPECT_LE(sol.dedup_count, s.size());
  }
}

TEST(Scp, EtaNonIncreasingUnderBasisEnlargement) {
  const auto s = pendulum_data(0.04);
  const auto small = BasisSpec::parse(2, 1, {"1", "x1", "x2"});
  const auto large = BasisSpec::quadratic(2, 1);
  for (std::size_t i = 0; i < 2; ++i) {
    const double a = solve_scp(s, i, small).eta;
    const double b = solve_scp(s, i, large).eta;
    EXPECT_LE(b, a + 1e-12);
  }
}

TEST(Scp, EtaNonDecreasingWhenSamplesAdded) {
  const auto all = pendulum_data(0.04);
  SampleSet half(2, 1);
  for (std::size_t k = 0; k < all.size(); k += 2) {
    const auto r = all[k];
    half.add(r.r, r.u_index, r.x, r.u, r.f, r.fhat);
  }
  for (std::size_t i = 0; i < 2; ++i) {
    const double a = solve_scp(half, i, BasisSpec::quadratic(2, 1)).eta;
    const double b = solve_scp(all, i, BasisSpec::quadratic(2, 1)).eta;
    EXPECT_GE(b + 1e-12, a);
  }
}

TEST(Scp, DuplicateRowsAreMerged) {
  const auto s = toy_samples({{0.0, 0.1}, {0.0, 0.2}, {1.0, 0.3}});
  const auto sol = solve_scp(s, 0, BasisSpec::parse(1, 1, {"1", "x1"}));
  EXPECT_EQ(sol.dedup_count, 1U);  // one row merged away
  EXPECT_GE(sol.q[0] + 1e-12, 0.2);
}

TEST(Scp, ReportedCoefficientsHideTinyValues) {
  ScpSolution s;
  s.q = {1e-7, -2e-7, 0.5};
  EXPECT_EQ(s.reported_q(), (Vec{0.0, 0.0, 0.5}));
}

}  // namespace
}  // namespace simgap
