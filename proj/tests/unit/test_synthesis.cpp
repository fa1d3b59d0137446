#include <algorithm>
#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "simgap/error.hpp"
#include "simgap/gap.hpp"
#include "simgap/scp.hpp"
#include "simgap/synthesis.hpp"
#include "test_support.hpp"

namespace simgap {
namespace {

NominalModel affine1(double a, double b = 1.0) {
  Eigen::MatrixXd am(1, 1), bm(1, 1);
  am << a;
  bm << b;
  return NominalModel::affine(am, bm);
}

NominalModel shift2() {
  return NominalModel::affine(Eigen::MatrixXd::Identity(2, 2), 0.1 * Eigen::MatrixXd::Identity(2, 2));
}

GapModel constant_gap(double value, const StateBox& box, const InputGrid& inputs) {
  GapComponent c;
  c.basis = BasisSpec::parse(box.dim(), inputs.dim(), {"1"});
  c.q = {value};
  return GapModel(0.01, box, inputs, std::vector<GapComponent>(box.dim(), c));
}

// ---- brute-force game solver over explicit cell boxes ----

bool meets(const Vec& alo, const Vec& ahi, const Vec& blo, const Vec& bhi) {
  for (std::size_t j = 0; j < alo.size(); ++j) {
    if (ahi[j] < blo[j] || bhi[j] < alo[j]) return false;
  }
  return true;
}

std::vector<std::size_t> touched(const AbstractGrid& g, const Interval& img) {
  std::vector<std::size_t> out;
  for (std::size_t d = 0; d < g.size(); ++d) {
    if (meets(img.lo, img.hi, g.lower(d), g.upper(d))) out.push_back(d);
  }
  return out;
}

std::vector<std::size_t> brute_invariance(const Abstraction& abs, const StateBox& safe) {
  const auto& g = abs.grid();
  std::vector<char> w(g.size());
  for (std::size_t c = 0; c < g.size(); ++c) w[c] = safe.contains(g.lower(c), g.upper(c));
  bool changed = true;
  while (changed) {
    changed = false;
    for (std::size_t c = 0; c < g.size(); ++c) {
      if (!w[c]) continue;
      bool any = false;
      for (std::size_t u = 0; u < abs.inputs().size() && !any; ++u) {
        const auto imgs = abs.images(c, u);
        bool ok = imgs.size() == abs.hold();
        for (std::size_t k = 0; ok && k < imgs.size(); ++k) {
          ok = imgs[k].inside(g.box()) && safe.contains(imgs[k].lo, imgs[k].hi);
        }
        if (ok) {
          for (std::size_t d : touched(g, imgs.back())) ok = ok && w[d];
        }
        any = ok;
      }
      if (!any) {
        w[c] = 0;
        changed = true;
      }
    }
  }
  std::vector<std::size_t> out;
  for (std::size_t c = 0; c < g.size(); ++c) {
    if (w[c]) out.push_back(c);
  }
  return out;
}

std::vector<std::size_t> brute_reach(const Abstraction& abs, const StateBox& target,
                                     const std::vector<StateBox>& obstacles) {
  const auto& g = abs.grid();
  std::vector<char> obst(g.size(), 0), win(g.size(), 0);
  for (std::size_t c = 0; c < g.size(); ++c) {
    for (const auto& o : obstacles) obst[c] |= o.intersects(g.lower(c), g.upper(c));
    win[c] = target.contains(g.lower(c), g.upper(c));
  }
  bool changed = true;
  while (changed) {
    changed = false;
    const auto prev = win;
    for (std::size_t c = 0; c < g.size(); ++c) {
      if (prev[c] || obst[c]) continue;
      for (std::size_t u = 0; u < abs.inputs().size(); ++u) {
        const auto imgs = abs.images(c, u);
        if (imgs.size() != abs.hold() || !imgs.back().inside(g.box())) continue;
        bool ok = true;
        for (const auto& img : imgs) {
          for (std::size_t d : touched(g, img)) ok = ok && !obst[d];
        }
        for (std::size_t d : touched(g, imgs.back())) {
          if (!ok) break;
          if (prev[d] && d != c) continue;
          // the part of the image inside d lies in the target
          Vec lo(g.dim()), hi(g.dim());
          for (std::size_t j = 0; j < g.dim(); ++j) {
            lo[j] = std::max(imgs.back().lo[j], g.lower(d)[j]);
            hi[j] = std::min(imgs.back().hi[j], g.upper(d)[j]);
          }
          ok = target.contains(lo, hi);
        }
        if (ok) {
          win[c] = 1;
          changed = true;
          break;
        }
      }
    }
  }
  std::vector<std::size_t> out;
  for (std::size_t c = 0; c < g.size(); ++c) {
    if (win[c]) out.push_back(c);
  }
  return out;
}

// ---- grid ----

TEST(Grid, HalvedUnitInterval) {
  const AbstractGrid g(StateBox({0.0}, {1.0}), {0.25});
  ASSERT_EQ(g.size(), 2U);
  EXPECT_DOUBLE_EQ(g.center(0)[0], 0.25);
  EXPECT_DOUBLE_EQ(g.center(1)[0], 0.75);
}

TEST(Grid, PendulumSafeBoxHundredCells) {
  const AbstractGrid g(StateBox({0.0, -0.5}, {0.2, 0.5}), {0.01, 0.05});
  EXPECT_EQ(g.size(), 100U);
  EXPECT_EQ(projected_grid_size(StateBox({0.0, -0.5}, {0.2, 0.5}), Vec{0.01, 0.05}), 100U);
}

TEST(Grid, IndexRoundTrip) {
  const AbstractGrid g(StateBox({0, -1, 2}, {0.7, 1, 2.5}), {0.05, 0.1, 0.07});
  for (std::size_t c = 0; c < g.size(); ++c) {
    ASSERT_EQ(g.index(g.multi_index(c)), c);
    ASSERT_EQ(g.locate(g.center(c)), c);
    const Vec lo = g.lower(c), hi = g.upper(c);
    for (std::size_t j = 0; j < 3; ++j) ASSERT_LT(lo[j], hi[j]);
  }
}

TEST(Grid, LastCellShrinks) {
  const AbstractGrid g(StateBox({0.0}, {1.0}), {0.3});
  ASSERT_EQ(g.size(), 2U);
  EXPECT_DOUBLE_EQ(g.upper(1)[0], 1.0);
}

TEST(Grid, FacePointsGoUpAndRangesIncludeTouchingCells) {
  const AbstractGrid g(StateBox({0.0}, {1.0}), {0.125});
  EXPECT_EQ(g.locate(Vec{0.25}), 1U);
  EXPECT_EQ(g.locate(Vec{1.0}), 3U);
  EXPECT_FALSE(g.locate(Vec{1.5}));
  const auto r = g.axis_range(0, 0.25, 0.5);
  EXPECT_EQ(r.first, 0U);
  EXPECT_EQ(r.second, 2U);
}

TEST(Grid, LocatedCellContainsPoint) {
  const AbstractGrid g(StateBox({0, 0}, {2, 2}), {0.025, 0.025});
  std::mt19937_64 rng(1);
  std::uniform_int_distribution<int> k(0, 80);
  for (int t = 0; t < 5000; ++t) {
    // points on and next to cell faces
    const Vec x{0.05 * k(rng) / 2.0, std::nextafter(0.05 * (k(rng) / 2), 0.0)};
    if (x[0] > 2.0 || x[1] > 2.0 || x[1] < 0.0) continue;
    const auto c = g.locate(x);
    ASSERT_TRUE(c);
    const Vec lo = g.lower(*c), hi = g.upper(*c);
    for (std::size_t j = 0; j < 2; ++j) {
      ASSERT_LE(lo[j], x[j]);
      ASSERT_LE(x[j], hi[j]);
    }
  }
}

TEST(Grid, BudgetIsResourceError) {
  EXPECT_THROW(AbstractGrid(StateBox({0, 0}, {1, 1}), {1e-4, 1e-4}, 1000), ResourceError);
}

// ---- successor intervals ----

TEST(PostInterval, AffineContractionHandExample) {
  const AbstractGrid g(StateBox({0.0}, {1.0}), {0.1});
  const InputGrid u({Vec{0.0}});
  const Abstraction abs(g, affine1(0.5), u, std::nullopt);
  EXPECT_DOUBLE_EQ(abs.jacobian()(0, 0), 0.5);
  const Interval i = post_interval(abs, 2, 0);  // cell [0.4, 0.6]
  EXPECT_NEAR(i.lo[0], 0.20, 1e-15);
  EXPECT_NEAR(i.hi[0], 0.30, 1e-15);
  EXPECT_LE(i.lo[0], 0.2);
  EXPECT_GE(i.hi[0], 0.3);

  const Abstraction with_gap(g, affine1(0.5), u, constant_gap(0.6, g.box(), u));
  const Interval j = post_interval(with_gap, 2, 0);
  EXPECT_NEAR(j.lo[0], -0.40, 1e-15);
  EXPECT_NEAR(j.hi[0], 0.90, 1e-15);
}

TEST(PostInterval, PendulumEquilibriumCellIsCentered) {
  const AbstractGrid g(StateBox({-0.25, -0.5}, {0.25, 0.5}), {0.05, 0.1});
  const auto u = test::pendulum_inputs();
  const Abstraction abs(g, NominalModel::pendulum(), u, std::nullopt);
  const std::size_t mid = *g.locate(Vec{0.0, 0.0});
  EXPECT_NEAR(g.center(mid)[0], 0.0, 1e-15);
  const Interval i = post_interval(abs, mid, *u.index_of(Vec{0.0}));
  for (std::size_t j = 0; j < 2; ++j) EXPECT_NEAR(i.lo[j] + i.hi[j], 0.0, 1e-15);
}

TEST(PostInterval, ContainsSurrogateSuccessors) {
  // gap with the analytic L1 of the surrogate, so the validated condition holds
  const auto model = NominalModel::pendulum();
  const auto box = test::pendulum_box();
  const auto inputs = test::pendulum_inputs();
  SurrogateOracle o(model, test::damped_spec(), box);
  const auto data = collect(make_cover(box, 0.02), inputs, model, o);
  std::vector<ScpSolution> sols;
  std::vector<LipschitzEstimate> l1, l2;
  for (std::size_t i = 0; i < 2; ++i) {
    sols.push_back(solve_scp(data, i, BasisSpec::quadratic(2, 1)));
    LipschitzEstimate e;
    e.value = o.analytic_l1(i, box, inputs);
    l1.push_back(e);
    l2.push_back(analytic_l2(sols[i].basis, sols[i].q, box, inputs));
  }
  const GapModel gap = assemble(sols, l1, l2, 0.02, 0.02, box, inputs);
  const AbstractGrid g(box, {0.005, 0.025});
  const Abstraction abs(g, model, inputs, gap);
  std::mt19937_64 rng(21);
  std::uniform_int_distribution<std::size_t> cell(0, g.size() - 1), inp(0, inputs.size() - 1);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int t = 0; t < 10000; ++t) {
    const std::size_t c = cell(rng);
    const std::size_t u = inp(rng);
    const Vec lo = g.lower(c), hi = g.upper(c);
    const Vec x{lo[0] + (hi[0] - lo[0]) * unit(rng), lo[1] + (hi[1] - lo[1]) * unit(rng)};
    const Vec next = o.query(x, inputs[u]);
    const Interval i = post_interval(abs, c, u);
    for (std::size_t j = 0; j < 2; ++j) {
      ASSERT_LE(i.lo[j], next[j]);
      ASSERT_LE(next[j], i.hi[j]);
    }
  }
}

// ---- invariance ----

TEST(Invariance, ContractionWinsEverySafeCell) {
  const AbstractGrid g(StateBox({-1.0}, {1.0}), {0.0625});
  const InputGrid u({Vec{0.0}});
  const Abstraction abs(g, affine1(0.5), u, std::nullopt);
  const auto spec = SpecDef::invariance(StateBox({-1.0}, {1.0}));
  const auto t = solve_invariance(abs, spec);
  EXPECT_EQ(t.winning.size(), g.size());
  EXPECT_EQ(t.winning, brute_invariance(abs, *spec.safe));
  EXPECT_TRUE(closure_violations(abs, spec, t).empty());
  EXPECT_LE(t.iterations, g.size() + 1);
}

TEST(Invariance, MatchesBruteForceOnDriftingSystem) {
  // x' = 1.1 x + 0.1 u: only the middle can be held
  const AbstractGrid g(StateBox({-1.0}, {1.0}), {0.0625});
  const InputGrid u({Vec{-1.0}, Vec{0.0}, Vec{1.0}});
  const Abstraction abs(g, affine1(1.1, 0.1), u, std::nullopt);
  const auto spec = SpecDef::invariance(StateBox({-0.75}, {1.0}));
  const auto t = solve_invariance(abs, spec);
  EXPECT_EQ(t.winning, brute_invariance(abs, *spec.safe));
  EXPECT_FALSE(t.winning.empty());
  EXPECT_LT(t.winning.size(), g.size());
  EXPECT_TRUE(closure_violations(abs, spec, t).empty());
}

TEST(Invariance, MatchesBruteForceWithHold) {
  const AbstractGrid g(StateBox({-1.0, -1.0}, {1.0, 1.0}), {0.125, 0.125});
  const InputGrid u({Vec{-1.0, 0.0}, Vec{1.0, 0.0}, Vec{0.0, -1.0}, Vec{0.0, 1.0}, Vec{0.0, 0.0}});
  Eigen::MatrixXd a(2, 2), b(2, 2);
  a << 1.05, 0.02, -0.02, 1.05;
  b << 0.1, 0, 0, 0.1;
  const Abstraction abs(g, NominalModel::affine(a, b), u, std::nullopt, 2);
  const auto spec = SpecDef::invariance(StateBox({-0.75, -1.0}, {1.0, 0.75}));
  const auto t = solve_invariance(abs, spec);
  EXPECT_EQ(t.winning, brute_invariance(abs, *spec.safe));
  EXPECT_EQ(t.hold, 2U);
  EXPECT_TRUE(closure_violations(abs, spec, t).empty());
}

TEST(Invariance, SafeBoxSmallerThanCellIsEmpty) {
  const AbstractGrid g(StateBox({-1.0}, {1.0}), {0.25});
  const Abstraction abs(g, affine1(0.5), InputGrid({Vec{0.0}}), std::nullopt);
  const auto t = solve_invariance(abs, SpecDef::invariance(StateBox({0.1}, {0.2})));
  EXPECT_TRUE(t.winning.empty());
}

TEST(Invariance, HugeGapEmptiesWinningSet) {
  const AbstractGrid g(StateBox({-1.0}, {1.0}), {0.0625});
  const InputGrid u({Vec{0.0}});
  const Abstraction abs(g, affine1(0.5), u, constant_gap(5.0, g.box(), u));
  const auto t = solve_invariance(abs, SpecDef::invariance(g.box()));
  EXPECT_TRUE(t.winning.empty());
}

TEST(Invariance, GapShrinksWinningSet) {
  const AbstractGrid g(StateBox({-1.0}, {1.0}), {0.0625});
  const InputGrid u({Vec{-1.0}, Vec{0.0}, Vec{1.0}});
  const auto spec = SpecDef::invariance(StateBox({-0.75}, {1.0}));
  const Abstraction free(g, affine1(1.1, 0.1), u, std::nullopt);
  const Abstraction robust(g, affine1(1.1, 0.1), u, constant_gap(0.02, g.box(), u));
  const auto a = solve_invariance(free, spec);
  const auto b = solve_invariance(robust, spec);
  EXPECT_TRUE(std::includes(a.winning.begin(), a.winning.end(), b.winning.begin(), b.winning.end()));
  EXPECT_EQ(b.winning, brute_invariance(robust, *spec.safe));
}

TEST(Invariance, TamperedPolicyIsCaught) {
  const AbstractGrid g(StateBox({-1.0}, {1.0}), {0.0625});
  const InputGrid u({Vec{-1.0}, Vec{0.0}, Vec{1.0}});
  const Abstraction abs(g, affine1(1.1, 0.1), u, std::nullopt);
  const auto spec = SpecDef::invariance(StateBox({-0.75}, {1.0}));
  auto t = solve_invariance(abs, spec);
  ASSERT_FALSE(t.winning.empty());
  // the right-most winning cell cannot survive pushing outward
  const std::size_t edge = t.winning.back();
  t.policy[edge] = 2;
  const auto bad = closure_violations(abs, spec, t);
  EXPECT_NE(std::find(bad.begin(), bad.end(), edge), bad.end());
}

// ---- reach-avoid ----

TEST(ReachAvoid, ChainPushesRight) {
  // x' = x + 0.1 u on sixteen cells
  const AbstractGrid g(StateBox({0.0}, {1.0}), {0.03125});
  const InputGrid u({Vec{-1.0}, Vec{0.0}, Vec{1.0}});
  const Abstraction abs(g, affine1(1.0, 0.1), u, std::nullopt);
  const StateBox target({0.8}, {1.0});
  const auto spec = SpecDef::reach_avoid(target, {});
  const auto t = solve_reach_avoid(abs, spec);
  EXPECT_EQ(t.winning.size(), g.size());
  EXPECT_EQ(t.winning, brute_reach(abs, target, {}));
  for (std::size_t c : t.winning) {
    if (t.rank[c] == 0) {
      EXPECT_EQ(t.policy[c], ControllerTable::kNone);
      EXPECT_TRUE(target.contains(g.lower(c), g.upper(c)));
    } else {
      EXPECT_EQ(t.policy[c], 2);
    }
  }
  EXPECT_TRUE(closure_violations(abs, spec, t).empty());
  EXPECT_LE(t.iterations, g.size() + 1);
}

TEST(ReachAvoid, WholeDomainTargetWinsAtRankZero) {
  const AbstractGrid g(StateBox({0.0, 0.0}, {1.0, 1.0}), {0.1, 0.1});
  const InputGrid u({Vec{0.0, 0.0}});
  const Abstraction abs(g, shift2(), u, std::nullopt);
  const auto t = solve_reach_avoid(abs, SpecDef::reach_avoid(g.box(), {}));
  EXPECT_EQ(t.winning.size(), g.size());
  for (std::size_t c = 0; c < g.size(); ++c) EXPECT_EQ(t.rank[c], 0);
}

TEST(ReachAvoid, WallSeparatesStartFromTarget) {
  const AbstractGrid g(StateBox({0.0, 0.0}, {1.0, 1.0}), {0.1, 0.1});
  std::vector<Vec> pts;
  for (double a : {-1.0, 0.0, 1.0}) {
    for (double b : {-1.0, 0.0, 1.0}) pts.push_back({a, b});
  }
  const InputGrid u(pts);
  const Abstraction abs(g, shift2(), u, std::nullopt);
  const StateBox target({0.8, 0.0}, {1.0, 1.0});
  const std::vector<StateBox> wall{StateBox({0.4, 0.0}, {0.6, 1.0})};
  const auto t = solve_reach_avoid(abs, SpecDef::reach_avoid(target, wall));
  EXPECT_EQ(t.winning, brute_reach(abs, target, wall));
  for (std::size_t c : t.winning) EXPECT_GT(g.lower(c)[0], 0.6 - 1e-12);
  EXPECT_FALSE(t.winning.empty());
}

TEST(ReachAvoid, DetourAroundObstacleMatchesBruteForce) {
  const AbstractGrid g(StateBox({0.0, 0.0}, {1.0, 1.0}), {0.05, 0.05});
  std::vector<Vec> pts;
  for (double a : {-1.0, 0.0, 1.0}) {
    for (double b : {-1.0, 0.0, 1.0}) pts.push_back({a, b});
  }
  const InputGrid u(pts);
  const Abstraction abs(g, shift2(), u, std::nullopt, 2);
  const StateBox target({0.8, 0.8}, {1.0, 1.0});
  const std::vector<StateBox> obst{StateBox({0.3, 0.2}, {0.6, 0.7})};
  const auto spec = SpecDef::reach_avoid(target, obst);
  const auto t = solve_reach_avoid(abs, spec);
  EXPECT_EQ(t.winning, brute_reach(abs, target, obst));
  EXPECT_TRUE(closure_violations(abs, spec, t).empty());
  const auto free = cells_meeting(g, obst[0]);
  for (std::size_t c : t.winning) EXPECT_FALSE(free[c]);
}

TEST(Spec, RejectsTargetInsideObstacleAndOutsideDomain) {
  const StateBox x({0, 0}, {1, 1});
  EXPECT_THROW(SpecDef::reach_avoid(StateBox({0.2, 0.2}, {0.3, 0.3}), {StateBox({0.1, 0.1}, {0.5, 0.5})}).check(x),
               ConfigError);
  EXPECT_THROW(SpecDef::invariance(StateBox({0.5, 0.5}, {1.5, 1.0})).check(x), ConfigError);
}

}  // namespace
}  // namespace simgap
