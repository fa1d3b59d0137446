#include <fstream>
#include <string>

#include <gtest/gtest.h>

#include "simgap/error.hpp"
#include "simgap/runtime.hpp"
#include "test_support.hpp"

namespace simgap {
namespace {

NominalModel affine1(double a, double b) {
  Eigen::MatrixXd am(1, 1), bm(1, 1);
  am << a;
  bm << b;
  return NominalModel::affine(am, bm);
}

// The nominal map plus a constant push to the right.
class PushOracle final : public Oracle {
 public:
  PushOracle(NominalModel model, double push, StateBox domain)
      : Oracle(model.n(), model.m(), model.tau(), std::move(domain)), model_(std::move(model)), push_(push) {}
  std::unique_ptr<Oracle> clone() const override { return std::make_unique<PushOracle>(*this); }
  std::string id() const override { return "push"; }

 protected:
  Vec do_query(VecView x, VecView u) override {
    Vec y = model_.step(x, u);
    y[0] += push_;
    return y;
  }

 private:
  NominalModel model_;
  double push_;
};

struct Toy {
  AbstractGrid grid{StateBox({-1.0}, {1.0}), {0.0625}};
  InputGrid inputs{{Vec{-1.0}, Vec{0.0}, Vec{1.0}}};
  NominalModel model = affine1(1.1, 0.1);
  SpecDef spec = SpecDef::invariance(StateBox({-0.75}, {1.0}));
  Abstraction abs{grid, model, inputs, std::nullopt};
  ControllerTable table = solve_invariance(abs, spec);
};

TEST(ClosedLoop, IdentityOracleStaysSafe) {
  Toy t;
  SurrogateOracle o(t.model, SurrogateSpec{}, t.grid.box());
  ASSERT_FALSE(t.table.winning.empty());
  for (std::size_t c : t.table.winning) {
    const Trajectory tr = run_closed_loop(t.table, t.abs, t.spec, o, t.grid.center(c));
    EXPECT_EQ(tr.verdict, Verdict::satisfied) << "cell " << c;
    EXPECT_EQ(tr.states.size(), 501U);
    EXPECT_EQ(tr.inputs.size(), 500U);
    EXPECT_FALSE(tr.outside_winning_set);
    EXPECT_EQ(tr.unmanaged_steps, 0U);
  }
}

TEST(ClosedLoop, UnmodelledPushIsReported) {
  Toy t;
  PushOracle o(t.model, 0.2, t.grid.box());
  const Trajectory tr = run_closed_loop(t.table, t.abs, t.spec, o, t.grid.center(t.table.winning.back()));
  EXPECT_NE(tr.verdict, Verdict::satisfied);
  ASSERT_TRUE(tr.violation_step);
  const auto check = check_verdict(tr.states, t.spec, t.grid.box());
  EXPECT_EQ(check.verdict, tr.verdict);
  EXPECT_EQ(check.violation_step, tr.violation_step);
}

TEST(ClosedLoop, StartOutsideWinningSetIsFlagged) {
  Toy t;
  SurrogateOracle o(t.model, SurrogateSpec{}, t.grid.box());
  std::size_t losing = 0;
  while (t.table.wins(losing)) ++losing;
  ClosedLoopOptions opt;
  opt.steps = 3;
  const Trajectory tr = run_closed_loop(t.table, t.abs, t.spec, o, t.grid.center(losing), opt);
  EXPECT_TRUE(tr.outside_winning_set);
}

TEST(ClosedLoop, ReplayIsBitwiseIdentical) {
  const AbstractGrid g(test::pendulum_box(), {0.01, 0.05});
  const auto inputs = test::pendulum_inputs();
  const auto model = NominalModel::pendulum();
  const auto spec = SpecDef::invariance(test::pendulum_box());
  const Abstraction abs(g, model, inputs, std::nullopt, 8);
  const auto table = solve_invariance(abs, spec);
  ASSERT_FALSE(table.winning.empty());
  SurrogateOracle o(model, test::damped_spec(), g.box());
  const Trajectory tr = run_closed_loop(table, abs, spec, o, g.center(table.winning.front()));
  const auto again = replay(tr, o, inputs, model.angle_dims());
  ASSERT_EQ(again.size(), tr.states.size());
  for (std::size_t k = 0; k < again.size(); ++k) {
    for (std::size_t j = 0; j < 2; ++j) ASSERT_EQ(again[k][j], tr.states[k][j]);
  }
  const auto check = check_verdict(tr.states, spec, g.box());
  EXPECT_EQ(check.verdict, tr.verdict);
  // inputs change only at multiples of the hold
  for (std::size_t k = 1; k < tr.inputs.size(); ++k) {
    if (k % 8 != 0) ASSERT_EQ(tr.inputs[k], tr.inputs[k - 1]);
  }
}

TEST(ClosedLoop, ReachAvoidStopsAtTarget) {
  const AbstractGrid g(StateBox({0.0}, {1.0}), {0.03125});
  const InputGrid inputs({Vec{-1.0}, Vec{0.0}, Vec{1.0}});
  const auto model = affine1(1.0, 0.1);
  const StateBox target({0.8}, {1.0});
  const auto spec = SpecDef::reach_avoid(target, {});
  const Abstraction abs(g, model, inputs, std::nullopt);
  const auto table = solve_reach_avoid(abs, spec);
  SurrogateOracle o(model, SurrogateSpec{}, g.box());
  const Trajectory tr = run_closed_loop(table, abs, spec, o, Vec{0.03});
  EXPECT_EQ(tr.verdict, Verdict::satisfied);
  ASSERT_TRUE(tr.reached_step);
  EXPECT_EQ(*tr.reached_step, 8U);
  EXPECT_EQ(tr.states.size(), 9U);
  EXPECT_FALSE(tr.obstacle_cell_step);
}

TEST(ClosedLoop, ObstacleEntryIsAViolation) {
  const StateBox x({0.0}, {1.0});
  const auto spec = SpecDef::reach_avoid(StateBox({0.8}, {1.0}), {StateBox({0.4}, {0.5})});
  const std::vector<Vec> states{{0.1}, {0.3}, {0.45}, {0.6}, {0.9}};
  const auto check = check_verdict(states, spec, x);
  EXPECT_EQ(check.verdict, Verdict::violated);
  EXPECT_EQ(check.violation_step, 2U);
  const std::vector<Vec> never{{0.1}, {0.2}};
  EXPECT_EQ(check_verdict(never, spec, x).verdict, Verdict::violated);
  const std::vector<Vec> out{{0.1}, {1.3}};
  EXPECT_EQ(check_verdict(out, spec, x).verdict, Verdict::left_domain);
}

TEST(ClosedLoop, TrajectoryCsvHasOneRowPerState) {
  Toy t;
  SurrogateOracle o(t.model, SurrogateSpec{}, t.grid.box());
  ClosedLoopOptions opt;
  opt.steps = 10;
  const Trajectory tr = run_closed_loop(t.table, t.abs, t.spec, o, t.grid.center(t.table.winning.front()), opt);
  test::TempDir dir;
  const auto path = dir.path() / "run.csv";
  write_trajectory_csv(path, tr, t.inputs);
  std::ifstream in(path);
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line.rfind("k,x_1,cell,u_index,u_1", 0), 0U) << line;
  std::size_t rows = 0;
  while (std::getline(in, line)) ++rows;
  EXPECT_EQ(rows, tr.states.size());
}

TEST(ClosedLoop, MismatchedControllerIsRejected) {
  Toy t;
  SurrogateOracle o(t.model, SurrogateSpec{}, t.grid.box());
  ControllerTable wrong = t.table;
  wrong.cell_count += 1;
  EXPECT_THROW(run_closed_loop(wrong, t.abs, t.spec, o, Vec{0.0}), UsageError);
}

}  // namespace
}  // namespace simgap
