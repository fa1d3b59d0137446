#include <cmath>
#include <filesystem>
#include <random>

#include <gtest/gtest.h>

#include "simgap/error.hpp"
#include "simgap/sampling.hpp"
#include "test_support.hpp"

namespace simgap {
namespace {

TEST(Cover, UnitIntervalTwoCenters) {
  const Cover c = make_cover(StateBox({0.0}, {1.0}), 0.3);
  ASSERT_EQ(c.size(), 2U);
  EXPECT_NEAR(c.center(0)[0], 0.3, 1e-15);
  EXPECT_NEAR(c.center(1)[0], 0.9, 1e-15);
}

TEST(Cover, PendulumBoxAtFineEpsilon) {
  const StateBox box({-0.2, -0.5}, {0.2, 0.5});
  const Cover c = make_cover(box, 0.0022);
  EXPECT_NEAR(c.half_width()[0], 0.0022 / std::sqrt(2.0), 1e-15);
  EXPECT_EQ(c.counts()[0], 129U);
  EXPECT_EQ(c.counts()[1], 322U);
  EXPECT_EQ(c.size(), 41538U);
  EXPECT_EQ(projected_cover_size(box, 0.0022), 41538U);
}

TEST(Cover, UnitSquareSingleCenter) {
  const Cover c = make_cover(StateBox({0, 0}, {1, 1}), std::sqrt(2.0) / 2.0);
  ASSERT_EQ(c.size(), 1U);
  EXPECT_NEAR(c.center(0)[0], 0.5, 1e-15);
  EXPECT_NEAR(c.center(0)[1], 0.5, 1e-15);
}

TEST(Cover, SizeIsProductOfCounts) {
  const Cover c = make_cover(StateBox({0, -1, 2}, {0.7, 1, 2.5}), 0.13);
  std::size_t prod = 1;
  for (auto k : c.counts()) prod *= k;
  EXPECT_EQ(c.size(), prod);
  EXPECT_EQ(c.centers().size(), prod);
}

TEST(Cover, EveryStateHasCenterWithinEpsilon) {
  const StateBox box({-0.2, -0.5}, {0.2, 0.5});
  const double eps = 0.01;
  const Cover c = make_cover(box, eps);
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> a(-0.2, 0.2), b(-0.5, 0.5);
  for (int t = 0; t < 100000; ++t) {
    const Vec x{a(rng), b(rng)};
    // nearest center lies in the cell containing x
    double best = INFINITY;
    std::size_t idx[2];
    for (std::size_t j = 0; j < 2; ++j) {
      const double w = 2.0 * c.half_width()[j];
      auto i = static_cast<std::size_t>(std::floor((x[j] - box.lower(j)) / w));
      idx[j] = std::min(i, c.counts()[j] - 1);
    }
    for (int di = -1; di <= 1; ++di) {
      for (int dj = -1; dj <= 1; ++dj) {
        const long i = static_cast<long>(idx[0]) + di;
        const long j = static_cast<long>(idx[1]) + dj;
        if (i < 0 || j < 0 || i >= static_cast<long>(c.counts()[0]) ||
            j >= static_cast<long>(c.counts()[1])) {
          continue;
        }
        const Vec ctr = c.center(static_cast<std::size_t>(j) * c.counts()[0] + static_cast<std::size_t>(i));
        best = std::min(best, std::hypot(x[0] - ctr[0], x[1] - ctr[1]));
      }
    }
    ASSERT_LE(best, eps);
  }
}

TEST(Cover, BudgetExceededIsResourceError) {
  EXPECT_THROW(make_cover(StateBox({0, 0}, {1, 1}), 1e-4, 25, 1000), ResourceError);
  EXPECT_THROW(make_cover(StateBox({0}, {1}), 0.0), ConfigError);
}

TEST(Collect, RecordCountIsCentersTimesInputs) {
  const Cover c = make_cover(StateBox({0.0}, {1.0}), 0.3);
  Eigen::MatrixXd a(1, 1), b(1, 1);
  a << 0.5;
  b << 1.0;
  const auto model = NominalModel::affine(a, b);
  SurrogateOracle o(model, SurrogateSpec{}, c.box());
  const InputGrid u({Vec{-1.0}, Vec{0.0}, Vec{1.0}});
  const SampleSet s = collect(c, u, model, o);
  EXPECT_EQ(s.size(), 6U);
  for (std::size_t k = 0; k < s.size(); ++k) {
    EXPECT_EQ(s.residual(k, 0), 0.0);
  }
}

TEST(Collect, DampedPendulumResidual) {
  // fhat_2 - f_2 = -tau * b * x_2 at x = (0, 0.5), u = 0
  const auto model = NominalModel::pendulum();
  SurrogateSpec spec;
  spec.kind = SurrogateKind::damped_pendulum;
  spec.length_scale = 1.0;
  SurrogateOracle o(model, spec, StateBox({-0.2, -0.5}, {0.2, 0.5}));
  const Vec f = model.step(Vec{0.0, 0.5}, Vec{0.0});
  const Vec fhat = o.query(Vec{0.0, 0.5}, Vec{0.0});
  EXPECT_NEAR(fhat[1] - f[1], -0.00025, 1e-15);
}

TEST(Collect, IsIdempotentAndJobIndependent) {
  const auto model = NominalModel::pendulum();
  const StateBox box({-0.2, -0.5}, {0.2, 0.5});
  const Cover c = make_cover(box, 0.04);
  const auto u = InputGrid::lattice(Vec{-1.2}, Vec{1.2}, Vec{0.3});
  SurrogateOracle o(model, test::damped_spec(), box);
  const SampleSet a = collect(c, u, model, o);
  CollectOptions opts;
  opts.jobs = 3;
  const SampleSet b = collect(c, u, model, o, opts);
  EXPECT_EQ(a.content_hash(), b.content_hash());
}

TEST(Collect, CsvRoundTripIsExact) {
  test::TempDir dir;
  const auto model = NominalModel::pendulum();
  const StateBox box({-0.2, -0.5}, {0.2, 0.5});
  const Cover c = make_cover(box, 0.05);
  const auto u = InputGrid::lattice(Vec{-1.2}, Vec{1.2}, Vec{0.6});
  SurrogateOracle o(model, test::damped_spec(), box);
  SampleSet s = collect(c, u, model, o);
  const auto path = dir.path() / "samples.csv";
  save_samples(path, s);
  EXPECT_TRUE(std::filesystem::exists(metadata_path(path)));
  const SampleSet back = load_samples(path);
  EXPECT_EQ(back.content_hash(), s.content_hash());
  EXPECT_EQ(back.metadata.centers, c.size());
  EXPECT_EQ(back.metadata.inputs, u.size());
  EXPECT_DOUBLE_EQ(back.metadata.epsilon, 0.05);
}

TEST(Collect, ResumesFromCheckpoint) {
  test::TempDir dir;
  const auto model = NominalModel::pendulum();
  const StateBox box({-0.2, -0.5}, {0.2, 0.5});
  const Cover c = make_cover(box, 0.04);
  const auto u = InputGrid::lattice(Vec{-1.2}, Vec{1.2}, Vec{0.3});
  SurrogateOracle o(model, test::damped_spec(), box);
  const SampleSet full = collect(c, u, model, o);

  CollectOptions opts;
  opts.checkpoint = dir.path() / "partial.csv";
  opts.checkpoint_every = 50;
  // a checkpoint holding a prefix of the data, as left by an interrupted run
  SampleSet prefix(2, 1);
  for (std::size_t k = 0; k < 120; ++k) {
    const auto r = full[k];
    prefix.add(r.r, r.u_index, r.x, r.u, r.f, r.fhat);
  }
  write_samples_csv(*opts.checkpoint, prefix);
  const SampleSet resumed = collect(c, u, model, o, opts);
  EXPECT_EQ(resumed.content_hash(), full.content_hash());
  EXPECT_FALSE(std::filesystem::exists(*opts.checkpoint));

  // saved records are taken as they are, not re-queried
  SampleSet marked(2, 1);
  const auto r0 = full[0];
  const Vec fake{42.0, 42.0};
  marked.add(r0.r, r0.u_index, r0.x, r0.u, r0.f, fake);
  write_samples_csv(*opts.checkpoint, marked);
  const SampleSet again = collect(c, u, model, o, opts);
  EXPECT_EQ(again[0].fhat[0], 42.0);
  EXPECT_EQ(again[1].fhat[0], full[1].fhat[0]);
}

}  // namespace
}  // namespace simgap
