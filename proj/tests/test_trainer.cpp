#include <gtest/gtest.h>

#include <cmath>

#include "lqgcn/synthetic.hpp"
#include "lqgcn/trainer.hpp"
#include "support/generators.hpp"

using namespace lqgcn;

namespace {

ModelParams small_params() {
  RngStream rng(3);
  return init_params(4, 3, 2, rng);
}

struct Planted {
  PlantedInstance inst;
  FeatureMatrix x;
};

Planted planted(std::size_t n, std::uint64_t seed) {
  PlantedInstance p = make_planted({n, 3, 0.1, 1.5, 0.01}, seed);
  FeatureMatrix x = membership_features(p.cover_true);
  return {std::move(p), std::move(x)};
}

TrainConfig quick_config(std::size_t k) {
  TrainConfig c;
  c.k = k;
  c.hidden = 16;
  c.max_iters = 60;
  c.seed = 11;
  return c;
}

}  // namespace

TEST(Adam, ZeroGradientLeavesParametersUnchanged) {
  ModelParams p = small_params();
  const ModelParams before = p;
  AdamState s(p);
  const ParamGrads g{DenseMatrix(4, 3), DenseMatrix(3, 2)};
  for (int i = 0; i < 5; ++i) adam_step(p, g, s, 0.1);
  EXPECT_EQ(p, before);
  EXPECT_EQ(s.step, 5u);
}

TEST(Adam, FirstStepMovesEachWeightByLearningRate) {
  ModelParams p = small_params();
  const ModelParams before = p;
  AdamState s(p);
  lqgcn::testgen::Gen gen(5);
  const ParamGrads g{lqgcn::testgen::random_dense(gen, 4, 3), lqgcn::testgen::random_dense(gen, 3, 2)};
  adam_step(p, g, s, 1e-3);
  for (std::size_t i = 0; i < p.w1.size(); ++i) {
    const double gi = g.w1.values()[i];
    const double expected = 1e-3 * gi / (std::abs(gi) + 1e-8);
    EXPECT_NEAR(before.w1.values()[i] - p.w1.values()[i], expected, 1e-15);
  }
}

TEST(Adam, MatchesHandComputedSecondStep) {
  ModelParams p{DenseMatrix(1, 1, 1.0), DenseMatrix(1, 1, 0.0)};
  AdamState s(p);
  adam_step(p, {DenseMatrix(1, 1, 2.0), DenseMatrix(1, 1)}, s, 0.1);
  adam_step(p, {DenseMatrix(1, 1, -1.0), DenseMatrix(1, 1)}, s, 0.1);
  const double m = 0.9 * 0.2 + 0.1 * -1.0;
  const double v = 0.999 * 0.004 + 0.001 * 1.0;
  const double mhat = m / (1 - 0.81), vhat = v / (1 - 0.999 * 0.999);
  const double first = 0.1 * 2.0 / (2.0 + 1e-8);
  EXPECT_NEAR(p.w1(0, 0), 1.0 - first - 0.1 * mhat / (std::sqrt(vhat) + 1e-8), 1e-14);
}

TEST(Adam, RejectsNonFiniteGradient) {
  ModelParams p = small_params();
  AdamState s(p);
  ParamGrads g{DenseMatrix(4, 3), DenseMatrix(3, 2)};
  g.w2(1, 1) = std::nan("");
  EXPECT_THROW(adam_step(p, g, s, 0.1), NumericError);
}

TEST(TrainConfig, Validation) {
  TrainConfig c;
  EXPECT_THROW(c.validate(), ShapeError);
  c.k = 3;
  EXPECT_NO_THROW(c.validate());
  auto bad = [&](auto mutate) {
    TrainConfig d = c;
    mutate(d);
    EXPECT_THROW(d.validate(), ShapeError);
  };
  bad([](TrainConfig& d) { d.hidden = 0; });
  bad([](TrainConfig& d) { d.threshold = 1.5; });
  bad([](TrainConfig& d) { d.patience_lq = 80; });
  bad([](TrainConfig& d) { d.lr = 0.0; });
  bad([](TrainConfig& d) { d.dropout = 1.0; });
  bad([](TrainConfig& d) { d.alpha = -1.0; });
  bad([](TrainConfig& d) { d.k = 1; });
  TrainConfig one = c;
  one.k = 1;
  one.lq_enabled = false;
  EXPECT_NO_THROW(one.validate());
}

TEST(Train, ZeroIterationsReturnsInitialOutputAndEmptyLog) {
  const Planted p = planted(30, 1);
  TrainConfig c = quick_config(3);
  c.max_iters = 0;
  const TrainResult r = train(p.inst.graph, p.x, c);
  EXPECT_TRUE(r.log.records.empty());
  EXPECT_FALSE(r.log.stopped_early);
  RngStream rng(c.seed);
  EXPECT_EQ(r.params, init_params(p.x.cols(), c.hidden, c.k, rng));
  EXPECT_EQ(r.f.n_nodes(), 30u);
}

TEST(Train, RejectsFeatureRowMismatch) {
  const Planted p = planted(30, 1);
  const FeatureMatrix x(CsrMatrix::from_dense(DenseMatrix(29, 3, 1.0)));
  EXPECT_THROW(train(p.inst.graph, x, quick_config(3)), DataError);
}

TEST(Train, LossDecreasesOnPlantedInstance) {
  const Planted p = planted(60, 2);
  TrainConfig c = quick_config(3);
  c.lr = 1e-2;
  c.dropout = 0.0;
  const TrainResult r = train(p.inst.graph, p.x, c);
  ASSERT_FALSE(r.log.records.empty());
  EXPECT_LT(r.log.records.back().total, r.log.records.front().total);
}

TEST(Train, FixedSeedIsDeterministic) {
  const Planted p = planted(50, 3);
  TrainConfig c = quick_config(3);
  c.bp_samples = 200;
  const TrainResult a = train(p.inst.graph, p.x, c);
  const TrainResult b = train(p.inst.graph, p.x, c);
  EXPECT_EQ(a.f, b.f);
  EXPECT_EQ(a.params, b.params);
  c.seed = 12;
  EXPECT_NE(train(p.inst.graph, p.x, c).params, a.params);
}

TEST(Train, OutputIsNonNegative) {
  const Planted p = planted(40, 4);
  const TrainResult r = train(p.inst.graph, p.x, quick_config(3));
  EXPECT_GE(r.f.matrix().min_value(), 0.0);
}

// With a negligible learning rate and no dropout the loss never improves by
// more than the tolerance, so the schedule runs on its counters alone.
TEST(Schedule, StagnationSwitchesOnLqThenStops) {
  const Planted p = planted(40, 5);
  TrainConfig c = quick_config(3);
  c.lr = 1e-14;
  c.dropout = 0.0;
  c.max_iters = 1000;
  const TrainResult r = train(p.inst.graph, p.x, c);
  const auto& rec = r.log.records;
  ASSERT_TRUE(r.log.stopped_early);
  ASSERT_EQ(rec.size(), 1u + 31u + 1u + 81u);
  for (std::size_t i = 0; i < 32; ++i) {
    EXPECT_FALSE(rec[i].lq_active);
    EXPECT_FALSE(rec[i].lq.has_value());
    EXPECT_EQ(rec[i].counter, i);
  }
  for (std::size_t i = 32; i < rec.size(); ++i) {
    EXPECT_TRUE(rec[i].lq_active);
    ASSERT_TRUE(rec[i].lq.has_value());
    EXPECT_EQ(rec[i].counter, i - 32);
  }
  EXPECT_EQ(rec.back().counter, c.patience_stop + 1);
}

TEST(Schedule, DisabledLqNeverActivates) {
  const Planted p = planted(40, 5);
  TrainConfig c = quick_config(3);
  c.lr = 1e-14;
  c.dropout = 0.0;
  c.max_iters = 1000;
  c.lq_enabled = false;
  const TrainResult r = train(p.inst.graph, p.x, c);
  ASSERT_TRUE(r.log.stopped_early);
  EXPECT_EQ(r.log.records.size(), 82u);
  for (const auto& rec : r.log.records) EXPECT_FALSE(rec.lq_active);
}

TEST(Schedule, LogInvariantsHoldOnRealRun) {
  const Planted p = planted(60, 6);
  TrainConfig c = quick_config(3);
  c.max_iters = 400;
  c.lr = 1e-2;
  const TrainResult r = train(p.inst.graph, p.x, c);
  std::size_t switches = 0;
  for (std::size_t i = 0; i < r.log.records.size(); ++i) {
    const auto& rec = r.log.records[i];
    EXPECT_EQ(rec.iteration, i + 1);
    EXPECT_EQ(rec.lq.has_value(), rec.lq_active);
    EXPECT_LE(rec.counter, rec.lq_active ? c.patience_stop + 1 : c.patience_lq + 1);
    if (i > 0 && rec.lq_active != r.log.records[i - 1].lq_active) {
      ++switches;
      EXPECT_EQ(r.log.records[i - 1].counter, c.patience_lq + 1);
      EXPECT_EQ(rec.counter, 0u);
    }
  }
  EXPECT_LE(switches, 1u);
}

TEST(Threshold, ColumnMaxExample) {
  const AffiliationMatrix f(DenseMatrix::from_rows({{0.9, 0.7, 0.1}, {0.45, 0.35, 0.0}}));
  const Cover c = threshold_assign(f, 0.5);
  EXPECT_EQ(c, Cover(2, {{0}, {0}, {0}}));
  EXPECT_EQ(threshold_assign(f, 0.5, ThresholdMode::raw), Cover(2, {{0}, {0}, {}}));
}

TEST(Threshold, SingleRowAtHalf) {
  const AffiliationMatrix f(DenseMatrix::from_rows({{0.9, 0.7, 0.1}}));
  EXPECT_EQ(threshold_assign(f, 0.5, ThresholdMode::raw), Cover(1, {{0}, {0}, {}}));
}

TEST(Threshold, PEqualOneGivesEmptyCover) {
  lqgcn::testgen::Gen gen(8);
  const AffiliationMatrix f = lqgcn::testgen::random_affiliation(gen, 20, 4);
  const Cover c = threshold_assign(f, 1.0);
  EXPECT_EQ(c.empty_communities(), 4u);
}

TEST(Threshold, ZeroColumnStaysEmpty) {
  const AffiliationMatrix f(DenseMatrix::from_rows({{0.0, 1.0}, {0.0, 0.2}}));
  EXPECT_EQ(threshold_assign(f, 0.0), Cover(2, {{}, {0, 1}}));
}

TEST(Threshold, SweepIsNestedAndValidated) {
  lqgcn::testgen::Gen gen(9);
  for (int rep = 0; rep < 50; ++rep) {
    const AffiliationMatrix f = lqgcn::testgen::random_affiliation(gen, 25, 3);
    const auto sweep = threshold_sweep(f, {0.1, 0.3, 0.5, 0.7, 0.9});
    for (std::size_t t = 1; t < sweep.size(); ++t)
      for (std::size_t s = 0; s < 3; ++s) {
        const auto& hi = sweep[t].second[s];
        const auto& lo = sweep[t - 1].second[s];
        EXPECT_TRUE(std::includes(lo.begin(), lo.end(), hi.begin(), hi.end()));
      }
  }
  const AffiliationMatrix f(DenseMatrix(2, 2));
  EXPECT_THROW(threshold_sweep(f, {}), ShapeError);
  EXPECT_THROW(threshold_assign(f, -0.1), ShapeError);
  EXPECT_THROW(threshold_assign(f, 1.1), ShapeError);
}
