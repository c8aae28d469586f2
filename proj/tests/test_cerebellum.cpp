#include <cmath>

#include <gtest/gtest.h>

#include "cortexkit/cerebellum.hpp"
#include "cortexkit/matrix.hpp"

using namespace cortexkit;

TEST(Cerebellum, FullWeightIsTotal) {
  GranulePurkinje gp(10);
  EXPECT_EQ(effective_weight(gp), 1.0);
  EXPECT_EQ(gp.enabled_count(), 10);
}

TEST(Cerebellum, ThreeSilencedIsExactlyPointSeven) {
  GranulePurkinje gp(10);
  for (int i : {2, 5, 9}) gp.set_enabled(i, false);
  EXPECT_EQ(effective_weight(gp), 0.7);
}

TEST(Cerebellum, HundredCellsGivePrecisionOneHundredth) {
  GranulePurkinje gp(100);
  gp.set_enabled(0, false);
  EXPECT_EQ(effective_weight(gp), 0.99);
  EXPECT_DOUBLE_EQ(gp.synapse_weight(), 0.01);
}

TEST(Cerebellum, PlanFromOneToPointSeven) {
  GranulePurkinje gp(10);
  const auto plan = plan_adjustment(gp, 0.7);
  EXPECT_EQ(plan.disable.size(), 3u);
  EXPECT_TRUE(plan.enable.empty());
  EXPECT_EQ(plan.residual, 0.0);
  EXPECT_EQ(plan.disable, (std::vector<int>{9, 8, 7}));
  apply(gp, plan);
  EXPECT_EQ(effective_weight(gp), 0.7);
}

TEST(Cerebellum, TargetEqualToCurrentIsEmpty) {
  GranulePurkinje gp(10);
  gp.set_enabled(4, false);
  EXPECT_EQ(plan_adjustment(gp, 0.9).size(), 0u);
}

TEST(Cerebellum, RoundsToNearestLevel) {
  GranulePurkinje gp(10);
  const auto plan = plan_adjustment(gp, 0.33);
  EXPECT_EQ(plan.target_level, 3);
  EXPECT_NEAR(plan.achieved, 0.3, 1e-15);
  EXPECT_NEAR(plan.residual, 0.03, 1e-12);
  EXPECT_LE(plan.residual, 0.05);
}

TEST(Cerebellum, LtpRestoresLowestSilenced) {
  GranulePurkinje gp(10);
  for (int i = 0; i < 10; ++i) gp.set_enabled(i, false);
  const auto plan = plan_adjustment(gp, 0.2);
  EXPECT_EQ(plan.enable, (std::vector<int>{0, 1}));
  apply(gp, plan);
  EXPECT_TRUE(gp.enabled(0));
  EXPECT_TRUE(gp.enabled(1));
  EXPECT_FALSE(gp.enabled(2));
}

TEST(Cerebellum, OutOfRangeTargetRejected) {
  GranulePurkinje gp(10);
  EXPECT_THROW(plan_adjustment(gp, 1.2), std::out_of_range);
  EXPECT_THROW(plan_adjustment(gp, -0.1), std::out_of_range);
  EXPECT_THROW(GranulePurkinje(0), std::invalid_argument);
}

TEST(Cerebellum, QuantizationBoundOverRandomTargets) {
  Rng rng(42);
  for (int n : {10, 100, 1000}) {
    GranulePurkinje gp(n, 1.0);
    for (int t = 0; t < 1000; ++t) {
      const double target = uniform01(rng);
      const auto plan = plan_adjustment(gp, target);
      ASSERT_LE(plan.residual, 1.0 / (2.0 * n) + 1e-12) << "n=" << n << " target=" << target;
      apply(gp, plan);
      // Minimal: exactly |level change| toggles, all in one direction.
      EXPECT_TRUE(plan.enable.empty() || plan.disable.empty());
      EXPECT_EQ(gp.enabled_count(), plan.target_level);
      EXPECT_GE(effective_weight(gp), 0.0);
      EXPECT_LE(effective_weight(gp), gp.total());
    }
  }
}
