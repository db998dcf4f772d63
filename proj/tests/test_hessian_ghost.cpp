#include <gtest/gtest.h>

#include <cmath>
#include <optional>

#include "ghost/hessian_ghost.hpp"

using namespace ghost;

TEST(HessianGhost, LogisticCurvature) {
  EXPECT_DOUBLE_EQ(logistic_curvature(0.0), 0.25);
  const double s = 1.0 / (1.0 + std::exp(-2.0));
  EXPECT_NEAR(logistic_curvature(2.0), s * (1.0 - s), 1e-15);
  EXPECT_EQ(logistic_curvature(3.0), logistic_curvature(-3.0));
  EXPECT_GT(logistic_curvature(700.0), 0.0);
  EXPECT_TRUE(std::isfinite(logistic_curvature(1e6)));
}

TEST(HessianGhost, DirectionalCurvatureAndStep) {
  const MarginState m{0.0, 4.0};
  EXPECT_DOUBLE_EQ(directional_curvature(m), 4.0);
  EXPECT_DOUBLE_EQ(hessian_step(4.0), 0.5);
  EXPECT_EQ(hessian_step(0.0), kInfinity);
  EXPECT_EQ(hessian_step(-1.0), kInfinity);
}

TEST(HessianGhost, RatioClosedForm) {
  for (double delta : {-3.0, 0.0, 1.0, 5.0, 12.0}) {
    for (double gap : {0.5, 3.0, -40.0}) {
      const auto g = ghost_vs_hessian({delta, gap});
      const double expect = 2.0 * std::pow(1.0 + std::exp(delta), 2) * std::exp(-delta) / (kPi * std::abs(gap));
      EXPECT_NEAR(g.ratio / expect, 1.0, 1e-12);
      EXPECT_NEAR(g.ratio_exact, g.tau_h / (std::hypot(delta, kPi) / std::abs(gap)), 1e-12 * g.ratio_exact);
      EXPECT_LE(g.ratio_exact, g.ratio);
    }
  }
  EXPECT_THROW(ghost_vs_hessian({1.0, 0.0}), Error);
}

TEST(HessianGhost, BalancedRatio) {
  // delta = 0: tau_H = 8 / gap^2, rho_a = pi / gap, ratio = 8 / (pi gap)
  const auto g = ghost_vs_hessian({0.0, 2.0});
  EXPECT_NEAR(g.tau_h, 2.0, 1e-15);
  EXPECT_NEAR(g.ratio, 8.0 / (2.0 * kPi), 1e-15);
}

TEST(HessianGhost, CrossoverBisection) {
  for (double gap : {3.0, 5.0, 20.0, 100.0, -250.0}) {
    const auto d = crossover_margin_refined(gap);
    ASSERT_TRUE(d) << gap;
    EXPECT_NEAR(ghost_vs_hessian({*d, gap}).ratio, 1.0, 1e-9);
    if (std::abs(gap) >= 20.0) {
      EXPECT_NEAR(*d, crossover_margin(gap), 0.1);
    }
  }
}

TEST(HessianGhost, CrossoverGridWitness) {
  // first grid margin where tau_H exceeds rho_a brackets the bisection root
  const double gap = 30.0;
  const double root = *crossover_margin_refined(gap);
  double first = NAN;
  for (int i = 0; i <= 20000; ++i) {
    const double d = i * 1e-3;
    if (ghost_vs_hessian({d, gap}).ratio > 1.0) {
      first = d;
      break;
    }
  }
  EXPECT_GE(first, root);
  EXPECT_LE(first - root, 1e-3);
}

TEST(HessianGhost, NoCrossoverForSmallGap) {
  // the ratio never drops below 8 / (pi |gap|), which is >= 1 for |gap| <= 8 / pi
  EXPECT_FALSE(crossover_margin_refined(2.0));
  EXPECT_FALSE(crossover_margin_refined(8.0 / kPi - 1e-9));
  EXPECT_TRUE(crossover_margin_refined(8.0 / kPi + 1e-3));
  EXPECT_THROW(crossover_margin(0.0), Error);
}
