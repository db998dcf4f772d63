#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <vector>

#include "ghost/klbound.hpp"

using namespace ghost;

namespace {

SoftmaxPath random_path(std::mt19937_64& rng, std::size_t n) {
  std::normal_distribution<double> zd(0.0, 2.0), ad(0.0, 1.5);
  SoftmaxPath p;
  for (std::size_t k = 0; k < n; ++k) {
    p.z.push_back(zd(rng));
    p.a.push_back(ad(rng));
  }
  return p;
}

const SoftmaxPath kRef{{0.5, -1.0, 2.0}, {1.0, -0.3, 0.7}};

}  // namespace

TEST(KlBound, ForwardKlAgainstHighPrecision) {
  // 50-digit reference values of KL(p(t) || p(0)).
  EXPECT_NEAR(kl_exact(kRef, 0.37) / 0.0032003074442362582396, 1.0, 1e-12);
  EXPECT_NEAR(kl_exact(kRef, 1e-4) / 2.7352352862445975172e-10, 1.0, 1e-9);
  EXPECT_NEAR(kl_exact(kRef, -2.5) / 0.54325545279514394947, 1.0, 1e-12);
  EXPECT_EQ(kl_exact(kRef, 0.0), 0.0);
}

TEST(KlBound, ReverseKlAgainstHighPrecision) {
  EXPECT_NEAR(kl_reverse(kRef, 0.37), 0.0034606714562984548654, 1e-15);
  EXPECT_NEAR(kl_reverse(kRef, -2.5), 0.32999638570486580289, 1e-14);
}

TEST(KlBound, BregmanGapIsReverseKl) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> td(-3.0, 3.0);
  for (int i = 0; i < 2000; ++i) {
    const auto p = random_path(rng, 2 + i % 9);
    const double t = td(rng);
    EXPECT_NEAR(kl_bregman(p, t), kl_reverse(p, t), 1e-12);
  }
}

TEST(KlBound, ForwardAndReverseDifferAwayFromZero) {
  EXPECT_GT(std::abs(kl_exact(kRef, -2.5) - kl_bregman(kRef, -2.5)), 0.2);
  EXPECT_NEAR(kl_bregman(kRef, -2.5), 0.32999638570486580289, 1e-13);
}

TEST(KlBound, QuadraticTermIsHalfVariance) {
  // two classes with equal logits: Var = Delta^2 / 4
  const SoftmaxPath p{{0.0, 0.0}, {0.0, 2.0}};
  EXPECT_NEAR(slope_variance(p), 1.0, 1e-15);
  EXPECT_NEAR(kl_quadratic(p, 0.3), 0.045, 1e-15);
}

TEST(KlBound, SmallStepsApproachQuadratic) {
  for (double t : {1e-2, 1e-3, 1e-4}) {
    const double q = kl_quadratic(kRef, t);
    EXPECT_NEAR(kl_exact(kRef, t) / q, 1.0, 20.0 * t);
    EXPECT_NEAR(kl_bregman(kRef, t) / q, 1.0, 20.0 * t);
  }
}

TEST(KlBound, CubicRemainderBound) {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> td(-3.0, 3.0);
  int violations = 0;
  for (int i = 0; i < 5000; ++i) {
    const auto p = random_path(rng, 2 + i % 9);
    const double t = td(rng) / p.spread();
    const double rem = std::abs(kl_exact(p, t) - kl_quadratic(p, t));
    violations += rem > remainder_bound(t, p.spread());
  }
  EXPECT_EQ(violations, 0);
}

TEST(KlBound, RemainderConstant) {
  EXPECT_DOUBLE_EQ(kRemainderConstant, 1.0 / (18.0 * std::sqrt(3.0)));
  EXPECT_NEAR(remainder_bound(-2.0, 1.5), 27.0 * kRemainderConstant, 1e-15);
}

TEST(KlBound, ThirdMomentWitnessIsExtremal) {
  const auto w = third_moment_witness(2.0);
  EXPECT_NEAR(w.p_star, (3.0 - std::sqrt(3.0)) / 6.0, 1e-16);
  EXPECT_NEAR(w.moment, 8.0 / (6.0 * std::sqrt(3.0)), 1e-12);
  // brute-force grid over p: nothing beats the witness
  double best = 0.0;
  for (int i = 0; i <= 100000; ++i) best = std::max(best, two_point_third_moment(2.0, i / 100000.0));
  EXPECT_LE(best, w.moment + 1e-15);
  EXPECT_NEAR(best, w.moment, 1e-9);
  EXPECT_THROW(third_moment_witness(0.0), Error);
}

TEST(KlBound, CrossoverScale) {
  const SoftmaxPath p{{0.0, 0.0}, {0.0, 2.0}};
  const double tc = kl_crossover(p);
  EXPECT_NEAR(kl_quadratic(p, tc), remainder_bound(tc, 2.0), 1e-12);
  EXPECT_NEAR(tc, 9.0 * std::sqrt(3.0) / 4.0 / 2.0, 1e-12);
}

TEST(KlBound, Validation) {
  EXPECT_THROW(kl_exact(SoftmaxPath{{0.0}, {1.0}}, 0.1), Error);
  EXPECT_THROW(kl_exact(SoftmaxPath{{0.0, 1.0}, {1.0}}, 0.1), Error);
  EXPECT_THROW(kl_exact(kRef, INFINITY), Error);
}

TEST(KlBound, LargeStepsStayFinite) {
  const double v = kl_exact(kRef, 400.0);
  EXPECT_TRUE(std::isfinite(v));
  // p(t) concentrates on argmax a = class 0: KL -> -log p_0(0)
  const double logp0 = 0.5 - std::log(std::exp(0.5) + std::exp(-1.0) + std::exp(2.0));
  EXPECT_NEAR(v, -logp0, 1e-9);
}
