#include <gtest/gtest.h>

#include <cmath>

#include "fwalk/walk.hpp"

using namespace fwalk;

namespace {
Word w(const char* s) { return parse_word(s); }
}  // namespace

TEST(StepDistribution, NormalizesAndMerges) {
  const auto p = StepDistribution::from_weights(2, {{w("a1"), 2.0}, {w("A1"), 1.0}, {w("a2"), 1.0}, {w("A2"), 1.0}, {w("a1"), 1.0}});
  EXPECT_EQ(p.size(), 4u);
  EXPECT_DOUBLE_EQ(p.mass(w("a1")), 0.5);
  EXPECT_DOUBLE_EQ(p.mass(w("a2")), 1.0 / 6.0);
  EXPECT_EQ(p.range(), 1u);
}

TEST(StepDistribution, RejectsBadInput) {
  try {
    StepDistribution::from_weights(2, {{w("a1"), 1.0}, {w("A1"), 1.0}});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::NotGenerating);
  }
  EXPECT_THROW(StepDistribution::from_weights(2, {{w("a1"), -1.0}}), Error);
  EXPECT_THROW(StepDistribution::from_weights(1, {{w("a2"), 1.0}}), Error);
}

TEST(StepDistribution, SemigroupGenerationWithoutInverses) {
  // inverses arise as products, e.g. a2 * A2A1 = A1
  const auto p = StepDistribution::from_weights(2, {{w("a1"), 1.0}, {w("a2"), 1.0}, {w("A2A1"), 1.0}});
  EXPECT_TRUE(p.generates_group());
  EXPECT_FALSE(p.contains_generators());
}

TEST(Convolution, TwoStepsOfTheSimpleWalk) {
  const auto p = StepDistribution::simple(2);
  const auto t = convolution_powers(p, 2);
  EXPECT_NEAR(t[2].at(Word{}), 0.25, 1e-15);
  EXPECT_NEAR(t[2].at(w("a1a2")), 1.0 / 16.0, 1e-15);
  EXPECT_NEAR(t[2].at(w("a1a1")), 1.0 / 16.0, 1e-15);
  EXPECT_EQ(t[2].masses.size(), 13u);
  EXPECT_NEAR(t[2].total(), 1.0, 1e-14);
  EXPECT_NEAR(t[1].shannon(), std::log(4.0), 1e-14);
}

TEST(Convolution, MeanLengthOfTheSimpleWalk) {
  // E|X_n| for SRW on F_2: each step away from e moves out with prob 3/4
  const auto t = convolution_powers(StepDistribution::simple(2), 8);
  std::vector<double> pe(9, 0.0), mean(9, 0.0);
  for (std::size_t n = 0; n <= 8; ++n) pe[n] = t[n].at(Word{});
  for (std::size_t n = 1; n <= 8; ++n) mean[n] = mean[n - 1] + 0.5 + 0.5 * pe[n - 1];
  for (std::size_t n = 0; n <= 8; ++n) EXPECT_NEAR(t[n].mean_length(), mean[n], 1e-12);
}

TEST(Convolution, CapIsEnforced) {
  try {
    convolution_powers(StepDistribution::simple(2), 8, 100);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::MemoryBudgetExceeded);
  }
}

TEST(EnsureGenerators, SquareChargesAllLetters) {
  const auto p = StepDistribution::from_weights(
      2, {{w("a1"), 1.0}, {w("a2"), 1.0}, {w("a1A2"), 1.0}, {w("A1a2"), 1.0}, {w("A1A2"), 1.0}});
  const auto [q, k] = ensure_generators(p);
  EXPECT_EQ(k, 2);
  EXPECT_TRUE(q.contains_generators());
  EXPECT_NEAR(q.mass(w("A1")), 1.0 / 25.0, 1e-15);

  const auto s = StepDistribution::simple(2);
  EXPECT_EQ(ensure_generators(s).second, 1);
}

TEST(Paths, DeterministicForASeed) {
  const auto p = StepDistribution::nearest_neighbour(2, {0.4, 0.1, 0.3, 0.2});
  const auto a = sample_path(p, 200, 42), b = sample_path(p, 200, 42), c = sample_path(p, 200, 43);
  EXPECT_EQ(a.increments, b.increments);
  EXPECT_NE(a.increments, c.increments);
  const auto pos = a.positions(p);
  EXPECT_EQ(pos.size(), 201u);
  EXPECT_EQ(pos.back(), a.final_position(p));
  for (std::size_t k = 1; k < pos.size(); ++k) EXPECT_EQ(tree_distance(pos[k - 1], pos[k]), 1u);
}

TEST(Paths, EmpiricalFrequencies) {
  const auto p = StepDistribution::nearest_neighbour(2, {0.4, 0.1, 0.3, 0.2});
  const auto s = sample_path(p, 100000, 7);
  std::vector<double> count(4, 0.0);
  for (auto i : s.increments) count[i] += 1.0;
  for (std::size_t i = 0; i < 4; ++i) {
    const double f = count[i] / 1e5, q = p.prob(i);
    EXPECT_NEAR(f, q, 4.0 * std::sqrt(q * (1 - q) / 1e5));
  }
}

TEST(Decay, SimpleWalkApproachesTheSpectralRadius) {
  const auto est = estimate_decay(StepDistribution::simple(2), 12);
  const double rho = std::sqrt(3.0) / 2.0;
  EXPECT_NEAR(est.zeta, rho, 0.01);
  EXPECT_GT(std::abs(est.zeta_uncorrected - rho), std::abs(est.zeta - rho));
  for (std::size_t n = 0; n <= 12; ++n) EXPECT_LE(est.sups[n], est.c * std::pow(est.zeta, double(n)) * (1 + 1e-12));
}

TEST(StepDistribution, ReversedAndRelabeled) {
  const auto p = StepDistribution::from_weights(2, {{w("a1a2"), 1.0}, {w("A1"), 2.0}, {w("a2"), 1.0}, {w("A2"), 1.0}});
  const auto q = p.reversed();
  EXPECT_DOUBLE_EQ(q.mass(w("A2A1")), p.mass(w("a1a2")));
  EXPECT_DOUBLE_EQ(q.mass(w("a1")), p.mass(w("A1")));
  const auto s = p.relabeled({2, 1}, {1, -1});
  EXPECT_DOUBLE_EQ(s.mass(w("a2A1")), p.mass(w("a1a2")));
}
