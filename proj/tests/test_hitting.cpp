#include <gtest/gtest.h>

#include <cmath>

#include "fwalk/hitting.hpp"

using namespace fwalk;

namespace {

Word w(const char* s) { return parse_word(s); }

// q_a = p_a + sum_{b != a} p_b q_{b^-1} q_a for nearest-neighbour walks.
std::vector<double> nn_hitting_fixed_point(const std::vector<double>& probs) {
  const std::size_t n = probs.size();
  std::vector<double> q(n, 0.0);
  auto inv = [](std::size_t i) { return i ^ 1u; };
  for (int it = 0; it < 100000; ++it) {
    std::vector<double> next(n);
    for (std::size_t a = 0; a < n; ++a) {
      double back = 0.0;
      for (std::size_t b = 0; b < n; ++b)
        if (b != a) back += probs[b] * q[inv(b)];
      next[a] = probs[a] / (1.0 - back);
    }
    q = next;
  }
  return q;
}

}  // namespace

TEST(Hitting, SimpleWalkRigorous) {
  HittingOptions o;
  o.mode = TailMode::Rigorous;
  const HittingSolver s(StepDistribution::simple(2), o);
  const auto u = s.hitting_probability(Word{}, w("a1"), 1e-6);
  EXPECT_NEAR(u.value, 1.0 / 3.0, 1e-6);
  EXPECT_LE(u.error, 1e-6);
  const auto fv = s.first_visit(Word{}, {w("a1")}, 1e-6);
  EXPECT_TRUE(fv.tail_rigorous);
  EXPECT_LE(fv.mass[0], 1.0 / 3.0 + 1e-15);
  EXPECT_GE(fv.mass[0] + fv.tail_bound, 1.0 / 3.0 - 1e-15);
}

TEST(Hitting, SimpleWalkValues) {
  const HittingSolver s(StepDistribution::simple(2));
  EXPECT_NEAR(s.hitting_probability(Word{}, w("a1"), 1e-9).value, 1.0 / 3.0, 1e-8);
  EXPECT_NEAR(s.hitting_probability(Word{}, w("a1a2"), 1e-9).value, 1.0 / 9.0, 1e-8);
  EXPECT_NEAR(s.hitting_probability(w("A2"), w("a1"), 1e-9).value, 1.0 / 9.0, 1e-8);
  EXPECT_EQ(s.hitting_probability(w("a1a2"), w("a1a2"), 1e-9).value, 1.0);
  EXPECT_NEAR(s.green(Word{}, 1e-9).value, 1.5, 1e-7);
  EXPECT_NEAR(s.green(w("a1"), 1e-9).value, 0.5, 1e-7);
}

TEST(Hitting, LeftInvariance) {
  const HittingSolver s(StepDistribution::nearest_neighbour(2, {0.4, 0.1, 0.3, 0.2}));
  const Word x = w("a2A1"), y = w("a2a2a1");
  EXPECT_NEAR(s.hitting_probability(x, y, 1e-9).value, s.hitting_probability(Word{}, inverse(x) * y, 1e-9).value, 1e-12);
}

TEST(Hitting, SeparatingSetIsHitAtOnce) {
  const auto fv = first_visit(StepDistribution::simple(2), Word{}, sphere(2, 1), 1e-9);
  EXPECT_NEAR(fv.total(), 1.0, 1e-15);
  for (double m : fv.mass) EXPECT_NEAR(m, 0.25, 1e-15);
}

TEST(Hitting, GatewayVertexTakesAllMass) {
  // from a1a1 the walk must cross e before it can reach a2
  const auto fv = first_visit(StepDistribution::simple(2), w("a1a1"), {Word{}, w("a2")}, 1e-9);
  EXPECT_NEAR(fv.at(Word{}), 1.0 / 9.0, 1e-8);
  EXPECT_NEAR(fv.at(w("a2")), 0.0, 1e-12);
  EXPECT_LT(fv.estimate_total(), 1.0);
}

TEST(Hitting, AnisotropicMatchesFixedPoint) {
  const std::vector<double> probs{0.4, 0.1, 0.3, 0.2};
  const auto q = nn_hitting_fixed_point(probs);
  const HittingSolver s(StepDistribution::nearest_neighbour(2, probs));
  const auto letters = alphabet(2);
  for (std::size_t i = 0; i < 4; ++i) {
    const auto u = s.hitting_probability(Word{}, Word{letters[i]}, 1e-9);
    EXPECT_NEAR(u.value, q[i], 1e-8) << to_string(Word{letters[i]});
  }
  // multiplicative along geodesics
  EXPECT_NEAR(s.hitting_probability(Word{}, w("a1A2a1"), 1e-9).value, q[0] * q[3] * q[0], 1e-8);
}

TEST(Hitting, BiasedWalkOnTheLine) {
  const auto p = StepDistribution::from_weights(1, {{w("a1"), 0.7}, {w("A1"), 0.3}});
  const HittingSolver s(p);
  EXPECT_NEAR(s.hitting_probability(Word{}, w("A1"), 1e-9).value, 3.0 / 7.0, 1e-7);
  EXPECT_NEAR(s.hitting_probability(Word{}, w("A1A1"), 1e-9).value, 9.0 / 49.0, 1e-7);
  EXPECT_NEAR(s.hitting_probability(Word{}, w("a1"), 1e-9).value, 1.0, 1e-7);
}

TEST(Hitting, MonteCarloAgreement) {
  const auto p = StepDistribution::from_weights(
      2, {{w("a1"), 0.3}, {w("A1"), 0.1}, {w("a2"), 0.2}, {w("A2"), 0.15}, {w("a1a2"), 0.25}});
  const Word target = w("a2");
  const double u = hitting_probability(p, Word{}, target, 1e-8).value;
  Rng rng(99);
  const DiscreteSampler draw(p.probs());
  const int paths = 20000;
  int hits = 0;
  for (int i = 0; i < paths; ++i) {
    Word x;
    while (x.size() < 40) {
      x = x * p.word(draw(rng));
      if (x == target) {
        ++hits;
        break;
      }
    }
  }
  const double f = static_cast<double>(hits) / paths;
  EXPECT_NEAR(f, u, 4.0 * std::sqrt(u * (1 - u) / paths) + 1e-4);
}

TEST(Green, PartialSumsStayBelow) {
  const auto p = StepDistribution::nearest_neighbour(2, {0.4, 0.1, 0.3, 0.2});
  const HittingSolver s(p);
  const auto powers = convolution_powers(p, 10);
  for (const char* x : {"e", "a1", "A2", "a1a2"}) {
    const auto g = s.green(w(x), 1e-9);
    EXPECT_LE(green_partial_sum(powers, w(x)), g.value + g.error);
  }
}

TEST(Hitting, ErrorsOnBadInput) {
  const HittingSolver s(StepDistribution::simple(2));
  EXPECT_THROW(s.first_visit(Word{}, {}, 1e-6), Error);
  EXPECT_THROW(s.first_visit(Word{}, {Word{}}, 1e-6), Error);
  EXPECT_THROW(s.first_visit(Word{}, {w("a1")}, 0.0), Error);
}

TEST(Hitting, EscapeBoundForTheSimpleWalk) {
  const HittingSolver s(StepDistribution::simple(2));
  const auto& e = s.escape_bound();
  ASSERT_TRUE(e.valid);
  EXPECT_LT(e.rho, 1.0);
  EXPECT_GE(e.rho, 1.0 / 3.0 - 1e-6);
}
