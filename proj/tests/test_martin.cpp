#include <gtest/gtest.h>

#include <cmath>

#include "fwalk/martin.hpp"

using namespace fwalk;

namespace {

Word w(const char* s) { return parse_word(s); }

StepDistribution mixed_walk(std::uint64_t seed) {
  Rng rng(seed);
  std::vector<std::pair<Word, double>> sup;
  for (const char* s : {"a1", "A1", "a2", "A2", "a1a2", "a2a1", "A1A1"}) sup.emplace_back(w(s), 0.1 + rng.uniform());
  return StepDistribution::from_weights(2, sup);
}

const Word kRay = parse_word("a1a2a2A1a2a1a1a2a1a2A1A1a2a2a1a1a2a1a2a2a1a2");

}  // namespace

TEST(Phi, SimpleWalkIsMinusLogThree) {
  const MartinKernel K(StepDistribution::simple(2), 1e-10);
  Rng rng(1);
  for (int t = 0; t < 10; ++t) {
    const CylinderPrefix xi(random_reduced_word(2, 8, rng));
    const auto v = K.phi(xi, 3);
    EXPECT_NEAR(v.value, -std::log(3.0), std::max(v.error_bound, 1e-9));
    EXPECT_LE(v.value, 0.0);
  }
}

TEST(Phi, NearestNeighbourClosedForm) {
  // K_xi(xi_1) = 1 / u(e, xi_1) when steps have length one
  const auto p = StepDistribution::nearest_neighbour(2, {0.4, 0.1, 0.3, 0.2});
  const MartinKernel K(p, 1e-10);
  for (const char* s : {"a1a2a1a1", "A1A2A2a1", "a2a1a1a1", "A2a1A2a1"}) {
    const CylinderPrefix xi(w(s));
    const auto v = K.phi(xi, 2);
    const double u = hitting_probability(p, Word{}, Word{xi[0]}, 1e-11).value;
    EXPECT_NEAR(v.value, std::log(u), 1e-8) << s;
    EXPECT_LE(v.value, 0.0);
  }
}

TEST(Phi, ErrorBoundContracts) {
  const MartinKernel K(mixed_walk(2), 1e-9);
  const double b0 = K.family().beta0();
  ASSERT_GT(b0, 0.0);
  ASSERT_LT(b0, 1.0);
  const CylinderPrefix xi(kRay);
  for (std::size_t k = 2; k < 8; ++k) {
    const auto a = K.phi(xi, k), b = K.phi(xi, k + 1);
    EXPECT_LE(b.projective_error, b0 * a.projective_error * (1 + 1e-12));
    // the limit does not depend on where the product is started
    EXPECT_NEAR(a.value, b.value, a.error_bound + b.error_bound);
  }
}

TEST(Phi, RatioFormAgreesWithHitting) {
  const auto p = mixed_walk(2);
  const MartinKernel K(p, 1e-9);
  const HittingSolver s(p);
  Rng rng(8);
  for (int t = 0; t < 4; ++t) {
    const Word ray = random_reduced_word(2, 12, rng);
    const CylinderPrefix xi(ray);
    const auto v = K.phi(xi, 5);
    const Word y = ray.prefix(8);
    const double ratio = s.hitting_probability(Word{ray[0]}, y, 1e-11).value / s.hitting_probability(Word{}, y, 1e-11).value;
    EXPECT_NEAR(v.value, -std::log(ratio), 1e-6) << to_string(ray);
  }
}

TEST(Phi, InsufficientDepth) {
  const MartinKernel K(mixed_walk(2), 1e-8);
  try {
    K.phi(CylinderPrefix(w("a1a2a1")), 3);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::InsufficientDepth);
  }
  EXPECT_THROW(K.phi(CylinderPrefix(kRay), 0), Error);
}

TEST(LogKernel, IdentityIsZero) {
  const MartinKernel K(mixed_walk(3), 1e-6);
  const auto v = K.log_kernel(CylinderPrefix(kRay), Word{}, 4);
  EXPECT_EQ(v.value, 0.0);
  EXPECT_EQ(v.error_bound, 0.0);
}

TEST(LogKernel, SimpleWalkBusemannForm) {
  const MartinKernel K(StepDistribution::simple(2), 1e-10);
  const CylinderPrefix xi(kRay);
  for (std::size_t n = 1; n <= 3; ++n)
    for (const Word& x : sphere(2, n)) {
      const auto v = K.log_kernel(xi, x, 3);
      EXPECT_NEAR(v.value, -static_cast<double>(busemann(xi, x)) * std::log(3.0), 1e-8) << to_string(x);
    }
}

TEST(LogKernel, TelescopedMatchesHittingQuotient) {
  const auto p = mixed_walk(2);
  const MartinKernel K(p, 1e-9);
  const HittingSolver s(p);
  const CylinderPrefix xi(kRay);
  const Word y = kRay.prefix(12);
  for (const char* xs : {"a1", "A2", "a1a2", "a2A1a2"}) {
    const Word x = w(xs);
    const auto v = K.log_kernel(xi, x, 6);
    const double direct = std::log(s.hitting_probability(x, y, 1e-11).value / s.hitting_probability(Word{}, y, 1e-11).value);
    EXPECT_NEAR(v.value, direct, 1e-4) << xs;
    EXPECT_NEAR(v.value, direct, v.error_bound) << xs;
  }
}

TEST(LogKernel, Cocycle) {
  // K_xi(ab) = K_xi(a) K_{a^-1 xi}(b)
  const MartinKernel K(mixed_walk(4), 1e-8);
  const CylinderPrefix xi(kRay);
  const Word a = w("a2A1"), b = w("A1a2");
  const auto ab = K.log_kernel(xi, a * b, 6);
  const auto la = K.log_kernel(xi, a, 6);
  const auto lb = K.log_kernel(CylinderPrefix(inverse(a) * kRay), b, 6);
  EXPECT_NEAR(ab.value, la.value + lb.value, 1e-5);
}

TEST(Holder, SimpleWalkIsConstant) {
  const MartinKernel K(StepDistribution::simple(2), 1e-10);
  const auto fit = holder_norm_estimate(K, 1, 6, 10, 3, 2);
  EXPECT_TRUE(fit.degenerate);
  for (double s : fit.sup_diff) EXPECT_LT(s, 1e-9);
}

TEST(Holder, RangeTwoWalkHasRateBelowOne) {
  const MartinKernel K(mixed_walk(2), 1e-9);
  const auto fit = holder_norm_estimate(K, 1, 8, 20, 1, 6);
  ASSERT_FALSE(fit.degenerate);
  EXPECT_LT(fit.beta_hat, 1.0);
  EXPECT_TRUE(fit.bound_holds());
}
