#include <gtest/gtest.h>

#include <cmath>

#include "fwalk/barriers.hpp"
#include "fwalk/martin.hpp"

using namespace fwalk;

namespace {

Word w(const char* s) { return parse_word(s); }

std::vector<std::pair<Word, double>> mixed_support(Rng* rng = nullptr) {
  std::vector<std::pair<Word, double>> out;
  for (const char* s : {"a1", "A1", "a2", "A2", "a1a2", "a2a1", "A1A1"})
    out.emplace_back(w(s), rng ? 0.1 + rng->uniform() : 1.0);
  return out;
}

}  // namespace

TEST(Barriers, NearestNeighbourChainIsTheRay) {
  const auto p = StepDistribution::simple(2);
  const CylinderPrefix xi(w("a1a2a2A1a2"));
  const auto chain = build_barrier_chain(p, xi, Word{});
  ASSERT_EQ(chain.size(), 3u);
  for (std::size_t s = 0; s < chain.size(); ++s) {
    ASSERT_EQ(chain[s].size(), 1u);
    EXPECT_EQ(chain[s].members[0], xi.word().prefix(s + 2));
  }
}

TEST(Barriers, RangeTwoBarriersHaveTwoMembers) {
  const auto p = StepDistribution::from_weights(2, mixed_support());
  ASSERT_EQ(p.range(), 2u);
  const CylinderPrefix xi(w("a1a2a2A1a2a1a1"));
  const auto chain = build_barrier_chain(p, xi, Word{});
  ASSERT_GE(chain.size(), 2u);
  for (std::size_t s = 0; s < chain.size(); ++s) {
    ASSERT_EQ(chain[s].size(), 2u);
    EXPECT_EQ(tree_distance(chain[s].members[0], chain[s].members[1]), 1u);
    for (const Word& m : chain[s].members) {
      EXPECT_LE(tree_distance(m, chain[s].near), 1u);
      EXPECT_LE(tree_distance(m, chain[s].far), 1u);
    }
    if (s > 0) {
      EXPECT_EQ(tree_distance(chain[s - 1].far, chain[s].near), 1u);
      for (const Word& m : chain[s].members) EXPECT_FALSE(chain[s - 1].contains(m));
    }
  }
}

TEST(Barriers, ShortPrefixGivesEmptyChain) {
  const auto p = StepDistribution::from_weights(2, mixed_support());
  EXPECT_TRUE(build_barrier_chain(p, CylinderPrefix(w("a1a2a1")), Word{}).empty());
}

TEST(Birkhoff, Examples) {
  EXPECT_DOUBLE_EQ(birkhoff_distance({1, 2}, {1, 2}), 0.0);
  EXPECT_NEAR(birkhoff_distance({1, 2}, {2, 1}), std::log(4.0), 1e-15);
  EXPECT_NEAR(birkhoff_distance({3, 6, 9}, {1, 2, 3}), 0.0, 1e-15);
  EXPECT_NEAR(birkhoff_distance({1, 0, 2}, {2, 0, 1}), std::log(4.0), 1e-15);
  try {
    birkhoff_distance({1, 0}, {1, 1});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::ZeroCoordinate);
  }
}

TEST(Contraction, Examples) {
  EXPECT_DOUBLE_EQ(contraction_coeff(make_matrix(1, 1, {0.4})), 0.0);
  EXPECT_NEAR(contraction_coeff(make_matrix(2, 2, {1, 2, 2, 4})), 0.0, 1e-15);
  // column pairs give Diam = ln 4, so beta = tanh(ln 4 / 4) = 1/3
  const BarrierMatrix A = make_matrix(2, 2, {2, 1, 1, 2});
  EXPECT_NEAR(A.diam, std::log(4.0), 1e-15);
  EXPECT_NEAR(A.beta, 1.0 / 3.0, 1e-15);
  EXPECT_THROW(make_matrix(2, 2, {0, 0, 0, 0}), Error);
}

TEST(Contraction, BoundIsSharpForTwoByTwo) {
  const BarrierMatrix A = make_matrix(2, 2, {2, 1, 1, 2});
  double best = 0.0;
  for (double t = 1e-4; t < 1e4; t *= 1.1) {
    const ConeVector f{1, t}, g{1, t * (1 + 1e-6)};
    const double ratio = birkhoff_distance(A.apply(f), A.apply(g)) / birkhoff_distance(f, g);
    EXPECT_LE(ratio, A.beta + 1e-6);
    best = std::max(best, ratio);
  }
  EXPECT_GT(best, A.beta - 1e-3);
}

TEST(BarrierMatrix, SimpleWalkEntriesAreOneThird) {
  const BarrierFamily F(std::make_shared<const HittingSolver>(StepDistribution::simple(2)), 1e-9);
  EXPECT_EQ(F.count(), 4u);
  EXPECT_EQ(F.dimension(), 1u);
  for (const auto& A : F.all()) {
    EXPECT_NEAR((*A)(0, 0), 1.0 / 3.0, 1e-8);
    EXPECT_EQ(A->beta, 0.0);
  }
}

TEST(BarrierMatrix, TranslatesShareOneObject) {
  const auto p = StepDistribution::from_weights(2, mixed_support());
  const BarrierFamily F(std::make_shared<const HittingSolver>(p), 1e-6);
  const auto c1 = build_barrier_chain(p, CylinderPrefix(w("a1a2a2A1a2a1a1a2a1")), Word{});
  const auto c2 = build_barrier_chain(p, CylinderPrefix(w("a2a1a1a2a2A1a2a1a1a2a1")), Word{});
  // the second ray is the first translated by a2a1
  const auto A = F.matrix(c1[1], c1[2]);
  bool found = false;
  for (std::size_t s = 1; s < c2.size(); ++s)
    if (inverse(c2[s - 1].near) * c2[s].far == A->shape) found = found || F.matrix(c2[s - 1], c2[s]) == A;
  EXPECT_TRUE(found);
  const auto direct = barrier_matrix(p, c1[1], c1[2], 1e-6);
  for (std::size_t i = 0; i < direct.entries.size(); ++i) EXPECT_NEAR(direct.entries[i], A->entries[i], 1e-5);
}

TEST(BarrierMatrix, RowSumsAtMostOneAndContraction) {
  Rng rng(4);
  const auto p = StepDistribution::from_weights(2, mixed_support(&rng));
  const BarrierFamily F(std::make_shared<const HittingSolver>(p), 1e-7);
  EXPECT_LT(F.beta0(), 1.0);
  for (const auto& A : F.all()) {
    for (std::size_t i = 0; i < A->rows; ++i) {
      double s = 0.0;
      for (std::size_t j = 0; j < A->cols; ++j) s += (*A)(i, j);
      EXPECT_LE(s, 1.0 + A->row_error[i]);
    }
    EXPECT_TRUE(A->zeros_in_full_columns()) << to_string(A->shape);
    for (int t = 0; t < 20; ++t) {
      ConeVector f(A->cols), g(A->cols);
      for (std::size_t j = 0; j < A->cols; ++j) {
        f[j] = 0.05 + rng.uniform();
        g[j] = 0.05 + rng.uniform();
      }
      for (std::size_t j : A->zero_columns) f[j] = g[j] = 0.0;
      const double before = birkhoff_distance(f, g);
      if (before < 1e-12) continue;
      EXPECT_LE(birkhoff_distance(A->apply(f), A->apply(g)), A->beta * before + 1e-12);
    }
  }
}

TEST(BarrierMatrix, ZeroColumnsDependOnlyOnTheShape) {
  Rng rng(17);
  std::vector<std::vector<std::vector<std::size_t>>> zeros;
  std::size_t total = 0;
  for (int t = 0; t < 10; ++t) {
    const auto p = StepDistribution::from_weights(2, mixed_support(&rng));
    const BarrierFamily F(std::make_shared<const HittingSolver>(p), 1e-5);
    std::vector<std::vector<std::size_t>> z;
    for (const auto& A : F.all()) {
      z.push_back(A->zero_columns);
      total += A->zero_columns.size();
    }
    zeros.push_back(z);
  }
  EXPECT_GT(total, 0u);
  for (std::size_t t = 1; t < zeros.size(); ++t) EXPECT_EQ(zeros[t], zeros[0]);
}

TEST(Factorization, NearestNeighbour) {
  const auto p = StepDistribution::nearest_neighbour(2, {0.4, 0.1, 0.3, 0.2});
  const BarrierFamily F(std::make_shared<const HittingSolver>(p), 1e-10);
  for (const char* y : {"a1a2a2", "a2a1A2a1", "A1A1a2a2a1"}) {
    const auto f = barrier_factorization(F, Word{}, w(y), 1e-10);
    EXPECT_GE(f.barriers, 1u);
    EXPECT_TRUE(f.agrees()) << y << " " << f.direct << " " << f.factored;
  }
}

TEST(Factorization, RangeTwo) {
  Rng rng(2);
  const auto p = StepDistribution::from_weights(2, mixed_support(&rng));
  const BarrierFamily F(std::make_shared<const HittingSolver>(p), 1e-8);
  for (const char* y : {"a1a2a1a1a2a2a1", "a2a1a1a2a2a1a2a1a1", "A1a2a2a1a2a1a1a2a1a2a1"}) {
    const auto f = barrier_factorization(F, Word{}, w(y), 1e-8);
    EXPECT_GE(f.barriers, 2u);
    EXPECT_TRUE(f.agrees()) << y << " " << f.direct << " " << f.factored;
  }
  const auto g = barrier_factorization(F, w("A2"), w("a1a2a1a1a2a1"), 1e-8);
  EXPECT_TRUE(g.agrees());
  EXPECT_THROW(barrier_factorization(F, Word{}, w("a1a2"), 1e-8), Error);
}

TEST(Barriers, TrajectoriesCrossTheFirstBarrier) {
  Rng wr(5);
  const auto p = StepDistribution::from_weights(2, mixed_support(&wr));
  const Word y = w("a1a2a1a2a1");
  const auto chain = build_barrier_chain(p, CylinderPrefix(y), Word{});
  ASSERT_FALSE(chain.empty());
  const Barrier& V = chain.front();
  Rng rng(6);
  const DiscreteSampler draw(p.probs());
  std::size_t reached = 0, violations = 0;
  for (int i = 0; i < 100000; ++i) {
    Word x;
    bool entered = false;
    while (x.size() < y.size() + 12) {
      x = x * p.word(draw(rng));
      entered = entered || V.contains(x);
      if (x == y) {
        ++reached;
        violations += !entered;
        break;
      }
    }
  }
  EXPECT_GT(reached, 100u);
  EXPECT_EQ(violations, 0u);
}
