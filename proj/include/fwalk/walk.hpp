#pragma once

// Step distributions on F_d, exact convolution powers, path sampling and the
// exponential decay rate of sup_x p^(n)(x).

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include "fwalk/error.hpp"
#include "fwalk/free_group.hpp"
#include "fwalk/rng.hpp"

namespace fwalk {

/// Default cap on the number of entries of any convolution table.
inline constexpr std::size_t kDefaultTableCap = 6'000'000;

// ── StepDistribution ────────────────────────────────────────────────────────

class StepDistribution {
 public:
  enum class Check { Generating, None };

  /// Builds from (word, weight) pairs; weights are normalized. Duplicate words
  /// are merged. With Check::Generating the support must generate F_d as a
  /// semigroup.
  static StepDistribution from_weights(int d, const std::vector<std::pair<Word, double>>& weights,
                                       Check check = Check::Generating) {
    if (d < 1) fail(ErrorKind::InvalidArgument, "rank d must be >= 1");
    std::map<Word, double> merged;
    for (const auto& [w, x] : weights) {
      if (!(x > 0.0) || !std::isfinite(x))
        fail(ErrorKind::InvalidArgument, "weight for " + to_string(w) + " must be positive");
      if (w.rank_used() > d)
        fail(ErrorKind::InvalidArgument, "word " + to_string(w) + " uses a generator beyond rank " + std::to_string(d));
      merged[w] += x;
    }
    if (merged.empty()) fail(ErrorKind::InvalidArgument, "empty support");
    double total = 0.0;
    for (const auto& [w, x] : merged) total += x;
    StepDistribution p;
    p.d_ = d;
    for (const auto& [w, x] : merged) {
      p.support_.push_back(w);
      p.probs_.push_back(x / total);
      p.r_ = std::max(p.r_, w.size());
    }
    p.normalization_ = total;
    if (check == Check::Generating && !p.generates_group())
      fail(ErrorKind::NotGenerating, "support does not generate F_" + std::to_string(d) + " as a semigroup");
    return p;
  }

  /// Uniform measure on the 2d generators and inverses.
  static StepDistribution simple(int d) {
    std::vector<std::pair<Word, double>> w;
    for (Letter a : alphabet(d)) w.emplace_back(Word{a}, 1.0);
    return from_weights(d, w);
  }

  /// Nearest-neighbour walk with probabilities in canonical letter order.
  static StepDistribution nearest_neighbour(int d, const std::vector<double>& probs) {
    if (probs.size() != static_cast<std::size_t>(2 * d))
      fail(ErrorKind::InvalidArgument, "need 2d probabilities");
    std::vector<std::pair<Word, double>> w;
    const auto letters = alphabet(d);
    for (std::size_t i = 0; i < letters.size(); ++i) w.emplace_back(Word{letters[i]}, probs[i]);
    return from_weights(d, w);
  }

  int rank() const { return d_; }
  std::size_t size() const { return support_.size(); }
  const std::vector<Word>& support() const { return support_; }
  const std::vector<double>& probs() const { return probs_; }
  const Word& word(std::size_t i) const { return support_[i]; }
  double prob(std::size_t i) const { return probs_[i]; }
  /// max |x| over the support.
  std::size_t range() const { return r_; }
  /// Sum of the raw weights before normalization.
  double normalization() const { return normalization_; }

  double mass(const Word& x) const {
    for (std::size_t i = 0; i < size(); ++i)
      if (support_[i] == x) return probs_[i];
    return 0.0;
  }

  bool contains_generators() const {
    for (Letter a : alphabet(d_))
      if (mass(Word{a}) <= 0.0) return false;
    return true;
  }

  bool is_symmetric() const {
    for (std::size_t i = 0; i < size(); ++i)
      if (std::abs(mass(inverse(support_[i])) - probs_[i]) > 1e-15) return false;
    return true;
  }

  /// The reflected law x -> p(x^{-1}).
  StepDistribution reversed() const {
    std::vector<std::pair<Word, double>> w;
    for (std::size_t i = 0; i < size(); ++i) w.emplace_back(inverse(support_[i]), probs_[i]);
    return from_weights(d_, w, Check::None);
  }

  /// Image under the letter substitution a_i -> a_{perm[i-1]}^{sign[i-1]}.
  StepDistribution relabeled(const std::vector<int>& perm, const std::vector<int>& sign) const {
    std::vector<std::pair<Word, double>> w;
    for (std::size_t i = 0; i < size(); ++i) {
      Word x;
      for (std::size_t k = 0; k < support_[i].size(); ++k) {
        const Letter a = support_[i][k];
        const int g = std::abs(a) - 1;
        const Letter img = perm[g] * sign[g];
        x.push_back(a > 0 ? img : -img);
      }
      w.emplace_back(x, probs_[i]);
    }
    return from_weights(d_, w, Check::None);
  }

  std::vector<std::pair<Word, double>> entries() const {
    std::vector<std::pair<Word, double>> out;
    for (std::size_t i = 0; i < size(); ++i) out.emplace_back(support_[i], probs_[i]);
    return out;
  }

  /// Semigroup generation test: closes the support under right multiplication
  /// inside a ball of radius 4r + 2 and looks for every generator and inverse.
  bool generates_group() const {
    const std::size_t limit = 4 * r_ + 2;
    std::unordered_set<Word, WordHash> seen;
    std::vector<Word> frontier;
    for (const Word& b : support_)
      if (b.size() <= limit && seen.insert(b).second) frontier.push_back(b);
    while (!frontier.empty()) {
      std::vector<Word> next;
      for (const Word& w : frontier)
        for (const Word& b : support_) {
          Word x = w * b;
          if (x.size() <= limit && seen.insert(x).second) next.push_back(std::move(x));
        }
      frontier = std::move(next);
    }
    for (Letter a : alphabet(d_))
      if (!seen.count(Word{a})) return false;
    return true;
  }

 private:
  StepDistribution() = default;
  int d_ = 0;
  std::size_t r_ = 0;
  double normalization_ = 1.0;
  std::vector<Word> support_;
  std::vector<double> probs_;
};

inline std::string to_string(const StepDistribution& p) {
  std::string s = "{";
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (i) s += ", ";
    s += to_string(p.word(i)) + ": " + std::to_string(p.prob(i));
  }
  return s + "}";
}

// ── Convolutions ────────────────────────────────────────────────────────────

struct ConvolutionTable {
  std::size_t n = 0;
  std::unordered_map<Word, double, WordHash> masses;

  static ConvolutionTable dirac() {
    ConvolutionTable t;
    t.masses.emplace(Word{}, 1.0);
    return t;
  }

  double at(const Word& x) const {
    auto it = masses.find(x);
    return it == masses.end() ? 0.0 : it->second;
  }
  double total() const {
    double s = 0.0;
    for (const auto& [w, m] : masses) s += m;
    return s;
  }
  double sup() const {
    double s = 0.0;
    for (const auto& [w, m] : masses) s = std::max(s, m);
    return s;
  }
  /// Shannon entropy -sum m ln m.
  double shannon() const {
    double h = 0.0;
    for (const auto& [w, m] : masses)
      if (m > 0.0) h -= m * std::log(m);
    return h;
  }
  /// sum |x| m(x).
  double mean_length() const {
    double s = 0.0;
    for (const auto& [w, m] : masses) s += static_cast<double>(w.size()) * m;
    return s;
  }
  std::size_t max_length() const {
    std::size_t s = 0;
    for (const auto& [w, m] : masses) s = std::max(s, w.size());
    return s;
  }
};

/// One more factor: (t * p)(x) = sum_y t(x y^{-1}) p(y).
inline ConvolutionTable convolve(const ConvolutionTable& t, const StepDistribution& p,
                                 std::size_t cap = kDefaultTableCap) {
  ConvolutionTable out;
  out.n = t.n + 1;
  out.masses.reserve(std::min(cap, t.masses.size() * p.size()));
  for (const auto& [w, m] : t.masses)
    for (std::size_t i = 0; i < p.size(); ++i) {
      out.masses[w * p.word(i)] += m * p.prob(i);
      if (out.masses.size() > cap)
        fail(ErrorKind::MemoryBudgetExceeded,
             "convolution table p^(" + std::to_string(out.n) + ") exceeds " + std::to_string(cap) + " entries");
    }
  return out;
}

/// p^(0), ..., p^(n_max).
inline std::vector<ConvolutionTable> convolution_powers(const StepDistribution& p, std::size_t n_max,
                                                        std::size_t cap = kDefaultTableCap) {
  std::vector<ConvolutionTable> out;
  out.push_back(ConvolutionTable::dirac());
  for (std::size_t n = 1; n <= n_max; ++n) out.push_back(convolve(out.back(), p, cap));
  return out;
}

inline StepDistribution to_distribution(int d, const ConvolutionTable& t,
                                        StepDistribution::Check check = StepDistribution::Check::None) {
  std::vector<std::pair<Word, double>> w(t.masses.begin(), t.masses.end());
  std::sort(w.begin(), w.end());
  return StepDistribution::from_weights(d, w, check);
}

/// Smallest k with every generator and inverse in supp p^(k); returns p^(k).
inline std::pair<StepDistribution, int> ensure_generators(const StepDistribution& p, int bound = 6,
                                                          std::size_t cap = kDefaultTableCap) {
  if (p.contains_generators()) return {p, 1};
  ConvolutionTable t = ConvolutionTable::dirac();
  t = convolve(t, p, cap);
  for (int k = 2; k <= bound; ++k) {
    t = convolve(t, p, cap);
    bool all = true;
    for (Letter a : alphabet(p.rank()))
      if (t.at(Word{a}) <= 0.0) {
        all = false;
        break;
      }
    if (all) return {to_distribution(p.rank(), t), k};
  }
  fail(ErrorKind::NotGenerating,
       "no convolution power up to " + std::to_string(bound) + " charges all generators and inverses");
}

// ── Paths ───────────────────────────────────────────────────────────────────

/// X_0 = e, X_n = X_{n-1} w_n with i.i.d. increments w_n ~ p. Increments are
/// stored as support indices; positions are rebuilt on demand.
struct PathSample {
  std::uint64_t seed = 0;
  std::vector<std::uint32_t> increments;

  std::size_t steps() const { return increments.size(); }

  std::vector<Word> positions(const StepDistribution& p) const {
    std::vector<Word> out{Word{}};
    for (auto i : increments) out.push_back(out.back() * p.word(i));
    return out;
  }
  Word final_position(const StepDistribution& p) const {
    Word x;
    for (auto i : increments) x = x * p.word(i);
    return x;
  }
};

inline PathSample sample_path(const StepDistribution& p, std::size_t n, std::uint64_t seed) {
  PathSample s;
  s.seed = seed;
  s.increments.reserve(n);
  Rng rng(seed);
  const DiscreteSampler draw(p.probs());
  for (std::size_t k = 0; k < n; ++k) s.increments.push_back(static_cast<std::uint32_t>(draw(rng)));
  return s;
}

// ── Decay of p^(n) ──────────────────────────────────────────────────────────

struct DecayEstimate {
  double zeta = 1.0;
  double c = 1.0;
  std::size_t n_max = 0;
  std::vector<double> sups;  ///< sup_x p^(n)(x) for n = 0..n_max
  double zeta_uncorrected = 1.0;  ///< (s_n / s_{n-2})^{1/2} at n_max
};

/// Exponential rate zeta with sup_x p^(n)(x) <= c zeta^n on the tabulated range.
///
/// Finitely supported walks on free groups obey sup_x p^(n)(x) ~ C rho^n n^{-3/2}.
/// The lag-2 ratio (robust to period 2) is corrected by the n^{-3/2} factor,
/// then one Richardson step removes the remaining O(1/n^2) bias. c is the
/// smallest constant making the bound hold for every tabulated n.
inline DecayEstimate estimate_decay_from_sups(std::vector<double> sups) {
  const std::size_t n_max = sups.size() - 1;
  if (n_max < 4) fail(ErrorKind::InvalidArgument, "estimate_decay needs n_max >= 4");
  auto corrected = [&](std::size_t n) {
    const double ratio = sups[n] / sups[n - 2];
    return std::sqrt(ratio * std::pow(static_cast<double>(n) / static_cast<double>(n - 2), 1.5));
  };
  DecayEstimate est;
  est.n_max = n_max;
  est.zeta_uncorrected = std::sqrt(sups[n_max] / sups[n_max - 2]);
  double z = corrected(n_max);
  if (n_max >= 5) {
    const double a = static_cast<double>(n_max) * static_cast<double>(n_max);
    const double b = static_cast<double>(n_max - 2) * static_cast<double>(n_max - 2);
    z = (a * z - b * corrected(n_max - 2)) / (a - b);
  }
  est.zeta = z;
  double c = 0.0;
  for (std::size_t n = 0; n <= n_max; ++n) c = std::max(c, sups[n] / std::pow(z, static_cast<double>(n)));
  est.c = c;
  est.sups = std::move(sups);
  return est;
}

inline DecayEstimate estimate_decay(const StepDistribution& p, std::size_t n_max,
                                    std::size_t cap = kDefaultTableCap) {
  if (n_max < 4) fail(ErrorKind::InvalidArgument, "estimate_decay needs n_max >= 4");
  std::vector<double> sups{1.0};
  ConvolutionTable t = ConvolutionTable::dirac();
  for (std::size_t n = 1; n <= n_max; ++n) {
    t = convolve(t, p, cap);
    sups.push_back(t.sup());
  }
  return estimate_decay_from_sups(std::move(sups));
}

}  // namespace fwalk
