#pragma once

// Word arithmetic in the free group F_d and geometry of its Cayley tree and
// boundary.
//
// Letters are nonzero signed integers: +i is the generator a_i and -i its
// inverse. A Word stores its letters as the bytes of a std::string so short
// words stay in the small-string buffer and hash cheaply as table keys.
// Every public constructor path yields a reduced word.
//
// Text form: "a1A2a1" (capital = inverse), identity is "e".

#include <algorithm>
#include <cmath>
#include <compare>
#include <cstdint>
#include <cstdlib>
#include <functional>
#include <initializer_list>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "fwalk/error.hpp"

namespace fwalk {

using Letter = int;

constexpr Letter inverse(Letter a) { return -a; }

/// Position of a letter in the canonical order a1 < A1 < a2 < A2 < ...
constexpr int letter_rank(Letter a) { return 2 * (std::abs(a) - 1) + (a < 0 ? 1 : 0); }
constexpr Letter letter_from_rank(int rank) {
  const int g = rank / 2 + 1;
  return (rank % 2 == 0) ? g : -g;
}

class Word {
 public:
  Word() = default;
  Word(std::initializer_list<Letter> letters) {
    for (Letter a : letters) push_back(a);
  }
  explicit Word(std::span<const Letter> letters) {
    for (Letter a : letters) push_back(a);
  }

  static Word identity() { return Word(); }
  static Word letter(Letter a) { return Word{a}; }

  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }
  bool is_identity() const { return data_.empty(); }

  Letter operator[](std::size_t i) const { return static_cast<signed char>(data_[i]); }
  Letter front() const { return (*this)[0]; }
  Letter back() const { return (*this)[size() - 1]; }

  /// Right-multiply by one letter, cancelling if needed.
  void push_back(Letter a) {
    if (a == 0) fail(ErrorKind::InvalidArgument, "letter index 0 is not a generator");
    if (!data_.empty() && back() == inverse(a)) data_.pop_back();
    else data_.push_back(static_cast<char>(static_cast<signed char>(a)));
  }
  void pop_back() { data_.pop_back(); }

  Word prefix(std::size_t n) const {
    Word w;
    w.data_ = data_.substr(0, std::min(n, data_.size()));
    return w;
  }
  Word suffix_from(std::size_t start) const {
    Word w;
    if (start < data_.size()) w.data_ = data_.substr(start);
    return w;
  }

  std::vector<Letter> letters() const {
    std::vector<Letter> out;
    out.reserve(size());
    for (std::size_t i = 0; i < size(); ++i) out.push_back((*this)[i]);
    return out;
  }

  /// Largest |letter index| used.
  int rank_used() const {
    int m = 0;
    for (std::size_t i = 0; i < size(); ++i) m = std::max(m, std::abs((*this)[i]));
    return m;
  }

  const std::string& key() const { return data_; }

  friend bool operator==(const Word&, const Word&) = default;

  /// Shortlex order with the canonical letter order.
  friend std::strong_ordering operator<=>(const Word& x, const Word& y) {
    if (x.size() != y.size()) return x.size() <=> y.size();
    for (std::size_t i = 0; i < x.size(); ++i) {
      const int a = letter_rank(x[i]), b = letter_rank(y[i]);
      if (a != b) return a <=> b;
    }
    return std::strong_ordering::equal;
  }

 private:
  std::string data_;
};

struct WordHash {
  std::size_t operator()(const Word& w) const noexcept { return std::hash<std::string>{}(w.key()); }
};

inline Word inverse(const Word& x) {
  Word out;
  for (std::size_t i = x.size(); i-- > 0;) out.push_back(inverse(x[i]));
  return out;
}

/// Reduced product x*y.
inline Word multiply(const Word& x, const Word& y) {
  Word out = x;
  for (std::size_t i = 0; i < y.size(); ++i) out.push_back(y[i]);
  return out;
}

inline Word operator*(const Word& x, const Word& y) { return multiply(x, y); }

/// Length of the common initial segment; identical words give their length.
inline std::size_t gromov_product(const Word& x, const Word& y) {
  const std::size_t n = std::min(x.size(), y.size());
  std::size_t i = 0;
  while (i < n && x[i] == y[i]) ++i;
  return i;
}

/// Word metric d(x,y) = |x^{-1}y| on the Cayley tree.
inline std::size_t tree_distance(const Word& x, const Word& y) {
  return x.size() + y.size() - 2 * gromov_product(x, y);
}

inline bool is_prefix(const Word& p, const Word& w) {
  return p.size() <= w.size() && gromov_product(p, w) == p.size();
}

// ── text form ───────────────────────────────────────────────────────────────

inline std::string to_string(const Word& w) {
  if (w.empty()) return "e";
  std::string s;
  for (std::size_t i = 0; i < w.size(); ++i) {
    const Letter a = w[i];
    s += (a > 0 ? 'a' : 'A');
    s += std::to_string(std::abs(a));
  }
  return s;
}

/// Parses "a1A2..." (reducing as it goes); "e" or "" is the identity.
inline Word parse_word(std::string_view s) {
  Word w;
  if (s == "e" || s.empty()) return w;
  std::size_t i = 0;
  while (i < s.size()) {
    const char c = s[i];
    if (c != 'a' && c != 'A') fail(ErrorKind::InvalidArgument, "bad word text '" + std::string(s) + "'");
    ++i;
    std::size_t j = i;
    while (j < s.size() && s[j] >= '0' && s[j] <= '9') ++j;
    if (j == i) fail(ErrorKind::InvalidArgument, "missing generator index in '" + std::string(s) + "'");
    const int g = std::stoi(std::string(s.substr(i, j - i)));
    if (g <= 0 || g > 127) fail(ErrorKind::InvalidArgument, "generator index out of range in '" + std::string(s) + "'");
    w.push_back(c == 'a' ? g : -g);
    i = j;
  }
  return w;
}

// ── enumeration ─────────────────────────────────────────────────────────────

/// All 2d letters in canonical order.
inline std::vector<Letter> alphabet(int d) {
  std::vector<Letter> out;
  for (int r = 0; r < 2 * d; ++r) out.push_back(letter_from_rank(r));
  return out;
}

/// All reduced words of length exactly n, in shortlex order.
inline std::vector<Word> sphere(int d, std::size_t n) {
  std::vector<Word> cur{Word{}};
  const auto letters = alphabet(d);
  for (std::size_t k = 0; k < n; ++k) {
    std::vector<Word> next;
    next.reserve(cur.size() * (2 * d - (k == 0 ? 0 : 1)));
    for (const Word& w : cur)
      for (Letter a : letters) {
        if (!w.empty() && w.back() == inverse(a)) continue;
        Word x = w;
        x.push_back(a);
        next.push_back(std::move(x));
      }
    cur = std::move(next);
  }
  return cur;
}

/// All reduced words of length <= n, in shortlex order.
inline std::vector<Word> ball(int d, std::size_t n) {
  std::vector<Word> out;
  for (std::size_t k = 0; k <= n; ++k) {
    auto s = sphere(d, k);
    out.insert(out.end(), s.begin(), s.end());
  }
  return out;
}

/// Number of reduced words of length n >= 1: 2d(2d-1)^{n-1}.
inline std::size_t sphere_size(int d, std::size_t n) {
  if (n == 0) return 1;
  std::size_t s = 2 * d;
  for (std::size_t k = 1; k < n; ++k) s *= (2 * d - 1);
  return s;
}

// ── boundary points at finite precision ─────────────────────────────────────

/// A cylinder [w] of the boundary: all infinite reduced words starting with w.
class CylinderPrefix {
 public:
  explicit CylinderPrefix(Word prefix) : prefix_(std::move(prefix)) {
    if (prefix_.empty()) fail(ErrorKind::InvalidArgument, "cylinder prefix must be nonempty");
  }

  const Word& word() const { return prefix_; }
  std::size_t depth() const { return prefix_.size(); }
  Letter operator[](std::size_t i) const { return prefix_[i]; }

  /// Representative extension: repeat the final letter until `depth` letters.
  CylinderPrefix extended(std::size_t depth) const {
    Word w = prefix_;
    while (w.size() < depth) w.push_back(prefix_.back());
    return CylinderPrefix(std::move(w));
  }

  CylinderPrefix truncated(std::size_t depth) const {
    return CylinderPrefix(prefix_.prefix(std::max<std::size_t>(depth, 1)));
  }

  friend bool operator==(const CylinderPrefix&, const CylinderPrefix&) = default;

 private:
  Word prefix_;
};

inline std::string to_string(const CylinderPrefix& c) { return to_string(c.word()) + "..."; }

/// delta(xi, xi') = exp(-(xi ^ xi')); the prefixes must diverge inside both.
inline double boundary_metric(const CylinderPrefix& xi, const CylinderPrefix& eta) {
  const std::size_t g = gromov_product(xi.word(), eta.word());
  if (g == xi.depth() || g == eta.depth())
    fail(ErrorKind::IndistinguishableAtDepth,
         to_string(xi) + " and " + to_string(eta) + " agree on every resolved letter");
  return std::exp(-static_cast<double>(g));
}

/// Busemann function theta_xi(x) = |x| - 2 (xi ^ x).
inline long busemann(const CylinderPrefix& xi, const Word& x) {
  if (xi.depth() < x.size())
    fail(ErrorKind::PrefixTooShort, "busemann needs depth >= |x| = " + std::to_string(x.size()));
  return static_cast<long>(x.size()) - 2 * static_cast<long>(gromov_product(xi.word(), x));
}

/// x . xi on the boundary; reduction must leave at least one resolved letter.
inline CylinderPrefix left_action(const Word& x, const CylinderPrefix& xi) {
  if (xi.depth() <= x.size())
    fail(ErrorKind::PrefixTooShort, "left_action needs depth > |x| = " + std::to_string(x.size()));
  return CylinderPrefix(multiply(x, xi.word()));
}

}  // namespace fwalk
