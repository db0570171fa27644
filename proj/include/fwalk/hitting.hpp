#pragma once

// First-visit distributions alpha_x^V, hitting probabilities u(x,y) and the
// Green function, computed by forward dynamic programming of the walk killed
// on entry to V.
//
// The walk is transient, so mass that never reaches V does not die out on its
// own. The DP runs on a finite region of the tree (the words within tree
// distance R of the convex hull of V and the start point) and also kills mass
// that leaves it. Two error controls are available.
//
// Rigorous: a superharmonic function f >= 1 on V of the form
// kappa * rho^(dist to hull) bounds the probability that escaped mass ever
// comes back, so sum(alpha) - sum(mass) <= survivor + escaped * f(R + 1).
// rho and the suffix weights come from a small monotone eigenproblem on the
// last r letters. For walks with negative drift on some suffix no rho < 1
// exists and only the fitted control is offered.
//
// Fitted: the DP mass converges in R like a sum of geometric modes, so each
// entry's sequence in R is accelerated with Wynn's epsilon algorithm. The
// larger of the last two changes of the accelerated total, times a safety
// factor, is the reported error.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <limits>
#include <memory>
#include <mutex>
#include <shared_mutex>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "fwalk/error.hpp"
#include "fwalk/free_group.hpp"
#include "fwalk/walk.hpp"

namespace fwalk {

struct FirstVisitDistribution {
  Word source;
  std::vector<Word> target_set;
  std::vector<double> mass;      ///< DP partial sums, lower bounds for alpha
  double tail_bound = 0.0;       ///< bound on sum_v (alpha(v) - mass(v))
  bool tail_rigorous = false;    ///< tail_bound comes from the escape bound
  std::vector<double> estimate;  ///< extrapolated alpha
  double estimate_error = 0.0;   ///< error of sum(estimate); the rigorous tail in Rigorous mode
  double survivor = 0.0;         ///< in-region mass still alive when the DP stopped
  double escaped = 0.0;          ///< mass that left the region before entering V
  std::size_t n_used = 0;        ///< DP steps of the final run
  int region_radius = 0;
  std::size_t region_nodes = 0;

  double total() const {
    double s = 0.0;
    for (double m : mass) s += m;
    return s;
  }
  double estimate_total() const {
    double s = 0.0;
    for (double m : estimate) s += m;
    return s;
  }
  double error() const { return estimate_error; }
  double at(const Word& v) const {
    for (std::size_t i = 0; i < target_set.size(); ++i)
      if (target_set[i] == v) return estimate[i];
    return 0.0;
  }
};

struct Estimate {
  double value = 0.0;
  double error = 0.0;
};

enum class TailMode { Fitted, Rigorous };

struct HittingOptions {
  TailMode mode = TailMode::Fitted;
  int min_radius = 2;
  std::size_t max_nodes = 6'000'000;
  std::size_t max_steps = 200'000;
  /// Multiplier on the change between successive accelerated totals.
  double safety = 4.0;
  /// Use exactly this region radius instead of growing it (0 = adaptive).
  int fixed_radius = 0;
  /// Cap on DP steps, for inspecting partial sums.
  std::size_t step_limit = std::numeric_limits<std::size_t>::max();
};

/// u(w, V) <= min(1, kappa * rho^(dist(w, hull) - (r - 1))).
struct EscapeBound {
  bool valid = false;
  double rho = 1.0;
  double kappa = 1.0;
  int range = 1;

  double at_distance(int dist) const {
    if (!valid) return 1.0;
    return std::min(1.0, kappa * std::pow(rho, dist - (range - 1)));
  }
};

namespace detail {

/// Searches for rho < 1 and weights w > 0 on reduced suffixes t of length r with
/// sum_b p(b) rho^(|tb| - |t|) max{w(t') : t' consistent with tb} <= w(t).
inline EscapeBound compute_escape_bound(const StepDistribution& p) {
  const int r = static_cast<int>(p.range());
  const auto states = sphere(p.rank(), r);
  std::unordered_map<std::string, int> index;
  for (std::size_t i = 0; i < states.size(); ++i) index.emplace(states[i].key(), static_cast<int>(i));
  const std::size_t ns = states.size(), nb = p.size();
  std::vector<int> delta(ns * nb);
  std::vector<std::vector<int>> next(ns * nb);
  for (std::size_t s = 0; s < ns; ++s)
    for (std::size_t i = 0; i < nb; ++i) {
      const Word u = states[s] * p.word(i);
      delta[s * nb + i] = static_cast<int>(u.size()) - r;
      auto& nx = next[s * nb + i];
      if (static_cast<int>(u.size()) >= r) {
        nx.push_back(index.at(u.suffix_from(u.size() - r).key()));
      } else {
        for (std::size_t c = 0; c < ns; ++c)
          if (states[c].suffix_from(r - u.size()) == u) nx.push_back(static_cast<int>(c));
      }
    }

  auto attempt = [&](double rho, std::vector<double>& w) {
    w.assign(ns, 1.0);
    std::vector<double> tw(ns);
    for (int it = 0; it < 3000; ++it) {
      double hi = 0.0, lo = std::numeric_limits<double>::infinity();
      for (std::size_t s = 0; s < ns; ++s) {
        double acc = 0.0;
        for (std::size_t i = 0; i < nb; ++i) {
          double m = 0.0;
          for (int c : next[s * nb + i]) m = std::max(m, w[c]);
          acc += p.prob(i) * std::pow(rho, delta[s * nb + i]) * m;
        }
        tw[s] = acc;
        hi = std::max(hi, acc / w[s]);
        lo = std::min(lo, acc / w[s]);
      }
      if (hi <= 1.0) return true;
      if (lo > 1.0) return false;
      const double mx = *std::max_element(tw.begin(), tw.end());
      for (std::size_t s = 0; s < ns; ++s) w[s] = tw[s] / mx;
    }
    return false;
  };

  EscapeBound out;
  out.range = r;
  std::vector<double> w, best_w;
  double lo = 0.0, hi = 1.0;
  for (int k = 0; k < 50; ++k) {
    const double mid = 0.5 * (lo + hi);
    if (attempt(mid, w)) {
      hi = mid;
      best_w = w;
    } else {
      lo = mid;
    }
  }
  if (best_w.empty()) return out;
  out.valid = true;
  out.rho = hi;
  out.kappa = *std::max_element(best_w.begin(), best_w.end()) / *std::min_element(best_w.begin(), best_w.end());
  return out;
}

/// The words within tree distance `radius` of a prefix-closed hull, stored as
/// a trie rooted at e.
class Region {
 public:
  Region(int d, const std::vector<Word>& points, int radius, std::size_t max_nodes) : d_(d) {
    std::unordered_set<std::string> hull;
    hull.insert(std::string());
    for (const Word& w : points)
      for (std::size_t k = 1; k <= w.size(); ++k) hull.insert(w.prefix(k).key());

    const int width = 2 * d;
    auto add_node = [&](std::int32_t parent, Letter last, int dist) {
      const auto id = static_cast<std::int32_t>(parent_.size());
      parent_.push_back(parent);
      last_.push_back(static_cast<std::int8_t>(last));
      dist_.push_back(static_cast<std::int16_t>(dist));
      children_.insert(children_.end(), width, -1);
      return id;
    };
    add_node(-1, 0, 0);
    std::unordered_map<std::int32_t, Word> hull_words{{0, Word{}}};
    std::vector<std::int32_t> frontier{0};
    while (!frontier.empty()) {
      std::vector<std::int32_t> next;
      for (std::int32_t node : frontier) {
        const auto hw = hull_words.find(node);
        for (int rank = 0; rank < width; ++rank) {
          const Letter a = letter_from_rank(rank);
          if (last_[node] == inverse(a)) continue;
          int dist = dist_[node] + 1;
          Word child_word;
          bool child_in_hull = false;
          if (hw != hull_words.end()) {
            child_word = hw->second;
            child_word.push_back(a);
            if (hull.count(child_word.key())) {
              dist = 0;
              child_in_hull = true;
            }
          }
          if (dist > radius) continue;
          if (parent_.size() >= max_nodes)
            fail(ErrorKind::MemoryBudgetExceeded, "hitting region exceeds " + std::to_string(max_nodes) + " nodes");
          const std::int32_t id = add_node(node, a, dist);
          children_[static_cast<std::size_t>(node) * width + rank] = id;
          if (child_in_hull) hull_words.emplace(id, std::move(child_word));
          next.push_back(id);
        }
      }
      frontier = std::move(next);
    }
  }

  std::size_t size() const { return parent_.size(); }

  /// Node reached from `node` by the reduced word b, or -1 if the path leaves.
  std::int32_t step(std::int32_t node, const Word& b) const {
    const int width = 2 * d_;
    for (std::size_t i = 0; i < b.size() && node >= 0; ++i) {
      const Letter a = b[i];
      if (last_[node] == inverse(a)) node = parent_[node];
      else node = children_[static_cast<std::size_t>(node) * width + letter_rank(a)];
    }
    return node;
  }

  std::int32_t locate(const Word& w) const { return step(0, w); }

 private:
  int d_;
  std::vector<std::int32_t> parent_;
  std::vector<std::int8_t> last_;
  std::vector<std::int16_t> dist_;
  std::vector<std::int32_t> children_;
};

/// Wynn's epsilon algorithm on the last few terms of a sequence. Returns the
/// last entry of the even column whose last two entries agree best; a column
/// beyond a converged one mostly amplifies rounding.
inline double wynn_epsilon(const std::vector<double>& s, std::size_t max_terms = 8) {
  const std::size_t n = std::min(s.size(), max_terms);
  if (n == 0) return 0.0;
  std::vector<double> prev(n + 1, 0.0), cur(s.end() - n, s.end());
  double best = cur.back();
  double best_change = std::numeric_limits<double>::infinity();
  for (std::size_t k = 1; k < n; ++k) {
    std::vector<double> next(cur.size() - 1);
    for (std::size_t j = 0; j + 1 < cur.size(); ++j) {
      const double diff = cur[j + 1] - cur[j];
      if (diff == 0.0) return best;
      next[j] = prev[j + 1] + 1.0 / diff;
    }
    prev = std::move(cur);
    cur = std::move(next);
    if (k % 2 != 0) continue;
    if (!std::isfinite(cur.back())) return best;
    if (cur.size() >= 2) {
      const double change = std::abs(cur.back() - cur[cur.size() - 2]);
      if (change < best_change) {
        best = cur.back();
        best_change = change;
      }
    } else if (best_change == std::numeric_limits<double>::infinity()) {
      best = cur.back();
    }
  }
  return best;
}

struct DpOutcome {
  std::vector<double> mass;
  double survivor = 0.0;
  double escaped = 0.0;
  std::size_t steps = 0;
};

/// Forward DP on a region; `initial` lists (node, mass) pairs outside V.
inline DpOutcome killed_dp(const Region& region, const StepDistribution& p, const std::vector<std::int32_t>& target_of,
                           std::vector<double> hits, double escaped,
                           const std::vector<std::pair<std::int32_t, double>>& initial, double survivor_tol,
                           std::size_t max_steps) {
  const std::size_t n = region.size();
  const std::size_t nb = p.size();
  std::vector<std::int32_t> trans(n * nb);
  for (std::size_t s = 0; s < n; ++s)
    for (std::size_t i = 0; i < nb; ++i) trans[s * nb + i] = region.step(static_cast<std::int32_t>(s), p.word(i));

  DpOutcome out;
  out.mass = std::move(hits);
  out.escaped = escaped;
  std::vector<double> cur(n, 0.0), nxt(n, 0.0);
  std::vector<std::uint8_t> flag(n, 0);
  std::vector<std::int32_t> act, nact;
  for (const auto& [node, m] : initial) {
    if (!flag[node]) {
      flag[node] = 1;
      act.push_back(node);
    }
    cur[node] += m;
  }
  for (auto s : act) flag[s] = 0;
  const auto& probs = p.probs();
  double survivor = 0.0;
  for (auto s : act) survivor += cur[s];
  while (survivor > survivor_tol && out.steps < max_steps) {
    nact.clear();
    for (std::int32_t s : act) {
      const double m = cur[s];
      cur[s] = 0.0;
      const std::int32_t* row = &trans[static_cast<std::size_t>(s) * nb];
      for (std::size_t i = 0; i < nb; ++i) {
        const double w = m * probs[i];
        const std::int32_t t = row[i];
        if (t < 0) out.escaped += w;
        else if (target_of[t] >= 0) out.mass[target_of[t]] += w;
        else {
          if (!flag[t]) {
            flag[t] = 1;
            nact.push_back(t);
          }
          nxt[t] += w;
        }
      }
    }
    survivor = 0.0;
    for (std::int32_t t : nact) {
      flag[t] = 0;
      survivor += nxt[t];
    }
    std::swap(cur, nxt);
    std::swap(act, nact);
    ++out.steps;
  }
  out.survivor = survivor;
  return out;
}

}  // namespace detail

/// Hitting-probability engine for one step distribution. Results are memoized
/// on the left-translated target set; the memo is safe for concurrent use.
class HittingSolver {
 public:
  explicit HittingSolver(StepDistribution p, HittingOptions opts = {})
      : p_(std::move(p)), opts_(opts), escape_(detail::compute_escape_bound(p_)) {}

  const StepDistribution& distribution() const { return p_; }
  const HittingOptions& options() const { return opts_; }
  const EscapeBound& escape_bound() const { return escape_; }

  /// alpha_x^V: law of the first entry point into V for the walk started at x.
  FirstVisitDistribution first_visit(const Word& x, const std::vector<Word>& targets, double tol) const {
    if (targets.empty()) fail(ErrorKind::InvalidArgument, "first_visit needs a nonempty target set");
    if (!(tol > 0.0)) fail(ErrorKind::InvalidArgument, "first_visit needs tol > 0");
    const Word xinv = inverse(x);
    std::vector<Word> shifted;
    shifted.reserve(targets.size());
    for (const Word& v : targets) {
      if (v == x) fail(ErrorKind::InvalidArgument, "first_visit start point lies in the target set");
      shifted.push_back(xinv * v);
    }
    std::vector<Word> sorted = shifted;
    std::sort(sorted.begin(), sorted.end());
    sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());
    const FirstVisitDistribution base = cached('V', sorted, tol, [&] { return grow(sorted, tol, false); });

    FirstVisitDistribution out = base;
    out.source = x;
    out.target_set = targets;
    out.mass.assign(targets.size(), 0.0);
    out.estimate.assign(targets.size(), 0.0);
    for (std::size_t i = 0; i < targets.size(); ++i) {
      const auto j =
          static_cast<std::size_t>(std::lower_bound(sorted.begin(), sorted.end(), shifted[i]) - sorted.begin());
      out.mass[i] = base.mass[j];
      out.estimate[i] = base.estimate[j];
    }
    return out;
  }

  /// u(x,y): probability of ever reaching y from x; u(x,x) = 1.
  Estimate hitting_probability(const Word& x, const Word& y, double tol) const {
    if (x == y) return {1.0, 0.0};
    const auto fv = first_visit(x, {y}, tol);
    return {fv.estimate[0], fv.error()};
  }

  /// Law of the first return to e after at least one step.
  FirstVisitDistribution return_distribution(double tol) const {
    const std::vector<Word> target{Word{}};
    auto out = cached('R', target, tol, [&] { return grow(target, tol, true); });
    out.source = Word{};
    return out;
  }

  /// G(x) = u(e,x) G(e), G(e) = 1 / (1 - return probability).
  Estimate green(const Word& x, double tol) const {
    const auto ret = return_distribution(tol);
    const double f = ret.estimate[0], df = ret.error();
    const double ge = 1.0 / (1.0 - f);
    const Estimate g{ge, df / ((1.0 - f) * std::max(1.0 - f - df, 1e-300))};
    if (x.empty()) return g;
    const auto u = hitting_probability(Word{}, x, tol);
    return {u.value * ge, u.error * ge + u.value * g.error + u.error * g.error};
  }

  std::size_t memo_size() const {
    std::shared_lock lock(mutex_);
    return memo_.size();
  }

 private:
  bool good_enough(const FirstVisitDistribution& f, double tol) const {
    if (opts_.mode == TailMode::Rigorous && escape_.valid) return f.tail_bound <= tol;
    return f.estimate_error <= tol;
  }

  double good_enough_value(const FirstVisitDistribution& f) const {
    return opts_.mode == TailMode::Rigorous && escape_.valid ? f.tail_bound : f.estimate_error;
  }

  template <class F>
  FirstVisitDistribution cached(char tag, const std::vector<Word>& sorted, double tol, F&& compute) const {
    std::string key(1, tag);
    for (const Word& v : sorted) {
      key += '|';
      key += v.key();
    }
    {
      std::shared_lock lock(mutex_);
      auto it = memo_.find(key);
      if (it != memo_.end() && good_enough(it->second, tol)) return it->second;
    }
    FirstVisitDistribution res = compute();
    std::unique_lock lock(mutex_);
    auto [it, inserted] = memo_.try_emplace(key, res);
    if (!inserted && res.region_radius > it->second.region_radius) it->second = res;
    return res;
  }

  // Walk from e into the translated targets; with `first_step` the walk takes
  // one step before V can absorb it.
  FirstVisitDistribution grow(const std::vector<Word>& targets, double tol, bool first_step) const {
    const double survivor_tol = std::max(tol * 1e-3, 1e-16);
    const int r = static_cast<int>(p_.range());
    const int r0 = opts_.fixed_radius > 0 ? opts_.fixed_radius : std::max(opts_.min_radius, r);
    const std::size_t nt = targets.size();
    std::vector<std::vector<double>> history;
    std::vector<double> totals;
    FirstVisitDistribution last;
    for (int radius = r0;; ++radius) {
      std::unique_ptr<detail::Region> region;
      try {
        region = std::make_unique<detail::Region>(p_.rank(), targets, radius, opts_.max_nodes);
      } catch (const Error& e) {
        if (e.kind() != ErrorKind::MemoryBudgetExceeded) throw;
        char msg[160];
        std::snprintf(msg, sizeof msg, "first-visit tolerance %.3g unreachable under the region cap; reached %.3g at radius %d",
                      tol, good_enough_value(last), last.region_radius);
        fail(ErrorKind::NoConvergence, msg);
      }
      std::vector<std::int32_t> target_of(region->size(), -1);
      for (std::size_t j = 0; j < nt; ++j) target_of[region->locate(targets[j])] = static_cast<std::int32_t>(j);

      std::vector<std::pair<std::int32_t, double>> start;
      std::vector<double> hits(nt, 0.0);
      double escaped0 = 0.0;
      if (first_step) {
        for (std::size_t i = 0; i < p_.size(); ++i) {
          const std::int32_t node = region->locate(p_.word(i));
          if (node < 0) escaped0 += p_.prob(i);
          else if (target_of[node] >= 0) hits[target_of[node]] += p_.prob(i);
          else start.emplace_back(node, p_.prob(i));
        }
      } else {
        start.emplace_back(0, 1.0);
      }
      auto dp = detail::killed_dp(*region, p_, target_of, std::move(hits), escaped0, start, survivor_tol,
                                  std::min(opts_.max_steps, opts_.step_limit));

      FirstVisitDistribution cur;
      cur.target_set = targets;
      cur.mass = std::move(dp.mass);
      cur.survivor = dp.survivor;
      cur.escaped = dp.escaped;
      cur.n_used = dp.steps;
      cur.region_radius = radius;
      cur.region_nodes = region->size();
      cur.tail_rigorous = escape_.valid;
      cur.tail_bound = dp.survivor + dp.escaped * escape_.at_distance(radius + 1);

      history.push_back(cur.mass);
      totals.push_back(cur.total());
      cur.estimate = cur.mass;
      cur.estimate_error = std::numeric_limits<double>::infinity();
      if (dp.escaped == 0.0) {
        cur.estimate_error = dp.survivor;
      } else if (history.size() >= 3) {
        std::vector<double> seq(history.size());
        for (std::size_t j = 0; j < nt; ++j) {
          for (std::size_t i = 0; i < history.size(); ++i) seq[i] = history[i][j];
          cur.estimate[j] = std::max(detail::wynn_epsilon(seq), cur.mass[j]);
        }
        // two accelerated values can agree by accident while a slower mode is
        // still unresolved, so three are compared
        if (history.size() >= 5) {
          auto acc = [&](std::ptrdiff_t drop) {
            return detail::wynn_epsilon(std::vector<double>(totals.begin(), totals.end() - drop));
          };
          const double b0 = acc(0), b1 = acc(1), b2 = acc(2);
          cur.estimate_error = opts_.safety * std::max(std::abs(b0 - b1), std::abs(b1 - b2)) + dp.survivor;
        }
      }
      if (cur.tail_rigorous) {
        // Keep the estimate inside the certified interval.
        const double excess = cur.estimate_total() - cur.total() - cur.tail_bound;
        if (excess > 0.0) {
          const double shrink = cur.tail_bound / (cur.tail_bound + excess);
          for (std::size_t j = 0; j < nt; ++j) cur.estimate[j] = cur.mass[j] + (cur.estimate[j] - cur.mass[j]) * shrink;
        }
        if (opts_.mode == TailMode::Rigorous) cur.estimate_error = cur.tail_bound;
      }
#ifdef FWALK_TRACE
      std::fprintf(stderr, "R=%d nodes=%zu total=%.12f est=%.12f surv=%.2e esc=%.4f tail=%.2e fit=%.2e steps=%zu\n",
                   radius, cur.region_nodes, cur.total(), cur.estimate_total(), cur.survivor, cur.escaped,
                   cur.tail_bound, cur.estimate_error, cur.n_used);
#endif
      last = cur;
      if (opts_.fixed_radius > 0 || good_enough(cur, tol)) return cur;
    }
  }

  StepDistribution p_;
  HittingOptions opts_;
  EscapeBound escape_;
  mutable std::shared_mutex mutex_;
  mutable std::unordered_map<std::string, FirstVisitDistribution> memo_;
};

inline FirstVisitDistribution first_visit(const StepDistribution& p, const Word& x, const std::vector<Word>& V,
                                          double tol, HittingOptions opts = {}) {
  return HittingSolver(p, opts).first_visit(x, V, tol);
}

inline Estimate hitting_probability(const StepDistribution& p, const Word& x, const Word& y, double tol,
                                    HittingOptions opts = {}) {
  return HittingSolver(p, opts).hitting_probability(x, y, tol);
}

inline Estimate green(const StepDistribution& p, const Word& x, double tol, HittingOptions opts = {}) {
  return HittingSolver(p, opts).green(x, tol);
}

/// sum_{n <= N} p^(n)(x), the truncated Green series.
inline double green_partial_sum(const std::vector<ConvolutionTable>& powers, const Word& x) {
  double s = 0.0;
  for (const auto& t : powers) s += t.at(x);
  return s;
}

}  // namespace fwalk
