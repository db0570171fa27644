#pragma once

// Harmonic measure p^infinity on depth-m cylinders, computed as the fixed point
// of the dual transfer operator and by direct simulation.
//
// Depth-m reduced words are indexed in mixed radix: the first letter has 2d
// choices and every later letter 2d-1 (its rank among letters that do not
// cancel the previous one). The index order is shortlex, and the extensions of
// a shorter prefix form one contiguous block.
//
// The dual operator acts on measures by
//   (L* nu)(eta) = exp(Phi(eta)) * nu_{m-1}(eta_2 ... eta_m),
// where nu_{m-1} is the depth-(m-1) marginal and Phi is evaluated at the
// cylinder representative (eta extended by repeating its last letter).

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <iomanip>
#include <limits>
#include <memory>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "fwalk/error.hpp"
#include "fwalk/free_group.hpp"
#include "fwalk/martin.hpp"
#include "fwalk/parallel.hpp"
#include "fwalk/rng.hpp"
#include "fwalk/walk.hpp"

namespace fwalk {

/// Rank of c among the 2d-1 letters that do not cancel prev.
inline int child_rank(Letter prev, Letter c) {
  const int r = letter_rank(c), forbidden = letter_rank(inverse(prev));
  return r > forbidden ? r - 1 : r;
}

inline Letter child_from_rank(Letter prev, int k) {
  const int forbidden = letter_rank(inverse(prev));
  return letter_from_rank(k >= forbidden ? k + 1 : k);
}

class CylinderIndex {
 public:
  CylinderIndex(int d, std::size_t depth) : d_(d), depth_(depth) {
    if (depth == 0) fail(ErrorKind::InvalidArgument, "cylinder depth must be >= 1");
    count_ = sphere_size(d, depth);
  }

  int rank() const { return d_; }
  std::size_t depth() const { return depth_; }
  std::size_t size() const { return count_; }

  /// Number of depth-m words extending a fixed word of length j >= 1.
  std::size_t block(std::size_t j) const {
    std::size_t b = 1;
    for (std::size_t i = j; i < depth_; ++i) b *= static_cast<std::size_t>(2 * d_ - 1);
    return b;
  }

  /// Index of the first depth-m word extending w (1 <= |w| <= m).
  std::size_t index(const Word& w) const {
    if (w.empty() || w.size() > depth_) fail(ErrorKind::InvalidArgument, "cylinder index needs 1 <= |w| <= depth");
    std::size_t idx = static_cast<std::size_t>(letter_rank(w[0]));
    for (std::size_t i = 1; i < depth_; ++i) {
      idx *= static_cast<std::size_t>(2 * d_ - 1);
      if (i < w.size()) idx += static_cast<std::size_t>(child_rank(w[i - 1], w[i]));
    }
    return idx;
  }

  Word word(std::size_t idx) const {
    std::vector<int> digits(depth_);
    for (std::size_t i = depth_; i-- > 1;) {
      digits[i] = static_cast<int>(idx % static_cast<std::size_t>(2 * d_ - 1));
      idx /= static_cast<std::size_t>(2 * d_ - 1);
    }
    digits[0] = static_cast<int>(idx);
    Word w;
    Letter prev = letter_from_rank(digits[0]);
    w.push_back(prev);
    for (std::size_t i = 1; i < depth_; ++i) {
      prev = child_from_rank(prev, digits[i]);
      w.push_back(prev);
    }
    return w;
  }

 private:
  int d_;
  std::size_t depth_;
  std::size_t count_;
};

struct CylinderMeasure {
  int d = 2;
  std::size_t depth = 1;
  std::vector<double> masses;
  std::vector<double> std_errors;  ///< Monte Carlo only
  std::string method;
  double error_estimate = 0.0;  ///< method error in total variation
  double samples_hint = 0.0;    ///< Monte Carlo sample count

  CylinderIndex index() const { return CylinderIndex(d, depth); }

  double mass(const Word& prefix) const {
    if (prefix.size() > depth) fail(ErrorKind::DepthTooShallow, "measure depth below prefix length");
    if (prefix.empty()) return total();
    const auto idx = index();
    const std::size_t start = idx.index(prefix), len = idx.block(prefix.size());
    double s = 0.0;
    for (std::size_t i = start; i < start + len; ++i) s += masses[i];
    return s;
  }

  double total() const {
    double s = 0.0;
    for (double m : masses) s += m;
    return s;
  }

  CylinderMeasure marginal(std::size_t j) const {
    if (j == 0 || j > depth) fail(ErrorKind::InvalidArgument, "marginal depth out of range");
    CylinderMeasure out{d, j, std::vector<double>(sphere_size(d, j), 0.0), {}, method, error_estimate};
    const std::size_t b = index().block(j);
    for (std::size_t i = 0; i < masses.size(); ++i) out.masses[i / b] += masses[i];
    if (!std_errors.empty()) {
      out.std_errors.assign(out.masses.size(), 0.0);
      const double n = samples_hint;
      for (std::size_t i = 0; i < out.masses.size(); ++i)
        out.std_errors[i] = n > 0 ? std::sqrt(out.masses[i] * (1.0 - out.masses[i]) / n) : 0.0;
      out.samples_hint = samples_hint;
    }
    return out;
  }

  void write_csv(std::ostream& os) const {
    const auto idx = index();
    os << "word,mass,std_error\n";
    os << std::setprecision(12);
    for (std::size_t i = 0; i < masses.size(); ++i)
      os << to_string(idx.word(i)) << ',' << masses[i] << ',' << (std_errors.empty() ? 0.0 : std_errors[i]) << '\n';
  }
};

inline double total_variation(const CylinderMeasure& a, const CylinderMeasure& b) {
  if (a.depth != b.depth || a.d != b.d) fail(ErrorKind::InvalidArgument, "total_variation needs equal depths");
  double s = 0.0;
  for (std::size_t i = 0; i < a.masses.size(); ++i) s += std::abs(a.masses[i] - b.masses[i]);
  return 0.5 * s;
}

struct TransferOperator {
  int d = 2;
  std::size_t m = 1;
  std::vector<double> weight;           ///< exp(Phi) at each depth-m representative
  std::vector<double> phi;              ///< Phi at each representative
  std::vector<std::size_t> shift_parent;  ///< index of eta_2..eta_m at depth m-1 (0 when m = 1)
  double phi_error = 0.0;               ///< max error bound of the Phi values
  double weight_oscillation = 0.0;      ///< max change of Phi between two representatives
  std::size_t barriers = 0;

  std::size_t states() const { return weight.size(); }
  std::size_t nonzeros() const { return states() * static_cast<std::size_t>(2 * d - 1); }

  /// L* nu.
  std::vector<double> apply_dual(const std::vector<double>& nu) const {
    std::vector<double> marg(m == 1 ? 1 : sphere_size(d, m - 1), 0.0);
    const std::size_t b = static_cast<std::size_t>(2 * d - 1);
    if (m == 1) {
      for (double v : nu) marg[0] += v;
    } else {
      for (std::size_t i = 0; i < nu.size(); ++i) marg[i / b] += nu[i];
    }
    std::vector<double> out(nu.size());
    for (std::size_t i = 0; i < nu.size(); ++i) out[i] = weight[i] * marg[m == 1 ? 0 : shift_parent[i]];
    return out;
  }

  /// L psi for psi a function of depth-m words.
  std::vector<double> apply(const std::vector<double>& psi) const {
    const std::size_t b = static_cast<std::size_t>(2 * d - 1);
    std::vector<double> acc(m == 1 ? 1 : sphere_size(d, m - 1), 0.0);
    for (std::size_t i = 0; i < psi.size(); ++i) acc[m == 1 ? 0 : shift_parent[i]] += weight[i] * psi[i];
    std::vector<double> out(psi.size());
    for (std::size_t i = 0; i < psi.size(); ++i) out[i] = acc[m == 1 ? 0 : i / b];
    return out;
  }
};

/// Largest depth m with 2d(2d-1)^(m-1) <= max_states.
inline std::size_t default_transfer_depth(int d, std::size_t max_states = 100'000) {
  std::size_t m = 1;
  while (sphere_size(d, m + 1) <= max_states) ++m;
  return m;
}

/// Weights at depth m; Phi is evaluated with the barrier count needed for tol.
inline TransferOperator build_transfer(const MartinKernel& K, std::size_t m, double tol, bool oscillation = true) {
  const auto& p = K.distribution();
  if (m < p.range() + 1) fail(ErrorKind::DepthTooShallow, "transfer depth must be >= r + 1");
  const int d = p.rank();
  const CylinderIndex idx(d, m);
  const std::size_t k = K.barriers_for(tol);
  const std::size_t rep_depth = std::max(m + 1, K.depth_for_barriers(k));
  TransferOperator T;
  T.d = d;
  T.m = m;
  T.barriers = k;
  const std::size_t n = idx.size();
  T.weight.resize(n);
  T.phi.resize(n);
  T.shift_parent.assign(n, 0);
  std::vector<double> err(n, 0.0), osc(n, 0.0);
  std::unique_ptr<CylinderIndex> parent;
  if (m > 1) parent = std::make_unique<CylinderIndex>(d, m - 1);
  parallel_for(n, [&](std::size_t i) {
    const Word w = idx.word(i);
    const auto v = K.phi(CylinderPrefix(w).extended(rep_depth), k);
    T.phi[i] = v.value;
    T.weight[i] = std::exp(v.value);
    err[i] = v.error_bound;
    if (parent) T.shift_parent[i] = parent->index(w.suffix_from(1));
    if (oscillation) {
      // A second representative: turn once after eta, then repeat.
      Letter turn = 0;
      for (Letter c : alphabet(d))
        if (c != w.back() && c != inverse(w.back())) {
          turn = c;
          break;
        }
      if (turn != 0) {
        Word alt = w;
        alt.push_back(turn);
        const auto v2 = K.phi(CylinderPrefix(alt).extended(rep_depth), k);
        osc[i] = std::abs(v2.value - v.value);
      }
    }
  });
  T.phi_error = *std::max_element(err.begin(), err.end());
  T.weight_oscillation = *std::max_element(osc.begin(), osc.end());
  return T;
}

struct StationaryResult {
  CylinderMeasure measure;
  double pressure = 0.0;
  double eigenvalue = 1.0;
  double gap = 0.0;  ///< measured contraction ratio of successive iterate differences
  std::vector<double> right;  ///< right eigenvector, normalized so <nu, h> = 1
  std::size_t iterations = 0;
  double residual = 0.0;
};

inline StationaryResult stationary_measure(const TransferOperator& T, double tol, std::size_t max_iter = 20'000) {
  if (!(tol > 0.0)) fail(ErrorKind::InvalidArgument, "stationary_measure needs tol > 0");
  const std::size_t n = T.states();
  std::vector<double> nu(n, 1.0 / static_cast<double>(n));
  StationaryResult out;
  double prev_diff = std::numeric_limits<double>::infinity();
  double lambda = 1.0, diff = 0.0;
  std::vector<double> ratios;
  double best = std::numeric_limits<double>::infinity();
  std::size_t since_best = 0;
  std::size_t it = 0;
  for (; it < max_iter; ++it) {
    auto next = T.apply_dual(nu);
    double s = 0.0;
    for (double v : next) s += v;
    lambda = s;
    for (double& v : next) v /= s;
    diff = 0.0;
    for (std::size_t i = 0; i < n; ++i) diff += std::abs(next[i] - nu[i]);
    nu = std::move(next);
    if (diff > 1e-10 && std::isfinite(prev_diff)) ratios.push_back(diff / prev_diff);
    prev_diff = diff;
    if (diff <= tol * 1e-2) break;
    // Rounding floor: below tol and no new minimum for a while.
    if (diff < best) {
      best = diff;
      since_best = 0;
    } else if (diff <= tol && ++since_best >= 25) {
      break;
    }
  }
  if (it == max_iter) fail(ErrorKind::NoConvergence, "transfer power iteration did not converge");
  out.iterations = it + 1;
  out.residual = diff;
  out.eigenvalue = lambda;
  out.pressure = std::log(lambda);
  if (!ratios.empty()) {
    const std::size_t tail = std::min<std::size_t>(ratios.size(), 5);
    double g = 0.0;
    for (std::size_t i = ratios.size() - tail; i < ratios.size(); ++i) g = std::max(g, ratios[i]);
    out.gap = std::min(g, 1.0);
  }

  // Right eigenvector by the same iteration on functions.
  std::vector<double> h(n, 1.0);
  for (std::size_t j = 0; j < out.iterations + 50 && j < max_iter; ++j) {
    auto next = T.apply(h);
    double mx = 0.0;
    for (double v : next) mx = std::max(mx, v);
    for (double& v : next) v /= mx;
    double dh = 0.0;
    for (std::size_t i = 0; i < n; ++i) dh = std::max(dh, std::abs(next[i] - h[i]));
    h = std::move(next);
    if (dh <= tol * 1e-2) break;
  }
  double pair = 0.0;
  for (std::size_t i = 0; i < n; ++i) pair += nu[i] * h[i];
  for (double& v : h) v /= pair;
  out.right = std::move(h);

  out.measure.d = T.d;
  out.measure.depth = T.m;
  out.measure.masses = std::move(nu);
  out.measure.method = "transfer";
  const double contraction = out.gap < 1.0 ? 1.0 / (1.0 - out.gap) : std::numeric_limits<double>::infinity();
  out.measure.error_estimate = (T.weight_oscillation + T.phi_error) * contraction + out.residual;
  return out;
}

/// Total-variation defect of mu against sum_x p(x) x_* mu on depth-(m-r) cylinders.
inline double check_stationarity(const CylinderMeasure& mu, const StepDistribution& p) {
  const std::size_t r = p.range();
  if (mu.depth < 2 * r) fail(ErrorKind::DepthTooShallow, "stationarity check needs depth >= 2r");
  const std::size_t target = mu.depth - r;
  const CylinderIndex src(mu.d, mu.depth), dst(mu.d, target);
  std::vector<double> pushed(dst.size(), 0.0);
  for (std::size_t i = 0; i < mu.masses.size(); ++i) {
    if (mu.masses[i] == 0.0) continue;
    const Word w = src.word(i);
    for (std::size_t j = 0; j < p.size(); ++j) {
      const Word img = p.word(j) * w;
      pushed[dst.index(img.prefix(target))] += p.prob(j) * mu.masses[i];
    }
  }
  const auto marg = mu.marginal(target);
  double s = 0.0;
  for (std::size_t i = 0; i < pushed.size(); ++i) s += std::abs(pushed[i] - marg.masses[i]);
  return 0.5 * s;
}

/// |∫ L psi dmu - ∫ psi dmu| for a function psi of depth-m words.
inline double radon_nikodym_defect(const TransferOperator& T, const CylinderMeasure& mu, const std::vector<double>& psi) {
  const auto lpsi = T.apply(psi);
  double a = 0.0, b = 0.0;
  for (std::size_t i = 0; i < psi.size(); ++i) {
    a += mu.masses[i] * lpsi[i];
    b += mu.masses[i] * psi[i];
  }
  return std::abs(a - b);
}

/// Walks until |X_n| >= exit_radius and records the depth-m prefix of X_n.
inline CylinderMeasure monte_carlo_harmonic(const StepDistribution& p, std::size_t m, std::size_t exit_radius,
                                            std::size_t samples, std::uint64_t seed) {
  if (exit_radius < m + 2 * p.range())
    fail(ErrorKind::InvalidArgument, "Monte Carlo exit radius must be >= m + 2r");
  const CylinderIndex idx(p.rank(), m);
  const DiscreteSampler sampler(p.probs());
  const std::size_t chunks = std::max<std::size_t>(1, std::min<std::size_t>(samples, 64));
  std::vector<std::vector<std::uint64_t>> counts(chunks, std::vector<std::uint64_t>(idx.size(), 0));
  parallel_for(chunks, [&](std::size_t c) {
    for (std::size_t s = c; s < samples; s += chunks) {
      Rng rng = Rng::split(seed, s);
      Word x;
      while (x.size() < exit_radius) x = x * p.word(sampler(rng));
      ++counts[c][idx.index(x.prefix(m))];
    }
  });
  CylinderMeasure mu;
  mu.d = p.rank();
  mu.depth = m;
  mu.method = "monte_carlo";
  mu.masses.assign(idx.size(), 0.0);
  mu.std_errors.assign(idx.size(), 0.0);
  mu.samples_hint = static_cast<double>(samples);
  for (std::size_t i = 0; i < idx.size(); ++i) {
    std::uint64_t total = 0;
    for (const auto& cc : counts) total += cc[i];
    const double f = static_cast<double>(total) / static_cast<double>(samples);
    mu.masses[i] = f;
    mu.std_errors[i] = std::sqrt(f * (1.0 - f) / static_cast<double>(samples));
  }
  double se_tv = 0.0;
  for (double e : mu.std_errors) se_tv += e;
  mu.error_estimate = 0.5 * se_tv;
  return mu;
}

inline std::size_t default_exit_radius(const StepDistribution& p, std::size_t m) { return m + 2 * p.range() + 8; }

}  // namespace fwalk
