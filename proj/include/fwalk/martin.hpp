#pragma once

// Phi(xi) = -ln K_xi(xi_1) from projective products of barrier matrices, the
// log Martin kernel ln K_xi(x) by telescoping over the letters of x, and a
// fitted Hoelder modulus of Phi.
//
// With barriers V_1..V_k on the ray of xi (first one after xi_1),
//   K_xi(xi_1) ~ <alpha_{xi_1}^{V_1}, A_1...A_{k-1} f> / <alpha_e^{V_1}, A_1...A_{k-1} f>
// for any positive f on V_k. Every A_s maps the cone into a set of projective
// diameter <= Delta_max and contracts by beta_0 = max tanh(Diam/4), so the
// f-dependence is below Delta_max * beta_0^(k-2). The second error term
// tracks the hitting-probability errors of the alphas and of each A_s through
// the same contraction.
//
// Cocycle: K_xi(gh) = K_xi(g) K_{g^{-1}xi}(h), and for a letter b != eta_1,
// ln K_eta(b) = -ln K_{b^{-1}eta}(b^{-1}) = Phi(b^{-1}eta).

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <mutex>
#include <shared_mutex>
#include <string>
#include <unordered_map>
#include <vector>

#include "fwalk/barriers.hpp"
#include "fwalk/error.hpp"
#include "fwalk/free_group.hpp"
#include "fwalk/hitting.hpp"
#include "fwalk/rng.hpp"
#include "fwalk/walk.hpp"

namespace fwalk {

struct PhiValue {
  double value = 0.0;
  double error_bound = 0.0;
  std::size_t barriers_used = 0;
  double projective_error = 0.0;  ///< dependence on the vector placed at V_k
  double hitting_error = 0.0;     ///< propagated first-visit errors
};

namespace detail {

inline double log_perturbation(double rel) {
  if (rel >= 1.0) return std::numeric_limits<double>::infinity();
  return std::log((1.0 + rel) / (1.0 - rel));
}

inline double dot(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

}  // namespace detail

class MartinKernel {
 public:
  /// hit_tol is the first-visit tolerance used for every alpha and matrix row.
  explicit MartinKernel(const StepDistribution& p, double hit_tol = 1e-7, HittingOptions opts = {})
      : MartinKernel(std::make_shared<const HittingSolver>(p, opts), hit_tol) {}

  MartinKernel(std::shared_ptr<const HittingSolver> solver, double hit_tol)
      : family_(std::make_shared<const BarrierFamily>(solver, hit_tol)), hit_tol_(hit_tol) {}

  const StepDistribution& distribution() const { return family_->solver().distribution(); }
  const BarrierFamily& family() const { return *family_; }
  std::size_t range() const { return family_->range(); }
  double hit_tol() const { return hit_tol_; }

  /// Prefix depth phi needs for k barriers.
  std::size_t depth_for_barriers(std::size_t k) const { return k * range() + 2; }

  /// Projective part of the error bound for k barriers.
  double projective_bound(std::size_t k) const {
    if (family_->dimension() == 1) return 0.0;
    if (k < 2) return std::numeric_limits<double>::infinity();
    return family_->max_diam() * std::pow(family_->beta0(), static_cast<double>(k - 2));
  }

  /// Smallest k whose projective bound is below tol / 2.
  std::size_t barriers_for(double tol, std::size_t max_barriers = 200) const {
    if (family_->dimension() == 1) return 1;
    for (std::size_t k = 2; k <= max_barriers; ++k)
      if (projective_bound(k) <= 0.5 * tol) return k;
    fail(ErrorKind::NoConvergence, "barrier contraction beta_0 = " + std::to_string(family_->beta0()) +
                                       " too weak for tolerance " + std::to_string(tol));
  }

  PhiValue phi(const CylinderPrefix& xi, std::size_t k) const {
    if (k < 1) fail(ErrorKind::InvalidArgument, "phi needs k >= 1");
    const std::size_t need = depth_for_barriers(k);
    if (xi.depth() < need)
      fail(ErrorKind::InsufficientDepth, "phi with " + std::to_string(k) + " barriers needs depth " +
                                             std::to_string(need) + ", got " + std::to_string(xi.depth()));
    const Word key_word = xi.word().prefix(need);
    const std::string key = key_word.key() + '#' + std::to_string(k);
    {
      std::shared_lock lock(mutex_);
      const auto it = cache_.find(key);
      if (it != cache_.end()) return it->second;
    }
    const PhiValue v = compute_phi(CylinderPrefix(key_word), k);
    std::unique_lock lock(mutex_);
    cache_.emplace(key, v);
    return v;
  }

  PhiValue phi_tol(const CylinderPrefix& xi, double tol) const { return phi(xi, barriers_for(tol)); }

  /// ln K_xi(x), summed letter by letter.
  PhiValue log_kernel(const CylinderPrefix& xi, const Word& x, std::size_t k) const {
    PhiValue out;
    out.barriers_used = k;
    Word eta = xi.word();
    for (std::size_t i = 0; i < x.size(); ++i) {
      const Letter b = x[i];
      PhiValue term;
      if (!eta.empty() && eta.front() == b) {
        term = phi(CylinderPrefix(eta), k);
        term.value = -term.value;
        eta = eta.suffix_from(1);
      } else {
        eta = Word{inverse(b)} * eta;
        term = phi(CylinderPrefix(eta), k);
      }
      out.value += term.value;
      out.error_bound += term.error_bound;
      out.projective_error += term.projective_error;
      out.hitting_error += term.hitting_error;
    }
    return out;
  }

  PhiValue log_kernel_tol(const CylinderPrefix& xi, const Word& x, double tol) const {
    const double per_letter = x.empty() ? tol : tol / static_cast<double>(x.size());
    return log_kernel(xi, x, barriers_for(per_letter));
  }

  /// Prefix depth log_kernel needs for |x| <= len and k barriers.
  std::size_t kernel_depth_for(std::size_t len, std::size_t k) const { return depth_for_barriers(k) + len; }

  std::size_t cache_size() const {
    std::shared_lock lock(mutex_);
    return cache_.size();
  }

 private:
  PhiValue compute_phi(const CylinderPrefix& xi, std::size_t k) const {
    const auto& p = distribution();
    const auto chain = build_barrier_chain(p, xi, Word{});
    if (chain.size() < k) fail(ErrorKind::InsufficientDepth, "barrier chain shorter than requested");
    const auto& solver = family_->solver();

    std::vector<double> vec(chain[k - 1].size(), 1.0 / static_cast<double>(chain[k - 1].size()));
    double hit_err = 0.0;
    for (std::size_t s = k - 1; s >= 1; --s) {
      const auto A = family_->matrix(chain[s - 1], chain[s]);
      const double vmax = *std::max_element(vec.begin(), vec.end());
      std::vector<double> next = A->apply(vec);
      double rel = 0.0;
      for (std::size_t i = 0; i < next.size(); ++i) rel = std::max(rel, A->row_error[i] * vmax / next[i]);
      hit_err = A->beta * hit_err + detail::log_perturbation(rel);
      double sum = 0.0;
      for (double v : next) sum += v;
      for (double& v : next) v /= sum;
      vec = std::move(next);
    }

    const auto alpha = solver.first_visit(Word{}, chain[0].members, hit_tol_);
    const auto alpha1 = solver.first_visit(Word{xi[0]}, chain[0].members, hit_tol_);
    const double den = detail::dot(alpha.estimate, vec), num = detail::dot(alpha1.estimate, vec);
    if (!(den > 0.0) || !(num > 0.0)) fail(ErrorKind::DegenerateMatrix, "vanishing first-visit pairing for " + to_string(xi));
    const double vmax = *std::max_element(vec.begin(), vec.end());
    hit_err += detail::log_perturbation(alpha.error() * vmax / den) / 2.0;
    hit_err += detail::log_perturbation(alpha1.error() * vmax / num) / 2.0;

    PhiValue out;
    out.value = -std::log(num / den);
    out.barriers_used = k;
    out.projective_error = projective_bound(k);
    out.hitting_error = hit_err;
    out.error_bound = out.projective_error + out.hitting_error;
    return out;
  }

  std::shared_ptr<const BarrierFamily> family_;
  double hit_tol_;
  mutable std::shared_mutex mutex_;
  mutable std::unordered_map<std::string, PhiValue> cache_;
};

inline PhiValue phi(const StepDistribution& p, const CylinderPrefix& xi, std::size_t k) {
  return MartinKernel(p).phi(xi, k);
}

inline PhiValue log_martin_kernel(const StepDistribution& p, const CylinderPrefix& xi, const Word& x, std::size_t k) {
  return MartinKernel(p).log_kernel(xi, x, k);
}

/// Uniformly random reduced word of length n that does not start with `avoid_first`
/// (0 = no restriction) and does not cancel against `prev`.
inline Word random_reduced_word(int d, std::size_t n, Rng& rng, Letter prev = 0) {
  Word w;
  Letter last = prev;
  for (std::size_t i = 0; i < n; ++i) {
    const int choices = last == 0 ? 2 * d : 2 * d - 1;
    int pick = static_cast<int>(rng.uniform() * choices);
    pick = std::min(pick, choices - 1);
    Letter a = 0;
    for (int rank = 0, seen = 0; rank < 2 * d; ++rank) {
      const Letter c = letter_from_rank(rank);
      if (last != 0 && c == inverse(last)) continue;
      if (seen++ == pick) {
        a = c;
        break;
      }
    }
    w.push_back(a);
    last = a;
  }
  return w;
}

struct HolderFit {
  double beta_hat = 0.0;
  double C_hat = 0.0;
  std::vector<std::size_t> n;
  std::vector<double> sup_diff;
  double noise_floor = 0.0;
  std::size_t points_fitted = 0;
  bool degenerate = false;  ///< every sup below the noise floor

  /// sup_n <= C beta^n + floor at every sampled n.
  bool bound_holds() const {
    for (std::size_t i = 0; i < n.size(); ++i)
      if (sup_diff[i] > C_hat * std::pow(beta_hat, static_cast<double>(n[i])) + noise_floor) return false;
    return true;
  }
};

/// Samples pairs agreeing on exactly n letters for n = n_min..n_max and fits
/// the upper envelope of sup |Phi(xi) - Phi(xi')| by C beta^n.
inline HolderFit holder_norm_estimate(const MartinKernel& K, std::size_t n_min, std::size_t n_max, std::size_t samples,
                                      std::uint64_t seed, std::size_t k) {
  const int d = K.distribution().rank();
  const std::size_t tail_len = K.depth_for_barriers(k);
  HolderFit fit;
  double max_err = 0.0;
  for (std::size_t n = n_min; n <= n_max; ++n) {
    Rng rng = Rng::split(seed, n);
    double sup = 0.0;
    for (std::size_t s = 0; s < samples; ++s) {
      const Word common = random_reduced_word(d, n, rng);
      Word a = common, b = common;
      const Letter last = common.empty() ? 0 : common.back();
      const Word ta = random_reduced_word(d, 1, rng, last);
      Word tb;
      do tb = random_reduced_word(d, 1, rng, last);
      while (tb == ta);
      a = a * ta;
      b = b * tb;
      a = a * random_reduced_word(d, tail_len, rng, a.back());
      b = b * random_reduced_word(d, tail_len, rng, b.back());
      const auto pa = K.phi(CylinderPrefix(a), k), pb = K.phi(CylinderPrefix(b), k);
      sup = std::max(sup, std::abs(pa.value - pb.value));
      max_err = std::max({max_err, pa.hitting_error, pb.hitting_error});
    }
    fit.n.push_back(n);
    fit.sup_diff.push_back(sup);
  }
  fit.noise_floor = 2.0 * max_err + 1e-12;

  std::vector<double> xs, ys;
  for (std::size_t i = 0; i < fit.n.size(); ++i)
    if (fit.sup_diff[i] > fit.noise_floor) {
      xs.push_back(static_cast<double>(fit.n[i]));
      ys.push_back(std::log(fit.sup_diff[i]));
    }
  fit.points_fitted = xs.size();
  if (xs.size() < 2) {
    fit.degenerate = true;
    fit.beta_hat = 0.0;
    fit.C_hat = 0.0;
    return fit;
  }
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    mx += xs[i];
    my += ys[i];
  }
  mx /= static_cast<double>(xs.size());
  my /= static_cast<double>(xs.size());
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sxy += (xs[i] - mx) * (ys[i] - my);
    sxx += (xs[i] - mx) * (xs[i] - mx);
  }
  const double slope = sxy / sxx;
  fit.beta_hat = std::exp(slope);
  double lnC = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < xs.size(); ++i) lnC = std::max(lnC, ys[i] - slope * xs[i]);
  fit.C_hat = std::exp(lnC);
  return fit;
}

}  // namespace fwalk
