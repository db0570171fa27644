#pragma once

// Entropy h, drift l and dimension D = h / l of a walk, by boundary
// integration against the harmonic measure, by exact convolution tables and by
// Monte Carlo, together with the convolution-power identities and sweeps along
// segments of the simplex of step distributions.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <iomanip>
#include <limits>
#include <memory>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "fwalk/boundary.hpp"
#include "fwalk/error.hpp"
#include "fwalk/free_group.hpp"
#include "fwalk/martin.hpp"
#include "fwalk/parallel.hpp"
#include "fwalk/rng.hpp"
#include "fwalk/walk.hpp"

namespace fwalk {

struct Value {
  double value = 0.0;
  double error = 0.0;  ///< error bound, or standard error for Monte Carlo
  std::string method;
  bool fitted = true;  ///< false only when every ingredient is a certified bound

  bool agrees(const Value& o, double factor = 1.0) const {
    return std::abs(value - o.value) <= factor * (error + o.error);
  }
};

inline Value ratio(const Value& a, const Value& b, std::string method) {
  Value out;
  out.value = a.value / b.value;
  out.error = std::abs(out.value) * (a.error / std::abs(a.value) + b.error / std::abs(b.value));
  out.method = std::move(method);
  out.fitted = a.fitted || b.fitted;
  return out;
}

// ── Boundary route ──────────────────────────────────────────────────────────

struct BoundaryOptions {
  double hit_tol = 1e-8;
  double phi_tol = 1e-6;
  std::size_t depth = 0;  ///< transfer depth; 0 picks default_transfer_depth
  double power_tol = 1e-12;
  HittingOptions hitting{};
};

/// l = sum_x p(x) ∫ theta_xi(x^{-1}) dmu(xi), integrated exactly on depth-r cylinders.
inline Value drift_boundary(const StepDistribution& p, const CylinderMeasure& mu) {
  const std::size_t r = p.range();
  if (mu.depth < r) fail(ErrorKind::DepthTooShallow, "drift integral needs measure depth >= r");
  const CylinderMeasure marg = r == mu.depth ? mu : mu.marginal(std::max<std::size_t>(r, 1));
  const CylinderIndex idx = marg.index();
  Value out;
  out.method = "boundary";
  double err = 0.0;
  for (std::size_t j = 0; j < p.size(); ++j) {
    const Word y = inverse(p.word(j));
    double s = 0.0;
    for (std::size_t i = 0; i < marg.masses.size(); ++i)
      s += marg.masses[i] * busemann(CylinderPrefix(idx.word(i)), y);
    out.value += p.prob(j) * s;
    err += p.prob(j) * static_cast<double>(y.size());
  }
  out.error = err * mu.error_estimate;
  return out;
}

struct EntropyIntegral {
  Value h;
  double kernel_error = 0.0;
  double measure_error = 0.0;
  double representative_error = 0.0;
  std::size_t barriers = 0;
  std::size_t evaluation_depth = 0;
};

/// h = -sum_x p(x) ∫ ln K_xi(x^{-1}) dmu(xi).
///
/// When ln K for |x| <= r is determined by a prefix no longer than mu.depth the
/// sum runs over the marginal at that depth and involves no representative
/// error. Otherwise each depth-m cylinder is evaluated at two representatives
/// and twice their spread is charged as the representative error.
inline EntropyIntegral entropy_boundary(const StepDistribution& p, const CylinderMeasure& mu, const MartinKernel& K,
                                        double tol) {
  const std::size_t r = p.range();
  if (mu.depth < r) fail(ErrorKind::DepthTooShallow, "entropy integral needs measure depth >= r");
  const std::size_t k = K.barriers_for(tol / static_cast<double>(std::max<std::size_t>(r, 1)));
  const std::size_t need = K.kernel_depth_for(r, k);
  const bool exact = need <= mu.depth;
  const CylinderMeasure marg = exact ? mu.marginal(need) : mu;
  const CylinderIndex idx = marg.index();
  const int d = p.rank();

  std::vector<Word> ys;
  for (std::size_t j = 0; j < p.size(); ++j) ys.push_back(inverse(p.word(j)));

  const std::size_t n = marg.masses.size();
  std::vector<double> contrib(n, 0.0), kerr(n, 0.0), sup(n, 0.0), rep(n, 0.0);
  parallel_for(n, [&](std::size_t i) {
    if (marg.masses[i] == 0.0) return;
    const Word w = idx.word(i);
    const CylinderPrefix xi = CylinderPrefix(w).extended(std::max(need, w.size()));
    std::optional<CylinderPrefix> alt;
    if (!exact) {
      Letter turn = 0;
      for (Letter c : alphabet(d))
        if (c != w.back() && c != inverse(w.back())) {
          turn = c;
          break;
        }
      Word a = w;
      a.push_back(turn);
      alt = CylinderPrefix(a).extended(std::max(need, a.size()));
    }
    double s = 0.0, e = 0.0, m = 0.0, spread = 0.0;
    for (std::size_t j = 0; j < ys.size(); ++j) {
      if (ys[j].empty()) continue;
      const auto v = K.log_kernel(xi, ys[j], k);
      s += p.prob(j) * v.value;
      e += p.prob(j) * v.error_bound;
      m = std::max(m, std::abs(v.value));
      if (alt) spread += p.prob(j) * std::abs(K.log_kernel(*alt, ys[j], k).value - v.value);
    }
    contrib[i] = s;
    kerr[i] = e;
    sup[i] = m;
    rep[i] = 2.0 * spread;
  });

  EntropyIntegral out;
  out.barriers = k;
  out.evaluation_depth = exact ? need : mu.depth;
  double h = 0.0, sup_all = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    h -= marg.masses[i] * contrib[i];
    out.kernel_error += marg.masses[i] * kerr[i];
    out.representative_error += marg.masses[i] * rep[i];
    sup_all = std::max(sup_all, sup[i]);
  }
  out.measure_error = sup_all * mu.error_estimate;
  out.h.value = h;
  out.h.error = out.kernel_error + out.measure_error + out.representative_error;
  out.h.method = "boundary";
  return out;
}

struct BoundaryRoute {
  Value h, ell, D;
  double pressure = 0.0;
  double stationarity_tv = 0.0;
  double gap = 0.0;
  double beta0 = 0.0;
  std::size_t depth = 0;
  std::size_t barriers = 0;
  std::size_t power = 1;  ///< convolution power k the route ran on; h and l are divided by k
  std::size_t transfer_iterations = 0;
  double phi_error = 0.0;
  double weight_oscillation = 0.0;
  double measure_error = 0.0;
  CylinderMeasure measure;
};

/// The full pipeline on an existing kernel: transfer operator, stationary
/// measure, then the two integrals.
inline BoundaryRoute boundary_route(const MartinKernel& K, const BoundaryOptions& o = {}) {
  const auto& q = K.distribution();
  BoundaryRoute out;
  out.depth = o.depth ? o.depth : default_transfer_depth(q.rank());
  out.depth = std::max(out.depth, std::max<std::size_t>(q.range() + 1, 2 * q.range()));
  const TransferOperator T = build_transfer(K, out.depth, o.phi_tol);
  const StationaryResult st = stationary_measure(T, o.power_tol);
  out.pressure = st.pressure;
  out.gap = st.gap;
  out.beta0 = K.family().beta0();
  out.barriers = T.barriers;
  out.transfer_iterations = st.iterations;
  out.phi_error = T.phi_error;
  out.weight_oscillation = T.weight_oscillation;
  out.measure_error = st.measure.error_estimate;
  out.stationarity_tv = check_stationarity(st.measure, q);
  out.ell = drift_boundary(q, st.measure);
  out.h = entropy_boundary(q, st.measure, K, o.phi_tol).h;
  out.measure = st.measure;
  out.D = ratio(out.h, out.ell, "boundary");
  return out;
}

/// Runs on p, or on p^(k) divided by k when p charges no generator itself.
inline BoundaryRoute boundary_route(const StepDistribution& p, const BoundaryOptions& o = {}) {
  const auto [q, k] = ensure_generators(p);
  const MartinKernel K(std::make_shared<const HittingSolver>(q, o.hitting), o.hit_tol);
  BoundaryRoute out = boundary_route(K, o);
  out.power = static_cast<std::size_t>(k);
  if (k > 1) {
    const double kk = static_cast<double>(k);
    for (Value* v : {&out.h, &out.ell}) {
      v->value /= kk;
      v->error /= kk;
    }
  }
  return out;
}

// ── Convolution route ───────────────────────────────────────────────────────

struct EntropyStep {
  std::size_t n = 0;
  double H = 0.0;           ///< Shannon entropy of p^(n)
  double increment = 0.0;   ///< H_{n+1} - H_n, NaN past the table
  double mean_length = 0.0; ///< E|X_n|
};

/// Exact entropies of p^(0), ..., p^(n_max).
inline std::vector<EntropyStep> entropy_convolution(const StepDistribution& p, std::size_t n_max,
                                                    std::size_t cap = kDefaultTableCap) {
  std::vector<EntropyStep> out;
  ConvolutionTable t = ConvolutionTable::dirac();
  for (std::size_t n = 0; n <= n_max; ++n) {
    if (n > 0) t = convolve(t, p, cap);
    out.push_back({n, t.shannon(), std::numeric_limits<double>::quiet_NaN(), t.mean_length()});
  }
  for (std::size_t n = 0; n + 1 < out.size(); ++n) out[n].increment = out[n + 1].H - out[n].H;
  return out;
}

/// Aitken's delta-squared on the last three terms.
inline double aitken(double a, double b, double c) {
  const double den = c - 2.0 * b + a;
  if (std::abs(den) < 1e-300) return c;
  return c - (c - b) * (c - b) / den;
}

/// Least-squares fit a + b/m + c/m^2 through points (m_i, y_i); returns a.
inline double richardson_intercept(const std::vector<double>& m, const std::vector<double>& y) {
  double M[3][4] = {};
  for (std::size_t i = 0; i < m.size(); ++i) {
    const double row[3] = {1.0, 1.0 / m[i], 1.0 / (m[i] * m[i])};
    for (int a = 0; a < 3; ++a) {
      for (int b = 0; b < 3; ++b) M[a][b] += row[a] * row[b];
      M[a][3] += row[a] * y[i];
    }
  }
  for (int c = 0; c < 3; ++c) {
    int piv = c;
    for (int r = c + 1; r < 3; ++r)
      if (std::abs(M[r][c]) > std::abs(M[piv][c])) piv = r;
    for (int j = 0; j < 4; ++j) std::swap(M[c][j], M[piv][j]);
    for (int r = 0; r < 3; ++r) {
      if (r == c) continue;
      const double f = M[r][c] / M[c][c];
      for (int j = 0; j < 4; ++j) M[r][j] -= f * M[c][j];
    }
  }
  return M[0][3] / M[0][0];
}

struct ConvolutionRoute {
  std::size_t n = 0;
  Value h;  ///< H_{n+1} - H_n; error = distance to the extrapolated limit
  Value ell;  ///< (E|X_{n+1}| - E|X_{n-1}|) / 2; error = oscillation or distance to the fit
  Value D;
  double h_aitken = 0.0;
  double h_richardson = 0.0;
  double ell_richardson = 0.0;
  std::vector<EntropyStep> steps;
};

/// Estimates at n from tables up to p^(n+1). The raw successor difference
/// decreases to h; the a + b/n + c/n^2 fit over the last four differences is
/// reported beside it and sets the error.
inline ConvolutionRoute convolution_route(const StepDistribution& p, std::size_t n,
                                          std::size_t cap = kDefaultTableCap) {
  if (n < 4) fail(ErrorKind::InvalidArgument, "convolution route needs n >= 4");
  ConvolutionRoute out;
  out.n = n;
  out.steps = entropy_convolution(p, n + 1, cap);
  const auto& s = out.steps;
  out.h.value = s[n].increment;
  out.h_aitken = aitken(s[n - 2].increment, s[n - 1].increment, s[n].increment);
  std::vector<double> ms, ys;
  for (std::size_t j = n - 3; j <= n; ++j) {
    ms.push_back(static_cast<double>(j) + 0.5);
    ys.push_back(s[j].increment);
  }
  out.h_richardson = richardson_intercept(ms, ys);
  out.h.error = std::abs(out.h.value - out.h_richardson);
  out.h.method = "convolution";
  const double l1 = s[n + 1].mean_length - s[n].mean_length, l0 = s[n].mean_length - s[n - 1].mean_length;
  out.ell.value = 0.5 * (l1 + l0);
  std::vector<double> ls;
  for (std::size_t j = n - 3; j <= n; ++j) ls.push_back(0.5 * (s[j + 1].mean_length - s[j - 1].mean_length));
  ms.clear();
  for (std::size_t j = n - 3; j <= n; ++j) ms.push_back(static_cast<double>(j));
  out.ell_richardson = richardson_intercept(ms, ls);
  out.ell.error = std::max(std::abs(l1 - l0), std::abs(out.ell.value - out.ell_richardson));
  out.ell.method = "convolution";
  out.D = ratio(out.h, out.ell, "convolution");
  return out;
}

// ── Monte Carlo ─────────────────────────────────────────────────────────────

struct McEstimates {
  std::size_t n = 0;
  std::size_t samples = 0;
  Value ell;             ///< mean |X_n| / n
  Value ell_difference;  ///< mean (|X_n| - |X_{n/2}|) / (n - n/2)
  Value h_smb;           ///< mean -ln p^(n)(X_n) / n; NaN without tables
  Value h_increment;     ///< mean ln p^(n)(X_n) - ln p^(n+1)(X_{n+1}); NaN without tables
};

namespace detail {

struct Moments {
  double sum = 0.0, sq = 0.0;
  void add(double x) {
    sum += x;
    sq += x * x;
  }
  Value value(std::size_t n, std::string method) const {
    const double mean = sum / static_cast<double>(n);
    const double var = std::max(0.0, sq / static_cast<double>(n) - mean * mean);
    return {mean, std::sqrt(var / static_cast<double>(n)), std::move(method), true};
  }
};

}  // namespace detail

/// Sample s follows Rng::split(seed, s), so results do not depend on threads.
/// tables, when given, must hold p^(0)..p^(n+1) for the entropy estimators.
inline McEstimates estimators_mc(const StepDistribution& p, std::size_t n, std::size_t samples, std::uint64_t seed,
                                 const std::vector<ConvolutionTable>* tables = nullptr) {
  if (n == 0 || samples < 2) fail(ErrorKind::InvalidArgument, "Monte Carlo needs n >= 1 and samples >= 2");
  const bool with_h = tables && tables->size() >= n + 2;
  const DiscreteSampler sampler(p.probs());
  const std::size_t chunks = std::max<std::size_t>(1, std::min<std::size_t>(samples, 64));
  const std::size_t half = n / 2;
  std::vector<detail::Moments> m_ell(chunks), m_diff(chunks), m_smb(chunks), m_inc(chunks);
  parallel_for(chunks, [&](std::size_t c) {
    for (std::size_t s = c; s < samples; s += chunks) {
      Rng rng = Rng::split(seed, s);
      Word x;
      double at_half = 0.0;
      for (std::size_t i = 1; i <= n; ++i) {
        x = x * p.word(sampler(rng));
        if (i == half) at_half = static_cast<double>(x.size());
      }
      m_ell[c].add(static_cast<double>(x.size()) / static_cast<double>(n));
      m_diff[c].add((static_cast<double>(x.size()) - at_half) / static_cast<double>(n - half));
      if (with_h) {
        const double ln_n = std::log((*tables)[n].at(x));
        const Word x1 = x * p.word(sampler(rng));
        const double ln_n1 = std::log((*tables)[n + 1].at(x1));
        m_smb[c].add(-ln_n / static_cast<double>(n));
        m_inc[c].add(ln_n - ln_n1);
      }
    }
  });
  auto merge = [&](const std::vector<detail::Moments>& v) {
    detail::Moments t;
    for (const auto& m : v) {
      t.sum += m.sum;
      t.sq += m.sq;
    }
    return t;
  };
  McEstimates out;
  out.n = n;
  out.samples = samples;
  out.ell = merge(m_ell).value(samples, "monte_carlo");
  out.ell_difference = merge(m_diff).value(samples, "monte_carlo");
  const double nan = std::numeric_limits<double>::quiet_NaN();
  if (with_h) {
    out.h_smb = merge(m_smb).value(samples, "monte_carlo");
    out.h_increment = merge(m_inc).value(samples, "monte_carlo");
  } else {
    out.h_smb = out.h_increment = {nan, nan, "unavailable", true};
  }
  return out;
}

inline McEstimates estimators_mc(const StepDistribution& p, std::size_t n, std::size_t samples, std::uint64_t seed,
                                 std::size_t cap) {
  std::vector<ConvolutionTable> tables;
  try {
    tables = convolution_powers(p, n + 1, cap);
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::MemoryBudgetExceeded) throw;
    tables.clear();
  }
  return estimators_mc(p, n, samples, seed, tables.empty() ? nullptr : &tables);
}

// ── Convolution identities ──────────────────────────────────────────────────

struct IdentityCheck {
  std::size_t k = 2;
  Value h_p, ell_p;
  Value h_pk, ell_pk;
  double h_defect = 0.0, ell_defect = 0.0;
  double h_budget = 0.0, ell_budget = 0.0;  ///< combined reported errors
  bool independent = true;  ///< false when p^(k) reused the kernel and measure of p
  bool passed(double factor = 3.0) const {
    return h_defect <= factor * h_budget && ell_defect <= factor * ell_budget;
  }
};

/// The integrals for another step law q sharing the harmonic measure and the
/// Martin kernel of p (for example q = p^(k)).
inline std::pair<Value, Value> shared_kernel_integrals(const StepDistribution& q, const CylinderMeasure& mu,
                                                       const MartinKernel& K, double tol) {
  const Value ell = drift_boundary(q, mu);
  const std::size_t r = q.range();
  const std::size_t kb = K.barriers_for(tol / static_cast<double>(r));
  const std::size_t need = K.kernel_depth_for(r, kb);
  if (need > mu.depth) fail(ErrorKind::DepthTooShallow, "shared-kernel entropy needs measure depth " + std::to_string(need));
  const CylinderMeasure marg = mu.marginal(need);
  const CylinderIndex idx = marg.index();
  double h = 0.0, err = 0.0, sup = 0.0;
  for (std::size_t i = 0; i < marg.masses.size(); ++i) {
    if (marg.masses[i] == 0.0) continue;
    const CylinderPrefix xi(idx.word(i));
    for (std::size_t j = 0; j < q.size(); ++j) {
      const Word y = inverse(q.word(j));
      if (y.empty()) continue;
      const auto v = K.log_kernel(xi, y, kb);
      h -= marg.masses[i] * q.prob(j) * v.value;
      err += marg.masses[i] * q.prob(j) * v.error_bound;
      sup = std::max(sup, std::abs(v.value));
    }
  }
  return {{h, err + sup * mu.error_estimate, "boundary_shared_kernel", true}, ell};
}

/// Compares h, l of p^(k) with k h_p, k l_p. When p^(k) charges every
/// generator it goes through its own boundary route; otherwise the integrals
/// for p^(k) reuse the kernel and measure of p.
inline IdentityCheck convolution_identity_check(const StepDistribution& p, std::size_t k,
                                                const BoundaryOptions& base_opts = {},
                                                const BoundaryOptions& power_opts = {}) {
  if (k < 2 || k > 3) fail(ErrorKind::InvalidArgument, "identity check supports k in {2, 3}");
  IdentityCheck out;
  out.k = k;
  const auto tables = convolution_powers(p, k);
  const StepDistribution q = to_distribution(p.rank(), tables[k]);
  if (q.contains_generators() && p.contains_generators()) {
    const BoundaryRoute rp = boundary_route(p, base_opts);
    const BoundaryRoute rq = boundary_route(q, power_opts);
    out.h_p = rp.h;
    out.ell_p = rp.ell;
    out.h_pk = rq.h;
    out.ell_pk = rq.ell;
  } else {
    const auto [pp, kk] = ensure_generators(p);
    const MartinKernel K(std::make_shared<const HittingSolver>(pp, base_opts.hitting), base_opts.hit_tol);
    BoundaryOptions o = base_opts;
    const std::size_t need = K.kernel_depth_for(k * p.range(), K.barriers_for(o.phi_tol / static_cast<double>(k * p.range())));
    o.depth = std::max(o.depth ? o.depth : default_transfer_depth(p.rank()), need);
    BoundaryRoute rp = boundary_route(K, o);
    const double kd = static_cast<double>(kk);
    rp.h.value /= kd;
    rp.h.error /= kd;
    rp.ell.value /= kd;
    rp.ell.error /= kd;
    out.h_p = rp.h;
    out.ell_p = rp.ell;
    std::tie(out.h_pk, out.ell_pk) = shared_kernel_integrals(q, rp.measure, K, o.phi_tol);
    out.independent = false;
  }
  const double kd = static_cast<double>(k);
  out.h_defect = std::abs(out.h_pk.value - kd * out.h_p.value);
  out.ell_defect = std::abs(out.ell_pk.value - kd * out.ell_p.value);
  out.h_budget = out.h_pk.error + kd * out.h_p.error;
  out.ell_budget = out.ell_pk.error + kd * out.ell_p.error;
  return out;
}

// ── Reports ─────────────────────────────────────────────────────────────────

struct ReportOptions {
  BoundaryOptions boundary{};
  std::size_t convolution_n = 0;  ///< 0 skips the convolution route
  std::size_t mc_samples = 0;     ///< 0 skips Monte Carlo
  std::size_t mc_steps = 400;     ///< path length for the drift estimator
  std::size_t mc_tv_depth = 3;    ///< depth of the Monte Carlo harmonic-measure comparison
  std::size_t mc_tv_samples = 0;  ///< 0 skips the comparison
  std::uint64_t seed = 1;
  std::size_t table_cap = kDefaultTableCap;
};

struct WalkReport {
  Value h, ell, D;
  struct Diagnostics {
    double pressure = 0.0;
    double stationarity_tv = 0.0;
    double mc_tv = std::numeric_limits<double>::quiet_NaN();
    double mc_tv_budget = std::numeric_limits<double>::quiet_NaN();
    double zeta = std::numeric_limits<double>::quiet_NaN();
    double transfer_gap = 0.0;
    double beta0 = 0.0;
    std::size_t depth = 0;
    std::size_t barriers = 0;
    std::size_t power = 1;
    double phi_error = 0.0;
    double weight_oscillation = 0.0;
    double measure_error = 0.0;
  } diagnostics;
  std::optional<ConvolutionRoute> convolution;
  std::optional<McEstimates> monte_carlo;
  std::vector<std::pair<Word, double>> step;
  int rank = 2;
};

inline WalkReport walk_report(const StepDistribution& p, const ReportOptions& o = {}) {
  WalkReport rep;
  rep.rank = p.rank();
  rep.step = p.entries();
  const BoundaryRoute b = boundary_route(p, o.boundary);
  rep.h = b.h;
  rep.ell = b.ell;
  rep.D = b.D;
  auto& g = rep.diagnostics;
  g.pressure = b.pressure;
  g.stationarity_tv = b.stationarity_tv;
  g.transfer_gap = b.gap;
  g.beta0 = b.beta0;
  g.depth = b.depth;
  g.barriers = b.barriers;
  g.power = b.power;
  g.phi_error = b.phi_error;
  g.weight_oscillation = b.weight_oscillation;
  g.measure_error = b.measure_error;
  try {
    g.zeta = estimate_decay(p, 10).zeta;
  } catch (const Error&) {
  }
  std::vector<ConvolutionTable> tables;
  if (o.convolution_n > 0) {
    rep.convolution = convolution_route(p, o.convolution_n, o.table_cap);
    if (o.mc_samples > 0) tables = convolution_powers(p, o.convolution_n + 1, o.table_cap);
  }
  if (o.mc_samples > 0) {
    McEstimates mc = estimators_mc(p, o.mc_steps, o.mc_samples, o.seed);
    if (!tables.empty()) {
      const McEstimates mh = estimators_mc(p, o.convolution_n, o.mc_samples, splitmix64(o.seed ^ 0x68ULL), &tables);
      mc.h_smb = mh.h_smb;
      mc.h_increment = mh.h_increment;
    }
    rep.monte_carlo = mc;
  }
  if (o.mc_tv_samples > 0 && b.measure.depth >= o.mc_tv_depth) {
    const StepDistribution& q = p;
    const auto mc = monte_carlo_harmonic(q, o.mc_tv_depth, default_exit_radius(q, o.mc_tv_depth), o.mc_tv_samples,
                                         splitmix64(o.seed ^ 0x74ULL));
    const auto tm = b.measure.marginal(o.mc_tv_depth);
    g.mc_tv = total_variation(mc, tm);
    g.mc_tv_budget = mc.error_estimate + tm.error_estimate;
  }
  return rep;
}

inline nlohmann::json to_json(const Value& v) {
  nlohmann::json j;
  j["value"] = v.value;
  j["error"] = v.error;
  j["method"] = v.method;
  j["fitted"] = v.fitted;
  return j;
}

inline nlohmann::json to_json(const WalkReport& r) {
  nlohmann::json j;
  j["rank"] = r.rank;
  nlohmann::json step = nlohmann::json::array();
  for (const auto& [w, m] : r.step) step.push_back({{"word", w.empty() ? std::string("e") : to_string(w)}, {"p", m}});
  j["step"] = step;
  j["h"] = to_json(r.h);
  j["ell"] = to_json(r.ell);
  j["D"] = to_json(r.D);
  const auto& g = r.diagnostics;
  auto num = [](double x) { return std::isfinite(x) ? nlohmann::json(x) : nlohmann::json(nullptr); };
  j["diagnostics"] = {{"pressure", g.pressure},
                      {"stationarity_tv", g.stationarity_tv},
                      {"mc_tv", num(g.mc_tv)},
                      {"mc_tv_budget", num(g.mc_tv_budget)},
                      {"zeta", num(g.zeta)},
                      {"transfer_gap", g.transfer_gap},
                      {"beta0", g.beta0},
                      {"depth", g.depth},
                      {"barriers", g.barriers},
                      {"convolution_power", g.power},
                      {"phi_error", g.phi_error},
                      {"weight_oscillation", g.weight_oscillation},
                      {"measure_error", g.measure_error}};
  if (r.convolution) {
    const auto& c = *r.convolution;
    nlohmann::json steps = nlohmann::json::array();
    for (const auto& s : c.steps)
      steps.push_back({{"n", s.n}, {"H", s.H}, {"increment", num(s.increment)}, {"mean_length", s.mean_length}});
    j["convolution"] = {{"n", c.n},
                        {"h", to_json(c.h)},
                        {"ell", to_json(c.ell)},
                        {"D", to_json(c.D)},
                        {"h_aitken", c.h_aitken},
                        {"h_richardson", c.h_richardson},
                        {"ell_richardson", c.ell_richardson},
                        {"steps", steps}};
  }
  if (r.monte_carlo) {
    const auto& m = *r.monte_carlo;
    auto val = [&](const Value& v) {
      nlohmann::json o = to_json(v);
      o["value"] = num(v.value);
      o["error"] = num(v.error);
      return o;
    };
    j["monte_carlo"] = {{"n", m.n},
                        {"samples", m.samples},
                        {"ell", val(m.ell)},
                        {"ell_difference", val(m.ell_difference)},
                        {"h_smb", val(m.h_smb)},
                        {"h_increment", val(m.h_increment)}};
  }
  return j;
}

inline void write_text(std::ostream& os, const WalkReport& r) {
  auto line = [&](const std::string& name, const Value& v) {
    os << std::left << std::setw(22) << name << std::right << std::setw(14) << std::setprecision(8) << v.value
       << "  +/- " << std::setw(11) << std::setprecision(3) << v.error << "  " << v.method
       << (v.fitted ? " (fitted)" : "") << '\n';
  };
  line("h", r.h);
  line("ell", r.ell);
  line("D", r.D);
  if (r.convolution) {
    line("h convolution", r.convolution->h);
    line("ell convolution", r.convolution->ell);
  }
  if (r.monte_carlo) {
    line("ell monte carlo", r.monte_carlo->ell_difference);
    if (std::isfinite(r.monte_carlo->h_increment.value)) line("h monte carlo", r.monte_carlo->h_increment);
  }
  const auto& g = r.diagnostics;
  os << std::left << std::setw(22) << "pressure" << std::setprecision(4) << g.pressure << '\n'
     << std::setw(22) << "stationarity tv" << g.stationarity_tv << '\n'
     << std::setw(22) << "beta0" << g.beta0 << '\n'
     << std::setw(22) << "depth" << g.depth << '\n'
     << std::setw(22) << "barriers" << g.barriers << '\n';
}

// ── Sweeps ──────────────────────────────────────────────────────────────────

struct SweepResult {
  std::vector<std::pair<Word, double>> p0, p1;
  std::vector<double> t;
  std::vector<WalkReport> points;
  std::vector<double> dh, dl;    ///< central first derivatives; one-sided at the ends
  std::vector<double> d2h, d2l;  ///< central second derivatives; NaN at the ends
  double tol = 0.0;
  double max_jump_h = 0.0, max_jump_ell = 0.0;  ///< largest defect of first differences against their neighbours
  double budget_h = 0.0, budget_ell = 0.0;      ///< the matching per-point error budget
  bool flagged = false;

  void write_csv(std::ostream& os) const {
    os << "t,h,h_err,ell,ell_err,D,D_err,dh,dell,d2h,d2ell\n";
    os << std::setprecision(12);
    for (std::size_t i = 0; i < t.size(); ++i) {
      const auto& r = points[i];
      os << t[i] << ',' << r.h.value << ',' << r.h.error << ',' << r.ell.value << ',' << r.ell.error << ','
         << r.D.value << ',' << r.D.error << ',' << dh[i] << ',' << dl[i] << ',';
      if (std::isfinite(d2h[i])) os << d2h[i];
      os << ',';
      if (std::isfinite(d2l[i])) os << d2l[i];
      os << '\n';
    }
  }
};

inline StepDistribution interpolate(const StepDistribution& p0, const StepDistribution& p1, double t) {
  auto a = p0.entries(), b = p1.entries();
  if (a.size() != b.size()) fail(ErrorKind::InvalidArgument, "sweep endpoints must share a support");
  std::vector<std::pair<Word, double>> w;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (!(a[i].first == b[i].first)) fail(ErrorKind::InvalidArgument, "sweep endpoints must share a support");
    w.push_back({a[i].first, (1.0 - t) * a[i].second + t * b[i].second});
  }
  return StepDistribution::from_weights(p0.rank(), w, StepDistribution::Check::None);
}

namespace detail {

/// For first differences D_i, the defect |D_i - (D_{i-1} + D_{i+1}) / 2| with
/// the largest ratio to its error budget, propagated from max(tol, e_i).
inline std::pair<double, double> jump_diagnostic(const std::vector<double>& f, const std::vector<double>& e,
                                                 double tol, double& worst_ratio) {
  double jump = 0.0, budget = 0.0;
  worst_ratio = 0.0;
  for (std::size_t i = 1; i + 2 < f.size(); ++i) {
    const double di = f[i + 1] - f[i], dm = f[i] - f[i - 1], dp = f[i + 2] - f[i + 1];
    const double j = std::abs(di - 0.5 * (dm + dp));
    auto b = [&](std::size_t k) { return std::max(tol, e[k]); };
    const double bud = 0.5 * (b(i - 1) + 3.0 * b(i) + 3.0 * b(i + 1) + b(i + 2));
    if (j / bud > worst_ratio) {
      worst_ratio = j / bud;
      jump = j;
      budget = bud;
    }
  }
  return {jump, budget};
}

}  // namespace detail

/// Boundary-route reports along p(t) = (1 - t) p0 + t p1.
inline SweepResult sweep(const StepDistribution& p0, const StepDistribution& p1, const std::vector<double>& grid,
                         double tol, const BoundaryOptions& opts = {}) {
  if (grid.size() < 4) fail(ErrorKind::InvalidArgument, "sweep needs at least 4 grid points");
  for (std::size_t i = 1; i < grid.size(); ++i)
    if (!(grid[i] > grid[i - 1])) fail(ErrorKind::InvalidArgument, "sweep grid must be strictly increasing");
  SweepResult out;
  out.p0 = p0.entries();
  out.p1 = p1.entries();
  out.t = grid;
  out.tol = tol;
  std::vector<StepDistribution> ps;
  for (double t : grid) {
    ps.push_back(interpolate(p0, p1, t));
    for (double m : ps.back().probs())
      if (!(m > 0.0)) fail(ErrorKind::InvalidArgument, "sweep point outside the open simplex");
  }
  out.points.resize(grid.size());
  parallel_for(grid.size(), [&](std::size_t i) {
    ReportOptions ro;
    ro.boundary = opts;
    out.points[i] = walk_report(ps[i], ro);
  });

  const std::size_t n = grid.size();
  std::vector<double> h(n), l(n), eh(n), el(n);
  for (std::size_t i = 0; i < n; ++i) {
    h[i] = out.points[i].h.value;
    l[i] = out.points[i].ell.value;
    eh[i] = out.points[i].h.error;
    el[i] = out.points[i].ell.error;
  }
  auto first = [&](const std::vector<double>& f) {
    std::vector<double> d(n);
    d[0] = (f[1] - f[0]) / (grid[1] - grid[0]);
    d[n - 1] = (f[n - 1] - f[n - 2]) / (grid[n - 1] - grid[n - 2]);
    for (std::size_t i = 1; i + 1 < n; ++i) d[i] = (f[i + 1] - f[i - 1]) / (grid[i + 1] - grid[i - 1]);
    return d;
  };
  auto second = [&](const std::vector<double>& f) {
    std::vector<double> d(n, std::numeric_limits<double>::quiet_NaN());
    for (std::size_t i = 1; i + 1 < n; ++i) {
      const double a = grid[i] - grid[i - 1], b = grid[i + 1] - grid[i];
      d[i] = 2.0 * (b * f[i - 1] - (a + b) * f[i] + a * f[i + 1]) / (a * b * (a + b));
    }
    return d;
  };
  out.dh = first(h);
  out.dl = first(l);
  out.d2h = second(h);
  out.d2l = second(l);
  double rh = 0.0, rl = 0.0;
  std::tie(out.max_jump_h, out.budget_h) = detail::jump_diagnostic(h, eh, tol, rh);
  std::tie(out.max_jump_ell, out.budget_ell) = detail::jump_diagnostic(l, el, tol, rl);
  out.flagged = rh > 5.0 || rl > 5.0;
  return out;
}

inline nlohmann::json to_json(const SweepResult& s) {
  nlohmann::json j;
  auto support = [](const std::vector<std::pair<Word, double>>& v) {
    nlohmann::json a = nlohmann::json::array();
    for (const auto& [w, m] : v) a.push_back({{"word", w.empty() ? std::string("e") : to_string(w)}, {"p", m}});
    return a;
  };
  j["p0"] = support(s.p0);
  j["p1"] = support(s.p1);
  j["t"] = s.t;
  j["tol"] = s.tol;
  j["max_jump_h"] = s.max_jump_h;
  j["budget_h"] = s.budget_h;
  j["max_jump_ell"] = s.max_jump_ell;
  j["budget_ell"] = s.budget_ell;
  j["flagged"] = s.flagged;
  nlohmann::json pts = nlohmann::json::array();
  for (const auto& r : s.points) pts.push_back(to_json(r));
  j["points"] = pts;
  return j;
}

}  // namespace fwalk
