#pragma once

// The invariant suite behind the validate command: pressure, stationarity,
// the Radon-Nikodym identity, Monte Carlo agreement of the harmonic measure,
// barrier factorization and projective contraction.

#include <cmath>
#include <cstdint>
#include <iomanip>
#include <memory>
#include <ostream>
#include <string>
#include <vector>

#include "fwalk/barriers.hpp"
#include "fwalk/boundary.hpp"
#include "fwalk/martin.hpp"
#include "fwalk/rng.hpp"
#include "fwalk/walk.hpp"

namespace fwalk {

struct CheckResult {
  std::string name;
  bool passed = false;
  double value = 0.0;
  double threshold = 0.0;
  std::string detail;
};

struct ValidationOptions {
  std::size_t depth = 6;
  double hit_tol = 1e-8;
  double phi_tol = 1e-6;
  double power_tol = 1e-12;
  std::size_t mc_depth = 3;
  std::size_t mc_samples = 100'000;
  std::size_t factorizations = 3;
  std::size_t contraction_pairs = 20;
  std::uint64_t seed = 1;
};

/// Worst d(Af, Ag) / d(f, g) - tanh(Diam/4) over random positive pairs; zero
/// columns of A are zeroed in both vectors.
inline double contraction_excess(const BarrierMatrix& A, std::size_t pairs, Rng& rng) {
  double worst = -1.0;
  for (std::size_t t = 0; t < pairs; ++t) {
    ConeVector f(A.cols), g(A.cols);
    for (std::size_t j = 0; j < A.cols; ++j) {
      f[j] = 0.05 + rng.uniform();
      g[j] = 0.05 + rng.uniform();
    }
    for (std::size_t j : A.zero_columns) f[j] = g[j] = 0.0;
    const double before = birkhoff_distance(f, g);
    if (before <= 1e-12) continue;
    worst = std::max(worst, birkhoff_distance(A.apply(f), A.apply(g)) / before - A.beta);
  }
  return worst;
}

inline std::vector<CheckResult> validate_walk(const StepDistribution& p0, const ValidationOptions& o = {}) {
  const auto [p, power] = ensure_generators(p0);
  std::vector<CheckResult> out;
  const auto solver = std::make_shared<const HittingSolver>(p);
  const MartinKernel K(solver, o.hit_tol);
  const std::size_t r = p.range();
  const std::size_t m = std::max(o.depth, 2 * r);

  const TransferOperator T6 = build_transfer(K, m, o.phi_tol);
  const StationaryResult s6 = stationary_measure(T6, o.power_tol);
  const TransferOperator T7 = build_transfer(K, m + 1, o.phi_tol);
  const StationaryResult s7 = stationary_measure(T7, o.power_tol);

  out.push_back({"pressure |P| at depth " + std::to_string(m), std::abs(s6.pressure) <= 5e-3, std::abs(s6.pressure), 5e-3, ""});
  const double floor = std::max(T6.phi_error, T7.phi_error);
  out.push_back({"pressure non-increasing to depth " + std::to_string(m + 1),
                 std::abs(s7.pressure) <= std::abs(s6.pressure) + floor, std::abs(s7.pressure),
                 std::abs(s6.pressure) + floor, "slack = max phi error"});

  const double tv = check_stationarity(s6.measure, p);
  out.push_back({"stationarity defect (TV) at depth " + std::to_string(m), tv <= 1e-3, tv, 1e-3, ""});

  Rng rng(o.seed);
  std::vector<double> psi(T6.states());
  for (double& v : psi) v = rng.uniform();
  const double rn = radon_nikodym_defect(T6, s6.measure, psi);
  out.push_back({"Radon-Nikodym identity defect", rn <= 1e-3, rn, 1e-3, "random test function"});

  if (o.mc_samples > 0) {
    const auto mc = monte_carlo_harmonic(p, o.mc_depth, default_exit_radius(p, o.mc_depth), o.mc_samples, o.seed);
    const auto tm = s6.measure.marginal(o.mc_depth);
    const double d = total_variation(mc, tm);
    const double budget = 3.0 * (mc.error_estimate + tm.error_estimate);
    out.push_back({"Monte Carlo vs transfer (TV) at depth " + std::to_string(o.mc_depth), d <= budget, d, budget,
                   "3x combined error"});
  }

  const BarrierFamily& F = K.family();
  for (std::size_t i = 0; i < o.factorizations; ++i) {
    const Word y = random_reduced_word(p.rank(), 2 * r + 3 + i, rng);
    const Word x = i % 2 ? Word{} : random_reduced_word(p.rank(), 1, rng);
    const auto f = barrier_factorization(F, x, y, o.hit_tol);
    out.push_back({"barrier factorization u(" + to_string(x) + ", " + to_string(y) + ")", f.agrees(),
                   std::abs(f.direct - f.factored), f.direct_error + f.factored_error,
                   std::to_string(f.barriers) + " barriers"});
  }

  double excess = -1.0;
  bool zero_cols = true;
  for (const auto& A : F.all()) {
    excess = std::max(excess, contraction_excess(*A, o.contraction_pairs, rng));
    zero_cols = zero_cols && A->zeros_in_full_columns();
  }
  out.push_back({"projective contraction minus tanh(Diam/4)", excess <= 1e-9, excess, 1e-9,
                 std::to_string(F.count()) + " barrier matrices"});
  out.push_back({"zeros of barrier matrices fill whole columns", zero_cols, zero_cols ? 0.0 : 1.0, 0.0, ""});
  if (power > 1)
    for (auto& c : out) c.detail += (c.detail.empty() ? "" : "; ") + std::string("run on p^(") + std::to_string(power) + ")";
  return out;
}

inline bool all_passed(const std::vector<CheckResult>& v) {
  for (const auto& c : v)
    if (!c.passed) return false;
  return true;
}

inline void write_table(std::ostream& os, const std::vector<CheckResult>& v) {
  std::size_t w = 5;
  for (const auto& c : v) w = std::max(w, c.name.size());
  os << std::left << std::setw(static_cast<int>(w)) << "check" << "  result  " << std::setw(12) << "value"
     << "  " << std::setw(12) << "threshold" << "  detail\n";
  for (const auto& c : v)
    os << std::left << std::setw(static_cast<int>(w)) << c.name << "  " << (c.passed ? "PASS  " : "FAIL  ") << "  "
       << std::setw(12) << std::setprecision(4) << c.value << "  " << std::setw(12) << c.threshold << "  " << c.detail
       << '\n';
}

}  // namespace fwalk
