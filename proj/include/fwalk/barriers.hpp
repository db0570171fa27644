#pragma once

// Barriers along a geodesic ray, the finite family of barrier matrices and the
// Hilbert projective metric on the positive cone.
//
// A barrier with anchors z, z' at tree distance r-1 is B(z, r-1) ∩ B(z', r-1).
// Along the ray g_i = xi_1...xi_i the chain starts after a base vertex g_b and
// V_s has anchors g_{b+1+(s-1)r}, g_{b+sr}, so consecutive barriers are at tree
// distance 1 and a step of length <= r cannot cross one without landing in it.
// Members are ordered by the shortlex order of z^{-1} v, which makes the
// matrix between consecutive barriers a function of the 2r-1 letters from z
// to the far anchor of the next barrier.

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <memory>
#include <mutex>
#include <shared_mutex>
#include <string>
#include <vector>

#include "fwalk/error.hpp"
#include "fwalk/free_group.hpp"
#include "fwalk/hitting.hpp"
#include "fwalk/parallel.hpp"
#include "fwalk/walk.hpp"

namespace fwalk {

using ConeVector = std::vector<double>;

struct Barrier {
  Word near;
  Word far;
  std::vector<Word> members;

  std::size_t size() const { return members.size(); }
  bool contains(const Word& w) const { return std::find(members.begin(), members.end(), w) != members.end(); }
};

inline Barrier make_barrier(int d, const Word& z, const Word& z_far) {
  const std::size_t radius = tree_distance(z, z_far);
  Barrier b{z, z_far, {}};
  std::vector<Word> local;
  for (const Word& w : ball(d, radius))
    if (tree_distance(w, inverse(z) * z_far) <= radius) local.push_back(w);
  std::sort(local.begin(), local.end());
  for (const Word& w : local) b.members.push_back(z * w);
  return b;
}

/// Index of the first ray vertex after which the chain for start point x begins.
inline std::size_t chain_base(const CylinderPrefix& xi, const Word& x) {
  return std::max<std::size_t>(1, gromov_product(x, xi.word()));
}

/// Number of barriers (each followed by one more resolved vertex) that fit.
inline std::size_t chain_capacity(const CylinderPrefix& xi, const Word& x, std::size_t r) {
  const std::size_t b = chain_base(xi, x);
  if (xi.depth() < b + r + 1) return 0;
  return (xi.depth() - b - 1) / r;
}

/// Prefix depth needed for k barriers after start point x.
inline std::size_t chain_depth_needed(const CylinderPrefix& xi, const Word& x, std::size_t r, std::size_t k) {
  return chain_base(xi, x) + k * r + 1;
}

inline std::vector<Barrier> build_barrier_chain(const StepDistribution& p, const CylinderPrefix& xi, const Word& x) {
  const std::size_t r = p.range();
  const std::size_t b = chain_base(xi, x);
  const std::size_t k = chain_capacity(xi, x, r);
  std::vector<Barrier> chain;
  chain.reserve(k);
  for (std::size_t s = 1; s <= k; ++s)
    chain.push_back(make_barrier(p.rank(), xi.word().prefix(b + 1 + (s - 1) * r), xi.word().prefix(b + s * r)));
  return chain;
}

/// y_k: the ray vertex one step past the far anchor of V_k.
inline Word chain_target(const StepDistribution& p, const CylinderPrefix& xi, const Word& x, std::size_t k) {
  const std::size_t need = chain_depth_needed(xi, x, p.range(), k);
  if (xi.depth() < need) fail(ErrorKind::InsufficientDepth, "prefix too short for " + std::to_string(k) + " barriers");
  return xi.word().prefix(need);
}

struct BarrierMatrix {
  Word shape;
  std::size_t rows = 0, cols = 0;
  std::vector<double> entries;    ///< row-major
  std::vector<double> row_error;  ///< error of each row sum
  std::vector<std::size_t> zero_columns;
  double diam = 0.0;
  double beta = 0.0;

  double operator()(std::size_t i, std::size_t j) const { return entries[i * cols + j]; }

  bool zeros_in_full_columns() const {
    for (std::size_t j = 0; j < cols; ++j) {
      std::size_t zeros = 0;
      for (std::size_t i = 0; i < rows; ++i) zeros += (*this)(i, j) == 0.0;
      if (zeros != 0 && zeros != rows) return false;
    }
    return true;
  }

  ConeVector apply(const ConeVector& f) const {
    ConeVector out(rows, 0.0);
    for (std::size_t i = 0; i < rows; ++i)
      for (std::size_t j = 0; j < cols; ++j) out[i] += (*this)(i, j) * f[j];
    return out;
  }
};

/// Hilbert metric ln max(f/g) + ln max(g/f); coordinates zero in both are skipped.
inline double birkhoff_distance(const ConeVector& f, const ConeVector& g) {
  if (f.size() != g.size()) fail(ErrorKind::InvalidArgument, "birkhoff_distance size mismatch");
  double hi = 0.0, lo = std::numeric_limits<double>::infinity();
  bool any = false;
  for (std::size_t i = 0; i < f.size(); ++i) {
    if (f[i] == 0.0 && g[i] == 0.0) continue;
    if (f[i] <= 0.0 || g[i] <= 0.0) fail(ErrorKind::ZeroCoordinate, "coordinate " + std::to_string(i) + " is zero in one vector only");
    const double q = f[i] / g[i];
    hi = std::max(hi, q);
    lo = std::min(lo, q);
    any = true;
  }
  if (!any) fail(ErrorKind::ZeroCoordinate, "vectors have no common positive coordinate");
  return std::log(hi) - std::log(lo);
}

/// Projective diameter of A applied to the positive cone, over nonzero columns.
inline double projective_diameter(const BarrierMatrix& A) {
  std::vector<std::size_t> live;
  for (std::size_t j = 0; j < A.cols; ++j) {
    bool nz = false;
    for (std::size_t i = 0; i < A.rows; ++i) nz = nz || A(i, j) != 0.0;
    if (nz) live.push_back(j);
  }
  if (live.empty()) fail(ErrorKind::DegenerateMatrix, "all columns are zero");
  double diam = 0.0;
  for (std::size_t k : live)
    for (std::size_t l : live) {
      if (k == l) continue;
      for (std::size_t i = 0; i < A.rows; ++i)
        for (std::size_t j = 0; j < A.rows; ++j) {
          const double num = A(i, k) * A(j, l), den = A(i, l) * A(j, k);
          if (num == 0.0) continue;
          if (den == 0.0) return std::numeric_limits<double>::infinity();
          diam = std::max(diam, std::log(num / den));
        }
    }
  return diam;
}

/// tanh(Diam / 4).
inline double contraction_coeff(const BarrierMatrix& A) {
  const double diam = projective_diameter(A);
  return std::isinf(diam) ? 1.0 : std::tanh(diam / 4.0);
}

inline BarrierMatrix make_matrix(std::size_t rows, std::size_t cols, std::vector<double> entries) {
  BarrierMatrix A;
  A.rows = rows;
  A.cols = cols;
  A.entries = std::move(entries);
  A.row_error.assign(rows, 0.0);
  for (std::size_t j = 0; j < cols; ++j) {
    bool zero = true;
    for (std::size_t i = 0; i < rows; ++i) zero = zero && A(i, j) == 0.0;
    if (zero) A.zero_columns.push_back(j);
  }
  A.diam = projective_diameter(A);
  A.beta = std::isinf(A.diam) ? 1.0 : std::tanh(A.diam / 4.0);
  return A;
}

/// The two canonical barriers of a shape t with |t| = 2r-1: V at e, W after it.
inline std::pair<Barrier, Barrier> shape_barriers(int d, const Word& shape, std::size_t r) {
  return {make_barrier(d, Word{}, shape.prefix(r - 1)), make_barrier(d, shape.prefix(r), shape)};
}

/// Rows are first_visit(v, W) estimates; unreachable entries are exact zeros.
inline BarrierMatrix compute_barrier_matrix(const HittingSolver& solver, const Barrier& V, const Barrier& W,
                                            double tol) {
  std::vector<double> entries;
  std::vector<double> errors;
  for (const Word& v : V.members) {
    const auto fv = solver.first_visit(v, W.members, tol);
    for (std::size_t j = 0; j < W.size(); ++j) entries.push_back(fv.mass[j] == 0.0 ? 0.0 : fv.estimate[j]);
    errors.push_back(fv.error());
  }
  BarrierMatrix A = make_matrix(V.size(), W.size(), std::move(entries));
  A.row_error = std::move(errors);
  A.shape = inverse(V.near) * W.far;
  return A;
}

inline BarrierMatrix barrier_matrix(const StepDistribution& p, const Barrier& V, const Barrier& W, double tol) {
  return compute_barrier_matrix(HittingSolver(p), V, W, tol);
}

/// The barrier matrices of one walk, one per canonical shape, computed eagerly.
class BarrierFamily {
 public:
  BarrierFamily(std::shared_ptr<const HittingSolver> solver, double tol) : solver_(std::move(solver)), tol_(tol) {
    const auto& p = solver_->distribution();
    r_ = p.range();
    const auto shapes = sphere(p.rank(), 2 * r_ - 1);
    std::vector<std::shared_ptr<const BarrierMatrix>> built(shapes.size());
    parallel_for(shapes.size(), [&](std::size_t i) {
      const auto [V, W] = shape_barriers(p.rank(), shapes[i], r_);
      auto A = compute_barrier_matrix(*solver_, V, W, tol_);
      A.shape = shapes[i];
      built[i] = std::make_shared<const BarrierMatrix>(std::move(A));
    });
    for (std::size_t i = 0; i < shapes.size(); ++i) {
      beta0_ = std::max(beta0_, built[i]->beta);
      max_diam_ = std::max(max_diam_, built[i]->diam);
      max_row_error_ = std::max(max_row_error_, *std::max_element(built[i]->row_error.begin(), built[i]->row_error.end()));
      cache_.emplace(shapes[i].key(), built[i]);
    }
    dimension_ = built.front()->rows;
  }

  const HittingSolver& solver() const { return *solver_; }
  std::shared_ptr<const HittingSolver> solver_ptr() const { return solver_; }
  double tol() const { return tol_; }
  std::size_t range() const { return r_; }
  double beta0() const { return beta0_; }
  double max_diam() const { return max_diam_; }
  double max_row_error() const { return max_row_error_; }
  std::size_t count() const { return cache_.size(); }
  std::size_t dimension() const { return dimension_; }

  std::shared_ptr<const BarrierMatrix> matrix_for_shape(const Word& shape) const {
    std::shared_lock lock(mutex_);
    const auto it = cache_.find(shape.key());
    if (it == cache_.end()) fail(ErrorKind::InvalidArgument, "no barrier shape " + to_string(shape));
    return it->second;
  }

  /// A_V^W for consecutive barriers, looked up through the canonical shape.
  std::shared_ptr<const BarrierMatrix> matrix(const Barrier& V, const Barrier& W) const {
    return matrix_for_shape(inverse(V.near) * W.far);
  }

  std::vector<std::shared_ptr<const BarrierMatrix>> all() const {
    std::shared_lock lock(mutex_);
    std::vector<std::shared_ptr<const BarrierMatrix>> out;
    for (const auto& [k, v] : cache_) out.push_back(v);
    std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a->shape < b->shape; });
    return out;
  }

 private:
  std::shared_ptr<const HittingSolver> solver_;
  double tol_;
  std::size_t r_ = 1;
  double beta0_ = 0.0;
  double max_diam_ = 0.0;
  double max_row_error_ = 0.0;
  std::size_t dimension_ = 1;
  mutable std::shared_mutex mutex_;
  std::map<std::string, std::shared_ptr<const BarrierMatrix>> cache_;
};

struct FactorizationCheck {
  Word x, y;
  std::size_t barriers = 0;
  double direct = 0.0, direct_error = 0.0;
  double factored = 0.0, factored_error = 0.0;

  bool agrees(double factor = 1.0) const {
    return std::abs(direct - factored) <= factor * (direct_error + factored_error);
  }
};

/// u(x, y) directly and as alpha_x^T A_1 ... A_{k-1} u(V_k, y) through the
/// barriers along the ray to y. Absolute errors are carried through the product.
inline FactorizationCheck barrier_factorization(const BarrierFamily& family, const Word& x, const Word& y,
                                                double tol) {
  const HittingSolver& solver = family.solver();
  const auto& p = solver.distribution();
  const CylinderPrefix xi(y);
  const auto chain = build_barrier_chain(p, xi, x);
  if (chain.empty() || chain_depth_needed(xi, x, p.range(), chain.size()) > y.size())
    fail(ErrorKind::InsufficientDepth, "no barrier separates " + to_string(x) + " from " + to_string(y));
  FactorizationCheck out;
  out.x = x;
  out.y = y;
  out.barriers = chain.size();
  const auto d = solver.hitting_probability(x, y, tol);
  out.direct = d.value;
  out.direct_error = d.error;

  const Barrier& last = chain.back();
  std::vector<double> f(last.size()), e(last.size());
  for (std::size_t i = 0; i < last.size(); ++i) {
    const auto u = solver.hitting_probability(last.members[i], y, tol);
    f[i] = u.value;
    e[i] = u.error;
  }
  auto upper = [](const std::vector<double>& a, const std::vector<double>& b) {
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, a[i] + b[i]);
    return m;
  };
  for (std::size_t s = chain.size() - 1; s >= 1; --s) {
    const auto A = family.matrix(chain[s - 1], chain[s]);
    const double top = upper(f, e);
    std::vector<double> nf = A->apply(f), ne = A->apply(e);
    for (std::size_t i = 0; i < ne.size(); ++i) ne[i] += A->row_error[i] * top;
    f = std::move(nf);
    e = std::move(ne);
  }
  const auto alpha = solver.first_visit(x, chain.front().members, tol);
  const double top = upper(f, e);
  for (std::size_t i = 0; i < f.size(); ++i) {
    out.factored += alpha.estimate[i] * f[i];
    out.factored_error += alpha.estimate[i] * e[i];
  }
  out.factored_error += alpha.error() * top;
  return out;
}

}  // namespace fwalk
