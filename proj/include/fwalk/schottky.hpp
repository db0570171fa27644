#pragma once

// Schottky representations of F_d into SL(2, R) and the Lyapunov exponent of
// the image walk. Matrices act on the upper half-plane and are moved to the
// Poincare disk by the Cayley map z -> (z - i) / (z + i), so the basepoint o = i
// becomes 0. The ping-pong disk H_a is the inside of the isometric circle of
// a^{-1}; a maps the outside of H_{a^{-1}} into H_a.

#include <array>
#include <cmath>
#include <complex>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "fwalk/boundary.hpp"
#include "fwalk/error.hpp"
#include "fwalk/free_group.hpp"
#include "fwalk/observables.hpp"
#include "fwalk/parallel.hpp"
#include "fwalk/rng.hpp"
#include "fwalk/walk.hpp"

namespace fwalk {

using Complex = std::complex<double>;

struct Isometry {
  double a = 1.0, b = 0.0, c = 0.0, d = 1.0;

  static Isometry identity() { return {}; }
  static Isometry diagonal(double lambda) { return {lambda, 0.0, 0.0, 1.0 / lambda}; }
  /// Fixes i; rotates the disk by -2 theta.
  static Isometry rotation(double theta) { return {std::cos(theta), -std::sin(theta), std::sin(theta), std::cos(theta)}; }

  double det() const { return a * d - b * c; }
  double frobenius2() const { return a * a + b * b + c * c + d * d; }
  Isometry inverse() const { return {d, -b, -c, a}; }

  Isometry operator*(const Isometry& o) const {
    return {a * o.a + b * o.c, a * o.b + b * o.d, c * o.a + d * o.c, c * o.b + d * o.d};
  }

  /// Coefficients of the disk action z -> (alpha z + beta) / (conj(beta) z + conj(alpha)).
  Complex alpha() const { return 0.5 * Complex(a + d, b - c); }
  Complex beta() const { return 0.5 * Complex(a - d, -(b + c)); }
};

/// d(o, g o) = arccosh(|g|_F^2 / 2).
inline double hyperbolic_displacement(const Isometry& g) {
  return std::acosh(std::max(1.0, 0.5 * g.frobenius2() / std::abs(g.det())));
}

inline Complex disk_action(const Isometry& g, Complex z) {
  const Complex al = g.alpha(), be = g.beta();
  return (al * z + be) / (std::conj(be) * z + std::conj(al));
}

struct Disk {
  Complex center;
  double radius = 0.0;
  bool contains(Complex z, double slack = 0.0) const { return std::abs(z - center) <= radius + slack; }
};

/// Image of a Euclidean disk whose closure avoids the pole of g.
inline Disk image_disk(const Isometry& g, const Disk& D) {
  const Complex al = g.alpha(), be = g.beta();
  const Complex ga = std::conj(be), de = std::conj(al);
  const Complex q = ga * D.center + de;
  const double den = std::norm(q) - std::norm(ga) * D.radius * D.radius;
  if (!(den > 0.0)) fail(ErrorKind::NotSchottky, "disk image crosses the pole");
  const double det = std::norm(al) - std::norm(be);
  Disk out;
  out.center = ((al * D.center + be) * std::conj(q) - al * std::conj(ga) * D.radius * D.radius) / den;
  out.radius = D.radius * det / den;
  return out;
}

/// Busemann function in the disk, normalized to vanish at o.
inline double busemann_disk(Complex zeta, Complex z) { return std::log(std::norm(z - zeta) / (1.0 - std::norm(z))); }

/// Isometric circle of g, where g is a Euclidean isometry.
inline Disk isometric_circle(const Isometry& g) {
  const Complex be = g.beta();
  if (std::abs(be) < 1e-300) fail(ErrorKind::NotSchottky, "elliptic element fixing o has no isometric circle");
  return {-std::conj(g.alpha()) / std::conj(be), 1.0 / std::abs(be)};
}

class SchottkyRep {
 public:
  SchottkyRep() = default;
  explicit SchottkyRep(std::vector<Isometry> gens) : gens_(std::move(gens)) {
    for (const auto& g : gens_)
      if (std::abs(g.det() - 1.0) > 1e-12) fail(ErrorKind::NotSchottky, "generator determinant differs from 1");
  }

  /// diag(lambda, 1/lambda) and its conjugate by the quarter turn of the disk.
  static SchottkyRep standard(double lambda = 3.0) {
    const Isometry a = Isometry::diagonal(lambda);
    const Isometry rot = Isometry::rotation(M_PI / 4.0);
    return SchottkyRep({a, rot * a * rot.inverse()});
  }

  static SchottkyRep from_entries(const std::vector<std::array<double, 4>>& entries) {
    std::vector<Isometry> g;
    for (const auto& e : entries) g.push_back({e[0], e[1], e[2], e[3]});
    return SchottkyRep(std::move(g));
  }

  int rank() const { return static_cast<int>(gens_.size()); }
  const std::vector<Isometry>& generators() const { return gens_; }

  Isometry of(Letter l) const {
    const Isometry& g = gens_.at(static_cast<std::size_t>(std::abs(l) - 1));
    return l > 0 ? g : g.inverse();
  }

  Isometry of(const Word& w) const {
    Isometry out;
    for (std::size_t i = 0; i < w.size(); ++i) out = out * of(w[i]);
    return out;
  }

  /// H_l, the inside of the isometric circle of l^{-1}.
  Disk disk(Letter l) const { return isometric_circle(of(inverse(l))); }

  SchottkyRep conjugated(const Isometry& h) const {
    std::vector<Isometry> g;
    for (const auto& x : gens_) g.push_back(h * x * h.inverse());
    return SchottkyRep(std::move(g));
  }

  bool verified() const { return verified_; }
  void mark_verified() { verified_ = true; }

 private:
  std::vector<Isometry> gens_;
  bool verified_ = false;
};

struct SchottkyCheck {
  bool ok = true;
  double min_gap = std::numeric_limits<double>::infinity();  ///< smallest |c_i - c_j| - R_i - R_j
  double max_excess = 0.0;  ///< worst distance of a mapped sample outside its target disk
  std::size_t samples = 0;
  std::string violation;
};

/// Disk disjointness with margin tol and the ping-pong inclusion on sampled
/// boundary points. Reports without throwing.
inline SchottkyCheck check_schottky(const SchottkyRep& rho, double tol = 1e-9, std::size_t samples = 256) {
  SchottkyCheck out;
  const auto letters = alphabet(rho.rank());
  std::vector<Disk> disks;
  try {
    for (Letter l : letters) disks.push_back(rho.disk(l));
  } catch (const Error& e) {
    out.ok = false;
    out.violation = e.what();
    return out;
  }
  for (std::size_t i = 0; i < letters.size(); ++i)
    for (std::size_t j = i + 1; j < letters.size(); ++j) {
      const double gap = std::abs(disks[i].center - disks[j].center) - disks[i].radius - disks[j].radius;
      out.min_gap = std::min(out.min_gap, gap);
      if (gap <= tol && out.ok) {
        out.ok = false;
        out.violation = "disks of " + to_string(Word{letters[i]}) + " and " + to_string(Word{letters[j]}) + " meet";
      }
    }
  for (std::size_t i = 0; i < letters.size(); ++i) {
    const Letter l = letters[i];
    const Isometry g = rho.of(l);
    const Disk avoid = rho.disk(inverse(l)), target = disks[i];
    std::vector<Complex> pts;
    for (std::size_t s = 0; s < samples; ++s) {
      const double t = 2.0 * M_PI * (static_cast<double>(s) + 0.5) / static_cast<double>(samples);
      const Complex u = std::polar(1.0, t);
      if (!avoid.contains(u)) pts.push_back(u);
      const Complex v = avoid.center + avoid.radius * u;
      if (std::abs(v) <= 1.0) pts.push_back(v);
    }
    for (const Complex z : pts) {
      const double excess = std::abs(disk_action(g, z) - target.center) - target.radius;
      out.max_excess = std::max(out.max_excess, excess);
      ++out.samples;
      if (excess > tol * (1.0 + target.radius) && out.ok) {
        out.ok = false;
        out.violation = to_string(Word{l}) + " maps the outside of H_" + to_string(Word{inverse(l)}) + " beyond H_" +
                        to_string(Word{l});
      }
    }
  }
  return out;
}

/// Throws NotSchottky naming the violated pair; marks rho verified otherwise.
inline SchottkyCheck verify_schottky(SchottkyRep& rho, double tol = 1e-9, std::size_t samples = 256) {
  SchottkyCheck c = check_schottky(rho, tol, samples);
  if (!c.ok) fail(ErrorKind::NotSchottky, c.violation);
  rho.mark_verified();
  return c;
}

struct BoundaryPoint {
  Complex point;          ///< on the unit circle
  double radius = 0.0;    ///< |pi_o(xi) - point| <= radius
  double disk_radius = 0.0;
  Disk disk;              ///< pi(xi_1 ... xi_{n-1}) H_{xi_n}
};

/// The nested disk of the prefix and the radial projection of its center.
inline BoundaryPoint boundary_map(const SchottkyRep& rho, const Word& prefix) {
  if (prefix.empty()) fail(ErrorKind::DepthTooShallow, "boundary_map needs depth >= 1");
  Disk D = rho.disk(prefix.back());
  for (std::size_t j = prefix.size() - 1; j-- > 0;) D = image_disk(rho.of(prefix[j]), D);
  BoundaryPoint out;
  out.disk = D;
  out.disk_radius = D.radius;
  out.point = D.center / std::abs(D.center);
  out.radius = 2.0 * D.radius;
  return out;
}

inline BoundaryPoint boundary_map(const SchottkyRep& rho, const CylinderPrefix& xi) { return boundary_map(rho, xi.word()); }

struct GammaEstimate {
  std::size_t n = 0, samples = 0;
  Value displacement;             ///< mean d(o, pi(X_n) o) / (2n)
  Value norm;                     ///< mean ln |pi(X_n)|_F / n
  Value displacement_difference;  ///< mean (d_n - d_{n/2}) / (2 (n - n/2))
  bool degenerate_support = false;  ///< support does not generate F_d
};

namespace detail {

/// A matrix kept as exp(scale) * m with max |m_ij| = 1.
struct ScaledMatrix {
  Isometry m;
  double scale = 0.0;

  void multiply(const Isometry& g) {
    m = m * g;
    const double mx = std::max({std::abs(m.a), std::abs(m.b), std::abs(m.c), std::abs(m.d)});
    m.a /= mx;
    m.b /= mx;
    m.c /= mx;
    m.d /= mx;
    scale += std::log(mx);
  }
  double log_frobenius() const { return scale + 0.5 * std::log(m.frobenius2()); }
  double displacement() const {
    const double lf2 = 2.0 * scale + std::log(m.frobenius2());  // ln |g|_F^2
    if (lf2 < 40.0) return std::acosh(std::max(1.0, 0.5 * std::exp(lf2)));
    return lf2;  // arccosh(y) = ln(2y) up to 1 / (4 y^2)
  }
};

}  // namespace detail

inline GammaEstimate gamma_mc(const SchottkyRep& rho, const StepDistribution& p, std::size_t n, std::size_t samples,
                              std::uint64_t seed) {
  if (!rho.verified()) fail(ErrorKind::NotSchottky, "representation has not been verified");
  if (rho.rank() != p.rank()) fail(ErrorKind::InvalidArgument, "representation rank differs from the walk");
  if (n < 2 || samples < 2) fail(ErrorKind::InvalidArgument, "gamma_mc needs n >= 2 and samples >= 2");
  std::vector<Isometry> steps;
  for (std::size_t i = 0; i < p.size(); ++i) steps.push_back(rho.of(p.word(i)));
  const DiscreteSampler sampler(p.probs());
  const std::size_t chunks = std::max<std::size_t>(1, std::min<std::size_t>(samples, 64));
  const std::size_t half = n / 2;
  std::vector<detail::Moments> md(chunks), mn(chunks), mdd(chunks);
  parallel_for(chunks, [&](std::size_t c) {
    for (std::size_t s = c; s < samples; s += chunks) {
      Rng rng = Rng::split(seed, s);
      detail::ScaledMatrix g;
      double d_half = 0.0;
      for (std::size_t i = 1; i <= n; ++i) {
        g.multiply(steps[sampler(rng)]);
        if (i == half) d_half = g.displacement();
      }
      const double dn = g.displacement();
      md[c].add(dn / (2.0 * static_cast<double>(n)));
      mn[c].add(g.log_frobenius() / static_cast<double>(n));
      mdd[c].add((dn - d_half) / (2.0 * static_cast<double>(n - half)));
    }
  });
  auto merge = [&](const std::vector<detail::Moments>& v) {
    detail::Moments t;
    for (const auto& m : v) {
      t.sum += m.sum;
      t.sq += m.sq;
    }
    return t.value(samples, "monte_carlo");
  };
  GammaEstimate out;
  out.n = n;
  out.samples = samples;
  out.displacement = merge(md);
  out.norm = merge(mn);
  out.displacement_difference = merge(mdd);
  out.degenerate_support = !p.generates_group();
  return out;
}

struct GammaBoundary {
  Value gamma;
  double radius_error = 0.0;
  double measure_error = 0.0;
  double max_disk_radius = 0.0;
};

/// gamma = (1/2) sum_x p(x) ∫ Theta_{pi_o(xi)}(pi(x^{-1}) o) dmu(xi), each
/// cylinder evaluated at its boundary-map point. The radius error uses the
/// Lipschitz bound 2 / dist(z, disk) of Theta in zeta.
inline GammaBoundary gamma_boundary(const SchottkyRep& rho, const StepDistribution& p, const CylinderMeasure& mu,
                                    double tol) {
  if (!rho.verified()) fail(ErrorKind::NotSchottky, "representation has not been verified");
  if (mu.depth < 1) fail(ErrorKind::DepthTooShallow, "measure depth must be >= 1");
  const CylinderIndex idx = mu.index();
  std::vector<Complex> zs;
  for (std::size_t j = 0; j < p.size(); ++j) zs.push_back(disk_action(rho.of(inverse(p.word(j))), Complex(0.0, 0.0)));
  GammaBoundary out;
  double g = 0.0, err = 0.0, sup = 0.0;
  for (std::size_t i = 0; i < mu.masses.size(); ++i) {
    const BoundaryPoint bp = boundary_map(rho, idx.word(i));
    out.max_disk_radius = std::max(out.max_disk_radius, bp.disk_radius);
    if (mu.masses[i] == 0.0) continue;
    for (std::size_t j = 0; j < p.size(); ++j) {
      const double theta = busemann_disk(bp.point, zs[j]);
      const double dist = std::abs(zs[j] - bp.disk.center) - bp.disk.radius;
      if (!(dist > 0.0)) fail(ErrorKind::DepthTooShallow, "cylinder disk reaches an orbit point; increase depth");
      g += 0.5 * p.prob(j) * mu.masses[i] * theta;
      err += 0.5 * p.prob(j) * mu.masses[i] * (2.0 / dist) * bp.radius;
      sup = std::max(sup, std::abs(theta));
    }
  }
  out.radius_error = err;
  out.measure_error = 0.5 * sup * mu.error_estimate;
  out.gamma = {g, out.radius_error + out.measure_error, "boundary", true};
  if (out.radius_error > tol)
    fail(ErrorKind::DepthTooShallow, "disk radii at depth " + std::to_string(mu.depth) + " give error " +
                                         std::to_string(out.radius_error) + " above " + std::to_string(tol));
  return out;
}

}  // namespace fwalk
