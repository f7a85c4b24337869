#pragma once
// Ronkin function, surface tension, rough/smooth classification and edge
// probabilities of the translation-invariant Gibbs measures.
//
// Slope coordinates. The Legendre pairing is between B and s = grad R(B),
// a point of the Newton polygon ("Newton point"). The height slope of the
// Gibbs measure at field B is rho = (s2, -s1); conversely s = (-rho2, rho1).
// ronkin, surface_tension, classify_slope and smooth_slopes work with s;
// edge_probability and everything downstream take height slopes rho.
//
// All angular integrals are reduced to one dimension. For |z| = e^{B1} fixed,
// q(w) = w^{-kmin} P(z, w) is a polynomial and Jensen's formula gives the
// inner average of log|P| from its roots; the outer integral is split at the
// angles where a root crosses |w| = e^{B2} and done by adaptive
// Gauss-Kronrod. The same root data give grad R exactly (a root count) and
// the inner inverse-Kasteleyn integral by residues.

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <functional>
#include <limits>
#include <map>
#include <numbers>
#include <optional>
#include <set>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/tools/minima.hpp>

#include "domino/error.hpp"
#include "domino/kasteleyn.hpp"
#include "domino/lattice.hpp"
#include "domino/weights.hpp"

namespace domino {

inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

struct MagneticField {
  double b1 = 0.0;
  double b2 = 0.0;
};

/// Height slope (per fundamental domain).
struct Slope {
  double r1 = 0.0;
  double r2 = 0.0;
};

struct NewtonPoint {
  double s1 = 0.0;
  double s2 = 0.0;
};

inline NewtonPoint newton_point(Slope rho) { return {-rho.r2, rho.r1}; }
inline Slope height_slope(NewtonPoint s) { return {s.s2, -s.s1}; }

enum class PhaseLabel { Rough, Smooth, BoundaryOrCorner };

inline const char* phase_name(PhaseLabel p) {
  switch (p) {
    case PhaseLabel::Rough: return "rough";
    case PhaseLabel::Smooth: return "smooth";
    default: return "boundary";
  }
}

struct ThermoOptions {
  int scan_nodes = 64;                // initial angular scan
  double min_interval = 1e-12;        // angular resolution of crossings
  double quad_tol = 1e-11;            // relative Gauss-Kronrod tolerance
  int quad_depth = 20;
  int entry_depth = 14;               // inverse-Kasteleyn entries are noisier near nodes
  double ascent_tol = 1e-10;          // |s - grad R| at the maximizer
  int ascent_iters = 200;
  double fd_step = 1e-4;              // Hessian of R from the exact gradient
  double facet_radius = 0.2;          // facet test ball (upper bound)
  int facet_samples = 25;
  double facet_threshold = 1e-3;
  double smooth_margin = 1e-5;        // amoeba-distance proxy
  double rough_margin = 1e-7;
  double edge_imag_tol = 1e-6;
};

/// Polynomial in w of P(z, .) for a fixed z, with the derivative in z.
class Fiber {
 public:
  Fiber(const LaurentPoly2& P) : kmin_(P.min_k()), kmax_(P.max_k()) {
    rows_.resize(static_cast<std::size_t>(kmax_ - kmin_ + 1));
    for (const auto& [key, c] : P.coeffs()) rows_[key.second - kmin_].push_back({key.first, c});
  }

  int kmin() const { return kmin_; }
  int degree() const { return kmax_ - kmin_; }

  /// q_t(z), t = 0..degree, and their z-derivatives.
  void coefficients(cplx z, std::vector<cplx>& q, std::vector<cplx>* dq = nullptr) const {
    q.assign(rows_.size(), cplx{});
    if (dq) dq->assign(rows_.size(), cplx{});
    for (std::size_t t = 0; t < rows_.size(); ++t)
      for (const auto& [j, c] : rows_[t]) {
        const cplx zj = std::pow(z, j);
        q[t] += c * zj;
        if (dq && j != 0) (*dq)[t] += c * static_cast<double>(j) * zj / z;
      }
  }

 private:
  int kmin_;
  int kmax_;
  std::vector<std::vector<std::pair<int, cplx>>> rows_;
};

inline cplx horner(const std::vector<cplx>& q, cplx w) {
  cplx s{};
  for (std::size_t t = q.size(); t-- > 0;) s = s * w + q[t];
  return s;
}

inline cplx horner_derivative(const std::vector<cplx>& q, cplx w) {
  cplx s{};
  for (std::size_t t = q.size(); t-- > 1;) s = s * w + static_cast<double>(t) * q[t];
  return s;
}

/// Roots of a polynomial (coefficients low to high). Leading coefficients
/// that vanish relative to the rest are dropped (roots at infinity), trailing
/// zero coefficients produce exact zero roots.
struct PolyRoots {
  std::vector<cplx> roots;
  cplx lead{};
  int zeros = 0;  // number of exact zero roots (included in roots)
};

inline PolyRoots polynomial_roots(const std::vector<cplx>& q) {
  double scale = 0.0;
  for (const cplx& c : q) scale = std::max(scale, std::abs(c));
  if (scale == 0.0) throw NumericalFailure("polynomial vanishes identically on the fiber");
  const double cut = 1e-14 * scale;
  int hi = static_cast<int>(q.size()) - 1;
  while (hi > 0 && std::abs(q[hi]) <= cut) --hi;
  int lo = 0;
  while (lo < hi && std::abs(q[lo]) <= cut) ++lo;
  PolyRoots out;
  out.lead = q[hi];
  out.zeros = lo;
  out.roots.assign(static_cast<std::size_t>(lo), cplx{});
  const int d = hi - lo;
  if (d == 0) return out;
  std::vector<cplx> p(q.begin() + lo, q.begin() + hi + 1);
  if (d == 1) {
    out.roots.push_back(-p[0] / p[1]);
    return out;
  }
  Eigen::MatrixXcd C = Eigen::MatrixXcd::Zero(d, d);
  for (int i = 1; i < d; ++i) C(i, i - 1) = 1.0;
  for (int i = 0; i < d; ++i) C(i, d - 1) = -p[i] / p[d];
  Eigen::ComplexEigenSolver<Eigen::MatrixXcd> es(C, false);
  if (es.info() != Eigen::Success) throw NumericalFailure("companion eigenvalue solver failed");
  for (int i = 0; i < d; ++i) {
    cplx r = es.eigenvalues()(i);
    for (int it = 0; it < 3; ++it) {
      const cplx f = horner(p, r);
      const cplx df = horner_derivative(p, r);
      if (std::abs(df) == 0.0) break;
      const cplx next = r - f / df;
      if (!(std::abs(horner(p, next)) < std::abs(f))) break;
      r = next;
    }
    out.roots.push_back(r);
  }
  return out;
}

/// Root data of the w-fiber over z = e^{B1 + i theta}.
struct FiberSample {
  double theta = 0.0;
  cplx z;
  std::vector<cplx> q;
  PolyRoots roots;
  int inside = 0;        // roots with |w| < e^{B2} (zero roots included)
  double distance = 0.0; // min over roots of |log|w| - B2|
  double rate = 0.0;     // max over roots of |d log|w| / d theta|
};

/// Angular structure of P on the torus |z| = e^{B1}, |w| = e^{B2}:
/// breakpoints where the number of roots inside |w| < e^{B2} changes.
class TorusSlice {
 public:
  TorusSlice(const LaurentPoly2& P, MagneticField B, const ThermoOptions& opt = {})
      : fiber_(P), B_(B), opt_(opt) {
    build();
  }

  const Fiber& fiber() const { return fiber_; }
  MagneticField field() const { return B_; }

  /// Split points in [0, 2 pi], including both ends.
  const std::vector<double>& knots() const { return knots_; }
  /// Root count inside on (knots[i], knots[i+1]).
  const std::vector<int>& counts() const { return counts_; }
  bool has_crossings() const { return crossings_ > 0; }
  int crossings() const { return crossings_; }

  /// Smallest |log|w| - B2| over the torus slice (0 when roots cross).
  double margin() const {
    if (has_crossings()) return 0.0;
    if (!polished_) {
      margin_ = std::min(margin_, local_margin());
      polished_ = true;
    }
    return margin_;
  }

  FiberSample sample(double theta) const {
    FiberSample s;
    s.theta = theta;
    s.z = std::polar(std::exp(B_.b1), theta);
    std::vector<cplx> dq;
    fiber_.coefficients(s.z, s.q, &dq);
    s.roots = polynomial_roots(s.q);
    s.distance = std::numeric_limits<double>::infinity();
    for (const cplx& r : s.roots.roots) {
      const double lr = std::abs(r) == 0.0 ? -std::numeric_limits<double>::infinity() : std::log(std::abs(r));
      s.inside += lr < B_.b2;
      s.distance = std::min(s.distance, std::abs(lr - B_.b2));
      if (std::abs(r) == 0.0) continue;
      const cplx qw = horner_derivative(s.q, r);
      const cplx qz = horner(dq, r);
      const double rate =
          std::abs(qw) == 0.0 ? std::numeric_limits<double>::infinity() : std::abs((-(qz / qw) * cplx(0, 1) * s.z / r).real());
      s.rate = std::max(s.rate, rate);
    }
    return s;
  }

  /// Jensen: average of log|P(z, e^{B2 + i phi})| over phi.
  double inner_log_average(const FiberSample& s) const {
    double v = std::log(std::abs(s.roots.lead)) + fiber_.kmin() * B_.b2;
    for (const cplx& r : s.roots.roots) v += std::max(B_.b2, std::abs(r) == 0.0 ? B_.b2 : std::log(std::abs(r)));
    return v;
  }

 private:
  void build() {
    const int M = std::max(8, opt_.scan_nodes);
    std::vector<FiberSample> nodes;
    for (int i = 0; i <= M; ++i) nodes.push_back(sample(kTwoPi * i / M));
    nodes.back().theta = kTwoPi;
    std::vector<std::pair<double, std::pair<int, int>>> breaks;
    std::vector<double> touches;
    margin_ = std::numeric_limits<double>::infinity();
    for (int i = 0; i < M; ++i) refine(nodes[i], nodes[i + 1], breaks, touches, 0);
    knots_.clear();
    counts_.clear();
    knots_.push_back(0.0);
    std::vector<double> pts;
    for (const auto& b : breaks) pts.push_back(b.first);
    std::sort(touches.begin(), touches.end());
    for (std::size_t i = 0; i < touches.size();) {
      // one split point per cluster of near-touches
      std::size_t j = i;
      while (j + 1 < touches.size() && touches[j + 1] - touches[j] < 1e-5) ++j;
      double best = touches[i];
      double bd = sample(best).distance;
      for (std::size_t k = i + 1; k <= j; ++k) {
        const double d = sample(touches[k]).distance;
        if (d < bd) bd = d, best = touches[k];
      }
      pts.push_back(best);
      i = j + 1;
    }
    std::sort(pts.begin(), pts.end());
    for (double t : pts)
      if (t - knots_.back() > opt_.min_interval && kTwoPi - t > opt_.min_interval) knots_.push_back(t);
    knots_.push_back(kTwoPi);
    crossings_ = static_cast<int>(breaks.size());
    for (std::size_t i = 0; i + 1 < knots_.size(); ++i) counts_.push_back(sample(0.5 * (knots_[i] + knots_[i + 1])).inside);
  }

  // Subdivide while a pair of roots could enter and leave between the ends.
  void refine(const FiberSample& a, const FiberSample& b, std::vector<std::pair<double, std::pair<int, int>>>& breaks,
              std::vector<double>& touches, int depth) {
    margin_ = std::min({margin_, a.distance, b.distance});
    const double width = b.theta - a.theta;
    const double reach = 1.5 * width * std::max(a.rate, b.rate);
    const bool changes = a.inside != b.inside;
    const bool suspicious = a.distance + b.distance <= reach;
    if (!changes && !suspicious) {
      // nodes sit at the root-precision floor without a crossing
      if (std::min(a.distance, b.distance) < 1e-6) touches.push_back(a.distance < b.distance ? a.theta : b.theta);
      return;
    }
    if (width <= opt_.min_interval || depth > 60) {
      if (changes) breaks.push_back({0.5 * (a.theta + b.theta), {a.inside, b.inside}});
      else if (std::min(a.distance, b.distance) < 1e-6) touches.push_back(0.5 * (a.theta + b.theta));
      return;
    }
    const FiberSample mid = sample(0.5 * (a.theta + b.theta));
    refine(a, mid, breaks, touches, depth + 1);
    refine(mid, b, breaks, touches, depth + 1);
  }

  // Polish the fiber distance near its smallest scan values.
  double local_margin() const {
    double best = margin_;
    const int M = 4 * std::max(8, opt_.scan_nodes);
    std::vector<std::pair<double, double>> scan;
    for (int i = 0; i < M; ++i) {
      const double t = kTwoPi * i / M;
      scan.push_back({sample(t).distance, t});
    }
    std::sort(scan.begin(), scan.end());
    const double h = kTwoPi / M;
    for (int k = 0; k < std::min<int>(4, static_cast<int>(scan.size())); ++k) {
      const double t0 = scan[k].second;
      auto f = [this](double t) { return sample(t).distance; };
      const auto r = boost::math::tools::brent_find_minima(f, t0 - h, t0 + h, 40);
      best = std::min({best, r.second, scan[k].first});
    }
    return best;
  }

  Fiber fiber_;
  MagneticField B_;
  ThermoOptions opt_;
  std::vector<double> knots_;
  std::vector<int> counts_;
  int crossings_ = 0;
  mutable double margin_ = 0.0;
  mutable bool polished_ = false;
};

namespace detail {

// Fixed 31-point Gauss-Kronrod rule with its error estimate (real or complex).
template <class F>
auto gk31(F&& f, double a, double b, double& err, double& l1) {
  return boost::math::quadrature::gauss_kronrod<double, 31>::integrate(f, a, b, 0, 0.0, &err, &l1);
}

template <class F, class K>
K adapt(F& f, double a, double b, K whole, double err, double target_density, int depth, double& err_out) {
  if (depth <= 0 || err <= target_density * (b - a)) {
    err_out += err;
    return whole;
  }
  const double m = 0.5 * (a + b);
  double e1 = 0, l1 = 0, e2 = 0, l2 = 0;
  const K left = gk31(f, a, m, e1, l1);
  const K right = gk31(f, m, b, e2, l2);
  if (e1 + e2 > 0.95 * err) {
    // splitting no longer helps: the estimate sits at its noise floor
    err_out += e1 + e2;
    return left + right;
  }
  return adapt(f, a, m, left, e1, target_density, depth - 1, err_out) +
         adapt(f, m, b, right, e2, target_density, depth - 1, err_out);
}

}  // namespace detail

/// Adaptive Gauss-Kronrod on [a, b] with an absolute target tol * L1 spread
/// evenly over the interval. Unlike a per-panel relative test this does not
/// chase rounding noise where the integral nearly cancels.
template <class F>
auto integrate_interval(F&& f, double a, double b, const ThermoOptions& opt, double* error = nullptr) {
  double err = 0.0, l1 = 0.0;
  const auto whole = detail::gk31(f, a, b, err, l1);
  const double target = opt.quad_tol * std::max(l1, 1e-300) + 64 * std::numeric_limits<double>::epsilon() * l1;
  double total_err = 0.0;
  const auto v = detail::adapt(f, a, b, whole, err, target / std::max(b - a, 1e-300), opt.quad_depth, total_err);
  if (error) *error += total_err;
  return v;
}

/// R(B) = (2 pi)^{-2} \int\int log|P(e^{B1+i theta}, e^{B2+i phi})|.
inline double ronkin(const LaurentPoly2& P, MagneticField B, const ThermoOptions& opt = {}, double* error = nullptr) {
  if (P.empty()) throw InvalidArgument("Ronkin function of the zero polynomial");
  const TorusSlice slice(P, B, opt);
  auto f = [&slice](double t) { return slice.inner_log_average(slice.sample(t)); };
  double total = 0.0;
  double err = 0.0;
  const auto& k = slice.knots();
  for (std::size_t i = 0; i + 1 < k.size(); ++i) total += integrate_interval(f, k[i], k[i + 1], opt, &err);
  if (!std::isfinite(total)) throw NumericalFailure("Ronkin quadrature produced a non-finite value");
  if (error) *error = err / kTwoPi;
  return total / kTwoPi;
}

/// d R / d B2 from the root count (exact up to the breakpoint resolution).
inline double ronkin_dB2(const LaurentPoly2& P, MagneticField B, const ThermoOptions& opt = {}) {
  const TorusSlice slice(P, B, opt);
  double acc = 0.0;
  const auto& k = slice.knots();
  for (std::size_t i = 0; i + 1 < k.size(); ++i) acc += (k[i + 1] - k[i]) * (slice.counts()[i] + slice.fiber().kmin());
  return acc / kTwoPi;
}

inline std::array<double, 2> ronkin_gradient(const LaurentPoly2& P, MagneticField B, const ThermoOptions& opt = {}) {
  return {ronkin_dB2(P.transposed(), {B.b2, B.b1}, opt), ronkin_dB2(P, B, opt)};
}

/// Distance proxy to the amoeba: zero when roots cross |w| = e^{B2}.
inline double amoeba_margin(const LaurentPoly2& P, MagneticField B, const ThermoOptions& opt = {}) {
  return std::min(TorusSlice(P, B, opt).margin(), TorusSlice(P.transposed(), {B.b2, B.b1}, opt).margin());
}

struct SurfaceTension {
  double sigma = 0.0;
  MagneticField field;
  double residual = 0.0;  // |s - grad R(B)|
  int iterations = 0;
};

/// sigma(s) = sup_B (s.B - R(B)) by damped Newton ascent with the exact
/// gradient and a finite-difference Hessian of R.
inline SurfaceTension surface_tension(const LaurentPoly2& P, NewtonPoint s, const ThermoOptions& opt = {},
                                      MagneticField start = {}) {
  const auto poly = newton_polygon(P);
  if (polygon_depth(poly, s.s1, s.s2) <= 1e-12)
    throw InvalidArgument("slope must lie in the open Newton polygon");
  auto objective = [&](MagneticField B) { return s.s1 * B.b1 + s.s2 * B.b2 - ronkin(P, B, opt); };
  MagneticField B = start;
  auto grad = ronkin_gradient(P, B, opt);
  double F = objective(B);
  double g1 = s.s1 - grad[0];
  double g2 = s.s2 - grad[1];
  double mu = 1e-3;
  int it = 0;
  for (; it < opt.ascent_iters && std::hypot(g1, g2) > opt.ascent_tol; ++it) {
    const double h = opt.fd_step;
    const auto gx = ronkin_gradient(P, {B.b1 + h, B.b2}, opt);
    const auto gxm = ronkin_gradient(P, {B.b1 - h, B.b2}, opt);
    const auto gy = ronkin_gradient(P, {B.b1, B.b2 + h}, opt);
    const auto gym = ronkin_gradient(P, {B.b1, B.b2 - h}, opt);
    Eigen::Matrix2d H;
    H << (gx[0] - gxm[0]) / (2 * h), (gy[0] - gym[0]) / (2 * h), (gx[1] - gxm[1]) / (2 * h), (gy[1] - gym[1]) / (2 * h);
    H = 0.5 * (H + H.transpose()).eval();
    Eigen::Vector2d g(g1, g2);
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> es(H);
    const double shift = std::max(0.0, -es.eigenvalues().minCoeff());
    bool moved = false;
    // Levenberg damping: Newton where R is curved, long gradient steps
    // where it is flat (outside the amoeba)
    for (int attempt = 0; attempt < 60 && !moved; ++attempt, mu *= 4.0) {
      Eigen::Vector2d d = (H + (shift + mu) * Eigen::Matrix2d::Identity()).ldlt().solve(g);
      if (d.norm() > 2.0) d *= 2.0 / d.norm();
      const MagneticField trial{B.b1 + d(0), B.b2 + d(1)};
      const double Ft = objective(trial);
      if (Ft < F - 1e-14 * std::max(1.0, std::abs(F))) continue;
      const auto gt = ronkin_gradient(P, trial, opt);
      const double nt = std::hypot(s.s1 - gt[0], s.s2 - gt[1]);
      if (Ft > F + 1e-15 * std::max(1.0, std::abs(F)) || nt < std::hypot(g1, g2)) {
        B = trial;
        F = Ft;
        grad = gt;
        g1 = s.s1 - grad[0];
        g2 = s.s2 - grad[1];
        moved = true;
        mu = std::max(mu / 16.0, 1e-12);
      }
    }
    if (!moved) break;
    if (std::hypot(B.b1, B.b2) > 60.0)
      throw NumericalFailure("maximizer diverging (slope too close to the Newton polygon boundary); last B = (" +
                             std::to_string(B.b1) + ", " + std::to_string(B.b2) + ")");
  }
  return {F, B, std::hypot(g1, g2), it};
}

struct Classification {
  PhaseLabel label = PhaseLabel::Rough;
  MagneticField field;   // maximizer (or a facet-interior point when smooth)
  double margin = 0.0;   // amoeba-distance proxy at field
  std::string diagnostics;
};

/// Rough/smooth verdict at a Newton point. Smooth means the maximizer set
/// of s.B - R(B) contains a ball outside the amoeba on which grad R == s.
inline Classification classify_slope(const LaurentPoly2& P, NewtonPoint s, const ThermoOptions& opt = {}) {
  const auto poly = newton_polygon(P);
  const double depth = polygon_depth(poly, s.s1, s.s2);
  if (depth <= 1e-12) return {PhaseLabel::BoundaryOrCorner, {}, 0.0, "on or outside the Newton polygon boundary"};
  const bool integer = std::abs(s.s1 - std::round(s.s1)) < 1e-12 && std::abs(s.s2 - std::round(s.s2)) < 1e-12;
  const SurfaceTension st = surface_tension(P, s, opt);
  if (!integer) return {PhaseLabel::Rough, st.field, 0.0, "non-integer slope"};

  // signed score: margin inside a component where grad R == s, minus the
  // gradient mismatch elsewhere
  auto score = [&](MagneticField B) {
    const auto g = ronkin_gradient(P, B, opt);
    const double mis = std::hypot(g[0] - s.s1, g[1] - s.s2);
    if (mis >= 1e-9) return -mis;
    const double m = amoeba_margin(P, B, opt);
    return m > 0.0 ? m : -mis;
  };
  MagneticField best = st.field;
  double best_score = score(best);
  // compass search on the score
  double stepsize = 0.05;
  while (stepsize > 1e-6) {
    // a comfortably wide hole needs no further polishing
    if (best_score > 1e-3 && stepsize < 1e-3) break;
    bool improved = false;
    for (auto [dx, dy] : std::array<std::pair<double, double>, 8>{
             {{1, 0}, {-1, 0}, {0, 1}, {0, -1}, {0.7071, 0.7071}, {-0.7071, 0.7071}, {0.7071, -0.7071}, {-0.7071, -0.7071}}}) {
      const MagneticField trial{best.b1 + stepsize * dx, best.b2 + stepsize * dy};
      const double sc = score(trial);
      if (sc > best_score + 1e-15) {
        best = trial;
        best_score = sc;
        improved = true;
        break;
      }
    }
    if (!improved) stepsize *= 0.5;
  }
  Classification out;
  out.field = best;
  out.margin = std::max(0.0, best_score);
  char buf[256];
  std::snprintf(buf, sizeof buf, "maximizer (%.6g, %.6g), residual %.2g; best margin %.3g at (%.6g, %.6g)", st.field.b1,
                st.field.b2, st.residual, best_score, best.b1, best.b2);
  out.diagnostics = buf;
  if (best_score >= opt.smooth_margin) {
    const double radius = std::min(opt.facet_radius, best_score / 4.0);
    for (int i = 0; i < opt.facet_samples; ++i) {
      // deterministic points filling the ball (golden-angle spiral)
      const double r = radius * std::sqrt((i + 0.5) / opt.facet_samples);
      const double a = i * 2.399963229728653;
      const auto g = ronkin_gradient(P, {best.b1 + r * std::cos(a), best.b2 + r * std::sin(a)}, opt);
      if (std::hypot(g[0] - s.s1, g[1] - s.s2) >= opt.facet_threshold)
        throw Indeterminate("facet test failed inside the ball: " + out.diagnostics);
    }
    out.label = PhaseLabel::Smooth;
    return out;
  }
  if (best_score <= opt.rough_margin) {
    out.label = PhaseLabel::Rough;
    return out;
  }
  throw Indeterminate("amoeba hole too thin to decide: " + out.diagnostics);
}

inline std::vector<LatticePoint> smooth_slopes(const LaurentPoly2& P, const ThermoOptions& opt = {}) {
  std::vector<LatticePoint> out;
  for (const auto& pt : interior_lattice_points(newton_polygon(P)))
    if (classify_slope(P, {static_cast<double>(pt.first), static_cast<double>(pt.second)}, opt).label == PhaseLabel::Smooth)
      out.push_back(pt);
  return out;
}

/// Entries of the inverse Kasteleyn operator of the infinite periodic
/// lattice at field B, by residues in w and Gauss-Kronrod in arg z.
class InverseKasteleyn {
 public:
  InverseKasteleyn(const PeriodicWeights& w, MagneticField B, const ThermoOptions& opt = {})
      : w_(w), dom_(w.n(), w.time_parity()), P_(characteristic_polynomial(w)), slice_(P_, B, opt), opt_(opt) {}

  const LaurentPoly2& polynomial() const { return P_; }
  const TorusSlice& slice() const { return slice_; }
  MagneticField field() const { return slice_.field(); }
  const PeriodicWeights& weights() const { return w_; }

  /// K^{-1}(black, white) for lattice vertices of the given colours.
  cplx entry(Vertex black, Vertex white, double* error = nullptr) const {
    if (dom_.white(black) || !dom_.white(white)) throw InvalidArgument("entry needs a black and a white vertex");
    const auto [m1, m2] = dom_.domain(white);
    const auto [l1, l2] = dom_.domain(black);
    const int d1 = l1 - m1;
    const int d2 = l2 - m2;
    const auto& C = cofactor(dom_.index(white), dom_.index(black));
    if (C.rows.empty()) return 0.0;
    auto inner = [&](double theta) -> cplx {
      const FiberSample& s = cached(theta);
      std::vector<cplx> chat(C.rows.size(), cplx{});
      for (std::size_t t = 0; t < C.rows.size(); ++t)
        for (const auto& [j, c] : C.rows[t]) chat[t] += c * std::pow(s.z, j);
      // integrand chat(w) w^e / q(w), e = cmin - kmin + d2 - 1
      int e = C.cmin - slice_.fiber().kmin() + d2 - 1;
      std::vector<cplx> q(s.q);
      // strip exact zero roots of q into the power of w
      const int z0 = s.roots.zeros;
      q.erase(q.begin(), q.begin() + z0);
      e -= z0;
      cplx acc{};
      const double r2 = std::exp(slice_.field().b2);
      for (std::size_t i = static_cast<std::size_t>(z0); i < s.roots.roots.size(); ++i) {
        const cplx zeta = s.roots.roots[i];
        if (std::abs(zeta) >= r2) continue;
        acc += horner(chat, zeta) * std::pow(zeta, e) / horner_derivative(q, zeta);
      }
      if (e < 0) {
        const int order = -e - 1;
        std::vector<cplx> series(static_cast<std::size_t>(order) + 1);
        for (int k = 0; k <= order; ++k) {
          cplx v = k < static_cast<int>(chat.size()) ? chat[k] : cplx{};
          for (int i = 1; i <= k && i < static_cast<int>(q.size()); ++i) v -= q[i] * series[k - i];
          series[k] = v / q[0];
        }
        acc += series[order];
      }
      return acc * std::pow(s.z, d1);
    };
    double err = 0.0;
    cplx total{};
    const auto& k = slice_.knots();
    ThermoOptions o = opt_;
    o.quad_depth = opt_.entry_depth;
    for (std::size_t i = 0; i + 1 < k.size(); ++i) total += integrate_interval(inner, k[i], k[i + 1], o, &err);
    if (error) *error = err / kTwoPi;
    return total / kTwoPi;
  }

  /// Probability that edge e is occupied: K(e) K^{-1}(e).
  double edge_probability(const EdgeId& e, double* error = nullptr) const {
    const int p = w_.time_parity();
    const Vertex white = e.white_end(p);
    const Vertex black = e.black_end(p);
    const double wt = w_.edge_weight(e);
    const cplx k = e.orientation == Orientation::Horizontal ? cplx(wt, 0.0) : cplx(0.0, wt);
    const cplx v = k * entry(black, white, error);
    if (std::abs(v.imag()) > opt_.edge_imag_tol)
      throw NumericalFailure("edge probability has imaginary part " + std::to_string(v.imag()));
    if (error) *error *= wt;
    return v.real();
  }

 private:
  struct CofactorRows {
    int cmin = 0;
    std::vector<std::vector<std::pair<int, cplx>>> rows;
  };

  const CofactorRows& cofactor(int white_row, int black_col) const {
    const auto key = std::make_pair(white_row, black_col);
    auto it = cofactors_.find(key);
    if (it != cofactors_.end()) return it->second;
    const LaurentPoly2 C = cofactor_polynomial(w_, white_row, black_col);
    CofactorRows rows;
    if (!C.empty()) {
      rows.cmin = C.min_k();
      rows.rows.resize(static_cast<std::size_t>(C.max_k() - C.min_k() + 1));
      for (const auto& [kk, c] : C.coeffs()) rows.rows[kk.second - rows.cmin].push_back({kk.first, c});
    }
    return cofactors_.emplace(key, std::move(rows)).first->second;
  }

  const FiberSample& cached(double theta) const {
    auto it = samples_.find(theta);
    if (it != samples_.end()) return it->second;
    if (samples_.size() > 200000) samples_.clear();
    return samples_.emplace(theta, slice_.sample(theta)).first->second;
  }

  PeriodicWeights w_;
  DomainIndex dom_;
  LaurentPoly2 P_;
  TorusSlice slice_;
  ThermoOptions opt_;
  mutable std::map<std::pair<int, int>, CofactorRows> cofactors_;
  mutable std::unordered_map<double, FiberSample> samples_;
};

/// Field B(rho) of the Gibbs measure with height slope rho.
inline MagneticField field_for_slope(const LaurentPoly2& P, Slope rho, const ThermoOptions& opt = {}) {
  return surface_tension(P, newton_point(rho), opt).field;
}

inline double edge_probability(const PeriodicWeights& w, Slope rho, const EdgeId& e, const ThermoOptions& opt = {}) {
  const LaurentPoly2 P = characteristic_polynomial(w);
  return InverseKasteleyn(w, field_for_slope(P, rho, opt), opt).edge_probability(e);
}

}  // namespace domino
