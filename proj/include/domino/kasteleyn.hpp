#pragma once
// Magnetically twisted Kasteleyn matrix of the 2n x 2n fundamental domain,
// its determinant P(z, w) and cofactors as Laurent polynomials.
//
// Rows are white vertices, columns black ones (colours of the weights' time
// parity). Horizontal edges carry wt * z^a, vertical edges i * wt * w^b, with
// a = +1 (-1) when the edge leaves the domain through its right seam from the
// white (black) end, and likewise b for the top seam.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdio>
#include <map>
#include <numbers>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "domino/error.hpp"
#include "domino/lattice.hpp"
#include "domino/weights.hpp"

namespace domino {

using cplx = std::complex<double>;

/// Bivariate Laurent polynomial sum c_{jk} z^j w^k.
class LaurentPoly2 {
 public:
  using Key = std::pair<int, int>;

  LaurentPoly2() = default;
  explicit LaurentPoly2(std::map<Key, cplx> coeffs) : coeffs_(std::move(coeffs)) {}

  const std::map<Key, cplx>& coeffs() const { return coeffs_; }
  bool empty() const { return coeffs_.empty(); }

  cplx coeff(int j, int k) const {
    const auto it = coeffs_.find({j, k});
    return it == coeffs_.end() ? cplx{} : it->second;
  }
  void set(int j, int k, cplx c) { coeffs_[{j, k}] = c; }

  double max_abs() const {
    double m = 0.0;
    for (const auto& [key, c] : coeffs_) m = std::max(m, std::abs(c));
    return m;
  }

  /// Drops coefficients below rel * (largest magnitude).
  void prune(double rel = 1e-12) {
    const double cut = rel * max_abs();
    std::erase_if(coeffs_, [cut](const auto& kv) { return std::abs(kv.second) <= cut; });
  }

  cplx operator()(cplx z, cplx w) const {
    cplx s{};
    for (const auto& [key, c] : coeffs_) s += c * std::pow(z, key.first) * std::pow(w, key.second);
    return s;
  }

  int min_j() const { return bound([](const Key& k) { return k.first; }, true); }
  int max_j() const { return bound([](const Key& k) { return k.first; }, false); }
  int min_k() const { return bound([](const Key& k) { return k.second; }, true); }
  int max_k() const { return bound([](const Key& k) { return k.second; }, false); }

  /// Swaps the roles of z and w.
  LaurentPoly2 transposed() const {
    LaurentPoly2 t;
    for (const auto& [key, c] : coeffs_) t.set(key.second, key.first, c);
    return t;
  }

  LaurentPoly2 scaled(cplx factor) const {
    LaurentPoly2 t = *this;
    for (auto& [key, c] : t.coeffs_) c *= factor;
    return t;
  }

  /// Lines "j k re im" ordered by (j, k), 17 significant digits.
  std::string dump() const {
    std::string out;
    char buf[128];
    for (const auto& [key, c] : coeffs_) {
      std::snprintf(buf, sizeof buf, "%d %d %.17g %.17g\n", key.first, key.second, c.real(), c.imag());
      out += buf;
    }
    return out;
  }

 private:
  template <class Get>
  int bound(Get get, bool lowest) const {
    if (coeffs_.empty()) throw InvalidArgument("empty polynomial has no degree");
    int b = get(coeffs_.begin()->first);
    for (const auto& [key, c] : coeffs_) b = lowest ? std::min(b, get(key)) : std::max(b, get(key));
    return b;
  }

  std::map<Key, cplx> coeffs_;
};

/// Vertex bookkeeping of the fundamental domain at a given time parity.
class DomainIndex {
 public:
  DomainIndex(int n, int parity) : L_(2 * n), parity_(parity), index_(static_cast<std::size_t>(L_ * L_)) {
    int nw = 0;
    int nb = 0;
    for (int y = 0; y < L_; ++y)
      for (int x = 0; x < L_; ++x) {
        if (is_white({x, y}, parity)) {
          index_[y * L_ + x] = nw++;
          whites_.push_back({x, y});
        } else {
          index_[y * L_ + x] = nb++;
          blacks_.push_back({x, y});
        }
      }
  }

  int size() const { return static_cast<int>(whites_.size()); }
  int period() const { return L_; }
  int parity() const { return parity_; }
  bool white(Vertex v) const { return is_white(v, parity_); }
  /// Row (white) or column (black) index of a vertex reduced into the domain.
  int index(Vertex v) const { return index_[floor_mod(v.y, L_) * L_ + floor_mod(v.x, L_)]; }
  Vertex white_vertex(int r) const { return whites_[r]; }
  Vertex black_vertex(int c) const { return blacks_[c]; }
  /// Translate of the fundamental domain containing v.
  std::pair<int, int> domain(Vertex v) const { return {floor_div(v.x, L_), floor_div(v.y, L_)}; }

 private:
  int L_;
  int parity_;
  std::vector<int> index_;
  std::vector<Vertex> whites_;
  std::vector<Vertex> blacks_;
};

inline Eigen::MatrixXcd kasteleyn_matrix(const PeriodicWeights& w, cplx z, cplx ww) {
  const DomainIndex dom(w.n(), w.time_parity());
  const int L = dom.period();
  Eigen::MatrixXcd K = Eigen::MatrixXcd::Zero(dom.size(), dom.size());
  const cplx I{0.0, 1.0};
  for (int y = 0; y < L; ++y)
    for (int x = 0; x < L; ++x) {
      const Vertex u{x, y};
      const bool uw = dom.white(u);
      {
        const Vertex v{x + 1, y};
        const double wt = w.edge_weight({u, Orientation::Horizontal});
        const int a = x == L - 1 ? (uw ? 1 : -1) : 0;
        const cplx entry = wt * std::pow(z, a);
        if (uw) K(dom.index(u), dom.index(v)) += entry;
        else K(dom.index(v), dom.index(u)) += entry;
      }
      {
        const Vertex v{x, y + 1};
        const double wt = w.edge_weight({u, Orientation::Vertical});
        const int b = y == L - 1 ? (uw ? 1 : -1) : 0;
        const cplx entry = I * wt * std::pow(ww, b);
        if (uw) K(dom.index(u), dom.index(v)) += entry;
        else K(dom.index(v), dom.index(u)) += entry;
      }
    }
  return K;
}

namespace detail {

/// Recovers a Laurent polynomial with exponents in [-deg, deg]^2 from its
/// values on the (2 deg + 1)^2 grid of roots of unity.
template <class Eval>
LaurentPoly2 interpolate(int deg, Eval&& eval) {
  const int m = 2 * deg + 1;
  const double tau = 2.0 * std::numbers::pi / m;
  std::vector<cplx> vals(static_cast<std::size_t>(m * m));
  for (int s = 0; s < m; ++s)
    for (int t = 0; t < m; ++t) vals[s * m + t] = eval(std::polar(1.0, tau * s), std::polar(1.0, tau * t));
  LaurentPoly2 p;
  for (int j = -deg; j <= deg; ++j)
    for (int k = -deg; k <= deg; ++k) {
      cplx acc{};
      for (int s = 0; s < m; ++s)
        for (int t = 0; t < m; ++t) acc += vals[s * m + t] * std::polar(1.0, -tau * (j * s + k * t));
      p.set(j, k, acc / static_cast<double>(m * m));
    }
  p.prune();
  return p;
}

/// Refit residual: max |p - eval| / max|coeff| over random points near the unit torus.
template <class Eval>
double refit_residual(const LaurentPoly2& p, Eval&& eval, unsigned seed = 12345) {
  std::mt19937_64 gen(seed);
  std::uniform_real_distribution<double> ang(0.0, 2.0 * std::numbers::pi);
  std::uniform_real_distribution<double> rad(-0.5, 0.5);
  double worst = 0.0;
  const double scale = std::max(p.max_abs(), 1e-300);
  for (int r = 0; r < 50; ++r) {
    const cplx z = std::polar(std::exp(rad(gen)), ang(gen));
    const cplx w = std::polar(std::exp(rad(gen)), ang(gen));
    double mono = 0.0;
    for (const auto& [key, c] : p.coeffs())
      mono = std::max(mono, std::pow(std::abs(z), key.first) * std::pow(std::abs(w), key.second));
    worst = std::max(worst, std::abs(p(z, w) - eval(z, w)) / (scale * std::max(mono, 1.0)));
  }
  return worst;
}

}  // namespace detail

inline cplx kasteleyn_det(const PeriodicWeights& w, cplx z, cplx ww) {
  return kasteleyn_matrix(w, z, ww).partialPivLu().determinant();
}

/// P(z, w) = det K(z, w), exponents in [-n, n] in each variable.
inline LaurentPoly2 characteristic_polynomial(const PeriodicWeights& w) {
  w.validate();
  auto eval = [&w](cplx z, cplx ww) { return kasteleyn_det(w, z, ww); };
  LaurentPoly2 p = detail::interpolate(w.n(), eval);
  if (p.empty()) throw NumericalFailure("characteristic polynomial vanished identically");
  const double res = detail::refit_residual(p, eval);
  if (res > 1e-9) throw NumericalFailure("characteristic polynomial refit residual " + std::to_string(res));
  return p;
}

/// Cofactor polynomial C with [K^{-1}]_{black, white} = C / P.
inline LaurentPoly2 cofactor_polynomial(const PeriodicWeights& w, int white_row, int black_col) {
  const DomainIndex dom(w.n(), w.time_parity());
  const int m = dom.size();
  if (white_row < 0 || white_row >= m || black_col < 0 || black_col >= m) throw InvalidArgument("bad matrix index");
  auto eval = [&](cplx z, cplx ww) -> cplx {
    const Eigen::MatrixXcd K = kasteleyn_matrix(w, z, ww);
    if (m == 1) return 1.0;
    Eigen::MatrixXcd minor(m - 1, m - 1);
    for (int r = 0, rr = 0; r < m; ++r) {
      if (r == white_row) continue;
      for (int c = 0, cc = 0; c < m; ++c) {
        if (c == black_col) continue;
        minor(rr, cc++) = K(r, c);
      }
      ++rr;
    }
    const double sign = (white_row + black_col) % 2 == 0 ? 1.0 : -1.0;
    return sign * minor.partialPivLu().determinant();
  };
  LaurentPoly2 p = detail::interpolate(w.n(), eval);
  if (!p.empty()) {
    const double res = detail::refit_residual(p, eval);
    if (res > 1e-9) throw NumericalFailure("cofactor refit residual " + std::to_string(res));
  }
  return p;
}

using LatticePoint = std::pair<int, int>;

/// Vertices of the convex hull of the support, counter-clockwise, starting
/// from the lowest-then-leftmost point; collinear points dropped.
inline std::vector<LatticePoint> newton_polygon(const LaurentPoly2& p) {
  if (p.empty()) throw InvalidArgument("newton polygon of the zero polynomial");
  std::vector<LatticePoint> pts;
  for (const auto& [key, c] : p.coeffs()) pts.push_back(key);
  std::sort(pts.begin(), pts.end());
  if (pts.size() <= 2) return pts;
  auto cross = [](LatticePoint o, LatticePoint a, LatticePoint b) {
    return static_cast<long long>(a.first - o.first) * (b.second - o.second) -
           static_cast<long long>(a.second - o.second) * (b.first - o.first);
  };
  std::vector<LatticePoint> hull(2 * pts.size());
  std::size_t h = 0;
  for (const auto& q : pts) {
    while (h >= 2 && cross(hull[h - 2], hull[h - 1], q) <= 0) --h;
    hull[h++] = q;
  }
  for (std::size_t i = pts.size() - 1, lower = h + 1; i-- > 0;) {
    while (h >= lower && cross(hull[h - 2], hull[h - 1], pts[i]) <= 0) --h;
    hull[h++] = pts[i];
  }
  hull.resize(h - 1);
  const auto start = std::min_element(hull.begin(), hull.end(), [](LatticePoint a, LatticePoint b) {
    return a.second != b.second ? a.second < b.second : a.first < b.first;
  });
  std::rotate(hull.begin(), start, hull.end());
  return hull;
}

/// Signed position of a point relative to a counter-clockwise polygon:
/// > 0 strictly inside, 0 on the boundary, < 0 outside (min edge distance).
inline double polygon_depth(const std::vector<LatticePoint>& poly, double x, double y) {
  if (poly.size() < 3) return -1.0;
  double depth = 1e300;
  for (std::size_t i = 0; i < poly.size(); ++i) {
    const auto [x0, y0] = poly[i];
    const auto [x1, y1] = poly[(i + 1) % poly.size()];
    const double ex = x1 - x0;
    const double ey = y1 - y0;
    depth = std::min(depth, (ex * (y - y0) - ey * (x - x0)) / std::hypot(ex, ey));
  }
  return depth;
}

/// Interior lattice points of a polygon.
inline std::vector<LatticePoint> interior_lattice_points(const std::vector<LatticePoint>& poly) {
  std::vector<LatticePoint> out;
  if (poly.size() < 3) return out;
  int xmin = poly[0].first, xmax = xmin, ymin = poly[0].second, ymax = ymin;
  for (auto [x, y] : poly) {
    xmin = std::min(xmin, x);
    xmax = std::max(xmax, x);
    ymin = std::min(ymin, y);
    ymax = std::max(ymax, y);
  }
  for (int y = ymin; y <= ymax; ++y)
    for (int x = xmin; x <= xmax; ++x)
      if (polygon_depth(poly, x, y) > 1e-12) out.push_back({x, y});
  return out;
}

struct CharpolyRatio {
  cplx c;
  double deviation = 0.0;
};

/// c with P(spider_step(w)) = c P(w); deviation is the largest relative
/// departure of the coefficient-wise ratios from c.
inline CharpolyRatio charpoly_ratio(const LaurentPoly2& before, const LaurentPoly2& after, double tolerance = 1e-8) {
  cplx num{};
  double den = 0.0;
  for (const auto& [key, c] : before.coeffs()) {
    num += std::conj(c) * after.coeff(key.first, key.second);
    den += std::norm(c);
  }
  if (den == 0.0) throw InvalidArgument("ratio against the zero polynomial");
  const cplx ratio = num / den;
  double dev = 0.0;
  const double scale = std::abs(ratio) * before.max_abs();
  auto check = [&](int j, int k) {
    dev = std::max(dev, std::abs(after.coeff(j, k) - ratio * before.coeff(j, k)) / scale);
  };
  for (const auto& [key, c] : before.coeffs()) check(key.first, key.second);
  for (const auto& [key, c] : after.coeffs()) check(key.first, key.second);
  if (dev > tolerance)
    throw InvariantViolation("characteristic polynomial not rescaled by a constant (deviation " + std::to_string(dev) + ")");
  return {ratio, dev};
}

inline CharpolyRatio charpoly_ratio(const PeriodicWeights& w, double tolerance = 1e-8) {
  return charpoly_ratio(characteristic_polynomial(w), characteristic_polynomial(spider_step(w)), tolerance);
}

}  // namespace domino
