#pragma once
// Growth speed of the shuffling dynamics: the Kasteleyn-sum estimator, the
// limit-shape estimator, Hessians of the speed, envelopes and corner checks,
// and height fluctuation statistics.
//
// Units. Heights are in quarters internally; a height of q quarters is q/4
// height units. On A_N the rescaled coordinates of face (i, j) are
// x = (i, j) / (2 n N) and psi = (q / 4) / N, so the rescaled square is
// Q = {|x1| + |x2| <= 1/(2n)} and the gradient of psi is the height slope
// per fundamental domain.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <queue>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "domino/error.hpp"
#include "domino/parallel.hpp"
#include "domino/shuffle.hpp"
#include "domino/thermo.hpp"
#include "domino/tickets.hpp"
#include "domino/weights.hpp"

namespace domino {

enum class SpeedMethod { KasteleynSum, LimitShape };

inline const char* method_name(SpeedMethod m) { return m == SpeedMethod::KasteleynSum ? "kasteleyn-sum" : "limit-shape"; }

struct SpeedEstimate {
  Slope rho;
  double v = 0.0;
  SpeedMethod method = SpeedMethod::KasteleynSum;
  int k_max = 0;      // Kasteleyn sum truncation
  int N = 0;          // limit-shape order
  int samples = 0;
  double error_bar = 0.0;
  // Kasteleyn sum details
  double cesaro_gap = 0.0;
  double quadrature_error = 0.0;
  std::vector<double> terms;  // pi_{rho, w_j}[H - V], j < k_max
  // limit-shape details
  std::array<double, 2> x_w{0.0, 0.0};
  double residual = 0.0;           // |grad psi - rho| at x_w
  double standard_error = 0.0;
  double finite_size = 0.0;
  std::vector<std::array<double, 2>> matches;  // every cell with residual below the match tolerance
};

// ---------------------------------------------------------------------------
// Kasteleyn sum

/// Expected H - V at face (0,0) under the Gibbs measure of slope rho for the
/// weights w (at their own time parity): the horizontal minus the vertical
/// edge probabilities around the face.
inline double face_h_minus_v(const InverseKasteleyn& ik, FaceCoord f = {0, 0}, double* error = nullptr) {
  const auto e = face_edges(f);
  double total = 0.0;
  double err = 0.0;
  for (int s = 0; s < 4; ++s) {
    double es = 0.0;
    const double p = ik.edge_probability(e[s], &es);
    total += (s % 2 == 0) ? p : -p;
    err += std::abs(es);
  }
  if (error) *error = err;
  return total;
}

namespace detail {

// Gauge class plus parity, rounded: edge probabilities depend on nothing else.
inline std::vector<long long> gauge_key(const PeriodicWeights& w) {
  const GaugeInvariants g = gauge_invariants(w);
  std::vector<long long> key{w.time_parity()};
  auto push = [&key](double v) { key.push_back(std::llround(std::log(v) * 1e10)); };
  push(g.w1);
  push(g.w2);
  for (const auto& [f, v] : g.face_weights) push(v);
  return key;
}

}  // namespace detail

struct SpeedOptions {
  ThermoOptions thermo;
  unsigned threads = 1;
  bool require_rough = true;
};

/// v = (1 / (4 k_max)) sum_{j < k_max} pi_{rho, w_j}[H - V], w_j the
/// normalized spider chain started from w0 at time 0.
inline SpeedEstimate speed_kasteleyn(const PeriodicWeights& w0, Slope rho, int k_max, const SpeedOptions& opt = {}) {
  if (k_max < 2) throw InvalidArgument("k_max must be at least 2");
  w0.validate();
  const LaurentPoly2 P = characteristic_polynomial(w0);
  const NewtonPoint s = newton_point(rho);
  if (polygon_depth(newton_polygon(P), s.s1, s.s2) <= 1e-12) throw InvalidArgument("slope outside the open Newton polygon");
  if (opt.require_rough && classify_slope(P, s, opt.thermo).label != PhaseLabel::Rough)
    throw InvalidArgument("smooth slope: the Kasteleyn sum is restricted to rough slopes, use the limit-shape route");
  const MagneticField B = surface_tension(P, s, opt.thermo).field;

  std::vector<PeriodicWeights> chain{gauge_normalize(reindex_parity(w0, 0))};
  for (int j = 1; j < k_max; ++j) chain.push_back(gauge_normalize(spider_step(chain.back())));
  std::map<std::vector<long long>, std::size_t> first;
  std::vector<std::size_t> source(chain.size());
  std::vector<std::size_t> distinct;
  for (std::size_t j = 0; j < chain.size(); ++j) {
    const auto [it, fresh] = first.emplace(detail::gauge_key(chain[j]), j);
    source[j] = it->second;
    if (fresh) distinct.push_back(j);
  }
  std::vector<double> value(chain.size(), 0.0);
  std::vector<double> error(chain.size(), 0.0);
  parallel_for(distinct.size(), opt.threads, [&](std::size_t i) {
    const std::size_t j = distinct[i];
    const InverseKasteleyn ik(chain[j], B, opt.thermo);
    value[j] = face_h_minus_v(ik, {0, 0}, &error[j]);
  });
  SpeedEstimate out;
  out.rho = rho;
  out.method = SpeedMethod::KasteleynSum;
  out.k_max = k_max;
  double sum = 0.0;
  double err = 0.0;
  double previous = 0.0;
  for (int j = 0; j < k_max; ++j) {
    const double t = value[source[j]];
    out.terms.push_back(t);
    sum += t;
    err += error[source[j]];
    if (j == k_max - 3) previous = sum / (4.0 * (k_max - 2));
  }
  out.v = sum / (4.0 * k_max);
  out.quadrature_error = err / (4.0 * k_max);
  out.cesaro_gap = k_max >= 3 ? std::abs(out.v - previous) : std::abs(out.v);
  if (k_max == 2) out.cesaro_gap = std::abs(out.v - out.terms[0] / 4.0);
  out.error_bar = out.cesaro_gap + out.quadrature_error;
  return out;
}

struct SpeedHessian {
  Eigen::Matrix2d D2 = Eigen::Matrix2d::Zero();
  Eigen::Matrix2d D2_error = Eigen::Matrix2d::Zero();
  double det = 0.0;
  double det_error = 0.0;
  double h = 0.0;
  std::array<std::array<SpeedEstimate, 3>, 3> stencil{};  // [a+1][b+1] at rho + h (a, b)
};

namespace detail {

inline Eigen::Matrix2d second_differences(const std::function<double(int, int)>& v, double h) {
  const double h2 = h * h;
  Eigen::Matrix2d D;
  D(0, 0) = (v(1, 0) - 2 * v(0, 0) + v(-1, 0)) / h2;
  D(1, 1) = (v(0, 1) - 2 * v(0, 0) + v(0, -1)) / h2;
  D(0, 1) = D(1, 0) = (v(1, 1) - v(1, -1) - v(-1, 1) + v(-1, -1)) / (4 * h2);
  return D;
}

}  // namespace detail

inline void finish_hessian(SpeedHessian& out) {
  const auto& st = out.stencil;
  auto at = [&](int a, int b) -> const SpeedEstimate& { return st[a + 1][b + 1]; };
  auto abs_combination = [&](auto field) {
    const double h2 = out.h * out.h;
    Eigen::Matrix2d E;
    E(0, 0) = (field(at(1, 0)) + 2 * field(at(0, 0)) + field(at(-1, 0))) / h2;
    E(1, 1) = (field(at(0, 1)) + 2 * field(at(0, 0)) + field(at(0, -1))) / h2;
    E(0, 1) = E(1, 0) = (field(at(1, 1)) + field(at(1, -1)) + field(at(-1, 1)) + field(at(-1, -1))) / (4 * h2);
    return E;
  };
  out.D2 = detail::second_differences([&](int a, int b) { return at(a, b).v; }, out.h);

  const int k = at(0, 0).k_max;
  bool have_terms = k >= 4;
  for (const auto& row : st)
    for (const auto& e : row) have_terms = have_terms && static_cast<int>(e.terms.size()) == k;
  if (have_terms) {
    // Truncation: the stencil points share one spider chain, so their Cesaro
    // errors are strongly correlated. Use the spread of the second-difference
    // matrix over tail averages A_m, m even in [k/2, k).
    std::array<std::array<std::vector<double>, 3>, 3> prefix;
    for (int a = 0; a < 3; ++a)
      for (int b = 0; b < 3; ++b) {
        prefix[a][b].assign(k + 1, 0.0);
        for (int j = 0; j < k; ++j) prefix[a][b][j + 1] = prefix[a][b][j] + st[a][b].terms[j];
      }
    Eigen::Matrix2d trunc = Eigen::Matrix2d::Zero();
    for (int m = k - 2; m >= std::max(2, k / 2); m -= 2) {
      const Eigen::Matrix2d Dm =
          detail::second_differences([&](int a, int b) { return prefix[a + 1][b + 1][m] / (4.0 * m); }, out.h);
      trunc = trunc.cwiseMax((Dm - out.D2).cwiseAbs());
    }
    out.D2_error = trunc + abs_combination([](const SpeedEstimate& e) { return e.quadrature_error; });
  } else {
    out.D2_error = abs_combination([](const SpeedEstimate& e) { return e.error_bar; });
  }
  out.det = out.D2.determinant();
  out.det_error = std::abs(out.D2(1, 1)) * out.D2_error(0, 0) + std::abs(out.D2(0, 0)) * out.D2_error(1, 1) +
                  out.D2_error(0, 0) * out.D2_error(1, 1) +
                  2 * std::abs(out.D2(0, 1)) * out.D2_error(0, 1) + out.D2_error(0, 1) * out.D2_error(0, 1);
}

/// Central second differences of the Kasteleyn-sum speed on the 9-point
/// stencil rho + h {-1, 0, 1}^2; every stencil point must be rough.
inline SpeedHessian speed_hessian(const PeriodicWeights& w0, Slope rho, double h, int k_max, const SpeedOptions& opt = {}) {
  if (!(h > 0)) throw InvalidArgument("stencil step must be positive");
  const LaurentPoly2 P = characteristic_polynomial(w0);
  const auto poly = newton_polygon(P);
  for (int a = -2; a <= 2; ++a)
    for (int b = -2; b <= 2; ++b) {
      const NewtonPoint s = newton_point({rho.r1 + a * h, rho.r2 + b * h});
      if (polygon_depth(poly, s.s1, s.s2) <= 1e-12) throw InvalidArgument("stencil leaves the Newton polygon");
      if (opt.require_rough && classify_slope(P, s, opt.thermo).label != PhaseLabel::Rough)
        throw InvalidArgument("stencil leaves the rough region");
    }
  SpeedOptions inner = opt;
  inner.require_rough = false;
  SpeedHessian out;
  out.h = h;
  for (int a = -1; a <= 1; ++a)
    for (int b = -1; b <= 1; ++b) out.stencil[a + 1][b + 1] = speed_kasteleyn(w0, {rho.r1 + a * h, rho.r2 + b * h}, k_max, inner);
  finish_hessian(out);
  return out;
}

// ---------------------------------------------------------------------------
// Empirical limit shape

struct EmpiricalShape {
  int n = 1;
  int N = 0;
  int samples = 0;
  std::uint64_t seed = 0;
  int spacing = 4;  // central-difference half-width in faces
  // per face (i, j) with |i| + |j| <= N, row-major over [-N, N]^2
  std::vector<long long> sum;     // quarters
  std::vector<long long> sum_sq;  // quarters^2

  int side() const { return 2 * N + 1; }
  bool has(int i, int j) const { return std::abs(i) + std::abs(j) <= N; }
  std::size_t slot(int i, int j) const { return static_cast<std::size_t>(j + N) * side() + (i + N); }
  double cell() const { return 1.0 / (2.0 * n * N); }  // x spacing
  std::array<double, 2> x(int i, int j) const { return {i * cell(), j * cell()}; }

  double psi(int i, int j) const { return static_cast<double>(sum[slot(i, j)]) / samples / (4.0 * N); }

  /// Standard error of psi at a face.
  double standard_error(int i, int j) const {
    if (samples < 2) return 0.0;
    const double m = static_cast<double>(sum[slot(i, j)]) / samples;
    const double var = (static_cast<double>(sum_sq[slot(i, j)]) - samples * m * m) / (samples - 1);
    return std::sqrt(std::max(0.0, var) / samples) / (4.0 * N);
  }

  bool has_gradient(int i, int j) const {
    const int s = spacing;
    return has(i + s, j) && has(i - s, j) && has(i, j + s) && has(i, j - s);
  }

  std::array<double, 2> gradient(int i, int j) const {
    const int s = spacing;
    const double dx = 2.0 * s * cell();
    return {(psi(i + s, j) - psi(i - s, j)) / dx, (psi(i, j + s) - psi(i, j - s)) / dx};
  }

  /// Second derivatives of psi at spacing s (D2 psi), for the grid Hessian.
  bool has_hessian(int i, int j) const {
    const int s = spacing;
    return has(i + s, j + s) && has(i - s, j - s) && has(i + s, j - s) && has(i - s, j + s) && has_gradient(i, j);
  }

  Eigen::Matrix2d hessian(int i, int j) const {
    const int s = spacing;
    const double d = s * cell();
    Eigen::Matrix2d H;
    H(0, 0) = (psi(i + s, j) - 2 * psi(i, j) + psi(i - s, j)) / (d * d);
    H(1, 1) = (psi(i, j + s) - 2 * psi(i, j) + psi(i, j - s)) / (d * d);
    H(0, 1) = H(1, 0) = (psi(i + s, j + s) - psi(i + s, j - s) - psi(i - s, j + s) + psi(i - s, j - s)) / (4 * d * d);
    return H;
  }
};

inline int default_spacing(int n, int N) {
  // span 2s must be a multiple of the period 2n so the periodic pattern cancels;
  // the spacing grows with N to keep gradient noise down at fixed x-resolution
  int s = std::max({4, n, N / 50});
  while ((2 * s) % (2 * n) != 0) ++s;
  return s;
}

inline EmpiricalShape empty_shape(int n, int N) {
  EmpiricalShape out;
  out.n = n;
  out.N = N;
  out.spacing = default_spacing(n, N);
  out.sum.assign(static_cast<std::size_t>(out.side()) * out.side(), 0);
  out.sum_sq.assign(out.sum.size(), 0);
  return out;
}

/// Adds the heights of one A_N state to the accumulators.
inline void accumulate(EmpiricalShape& shape, const HeightField& h) {
  const int N = shape.N;
  for (int j = -N; j <= N; ++j)
    for (int i = -(N - std::abs(j)); i <= N - std::abs(j); ++i) {
      const long long q = h.at({i, j});
      shape.sum[shape.slot(i, j)] += q;
      shape.sum_sq[shape.slot(i, j)] += q * q;
    }
  ++shape.samples;
}

/// Mean rescaled heights of independent Aztec growth runs of order N from w0.
inline EmpiricalShape empirical_limit_shape(const PeriodicWeights& w0, int N, int samples, std::uint64_t seed,
                                            unsigned threads = 1,
                                            const std::function<void(int)>& progress = {}) {
  if (N < 1) throw InvalidArgument("N must be positive");
  if (samples < 1) throw InvalidArgument("need at least one sample");
  w0.validate();
  const unsigned workers = static_cast<unsigned>(std::min<std::size_t>(resolve_threads(threads), samples));
  std::vector<EmpiricalShape> partial(workers, empty_shape(w0.n(), N));
  const Tickets root(seed);
  std::atomic<int> done{0};
  std::mutex progress_mutex;
  parallel_for(workers, workers, [&](std::size_t wk) {
    for (int r = static_cast<int>(wk); r < samples; r += static_cast<int>(workers)) {
      const AztecSample s = grow_aztec(N, w0, root.child(static_cast<std::uint64_t>(r)));
      accumulate(partial[wk], s.heights);
      const int d = ++done;
      if (progress) {
        std::lock_guard lock(progress_mutex);
        progress(d);
      }
    }
  });
  EmpiricalShape out = empty_shape(w0.n(), N);
  out.seed = seed;
  for (const auto& p : partial) {
    for (std::size_t t = 0; t < out.sum.size(); ++t) {
      out.sum[t] += p.sum[t];
      out.sum_sq[t] += p.sum_sq[t];
    }
    out.samples += p.samples;
  }
  return out;
}

/// Boundary profile psi_dQ(x) = (n/2)(|x1| - |x2|).
inline double boundary_profile(double x1, double x2, int n) { return 0.5 * n * (std::abs(x1) - std::abs(x2)); }

/// Lower and upper envelopes (n|x1| - 1/4, -n|x2| + 1/4) on Q.
inline std::pair<double, double> envelopes(double x1, double x2, int n) {
  if (n < 1) throw InvalidArgument("period must be positive");
  if (std::abs(x1) + std::abs(x2) > 1.0 / (2.0 * n) + 1e-12) throw InvalidArgument("point outside the rescaled square");
  return {n * std::abs(x1) - 0.25, -n * std::abs(x2) + 0.25};
}

struct ShapeChecks {
  double boundary_deviation = 0.0;  // max |psi - psi_dQ| on the outer ring
  double envelope_violation = 0.0;  // max excess of psi beyond [psi-, psi+]
  double corner_deviation = 0.0;    // max corner-identity error where grad psi is a corner slope
  int corner_cells = 0;
};

/// Boundary, envelope and frozen-corner checks of an empirical shape.
inline ShapeChecks check_shape(const EmpiricalShape& s, double corner_tol = 0.05) {
  ShapeChecks c;
  const int N = s.N;
  const int n = s.n;
  for (int j = -N; j <= N; ++j)
    for (int i = -(N - std::abs(j)); i <= N - std::abs(j); ++i) {
      const auto x = s.x(i, j);
      const double p = s.psi(i, j);
      if (std::abs(i) + std::abs(j) == N) c.boundary_deviation = std::max(c.boundary_deviation, std::abs(p - boundary_profile(x[0], x[1], n)));
      const auto [lo, hi] = envelopes(x[0], x[1], n);
      c.envelope_violation = std::max({c.envelope_violation, lo - p, p - hi});
      if (!s.has_gradient(i, j)) continue;
      const auto g = s.gradient(i, j);
      for (auto corner : std::array<std::array<double, 2>, 4>{{{double(n), 0}, {-double(n), 0}, {0, double(n)}, {0, -double(n)}}}) {
        if (std::hypot(g[0] - corner[0], g[1] - corner[1]) >= corner_tol) continue;
        const double predicted = corner[0] * x[0] + corner[1] * x[1] + (std::abs(corner[1]) - std::abs(corner[0])) / (4.0 * n);
        c.corner_deviation = std::max(c.corner_deviation, std::abs(p - predicted));
        ++c.corner_cells;
      }
    }
  return c;
}

struct ShapeMatch {
  int i = 0;
  int j = 0;
  double residual = 0.0;
};

/// Interior cells whose gradient is within tol of rho.
inline std::vector<ShapeMatch> matching_cells(const EmpiricalShape& s, Slope rho, double tol) {
  std::vector<ShapeMatch> out;
  const int N = s.N;
  for (int j = -N; j <= N; ++j)
    for (int i = -(N - std::abs(j)); i <= N - std::abs(j); ++i) {
      if (!s.has_gradient(i, j)) continue;
      const auto g = s.gradient(i, j);
      const double r = std::hypot(g[0] - rho.r1, g[1] - rho.r2);
      if (r < tol) out.push_back({i, j, r});
    }
  return out;
}

/// v = psi(x_w) - x_w . rho with x_w the global argmin of |grad psi - rho|.
/// With a coarser reference shape (typically order N/2) the difference of
/// the two estimates is the finite-size part of the error bar.
inline SpeedEstimate speed_limit_shape(const EmpiricalShape& s, Slope rho, const EmpiricalShape* reference = nullptr,
                                       double match_tol = 0.05) {
  const auto matches = matching_cells(s, rho, match_tol);
  if (matches.empty())
    throw NotResolved("no interior cell has gradient within " + std::to_string(match_tol) +
                      " of the slope at this N (slope too close to the Newton polygon boundary?)");
  double best = std::numeric_limits<double>::infinity();
  for (const auto& m : matches) best = std::min(best, m.residual);
  double cx = 0.0, cy = 0.0;
  for (const auto& m : matches) cx += m.i, cy += m.j;
  cx /= matches.size();
  cy /= matches.size();
  const ShapeMatch* pick = nullptr;
  for (const auto& m : matches)
    if (m.residual <= best + 1e-12 &&
        (!pick || std::hypot(m.i - cx, m.j - cy) < std::hypot(pick->i - cx, pick->j - cy)))
      pick = &m;
  SpeedEstimate out;
  out.rho = rho;
  out.method = SpeedMethod::LimitShape;
  out.N = s.N;
  out.samples = s.samples;
  out.x_w = s.x(pick->i, pick->j);
  out.v = s.psi(pick->i, pick->j) - out.x_w[0] * rho.r1 - out.x_w[1] * rho.r2;
  out.residual = pick->residual;
  out.standard_error = s.standard_error(pick->i, pick->j);
  for (const auto& m : matches) out.matches.push_back(s.x(m.i, m.j));
  // gradient mismatch moves v by at most residual times the cell size
  double bar = 3.0 * out.standard_error + out.residual * s.cell();
  if (reference) {
    const SpeedEstimate r = speed_limit_shape(*reference, rho, nullptr, match_tol);
    out.finite_size = std::abs(out.v - r.v);
    bar += out.finite_size + 3.0 * r.standard_error;
  }
  out.error_bar = bar;
  return out;
}

struct LocalQuadratic {
  double value = 0.0;
  std::array<double, 2> gradient{};
  Eigen::Matrix2d D2 = Eigen::Matrix2d::Zero();
  double rms = 0.0;  // residual of the fit
  int cells = 0;
};

/// Least-squares quadratic in x through psi over the faces within `radius`
/// (rescaled units) of face (i0, j0). Second differences of a noisy mean
/// shape are useless at desk-scale N; the fit averages over the disc.
inline LocalQuadratic fit_local_quadratic(const EmpiricalShape& s, int i0, int j0, double radius) {
  const int r = static_cast<int>(std::floor(radius / s.cell()));
  if (r < 2) throw NotResolved("fit radius below two cells");
  std::vector<std::array<double, 6>> rows;
  std::vector<double> rhs;
  for (int dj = -r; dj <= r; ++dj)
    for (int di = -r; di <= r; ++di) {
      if (di * di + dj * dj > r * r) continue;
      const int i = i0 + di, j = j0 + dj;
      if (std::abs(i) + std::abs(j) >= s.N) throw NotResolved("fit disc reaches the boundary of the diamond");
      const double dx = di * s.cell(), dy = dj * s.cell();
      rows.push_back({1.0, dx, dy, dx * dx, dx * dy, dy * dy});
      rhs.push_back(s.psi(i, j));
    }
  Eigen::MatrixXd A(rows.size(), 6);
  Eigen::VectorXd b(rows.size());
  for (std::size_t t = 0; t < rows.size(); ++t) {
    for (int c = 0; c < 6; ++c) A(t, c) = rows[t][c];
    b(t) = rhs[t];
  }
  const Eigen::VectorXd c = A.colPivHouseholderQr().solve(b);
  LocalQuadratic out;
  out.value = c(0);
  out.gradient = {c(1), c(2)};
  out.D2 << 2 * c(3), c(4), c(4), 2 * c(5);
  out.rms = std::sqrt((A * c - b).squaredNorm() / rows.size());
  out.cells = static_cast<int>(rows.size());
  return out;
}

/// D2 v = -(D2 psi)^{-1} at x_w(rho), from the grid alone.
inline Eigen::Matrix2d speed_hessian_from_shape(const EmpiricalShape& s, Slope rho, double match_tol = 0.05,
                                                double radius = 0.08) {
  const SpeedEstimate e = speed_limit_shape(s, rho, nullptr, match_tol);
  const int i = static_cast<int>(std::lround(e.x_w[0] / s.cell()));
  const int j = static_cast<int>(std::lround(e.x_w[1] / s.cell()));
  const Eigen::Matrix2d H = fit_local_quadratic(s, i, j, radius).D2;
  if (std::abs(H.determinant()) < 1e-12) throw NumericalFailure("limit-shape Hessian is singular at x_w");
  return -H.inverse();
}

struct Facet {
  std::vector<std::pair<int, int>> cells;
  double diameter = 0.0;  // in cells
  double v_min = 0.0;
  double v_max = 0.0;
  std::array<double, 2> x_first{};
  std::array<double, 2> x_far{};
};

/// Connected components (4-neighbour) of cells with |grad psi - rho| < tol,
/// largest first, with the spread of psi - x.rho over each.
inline std::vector<Facet> facets(const EmpiricalShape& s, Slope rho, double tol = 0.05) {
  const auto matches = matching_cells(s, rho, tol);
  std::map<std::pair<int, int>, int> label;
  for (const auto& m : matches) label[{m.i, m.j}] = -1;
  std::vector<Facet> out;
  for (auto& [start, lab] : label) {
    if (lab >= 0) continue;
    Facet f;
    std::queue<std::pair<int, int>> q;
    q.push(start);
    lab = static_cast<int>(out.size());
    while (!q.empty()) {
      const auto c = q.front();
      q.pop();
      f.cells.push_back(c);
      for (auto [di, dj] : std::array<std::pair<int, int>, 4>{{{1, 0}, {-1, 0}, {0, 1}, {0, -1}}}) {
        auto it = label.find({c.first + di, c.second + dj});
        if (it != label.end() && it->second < 0) {
          it->second = lab;
          q.push(it->first);
        }
      }
    }
    f.v_min = std::numeric_limits<double>::infinity();
    f.v_max = -f.v_min;
    for (const auto& [i, j] : f.cells) {
      const auto x = s.x(i, j);
      const double v = s.psi(i, j) - x[0] * rho.r1 - x[1] * rho.r2;
      f.v_min = std::min(f.v_min, v);
      f.v_max = std::max(f.v_max, v);
    }
    // diameter by brute force over the extreme cells of each direction
    std::vector<std::pair<int, int>> ext;
    auto pick = [&](auto key) {
      ext.push_back(*std::max_element(f.cells.begin(), f.cells.end(), [&](auto a, auto b) { return key(a) < key(b); }));
    };
    pick([](auto c) { return c.first; });
    pick([](auto c) { return -c.first; });
    pick([](auto c) { return c.second; });
    pick([](auto c) { return -c.second; });
    pick([](auto c) { return c.first + c.second; });
    pick([](auto c) { return -c.first - c.second; });
    pick([](auto c) { return c.first - c.second; });
    pick([](auto c) { return c.second - c.first; });
    for (const auto& a : ext)
      for (const auto& b : ext) {
        const double d = std::hypot(a.first - b.first, a.second - b.second);
        if (d >= f.diameter) {
          f.diameter = d;
          f.x_first = s.x(a.first, a.second);
          f.x_far = s.x(b.first, b.second);
        }
      }
    out.push_back(std::move(f));
  }
  std::sort(out.begin(), out.end(), [](const Facet& a, const Facet& b) { return a.cells.size() > b.cells.size(); });
  return out;
}

// ---------------------------------------------------------------------------
// Fluctuations

struct ModelFit {
  std::string name;
  double c = 0.0;
  double residual = 0.0;  // sum of squared residuals
};

struct FluctuationStats {
  std::array<double, 2> x{0.0, 0.0};
  int runs = 0;
  std::vector<double> mean;      // height units, index k = 0..N
  std::vector<double> variance;  // height units squared
  int k_from = 16;
  std::vector<ModelFit> fits;    // constant, log, linear
  std::string best;

  const ModelFit& fit(const std::string& name) const {
    for (const auto& f : fits)
      if (f.name == name) return f;
    throw InvalidArgument("unknown model " + name);
  }
};

/// Least-squares fits of Var(k) on [k_from, kmax] by c, c log k and c k.
inline std::vector<ModelFit> fit_growth_models(const std::vector<double>& variance, int k_from) {
  std::vector<ModelFit> out;
  for (const char* name : {"constant", "log", "linear"}) {
    auto basis = [name](int k) {
      const std::string n = name;
      return n == "constant" ? 1.0 : n == "log" ? std::log(static_cast<double>(k)) : static_cast<double>(k);
    };
    double num = 0.0, den = 0.0;
    for (int k = k_from; k < static_cast<int>(variance.size()); ++k) {
      num += basis(k) * variance[k];
      den += basis(k) * basis(k);
    }
    ModelFit f{name, den > 0 ? num / den : 0.0, 0.0};
    for (int k = k_from; k < static_cast<int>(variance.size()); ++k) {
      const double r = variance[k] - f.c * basis(k);
      f.residual += r * r;
    }
    out.push_back(f);
  }
  return out;
}

/// Height at the face nearest 2 n k x across Aztec growth time k, over
/// independent runs; Var(k) and the growth-model fits.
inline FluctuationStats fluctuation_stats(const PeriodicWeights& w0, std::array<double, 2> x, int N, int runs,
                                          std::uint64_t seed, unsigned threads = 1, int k_from = 16,
                                          const std::function<void(int)>& progress = {}) {
  if (runs < 2) throw InvalidArgument("need at least two runs");
  if (N < 1) throw InvalidArgument("N must be positive");
  const int n = w0.n();
  if (std::abs(x[0]) + std::abs(x[1]) > 1.0 / (2.0 * n)) throw InvalidArgument("tracked point outside the rescaled square");
  std::vector<std::vector<int>> series(static_cast<std::size_t>(runs));
  const Tickets root(seed);
  std::atomic<int> done{0};
  std::mutex progress_mutex;
  parallel_for(static_cast<std::size_t>(runs), threads, [&](std::size_t r) {
    std::vector<int> h(static_cast<std::size_t>(N) + 1, 0);
    grow_aztec(N, w0, root.child(r), [&](long long k, const DimerConfig&, const HeightField& hf) {
      int i = static_cast<int>(std::lround(2.0 * n * k * x[0]));
      int j = static_cast<int>(std::lround(2.0 * n * k * x[1]));
      while (std::abs(i) + std::abs(j) > k) {
        if (std::abs(i) >= std::abs(j)) i -= (i > 0) - (i < 0);
        else j -= (j > 0) - (j < 0);
      }
      h[k] = hf.at({i, j});
    });
    series[r] = std::move(h);
    const int d = ++done;
    if (progress) {
      std::lock_guard lock(progress_mutex);
      progress(d);
    }
  });
  FluctuationStats out;
  out.x = x;
  out.runs = runs;
  out.k_from = std::min(k_from, N);
  for (int k = 0; k <= N; ++k) {
    double m = 0.0;
    for (const auto& s : series) m += s[k] / 4.0;
    m /= runs;
    double v = 0.0;
    for (const auto& s : series) v += (s[k] / 4.0 - m) * (s[k] / 4.0 - m);
    out.mean.push_back(m);
    out.variance.push_back(v / (runs - 1));
  }
  out.fits = fit_growth_models(out.variance, out.k_from);
  out.best = std::min_element(out.fits.begin(), out.fits.end(), [](const ModelFit& a, const ModelFit& b) {
               return a.residual < b.residual;
             })->name;
  return out;
}

}  // namespace domino
