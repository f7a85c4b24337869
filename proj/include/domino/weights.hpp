#pragma once
// 2n-periodic edge weights, the spider move and gauge bookkeeping.
//
// A weighting at time parity p stores, for every face (i, j) of the 2n x 2n
// fundamental domain with i + j == p (mod 2), the weights (a, b, c, d) of its
// top, right, bottom and left edges. Every torus edge borders exactly one
// such face, so the tuples cover the edge set once.

#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "domino/error.hpp"
#include "domino/lattice.hpp"
#include "domino/tickets.hpp"

namespace domino {

struct FaceWeights {
  double a = 1.0;
  double b = 1.0;
  double c = 1.0;
  double d = 1.0;

  double delta() const { return a * c + b * d; }
  double& operator[](int slot) { return slot == 0 ? a : slot == 1 ? b : slot == 2 ? c : d; }
  double operator[](int slot) const { return slot == 0 ? a : slot == 1 ? b : slot == 2 ? c : d; }
  bool operator==(const FaceWeights&) const = default;
};

class PeriodicWeights {
 public:
  PeriodicWeights() = default;
  PeriodicWeights(int n, int time_parity) : n_(n), parity_(time_parity), faces_(static_cast<std::size_t>(4 * n * n)) {
    if (n < 1) throw InvalidArgument("period n must be positive");
    if (time_parity != 0 && time_parity != 1) throw InvalidArgument("time parity must be 0 or 1");
  }

  static PeriodicWeights uniform(int n, int time_parity = 0, double value = 1.0) {
    PeriodicWeights w(n, time_parity);
    for (auto f : w.stored_faces()) w.set_tuple(f, {value, value, value, value});
    return w;
  }

  /// Log-uniform weights in [lo, hi], reproducible from the seed alone.
  static PeriodicWeights random(int n, std::uint64_t seed, double lo = 0.5, double hi = 2.0, int time_parity = 0) {
    if (!(lo > 0.0) || !(hi >= lo)) throw InvalidArgument("random weight range must be positive");
    PeriodicWeights w(n, time_parity);
    const Tickets t(seed);
    for (auto f : w.stored_faces()) {
      FaceWeights fw;
      for (int s = 0; s < 4; ++s) fw[s] = lo * std::exp(std::log(hi / lo) * t.draw(f.i, f.j, s));
      w.set_tuple(f, fw);
    }
    return w;
  }

  int n() const { return n_; }
  int period() const { return 2 * n_; }
  int time_parity() const { return parity_; }

  FaceCoord reduce(FaceCoord f) const { return {floor_mod(f.i, period()), floor_mod(f.j, period())}; }
  bool is_stored(FaceCoord f) const { return mod2(static_cast<long long>(f.i) + f.j - parity_) == 0; }

  /// Stored faces of the fundamental domain, row-major.
  std::vector<FaceCoord> stored_faces() const {
    std::vector<FaceCoord> out;
    for (int j = 0; j < period(); ++j)
      for (int i = 0; i < period(); ++i)
        if (is_stored({i, j})) out.push_back({i, j});
    return out;
  }

  /// Tuple of an even face, read periodically.
  const FaceWeights& tuple(FaceCoord f) const {
    if (!is_stored(f)) throw InvalidArgument("face is odd for this time parity");
    const FaceCoord r = reduce(f);
    return faces_[static_cast<std::size_t>(r.j) * period() + r.i];
  }

  void set_tuple(FaceCoord f, const FaceWeights& fw) {
    if (!is_stored(f)) throw InvalidArgument("face is odd for this time parity");
    const FaceCoord r = reduce(f);
    faces_[static_cast<std::size_t>(r.j) * period() + r.i] = fw;
  }

  /// Face and slot (0..3 = a..d) holding the weight of an edge.
  std::pair<FaceCoord, int> edge_slot(const EdgeId& e) const {
    const int x = e.origin.x;
    const int y = e.origin.y;
    const bool own = mod2(static_cast<long long>(x) + y - parity_) == 0;
    if (e.orientation == Orientation::Horizontal) return own ? std::pair{FaceCoord{x, y}, 2} : std::pair{FaceCoord{x, y - 1}, 0};
    return own ? std::pair{FaceCoord{x, y}, 3} : std::pair{FaceCoord{x - 1, y}, 1};
  }

  double edge_weight(const EdgeId& e) const {
    const auto [f, slot] = edge_slot(e);
    return tuple(f)[slot];
  }

  void set_edge_weight(const EdgeId& e, double value) {
    const auto [f, slot] = edge_slot(e);
    FaceWeights fw = tuple(f);
    fw[slot] = value;
    set_tuple(f, fw);
  }

  /// Throws unless every stored weight is positive and finite.
  void validate() const {
    for (auto f : stored_faces()) {
      const FaceWeights& fw = tuple(f);
      for (int s = 0; s < 4; ++s)
        if (!(fw[s] > 0.0) || !std::isfinite(fw[s]))
          throw InvalidArgument("weights must be positive and finite (face " + std::to_string(f.i) + "," +
                                std::to_string(f.j) + ")");
    }
  }

  bool operator==(const PeriodicWeights&) const = default;

 private:
  int n_ = 1;
  int parity_ = 0;
  std::vector<FaceWeights> faces_;
};

/// The 8n^2 edges of the torus, as (vertex, east) and (vertex, north) pairs.
inline std::vector<EdgeId> torus_edges(int n) {
  std::vector<EdgeId> out;
  for (int y = 0; y < 2 * n; ++y)
    for (int x = 0; x < 2 * n; ++x) {
      out.push_back({{x, y}, Orientation::Horizontal});
      out.push_back({{x, y}, Orientation::Vertical});
    }
  return out;
}

/// One deterministic weight update; output lives at the opposite parity.
inline PeriodicWeights spider_step(const PeriodicWeights& w) {
  w.validate();
  PeriodicWeights out(w.n(), 1 - w.time_parity());
  for (auto f : out.stored_faces()) {
    const FaceWeights& up = w.tuple({f.i, f.j + 1});
    const FaceWeights& right = w.tuple({f.i + 1, f.j});
    const FaceWeights& down = w.tuple({f.i, f.j - 1});
    const FaceWeights& left = w.tuple({f.i - 1, f.j});
    out.set_tuple(f, {up.a / up.delta(), right.b / right.delta(), down.c / down.delta(), left.d / left.delta()});
  }
  return out;
}

/// Exact inverse of spider_step.
inline PeriodicWeights inverse_spider_step(const PeriodicWeights& w) {
  w.validate();
  PeriodicWeights out(w.n(), 1 - w.time_parity());
  for (auto f : out.stored_faces()) {
    const double alpha = w.tuple({f.i, f.j - 1}).a;
    const double beta = w.tuple({f.i - 1, f.j}).b;
    const double gamma = w.tuple({f.i, f.j + 1}).c;
    const double delta = w.tuple({f.i + 1, f.j}).d;
    const double s = alpha * gamma + beta * delta;
    out.set_tuple(f, {alpha / s, beta / s, gamma / s, delta / s});
  }
  return out;
}

/// Same edge weights, stored around the faces of the other parity.
inline PeriodicWeights reindex_parity(const PeriodicWeights& w, int time_parity) {
  if (time_parity == w.time_parity()) return w;
  PeriodicWeights out(w.n(), time_parity);
  for (const EdgeId& e : torus_edges(w.n())) out.set_edge_weight(e, w.edge_weight(e));
  return out;
}

struct CreationProbabilities {
  double horizontal = 0.5;
  double vertical = 0.5;
};

inline CreationProbabilities creation_probabilities(const FaceWeights& fw) {
  const double delta = fw.delta();
  return {fw.a * fw.c / delta, fw.b * fw.d / delta};
}

inline CreationProbabilities creation_probabilities(const PeriodicWeights& w, FaceCoord face) {
  if (!w.is_stored(face)) throw InvalidArgument("creation needs a face that is even at the weights' time parity");
  return creation_probabilities(w.tuple(face));
}

struct GaugeInvariants {
  std::map<FaceCoord, double> face_weights;
  double w1 = 1.0;
  double w2 = 1.0;
};

/// Alternating product e1/e2 * e3/e4 around each face, e1 the clockwise edge
/// oriented white to black; W1 (W2) is the geometric mean over all rows
/// (columns) of the alternating product along that straight cycle.
inline GaugeInvariants gauge_invariants(const PeriodicWeights& w) {
  w.validate();
  GaugeInvariants g;
  const int L = w.period();
  const int p = w.time_parity();
  for (int j = 0; j < L; ++j)
    for (int i = 0; i < L; ++i) {
      const FaceCoord f{i, j};
      const auto e = face_edges(f);
      const double a = w.edge_weight(e[0]);
      const double b = w.edge_weight(e[1]);
      const double c = w.edge_weight(e[2]);
      const double d = w.edge_weight(e[3]);
      g.face_weights[f] = is_even(f, p) ? (b * d) / (a * c) : (a * c) / (b * d);
    }
  double log_w1 = 0.0;
  double log_w2 = 0.0;
  for (int r = 0; r < L; ++r)
    for (int t = 0; t < L; ++t) {
      const double lh = std::log(w.edge_weight({{t, r}, Orientation::Horizontal}));
      log_w1 += is_white({t, r}, p) ? lh : -lh;
      const double lv = std::log(w.edge_weight({{r, t}, Orientation::Vertical}));
      log_w2 += is_white({r, t}, p) ? lv : -lv;
    }
  g.w1 = std::exp(log_w1 / L);
  g.w2 = std::exp(log_w2 / L);
  return g;
}

/// Multiply the weights of the four edges at vertex v by factor.
inline PeriodicWeights scale_vertex(const PeriodicWeights& w, Vertex v, double factor) {
  PeriodicWeights out = w;
  const int L = w.period();
  const Vertex r{floor_mod(v.x, L), floor_mod(v.y, L)};
  const std::array<EdgeId, 4> edges = {EdgeId{r, Orientation::Horizontal}, EdgeId{{r.x - 1, r.y}, Orientation::Horizontal},
                                       EdgeId{r, Orientation::Vertical}, EdgeId{{r.x, r.y - 1}, Orientation::Vertical}};
  for (const EdgeId& e : edges) out.set_edge_weight(e, out.edge_weight(e) * factor);
  return out;
}

/// Gauge representative with geometric mean 1 of the four weights at every
/// vertex. Solves (4 I + A) g = -sum(log w) for the log vertex factors; the
/// kernel (the bipartite sign vector) acts trivially on edges, and the
/// minimum-norm solution is used.
inline PeriodicWeights gauge_normalize(const PeriodicWeights& w) {
  w.validate();
  const int L = w.period();
  const int nv = L * L;
  auto idx = [L](int x, int y) { return floor_mod(y, L) * L + floor_mod(x, L); };
  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(nv, nv);
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(nv);
  const auto edges = torus_edges(w.n());
  for (const EdgeId& e : edges) {
    const Vertex u = e.origin;
    const Vertex v = e.far_end();
    const int iu = idx(u.x, u.y);
    const int iv = idx(v.x, v.y);
    const double lw = std::log(w.edge_weight(e));
    A(iu, iu) += 1.0;
    A(iv, iv) += 1.0;
    A(iu, iv) += 1.0;
    A(iv, iu) += 1.0;
    rhs(iu) -= lw;
    rhs(iv) -= lw;
  }
  const Eigen::VectorXd g = A.completeOrthogonalDecomposition().solve(rhs);
  PeriodicWeights out(w.n(), w.time_parity());
  for (const EdgeId& e : edges) {
    const Vertex v = e.far_end();
    out.set_edge_weight(e, w.edge_weight(e) * std::exp(g(idx(e.origin.x, e.origin.y)) + g(idx(v.x, v.y))));
  }
  return out;
}

/// Weights w_0, ..., w_steps with w_{k+1} = normalize(spider_step(w_k)).
inline std::vector<PeriodicWeights> weight_trajectory(const PeriodicWeights& w0, int steps, bool normalize = true) {
  std::vector<PeriodicWeights> out;
  out.reserve(static_cast<std::size_t>(steps) + 1);
  out.push_back(w0);
  for (int k = 0; k < steps; ++k) {
    PeriodicWeights next = spider_step(out.back());
    out.push_back(normalize ? gauge_normalize(next) : next);
  }
  return out;
}

}  // namespace domino
