#pragma once
// Domino shuffling: deletion, sliding, creation and colour interchange, in
// Aztec growth mode (A_k -> A_{k+1}) and in a shrinking finite window.

#include <array>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "domino/error.hpp"
#include "domino/lattice.hpp"
#include "domino/tickets.hpp"
#include "domino/weights.hpp"

namespace domino {

/// Occupancy of the top, right, bottom and left edge of a face.
using FaceOccupancy = std::array<bool, 4>;

/// Local rule on an even face. Two parallel dimers are deleted, a single
/// dimer slides to the opposite edge, an empty face receives a vertical pair
/// iff ticket < b d / (a c + b d) and a horizontal pair otherwise.
inline FaceOccupancy apply_face_rule(const FaceOccupancy& before, double ticket, const FaceWeights& fw) {
  const int count = before[0] + before[1] + before[2] + before[3];
  if (count == 2) {
    if ((before[0] && before[2]) || (before[1] && before[3])) return {false, false, false, false};
  } else if (count == 1) {
    FaceOccupancy after{false, false, false, false};
    for (int s = 0; s < 4; ++s)
      if (before[s]) after[(s + 2) % 4] = true;
    return after;
  } else if (count == 0) {
    if (ticket < fw.b * fw.d / fw.delta()) return {false, true, false, true};
    return {true, false, true, false};
  }
  throw InvariantViolation("face carries dimers sharing a vertex");
}

/// Height increment in quarters at an even face: H_before + H_after - V_before - V_after.
inline int face_increment(const FaceOccupancy& before, const FaceOccupancy& after) {
  return before[0] + before[2] + after[0] + after[2] - before[1] - before[3] - after[1] - after[3];
}

inline constexpr std::array<Dir, 4> kFaceSides = {Dir::North, Dir::East, Dir::South, Dir::West};

/// Applies one shuffle to the even faces |i|+|j| <= k of an order-k Aztec
/// configuration (time k) and returns the order-(k+1) configuration.
inline DimerConfig aztec_shuffle_step(const DimerConfig& before, long long k, const PeriodicWeights& weights,
                                      const Tickets& tickets) {
  const Region& r = before.region();
  if (r.kind != RegionKind::Aztec || r.size != k) throw InvalidArgument("expected an Aztec configuration of order k");
  if (weights.time_parity() != mod2(k)) throw InvalidArgument("weights parity does not match the time index");
  const int kk = static_cast<int>(k);
  DimerConfig after(Region::aztec(kk + 1));
  auto claim = [&after](Vertex u, Vertex v) {
    if (after.dir(u) != Dir::None || after.dir(v) != Dir::None)
      throw InvariantViolation("shuffle assigned a vertex twice");
    after.place(u, v);
  };
  for (int j = -kk; j <= kk; ++j) {
    const int span = kk - std::abs(j);
    for (int i = -span; i <= span; ++i) {
      const FaceCoord f{i, j};
      if (!is_even(f, k)) continue;
      const FaceOccupancy occ = before.face_occupancy(f);
      const FaceOccupancy next = apply_face_rule(occ, tickets.draw(i, j, k), weights.tuple(f));
      const auto edges = face_edges(f);
      for (int s = 0; s < 4; ++s)
        if (next[s]) claim(edges[s].origin, edges[s].far_end());
    }
  }
  return after;
}

/// Heights after one Aztec step: odd faces keep their value, even faces
/// move by the H/V increment, the new outer ring follows from the gradient.
inline HeightField update_height(const HeightField& h, const DimerConfig& before, const DimerConfig& after, long long k) {
  const int kk = static_cast<int>(k);
  if (before.region().kind != RegionKind::Aztec || before.region().size != kk ||
      after.region().kind != RegionKind::Aztec || after.region().size != kk + 1 || !(h.region() == before.region()))
    throw InvalidArgument("update_height needs consecutive Aztec states");
  HeightField out(after.region(), {-(kk + 1), 0}, kk + 1);
  for (int j = -kk; j <= kk; ++j) {
    const int span = kk - std::abs(j);
    for (int i = -span; i <= span; ++i) {
      const FaceCoord f{i, j};
      int value = h.at(f);
      if (is_even(f, k)) value += face_increment(before.face_occupancy(f), after.face_occupancy(f));
      out.set(f, value);
    }
  }
  const int ring = kk + 1;
  for (int j = -ring; j <= ring; ++j) {
    const int span = ring - std::abs(j);
    for (int i : {-span, span}) {
      const FaceCoord g{i, j};
      if (out.has(g)) continue;
      // step from an inner neighbour towards g
      const Dir d = i > 0 ? Dir::East : i < 0 ? Dir::West : (j > 0 ? Dir::North : Dir::South);
      const Dir back = opposite(d);
      const FaceCoord f = step(g, back);
      out.set(g, out.at(f) + crossing_increment(after.occupied(crossed_edge(f, d)), crossing_sign(f, d, k + 1)));
    }
  }
  return out;
}

struct AztecSample {
  DimerConfig config;
  HeightField heights;
  PeriodicWeights weights;  // the target weights, laid out at parity N mod 2
};

/// Forward growth from the empty diamond with w_{k+1} = normalize(spider(w_k)).
/// The observer sees every state (k, config, heights) for k = 0..N.
/// The final configuration is distributed as the dimer measure of the
/// time-N weights w_N on A_N.
inline AztecSample grow_aztec(
    int N, const PeriodicWeights& w0, const Tickets& tickets,
    const std::function<void(long long, const DimerConfig&, const HeightField&)>& observer = {}) {
  if (N < 0) throw InvalidArgument("order must be nonnegative");
  PeriodicWeights w = gauge_normalize(reindex_parity(w0, 0));
  DimerConfig config(Region::aztec(0));
  HeightField h = aztec_height(config, 0);
  if (observer) observer(0, config, h);
  for (long long k = 0; k < N; ++k) {
    DimerConfig next = aztec_shuffle_step(config, k, w, tickets);
    h = update_height(h, config, next, k);
    config = std::move(next);
    w = gauge_normalize(spider_step(w));
    if (observer) observer(k + 1, config, h);
  }
  return {std::move(config), std::move(h), std::move(w)};
}

/// Exact sample of the dimer measure on A_N with edge weights w0: the weight
/// chain is built backwards with the inverse spider move so that the last
/// step lands on w0 itself.
inline AztecSample sample_aztec(int N, const PeriodicWeights& w0, std::uint64_t seed) {
  if (N < 1) throw InvalidArgument("sample_aztec needs N >= 1");
  if (N > 20000) throw InvalidArgument("N too large: memory grows as N^2 and work as N^3");
  w0.validate();
  std::vector<PeriodicWeights> chain(static_cast<std::size_t>(N) + 1);
  chain[N] = reindex_parity(w0, N % 2);
  for (int j = N - 1; j >= 0; --j) chain[j] = gauge_normalize(inverse_spider_step(chain[j + 1]));
  const Tickets tickets(seed);
  DimerConfig config(Region::aztec(0));
  HeightField h = aztec_height(config, 0);
  for (long long k = 0; k < N; ++k) {
    DimerConfig next = aztec_shuffle_step(config, k, chain[k], tickets);
    h = update_height(h, config, next, k);
    config = std::move(next);
  }
  return {std::move(config), std::move(h), chain[N]};
}

/// Occupancy of an edge read off a height field: occupied iff the step
/// across it is +3/4 times the crossing sign.
inline bool occupied_from_heights(int from, int to, int sign) {
  const int delta = to - from;
  if (delta == 3 * sign) return true;
  if (delta == -sign) return false;
  throw InvariantViolation("height step is not a legal gradient");
}

inline FaceOccupancy occupancy_from_heights(const HeightField& h, FaceCoord f, long long k) {
  FaceOccupancy occ{};
  const int base = h.at(f);
  for (int s = 0; s < 4; ++s) {
    const Dir d = kFaceSides[s];
    occ[s] = occupied_from_heights(base, h.at(step(f, d)), crossing_sign(f, d, k));
  }
  return occ;
}

/// Window state: heights on the window faces, trusted on the l1 ball of the
/// current radius around face (0,0).
struct WindowState {
  long long k = 0;
  int radius = 0;
  HeightField heights;
};

inline WindowState make_window_state(const DimerConfig& initial) {
  const Region& r = initial.region();
  if (r.kind != RegionKind::Window) throw InvalidArgument("expected a window configuration");
  if (!validate_matching(initial)) throw InvalidArgument("initial window configuration is not a matching");
  return {0, r.size, height_field(initial, 0, {0, 0}, 0)};
}

/// One shuffle of the trusted ball; the radius shrinks by one.
inline void window_step(WindowState& s, const PeriodicWeights& weights, const Tickets& tickets) {
  if (s.radius < 1) throw InvalidArgument("window exhausted: time exceeds the locality budget");
  if (weights.time_parity() != mod2(s.k)) throw InvalidArgument("weights parity does not match the time index");
  const int inner = s.radius - 1;
  // even faces only read odd neighbours, which never change: update in place
  for (int j = -inner; j <= inner; ++j) {
    const int span = inner - std::abs(j);
    for (int i = -span; i <= span; ++i) {
      const FaceCoord f{i, j};
      if (!is_even(f, s.k)) continue;
      const FaceOccupancy occ = occupancy_from_heights(s.heights, f, s.k);
      const FaceOccupancy next = apply_face_rule(occ, tickets.draw(i, j, s.k), weights.tuple(f));
      s.heights.set(f, s.heights.at(f) + face_increment(occ, next));
    }
  }
  for (int j = -s.radius; j <= s.radius; ++j) {
    const int span = s.radius - std::abs(j);
    for (int i : {-span, span}) s.heights.erase({i, j});
  }
  s.radius = inner;
  ++s.k;
}

/// Center heights at times 0..k_max. Identical to the infinite-lattice
/// dynamics with the same tickets as long as k_max <= radius - 1.
inline std::vector<int> window_evolve(WindowState state, const PeriodicWeights& w0, int k_max, const Tickets& tickets) {
  if (k_max < 0 || k_max > state.radius - 1)
    throw InvalidArgument("k_max = " + std::to_string(k_max) + " exceeds the locality budget " +
                          std::to_string(state.radius - 1));
  std::vector<int> center{state.heights.at({0, 0})};
  PeriodicWeights w = gauge_normalize(reindex_parity(w0, mod2(state.k)));
  for (int t = 0; t < k_max; ++t) {
    window_step(state, w, tickets);
    center.push_back(state.heights.at({0, 0}));
    w = gauge_normalize(spider_step(w));
  }
  return center;
}

inline std::vector<int> window_evolve(const DimerConfig& initial, const PeriodicWeights& w0, int k_max,
                                      const Tickets& tickets) {
  return window_evolve(make_window_state(initial), w0, k_max, tickets);
}

/// Brickwork of horizontal dimers (x even) filling a window.
inline DimerConfig window_brickwork(int m) {
  DimerConfig c(Region::window(m));
  for (int y = -m; y <= m + 1; ++y)
    for (int x = -m; x <= m + 1; x += 2) c.place({x, y}, {x + 1, y});
  return c;
}

/// Raises (delta = +4) or lowers (delta = -4) the height at f if every
/// gradient to an existing neighbour stays legal; returns whether it did.
inline bool try_flip(HeightField& h, FaceCoord f, int delta, long long k) {
  if (!h.has(f)) return false;
  const int base = h.at(f) + delta;
  for (Dir d : kDirs) {
    const FaceCoord g = step(f, d);
    if (!h.has(g)) continue;
    const int sign = crossing_sign(f, d, k);
    const int diff = h.at(g) - base;
    if (diff != 3 * sign && diff != -sign) return false;
  }
  h.set(f, base);
  return true;
}

/// Matching induced by a height field on the interior vertices of its window;
/// outer-ring vertices whose dimer leaves the window stay unassigned.
inline DimerConfig config_from_heights(const HeightField& h, long long k) {
  const Region r = h.region();
  if (r.kind != RegionKind::Window) throw InvalidArgument("config_from_heights expects a window");
  DimerConfig c(r);
  for (const FaceCoord f : h.faces())
    for (Dir d : {Dir::East, Dir::North}) {
      const FaceCoord g = step(f, d);
      if (!h.has(g)) continue;
      if (occupied_from_heights(h.at(f), h.at(g), crossing_sign(f, d, k))) {
        const EdgeId e = crossed_edge(f, d);
        c.place(e.origin, e.far_end());
      }
    }
  return c;
}

}  // namespace domino
