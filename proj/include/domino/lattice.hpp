#pragma once
// Square-lattice geometry, dimer configurations and height functions.
//
// Conventions:
//   * vertex (x, y) is white at time k iff x + y + k is even;
//   * face (i, j) has bottom-left vertex (i, j) and is even at time k iff
//     i + j == k (mod 2);
//   * heights are integers in units of 1/4.

#include <algorithm>
#include <array>
#include <compare>
#include <cstdint>
#include <cstdlib>
#include <deque>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "domino/error.hpp"

namespace domino {

inline int mod2(long long v) { return static_cast<int>(((v % 2) + 2) % 2); }

inline int floor_div(int a, int b) {
  int q = a / b;
  if ((a % b != 0) && ((a < 0) != (b < 0))) --q;
  return q;
}

inline int floor_mod(int a, int b) { return a - b * floor_div(a, b); }

struct Vertex {
  int x = 0;
  int y = 0;
  auto operator<=>(const Vertex&) const = default;
};

struct FaceCoord {
  int i = 0;
  int j = 0;
  auto operator<=>(const FaceCoord&) const = default;
};

inline bool is_white(Vertex v, long long k) { return mod2(static_cast<long long>(v.x) + v.y + k) == 0; }
inline bool is_even(FaceCoord f, long long k) { return mod2(static_cast<long long>(f.i) + f.j - k) == 0; }
inline int l1_norm(FaceCoord f) { return std::abs(f.i) + std::abs(f.j); }

enum class Dir : std::uint8_t { None = 0, North, East, South, West };

inline constexpr std::array<Dir, 4> kDirs = {Dir::North, Dir::East, Dir::South, Dir::West};

inline Dir opposite(Dir d) {
  switch (d) {
    case Dir::North: return Dir::South;
    case Dir::South: return Dir::North;
    case Dir::East: return Dir::West;
    case Dir::West: return Dir::East;
    default: return Dir::None;
  }
}

inline Vertex step(Vertex v, Dir d) {
  switch (d) {
    case Dir::North: return {v.x, v.y + 1};
    case Dir::South: return {v.x, v.y - 1};
    case Dir::East: return {v.x + 1, v.y};
    case Dir::West: return {v.x - 1, v.y};
    default: return v;
  }
}

inline FaceCoord step(FaceCoord f, Dir d) {
  switch (d) {
    case Dir::North: return {f.i, f.j + 1};
    case Dir::South: return {f.i, f.j - 1};
    case Dir::East: return {f.i + 1, f.j};
    case Dir::West: return {f.i - 1, f.j};
    default: return f;
  }
}

inline char dir_char(Dir d) {
  switch (d) {
    case Dir::North: return 'N';
    case Dir::East: return 'E';
    case Dir::South: return 'S';
    case Dir::West: return 'W';
    default: return '.';
  }
}

inline Dir dir_from_char(char c) {
  switch (c) {
    case 'N': return Dir::North;
    case 'E': return Dir::East;
    case 'S': return Dir::South;
    case 'W': return Dir::West;
    case '.': return Dir::None;
    default: throw InvalidArgument(std::string("bad direction character '") + c + "'");
  }
}

enum class Orientation : std::uint8_t { Horizontal, Vertical };

/// A lattice edge, identified by its left (horizontal) or bottom (vertical) endpoint.
struct EdgeId {
  Vertex origin;
  Orientation orientation = Orientation::Horizontal;

  Vertex far_end() const {
    return orientation == Orientation::Horizontal ? Vertex{origin.x + 1, origin.y}
                                                  : Vertex{origin.x, origin.y + 1};
  }
  Vertex white_end(long long k) const { return is_white(origin, k) ? origin : far_end(); }
  Vertex black_end(long long k) const { return is_white(origin, k) ? far_end() : origin; }

  static EdgeId between(Vertex u, Vertex v) {
    if (u.y == v.y && std::abs(u.x - v.x) == 1) return {u.x < v.x ? u : v, Orientation::Horizontal};
    if (u.x == v.x && std::abs(u.y - v.y) == 1) return {u.y < v.y ? u : v, Orientation::Vertical};
    throw InvalidArgument("vertices are not lattice neighbours");
  }

  auto operator<=>(const EdgeId&) const = default;
};

/// The four boundary edges of a face, clockwise from the top (a, b, c, d).
inline std::array<EdgeId, 4> face_edges(FaceCoord f) {
  return {EdgeId{{f.i, f.j + 1}, Orientation::Horizontal}, EdgeId{{f.i + 1, f.j}, Orientation::Vertical},
          EdgeId{{f.i, f.j}, Orientation::Horizontal}, EdgeId{{f.i, f.j}, Orientation::Vertical}};
}

enum class RegionKind : std::uint8_t { Aztec, Window, Torus };

/// Finite region of the square lattice. Aztec: order N diamond
/// |x - 1/2| + |y - 1/2| <= N. Window: vertices [-M, M+1]^2 around face (0,0),
/// faces [-M, M]^2. Torus: vertices [0, L)^2 with periodic identification.
struct Region {
  RegionKind kind = RegionKind::Aztec;
  int size = 0;

  static Region aztec(int n) { return {RegionKind::Aztec, n}; }
  static Region window(int m) { return {RegionKind::Window, m}; }
  static Region torus(int side) { return {RegionKind::Torus, side}; }

  bool operator==(const Region&) const = default;

  int x_min() const { return kind == RegionKind::Aztec ? 1 - size : kind == RegionKind::Window ? -size : 0; }
  int x_max() const { return kind == RegionKind::Aztec ? size : kind == RegionKind::Window ? size + 1 : size - 1; }
  int width() const { return x_max() - x_min() + 1; }

  bool contains(Vertex v) const {
    switch (kind) {
      case RegionKind::Aztec: return std::abs(2 * v.x - 1) + std::abs(2 * v.y - 1) <= 2 * size;
      case RegionKind::Window: return v.x >= -size && v.x <= size + 1 && v.y >= -size && v.y <= size + 1;
      case RegionKind::Torus: return v.x >= 0 && v.x < size && v.y >= 0 && v.y < size;
    }
    return false;
  }

  /// Window vertices on the outer ring may be matched across the boundary.
  bool is_interior(Vertex v) const {
    if (kind != RegionKind::Window) return contains(v);
    return v.x > -size && v.x < size + 1 && v.y > -size && v.y < size + 1;
  }

  Vertex wrap(Vertex v) const {
    if (kind != RegionKind::Torus) return v;
    return {floor_mod(v.x, size), floor_mod(v.y, size)};
  }

  /// Faces carrying a height: Aztec interior faces plus the outer ring F+_N;
  /// every face of a window.
  bool has_face(FaceCoord f) const {
    switch (kind) {
      case RegionKind::Aztec: return l1_norm(f) <= size;
      case RegionKind::Window: return std::abs(f.i) <= size && std::abs(f.j) <= size;
      case RegionKind::Torus: return false;
    }
    return false;
  }

  int face_radius() const { return size; }
};

/// Perfect matching of a region, stored as a per-vertex match direction.
class DimerConfig {
 public:
  DimerConfig() = default;
  explicit DimerConfig(Region region)
      : region_(region), dirs_(static_cast<std::size_t>(region.width()) * region.width(), Dir::None) {
    if (region.size < 0 || (region.kind == RegionKind::Torus && region.size % 2 != 0))
      throw InvalidArgument("malformed region descriptor");
  }

  const Region& region() const { return region_; }

  Dir dir(Vertex v) const {
    v = region_.wrap(v);
    if (!region_.contains(v)) return Dir::None;
    return dirs_[index(v)];
  }

  void set_dir(Vertex v, Dir d) {
    v = region_.wrap(v);
    if (!region_.contains(v)) throw InvalidArgument("vertex outside region");
    dirs_[index(v)] = d;
  }

  /// Place a dimer on the edge u-v (both ends updated).
  void place(Vertex u, Vertex v) {
    EdgeId::between(u, v);
    const Dir d = u.x < v.x ? Dir::East : u.x > v.x ? Dir::West : u.y < v.y ? Dir::North : Dir::South;
    if (region_.contains(region_.wrap(u))) set_dir(u, d);
    if (region_.contains(region_.wrap(v))) set_dir(v, opposite(d));
  }

  bool occupied(const EdgeId& e) const {
    const Dir d = e.orientation == Orientation::Horizontal ? Dir::East : Dir::North;
    if (region_.contains(region_.wrap(e.origin))) return dir(e.origin) == d;
    const Vertex f = e.far_end();
    if (region_.contains(region_.wrap(f))) return dir(f) == opposite(d);
    return false;
  }

  /// Occupancy of the four boundary edges of a face, clockwise from the top.
  std::array<bool, 4> face_occupancy(FaceCoord f) const {
    const auto edges = face_edges(f);
    return {occupied(edges[0]), occupied(edges[1]), occupied(edges[2]), occupied(edges[3])};
  }

  std::vector<EdgeId> dimers() const {
    std::vector<EdgeId> out;
    for (int y = region_.x_min(); y <= region_.x_max(); ++y)
      for (int x = region_.x_min(); x <= region_.x_max(); ++x) {
        const Vertex v{x, y};
        if (!region_.contains(v)) continue;
        const Dir d = dirs_[index(v)];
        if (d == Dir::East) out.push_back({v, Orientation::Horizontal});
        else if (d == Dir::North) out.push_back({v, Orientation::Vertical});
        else if ((d == Dir::West || d == Dir::South) && !region_.contains(region_.wrap(step(v, d))))
          out.push_back(EdgeId::between(v, step(v, d)));
        else if (region_.kind == RegionKind::Torus && (d == Dir::West || d == Dir::South) &&
                 ((d == Dir::West && x == 0) || (d == Dir::South && y == 0)))
          out.push_back(EdgeId::between(v, step(v, d)));
      }
    return out;
  }

  bool operator==(const DimerConfig&) const = default;

 private:
  std::size_t index(Vertex v) const {
    return static_cast<std::size_t>(v.y - region_.x_min()) * region_.width() + (v.x - region_.x_min());
  }

  Region region_{};
  std::vector<Dir> dirs_;
};

/// True iff the configuration is a perfect matching of its region
/// (window: every interior vertex matched, outer ring may point outside).
inline bool validate_matching(const DimerConfig& config) {
  const Region& r = config.region();
  for (int y = r.x_min(); y <= r.x_max(); ++y)
    for (int x = r.x_min(); x <= r.x_max(); ++x) {
      const Vertex v{x, y};
      if (!r.contains(v)) continue;
      const Dir d = config.dir(v);
      if (d == Dir::None) {
        if (r.is_interior(v)) return false;
        continue;
      }
      const Vertex u = r.wrap(step(v, d));
      if (!r.contains(u)) {
        if (r.kind != RegionKind::Window || r.is_interior(v)) return false;
        continue;
      }
      if (config.dir(u) != opposite(d)) return false;
    }
  return true;
}

/// Sign of the crossed edge when stepping from face f towards d at time k:
/// +1 iff the white endpoint lies on the right of the direction of motion.
inline int crossing_sign(FaceCoord f, Dir d, long long k) {
  Vertex right{};
  switch (d) {
    case Dir::East: right = {f.i + 1, f.j}; break;
    case Dir::West: right = {f.i, f.j + 1}; break;
    case Dir::North: right = {f.i + 1, f.j + 1}; break;
    case Dir::South: right = {f.i, f.j}; break;
    default: throw InvalidArgument("crossing needs a direction");
  }
  return is_white(right, k) ? 1 : -1;
}

/// Edge crossed when stepping from face f towards d.
inline EdgeId crossed_edge(FaceCoord f, Dir d) {
  switch (d) {
    case Dir::East: return {{f.i + 1, f.j}, Orientation::Vertical};
    case Dir::West: return {{f.i, f.j}, Orientation::Vertical};
    case Dir::North: return {{f.i, f.j + 1}, Orientation::Horizontal};
    case Dir::South: return {{f.i, f.j}, Orientation::Horizontal};
    default: throw InvalidArgument("crossing needs a direction");
  }
}

/// Height increment in quarters: sigma_e * (4 * 1{e occupied} - 1).
inline int crossing_increment(bool occupied, int sign) { return sign * (occupied ? 3 : -1); }

inline constexpr int kNoHeight = std::numeric_limits<int>::min();

/// Heights in quarter units on the faces of a region.
class HeightField {
 public:
  HeightField() = default;
  HeightField(Region region, FaceCoord anchor, int anchor_quarters)
      : region_(region),
        anchor_(anchor),
        anchor_value_(anchor_quarters),
        radius_(region.face_radius()),
        values_(static_cast<std::size_t>(2 * radius_ + 1) * (2 * radius_ + 1), kNoHeight) {}

  const Region& region() const { return region_; }
  FaceCoord anchor() const { return anchor_; }
  int anchor_value() const { return anchor_value_; }
  int radius() const { return radius_; }

  bool in_box(FaceCoord f) const { return std::abs(f.i) <= radius_ && std::abs(f.j) <= radius_; }
  bool has(FaceCoord f) const { return in_box(f) && values_[index(f)] != kNoHeight; }

  int at(FaceCoord f) const {
    if (!has(f)) throw InvalidArgument("no height at face (" + std::to_string(f.i) + "," + std::to_string(f.j) + ")");
    return values_[index(f)];
  }
  std::optional<int> get(FaceCoord f) const {
    if (!has(f)) return std::nullopt;
    return values_[index(f)];
  }
  void set(FaceCoord f, int quarters) {
    if (!in_box(f)) throw InvalidArgument("face outside height box");
    values_[index(f)] = quarters;
  }
  void erase(FaceCoord f) {
    if (in_box(f)) values_[index(f)] = kNoHeight;
  }

  /// Faces carrying a height, row-major from the bottom-left.
  std::vector<FaceCoord> faces() const {
    std::vector<FaceCoord> out;
    for (int j = -radius_; j <= radius_; ++j)
      for (int i = -radius_; i <= radius_; ++i)
        if (values_[index({i, j})] != kNoHeight) out.push_back({i, j});
    return out;
  }

  bool operator==(const HeightField&) const = default;

 private:
  std::size_t index(FaceCoord f) const {
    return static_cast<std::size_t>(f.j + radius_) * (2 * radius_ + 1) + (f.i + radius_);
  }

  Region region_{};
  FaceCoord anchor_{};
  int anchor_value_ = 0;
  int radius_ = 0;
  std::vector<int> values_;
};

/// Height of every face of the region, fixed to anchor_quarters at the anchor.
/// Colours are those of time k. Breadth-first over adjacent faces; the result
/// does not depend on the traversal for a valid matching.
inline HeightField height_field(const DimerConfig& config, long long k, FaceCoord anchor, int anchor_quarters) {
  const Region& r = config.region();
  if (r.kind == RegionKind::Torus) throw InvalidArgument("height function is multivalued on a torus");
  if (!r.has_face(anchor)) throw InvalidArgument("anchor face outside region");
  HeightField h(r, anchor, anchor_quarters);
  h.set(anchor, anchor_quarters);
  std::deque<FaceCoord> queue{anchor};
  while (!queue.empty()) {
    const FaceCoord f = queue.front();
    queue.pop_front();
    const int base = h.at(f);
    for (Dir d : kDirs) {
      const FaceCoord g = step(f, d);
      if (!r.has_face(g) || h.has(g)) continue;
      h.set(g, base + crossing_increment(config.occupied(crossed_edge(f, d)), crossing_sign(f, d, k)));
      queue.push_back(g);
    }
  }
  return h;
}

/// Aztec convention: the leftmost face (-N, 0) of F+_N carries height N/4.
inline HeightField aztec_height(const DimerConfig& config, long long k) {
  if (config.region().kind != RegionKind::Aztec) throw InvalidArgument("aztec_height needs an Aztec region");
  const int n = config.region().size;
  return height_field(config, k, {-n, 0}, n);
}

enum class Order { Equal, Below, Above, Incomparable };

/// Pointwise comparison over all faces of the common region.
inline Order height_order(const HeightField& a, const HeightField& b) {
  if (!(a.region() == b.region())) throw InvalidArgument("height fields live on different regions");
  bool below = false;
  bool above = false;
  for (const FaceCoord f : a.faces()) {
    const auto other = b.get(f);
    if (!other) throw InvalidArgument("height fields cover different faces");
    const int va = a.at(f);
    below = below || va < *other;
    above = above || va > *other;
  }
  if (a.faces().size() != b.faces().size()) throw InvalidArgument("height fields cover different faces");
  if (below && above) return Order::Incomparable;
  if (below) return Order::Below;
  if (above) return Order::Above;
  return Order::Equal;
}

/// Checks every adjacent face pair of h against the gradient rule of config.
inline bool heights_consistent(const HeightField& h, const DimerConfig& config, long long k) {
  for (const FaceCoord f : h.faces())
    for (Dir d : {Dir::East, Dir::North}) {
      const FaceCoord g = step(f, d);
      if (!h.has(g)) continue;
      const int expect = crossing_increment(config.occupied(crossed_edge(f, d)), crossing_sign(f, d, k));
      if (h.at(g) - h.at(f) != expect) return false;
    }
  return true;
}

}  // namespace domino
