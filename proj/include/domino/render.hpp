#pragma once
// Tiling pictures. Each lattice vertex is drawn as a unit square, so a dimer
// is a domino covering two squares. Colour class = orientation x whether the
// white vertex is the left/bottom end, which paints each frozen corner of an
// Aztec diamond in a single colour.

#include <array>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "domino/error.hpp"
#include "domino/lattice.hpp"

namespace domino {

inline int domino_class(const EdgeId& e, long long k) {
  const int base = e.orientation == Orientation::Horizontal ? 0 : 2;
  return base + (e.white_end(k) == e.origin ? 0 : 1);
}

struct Rgb {
  std::uint8_t r, g, b;
};

inline constexpr std::array<Rgb, 4> kPalette = {Rgb{214, 48, 49}, Rgb{9, 132, 227}, Rgb{0, 184, 148}, Rgb{253, 203, 110}};
inline constexpr Rgb kOutline{45, 52, 54};
inline constexpr Rgb kBackground{255, 255, 255};

struct RenderOptions {
  int scale = 4;  // pixels per vertex square
  bool outline = true;
};

namespace detail {

struct Cell {
  int x0, y0, w, h;  // in vertex squares, origin at the region's lower-left corner
};

inline Cell domino_cell(const Region& r, const EdgeId& e) {
  const int x0 = e.origin.x - r.x_min();
  const int y0 = e.origin.y - r.x_min();
  return e.orientation == Orientation::Horizontal ? Cell{x0, y0, 2, 1} : Cell{x0, y0, 1, 2};
}

inline std::string rgb_hex(Rgb c) {
  char buf[8];
  std::snprintf(buf, sizeof buf, "#%02x%02x%02x", c.r, c.g, c.b);
  return buf;
}

}  // namespace detail

/// Binary PPM (P6).
inline std::string render_ppm(const DimerConfig& config, long long k, const RenderOptions& opt = {}) {
  if (opt.scale < 1) throw InvalidArgument("scale must be positive");
  const Region& r = config.region();
  if (r.kind == RegionKind::Torus) throw InvalidArgument("torus configurations are not rendered");
  const long long side = static_cast<long long>(r.width()) * opt.scale;
  if (side > 40000) throw InvalidArgument("image too large; lower --scale");
  std::vector<std::uint8_t> px(static_cast<std::size_t>(side * side * 3), 255);
  auto put = [&](long long x, long long y, Rgb c) {
    const std::size_t at = static_cast<std::size_t>(((side - 1 - y) * side + x) * 3);
    px[at] = c.r;
    px[at + 1] = c.g;
    px[at + 2] = c.b;
  };
  const bool outline = opt.outline && opt.scale >= 4;
  for (const EdgeId& e : config.dimers()) {
    const detail::Cell c = detail::domino_cell(r, e);
    const Rgb fill = kPalette[domino_class(e, k)];
    const long long x0 = static_cast<long long>(c.x0) * opt.scale, y0 = static_cast<long long>(c.y0) * opt.scale;
    const long long w = static_cast<long long>(c.w) * opt.scale, h = static_cast<long long>(c.h) * opt.scale;
    for (long long y = y0; y < y0 + h; ++y)
      for (long long x = x0; x < x0 + w; ++x) {
        const bool edge = outline && (x == x0 || y == y0 || x == x0 + w - 1 || y == y0 + h - 1);
        if (x >= 0 && y >= 0 && x < side && y < side) put(x, y, edge ? kOutline : fill);
      }
  }
  std::string out = "P6\n" + std::to_string(side) + " " + std::to_string(side) + "\n255\n";
  out.append(reinterpret_cast<const char*>(px.data()), px.size());
  return out;
}

inline std::string render_svg(const DimerConfig& config, long long k, const RenderOptions& opt = {}) {
  if (opt.scale < 1) throw InvalidArgument("scale must be positive");
  const Region& r = config.region();
  if (r.kind == RegionKind::Torus) throw InvalidArgument("torus configurations are not rendered");
  const int side = r.width() * opt.scale;
  std::string out = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + std::to_string(side) + "\" height=\"" +
                    std::to_string(side) + "\" viewBox=\"0 0 " + std::to_string(r.width()) + " " +
                    std::to_string(r.width()) + "\">\n";
  out += "<style>";
  for (int c = 0; c < 4; ++c) out += ".c" + std::to_string(c) + "{fill:" + detail::rgb_hex(kPalette[c]) + "}";
  out += "</style>\n<g";
  if (opt.outline) out += " stroke=\"" + detail::rgb_hex(kOutline) + "\" stroke-width=\"0.08\"";
  out += ">\n";
  for (const EdgeId& e : config.dimers()) {
    const detail::Cell c = detail::domino_cell(r, e);
    // flip y: SVG grows downward
    const int top = r.width() - c.y0 - c.h;
    out += "<rect class=\"c" + std::to_string(domino_class(e, k)) + "\" x=\"" + std::to_string(c.x0) + "\" y=\"" +
           std::to_string(top) + "\" width=\"" + std::to_string(c.w) + "\" height=\"" + std::to_string(c.h) + "\"/>\n";
  }
  out += "</g>\n</svg>\n";
  return out;
}

struct CornerOrder {
  double fraction = 0.0;  // dominoes agreeing with their corner's majority class
  long long counted = 0;
  std::array<int, 4> majority{};  // per corner: E, N, W, S tip
};

/// Brickwork order near the four tips of an Aztec diamond: dominoes whose
/// centre lies within l1 distance radius * N of a tip.
inline CornerOrder corner_order(const DimerConfig& config, long long k, double radius = 0.2) {
  const Region& r = config.region();
  if (r.kind != RegionKind::Aztec || r.size < 1) throw InvalidArgument("corner order needs a nonempty Aztec diamond");
  const double N = r.size;
  // diamond centre is (1/2, 1/2) in vertex coordinates
  const std::array<std::array<double, 2>, 4> tips = {{{0.5 + N, 0.5}, {0.5, 0.5 + N}, {0.5 - N, 0.5}, {0.5, 0.5 - N}}};
  std::array<std::array<long long, 4>, 4> counts{};
  for (const EdgeId& e : config.dimers()) {
    const Vertex f = e.far_end();
    const double cx = 0.5 * (e.origin.x + f.x), cy = 0.5 * (e.origin.y + f.y);
    for (int t = 0; t < 4; ++t)
      if (std::abs(cx - tips[t][0]) + std::abs(cy - tips[t][1]) <= radius * N) ++counts[t][domino_class(e, k)];
  }
  CornerOrder out;
  long long agree = 0;
  for (int t = 0; t < 4; ++t) {
    int best = 0;
    for (int c = 1; c < 4; ++c)
      if (counts[t][c] > counts[t][best]) best = c;
    out.majority[t] = best;
    agree += counts[t][best];
    for (long long n : counts[t]) out.counted += n;
  }
  out.fraction = out.counted ? static_cast<double>(agree) / out.counted : 0.0;
  return out;
}

}  // namespace domino
