#pragma once
// File formats: weights JSON, sample dumps, CSV grids, polynomial dumps and
// JSON records for speed estimates.

#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "domino/error.hpp"
#include "domino/growth.hpp"
#include "domino/kasteleyn.hpp"
#include "domino/lattice.hpp"
#include "domino/weights.hpp"

namespace domino {

using json = nlohmann::json;

class IoError : public Error {
 public:
  using Error::Error;
};

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad()) throw IoError("read failed: " + path.string());
  return ss.str();
}

inline void write_file(const std::filesystem::path& path, const std::string& content) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << content;
  out.flush();
  if (!out) throw IoError("write failed: " + path.string());
}

inline std::uint64_t fnv1a64(std::string_view data) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : data) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

// ---------------------------------------------------------------------------
// Weights

inline json weights_to_json(const PeriodicWeights& w) {
  json faces = json::array();
  for (const FaceCoord f : w.stored_faces()) {
    const FaceWeights& t = w.tuple(f);
    faces.push_back({{"i", f.i}, {"j", f.j}, {"a", t.a}, {"b", t.b}, {"c", t.c}, {"d", t.d}});
  }
  return {{"n", w.n()}, {"time_parity", w.time_parity()}, {"faces", std::move(faces)}};
}

inline PeriodicWeights weights_from_json(const json& j) {
  try {
    const int n = j.at("n").get<int>();
    const int p = j.at("time_parity").get<int>();
    if (n < 1 || (p != 0 && p != 1)) throw InvalidArgument("weights: need n >= 1 and time_parity in {0, 1}");
    PeriodicWeights w(n, p);
    const auto& faces = j.at("faces");
    if (!faces.is_array() || faces.size() != static_cast<std::size_t>(2 * n * n))
      throw InvalidArgument("weights: expected " + std::to_string(2 * n * n) + " face tuples");
    std::vector<bool> seen(static_cast<std::size_t>(4 * n * n), false);
    for (const auto& f : faces) {
      const FaceCoord c{f.at("i").get<int>(), f.at("j").get<int>()};
      if (c.i < 0 || c.j < 0 || c.i >= 2 * n || c.j >= 2 * n || !w.is_stored(c))
        throw InvalidArgument("weights: face (" + std::to_string(c.i) + "," + std::to_string(c.j) + ") is not stored at this parity");
      const std::size_t slot = static_cast<std::size_t>(c.j) * 2 * n + c.i;
      if (seen[slot]) throw InvalidArgument("weights: duplicate face tuple");
      seen[slot] = true;
      w.set_tuple(c, {f.at("a").get<double>(), f.at("b").get<double>(), f.at("c").get<double>(), f.at("d").get<double>()});
    }
    w.validate();
    return w;
  } catch (const json::exception& e) {
    throw InvalidArgument(std::string("weights: ") + e.what());
  }
}

inline std::string weights_text(const PeriodicWeights& w) { return weights_to_json(w).dump(2) + "\n"; }

inline PeriodicWeights parse_weights(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw InvalidArgument(std::string("weights: ") + e.what());
  }
  return weights_from_json(j);
}

inline PeriodicWeights load_weights(const std::filesystem::path& path) { return parse_weights(read_file(path)); }

/// Hash of the canonical compact JSON form.
inline std::string weights_hash(const PeriodicWeights& w) { return hex64(fnv1a64(weights_to_json(w).dump())); }

// ---------------------------------------------------------------------------
// Sample dumps: header lines, then one row of match directions per vertex row,
// top row first; '.' marks vertices outside the diamond.

struct SampleDump {
  DimerConfig config;
  long long time = 0;
  std::uint64_t seed = 0;
  std::string weights_hash;
};

inline std::string dump_text(const SampleDump& d) {
  const Region& r = d.config.region();
  if (r.kind != RegionKind::Aztec) throw InvalidArgument("dumps hold Aztec samples only");
  std::string out = "domino-dump 1\n";
  out += "N " + std::to_string(r.size) + "\n";
  out += "time " + std::to_string(d.time) + "\n";
  out += "seed " + std::to_string(d.seed) + "\n";
  out += "weights " + (d.weights_hash.empty() ? std::string("-") : d.weights_hash) + "\n";
  for (int y = r.x_max(); y >= r.x_min(); --y) {
    for (int x = r.x_min(); x <= r.x_max(); ++x) {
      const Vertex v{x, y};
      out += r.contains(v) ? dir_char(d.config.dir(v)) : '.';
    }
    out += '\n';
  }
  return out;
}

inline SampleDump parse_dump(const std::string& text) {
  std::istringstream in(text);
  std::string line, key;
  auto corrupt = [](const std::string& why) { return InvalidArgument("corrupt dump: " + why); };
  if (!std::getline(in, line) || line != "domino-dump 1") throw corrupt("missing magic line");
  auto field = [&](const char* name) {
    if (!std::getline(in, line)) throw corrupt(std::string("missing ") + name);
    std::istringstream ls(line);
    std::string value;
    if (!(ls >> key >> value) || key != name) throw corrupt(std::string("expected ") + name);
    return value;
  };
  SampleDump d;
  int N = 0;
  try {
    N = std::stoi(field("N"));
    d.time = std::stoll(field("time"));
    d.seed = std::stoull(field("seed"));
  } catch (const std::logic_error&) {
    throw corrupt("bad header number");
  }
  d.weights_hash = field("weights");
  if (d.weights_hash == "-") d.weights_hash.clear();
  if (N < 0 || N > 100000) throw corrupt("bad order");
  d.config = DimerConfig(Region::aztec(N));
  const Region& r = d.config.region();
  for (int y = r.x_max(); y >= r.x_min(); --y) {
    if (!std::getline(in, line) || static_cast<int>(line.size()) != r.width()) throw corrupt("bad row " + std::to_string(y));
    for (int x = r.x_min(); x <= r.x_max(); ++x) {
      const char c = line[static_cast<std::size_t>(x - r.x_min())];
      const Vertex v{x, y};
      if (!r.contains(v)) {
        if (c != '.') throw corrupt("mark outside the diamond");
        continue;
      }
      try {
        d.config.set_dir(v, dir_from_char(c));
      } catch (const InvalidArgument&) {
        throw corrupt("bad direction character");
      }
    }
  }
  if (std::getline(in, line) && !line.empty()) throw corrupt("trailing data");
  if (!validate_matching(d.config)) throw corrupt("not a perfect matching");
  return d;
}

// ---------------------------------------------------------------------------
// CSV grids with '#' metadata lines

inline std::string format_double(double v) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

inline double parse_double(std::string_view s) {
  double v = 0.0;
  const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
  if (r.ec != std::errc() || r.ptr != s.data() + s.size()) throw InvalidArgument("bad number '" + std::string(s) + "'");
  return v;
}

struct Grid {
  std::vector<std::pair<std::string, std::string>> meta;
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;

  std::string meta_value(const std::string& key) const {
    for (const auto& [k, v] : meta)
      if (k == key) return v;
    throw InvalidArgument("grid has no '" + key + "' entry");
  }
  std::size_t column(const std::string& name) const {
    for (std::size_t c = 0; c < columns.size(); ++c)
      if (columns[c] == name) return c;
    throw InvalidArgument("grid has no column '" + name + "'");
  }
  bool operator==(const Grid&) const = default;
};

inline std::string grid_text(const Grid& g) {
  std::string out;
  for (const auto& [k, v] : g.meta) {
    if (k.find_first_of("=\n") != std::string::npos || v.find('\n') != std::string::npos)
      throw InvalidArgument("metadata must be single-line key=value");
    out += "# " + k + "=" + v + "\n";
  }
  for (std::size_t c = 0; c < g.columns.size(); ++c) out += (c ? "," : "") + g.columns[c];
  out += '\n';
  for (const auto& row : g.rows) {
    if (row.size() != g.columns.size()) throw InvalidArgument("grid row width differs from header");
    for (std::size_t c = 0; c < row.size(); ++c) out += (c ? "," : "") + format_double(row[c]);
    out += '\n';
  }
  return out;
}

inline Grid parse_grid(const std::string& text) {
  Grid g;
  std::istringstream in(text);
  std::string line;
  bool header = false;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (!header && line.rfind("# ", 0) == 0) {
      const auto eq = line.find('=');
      if (eq == std::string::npos) throw InvalidArgument("metadata line without '='");
      g.meta.emplace_back(line.substr(2, eq - 2), line.substr(eq + 1));
      continue;
    }
    std::vector<std::string_view> cells;
    std::string_view rest(line);
    while (true) {
      const auto comma = rest.find(',');
      cells.push_back(rest.substr(0, comma));
      if (comma == std::string_view::npos) break;
      rest.remove_prefix(comma + 1);
    }
    if (!header) {
      for (auto c : cells) g.columns.emplace_back(c);
      header = true;
      continue;
    }
    if (cells.size() != g.columns.size()) throw InvalidArgument("CSV row width differs from header");
    std::vector<double> row;
    row.reserve(cells.size());
    for (auto c : cells) row.push_back(parse_double(c));
    g.rows.push_back(std::move(row));
  }
  if (!header) throw InvalidArgument("CSV without a column header");
  return g;
}

inline void save_grid(const std::filesystem::path& path, const Grid& g) { write_file(path, grid_text(g)); }
inline Grid load_grid(const std::filesystem::path& path) { return parse_grid(read_file(path)); }

/// Empirical limit shape as a grid: one row per face of A_N, raw integer sums
/// included so the import is exact.
inline Grid shape_to_grid(const EmpiricalShape& s, const std::string& weights_hash = "") {
  Grid g;
  g.meta = {{"kind", "limit-shape"},
            {"n", std::to_string(s.n)},
            {"N", std::to_string(s.N)},
            {"samples", std::to_string(s.samples)},
            {"seed", std::to_string(s.seed)},
            {"spacing", std::to_string(s.spacing)},
            {"weights_hash", weights_hash.empty() ? "-" : weights_hash}};
  g.columns = {"i", "j", "x1", "x2", "psi", "se", "sum", "sum_sq"};
  for (int j = -s.N; j <= s.N; ++j)
    for (int i = -s.N; i <= s.N; ++i) {
      if (!s.has(i, j)) continue;
      const auto x = s.x(i, j);
      g.rows.push_back({double(i), double(j), x[0], x[1], s.psi(i, j), s.standard_error(i, j),
                        static_cast<double>(s.sum[s.slot(i, j)]), static_cast<double>(s.sum_sq[s.slot(i, j)])});
    }
  return g;
}

inline EmpiricalShape shape_from_grid(const Grid& g) {
  if (g.meta_value("kind") != "limit-shape") throw InvalidArgument("grid is not a limit shape");
  EmpiricalShape s = empty_shape(std::stoi(g.meta_value("n")), std::stoi(g.meta_value("N")));
  s.samples = std::stoi(g.meta_value("samples"));
  s.seed = std::stoull(g.meta_value("seed"));
  s.spacing = std::stoi(g.meta_value("spacing"));
  const std::size_t ci = g.column("i"), cj = g.column("j"), cs = g.column("sum"), cq = g.column("sum_sq");
  std::size_t filled = 0;
  for (const auto& row : g.rows) {
    const int i = static_cast<int>(row[ci]), j = static_cast<int>(row[cj]);
    if (!s.has(i, j)) throw InvalidArgument("limit-shape row outside the diamond");
    s.sum[s.slot(i, j)] = static_cast<long long>(row[cs]);
    s.sum_sq[s.slot(i, j)] = static_cast<long long>(row[cq]);
    ++filled;
  }
  const std::size_t expected = 2ULL * s.N * (s.N + 1) + 1;
  if (filled != expected) throw InvalidArgument("limit-shape grid is missing faces");
  return s;
}

// ---------------------------------------------------------------------------
// Polynomial dumps "j k re im"

inline LaurentPoly2 parse_polynomial(const std::string& text) {
  LaurentPoly2 p;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    int j = 0, k = 0;
    std::string re, im;
    if (!(ls >> j >> k >> re >> im)) throw InvalidArgument("bad polynomial line: " + line);
    p.set(j, k, {std::stod(re), std::stod(im)});
  }
  return p;
}

// ---------------------------------------------------------------------------
// JSON records

inline json speed_to_json(const SpeedEstimate& e) {
  json j = {{"rho", {e.rho.r1, e.rho.r2}},
            {"v", e.v},
            {"method", method_name(e.method)},
            {"error_bar", e.error_bar}};
  if (e.method == SpeedMethod::KasteleynSum) {
    j["k_max"] = e.k_max;
    j["cesaro_gap"] = e.cesaro_gap;
    j["quadrature_error"] = e.quadrature_error;
    j["terms"] = e.terms;
  } else {
    j["N"] = e.N;
    j["samples"] = e.samples;
    j["x_w"] = {e.x_w[0], e.x_w[1]};
    j["residual"] = e.residual;
    j["standard_error"] = e.standard_error;
    j["finite_size"] = e.finite_size;
    j["matches"] = e.matches;
  }
  return j;
}

inline json matrix_to_json(const Eigen::Matrix2d& m) { return {{m(0, 0), m(0, 1)}, {m(1, 0), m(1, 1)}}; }

inline json hessian_to_json(const SpeedHessian& h) {
  json j = {{"h", h.h},
            {"D2", matrix_to_json(h.D2)},
            {"D2_error", matrix_to_json(h.D2_error)},
            {"det", h.det},
            {"det_error", h.det_error},
            {"det_negative", h.det + h.det_error < 0.0}};
  json st = json::array();
  for (const auto& row : h.stencil)
    for (const auto& e : row) st.push_back(speed_to_json(e));
  j["stencil"] = std::move(st);
  return j;
}

}  // namespace domino
