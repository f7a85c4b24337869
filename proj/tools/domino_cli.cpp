// domino-cli: batch front end for sampling, weight dynamics, thermodynamics
// and growth experiments. Exit codes: 0 ok, 1 usage/input error, 2 numerical
// failure (including undecided classifications and unresolved slopes).

#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "domino/growth.hpp"
#include "domino/io.hpp"
#include "domino/kasteleyn.hpp"
#include "domino/render.hpp"
#include "domino/shuffle.hpp"
#include "domino/thermo.hpp"
#include "domino/weights.hpp"

using namespace domino;
namespace fs = std::filesystem;

namespace {

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Common {
  std::string config;
  std::string out = "domino-out";
  bool to_stdout = false;
  unsigned threads = 0;
  std::uint64_t seed = 0;
  // weights source
  std::string weights_file;
  bool uniform = false;
  std::uint64_t random_weights = 0;
  int n = 1;
  double lo = 0.5, hi = 2.0;
  // quadrature knobs
  double quad_tol = ThermoOptions{}.quad_tol;
  double facet_radius = ThermoOptions{}.facet_radius;
  double facet_threshold = ThermoOptions{}.facet_threshold;
};

struct Command {
  CLI::App* app = nullptr;
  Common c;
  bool randomized = false;
  std::function<void(Command&)> run;

  bool given(const std::string& name) const {
    const CLI::Option* o = app->get_option_no_throw(name);
    return o && o->count() > 0;
  }
  void require(const std::string& name) const {
    if (!given(name)) throw UsageError(app->get_name() + ": " + name + " is required");
  }

  ThermoOptions thermo() const {
    ThermoOptions t;
    t.quad_tol = c.quad_tol;
    t.facet_radius = c.facet_radius;
    t.facet_threshold = c.facet_threshold;
    return t;
  }

  PeriodicWeights weights() const {
    const int sources = given("--weights") + given("--uniform") + given("--random-weights");
    if (sources != 1) throw UsageError(app->get_name() + ": choose exactly one of --weights, --uniform, --random-weights");
    if (given("--weights")) return load_weights(c.weights_file);
    if (c.n < 1) throw UsageError("--n must be positive");
    if (c.uniform) return PeriodicWeights::uniform(c.n);
    return PeriodicWeights::random(c.n, c.random_weights, c.lo, c.hi);
  }

  json provenance(const PeriodicWeights* w) const {
    json p = {{"command", app->get_name()}, {"threads", c.threads}};
    if (randomized) p["seed"] = c.seed;
    if (w) {
      p["weights_hash"] = weights_hash(*w);
      p["n"] = w->n();
    }
    p["tolerances"] = {{"quad_tol", c.quad_tol}, {"facet_radius", c.facet_radius}, {"facet_threshold", c.facet_threshold}};
    return p;
  }

  std::vector<std::pair<std::string, std::string>> grid_meta(const PeriodicWeights* w) const {
    std::vector<std::pair<std::string, std::string>> m = {{"command", app->get_name()}};
    if (randomized) m.emplace_back("seed", std::to_string(c.seed));
    if (w) m.emplace_back("weights_hash", weights_hash(*w));
    m.emplace_back("quad_tol", format_double(c.quad_tol));
    return m;
  }

  void emit(const std::string& name, const std::string& content) const {
    const fs::path p = fs::path(c.out) / name;
    write_file(p, content);
    std::cerr << "wrote " << p.string() << "\n";
    if (c.to_stdout) std::cout << content << std::flush;
  }
  void emit_json(const std::string& name, const json& j) const { emit(name, j.dump(2) + "\n"); }
};

/// Progress lines on stderr, about every tenth of the work.
std::function<void(int)> progress(const std::string& what, int total) {
  return [what, total](int done) {
    if (done == total || (total >= 10 && done % (total / 10) == 0))
      std::cerr << what << " " << done << "/" << total << "\n";
  };
}

void add_common(Command& cmd, bool with_weights, bool randomized) {
  CLI::App* a = cmd.app;
  cmd.randomized = randomized;
  a->add_option("--config", cmd.c.config, "JSON file of option values; command-line flags win");
  a->add_option("--out", cmd.c.out, "output directory")->capture_default_str();
  a->add_flag("--stdout", cmd.c.to_stdout, "also write the main output to standard output");
  a->add_option("--threads", cmd.c.threads, "worker cap (0 = hardware concurrency)")->capture_default_str();
  if (randomized) a->add_option("--seed", cmd.c.seed, "random seed (mandatory)");
  if (with_weights) {
    a->add_option("--weights", cmd.c.weights_file, "weights JSON file");
    a->add_flag("--uniform", cmd.c.uniform, "all edge weights 1");
    a->add_option("--random-weights", cmd.c.random_weights, "random weights from this seed, uniform in [lo, hi]");
    a->add_option("--n", cmd.c.n, "period parameter for --uniform/--random-weights")->capture_default_str();
    a->add_option("--lo", cmd.c.lo)->capture_default_str();
    a->add_option("--hi", cmd.c.hi)->capture_default_str();
  }
}

void add_thermo(Command& cmd) {
  cmd.app->add_option("--quad-tol", cmd.c.quad_tol, "relative quadrature tolerance")->capture_default_str();
  cmd.app->add_option("--facet-radius", cmd.c.facet_radius)->capture_default_str();
  cmd.app->add_option("--facet-threshold", cmd.c.facet_threshold)->capture_default_str();
}

/// Fills options not given on the command line from a flat JSON object. An
/// object under the subcommand's name overrides top-level keys.
void apply_config(Command& cmd) {
  if (cmd.c.config.empty()) return;
  json root;
  try {
    root = json::parse(read_file(cmd.c.config));
  } catch (const json::exception& e) {
    throw UsageError("unreadable config " + cmd.c.config + ": " + e.what());
  } catch (const IoError& e) {
    throw UsageError(e.what());
  }
  if (!root.is_object()) throw UsageError("config must be a JSON object");
  json merged = json::object();
  for (auto it = root.begin(); it != root.end(); ++it)
    if (!it.value().is_object()) merged[it.key()] = it.value();
  if (root.contains(cmd.app->get_name()) && root[cmd.app->get_name()].is_object())
    for (auto it = root[cmd.app->get_name()].begin(); it != root[cmd.app->get_name()].end(); ++it)
      merged[it.key()] = it.value();
  auto text = [](const json& v) { return v.is_string() ? v.get<std::string>() : v.dump(); };
  for (auto it = merged.begin(); it != merged.end(); ++it) {
    if (it.key() == "config") continue;
    CLI::Option* o = cmd.app->get_option_no_throw("--" + it.key());
    if (!o) {
      std::cerr << "config: ignoring '" << it.key() << "' (not an option of " << cmd.app->get_name() << ")\n";
      continue;
    }
    if (o->count() > 0) continue;  // flag wins
    const json& v = it.value();
    if (v.is_boolean() && !v.get<bool>()) continue;
    if (v.is_array())
      for (const auto& e : v) o->add_result(text(e));
    else
      o->add_result(text(v));
    try {
      o->run_callback();
    } catch (const CLI::Error& e) {
      throw UsageError("config key '" + it.key() + "': " + e.what());
    }
  }
}

// ---------------------------------------------------------------------------
// subcommands

void run_sample(Command& cmd, int N, int shape_samples) {
  cmd.require("--N");
  const PeriodicWeights w = cmd.weights();
  if (N < 1) throw UsageError("--N must be positive");
  std::cerr << "sampling A_" << N << "\n";
  const AztecSample s = sample_aztec(N, w, cmd.c.seed);
  const std::string stem = "aztec_N" + std::to_string(N) + "_seed" + std::to_string(cmd.c.seed);
  cmd.emit(stem + ".dump", dump_text({s.config, N, cmd.c.seed, weights_hash(w)}));
  if (shape_samples > 0) {
    const EmpiricalShape shape = empirical_limit_shape(w, N, shape_samples, cmd.c.seed, cmd.c.threads,
                                                       progress("limit shape", shape_samples));
    Grid g = shape_to_grid(shape, weights_hash(w));
    for (auto& kv : cmd.grid_meta(&w)) g.meta.push_back(kv);
    cmd.emit("limit_shape_N" + std::to_string(N) + ".csv", grid_text(g));
    const ShapeChecks ch = check_shape(shape);
    cmd.emit_json("limit_shape_N" + std::to_string(N) + "_checks.json",
                  {{"boundary_deviation", ch.boundary_deviation},
                   {"envelope_violation", ch.envelope_violation},
                   {"corner_deviation", ch.corner_deviation},
                   {"corner_cells", ch.corner_cells},
                   {"provenance", cmd.provenance(&w)}});
  }
}

void run_evolve(Command& cmd, int steps, bool raw) {
  const PeriodicWeights w0 = cmd.weights();
  if (steps < 0) throw UsageError("--steps must be nonnegative");
  const auto traj = weight_trajectory(w0, steps, !raw);
  const LaurentPoly2 P0 = characteristic_polynomial(w0);
  const auto poly0 = newton_polygon(P0);
  Grid g;
  g.meta = cmd.grid_meta(&w0);
  g.meta.emplace_back("normalized", raw ? "0" : "1");
  g.columns = {"k", "W1", "W2", "min_weight", "max_weight", "log_abs_ratio", "ratio_deviation", "polygon_same"};
  LaurentPoly2 prev = P0;
  for (std::size_t k = 0; k < traj.size(); ++k) {
    const GaugeInvariants inv = gauge_invariants(traj[k]);
    double mn = 1e300, mx = 0.0;
    for (const EdgeId& e : torus_edges(w0.n())) {
      mn = std::min(mn, traj[k].edge_weight(e));
      mx = std::max(mx, traj[k].edge_weight(e));
    }
    double lr = 0.0, dev = 0.0, same = 1.0;
    if (k > 0) {
      const LaurentPoly2 P = characteristic_polynomial(traj[k]);
      const CharpolyRatio r = charpoly_ratio(prev, P, 1e-6);
      lr = std::log(std::abs(r.c));
      dev = r.deviation;
      same = newton_polygon(P) == poly0 ? 1.0 : 0.0;
      prev = P;
    }
    g.rows.push_back({double(k), inv.w1, inv.w2, mn, mx, lr, dev, same});
  }
  cmd.emit("weights_trajectory.csv", grid_text(g));
  cmd.emit("weights_final.json", weights_text(traj.back()));
}

void run_charpoly(Command& cmd) {
  const PeriodicWeights w = cmd.weights();
  const LaurentPoly2 P = characteristic_polynomial(w);
  cmd.emit("charpoly.txt", P.dump());
  const auto poly = newton_polygon(P);
  json verts = json::array(), interior = json::array();
  for (const auto& [a, b] : poly) verts.push_back({a, b});
  for (const auto& [a, b] : interior_lattice_points(poly)) interior.push_back({a, b});
  cmd.emit_json("newton_polygon.json", {{"vertices", verts}, {"interior_points", interior}, {"provenance", cmd.provenance(&w)}});
}

struct GridSpec {
  std::vector<double> box;  // lo1 hi1 lo2 hi2
  int points = 21;
  std::vector<std::pair<double, double>> nodes() const {
    if (box.size() != 4 || points < 1) throw UsageError("--grid needs 4 numbers and --points >= 1");
    std::vector<std::pair<double, double>> out;
    auto at = [&](double lo, double hi, int t) { return points == 1 ? lo : lo + (hi - lo) * t / (points - 1); };
    for (int b = 0; b < points; ++b)
      for (int a = 0; a < points; ++a) out.emplace_back(at(box[0], box[1], a), at(box[2], box[3], b));
    return out;
  }
  std::string text() const {
    std::string s;
    for (double v : box) s += format_double(v) + " ";
    return s + "x" + std::to_string(points);
  }
};

void run_ronkin(Command& cmd, const std::vector<double>& B, const GridSpec& grid) {
  const PeriodicWeights w = cmd.weights();
  const LaurentPoly2 P = characteristic_polynomial(w);
  const ThermoOptions opt = cmd.thermo();
  if (cmd.given("--grid")) {
    const auto nodes = grid.nodes();
    std::vector<std::vector<double>> rows(nodes.size());
    parallel_for(nodes.size(), cmd.c.threads, [&](std::size_t t) {
      const MagneticField f{nodes[t].first, nodes[t].second};
      double err = 0.0;
      const double R = ronkin(P, f, opt, &err);
      const auto gr = ronkin_gradient(P, f, opt);
      rows[t] = {f.b1, f.b2, R, gr[0], gr[1], err};
    });
    Grid g;
    g.meta = cmd.grid_meta(&w);
    g.meta.emplace_back("grid", grid.text());
    g.columns = {"b1", "b2", "R", "dR_db1", "dR_db2", "quad_error"};
    g.rows = std::move(rows);
    cmd.emit("ronkin.csv", grid_text(g));
    return;
  }
  cmd.require("--B");
  const MagneticField f{B[0], B[1]};
  double err = 0.0;
  const double R = ronkin(P, f, opt, &err);
  const auto gr = ronkin_gradient(P, f, opt);
  cmd.emit_json("ronkin.json", {{"B", B},
                                {"R", R},
                                {"quad_error", err},
                                {"gradient", {gr[0], gr[1]}},
                                {"amoeba_margin", amoeba_margin(P, f, opt)},
                                {"provenance", cmd.provenance(&w)}});
}

void run_surface_tension(Command& cmd, const std::vector<double>& rho, const GridSpec& grid) {
  const PeriodicWeights w = cmd.weights();
  const LaurentPoly2 P = characteristic_polynomial(w);
  const ThermoOptions opt = cmd.thermo();
  const auto poly = newton_polygon(P);
  if (cmd.given("--grid")) {
    const auto nodes = grid.nodes();
    std::vector<std::vector<double>> rows(nodes.size());
    std::vector<char> keep(nodes.size(), 0);
    parallel_for(nodes.size(), cmd.c.threads, [&](std::size_t t) {
      const Slope r{nodes[t].first, nodes[t].second};
      const NewtonPoint s = newton_point(r);
      if (polygon_depth(poly, s.s1, s.s2) <= 1e-12) return;
      const SurfaceTension st = surface_tension(P, s, opt);
      rows[t] = {r.r1, r.r2, st.sigma, st.field.b1, st.field.b2, st.residual};
      keep[t] = 1;
    });
    Grid g;
    g.meta = cmd.grid_meta(&w);
    g.meta.emplace_back("grid", grid.text());
    g.meta.emplace_back("note", "slopes outside the open Newton polygon are omitted");
    g.columns = {"rho1", "rho2", "sigma", "b1", "b2", "residual"};
    for (std::size_t t = 0; t < rows.size(); ++t)
      if (keep[t]) g.rows.push_back(std::move(rows[t]));
    cmd.emit("surface_tension.csv", grid_text(g));
    return;
  }
  cmd.require("--rho");
  const SurfaceTension st = surface_tension(P, newton_point({rho[0], rho[1]}), opt);
  cmd.emit_json("surface_tension.json", {{"rho", rho},
                                         {"sigma", st.sigma},
                                         {"field", {st.field.b1, st.field.b2}},
                                         {"residual", st.residual},
                                         {"iterations", st.iterations},
                                         {"provenance", cmd.provenance(&w)}});
}

json classification_json(const Classification& c, NewtonPoint s) {
  const Slope r = height_slope(s);
  return {{"rho", {r.r1, r.r2}},
          {"newton_point", {s.s1, s.s2}},
          {"label", phase_name(c.label)},
          {"field", {c.field.b1, c.field.b2}},
          {"margin", c.margin},
          {"diagnostics", c.diagnostics}};
}

void run_classify(Command& cmd, const std::vector<double>& rho) {
  const PeriodicWeights w = cmd.weights();
  const LaurentPoly2 P = characteristic_polynomial(w);
  const ThermoOptions opt = cmd.thermo();
  if (cmd.given("--rho")) {
    const NewtonPoint s = newton_point({rho[0], rho[1]});
    cmd.emit_json("classification.json", {{"slope", classification_json(classify_slope(P, s, opt), s)},
                                          {"provenance", cmd.provenance(&w)}});
    return;
  }
  const auto interior = interior_lattice_points(newton_polygon(P));
  std::vector<Classification> cls(interior.size());
  parallel_for(interior.size(), cmd.c.threads, [&](std::size_t t) {
    cls[t] = classify_slope(P, {double(interior[t].first), double(interior[t].second)}, opt);
  });
  json all = json::array(), smooth = json::array();
  for (std::size_t t = 0; t < interior.size(); ++t) {
    const NewtonPoint s{double(interior[t].first), double(interior[t].second)};
    const json j = classification_json(cls[t], s);
    all.push_back(j);
    if (cls[t].label == PhaseLabel::Smooth) smooth.push_back(j);
  }
  cmd.emit_json("classify_slopes.json", {{"smooth_slopes", smooth},
                                         {"count", smooth.size()},
                                         {"integer_slopes", all},
                                         {"provenance", cmd.provenance(&w)}});
}

void run_edge_prob(Command& cmd, const std::vector<double>& rho, int box) {
  cmd.require("--rho");
  const PeriodicWeights w = cmd.weights();
  const LaurentPoly2 P = characteristic_polynomial(w);
  const ThermoOptions opt = cmd.thermo();
  const Slope r{rho[0], rho[1]};
  const int m = box > 0 ? box : w.period();
  const InverseKasteleyn ik(w, field_for_slope(P, r, opt), opt);
  std::vector<EdgeId> edges;
  for (int y = 0; y < m; ++y)
    for (int x = 0; x < m; ++x) {
      edges.push_back({{x, y}, Orientation::Horizontal});
      edges.push_back({{x, y}, Orientation::Vertical});
    }
  std::map<std::pair<int, int>, double> vertex_sum;
  json list = json::array();
  for (const EdgeId& e : edges) {
    double err = 0.0;
    const double p = ik.edge_probability(e, &err);
    list.push_back({{"x", e.origin.x}, {"y", e.origin.y},
                    {"orientation", e.orientation == Orientation::Horizontal ? "H" : "V"},
                    {"p", p}, {"quad_error", err}});
    vertex_sum[{e.origin.x, e.origin.y}] += p;
    const Vertex f = e.far_end();
    vertex_sum[{f.x, f.y}] += p;
  }
  // only vertices whose four edges were all listed
  double dev = 0.0;
  for (int y = 1; y < m; ++y)
    for (int x = 1; x < m; ++x) dev = std::max(dev, std::abs(vertex_sum[{x, y}] - 1.0));
  cmd.emit_json("edge_prob.json", {{"rho", rho},
                                   {"field", {ik.field().b1, ik.field().b2}},
                                   {"edges", list},
                                   {"max_vertex_sum_deviation", dev},
                                   {"provenance", cmd.provenance(&w)}});
}

struct ShapeArgs {
  int N = 256;
  int samples = 100;
  int reference_N = -1;  // default N/2
  std::string shape_file;
  std::string reference_file;
  double match_tol = 0.05;
  double fit_radius = 0.08;
};

EmpiricalShape obtain_shape(Command& cmd, const PeriodicWeights& w, int N, int samples, const std::string& file) {
  if (!file.empty()) return shape_from_grid(load_grid(file));
  if (!cmd.given("--seed")) throw UsageError(cmd.app->get_name() + ": sampling a limit shape needs --seed");
  const EmpiricalShape s = empirical_limit_shape(w, N, samples, cmd.c.seed + static_cast<std::uint64_t>(N), cmd.c.threads,
                                                 progress("limit shape N=" + std::to_string(N), samples));
  Grid g = shape_to_grid(s, weights_hash(w));
  for (auto& kv : cmd.grid_meta(&w)) g.meta.push_back(kv);
  cmd.emit("limit_shape_N" + std::to_string(N) + ".csv", grid_text(g));
  return s;
}

void run_speed(Command& cmd, const std::vector<double>& rho, const std::string& method, int k_max, const ShapeArgs& sa) {
  cmd.require("--rho");
  const Slope r{rho[0], rho[1]};
  json out;
  if (method == "kasteleyn") {
    cmd.randomized = false;
    const PeriodicWeights w = cmd.weights();
    SpeedOptions so;
    so.thermo = cmd.thermo();
    so.threads = cmd.c.threads;
    std::cerr << "Kasteleyn sum, k_max=" << k_max << "\n";
    out = speed_to_json(speed_kasteleyn(w, r, k_max, so));
    out["provenance"] = cmd.provenance(&w);
  } else if (method == "limit-shape") {
    const bool from_file = !sa.shape_file.empty();
    const PeriodicWeights w = from_file ? PeriodicWeights::uniform(1) : cmd.weights();
    const EmpiricalShape s = obtain_shape(cmd, w, sa.N, sa.samples, sa.shape_file);
    std::optional<EmpiricalShape> ref;
    if (!sa.reference_file.empty())
      ref = shape_from_grid(load_grid(sa.reference_file));
    else if (!from_file && sa.reference_N != 0)
      ref = obtain_shape(cmd, w, sa.reference_N > 0 ? sa.reference_N : sa.N / 2, sa.samples, "");
    out = speed_to_json(speed_limit_shape(s, r, ref ? &*ref : nullptr, sa.match_tol));
    out["provenance"] = cmd.provenance(from_file ? nullptr : &w);
    if (from_file) out["provenance"]["shape_file"] = sa.shape_file;
  } else {
    throw UsageError("--method must be kasteleyn or limit-shape");
  }
  cmd.emit_json("speed.json", out);
}

void run_hessian(Command& cmd, const std::vector<double>& rho, double h, int k_max, const ShapeArgs& sa) {
  cmd.require("--rho");
  const Slope r{rho[0], rho[1]};
  json out;
  if (!sa.shape_file.empty()) {
    // grid input: no sampling
    const EmpiricalShape s = shape_from_grid(load_grid(sa.shape_file));
    const Eigen::Matrix2d D2 = speed_hessian_from_shape(s, r, sa.match_tol, sa.fit_radius);
    out = {{"method", "limit-shape"}, {"rho", rho}, {"D2", matrix_to_json(D2)}, {"det", D2.determinant()},
           {"fit_radius", sa.fit_radius}, {"shape_file", sa.shape_file}, {"N", s.N}, {"samples", s.samples}};
  } else {
    cmd.randomized = false;
    const PeriodicWeights w = cmd.weights();
    SpeedOptions so;
    so.thermo = cmd.thermo();
    so.threads = cmd.c.threads;
    out = hessian_to_json(speed_hessian(w, r, h, k_max, so));
    out["method"] = "kasteleyn-sum";
    out["rho"] = rho;
    out["provenance"] = cmd.provenance(&w);
  }
  cmd.emit_json("hessian.json", out);
}

void run_fluctuations(Command& cmd, const std::vector<double>& x, int N, int runs, int k_from) {
  cmd.require("--seed");
  const PeriodicWeights w = cmd.weights();
  const FluctuationStats f = fluctuation_stats(w, {x[0], x[1]}, N, runs, cmd.c.seed, cmd.c.threads, k_from,
                                               progress("runs", runs));
  Grid g;
  g.meta = cmd.grid_meta(&w);
  g.meta.emplace_back("x", format_double(x[0]) + " " + format_double(x[1]));
  g.meta.emplace_back("runs", std::to_string(runs));
  g.columns = {"k", "mean", "variance"};
  for (std::size_t k = 0; k < f.variance.size(); ++k) g.rows.push_back({double(k), f.mean[k], f.variance[k]});
  cmd.emit("fluctuations.csv", grid_text(g));
  json fits = json::array();
  for (const auto& m : f.fits) fits.push_back({{"model", m.name}, {"c", m.c}, {"residual", m.residual}});
  cmd.emit_json("fluctuations.json", {{"x", x}, {"N", N}, {"runs", runs}, {"k_from", k_from}, {"fits", fits},
                                      {"best", f.best}, {"provenance", cmd.provenance(&w)}});
}

void run_render(Command& cmd, const std::string& dump, const std::string& format, int scale, bool no_outline) {
  cmd.require("--dump");
  const SampleDump d = parse_dump(read_file(dump));
  RenderOptions opt;
  opt.scale = scale;
  opt.outline = !no_outline;
  std::string image;
  if (format == "ppm") image = render_ppm(d.config, d.time, opt);
  else if (format == "svg") image = render_svg(d.config, d.time, opt);
  else throw UsageError("--format must be ppm or svg");
  cmd.emit(fs::path(dump).stem().string() + "." + format, image);
  if (d.config.region().size >= 1) {
    const CornerOrder c = corner_order(d.config, d.time);
    std::cerr << "corner brickwork fraction " << c.fraction << " over " << c.counted << " dominoes\n";
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Domino shuffling, spider-move weights and growth-speed experiments"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all");

  std::vector<std::unique_ptr<Command>> cmds;
  auto make = [&](const char* name, const char* help, bool weights, bool randomized) -> Command& {
    cmds.push_back(std::make_unique<Command>());
    Command& c = *cmds.back();
    c.app = app.add_subcommand(name, help);
    add_common(c, weights, randomized);
    return c;
  };

  // parameters shared by several subcommands; each subcommand binds its own copy
  int N = 0, fluct_N = 256, shape_samples = 0, steps = 100, k_max = 64, box = 0, runs = 200, k_from = 16, scale = 2;
  bool raw = false, no_outline = false;
  double h = 0.1;
  std::vector<double> rho{0, 0}, B{0, 0}, x{0, 0};
  std::string method = "kasteleyn", dump, format = "ppm";
  GridSpec grid;
  ShapeArgs sa;

  {
    Command& c = make("sample-aztec", "exact sample of the dimer measure on A_N", true, true);
    c.app->add_option("--N", N, "order of the Aztec diamond");
    c.app->add_option("--shape-samples", shape_samples, "also export an empirical limit shape from this many growth runs");
    c.run = [&](Command& cmd) { run_sample(cmd, N, shape_samples); };
  }
  {
    Command& c = make("evolve-weights", "spider-move trajectory with conserved quantities", true, false);
    c.app->add_option("--steps", steps)->capture_default_str();
    c.app->add_flag("--raw", raw, "skip gauge normalization");
    c.run = [&](Command& cmd) { run_evolve(cmd, steps, raw); };
  }
  {
    Command& c = make("charpoly", "characteristic polynomial and Newton polygon", true, false);
    c.run = [&](Command& cmd) { run_charpoly(cmd); };
  }
  {
    Command& c = make("ronkin", "Ronkin function at a field or over a grid", true, false);
    add_thermo(c);
    c.app->add_option("--B", B, "magnetic field b1 b2")->expected(2);
    c.app->add_option("--grid", grid.box, "b1_lo b1_hi b2_lo b2_hi")->expected(4);
    c.app->add_option("--points", grid.points, "grid points per axis")->capture_default_str();
    c.run = [&](Command& cmd) { run_ronkin(cmd, B, grid); };
  }
  {
    Command& c = make("surface-tension", "Legendre dual of the Ronkin function", true, false);
    add_thermo(c);
    c.app->add_option("--rho", rho, "height slope")->expected(2);
    c.app->add_option("--grid", grid.box, "rho1_lo rho1_hi rho2_lo rho2_hi")->expected(4);
    c.app->add_option("--points", grid.points)->capture_default_str();
    c.run = [&](Command& cmd) { run_surface_tension(cmd, rho, grid); };
  }
  {
    Command& c = make("classify-slopes", "rough/smooth census of integer slopes", true, false);
    add_thermo(c);
    c.app->add_option("--rho", rho, "classify only this slope")->expected(2);
    c.run = [&](Command& cmd) { run_classify(cmd, rho); };
  }
  {
    Command& c = make("edge-prob", "Gibbs edge probabilities at a slope", true, false);
    add_thermo(c);
    c.app->add_option("--rho", rho)->expected(2);
    c.app->add_option("--box", box, "vertex box side (default one fundamental domain)");
    c.run = [&](Command& cmd) { run_edge_prob(cmd, rho, box); };
  }
  auto shape_options = [&](Command& c) {
    c.app->add_option("--N", sa.N, "limit-shape order")->capture_default_str();
    c.app->add_option("--samples", sa.samples, "growth runs per shape")->capture_default_str();
    c.app->add_option("--reference-N", sa.reference_N, "order of the finite-size reference shape (0 = none)");
    c.app->add_option("--shape", sa.shape_file, "limit-shape CSV to use instead of sampling");
    c.app->add_option("--reference", sa.reference_file, "reference limit-shape CSV");
    c.app->add_option("--match-tol", sa.match_tol)->capture_default_str();
  };
  {
    Command& c = make("speed", "growth speed v(rho)", true, true);
    add_thermo(c);
    c.app->add_option("--rho", rho)->expected(2);
    c.app->add_option("--method", method, "kasteleyn | limit-shape")->capture_default_str();
    c.app->add_option("--kmax", k_max)->capture_default_str();
    shape_options(c);
    c.run = [&](Command& cmd) {
      if (method == "limit-shape" && sa.shape_file.empty()) cmd.require("--seed");
      run_speed(cmd, rho, method, k_max, sa);
    };
  }
  {
    Command& c = make("hessian", "D2 v by finite differences, or from a limit-shape grid", true, false);
    add_thermo(c);
    c.app->add_option("--rho", rho)->expected(2);
    c.app->add_option("--step", h, "finite-difference step in rho")->capture_default_str();
    c.app->add_option("--kmax", k_max)->capture_default_str();
    c.app->add_option("--shape", sa.shape_file, "limit-shape CSV (no sampling)");
    c.app->add_option("--match-tol", sa.match_tol)->capture_default_str();
    c.app->add_option("--fit-radius", sa.fit_radius, "disc radius of the quadratic fit, rescaled units")->capture_default_str();
    c.run = [&](Command& cmd) { run_hessian(cmd, rho, h, k_max, sa); };
  }
  {
    Command& c = make("fluctuations", "Var of the height at a rescaled point over growth time", true, true);
    c.app->add_option("--x", x, "rescaled position")->expected(2);
    c.app->add_option("--N", fluct_N, "final time")->capture_default_str();
    c.app->add_option("--runs", runs)->capture_default_str();
    c.app->add_option("--k-from", k_from)->capture_default_str();
    c.run = [&](Command& cmd) { run_fluctuations(cmd, x, fluct_N, runs, k_from); };
  }
  {
    Command& c = make("render", "PPM or SVG picture of a sample dump", false, false);
    c.app->add_option("--dump", dump, "sample dump file");
    c.app->add_option("--format", format, "ppm | svg")->capture_default_str();
    c.app->add_option("--scale", scale, "pixels per lattice square")->capture_default_str();
    c.app->add_flag("--no-outline", no_outline);
    c.run = [&](Command& cmd) { run_render(cmd, dump, format, scale, no_outline); };
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  for (auto& c : cmds) {
    if (!c->app->parsed()) continue;
    try {
      apply_config(*c);
      if (c->randomized && c->app->get_name() != "speed") c->require("--seed");
      c->run(*c);
      return 0;
    } catch (const UsageError& e) {
      std::cerr << "usage error: " << e.what() << "\n";
      return 1;
    } catch (const InvalidArgument& e) {
      std::cerr << "invalid input: " << e.what() << "\n";
      return 1;
    } catch (const IoError& e) {
      std::cerr << "I/O error: " << e.what() << "\n";
      return 1;
    } catch (const Indeterminate& e) {
      std::cerr << "indeterminate: " << e.what() << "\n";
      return 2;
    } catch (const NotResolved& e) {
      std::cerr << "not resolved: " << e.what() << "\n";
      return 2;
    } catch (const NumericalFailure& e) {
      std::cerr << "numerical failure: " << e.what() << "\n";
      return 2;
    } catch (const InvariantViolation& e) {
      std::cerr << "invariant violated: " << e.what() << "\n";
      return 2;
    } catch (const std::exception& e) {
      std::cerr << "error: " << e.what() << "\n";
      return 2;
    }
  }
  return 1;
}
