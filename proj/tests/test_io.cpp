#include <gtest/gtest.h>

#include <filesystem>
#include <random>
#include <regex>

#include "domino/io.hpp"
#include "domino/render.hpp"
#include "domino/shuffle.hpp"

using namespace domino;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir() {
  const fs::path p = fs::temp_directory_path() / ("domino_io_" + std::to_string(::getpid()));
  fs::create_directories(p);
  return p;
}

int count_rects(const std::string& svg) {
  int n = 0;
  for (std::size_t at = svg.find("<rect"); at != std::string::npos; at = svg.find("<rect", at + 1)) ++n;
  return n;
}

}  // namespace

TEST(WeightsFile, ExactRoundTrip) {
  for (int n : {1, 2, 3}) {
    const PeriodicWeights w = PeriodicWeights::random(n, 40 + n, 0.1, 10.0, n % 2);
    const PeriodicWeights back = parse_weights(weights_text(w));
    EXPECT_EQ(back, w);
    EXPECT_EQ(weights_hash(back), weights_hash(w));
  }
  const fs::path f = scratch_dir() / "w.json";
  const PeriodicWeights w = spider_step(PeriodicWeights::random(2, 9));
  write_file(f, weights_text(w));
  EXPECT_EQ(load_weights(f), w);
}

TEST(WeightsFile, RejectsMalformed) {
  EXPECT_THROW(parse_weights("{"), InvalidArgument);
  EXPECT_THROW(parse_weights(R"({"n":1,"time_parity":0,"faces":[]})"), InvalidArgument);
  EXPECT_THROW(parse_weights(R"({"n":1,"time_parity":0,"faces":[{"i":0,"j":1,"a":1,"b":1,"c":1,"d":1},{"i":1,"j":1,"a":1,"b":1,"c":1,"d":1}]})"),
               InvalidArgument);
  EXPECT_THROW(parse_weights(R"({"n":1,"time_parity":0,"faces":[{"i":0,"j":0,"a":1,"b":1,"c":1,"d":-1},{"i":1,"j":1,"a":1,"b":1,"c":1,"d":1}]})"),
               Error);
  EXPECT_THROW(load_weights("/nonexistent/w.json"), IoError);
}

TEST(Hash, KnownVectorsAndSensitivity) {
  EXPECT_EQ(fnv1a64(""), 0xcbf29ce484222325ULL);
  EXPECT_EQ(fnv1a64("a"), 0xaf63dc4c8601ec8cULL);
  EXPECT_EQ(fnv1a64("foobar"), 0x85944171f73967e8ULL);
  PeriodicWeights w = PeriodicWeights::uniform(1);
  const std::string h0 = weights_hash(w);
  w.set_tuple({0, 0}, {1, 1, 1, std::nextafter(1.0, 2.0)});
  EXPECT_NE(weights_hash(w), h0);
}

TEST(SampleDump, RoundTripAndCorruption) {
  const PeriodicWeights w = PeriodicWeights::random(2, 3);
  const AztecSample s = sample_aztec(12, w, 99);
  const SampleDump d{s.config, 12, 99, weights_hash(w)};
  const std::string text = dump_text(d);
  const SampleDump back = parse_dump(text);
  EXPECT_EQ(back.config, s.config);
  EXPECT_EQ(back.time, 12);
  EXPECT_EQ(back.seed, 99u);
  EXPECT_EQ(back.weights_hash, weights_hash(w));
  EXPECT_EQ(dump_text(back), text);

  std::string bad = text;
  bad[bad.find_first_of("NESW", bad.find("weights"))] = 'X';
  EXPECT_THROW(parse_dump(bad), InvalidArgument);
  // swap one direction for another valid character: matching breaks
  std::string broken = text;
  const std::size_t at = broken.find('E', broken.find("weights"));
  broken[at] = broken[at + 1] == 'W' ? 'N' : 'W';
  EXPECT_THROW(parse_dump(broken), InvalidArgument);
  EXPECT_THROW(parse_dump(text.substr(0, text.size() / 2)), InvalidArgument);
  EXPECT_THROW(parse_dump("hello\n"), InvalidArgument);
}

TEST(Grid, EmptyIsHeaderOnly) {
  Grid g;
  g.meta = {{"weights_hash", "abc"}, {"tol", "1e-6"}};
  g.columns = {"b1", "b2", "R"};
  const std::string text = grid_text(g);
  EXPECT_EQ(text, "# weights_hash=abc\n# tol=1e-6\nb1,b2,R\n");
  EXPECT_EQ(parse_grid(text), g);
}

TEST(Grid, RandomRoundTripIsExact) {
  std::mt19937_64 gen(5);
  std::uniform_real_distribution<double> u(-1, 1);
  Grid g;
  g.meta = {{"seed", "5"}};
  g.columns = {"a", "b", "c"};
  for (int r = 0; r < 500; ++r)
    g.rows.push_back({u(gen) * std::pow(10.0, r % 40 - 20), u(gen), std::ldexp(u(gen), -1060)});
  g.rows.push_back({0.0, -0.0, 1e308});
  const fs::path f = scratch_dir() / "g.csv";
  save_grid(f, g);
  const Grid back = load_grid(f);
  ASSERT_EQ(back.rows.size(), g.rows.size());
  for (std::size_t r = 0; r < g.rows.size(); ++r)
    for (std::size_t c = 0; c < 3; ++c) EXPECT_EQ(std::bit_cast<std::uint64_t>(back.rows[r][c]), std::bit_cast<std::uint64_t>(g.rows[r][c]));
  EXPECT_THROW(parse_grid("a,b\n1,2,3\n"), InvalidArgument);
  EXPECT_THROW(parse_grid("a,b\n1,x\n"), InvalidArgument);
}

TEST(Grid, LimitShapeRoundTrip) {
  const EmpiricalShape s = empirical_limit_shape(PeriodicWeights::random(1, 4), 16, 5, 8);
  const Grid g = shape_to_grid(s, "feed");
  EXPECT_EQ(g.rows.size(), 2u * 16 * 17 + 1);
  const EmpiricalShape back = shape_from_grid(parse_grid(grid_text(g)));
  EXPECT_EQ(back.sum, s.sum);
  EXPECT_EQ(back.sum_sq, s.sum_sq);
  EXPECT_EQ(back.samples, s.samples);
  EXPECT_EQ(back.spacing, s.spacing);
  EXPECT_EQ(back.N, s.N);
  Grid cut = g;
  cut.rows.pop_back();
  EXPECT_THROW(shape_from_grid(cut), InvalidArgument);
}

TEST(Polynomial, DumpParsesBack) {
  const LaurentPoly2 P = characteristic_polynomial(PeriodicWeights::random(2, 6));
  const LaurentPoly2 back = parse_polynomial(P.dump());
  ASSERT_EQ(back.coeffs().size(), P.coeffs().size());
  for (const auto& [key, c] : P.coeffs()) EXPECT_EQ(back.coeff(key.first, key.second), c);
  // stable (j, k) ordering
  const std::string d = P.dump();
  EXPECT_EQ(d.substr(0, d.find(' ')), std::to_string(P.min_j()));
}

TEST(SpeedRecord, JsonFields) {
  const SpeedEstimate e = speed_kasteleyn(PeriodicWeights::uniform(1), {0.3, 0.2}, 4);
  const json j = speed_to_json(e);
  EXPECT_EQ(j.at("method"), "kasteleyn-sum");
  EXPECT_EQ(j.at("v").get<double>(), e.v);
  EXPECT_EQ(j.at("terms").size(), 4u);
  EXPECT_EQ(json::parse(j.dump()).at("error_bar").get<double>(), e.error_bar);
}

TEST(Render, AztecOneHasTwoDominoes) {
  const AztecSample s = sample_aztec(1, PeriodicWeights::uniform(1), 3);
  const std::string svg = render_svg(s.config, 1);
  EXPECT_EQ(count_rects(svg), 2);
  const std::string ppm = render_ppm(s.config, 1, {.scale = 5});
  EXPECT_EQ(ppm.substr(0, 3), "P6\n");
  EXPECT_EQ(ppm.size(), std::string("P6\n10 10\n255\n").size() + 10 * 10 * 3);
}

TEST(Render, DeterministicBytes) {
  const AztecSample s = sample_aztec(30, PeriodicWeights::random(2, 2), 4);
  EXPECT_EQ(render_ppm(s.config, 30), render_ppm(s.config, 30));
  EXPECT_EQ(render_svg(s.config, 30), render_svg(s.config, 30));
  EXPECT_EQ(count_rects(render_svg(s.config, 30)), 30 * 31);
}

TEST(Render, FrozenCornersAreBrickwork) {
  const AztecSample s = sample_aztec(200, PeriodicWeights::uniform(1), 8);
  const CornerOrder c = corner_order(s.config, 200);
  EXPECT_GT(c.fraction, 0.99);
  EXPECT_GT(c.counted, 1000);
  // the four corners carry four different classes
  std::array<bool, 4> used{};
  for (int m : c.majority) used[m] = true;
  EXPECT_EQ(std::count(used.begin(), used.end(), true), 4);
}
