#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <sys/wait.h>
#include <unistd.h>

#include "domino/io.hpp"

using namespace domino;
namespace fs = std::filesystem;

namespace {

const fs::path& root() {
  static const fs::path p = [] {
    const fs::path d = fs::temp_directory_path() / ("domino_cli_" + std::to_string(::getpid()));
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
  }();
  return p;
}

struct Result {
  int code;
  std::string out;
};

/// Runs the CLI with stdout captured to a file; stderr is discarded.
Result cli(const std::string& args) {
  static int counter = 0;
  const fs::path captured = root() / ("stdout_" + std::to_string(counter++));
  const std::string cmd = std::string(DOMINO_CLI_PATH) + " " + args + " > " + captured.string() + " 2>/dev/null";
  const int status = std::system(cmd.c_str());
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, read_file(captured)};
}

std::string dir(const std::string& name) { return (root() / name).string(); }

}  // namespace

TEST(Cli, SampleDumpsAreByteIdentical) {
  ASSERT_EQ(cli("sample-aztec --n 1 --uniform --N 8 --seed 7 --out " + dir("s1")).code, 0);
  ASSERT_EQ(cli("sample-aztec --n 1 --uniform --N 8 --seed 7 --out " + dir("s2")).code, 0);
  const std::string a = read_file(dir("s1") + "/aztec_N8_seed7.dump");
  EXPECT_EQ(a, read_file(dir("s2") + "/aztec_N8_seed7.dump"));
  EXPECT_EQ(parse_dump(a).config.region().size, 8);
}

TEST(Cli, ExitCodes) {
  EXPECT_EQ(cli("sample-aztec --uniform --N 8 --out " + dir("x")).code, 1);  // no seed
  EXPECT_EQ(cli("no-such-command").code, 1);
  EXPECT_EQ(cli("").code, 1);
  EXPECT_EQ(cli("speed --uniform --rho 0.3").code, 1);
  EXPECT_EQ(cli("charpoly --out " + dir("x")).code, 1);  // no weights source
  EXPECT_EQ(cli("charpoly --uniform --config /nonexistent.json --out " + dir("x")).code, 1);
  EXPECT_EQ(cli("render --dump /nonexistent.dump --out " + dir("x")).code, 1);
  EXPECT_EQ(cli("speed --uniform --rho 2 0 --out " + dir("x")).code, 1);  // outside the polygon
  // limit shape far too coarse to resolve a near-corner slope
  EXPECT_EQ(cli("speed --uniform --rho 0.999 0 --method limit-shape --N 16 --samples 2 --seed 1 --reference-N 0 --out " + dir("x")).code, 2);
  EXPECT_EQ(cli("--help").code, 0);
}

TEST(Cli, ClassifyFindsFiveSmoothSlopes) {
  write_file(dir("w2.json"), weights_text(PeriodicWeights::random(2, 5, 0.5, 2.0)));
  ASSERT_EQ(cli("classify-slopes --weights " + dir("w2.json") + " --out " + dir("cls")).code, 0);
  const json j = json::parse(read_file(dir("cls") + "/classify_slopes.json"));
  EXPECT_EQ(j.at("smooth_slopes").size(), 5u);
  EXPECT_EQ(j.at("provenance").at("weights_hash"), weights_hash(PeriodicWeights::random(2, 5, 0.5, 2.0)));
}

TEST(Cli, SpeedAtZeroSlope) {
  ASSERT_EQ(cli("speed --rho 0 0 --uniform --kmax 64 --out " + dir("sp")).code, 0);
  const json j = json::parse(read_file(dir("sp") + "/speed.json"));
  EXPECT_LT(std::abs(j.at("v").get<double>()), 1e-3);
  EXPECT_EQ(j.at("method"), "kasteleyn-sum");
}

TEST(Cli, StdoutOnlyOnRequest) {
  const Result quiet = cli("charpoly --uniform --out " + dir("cp"));
  ASSERT_EQ(quiet.code, 0);
  EXPECT_TRUE(quiet.out.empty());
  const Result loud = cli("charpoly --uniform --stdout --out " + dir("cp"));
  ASSERT_EQ(loud.code, 0);
  EXPECT_NE(loud.out.find(read_file(dir("cp") + "/charpoly.txt")), std::string::npos);
}

TEST(Cli, ConfigFileWithFlagsWinning) {
  write_file(dir("cfg.json"), R"({"n": 2, "uniform": true, "N": 4, "seed": 1, "kmax": 3})");
  ASSERT_EQ(cli("sample-aztec --config " + dir("cfg.json") + " --N 5 --out " + dir("cfg")).code, 0);
  const SampleDump d = parse_dump(read_file(dir("cfg") + "/aztec_N5_seed1.dump"));
  EXPECT_EQ(d.config.region().size, 5);
  EXPECT_EQ(d.weights_hash, weights_hash(PeriodicWeights::uniform(2)));
  write_file(dir("bad.json"), "[1, 2");
  EXPECT_EQ(cli("sample-aztec --config " + dir("bad.json") + " --out " + dir("cfg")).code, 1);
}

TEST(Cli, OutputsIndependentOfThreads) {
  ASSERT_EQ(cli("sample-aztec --random-weights 3 --n 2 --N 20 --seed 4 --shape-samples 6 --threads 1 --out " + dir("t1")).code, 0);
  ASSERT_EQ(cli("sample-aztec --random-weights 3 --n 2 --N 20 --seed 4 --shape-samples 6 --threads 3 --out " + dir("t3")).code, 0);
  EXPECT_EQ(read_file(dir("t1") + "/limit_shape_N20.csv"), read_file(dir("t3") + "/limit_shape_N20.csv"));
  EXPECT_EQ(read_file(dir("t1") + "/aztec_N20_seed4.dump"), read_file(dir("t3") + "/aztec_N20_seed4.dump"));
}

TEST(Cli, ShapeGridFeedsHessianWithoutResampling) {
  ASSERT_EQ(cli("sample-aztec --uniform --N 96 --seed 2 --shape-samples 30 --out " + dir("pipe")).code, 0);
  const std::string csv = dir("pipe") + "/limit_shape_N96.csv";
  ASSERT_EQ(cli("hessian --rho 0 0 --shape " + csv + " --out " + dir("pipe")).code, 0);
  const json h = json::parse(read_file(dir("pipe") + "/hessian.json"));
  EXPECT_EQ(h.at("method"), "limit-shape");
  EXPECT_EQ(h.at("samples"), 30);
  EXPECT_LT(h.at("det").get<double>(), 0.0);
  // the grid is reused verbatim by the limit-shape speed estimator too
  ASSERT_EQ(cli("speed --rho 0 0 --method limit-shape --shape " + csv + " --out " + dir("pipe")).code, 0);
  EXPECT_NEAR(json::parse(read_file(dir("pipe") + "/speed.json")).at("v").get<double>(), 0.0, 0.02);
}

TEST(Cli, RenderIsDeterministic) {
  ASSERT_EQ(cli("sample-aztec --uniform --N 1 --seed 3 --out " + dir("r")).code, 0);
  const std::string dump = dir("r") + "/aztec_N1_seed3.dump";
  ASSERT_EQ(cli("render --dump " + dump + " --format svg --out " + dir("r1")).code, 0);
  ASSERT_EQ(cli("render --dump " + dump + " --format svg --out " + dir("r2")).code, 0);
  const std::string a = read_file(dir("r1") + "/aztec_N1_seed3.svg");
  EXPECT_EQ(a, read_file(dir("r2") + "/aztec_N1_seed3.svg"));
  int rects = 0;
  for (auto at = a.find("<rect"); at != std::string::npos; at = a.find("<rect", at + 1)) ++rects;
  EXPECT_EQ(rects, 2);
  ASSERT_EQ(cli("render --dump " + dump + " --out " + dir("r1")).code, 0);
  EXPECT_EQ(read_file(dir("r1") + "/aztec_N1_seed3.ppm").substr(0, 3), "P6\n");
  write_file(dir("corrupt.dump"), "domino-dump 1\nN 1\ntime 1\nseed 3\nweights -\nEW\nNN\n");
  EXPECT_EQ(cli("render --dump " + dir("corrupt.dump") + " --out " + dir("r1")).code, 1);
}

TEST(Cli, WeightsEvolutionKeepsInvariants) {
  ASSERT_EQ(cli("evolve-weights --random-weights 8 --n 2 --steps 30 --out " + dir("ev")).code, 0);
  const Grid g = load_grid(dir("ev") + "/weights_trajectory.csv");
  ASSERT_EQ(g.rows.size(), 31u);
  for (const auto& row : g.rows) {
    EXPECT_NEAR(row[g.column("W1")], g.rows[0][g.column("W1")], 1e-10);
    EXPECT_NEAR(row[g.column("W2")], g.rows[0][g.column("W2")], 1e-10);
    EXPECT_EQ(row[g.column("polygon_same")], 1.0);
  }
  const PeriodicWeights w = load_weights(dir("ev") + "/weights_final.json");
  EXPECT_EQ(w.n(), 2);
}

TEST(Cli, ThermoExports) {
  ASSERT_EQ(cli("ronkin --uniform --grid -1 1 -1 1 --points 3 --out " + dir("th")).code, 0);
  const Grid r = load_grid(dir("th") + "/ronkin.csv");
  EXPECT_EQ(r.rows.size(), 9u);
  EXPECT_NE(r.meta_value("weights_hash"), "");
  ASSERT_EQ(cli("surface-tension --uniform --rho 0.2 0.1 --out " + dir("th")).code, 0);
  EXPECT_LT(json::parse(read_file(dir("th") + "/surface_tension.json")).at("residual").get<double>(), 1e-9);
  ASSERT_EQ(cli("edge-prob --uniform --rho 0 0 --out " + dir("th")).code, 0);
  const json e = json::parse(read_file(dir("th") + "/edge_prob.json"));
  for (const auto& edge : e.at("edges")) EXPECT_NEAR(edge.at("p").get<double>(), 0.25, 1e-10);
  ASSERT_EQ(cli("fluctuations --uniform --N 24 --runs 10 --k-from 4 --seed 5 --out " + dir("th")).code, 0);
  EXPECT_EQ(load_grid(dir("th") + "/fluctuations.csv").rows.size(), 25u);
}
