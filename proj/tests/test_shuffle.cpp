#include <gtest/gtest.h>

#include <boost/math/distributions/chi_squared.hpp>
#include <map>
#include <random>

#include "domino/shuffle.hpp"
#include "oracles.hpp"

using namespace domino;

namespace {

/// Chi-square p-value of sampled tilings against exact weights.
double sampler_p_value(int N, const PeriodicWeights& w, int samples, std::uint64_t seed0) {
  const auto all = oracle::enumerate_matchings(Region::aztec(N));
  std::map<std::string, double> expected;
  double total = 0.0;
  for (const auto& c : all) {
    const double wt = oracle::config_weight(c, w);
    expected[oracle::config_key(c)] = wt;
    total += wt;
  }
  std::map<std::string, int> seen;
  for (int s = 0; s < samples; ++s) {
    const auto r = sample_aztec(N, w, seed0 + s);
    EXPECT_TRUE(validate_matching(r.config));
    ++seen[oracle::config_key(r.config)];
  }
  double chi2 = 0.0;
  for (const auto& [key, wt] : expected) {
    const double e = samples * wt / total;
    const double o = seen.count(key) ? seen[key] : 0;
    chi2 += (o - e) * (o - e) / e;
  }
  EXPECT_EQ(seen.size(), expected.size());
  boost::math::chi_squared dist(static_cast<double>(expected.size() - 1));
  return boost::math::cdf(boost::math::complement(dist, chi2));
}

HeightField random_window_heights(int m, std::mt19937_64& gen, int flips) {
  HeightField h = height_field(window_brickwork(m), 0, {0, 0}, 0);
  std::uniform_int_distribution<int> coord(-m, m);
  for (int t = 0; t < flips; ++t) try_flip(h, {coord(gen), coord(gen)}, gen() % 2 ? 4 : -4, 0);
  return h;
}

}  // namespace

TEST(Shuffle, LocalRule) {
  const FaceWeights one{1, 1, 1, 1};
  // deletion
  EXPECT_EQ(apply_face_rule({true, false, true, false}, 0.3, one), (FaceOccupancy{false, false, false, false}));
  EXPECT_EQ(apply_face_rule({false, true, false, true}, 0.3, one), (FaceOccupancy{false, false, false, false}));
  // sliding to the opposite edge
  EXPECT_EQ(apply_face_rule({true, false, false, false}, 0.3, one), (FaceOccupancy{false, false, true, false}));
  EXPECT_EQ(apply_face_rule({false, false, false, true}, 0.3, one), (FaceOccupancy{false, true, false, false}));
  // creation: vertical iff ticket < bd / (ac + bd) = 8/11
  const FaceWeights w{1, 2, 3, 4};
  EXPECT_EQ(apply_face_rule({false, false, false, false}, 0.72, w), (FaceOccupancy{false, true, false, true}));
  EXPECT_EQ(apply_face_rule({false, false, false, false}, 0.73, w), (FaceOccupancy{true, false, true, false}));
  EXPECT_THROW(apply_face_rule({true, true, false, false}, 0.3, one), InvariantViolation);
}

TEST(Shuffle, FaceIncrements) {
  // vertical pair deleted, then a vertical pair created on the same face
  EXPECT_EQ(face_increment({false, true, false, true}, {false, true, false, true}), -4);
  // a single vertical dimer sliding across
  EXPECT_EQ(face_increment({false, true, false, false}, {false, false, false, true}), -2);
  EXPECT_EQ(face_increment({true, false, true, false}, {true, false, true, false}), 4);
}

TEST(Shuffle, FirstStepBranches) {
  // find seeds whose ticket at (0,0,0) falls on each side of 1/2
  std::map<std::string, int> outcomes;
  for (std::uint64_t seed = 0; seed < 64; ++seed) {
    const Tickets t(seed);
    const auto s = grow_aztec(1, PeriodicWeights::uniform(1), t);
    ASSERT_TRUE(validate_matching(s.config));
    const bool vertical = t.draw(0, 0, 0) < 0.5;
    EXPECT_EQ(s.config.dir({0, 0}), vertical ? Dir::North : Dir::East);
    ++outcomes[oracle::config_key(s.config)];
  }
  EXPECT_EQ(outcomes.size(), 2u);
}

TEST(Shuffle, AztecOneFrequencies) {
  int vertical = 0;
  const int runs = 10000;
  for (int s = 0; s < runs; ++s) vertical += sample_aztec(1, PeriodicWeights::uniform(1), s).config.dir({0, 0}) == Dir::North;
  EXPECT_NEAR(vertical / double(runs), 0.5, 3.0 * std::sqrt(0.25 / runs));
}

TEST(Shuffle, AztecTwoUniformChiSquare) { EXPECT_GT(sampler_p_value(2, PeriodicWeights::uniform(1), 20000, 1), 0.001); }

TEST(Shuffle, AztecTwoHorizontalBias) {
  PeriodicWeights w(1, 0);
  for (auto f : w.stored_faces()) w.set_tuple(f, {2, 1, 2, 1});
  EXPECT_GT(sampler_p_value(2, w, 20000, 50000), 0.001);
}

TEST(Shuffle, AztecThreePeriodTwoWeights) {
  EXPECT_GT(sampler_p_value(3, PeriodicWeights::random(2, 77, 0.3, 3.0), 30000, 90000), 0.001);
}

TEST(Shuffle, HeightOffsetsAgree) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    grow_aztec(30, PeriodicWeights::random(seed % 2 + 1, seed), Tickets(seed),
               [](long long k, const DimerConfig& c, const HeightField& h) {
                 ASSERT_TRUE(validate_matching(c));
                 ASSERT_EQ(h.at({-static_cast<int>(k), 0}), k);
                 ASSERT_EQ(h, aztec_height(c, k));
               });
  }
}

TEST(Shuffle, UpdateHeightRejectsMismatchedStates) {
  const auto s = sample_aztec(3, PeriodicWeights::uniform(1), 1);
  EXPECT_THROW(update_height(s.heights, s.config, s.config, 3), InvalidArgument);
}

TEST(Shuffle, ValidityOverManySteps) {
  int steps = 0;
  for (std::uint64_t seed = 0; steps < 10000; ++seed) {
    grow_aztec(100, PeriodicWeights::random(2, seed, 0.2, 5.0), Tickets(seed),
               [](long long, const DimerConfig& c, const HeightField&) { ASSERT_TRUE(validate_matching(c)); });
    steps += 100;
  }
}

TEST(Shuffle, SamplerIsDeterministic) {
  const auto a = sample_aztec(20, PeriodicWeights::random(2, 3), 42);
  const auto b = sample_aztec(20, PeriodicWeights::random(2, 3), 42);
  EXPECT_EQ(a.config, b.config);
  EXPECT_EQ(a.heights, b.heights);
  EXPECT_THROW(sample_aztec(0, PeriodicWeights::uniform(1), 1), InvalidArgument);
}

TEST(Shuffle, WindowDeterminism) {
  const auto a = window_evolve(window_brickwork(3), PeriodicWeights::uniform(1), 2, Tickets(5));
  const auto b = window_evolve(window_brickwork(3), PeriodicWeights::uniform(1), 2, Tickets(5));
  EXPECT_EQ(a, b);
  EXPECT_EQ(a.size(), 3u);
  EXPECT_THROW(window_evolve(window_brickwork(3), PeriodicWeights::uniform(1), 3, Tickets(5)), InvalidArgument);
}

TEST(Shuffle, WindowLocality) {
  // windows of radius 2M whose configurations agree within l1 distance M
  std::mt19937_64 gen(3);
  const int M = 10;
  for (int rep = 0; rep < 5; ++rep) {
    HeightField h = random_window_heights(2 * M, gen, 20000);
    HeightField g = h;
    std::uniform_int_distribution<int> coord(-2 * M, 2 * M);
    for (int t = 0; t < 20000; ++t) {
      const FaceCoord f{coord(gen), coord(gen)};
      if (l1_norm(f) > M + 1) try_flip(g, f, gen() % 2 ? 4 : -4, 0);
    }
    ASSERT_NE(h, g);
    const PeriodicWeights w = PeriodicWeights::random(2, rep);
    const auto a = window_evolve(WindowState{0, 2 * M, h}, w, M - 1, Tickets(rep));
    const auto b = window_evolve(WindowState{0, 2 * M, g}, w, M - 1, Tickets(rep));
    EXPECT_EQ(a, b);
  }
}

TEST(Shuffle, MonotoneCoupling) {
  std::mt19937_64 gen(9);
  const int M = 8;
  for (int rep = 0; rep < 30; ++rep) {
    HeightField lo = random_window_heights(M, gen, 3000);
    HeightField hi = lo;
    std::uniform_int_distribution<int> coord(-M, M);
    for (int t = 0; t < 300; ++t) try_flip(hi, {coord(gen), coord(gen)}, 4, 0);
    ASSERT_EQ(height_order(lo, hi) == Order::Below || height_order(lo, hi) == Order::Equal, true);
    const PeriodicWeights w = gauge_normalize(PeriodicWeights::random(1 + rep % 2, rep));
    WindowState a{0, M, lo};
    WindowState b{0, M, hi};
    PeriodicWeights wk = w;
    const Tickets t(1000 + rep);
    for (int k = 0; k < M - 1; ++k) {
      window_step(a, wk, t);
      window_step(b, wk, t);
      wk = gauge_normalize(spider_step(wk));
      for (const FaceCoord f : a.heights.faces()) ASSERT_LE(a.heights.at(f), b.heights.at(f));
    }
  }
}

TEST(Shuffle, ConfigHeightRoundTrip) {
  std::mt19937_64 gen(1);
  const HeightField h = random_window_heights(6, gen, 5000);
  const DimerConfig c = config_from_heights(h, 0);
  const HeightField back = height_field(c, 0, {0, 0}, h.at({0, 0}));
  EXPECT_EQ(height_order(back, h), Order::Equal);
}
