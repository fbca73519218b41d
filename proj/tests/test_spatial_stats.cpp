#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "sguide/spatial_stats.hpp"

using namespace sguide;

namespace {

ScalarGrid random_distribution(int h, int w, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  ScalarGrid g(h, w);
  for (double& v : g.values()) v = u(rng);
  g *= 1.0 / g.sum();
  return g;
}

// Centroid and variance written out with 1-based indices, independent of the
// library's cell_center helper.
struct Moments {
  double x = 0.0;
  double y = 0.0;
  double var = 0.0;
};

Moments oracle_moments(const ScalarGrid& m) {
  const int H = m.height();
  const int W = m.width();
  Moments o;
  for (int h = 1; h <= H; ++h) {
    for (int w = 1; w <= W; ++w) {
      o.x += m(h - 1, w - 1) * (w - 0.5) / W;
      o.y += m(h - 1, w - 1) * (h - 0.5) / H;
    }
  }
  for (int h = 1; h <= H; ++h) {
    for (int w = 1; w <= W; ++w) {
      const double dx = (w - 0.5) / W - o.x;
      const double dy = (h - 0.5) / H - o.y;
      o.var += m(h - 1, w - 1) * (dx * dx + dy * dy);
    }
  }
  return o;
}

ScalarGrid rotate90(const ScalarGrid& g) {
  ScalarGrid out(g.width(), g.height());
  for (int h = 0; h < g.height(); ++h)
    for (int w = 0; w < g.width(); ++w) out(w, g.height() - 1 - h) = g(h, w);
  return out;
}

}  // namespace

TEST(Centroid, UniformMapIsCentre) {
  for (int n : {1, 4, 7, 32}) {
    const Centroid c = centroid(ScalarGrid(n, n, 1.0 / (n * n)));
    EXPECT_NEAR(c.x, 0.5, 1e-15);
    EXPECT_NEAR(c.y, 0.5, 1e-15);
  }
}

TEST(Centroid, UnitMassAtFirstCell) {
  ScalarGrid m(4, 4);
  m(0, 0) = 1.0;
  const Centroid c = centroid(m);
  EXPECT_DOUBLE_EQ(c.x, 0.125);
  EXPECT_DOUBLE_EQ(c.y, 0.125);
  EXPECT_DOUBLE_EQ(variance(m, c), 0.0);
}

TEST(Centroid, TwoCellExample) {
  ScalarGrid m(4, 4);
  m(1, 0) = 0.5;
  m(1, 3) = 0.5;
  const Centroid c = centroid(m);
  EXPECT_DOUBLE_EQ(c.x, 0.5);
  EXPECT_DOUBLE_EQ(c.y, 0.375);
  EXPECT_DOUBLE_EQ(variance(m, c), 0.140625);
}

TEST(Centroid, RejectsNonDistribution) {
  EXPECT_THROW(centroid(ScalarGrid(2, 2, 1.0)), std::invalid_argument);
  EXPECT_THROW(variance(ScalarGrid(2, 2, 1.0), Centroid{}), std::invalid_argument);
}

TEST(Centroid, MatchesOracleOnRandomGrids) {
  std::mt19937_64 rng(2024);
  std::uniform_int_distribution<int> side(1, 40);
  for (int trial = 0; trial < 100; ++trial) {
    const ScalarGrid m = random_distribution(side(rng), side(rng), rng);
    const Moments o = oracle_moments(m);
    const Centroid c = centroid(m);
    EXPECT_NEAR(c.x, o.x, 1e-12);
    EXPECT_NEAR(c.y, o.y, 1e-12);
    EXPECT_NEAR(variance(m, c), o.var, 1e-12);
  }
}

TEST(Variance, UniformApproachesOneSixth) {
  // Discrete uniform on n cell centres: (1 - 1/n^2) / 12 per axis.
  const int n = 32;
  const double closed_form = 2.0 * (1.0 - 1.0 / (n * n)) / 12.0;
  const ScalarGrid m(n, n, 1.0 / (n * n));
  const double v = variance(m, centroid(m));
  EXPECT_NEAR(v, closed_form, 1e-12);
  EXPECT_LT(std::abs(v - 1.0 / 6.0), 5e-3);
}

TEST(Variance, NeverExceedsHalf) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 50; ++trial) {
    const ScalarGrid m = random_distribution(8, 8, rng);
    const double v = variance(m, centroid(m));
    EXPECT_GE(v, 0.0);
    EXPECT_LE(v, 0.5);
  }
  ScalarGrid corners(8, 8);
  corners(0, 0) = corners(7, 7) = corners(0, 7) = corners(7, 0) = 0.25;
  EXPECT_LE(variance(corners, centroid(corners)), 0.5);
}

TEST(Centroid, ShiftOneCellMovesByOneOverW) {
  std::mt19937_64 rng(9);
  ScalarGrid m(10, 12);
  ScalarGrid inner = random_distribution(6, 6, rng);
  for (int h = 0; h < 6; ++h)
    for (int w = 0; w < 6; ++w) m(h + 2, w + 2) = inner(h, w);
  ScalarGrid shifted(10, 12);
  for (int h = 0; h < 10; ++h)
    for (int w = 0; w + 1 < 12; ++w) shifted(h, w + 1) = m(h, w);
  const Centroid a = centroid(m);
  const Centroid b = centroid(shifted);
  EXPECT_NEAR(b.x - a.x, 1.0 / 12.0, 1e-12);
  EXPECT_NEAR(b.y, a.y, 1e-12);
}

TEST(Variance, InvariantUnderRotationOfSymmetricMap) {
  ScalarGrid m(9, 9);
  m(4, 4) = 0.4;
  m(1, 4) = 0.1;
  m(7, 4) = 0.1;
  m(4, 2) = 0.2;
  m(4, 6) = 0.2;
  const double v = variance(m, centroid(m));
  const ScalarGrid r = rotate90(m);
  EXPECT_NEAR(variance(r, centroid(r)), v, 1e-14);
}

TEST(RelationDelta, Examples) {
  EXPECT_NEAR(relation_delta({0.7, 0.5}, {0.2, 0.5}, Relation::Right), 0.5, 1e-15);
  EXPECT_NEAR(relation_delta({0.5, 0.2}, {0.5, 0.8}, Relation::Above), 0.6, 1e-15);
  for (Relation r : kDirectionalRelations) EXPECT_EQ(relation_delta({0.3, 0.6}, {0.3, 0.6}, r), 0.0);
  EXPECT_NEAR(relation_delta({0.1, 0.0}, {0.4, 0.0}, Relation::Near), 0.3, 1e-15);
}

TEST(RelationDelta, Antisymmetry) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 100; ++trial) {
    const Centroid a{u(rng), u(rng)};
    const Centroid b{u(rng), u(rng)};
    EXPECT_EQ(relation_delta(a, b, Relation::Left), -relation_delta(a, b, Relation::Right));
    EXPECT_EQ(relation_delta(a, b, Relation::Above), -relation_delta(a, b, Relation::Below));
  }
}

TEST(StatsForToken, SelectionAndCompositionalOracle) {
  std::mt19937_64 rng(13);
  AttentionStack stack;
  for (Level level : kAllLevels) {
    const int side = 32 / level_factor(level);
    for (int layer = 0; layer < kLayersPerLevel; ++layer)
      for (Token t : {Token::A, Token::B}) stack.at(level, layer, t) = random_distribution(side, side, rng);
  }
  const Level coarse[] = {Level::Coarse};
  const TokenStats only_coarse = stats_for_token(stack, Token::A, coarse);
  EXPECT_EQ(only_coarse.count(), 3u);
  EXPECT_TRUE(only_coarse.has(Level::Coarse));
  EXPECT_FALSE(only_coarse.has(Level::Mid));
  EXPECT_THROW(only_coarse.at(Level::Mid, 0), std::invalid_argument);

  const TokenStats all = stats_for_token(stack, Token::B, kAllLevels);
  EXPECT_EQ(all.count(), 9u);
  for (Level level : kAllLevels) {
    for (int layer = 0; layer < kLayersPerLevel; ++layer) {
      const ScalarGrid& m = stack.at(level, layer, Token::B);
      const Centroid c = centroid(m);
      EXPECT_EQ(all.at(level, layer).centroid.x, c.x);
      EXPECT_EQ(all.at(level, layer).centroid.y, c.y);
      EXPECT_EQ(all.at(level, layer).variance, variance(m, c));
    }
  }
}

TEST(StatsForToken, IdenticalMapsGiveIdenticalStats) {
  std::mt19937_64 rng(17);
  const ScalarGrid m = random_distribution(8, 8, rng);
  AttentionStack stack;
  for (int layer = 0; layer < kLayersPerLevel; ++layer) stack.at(Level::Coarse, layer, Token::A) = m;
  const Level coarse[] = {Level::Coarse};
  const TokenStats s = stats_for_token(stack, Token::A, coarse);
  for (int layer = 1; layer < kLayersPerLevel; ++layer) {
    EXPECT_EQ(s.at(Level::Coarse, layer).centroid.x, s.at(Level::Coarse, 0).centroid.x);
    EXPECT_EQ(s.at(Level::Coarse, layer).variance, s.at(Level::Coarse, 0).variance);
  }
}

TEST(StatsForToken, MissingLevelRejected) {
  AttentionStack stack;
  const Level mid[] = {Level::Mid};
  EXPECT_THROW(stats_for_token(stack, Token::A, mid), std::invalid_argument);
}
