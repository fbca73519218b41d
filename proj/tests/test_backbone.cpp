#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "sguide/backbone.hpp"

using namespace sguide;

namespace {

const Backbone& default_backbone() {
  static const Backbone b{BackboneConfig{}};
  return b;
}

const Schedule& default_schedule() {
  static const Schedule s(50, 1e-4, 0.02);
  return s;
}

std::pair<int, int> argmax(const ScalarGrid& g) {
  int bh = 0;
  int bw = 0;
  for (int h = 0; h < g.height(); ++h)
    for (int w = 0; w < g.width(); ++w)
      if (g(h, w) > g(bh, bw)) {
        bh = h;
        bw = w;
      }
  return {bh, bw};
}

double dot(const ScalarGrid& a, const ScalarGrid& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a.values()[i] * b.values()[i];
  return s;
}

PromptTriplet triplet(const char* text) {
  return parse_prompt(text, default_backbone().vocab());
}

}  // namespace

TEST(Schedule, SingleStepProduct) {
  const Schedule s(1, 1e-4, 0.02);
  EXPECT_DOUBLE_EQ(s.alpha_bar(1), 1.0 - 1e-4);
  EXPECT_EQ(s.alpha_bar(0), 1.0);
}

TEST(Schedule, LinearBetasAndRunningProduct) {
  const Schedule& s = default_schedule();
  EXPECT_DOUBLE_EQ(s.beta(1), 1e-4);
  EXPECT_DOUBLE_EQ(s.beta(50), 0.02);
  double product = 1.0;
  for (int t = 1; t <= 50; ++t) {
    product *= 1.0 - s.beta(t);
    EXPECT_NEAR(s.alpha_bar(t), product, 1e-15);
    if (t > 1) EXPECT_LT(s.alpha_bar(t), s.alpha_bar(t - 1));
  }
}

TEST(Schedule, RejectsBadParameters) {
  EXPECT_THROW(Schedule(0, 1e-4, 0.02), std::invalid_argument);
  EXPECT_THROW(Schedule(10, 0.0, 0.02), std::invalid_argument);
  EXPECT_THROW(Schedule(10, 0.03, 0.02), std::invalid_argument);
  EXPECT_THROW(Schedule(10, 1e-4, 1.0), std::invalid_argument);
  EXPECT_THROW(default_schedule().beta(51), std::out_of_range);
}

TEST(Filters, CleanStampScoresOneAtItsCentre) {
  const Backbone& b = default_backbone();
  for (std::size_t k = 0; k < b.vocab().size(); ++k) {
    const Latent clean = b.synthesize_single(b.vocab().at(k).id, {0.5, 0.5});
    const ScalarGrid r = b.response(clean.channel_mean(), k);
    EXPECT_NEAR(r(15, 15), 1.0, 1e-12) << b.vocab().at(k).id;
    EXPECT_EQ(argmax(r), std::make_pair(15, 15));
  }
}

TEST(Filters, EachObjectAnswersMostToItsOwnScale) {
  const Backbone& b = default_backbone();
  const std::size_t n = b.vocab().size();
  std::vector<std::vector<double>> table(n, std::vector<double>(n));
  for (std::size_t blob = 0; blob < n; ++blob) {
    const ScalarGrid image = b.synthesize_single(b.vocab().at(blob).id, {0.5, 0.5}).channel_mean();
    for (std::size_t f = 0; f < n; ++f) table[blob][f] = b.response(image, f).max();
  }
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j) continue;
      EXPECT_LT(table[i][j], table[j][j] + 1e-12) << "blob " << i << " filter " << j;
      EXPECT_LT(table[j][i], table[i][i] + 1e-12) << "blob " << j << " filter " << i;
    }
  }
}

TEST(Filters, AdjointSatisfiesDotIdentity) {
  const Backbone& b = default_backbone();
  std::mt19937_64 rng(1);
  std::normal_distribution<double> n(0.0, 1.0);
  ScalarGrid x(32, 32);
  ScalarGrid y(32, 32);
  for (double& v : x.values()) v = n(rng);
  for (double& v : y.values()) v = n(rng);
  for (std::size_t k : {std::size_t{0}, std::size_t{7}, std::size_t{15}}) {
    EXPECT_NEAR(dot(b.response(x, k), y), dot(x, b.response_adjoint(y, k)), 1e-9);
  }
}

TEST(Filters, ResponseEqualsDenseMatchedFilter) {
  const Backbone& b = default_backbone();
  std::mt19937_64 rng(2);
  std::normal_distribution<double> n(0.0, 1.0);
  ScalarGrid x(32, 32);
  for (double& v : x.values()) v = n(rng);
  for (std::size_t k : {std::size_t{1}, std::size_t{9}}) {
    const auto& f = b.filter(k);
    ScalarGrid dense = reference::cross_correlate(x, f.matched);
    dense *= 1.0 / f.self_response;
    const ScalarGrid r = b.response(x, k);
    for (std::size_t i = 0; i < r.size(); ++i) EXPECT_NEAR(r.values()[i], dense.values()[i], 1e-10);
  }
}

TEST(Filters, ParallelBankMatchesSerial) {
  const Backbone& b = default_backbone();
  const Latent z = standard_normal_latent(1, 32, 32, 3);
  const auto par = b.all_responses(z.channel_mean());
  const auto ser = b.all_responses_serial(z.channel_mean());
  ASSERT_EQ(par.size(), ser.size());
  for (std::size_t k = 0; k < par.size(); ++k) EXPECT_EQ(par[k], ser[k]);
}

TEST(Synthesis, OppositeCornersGiveDisjointUnitBumps) {
  const Backbone& b = default_backbone();
  const Latent z = b.synthesize_clean(triplet("a cup to the left of a cat"), {0.1, 0.1}, {0.9, 0.9});
  const ScalarGrid& g = z.channel(0);
  EXPECT_DOUBLE_EQ(g(placement_cell(0.1, 32), placement_cell(0.1, 32)), 1.0);
  EXPECT_DOUBLE_EQ(g(placement_cell(0.9, 32), placement_cell(0.9, 32)), 1.0);
  EXPECT_DOUBLE_EQ(g.max(), 1.0);
  EXPECT_DOUBLE_EQ(g(15, 15), 0.0);
}

TEST(Synthesis, IdenticalPlacementsClipAtOnePointFive) {
  BackboneConfig cfg;
  cfg.vocab = Vocabulary({{"a", "ant", 7, 1.2}, {"b", "bee", 7, 1.2}});
  const Backbone b(cfg);
  const Latent z = b.synthesize_clean(parse_prompt("an ant above a bee", cfg.vocab), {0.5, 0.5},
                                      {0.5, 0.5});
  EXPECT_DOUBLE_EQ(z.channel(0).max(), 1.5);
  EXPECT_GE(z.channel(0).min(), 0.0);
}

TEST(Synthesis, MatchedFilterFindsObjectColumn) {
  const Backbone& b = default_backbone();
  const PromptTriplet t = triplet("a dog to the left of a horse");
  const Latent z = b.synthesize_clean(t, {0.25, 0.5}, {0.75, 0.5});
  const ScalarGrid r = b.response(z.channel_mean(), b.vocab().index_of(t.object_a));
  EXPECT_EQ(argmax(r).second + 1, static_cast<int>(std::ceil(0.25 * 32)));
}

TEST(Synthesis, RejectsPlacementOutsideUnitSquare) {
  const Backbone& b = default_backbone();
  EXPECT_THROW(b.synthesize_single("dog", {1.2, 0.5}), std::invalid_argument);
}

TEST(AddNoise, ZeroSignalAndDeterminism) {
  const Schedule& s = default_schedule();
  const Latent x0(1, 32, 32);
  const auto [xt, eps] = add_noise(x0, 20, s, 9);
  for (std::size_t i = 0; i < xt.channel(0).size(); ++i) {
    EXPECT_NEAR(xt.channel(0).values()[i], std::sqrt(1.0 - s.alpha_bar(20)) * eps.channel(0).values()[i],
                1e-15);
  }
  const auto again = add_noise(x0, 20, s, 9);
  EXPECT_EQ(again.first, xt);
  EXPECT_EQ(again.second, eps);
  EXPECT_THROW(add_noise(x0, 0, s, 9), std::out_of_range);
  EXPECT_THROW(add_noise(x0, 51, s, 9), std::out_of_range);
}

TEST(Denoise, CleanInputPredictsNearZeroNoise) {
  const Backbone& b = default_backbone();
  const Schedule& s = default_schedule();
  // The step whose alpha_bar is closest to 0.9.
  int t = 1;
  for (int k = 1; k <= s.steps(); ++k)
    if (std::abs(s.alpha_bar(k) - 0.9) < std::abs(s.alpha_bar(t) - 0.9)) t = k;
  const PromptTriplet tr = triplet("a cup to the left of a horse");
  Latent z = b.synthesize_clean(tr, {0.25, 0.3}, {0.7, 0.7});
  z *= std::sqrt(s.alpha_bar(t));
  const DenoiserOutput out = b.denoise(z, t, tr, s);
  EXPECT_LT(out.eps_conditional.max_abs(), 0.15);
}

TEST(Denoise, ZeroLatentGivesUniformAttention) {
  const Backbone& b = default_backbone();
  const DenoiserOutput out = b.denoise(Latent(1, 32, 32), 10, triplet("a cat above a dog"),
                                       default_schedule());
  for (Level level : kAllLevels) {
    for (int layer = 0; layer < kLayersPerLevel; ++layer) {
      for (Token tok : {Token::A, Token::B}) {
        const ScalarGrid& m = out.attention.at(level, layer, tok);
        const double u = 1.0 / static_cast<double>(m.size());
        for (double v : m.values()) EXPECT_NEAR(v, u, 1e-15);
      }
    }
  }
}

TEST(Denoise, FineAttentionPeaksOnTheStamp) {
  const Backbone& b = default_backbone();
  const PromptTriplet tr = triplet("a bottle to the left of a car");
  const Latent z = b.synthesize_clean(tr, {0.25, 0.5}, {0.75, 0.5});
  const DenoiserOutput out = b.denoise(z, 1, tr, default_schedule());
  const auto [h, w] = argmax(out.attention.at(Level::Fine, kLayersPerLevel - 1, Token::A));
  EXPECT_LE(std::abs(h - placement_cell(0.5, 32)), 1);
  EXPECT_LE(std::abs(w - placement_cell(0.25, 32)), 1);
}

TEST(Denoise, AttentionMapsAreDistributionsAndSharpenWithLayer) {
  const Backbone& b = default_backbone();
  const PromptTriplet tr = triplet("a cat above a dog");
  const Latent z = standard_normal_latent(1, 32, 32, 77);
  const DenoiserOutput out = b.denoise(z, 30, tr, default_schedule());
  for (Level level : kAllLevels) {
    const int side = 32 / level_factor(level);
    for (int layer = 0; layer < kLayersPerLevel; ++layer) {
      for (Token tok : {Token::A, Token::B}) {
        const ScalarGrid& m = out.attention.at(level, layer, tok);
        EXPECT_EQ(m.height(), side);
        EXPECT_TRUE(m.is_distribution(1e-12));
      }
      if (layer > 0) {
        EXPECT_LT(b.attention_temperature(level, layer), b.attention_temperature(level, layer - 1));
      }
    }
  }
}

TEST(Denoise, DeterministicAndShapeChecked) {
  const Backbone& b = default_backbone();
  const PromptTriplet tr = triplet("a cat above a dog");
  const Latent z = standard_normal_latent(1, 32, 32, 5);
  const DenoiserOutput a = b.denoise(z, 25, tr, default_schedule());
  const DenoiserOutput c = b.denoise(z, 25, tr, default_schedule());
  EXPECT_EQ(a.eps_conditional, c.eps_conditional);
  EXPECT_EQ(a.eps_unconditional, c.eps_unconditional);
  EXPECT_EQ(a.attention.at(Level::Mid, 1, Token::B), c.attention.at(Level::Mid, 1, Token::B));
  EXPECT_THROW(b.denoise(Latent(1, 16, 16), 25, tr, default_schedule()), std::invalid_argument);
  EXPECT_THROW(b.denoise(z, 0, tr, default_schedule()), std::out_of_range);
}

TEST(Denoise, TranslationMovesFineArgmax) {
  const Backbone& b = default_backbone();
  const PromptTriplet tr = triplet("a clock below a horse");
  const std::size_t a = b.vocab().index_of(tr.object_a);
  const Latent z0 = b.synthesize_single(tr.object_a, {0.4, 0.4});
  const auto base = argmax(b.attention_map(b.response(z0.channel_mean(), a), Level::Fine, 2));
  for (auto [dy, dx] : {std::pair{0, 3}, std::pair{4, 0}, std::pair{-2, 5}}) {
    ScalarGrid shifted(32, 32);
    const ScalarGrid& src = z0.channel(0);
    for (int h = 0; h < 32; ++h)
      for (int w = 0; w < 32; ++w) {
        const int y = h + dy;
        const int x = w + dx;
        if (y >= 0 && y < 32 && x >= 0 && x < 32) shifted(y, x) = src(h, w);
      }
    const auto moved = argmax(b.attention_map(b.response(shifted, a), Level::Fine, 2));
    EXPECT_EQ(moved.first, base.first + dy);
    EXPECT_EQ(moved.second, base.second + dx);
  }
}

TEST(Denoise, UnconditionalBranchKeepsDetectedObjects) {
  const Backbone& b = default_backbone();
  const PromptTriplet tr = triplet("a cup to the left of a horse");
  const Latent z = b.synthesize_clean(tr, {0.25, 0.3}, {0.7, 0.7});
  const ScalarGrid field = z.channel_mean();
  auto classes = b.unconditional_classes(field, b.all_responses(field));
  std::sort(classes.begin(), classes.end());
  std::vector<std::size_t> expected{b.vocab().index_of("cup"), b.vocab().index_of("horse")};
  std::sort(expected.begin(), expected.end());
  EXPECT_EQ(classes, expected);
}

TEST(BackboneConfig, Validation) {
  BackboneConfig cfg;
  cfg.height = 30;
  EXPECT_THROW(cfg.validate(), std::invalid_argument);
  cfg = BackboneConfig{};
  cfg.layer_temperature_factors = {1.0, 1.0, 0.5};
  EXPECT_THROW(cfg.validate(), std::invalid_argument);
  cfg = BackboneConfig{};
  cfg.unconditional_classes = 0;
  EXPECT_THROW(cfg.validate(), std::invalid_argument);
  cfg = BackboneConfig{};
  cfg.height = cfg.width = 8;
  EXPECT_THROW(cfg.validate(), std::invalid_argument);
}
