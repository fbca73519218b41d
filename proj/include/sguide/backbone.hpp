#pragma once

#include <array>
#include <cstdint>
#include <utility>
#include <vector>

#include "sguide/grid.hpp"
#include "sguide/prompt.hpp"

namespace sguide {

enum class Level { Coarse, Mid, Fine };
enum class Token { A, B };

inline constexpr int kLayersPerLevel = 3;
inline constexpr Level kAllLevels[] = {Level::Coarse, Level::Mid, Level::Fine};

constexpr int level_factor(Level level) {
  switch (level) {
    case Level::Coarse: return 4;
    case Level::Mid: return 2;
    case Level::Fine: return 1;
  }
  return 1;
}

constexpr int level_index(Level level) { return static_cast<int>(level); }
constexpr int token_index(Token token) { return static_cast<int>(token); }
const char* level_name(Level level);

// Linear beta schedule with cumulative products. Step indices are 1-based;
// alpha_bar(0) is defined as 1.
class Schedule {
 public:
  Schedule(int steps, double beta_start, double beta_end);

  int steps() const { return steps_; }
  double beta(int t) const;
  double alpha(int t) const;
  double alpha_bar(int t) const;

  // Coefficients of the deterministic update z_{t-1} = scale(t) * z_t - step_size(t) * eps,
  // with scale(t) = sqrt(alpha_bar(t-1) / alpha_bar(t)) and
  // step_size(t) = scale(t) * sqrt(1 - alpha_bar(t)) - sqrt(1 - alpha_bar(t-1)).
  double scale(int t) const;
  double step_size(int t) const;

 private:
  void check_step(int t) const;

  int steps_;
  std::vector<double> beta_;
  std::vector<double> alpha_bar_;
};

Schedule make_schedule(int steps, double beta_start, double beta_end);

// How the backbone and detector turn a template into a matched filter.
enum class FilterMode {
  // Template minus its projection on the template's sigma-derivative, so a
  // clean unit-peak bump answers most strongly to its own scale.
  ScaleMatched,
  // Template with its support mean removed.
  ZeroMean,
  // The raw unit-peak template.
  Plain,
};

struct BackboneConfig {
  int height = 32;
  int width = 32;
  int channels = 1;
  Vocabulary vocab = Vocabulary::default_vocabulary();
  FilterMode filter = FilterMode::ScaleMatched;
  // Location-belief temperature as a fraction of max |response|.
  double loc_temperature_fraction = 0.02;
  // Attention temperature base per level (coarse, mid, fine), in units of a
  // unit-amplitude matched object's response.
  std::array<double, 3> level_temperature = {1.0, 0.5, 0.2};
  std::array<double, 3> layer_temperature_factors = {1.0, 0.5, 0.25};
  int unconditional_classes = 2;
  double clean_clip = 1.5;
  // Render the strongest object first and locate each later one on the
  // field with the earlier renderings removed. Off: every object is located
  // on the raw field.
  bool explain_away = true;
  // Prior variance of what the templates do not explain. The clean estimate
  // keeps the observed residual with Wiener gain v*abar/(v*abar + 1 - abar);
  // 0 renders templates only.
  double residual_variance = 1.0;

  void validate() const;
};

// Precomputed per-object filter. Response is normalised so that a clean,
// unit-peak stamp of the same object scores 1 at its centre.
// The matched filter is
//   g (x) g - support_mean * 1 (x) 1 - radial_weight * (u (x) g + g (x) u)
// with g the 1-D Gaussian, u(x) = x^2 g(x), so every term stays separable.
struct ObjectFilter {
  ScalarGrid appearance;
  ScalarGrid matched;  // the same filter as a 2-D grid
  std::vector<double> kernel;
  std::vector<double> ones;
  std::vector<double> radial;
  double support_mean = 0.0;
  double radial_weight = 0.0;
  double self_response = 0.0;
};

struct AttentionStack {
  // maps[level][layer][token]
  std::array<std::array<std::array<ScalarGrid, 2>, kLayersPerLevel>, 3> maps;

  const ScalarGrid& at(Level level, int layer, Token token) const {
    return maps[static_cast<std::size_t>(level_index(level))][static_cast<std::size_t>(layer)]
               [static_cast<std::size_t>(token_index(token))];
  }
  ScalarGrid& at(Level level, int layer, Token token) {
    return maps[static_cast<std::size_t>(level_index(level))][static_cast<std::size_t>(layer)]
               [static_cast<std::size_t>(token_index(token))];
  }
};

struct DenoiserOutput {
  Latent eps_conditional;
  Latent eps_unconditional;
  AttentionStack attention;
};

// Placement in normalised [0,1]^2 image coordinates, origin top-left.
struct Placement {
  double x = 0.5;
  double y = 0.5;
};

class Backbone {
 public:
  explicit Backbone(BackboneConfig config);

  const BackboneConfig& config() const { return config_; }
  const Vocabulary& vocab() const { return config_.vocab; }
  const ObjectFilter& filter(std::size_t object) const { return filters_.at(object); }

  // Normalised matched-filter response of a single-channel field.
  ScalarGrid response(const ScalarGrid& field, std::size_t object) const;
  // Adjoint of response() (the operator is symmetric, so this applies the
  // same filter).
  ScalarGrid response_adjoint(const ScalarGrid& upstream, std::size_t object) const;

  // Serial and OpenMP-over-classes versions of the full response bank.
  std::vector<ScalarGrid> all_responses(const ScalarGrid& field) const;
  std::vector<ScalarGrid> all_responses_serial(const ScalarGrid& field) const;

  // Classes rendered by the unconditional branch: the top responders, or
  // with explain_away each next class chosen on the unexplained residual.
  std::vector<std::size_t> unconditional_classes(const ScalarGrid& field,
                                                 const std::vector<ScalarGrid>& responses) const;

  double attention_temperature(Level level, int layer) const;
  ScalarGrid attention_map(const ScalarGrid& response, Level level, int layer) const;

  // Softmax location belief used by the reconstruction.
  ScalarGrid location_belief(const ScalarGrid& response) const;
  // cross_correlate(belief, appearance template).
  ScalarGrid reconstruct(const ScalarGrid& belief, std::size_t object) const;
  // Template-only clean-image estimate for a set of objects given their
  // responses on the field.
  ScalarGrid compose(const ScalarGrid& field, const std::vector<ScalarGrid>& responses,
                     std::vector<std::size_t> objects) const;

  Latent synthesize_clean(const PromptTriplet& triplet, Placement a, Placement b) const;
  Latent synthesize_single(const std::string& object_id, Placement where) const;

  DenoiserOutput denoise(const Latent& z, int t, const PromptTriplet& triplet,
                         const Schedule& schedule) const;

  void check_latent(const Latent& z, const char* what) const;

 private:
  void stamp(ScalarGrid& canvas, std::size_t object, Placement where) const;

  BackboneConfig config_;
  std::vector<ObjectFilter> filters_;
};

// 0-based cell whose centre is nearest the normalised coordinate (cell
// ceil(x * n) in 1-based terms).
int placement_cell(double coordinate, int cells);

// x_t = sqrt(abar_t) x0 + sqrt(1 - abar_t) eps with eps drawn from the seed.
std::pair<Latent, Latent> add_noise(const Latent& x0, int t, const Schedule& schedule,
                                    std::uint64_t rng_seed);

Latent standard_normal_latent(int channels, int height, int width, std::uint64_t rng_seed);

}  // namespace sguide
