#pragma once

#include <cstdint>
#include <stdexcept>
#include <vector>

#include "sguide/backbone.hpp"
#include "sguide/losses.hpp"
#include "sguide/spatial_stats.hpp"

namespace sguide {

enum class EtaMode {
  // eps += eta * grad
  Fixed,
  // eps += eta * grad / |grad| (per-step unit-norm direction)
  Normalized,
};

struct GuidanceConfig {
  double gamma = 7.5;
  double eta = 6000.0;
  LossConfig loss;
  // Guidance is active for apply_to_step <= t <= apply_from_step; 0 for
  // apply_from_step means "the last step T".
  int apply_from_step = 0;
  int apply_to_step = 1;
  bool clip_gradient = false;  // clip |grad| to 1 before scaling by eta
  EtaMode eta_mode = EtaMode::Fixed;
  // Clamp each step's clean estimate to the clean-image range [0, clip].
  bool clip_denoised = true;

  void validate(int steps) const;
  bool active_at(int t, int steps) const;
};

struct GradientResult {
  Latent gradient;
  LossBreakdown loss;
};

// Exact d(compound loss)/d(z_t) by reverse-mode differentiation through the
// channel mean, matched filters, pooling, spatial softmax, centroid/variance,
// relation deltas and GeLU.
GradientResult loss_gradient(const Latent& z, int t, const PromptTriplet& triplet,
                             const Schedule& schedule, const Backbone& backbone,
                             const LossConfig& loss_cfg);

// Forward value only (what loss_gradient differentiates).
LossBreakdown evaluate_loss(const Latent& z, const PromptTriplet& triplet,
                            const Backbone& backbone, const LossConfig& loss_cfg);

// eps_unc + gamma (eps_cond - eps_unc) + eta grad
Latent guided_noise(const Latent& eps_unc, const Latent& eps_cond, const Latent& grad,
                    const GuidanceConfig& cfg);

// Deterministic DDIM-style update; alpha_bar(0) = 1 so t = 1 returns the
// clean estimate. With clip > 0 the clean estimate is clamped to [0, clip]
// and the noise direction re-derived from it.
Latent reverse_step(const Latent& z, int t, const Latent& eps, const Schedule& schedule,
                    double clip = 0.0);

struct StepTrace {
  int t = 0;
  LossBreakdown loss;
  double gradient_norm = 0.0;
  // centroids[token][level], taken from the sharpest layer of each level.
  std::array<std::array<Centroid, 3>, 2> centroids{};
};

struct SampleResult {
  Latent final_latent;
  std::vector<StepTrace> trace;
};

class NumericalAbort : public std::runtime_error {
 public:
  explicit NumericalAbort(int step);
  int step() const { return step_; }

 private:
  int step_;
};

SampleResult sample(const PromptTriplet& triplet, const Schedule& schedule,
                    const Backbone& backbone, const GuidanceConfig& cfg,
                    std::uint64_t rng_seed);

// Compound loss evaluated on a denoiser's attention output.
LossBreakdown loss_from_attention(const AttentionStack& stack, Relation relation,
                                  const LossConfig& cfg);

}  // namespace sguide
