#include "sguide/guidance.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace sguide {

namespace {

constexpr Level kLossLevels[] = {Level::Coarse, Level::Mid};

// Forward intermediates for one (token, level, layer) attention map.
struct MapRecord {
  ScalarGrid map;
  double temperature = 0.0;
  Centroid centroid;
  double variance = 0.0;
  // dL/d(centroid.x), dL/d(centroid.y), dL/d(variance)
  double grad_x = 0.0;
  double grad_y = 0.0;
  double grad_var = 0.0;
};

struct TokenForward {
  std::size_t object = 0;
  // records[level][layer] for the loss levels only
  std::array<std::array<MapRecord, kLayersPerLevel>, 2> records;
};

TokenForward forward_token(const Backbone& backbone, const ScalarGrid& field, std::size_t object) {
  TokenForward out;
  out.object = object;
  const ScalarGrid response = backbone.response(field, object);
  for (std::size_t li = 0; li < 2; ++li) {
    const Level level = kLossLevels[li];
    const ScalarGrid pooled = downsample_avg(response, level_factor(level));
    for (int layer = 0; layer < kLayersPerLevel; ++layer) {
      auto& rec = out.records[li][static_cast<std::size_t>(layer)];
      rec.temperature = backbone.attention_temperature(level, layer);
      rec.map = spatial_softmax(pooled, rec.temperature);
      rec.centroid = centroid(rec.map);
      rec.variance = variance(rec.map, rec.centroid);
    }
  }
  return out;
}

// d(delta)/d(x_A), d/d(y_A); the B derivatives are the negatives.
std::pair<double, double> delta_gradient_a(const Centroid& a, const Centroid& b,
                                           Relation relation) {
  switch (relation) {
    case Relation::Left: return {-1.0, 0.0};
    case Relation::Right: return {1.0, 0.0};
    case Relation::Above: return {0.0, -1.0};
    case Relation::Below: return {0.0, 1.0};
    case Relation::Near: {
      const double d = a.x - b.x;
      return {d > 0.0 ? 1.0 : (d < 0.0 ? -1.0 : 0.0), 0.0};
    }
  }
  return {0.0, 0.0};
}

// Fills the loss value and the per-map statistic gradients.
LossBreakdown loss_and_stat_gradients(TokenForward& fa, TokenForward& fb, Relation relation,
                                      const LossConfig& cfg) {
  LossBreakdown out;
  constexpr double spatial_weight = 1.0 / (2.0 * kLayersPerLevel);
  constexpr double layer_weight = 1.0 / kLayersPerLevel;
  for (std::size_t li = 0; li < 2; ++li) {
    for (std::size_t layer = 0; layer < kLayersPerLevel; ++layer) {
      auto& ra = fa.records[li][layer];
      auto& rb = fb.records[li][layer];
      const double delta = relation_delta(ra.centroid, rb.centroid, relation);
      out.spatial += spatial_weight * spatial_loss(delta, cfg);
      const double g_delta = cfg.lambda_spatial * spatial_weight * spatial_loss_derivative(delta, cfg);
      const auto [dxa, dya] = delta_gradient_a(ra.centroid, rb.centroid, relation);
      ra.grad_x += g_delta * dxa;
      ra.grad_y += g_delta * dya;
      rb.grad_x -= g_delta * dxa;
      rb.grad_y -= g_delta * dya;

      if (kLossLevels[li] == Level::Coarse) {
        out.presence += layer_weight * presence_loss(ra.variance, rb.variance);
        ra.grad_var += cfg.lambda_presence * layer_weight;
        rb.grad_var += cfg.lambda_presence * layer_weight;
      } else {
        out.balance += layer_weight * balance_loss(ra.variance, rb.variance);
        const double diff = ra.variance - rb.variance;
        const double sign = diff > 0.0 ? 1.0 : (diff < 0.0 ? -1.0 : 0.0);
        ra.grad_var += cfg.lambda_balance * layer_weight * sign;
        rb.grad_var -= cfg.lambda_balance * layer_weight * sign;
      }
    }
  }
  out.total = cfg.lambda_spatial * out.spatial + cfg.lambda_presence * out.presence +
              cfg.lambda_balance * out.balance;
  return out;
}

// dL/d(map) from the centroid/variance gradients. The variance term carries
// its dependence on the centroid, which cancels when the map sums to one.
ScalarGrid map_gradient(const MapRecord& rec) {
  const ScalarGrid& m = rec.map;
  const double mass_excess = m.sum() - 1.0;
  ScalarGrid g(m.height(), m.width());
  for (int h = 0; h < m.height(); ++h) {
    const double y = cell_center(h, m.height());
    const double dy = y - rec.centroid.y;
    for (int w = 0; w < m.width(); ++w) {
      const double x = cell_center(w, m.width());
      const double dx = x - rec.centroid.x;
      const double dvar =
          dx * dx + dy * dy + 2.0 * mass_excess * (x * rec.centroid.x + y * rec.centroid.y);
      g(h, w) = rec.grad_x * x + rec.grad_y * y + rec.grad_var * dvar;
    }
  }
  return g;
}

ScalarGrid backward_token(const Backbone& backbone, const TokenForward& fwd, int height,
                          int width) {
  ScalarGrid grad_response(height, width);
  for (std::size_t li = 0; li < 2; ++li) {
    const int factor = level_factor(kLossLevels[li]);
    ScalarGrid grad_pooled(height / factor, width / factor);
    for (const auto& rec : fwd.records[li]) {
      grad_pooled += spatial_softmax_backward(rec.map, map_gradient(rec), rec.temperature);
    }
    grad_response += upsample_adjoint(grad_pooled, factor);
  }
  return backbone.response_adjoint(grad_response, fwd.object);
}

}  // namespace

void GuidanceConfig::validate(int steps) const {
  if (!(gamma >= 0.0)) throw std::invalid_argument("guidance: gamma must be >= 0");
  if (!(eta >= 0.0)) throw std::invalid_argument("guidance: eta must be >= 0");
  loss.validate(/*allow_all_off=*/true);
  const int from = apply_from_step == 0 ? steps : apply_from_step;
  if (apply_to_step < 1 || from > steps || apply_to_step > from) {
    throw std::invalid_argument("guidance: step window [" + std::to_string(apply_to_step) + ", " +
                                std::to_string(from) + "] not within [1, " +
                                std::to_string(steps) + "]");
  }
}

bool GuidanceConfig::active_at(int t, int steps) const {
  const int from = apply_from_step == 0 ? steps : apply_from_step;
  return t >= apply_to_step && t <= from;
}

GradientResult loss_gradient(const Latent& z, int t, const PromptTriplet& triplet,
                             const Schedule& schedule, const Backbone& backbone,
                             const LossConfig& loss_cfg) {
  backbone.check_latent(z, "loss_gradient");
  if (t < 1 || t > schedule.steps()) {
    throw std::out_of_range("loss_gradient: step " + std::to_string(t) + " out of range");
  }
  const ScalarGrid field = z.channel_mean();
  TokenForward fa = forward_token(backbone, field, backbone.vocab().index_of(triplet.object_a));
  TokenForward fb = forward_token(backbone, field, backbone.vocab().index_of(triplet.object_b));

  GradientResult out;
  out.loss = loss_and_stat_gradients(fa, fb, triplet.relation, loss_cfg);
  out.gradient = Latent(z.channels(), z.height(), z.width());
  if (loss_cfg.all_off()) return out;

  ScalarGrid grad_field = backward_token(backbone, fa, z.height(), z.width());
  grad_field += backward_token(backbone, fb, z.height(), z.width());
  grad_field *= 1.0 / static_cast<double>(z.channels());
  for (int c = 0; c < z.channels(); ++c) out.gradient.channel(c) = grad_field;
  return out;
}

LossBreakdown evaluate_loss(const Latent& z, const PromptTriplet& triplet,
                            const Backbone& backbone, const LossConfig& loss_cfg) {
  backbone.check_latent(z, "evaluate_loss");
  const ScalarGrid field = z.channel_mean();
  TokenForward fa = forward_token(backbone, field, backbone.vocab().index_of(triplet.object_a));
  TokenForward fb = forward_token(backbone, field, backbone.vocab().index_of(triplet.object_b));
  return loss_and_stat_gradients(fa, fb, triplet.relation, loss_cfg);
}

Latent guided_noise(const Latent& eps_unc, const Latent& eps_cond, const Latent& grad,
                    const GuidanceConfig& cfg) {
  if (!eps_unc.same_shape(eps_cond) || !eps_unc.same_shape(grad)) {
    throw std::invalid_argument("guided_noise: shape mismatch");
  }
  Latent out = eps_unc;
  out *= 1.0 - cfg.gamma;
  out.axpy(cfg.gamma, eps_cond);
  if (cfg.eta != 0.0) out.axpy(cfg.eta, grad);
  return out;
}

Latent reverse_step(const Latent& z, int t, const Latent& eps, const Schedule& schedule,
                    double clip) {
  if (t < 1 || t > schedule.steps()) {
    throw std::out_of_range("reverse_step: step " + std::to_string(t) + " outside [1, " +
                            std::to_string(schedule.steps()) + "]");
  }
  if (!z.same_shape(eps)) throw std::invalid_argument("reverse_step: shape mismatch");
  const double abar = schedule.alpha_bar(t);
  const double abar_prev = schedule.alpha_bar(t - 1);
  Latent x0 = z;
  x0.axpy(-std::sqrt(1.0 - abar), eps);
  x0 *= 1.0 / std::sqrt(abar);
  Latent noise = eps;
  if (clip > 0.0) {
    for (int c = 0; c < x0.channels(); ++c) {
      for (double& v : x0.channel(c).values()) v = std::clamp(v, 0.0, clip);
    }
    // Keep the update consistent with the clamped estimate.
    noise = z;
    noise.axpy(-std::sqrt(abar), x0);
    noise *= 1.0 / std::sqrt(1.0 - abar);
  }
  Latent out = x0;
  out *= std::sqrt(abar_prev);
  if (abar_prev < 1.0) out.axpy(std::sqrt(1.0 - abar_prev), noise);
  return out;
}

NumericalAbort::NumericalAbort(int step)
    : std::runtime_error("non-finite value during sampling at step " + std::to_string(step)),
      step_(step) {}

LossBreakdown loss_from_attention(const AttentionStack& stack, Relation relation,
                                  const LossConfig& cfg) {
  const auto a = stats_for_token(stack, Token::A, kLossLevels);
  const auto b = stats_for_token(stack, Token::B, kLossLevels);
  return compound_loss(a, b, relation, cfg);
}

SampleResult sample(const PromptTriplet& triplet, const Schedule& schedule,
                    const Backbone& backbone, const GuidanceConfig& cfg,
                    std::uint64_t rng_seed) {
  cfg.validate(schedule.steps());
  const auto& bc = backbone.config();
  SampleResult result;
  result.trace.reserve(static_cast<std::size_t>(schedule.steps()));
  Latent z = standard_normal_latent(bc.channels, bc.height, bc.width, rng_seed);

  for (int t = schedule.steps(); t >= 1; --t) {
    const DenoiserOutput out = backbone.denoise(z, t, triplet, schedule);
    StepTrace step;
    step.t = t;
    for (Token token : {Token::A, Token::B}) {
      for (Level level : kAllLevels) {
        step.centroids[static_cast<std::size_t>(token_index(token))]
                      [static_cast<std::size_t>(level_index(level))] =
            centroid(out.attention.at(level, kLayersPerLevel - 1, token));
      }
    }

    Latent grad(z.channels(), z.height(), z.width());
    if (cfg.eta > 0.0 && !cfg.loss.all_off() && cfg.active_at(t, schedule.steps())) {
      GradientResult g = loss_gradient(z, t, triplet, schedule, backbone, cfg.loss);
      step.loss = g.loss;
      grad = std::move(g.gradient);
      const double norm = grad.norm();
      step.gradient_norm = norm;
      if (norm > 0.0) {
        if (cfg.eta_mode == EtaMode::Normalized) grad *= 1.0 / norm;
        else if (cfg.clip_gradient && norm > 1.0) grad *= 1.0 / norm;
      }
    } else {
      step.loss = loss_from_attention(out.attention, triplet.relation, cfg.loss);
    }

    const Latent eps = guided_noise(out.eps_unconditional, out.eps_conditional, grad, cfg);
    z = reverse_step(z, t, eps, schedule, cfg.clip_denoised ? bc.clean_clip : 0.0);
    if (!z.all_finite() || !std::isfinite(step.loss.total) || !std::isfinite(step.gradient_norm)) {
      throw NumericalAbort(t);
    }
    result.trace.push_back(step);
  }
  result.final_latent = std::move(z);
  return result;
}

}  // namespace sguide
