#include "sguide/backbone.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <stdexcept>
#include <string>

namespace sguide {

namespace {

// Rendering orders are searched exhaustively up to this many objects.
constexpr std::size_t kMaxJointObjects = 4;

}  // namespace

const char* level_name(Level level) {
  switch (level) {
    case Level::Coarse: return "coarse";
    case Level::Mid: return "mid";
    case Level::Fine: return "fine";
  }
  return "coarse";
}

Schedule::Schedule(int steps, double beta_start, double beta_end) : steps_(steps) {
  if (steps <= 0) throw std::invalid_argument("schedule: steps must be positive");
  if (!(beta_start > 0.0) || !(beta_start <= beta_end) || !(beta_end < 1.0)) {
    throw std::invalid_argument("schedule: need 0 < beta_start <= beta_end < 1");
  }
  beta_.resize(static_cast<std::size_t>(steps));
  alpha_bar_.resize(static_cast<std::size_t>(steps) + 1);
  alpha_bar_[0] = 1.0;
  for (int t = 1; t <= steps; ++t) {
    const double frac = steps == 1 ? 0.0 : static_cast<double>(t - 1) / (steps - 1);
    const double b = beta_start + frac * (beta_end - beta_start);
    beta_[static_cast<std::size_t>(t - 1)] = b;
    alpha_bar_[static_cast<std::size_t>(t)] = alpha_bar_[static_cast<std::size_t>(t - 1)] * (1.0 - b);
  }
}

void Schedule::check_step(int t) const {
  if (t < 1 || t > steps_) {
    throw std::out_of_range("step " + std::to_string(t) + " outside [1, " +
                            std::to_string(steps_) + "]");
  }
}

double Schedule::beta(int t) const {
  check_step(t);
  return beta_[static_cast<std::size_t>(t - 1)];
}

double Schedule::alpha(int t) const { return 1.0 - beta(t); }

double Schedule::alpha_bar(int t) const {
  if (t < 0 || t > steps_) {
    throw std::out_of_range("step " + std::to_string(t) + " outside [0, " +
                            std::to_string(steps_) + "]");
  }
  return alpha_bar_[static_cast<std::size_t>(t)];
}

double Schedule::scale(int t) const {
  check_step(t);
  return std::sqrt(alpha_bar(t - 1) / alpha_bar(t));
}

double Schedule::step_size(int t) const {
  return scale(t) * std::sqrt(1.0 - alpha_bar(t)) - std::sqrt(1.0 - alpha_bar(t - 1));
}

Schedule make_schedule(int steps, double beta_start, double beta_end) {
  return Schedule(steps, beta_start, beta_end);
}

void BackboneConfig::validate() const {
  if (height <= 0 || width <= 0 || channels <= 0) {
    throw std::invalid_argument("backbone: resolution and channels must be positive");
  }
  if (height % 4 != 0 || width % 4 != 0) {
    throw std::invalid_argument("backbone: resolution must be divisible by 4 (coarse level)");
  }
  if (vocab.size() < 2) throw std::invalid_argument("backbone: vocabulary needs >= 2 objects");
  for (const auto& e : vocab.entries()) {
    if (e.template_side > height || e.template_side > width) {
      throw std::invalid_argument("backbone: template of '" + e.id + "' exceeds the resolution");
    }
  }
  if (!(loc_temperature_fraction > 0.0)) {
    throw std::invalid_argument("backbone: loc_temperature_fraction must be > 0");
  }
  for (double t : level_temperature)
    if (!(t > 0.0)) throw std::invalid_argument("backbone: level temperatures must be > 0");
  for (std::size_t j = 0; j < layer_temperature_factors.size(); ++j) {
    if (!(layer_temperature_factors[j] > 0.0)) {
      throw std::invalid_argument("backbone: layer temperature factors must be > 0");
    }
    if (j > 0 && !(layer_temperature_factors[j] < layer_temperature_factors[j - 1])) {
      throw std::invalid_argument("backbone: layer temperature factors must decrease");
    }
  }
  if (unconditional_classes < 1 || static_cast<std::size_t>(unconditional_classes) > vocab.size()) {
    throw std::invalid_argument("backbone: unconditional_classes out of range");
  }
  if (!(clean_clip > 0.0)) throw std::invalid_argument("backbone: clean_clip must be > 0");
  if (!(residual_variance >= 0.0)) {
    throw std::invalid_argument("backbone: residual_variance must be >= 0");
  }
}

Backbone::Backbone(BackboneConfig config) : config_(std::move(config)) {
  config_.validate();
  filters_.reserve(config_.vocab.size());
  for (const auto& e : config_.vocab.entries()) {
    ObjectFilter f;
    const int side = e.template_side;
    const int half = side / 2;
    f.appearance = gaussian_template(side, e.template_sigma);
    f.kernel = gaussian_kernel_1d(side, e.template_sigma);
    f.ones.assign(f.kernel.size(), 1.0);
    f.radial.resize(f.kernel.size());
    for (int i = 0; i < side; ++i) {
      const double x = i - half;
      f.radial[static_cast<std::size_t>(i)] = x * x * f.kernel[static_cast<std::size_t>(i)];
    }

    if (config_.filter == FilterMode::ZeroMean) {
      f.support_mean = f.appearance.sum() / static_cast<double>(f.appearance.size());
    } else if (config_.filter == FilterMode::ScaleMatched) {
      // dT/dsigma = T r^2 / sigma^3; only its direction matters here.
      double t_dot_d = 0.0;
      double d_dot_d = 0.0;
      for (int h = 0; h < side; ++h) {
        for (int w = 0; w < side; ++w) {
          const double r2 = static_cast<double>((h - half) * (h - half) + (w - half) * (w - half));
          const double t = f.appearance(h, w);
          t_dot_d += t * t * r2;
          d_dot_d += t * t * r2 * r2;
        }
      }
      f.radial_weight = d_dot_d > 0.0 ? t_dot_d / d_dot_d : 0.0;
    }

    f.matched = ScalarGrid(side, side);
    for (int h = 0; h < side; ++h) {
      for (int w = 0; w < side; ++w) {
        const double r2 = static_cast<double>((h - half) * (h - half) + (w - half) * (w - half));
        f.matched(h, w) = f.appearance(h, w) * (1.0 - f.radial_weight * r2) - f.support_mean;
      }
    }
    double self = 0.0;
    for (int h = 0; h < side; ++h)
      for (int w = 0; w < side; ++w) self += f.matched(h, w) * f.appearance(h, w);
    if (!(self > 0.0)) {
      throw std::invalid_argument("backbone: matched filter of '" + e.id + "' is degenerate");
    }
    f.self_response = self;
    filters_.push_back(std::move(f));
  }
}

void Backbone::check_latent(const Latent& z, const char* what) const {
  if (z.channels() != config_.channels || z.height() != config_.height ||
      z.width() != config_.width) {
    throw std::invalid_argument(std::string(what) + ": latent shape " +
                                std::to_string(z.channels()) + "x" + std::to_string(z.height()) +
                                "x" + std::to_string(z.width()) + " does not match backbone " +
                                std::to_string(config_.channels) + "x" +
                                std::to_string(config_.height) + "x" +
                                std::to_string(config_.width));
  }
}

ScalarGrid Backbone::response(const ScalarGrid& field, std::size_t object) const {
  const auto& f = filters_.at(object);
  ScalarGrid r = cross_correlate_separable(field, f.kernel, f.kernel);
  if (f.support_mean != 0.0) {
    r.axpy(-f.support_mean, cross_correlate_separable(field, f.ones, f.ones));
  }
  if (f.radial_weight != 0.0) {
    r.axpy(-f.radial_weight, cross_correlate_separable(field, f.radial, f.kernel));
    r.axpy(-f.radial_weight, cross_correlate_separable(field, f.kernel, f.radial));
  }
  r *= 1.0 / f.self_response;
  return r;
}

ScalarGrid Backbone::response_adjoint(const ScalarGrid& upstream, std::size_t object) const {
  return response(upstream, object);
}

std::vector<ScalarGrid> Backbone::all_responses(const ScalarGrid& field) const {
  const int n = static_cast<int>(filters_.size());
  std::vector<ScalarGrid> out(filters_.size());
  const bool big = static_cast<long>(field.size()) * n >= (1L << 16);
#pragma omp parallel for schedule(static) if (big)
  for (int k = 0; k < n; ++k) out[static_cast<std::size_t>(k)] = response(field, static_cast<std::size_t>(k));
  return out;
}

std::vector<ScalarGrid> Backbone::all_responses_serial(const ScalarGrid& field) const {
  std::vector<ScalarGrid> out;
  out.reserve(filters_.size());
  for (std::size_t k = 0; k < filters_.size(); ++k) out.push_back(response(field, k));
  return out;
}

double Backbone::attention_temperature(Level level, int layer) const {
  if (layer < 0 || layer >= kLayersPerLevel) throw std::out_of_range("attention layer");
  return config_.level_temperature[static_cast<std::size_t>(level_index(level))] *
         config_.layer_temperature_factors[static_cast<std::size_t>(layer)];
}

ScalarGrid Backbone::attention_map(const ScalarGrid& response, Level level, int layer) const {
  return spatial_softmax(downsample_avg(response, level_factor(level)),
                         attention_temperature(level, layer));
}

ScalarGrid Backbone::location_belief(const ScalarGrid& response) const {
  const double tau = config_.loc_temperature_fraction * response.max_abs();
  if (!(tau > 0.0) || !std::isfinite(tau)) {
    return ScalarGrid(response.height(), response.width(),
                      1.0 / static_cast<double>(response.size()));
  }
  return spatial_softmax(response, tau);
}

ScalarGrid Backbone::reconstruct(const ScalarGrid& belief, std::size_t object) const {
  const auto& f = filters_.at(object);
  return cross_correlate_separable(belief, f.kernel, f.kernel);
}

int placement_cell(double coordinate, int cells) {
  const int one_based = static_cast<int>(std::ceil(coordinate * cells));
  return std::clamp(one_based, 1, cells) - 1;
}

void Backbone::stamp(ScalarGrid& canvas, std::size_t object, Placement where) const {
  if (!(where.x >= 0.0 && where.x <= 1.0 && where.y >= 0.0 && where.y <= 1.0)) {
    throw std::invalid_argument("placement outside [0,1]^2");
  }
  const auto& t = filters_.at(object).appearance;
  const int ch = placement_cell(where.y, canvas.height());
  const int cw = placement_cell(where.x, canvas.width());
  const int half = t.height() / 2;
  for (int i = 0; i < t.height(); ++i) {
    const int y = ch + i - half;
    if (y < 0 || y >= canvas.height()) continue;
    for (int j = 0; j < t.width(); ++j) {
      const int x = cw + j - half;
      if (x < 0 || x >= canvas.width()) continue;
      canvas(y, x) += t(i, j);
    }
  }
}

Latent Backbone::synthesize_clean(const PromptTriplet& triplet, Placement a, Placement b) const {
  ScalarGrid canvas(config_.height, config_.width);
  stamp(canvas, config_.vocab.index_of(triplet.object_a), a);
  stamp(canvas, config_.vocab.index_of(triplet.object_b), b);
  for (double& v : canvas.values()) v = std::clamp(v, 0.0, config_.clean_clip);
  return Latent(std::vector<ScalarGrid>(static_cast<std::size_t>(config_.channels), canvas));
}

Latent Backbone::synthesize_single(const std::string& object_id, Placement where) const {
  ScalarGrid canvas(config_.height, config_.width);
  stamp(canvas, config_.vocab.index_of(object_id), where);
  for (double& v : canvas.values()) v = std::clamp(v, 0.0, config_.clean_clip);
  return Latent(std::vector<ScalarGrid>(static_cast<std::size_t>(config_.channels), canvas));
}

ScalarGrid Backbone::compose(const ScalarGrid& field, const std::vector<ScalarGrid>& responses,
                             std::vector<std::size_t> objects) const {
  if (!config_.explain_away) {
    ScalarGrid out(field.height(), field.width());
    for (std::size_t k : objects) out += reconstruct(location_belief(responses.at(k)), k);
    return out;
  }
  // Each rendering order explains the field greedily; keep the order whose
  // located peaks sum highest (ties keep the earlier order).
  auto render = [&](const std::vector<std::size_t>& order, double* score) {
    ScalarGrid canvas(field.height(), field.width());
    // Earlier objects at the amplitude the field shows for them.
    ScalarGrid explained(field.height(), field.width());
    *score = 0.0;
    bool first = true;
    for (std::size_t k : order) {
      ScalarGrid r = responses.at(k);
      if (!first) r.axpy(-1.0, response(explained, k));
      const double peak = r.max();
      *score += peak;
      const ScalarGrid stamp = reconstruct(location_belief(r), k);
      canvas += stamp;
      explained.axpy(std::max(peak, 0.0), stamp);
      first = false;
    }
    return canvas;
  };
  std::sort(objects.begin(), objects.end());
  double best_score = 0.0;
  ScalarGrid best = render(objects, &best_score);
  if (objects.size() <= kMaxJointObjects) {
    while (std::next_permutation(objects.begin(), objects.end())) {
      double score = 0.0;
      ScalarGrid candidate = render(objects, &score);
      if (score > best_score) {
        best_score = score;
        best = std::move(candidate);
      }
    }
  }
  return best;
}

std::vector<std::size_t> Backbone::unconditional_classes(
    const ScalarGrid& field, const std::vector<ScalarGrid>& responses) const {
  const auto count = static_cast<std::size_t>(config_.unconditional_classes);
  std::vector<std::size_t> chosen;
  auto strongest = [&](const ScalarGrid* explained) {
    std::size_t best = responses.size();
    double best_peak = 0.0;
    for (std::size_t k = 0; k < responses.size(); ++k) {
      if (std::find(chosen.begin(), chosen.end(), k) != chosen.end()) continue;
      double peak = responses[k].max();
      if (explained != nullptr) {
        ScalarGrid r = responses[k];
        r.axpy(-1.0, response(*explained, k));
        peak = r.max();
      }
      if (best == responses.size() || peak > best_peak) {
        best = k;
        best_peak = peak;
      }
    }
    return std::pair{best, best_peak};
  };
  if (!config_.explain_away) {
    std::vector<std::size_t> order(responses.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t l, std::size_t r) {
      return responses[l].max() > responses[r].max();
    });
    order.resize(count);
    return order;
  }
  ScalarGrid explained(field.height(), field.width());
  while (chosen.size() < count) {
    const auto [k, peak] = strongest(chosen.empty() ? nullptr : &explained);
    chosen.push_back(k);
    ScalarGrid r = responses[k];
    r.axpy(-1.0, response(explained, k));
    explained.axpy(std::max(peak, 0.0), reconstruct(location_belief(r), k));
  }
  return chosen;
}

DenoiserOutput Backbone::denoise(const Latent& z, int t, const PromptTriplet& triplet,
                                 const Schedule& schedule) const {
  check_latent(z, "denoise");
  if (t < 1 || t > schedule.steps()) {
    throw std::out_of_range("denoise: step " + std::to_string(t) + " outside [1, " +
                            std::to_string(schedule.steps()) + "]");
  }
  const double abar = schedule.alpha_bar(t);

  const ScalarGrid field = z.channel_mean();
  const auto responses = all_responses(field);
  const std::size_t ia = config_.vocab.index_of(triplet.object_a);
  const std::size_t ib = config_.vocab.index_of(triplet.object_b);

  const double signal = std::sqrt(abar);
  const ScalarGrid x0_cond = compose(field, responses, {ia, ib});

  // The unconditional branch renders the strongest classes only, each chosen
  // on the field with the earlier choices explained away.
  const std::vector<std::size_t> order = unconditional_classes(field, responses);
  const ScalarGrid x0_unc = compose(field, responses, order);

  const double inv_noise = 1.0 / std::sqrt(1.0 - abar);
  const double v = config_.residual_variance * abar;
  const double keep = v / (v + 1.0 - abar);
  DenoiserOutput out;
  std::vector<ScalarGrid> eps_c;
  std::vector<ScalarGrid> eps_u;
  // eps = (z - signal * x0) / sqrt(1 - abar) with x0 = render + keep * (z / signal - render).
  for (int c = 0; c < z.channels(); ++c) {
    ScalarGrid ec = z.channel(c);
    ec.axpy(-signal, x0_cond);
    ec *= (1.0 - keep) * inv_noise;
    eps_c.push_back(std::move(ec));
    ScalarGrid eu = z.channel(c);
    eu.axpy(-signal, x0_unc);
    eu *= (1.0 - keep) * inv_noise;
    eps_u.push_back(std::move(eu));
  }
  out.eps_conditional = Latent(std::move(eps_c));
  out.eps_unconditional = Latent(std::move(eps_u));

  for (Level level : kAllLevels) {
    for (Token token : {Token::A, Token::B}) {
      const auto& r = responses[token == Token::A ? ia : ib];
      const ScalarGrid pooled = downsample_avg(r, level_factor(level));
      for (int layer = 0; layer < kLayersPerLevel; ++layer) {
        out.attention.at(level, layer, token) =
            spatial_softmax(pooled, attention_temperature(level, layer));
      }
    }
  }
  return out;
}

Latent standard_normal_latent(int channels, int height, int width, std::uint64_t rng_seed) {
  std::mt19937_64 rng(rng_seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Latent out(channels, height, width);
  for (int c = 0; c < channels; ++c)
    for (double& v : out.channel(c).values()) v = normal(rng);
  return out;
}

std::pair<Latent, Latent> add_noise(const Latent& x0, int t, const Schedule& schedule,
                                    std::uint64_t rng_seed) {
  if (t < 1 || t > schedule.steps()) {
    throw std::out_of_range("add_noise: step " + std::to_string(t) + " outside [1, " +
                            std::to_string(schedule.steps()) + "]");
  }
  Latent eps = standard_normal_latent(x0.channels(), x0.height(), x0.width(), rng_seed);
  const double abar = schedule.alpha_bar(t);
  Latent xt = x0;
  xt *= std::sqrt(abar);
  xt.axpy(std::sqrt(1.0 - abar), eps);
  return {std::move(xt), std::move(eps)};
}

}  // namespace sguide
