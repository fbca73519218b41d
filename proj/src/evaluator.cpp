#include "sguide/evaluator.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>

namespace sguide {

double Box::area() const {
  return std::max(0.0, x_max - x_min) * std::max(0.0, y_max - y_min);
}

double iou(const Box& a, const Box& b) {
  const Box inter{std::max(a.x_min, b.x_min), std::max(a.y_min, b.y_min),
                  std::min(a.x_max, b.x_max), std::min(a.y_max, b.y_max)};
  const double i = inter.area();
  const double u = a.area() + b.area() - i;
  return u > 0.0 ? i / u : 0.0;
}

Detection detect_object(const ScalarGrid& image, const Backbone& backbone,
                        const std::string& object_id, const EvaluatorConfig& cfg) {
  const std::size_t object = backbone.vocab().index_of(object_id);
  const ScalarGrid r = backbone.response(image, object);
  // First maximum in row-major order.
  int best_h = 0;
  int best_w = 0;
  double peak = r(0, 0);
  for (int h = 0; h < r.height(); ++h) {
    for (int w = 0; w < r.width(); ++w) {
      if (r(h, w) > peak) {
        peak = r(h, w);
        best_h = h;
        best_w = w;
      }
    }
  }
  Detection d;
  d.object = object_id;
  d.present = peak >= cfg.detection_threshold;
  if (!d.present) return d;
  d.confidence = std::min(1.0, peak);
  d.center = {cell_center(best_w, r.width()), cell_center(best_h, r.height())};
  const int half = backbone.filter(object).appearance.height() / 2;
  const double W = r.width();
  const double H = r.height();
  d.box = {std::clamp((best_w - half) / W, 0.0, 1.0), std::clamp((best_h - half) / H, 0.0, 1.0),
           std::clamp((best_w + half + 1) / W, 0.0, 1.0),
           std::clamp((best_h + half + 1) / H, 0.0, 1.0)};
  return d;
}

std::pair<Detection, Detection> detect(const Latent& latent, const Backbone& backbone,
                                       const PromptTriplet& triplet, const EvaluatorConfig& cfg) {
  const ScalarGrid image = latent.channel_mean();
  return {detect_object(image, backbone, triplet.object_a, cfg),
          detect_object(image, backbone, triplet.object_b, cfg)};
}

std::optional<Relation> classify_relation(const Detection& a, const Detection& b) {
  if (!a.present || !b.present) return std::nullopt;
  const double dx = a.center.x - b.center.x;
  const double dy = a.center.y - b.center.y;
  if (std::abs(dx) >= std::abs(dy)) return dx < 0.0 ? Relation::Left : Relation::Right;
  return dy < 0.0 ? Relation::Above : Relation::Below;
}

double t2i_spatial_score(const Detection& a, const Detection& b, Relation relation,
                         const EvaluatorConfig& cfg) {
  if (!a.present || !b.present) return 0.0;
  const double dx = a.center.x - b.center.x;
  const double dy = a.center.y - b.center.y;
  if (relation == Relation::Near) {
    const double mean_side = ((a.box.x_max - a.box.x_min) + (a.box.y_max - a.box.y_min) +
                              (b.box.x_max - b.box.x_min) + (b.box.y_max - b.box.y_min)) /
                             4.0;
    const double distance = std::hypot(dx, dy);
    const double positional = distance < 3.0 * mean_side ? 1.0 : 0.0;
    return std::min(a.confidence, b.confidence) * positional;
  }
  double along = 0.0;
  double across = 0.0;
  switch (relation) {
    case Relation::Left: along = -dx; across = dy; break;
    case Relation::Right: along = dx; across = dy; break;
    case Relation::Above: along = -dy; across = dx; break;
    case Relation::Below: along = dy; across = dx; break;
    case Relation::Near: break;
  }
  const bool ok = along > 0.0 && std::abs(along) > std::abs(across) &&
                  iou(a.box, b.box) < cfg.iou_threshold;
  return ok ? 1.0 : 0.0;
}

ImageJudgment judge_image(const Latent& latent, const Backbone& backbone,
                          const PromptTriplet& triplet, int prompt_index, int image_index,
                          const EvaluatorConfig& cfg) {
  const auto [a, b] = detect(latent, backbone, triplet, cfg);
  ImageJudgment j;
  j.prompt_index = prompt_index;
  j.image_index = image_index;
  j.both_present = a.present && b.present;
  const auto realised = classify_relation(a, b);
  j.relation_correct = realised.has_value() && *realised == triplet.relation;
  j.t2i_score = t2i_spatial_score(a, b, triplet.relation, cfg);
  return j;
}

bool MetricsReport::invariants_hold(double tolerance) const {
  auto in_range = [](double p) { return p >= 0.0 && p <= 100.0; };
  if (!in_range(oa) || !in_range(visor_uncond) || !in_range(visor_cond)) return false;
  if (std::abs(visor_uncond - oa * visor_cond / 100.0) > tolerance) return false;
  for (std::size_t k = 0; k < visor_k.size(); ++k) {
    if (!in_range(visor_k[k])) return false;
    if (k > 0 && visor_k[k] > visor_k[k - 1]) return false;
  }
  return t2i_spatial >= 0.0 && t2i_spatial <= 1.0;
}

MetricsReport visor_metrics(const std::vector<ImageJudgment>& judgments,
                            const EvaluatorConfig& cfg) {
  const int n = cfg.images_per_prompt;
  if (n < 1) throw std::invalid_argument("visor_metrics: images_per_prompt must be >= 1");
  std::map<int, std::vector<const ImageJudgment*>> groups;
  for (const auto& j : judgments) {
    if (j.relation_correct && !j.both_present) {
      throw std::invalid_argument("visor_metrics: judgment marked correct without both objects");
    }
    groups[j.prompt_index].push_back(&j);
  }
  for (const auto& [prompt, group] : groups) {
    if (static_cast<int>(group.size()) != n) {
      throw std::invalid_argument("visor_metrics: prompt " + std::to_string(prompt) + " has " +
                                  std::to_string(group.size()) + " judgments, expected " +
                                  std::to_string(n));
    }
  }

  MetricsReport r;
  r.images_per_prompt = n;
  r.prompt_count = static_cast<int>(groups.size());
  r.detection_threshold = cfg.detection_threshold;
  r.iou_threshold = cfg.iou_threshold;
  r.visor_k.assign(static_cast<std::size_t>(n), 0.0);
  if (judgments.empty()) return r;

  long present = 0;
  long correct = 0;
  double t2i = 0.0;
  std::vector<long> prompts_with_at_least(static_cast<std::size_t>(n) + 1, 0);
  for (const auto& [prompt, group] : groups) {
    PromptRecord rec;
    rec.prompt_index = prompt;
    for (const auto* j : group) {
      rec.present_count += j->both_present ? 1 : 0;
      rec.correct_count += j->relation_correct ? 1 : 0;
      rec.t2i_mean += j->t2i_score;
    }
    rec.t2i_mean /= n;
    present += rec.present_count;
    correct += rec.correct_count;
    for (int k = 1; k <= rec.correct_count; ++k) ++prompts_with_at_least[static_cast<std::size_t>(k)];
    r.prompts.push_back(rec);
  }
  for (const auto& j : judgments) t2i += j.t2i_score;

  const double total = static_cast<double>(judgments.size());
  r.oa = 100.0 * static_cast<double>(present) / total;
  r.visor_uncond = 100.0 * static_cast<double>(correct) / total;
  r.visor_cond = present > 0 ? 100.0 * static_cast<double>(correct) / static_cast<double>(present)
                             : 0.0;
  for (int k = 1; k <= n; ++k) {
    r.visor_k[static_cast<std::size_t>(k - 1)] =
        100.0 * static_cast<double>(prompts_with_at_least[static_cast<std::size_t>(k)]) /
        static_cast<double>(groups.size());
  }
  r.t2i_spatial = t2i / total;
  return r;
}

nlohmann::json judgment_to_json(const ImageJudgment& j) {
  return {{"prompt", j.prompt_index},
          {"image", j.image_index},
          {"both_present", j.both_present},
          {"relation_correct", j.relation_correct},
          {"t2i_score", j.t2i_score}};
}

ImageJudgment judgment_from_json(const nlohmann::json& j) {
  ImageJudgment out;
  out.prompt_index = j.at("prompt").get<int>();
  out.image_index = j.at("image").get<int>();
  out.both_present = j.at("both_present").get<bool>();
  out.relation_correct = j.at("relation_correct").get<bool>();
  out.t2i_score = j.value("t2i_score", 0.0);
  return out;
}

nlohmann::json report_to_json(const MetricsReport& r) {
  nlohmann::json j;
  j["oa"] = r.oa;
  j["visor_uncond"] = r.visor_uncond;
  j["visor_cond"] = r.visor_cond;
  for (std::size_t k = 0; k < r.visor_k.size(); ++k) j["visor_" + std::to_string(k + 1)] = r.visor_k[k];
  j["t2i_spatial"] = r.t2i_spatial;
  j["images_per_prompt"] = r.images_per_prompt;
  j["prompt_count"] = r.prompt_count;
  j["detection_threshold"] = r.detection_threshold;
  j["iou_threshold"] = r.iou_threshold;
  nlohmann::json prompts = nlohmann::json::array();
  for (const auto& p : r.prompts) {
    prompts.push_back({{"prompt", p.prompt_index},
                       {"present", p.present_count},
                       {"correct", p.correct_count},
                       {"t2i_mean", p.t2i_mean}});
  }
  j["prompts"] = prompts;
  return j;
}

MetricsReport report_from_json(const nlohmann::json& j) {
  MetricsReport r;
  r.oa = j.at("oa").get<double>();
  r.visor_uncond = j.at("visor_uncond").get<double>();
  r.visor_cond = j.at("visor_cond").get<double>();
  r.images_per_prompt = j.at("images_per_prompt").get<int>();
  for (int k = 1; k <= r.images_per_prompt; ++k)
    r.visor_k.push_back(j.at("visor_" + std::to_string(k)).get<double>());
  r.t2i_spatial = j.at("t2i_spatial").get<double>();
  r.prompt_count = j.at("prompt_count").get<int>();
  r.detection_threshold = j.at("detection_threshold").get<double>();
  r.iou_threshold = j.at("iou_threshold").get<double>();
  for (const auto& p : j.at("prompts")) {
    r.prompts.push_back({p.at("prompt").get<int>(), p.at("present").get<int>(),
                         p.at("correct").get<int>(), p.at("t2i_mean").get<double>()});
  }
  return r;
}

}  // namespace sguide
