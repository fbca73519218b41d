#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "sguide/backbone.hpp"
#include "sguide/prompt.hpp"
#include "sguide/spatial_stats.hpp"

namespace sguide {

struct EvaluatorConfig {
  double detection_threshold = 0.4;  // fraction of a clean stamp's self-response
  double iou_threshold = 0.1;
  int images_per_prompt = 4;
};

struct Box {
  double x_min = 0.0;
  double y_min = 0.0;
  double x_max = 0.0;
  double y_max = 0.0;

  double area() const;
};

double iou(const Box& a, const Box& b);

struct Detection {
  std::string object;
  bool present = false;
  double confidence = 0.0;
  Centroid center;
  Box box;
};

// Matched-filter detection of both prompt objects in a generated latent.
std::pair<Detection, Detection> detect(const Latent& latent, const Backbone& backbone,
                                       const PromptTriplet& triplet,
                                       const EvaluatorConfig& cfg = {});
Detection detect_object(const ScalarGrid& image, const Backbone& backbone,
                        const std::string& object_id, const EvaluatorConfig& cfg = {});

// Relation realised by A with respect to B, or nullopt unless both are present.
// The axis with the larger centre offset decides; |dx| == |dy| goes to x.
std::optional<Relation> classify_relation(const Detection& a, const Detection& b);

// 1 when a directional relation is realised on the dominant axis without
// overlap; for Near, min confidence times a proximity indicator.
double t2i_spatial_score(const Detection& a, const Detection& b, Relation relation,
                         const EvaluatorConfig& cfg = {});

struct ImageJudgment {
  int prompt_index = 0;
  int image_index = 0;
  bool both_present = false;
  bool relation_correct = false;
  double t2i_score = 0.0;
};

ImageJudgment judge_image(const Latent& latent, const Backbone& backbone,
                          const PromptTriplet& triplet, int prompt_index, int image_index,
                          const EvaluatorConfig& cfg = {});

struct PromptRecord {
  int prompt_index = 0;
  int present_count = 0;
  int correct_count = 0;
  double t2i_mean = 0.0;
};

struct MetricsReport {
  double oa = 0.0;
  double visor_uncond = 0.0;
  double visor_cond = 0.0;
  std::vector<double> visor_k;  // VISOR_1 .. VISOR_N
  double t2i_spatial = 0.0;
  int images_per_prompt = 4;
  int prompt_count = 0;
  double detection_threshold = 0.4;
  double iou_threshold = 0.1;
  std::vector<PromptRecord> prompts;

  // uncond == oa * cond / 100, VISOR_k non-increasing, percentages in range.
  bool invariants_hold(double tolerance = 1e-6) const;
};

// judgments must group into prompts of exactly images_per_prompt entries.
MetricsReport visor_metrics(const std::vector<ImageJudgment>& judgments,
                            const EvaluatorConfig& cfg = {});

nlohmann::json judgment_to_json(const ImageJudgment& j);
ImageJudgment judgment_from_json(const nlohmann::json& j);
nlohmann::json report_to_json(const MetricsReport& r);
MetricsReport report_from_json(const nlohmann::json& j);

}  // namespace sguide
