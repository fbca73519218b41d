#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "sguide/backbone.hpp"
#include "sguide/evaluator.hpp"
#include "sguide/guidance.hpp"

namespace sguide {

struct ScheduleParams {
  int steps = 50;
  double beta_start = 1e-4;
  double beta_end = 0.02;
};

struct BenchmarkSpec {
  int pair_count = 40;
  int images_per_prompt = 4;
  std::uint64_t base_seed = 42;       // image i of every prompt uses base_seed + i
  std::uint64_t benchmark_seed = 7;   // pair sampling
};

struct ExperimentConfig {
  BackboneConfig backbone;
  ScheduleParams schedule;
  GuidanceConfig guidance;
  EvaluatorConfig evaluator;
  BenchmarkSpec benchmark;
  std::string output_dir = "runs";
  bool trace = false;
  bool dump_images = false;
  int workers = 1;

  static ExperimentConfig defaults();
  void validate() const;
};

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

nlohmann::json config_to_json(const ExperimentConfig& cfg);
// Missing keys keep their defaults; unknown keys are rejected.
ExperimentConfig config_from_json(const nlohmann::json& j);
ExperimentConfig load_config(const std::filesystem::path& path);

// Applies "section.key=value" (value parsed as JSON, falling back to a
// string) to the JSON form of the config.
ExperimentConfig apply_override(const ExperimentConfig& cfg, const std::string& assignment);

// FNV-1a over the canonical JSON of everything that affects results
// (output_dir, workers, trace and dump_images excluded).
std::string config_hash(const ExperimentConfig& cfg);

// Serialised with sorted keys and no whitespace, so equal values give equal
// bytes.
std::string canonical_dump(const nlohmann::json& j);

struct SampleAbort {
  int prompt_index = 0;
  int image_index = 0;
  int step = 0;
};

struct RunRecord {
  std::string name;
  std::string config_hash;
  ExperimentConfig config;
  std::vector<PromptTriplet> prompts;
  std::vector<std::uint64_t> image_seeds;  // per image index
  std::vector<ImageJudgment> judgments;
  MetricsReport report;
  std::vector<SampleAbort> aborts;
  double duration_seconds = 0.0;
  // Filled only when config.trace / config.dump_images are set.
  std::vector<std::vector<StepTrace>> traces;
  std::vector<Latent> images;
};

RunRecord run_bench(const ExperimentConfig& cfg, const std::string& name = "bench");

// Writes config.json, prompts.jsonl, judgments.jsonl, report.json,
// metrics.csv and record.json under dir (plus traces.jsonl and images/ when
// requested).
void persist_record(const RunRecord& record, const std::filesystem::path& dir);

struct AblationRow {
  bool spatial = false;
  bool presence = false;
  bool balance = false;
  RunRecord record;
};

// The eight {spatial, presence, balance} on/off rows in (s, p, b) binary
// order, s most significant.
std::vector<AblationRow> run_ablation(const ExperimentConfig& cfg);
ExperimentConfig ablation_config(const ExperimentConfig& cfg, bool spatial, bool presence,
                                 bool balance);
std::string ablation_csv(const std::vector<AblationRow>& rows);

struct GridSpec {
  std::vector<double> alpha{1.0, 1.5};
  std::vector<double> margin{0.25, 0.5};
  std::vector<double> lambda_spatial{0.5, 1.0};
  std::vector<double> lambda_presence{0.5, 1.0};
  std::vector<double> lambda_balance{0.5, 1.0};
  int pair_count = 10;

  std::size_t combinations() const;
};

inline constexpr std::size_t kMaxGridCombinations = 256;

struct GridRow {
  double alpha = 0.0;
  double margin = 0.0;
  double lambda_spatial = 0.0;
  double lambda_presence = 0.0;
  double lambda_balance = 0.0;
  MetricsReport report;
};

std::vector<GridRow> run_gridsearch(const ExperimentConfig& cfg, const GridSpec& grid);
std::string gridsearch_csv(const std::vector<GridRow>& rows);
// Stable sort by visor_uncond, best first.
std::vector<GridRow> sort_by_uncond(std::vector<GridRow> rows);

struct GradcheckProbe {
  int t = 0;
  std::string prompt;
  double max_relative_error = 0.0;
};

struct GradcheckReport {
  std::vector<GradcheckProbe> probes;
  double max_relative_error = 0.0;
  double tolerance = 1e-4;
  bool passed = true;
};

struct GradcheckOptions {
  int probes = 10;
  int cells_per_probe = 16;
  double step = 1e-4;
  double tolerance = 1e-4;
  std::uint64_t seed = 1234;
  // Test hook: multiplies the analytic gradient before comparison.
  double corrupt_scale = 1.0;
};

GradcheckReport run_gradcheck(const ExperimentConfig& cfg, const GradcheckOptions& options);
nlohmann::json gradcheck_to_json(const GradcheckReport& report);

nlohmann::json trace_to_json(const StepTrace& step);

}  // namespace sguide
