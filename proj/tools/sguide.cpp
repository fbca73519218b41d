// Command-line front end: bench, ablate, gridsearch, gradcheck, metrics, sample.

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "sguide/experiment.hpp"
#include "sguide/grid_io.hpp"

namespace fs = std::filesystem;
using namespace sguide;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitFailed = 1;
constexpr int kExitConfig = 2;
constexpr int kExitAbort = 3;

struct CommonOptions {
  std::string config_path;
  std::vector<std::string> overrides;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::optional<int> workers;
  bool trace = false;
  bool dump_images = false;
};

void add_common(CLI::App* cmd, CommonOptions& o) {
  cmd->add_option("-c,--config", o.config_path, "JSON config file");
  cmd->add_option("--set", o.overrides, "Override a config value, e.g. --set guidance.eta=0");
  cmd->add_option("--seed", o.seed, "Base image seed (image i uses seed + i)");
  cmd->add_option("--out", o.out, "Output directory");
  cmd->add_option("--workers", o.workers, "Parallel sampling workers");
  cmd->add_flag("--trace", o.trace, "Write per-step traces");
  cmd->add_flag("--dump-images", o.dump_images, "Write final latents as PGM");
}

ExperimentConfig resolve(const CommonOptions& o) {
  ExperimentConfig cfg =
      o.config_path.empty() ? ExperimentConfig::defaults() : load_config(o.config_path);
  for (const auto& s : o.overrides) cfg = apply_override(cfg, s);
  if (o.seed) cfg.benchmark.base_seed = *o.seed;
  if (!o.out.empty()) cfg.output_dir = o.out;
  if (o.workers) cfg.workers = *o.workers;
  if (o.trace) cfg.trace = true;
  if (o.dump_images) cfg.dump_images = true;
  cfg.validate();
  return cfg;
}

void print_report(const std::string& label, const MetricsReport& r, double seconds) {
  std::cout << label << ": OA " << r.oa << "  uncond " << r.visor_uncond << "  cond "
            << r.visor_cond << "  VISOR_k";
  for (double v : r.visor_k) std::cout << ' ' << v;
  std::cout << "  t2i " << r.t2i_spatial << "  (" << seconds << " s)\n";
}

void write_file(const fs::path& path, const std::string& text) {
  fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

int cmd_bench(const CommonOptions& o) {
  const ExperimentConfig cfg = resolve(o);
  const RunRecord rec = run_bench(cfg, "bench");
  persist_record(rec, fs::path(cfg.output_dir));
  print_report("bench " + rec.config_hash, rec.report, rec.duration_seconds);
  if (!rec.aborts.empty()) {
    std::cerr << rec.aborts.size() << " sample(s) aborted on non-finite values; see record.json\n";
  }
  return kExitOk;
}

int cmd_ablate(const CommonOptions& o) {
  const ExperimentConfig cfg = resolve(o);
  const auto rows = run_ablation(cfg);
  const fs::path root(cfg.output_dir);
  for (const auto& row : rows) {
    persist_record(row.record, root / row.record.name);
    print_report(row.record.name, row.record.report, row.record.duration_seconds);
  }
  write_file(root / "ablation.csv", ablation_csv(rows));
  return kExitOk;
}

int cmd_gridsearch(const CommonOptions& o, const GridSpec& grid) {
  const ExperimentConfig cfg = resolve(o);
  const auto rows = run_gridsearch(cfg, grid);
  const fs::path root(cfg.output_dir);
  write_file(root / "gridsearch.csv", gridsearch_csv(rows));
  const std::string summary = gridsearch_csv(sort_by_uncond(rows));
  write_file(root / "gridsearch_sorted.csv", summary);
  std::cout << summary;
  return kExitOk;
}

int cmd_gradcheck(const CommonOptions& o, const GradcheckOptions& options) {
  const ExperimentConfig cfg = resolve(o);
  const GradcheckReport report = run_gradcheck(cfg, options);
  const std::string text = gradcheck_to_json(report).dump(2) + "\n";
  if (!o.out.empty()) write_file(fs::path(cfg.output_dir) / "gradcheck.json", text);
  std::cout << text;
  std::cout << (report.passed ? "gradcheck passed" : "gradcheck FAILED") << " (max rel err "
            << report.max_relative_error << ", tol " << report.tolerance << ")\n";
  return report.passed ? kExitOk : kExitFailed;
}

int cmd_metrics(const std::string& judgments_path, int images_per_prompt) {
  std::ifstream in(judgments_path);
  if (!in) throw ConfigError("cannot open " + judgments_path);
  std::vector<ImageJudgment> judgments;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      judgments.push_back(judgment_from_json(nlohmann::json::parse(line)));
    } catch (const std::exception& e) {
      throw ConfigError(judgments_path + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  EvaluatorConfig eval;
  eval.images_per_prompt = images_per_prompt;
  MetricsReport report;
  try {
    report = visor_metrics(judgments, eval);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  std::cout << canonical_dump(report_to_json(report)) << "\n";
  return kExitOk;
}

int cmd_sample(const CommonOptions& o, const std::string& prompt_text, int image_index) {
  const ExperimentConfig cfg = resolve(o);
  const PromptTriplet triplet = [&] {
    try {
      return parse_prompt(prompt_text, cfg.backbone.vocab);
    } catch (const std::invalid_argument& e) {
      throw ConfigError(e.what());
    }
  }();
  const Backbone backbone(cfg.backbone);
  const Schedule schedule(cfg.schedule.steps, cfg.schedule.beta_start, cfg.schedule.beta_end);
  const std::uint64_t seed = cfg.benchmark.base_seed + static_cast<std::uint64_t>(image_index);
  const SampleResult result = sample(triplet, schedule, backbone, cfg.guidance, seed);
  const ImageJudgment j = judge_image(result.final_latent, backbone, triplet, 0, image_index,
                                      cfg.evaluator);
  const fs::path root(cfg.output_dir);
  fs::create_directories(root);
  write_pgm(result.final_latent.channel_mean(), root / "sample.pgm");
  write_file(root / "sample.json", grid_to_json(result.final_latent.channel_mean()).dump() + "\n");
  std::string trace;
  for (const auto& step : result.trace) trace += canonical_dump(trace_to_json(step)) + "\n";
  write_file(root / "trace.jsonl", trace);
  std::cout << canonical_dump(judgment_to_json(j)) << "\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Attention-centroid spatial guidance on a synthetic diffusion backbone"};
  app.require_subcommand(1);

  CommonOptions common;
  auto* bench = app.add_subcommand("bench", "Run the spatial benchmark and write metrics");
  add_common(bench, common);

  auto* ablate = app.add_subcommand("ablate", "Run the 8-row loss-term ablation");
  add_common(ablate, common);

  GridSpec grid;
  auto* gridsearch = app.add_subcommand("gridsearch", "Hyperparameter grid on a reduced benchmark");
  add_common(gridsearch, common);
  gridsearch->add_option("--alpha", grid.alpha)->delimiter(',');
  gridsearch->add_option("--margin", grid.margin)->delimiter(',');
  gridsearch->add_option("--lambda-s", grid.lambda_spatial)->delimiter(',');
  gridsearch->add_option("--lambda-p", grid.lambda_presence)->delimiter(',');
  gridsearch->add_option("--lambda-b", grid.lambda_balance)->delimiter(',');
  gridsearch->add_option("--pairs", grid.pair_count, "Pairs per grid cell");

  GradcheckOptions gc;
  auto* gradcheck = app.add_subcommand("gradcheck", "Compare the analytic gradient with finite differences");
  add_common(gradcheck, common);
  gradcheck->add_option("--probes", gc.probes)->check(CLI::NonNegativeNumber);
  gradcheck->add_option("--cells", gc.cells_per_probe)->check(CLI::PositiveNumber);
  gradcheck->add_option("--step", gc.step);
  gradcheck->add_option("--tolerance", gc.tolerance);
  gradcheck->add_option("--corrupt", gc.corrupt_scale, "Scale the analytic gradient (canary)");

  std::string judgments_path;
  int images_per_prompt = 4;
  auto* metrics = app.add_subcommand("metrics", "Score a JSON-lines file of image judgments");
  metrics->add_option("judgments", judgments_path)->required();
  metrics->add_option("-n,--images-per-prompt", images_per_prompt);

  std::string prompt_text;
  int image_index = 0;
  auto* sample_cmd = app.add_subcommand("sample", "Sample one prompt and dump its trace and image");
  add_common(sample_cmd, common);
  sample_cmd->add_option("prompt", prompt_text)->required();
  sample_cmd->add_option("--image", image_index, "Image index (seed offset)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (*bench) return cmd_bench(common);
    if (*ablate) return cmd_ablate(common);
    if (*gridsearch) return cmd_gridsearch(common, grid);
    if (*gradcheck) {
      if (common.seed) gc.seed = *common.seed;
      return cmd_gradcheck(common, gc);
    }
    if (*metrics) return cmd_metrics(judgments_path, images_per_prompt);
    if (*sample_cmd) return cmd_sample(common, prompt_text, image_index);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const NumericalAbort& e) {
    std::cerr << "numerical abort: " << e.what() << "\n";
    return kExitAbort;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitFailed;
  }
  return kExitOk;
}
