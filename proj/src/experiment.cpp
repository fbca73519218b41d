#include "sguide/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <random>
#include <sstream>

#include "sguide/grid_io.hpp"

namespace sguide {

namespace {

using nlohmann::json;

std::string filter_name(FilterMode m) {
  switch (m) {
    case FilterMode::ScaleMatched: return "scale_matched";
    case FilterMode::ZeroMean: return "zero_mean";
    case FilterMode::Plain: return "plain";
  }
  return "plain";
}

FilterMode filter_from_name(const std::string& s) {
  if (s == "scale_matched") return FilterMode::ScaleMatched;
  if (s == "zero_mean") return FilterMode::ZeroMean;
  if (s == "plain") return FilterMode::Plain;
  throw ConfigError("backbone.filter must be scale_matched, zero_mean or plain, got '" + s + "'");
}

std::string eta_mode_name(EtaMode m) { return m == EtaMode::Fixed ? "fixed" : "normalized"; }

EtaMode eta_mode_from_name(const std::string& s) {
  if (s == "fixed") return EtaMode::Fixed;
  if (s == "normalized") return EtaMode::Normalized;
  throw ConfigError("guidance.eta_mode must be 'fixed' or 'normalized', got '" + s + "'");
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out << text;
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

std::string fixed(double v, int digits = 4) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(digits) << v;
  return os.str();
}

json centroid_json(const Centroid& c) { return json::array({c.x, c.y}); }

}  // namespace

ExperimentConfig ExperimentConfig::defaults() { return ExperimentConfig{}; }

void ExperimentConfig::validate() const {
  try {
    backbone.validate();
    Schedule(schedule.steps, schedule.beta_start, schedule.beta_end);
    guidance.validate(schedule.steps);
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw ConfigError(e.what());
  }
  if (benchmark.images_per_prompt < 1) throw ConfigError("benchmark.images_per_prompt must be >= 1");
  if (benchmark.pair_count < 1) throw ConfigError("benchmark.pair_count must be >= 1");
  const std::size_t k = backbone.vocab.size();
  if (static_cast<std::size_t>(benchmark.pair_count) > k * (k - 1) / 2) {
    throw ConfigError("benchmark.pair_count exceeds the number of object pairs");
  }
  if (!(evaluator.detection_threshold > 0.0)) {
    throw ConfigError("evaluator.detection_threshold must be > 0");
  }
  if (!(evaluator.iou_threshold >= 0.0 && evaluator.iou_threshold <= 1.0)) {
    throw ConfigError("evaluator.iou_threshold must be in [0,1]");
  }
  if (workers < 1) throw ConfigError("run.workers must be >= 1");
}

json config_to_json(const ExperimentConfig& cfg) {
  json j;
  const auto& b = cfg.backbone;
  j["backbone"] = {{"height", b.height},
                   {"width", b.width},
                   {"channels", b.channels},
                   {"filter", filter_name(b.filter)},
                   {"loc_temperature_fraction", b.loc_temperature_fraction},
                   {"level_temperature", b.level_temperature},
                   {"layer_temperature_factors", b.layer_temperature_factors},
                   {"unconditional_classes", b.unconditional_classes},
                   {"clean_clip", b.clean_clip},
                   {"explain_away", b.explain_away},
                   {"residual_variance", b.residual_variance},
                   {"vocabulary", vocabulary_to_json(b.vocab)}};
  j["schedule"] = {{"steps", cfg.schedule.steps},
                   {"beta_start", cfg.schedule.beta_start},
                   {"beta_end", cfg.schedule.beta_end}};
  const auto& g = cfg.guidance;
  j["guidance"] = {{"gamma", g.gamma},
                   {"eta", g.eta},
                   {"apply_from_step", g.apply_from_step},
                   {"apply_to_step", g.apply_to_step},
                   {"clip_gradient", g.clip_gradient},
                   {"clip_denoised", g.clip_denoised},
                   {"eta_mode", eta_mode_name(g.eta_mode)}};
  j["loss"] = {{"alpha", g.loss.alpha},
               {"margin", g.loss.margin},
               {"lambda_spatial", g.loss.lambda_spatial},
               {"lambda_presence", g.loss.lambda_presence},
               {"lambda_balance", g.loss.lambda_balance},
               {"activation", "gelu"}};
  j["evaluator"] = {{"detection_threshold", cfg.evaluator.detection_threshold},
                    {"iou_threshold", cfg.evaluator.iou_threshold}};
  j["benchmark"] = {{"pair_count", cfg.benchmark.pair_count},
                    {"images_per_prompt", cfg.benchmark.images_per_prompt},
                    {"base_seed", cfg.benchmark.base_seed},
                    {"benchmark_seed", cfg.benchmark.benchmark_seed}};
  j["run"] = {{"output_dir", cfg.output_dir},
              {"trace", cfg.trace},
              {"dump_images", cfg.dump_images},
              {"workers", cfg.workers}};
  return j;
}

ExperimentConfig config_from_json(const json& input) {
  if (!input.is_object()) throw ConfigError("config must be a JSON object");
  json merged = config_to_json(ExperimentConfig::defaults());
  for (const auto& [section, body] : input.items()) {
    if (!merged.contains(section)) throw ConfigError("unknown config section '" + section + "'");
    if (!body.is_object()) throw ConfigError("config section '" + section + "' must be an object");
    for (const auto& [key, value] : body.items()) {
      if (!merged[section].contains(key)) {
        throw ConfigError("unknown config key '" + section + "." + key + "'");
      }
      merged[section][key] = value;
    }
  }

  ExperimentConfig cfg;
  try {
    const auto& b = merged.at("backbone");
    cfg.backbone.height = b.at("height").get<int>();
    cfg.backbone.width = b.at("width").get<int>();
    cfg.backbone.channels = b.at("channels").get<int>();
    cfg.backbone.filter = filter_from_name(b.at("filter").get<std::string>());
    cfg.backbone.loc_temperature_fraction = b.at("loc_temperature_fraction").get<double>();
    cfg.backbone.level_temperature = b.at("level_temperature").get<std::array<double, 3>>();
    cfg.backbone.layer_temperature_factors =
        b.at("layer_temperature_factors").get<std::array<double, 3>>();
    cfg.backbone.unconditional_classes = b.at("unconditional_classes").get<int>();
    cfg.backbone.clean_clip = b.at("clean_clip").get<double>();
    cfg.backbone.explain_away = b.at("explain_away").get<bool>();
    cfg.backbone.residual_variance = b.at("residual_variance").get<double>();
    cfg.backbone.vocab = vocabulary_from_json(b.at("vocabulary"));

    const auto& s = merged.at("schedule");
    cfg.schedule = {s.at("steps").get<int>(), s.at("beta_start").get<double>(),
                    s.at("beta_end").get<double>()};

    const auto& g = merged.at("guidance");
    cfg.guidance.gamma = g.at("gamma").get<double>();
    cfg.guidance.eta = g.at("eta").get<double>();
    cfg.guidance.apply_from_step = g.at("apply_from_step").get<int>();
    cfg.guidance.apply_to_step = g.at("apply_to_step").get<int>();
    cfg.guidance.clip_gradient = g.at("clip_gradient").get<bool>();
    cfg.guidance.clip_denoised = g.at("clip_denoised").get<bool>();
    cfg.guidance.eta_mode = eta_mode_from_name(g.at("eta_mode").get<std::string>());

    const auto& l = merged.at("loss");
    cfg.guidance.loss.alpha = l.at("alpha").get<double>();
    cfg.guidance.loss.margin = l.at("margin").get<double>();
    cfg.guidance.loss.lambda_spatial = l.at("lambda_spatial").get<double>();
    cfg.guidance.loss.lambda_presence = l.at("lambda_presence").get<double>();
    cfg.guidance.loss.lambda_balance = l.at("lambda_balance").get<double>();
    if (l.at("activation").get<std::string>() != "gelu") {
      throw ConfigError("loss.activation: only 'gelu' is supported");
    }

    const auto& e = merged.at("evaluator");
    cfg.evaluator.detection_threshold = e.at("detection_threshold").get<double>();
    cfg.evaluator.iou_threshold = e.at("iou_threshold").get<double>();

    const auto& bm = merged.at("benchmark");
    cfg.benchmark.pair_count = bm.at("pair_count").get<int>();
    cfg.benchmark.images_per_prompt = bm.at("images_per_prompt").get<int>();
    cfg.benchmark.base_seed = bm.at("base_seed").get<std::uint64_t>();
    cfg.benchmark.benchmark_seed = bm.at("benchmark_seed").get<std::uint64_t>();
    cfg.evaluator.images_per_prompt = cfg.benchmark.images_per_prompt;

    const auto& r = merged.at("run");
    cfg.output_dir = r.at("output_dir").get<std::string>();
    cfg.trace = r.at("trace").get<bool>();
    cfg.dump_images = r.at("dump_images").get<bool>();
    cfg.workers = r.at("workers").get<int>();
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& ex) {
    throw ConfigError(std::string("invalid config: ") + ex.what());
  }
  cfg.validate();
  return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  json j;
  try {
    in >> j;
  } catch (const std::exception& e) {
    throw ConfigError("cannot parse " + path.string() + ": " + e.what());
  }
  return config_from_json(j);
}

ExperimentConfig apply_override(const ExperimentConfig& cfg, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) {
    throw ConfigError("override must look like section.key=value, got '" + assignment + "'");
  }
  const std::string key = assignment.substr(0, eq);
  const std::string raw = assignment.substr(eq + 1);
  const auto dot = key.find('.');
  if (dot == std::string::npos) throw ConfigError("override key needs a section: '" + key + "'");
  json value;
  try {
    value = json::parse(raw);
  } catch (const json::parse_error&) {
    value = raw;
  }
  json patch = json::object();
  patch[key.substr(0, dot)][key.substr(dot + 1)] = value;
  json full = config_to_json(cfg);
  for (const auto& [section, body] : patch.items()) {
    if (!full.contains(section)) throw ConfigError("unknown config section '" + section + "'");
    for (const auto& [k, v] : body.items()) {
      if (!full[section].contains(k)) throw ConfigError("unknown config key '" + key + "'");
      full[section][k] = v;
    }
  }
  return config_from_json(full);
}

std::string canonical_dump(const json& j) { return j.dump(); }

std::string config_hash(const ExperimentConfig& cfg) {
  json j = config_to_json(cfg);
  j.erase("run");
  const std::string text = canonical_dump(j);
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

RunRecord run_bench(const ExperimentConfig& cfg, const std::string& name) {
  cfg.validate();
  const auto start = std::chrono::steady_clock::now();
  RunRecord rec;
  rec.name = name;
  rec.config = cfg;
  rec.config_hash = config_hash(cfg);
  rec.prompts = generate_benchmark(cfg.backbone.vocab, cfg.benchmark.pair_count,
                                   cfg.benchmark.benchmark_seed);
  const int n_images = cfg.benchmark.images_per_prompt;
  for (int i = 0; i < n_images; ++i) {
    rec.image_seeds.push_back(cfg.benchmark.base_seed + static_cast<std::uint64_t>(i));
  }

  const Backbone backbone(cfg.backbone);
  const Schedule schedule(cfg.schedule.steps, cfg.schedule.beta_start, cfg.schedule.beta_end);
  EvaluatorConfig eval = cfg.evaluator;
  eval.images_per_prompt = n_images;

  const int jobs = static_cast<int>(rec.prompts.size()) * n_images;
  rec.judgments.resize(static_cast<std::size_t>(jobs));
  std::vector<int> abort_step(static_cast<std::size_t>(jobs), 0);
  if (cfg.trace) rec.traces.resize(static_cast<std::size_t>(jobs));
  if (cfg.dump_images) rec.images.resize(static_cast<std::size_t>(jobs));

  // Each job owns its output slot; nothing else is shared mutably.
#pragma omp parallel for schedule(dynamic) num_threads(cfg.workers)
  for (int job = 0; job < jobs; ++job) {
    const int p = job / n_images;
    const int i = job % n_images;
    const auto& triplet = rec.prompts[static_cast<std::size_t>(p)];
    auto& judgment = rec.judgments[static_cast<std::size_t>(job)];
    try {
      SampleResult s = sample(triplet, schedule, backbone, cfg.guidance,
                              rec.image_seeds[static_cast<std::size_t>(i)]);
      judgment = judge_image(s.final_latent, backbone, triplet, p, i, eval);
      if (cfg.trace) rec.traces[static_cast<std::size_t>(job)] = std::move(s.trace);
      if (cfg.dump_images) rec.images[static_cast<std::size_t>(job)] = std::move(s.final_latent);
    } catch (const NumericalAbort& e) {
      judgment = ImageJudgment{p, i, false, false, 0.0};
      abort_step[static_cast<std::size_t>(job)] = e.step();
    }
  }

  for (int job = 0; job < jobs; ++job) {
    if (abort_step[static_cast<std::size_t>(job)] != 0) {
      rec.aborts.push_back({job / n_images, job % n_images, abort_step[static_cast<std::size_t>(job)]});
    }
  }
  rec.report = visor_metrics(rec.judgments, eval);
  rec.duration_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return rec;
}

json trace_to_json(const StepTrace& step) {
  json centroids;
  for (Token token : {Token::A, Token::B}) {
    json levels;
    for (Level level : kAllLevels) {
      levels[level_name(level)] = centroid_json(
          step.centroids[static_cast<std::size_t>(token_index(token))]
                        [static_cast<std::size_t>(level_index(level))]);
    }
    centroids[token == Token::A ? "a" : "b"] = levels;
  }
  return {{"t", step.t},
          {"loss",
           {{"spatial", step.loss.spatial},
            {"presence", step.loss.presence},
            {"balance", step.loss.balance},
            {"total", step.loss.total}}},
          {"gradient_norm", step.gradient_norm},
          {"centroids", centroids}};
}

namespace {

std::string metrics_csv_header(int n) {
  std::string h = "oa,visor_uncond,visor_cond";
  for (int k = 1; k <= n; ++k) h += ",visor_" + std::to_string(k);
  return h + ",t2i_spatial";
}

std::string metrics_csv_values(const MetricsReport& r) {
  std::string s = fixed(r.oa, 2) + "," + fixed(r.visor_uncond, 2) + "," + fixed(r.visor_cond, 2);
  for (double v : r.visor_k) s += "," + fixed(v, 2);
  return s + "," + fixed(r.t2i_spatial, 4);
}

}  // namespace

void persist_record(const RunRecord& record, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw std::runtime_error("cannot create " + dir.string() + ": " + ec.message());

  write_text(dir / "config.json", config_to_json(record.config).dump(2) + "\n");

  std::string prompts;
  for (const auto& t : record.prompts) prompts += canonical_dump(triplet_to_json(t)) + "\n";
  write_text(dir / "prompts.jsonl", prompts);

  std::string judgments;
  for (const auto& j : record.judgments) judgments += canonical_dump(judgment_to_json(j)) + "\n";
  write_text(dir / "judgments.jsonl", judgments);

  write_text(dir / "report.json", canonical_dump(report_to_json(record.report)) + "\n");
  write_text(dir / "metrics.csv", metrics_csv_header(record.report.images_per_prompt) + "\n" +
                                      metrics_csv_values(record.report) + "\n");

  json aborts = json::array();
  for (const auto& a : record.aborts) {
    aborts.push_back({{"prompt", a.prompt_index}, {"image", a.image_index}, {"step", a.step}});
  }
  json summary = {{"name", record.name},
                  {"config_hash", record.config_hash},
                  {"image_seeds", record.image_seeds},
                  {"aborts", aborts},
                  {"duration_seconds", record.duration_seconds},
                  {"report", report_to_json(record.report)}};
  write_text(dir / "record.json", summary.dump(2) + "\n");

  const int n = record.config.benchmark.images_per_prompt;
  if (!record.traces.empty()) {
    std::string lines;
    for (std::size_t job = 0; job < record.traces.size(); ++job) {
      for (const auto& step : record.traces[job]) {
        json line = trace_to_json(step);
        line["prompt"] = static_cast<int>(job) / n;
        line["image"] = static_cast<int>(job) % n;
        lines += canonical_dump(line) + "\n";
      }
    }
    write_text(dir / "traces.jsonl", lines);
  }
  if (!record.images.empty()) {
    const auto images = dir / "images";
    std::filesystem::create_directories(images, ec);
    if (ec) throw std::runtime_error("cannot create " + images.string() + ": " + ec.message());
    for (std::size_t job = 0; job < record.images.size(); ++job) {
      if (record.images[job].channels() == 0) continue;
      const auto file = images / ("p" + std::to_string(job / static_cast<std::size_t>(n)) + "_i" +
                                  std::to_string(job % static_cast<std::size_t>(n)) + ".pgm");
      write_pgm(record.images[job].channel_mean(), file);
    }
  }
}

ExperimentConfig ablation_config(const ExperimentConfig& cfg, bool spatial, bool presence,
                                 bool balance) {
  ExperimentConfig row = cfg;
  auto& loss = row.guidance.loss;
  if (!spatial) loss.lambda_spatial = 0.0;
  if (!presence) loss.lambda_presence = 0.0;
  if (!balance) loss.lambda_balance = 0.0;
  return row;
}

std::vector<AblationRow> run_ablation(const ExperimentConfig& cfg) {
  std::vector<AblationRow> rows;
  for (int bits = 0; bits < 8; ++bits) {
    const bool s = (bits & 4) != 0;
    const bool p = (bits & 2) != 0;
    const bool b = (bits & 1) != 0;
    const std::string name = std::string("ablate_s") + (s ? "1" : "0") + "p" + (p ? "1" : "0") +
                             "b" + (b ? "1" : "0");
    rows.push_back({s, p, b, run_bench(ablation_config(cfg, s, p, b), name)});
  }
  return rows;
}

std::string ablation_csv(const std::vector<AblationRow>& rows) {
  const int n = rows.empty() ? 4 : rows.front().record.report.images_per_prompt;
  std::string out = "spatial,presence,balance," + metrics_csv_header(n) + "\n";
  for (const auto& r : rows) {
    out += std::string(r.spatial ? "1" : "0") + "," + (r.presence ? "1" : "0") + "," +
           (r.balance ? "1" : "0") + "," + metrics_csv_values(r.record.report) + "\n";
  }
  return out;
}

std::size_t GridSpec::combinations() const {
  return alpha.size() * margin.size() * lambda_spatial.size() * lambda_presence.size() *
         lambda_balance.size();
}

std::vector<GridRow> run_gridsearch(const ExperimentConfig& cfg, const GridSpec& grid) {
  const std::size_t n = grid.combinations();
  if (n == 0) throw ConfigError("gridsearch: every axis needs at least one value");
  if (n > kMaxGridCombinations) {
    throw ConfigError("gridsearch: " + std::to_string(n) + " combinations exceed the limit of " +
                      std::to_string(kMaxGridCombinations));
  }
  std::vector<GridRow> rows;
  rows.reserve(n);
  for (double a : grid.alpha)
    for (double m : grid.margin)
      for (double ls : grid.lambda_spatial)
        for (double lp : grid.lambda_presence)
          for (double lb : grid.lambda_balance) {
            ExperimentConfig c = cfg;
            c.benchmark.pair_count = grid.pair_count;
            c.trace = false;
            c.dump_images = false;
            c.guidance.loss.alpha = a;
            c.guidance.loss.margin = m;
            c.guidance.loss.lambda_spatial = ls;
            c.guidance.loss.lambda_presence = lp;
            c.guidance.loss.lambda_balance = lb;
            rows.push_back({a, m, ls, lp, lb, run_bench(c, "grid").report});
          }
  return rows;
}

std::string gridsearch_csv(const std::vector<GridRow>& rows) {
  const int n = rows.empty() ? 4 : rows.front().report.images_per_prompt;
  std::string out = "alpha,margin,lambda_s,lambda_p,lambda_b," + metrics_csv_header(n) + "\n";
  for (const auto& r : rows) {
    out += fixed(r.alpha, 3) + "," + fixed(r.margin, 3) + "," + fixed(r.lambda_spatial, 3) + "," +
           fixed(r.lambda_presence, 3) + "," + fixed(r.lambda_balance, 3) + "," +
           metrics_csv_values(r.report) + "\n";
  }
  return out;
}

std::vector<GridRow> sort_by_uncond(std::vector<GridRow> rows) {
  std::stable_sort(rows.begin(), rows.end(), [](const GridRow& a, const GridRow& b) {
    return a.report.visor_uncond > b.report.visor_uncond;
  });
  return rows;
}

GradcheckReport run_gradcheck(const ExperimentConfig& cfg, const GradcheckOptions& options) {
  cfg.validate();
  GradcheckReport report;
  report.tolerance = options.tolerance;
  if (options.probes <= 0) return report;

  const Backbone backbone(cfg.backbone);
  const Schedule schedule(cfg.schedule.steps, cfg.schedule.beta_start, cfg.schedule.beta_end);
  const auto& vocab = cfg.backbone.vocab;
  LossConfig loss = cfg.guidance.loss;
  if (loss.all_off()) loss = LossConfig{};

  std::mt19937_64 rng(options.seed);
  std::uniform_int_distribution<std::size_t> pick_object(0, vocab.size() - 1);
  std::uniform_int_distribution<int> pick_relation(0, 3);
  std::uniform_int_distribution<int> pick_step(1, schedule.steps());
  std::uniform_real_distribution<double> unit(0.1, 0.9);
  const int cells = cfg.backbone.height * cfg.backbone.width;
  std::uniform_int_distribution<int> pick_cell(0, cells - 1);

  for (int probe = 0; probe < options.probes; ++probe) {
    const std::size_t ia = pick_object(rng);
    std::size_t ib = pick_object(rng);
    while (ib == ia) ib = pick_object(rng);
    const auto triplet = make_triplet(vocab.at(ia).id, kDirectionalRelations[pick_relation(rng)],
                                      vocab.at(ib).id, vocab);
    const int t = pick_step(rng);
    const Latent clean = backbone.synthesize_clean(triplet, {unit(rng), unit(rng)},
                                                   {unit(rng), unit(rng)});
    Latent z = add_noise(clean, t, schedule, rng()).first;

    GradientResult analytic = loss_gradient(z, t, triplet, schedule, backbone, loss);
    analytic.gradient *= options.corrupt_scale;

    GradcheckProbe result;
    result.t = t;
    result.prompt = triplet.raw_text;
    for (int n = 0; n < options.cells_per_probe; ++n) {
      const int cell = pick_cell(rng);
      const int c = static_cast<int>(rng() % static_cast<std::uint64_t>(z.channels()));
      const int h = cell / cfg.backbone.width;
      const int w = cell % cfg.backbone.width;
      const double saved = z.channel(c)(h, w);
      z.channel(c)(h, w) = saved + options.step;
      const double up = evaluate_loss(z, triplet, backbone, loss).total;
      z.channel(c)(h, w) = saved - options.step;
      const double down = evaluate_loss(z, triplet, backbone, loss).total;
      z.channel(c)(h, w) = saved;
      const double numeric = (up - down) / (2.0 * options.step);
      const double a = analytic.gradient.channel(c)(h, w);
      const double rel = std::abs(a - numeric) / std::max(std::abs(a), 1e-8);
      result.max_relative_error = std::max(result.max_relative_error, rel);
    }
    report.max_relative_error = std::max(report.max_relative_error, result.max_relative_error);
    report.probes.push_back(result);
  }
  report.passed = report.max_relative_error < options.tolerance;
  return report;
}

json gradcheck_to_json(const GradcheckReport& report) {
  json probes = json::array();
  for (const auto& p : report.probes) {
    probes.push_back(
        {{"t", p.t}, {"prompt", p.prompt}, {"max_relative_error", p.max_relative_error}});
  }
  return {{"probes", probes},
          {"max_relative_error", report.max_relative_error},
          {"tolerance", report.tolerance},
          {"passed", report.passed}};
}

}  // namespace sguide
