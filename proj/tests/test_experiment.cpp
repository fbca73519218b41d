#include <gtest/gtest.h>

#include <fstream>
#include <sstream>

#include "sguide/experiment.hpp"

using namespace sguide;

namespace {

ExperimentConfig small_config(int pair_count = 1, int images = 4) {
  ExperimentConfig cfg;
  cfg.benchmark.pair_count = pair_count;
  cfg.benchmark.images_per_prompt = images;
  return cfg;
}

std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

std::filesystem::path scratch(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("sguide_test_" + name);
  std::filesystem::remove_all(dir);
  return dir;
}

}  // namespace

TEST(Config, DefaultsRoundTripThroughJson) {
  const ExperimentConfig cfg = ExperimentConfig::defaults();
  EXPECT_EQ(cfg.benchmark.base_seed, 42u);
  EXPECT_EQ(cfg.schedule.steps, 50);
  EXPECT_EQ(cfg.guidance.gamma, 7.5);
  const auto j = config_to_json(cfg);
  EXPECT_EQ(canonical_dump(config_to_json(config_from_json(j))), canonical_dump(j));
  EXPECT_EQ(config_hash(config_from_json(j)), config_hash(cfg));
}

TEST(Config, HashIgnoresKeyOrderAndRunFlags) {
  const ExperimentConfig cfg;
  const std::string text = canonical_dump(config_to_json(cfg));
  // nlohmann::json objects are key-sorted, so parsing any permutation of the
  // same members gives the same canonical form.
  const auto reparsed = nlohmann::json::parse(R"({"schedule":{"steps":50},"benchmark":{"pair_count":40}})");
  ExperimentConfig partial = config_from_json(reparsed);
  EXPECT_EQ(config_hash(partial), config_hash(cfg));
  ExperimentConfig other = cfg;
  other.workers = 8;
  other.output_dir = "elsewhere";
  other.trace = true;
  EXPECT_EQ(config_hash(other), config_hash(cfg));
  other.guidance.eta = 1.0;
  EXPECT_NE(config_hash(other), config_hash(cfg));
}

TEST(Config, OverridesAndErrors) {
  const ExperimentConfig cfg;
  EXPECT_EQ(apply_override(cfg, "guidance.eta=0").guidance.eta, 0.0);
  EXPECT_EQ(apply_override(cfg, "loss.lambda_presence=0.25").guidance.loss.lambda_presence, 0.25);
  EXPECT_EQ(apply_override(cfg, "guidance.eta_mode=normalized").guidance.eta_mode,
            EtaMode::Normalized);
  EXPECT_THROW(apply_override(cfg, "guidance.nonsense=1"), ConfigError);
  EXPECT_THROW(apply_override(cfg, "nosection=1"), ConfigError);
  EXPECT_THROW(apply_override(cfg, "bogus.key=1"), ConfigError);
  EXPECT_THROW(apply_override(cfg, "benchmark.images_per_prompt=0"), ConfigError);
  EXPECT_THROW(config_from_json(nlohmann::json::parse(R"({"extra":{}})")), ConfigError);
  EXPECT_THROW(load_config("/nonexistent/config.json"), ConfigError);
  ExperimentConfig too_many = cfg;
  too_many.benchmark.pair_count = 121;
  EXPECT_THROW(too_many.validate(), ConfigError);
}

TEST(RunBench, CountsAndSeedProtocol) {
  ExperimentConfig cfg = small_config();
  const RunRecord guided = run_bench(cfg);
  EXPECT_EQ(guided.judgments.size(), 16u);
  EXPECT_EQ(guided.prompts.size(), 4u);
  cfg.guidance.eta = 0.0;
  const RunRecord plain = run_bench(cfg);
  EXPECT_EQ(plain.image_seeds, guided.image_seeds);
  EXPECT_EQ(guided.image_seeds, (std::vector<std::uint64_t>{42, 43, 44, 45}));
  EXPECT_TRUE(guided.report.invariants_hold());
  EXPECT_TRUE(plain.report.invariants_hold());
}

TEST(RunBench, DeterministicAcrossRepeatsAndWorkerCounts) {
  ExperimentConfig cfg = small_config(2, 2);
  const RunRecord a = run_bench(cfg);
  cfg.workers = 4;
  const RunRecord b = run_bench(cfg);
  EXPECT_EQ(canonical_dump(report_to_json(a.report)), canonical_dump(report_to_json(b.report)));
  for (std::size_t i = 0; i < a.judgments.size(); ++i) {
    EXPECT_EQ(canonical_dump(judgment_to_json(a.judgments[i])),
              canonical_dump(judgment_to_json(b.judgments[i])));
  }
}

TEST(Persist, ArtifactsReadBackByteIdentically) {
  ExperimentConfig cfg = small_config(1, 2);
  cfg.trace = true;
  cfg.dump_images = true;
  const RunRecord rec = run_bench(cfg);
  const auto dir = scratch("persist");
  persist_record(rec, dir);
  for (const char* f : {"config.json", "prompts.jsonl", "judgments.jsonl", "report.json",
                        "metrics.csv", "record.json", "traces.jsonl"}) {
    EXPECT_TRUE(std::filesystem::exists(dir / f)) << f;
  }
  EXPECT_TRUE(std::filesystem::exists(dir / "images" / "p0_i0.pgm"));

  const std::string report = read_file(dir / "report.json");
  const MetricsReport back = report_from_json(nlohmann::json::parse(report));
  EXPECT_EQ(canonical_dump(report_to_json(back)) + "\n", report);

  const ExperimentConfig cfg_back = load_config(dir / "config.json");
  EXPECT_EQ(config_to_json(cfg_back).dump(2) + "\n", read_file(dir / "config.json"));
  EXPECT_EQ(config_hash(cfg_back), rec.config_hash);

  std::istringstream lines(read_file(dir / "judgments.jsonl"));
  std::string line;
  while (std::getline(lines, line)) {
    EXPECT_EQ(canonical_dump(judgment_to_json(judgment_from_json(nlohmann::json::parse(line)))),
              line);
  }
  std::filesystem::remove_all(dir);
}

TEST(Persist, RerunGivesIdenticalReportBytes) {
  const ExperimentConfig cfg = small_config(1, 2);
  const auto d1 = scratch("rerun1");
  const auto d2 = scratch("rerun2");
  persist_record(run_bench(cfg), d1);
  persist_record(run_bench(load_config(d1 / "config.json")), d2);
  EXPECT_EQ(read_file(d1 / "report.json"), read_file(d2 / "report.json"));
  EXPECT_EQ(read_file(d1 / "judgments.jsonl"), read_file(d2 / "judgments.jsonl"));
  std::filesystem::remove_all(d1);
  std::filesystem::remove_all(d2);
}

TEST(Ablation, EightRowsInBinaryOrderAndAllOffIsBaseline) {
  const ExperimentConfig cfg = small_config(1, 1);
  const auto rows = run_ablation(cfg);
  ASSERT_EQ(rows.size(), 8u);
  for (int bits = 0; bits < 8; ++bits) {
    EXPECT_EQ(rows[static_cast<std::size_t>(bits)].spatial, (bits & 4) != 0);
    EXPECT_EQ(rows[static_cast<std::size_t>(bits)].presence, (bits & 2) != 0);
    EXPECT_EQ(rows[static_cast<std::size_t>(bits)].balance, (bits & 1) != 0);
  }
  ExperimentConfig baseline = cfg;
  baseline.guidance.eta = 0.0;
  const RunRecord base = run_bench(baseline);
  EXPECT_EQ(canonical_dump(report_to_json(rows[0].record.report)),
            canonical_dump(report_to_json(base.report)));
  const std::string csv = ablation_csv(rows);
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 9);
  EXPECT_EQ(csv.rfind("spatial,presence,balance,oa,", 0), 0u);
}

TEST(Gridsearch, DegenerateGridEqualsBench) {
  ExperimentConfig cfg = small_config(1, 1);
  GridSpec grid;
  grid.alpha = {1.5};
  grid.margin = {0.25};
  grid.lambda_spatial = {0.5};
  grid.lambda_presence = {1.0};
  grid.lambda_balance = {0.5};
  grid.pair_count = 1;
  const auto rows = run_gridsearch(cfg, grid);
  ASSERT_EQ(rows.size(), 1u);
  EXPECT_EQ(canonical_dump(report_to_json(rows[0].report)),
            canonical_dump(report_to_json(run_bench(cfg).report)));
}

TEST(Gridsearch, DefaultGridContainsPaperCellAndOversizeRejected) {
  const GridSpec grid;
  auto has = [](const std::vector<double>& v, double x) {
    return std::find(v.begin(), v.end(), x) != v.end();
  };
  EXPECT_TRUE(has(grid.alpha, 1.5));
  EXPECT_TRUE(has(grid.margin, 0.25));
  EXPECT_TRUE(has(grid.lambda_spatial, 0.5));
  EXPECT_TRUE(has(grid.lambda_presence, 1.0));
  EXPECT_TRUE(has(grid.lambda_balance, 0.5));
  EXPECT_LE(grid.combinations(), kMaxGridCombinations);
  GridSpec big;
  big.alpha = {1, 2, 3, 4, 5};
  big.margin = {1, 2, 3, 4, 5};
  big.lambda_spatial = {1, 2, 3};
  big.lambda_presence = {1, 2, 3};
  EXPECT_GT(big.combinations(), kMaxGridCombinations);
  EXPECT_THROW(run_gridsearch(ExperimentConfig{}, big), ConfigError);
}

TEST(Gridsearch, SortByUncondDescendingAndStable) {
  std::vector<GridRow> rows(4);
  const double uncond[] = {10.0, 30.0, 10.0, 20.0};
  for (std::size_t i = 0; i < 4; ++i) {
    rows[i].alpha = static_cast<double>(i);
    rows[i].report.visor_uncond = uncond[i];
  }
  const auto sorted = sort_by_uncond(rows);
  EXPECT_EQ(sorted[0].alpha, 1.0);
  EXPECT_EQ(sorted[1].alpha, 3.0);
  EXPECT_EQ(sorted[2].alpha, 0.0);
  EXPECT_EQ(sorted[3].alpha, 2.0);
}

TEST(Gradcheck, EmptyPassesAndCorruptionIsCaught) {
  const ExperimentConfig cfg;
  GradcheckOptions none;
  none.probes = 0;
  const GradcheckReport empty = run_gradcheck(cfg, none);
  EXPECT_TRUE(empty.passed);
  EXPECT_TRUE(empty.probes.empty());

  GradcheckOptions two;
  two.probes = 2;
  EXPECT_TRUE(run_gradcheck(cfg, two).passed);
  two.corrupt_scale = 1.01;
  const GradcheckReport bad = run_gradcheck(cfg, two);
  EXPECT_FALSE(bad.passed);
  EXPECT_GT(bad.max_relative_error, 1e-3);
}
