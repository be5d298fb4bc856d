#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <gtest/gtest.h>

#include "gfmlab/cli/pipeline.hpp"
#include "gfmlab/errors.hpp"

namespace gfmlab {
namespace {

namespace fs = std::filesystem;

fs::path fresh_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("gfmlab_it_" + name);
  fs::remove_all(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

RunConfig small_config() {
  RunConfig cfg;
  apply_config_text(cfg,
                    "seed = 3\n"
                    "data.domains = 3\ndata.classes = 3\ndata.nodes_per_class = 10\ndata.feature_dim = 4\n"
                    "encoder.hidden = 16\nencoder.out = 8\n"
                    "pretrain.lr = 0.05\npretrain.max_epochs = 4\n"
                    "ego.min = 6\nego.max = 12\n"
                    "attack.epochs = 3\n"
                    "finetune.epochs = 5\nhead.epochs = 100\n",
                    "small");
  return cfg;
}

void run_all(const RunConfig& cfg, const fs::path& dir, std::ostream& log) {
  for (const char* s : {"gen-data", "pretrain", "prototypes", "sensitivity-report", "attack", "eval",
                        "purify-eval", "persist-eval"}) {
    run_stage(s, cfg, dir, 1, log);
  }
}

EvalReport read_report(const fs::path& p) { return parse_report_json(slurp(p), p.string()); }

TEST(Pipeline, RerunIsByteIdentical) {
  const RunConfig cfg = small_config();
  const fs::path a = fresh_dir("rerun_a"), b = fresh_dir("rerun_b");
  std::ostringstream log;
  run_all(cfg, a, log);
  run_all(cfg, b, log);
  const std::string manifest = slurp(a / kManifestName);
  EXPECT_EQ(manifest, slurp(b / kManifestName));
  const Manifest m = load_manifest(a);
  for (const char* rel : {"encoder.ckpt", "prototypes.csv", "sensitivity.csv", "generator.ckpt", "targets.ckpt",
                          "attack_trace.csv", "report.json", "purify.json", "persist.json",
                          "update_histogram.csv"}) {
    ASSERT_TRUE(m.artifacts.count(rel)) << rel;
    EXPECT_EQ(slurp(a / rel), slurp(b / rel)) << rel;
  }
  const EvalReport r = read_report(a / "report.json");
  EXPECT_EQ(r.seed, 3u);
  EXPECT_EQ(r.config_digest, config_digest(cfg));
  for (double v : {r.asr, r.acc, r.asr_purified, r.asr_after_finetune}) {
    EXPECT_GE(v, 0.0);
    EXPECT_LE(v, 1.0);
  }
}

TEST(Pipeline, StageWithoutUpstreamNamesIt) {
  const RunConfig cfg = small_config();
  const fs::path dir = fresh_dir("upstream");
  std::ostringstream log;
  run_stage("gen-data", cfg, dir, 1, log);
  try {
    run_stage("attack", cfg, dir, 1, log);
    FAIL() << "expected MissingArtifactError";
  } catch (const MissingArtifactError& e) {
    EXPECT_NE(std::string(e.what()).find("pretrain"), std::string::npos) << e.what();
  }
  EXPECT_THROW(run_stage("no-such-stage", cfg, dir, 1, log), ConfigError);
}

TEST(Pipeline, TamperedUpstreamIsRejected) {
  const RunConfig cfg = small_config();
  const fs::path dir = fresh_dir("tamper");
  std::ostringstream log;
  run_stage("gen-data", cfg, dir, 1, log);
  run_stage("pretrain", cfg, dir, 1, log);
  std::ofstream(dir / "encoder.ckpt", std::ios::app) << "x";
  EXPECT_THROW(run_stage("prototypes", cfg, dir, 1, log), FormatError);
}

TEST(Pipeline, StealthTermRaisesTriggerSimilarity) {
  RunConfig plain = small_config();
  plain.attack.alpha = 0.0;
  plain.attack.beta = 0.0;
  plain.attack.epochs = 10;
  RunConfig stealthy = plain;
  stealthy.attack.alpha = 0.1;
  const fs::path a = fresh_dir("alpha0"), b = fresh_dir("alpha1");
  std::ostringstream log;
  run_all(plain, a, log);
  run_all(stealthy, b, log);
  EXPECT_GT(read_report(b / "report.json").mean_trigger_cosine, read_report(a / "report.json").mean_trigger_cosine);
}

TEST(Pipeline, GridAndReport) {
  RunConfig cfg = small_config();
  cfg.attack.epochs = 1;
  cfg.finetune.epochs = 2;
  const fs::path dir = fresh_dir("grid");
  std::ostringstream log;
  EXPECT_THROW(emit_report(dir, log), MissingArtifactError);
  for (const char* s : {"gen-data", "pretrain", "prototypes", "sensitivity-report"}) run_stage(s, cfg, dir, 1, log);
  run_stage("grid", cfg, dir, 4, log);
  std::istringstream grid(slurp(dir / "grid.csv"));
  std::string line;
  std::getline(grid, line);
  EXPECT_EQ(line, kReportCsvHeader);
  std::size_t rows = 0;
  while (std::getline(grid, line)) ++rows;
  EXPECT_EQ(rows, 25u);

  emit_report(dir, log);
  std::istringstream csv(slurp(dir / "report.csv"));
  rows = 0;
  while (std::getline(csv, line)) ++rows;
  EXPECT_EQ(rows, 26u);
  EXPECT_TRUE(fs::exists(dir / "summary.txt"));

  std::ofstream(dir / "grid" / "a0_b0" / "report.json") << "{\"seed\": ";
  try {
    emit_report(dir, log);
    FAIL() << "expected FormatError";
  } catch (const FormatError& e) {
    EXPECT_NE(std::string(e.what()).find("a0_b0"), std::string::npos) << e.what();
  }
}

TEST(Pipeline, GridIsIndependentOfJobCount) {
  RunConfig cfg = small_config();
  cfg.attack.epochs = 1;
  cfg.finetune.epochs = 1;
  cfg.grid_alphas = {0.1, 1.0};
  cfg.grid_betas = {0.0, 0.1};
  std::ostringstream log;
  std::string first;
  for (std::size_t jobs : {1u, 3u}) {
    const fs::path dir = fresh_dir("jobs" + std::to_string(jobs));
    for (const char* s : {"gen-data", "pretrain", "prototypes", "sensitivity-report"}) run_stage(s, cfg, dir, 1, log);
    run_stage("grid", cfg, dir, jobs, log);
    if (first.empty()) first = slurp(dir / kManifestName);
    else EXPECT_EQ(slurp(dir / kManifestName), first);
  }
}

TEST(Pipeline, FpsVerifyWritesCoverage) {
  RunConfig cfg = small_config();
  cfg.fps.trials = 200;
  const fs::path dir = fresh_dir("fps");
  std::ostringstream log;
  const StageResult r = run_stage("fps-verify", cfg, dir, 1, log);
  EXPECT_EQ(r.exit_code, 0) << log.str();
  EXPECT_TRUE(fs::exists(dir / "coverage.csv"));
}

int run_binary(const std::string& args) {
  const std::string cmd = std::string(GFMLAB_BIN) + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

TEST(Binary, ExitCodes) {
  const fs::path dir = fresh_dir("binary");
  const std::string out = "--out " + dir.string();
  EXPECT_EQ(run_binary(out + " --set data.domains=3 --set data.nodes_per_class=8 gen-data"), 0);
  EXPECT_TRUE(fs::exists(dir / kManifestName));
  EXPECT_EQ(run_binary(out + " --set attack.alpah=1 gen-data"), 1);
  EXPECT_EQ(run_binary(out + " --set attack.alpha=-1 gen-data"), 1);
  EXPECT_EQ(run_binary(out + " attack"), 1);
  EXPECT_EQ(run_binary(out + " no-such-stage"), 1);
  EXPECT_EQ(run_binary(out + " report"), 1);
  EXPECT_EQ(run_binary(out + " --set pretrain.lr=1e300 --set pretrain.max_epochs=3 pretrain"), 2);
}

}  // namespace
}  // namespace gfmlab
