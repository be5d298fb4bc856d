#include <filesystem>
#include <fstream>

#include <gtest/gtest.h>

#include "gfmlab/cli/config.hpp"
#include "gfmlab/cli/manifest.hpp"
#include "gfmlab/errors.hpp"

namespace gfmlab {
namespace {

namespace fs = std::filesystem;

fs::path fresh_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("gfmlab_cli_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

void write_file(const fs::path& p, const std::string& s) {
  std::ofstream out(p, std::ios::binary);
  out << s;
}

TEST(Config, DefaultsValidate) { EXPECT_NO_THROW(validate(RunConfig{})); }

TEST(Config, UnknownKeyIsFatalWithLocation) {
  RunConfig cfg;
  try {
    apply_config_text(cfg, "seed = 3\n\nattack.alpah = 0.2\n", "my.conf");
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("my.conf:3"), std::string::npos) << msg;
    EXPECT_NE(msg.find("attack.alpah"), std::string::npos) << msg;
  }
}

TEST(Config, BadValuesRejected) {
  RunConfig cfg;
  EXPECT_THROW(set_config_value(cfg, "attack.alpha", "lots"), ConfigError);
  EXPECT_THROW(set_config_value(cfg, "attack.epochs", "2.5"), ConfigError);
  EXPECT_THROW(set_config_value(cfg, "attack.readout", "mean"), ConfigError);
  EXPECT_THROW(set_config_value(cfg, "eval.scenario", "3"), ConfigError);
  EXPECT_THROW(apply_config_text(cfg, "seed 3\n", "x"), ConfigError);
  EXPECT_THROW(apply_override(cfg, "seed"), ConfigError);
  RunConfig neg;
  set_config_value(neg, "attack.alpha", "-1");
  EXPECT_THROW(validate(neg), ConfigError);
}

TEST(Config, CommentsAndWhitespace) {
  RunConfig cfg;
  apply_config_text(cfg, "# header\n  seed=9   # trailing\nattack.beta =0.5\n", "x");
  EXPECT_EQ(cfg.seed, 9u);
  EXPECT_EQ(cfg.attack.beta, 0.5);
}

TEST(Config, DumpParsesBackToSameConfig) {
  RunConfig cfg;
  set_config_value(cfg, "seed", "42");
  set_config_value(cfg, "attack.alpha", "0.0316");
  set_config_value(cfg, "attack.static_trigger", "true");
  set_config_value(cfg, "attack.readout", "pooled");
  set_config_value(cfg, "eval.scenario", "controlled");
  set_config_value(cfg, "grid.alphas", "0.1,1");
  set_config_value(cfg, "fps.lambdas", "0.5, 1, 2");
  set_config_value(cfg, "pretrain.lr", "0.1");
  const std::string dumped = dump_config(cfg);
  RunConfig back;
  apply_config_text(back, dumped, "dump");
  EXPECT_EQ(dump_config(back), dumped);
  EXPECT_EQ(config_digest(back), config_digest(cfg));
  EXPECT_EQ(back.grid_alphas, (std::vector<double>{0.1, 1.0}));
  EXPECT_TRUE(back.attack.static_trigger);
  for (const auto& key : config_keys()) EXPECT_EQ(get_config_value(back, key), get_config_value(cfg, key)) << key;
}

TEST(Config, EveryKeyRoundTripsThroughGetAndSet) {
  const RunConfig base;
  for (const auto& key : config_keys()) {
    RunConfig cfg;
    set_config_value(cfg, key, get_config_value(base, key));
    EXPECT_EQ(dump_config(cfg), dump_config(base)) << key;
  }
}

TEST(Config, OverrideAndDigest) {
  RunConfig a, b;
  EXPECT_EQ(config_digest(a), config_digest(b));
  EXPECT_EQ(config_digest(a).size(), 64u);
  apply_override(b, "attack.beta=0.316");
  EXPECT_EQ(b.attack.beta, 0.316);
  EXPECT_NE(config_digest(a), config_digest(b));
}

TEST(Config, EgoSettingIsShared) {
  RunConfig cfg;
  set_config_value(cfg, "ego.max", "12");
  set_config_value(cfg, "ego.min", "4");
  EXPECT_EQ(cfg.attack.ego.max_size, 12u);
  EXPECT_EQ(cfg.attack.ego.min_size, 4u);
}

TEST(Config, LoadConfigFileAndMissingFile) {
  const fs::path dir = fresh_dir("load");
  write_file(dir / "a.conf", "seed = 5\nprototypes.k = 6\n");
  const RunConfig cfg = load_config(dir / "a.conf");
  EXPECT_EQ(cfg.seed, 5u);
  EXPECT_EQ(cfg.prototype_k, 6u);
  EXPECT_THROW(load_config(dir / "missing.conf"), ConfigError);
}

TEST(Sha256, KnownVectors) {
  EXPECT_EQ(sha256_hex(""), "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
  EXPECT_EQ(sha256_hex("abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  const fs::path dir = fresh_dir("sha");
  write_file(dir / "f", "abc");
  EXPECT_EQ(sha256_file(dir / "f"), sha256_hex("abc"));
}

TEST(Manifest, SaveLoadRoundTrip) {
  const fs::path dir = fresh_dir("manifest");
  EXPECT_TRUE(load_manifest(dir).artifacts.empty());
  write_file(dir / "encoder.ckpt", "weights");
  Manifest m;
  m.seed = 3;
  m.config_digest = "d";
  record_artifact(m, dir, "encoder.ckpt", "pretrain");
  save_manifest(dir, m);
  const Manifest back = load_manifest(dir);
  EXPECT_EQ(back.seed, 3u);
  EXPECT_EQ(back.artifacts, m.artifacts);
  EXPECT_EQ(back.produced_by.at("encoder.ckpt"), "pretrain");
  EXPECT_EQ(require_artifact(back, dir, "encoder.ckpt", "pretrain"), dir / "encoder.ckpt");
}

TEST(Manifest, MissingArtifactNamesTheStage) {
  const fs::path dir = fresh_dir("missing");
  const Manifest m;
  try {
    require_artifact(m, dir, "prototypes.csv", "prototypes");
    FAIL() << "expected MissingArtifactError";
  } catch (const MissingArtifactError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("prototypes.csv"), std::string::npos) << msg;
    EXPECT_NE(msg.find("prototypes"), std::string::npos) << msg;
  }
}

TEST(Manifest, TamperedArtifactDetected) {
  const fs::path dir = fresh_dir("tamper");
  write_file(dir / "a.csv", "1,2\n");
  Manifest m;
  record_artifact(m, dir, "a.csv", "eval");
  write_file(dir / "a.csv", "1,3\n");
  EXPECT_THROW(require_artifact(m, dir, "a.csv", "eval"), FormatError);
  fs::remove(dir / "a.csv");
  EXPECT_THROW(require_artifact(m, dir, "a.csv", "eval"), MissingArtifactError);
}

TEST(Manifest, MalformedManifestIsFormatError) {
  const fs::path dir = fresh_dir("badmanifest");
  write_file(dir / kManifestName, "{ not json");
  EXPECT_THROW(load_manifest(dir), FormatError);
}

}  // namespace
}  // namespace gfmlab
