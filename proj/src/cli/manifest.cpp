#include "gfmlab/cli/manifest.hpp"

#include <openssl/evp.h>

#include <array>
#include <fstream>
#include <iterator>
#include <memory>
#include <sstream>

#include "gfmlab/errors.hpp"
#include "json.hpp"

namespace gfmlab {

namespace fs = std::filesystem;

std::string sha256_hex(const std::string& bytes) {
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), &EVP_MD_CTX_free);
  std::array<unsigned char, EVP_MAX_MD_SIZE> md{};
  unsigned int len = 0;
  if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1 ||
      EVP_DigestUpdate(ctx.get(), bytes.data(), bytes.size()) != 1 ||
      EVP_DigestFinal_ex(ctx.get(), md.data(), &len) != 1) {
    throw std::runtime_error("sha256 failed");
  }
  static constexpr char hex[] = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out += hex[md[i] >> 4];
    out += hex[md[i] & 0xF];
  }
  return out;
}

std::string sha256_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw MissingArtifactError("cannot read " + path.string());
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return sha256_hex(bytes);
}

Manifest load_manifest(const fs::path& run_dir) {
  Manifest m;
  const fs::path p = run_dir / kManifestName;
  if (!fs::exists(p)) return m;
  std::ifstream in(p);
  try {
    const auto j = nlohmann::json::parse(in);
    m.seed = j.at("seed").get<std::uint64_t>();
    m.config_digest = j.at("config_digest").get<std::string>();
    for (const auto& [name, entry] : j.at("artifacts").items()) {
      m.artifacts[name] = entry.at("sha256").get<std::string>();
      m.produced_by[name] = entry.at("stage").get<std::string>();
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(p.string() + ": malformed manifest: " + e.what());
  }
  return m;
}

void save_manifest(const fs::path& run_dir, const Manifest& m) {
  nlohmann::ordered_json j;
  j["seed"] = m.seed;
  j["config_digest"] = m.config_digest;
  j["artifacts"] = nlohmann::ordered_json::object();
  for (const auto& [name, sha] : m.artifacts) {
    j["artifacts"][name] = {{"sha256", sha}, {"stage", m.produced_by.at(name)}};
  }
  std::ofstream out(run_dir / kManifestName);
  if (!out) throw FormatError("cannot write manifest under " + run_dir.string());
  out << j.dump(2) << '\n';
}

void record_artifact(Manifest& m, const fs::path& run_dir, const std::string& relative, const std::string& stage) {
  m.artifacts[relative] = sha256_file(run_dir / relative);
  m.produced_by[relative] = stage;
}

fs::path require_artifact(const Manifest& m, const fs::path& run_dir, const std::string& relative,
                          const std::string& stage) {
  const fs::path p = run_dir / relative;
  const auto it = m.artifacts.find(relative);
  if (it == m.artifacts.end() || !fs::exists(p)) {
    throw MissingArtifactError("missing " + relative + " in " + run_dir.string() + ": run the `" + stage +
                               "` stage first");
  }
  if (sha256_file(p) != it->second) {
    throw FormatError(p.string() + " does not match the manifest; rerun the `" + stage + "` stage");
  }
  return p;
}

}  // namespace gfmlab
