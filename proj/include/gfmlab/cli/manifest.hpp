#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>

namespace gfmlab {

std::string sha256_hex(const std::string& bytes);
std::string sha256_file(const std::filesystem::path& path);

// Per run directory: seed, config digest and the SHA-256 of every artifact,
// keyed by path relative to the run directory. No timestamps.
struct Manifest {
  std::uint64_t seed = 0;
  std::string config_digest;
  std::map<std::string, std::string> artifacts;     // relative path -> sha256
  std::map<std::string, std::string> produced_by;   // relative path -> stage
};

inline constexpr const char* kManifestName = "manifest.json";

Manifest load_manifest(const std::filesystem::path& run_dir);  // empty when absent
void save_manifest(const std::filesystem::path& run_dir, const Manifest& m);

// Hashes `relative` under run_dir and records it as produced by `stage`.
void record_artifact(Manifest& m, const std::filesystem::path& run_dir, const std::string& relative,
                     const std::string& stage);

// Throws MissingArtifactError naming `stage` when the artifact is absent or
// not listed, and FormatError when its bytes no longer match the manifest.
std::filesystem::path require_artifact(const Manifest& m, const std::filesystem::path& run_dir,
                                       const std::string& relative, const std::string& stage);

}  // namespace gfmlab
