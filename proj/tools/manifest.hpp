#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"

namespace fld::cli {

struct FileHash {
  std::string path;
  std::string crc32;  // 8 hex digits, empty for "-"
  std::uintmax_t bytes = 0;
};

/// zlib CRC32 of a file's bytes as 8 lower-case hex digits.
std::string file_crc32(const std::filesystem::path& path);
FileHash hash_file(const std::filesystem::path& path);

/// Everything needed to re-run a command: its argv, the effective config,
/// and hashes of what it read and wrote.
struct RunManifest {
  std::string command;
  std::vector<std::string> argv;
  nlohmann::json config = nlohmann::json::object();
  std::uint64_t seed = 0;
  std::vector<FileHash> inputs;
  std::vector<FileHash> outputs;
  std::string started_utc;
  double wall_clock_seconds = 0.0;
  std::string version;

  void add_input(const std::filesystem::path& p) { inputs.push_back(hash_file(p)); }
  void add_output(const std::filesystem::path& p) { outputs.push_back(hash_file(p)); }

  nlohmann::json to_json() const;
  static RunManifest from_json(const nlohmann::json& j);
};

/// Stamps start time and version; finish() fills the wall clock.
class ManifestClock {
 public:
  explicit ManifestClock(RunManifest& m);
  void finish();

 private:
  RunManifest& m_;
  std::chrono::steady_clock::time_point t0_;
};

void write_manifest(const std::filesystem::path& path, const RunManifest& m);
RunManifest read_manifest(const std::filesystem::path& path);

}  // namespace fld::cli
