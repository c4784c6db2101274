#include "manifest.hpp"

#include <zlib.h>

#include <cstdio>
#include <ctime>
#include <fstream>

#include "fld/common/error.hpp"

#ifndef FLD_VERSION
#define FLD_VERSION "unknown"
#endif

namespace fld::cli {

std::string file_crc32(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot read " + path.string());
  uLong crc = crc32(0L, Z_NULL, 0);
  char buf[1 << 16];
  while (in) {
    in.read(buf, sizeof buf);
    const auto got = in.gcount();
    if (got > 0) crc = crc32(crc, reinterpret_cast<const Bytef*>(buf), static_cast<uInt>(got));
  }
  char hex[9];
  std::snprintf(hex, sizeof hex, "%08lx", static_cast<unsigned long>(crc));
  return hex;
}

FileHash hash_file(const std::filesystem::path& path) {
  if (path == "-") return {"-", "", 0};
  return {path.string(), file_crc32(path), std::filesystem::file_size(path)};
}

namespace {

nlohmann::json hashes_to_json(const std::vector<FileHash>& v) {
  auto a = nlohmann::json::array();
  for (const auto& h : v) a.push_back({{"path", h.path}, {"crc32", h.crc32}, {"bytes", h.bytes}});
  return a;
}

std::vector<FileHash> hashes_from_json(const nlohmann::json& a) {
  std::vector<FileHash> v;
  for (const auto& h : a) v.push_back({h.at("path"), h.at("crc32"), h.at("bytes")});
  return v;
}

}  // namespace

nlohmann::json RunManifest::to_json() const {
  return {{"command", command},
          {"argv", argv},
          {"config", config},
          {"seed", seed},
          {"inputs", hashes_to_json(inputs)},
          {"outputs", hashes_to_json(outputs)},
          {"started_utc", started_utc},
          {"wall_clock_seconds", wall_clock_seconds},
          {"version", version}};
}

RunManifest RunManifest::from_json(const nlohmann::json& j) {
  try {
    RunManifest m;
    m.command = j.at("command");
    m.argv = j.at("argv").get<std::vector<std::string>>();
    m.config = j.value("config", nlohmann::json::object());
    m.seed = j.value("seed", std::uint64_t{0});
    m.inputs = hashes_from_json(j.value("inputs", nlohmann::json::array()));
    m.outputs = hashes_from_json(j.value("outputs", nlohmann::json::array()));
    m.started_utc = j.value("started_utc", std::string{});
    m.wall_clock_seconds = j.value("wall_clock_seconds", 0.0);
    m.version = j.value("version", std::string{});
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("run manifest: ") + e.what());
  }
}

ManifestClock::ManifestClock(RunManifest& m) : m_(m), t0_(std::chrono::steady_clock::now()) {
  const std::time_t now = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  m_.started_utc = buf;
  m_.version = FLD_VERSION;
}

void ManifestClock::finish() {
  m_.wall_clock_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0_).count();
}

void write_manifest(const std::filesystem::path& path, const RunManifest& m) {
  std::ofstream out(path);
  if (!out) throw FormatError("cannot write " + path.string());
  out << m.to_json().dump(2) << '\n';
}

RunManifest read_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot read " + path.string());
  try {
    return RunManifest::from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

}  // namespace fld::cli
