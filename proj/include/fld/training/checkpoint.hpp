#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "fld/training/trained_model.hpp"

namespace fld::training {

/// Checkpoint container, little-endian throughout:
///
///   "FLDCKPT\0"            8-byte magic
///   u32 version            currently 2
///   u64 header length n
///   n bytes                JSON header: kind, settings, seed, iterations,
///                          and the ordered list of {name, shape} arrays
///   float64 payloads       one per listed array, in header order
///   u32 crc32              over every preceding byte
///
/// Loading rejects other versions, truncated files, checksum mismatches,
/// arrays the model does not have and arrays the file is missing.
inline constexpr std::uint32_t kCheckpointVersion = 2;

void save_checkpoint(const std::filesystem::path& path, TrainedModel& model);
TrainedModel load_checkpoint(const std::filesystem::path& path);

/// In-memory forms of the same container.
std::vector<char> serialize_checkpoint(TrainedModel& model);
TrainedModel deserialize_checkpoint(const std::vector<char>& bytes, const std::string& source = "<memory>");

/// Header of a checkpoint without loading its payload.
nlohmann::json read_checkpoint_header(const std::filesystem::path& path);

}  // namespace fld::training
