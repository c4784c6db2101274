#include "fld/training/checkpoint.hpp"

#include <zlib.h>

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <map>

#include "fld/common/error.hpp"

namespace fld::training {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

namespace {

constexpr char kMagic[8] = {'F', 'L', 'D', 'C', 'K', 'P', 'T', '\0'};

template <typename T>
void put(std::vector<char>& out, const T& v) {
  const char* p = reinterpret_cast<const char*>(&v);
  out.insert(out.end(), p, p + sizeof(T));
}

template <typename T>
T get(const std::vector<char>& in, std::size_t& pos, const std::string& source) {
  if (pos + sizeof(T) > in.size()) throw FormatError(source + ": truncated checkpoint");
  T v;
  std::memcpy(&v, in.data() + pos, sizeof(T));
  pos += sizeof(T);
  return v;
}

std::uint32_t crc_of(const char* data, std::size_t n) {
  uLong crc = crc32(0L, Z_NULL, 0);
  // zlib takes uInt lengths; feed large buffers in chunks.
  while (n > 0) {
    const uInt chunk = static_cast<uInt>(std::min<std::size_t>(n, 1u << 30));
    crc = crc32(crc, reinterpret_cast<const Bytef*>(data), chunk);
    data += chunk;
    n -= chunk;
  }
  return static_cast<std::uint32_t>(crc);
}

struct Parsed {
  nlohmann::json header;
  std::size_t payload_offset = 0;
};

Parsed parse_envelope(const std::vector<char>& bytes, const std::string& source) {
  if (bytes.size() < sizeof(kMagic) || std::memcmp(bytes.data(), kMagic, sizeof(kMagic)) != 0) {
    throw FormatError(source + ": not a checkpoint (bad magic)");
  }
  std::size_t pos = sizeof(kMagic);
  const auto version = get<std::uint32_t>(bytes, pos, source);
  if (version != kCheckpointVersion) {
    throw FormatError(source + ": unsupported checkpoint version " + std::to_string(version) + " (this reader handles version " +
                      std::to_string(kCheckpointVersion) + ")");
  }
  if (bytes.size() < pos + sizeof(std::uint64_t) + sizeof(std::uint32_t)) throw FormatError(source + ": truncated checkpoint");
  std::size_t tail = bytes.size() - sizeof(std::uint32_t);
  std::uint32_t stored = 0;
  std::memcpy(&stored, bytes.data() + tail, sizeof(stored));
  if (crc_of(bytes.data(), tail) != stored) throw FormatError(source + ": checksum mismatch (file corrupt or truncated)");
  const auto header_len = get<std::uint64_t>(bytes, pos, source);
  if (pos + header_len > tail) throw FormatError(source + ": truncated checkpoint header");
  Parsed p;
  try {
    p.header = nlohmann::json::parse(bytes.begin() + static_cast<long>(pos), bytes.begin() + static_cast<long>(pos + header_len));
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(source + ": bad checkpoint header: " + e.what());
  }
  p.payload_offset = pos + header_len;
  return p;
}

}  // namespace

std::vector<char> serialize_checkpoint(TrainedModel& model) {
  auto arrays = model.named_arrays();
  nlohmann::json header{{"kind", model::to_string(model.kind())},
                        {"settings", model.settings().to_json()},
                        {"seed", model.seed},
                        {"iterations", model.iterations},
                        {"arrays", nlohmann::json::array()}};
  for (const auto& [name, arr] : arrays) header["arrays"].push_back({{"name", name}, {"shape", arr->shape()}});
  const std::string text = header.dump();

  std::vector<char> out(kMagic, kMagic + sizeof(kMagic));
  put(out, kCheckpointVersion);
  put(out, static_cast<std::uint64_t>(text.size()));
  out.insert(out.end(), text.begin(), text.end());
  for (const auto& [name, arr] : arrays) {
    const char* p = reinterpret_cast<const char*>(arr->ptr());
    out.insert(out.end(), p, p + arr->size() * sizeof(double));
  }
  put(out, crc_of(out.data(), out.size()));
  return out;
}

TrainedModel deserialize_checkpoint(const std::vector<char>& bytes, const std::string& source) {
  const Parsed parsed = parse_envelope(bytes, source);
  const nlohmann::json& h = parsed.header;
  TrainedModel model;
  try {
    model = TrainedModel(model::parse_model_kind(h.at("kind").get<std::string>()),
                         ModelSettings::from_json(h.at("settings")), h.at("seed").get<std::uint64_t>());
    model.iterations = h.at("iterations").get<std::size_t>();
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(source + ": bad checkpoint header: " + e.what());
  }

  std::map<std::string, DenseArray*> expected;
  for (auto& [name, arr] : model.named_arrays()) expected.emplace(name, arr);
  std::size_t pos = parsed.payload_offset;
  const std::size_t tail = bytes.size() - sizeof(std::uint32_t);
  std::map<std::string, bool> seen;
  for (const auto& entry : h.at("arrays")) {
    const std::string name = entry.at("name").get<std::string>();
    const numerics::Shape shape = entry.at("shape").get<numerics::Shape>();
    auto it = expected.find(name);
    if (it == expected.end()) throw FormatError(source + ": unknown array '" + name + "'");
    if (seen[name]) throw FormatError(source + ": duplicate array '" + name + "'");
    seen[name] = true;
    DenseArray& dst = *it->second;
    if (dst.shape() != shape) {
      throw FormatError(source + ": array '" + name + "' has shape " + numerics::shape_string(shape) + ", model expects " +
                        numerics::shape_string(dst.shape()));
    }
    const std::size_t nbytes = dst.size() * sizeof(double);
    if (pos + nbytes > tail) throw FormatError(source + ": truncated payload for '" + name + "'");
    std::memcpy(dst.ptr(), bytes.data() + pos, nbytes);
    pos += nbytes;
  }
  if (pos != tail) throw FormatError(source + ": trailing bytes after the last array");
  for (const auto& [name, arr] : expected) {
    if (!seen[name]) throw FormatError(source + ": missing array '" + name + "'");
  }
  model.commit_arrays();
  return model;
}

void save_checkpoint(const std::filesystem::path& path, TrainedModel& model) {
  const std::vector<char> bytes = serialize_checkpoint(model);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot write checkpoint " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw FormatError("failed writing checkpoint " + path.string());
}

namespace {

std::vector<char> read_all(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open checkpoint " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace

TrainedModel load_checkpoint(const std::filesystem::path& path) { return deserialize_checkpoint(read_all(path), path.string()); }

nlohmann::json read_checkpoint_header(const std::filesystem::path& path) {
  return parse_envelope(read_all(path), path.string()).header;
}

}  // namespace fld::training
