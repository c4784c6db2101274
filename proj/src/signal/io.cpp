#include "fld/signal/io.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "fld/common/error.hpp"
#include "fld/signal/synthetic.hpp"
#include "json.hpp"

namespace fld::signal {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

std::string where(std::size_t row, std::size_t line) {
  return "row " + std::to_string(row) + " (line " + std::to_string(line) + ")";
}

}  // namespace

std::vector<double> parse_csv_row(std::string_view text, std::size_t expected_dim, std::size_t row, std::size_t line) {
  std::vector<double> values;
  text = trim(text);
  std::size_t col = 0;
  while (true) {
    const std::size_t comma = text.find(',');
    std::string_view cell = trim(text.substr(0, comma));
    if (!cell.empty() && cell.front() == '+') cell.remove_prefix(1);
    double v = 0.0;
    const auto [end, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
    if (cell.empty() || ec != std::errc() || end != cell.data() + cell.size()) {
      throw FormatError("non-numeric cell '" + std::string(cell) + "' at " + where(row, line) + ", column " +
                        std::to_string(col));
    }
    if (!std::isfinite(v)) {
      throw FormatError("non-finite value '" + std::string(cell) + "' at " + where(row, line) + ", column " +
                        std::to_string(col));
    }
    values.push_back(v);
    ++col;
    if (comma == std::string_view::npos) break;
    text.remove_prefix(comma + 1);
  }
  if (expected_dim != 0 && values.size() != expected_dim) {
    throw FormatError("ragged row: " + where(row, line) + " has " + std::to_string(values.size()) +
                      " columns, expected " + std::to_string(expected_dim));
  }
  return values;
}

CsvLoadResult parse_csv(std::istream& in, const CsvOptions& options, std::string_view source) {
  if (!(options.dt > 0.0)) throw ConfigError("parse_csv: dt must be positive");
  std::size_t d = options.state_dim;
  std::vector<double> flat;
  std::string text;
  std::size_t line = 0;
  std::size_t rows = 0;
  bool header_pending = options.header;
  while (std::getline(in, text)) {
    ++line;
    if (trim(text).empty()) continue;
    if (header_pending) {
      header_pending = false;
      continue;
    }
    std::vector<double> values = parse_csv_row(text, d, rows, line);
    if (d == 0) d = values.size();
    flat.insert(flat.end(), values.begin(), values.end());
    ++rows;
  }
  if (rows == 0) throw FormatError(std::string(source) + ": no data rows");
  CsvLoadResult result;
  result.trajectory = Trajectory(DenseArray({rows, d}, std::move(flat)), options.dt, options.label);
  if (options.window != 0 && rows < options.window) {
    result.warnings.push_back(std::string(source) + ": " + std::to_string(rows) + " rows is fewer than the window of " +
                              std::to_string(options.window) + "; trajectory cannot be windowed");
  }
  return result;
}

CsvLoadResult load_csv(const std::filesystem::path& path, const CsvOptions& options) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open " + path.string());
  CsvOptions opts = options;
  if (!(opts.dt > 0.0)) {
    std::filesystem::path sidecar = path;
    sidecar += ".json";
    std::ifstream meta(sidecar);
    if (!meta) throw ConfigError(path.string() + ": no dt given and no sidecar " + sidecar.string());
    try {
      const nlohmann::json j = nlohmann::json::parse(meta);
      opts.dt = j.at("dt").get<double>();
      if (opts.label.empty()) opts.label = j.value("label", std::string{});
    } catch (const nlohmann::json::exception& e) {
      throw FormatError(sidecar.string() + ": " + e.what());
    }
  }
  if (opts.label.empty()) opts.label = path.stem().string();
  return parse_csv(in, opts, path.string());
}

std::vector<std::string> column_names(std::size_t state_dim) {
  std::vector<std::string> names;
  if (state_dim == kHumanoidStateDim) {
    names = {"vx", "vy", "vz", "wx", "wy", "wz", "gx", "gy", "gz"};
    for (int i = 0; i < 10; ++i) names.push_back("leg" + std::to_string(i));
    for (int i = 0; i < 8; ++i) names.push_back("arm" + std::to_string(i));
    return names;
  }
  for (std::size_t j = 0; j < state_dim; ++j) names.push_back("s" + std::to_string(j));
  return names;
}

void write_csv(std::ostream& out, const Trajectory& t, bool header) {
  const std::size_t d = t.state_dim();
  if (header) {
    const auto names = column_names(d);
    for (std::size_t j = 0; j < d; ++j) out << (j ? "," : "") << names[j];
    out << '\n';
  }
  out << std::setprecision(17);
  for (std::size_t i = 0; i < t.length(); ++i) {
    const auto f = t.frame(i);
    for (std::size_t j = 0; j < d; ++j) out << (j ? "," : "") << f[j];
    out << '\n';
  }
}

void write_csv(const std::filesystem::path& path, const Trajectory& t, bool header) {
  std::ofstream out(path);
  if (!out) throw FormatError("cannot write " + path.string());
  write_csv(out, t, header);
}

Corpus load_corpus(const std::filesystem::path& manifest, std::size_t window, std::vector<std::string>* warnings) {
  std::ifstream in(manifest);
  if (!in) throw FormatError("cannot open corpus manifest " + manifest.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(manifest.string() + ": " + e.what());
  }
  Corpus corpus;
  try {
    corpus.dt = j.value("dt", 0.02);
    corpus.state_dim = j.value("state_dim", kHumanoidStateDim);
    const bool header = j.value("header", false);
    const auto base = manifest.parent_path();
    for (const auto& entry : j.at("trajectories")) {
      Trajectory t;
      if (entry.contains("synthetic")) {
        SyntheticMotionSpec spec = synthetic_spec_from_json(entry.at("synthetic"));
        t = generate_synthetic(spec);
        if (entry.contains("label")) t.label = entry.at("label").get<std::string>();
      } else {
        std::filesystem::path p = entry.at("path").get<std::string>();
        if (p.is_relative()) p = base / p;
        CsvOptions opts{corpus.state_dim, corpus.dt, header, entry.value("label", std::string{}), window};
        CsvLoadResult r = load_csv(p, opts);
        if (warnings) warnings->insert(warnings->end(), r.warnings.begin(), r.warnings.end());
        t = std::move(r.trajectory);
      }
      if (t.state_dim() != corpus.state_dim) {
        throw FormatError(manifest.string() + ": trajectory '" + t.label + "' has " + std::to_string(t.state_dim()) +
                          " dims, manifest says " + std::to_string(corpus.state_dim));
      }
      if (std::abs(t.dt - corpus.dt) > 1e-12) {
        throw FormatError(manifest.string() + ": trajectory '" + t.label + "' has dt " + std::to_string(t.dt) +
                          ", manifest says " + std::to_string(corpus.dt));
      }
      corpus.trajectories.push_back(std::move(t));
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(manifest.string() + ": " + e.what());
  }
  if (corpus.trajectories.empty()) throw FormatError(manifest.string() + ": no trajectories listed");
  return corpus;
}

}  // namespace fld::signal
