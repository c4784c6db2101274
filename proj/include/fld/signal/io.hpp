#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "fld/signal/trajectory.hpp"

namespace fld::signal {

struct CsvOptions {
  std::size_t state_dim = 0;  // 0: take the column count of the first data row
  double dt = 0.0;            // <= 0: read "dt" from the sidecar <file>.json
  bool header = false;
  std::string label;
  std::size_t window = 0;     // when set, warn if the file has fewer rows
};

struct CsvLoadResult {
  Trajectory trajectory;
  std::vector<std::string> warnings;
};

/// One frame per row, comma separated, '.' decimal, LF or CRLF. Blank lines
/// are skipped. Ragged rows, non-numeric cells and non-finite values throw
/// FormatError naming the data row and file line.
CsvLoadResult load_csv(const std::filesystem::path& path, const CsvOptions& options);
CsvLoadResult parse_csv(std::istream& in, const CsvOptions& options, std::string_view source = "<stream>");

/// Parses one data line. `row` / `line` only feed the error message.
std::vector<double> parse_csv_row(std::string_view text, std::size_t expected_dim, std::size_t row, std::size_t line);

/// Column names: the humanoid preset for d = 27, s0..s{d-1} otherwise.
std::vector<std::string> column_names(std::size_t state_dim);

void write_csv(const std::filesystem::path& path, const Trajectory& t, bool header = true);
void write_csv(std::ostream& out, const Trajectory& t, bool header = true);

/// A set of trajectories sharing dt and d.
struct Corpus {
  std::vector<Trajectory> trajectories;
  double dt = 0.02;
  std::size_t state_dim = kHumanoidStateDim;
};

/// JSON manifest:
///   {"dt": 0.02, "state_dim": 27, "header": false,
///    "trajectories": [{"path": "walk.csv", "label": "walk"},
///                     {"synthetic": { ...SyntheticMotionSpec... }}]}
/// Relative paths resolve against the manifest's directory. `window` > 0
/// forwards the short-file warning.
Corpus load_corpus(const std::filesystem::path& manifest, std::size_t window = 0,
                   std::vector<std::string>* warnings = nullptr);

}  // namespace fld::signal
