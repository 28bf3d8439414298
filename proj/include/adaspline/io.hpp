#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "adaspline/adapt.hpp"
#include "adaspline/penalty.hpp"
#include "adaspline/solver.hpp"
#include "json.hpp"

namespace adaspline {

inline constexpr const char* kVersion = "0.1.0";

// File-level failure; the message always names the path (and line, when known).
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct DesignFile {
  Design design;
  std::size_t rows = 0;
  bool rescaled = false;
  double t_min = 0.0;  // original range, recorded when rescaled
  double t_max = 1.0;
};

// CSV with a header naming columns t, y and optionally w (any order, extra
// columns ignored). Lines starting with '#' and blank lines are skipped.
// Rows are sorted by t; duplicate t values are rejected with their line numbers.
// Abscissae outside [0,1] are an error unless `rescale` maps them min-max onto [0,1].
DesignFile read_design(const std::filesystem::path& path, bool rescale = false);

void write_design(const std::filesystem::path& path, const Design& design, const nlohmann::json& config = {});

// {"knots": [...], "values": [...], "gamma": g}; gamma optional, other keys rejected.
PiecewisePenalty penalty_from_json(const nlohmann::json& j);
nlohmann::json to_json(const PiecewisePenalty& penalty);
PiecewisePenalty read_penalty(const std::filesystem::path& path);

nlohmann::json to_json(const OptimalityReport& report);
nlohmann::json to_json(const SplineFit& fit);
nlohmann::json to_json(const std::vector<GaicEntry>& table);

// Coefficients and metadata of a saved fit (enough to rebuild predictions).
struct StoredFit {
  std::vector<double> t, y, w, c, d;
  double lambda = 0.0;
  int m = 2;
  PiecewisePenalty penalty;
};
StoredFit stored_fit_from_json(const nlohmann::json& j);
SplineFit rebuild_fit(const StoredFit& stored);

// 17 significant digits: enough to reproduce every double exactly.
std::string format_double(double x);

// Writes `#`-prefixed metadata lines (tool version, effective config), a header
// row and the data rows.
class CsvWriter {
 public:
  CsvWriter(const std::filesystem::path& path, const nlohmann::json& config, const std::vector<std::string>& header);
  void row(const std::vector<double>& values);
  void row(const std::vector<std::string>& cells);
  void comment(const std::string& text);
  void close();

 private:
  std::filesystem::path path_;
  std::string buffer_;
  std::size_t columns_;
};

void write_json(const std::filesystem::path& path, const nlohmann::json& j);
nlohmann::json read_json(const std::filesystem::path& path);

// Adds "version" and "config" to a result object.
nlohmann::json with_metadata(nlohmann::json result, const nlohmann::json& config);

}  // namespace adaspline
