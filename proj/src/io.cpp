#include "adaspline/io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>

namespace adaspline {

namespace {

std::string where(const std::filesystem::path& path, std::size_t line) {
  return path.string() + ":" + std::to_string(line) + ": ";
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(trim(cell));
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

double parse_number(const std::string& cell, const std::filesystem::path& path, std::size_t line) {
  double value = 0.0;
  const char* first = cell.data();
  const char* last = cell.data() + cell.size();
  if (first != last && *first == '+') ++first;
  const auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc() || ptr != last || cell.empty()) {
    throw IoError(where(path, line) + "cannot parse '" + cell + "' as a number");
  }
  if (!std::isfinite(value)) throw IoError(where(path, line) + "non-finite value '" + cell + "'");
  return value;
}

std::vector<double> as_doubles(const nlohmann::json& j, const char* key) {
  if (!j.contains(key) || !j.at(key).is_array()) {
    throw std::invalid_argument(std::string("json: '") + key + "' must be an array of numbers");
  }
  std::vector<double> out;
  for (const auto& v : j.at(key)) {
    if (!v.is_number()) throw std::invalid_argument(std::string("json: '") + key + "' must contain only numbers");
    out.push_back(v.get<double>());
  }
  return out;
}

nlohmann::json vector_json(const Eigen::VectorXd& v) {
  return nlohmann::json(std::vector<double>(v.data(), v.data() + v.size()));
}

}  // namespace

DesignFile read_design(const std::filesystem::path& path, bool rescale) {
  std::ifstream in(path);
  if (!in) throw IoError(path.string() + ": cannot open for reading");
  std::string line;
  std::size_t lineno = 0;
  std::optional<std::vector<std::string>> header;
  int ti = -1, yi = -1, wi = -1;
  struct Row {
    double t, y, w;
    std::size_t line;
  };
  std::vector<Row> rows;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string s = trim(line);
    if (s.empty() || s.front() == '#') continue;
    const auto cells = split_csv(s);
    if (!header) {
      header = cells;
      for (std::size_t k = 0; k < cells.size(); ++k) {
        if (cells[k] == "t") ti = static_cast<int>(k);
        if (cells[k] == "y") yi = static_cast<int>(k);
        if (cells[k] == "w") wi = static_cast<int>(k);
      }
      if (ti < 0 || yi < 0) throw IoError(where(path, lineno) + "header must name columns 't' and 'y'");
      continue;
    }
    if (cells.size() != header->size()) {
      throw IoError(where(path, lineno) + "expected " + std::to_string(header->size()) + " fields, found " +
                    std::to_string(cells.size()));
    }
    Row r{parse_number(cells[ti], path, lineno), parse_number(cells[yi], path, lineno),
          wi >= 0 ? parse_number(cells[wi], path, lineno) : 1.0, lineno};
    if (!(r.w > 0.0)) throw IoError(where(path, lineno) + "weight must be positive");
    rows.push_back(r);
  }
  if (!header) throw IoError(path.string() + ": empty file");
  if (rows.empty()) throw IoError(path.string() + ": no data rows");

  DesignFile out;
  out.rows = rows.size();
  const auto [lo, hi] = std::minmax_element(rows.begin(), rows.end(), [](const Row& a, const Row& b) { return a.t < b.t; });
  out.t_min = lo->t;
  out.t_max = hi->t;
  if (out.t_min < 0.0 || out.t_max > 1.0) {
    if (!rescale) {
      throw IoError(path.string() + ": abscissae span [" + format_double(out.t_min) + ", " + format_double(out.t_max) +
                    "], outside [0,1]; pass --rescale to map them min-max");
    }
    if (!(out.t_max > out.t_min)) throw IoError(path.string() + ": cannot rescale a constant abscissa");
    for (auto& r : rows) r.t = (r.t - out.t_min) / (out.t_max - out.t_min);
    out.rescaled = true;
  }
  std::stable_sort(rows.begin(), rows.end(), [](const Row& a, const Row& b) { return a.t < b.t; });
  for (std::size_t i = 1; i < rows.size(); ++i) {
    if (rows[i].t == rows[i - 1].t) {
      throw IoError(path.string() + ": duplicate abscissa t = " + format_double(rows[i].t) + " on lines " +
                    std::to_string(std::min(rows[i - 1].line, rows[i].line)) + " and " +
                    std::to_string(std::max(rows[i - 1].line, rows[i].line)) +
                    "; average or pre-bin duplicates before fitting");
    }
  }
  std::vector<double> t, y, w;
  for (const auto& r : rows) {
    t.push_back(r.t);
    y.push_back(r.y);
    w.push_back(r.w);
  }
  out.design = Design::make(std::move(t), std::move(y), std::move(w));
  return out;
}

void write_design(const std::filesystem::path& path, const Design& design, const nlohmann::json& config) {
  CsvWriter csv(path, config, {"t", "y", "w"});
  for (std::size_t i = 0; i < design.size(); ++i) csv.row(std::vector<double>{design.t[i], design.y[i], design.w[i]});
  csv.close();
}

PiecewisePenalty penalty_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw std::invalid_argument("penalty json: expected an object");
  for (const auto& [key, value] : j.items()) {
    if (key != "knots" && key != "values" && key != "gamma") {
      throw std::invalid_argument("penalty json: unknown key '" + key + "' (allowed: knots, values, gamma)");
    }
  }
  double gamma = 1.0;
  if (j.contains("gamma")) {
    if (!j.at("gamma").is_number()) throw std::invalid_argument("penalty json: 'gamma' must be a number");
    gamma = j.at("gamma").get<double>();
  }
  return PiecewisePenalty(as_doubles(j, "knots"), as_doubles(j, "values"), gamma);
}

nlohmann::json to_json(const PiecewisePenalty& penalty) {
  return {{"knots", penalty.knots()}, {"values", penalty.values()}, {"gamma", penalty.gamma()}};
}

PiecewisePenalty read_penalty(const std::filesystem::path& path) {
  try {
    return penalty_from_json(read_json(path));
  } catch (const std::invalid_argument& e) {
    throw IoError(path.string() + ": " + e.what());
  }
}

nlohmann::json to_json(const OptimalityReport& report) {
  return {{"moments", report.moments},
          {"scale", report.scale},
          {"tolerance", report.tolerance},
          {"max_abs", report.max_abs},
          {"passed", report.passed}};
}

nlohmann::json to_json(const SplineFit& fit) {
  return {{"m", fit.m},
          {"n", fit.design.size()},
          {"lambda", fit.lambda},
          {"jitter", fit.jitter},
          {"hat_trace", fit.hat_trace},
          {"objective", objective(fit)},
          {"penalty", to_json(fit.penalty)},
          {"t", fit.design.t},
          {"y", fit.design.y},
          {"w", fit.design.w},
          {"c", vector_json(fit.c)},
          {"d", vector_json(fit.d)},
          {"optimality", to_json(check_optimality(fit))}};
}

nlohmann::json to_json(const std::vector<GaicEntry>& table) {
  auto sorted = table;
  std::stable_sort(sorted.begin(), sorted.end(), [](const GaicEntry& a, const GaicEntry& b) {
    return a.S != b.S ? a.S < b.S : a.gamma < b.gamma;
  });
  nlohmann::json out = nlohmann::json::array();
  for (const auto& e : sorted) {
    out.push_back({{"S", e.S}, {"gamma", e.gamma}, {"score", e.score}, {"lambda", e.lambda}, {"knots_found", e.knots_found}});
  }
  return out;
}

StoredFit stored_fit_from_json(const nlohmann::json& j) {
  StoredFit s;
  s.t = as_doubles(j, "t");
  s.y = as_doubles(j, "y");
  s.w = as_doubles(j, "w");
  s.c = as_doubles(j, "c");
  s.d = as_doubles(j, "d");
  s.lambda = j.at("lambda").get<double>();
  s.m = j.at("m").get<int>();
  s.penalty = penalty_from_json(j.at("penalty"));
  return s;
}

SplineFit rebuild_fit(const StoredFit& s) {
  SplineFit f;
  f.design = Design::make(s.t, s.y, s.w);
  f.m = s.m;
  f.penalty = s.penalty;
  f.lambda = s.lambda;
  f.gram = std::make_shared<const GramContext>(gram_matrix(f.design.t, f.penalty, f.m));
  f.c = Eigen::Map<const Eigen::VectorXd>(s.c.data(), static_cast<Eigen::Index>(s.c.size()));
  f.d = Eigen::Map<const Eigen::VectorXd>(s.d.data(), static_cast<Eigen::Index>(s.d.size()));
  f.jitter = gram_jitter(*f.gram);
  f.fitted = f.gram->gram * f.c + f.gram->null_basis * f.d;
  return f;
}

std::string format_double(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

CsvWriter::CsvWriter(const std::filesystem::path& path, const nlohmann::json& config,
                     const std::vector<std::string>& header)
    : path_(path), columns_(header.size()) {
  buffer_ += std::string("# adaspline ") + kVersion + "\n";
  buffer_ += "# config: " + config.dump() + "\n";
  for (std::size_t k = 0; k < header.size(); ++k) buffer_ += (k ? "," : "") + header[k];
  buffer_ += "\n";
}

void CsvWriter::comment(const std::string& text) { buffer_ += "# " + text + "\n"; }

void CsvWriter::row(const std::vector<double>& values) {
  std::vector<std::string> cells;
  cells.reserve(values.size());
  for (double v : values) cells.push_back(format_double(v));
  row(cells);
}

void CsvWriter::row(const std::vector<std::string>& cells) {
  if (cells.size() != columns_) throw std::logic_error("CsvWriter: row width does not match header");
  for (std::size_t k = 0; k < cells.size(); ++k) buffer_ += (k ? "," : "") + cells[k];
  buffer_ += "\n";
}

void CsvWriter::close() {
  std::ofstream out(path_, std::ios::binary);
  if (!out) throw IoError(path_.string() + ": cannot open for writing");
  out << buffer_;
  if (!out) throw IoError(path_.string() + ": write failed");
}

void write_json(const std::filesystem::path& path, const nlohmann::json& j) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError(path.string() + ": cannot open for writing");
  out << j.dump(2) << "\n";
  if (!out) throw IoError(path.string() + ": write failed");
}

nlohmann::json read_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError(path.string() + ": cannot open for reading");
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw IoError(path.string() + ": " + e.what());
  }
}

nlohmann::json with_metadata(nlohmann::json result, const nlohmann::json& config) {
  result["version"] = kVersion;
  result["config"] = config;
  return result;
}

}  // namespace adaspline
