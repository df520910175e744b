#ifndef TUBELAB_REPORT_HPP
#define TUBELAB_REPORT_HPP

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <stdexcept>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include <json.hpp>

#include "tubelab/fit.hpp"
#include "tubelab/format.hpp"

namespace tubelab {

inline constexpr const char* artifact_version = "0.1.0";

struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

using Cell = std::variant<std::string, double, std::int64_t>;

struct NamedFit {
  std::string name;
  ScalingFit fit;
};

/// Plot-ready curve; emitted as a two-column data file.
struct Curve {
  std::string name;
  std::string x_label;
  std::string y_label;
  std::vector<double> x;
  std::vector<double> y;
};

struct RunReport {
  std::string experiment;
  std::uint64_t seed = 0;
  std::map<std::string, std::string> params;
  std::vector<std::string> columns;
  std::vector<std::vector<Cell>> rows;
  std::vector<NamedFit> fits;
  std::vector<std::pair<std::string, double>> certificates;
  std::vector<std::pair<std::string, bool>> verdicts;
  std::vector<Curve> curves;
  double wall_clock_s = 0.0;

  [[nodiscard]] bool pass() const {
    for (const auto& [name, ok] : verdicts) {
      if (!ok) return false;
    }
    return true;
  }

  void add_row(std::vector<Cell> row) {
    if (row.size() != columns.size()) throw std::logic_error("report row width does not match the columns");
    rows.push_back(std::move(row));
  }
};

inline std::string cell_text(const Cell& c) {
  if (const auto* s = std::get_if<std::string>(&c)) {
    if (s->find_first_of(",\"\n") == std::string::npos) return *s;
    std::string q = "\"";
    for (char ch : *s) q += ch == '"' ? std::string("\"\"") : std::string(1, ch);
    return q + "\"";
  }
  if (const auto* d = std::get_if<double>(&c)) return format_double(*d);
  return std::to_string(std::get<std::int64_t>(c));
}

/// CSV text: header, one line per row, trailing seed column, LF endings.
inline std::string to_csv(const RunReport& r) {
  std::string out;
  for (const auto& c : r.columns) out += c + ",";
  out += "seed\n";
  for (const auto& row : r.rows) {
    for (const auto& c : row) out += cell_text(c) + ",";
    out += std::to_string(r.seed) + "\n";
  }
  return out;
}

inline nlohmann::ordered_json fit_json(const NamedFit& f) {
  return {{"name", f.name},
          {"model", to_string(f.fit.model)},
          {"slope", f.fit.slope},
          {"intercept", f.fit.intercept},
          {"r2", f.fit.r_squared},
          {"max_residual", f.fit.max_residual},
          {"count", f.fit.count}};
}

inline nlohmann::ordered_json to_json(const RunReport& r) {
  using nlohmann::ordered_json;
  ordered_json j;
  j["artifact_version"] = artifact_version;
  j["experiment"] = r.experiment;
  j["seed"] = r.seed;
  j["params"] = ordered_json::object();
  for (const auto& [k, v] : r.params) j["params"][k] = v;
  j["columns"] = r.columns;
  j["samples"] = ordered_json::array();
  for (const auto& row : r.rows) {
    ordered_json s = ordered_json::object();
    for (std::size_t i = 0; i < row.size(); ++i) {
      std::visit([&](const auto& v) { s[r.columns[i]] = v; }, row[i]);
    }
    j["samples"].push_back(s);
  }
  j["fits"] = ordered_json::array();
  for (const auto& f : r.fits) j["fits"].push_back(fit_json(f));
  j["certificates"] = ordered_json::object();
  for (const auto& [k, v] : r.certificates) j["certificates"][k] = v;
  j["verdicts"] = ordered_json::object();
  for (const auto& [k, v] : r.verdicts) j["verdicts"][k] = v;
  j["verdict"] = r.pass();
  j["wall_clock_s"] = r.wall_clock_s;
  return j;
}

/// Two whitespace-separated columns, with a comment header naming the axes and seed.
inline std::string to_plot_data(const Curve& c, std::uint64_t seed) {
  std::string out = "# " + c.x_label + " " + c.y_label + " seed=" + std::to_string(seed) + "\n";
  for (std::size_t i = 0; i < c.x.size(); ++i) out += format_double(c.x[i]) + " " + format_double(c.y[i]) + "\n";
  return out;
}

namespace detail {

inline void write_file(const std::filesystem::path& p, const std::string& text) {
  std::ofstream f(p, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot open " + p.string() + " for writing");
  f << text;
  f.close();
  if (!f) throw IoError("failed writing " + p.string());
}

}  // namespace detail

/// Writes <experiment>.csv, <experiment>.json and <experiment>_<curve>.dat under dir.
inline std::vector<std::filesystem::path> emit(const RunReport& r, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create output directory " + dir.string() + ": " + ec.message());
  std::vector<std::filesystem::path> written;
  const auto csv = dir / (r.experiment + ".csv");
  detail::write_file(csv, to_csv(r));
  written.push_back(csv);
  const auto js = dir / (r.experiment + ".json");
  detail::write_file(js, to_json(r).dump(2) + "\n");
  written.push_back(js);
  for (const auto& c : r.curves) {
    const auto p = dir / (r.experiment + "_" + c.name + ".dat");
    detail::write_file(p, to_plot_data(c, r.seed));
    written.push_back(p);
  }
  return written;
}

}  // namespace tubelab

#endif  // TUBELAB_REPORT_HPP
