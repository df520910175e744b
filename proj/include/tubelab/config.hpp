#ifndef TUBELAB_CONFIG_HPP
#define TUBELAB_CONFIG_HPP

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "tubelab/common.hpp"
#include "tubelab/format.hpp"

namespace tubelab {

/// Bad configuration text or value; carries the offending line when known.
struct ConfigError : DomainError {
  using DomainError::DomainError;
};

enum class Experiment { Concentration, Projector, Resolvent, DampedWave, OscInt, SelfTest };

inline std::string to_string(Experiment e) {
  switch (e) {
    case Experiment::Concentration: return "concentration";
    case Experiment::Projector: return "projector";
    case Experiment::Resolvent: return "resolvent";
    case Experiment::DampedWave: return "dampedwave";
    case Experiment::OscInt: return "oscint";
    case Experiment::SelfTest: return "selftest";
  }
  return "?";
}

inline Experiment parse_experiment(std::string_view s) {
  for (auto e : {Experiment::Concentration, Experiment::Projector, Experiment::Resolvent, Experiment::DampedWave,
                 Experiment::OscInt, Experiment::SelfTest}) {
    if (s == to_string(e)) return e;
  }
  throw ConfigError("unknown experiment '" + std::string(s) +
                    "' (expected concentration, projector, resolvent, dampedwave, oscint or selftest)");
}

enum class ValueKind { Real, RealList, Int, IntList, UInt, Bool, Text, Choice };

struct KeySpec {
  std::string key;
  ValueKind kind;
  std::string fallback;
  std::vector<std::string> choices;
};

namespace detail {

inline std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

inline std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(s);
  while (std::getline(in, item, ',')) out.push_back(trim(item));
  return out;
}

inline long long parse_int(const std::string& s) {
  long long v = 0;
  const auto* end = s.data() + s.size();
  const auto [p, ec] = std::from_chars(s.data(), end, v);
  if (ec != std::errc() || p != end) throw std::invalid_argument("not an integer: '" + s + "'");
  return v;
}

inline std::uint64_t parse_uint(const std::string& s) {
  std::uint64_t v = 0;
  const auto* end = s.data() + s.size();
  const auto [p, ec] = std::from_chars(s.data(), end, v);
  if (ec != std::errc() || p != end) throw std::invalid_argument("not an unsigned integer: '" + s + "'");
  return v;
}

// shortest text that reads back to the same double
inline std::string shortest_double(double v) {
  if (!std::isfinite(v)) return format_double(v);
  char buf[64];
  const auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, p);
}

// canonical text for a value of the given kind
inline std::string canonical(const KeySpec& spec, const std::string& raw) {
  auto list = [&](auto&& one) {
    const auto items = split_list(raw);
    if (items.empty() || (items.size() == 1 && items[0].empty())) throw std::invalid_argument("empty list");
    std::string out;
    for (const auto& it : items) {
      if (!out.empty()) out += ',';
      out += one(it);
    }
    return out;
  };
  switch (spec.kind) {
    case ValueKind::Real: return shortest_double(parse_double(raw));
    case ValueKind::RealList: return list([](const std::string& x) { return shortest_double(parse_double(x)); });
    case ValueKind::Int: return std::to_string(parse_int(raw));
    case ValueKind::IntList: return list([](const std::string& x) { return std::to_string(parse_int(x)); });
    case ValueKind::UInt: return std::to_string(parse_uint(raw));
    case ValueKind::Bool:
      if (raw == "true" || raw == "1" || raw == "yes") return "true";
      if (raw == "false" || raw == "0" || raw == "no") return "false";
      throw std::invalid_argument("not a boolean: '" + raw + "'");
    case ValueKind::Text:
      if (raw.empty()) throw std::invalid_argument("empty value");
      return raw;
    case ValueKind::Choice:
      if (std::find(spec.choices.begin(), spec.choices.end(), raw) == spec.choices.end()) {
        std::string opts;
        for (const auto& c : spec.choices) opts += (opts.empty() ? "" : ", ") + c;
        throw std::invalid_argument("'" + raw + "' is not one of " + opts);
      }
      return raw;
  }
  return raw;
}

inline std::string kind_name(ValueKind k) {
  switch (k) {
    case ValueKind::Real: return "real";
    case ValueKind::RealList: return "list of reals";
    case ValueKind::Int: return "integer";
    case ValueKind::IntList: return "list of integers";
    case ValueKind::UInt: return "unsigned integer";
    case ValueKind::Bool: return "boolean";
    case ValueKind::Text: return "text";
    case ValueKind::Choice: return "choice";
  }
  return "?";
}

}  // namespace detail

/// Keys accepted for an experiment, with defaults. The defaults reproduce the
/// reference desk-scale runs.
inline std::vector<KeySpec> key_specs(Experiment e) {
  std::vector<KeySpec> k{
      {"experiment", ValueKind::Choice, to_string(e),
       {"concentration", "projector", "resolvent", "dampedwave", "oscint", "selftest"}},
      {"seed", ValueKind::UInt, "1", {}},
      {"output.dir", ValueKind::Text, "out", {}},
  };
  const std::string dyadic = "0.0625,0.125,0.25,0.5";
  auto damping = [&](const std::string& manifold, const std::string& sub) {
    k.push_back({"manifold", ValueKind::Choice, manifold, {"sphere2", "torus2", "torus1"}});
    k.push_back({"damping.form", ValueKind::Choice, "surrogate", {"surrogate", "distance_power", "constant"}});
    k.push_back({"damping.submanifold", ValueKind::Choice, sub, {"equator", "poles", "circle_x0", "point_x0"}});
    k.push_back({"damping.kappa", ValueKind::Real, "1", {}});
    k.push_back({"damping.amplitude", ValueKind::Real, "1", {}});
  };
  switch (e) {
    case Experiment::Concentration:
      k.push_back({"concentration.family", ValueKind::Choice, "highest_weight", {"highest_weight", "zonal", "plane_wave"}});
      k.push_back({"concentration.j_grid", ValueKind::IntList, "64,128,256", {}});
      k.push_back({"concentration.alpha_grid", ValueKind::RealList, dyadic, {}});
      k.push_back({"concentration.nlat", ValueKind::Int, "16384", {}});
      k.push_back({"concentration.wave_vector", ValueKind::IntList, "3,1", {}});
      k.push_back({"concentration.torus_grid", ValueKind::IntList, "2048,16", {}});
      break;
    case Experiment::Projector:
      k.push_back({"projector.lambda", ValueKind::Real, "64", {}});
      k.push_back({"projector.truncation", ValueKind::Int, "0", {}});
      k.push_back({"projector.trials", ValueKind::Int, "20", {}});
      k.push_back({"projector.alpha_grid", ValueKind::RealList, dyadic, {}});
      k.push_back({"projector.grid", ValueKind::IntList, "1024,64", {}});
      break;
    case Experiment::Resolvent:
      damping("sphere2", "equator");
      k.push_back({"resolvent.h_grid", ValueKind::RealList, "0.125,0.0625,0.03125,0.015625", {}});
      k.push_back({"resolvent.truncation", ValueKind::Int, "0", {}});
      k.push_back({"resolvent.snap", ValueKind::Bool, "true", {}});
      k.push_back({"resolvent.rayleigh", ValueKind::Bool, "true", {}});
      k.push_back({"resolvent.truncation_check", ValueKind::Bool, "true", {}});
      k.push_back({"resolvent.spread_bound", ValueKind::Real, "3", {}});
      k.push_back({"resolvent.rayleigh_factor", ValueKind::Real, "5", {}});
      break;
    case Experiment::DampedWave:
      damping("torus2", "circle_x0");
      k.push_back({"wave.truncation", ValueKind::Int, "8", {}});
      k.push_back({"wave.T", ValueKind::Real, "200", {}});
      k.push_back({"wave.dt", ValueKind::Real, "0.02", {}});
      k.push_back({"wave.stride", ValueKind::Int, "5", {}});
      k.push_back({"wave.t0", ValueKind::Real, "10", {}});
      k.push_back({"wave.window_center", ValueKind::Real, "25", {}});
      k.push_back({"wave.window_scale", ValueKind::Real, "2", {}});
      k.push_back({"wave.kappa", ValueKind::Real, "0", {}});
      break;
    case Experiment::OscInt:
      k.push_back({"oscint.phase", ValueKind::Choice, "distance", {"bilinear", "distance"}});
      k.push_back({"oscint.dim", ValueKind::Int, "2", {}});
      k.push_back({"oscint.delta", ValueKind::Real, "0", {}});
      k.push_back({"oscint.p", ValueKind::Int, "1", {}});
      k.push_back({"oscint.lambda_grid", ValueKind::RealList, "8,16,32,64", {}});
      k.push_back({"oscint.x_center", ValueKind::RealList, "0,0", {}});
      k.push_back({"oscint.x_half", ValueKind::RealList, "0.1,0.6", {}});
      k.push_back({"oscint.xi_center", ValueKind::RealList, "1.25,0", {}});
      k.push_back({"oscint.xi_half", ValueKind::RealList, "0.1,0.6", {}});
      k.push_back({"oscint.rho", ValueKind::Real, "0.8", {}});
      k.push_back({"oscint.oversampling", ValueKind::Real, "8", {}});
      k.push_back({"oscint.min_nodes", ValueKind::Int, "24", {}});
      k.push_back({"oscint.doubling", ValueKind::Bool, "true", {}});
      k.push_back({"oscint.slope_tolerance", ValueKind::Real, "0.15", {}});
      break;
    case Experiment::SelfTest:
      break;
  }
  return k;
}

struct ExperimentConfig {
  Experiment experiment = Experiment::SelfTest;
  std::map<std::string, std::string> values;  // canonical text, every key of the schema

  [[nodiscard]] std::uint64_t seed() const { return detail::parse_uint(at("seed")); }
  [[nodiscard]] std::string output_dir() const { return at("output.dir"); }

  [[nodiscard]] const std::string& at(const std::string& key) const {
    const auto it = values.find(key);
    if (it == values.end()) throw ConfigError("config has no key '" + key + "'");
    return it->second;
  }
  [[nodiscard]] double real(const std::string& key) const { return parse_double(at(key)); }
  [[nodiscard]] long long integer(const std::string& key) const { return detail::parse_int(at(key)); }
  [[nodiscard]] bool flag(const std::string& key) const { return at(key) == "true"; }
  [[nodiscard]] std::vector<double> reals(const std::string& key) const {
    std::vector<double> out;
    for (const auto& s : detail::split_list(at(key))) out.push_back(parse_double(s));
    return out;
  }
  [[nodiscard]] std::vector<long long> integers(const std::string& key) const {
    std::vector<long long> out;
    for (const auto& s : detail::split_list(at(key))) out.push_back(detail::parse_int(s));
    return out;
  }

  /// Sets a key through the schema (used for command-line overrides).
  void set(const std::string& key, const std::string& raw) {
    if (key == "experiment" && detail::trim(raw) != to_string(experiment)) {
      throw ConfigError("the experiment cannot be changed by an override");
    }
    for (const auto& spec : key_specs(experiment)) {
      if (spec.key != key) continue;
      try {
        values[key] = detail::canonical(spec, detail::trim(raw));
      } catch (const std::invalid_argument& e) {
        throw ConfigError("key '" + key + "': expected " + detail::kind_name(spec.kind) + " (" + e.what() + ")");
      }
      return;
    }
    throw ConfigError("unknown key '" + key + "' for experiment " + to_string(experiment));
  }

  bool operator==(const ExperimentConfig&) const = default;
};

/// Parses `key = value` lines ('#' starts a comment). The experiment comes
/// from the `experiment` key, or from `fallback` when the text has none.
inline ExperimentConfig parse_config(std::string_view text, std::optional<Experiment> fallback = std::nullopt) {
  struct Entry {
    std::string key;
    std::string value;
    std::size_t line;
  };
  std::vector<Entry> entries;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto nl = text.find('\n', pos);
    std::string_view line = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
    pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    const std::string t = detail::trim(line);
    if (t.empty()) continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) throw ConfigError("line " + std::to_string(line_no) + ": expected 'key = value'");
    Entry e{detail::trim(std::string_view(t).substr(0, eq)), detail::trim(std::string_view(t).substr(eq + 1)), line_no};
    if (e.key.empty()) throw ConfigError("line " + std::to_string(line_no) + ": missing key");
    for (const auto& prev : entries) {
      if (prev.key == e.key) {
        throw ConfigError("line " + std::to_string(line_no) + ": duplicate key '" + e.key + "' (first set on line " +
                          std::to_string(prev.line) + ")");
      }
    }
    entries.push_back(std::move(e));
  }

  ExperimentConfig cfg;
  const auto it = std::find_if(entries.begin(), entries.end(), [](const Entry& e) { return e.key == "experiment"; });
  if (it != entries.end()) {
    try {
      cfg.experiment = parse_experiment(it->value);
    } catch (const ConfigError& err) {
      throw ConfigError("line " + std::to_string(it->line) + ": " + err.what());
    }
    if (fallback && *fallback != cfg.experiment) {
      throw ConfigError("line " + std::to_string(it->line) + ": config is for experiment '" + it->value + "' but '" +
                        to_string(*fallback) + "' was requested");
    }
  } else if (fallback) {
    cfg.experiment = *fallback;
  } else {
    throw ConfigError("config does not name an experiment");
  }

  const auto specs = key_specs(cfg.experiment);
  for (const auto& s : specs) cfg.values[s.key] = detail::canonical(s, s.fallback);
  for (const auto& e : entries) {
    const auto spec = std::find_if(specs.begin(), specs.end(), [&](const KeySpec& s) { return s.key == e.key; });
    if (spec == specs.end()) {
      throw ConfigError("line " + std::to_string(e.line) + ": unknown key '" + e.key + "' for experiment " +
                        to_string(cfg.experiment));
    }
    try {
      cfg.values[e.key] = detail::canonical(*spec, e.value);
    } catch (const std::invalid_argument& err) {
      throw ConfigError("line " + std::to_string(e.line) + ": key '" + e.key + "': expected " +
                        detail::kind_name(spec->kind) + " (" + err.what() + ")");
    }
  }
  return cfg;
}

/// Every key in canonical form, sorted; parse_config(serialize(c)) == c.
inline std::string serialize_config(const ExperimentConfig& cfg) {
  std::string out;
  for (const auto& [k, v] : cfg.values) out += k + " = " + v + "\n";
  return out;
}

}  // namespace tubelab

#endif  // TUBELAB_CONFIG_HPP
