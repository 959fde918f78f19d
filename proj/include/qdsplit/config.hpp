#pragma once

// JSON configuration (geometry, sweeps, HBT scenarios) and JSON reports.

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "qdsplit/coupler_design.hpp"
#include "qdsplit/numerics.hpp"
#include "qdsplit/photon_stream.hpp"
#include "qdsplit/waveguide_modes.hpp"

namespace qdsplit {

using json = nlohmann::json;

/// Bad configuration input. `field()` is the dotted path of the offending
/// entry, empty when the problem is not tied to one field.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string field, const std::string& message)
      : std::runtime_error(field.empty() ? message : field + ": " + message), field_(std::move(field)) {}

  const std::string& field() const { return field_; }

 private:
  std::string field_;
};

namespace config_detail {

inline std::string join(const std::string& path, const std::string& key) {
  return path.empty() ? key : path + "." + key;
}

inline void reject_unknown(const json& obj, const std::string& path, const std::set<std::string>& known) {
  for (const auto& [key, value] : obj.items())
    if (!known.count(key)) throw ConfigError(join(path, key), "unknown field");
}

inline const json& object_at(const json& parent, const std::string& key, const std::string& path) {
  const auto it = parent.find(key);
  if (it == parent.end()) throw ConfigError(join(path, key), "missing required object");
  if (!it->is_object()) throw ConfigError(join(path, key), "expected an object");
  return *it;
}

inline std::optional<double> number_at(const json& obj, const std::string& key, const std::string& path) {
  const auto it = obj.find(key);
  if (it == obj.end()) return std::nullopt;
  if (!it->is_number()) throw ConfigError(join(path, key), "expected a number");
  return it->get<double>();
}

inline double number_or(const json& obj, const std::string& key, const std::string& path, double fallback) {
  return number_at(obj, key, path).value_or(fallback);
}

inline double required_number(const json& obj, const std::string& key, const std::string& path) {
  const auto v = number_at(obj, key, path);
  if (!v) throw ConfigError(join(path, key), "missing required number");
  return *v;
}

/// Runs a component validator and reports its complaint against `path`.
template <class F>
void validated(const std::string& path, F&& check) {
  try {
    check();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(path, e.what());
  }
}

inline double significant(double v, int digits) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.*g", digits, v);
  return std::stod(buf);
}

}  // namespace config_detail

inline json load_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("", "cannot open " + path);
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("", path + ": invalid JSON (" + e.what() + ")");
  }
}

inline const std::set<std::string>& geometry_keys() {
  static const std::set<std::string> keys{"width_nm", "height_nm",     "gap_nm",         "n_core",
                                          "n_clad",   "wavelength_nm", "dn_core_dlambda"};
  return keys;
}

/// Parses a CouplerGeometry object. A missing, null or "inf" gap means
/// isolated waveguides; unspecified fields take the library defaults.
inline CouplerGeometry geometry_from_json(const json& obj, const std::string& path = "geometry") {
  using namespace config_detail;
  if (!obj.is_object()) throw ConfigError(path, "expected an object");
  reject_unknown(obj, path, geometry_keys());
  CouplerGeometry g;
  g.width_nm = number_or(obj, "width_nm", path, g.width_nm);
  g.height_nm = number_or(obj, "height_nm", path, g.height_nm);
  g.n_core = number_or(obj, "n_core", path, g.n_core);
  g.n_clad = number_or(obj, "n_clad", path, g.n_clad);
  g.wavelength_nm = number_or(obj, "wavelength_nm", path, g.wavelength_nm);
  g.dn_core_dlambda = number_or(obj, "dn_core_dlambda", path, g.dn_core_dlambda);
  if (const auto it = obj.find("gap_nm"); it != obj.end()) {
    if (it->is_null() || (it->is_string() && (*it == "inf" || *it == "infinity"))) {
      g.gap_nm = CouplerGeometry::kIsolatedGap;
    } else if (it->is_number()) {
      g.gap_nm = it->get<double>();
    } else {
      throw ConfigError(join(path, "gap_nm"), "expected a number, null or \"inf\"");
    }
  }
  validated(path, [&] { g.validate(); });
  return g;
}

inline json geometry_to_json(const CouplerGeometry& g) {
  json j{{"width_nm", g.width_nm},         {"height_nm", g.height_nm}, {"n_core", g.n_core},
         {"n_clad", g.n_clad},             {"wavelength_nm", g.wavelength_nm}};
  j["gap_nm"] = g.isolated() ? json("inf") : json(g.gap_nm);
  if (g.dn_core_dlambda != 0.0) j["dn_core_dlambda"] = g.dn_core_dlambda;
  return j;
}

struct GridSpec {
  double min = 0.0;
  double max = 0.0;
  std::size_t steps = 1;

  std::vector<double> values() const { return numerics::linspace(min, max, steps); }
};

inline GridSpec grid_from_json(const json& obj, const std::string& path) {
  using namespace config_detail;
  if (!obj.is_object()) throw ConfigError(path, "expected an object with min, max, steps");
  reject_unknown(obj, path, {"min", "max", "steps"});
  GridSpec g;
  g.min = required_number(obj, "min", path);
  g.max = required_number(obj, "max", path);
  const auto it = obj.find("steps");
  if (it == obj.end() || !it->is_number_integer() || it->get<std::int64_t>() < 1)
    throw ConfigError(join(path, "steps"), "expected a positive integer");
  g.steps = it->get<std::size_t>();
  if (g.max < g.min) throw ConfigError(join(path, "max"), "must be >= min");
  return g;
}

/// Geometry plus optional sweep grids, as accepted by the design subcommands.
/// The geometry is either the top-level object itself or nested under
/// "geometry".
struct DesignConfig {
  CouplerGeometry geometry;
  std::optional<GridSpec> wavelength_grid;
  std::optional<GridSpec> gap_grid;
};

inline DesignConfig design_config_from_json(const json& root) {
  using namespace config_detail;
  if (!root.is_object()) throw ConfigError("", "expected a JSON object");
  DesignConfig cfg;
  if (root.contains("geometry")) {
    cfg.geometry = geometry_from_json(object_at(root, "geometry", ""), "geometry");
  } else {
    json flat = json::object();
    for (const auto& [key, value] : root.items())
      if (geometry_keys().count(key)) flat[key] = value;
    cfg.geometry = geometry_from_json(flat, "");
  }
  if (const auto it = root.find("sweep"); it != root.end()) {
    if (!it->is_object()) throw ConfigError("sweep", "expected an object");
    reject_unknown(*it, "sweep", {"wavelength_nm", "gap_nm"});
    if (it->contains("wavelength_nm")) cfg.wavelength_grid = grid_from_json(it->at("wavelength_nm"), "sweep.wavelength_nm");
    if (it->contains("gap_nm")) cfg.gap_grid = grid_from_json(it->at("gap_nm"), "sweep.gap_nm");
  }
  return cfg;
}

struct AnalysisSpec {
  double bin_ps = 128.0;
  double window_ns = 50.0;
  double irf_ps = 520.0;
};

struct ScenarioConfig {
  static constexpr int kSchemaVersion = 1;

  std::string name;
  CouplerDesign design;  // design.geometry is the scenario geometry
  EmitterSpec emitter;
  ChannelSpec channel;
  bool split_from_design = false;  // channel.split_cross derived from the coupler design
  double duration_ps = 1e8;
  std::uint64_t seed = 1;
  AnalysisSpec analysis;
};

/// Cross-port fraction of splitter-side photons for a coupler design. Losses
/// act on both ports alike and only reduce the rate.
inline std::optional<double> design_split_cross(const CouplerDesign& design) {
  const auto pair = solve_supermodes(design.geometry);
  if (!pair) return std::nullopt;
  const auto split = power_transfer(design, pair->delta_n);
  const double kept = split.p_cross + split.p_bar;
  if (!(kept > 0.0)) return std::nullopt;
  return split.p_cross / kept;
}

/// Parses a scenario. When channel.split_cross is absent the split is left
/// to the caller (`split_from_design`), since deriving it needs a mode solve.
inline ScenarioConfig scenario_from_json(const json& root) {
  using namespace config_detail;
  if (!root.is_object()) throw ConfigError("", "expected a JSON object");
  reject_unknown(root, "", {"schema_version", "name", "description", "geometry", "design", "emitter", "channel",
                            "duration_ps", "seed", "analysis"});
  const auto version = root.find("schema_version");
  if (version == root.end() || !version->is_number_integer() ||
      version->get<int>() != ScenarioConfig::kSchemaVersion)
    throw ConfigError("schema_version", "expected " + std::to_string(ScenarioConfig::kSchemaVersion));
  if (const auto d = root.find("description"); d != root.end() && !d->is_string())
    throw ConfigError("description", "expected a string");

  ScenarioConfig s;
  const auto name = root.find("name");
  if (name == root.end() || !name->is_string() || name->get<std::string>().empty())
    throw ConfigError("name", "expected a non-empty string");
  s.name = name->get<std::string>();

  s.design.geometry = root.contains("geometry") ? geometry_from_json(root.at("geometry"), "geometry") : CouplerGeometry{};

  if (root.contains("design")) {
    const auto& d = object_at(root, "design", "");
    reject_unknown(d, "design", {"interaction_length_um", "bend_radius_um", "per_bend_loss", "mismatch_loss"});
    s.design.interaction_length_um = number_or(d, "interaction_length_um", "design", s.design.interaction_length_um);
    s.design.bend_radius_um = number_or(d, "bend_radius_um", "design", s.design.bend_radius_um);
    s.design.per_bend_loss = number_or(d, "per_bend_loss", "design", s.design.per_bend_loss);
    s.design.mismatch_loss = number_or(d, "mismatch_loss", "design", s.design.mismatch_loss);
    validated("design", [&] { s.design.validate(); });
  }

  const auto& e = object_at(root, "emitter", "");
  reject_unknown(e, "emitter",
                 {"pump_rate_per_ns", "decay_rate_per_ns", "beta_forward", "beta_backward", "companion_fraction"});
  s.emitter.pump_rate_per_ns = number_or(e, "pump_rate_per_ns", "emitter", s.emitter.pump_rate_per_ns);
  s.emitter.decay_rate_per_ns = number_or(e, "decay_rate_per_ns", "emitter", s.emitter.decay_rate_per_ns);
  s.emitter.beta_forward = number_or(e, "beta_forward", "emitter", s.emitter.beta_forward);
  s.emitter.beta_backward = number_or(e, "beta_backward", "emitter", s.emitter.beta_backward);
  s.emitter.companion_fraction = number_or(e, "companion_fraction", "emitter", s.emitter.companion_fraction);
  validated("emitter", [&] { s.emitter.validate(); });

  const auto& c = object_at(root, "channel", "");
  reject_unknown(c, "channel", {"background_rate_per_ns", "split_cross", "detector_efficiency", "jitter_fwhm_ps",
                                "dead_time_ps"});
  s.channel.background_rate_per_ns = number_or(c, "background_rate_per_ns", "channel", s.channel.background_rate_per_ns);
  const auto split = number_at(c, "split_cross", "channel");
  s.split_from_design = !split.has_value();
  if (split) s.channel.split_cross = *split;
  s.channel.detector_efficiency = number_or(c, "detector_efficiency", "channel", s.channel.detector_efficiency);
  s.channel.jitter_fwhm_ps = number_or(c, "jitter_fwhm_ps", "channel", s.channel.jitter_fwhm_ps);
  s.channel.dead_time_ps = number_or(c, "dead_time_ps", "channel", s.channel.dead_time_ps);
  validated("channel", [&] { s.channel.validate(); });

  s.duration_ps = required_number(root, "duration_ps", "");
  if (!(s.duration_ps > 0.0) || !std::isfinite(s.duration_ps)) throw ConfigError("duration_ps", "must be positive");
  const auto seed = root.find("seed");
  if (seed == root.end() || !seed->is_number_unsigned()) throw ConfigError("seed", "expected a non-negative integer");
  s.seed = seed->get<std::uint64_t>();

  if (root.contains("analysis")) {
    const auto& a = object_at(root, "analysis", "");
    reject_unknown(a, "analysis", {"bin_ps", "window_ns", "irf_ps"});
    s.analysis.bin_ps = number_or(a, "bin_ps", "analysis", s.analysis.bin_ps);
    s.analysis.window_ns = number_or(a, "window_ns", "analysis", s.analysis.window_ns);
    s.analysis.irf_ps = number_or(a, "irf_ps", "analysis", s.analysis.irf_ps);
    if (!(s.analysis.bin_ps > 0.0)) throw ConfigError("analysis.bin_ps", "must be positive");
    if (!(s.analysis.window_ns * 1e3 >= 10.0 * s.analysis.bin_ps))
      throw ConfigError("analysis.window_ns", "window must span at least 10 bins");
    if (!(s.analysis.irf_ps >= 0.0)) throw ConfigError("analysis.irf_ps", "must be >= 0");
  }
  return s;
}

/// ModeSolution report: n_eff to 12 significant digits, sampled profile as
/// parallel arrays.
inline json mode_to_json(const ModeSolution& m, bool with_profile = true) {
  json j{{"n_eff", config_detail::significant(m.n_eff, 12)},
         {"beta_rad_per_nm", m.beta},
         {"parity", to_string(m.parity)},
         {"wavelength_nm", m.wavelength_nm}};
  if (with_profile) j["profile"] = {{"position_nm", m.profile.position_nm}, {"amplitude", m.profile.amplitude}};
  return j;
}

}  // namespace qdsplit
