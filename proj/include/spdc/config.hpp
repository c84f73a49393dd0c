#pragma once

#include <array>
#include <cstdlib>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "spdc/common.hpp"
#include "spdc/estimator.hpp"
#include "spdc/optics.hpp"
#include "spdc/sensor.hpp"
#include "spdc/sha256.hpp"

namespace spdc {

using KeyValues = std::map<std::string, std::string>;

// Flat dotted-key config text: `section.key = value`, '#' comments, blank
// lines ignored. Values keep embedded commas (ROI rectangles).
inline KeyValues parse_config_text(const std::string& text, const std::string& origin) {
  KeyValues out;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  auto trim = [](std::string s) {
    const auto a = s.find_first_not_of(" \t\r");
    const auto b = s.find_last_not_of(" \t\r");
    return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
  };
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument(origin + ":" + std::to_string(line_no) +
                                  ": expected 'key = value', got '" + line + "'");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty() || value.empty())
      throw std::invalid_argument(origin + ":" + std::to_string(line_no) + ": empty key or value");
    if (out.count(key))
      throw std::invalid_argument(origin + ":" + std::to_string(line_no) + ": duplicate key '" + key + "'");
    out[key] = value;
  }
  return out;
}

inline KeyValues parse_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error(path + ": cannot open config file");
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_config_text(buf.str(), path);
}

// Fully resolved run configuration (defaults applied, units converted to
// SI). `resolved` holds the exact key/value strings in effect; its hash is
// the config hash embedded in stack headers and manifests.
struct RunConfig {
  OpticalConfig optics;
  GaussianPairState state;
  SensorModel sensor;
  std::optional<SensorModel> position_sensor;  // second block used by sweeps
  Basis basis = Basis::Momentum;
  uint32_t frames = 0;
  uint64_t seed = 1;
  ProjectionOptions estimator;
  KeyValues resolved;
  std::vector<std::string> warnings;

  std::string canonical_text() const {
    std::string out;
    for (const auto& [k, v] : resolved) {
      out += k;
      out += '=';
      out += v;
      out += '\n';
    }
    return out;
  }
  std::array<uint8_t, 32> hash() const { return Sha256::hash(canonical_text()); }
};

namespace configdetail {

inline double parse_double(const std::string& key, const std::string& value) {
  char* end = nullptr;
  const double v = std::strtod(value.c_str(), &end);
  if (end == value.c_str() || *end != '\0')
    throw std::invalid_argument("config key '" + key + "': '" + value + "' is not a number");
  return v;
}

inline long long parse_int(const std::string& key, const std::string& value) {
  char* end = nullptr;
  const long long v = std::strtoll(value.c_str(), &end, 10);
  if (end == value.c_str() || *end != '\0')
    throw std::invalid_argument("config key '" + key + "': '" + value + "' is not an integer");
  return v;
}

inline uint64_t parse_u64(const std::string& key, const std::string& value) {
  char* end = nullptr;
  const unsigned long long v = std::strtoull(value.c_str(), &end, 10);
  if (end == value.c_str() || *end != '\0')
    throw std::invalid_argument("config key '" + key + "': '" + value + "' is not an unsigned integer");
  return v;
}

inline Rect parse_rect(const std::string& key, const std::string& value) {
  Rect r;
  char extra = 0;
  if (std::sscanf(value.c_str(), "%d ,%d ,%d ,%d %c", &r.x0, &r.y0, &r.w, &r.h, &extra) != 4)
    throw std::invalid_argument("config key '" + key + "': '" + value + "' is not 'x0,y0,w,h'");
  return r;
}

struct Schema {
  // key -> default value; required keys have no default
  std::map<std::string, std::optional<std::string>> keys;

  void add(const std::string& key, std::optional<std::string> def = std::nullopt) {
    keys[key] = std::move(def);
  }
};

inline SensorModel resolve_sensor_block(const KeyValues& resolved, const std::string& prefix) {
  SensorModel sensor;
  sensor.pixel_pitch = from_um(parse_double(prefix + ".pixel_pitch_um", resolved.at(prefix + ".pixel_pitch_um")));
  sensor.width_px = static_cast<int>(parse_int(prefix + ".width_px", resolved.at(prefix + ".width_px")));
  sensor.height_px = static_cast<int>(parse_int(prefix + ".height_px", resolved.at(prefix + ".height_px")));
  sensor.roi_signal = parse_rect(prefix + ".roi_signal", resolved.at(prefix + ".roi_signal"));
  sensor.roi_idler = parse_rect(prefix + ".roi_idler", resolved.at(prefix + ".roi_idler"));
  sensor.quantum_efficiency =
      parse_double(prefix + ".quantum_efficiency", resolved.at(prefix + ".quantum_efficiency"));
  sensor.dark_count_prob =
      parse_double(prefix + ".dark_count_prob", resolved.at(prefix + ".dark_count_prob"));
  sensor.mean_pairs_per_frame =
      parse_double(prefix + ".mean_pairs_per_frame", resolved.at(prefix + ".mean_pairs_per_frame"));
  sensor.validate();
  return sensor;
}

}  // namespace configdetail

// Resolve raw key/values into a validated RunConfig. Unknown keys are hard
// errors (silent default substitution would corrupt physics comparisons),
// as are keys that contradict the selected state mode.
inline RunConfig resolve_run_config(const KeyValues& raw) {
  using configdetail::Schema;
  Schema schema;
  schema.add("optics.lambda_pump_nm", "405");
  schema.add("optics.lambda_signal_nm", "910");
  schema.add("optics.lambda_idler_nm", "730");
  schema.add("optics.pump_waist_um", "60");
  schema.add("optics.crystal_length_mm", "5");
  schema.add("optics.magnification", "3");
  schema.add("optics.fourier_focal_mm", "33.333333333333336");
  schema.add("state.mode", "derived");
  schema.add("state.c_p", "1.4142135623730951");
  schema.add("state.c_r", "0.167");
  schema.add("state.marginal_scale", "10");
  schema.add("state.sigma_minus_pos_um");
  schema.add("state.sigma_plus_mom_hbar_mm");
  schema.add("state.sigma_plus_pos_um");
  schema.add("state.sigma_minus_mom_hbar_mm");
  const char* sensor_prefixes[] = {"sensor", "position_sensor"};
  for (const char* prefix : sensor_prefixes) {
    const std::string p = prefix;
    schema.add(p + ".pixel_pitch_um");
    schema.add(p + ".width_px");
    schema.add(p + ".height_px");
    schema.add(p + ".roi_signal");
    schema.add(p + ".roi_idler");
    schema.add(p + ".quantum_efficiency", "1");
    schema.add(p + ".dark_count_prob", "0");
    schema.add(p + ".mean_pairs_per_frame", "1");
  }
  schema.add("run.basis");
  schema.add("run.frames");
  schema.add("run.seed", "1");
  schema.add("estimator.chunks", "32");
  schema.add("estimator.accidentals", "consecutive");
  schema.add("estimator.max_resampled_px", "8192");

  for (const auto& [key, value] : raw) {
    (void)value;
    if (!schema.keys.count(key)) throw std::invalid_argument("unknown config key '" + key + "'");
  }

  const std::string mode = raw.count("state.mode") ? raw.at("state.mode") : "derived";
  if (mode != "derived" && mode != "explicit")
    throw std::invalid_argument("config key 'state.mode': must be 'derived' or 'explicit'");
  const bool explicit_state = mode == "explicit";

  static const char* kSigmaKeys[] = {"state.sigma_minus_pos_um", "state.sigma_plus_mom_hbar_mm",
                                     "state.sigma_plus_pos_um", "state.sigma_minus_mom_hbar_mm"};
  static const char* kDerivedKeys[] = {"state.c_p", "state.c_r", "state.marginal_scale"};
  if (explicit_state) {
    for (const char* key : kSigmaKeys)
      if (!raw.count(key))
        throw std::invalid_argument(std::string("config key '") + key +
                                    "' is required when state.mode = explicit");
    for (const char* key : kDerivedKeys)
      if (raw.count(key))
        throw std::invalid_argument(std::string("config key '") + key +
                                    "' is only valid when state.mode = derived");
  } else {
    for (const char* key : kSigmaKeys)
      if (raw.count(key))
        throw std::invalid_argument(std::string("config key '") + key +
                                    "' is only valid when state.mode = explicit");
  }

  const bool has_position_block = [&] {
    for (const auto& [key, value] : raw) {
      (void)value;
      if (key.rfind("position_sensor.", 0) == 0) return true;
    }
    return false;
  }();

  // assemble the resolved map: file values plus applicable defaults
  KeyValues resolved = raw;
  for (const auto& [key, def] : schema.keys) {
    if (resolved.count(key)) continue;
    if (!def.has_value()) {
      const bool sigma_key =
          std::string(key).rfind("state.sigma_", 0) == 0;
      const bool position_key = key.rfind("position_sensor.", 0) == 0;
      if (sigma_key || position_key) continue;  // optional blocks checked elsewhere
      throw std::invalid_argument("missing required config key '" + key + "'");
    }
    const bool derived_key =
        key == "state.c_p" || key == "state.c_r" || key == "state.marginal_scale";
    if (derived_key && explicit_state) continue;
    if (key.rfind("position_sensor.", 0) == 0 && !has_position_block) continue;
    resolved[key] = *def;
  }
  if (has_position_block) {
    for (const char* suffix : {"pixel_pitch_um", "width_px", "height_px", "roi_signal", "roi_idler"})
      if (!resolved.count(std::string("position_sensor.") + suffix))
        throw std::invalid_argument(std::string("missing required config key 'position_sensor.") +
                                    suffix + "' (the block is all-or-nothing)");
  }

  using configdetail::parse_double;
  using configdetail::parse_int;
  using configdetail::parse_u64;

  RunConfig config;
  config.resolved = resolved;
  config.optics.lambda_pump = from_nm(parse_double("optics.lambda_pump_nm", resolved.at("optics.lambda_pump_nm")));
  config.optics.lambda_signal = from_nm(parse_double("optics.lambda_signal_nm", resolved.at("optics.lambda_signal_nm")));
  config.optics.lambda_idler = from_nm(parse_double("optics.lambda_idler_nm", resolved.at("optics.lambda_idler_nm")));
  config.optics.pump_waist = from_um(parse_double("optics.pump_waist_um", resolved.at("optics.pump_waist_um")));
  config.optics.crystal_length = from_mm(parse_double("optics.crystal_length_mm", resolved.at("optics.crystal_length_mm")));
  config.optics.magnification = parse_double("optics.magnification", resolved.at("optics.magnification"));
  config.optics.fourier_focal = from_mm(parse_double("optics.fourier_focal_mm", resolved.at("optics.fourier_focal_mm")));
  config.warnings = config.optics.validate();

  if (explicit_state) {
    config.state.sigma_minus_pos = from_um(parse_double("state.sigma_minus_pos_um", resolved.at("state.sigma_minus_pos_um")));
    config.state.sigma_plus_mom = from_hbar_per_mm(parse_double("state.sigma_plus_mom_hbar_mm", resolved.at("state.sigma_plus_mom_hbar_mm")));
    config.state.sigma_plus_pos = from_um(parse_double("state.sigma_plus_pos_um", resolved.at("state.sigma_plus_pos_um")));
    config.state.sigma_minus_mom = from_hbar_per_mm(parse_double("state.sigma_minus_mom_hbar_mm", resolved.at("state.sigma_minus_mom_hbar_mm")));
    config.state.validate();
  } else {
    StateModelConstants constants;
    constants.c_p = parse_double("state.c_p", resolved.at("state.c_p"));
    constants.c_r = parse_double("state.c_r", resolved.at("state.c_r"));
    constants.marginal_scale = parse_double("state.marginal_scale", resolved.at("state.marginal_scale"));
    config.state = derive_state(config.optics, constants);
  }

  config.sensor = configdetail::resolve_sensor_block(resolved, "sensor");
  if (has_position_block)
    config.position_sensor = configdetail::resolve_sensor_block(resolved, "position_sensor");

  const std::string basis = resolved.at("run.basis");
  if (basis == "position")
    config.basis = Basis::Position;
  else if (basis == "momentum")
    config.basis = Basis::Momentum;
  else
    throw std::invalid_argument("config key 'run.basis': must be 'position' or 'momentum'");

  const long long frames = parse_int("run.frames", resolved.at("run.frames"));
  require(frames >= 1 && frames <= 0xFFFFFFFFll, "config key 'run.frames': out of range");
  config.frames = static_cast<uint32_t>(frames);
  config.seed = parse_u64("run.seed", resolved.at("run.seed"));

  const long long chunks = parse_int("estimator.chunks", resolved.at("estimator.chunks"));
  require(chunks >= 1 && chunks <= 4096, "config key 'estimator.chunks': out of range");
  config.estimator.chunks = static_cast<int>(chunks);
  const std::string accidentals = resolved.at("estimator.accidentals");
  if (accidentals == "consecutive")
    config.estimator.accidentals = AccidentalMode::ConsecutiveFrames;
  else if (accidentals == "mean-product")
    config.estimator.accidentals = AccidentalMode::MeanProduct;
  else
    throw std::invalid_argument("config key 'estimator.accidentals': must be 'consecutive' or 'mean-product'");
  const long long max_px = parse_int("estimator.max_resampled_px", resolved.at("estimator.max_resampled_px"));
  require(max_px >= 1, "config key 'estimator.max_resampled_px': out of range");
  config.estimator.max_resampled_px = static_cast<int>(max_px);

  return config;
}

inline RunConfig load_run_config(const std::string& path) {
  return resolve_run_config(parse_config_file(path));
}

}  // namespace spdc
