// Copyright 2026 The Proxtrace Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Run configuration for the command-line tool.
//
// Sources, later ones winning: built-in defaults, an INI file with one
// section per module, environment variables named PROXTRACE_<SECTION>_<KEY>
// (upper case), and finally command-line flags. Unknown sections or keys in
// the file are rejected.

#ifndef PROXTRACE_CONFIG_HPP_
#define PROXTRACE_CONFIG_HPP_

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <cstdlib>
#include <functional>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <type_traits>
#include <vector>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "proxtrace/audio_dsp.hpp"
#include "proxtrace/audio_ranging.hpp"
#include "proxtrace/errors.hpp"
#include "proxtrace/propagation.hpp"

namespace proxtrace {

inline constexpr const char* kEnvPrefix = "PROXTRACE_";

struct RunConfig {
  // [run]
  std::optional<std::uint64_t> seed;
  std::int64_t trials = 100000;
  std::string out_dir = ".";
  int curve_points = 200;

  // [propagation], [rice], [lognormal], [crowd]
  PropagationConfig propagation;
  RiceFading rice;
  LognormalFading near{kLognormalSigmaNear, 0.0};
  LognormalFading far{kLognormalSigmaFar, 0.0};
  double crowd_density = 1.0;

  // [tables]
  std::vector<int> table4_n = {1, 6, 15, 30, 60, 120, 240, 480};
  std::vector<int> table5_n = {6, 15, 60};
  std::vector<int> table5_x0 = {3, 5};
  double k_y = 16.0;
  double quarantine_target = 2.0;
  std::vector<double> table3_ratios = {1, 2, 4, 8, 12};
  std::vector<int> table3_x0 = {5, 10, 30};

  // [audio], [dsp]
  AudioRangingConfig audio;
  double audio_sigma = kAudioRangeSigma;
  DspConfig dsp;
  std::vector<double> dsp_esn0_db = {6.0, 12.0};
  int dsp_trials = 500;
  double dsp_nominal_delay_chips = 10.0;
  std::uint64_t dsp_code_seed = 1;

  // [protocol]
  std::vector<double> positions = {0.0, 1.5, 3.0};
  double max_device_delay = 0.05;  // tx/rx delays drawn from U(0, max)
  double max_clock_offset = 10.0;  // clock offsets drawn from U(0, max)
  double timestamp_noise_std = 0.0;

  // [pose]
  double pose_b_distance = 1.0;
  double pose_sector = 45.0;

  void Validate() const {
    detail::Require<ConfigError>(trials >= 1, "run.trials must be >= 1");
    detail::Require<ConfigError>(curve_points >= 2, "run.curve_points must be >= 2");
    propagation.Validate();
    rice.Validate();
    near.Validate();
    far.Validate();
    detail::Require<ConfigError>(crowd_density > 0.0, "crowd.density must be > 0");
    auto positive = [](const std::vector<int>& v, const char* what) {
      detail::Require<ConfigError>(!v.empty() && std::all_of(v.begin(), v.end(),
                                                             [](int x) { return x >= 1; }),
                                   std::string(what) + " must be a non-empty list of values >= 1");
    };
    positive(table4_n, "tables.n_values");
    positive(table5_n, "tables.performance_n");
    positive(table5_x0, "tables.performance_x0");
    positive(table3_x0, "tables.x0_values");
    detail::Require<ConfigError>(!table3_ratios.empty() &&
                                     std::all_of(table3_ratios.begin(), table3_ratios.end(),
                                                 [](double r) { return r >= 1.0; }),
                                 "tables.ratios must be >= 1");
    detail::Require<ConfigError>(k_y > 0.0 && quarantine_target > 0.0,
                                 "tables.k_y and tables.target must be > 0");
    dsp.Validate(audio);
    detail::Require<ConfigError>(audio_sigma > 0.0, "audio.range_sigma must be > 0");
    detail::Require<ConfigError>(dsp_trials >= 1, "dsp.trials must be >= 1");
    detail::Require<ConfigError>(!dsp_esn0_db.empty(), "dsp.esn0_db must not be empty");
    detail::Require<ConfigError>(dsp_nominal_delay_chips >= 0.0 &&
                                     dsp_nominal_delay_chips + 1.0 <= dsp.search_window_chips,
                                 "dsp.nominal_delay_chips must leave the delay inside the window");
    detail::Require<ConfigError>(max_device_delay >= 0.0 && max_clock_offset >= 0.0 &&
                                     timestamp_noise_std >= 0.0,
                                 "protocol delays and noise must be >= 0");
    detail::Require<ConfigError>(pose_b_distance > 0.0 && pose_sector > 0.0 && pose_sector <= 90.0,
                                 "pose.pose_b_distance must be > 0 and pose.sector in (0, 90]");
  }

  std::uint64_t RequireSeed() const {
    if (!seed) throw ConfigError("a seed is required (--seed N, run.seed or PROXTRACE_RUN_SEED)");
    return *seed;
  }
};

namespace detail {

template <typename T>
T ParseScalar(const std::string& key, const std::string& text) {
  // Stream extraction wraps "-3" into a huge unsigned value.
  if (std::is_unsigned_v<T> && text.find('-') != std::string::npos) {
    throw ConfigError("cannot parse " + key + " = '" + text + "' as a non-negative integer");
  }
  std::istringstream in(text);
  T value{};
  in >> value;
  // Extracting std::ws from a stream already at end of input sets failbit.
  if (!in.fail() && !in.eof()) in >> std::ws;
  if (in.fail() || !in.eof()) throw ConfigError("cannot parse " + key + " = '" + text + "'");
  return value;
}

template <>
inline bool ParseScalar<bool>(const std::string& key, const std::string& text) {
  std::string t = text;
  std::transform(t.begin(), t.end(), t.begin(), [](unsigned char c) { return std::tolower(c); });
  if (t == "1" || t == "true" || t == "yes" || t == "on") return true;
  if (t == "0" || t == "false" || t == "no" || t == "off") return false;
  throw ConfigError("cannot parse " + key + " = '" + text + "' as a boolean");
}

template <>
inline std::string ParseScalar<std::string>(const std::string&, const std::string& text) {
  return text;
}

template <typename T>
std::vector<T> ParseList(const std::string& key, const std::string& text) {
  std::vector<T> out;
  std::stringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    const auto b = item.find_first_not_of(" \t");
    const auto e = item.find_last_not_of(" \t");
    if (b == std::string::npos) throw ConfigError("empty list element in " + key);
    out.push_back(ParseScalar<T>(key, item.substr(b, e - b + 1)));
  }
  return out;
}

struct Binding {
  std::string section;
  std::string key;
  std::function<void(RunConfig&, const std::string& name, const std::string& text)> set;
};

template <typename T>
Binding Bind(std::string section, std::string key, T RunConfig::*member) {
  return {std::move(section), std::move(key),
          [member](RunConfig& c, const std::string& name, const std::string& text) {
            c.*member = ParseScalar<T>(name, text);
          }};
}

template <typename T>
Binding BindList(std::string section, std::string key, std::vector<T> RunConfig::*member) {
  return {std::move(section), std::move(key),
          [member](RunConfig& c, const std::string& name, const std::string& text) {
            c.*member = ParseList<T>(name, text);
          }};
}

template <typename T, typename F>
Binding BindWith(std::string section, std::string key, F access) {
  return {std::move(section), std::move(key),
          [access](RunConfig& c, const std::string& name, const std::string& text) {
            access(c) = ParseScalar<T>(name, text);
          }};
}

inline const std::vector<Binding>& Bindings() {
  static const std::vector<Binding> kBindings = [] {
    std::vector<Binding> b;
    b.push_back({"run", "seed", [](RunConfig& c, const std::string& n, const std::string& t) {
                   c.seed = ParseScalar<std::uint64_t>(n, t);
                 }});
    b.push_back(Bind("run", "trials", &RunConfig::trials));
    b.push_back(Bind("run", "out_dir", &RunConfig::out_dir));
    b.push_back(Bind("run", "curve_points", &RunConfig::curve_points));
    b.push_back(BindWith<double>("propagation", "tx_power_dbm",
                                 [](RunConfig& c) -> double& { return c.propagation.tx_power_dbm; }));
    b.push_back(BindWith<double>("propagation", "path_loss_exponent", [](RunConfig& c) -> double& {
      return c.propagation.path_loss_exponent;
    }));
    b.push_back(BindWith<double>("propagation", "critical_distance", [](RunConfig& c) -> double& {
      return c.propagation.critical_distance;
    }));
    b.push_back(BindWith<double>("rice", "gamma_r", [](RunConfig& c) -> double& { return c.rice.gamma_r; }));
    b.push_back(
        BindWith<double>("rice", "sigma_r_sq", [](RunConfig& c) -> double& { return c.rice.sigma_r_sq; }));
    b.push_back(
        BindWith<double>("lognormal", "sigma_near", [](RunConfig& c) -> double& { return c.near.sigma_l; }));
    b.push_back(
        BindWith<double>("lognormal", "sigma_far", [](RunConfig& c) -> double& { return c.far.sigma_l; }));
    b.push_back({"lognormal", "eta", [](RunConfig& c, const std::string& n, const std::string& t) {
                   c.near.eta_l = c.far.eta_l = ParseScalar<double>(n, t);
                 }});
    b.push_back(Bind("crowd", "density", &RunConfig::crowd_density));
    b.push_back(BindList("tables", "n_values", &RunConfig::table4_n));
    b.push_back(BindList("tables", "performance_n", &RunConfig::table5_n));
    b.push_back(BindList("tables", "performance_x0", &RunConfig::table5_x0));
    b.push_back(Bind("tables", "k_y", &RunConfig::k_y));
    b.push_back(Bind("tables", "target", &RunConfig::quarantine_target));
    b.push_back(BindList("tables", "ratios", &RunConfig::table3_ratios));
    b.push_back(BindList("tables", "x0_values", &RunConfig::table3_x0));
    b.push_back(BindWith<double>("audio", "chip_duration",
                                 [](RunConfig& c) -> double& { return c.audio.chip_duration; }));
    b.push_back(BindWith<double>("audio", "correlator_spacing",
                                 [](RunConfig& c) -> double& { return c.audio.correlator_spacing; }));
    b.push_back(BindWith<double>("audio", "sound_speed",
                                 [](RunConfig& c) -> double& { return c.audio.sound_speed; }));
    b.push_back(
        BindWith<double>("audio", "carrier_hz", [](RunConfig& c) -> double& { return c.audio.carrier_hz; }));
    b.push_back(BindWith<int>("audio", "code_length_chips",
                              [](RunConfig& c) -> int& { return c.audio.code_length_chips; }));
    b.push_back(Bind("audio", "range_sigma", &RunConfig::audio_sigma));
    b.push_back(
        BindWith<double>("dsp", "sample_rate", [](RunConfig& c) -> double& { return c.dsp.sample_rate; }));
    b.push_back(
        BindWith<double>("dsp", "lowpass_hz", [](RunConfig& c) -> double& { return c.dsp.lowpass_hz; }));
    b.push_back(BindWith<double>("dsp", "search_window_chips",
                                 [](RunConfig& c) -> double& { return c.dsp.search_window_chips; }));
    b.push_back(BindWith<double>("dsp", "acquisition_threshold_db",
                                 [](RunConfig& c) -> double& { return c.dsp.acquisition_threshold_db; }));
    b.push_back(BindWith<double>("dsp", "echo_power_ratio",
                                 [](RunConfig& c) -> double& { return c.dsp.echo_power_ratio; }));
    b.push_back(BindWith<double>("dsp", "echo_span_chips",
                                 [](RunConfig& c) -> double& { return c.dsp.echo_span_chips; }));
    b.push_back(BindWith<bool>("dsp", "gate_candidates",
                               [](RunConfig& c) -> bool& { return c.dsp.gate_candidates; }));
    b.push_back(BindWith<double>("dsp", "half_spacing_factor",
                                 [](RunConfig& c) -> double& { return c.dsp.half_spacing_factor; }));
    b.push_back(BindWith<bool>("dsp", "frequency_search",
                               [](RunConfig& c) -> bool& { return c.dsp.frequency_search; }));
    b.push_back(BindList("dsp", "esn0_db", &RunConfig::dsp_esn0_db));
    b.push_back(Bind("dsp", "trials", &RunConfig::dsp_trials));
    b.push_back(Bind("dsp", "nominal_delay_chips", &RunConfig::dsp_nominal_delay_chips));
    b.push_back(Bind("dsp", "code_seed", &RunConfig::dsp_code_seed));
    b.push_back(BindList("protocol", "positions", &RunConfig::positions));
    b.push_back(Bind("protocol", "max_device_delay", &RunConfig::max_device_delay));
    b.push_back(Bind("protocol", "max_clock_offset", &RunConfig::max_clock_offset));
    b.push_back(Bind("protocol", "timestamp_noise_std", &RunConfig::timestamp_noise_std));
    b.push_back(Bind("pose", "pose_b_distance", &RunConfig::pose_b_distance));
    b.push_back(Bind("pose", "sector", &RunConfig::pose_sector));
    return b;
  }();
  return kBindings;
}

inline std::string EnvName(const std::string& section, const std::string& key) {
  std::string name = std::string(kEnvPrefix) + section + "_" + key;
  std::transform(name.begin(), name.end(), name.begin(),
                 [](unsigned char c) { return static_cast<char>(std::toupper(c)); });
  return name;
}

}  // namespace detail

// Names of every recognised environment override, for documentation.
inline std::vector<std::string> EnvironmentOverrideNames() {
  std::vector<std::string> names;
  for (const auto& b : detail::Bindings()) names.push_back(detail::EnvName(b.section, b.key));
  return names;
}

// Applies "section.key" -> text assignments; unknown keys raise ConfigError.
inline void ApplySettings(RunConfig& cfg, const std::map<std::string, std::string>& settings) {
  for (const auto& [name, text] : settings) {
    const auto it = std::find_if(detail::Bindings().begin(), detail::Bindings().end(),
                                 [&](const detail::Binding& b) {
                                   return b.section + "." + b.key == name;
                                 });
    if (it == detail::Bindings().end()) throw ConfigError("unknown configuration key " + name);
    it->set(cfg, name, text);
  }
}

inline std::map<std::string, std::string> ReadIniSettings(const std::string& path) {
  boost::property_tree::ptree tree;
  try {
    boost::property_tree::ini_parser::read_ini(path, tree);
  } catch (const boost::property_tree::ini_parser_error& e) {
    if (e.line() == 0) throw IoError("cannot read config " + path + ": " + e.message());
    throw ConfigError("malformed config " + path + ": " + e.what());
  }
  std::map<std::string, std::string> settings;
  for (const auto& [section, body] : tree) {
    if (body.empty()) throw ConfigError("config key outside a section: " + section);
    for (const auto& [key, value] : body) settings[section + "." + key] = value.data();
  }
  return settings;
}

// Reads PROXTRACE_<SECTION>_<KEY> variables through `getenv`.
inline std::map<std::string, std::string> EnvironmentSettings(
    const std::function<const char*(const char*)>& getenv = [](const char* n) {
      return std::getenv(n);
    }) {
  std::map<std::string, std::string> settings;
  for (const auto& b : detail::Bindings()) {
    if (const char* v = getenv(detail::EnvName(b.section, b.key).c_str())) {
      settings[b.section + "." + b.key] = v;
    }
  }
  return settings;
}

// Defaults, then the optional file, then the environment. Not yet validated
// so that command-line flags can still be applied.
inline RunConfig LoadRunConfig(const std::optional<std::string>& path,
                               const std::function<const char*(const char*)>& getenv =
                                   [](const char* n) { return std::getenv(n); }) {
  RunConfig cfg;
  if (path) ApplySettings(cfg, ReadIniSettings(*path));
  ApplySettings(cfg, EnvironmentSettings(getenv));
  return cfg;
}

}  // namespace proxtrace

#endif  // PROXTRACE_CONFIG_HPP_
