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

// Audio ranging: delay-estimate jitter, the resulting Gaussian decision
// errors, and the self-calibrating two-way exchange between phones that
// hear their own transmissions.

#ifndef PROXTRACE_AUDIO_RANGING_HPP_
#define PROXTRACE_AUDIO_RANGING_HPP_

#include <cmath>
#include <optional>
#include <ostream>
#include <random>
#include <string>
#include <vector>

#include "proxtrace/errors.hpp"
#include "proxtrace/numerics.hpp"

namespace proxtrace {

struct AudioRangingConfig {
  double chip_duration = 1e-3;      // T_c, seconds
  double correlator_spacing = 1.0;  // Delta, early-late spacing in chips
  double sound_speed = 343.0;       // m/s
  double carrier_hz = 18000.0;
  int code_length_chips = 350;
  double calibration_esn0_db = 6.0;  // E_i/N0 at the calibration range
  double calibration_range_m = 4.0;

  double SignalDuration() const { return code_length_chips * chip_duration; }
  double ChipLength() const { return chip_duration * sound_speed; }

  void Validate() const {
    detail::Require<ConfigError>(chip_duration > 0.0, "audio: chip_duration must be > 0");
    detail::Require<ConfigError>(correlator_spacing > 0.0 && correlator_spacing < 2.0,
                                 "audio: correlator_spacing must lie in (0, 2)");
    detail::Require<ConfigError>(sound_speed > 0.0, "audio: sound_speed must be > 0");
    detail::Require<ConfigError>(carrier_hz > 0.0, "audio: carrier_hz must be > 0");
    detail::Require<ConfigError>(code_length_chips >= 1, "audio: code_length_chips must be >= 1");
  }
};

// Default resolution used for the decision curves (5 cm).
inline constexpr double kAudioRangeSigma = 0.05;

inline double DbToLinear(double db) { return std::pow(10.0, db / 10.0); }

// Standard deviation (seconds) of the early-late delay estimate:
//   sigma^2 = T_c^2 Delta / (4 E/N0) * (1 + 3 / ((2 - Delta) E/N0)).
inline double DelayStd(const AudioRangingConfig& cfg, double esn0_db) {
  detail::Require(cfg.correlator_spacing < 2.0 && cfg.correlator_spacing > 0.0,
                  "DelayStd: correlator spacing must lie in (0, 2)");
  detail::Require(std::isfinite(esn0_db), "DelayStd: E/N0 must be finite");
  const double esn0 = DbToLinear(esn0_db);
  const double delta = cfg.correlator_spacing;
  const double var = delta / (4.0 * esn0) * (1.0 + 3.0 / ((2.0 - delta) * esn0));
  return cfg.chip_duration * std::sqrt(var);
}

inline double DelayStdMeters(const AudioRangingConfig& cfg, double esn0_db) {
  return DelayStd(cfg, esn0_db) * cfg.sound_speed;
}

// Probability that a Gaussian range estimate at true distance d <= d_c lands
// beyond d_c.
inline double PiMdAudio(double sigma, double critical_distance, double d) {
  detail::Require(sigma > 0.0, "PiMdAudio: sigma must be > 0");
  detail::Require(d > 0.0 && d <= critical_distance, "PiMdAudio: distance must lie in (0, d_c]");
  return GaussianQ((critical_distance - d) / sigma);
}

// Probability that the estimate at d > d_c lands inside the contact zone.
inline double PiFaAudio(double sigma, double critical_distance, double d) {
  detail::Require(sigma > 0.0, "PiFaAudio: sigma must be > 0");
  detail::Require(d > critical_distance && std::isfinite(d), "PiFaAudio: distance must exceed d_c");
  return GaussianQ((d - critical_distance) / sigma);
}

// Per-device delays. Clock readings are true time plus clock_offset.
struct DeviceTimingProfile {
  double tx_delay = 0.0;            // API command to acoustic emission
  double rx_delay = 0.0;            // acoustic arrival to timestamp
  double local_path = 0.14 / 343.0;  // own speaker to own microphone
  double clock_offset = 0.0;
  double range_bias = 0.0;  // extra acoustic path (m) added to what others hear

  void Validate() const {
    detail::Require(tx_delay >= 0.0 && rx_delay >= 0.0 && local_path >= 0.0,
                    "DeviceTimingProfile: delays must be >= 0");
  }
};

// Timestamps of one A -> B -> A exchange, each on its owner's clock.
struct RangingExchange {
  double t_tx_a = 0.0;
  double t_self_rx_a = 0.0;
  double t_rx_a = 0.0;  // A hears B
  double t_tx_b = 0.0;
  double t_self_rx_b = 0.0;
  double t_rx_b = 0.0;  // B hears A
  double delta_a = 0.0;  // t_rx_a - t_self_rx_a + local_path_a
  double delta_b = 0.0;  // t_rx_b - t_self_rx_b + local_path_b
};

struct ExchangeOptions {
  double start_time = 1.0;           // true time of A's transmit command
  double turnaround = 0.4;           // B transmits this long after hearing A
  double timestamp_noise_std = 0.0;  // Gaussian noise on every reception stamp
};

struct ExchangeResult {
  RangingExchange exchange;
  double propagation_time = 0.0;  // (delta_a + delta_b) / 2
  double distance = 0.0;
};

namespace detail {

inline double StampNoise(std::mt19937_64* rng, double std_dev) {
  if (std_dev <= 0.0 || rng == nullptr) return 0.0;
  return std::normal_distribution<double>(0.0, std_dev)(*rng);
}

inline void RequireNonNegativeStamp(double t, const char* what) {
  if (t < 0.0) throw SimulationError(std::string("negative timestamp: ") + what);
}

}  // namespace detail

// Simulates the exchange against a true timeline and recovers the distance
// from the two published time differences. Transmit/receive delays and clock
// offsets cancel.
inline ExchangeResult TwoWayExchange(const DeviceTimingProfile& a, const DeviceTimingProfile& b,
                                     double distance, const AudioRangingConfig& cfg,
                                     const ExchangeOptions& options = {},
                                     std::mt19937_64* rng = nullptr) {
  detail::Require(distance > 0.0, "TwoWayExchange: distance must be > 0");
  a.Validate();
  b.Validate();
  const double c = cfg.sound_speed;
  const double tau_ab = (distance + a.range_bias) / c;  // A's signal at B
  const double tau_ba = (distance + b.range_bias) / c;
  const double sigma = options.timestamp_noise_std;

  RangingExchange ex;
  const double tx_a = options.start_time;
  ex.t_tx_a = tx_a + a.clock_offset;
  ex.t_self_rx_a = tx_a + a.tx_delay + a.local_path + a.rx_delay + a.clock_offset +
                   detail::StampNoise(rng, sigma);
  const double rx_b_true = tx_a + a.tx_delay + tau_ab + b.rx_delay;
  ex.t_rx_b = rx_b_true + b.clock_offset + detail::StampNoise(rng, sigma);

  const double tx_b = rx_b_true + options.turnaround;
  ex.t_tx_b = tx_b + b.clock_offset;
  ex.t_self_rx_b = tx_b + b.tx_delay + b.local_path + b.rx_delay + b.clock_offset +
                   detail::StampNoise(rng, sigma);
  ex.t_rx_a = tx_b + b.tx_delay + tau_ba + a.rx_delay + a.clock_offset +
              detail::StampNoise(rng, sigma);

  for (auto [t, name] : {std::pair{ex.t_tx_a, "t_tx_a"}, {ex.t_self_rx_a, "t_self_rx_a"},
                         {ex.t_rx_a, "t_rx_a"}, {ex.t_tx_b, "t_tx_b"},
                         {ex.t_self_rx_b, "t_self_rx_b"}, {ex.t_rx_b, "t_rx_b"}}) {
    detail::RequireNonNegativeStamp(t, name);
  }

  ex.delta_a = ex.t_rx_a - ex.t_self_rx_a + a.local_path;
  ex.delta_b = ex.t_rx_b - ex.t_self_rx_b + b.local_path;
  ExchangeResult out;
  out.exchange = ex;
  out.propagation_time = 0.5 * (ex.delta_a + ex.delta_b);
  out.distance = out.propagation_time * c;
  return out;
}

// Slot budget of the networked protocol.
struct SlotBudget {
  double signal = 0.350;
  double propagation = 0.010;
  double internal = 0.040;

  double Total() const { return signal + propagation + internal; }
};

struct ScheduledSlot {
  int device = 0;
  double start = 0.0;  // relative to cycle start
};

struct NetworkSchedule {
  int devices = 0;
  double slot_duration = 0.0;
  double cycle_duration = 0.0;
  int exchanged_values = 0;  // k (k - 1) published time differences
  std::vector<ScheduledSlot> slots;
};

// Prearranged round: devices transmit one after another in ascending id order.
inline NetworkSchedule NetworkedSchedule(int k, const AudioRangingConfig& cfg,
                                         const SlotBudget& budget = {}) {
  detail::Require(k >= 2, "NetworkedSchedule: need at least 2 devices");
  SlotBudget b = budget;
  b.signal = cfg.SignalDuration();
  NetworkSchedule s;
  s.devices = k;
  s.slot_duration = b.Total();
  s.cycle_duration = k * s.slot_duration;
  s.exchanged_values = k * (k - 1);
  for (int i = 0; i < k; ++i) s.slots.push_back({i, i * s.slot_duration});
  return s;
}

struct NetworkDevice {
  double position = 0.0;  // meters along a line
  DeviceTimingProfile profile;
};

struct TranscriptEvent {
  double clock_time = 0.0;  // on `device`'s clock
  int device = 0;
  int source = 0;  // transmitting device
  std::string kind;  // tx, self_rx or rx
};

struct NetworkCycle {
  NetworkSchedule schedule;
  std::vector<TranscriptEvent> transcript;
  // delta[i][j]: device i's reception of j minus its own self-reception, plus
  // its local path. Diagonal unused.
  std::vector<std::vector<double>> delta;
  // Recovered pairwise distances (symmetric).
  std::vector<std::vector<double>> distance;
};

inline NetworkCycle SimulateNetworkCycle(const std::vector<NetworkDevice>& devices,
                                         const AudioRangingConfig& cfg, double start_time = 1.0,
                                         double timestamp_noise_std = 0.0,
                                         std::mt19937_64* rng = nullptr) {
  const int k = static_cast<int>(devices.size());
  NetworkCycle cycle;
  cycle.schedule = NetworkedSchedule(k, cfg);
  const double c = cfg.sound_speed;
  std::vector<double> self_rx(k);
  std::vector<std::vector<double>> rx(k, std::vector<double>(k, 0.0));
  for (const ScheduledSlot& slot : cycle.schedule.slots) {
    const int j = slot.device;
    const DeviceTimingProfile& pj = devices[j].profile;
    pj.Validate();
    const double tx = start_time + slot.start;
    const double emitted = tx + pj.tx_delay;
    cycle.transcript.push_back({tx + pj.clock_offset, j, j, "tx"});
    self_rx[j] = emitted + pj.local_path + pj.rx_delay + pj.clock_offset +
                 detail::StampNoise(rng, timestamp_noise_std);
    cycle.transcript.push_back({self_rx[j], j, j, "self_rx"});
    for (int i = 0; i < k; ++i) {
      if (i == j) continue;
      const DeviceTimingProfile& pi = devices[i].profile;
      const double path = std::abs(devices[i].position - devices[j].position) + pj.range_bias;
      detail::Require(path > 0.0, "SimulateNetworkCycle: devices must not coincide");
      rx[i][j] = emitted + path / c + pi.rx_delay + pi.clock_offset +
                 detail::StampNoise(rng, timestamp_noise_std);
      cycle.transcript.push_back({rx[i][j], i, j, "rx"});
    }
  }
  for (const TranscriptEvent& e : cycle.transcript) {
    detail::RequireNonNegativeStamp(e.clock_time, e.kind.c_str());
  }
  cycle.delta.assign(k, std::vector<double>(k, 0.0));
  cycle.distance.assign(k, std::vector<double>(k, 0.0));
  for (int i = 0; i < k; ++i) {
    for (int j = 0; j < k; ++j) {
      if (i != j) cycle.delta[i][j] = rx[i][j] - self_rx[i] + devices[i].profile.local_path;
    }
  }
  for (int i = 0; i < k; ++i) {
    for (int j = i + 1; j < k; ++j) {
      const double d = 0.5 * (cycle.delta[i][j] + cycle.delta[j][i]) * c;
      cycle.distance[i][j] = cycle.distance[j][i] = d;
    }
  }
  return cycle;
}

}  // namespace proxtrace

#endif  // PROXTRACE_AUDIO_RANGING_HPP_
