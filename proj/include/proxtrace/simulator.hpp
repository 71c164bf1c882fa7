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

// Seeded Monte Carlo oracle for the closed forms, the Model A/B/C classifier
// state machines, and the pose rules.

#ifndef PROXTRACE_SIMULATOR_HPP_
#define PROXTRACE_SIMULATOR_HPP_

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <variant>
#include <vector>

#include "proxtrace/episode_stats.hpp"
#include "proxtrace/errors.hpp"
#include "proxtrace/numerics.hpp"
#include "proxtrace/propagation.hpp"
#include "proxtrace/random.hpp"

namespace proxtrace {

// Rice power gain: |sqrt(gamma_r) + N(0, s^2) + j N(0, s^2)|^2.
template <typename Rng>
double SampleRicePower(const RiceFading& fading, Rng& rng) {
  std::normal_distribution<double> axis(0.0, fading.SigmaR());
  const double in_phase = std::sqrt(fading.gamma_r) + axis(rng);
  const double quadrature = axis(rng);
  return in_phase * in_phase + quadrature * quadrature;
}

template <typename Rng>
double SampleRssi(const FadingModel& fading, const PropagationConfig& cfg, double d, Rng& rng) {
  detail::Require(d > 0.0, "SampleRssi: distance must be > 0");
  if (const auto* rice = std::get_if<RiceFading>(&fading)) {
    return ExpectedRssi(cfg, d, 10.0 * std::log10(SampleRicePower(*rice, rng)));
  }
  const auto& lognormal = std::get<LognormalFading>(fading);
  std::normal_distribution<double> eta(lognormal.eta_l, lognormal.sigma_l);
  return ExpectedRssi(cfg, d, eta(rng));
}

// Threshold matching SampleRssi: the RSSI of the mean gain at d_c. For Rice
// the mean is taken on the power scale, for lognormal on the dB scale.
inline double ThresholdFor(const FadingModel& fading, const PropagationConfig& cfg) {
  if (const auto* rice = std::get_if<RiceFading>(&fading)) {
    return DecisionThreshold(cfg, 10.0 * std::log10(rice->MeanPower()));
  }
  return DecisionThreshold(cfg, std::get<LognormalFading>(fading).eta_l);
}

enum class Aggregation {
  kDecibelSum,  // sum of n RSSI values against n Theta
  kPowerSum,    // sum of n received powers against n times the threshold power
};

// The closed forms exist for power sums under Rice fading and dB sums under
// lognormal fading.
inline Aggregation NaturalAggregation(const FadingModel& fading) {
  return std::holds_alternative<RiceFading>(fading) ? Aggregation::kPowerSum
                                                    : Aggregation::kDecibelSum;
}

struct EmpiricalEstimate {
  std::int64_t errors = 0;  // missed detections (d <= d_c) or false alarms
  std::int64_t trials = 0;
  double probability = 0.0;
  ProportionInterval wilson95;

  // Binomial standard error of a reference probability p at this sample size.
  double StandardErrorAt(double p) const {
    return std::sqrt(std::max(p * (1.0 - p), 0.0) / static_cast<double>(trials));
  }
};

inline constexpr std::int64_t kMinOracleTrials = 1000;

// Fraction of trials in which an elementary decision from n measurements at
// distance d is wrong: below threshold for d <= d_c, above it otherwise.
inline EmpiricalEstimate EstimatePiEmpirical(const FadingModel& fading,
                                             const PropagationConfig& cfg, int n, double d,
                                             std::int64_t trials, std::uint64_t seed,
                                             std::optional<Aggregation> aggregation = {}) {
  detail::Require(n >= 1, "EstimatePiEmpirical: n must be >= 1");
  detail::Require(d > 0.0, "EstimatePiEmpirical: distance must be > 0");
  detail::Require(trials >= kMinOracleTrials, "EstimatePiEmpirical: need at least 1000 trials");
  const Aggregation mode = aggregation.value_or(NaturalAggregation(fading));
  const bool inside = d <= cfg.critical_distance;
  const double theta = ThresholdFor(fading, cfg);
  const double theta_power = std::pow(10.0, theta / 10.0);
  const auto* rice = std::get_if<RiceFading>(&fading);
  const double rice_threshold =
      rice ? rice->MeanPower() * std::pow(d / cfg.critical_distance, cfg.path_loss_exponent) : 0.0;

  const std::int64_t blocks = (trials + kTrialsPerStream - 1) / kTrialsPerStream;
  std::vector<std::int64_t> block_errors(blocks, 0);
  ParallelBlocks(blocks, [&](std::int64_t b) {
    auto rng = RandomStream(seed, static_cast<std::uint64_t>(b));
    const std::int64_t begin = b * kTrialsPerStream;
    const std::int64_t end = std::min(trials, begin + kTrialsPerStream);
    std::int64_t count = 0;
    for (std::int64_t t = begin; t < end; ++t) {
      bool c1 = false;
      if (mode == Aggregation::kDecibelSum) {
        double sum = 0.0;
        for (int i = 0; i < n; ++i) sum += SampleRssi(fading, cfg, d, rng);
        c1 = sum > n * theta;
      } else if (rice != nullptr) {
        // Same comparison as the power sum of RSSI values, without the dB round trip.
        double sum = 0.0;
        for (int i = 0; i < n; ++i) sum += SampleRicePower(*rice, rng);
        c1 = sum > n * rice_threshold;
      } else {
        double sum = 0.0;
        for (int i = 0; i < n; ++i) sum += std::pow(10.0, SampleRssi(fading, cfg, d, rng) / 10.0);
        c1 = sum > n * theta_power;
      }
      if (c1 != inside) ++count;
    }
    block_errors[b] = count;
  });
  EmpiricalEstimate out;
  for (std::int64_t e : block_errors) out.errors += e;
  out.trials = trials;
  out.probability = static_cast<double>(out.errors) / static_cast<double>(trials);
  out.wilson95 = WilsonInterval(out.errors, trials);
  return out;
}

// Empirical crowd-averaged missed detection: one estimate per packing radius.
inline double EstimateCrowdPiMd(const FadingModel& fading, const PropagationConfig& cfg,
                                const CrowdLayout& layout, int n, std::int64_t trials_per_radius,
                                std::uint64_t seed) {
  detail::Require(!layout.empty(), "EstimateCrowdPiMd: empty layout");
  double sum = 0.0;
  std::uint64_t i = 0;
  for (double r : layout.radii()) {
    sum += EstimatePiEmpirical(fading, cfg, n, r, trials_per_radius, SplitMix64(seed + ++i))
               .probability;
  }
  return sum / layout.size();
}

// ---------------------------------------------------------------------------
// Episodes and classifier state machines.

struct Keyframe {
  double time = 0.0;              // seconds
  double distance = 0.0;          // meters
  double relative_heading = 0.0;  // degrees
};

// Scripted relative geometry; distance is interpolated linearly between
// keyframes. The episode spans [front().time, back().time].
struct Episode {
  std::vector<Keyframe> schedule;
  double measurement_period = 1.0;

  static Episode Constant(double distance, double duration, double period = 1.0) {
    Episode e;
    e.measurement_period = period;
    for (double t = 0.0; t < duration; t += period) e.schedule.push_back({t, distance, 0.0});
    e.schedule.push_back({duration, distance, 0.0});
    e.Validate();
    return e;
  }

  double Duration() const { return schedule.back().time - schedule.front().time; }

  double DistanceAt(double t) const {
    if (t <= schedule.front().time) return schedule.front().distance;
    for (std::size_t i = 1; i < schedule.size(); ++i) {
      if (t <= schedule[i].time) {
        const Keyframe& a = schedule[i - 1];
        const Keyframe& b = schedule[i];
        const double w = (t - a.time) / (b.time - a.time);
        return a.distance + w * (b.distance - a.distance);
      }
    }
    return schedule.back().distance;
  }

  void Validate() const {
    detail::Require(schedule.size() >= 2, "Episode: need at least two keyframes");
    for (std::size_t i = 0; i < schedule.size(); ++i) {
      detail::Require(schedule[i].distance > 0.0, "Episode: distances must be > 0");
      if (i > 0) {
        detail::Require(schedule[i].time > schedule[i - 1].time,
                        "Episode: times must be strictly increasing");
      }
    }
  }
};

enum class Verdict { kPending, kC1, kNotC1 };

inline const char* ToString(Verdict v) {
  switch (v) {
    case Verdict::kPending: return "pending";
    case Verdict::kC1: return "C1";
    case Verdict::kNotC1: return "notC1";
  }
  return "?";
}

struct ClassifierState {
  DecisionPolicy policy;
  double accumulated_rssi = 0.0;  // dB sum for the current interval
  int interval_count = 0;         // measurements in the current interval
  int completed_intervals = 0;
  int c1_hits = 0;
  double timer_start = -1.0;     // Model B: first single-measurement crossing
  double compatible_time = 0.0;  // Model B: accumulated C1-compatible time
  Verdict verdict = Verdict::kPending;
};

struct TraceRow {
  double time = 0.0;
  double distance = 0.0;
  double rssi = 0.0;
  int decision = -1;  // -1: no elementary decision at this measurement
  double interval_sum = 0.0;
  Verdict verdict = Verdict::kPending;
};

struct ClassifierResult {
  Verdict verdict = Verdict::kPending;
  ClassifierState state;
  std::vector<TraceRow> trace;
};

// Runs one episode. Measurements are taken every interval_seconds / n; an
// elementary decision compares the dB sum of an interval's n measurements
// against n Theta.
//  - Model A and C: C1 once the number of positive decisions reaches x0.
//  - Model B: a timer starts at the first single measurement above Theta;
//    positive decisions completed after that add their interval to the
//    compatible time; C1 iff it reaches 15 minutes by the end of the episode.
template <typename Rng>
ClassifierResult RunClassifier(const Episode& episode, const DecisionPolicy& policy,
                               const FadingModel& fading, const PropagationConfig& cfg, Rng& rng,
                               bool keep_trace = true) {
  episode.Validate();
  policy.Validate();
  detail::Require(episode.Duration() + 1e-9 >= policy.interval_seconds,
                  "RunClassifier: episode shorter than one decision interval");
  const double theta = ThresholdFor(fading, cfg);
  const double period = policy.interval_seconds / policy.n;
  const double t0 = episode.schedule.front().time;
  const int intervals = static_cast<int>(std::floor(episode.Duration() / policy.interval_seconds + 1e-9));
  const std::int64_t measurements = static_cast<std::int64_t>(intervals) * policy.n;

  ClassifierResult result;
  ClassifierState& s = result.state;
  s.policy = policy;
  if (keep_trace) result.trace.reserve(static_cast<std::size_t>(measurements));
  for (std::int64_t k = 0; k < measurements; ++k) {
    const double t = t0 + k * period;
    const double d = episode.DistanceAt(t);
    const double rssi = SampleRssi(fading, cfg, d, rng);
    s.accumulated_rssi += rssi;
    ++s.interval_count;
    if (policy.model == DecisionModel::kB && s.timer_start < 0.0 && rssi > theta) {
      s.timer_start = t;
    }
    TraceRow row{t, d, rssi, -1, s.accumulated_rssi, s.verdict};
    if (s.interval_count == policy.n) {
      const bool hit = s.accumulated_rssi > policy.n * theta;
      row.decision = hit ? 1 : 0;
      ++s.completed_intervals;
      if (hit) {
        ++s.c1_hits;
        if (policy.model == DecisionModel::kB && s.timer_start >= 0.0) {
          s.compatible_time += policy.interval_seconds;
        }
      }
      if (s.verdict == Verdict::kPending && policy.model != DecisionModel::kB &&
          s.c1_hits >= policy.x0) {
        s.verdict = Verdict::kC1;
      }
      s.accumulated_rssi = 0.0;
      s.interval_count = 0;
    }
    if (k + 1 == measurements && s.verdict == Verdict::kPending) {
      if (policy.model == DecisionModel::kB) {
        s.verdict = s.compatible_time + 1e-9 >= kExposureWindowSeconds ? Verdict::kC1
                                                                        : Verdict::kNotC1;
      } else {
        s.verdict = Verdict::kNotC1;
      }
    }
    row.verdict = s.verdict;
    if (keep_trace) result.trace.push_back(row);
  }
  result.verdict = s.verdict;
  return result;
}

// Fraction of independent episodes that end in `wrong` (notC1 for an episode
// that is a true contact, C1 otherwise). Episode e uses RandomStream(seed, e).
inline EmpiricalEstimate EstimateEpisodeErrorRate(const Episode& episode,
                                                  const DecisionPolicy& policy,
                                                  const FadingModel& fading,
                                                  const PropagationConfig& cfg,
                                                  std::int64_t episodes, std::uint64_t seed,
                                                  Verdict wrong = Verdict::kNotC1) {
  detail::Require(episodes >= 1, "EstimateEpisodeErrorRate: need at least one episode");
  std::vector<char> wrong_flags(static_cast<std::size_t>(episodes), 0);
  constexpr std::int64_t kPerBlock = 256;
  const std::int64_t blocks = (episodes + kPerBlock - 1) / kPerBlock;
  ParallelBlocks(blocks, [&](std::int64_t b) {
    for (std::int64_t e = b * kPerBlock; e < std::min(episodes, (b + 1) * kPerBlock); ++e) {
      auto rng = RandomStream(seed, static_cast<std::uint64_t>(e));
      wrong_flags[e] = RunClassifier(episode, policy, fading, cfg, rng, false).verdict == wrong;
    }
  });
  EmpiricalEstimate out;
  out.trials = episodes;
  for (char f : wrong_flags) out.errors += f;
  out.probability = static_cast<double>(out.errors) / static_cast<double>(episodes);
  out.wilson95 = WilsonInterval(out.errors, episodes);
  return out;
}

// ---------------------------------------------------------------------------
// Pose rules.
//
// Headings are measured in degrees in a frame whose 0 deg axis points from A
// to B. A "faces" B when its heading is within `sector` of 0 deg; B faces A
// when its heading is within `sector` of 180 deg. Anything that is neither
// toward nor away is "side".
//
//   a: A and B face each other                         critical below d_c
//   b: B faces A's back                                critical below pose_b_distance
//   c: A faces B's back                                never critical
//   d: B faces A, A turned sideways                    critical below d_c
//   e: A faces B, B turned sideways                    critical below d_c
//   f: nobody faces the other (side/away combinations) never critical

enum class PoseLabel { kA, kB, kC, kD, kE, kF };

inline char ToChar(PoseLabel p) { return static_cast<char>('a' + static_cast<int>(p)); }

struct PoseRules {
  double critical_distance = 2.0;
  double pose_b_distance = 1.0;
  double sector = 45.0;
};

struct PoseVerdict {
  PoseLabel pose = PoseLabel::kF;
  bool category1_pose = false;  // pose belongs to {a, d, e}
  bool critical = false;        // pose and distance together
};

namespace detail {

enum class Facing { kToward, kAway, kSide };

inline double AngularDistance(double a, double b) {
  const double diff = std::fmod(std::abs(a - b), 360.0);
  return std::min(diff, 360.0 - diff);
}

inline Facing FacingOf(double heading, double toward, double sector) {
  if (AngularDistance(heading, toward) < sector) return Facing::kToward;
  if (AngularDistance(heading, toward + 180.0) < sector) return Facing::kAway;
  return Facing::kSide;
}

}  // namespace detail

inline PoseVerdict ClassifyPose(double distance, double heading_a, double heading_b,
                                const PoseRules& rules = {}) {
  detail::Require(distance > 0.0, "ClassifyPose: distance must be > 0");
  detail::Require(heading_a >= 0.0 && heading_a < 360.0 && heading_b >= 0.0 && heading_b < 360.0,
                  "ClassifyPose: headings must lie in [0, 360)");
  using detail::Facing;
  const Facing a = detail::FacingOf(heading_a, 0.0, rules.sector);
  const Facing b = detail::FacingOf(heading_b, 180.0, rules.sector);
  PoseVerdict v;
  if (a == Facing::kToward && b == Facing::kToward) {
    v.pose = PoseLabel::kA;
  } else if (b == Facing::kToward && a == Facing::kAway) {
    v.pose = PoseLabel::kB;
  } else if (a == Facing::kToward && b == Facing::kAway) {
    v.pose = PoseLabel::kC;
  } else if (b == Facing::kToward && a == Facing::kSide) {
    v.pose = PoseLabel::kD;
  } else if (a == Facing::kToward && b == Facing::kSide) {
    v.pose = PoseLabel::kE;
  } else {
    v.pose = PoseLabel::kF;
  }
  switch (v.pose) {
    case PoseLabel::kA:
    case PoseLabel::kD:
    case PoseLabel::kE:
      v.category1_pose = true;
      v.critical = distance < rules.critical_distance;
      break;
    case PoseLabel::kB:
      v.critical = distance < rules.pose_b_distance;
      break;
    case PoseLabel::kC:
    case PoseLabel::kF:
      break;
  }
  return v;
}

}  // namespace proxtrace

#endif  // PROXTRACE_SIMULATOR_HPP_
