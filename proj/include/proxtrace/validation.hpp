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

// Closed-form versus Monte Carlo validation grid behind `proxtrace validate`.
//
// Every check yields one line (name, expected, got, tolerance, status).
// Deterministic checks pass or fail. Sampled checks pass when the estimate is
// within three binomial standard errors of the closed form; a disagreement is
// "inconclusive" instead of "fail" while the 95% Wilson half-width is still
// wider than 0.01.

#ifndef PROXTRACE_VALIDATION_HPP_
#define PROXTRACE_VALIDATION_HPP_

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "proxtrace/audio_dsp.hpp"
#include "proxtrace/audio_ranging.hpp"
#include "proxtrace/config.hpp"
#include "proxtrace/csv.hpp"
#include "proxtrace/episode_stats.hpp"
#include "proxtrace/propagation.hpp"
#include "proxtrace/random.hpp"
#include "proxtrace/simulator.hpp"

namespace proxtrace {

enum class CheckStatus { kPass, kFail, kInconclusive, kInfo };

inline const char* ToString(CheckStatus s) {
  switch (s) {
    case CheckStatus::kPass: return "pass";
    case CheckStatus::kFail: return "fail";
    case CheckStatus::kInconclusive: return "inconclusive";
    case CheckStatus::kInfo: return "info";
  }
  return "?";
}

struct CheckResult {
  std::string name;
  double expected = 0.0;
  double got = 0.0;
  double tolerance = 0.0;
  CheckStatus status = CheckStatus::kFail;
};

inline constexpr double kWideIntervalHalfWidth = 0.01;
inline constexpr double kWideAcquisitionHalfWidth = 0.03;
inline constexpr int kMinDspTrialsForStd = 200;

struct ValidationReport {
  std::vector<CheckResult> checks;
  std::vector<TraceRow> example_trace;

  bool AnyFailed() const {
    return std::any_of(checks.begin(), checks.end(),
                       [](const CheckResult& c) { return c.status == CheckStatus::kFail; });
  }

  CsvTable ToCsv() const {
    CsvTable t({"name[-]", "expected[1]", "got[1]", "tolerance[1]", "status[-]"});
    for (const auto& c : checks) t.AddRow(c.name, c.expected, c.got, c.tolerance, ToString(c.status));
    return t;
  }
};

inline CheckResult AbsoluteCheck(std::string name, double expected, double got, double tol) {
  const bool ok = std::isfinite(got) && std::abs(got - expected) <= tol;
  return {std::move(name), expected, got, tol, ok ? CheckStatus::kPass : CheckStatus::kFail};
}

// Sampled proportion against a reference probability.
inline CheckResult SampledCheck(std::string name, double expected, const EmpiricalEstimate& e) {
  const double tol = 3.0 * e.StandardErrorAt(expected);
  CheckResult c{std::move(name), expected, e.probability, tol, CheckStatus::kPass};
  if (std::abs(e.probability - expected) > tol + 1e-15) {
    const double half_width = 0.5 * (e.wilson95.upper - e.wilson95.lower);
    c.status = half_width > kWideIntervalHalfWidth ? CheckStatus::kInconclusive : CheckStatus::kFail;
  }
  return c;
}

inline CsvTable TraceToCsv(const std::vector<TraceRow>& trace) {
  CsvTable t({"time[s]", "distance[m]", "rssi[dBm]", "decision[-]", "interval_sum[dBm]",
              "verdict[-]"});
  for (const auto& r : trace) {
    t.AddRow(r.time, r.distance, r.rssi, r.decision, r.interval_sum, ToString(r.verdict));
  }
  return t;
}

namespace detail {

// Brute-force episode-level missed detection: all 2^x outcome sequences.
inline double EnumeratedPmd(int x, int x0, double pi_md) {
  double total = 0.0;
  for (std::uint32_t mask = 0; mask < (1u << x); ++mask) {
    const int hits = std::popcount(mask);
    if (hits < x0) total += std::pow(1.0 - pi_md, hits) * std::pow(pi_md, x - hits);
  }
  return total;
}

}  // namespace detail

inline void AddClosedFormChecks(const RunConfig& cfg, ValidationReport& report) {
  auto& out = report.checks;
  const CrowdLayout layout =
      CrowdLayout::DensestPacking(cfg.propagation.critical_distance, cfg.crowd_density);
  const PropagationConfig& prop = cfg.propagation;

  const std::vector<std::pair<int, double>> table4 = {{1, 0.12},   {6, 0.054},   {15, 0.034},
                                                      {30, 0.023}, {60, 0.014},  {120, 0.007},
                                                      {240, 0.002}, {480, 0.0003}};
  for (const auto& [n, want] : table4) {
    out.push_back(AbsoluteCheck("table4_pi_md_av_n" + std::to_string(n), want,
                                PiMdAverageLognormal(cfg.near, prop, layout, n),
                                n == 480 ? 0.0005 : 0.005));
  }

  const double spot = prop.critical_distance + 1.0 / std::sqrt(std::numbers::pi);
  out.push_back(AbsoluteCheck("pi_fa_n1_at_dc_plus_delta", 0.137,
                              PiFaLognormal(cfg.far, prop, 1, spot), 0.002));
  out.push_back(AbsoluteCheck("pi_fa_n3_at_dc_plus_delta", 0.029,
                              PiFaLognormal(cfg.far, prop, 3, spot), 0.001));

  out.push_back(AbsoluteCheck("shell_p_fa_n3", 0.413, TotalPfaShells(cfg.far, prop, 3), 0.01));
  out.push_back(AbsoluteCheck("shell_p_fa_n9", 0.009, TotalPfaShells(cfg.far, prop, 9), 0.002));

  const auto rows = PerformanceTable(cfg.near, cfg.far, prop, layout, {6, 15, 60}, {3, 5});
  const std::vector<double> ref_reduction = {0.16, 0.27, 0.12, 0.17, 0.04, 0.07};
  const std::vector<Rational> ref_rate = {{1, 50}, {1, 30}, {1, 20}, {1, 12}, {1, 5}, {1, 3}};
  const std::vector<std::pair<double, double>> ref_pfa = {{0.064, 0.005}, {0.0002, 0.0005},
                                                            {0.0, 1e-4}};
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& r = rows[i];
    const std::string cell = "n" + std::to_string(r.n) + "_x0_" + std::to_string(r.x0);
    out.push_back(AbsoluteCheck("table5_reduction_" + cell, ref_reduction[i], r.reduction, 0.02));
    CheckResult rate{"table5_rate_" + cell, ref_rate[i].value(), r.rate.value(), 0.0,
                     r.rate == ref_rate[i] ? CheckStatus::kPass : CheckStatus::kFail};
    out.push_back(rate);
    if (r.x0 == 3) {
      const auto [pfa, tol] = ref_pfa[i / 2];
      out.push_back(AbsoluteCheck("table5_p_fa_n" + std::to_string(r.n), pfa, r.p_fa, tol));
    }
  }

  const std::vector<std::pair<double, double>> limits = {{2, 0.25}, {4, 0.11}, {8, 0.05}, {12, 0.03}};
  for (const auto& [ratio, want] : limits) {
    out.push_back(AbsoluteCheck("table3_limit_r" + std::to_string(static_cast<int>(ratio)), want,
                                PfaTargetLargeX0Limit(ratio), 0.01));
  }
  {
    // The ratio-1 entry depends on x0; an exact solve at x0 = 30 is reported.
    const double got = SolvePfaTarget(cfg.k_y, 30, 30, cfg.quarantine_target).pi_fa;
    out.push_back({"table3_ratio1_x0_30", 0.93, got, 0.005, CheckStatus::kInfo});
  }

  {
    const double audio_av = CrowdAveragePiMd(
        [&](double r) { return PiMdAudio(cfg.audio_sigma, prop.critical_distance, r); }, layout);
    out.push_back(AbsoluteCheck("audio_pi_md_av", 0.016, audio_av, 0.002));
    const double ratio = DelayStd(cfg.audio, 12.0) / DelayStd(cfg.audio, 6.0);
    out.push_back({"delay_std_ratio_12db_6db", 0.425, ratio, 0.025,
                   ratio >= 0.40 && ratio <= 0.45 ? CheckStatus::kPass : CheckStatus::kFail});
  }

  {
    double worst = 0.0;
    for (int x = 0; x <= 12; ++x) {
      for (int x0 = 0; x0 <= x + 1; ++x0) {
        for (double p : {0.0, 0.03, 0.25, 0.5, 0.9, 1.0}) {
          worst = std::max(worst, std::abs(CombinedPmd(x, x0, p) - detail::EnumeratedPmd(x, x0, p)));
        }
      }
    }
    out.push_back(AbsoluteCheck("combined_pmd_enumeration", 0.0, worst, 1e-12));
  }
}

inline void AddRangingChecks(const RunConfig& cfg, std::uint64_t seed, ValidationReport& report) {
  std::mt19937_64 rng = RandomStream(seed, 0);
  std::uniform_real_distribution<double> delay(0.0, std::max(cfg.max_device_delay, 1e-12));
  std::uniform_real_distribution<double> offset(0.0, std::max(cfg.max_clock_offset, 1e-12));
  std::uniform_real_distribution<double> range(0.5, 5.0);
  double worst = 0.0;
  for (int i = 0; i < 1000; ++i) {
    DeviceTimingProfile a{delay(rng), delay(rng), 0.14 / cfg.audio.sound_speed, offset(rng), 0.0};
    DeviceTimingProfile b{delay(rng), delay(rng), 0.14 / cfg.audio.sound_speed, offset(rng), 0.0};
    const double d = range(rng);
    worst = std::max(worst, std::abs(TwoWayExchange(a, b, d, cfg.audio).distance - d));
  }
  report.checks.push_back(AbsoluteCheck("two_way_ranging_max_error_m", 0.0, worst, 1e-9));
}

inline void AddMonteCarloChecks(const RunConfig& cfg, std::uint64_t seed,
                                ValidationReport& report) {
  const std::int64_t trials = std::max<std::int64_t>(cfg.trials, kMinOracleTrials);
  const PropagationConfig& prop = cfg.propagation;
  const double inside = 1.5;
  const double outside = prop.critical_distance + 1.0 / std::sqrt(std::numbers::pi);
  std::uint64_t stream = 1;
  for (int n : {1, 3, 60}) {
    for (double d : {inside, outside}) {
      const bool near = d <= prop.critical_distance;
      const std::string where = near ? "d1.5" : "d2.5642";
      const double rice_cf = near ? PiMdRice(cfg.rice, prop, n, d) : PiFaRice(cfg.rice, prop, n, d);
      report.checks.push_back(SampledCheck(
          "mc_rice_n" + std::to_string(n) + "_" + where, rice_cf,
          EstimatePiEmpirical(cfg.rice, prop, n, d, trials, SplitMix64(seed + stream++))));
      const LognormalFading& ln = near ? cfg.near : cfg.far;
      const double ln_cf = near ? PiMdLognormal(ln, prop, n, d) : PiFaLognormal(ln, prop, n, d);
      report.checks.push_back(SampledCheck(
          "mc_lognormal_n" + std::to_string(n) + "_" + where, ln_cf,
          EstimatePiEmpirical(ln, prop, n, d, trials, SplitMix64(seed + stream++))));
    }
  }

  {
    const CrowdLayout layout = CrowdLayout::DensestPacking(prop.critical_distance, cfg.crowd_density);
    const std::int64_t per_radius = std::max<std::int64_t>(trials / layout.size(), kMinOracleTrials);
    const double got = EstimateCrowdPiMd(cfg.near, prop, layout, 1, per_radius,
                                         SplitMix64(seed + stream++));
    const double se = std::sqrt(0.12 * 0.88 / (per_radius * layout.size()));
    CheckResult c = AbsoluteCheck("mc_crowd_pi_md_av_n1", 0.12, got, 0.01);
    if (c.status == CheckStatus::kFail && 1.96 * se > kWideIntervalHalfWidth) {
      c.status = CheckStatus::kInconclusive;
    }
    report.checks.push_back(c);
  }

  {
    // Model C over a 15 minute contact at 1.5 m.
    const DecisionPolicy policy = DecisionPolicy::ModelC(60, 5);
    const Episode episode = Episode::Constant(inside, kExposureWindowSeconds);
    const std::int64_t episodes = std::max<std::int64_t>(trials / 100, kMinOracleTrials);
    const int x = static_cast<int>(kExposureWindowSeconds / policy.interval_seconds);
    const double expected = CombinedPmd(x, policy.x0, PiMdLognormal(cfg.near, prop, policy.n, inside));
    report.checks.push_back(SampledCheck(
        "mc_model_c_episode_pmd", expected,
        EstimateEpisodeErrorRate(episode, policy, cfg.near, prop, episodes, SplitMix64(seed + stream++))));
    auto rng = RandomStream(seed, stream++);
    report.example_trace = RunClassifier(episode, policy, cfg.near, prop, rng).trace;
  }
}

inline void AddDspChecks(const RunConfig& cfg, std::uint64_t seed, ValidationReport& report) {
  auto& out = report.checks;
  for (std::size_t i = 0; i < cfg.dsp_esn0_db.size(); ++i) {
    const double db = cfg.dsp_esn0_db[i];
    DspExperimentConfig ex;
    ex.esn0_db = db;
    ex.trials = cfg.dsp_trials;
    ex.nominal_delay_chips = cfg.dsp_nominal_delay_chips;
    ex.seed = SplitMix64(seed + 100 + i);
    ex.code_seed = cfg.dsp_code_seed;
    const DspExperimentResult r = RunDspExperiment(cfg.audio, cfg.dsp, ex);
    const std::string tag = "_" + FormatNumber(db) + "db";
    const double ratio = r.tracking.std / r.predicted_std;
    // The +/-15% target is stated at the 6 dB design point only.
    CheckResult std_check{"dsp_tracking_std_ratio" + tag, 1.0, ratio, 0.15, CheckStatus::kInfo};
    if (db == 6.0) {
      std_check.status = r.tracking.count < kMinDspTrialsForStd ? CheckStatus::kInconclusive
                         : std::abs(ratio - 1.0) <= 0.15   ? CheckStatus::kPass
                                                           : CheckStatus::kFail;
    }
    out.push_back(std_check);
    const double se = r.tracking.std / std::sqrt(std::max(r.tracking.count, 1));
    CheckResult bias{"dsp_tracking_bias_chips" + tag, 0.0, r.tracking.mean / cfg.audio.chip_duration,
                     2.0 * se / cfg.audio.chip_duration,
                     std::abs(r.tracking.mean) <= 2.0 * se ? CheckStatus::kPass : CheckStatus::kFail};
    if (bias.status == CheckStatus::kFail && r.tracking.count < kMinDspTrialsForStd) {
      bias.status = CheckStatus::kInconclusive;
    }
    out.push_back(bias);
    const ProportionInterval ci = WilsonInterval(r.acquired, r.trials);
    CheckResult acq{"dsp_acquisition_rate" + tag, 0.95, r.AcquisitionRate(), 0.0,
                    CheckStatus::kInfo};
    if (db == 6.0) {
      acq.status = r.AcquisitionRate() > 0.95 ? CheckStatus::kPass
                   : 0.5 * (ci.upper - ci.lower) > kWideAcquisitionHalfWidth
                       ? CheckStatus::kInconclusive
                       : CheckStatus::kFail;
    }
    out.push_back(acq);
    out.push_back({"dsp_wrong_peak_fraction" + tag, 0.0,
                   r.acquired ? static_cast<double>(r.wrong_peak) / r.acquired : 0.0, 0.0,
                   CheckStatus::kInfo});
  }

  {
    const int trials = std::max(cfg.dsp_trials, 1000);
    const FalseAcquisition fa =
        FalseAcquisitionRate(cfg.audio, cfg.dsp, trials, SplitMix64(seed + 200), cfg.dsp_code_seed);
    out.push_back({"dsp_false_acquisition_rate", 0.01, fa.Rate(), 0.0,
                   fa.Rate() < 0.01 ? CheckStatus::kPass : CheckStatus::kFail});
  }

  {
    // Two-path receptions: a weaker and a stronger echo 6 chips behind the
    // direct path. Both must leave the lock on the direct path.
    const RangingSignal ref = PrepareReference(cfg.audio, cfg.dsp, cfg.dsp_code_seed);
    const double tc = cfg.audio.chip_duration;
    const double direct = cfg.dsp.search_start + 4.3 * tc;
    double worst = 0.0;
    for (auto [a_direct, a_echo] : {std::pair{1.0, 0.8}, std::pair{0.8, 1.0}}) {
      ReceptionSpec spec;
      spec.paths = {{direct, a_direct, 0.4}, {direct + 6.0 * tc, a_echo, 2.1}};
      spec.duration = cfg.dsp.search_start + (cfg.dsp.search_window_chips + 2.0) * tc +
                      cfg.audio.SignalDuration();
      const CorrelationResult r =
          AcquireAndTrack(SynthesizeReception(ref.chips, cfg.audio, cfg.dsp, spec), ref, cfg.audio,
                          cfg.dsp);
      worst = std::max(worst, r.delay_estimate ? std::abs(*r.delay_estimate - direct) / tc : 1e9);
    }
    out.push_back(AbsoluteCheck("dsp_echo_lock_error_chips", 0.0, worst, 0.1));
  }
}

inline ValidationReport RunValidation(const RunConfig& cfg) {
  cfg.Validate();
  const std::uint64_t seed = cfg.RequireSeed();
  ValidationReport report;
  AddClosedFormChecks(cfg, report);
  AddRangingChecks(cfg, SplitMix64(seed ^ 0x52414E47ULL), report);
  AddMonteCarloChecks(cfg, seed, report);
  AddDspChecks(cfg, seed, report);
  return report;
}

}  // namespace proxtrace

#endif  // PROXTRACE_VALIDATION_HPP_
