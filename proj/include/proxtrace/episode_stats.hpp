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

// Accumulation of elementary decisions over a contact episode.
//
// n measurements are aggregated into an elementary decision; x0 positive
// elementary decisions within a day declare a Category 1 contact. This file
// turns per-decision error rates (pi_md, pi_fa) into episode-level
// missed-detection, spreading and undue-quarantine figures.

#ifndef PROXTRACE_EPISODE_STATS_HPP_
#define PROXTRACE_EPISODE_STATS_HPP_

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

#include "proxtrace/errors.hpp"
#include "proxtrace/numerics.hpp"
#include "proxtrace/propagation.hpp"

namespace proxtrace {

// Seconds in the accumulated-exposure window (15 minutes).
inline constexpr int kExposureWindowSeconds = 900;
// Quarter hours per day.
inline constexpr int kQuartersPerDay = 24 * 4;

enum class DecisionModel {
  kA,  // decision every 15 s, 60 positive decisions needed
  kB,  // single test, timer accumulates compatible time
  kC,  // RSSI summed over 3 or 5 minute intervals, 5 or 3 hits needed
};

inline const char* ToString(DecisionModel model) {
  switch (model) {
    case DecisionModel::kA: return "A";
    case DecisionModel::kB: return "B";
    case DecisionModel::kC: return "C";
  }
  return "?";
}

struct Rational {
  std::int64_t num = 0;
  std::int64_t den = 1;

  static Rational Reduced(std::int64_t num, std::int64_t den) {
    const std::int64_t g = std::gcd(num, den);
    return g == 0 ? Rational{0, 1} : Rational{num / g, den / g};
  }
  double value() const { return static_cast<double>(num) / static_cast<double>(den); }
  std::string ToString() const { return std::to_string(num) + "/" + std::to_string(den); }
  friend bool operator==(const Rational&, const Rational&) = default;
};

struct DecisionPolicy {
  DecisionModel model = DecisionModel::kC;
  int n = 60;                      // measurements per elementary decision
  int x0 = 5;                      // elementary decisions needed for C1
  double interval_seconds = 180.0;  // span of one elementary decision
  int x_max = kQuartersPerDay * 5;  // elementary decisions per day

  static DecisionPolicy ModelA(int n) {
    return {DecisionModel::kA, n, 60, 15.0, kQuartersPerDay * 60};
  }
  static DecisionPolicy ModelB(int n, double interval_seconds = 15.0) {
    return {DecisionModel::kB, n, 1, interval_seconds, kQuartersPerDay};
  }
  // x0 = 5 pairs with 3-minute intervals, x0 = 3 with 5-minute intervals.
  static DecisionPolicy ModelC(int n, int x0) {
    const double interval = x0 == 5 ? 180.0 : (x0 == 3 ? 300.0 : 0.0);
    DecisionPolicy p{DecisionModel::kC, n, x0, interval, kQuartersPerDay * x0};
    p.Validate();
    return p;
  }

  // Measurements per second, x0 n / 900.
  Rational MeasurementRate() const {
    return Rational::Reduced(static_cast<std::int64_t>(x0) * n, kExposureWindowSeconds);
  }

  void Validate() const {
    detail::Require<ConfigError>(n >= 1, "DecisionPolicy: n must be >= 1");
    detail::Require<ConfigError>(x0 >= 1, "DecisionPolicy: x0 must be >= 1");
    detail::Require<ConfigError>(x_max >= x0, "DecisionPolicy: x_max must be >= x0");
    detail::Require<ConfigError>(interval_seconds > 0.0,
                                 "DecisionPolicy: interval_seconds must be > 0");
    switch (model) {
      case DecisionModel::kA:
        detail::Require<ConfigError>(x0 == 60 && interval_seconds == 15.0,
                                     "Model A requires x0 = 60 and 15 s intervals");
        break;
      case DecisionModel::kB:
        detail::Require<ConfigError>(x0 == 1, "Model B requires x0 = 1");
        break;
      case DecisionModel::kC:
        detail::Require<ConfigError>((x0 == 5 && interval_seconds == 180.0) ||
                                         (x0 == 3 && interval_seconds == 300.0),
                                     "Model C requires x0 = 5 with 180 s or x0 = 3 with 300 s");
        break;
    }
  }
};

// Probability mass over a count. Used for p_X (elementary decisions inside
// the contact zone) and p_Y (radio contacts).
class CountDistribution {
 public:
  CountDistribution() = default;
  explicit CountDistribution(std::vector<double> pmf) : pmf_(std::move(pmf)) { Validate(); }

  static CountDistribution PointMass(int x) {
    detail::Require(x >= 0, "PointMass: x must be >= 0");
    std::vector<double> pmf(static_cast<std::size_t>(x) + 1, 0.0);
    pmf.back() = 1.0;
    return CountDistribution(std::move(pmf));
  }

  static CountDistribution Uniform(int lo, int hi) {
    detail::Require(0 <= lo && lo <= hi, "Uniform: need 0 <= lo <= hi");
    std::vector<double> pmf(static_cast<std::size_t>(hi) + 1, 0.0);
    for (int x = lo; x <= hi; ++x) pmf[x] = 1.0 / (hi - lo + 1);
    return CountDistribution(std::move(pmf));
  }

  // P(x) proportional to (1 - p)^(x - lo) on [lo, hi].
  static CountDistribution TruncatedGeometric(double p, int lo, int hi) {
    detail::Require(p > 0.0 && p < 1.0, "TruncatedGeometric: p must be in (0,1)");
    detail::Require(0 <= lo && lo <= hi, "TruncatedGeometric: need 0 <= lo <= hi");
    std::vector<double> pmf(static_cast<std::size_t>(hi) + 1, 0.0);
    double total = 0.0;
    for (int x = lo; x <= hi; ++x) total += pmf[x] = std::pow(1.0 - p, x - lo);
    for (double& v : pmf) v /= total;
    return CountDistribution(std::move(pmf));
  }

  int max_count() const { return static_cast<int>(pmf_.size()) - 1; }
  double operator()(int x) const {
    return x >= 0 && x < static_cast<int>(pmf_.size()) ? pmf_[x] : 0.0;
  }
  double Mean() const {
    double m = 0.0;
    for (std::size_t x = 0; x < pmf_.size(); ++x) m += x * pmf_[x];
    return m;
  }
  double TailMass(int from) const {
    double s = 0.0;
    for (int x = std::max(from, 0); x <= max_count(); ++x) s += pmf_[x];
    return s;
  }

 private:
  void Validate() const {
    detail::Require(!pmf_.empty(), "CountDistribution: empty pmf");
    double total = 0.0;
    for (double v : pmf_) {
      detail::Require(v >= 0.0 && std::isfinite(v), "CountDistribution: negative mass");
      total += v;
    }
    detail::Require(std::abs(total - 1.0) <= 1e-9, "CountDistribution: mass must sum to 1");
  }

  std::vector<double> pmf_;
};

using ContactTimeDistribution = CountDistribution;

struct ExposureDistribution {
  CountDistribution pmf;
  double k_y = 0.0;  // average number of radio contacts per day

  void Validate(double k_contacts = 0.0) const {
    detail::Require(k_y >= k_contacts, "ExposureDistribution: K_Y must be >= K");
  }
};

namespace detail {

inline void RequireProbability(double p, const char* what) {
  Require(p >= 0.0 && p <= 1.0, std::string(what) + " must lie in [0,1]");
}

}  // namespace detail

// Episode-level missed detection after x elementary decisions inside the
// contact zone: fewer than x0 of them succeed.
inline double CombinedPmd(int x, int x0, double pi_md) {
  detail::Require(x >= 0, "CombinedPmd: x must be >= 0");
  detail::Require(x0 >= 0, "CombinedPmd: x0 must be >= 0");
  detail::RequireProbability(pi_md, "CombinedPmd: pi_md");
  if (x < x0) return 1.0;
  double sum = 0.0;
  for (int m = 0; m <= std::min(x0 - 1, x); ++m) sum += BinomialPmf(x, m, 1.0 - pi_md);
  return ClampProbability(sum);
}

struct SpreadingEstimate {
  double probability = 0.0;      // K p_i sum_x p_X(x) p_md(x)
  double dominant_term = 0.0;    // m = x0 - 1 term only
  double dominant_bound = 0.0;   // factorial bound on the dominant term
  double no_tracing = 0.0;       // p_C1 = K p_i sum_{x >= x0} p_X(x)
};

// Probability that a person spreads the disease despite tracing.
inline SpreadingEstimate SpreadingProbability(double k_contacts, double p_infected,
                                              const ContactTimeDistribution& px,
                                              const DecisionPolicy& policy, double pi_md) {
  detail::Require(k_contacts >= 0.0, "SpreadingProbability: K must be >= 0");
  detail::RequireProbability(p_infected, "SpreadingProbability: p_i");
  detail::RequireProbability(pi_md, "SpreadingProbability: pi_md");
  const int x0 = policy.x0;
  const int x_hi = std::min(policy.x_max, px.max_count());
  const double scale = k_contacts * p_infected;
  SpreadingEstimate out;
  double sum = 0.0;
  double dominant = 0.0;
  double bound = 0.0;
  double tail = 0.0;
  const double pi_d = 1.0 - pi_md;
  for (int x = x0; x <= x_hi; ++x) {
    const double w = px(x);
    if (w == 0.0) continue;
    tail += w;
    sum += w * CombinedPmd(x, x0, pi_md);
    // x' = x - x0 + 1 extra decisions, all missed.
    const int extra = x - x0 + 1;
    dominant += w * BinomialPmf(x, x0 - 1, pi_d);
    if (pi_md > 0.0) {
      bound += w * std::pow(pi_d, x0 - 1) *
               std::exp(extra * std::log(x0 * pi_md) - std::lgamma(extra + 1.0));
    }
  }
  out.probability = scale * sum;
  out.dominant_term = scale * dominant;
  out.dominant_bound = scale * bound;
  out.no_tracing = scale * tail;
  return out;
}

// x0 pi_md: the factor by which tracing reduces spreading.
inline double ReductionFactor(const DecisionPolicy& policy, double pi_md_av) {
  return policy.x0 * pi_md_av;
}

// Probability that y radio contacts to someone produce a false C1 verdict:
// m < x0 correct decisions during the x contact-zone decisions plus at least
// x0 - m erroneous ones among the y - x others. Terms with x > y are skipped.
inline double FalseAlarmGivenExposure(int y, int x0, const ContactTimeDistribution& px,
                                      double pi_md, double pi_fa) {
  detail::Require(y >= 0, "FalseAlarmGivenExposure: y must be >= 0");
  detail::Require(x0 >= 1, "FalseAlarmGivenExposure: x0 must be >= 1");
  detail::RequireProbability(pi_md, "FalseAlarmGivenExposure: pi_md");
  detail::RequireProbability(pi_fa, "FalseAlarmGivenExposure: pi_fa");
  if (y < x0) return 0.0;
  double total = 0.0;
  for (int x = 0; x <= std::min(px.max_count(), y); ++x) {
    const double w = px(x);
    if (w == 0.0) continue;
    double inner = 0.0;
    for (int m = 0; m <= std::min(x, x0 - 1); ++m) {
      const double p_m = BinomialPmf(x, m, 1.0 - pi_md);
      if (p_m == 0.0) continue;
      double tail = 0.0;
      for (int q = x0 - m; q <= y - x; ++q) tail += BinomialPmf(y - x, q, pi_fa);
      inner += p_m * tail;
    }
    total += w * inner;
  }
  return ClampProbability(total);
}

// Expected number of people unduly sent to quarantine.
inline double ExpectedQuarantines(const ExposureDistribution& py, const ContactTimeDistribution& px,
                                  double p_infected, const DecisionPolicy& policy, double pi_md,
                                  double pi_fa) {
  detail::RequireProbability(p_infected, "ExpectedQuarantines: p_i");
  double sum = 0.0;
  const int y_hi = std::min(policy.x_max, py.pmf.max_count());
  for (int y = policy.x0; y <= y_hi; ++y) {
    const double w = py.pmf(y);
    if (w == 0.0) continue;
    sum += w * FalseAlarmGivenExposure(y, policy.x0, px, pi_md, pi_fa);
  }
  return py.k_y * p_infected * sum;
}

struct PfaTarget {
  double pi_fa = 0.0;
  bool capped = false;  // no root in (0,1); pi_fa reported as 1
};

// Tolerable per-decision false-alarm rate: solves K_Y C(y, x0) pi^x0 = target.
inline PfaTarget SolvePfaTarget(double k_y, int y, int x0, double target,
                                const Tolerance& tol = {1e-14, 1e-12, 200}) {
  detail::Require(x0 >= 1 && y >= x0, "SolvePfaTarget: need y >= x0 >= 1");
  detail::Require(target > 0.0, "SolvePfaTarget: target must be > 0");
  detail::Require(k_y > 0.0, "SolvePfaTarget: K_Y must be > 0");
  const double log_scale = std::log(k_y) + LogBinomial(y, x0);
  // Work with log(K_Y C) + x0 log(pi) - log(target) to stay finite for big y.
  auto f = [&](double p) {
    if (p <= 0.0) return -std::numeric_limits<double>::infinity();
    return log_scale + x0 * std::log(p) - std::log(target);
  };
  if (f(1.0) <= 0.0) return {1.0, f(1.0) < 0.0};
  const double lo = std::exp((std::log(target) - log_scale) / x0) * 0.5;
  return {FindRoot(f, std::min(lo, 0.5), 1.0, tol), false};
}

// Limit of the solution above for x0 -> infinity at fixed y / x0 = ratio:
// (r - 1)^(r - 1) / r^r. Equals 1 at r = 1.
inline double PfaTargetLargeX0Limit(double ratio) {
  detail::Require(ratio >= 1.0, "PfaTargetLargeX0Limit: ratio must be >= 1");
  if (ratio == 1.0) return 1.0;
  return std::exp((ratio - 1.0) * std::log(ratio - 1.0) - ratio * std::log(ratio));
}

struct PerformanceRow {
  int n = 0;
  int x0 = 0;
  double pi_md_av = 0.0;
  double reduction = 0.0;  // x0 pi_md_av
  double p_fa = 0.0;       // shell-product total false alarm
  Rational rate;           // measurements per second
};

inline double PiMdAverageLognormal(const LognormalFading& fading, const PropagationConfig& cfg,
                                   const CrowdLayout& layout, int n) {
  return CrowdAveragePiMd([&](double r) { return PiMdLognormal(fading, cfg, n, r); }, layout);
}

// Model C performance grid. `near` drives missed detection, `far` the
// false-alarm shells.
inline std::vector<PerformanceRow> PerformanceTable(const LognormalFading& near,
                                                    const LognormalFading& far,
                                                    const PropagationConfig& cfg,
                                                    const CrowdLayout& layout,
                                                    const std::vector<int>& n_values,
                                                    const std::vector<int>& x0_values) {
  std::vector<PerformanceRow> rows;
  for (int n : n_values) {
    const double pi_md_av = PiMdAverageLognormal(near, cfg, layout, n);
    const double p_fa = TotalPfaShells(far, cfg, n);
    for (int x0 : x0_values) {
      DecisionPolicy policy = DecisionPolicy::ModelC(n, x0);
      rows.push_back({n, x0, pi_md_av, ReductionFactor(policy, pi_md_av), p_fa,
                      policy.MeasurementRate()});
    }
  }
  return rows;
}

}  // namespace proxtrace

#endif  // PROXTRACE_EPISODE_STATS_HPP_
