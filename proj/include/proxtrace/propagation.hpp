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

// Bluetooth RSSI propagation model and per-decision error probabilities.
//
// Received power follows P_RX = gamma * P_TX / d^nu, i.e. on the dB scale
//   RSSI = 10 log P_TX - nu * 10 log d + eta,   eta = 10 log gamma.
// A single elementary decision declares "inside the contact zone" when the
// (aggregated) RSSI exceeds the threshold placed at the critical distance d_c.
// Missed-detection probabilities are defined for d <= d_c, false-alarm
// probabilities for d >= d_c.

#ifndef PROXTRACE_PROPAGATION_HPP_
#define PROXTRACE_PROPAGATION_HPP_

#include <cmath>
#include <functional>
#include <numbers>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "proxtrace/errors.hpp"
#include "proxtrace/numerics.hpp"

namespace proxtrace {

struct PropagationConfig {
  double tx_power_dbm = 0.0;        // 10 log P_TX
  double path_loss_exponent = 2.0;  // nu; 2 is free space
  double critical_distance = 2.0;   // d_c in meters

  void Validate() const {
    detail::Require<ConfigError>(std::isfinite(tx_power_dbm), "tx_power_dbm must be finite");
    detail::Require<ConfigError>(path_loss_exponent >= 1.0, "path_loss_exponent must be >= 1");
    detail::Require<ConfigError>(critical_distance > 0.0, "critical_distance must be > 0");
  }
};

// Rice fading: the power gain gamma is non-central chi-squared with two
// degrees of freedom, non-centrality gamma_r and per-axis variance sigma_r_sq.
// Both are in the same power unit (picowatts for the fitted values).
struct RiceFading {
  double gamma_r = 247.0;
  double sigma_r_sq = 9.15;

  double MeanPower() const { return gamma_r + 2.0 * sigma_r_sq; }
  double SigmaR() const { return std::sqrt(sigma_r_sq); }

  void Validate() const {
    detail::Require<ConfigError>(gamma_r > 0.0, "RiceFading: gamma_r must be > 0");
    detail::Require<ConfigError>(sigma_r_sq > 0.0, "RiceFading: sigma_r_sq must be > 0");
  }
};

// Lognormal shadowing: eta ~ N(eta_l, sigma_l^2) in dB. The probabilities
// below do not depend on eta_l (it cancels against the threshold); it is kept
// for RSSI synthesis.
struct LognormalFading {
  double sigma_l = 1.60;
  double eta_l = 0.0;

  void Validate() const {
    detail::Require<ConfigError>(sigma_l > 0.0 && std::isfinite(sigma_l),
                                 "LognormalFading: sigma_l must be > 0");
    detail::Require<ConfigError>(std::isfinite(eta_l), "LognormalFading: eta_l must be finite");
  }
};

using FadingModel = std::variant<RiceFading, LognormalFading>;

// Fitted parameters: Rice at 2 m, lognormal at 2 m (missed detection side)
// and at 4 m (false-alarm side).
inline constexpr double kLognormalSigmaNear = 1.60;
inline constexpr double kLognormalSigmaFar = 1.97;

// Densest packing of a crowd around the reference user: with `density`
// persons per square meter the m-th neighbour sits at sqrt(m / (pi density)).
class CrowdLayout {
 public:
  static CrowdLayout DensestPacking(double critical_distance, double density = 1.0) {
    detail::Require(critical_distance > 0.0, "CrowdLayout: critical_distance must be > 0");
    detail::Require(density > 0.0, "CrowdLayout: density must be > 0");
    std::vector<double> radii;
    for (int m = 1;; ++m) {
      const double r = std::sqrt(m / (std::numbers::pi * density));
      if (r > critical_distance) break;
      radii.push_back(r);
    }
    return CrowdLayout(std::move(radii), critical_distance);
  }

  CrowdLayout(std::vector<double> radii, double critical_distance)
      : radii_(std::move(radii)), critical_distance_(critical_distance) {
    for (std::size_t i = 1; i < radii_.size(); ++i) {
      detail::Require(radii_[i] > radii_[i - 1], "CrowdLayout: radii must be strictly increasing");
    }
    detail::Require(radii_.empty() || radii_.back() <= critical_distance_,
                    "CrowdLayout: radii must not exceed the critical distance");
  }

  std::span<const double> radii() const { return radii_; }
  int size() const { return static_cast<int>(radii_.size()); }
  bool empty() const { return radii_.empty(); }
  double critical_distance() const { return critical_distance_; }

 private:
  std::vector<double> radii_;
  double critical_distance_;
};

inline double ExpectedRssi(const PropagationConfig& cfg, double distance, double mean_eta = 0.0) {
  detail::Require(distance > 0.0, "ExpectedRssi: distance must be > 0");
  return cfg.tx_power_dbm - cfg.path_loss_exponent * 10.0 * std::log10(distance) + mean_eta;
}

// Threshold Theta: the expected RSSI at the critical distance.
inline double DecisionThreshold(const PropagationConfig& cfg, double mean_eta) {
  return cfg.tx_power_dbm - cfg.path_loss_exponent * 10.0 * std::log10(cfg.critical_distance) +
         mean_eta;
}

namespace detail {

inline void RequireInside(const PropagationConfig& cfg, double d, const char* what) {
  Require(d > 0.0 && d <= cfg.critical_distance,
          std::string(what) + ": distance must lie in (0, d_c]");
}

inline void RequireOutside(const PropagationConfig& cfg, double d, const char* what) {
  Require(d >= cfg.critical_distance && std::isfinite(d),
          std::string(what) + ": distance must be >= d_c");
}

// Marcum arguments for n summed Rice powers compared against the summed mean
// power at d_c scaled to distance d.
inline std::pair<double, double> RiceMarcumArguments(const RiceFading& f,
                                                     const PropagationConfig& cfg, int n,
                                                     double d) {
  const double sigma = f.SigmaR();
  const double gamma_c = n * f.MeanPower();
  const double a = std::sqrt(n * f.gamma_r) / sigma;
  const double b =
      std::sqrt(gamma_c) * std::pow(d / cfg.critical_distance, 0.5 * cfg.path_loss_exponent) / sigma;
  return {a, b};
}

}  // namespace detail

// Missed detection for n summed Rice power measurements at d <= d_c:
//   1 - Q_n(sqrt(n gamma_R) / sigma_R, sqrt(gamma_c) (d/d_c)^(nu/2) / sigma_R),
// gamma_c = n (gamma_R + 2 sigma_R^2).
inline double PiMdRice(const RiceFading& fading, const PropagationConfig& cfg, int n, double d) {
  detail::Require(n >= 1, "PiMdRice: n must be >= 1");
  detail::RequireInside(cfg, d, "PiMdRice");
  const auto [a, b] = detail::RiceMarcumArguments(fading, cfg, n, d);
  return ClampProbability(1.0 - MarcumQ(n, a, b));
}

// False alarm for the same power-sum detector at d >= d_c.
inline double PiFaRice(const RiceFading& fading, const PropagationConfig& cfg, int n, double d) {
  detail::Require(n >= 1, "PiFaRice: n must be >= 1");
  detail::RequireOutside(cfg, d, "PiFaRice");
  const auto [a, b] = detail::RiceMarcumArguments(fading, cfg, n, d);
  return MarcumQ(n, a, b);
}

// False alarm when n RSSI values (dB) are summed: Q(sqrt(n) nu 10 log(d/d_c) / sigma_L).
inline double PiFaLognormal(const LognormalFading& fading, const PropagationConfig& cfg, int n,
                            double d) {
  detail::Require(n >= 1, "PiFaLognormal: n must be >= 1");
  detail::RequireOutside(cfg, d, "PiFaLognormal");
  const double margin_db = cfg.path_loss_exponent * 10.0 * std::log10(d / cfg.critical_distance);
  return GaussianQ(std::sqrt(static_cast<double>(n)) * margin_db / fading.sigma_l);
}

// Missed detection, mirror image of PiFaLognormal: PiFaLognormal(n, d_c^2 / d).
inline double PiMdLognormal(const LognormalFading& fading, const PropagationConfig& cfg, int n,
                            double d) {
  detail::Require(n >= 1, "PiMdLognormal: n must be >= 1");
  detail::RequireInside(cfg, d, "PiMdLognormal");
  const double margin_db = cfg.path_loss_exponent * 10.0 * std::log10(cfg.critical_distance / d);
  return GaussianQ(std::sqrt(static_cast<double>(n)) * margin_db / fading.sigma_l);
}

// Average of a missed-detection curve over the crowd layout.
template <typename Curve>
double CrowdAveragePiMd(Curve&& curve, const CrowdLayout& layout) {
  detail::Require(!layout.empty(), "CrowdAveragePiMd: empty layout");
  double sum = 0.0;
  for (double r : layout.radii()) sum += curve(r);
  return sum / layout.size();
}

// Persons in the k-th annulus [d_c + 2 delta k, d_c + 2 delta (k+1)] and the
// distance at which they are evaluated (the annulus midpoint).
struct Shell {
  int index = 0;
  double distance = 0.0;
  double occupancy = 0.0;
};

inline Shell ShellAt(int k, double critical_distance, double density = 1.0) {
  const double delta = 1.0 / std::sqrt(std::numbers::pi * density);
  const double inner = critical_distance + 2.0 * delta * k;
  const double outer = inner + 2.0 * delta;
  return {k, critical_distance + delta * (2.0 * k + 1.0),
          density * std::numbers::pi * (outer * outer - inner * inner)};
}

inline constexpr double kShellContributionCutoff = 1e-12;

// Probability that at least one person outside the contact zone triggers a
// false alarm: 1 - prod_k (1 - pi_fa(d_k))^occupancy(k). Shells are added
// until a shell contributes less than 1e-12 to -log(1 - p_fa) or max_shells
// is reached.
template <typename Curve>
double TotalPfaShells(Curve&& pi_fa_curve, double critical_distance, int max_shells,
                      double density = 1.0) {
  detail::Require(max_shells >= 1, "TotalPfaShells: max_shells must be >= 1");
  double log_no_alarm = 0.0;
  for (int k = 0; k < max_shells; ++k) {
    const Shell shell = ShellAt(k, critical_distance, density);
    const double p = pi_fa_curve(shell.distance);
    if (p >= 1.0) return 1.0;
    const double contribution = -shell.occupancy * std::log1p(-p);
    log_no_alarm -= contribution;
    if (contribution < kShellContributionCutoff) break;
  }
  return ClampProbability(-std::expm1(log_no_alarm));
}

inline double TotalPfaShells(const LognormalFading& fading, const PropagationConfig& cfg, int n,
                             int max_shells = 10000) {
  return TotalPfaShells(
      [&](double d) { return PiFaLognormal(fading, cfg, n, d); }, cfg.critical_distance,
      max_shells);
}

}  // namespace proxtrace

#endif  // PROXTRACE_PROPAGATION_HPP_
