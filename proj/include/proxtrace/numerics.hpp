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

// Special functions and small numeric utilities shared by every closed form:
// the Gaussian tail Q, modified Bessel functions I_n, the generalized Marcum
// Q-function, the non-central chi-squared law, a bracketing root finder and
// adaptive quadrature.
//
// All functions are pure and safe to call concurrently.

#ifndef PROXTRACE_NUMERICS_HPP_
#define PROXTRACE_NUMERICS_HPP_

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <string>
#include <utility>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/special_functions/gamma.hpp>
#include <boost/math/tools/toms748_solve.hpp>

#include "proxtrace/errors.hpp"

namespace proxtrace {

struct Tolerance {
  double abs_tol = 1e-10;
  double rel_tol = 1e-10;
  int max_iter = 200;

  void Validate() const {
    detail::Require<ConfigError>(abs_tol > 0.0, "Tolerance: abs_tol must be > 0");
    detail::Require<ConfigError>(rel_tol > 0.0, "Tolerance: rel_tol must be > 0");
    detail::Require<ConfigError>(max_iter >= 1, "Tolerance: max_iter must be >= 1");
  }
};

inline constexpr double kProbabilityEpsilon = 1e-15;

// Snaps round-off excursions back into [0, 1]. Values further than
// kProbabilityEpsilon outside the interval are still clamped; callers that
// care about gross errors check before calling.
inline double ClampProbability(double p) {
  if (std::isnan(p)) return p;
  if (p < kProbabilityEpsilon && p > -kProbabilityEpsilon) return std::max(p, 0.0);
  return std::clamp(p, 0.0, 1.0);
}

// Q(x) = P(N(0,1) > x) = erfc(x / sqrt(2)) / 2.
inline double GaussianQ(double x) {
  detail::Require(std::isfinite(x), "GaussianQ: argument must be finite");
  return 0.5 * std::erfc(x / std::numbers::sqrt2);
}

// log I_order(x) for x >= 0, summed as a positive series in log space so that
// it neither overflows nor loses precision for large arguments.
inline double LogBesselI(int order, double x) {
  detail::Require(order >= 0, "BesselI: order must be >= 0");
  detail::Require(x >= 0.0 && std::isfinite(x), "BesselI: x must be finite and >= 0");
  if (x == 0.0) {
    return order == 0 ? 0.0 : -std::numeric_limits<double>::infinity();
  }
  const double nu = order;
  const double log_half_x = std::log(0.5 * x);
  auto log_term = [&](double k) {
    return (2.0 * k + nu) * log_half_x - std::lgamma(k + 1.0) - std::lgamma(k + nu + 1.0);
  };
  // Index of the largest term: ratio t_{k+1}/t_k = (x/2)^2 / ((k+1)(k+1+nu)).
  const double k_peak = std::max(0.0, std::floor(0.5 * (-nu - 2.0 + std::sqrt(nu * nu + x * x))));
  const double log_peak = log_term(k_peak);
  double sum = 1.0;
  for (double k = k_peak + 1.0;; k += 1.0) {
    const double t = std::exp(log_term(k) - log_peak);
    sum += t;
    if (t < 1e-17 * sum) break;
  }
  for (double k = k_peak - 1.0; k >= 0.0; k -= 1.0) {
    const double t = std::exp(log_term(k) - log_peak);
    sum += t;
    if (t < 1e-17 * sum) break;
  }
  return log_peak + std::log(sum);
}

// exp(-x) * I_order(x); finite for every x >= 0.
inline double BesselIScaled(int order, double x) {
  return std::exp(LogBesselI(order, x) - x);
}

// Overflows past log I ~ 709 (x around 713 for order 0); use BesselIScaled or
// LogBesselI there.
inline constexpr double kBesselLogCutoff = 709.0;

inline double BesselI(int order, double x) {
  const double log_value = LogBesselI(order, x);
  if (log_value > kBesselLogCutoff) {
    throw RangeError("BesselI: I_" + std::to_string(order) + "(" + std::to_string(x) +
                     ") overflows double; use BesselIScaled");
  }
  return std::exp(log_value);
}

// Adaptive Gauss-Kronrod (7/15) quadrature. Infinite limits are supported.
// Throws ConvergenceError when the error estimate stays above
// max(abs_tol, rel_tol * |integral|).
template <typename F>
double Integrate(F&& f, double lo, double hi, const Tolerance& tol = {}) {
  tol.Validate();
  double error = 0.0;
  double l1 = 0.0;
  const unsigned max_depth = static_cast<unsigned>(std::clamp(tol.max_iter / 10, 10, 30));
  const double value = boost::math::quadrature::gauss_kronrod<double, 15>::integrate(
      f, lo, hi, max_depth, tol.rel_tol, &error, &l1);
  if (!(error <= std::max(tol.abs_tol, tol.rel_tol * l1))) {
    throw ConvergenceError("Integrate: error estimate " + std::to_string(error) +
                           " above tolerance");
  }
  return value;
}

// Bracketing root finder (TOMS 748). f(lo) and f(hi) must not have the same
// strict sign.
template <typename F>
double FindRoot(F&& f, double lo, double hi, const Tolerance& tol = {}) {
  tol.Validate();
  detail::Require(lo <= hi, "FindRoot: lo must not exceed hi");
  const double f_lo = f(lo);
  const double f_hi = f(hi);
  if (f_lo == 0.0) return lo;
  if (f_hi == 0.0) return hi;
  if (!(f_lo * f_hi < 0.0)) {
    throw BracketError("FindRoot: no sign change on [" + std::to_string(lo) + ", " +
                       std::to_string(hi) + "]");
  }
  auto narrow = [&tol](double a, double b) {
    return std::abs(b - a) <= std::max(tol.abs_tol, tol.rel_tol * std::min(std::abs(a), std::abs(b)));
  };
  std::uintmax_t iterations = static_cast<std::uintmax_t>(tol.max_iter);
  const auto bracket =
      boost::math::tools::toms748_solve(f, lo, hi, f_lo, f_hi, narrow, iterations);
  const double root = 0.5 * (bracket.first + bracket.second);
  if (!narrow(bracket.first, bracket.second) && std::abs(f(root)) > tol.abs_tol) {
    throw ConvergenceError("FindRoot: max_iter exceeded");
  }
  return root;
}

// Binomial coefficients. Exact products up to n = 60, log-gamma above.
inline double LogBinomial(int n, int k) {
  detail::Require(n >= 0 && k >= 0 && k <= n, "LogBinomial: need 0 <= k <= n");
  return std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0);
}

inline constexpr int kExactBinomialLimit = 60;

inline double Binomial(int n, int k) {
  detail::Require(n >= 0 && k >= 0 && k <= n, "Binomial: need 0 <= k <= n");
  if (n > kExactBinomialLimit) return std::exp(LogBinomial(n, k));
  k = std::min(k, n - k);
  double c = 1.0;
  for (int i = 1; i <= k; ++i) c = c * (n - k + i) / i;
  return std::round(c);
}

// P(Binomial(n, p) = k).
inline double BinomialPmf(int n, int k, double p) {
  detail::Require(p >= 0.0 && p <= 1.0, "BinomialPmf: p outside [0,1]");
  if (k < 0 || k > n) return 0.0;
  if (p == 0.0) return k == 0 ? 1.0 : 0.0;
  if (p == 1.0) return k == n ? 1.0 : 0.0;
  if (n <= kExactBinomialLimit) {
    return Binomial(n, k) * std::pow(p, k) * std::pow(1.0 - p, n - k);
  }
  return std::exp(LogBinomial(n, k) + k * std::log(p) + (n - k) * std::log1p(-p));
}

namespace detail {

// Q_M(a, b) = integral_b^inf x (x/a)^(M-1) exp(-(x^2+a^2)/2) I_{M-1}(a x) dx.
inline double MarcumQQuadrature(int order, double a, double b) {
  const double m1 = order - 1.0;
  auto log_density = [&](double x) {
    if (x <= 0.0) return -std::numeric_limits<double>::infinity();
    if (a == 0.0) {
      return (2.0 * m1 + 1.0) * std::log(x) - 0.5 * x * x - m1 * std::numbers::ln2 -
             std::lgamma(order);
    }
    return std::log(x) + m1 * std::log(x / a) - 0.5 * (x - a) * (x - a) +
           (LogBesselI(order - 1, a * x) - a * x);
  };
  auto density = [&](double x) { return std::exp(log_density(x)); };
  Tolerance tol{1e-13, 1e-11, 150};
  // The density is a bump of width about one around sqrt(a^2 + 2M). Mapping
  // it onto an infinite interval makes the adaptive rule subdivide without
  // end, so integrate the shorter side over a finite window instead.
  const double centre = std::sqrt(a * a + 2.0 * order);
  const double half_width = 40.0 + 2.0 * std::sqrt(static_cast<double>(order));
  if (b < centre) {
    const double lo = std::max(0.0, centre - half_width);
    if (b <= lo) return 1.0;
    return ClampProbability(1.0 - Integrate(density, lo, b, tol));
  }
  const double hi = centre + half_width;
  if (b >= hi) return 0.0;
  return ClampProbability(Integrate(density, b, hi, tol));
}

}  // namespace detail

// Generalized Marcum Q-function Q_M(a, b): the probability that a
// non-central chi-squared variable with 2M degrees of freedom and
// non-centrality a^2 exceeds b^2.
//
// Evaluated as the Poisson mixture of central chi-squared tails (the Bessel
// series regrouped by Poisson weight), summed outward from the Poisson mode.
// Falls back to quadrature of the density when the mixture would need an
// excessive number of terms.
inline double MarcumQ(int order, double a, double b) {
  detail::Require(order >= 1, "MarcumQ: order must be >= 1");
  detail::Require(std::isfinite(a) && std::isfinite(b), "MarcumQ: arguments must be finite");
  detail::Require(a >= 0.0 && b >= 0.0, "MarcumQ: a and b must be >= 0");
  if (b == 0.0) return 1.0;
  const double lambda = 0.5 * a * a;
  const double x = 0.5 * b * b;
  if (lambda == 0.0) return ClampProbability(boost::math::gamma_q(static_cast<double>(order), x));

  constexpr double kMaxTerms = 200000.0;
  if (8.0 * std::sqrt(lambda) + 50.0 > kMaxTerms) {
    return detail::MarcumQQuadrature(order, a, b);
  }
  auto log_poisson = [lambda](double j) {
    return -lambda + j * std::log(lambda) - std::lgamma(j + 1.0);
  };
  auto term = [&](double j) {
    return std::exp(log_poisson(j)) * boost::math::gamma_q(order + j, x);
  };
  const double mode = std::floor(lambda);
  double sum = term(mode);
  double weight_seen = std::exp(log_poisson(mode));
  for (double j = mode + 1.0;; j += 1.0) {
    const double w = std::exp(log_poisson(j));
    sum += w * boost::math::gamma_q(order + j, x);
    weight_seen += w;
    if (w < 1e-18 && j > lambda + 1.0) break;
    if (j - mode > kMaxTerms) return detail::MarcumQQuadrature(order, a, b);
  }
  for (double j = mode - 1.0; j >= 0.0; j -= 1.0) {
    const double w = std::exp(log_poisson(j));
    sum += w * boost::math::gamma_q(order + j, x);
    weight_seen += w;
    if (w < 1e-18) break;
  }
  // Every Poisson weight has been accounted for up to ~1e-16.
  if (std::abs(weight_seen - 1.0) > 1e-9) return detail::MarcumQQuadrature(order, a, b);
  return ClampProbability(sum);
}

// Non-central chi-squared law with `dof` (even) degrees of freedom.
inline double NoncentralChiSquaredCdf(double x, int dof, double noncentrality) {
  detail::Require(dof >= 2 && dof % 2 == 0, "NoncentralChiSquaredCdf: dof must be even and >= 2");
  detail::Require(noncentrality >= 0.0, "NoncentralChiSquaredCdf: noncentrality must be >= 0");
  if (x <= 0.0) return 0.0;
  return ClampProbability(1.0 - MarcumQ(dof / 2, std::sqrt(noncentrality), std::sqrt(x)));
}

inline double NoncentralChiSquaredPdf(double x, int dof, double noncentrality) {
  detail::Require(dof >= 2 && dof % 2 == 0, "NoncentralChiSquaredPdf: dof must be even and >= 2");
  detail::Require(noncentrality >= 0.0, "NoncentralChiSquaredPdf: noncentrality must be >= 0");
  if (x <= 0.0) return 0.0;
  const int n = dof / 2;
  if (noncentrality == 0.0) {
    return std::exp((n - 1.0) * std::log(x) - 0.5 * x - n * std::numbers::ln2 - std::lgamma(n));
  }
  const double z = std::sqrt(noncentrality * x);
  return 0.5 * std::exp(-0.5 * (x + noncentrality) + 0.5 * (n - 1.0) * std::log(x / noncentrality) +
                        LogBesselI(n - 1, z));
}

struct ProportionInterval {
  double lower = 0.0;
  double upper = 1.0;
};

// Wilson score interval; z = 1.96 gives 95 %.
inline ProportionInterval WilsonInterval(std::int64_t successes, std::int64_t trials,
                                         double z = 1.959963984540054) {
  detail::Require(trials > 0 && successes >= 0 && successes <= trials,
                  "WilsonInterval: need 0 <= successes <= trials, trials > 0");
  const double n = static_cast<double>(trials);
  const double p = successes / n;
  const double z2 = z * z;
  const double centre = (p + z2 / (2.0 * n)) / (1.0 + z2 / n);
  const double half = z * std::sqrt(p * (1.0 - p) / n + z2 / (4.0 * n * n)) / (1.0 + z2 / n);
  return {std::max(0.0, centre - half), std::min(1.0, centre + half)};
}

}  // namespace proxtrace

#endif  // PROXTRACE_NUMERICS_HPP_
