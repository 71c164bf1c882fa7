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

#include "proxtrace/numerics.hpp"

#include <cmath>
#include <limits>
#include <numbers>

#include <gtest/gtest.h>

namespace proxtrace {
namespace {

// Plain power series for I_nu(x), fine for moderate x.
double NaiveBesselI(int nu, double x) {
  double term = std::pow(0.5 * x, nu) / std::tgamma(nu + 1.0);
  double sum = term;
  for (int k = 1; k < 400; ++k) {
    term *= 0.25 * x * x / (k * static_cast<double>(k + nu));
    sum += term;
    if (term < 1e-18 * sum) break;
  }
  return sum;
}

// Composite Simpson rule on the Marcum integrand, used as an oracle.
double SimpsonMarcum(int m, double a, double b) {
  auto f = [&](double x) {
    return x * std::pow(x / a, m - 1) * std::exp(-0.5 * (x * x + a * a)) *
           NaiveBesselI(m - 1, a * x);
  };
  const double hi = a + b + 40.0;
  const int steps = 200000;
  const double h = (hi - b) / steps;
  double s = f(b) + f(hi);
  for (int i = 1; i < steps; ++i) s += f(b + i * h) * (i % 2 ? 4.0 : 2.0);
  return s * h / 3.0;
}

TEST(GaussianQTest, KnownValuesAndSymmetry) {
  EXPECT_DOUBLE_EQ(GaussianQ(0.0), 0.5);
  EXPECT_NEAR(GaussianQ(1.0), 0.15865525393145707, 1e-15);
  EXPECT_NEAR(GaussianQ(3.0), 0.0013498980316301, 1e-16);
  for (double x : {0.1, 0.7, 2.3, 5.0}) {
    EXPECT_NEAR(GaussianQ(x) + GaussianQ(-x), 1.0, 1e-15);
  }
  EXPECT_THROW(GaussianQ(std::numeric_limits<double>::infinity()), DomainError);
}

TEST(BesselTest, MatchesPowerSeries) {
  for (int nu : {0, 1, 2, 5}) {
    for (double x : {0.01, 0.5, 3.0, 17.0, 40.0}) {
      const double want = NaiveBesselI(nu, x);
      EXPECT_NEAR(BesselI(nu, x), want, 1e-12 * want) << "nu=" << nu << " x=" << x;
    }
  }
}

TEST(BesselTest, MatchesStandardLibrary) {
  for (double x : {0.3, 8.0, 90.0}) {
    EXPECT_NEAR(BesselI(0, x) / std::cyl_bessel_i(0.0, x), 1.0, 1e-12);
  }
}

TEST(BesselTest, ScaledStaysFiniteAndOverflowThrows) {
  // exp(-x) I_0(x) ~ 1 / sqrt(2 pi x) for large x.
  const double x = 1e5;
  EXPECT_NEAR(BesselIScaled(0, x) * std::sqrt(2.0 * std::numbers::pi * x), 1.0, 1e-5);
  EXPECT_THROW(BesselI(0, 800.0), RangeError);
  EXPECT_EQ(BesselI(0, 0.0), 1.0);
  EXPECT_EQ(BesselI(3, 0.0), 0.0);
  EXPECT_THROW(BesselI(-1, 1.0), DomainError);
}

TEST(MarcumQTest, MatchesSimpsonQuadrature) {
  for (int m : {1, 2, 4}) {
    for (auto [a, b] : {std::pair{1.0, 1.5}, std::pair{5.196, 5.261}, std::pair{3.0, 0.4}}) {
      EXPECT_NEAR(MarcumQ(m, a, b), SimpsonMarcum(m, a, b), 1e-9)
          << "M=" << m << " a=" << a << " b=" << b;
    }
  }
}

TEST(MarcumQTest, FrozenValue) {
  // Frozen from the Simpson oracle above.
  EXPECT_NEAR(MarcumQ(1, 5.196, 5.261), 0.512454935896596, 1e-10);
}

TEST(MarcumQTest, BoundaryCases) {
  EXPECT_EQ(MarcumQ(1, 2.0, 0.0), 1.0);
  // a = 0 reduces to a central chi-squared tail: Q_1(0, b) = exp(-b^2 / 2).
  EXPECT_NEAR(MarcumQ(1, 0.0, 1.3), std::exp(-0.5 * 1.3 * 1.3), 1e-15);
  EXPECT_THROW(MarcumQ(0, 1.0, 1.0), DomainError);
  EXPECT_THROW(MarcumQ(1, -1.0, 1.0), DomainError);
}

// The mixture sum is accurate to about 1e-13 absolute near 1.
TEST(MarcumQTest, MonotoneInBothArguments) {
  double prev = 1.0;
  for (double b = 0.0; b < 12.0; b += 0.25) {
    const double q = MarcumQ(3, 4.0, b);
    EXPECT_LE(q, prev + 1e-13);
    prev = q;
  }
  prev = 0.0;
  for (double a = 0.0; a < 12.0; a += 0.25) {
    const double q = MarcumQ(3, a, 4.0);
    EXPECT_GE(q, prev - 1e-13);
    prev = q;
  }
}

TEST(MarcumQTest, LargeArgumentsAgreeWithQuadraturePath) {
  const double a = 300.0;
  const double b = 305.0;
  EXPECT_NEAR(MarcumQ(60, a, b), detail::MarcumQQuadrature(60, a, b), 1e-15);
}

TEST(IntegrateTest, KnownIntegrals) {
  EXPECT_NEAR(Integrate([](double x) { return std::exp(-x); }, 0.0,
                        std::numeric_limits<double>::infinity()),
              1.0, 1e-12);
  EXPECT_NEAR(Integrate([](double x) { return std::sin(x); }, 0.0, std::numbers::pi), 2.0, 1e-12);
}

TEST(FindRootTest, SolvesAndRejectsBadBracket) {
  EXPECT_NEAR(FindRoot([](double x) { return x * x - 2.0; }, 0.0, 2.0), std::numbers::sqrt2, 1e-9);
  EXPECT_THROW(FindRoot([](double x) { return x * x + 1.0; }, -1.0, 1.0), BracketError);
  EXPECT_THROW(FindRoot([](double x) { return x; }, -1.0, 1.0, Tolerance{0.0, 1e-9, 10}),
               ConfigError);
}

TEST(BinomialTest, PmfSumsToOne) {
  for (int n : {0, 5, 60, 200}) {
    double sum = 0.0;
    for (int k = 0; k <= n; ++k) sum += BinomialPmf(n, k, 0.3);
    EXPECT_NEAR(sum, 1.0, 1e-12) << n;
  }
  EXPECT_EQ(Binomial(10, 3), 120.0);
  EXPECT_EQ(BinomialPmf(4, 0, 0.0), 1.0);
  EXPECT_EQ(BinomialPmf(4, 4, 1.0), 1.0);
  EXPECT_EQ(BinomialPmf(4, 5, 0.5), 0.0);
}

TEST(NoncentralChiSquaredTest, CdfIsComplementOfMarcum) {
  const double lambda = 6.0;
  const double x = 9.0;
  EXPECT_NEAR(NoncentralChiSquaredCdf(x, 2, lambda), 1.0 - MarcumQ(1, std::sqrt(lambda), 3.0),
              1e-14);
  // The density integrates to the CDF.
  const double area =
      Integrate([&](double t) { return NoncentralChiSquaredPdf(t, 2, lambda); }, 0.0, x);
  EXPECT_NEAR(area, NoncentralChiSquaredCdf(x, 2, lambda), 1e-9);
}

TEST(WilsonIntervalTest, ContainsEstimateAndShrinks) {
  const ProportionInterval small = WilsonInterval(30, 100);
  const ProportionInterval big = WilsonInterval(3000, 10000);
  EXPECT_LT(small.lower, 0.3);
  EXPECT_GT(small.upper, 0.3);
  EXPECT_LT(big.upper - big.lower, small.upper - small.lower);
  EXPECT_EQ(WilsonInterval(0, 10).lower, 0.0);
  EXPECT_THROW(WilsonInterval(11, 10), DomainError);
}

}  // namespace
}  // namespace proxtrace
