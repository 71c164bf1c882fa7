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

#include "proxtrace/episode_stats.hpp"

#include <bit>
#include <cmath>
#include <cstdint>

#include <gtest/gtest.h>

namespace proxtrace {
namespace {

// Sums the probability of every success pattern of x decisions with fewer
// than x0 successes.
double EnumeratedPmd(int x, int x0, double pi_md) {
  double total = 0.0;
  for (std::uint32_t mask = 0; mask < (1u << x); ++mask) {
    const int hits = std::popcount(mask);
    if (hits < x0) total += std::pow(1.0 - pi_md, hits) * std::pow(pi_md, x - hits);
  }
  return total;
}

// All 2^y outcomes; the low x bits are contact-zone decisions.
double EnumeratedFalseAlarm(int y, int x0, int x, double pi_md, double pi_fa) {
  double total = 0.0;
  for (std::uint32_t mask = 0; mask < (1u << y); ++mask) {
    int m = 0;
    int q = 0;
    double p = 1.0;
    for (int i = 0; i < y; ++i) {
      const bool bit = (mask >> i) & 1u;
      if (i < x) {
        m += bit;
        p *= bit ? 1.0 - pi_md : pi_md;
      } else {
        q += bit;
        p *= bit ? pi_fa : 1.0 - pi_fa;
      }
    }
    if (m < x0 && m + q >= x0) total += p;
  }
  return total;
}

TEST(CombinedPmdTest, MatchesEnumeration) {
  for (int x = 0; x <= 10; ++x) {
    for (int x0 = 0; x0 <= 11; ++x0) {
      for (double p : {0.0, 0.1, 0.45, 1.0}) {
        EXPECT_NEAR(CombinedPmd(x, x0, p), EnumeratedPmd(x, x0, p), 1e-13)
            << x << " " << x0 << " " << p;
      }
    }
  }
}

TEST(CombinedPmdTest, Properties) {
  // More decisions in the zone never hurt; a higher bar never helps.
  for (double p : {0.05, 0.3}) {
    for (int x = 5; x < 40; ++x) EXPECT_LE(CombinedPmd(x + 1, 5, p), CombinedPmd(x, 5, p) + 1e-15);
    for (int x0 = 1; x0 < 20; ++x0) EXPECT_GE(CombinedPmd(20, x0 + 1, p), CombinedPmd(20, x0, p));
  }
  EXPECT_EQ(CombinedPmd(2, 5, 0.01), 1.0);
  EXPECT_EQ(CombinedPmd(7, 0, 0.3), 0.0);
  EXPECT_THROW(CombinedPmd(3, 1, 1.5), DomainError);
}

TEST(FalseAlarmTest, MatchesEnumerationForPointMasses) {
  for (int y = 1; y <= 10; ++y) {
    for (int x0 = 1; x0 <= 4; ++x0) {
      for (int x = 0; x <= y; ++x) {
        const double got =
            FalseAlarmGivenExposure(y, x0, CountDistribution::PointMass(x), 0.2, 0.15);
        EXPECT_NEAR(got, EnumeratedFalseAlarm(y, x0, x, 0.2, 0.15), 1e-13);
      }
    }
  }
}

TEST(FalseAlarmTest, MixtureIsWeightedSum) {
  const CountDistribution px = CountDistribution::Uniform(0, 6);
  const int y = 9;
  double want = 0.0;
  for (int x = 0; x <= 6; ++x) want += EnumeratedFalseAlarm(y, 3, x, 0.1, 0.2) / 7.0;
  EXPECT_NEAR(FalseAlarmGivenExposure(y, 3, px, 0.1, 0.2), want, 1e-13);
  // Below x0 contacts there is nothing to declare.
  EXPECT_EQ(FalseAlarmGivenExposure(2, 3, px, 0.1, 0.2), 0.0);
}

TEST(FalseAlarmTest, IncreasesWithPiFa) {
  const CountDistribution px = CountDistribution::Uniform(0, 4);
  double prev = 0.0;
  for (double fa = 0.0; fa <= 1.0; fa += 0.05) {
    const double p = FalseAlarmGivenExposure(12, 5, px, 0.3, fa);
    EXPECT_GE(p, prev - 1e-15);
    prev = p;
  }
}

TEST(SpreadingTest, MatchesDirectSum) {
  const CountDistribution px = CountDistribution::TruncatedGeometric(0.2, 0, 18);
  const DecisionPolicy policy = DecisionPolicy::ModelC(15, 5);
  const SpreadingEstimate s = SpreadingProbability(10.0, 0.01, px, policy, 0.1);
  double sum = 0.0;
  double tail = 0.0;
  for (int x = 5; x <= 18; ++x) {
    sum += px(x) * EnumeratedPmd(x, 5, 0.1);
    tail += px(x);
  }
  EXPECT_NEAR(s.probability, 0.1 * sum, 1e-14);
  EXPECT_NEAR(s.no_tracing, 0.1 * tail, 1e-14);
  EXPECT_LE(s.dominant_term, s.probability + 1e-15);
}

TEST(SolvePfaTargetTest, SatisfiesDefiningEquation) {
  for (int x0 : {5, 10, 30}) {
    for (int r : {2, 4, 8}) {
      const int y = r * x0;
      const PfaTarget t = SolvePfaTarget(16.0, y, x0, 2.0);
      ASSERT_FALSE(t.capped);
      EXPECT_NEAR(16.0 * Binomial(y, x0) * std::pow(t.pi_fa, x0), 2.0, 1e-9);
    }
  }
}

TEST(SolvePfaTargetTest, FrozenValuesAndCap) {
  // Frozen from an earlier run of this implementation.
  EXPECT_NEAR(SolvePfaTarget(16.0, 20, 5, 2.0).pi_fa, 0.095784, 5e-6);
  EXPECT_NEAR(SolvePfaTarget(16.0, 60, 5, 2.0).pi_fa, 0.029643, 5e-6);
  const PfaTarget capped = SolvePfaTarget(1.0, 5, 5, 2.0);
  EXPECT_TRUE(capped.capped);
  EXPECT_EQ(capped.pi_fa, 1.0);
  EXPECT_THROW(SolvePfaTarget(16.0, 3, 5, 2.0), DomainError);
}

TEST(SolvePfaTargetTest, ApproachesLargeX0Limit) {
  for (double r : {2.0, 4.0, 8.0}) {
    const double limit = PfaTargetLargeX0Limit(r);
    auto gap = [&](int x0) {
      return std::abs(SolvePfaTarget(16.0, static_cast<int>(r * x0), x0, 2.0).pi_fa - limit);
    };
    EXPECT_LT(gap(1000), 1e-2) << r;
    EXPECT_LT(gap(10000), 1e-3) << r;
    EXPECT_LT(gap(10000), gap(1000)) << r;
  }
  EXPECT_EQ(PfaTargetLargeX0Limit(1.0), 1.0);
}

TEST(PolicyTest, RatesAndValidation) {
  EXPECT_EQ(DecisionPolicy::ModelC(6, 3).MeasurementRate(), (Rational{1, 50}));
  EXPECT_EQ(DecisionPolicy::ModelC(60, 5).MeasurementRate(), (Rational{1, 3}));
  EXPECT_EQ(DecisionPolicy::ModelC(60, 5).interval_seconds, 180.0);
  EXPECT_EQ(DecisionPolicy::ModelC(60, 3).interval_seconds, 300.0);
  EXPECT_THROW(DecisionPolicy::ModelC(6, 4), ConfigError);
  EXPECT_EQ(Rational::Reduced(30, 900).ToString(), "1/30");
  EXPECT_NEAR(ReductionFactor(DecisionPolicy::ModelC(6, 5), 0.0538857), 0.2694, 1e-4);
}

TEST(CountDistributionTest, ShapesAndValidation) {
  const CountDistribution u = CountDistribution::Uniform(2, 5);
  EXPECT_NEAR(u.Mean(), 3.5, 1e-15);
  EXPECT_NEAR(u.TailMass(4), 0.5, 1e-15);
  EXPECT_EQ(u(1), 0.0);
  EXPECT_THROW(CountDistribution({0.5, 0.2}), DomainError);
  EXPECT_THROW(CountDistribution({1.5, -0.5}), DomainError);
}

}  // namespace
}  // namespace proxtrace
