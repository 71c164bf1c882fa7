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

#include "proxtrace/audio_dsp.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <random>
#include <vector>

#include <gtest/gtest.h>

namespace proxtrace {
namespace {

const AudioRangingConfig kCfg;

double Tc() { return kCfg.chip_duration; }

ReceptionSpec SinglePath(double delay, double amplitude = 1.0, double phase = 0.3) {
  ReceptionSpec spec;
  spec.paths = {{delay, amplitude, phase}};
  spec.duration = (20.0 + 2.0) * Tc() + kCfg.SignalDuration();
  return spec;
}

TEST(CodeTest, MSequenceHasFullPeriodAndBalance) {
  for (const auto& taps : detail::PrimitiveTaps()) {
    const std::vector<int> seq = detail::MSequence(taps, 1);
    ASSERT_EQ(seq.size(), 511u);
    EXPECT_EQ(std::accumulate(seq.begin(), seq.end(), 0), 256);
  }
}

TEST(CodeTest, SidelobesAndCrossCorrelation) {
  std::vector<std::vector<int>> family_codes;
  for (std::uint64_t seed = 0; seed < kCodeFamilies; ++seed) {
    const std::vector<int> code = GenerateCode(350, seed);
    ASSERT_EQ(code.size(), 350u);
    EXPECT_LE(MaxSidelobe(code, 2), kCodeSidelobeLimit) << seed;
    EXPECT_LT(MaxSidelobe(code, 6), 0.2) << seed;
    EXPECT_GE(AperiodicCorrelation(code, code, 1), 0.0) << seed;
    family_codes.push_back(code);
  }
  for (std::size_t i = 0; i < family_codes.size(); ++i) {
    for (std::size_t j = i + 1; j < family_codes.size(); ++j) {
      EXPECT_LT(MaxCrossCorrelation(family_codes[i], family_codes[j]), 0.2) << i << "," << j;
    }
  }
  EXPECT_EQ(GenerateCode(350, 7), GenerateCode(350, 7));
}

TEST(SignalTest, DurationAndEnergy) {
  const DspConfig dsp;
  const RangingSignal s = GenerateRangingSignal(kCfg, dsp, 1);
  EXPECT_NEAR(s.waveform.Duration(), 0.35, 1e-12);
  EXPECT_EQ(s.waveform.samples.size(), 16800u);
  // Unit-amplitude BPSK on a carrier: E = A^2 T / 2, less the sampling cells
  // that straddle a chip edge. At 48 kHz every chip edge sits on a sample
  // where cos^2 = 1, so a sign change zeroes one full-weight sample, and the
  // first cell is half empty (average 1/2).
  EXPECT_NEAR(s.waveform.Energy() / (0.5 * 0.35), 1.0, 0.025);
  int transitions = 0;
  for (std::size_t i = 1; i < s.chips.size(); ++i) transitions += s.chips[i] != s.chips[i - 1];
  EXPECT_NEAR(s.waveform.Energy(), (8400.0 - transitions - 0.75) / 48000.0, 1e-12);
}

TEST(SignalTest, NyquistIsEnforced) {
  DspConfig dsp;
  dsp.sample_rate = 30000.0;
  EXPECT_THROW(GenerateRangingSignal(kCfg, dsp, 1), ConfigError);
  dsp.sample_rate = 48000.0;
  dsp.lowpass_hz = 20000.0;
  EXPECT_THROW(dsp.Validate(kCfg), ConfigError);
}

TEST(FilterTest, UnitDcGainAndNoiseBandwidth) {
  const DspConfig dsp;
  EXPECT_EQ(dsp.FirTaps(), 161);
  const std::vector<double> h = DesignLowpass(1000.0, 48000.0, dsp.FirTaps());
  EXPECT_NEAR(std::accumulate(h.begin(), h.end(), 0.0), 1.0, 1e-12);
  // A Hamming windowed-sinc at 1 kHz cutoff passes roughly 2 kHz of noise.
  const double b = NoiseBandwidth(h, 48000.0);
  EXPECT_GT(b, 1500.0);
  EXPECT_LT(b, 2500.0);
}

TEST(NoiseTest, EstimateWithinTenPercent) {
  const DspConfig dsp;
  std::mt19937_64 rng(11);
  const std::vector<int> chips = GenerateCode(350, 1);
  for (double n0 : {1e-6, 1e-4, 0.05}) {
    ReceptionSpec spec = SinglePath(0.0, 0.0);
    spec.noise_density = n0;
    const Waveform wf = SynthesizeReception(chips, kCfg, dsp, spec, &rng);
    EXPECT_NEAR(EstimateN0(wf, kCfg, dsp) / n0, 1.0, 0.10) << n0;
  }
}

TEST(NoiseTest, ZeroSignalAndScaling) {
  const DspConfig dsp;
  Waveform silent;
  silent.samples.assign(4800, 0.0);
  EXPECT_EQ(EstimateN0(silent, kCfg, dsp), 0.0);

  std::mt19937_64 rng(12);
  std::normal_distribution<double> gauss;
  Waveform wf;
  for (int i = 0; i < 48000; ++i) wf.samples.push_back(gauss(rng));
  Waveform twice = wf;
  for (double& s : twice.samples) s *= 2.0;
  EXPECT_NEAR(EstimateN0(twice, kCfg, dsp) / EstimateN0(wf, kCfg, dsp), 4.0, 1e-9);
}

TEST(CorrelatorTest, CalibrationGains) {
  const DspConfig dsp;
  const RangingSignal ref = PrepareReference(kCfg, dsp, 1);
  // Filtering can only lose peak amplitude.
  EXPECT_GT(ref.gain.alpha, 0.8);
  EXPECT_LE(ref.gain.alpha, 1.0);
  EXPECT_GT(ref.gain.kappa, 0.5);
  EXPECT_LE(ref.gain.kappa, 1.05);
}

TEST(CorrelatorTest, EsnoEstimateIsUnbiased) {
  const DspConfig dsp;
  const RangingSignal ref = PrepareReference(kCfg, dsp, 1);
  const int trials = 200;
  double sum = 0.0;
  for (int t = 0; t < trials; ++t) {
    auto rng = RandomStream(21, t);
    ReceptionSpec spec = SinglePath(5.0 * Tc(), 1.0, 0.1 * t);
    spec.esn0_db = 6.0;
    const Waveform rx = SynthesizeReception(ref.chips, kCfg, dsp, spec, &rng);
    const Correlator corr(ToBaseband(rx, kCfg, dsp), ref.chips, Tc(), ref.gain);
    sum += corr.Esn0(5.0 * Tc());
  }
  // Sample mean of a quantity with std about 2 sqrt(rho) + 1 over 200 draws.
  EXPECT_NEAR(sum / trials / DbToLinear(6.0), 1.0, 0.1);
}

TEST(ReceiverTest, NoiselessLoopbackWithinHundredthChip) {
  const DspConfig dsp;
  const RangingSignal ref = PrepareReference(kCfg, dsp, 1);
  const Waveform rx = SynthesizeReception(ref.chips, kCfg, dsp, SinglePath(10.0 * Tc(), 1.0, 0.0));
  const CorrelationResult r = AcquireAndTrack(rx, ref, kCfg, dsp);
  ASSERT_TRUE(r.acquired);
  EXPECT_NEAR(*r.delay_estimate / Tc(), 10.0, 0.01);
}

// With an arbitrary carrier phase the aliased double-frequency mixing product
// shifts the discriminator zero by up to about 0.01 chip at 48 kHz, on top of
// the loop's final step.
TEST(ReceiverTest, NoiselessFractionalDelays) {
  const DspConfig dsp;
  const RangingSignal ref = PrepareReference(kCfg, dsp, 1);
  for (double chips : {3.0, 10.37, 17.81}) {
    for (double phase : {0.0, 1.0, 2.0, 4.5}) {
      const Waveform rx =
          SynthesizeReception(ref.chips, kCfg, dsp, SinglePath(chips * Tc(), 1.0, phase));
      const CorrelationResult r = AcquireAndTrack(rx, ref, kCfg, dsp);
      ASSERT_TRUE(r.acquired) << chips;
      EXPECT_NEAR(*r.delay_estimate / Tc(), chips, 0.02) << chips << " " << phase;
    }
  }
}

TEST(ReceiverTest, SampleRateDoesNotMoveTheEstimate) {
  DspConfig dsp48;
  DspConfig dsp96;
  dsp96.sample_rate = 96000.0;
  const RangingSignal ref48 = PrepareReference(kCfg, dsp48, 1);
  const RangingSignal ref96 = PrepareReference(kCfg, dsp96, 1);
  const double delay = 8.63 * Tc();
  const CorrelationResult a = AcquireAndTrack(
      SynthesizeReception(ref48.chips, kCfg, dsp48, SinglePath(delay)), ref48, kCfg, dsp48);
  const CorrelationResult b = AcquireAndTrack(
      SynthesizeReception(ref96.chips, kCfg, dsp96, SinglePath(delay)), ref96, kCfg, dsp96);
  ASSERT_TRUE(a.acquired && b.acquired);
  EXPECT_NEAR((*a.delay_estimate - *b.delay_estimate) / Tc(), 0.0, 0.02);
}

TEST(ReceiverTest, StrongerEchoDoesNotCaptureLock) {
  const DspConfig dsp;
  const RangingSignal ref = PrepareReference(kCfg, dsp, 1);
  const double direct = 4.3 * Tc();
  for (auto [a_direct, a_echo] : {std::pair{1.0, 0.8}, std::pair{0.8, 1.0}}) {
    ReceptionSpec spec = SinglePath(direct, a_direct, 0.4);
    spec.paths.push_back({direct + 6.0 * Tc(), a_echo, 2.1});
    const CorrelationResult r =
        AcquireAndTrack(SynthesizeReception(ref.chips, kCfg, dsp, spec), ref, kCfg, dsp);
    ASSERT_TRUE(r.acquired);
    EXPECT_NEAR(*r.delay_estimate / Tc(), 4.3, 0.1) << a_direct << "/" << a_echo;
  }
}

TEST(ReceiverTest, FrequencySearchFindsOffset) {
  DspConfig dsp;
  dsp.frequency_search = true;
  const RangingSignal ref = PrepareReference(kCfg, dsp, 1);
  ReceptionSpec spec = SinglePath(7.2 * Tc());
  spec.frequency_offset_hz = 1.0;
  const CorrelationResult r =
      AcquireAndTrack(SynthesizeReception(ref.chips, kCfg, dsp, spec), ref, kCfg, dsp);
  ASSERT_TRUE(r.acquired);
  EXPECT_EQ(r.frequency_offset_hz, 1.0);
  EXPECT_NEAR(*r.delay_estimate / Tc(), 7.2, 0.02);
}

TEST(ReceiverTest, EarliestStrongPeakSelection) {
  const std::vector<double> power = {0.1, 0.6, 0.2, 0.1, 1.0, 0.3};
  EXPECT_EQ(EarliestStrongPeak(power, 0.5), 1u);
  EXPECT_EQ(EarliestStrongPeak(power, 0.7), 4u);
  EXPECT_EQ(EarliestStrongPeak(power, 0.5, 2), 4u);
  EXPECT_EQ(EarliestStrongPeak(power, 0.5, 8, 0.8), 4u);
}

TEST(ExperimentTest, DeterministicForSeed) {
  const DspConfig dsp;
  DspExperimentConfig ex;
  ex.trials = 24;
  ex.seed = 5;
  const DspExperimentResult a = RunDspExperiment(kCfg, dsp, ex);
  const DspExperimentResult b = RunDspExperiment(kCfg, dsp, ex);
  ASSERT_EQ(a.outcomes.size(), 24u);
  for (std::size_t i = 0; i < a.outcomes.size(); ++i) {
    EXPECT_EQ(a.outcomes[i].tracking_error, b.outcomes[i].tracking_error);
    EXPECT_EQ(a.outcomes[i].acquired, b.outcomes[i].acquired);
  }
  EXPECT_EQ(a.predicted_std, DelayStd(kCfg, 6.0));
}

TEST(ExperimentTest, HighSnrTrackingIsTight) {
  const DspConfig dsp;
  DspExperimentConfig ex;
  ex.trials = 60;
  ex.esn0_db = 20.0;
  const DspExperimentResult r = RunDspExperiment(kCfg, dsp, ex);
  EXPECT_EQ(r.acquired, 60);
  EXPECT_LT(r.tracking.std / Tc(), 0.1);
  EXPECT_LT(std::abs(r.tracking.mean) / Tc(), 0.05);
}

TEST(RawFileTest, RoundTrip) {
  const auto dir = std::filesystem::temp_directory_path() / "proxtrace_raw_test";
  std::filesystem::create_directories(dir);
  const std::string path = (dir / "wave.f32").string();
  Waveform wf;
  wf.sample_rate = 96000.0;
  wf.samples = {0.0, 0.5, -0.25, 1e-3, -1.0};
  WriteRawWaveform(path, wf);
  EXPECT_EQ(std::filesystem::file_size(path), 20u);
  const Waveform back = ReadRawWaveform(path);
  EXPECT_EQ(back.sample_rate, 96000.0);
  ASSERT_EQ(back.samples.size(), wf.samples.size());
  for (std::size_t i = 0; i < wf.samples.size(); ++i) {
    EXPECT_EQ(back.samples[i], static_cast<float>(wf.samples[i]));
  }
  std::filesystem::remove(path + ".json");
  EXPECT_THROW(ReadRawWaveform(path), IoError);
  std::filesystem::remove_all(dir);
}

TEST(RawFileTest, TruncatedDataIsAnIoError) {
  const auto dir = std::filesystem::temp_directory_path() / "proxtrace_raw_short";
  std::filesystem::create_directories(dir);
  const std::string path = (dir / "wave.f32").string();
  Waveform wf;
  wf.samples = {1.0, 2.0};
  WriteRawWaveform(path, wf);
  std::filesystem::resize_file(path, 6);
  EXPECT_THROW(ReadRawWaveform(path), IoError);
  std::filesystem::remove_all(dir);
}

}  // namespace
}  // namespace proxtrace
