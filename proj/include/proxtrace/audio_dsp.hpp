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

// Baseband simulation of the acoustic ranging receiver.
//
// Signal chain:
//   code (+/-1 chips) -> BPSK on the carrier -> channel (delay, echoes,
//   white Gaussian noise) -> quadrature mix to baseband -> FIR low-pass ->
//   correlation against the rectangular code replica -> coarse search on a
//   T_c/2 grid -> early-late power discriminator loop.
//
// Energy conventions: a passband tone of amplitude A over T seconds carries
// E = A^2 T / 2. Real white noise with per-sample variance s^2 at rate fs has
// one-sided density N0 = 2 s^2 / fs. The baseband mix uses sqrt(2) e^{-jwt}, so
// complex baseband noise has two-sided density N0 and a full-amplitude chip
// maps to A / sqrt(2).

#ifndef PROXTRACE_AUDIO_DSP_HPP_
#define PROXTRACE_AUDIO_DSP_HPP_

#include <algorithm>
#include <bit>
#include <cmath>
#include <complex>
#include <cstdint>
#include <fstream>
#include <limits>
#include <numbers>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "proxtrace/audio_ranging.hpp"
#include "proxtrace/errors.hpp"
#include "proxtrace/numerics.hpp"
#include "proxtrace/random.hpp"

namespace proxtrace {

using Complex = std::complex<double>;

struct Waveform {
  std::vector<double> samples;
  double sample_rate = 48000.0;

  double Duration() const { return samples.size() / sample_rate; }
  double Time(std::size_t k) const { return static_cast<double>(k) / sample_rate; }

  double Energy() const {
    double e = 0.0;
    for (double s : samples) e += s * s;
    return e / sample_rate;
  }
};

// Loop schedule for the early-late discriminator.
struct DllSchedule {
  double initial_step_chips = 1.0 / 16.0;
  double final_step_chips = 1.0 / 256.0;
  int max_iterations = 64;
};

struct DspConfig {
  double sample_rate = 48000.0;
  double lowpass_hz = 1000.0;
  int fir_taps = 0;  // 0 selects a length from the sample rate and cutoff
  // Coarse search range: [search_start, search_start + search_window_chips T_c].
  double search_start = 0.0;
  double search_window_chips = 20.0;
  double acquisition_threshold_db = 6.0;
  // Early-to-late scan: the first local maximum at or above this fraction of
  // the strongest cell wins (0.5 is -3 dB).
  double echo_power_ratio = 0.5;
  // Largest excess delay of an echo over the direct path, in chips; 0 means
  // the whole window ahead of the strongest cell is scanned.
  double echo_span_chips = 0.0;
  // Skip early candidates whose power alone fails the acquisition test.
  bool gate_candidates = false;
  // Half spacing of the early and late correlators in units of Delta T_c.
  double half_spacing_factor = 0.5;
  DllSchedule dll;
  bool frequency_search = false;
  double frequency_span_hz = 2.0;
  double frequency_step_hz = 1.0;

  int FirTaps() const {
    if (fir_taps > 0) return fir_taps | 1;
    return 2 * static_cast<int>(std::ceil(1.65 * sample_rate / lowpass_hz)) + 1;
  }

  void Validate(const AudioRangingConfig& audio) const {
    audio.Validate();
    const double bandwidth = 1.0 / audio.chip_duration;
    detail::Require<ConfigError>(sample_rate >= 2.0 * (audio.carrier_hz + bandwidth),
                                 "DspConfig: sample rate below twice (carrier + bandwidth)");
    detail::Require<ConfigError>(lowpass_hz > 0.0 && lowpass_hz < audio.carrier_hz,
                                 "DspConfig: lowpass_hz must lie in (0, carrier)");
    detail::Require<ConfigError>(search_window_chips > 0.0 && search_start >= 0.0,
                                 "DspConfig: invalid search window");
    detail::Require<ConfigError>(echo_span_chips >= 0.0, "DspConfig: echo_span_chips must be >= 0");
    detail::Require<ConfigError>(echo_power_ratio > 0.0 && echo_power_ratio <= 1.0,
                                 "DspConfig: echo_power_ratio must lie in (0, 1]");
    detail::Require<ConfigError>(half_spacing_factor > 0.0, "DspConfig: half spacing must be > 0");
    detail::Require<ConfigError>(dll.initial_step_chips > dll.final_step_chips &&
                                     dll.final_step_chips > 0.0 && dll.max_iterations > 0,
                                 "DspConfig: invalid loop schedule");
    detail::Require<ConfigError>(frequency_span_hz >= 0.0 && frequency_step_hz > 0.0,
                                 "DspConfig: invalid frequency grid");
  }
};

// ---------------------------------------------------------------------------
// Spreading code.

// Primitive degree-9 polynomials, listed by their nonzero exponents below 9
// (x^9 + sum x^t + 1).
inline constexpr int kCodeFamilies = 6;

namespace detail {

inline const std::vector<std::vector<int>>& PrimitiveTaps() {
  static const std::vector<std::vector<int>> kTaps = {{4}, {6, 4, 3}, {8, 5, 4},
                                                      {5}, {8, 4, 1}, {6, 5, 3}};
  return kTaps;
}

// One period (511 chips) of the m-sequence for x^9 + sum x^t + 1, as 0/1.
inline std::vector<int> MSequence(const std::vector<int>& taps, std::uint32_t fill) {
  constexpr int kDegree = 9;
  constexpr int kPeriod = (1 << kDegree) - 1;
  std::vector<int> a(kPeriod + kDegree);
  fill = fill % kPeriod + 1;  // any nonzero fill
  for (int i = 0; i < kDegree; ++i) a[i] = (fill >> i) & 1;
  for (int k = 0; k + kDegree < static_cast<int>(a.size()); ++k) {
    int bit = a[k];
    for (int t : taps) bit ^= a[k + t];
    a[k + kDegree] = bit;
  }
  a.resize(kPeriod);
  return a;
}

}  // namespace detail

// Aperiodic autocorrelation r_k = sum c_i c_{i+k} / L.
inline double AperiodicCorrelation(std::span<const int> a, std::span<const int> b, int lag) {
  const int n = static_cast<int>(std::min(a.size(), b.size()));
  double sum = 0.0;
  for (int i = 0; i < n; ++i) {
    const int j = i + lag;
    if (j >= 0 && j < n) sum += a[i] * b[j];
  }
  return sum / n;
}

inline double MaxSidelobe(std::span<const int> code, int min_lag) {
  double worst = 0.0;
  for (int k = min_lag; k < static_cast<int>(code.size()); ++k) {
    worst = std::max(worst, std::abs(AperiodicCorrelation(code, code, k)));
  }
  return worst;
}

inline double MaxCrossCorrelation(std::span<const int> a, std::span<const int> b) {
  double worst = 0.0;
  const int n = static_cast<int>(std::min(a.size(), b.size()));
  for (int k = -n + 1; k < n; ++k) worst = std::max(worst, std::abs(AperiodicCorrelation(a, b, k)));
  return worst;
}

inline constexpr double kCodeSidelobeLimit = 0.1;

// Binary +/-1 code of `length` chips cut from a degree-9 m-sequence. The
// family is seed % 6; the starting phase is searched from a seed-dependent
// offset until the lag-1 correlation is non-negative and every sidelobe at
// lag >= 2 is at most 0.1 of the peak. Seeds in the same family share the
// underlying sequence, so cross-correlation is only small across families.
inline std::vector<int> GenerateCode(int length, std::uint64_t seed) {
  detail::Require(length >= 16, "GenerateCode: length must be >= 16");
  const auto& taps = detail::PrimitiveTaps()[seed % kCodeFamilies];
  const std::vector<int> period = detail::MSequence(taps, 1);
  const int p = static_cast<int>(period.size());
  const int start = static_cast<int>(SplitMix64(seed / kCodeFamilies) % p);
  std::vector<int> best;
  double best_score = 2.0;
  for (int i = 0; i < p; ++i) {
    std::vector<int> code(length);
    for (int c = 0; c < length; ++c) code[c] = period[(start + i + c) % p] ? 1 : -1;
    const double lag1 = AperiodicCorrelation(code, code, 1);
    const double sidelobe = MaxSidelobe(code, 2);
    if (lag1 >= 0.0 && sidelobe <= kCodeSidelobeLimit) return code;
    if (sidelobe < best_score) {
      best_score = sidelobe;
      best = std::move(code);
    }
  }
  return best;
}

// Deterministic effect of the low-pass filter on the replica correlation:
// a clean aligned peak has |C| = alpha A / sqrt(2), and white noise of density
// N0 gives E|C|^2 = kappa N0 / T. Both are 1 without filtering.
struct CorrelatorGain {
  double alpha = 1.0;
  double kappa = 1.0;
};

struct RangingSignal {
  std::vector<int> chips;
  Waveform waveform;
  CorrelatorGain gain;  // set by PrepareReference
};

// Exact average of the delayed code c(t - delay) over [t0, t1), chips of
// length tc starting at delay.
namespace detail {

inline double CodeAverage(std::span<const int> chips, double tc, double delay, double t0,
                          double t1) {
  const double u0 = (t0 - delay) / tc;
  const double u1 = (t1 - delay) / tc;
  const double n = static_cast<double>(chips.size());
  double acc = 0.0;
  const double lo = std::max(u0, 0.0);
  const double hi = std::min(u1, n);
  for (double u = lo; u < hi;) {
    const double chip_end = std::min(std::floor(u) + 1.0, hi);
    acc += chips[static_cast<std::size_t>(std::floor(u))] * (chip_end - u);
    u = chip_end;
  }
  return acc / (u1 - u0);
}

}  // namespace detail

// BPSK ranging signal of unit amplitude; the correlator gain is left at its
// unfiltered default (see PrepareReference). Each sample holds the code averaged
// over its sampling cell, which keeps chip edges at their exact times.
inline RangingSignal GenerateRangingSignal(const AudioRangingConfig& cfg, const DspConfig& dsp,
                                           std::uint64_t code_seed) {
  dsp.Validate(cfg);
  RangingSignal out;
  out.chips = GenerateCode(cfg.code_length_chips, code_seed);
  const double fs = dsp.sample_rate;
  const auto n = static_cast<std::size_t>(std::llround(cfg.SignalDuration() * fs));
  out.waveform.sample_rate = fs;
  out.waveform.samples.resize(n);
  const double w = 2.0 * std::numbers::pi * cfg.carrier_hz;
  for (std::size_t k = 0; k < n; ++k) {
    const double t = k / fs;
    const double chip =
        detail::CodeAverage(out.chips, cfg.chip_duration, 0.0, t - 0.5 / fs, t + 0.5 / fs);
    out.waveform.samples[k] = chip * std::cos(w * t);
  }
  return out;
}

struct PathComponent {
  double delay = 0.0;      // seconds
  double amplitude = 1.0;  // relative to unit transmit amplitude
  double phase = 0.0;      // carrier phase, radians
};

struct ReceptionSpec {
  std::vector<PathComponent> paths = {{}};
  double duration = 0.0;  // receive window length, seconds
  // Noise is set from the first path: E/N0 of that path in dB. Empty means
  // noiseless unless noise_density is given.
  std::optional<double> esn0_db;
  std::optional<double> noise_density;  // one-sided N0, overrides esn0_db
  double frequency_offset_hz = 0.0;
};

inline double NoiseStdForDensity(double n0, double sample_rate) {
  return std::sqrt(n0 * sample_rate / 2.0);
}

// Passband reception of the code through the given paths plus white noise.
inline Waveform SynthesizeReception(std::span<const int> chips, const AudioRangingConfig& cfg,
                                    const DspConfig& dsp, const ReceptionSpec& spec,
                                    std::mt19937_64* rng = nullptr) {
  dsp.Validate(cfg);
  detail::Require(!spec.paths.empty(), "SynthesizeReception: need at least one path");
  detail::Require(spec.duration > 0.0, "SynthesizeReception: duration must be > 0");
  const double fs = dsp.sample_rate;
  const double tc = cfg.chip_duration;
  const double signal_time = chips.size() * tc;
  Waveform wf;
  wf.sample_rate = fs;
  wf.samples.assign(static_cast<std::size_t>(std::llround(spec.duration * fs)), 0.0);
  const double w = 2.0 * std::numbers::pi * (cfg.carrier_hz + spec.frequency_offset_hz);
  for (const PathComponent& path : spec.paths) {
    detail::Require(path.delay >= 0.0, "SynthesizeReception: path delays must be >= 0");
    const auto k0 = static_cast<std::size_t>(std::max(0.0, std::floor(path.delay * fs) - 1));
    const auto k1 = std::min(wf.samples.size(),
                             static_cast<std::size_t>(std::ceil((path.delay + signal_time) * fs) + 2));
    for (std::size_t k = k0; k < k1; ++k) {
      const double t = k / fs;
      const double chip = detail::CodeAverage(chips, tc, path.delay, t - 0.5 / fs, t + 0.5 / fs);
      wf.samples[k] += path.amplitude * chip * std::cos(w * (t - path.delay) + path.phase);
    }
  }
  std::optional<double> n0 = spec.noise_density;
  if (!n0 && spec.esn0_db) {
    const double a = spec.paths.front().amplitude;
    n0 = a * a * signal_time / 2.0 / DbToLinear(*spec.esn0_db);
  }
  if (n0 && *n0 > 0.0) {
    detail::Require(rng != nullptr, "SynthesizeReception: noise requires a random stream");
    std::normal_distribution<double> noise(0.0, NoiseStdForDensity(*n0, fs));
    for (double& s : wf.samples) s += noise(*rng);
  }
  return wf;
}

// ---------------------------------------------------------------------------
// Baseband conversion.

// Windowed-sinc (Hamming) low-pass with unit DC gain and odd length.
inline std::vector<double> DesignLowpass(double cutoff_hz, double sample_rate, int taps) {
  detail::Require(taps >= 3 && taps % 2 == 1, "DesignLowpass: taps must be odd and >= 3");
  detail::Require(cutoff_hz > 0.0 && cutoff_hz < sample_rate / 2.0,
                  "DesignLowpass: cutoff must lie in (0, fs/2)");
  std::vector<double> h(taps);
  const int m = taps / 2;
  const double fc = cutoff_hz / sample_rate;
  double sum = 0.0;
  for (int i = 0; i < taps; ++i) {
    const int k = i - m;
    const double sinc = k == 0 ? 2.0 * fc
                               : std::sin(2.0 * std::numbers::pi * fc * k) / (std::numbers::pi * k);
    const double window = 0.54 - 0.46 * std::cos(2.0 * std::numbers::pi * i / (taps - 1));
    h[i] = sinc * window;
    sum += h[i];
  }
  for (double& v : h) v /= sum;
  return h;
}

// Two-sided noise-equivalent bandwidth fs * sum h^2 of a filter.
inline double NoiseBandwidth(std::span<const double> h, double sample_rate) {
  double e = 0.0;
  for (double v : h) e += v * v;
  return e * sample_rate;
}

struct Baseband {
  std::vector<Complex> samples;
  double sample_rate = 0.0;
  double bandwidth = 0.0;  // noise-equivalent, two-sided
};

// sqrt(2) x(t) e^{-j w t}, low-pass filtered with the group delay removed.
inline Baseband ToBaseband(const Waveform& wf, const AudioRangingConfig& cfg, const DspConfig& dsp,
                           double frequency_offset_hz = 0.0) {
  dsp.Validate(cfg);
  detail::Require(!wf.samples.empty(), "ToBaseband: empty waveform");
  detail::Require(std::abs(wf.sample_rate - dsp.sample_rate) < 1e-9,
                  "ToBaseband: waveform sample rate differs from the configuration");
  const double fs = wf.sample_rate;
  const std::size_t n = wf.samples.size();
  const double w = 2.0 * std::numbers::pi * (cfg.carrier_hz + frequency_offset_hz);
  std::vector<Complex> mixed(n);
  for (std::size_t k = 0; k < n; ++k) {
    mixed[k] = std::numbers::sqrt2 * wf.samples[k] * std::polar(1.0, -w * (k / fs));
  }
  const std::vector<double> h = DesignLowpass(dsp.lowpass_hz, fs, dsp.FirTaps());
  const int m = static_cast<int>(h.size()) / 2;
  Baseband out;
  out.sample_rate = fs;
  out.bandwidth = NoiseBandwidth(h, fs);
  out.samples.assign(n, Complex{});
  for (std::size_t k = 0; k < n; ++k) {
    const int lo = std::max(0, static_cast<int>(k) - m);
    const int hi = std::min(static_cast<int>(n) - 1, static_cast<int>(k) + m);
    double re = 0.0;
    double im = 0.0;
    for (int j = lo; j <= hi; ++j) {
      const double tap = h[static_cast<std::size_t>(static_cast<int>(k) - j + m)];
      re += tap * mixed[j].real();
      im += tap * mixed[j].imag();
    }
    out.samples[k] = {re, im};
  }
  return out;
}

// Noise density from the filtered I/Q norm: sum |z|^2 / (N B_S).
inline double EstimateN0(std::span<const Complex> baseband, double bandwidth) {
  detail::Require(!baseband.empty(), "EstimateN0: empty input");
  detail::Require(bandwidth > 0.0 && std::isfinite(bandwidth), "EstimateN0: bandwidth must be > 0");
  double e = 0.0;
  for (const Complex& z : baseband) e += std::norm(z);
  return e / (static_cast<double>(baseband.size()) * bandwidth);
}

inline double EstimateN0(const Waveform& wf, const AudioRangingConfig& cfg, const DspConfig& dsp) {
  const Baseband bb = ToBaseband(wf, cfg, dsp);
  return EstimateN0(bb.samples, bb.bandwidth);
}

// ---------------------------------------------------------------------------
// Correlation.

// Correlates a baseband record against the rectangular code replica at an
// arbitrary (sub-sample) delay. Samples are treated as piecewise constant over
// their cells, so C(tau) is continuous in tau.
class Correlator {
 public:
  Correlator(const Baseband& bb, std::span<const int> chips, double chip_duration,
             CorrelatorGain gain = {})
      : chips_(chips.begin(), chips.end()),
        fs_(bb.sample_rate),
        chip_samples_(chip_duration * bb.sample_rate),
        prefix_(bb.samples.size() + 1),
        samples_(bb.samples),
        gain_(gain) {
    for (std::size_t k = 0; k < samples_.size(); ++k) prefix_[k + 1] = prefix_[k] + samples_[k];
    n0_ = EstimateN0(samples_, bb.bandwidth);
    signal_duration_ = chips_.size() * chip_duration;
  }

  // (1/N) sum z[k] c(t_k - tau); equals A/sqrt(2) e^{j phi} on a clean,
  // unfiltered, aligned signal.
  Complex operator()(double tau) const {
    Complex acc{};
    double a = tau * fs_ + 0.5;
    for (int chip : chips_) {
      const double b = a + chip_samples_;
      const Complex seg = Integral(b) - Integral(a);
      acc += chip > 0 ? seg : -seg;
      a = b;
    }
    return acc / (chips_.size() * chip_samples_);
  }

  double Power(double tau) const { return std::norm((*this)(tau)); }

  // Normalised power |C|^2 T / N0.
  double Snr(double tau) const { return Power(tau) * signal_duration_ / n0_; }

  // E/N0 estimate, unbiased on an aligned peak: (|C|^2 T / N0 - kappa) / alpha^2.
  double Esn0(double tau) const {
    return (Snr(tau) - gain_.kappa) / (gain_.alpha * gain_.alpha);
  }

  double n0() const { return n0_; }
  double signal_duration() const { return signal_duration_; }
  const CorrelatorGain& gain() const { return gain_; }

 private:
  Complex Integral(double x) const {
    const double n = static_cast<double>(samples_.size());
    if (x <= 0.0) return {};
    if (x >= n) return prefix_.back();
    const double whole = std::floor(x);
    const auto k = static_cast<std::size_t>(whole);
    return prefix_[k] + (x - whole) * samples_[k];
  }

  std::vector<int> chips_;
  double fs_;
  double chip_samples_;
  std::vector<Complex> prefix_;
  std::vector<Complex> samples_;
  CorrelatorGain gain_;
  double n0_ = 0.0;
  double signal_duration_ = 0.0;
};

// Measures alpha and kappa by passing the noiseless replica through the
// receive chain.
inline CorrelatorGain CalibrateCorrelator(std::span<const int> chips,
                                          const AudioRangingConfig& cfg, const DspConfig& dsp) {
  ReceptionSpec spec;
  spec.duration = chips.size() * cfg.chip_duration;
  const Baseband bb = ToBaseband(SynthesizeReception(chips, cfg, dsp, spec), cfg, dsp);
  const Correlator corr(bb, chips, cfg.chip_duration);
  const double n = chips.size() * cfg.chip_duration * dsp.sample_rate;
  double energy = 0.0;
  for (const Complex& z : bb.samples) energy += std::norm(z);
  return {std::abs(corr(0.0)) * std::numbers::sqrt2, 2.0 * energy / n};
}

// Ranging signal with its receive-chain gain measured.
inline RangingSignal PrepareReference(const AudioRangingConfig& cfg, const DspConfig& dsp,
                                      std::uint64_t code_seed) {
  RangingSignal ref = GenerateRangingSignal(cfg, dsp, code_seed);
  ref.gain = CalibrateCorrelator(ref.chips, cfg, dsp);
  return ref;
}

struct DllOutcome {
  double delay = 0.0;
  int iterations = 0;
};

// Early-late power loop: D = |C(tau + d)|^2 - |C(tau - d)|^2 with
// d = half_spacing_factor * Delta * T_c. The step starts at
// initial_step_chips, halves whenever D changes sign and the loop stops once
// the step falls below final_step_chips or after max_iterations.
inline DllOutcome TrackDelay(const Correlator& corr, double start, const AudioRangingConfig& cfg,
                             const DspConfig& dsp) {
  const double tc = cfg.chip_duration;
  const double d = dsp.half_spacing_factor * cfg.correlator_spacing * tc;
  double step = dsp.dll.initial_step_chips * tc;
  const double final_step = dsp.dll.final_step_chips * tc;
  double tau = start;
  int previous = 0;
  DllOutcome out;
  for (int it = 0; it < dsp.dll.max_iterations; ++it) {
    out.iterations = it + 1;
    const double disc = corr.Power(tau + d) - corr.Power(tau - d);
    const int sign = (disc > 0.0) - (disc < 0.0);
    if (sign == 0) break;
    if (previous != 0 && sign != previous) {
      step *= 0.5;
      if (step < final_step) break;
    }
    tau += sign * step;
    previous = sign;
  }
  out.delay = tau;
  return out;
}

struct CorrelationResult {
  std::optional<double> delay_estimate;  // seconds, set only when acquired
  double coarse_delay = 0.0;             // selected grid cell
  double peak_magnitude = 0.0;           // |C| / sqrt(N0 / T)
  double esn0_estimate = 0.0;            // dB
  double n0_estimate = 0.0;
  double frequency_offset_hz = 0.0;
  int dll_iterations = 0;
  bool acquired = false;
};

// Amplitude |C| sqrt(T / N0) at which the E/N0 estimate equals threshold_db.
inline double ThresholdMagnitude(double threshold_db, const CorrelatorGain& gain = {}) {
  return std::sqrt(gain.alpha * gain.alpha * DbToLinear(threshold_db) + gain.kappa);
}

// Coarse grid cells in the search window.
inline std::vector<double> SearchGrid(const AudioRangingConfig& cfg, const DspConfig& dsp) {
  const double spacing = cfg.chip_duration / 2.0;
  const int cells = static_cast<int>(std::floor(dsp.search_window_chips * 2.0 + 1e-9)) + 1;
  std::vector<double> grid(cells);
  for (int i = 0; i < cells; ++i) grid[i] = dsp.search_start + i * spacing;
  return grid;
}

// Early-to-late selection: index of the first local maximum whose power is
// at least ratio times the strongest cell and at least `floor`, looking no
// more than max_lead cells ahead of the strongest cell.
inline std::size_t EarliestStrongPeak(std::span<const double> power, double ratio,
                                      std::size_t max_lead = std::numeric_limits<std::size_t>::max(),
                                      double floor = 0.0) {
  detail::Require(!power.empty(), "EarliestStrongPeak: empty search");
  const auto strongest = std::max_element(power.begin(), power.end());
  const double best = *strongest;
  const auto top = static_cast<std::size_t>(strongest - power.begin());
  const double level = std::max(ratio * best, floor);
  for (std::size_t i = top > max_lead ? top - max_lead : 0; i < top; ++i) {
    const bool left = i == 0 || power[i] >= power[i - 1];
    const bool right = i + 1 == power.size() || power[i] >= power[i + 1];
    if (left && right && power[i] >= level) return i;
  }
  return top;
}

// Full receiver on an already prepared correlator.
inline CorrelationResult AcquireAndTrack(const Correlator& corr, const AudioRangingConfig& cfg,
                                         const DspConfig& dsp) {
  const std::vector<double> grid = SearchGrid(cfg, dsp);
  std::vector<double> power(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) power[i] = corr.Power(grid[i]);
  // Cells too weak to pass the acquisition test cannot be the direct path.
  const double floor = corr.n0() / corr.signal_duration() *
                       std::pow(ThresholdMagnitude(dsp.acquisition_threshold_db, corr.gain()), 2);
  const std::size_t lead = dsp.echo_span_chips > 0.0
                               ? static_cast<std::size_t>(std::llround(2.0 * dsp.echo_span_chips))
                               : power.size();
  const std::size_t pick = EarliestStrongPeak(power, dsp.echo_power_ratio, lead,
                                              dsp.gate_candidates ? floor : 0.0);
  CorrelationResult result;
  result.coarse_delay = grid[pick];
  result.n0_estimate = corr.n0();
  const DllOutcome dll = TrackDelay(corr, grid[pick], cfg, dsp);
  result.dll_iterations = dll.iterations;
  const double scale = std::sqrt(corr.signal_duration() / corr.n0());
  result.peak_magnitude = std::sqrt(corr.Power(dll.delay)) * scale;
  const double esn0 = corr.Esn0(dll.delay);
  result.esn0_estimate = 10.0 * std::log10(std::max(esn0, 1e-12));
  result.acquired = result.esn0_estimate >= dsp.acquisition_threshold_db;
  if (result.acquired) result.delay_estimate = dll.delay;
  return result;
}

// Mixes, filters and searches `rx` for the reference code. With
// frequency_search set, every offset on the grid is tried and the one with the
// strongest coarse cell is kept.
inline CorrelationResult AcquireAndTrack(const Waveform& rx, const RangingSignal& reference,
                                         const AudioRangingConfig& cfg, const DspConfig& dsp) {
  dsp.Validate(cfg);
  std::vector<double> offsets = {0.0};
  if (dsp.frequency_search && dsp.frequency_span_hz > 0.0) {
    offsets.clear();
    const int steps = static_cast<int>(std::floor(dsp.frequency_span_hz / dsp.frequency_step_hz));
    for (int i = -steps; i <= steps; ++i) offsets.push_back(i * dsp.frequency_step_hz);
  }
  CorrelationResult best;
  double best_power = -1.0;
  for (double offset : offsets) {
    const Correlator corr(ToBaseband(rx, cfg, dsp, offset), reference.chips, cfg.chip_duration,
                          reference.gain);
    CorrelationResult r = AcquireAndTrack(corr, cfg, dsp);
    r.frequency_offset_hz = offset;
    const double p = corr.Power(r.coarse_delay);
    if (p > best_power) {
      best_power = p;
      best = r;
    }
  }
  return best;
}

// ---------------------------------------------------------------------------
// Delay-error experiment.

struct DspExperimentConfig {
  double esn0_db = 6.0;
  int trials = 500;
  double nominal_delay_chips = 10.0;
  bool random_fraction = true;  // add U(0, 1) chip to the nominal delay
  double tail_chips = 2.0;      // receive window beyond the latest arrival
  std::uint64_t seed = 1;
  std::uint64_t code_seed = 1;
};

struct DelayStats {
  int count = 0;
  double mean = 0.0;  // seconds
  double std = 0.0;   // seconds

  static DelayStats Of(std::span<const double> errors) {
    DelayStats s;
    s.count = static_cast<int>(errors.size());
    if (s.count == 0) return s;
    for (double e : errors) s.mean += e;
    s.mean /= s.count;
    if (s.count > 1) {
      double ss = 0.0;
      for (double e : errors) ss += (e - s.mean) * (e - s.mean);
      s.std = std::sqrt(ss / (s.count - 1));
    }
    return s;
  }
};

struct DspTrial {
  double true_delay = 0.0;         // seconds
  bool acquired = false;
  double acquisition_error = 0.0;  // seconds, meaningful when acquired
  double tracking_error = 0.0;     // seconds
};

struct DspExperimentResult {
  int trials = 0;
  int acquired = 0;
  int wrong_peak = 0;  // acquired with |error| > one chip
  double predicted_std = 0.0;
  // Receiver as a whole: errors of acquired trials.
  DelayStats acquisition;
  // Loop jitter: the discriminator loop started from the grid cell nearest the
  // true delay, on the same noise realisation.
  DelayStats tracking;
  std::vector<DspTrial> outcomes;

  double AcquisitionRate() const { return trials ? static_cast<double>(acquired) / trials : 0.0; }
};

inline DspExperimentResult RunDspExperiment(const AudioRangingConfig& cfg, const DspConfig& dsp,
                                            const DspExperimentConfig& ex) {
  dsp.Validate(cfg);
  detail::Require(ex.trials >= 1, "RunDspExperiment: trials must be >= 1");
  const RangingSignal reference = PrepareReference(cfg, dsp, ex.code_seed);
  const double tc = cfg.chip_duration;
  const double window = dsp.search_start + (dsp.search_window_chips + ex.tail_chips) * tc +
                        cfg.SignalDuration();
  const double spacing = tc / 2.0;

  DspExperimentResult out;
  out.trials = ex.trials;
  out.predicted_std = DelayStd(cfg, ex.esn0_db);
  out.outcomes.resize(ex.trials);
  ParallelBlocks(ex.trials, [&](std::int64_t t) {
    auto rng = RandomStream(ex.seed, static_cast<std::uint64_t>(t));
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const double fraction = ex.random_fraction ? unit(rng) : 0.0;
    const double delay = dsp.search_start + (ex.nominal_delay_chips + fraction) * tc;
    ReceptionSpec spec;
    spec.paths = {{delay, 1.0, 2.0 * std::numbers::pi * unit(rng)}};
    spec.duration = window;
    spec.esn0_db = ex.esn0_db;
    const Waveform rx = SynthesizeReception(reference.chips, cfg, dsp, spec, &rng);
    const Correlator corr(ToBaseband(rx, cfg, dsp), reference.chips, tc, reference.gain);
    const CorrelationResult r = AcquireAndTrack(corr, cfg, dsp);
    DspTrial& trial = out.outcomes[t];
    trial.true_delay = delay;
    trial.acquired = r.acquired;
    if (r.acquired) trial.acquisition_error = *r.delay_estimate - delay;
    const double nearest =
        dsp.search_start + std::round((delay - dsp.search_start) / spacing) * spacing;
    trial.tracking_error = TrackDelay(corr, nearest, cfg, dsp).delay - delay;
  });

  std::vector<double> acquisition_errors;
  std::vector<double> tracking_errors;
  for (const DspTrial& trial : out.outcomes) {
    tracking_errors.push_back(trial.tracking_error);
    if (!trial.acquired) continue;
    ++out.acquired;
    acquisition_errors.push_back(trial.acquisition_error);
    if (std::abs(trial.acquisition_error) > tc) ++out.wrong_peak;
  }
  out.acquisition = DelayStats::Of(acquisition_errors);
  out.tracking = DelayStats::Of(tracking_errors);
  return out;
}

struct FalseAcquisition {
  int declared = 0;
  int trials = 0;
  ProportionInterval wilson95;

  double Rate() const { return trials ? static_cast<double>(declared) / trials : 0.0; }
};

// Fraction of pure-noise receptions that the receiver declares acquired.
inline FalseAcquisition FalseAcquisitionRate(const AudioRangingConfig& cfg, const DspConfig& dsp,
                                             int trials, std::uint64_t seed,
                                             std::uint64_t code_seed = 1) {
  dsp.Validate(cfg);
  detail::Require(trials >= 1, "FalseAcquisitionRate: trials must be >= 1");
  const RangingSignal reference = PrepareReference(cfg, dsp, code_seed);
  const double window =
      dsp.search_start + (dsp.search_window_chips + 2.0) * cfg.chip_duration + cfg.SignalDuration();
  // Same density as a 0 dB E/N0 reception; the level is irrelevant to the
  // outcome because the statistic is normalised by the estimated N0.
  const double n0 = cfg.SignalDuration() / 2.0;
  std::vector<char> declared(trials, 0);
  ParallelBlocks(trials, [&](std::int64_t t) {
    auto rng = RandomStream(seed, static_cast<std::uint64_t>(t));
    ReceptionSpec spec;
    spec.paths = {{0.0, 0.0, 0.0}};
    spec.duration = window;
    spec.noise_density = n0;
    const Waveform rx = SynthesizeReception(reference.chips, cfg, dsp, spec, &rng);
    declared[t] = AcquireAndTrack(rx, reference, cfg, dsp).acquired;
  });
  FalseAcquisition out;
  out.trials = trials;
  for (char d : declared) out.declared += d;
  out.wilson95 = WilsonInterval(out.declared, trials);
  return out;
}

// ---------------------------------------------------------------------------
// Raw waveform files: 32-bit float little-endian samples plus a one-line JSON
// sidecar "<path>.json" holding sample_rate and length.

namespace detail {

inline std::uint32_t ToLittleEndian(std::uint32_t v) {
  if constexpr (std::endian::native == std::endian::big) {
    v = (v >> 24) | ((v >> 8) & 0xFF00u) | ((v << 8) & 0xFF0000u) | (v << 24);
  }
  return v;
}

}  // namespace detail

inline void WriteRawWaveform(const std::string& path, const Waveform& wf) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path + " for writing");
  for (double s : wf.samples) {
    const std::uint32_t bits = detail::ToLittleEndian(std::bit_cast<std::uint32_t>(static_cast<float>(s)));
    out.write(reinterpret_cast<const char*>(&bits), sizeof bits);
  }
  std::ofstream side(path + ".json");
  if (!out || !side) throw IoError("failed writing " + path);
  side << nlohmann::json{{"sample_rate", wf.sample_rate}, {"length", wf.samples.size()}}.dump()
       << "\n";
  if (!side) throw IoError("failed writing " + path + ".json");
}

inline Waveform ReadRawWaveform(const std::string& path) {
  std::ifstream side(path + ".json");
  if (!side) throw IoError("cannot open " + path + ".json");
  nlohmann::json meta;
  try {
    side >> meta;
  } catch (const nlohmann::json::exception& e) {
    throw IoError("malformed sidecar " + path + ".json: " + e.what());
  }
  if (!meta.contains("sample_rate") || !meta.contains("length")) {
    throw IoError("sidecar " + path + ".json lacks sample_rate or length");
  }
  Waveform wf;
  wf.sample_rate = meta["sample_rate"].get<double>();
  const auto length = meta["length"].get<std::size_t>();
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  wf.samples.resize(length);
  for (std::size_t k = 0; k < length; ++k) {
    std::uint32_t bits = 0;
    if (!in.read(reinterpret_cast<char*>(&bits), sizeof bits)) {
      throw IoError(path + " is shorter than its sidecar length");
    }
    wf.samples[k] = std::bit_cast<float>(detail::ToLittleEndian(bits));
  }
  return wf;
}

}  // namespace proxtrace

#endif  // PROXTRACE_AUDIO_DSP_HPP_
