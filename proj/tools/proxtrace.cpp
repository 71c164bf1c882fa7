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

// proxtrace: tables, curves, validation and simulations as CSV files.
//
// Exit codes: 0 success, 1 check failure, 2 configuration or usage error,
// 3 I/O error.

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "proxtrace/proxtrace.hpp"

namespace fs = std::filesystem;
using namespace proxtrace;  // NOLINT(build/namespaces)

namespace {

constexpr int kExitOk = 0;
constexpr int kExitCheckFailed = 1;
constexpr int kExitConfig = 2;
constexpr int kExitIo = 3;

struct Flags {
  std::optional<std::string> config;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<std::int64_t> trials;
  std::optional<std::string> positions;
};

RunConfig ResolveConfig(const Flags& flags) {
  RunConfig cfg = LoadRunConfig(flags.config);
  if (flags.seed) cfg.seed = flags.seed;
  if (flags.out) cfg.out_dir = *flags.out;
  if (flags.trials) cfg.trials = *flags.trials;
  if (flags.positions) ApplySettings(cfg, {{"protocol.positions", *flags.positions}});
  cfg.Validate();
  return cfg;
}

fs::path OutputDir(const RunConfig& cfg) {
  const fs::path dir(cfg.out_dir);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) {
    throw IoError("cannot create output directory " + dir.string());
  }
  return dir;
}

void Emit(const CsvTable& table, const fs::path& path) {
  table.Write(path);
  std::cout << "wrote " << path.string() << "\n";
}

int CmdTables(const RunConfig& cfg) {
  const fs::path dir = OutputDir(cfg);
  const PropagationConfig& prop = cfg.propagation;
  const CrowdLayout layout = CrowdLayout::DensestPacking(prop.critical_distance, cfg.crowd_density);

  std::vector<std::string> header = {"ratio[1]"};
  for (int x0 : cfg.table3_x0) header.push_back("pi_fa_x0_" + std::to_string(x0) + "[1]");
  header.push_back("large_x0_limit[1]");
  CsvTable table3(header);
  for (double ratio : cfg.table3_ratios) {
    std::vector<std::string> row = {FormatNumber(ratio)};
    for (int x0 : cfg.table3_x0) {
      const int y = static_cast<int>(std::lround(ratio * x0));
      row.push_back(FormatNumber(SolvePfaTarget(cfg.k_y, y, x0, cfg.quarantine_target).pi_fa));
    }
    row.push_back(FormatNumber(PfaTargetLargeX0Limit(ratio)));
    table3.AddRow(std::move(row));
  }
  Emit(table3, dir / "table3_pfa_targets.csv");

  CsvTable table4({"n[1]", "pi_md_av[1]"});
  for (int n : cfg.table4_n) table4.AddRow(n, PiMdAverageLognormal(cfg.near, prop, layout, n));
  Emit(table4, dir / "table4_pi_md_av.csv");

  CsvTable table5({"n[1]", "x0[1]", "pi_md_av[1]", "reduction[1]", "p_fa[1]", "rho[1/s]",
                   "rho_fraction[1/s]"});
  for (const PerformanceRow& r :
       PerformanceTable(cfg.near, cfg.far, prop, layout, cfg.table5_n, cfg.table5_x0)) {
    table5.AddRow(r.n, r.x0, r.pi_md_av, r.reduction, r.p_fa, r.rate.value(), r.rate.ToString());
  }
  Emit(table5, dir / "table5_performance.csv");
  return kExitOk;
}

int CmdCurves(const RunConfig& cfg) {
  const fs::path dir = OutputDir(cfg);
  const PropagationConfig& prop = cfg.propagation;
  const double dc = prop.critical_distance;
  const int points = cfg.curve_points;

  CsvTable fig2({"d[m]", "rice_n1[1]", "rice_n60[1]", "lognormal_n1[1]", "lognormal_n60[1]"});
  for (int i = 1; i <= points; ++i) {
    const double d = dc * i / points;
    fig2.AddRow(d, PiMdRice(cfg.rice, prop, 1, d), PiMdRice(cfg.rice, prop, 60, d),
                PiMdLognormal(cfg.near, prop, 1, d), PiMdLognormal(cfg.near, prop, 60, d));
  }
  Emit(fig2, dir / "fig2_pi_md.csv");

  CsvTable fig5({"d[m]", "pi_md_audio[1]", "pi_fa_audio_mirrored[1]"});
  for (int i = 1; i <= points; ++i) {
    const double d = dc * i / points;
    const double mirrored = dc * dc / d;
    // At d = d_c the mirrored distance sits on the boundary, where both
    // probabilities equal Q(0).
    const double pfa = mirrored > dc ? PiFaAudio(cfg.audio_sigma, dc, mirrored) : GaussianQ(0.0);
    fig5.AddRow(d, PiMdAudio(cfg.audio_sigma, dc, d), pfa);
  }
  Emit(fig5, dir / "fig5_audio.csv");
  return kExitOk;
}

int CmdValidate(const RunConfig& cfg) {
  cfg.RequireSeed();
  const fs::path dir = OutputDir(cfg);
  const ValidationReport report = RunValidation(cfg);
  for (const CheckResult& c : report.checks) {
    std::printf("%-40s expected=%-12s got=%-14s tol=%-12s %s\n", c.name.c_str(),
                FormatNumber(c.expected).c_str(), FormatNumber(c.got).c_str(),
                FormatNumber(c.tolerance).c_str(), ToString(c.status));
  }
  Emit(report.ToCsv(), dir / "validate_report.csv");
  Emit(TraceToCsv(report.example_trace), dir / "episode_trace.csv");
  if (report.AnyFailed()) {
    std::cout << "validation: at least one check failed\n";
    return kExitCheckFailed;
  }
  std::cout << "validation: no failed checks\n";
  return kExitOk;
}

int CmdProtocol(const RunConfig& cfg) {
  const std::uint64_t seed = cfg.RequireSeed();
  const int k = static_cast<int>(cfg.positions.size());
  if (k < 2) throw ConfigError("protocol needs at least two device positions");
  const fs::path dir = OutputDir(cfg);
  auto rng = RandomStream(seed, 0);
  std::uniform_real_distribution<double> delay(0.0, cfg.max_device_delay);
  std::uniform_real_distribution<double> offset(0.0, cfg.max_clock_offset);
  std::vector<NetworkDevice> devices;
  for (double x : cfg.positions) {
    DeviceTimingProfile p;
    p.tx_delay = delay(rng);
    p.rx_delay = delay(rng);
    p.local_path = 0.14 / cfg.audio.sound_speed;
    p.clock_offset = offset(rng);
    devices.push_back({x, p});
  }
  std::mt19937_64 noise_rng = RandomStream(seed, 1);
  const NetworkCycle cycle =
      SimulateNetworkCycle(devices, cfg.audio, 1.0, cfg.timestamp_noise_std, &noise_rng);

  CsvTable transcript({"clock_time[s]", "device[-]", "source[-]", "kind[-]"});
  for (const TranscriptEvent& e : cycle.transcript) {
    transcript.AddRow(e.clock_time, e.device, e.source, e.kind);
  }
  Emit(transcript, dir / "protocol_transcript.csv");

  CsvTable deltas({"i[-]", "j[-]", "delta_t[s]"});
  for (int i = 0; i < k; ++i) {
    for (int j = 0; j < k; ++j) {
      if (i != j) deltas.AddRow(i, j, cycle.delta[i][j]);
    }
  }
  Emit(deltas, dir / "protocol_deltas.csv");

  CsvTable distances({"i[-]", "j[-]", "true_distance[m]", "recovered_distance[m]", "error[m]"});
  for (int i = 0; i < k; ++i) {
    for (int j = i + 1; j < k; ++j) {
      const double truth = std::abs(cfg.positions[i] - cfg.positions[j]);
      distances.AddRow(i, j, truth, cycle.distance[i][j], cycle.distance[i][j] - truth);
      std::printf("pair %d-%d: true %.6f m, recovered %.6f m\n", i, j, truth, cycle.distance[i][j]);
    }
  }
  Emit(distances, dir / "protocol_distances.csv");
  std::printf("devices %d, slot %.3f s, cycle %.3f s, exchanged time differences %d\n", k,
              cycle.schedule.slot_duration, cycle.schedule.cycle_duration,
              cycle.schedule.exchanged_values);
  return kExitOk;
}

int CmdDspExperiment(const RunConfig& cfg) {
  const std::uint64_t seed = cfg.RequireSeed();
  const fs::path dir = OutputDir(cfg);
  const double tc = cfg.audio.chip_duration;
  CsvTable summary({"esn0[dB]", "trials[1]", "acquired[1]", "acquisition_rate[1]",
                    "wrong_peak[1]", "predicted_std[Tc]", "tracking_std[Tc]", "tracking_mean[Tc]",
                    "tracking_std_ratio[1]", "acquisition_std[Tc]", "acquisition_mean[Tc]"});
  CsvTable per_trial({"esn0[dB]", "trial[-]", "true_delay[s]", "acquired[-]",
                      "acquisition_error[Tc]", "tracking_error[Tc]"});
  for (std::size_t i = 0; i < cfg.dsp_esn0_db.size(); ++i) {
    DspExperimentConfig ex;
    ex.esn0_db = cfg.dsp_esn0_db[i];
    ex.trials = cfg.dsp_trials;
    ex.nominal_delay_chips = cfg.dsp_nominal_delay_chips;
    ex.seed = SplitMix64(seed + i);
    ex.code_seed = cfg.dsp_code_seed;
    const DspExperimentResult r = RunDspExperiment(cfg.audio, cfg.dsp, ex);
    summary.AddRow(ex.esn0_db, r.trials, r.acquired, r.AcquisitionRate(), r.wrong_peak,
                   r.predicted_std / tc, r.tracking.std / tc, r.tracking.mean / tc,
                   r.tracking.std / r.predicted_std, r.acquisition.std / tc,
                   r.acquisition.mean / tc);
    for (std::size_t t = 0; t < r.outcomes.size(); ++t) {
      const DspTrial& o = r.outcomes[t];
      per_trial.AddRow(ex.esn0_db, t, o.true_delay, o.acquired,
                       o.acquired ? o.acquisition_error / tc : std::nan(""), o.tracking_error / tc);
    }
    std::printf("E/N0 %5.1f dB: tracking std %.4f Tc (formula %.4f Tc, ratio %.3f), "
                "acquisition rate %.3f\n",
                ex.esn0_db, r.tracking.std / tc, r.predicted_std / tc,
                r.tracking.std / r.predicted_std, r.AcquisitionRate());
  }
  Emit(summary, dir / "dsp_experiment.csv");
  Emit(per_trial, dir / "dsp_trials.csv");

  // One example reception at the first E/N0 for inspection.
  const RangingSignal ref = PrepareReference(cfg.audio, cfg.dsp, cfg.dsp_code_seed);
  ReceptionSpec spec;
  spec.paths = {{(cfg.dsp_nominal_delay_chips + 0.5) * tc, 1.0, 0.0}};
  spec.duration = (cfg.dsp.search_window_chips + 2.0) * tc + cfg.audio.SignalDuration();
  spec.esn0_db = cfg.dsp_esn0_db.front();
  auto rng = RandomStream(seed, 999);
  WriteRawWaveform((dir / "dsp_example_rx.f32").string(),
                   SynthesizeReception(ref.chips, cfg.audio, cfg.dsp, spec, &rng));
  WriteRawWaveform((dir / "dsp_reference.f32").string(), ref.waveform);
  std::cout << "wrote " << (dir / "dsp_example_rx.f32").string() << " and "
            << (dir / "dsp_reference.f32").string() << " (+ .json sidecars)\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Proximity-tracing detection statistics, ranging and validation"};
  app.require_subcommand(1);
  Flags flags;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", flags.config, "INI configuration file");
    sub->add_option("--seed", flags.seed, "Base random seed");
    sub->add_option("--out", flags.out, "Output directory");
    sub->add_option("--trials", flags.trials, "Monte Carlo trials per check")
        ->check(CLI::PositiveNumber);
  };
  CLI::App* tables = app.add_subcommand("tables", "Write the pi_fa target, pi_md_av and performance tables");
  CLI::App* curves = app.add_subcommand("curves", "Write missed-detection and audio decision curves");
  CLI::App* validate = app.add_subcommand("validate", "Run the closed-form versus simulation checks");
  CLI::App* protocol = app.add_subcommand("protocol", "Simulate one networked ranging cycle");
  CLI::App* dsp = app.add_subcommand("dsp-experiment", "Run the delay-estimator experiment");
  for (CLI::App* sub : {tables, curves, validate, protocol, dsp}) add_common(sub);
  protocol->add_option("--positions", flags.positions, "Comma-separated device positions in meters");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfig;
  }

  try {
    const RunConfig cfg = ResolveConfig(flags);
    if (*tables) return CmdTables(cfg);
    if (*curves) return CmdCurves(cfg);
    if (*validate) return CmdValidate(cfg);
    if (*protocol) return CmdProtocol(cfg);
    if (*dsp) return CmdDspExperiment(cfg);
  } catch (const IoError& e) {
    std::cerr << "I/O error: " << e.what() << "\n";
    return kExitIo;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "I/O error: " << e.what() << "\n";
    return kExitIo;
  } catch (const ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::domain_error& e) {
    std::cerr << "invalid parameter: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitCheckFailed;
  }
  return kExitConfig;
}
