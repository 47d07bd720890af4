// Copyright (c) the gustrom project contributors.
// SPDX-License-Identifier: Apache-2.0

#ifndef GUSTROM_SWEEP_HPP
#define GUSTROM_SWEEP_HPP

#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "gustrom/sim.hpp"

namespace gustrom {

enum class VelocityLaw { constant_fraction, power_law };

// Gust design-velocity laws. constant_fraction: w0 = fraction * U_inf.
// power_law: w0 = U_ref * (H_g / H_ref)^exponent, clipped to
// [w0_min, w0_max].
struct VelocityLawSpec {
  VelocityLaw law = VelocityLaw::constant_fraction;
  double fraction = 0.14;
  double U_ref = 1.0;
  double H_ref = 1.0;
  double exponent = 1.0 / 6.0;
  double w0_min = 0.0;
  double w0_max = 1e300;

  void validate() const;
};

double design_gust_velocity(const VelocityLawSpec& law, double H_g, double U_inf);

struct SweepSpec {
  double Hg_min = 0.1;
  double Hg_max = 100.0;
  int n_sites = 1000;
  bool log_spacing = true;
  double U_inf = 1.0;
  double t0 = 0.0;          // gust onset within each run
  double decay_margin = 5.0; // extra gust durations simulated past gust exit
  VelocityLawSpec velocity;
  std::vector<std::string> metric_channels = {"xi"}; // first channel is the objective
  int validate_top_k = 3;

  void validate() const;
  std::vector<double> site_lengths() const; // n_sites gust lengths, ascending
};

struct SiteResult {
  int index = -1;
  double H_g = 0.0;
  double w0 = 0.0;
  bool diverged = false;
  double divergence_time = 0.0;
  std::vector<ChannelMetrics> metrics; // empty when diverged
  double objective = 0.0;              // peak of the first metric channel
  double wall_seconds = 0.0;
};

struct ValidationEntry {
  int site_index = -1;
  double H_g = 0.0;
  std::vector<ChannelMetrics> rom_metrics;
  std::vector<ChannelMetrics> fom_metrics;
  double rel_error = 0.0; // objective channel, |rom - fom| / |fom|
  double fom_wall_seconds = 0.0;
};

struct SweepResult {
  std::vector<SiteResult> sites;
  int worst_index = -1; // argmax of the objective over non-divergent sites
  std::vector<int> diverged_sites;
  std::vector<ValidationEntry> validation; // descending ROM objective
  double rom_build_seconds = 0.0;          // zero when a prebuilt ROM was supplied
  double rom_sim_seconds = 0.0;            // sum over sites
  double fom_per_case_seconds = 0.0;       // mean over validation runs
  double speedup = 0.0; // fom_per_case * n_sites / (build + rom_sim)
  std::shared_ptr<const RomModel> rom;

  const SiteResult& worst() const;
};

// Four-step worst-case search: build (or reuse) the ROM, integrate it over
// every site, take the argmax (ties resolve to the smaller H_g, divergent
// sites are excluded but reported), then re-run the top-k candidates with
// the full model for validation. `workers` > 1 distributes sites over
// threads; results are deterministic regardless of the schedule.
SweepResult run_search(const NonlinearModel& model, const SweepSpec& sweep,
                       const RomBuildOptions& rom_options, const SimOptions& sim,
                       int workers = 1, std::shared_ptr<const RomModel> prebuilt = nullptr);

struct BenchReport {
  int fom_cases = 0;
  double fom_mean_seconds = 0.0;
  int n_sites = 0;
  double extrapolated_fom_seconds = 0.0; // fom_mean * n_sites
  double rom_build_seconds = 0.0;
  double rom_sim_seconds = 0.0;
  double speedup = 0.0; // extrapolated_fom / (rom_build + rom_sim)
};

// Strictly sequential timing comparison: K full-model cases spread over the
// site grid against the complete ROM pipeline (fresh build plus all sites).
BenchReport run_benchmark(const NonlinearModel& model, const SweepSpec& sweep,
                          const RomBuildOptions& rom_options, const SimOptions& sim,
                          int fom_cases = 5);

// sweep.csv: one row per site with round-trip precision. Wall-clock columns
// are informational and excluded from determinism comparisons.
void write_sweep_csv(const SweepResult& result, const SweepSpec& sweep, std::ostream& out);

// summary.txt: worst case, validation table, timings and speedup.
void write_summary(const SweepResult& result, const SweepSpec& sweep, std::ostream& out);

void write_bench_report(const BenchReport& report, std::ostream& out);

} // namespace gustrom

#endif // GUSTROM_SWEEP_HPP
