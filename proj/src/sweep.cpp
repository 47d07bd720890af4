// Copyright (c) the gustrom project contributors.
// SPDX-License-Identifier: Apache-2.0

#include "gustrom/sweep.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <limits>
#include <mutex>
#include <ostream>
#include <string>
#include <thread>
#include <vector>

#include "gustrom/errors.hpp"
#include "gustrom/format.hpp"

namespace gustrom {
namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

// Compact human-readable number for summary prose (CSV keeps full precision).
std::string brief(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

} // namespace

void VelocityLawSpec::validate() const {
  auto fail = [](const std::string& why) { throw ConfigError("velocity law: " + why); };
  if (!(fraction >= 0.0) || !std::isfinite(fraction))
    fail("fraction must be >= 0");
  if (!(U_ref >= 0.0) || !std::isfinite(U_ref))
    fail("U_ref must be >= 0");
  if (!(H_ref > 0.0) || !std::isfinite(H_ref))
    fail("H_ref must be > 0");
  if (!(exponent >= 0.0) || !std::isfinite(exponent))
    fail("exponent must be >= 0");
  if (!(w0_min >= 0.0))
    fail("w0_min must be >= 0");
  if (!(w0_min <= w0_max))
    fail("w0_min must not exceed w0_max");
}

double design_gust_velocity(const VelocityLawSpec& law, double H_g, double U_inf) {
  law.validate();
  if (!(H_g > 0.0) || !std::isfinite(H_g))
    throw ContractViolation("design_gust_velocity: H_g must be positive");
  if (!(U_inf > 0.0) || !std::isfinite(U_inf))
    throw ContractViolation("design_gust_velocity: U_inf must be positive");
  switch (law.law) {
  case VelocityLaw::constant_fraction:
    return law.fraction * U_inf;
  case VelocityLaw::power_law:
    return std::clamp(law.U_ref * std::pow(H_g / law.H_ref, law.exponent), law.w0_min,
                      law.w0_max);
  }
  throw ConfigError("design_gust_velocity: unknown velocity law");
}

void SweepSpec::validate() const {
  auto fail = [](const std::string& why) { throw ConfigError("sweep: " + why); };
  if (!(Hg_min > 0.0) || !std::isfinite(Hg_min))
    fail("Hg_min must be > 0");
  if (!(Hg_max > Hg_min) || !std::isfinite(Hg_max))
    fail("Hg_max must exceed Hg_min");
  if (n_sites < 2)
    fail("n_sites must be at least 2");
  if (!(U_inf > 0.0) || !std::isfinite(U_inf))
    fail("U_inf must be > 0");
  if (!(t0 >= 0.0) || !std::isfinite(t0))
    fail("t0 must be >= 0");
  if (!(decay_margin >= 0.0) || !std::isfinite(decay_margin))
    fail("decay_margin must be >= 0");
  if (metric_channels.empty())
    fail("at least one metric channel is required");
  if (validate_top_k < 1)
    fail("validate_top_k must be at least 1");
  velocity.validate();
}

std::vector<double> SweepSpec::site_lengths() const {
  validate();
  std::vector<double> lengths(static_cast<size_t>(n_sites));
  const int last = n_sites - 1;
  if (log_spacing) {
    const double lo = std::log(Hg_min);
    const double hi = std::log(Hg_max);
    for (int i = 1; i < last; ++i)
      lengths[static_cast<size_t>(i)] = std::exp(lo + (hi - lo) * i / last);
  } else {
    const double span = Hg_max - Hg_min;
    for (int i = 1; i < last; ++i)
      lengths[static_cast<size_t>(i)] = Hg_min + span * i / last;
  }
  lengths.front() = Hg_min;
  lengths.back() = Hg_max;
  return lengths;
}

const SiteResult& SweepResult::worst() const {
  if (worst_index < 0 || worst_index >= static_cast<int>(sites.size()))
    throw ContractViolation("sweep result has no non-divergent worst site");
  return sites[static_cast<size_t>(worst_index)];
}

SweepResult run_search(const NonlinearModel& model, const SweepSpec& sweep,
                       const RomBuildOptions& rom_options, const SimOptions& sim, int workers,
                       std::shared_ptr<const RomModel> prebuilt) {
  sweep.validate();
  if (workers < 1)
    throw ContractViolation("run_search: workers must be >= 1");
  const ModelDescriptor& desc = model.descriptor();

  SweepResult result;

  // Step 1: one-time reduced-model construction (or reuse of a prebuilt one).
  if (prebuilt) {
    if (prebuilt->fom.name != desc.name || prebuilt->fom.n_states != desc.n_states ||
        prebuilt->fom.n_disturbance != desc.n_disturbance ||
        prebuilt->fom.state_labels != desc.state_labels)
      throw ContractViolation("run_search: the reduced model describes a different system");
    result.rom = std::move(prebuilt);
  } else {
    const auto build_start = Clock::now();
    const Eigen::VectorXd u_c = Eigen::VectorXd::Zero(desc.n_control);
    const Equilibrium trim =
        find_equilibrium(model, Eigen::VectorXd::Zero(desc.n_states), u_c);
    if (!trim.converged)
      throw SolverError("run_search: trim did not converge (residual " +
                        format_double(trim.residual_norm) + ")");
    result.rom = std::make_shared<const RomModel>(assemble_rom(model, trim, u_c, rom_options));
    result.rom_build_seconds = seconds_since(build_start);
  }
  const std::shared_ptr<const RomModel> rom = result.rom;

  const std::vector<double> lengths = sweep.site_lengths();
  const int n = sweep.n_sites;
  result.sites.assign(static_cast<size_t>(n), SiteResult{});

  auto site_options = [&](double H_g) {
    SimOptions options = sim;
    options.t_end = sweep.t0 + (1.0 + sweep.decay_margin) * (H_g / sweep.U_inf);
    return options;
  };

  // Step 2: integrate the reduced model at every site. Each worker writes
  // only its own slot, so the result is independent of the schedule.
  auto run_site = [&](int i) {
    SiteResult& site = result.sites[static_cast<size_t>(i)];
    site.index = i;
    site.H_g = lengths[static_cast<size_t>(i)];
    site.w0 = design_gust_velocity(sweep.velocity, site.H_g, sweep.U_inf);
    const DiscreteGustSpec gust{site.w0, site.H_g, sweep.U_inf, sweep.t0};
    const auto start = Clock::now();
    try {
      const ReducedHistory history =
          integrate_rom(rom, Eigen::VectorXcd::Zero(rom->modes()), gust_from_spec(gust),
                        site_options(site.H_g));
      site.metrics = extract_metrics(history, sweep.metric_channels);
      site.objective = site.metrics.front().peak_abs;
    } catch (const DivergenceError& e) {
      site.diverged = true;
      site.divergence_time = e.time();
      site.objective = std::numeric_limits<double>::quiet_NaN();
    }
    site.wall_seconds = seconds_since(start);
  };

  const int pool_size = std::min(workers, n);
  if (pool_size <= 1) {
    for (int i = 0; i < n; ++i)
      run_site(i);
  } else {
    std::atomic<int> next{0};
    std::mutex error_mutex;
    std::exception_ptr error;
    auto drain = [&]() {
      for (;;) {
        const int i = next.fetch_add(1);
        if (i >= n)
          return;
        try {
          run_site(i);
        } catch (...) {
          const std::scoped_lock lock(error_mutex);
          if (!error)
            error = std::current_exception();
          return;
        }
      }
    };
    std::vector<std::thread> pool;
    pool.reserve(static_cast<size_t>(pool_size));
    for (int t = 0; t < pool_size; ++t)
      pool.emplace_back(drain);
    for (std::thread& thread : pool)
      thread.join();
    if (error)
      std::rethrow_exception(error);
  }

  for (const SiteResult& site : result.sites) {
    result.rom_sim_seconds += site.wall_seconds;
    if (site.diverged)
      result.diverged_sites.push_back(site.index);
  }

  // Step 3: argmax over the surviving sites; the ascending grid scan with a
  // strict comparison resolves ties to the smaller gust length.
  for (int i = 0; i < n; ++i) {
    const SiteResult& site = result.sites[static_cast<size_t>(i)];
    if (site.diverged)
      continue;
    if (result.worst_index < 0 ||
        site.objective > result.sites[static_cast<size_t>(result.worst_index)].objective)
      result.worst_index = i;
  }

  // Step 4: confirm the top candidates against the full model.
  std::vector<int> candidates;
  for (const SiteResult& site : result.sites)
    if (!site.diverged)
      candidates.push_back(site.index);
  std::sort(candidates.begin(), candidates.end(), [&](int a, int b) {
    const double oa = result.sites[static_cast<size_t>(a)].objective;
    const double ob = result.sites[static_cast<size_t>(b)].objective;
    return oa != ob ? oa > ob : a < b;
  });
  const size_t top_k = std::min(candidates.size(), static_cast<size_t>(sweep.validate_top_k));
  double fom_total = 0.0;
  for (size_t v = 0; v < top_k; ++v) {
    const SiteResult& site = result.sites[static_cast<size_t>(candidates[v])];
    ValidationEntry entry;
    entry.site_index = site.index;
    entry.H_g = site.H_g;
    entry.rom_metrics = site.metrics;
    const DiscreteGustSpec gust{site.w0, site.H_g, sweep.U_inf, sweep.t0};
    const auto start = Clock::now();
    try {
      const TimeHistory history = integrate_fom(model, rom->w0, gust_from_spec(gust), rom->u_c,
                                                site_options(site.H_g));
      entry.fom_metrics = extract_metrics(history, sweep.metric_channels);
      const double fom_peak = entry.fom_metrics.front().peak_abs;
      const double rom_peak = entry.rom_metrics.front().peak_abs;
      if (fom_peak == 0.0)
        entry.rel_error = rom_peak == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
      else
        entry.rel_error = std::abs(rom_peak - fom_peak) / std::abs(fom_peak);
    } catch (const DivergenceError&) {
      // The full model blew up where the reduced one did not; flag, do not hide.
      entry.rel_error = std::numeric_limits<double>::quiet_NaN();
    }
    entry.fom_wall_seconds = seconds_since(start);
    fom_total += entry.fom_wall_seconds;
    result.validation.push_back(std::move(entry));
  }
  if (top_k > 0) {
    result.fom_per_case_seconds = fom_total / static_cast<double>(top_k);
    result.speedup = result.fom_per_case_seconds * n /
                     (result.rom_build_seconds + result.rom_sim_seconds);
  }
  return result;
}

BenchReport run_benchmark(const NonlinearModel& model, const SweepSpec& sweep,
                          const RomBuildOptions& rom_options, const SimOptions& sim,
                          int fom_cases) {
  sweep.validate();
  if (fom_cases < 1)
    throw ContractViolation("run_benchmark: fom_cases must be >= 1");

  BenchReport report;
  report.n_sites = sweep.n_sites;
  report.fom_cases = std::min(fom_cases, sweep.n_sites);

  const std::vector<double> lengths = sweep.site_lengths();
  const ModelDescriptor& desc = model.descriptor();
  const Eigen::VectorXd u_c = Eigen::VectorXd::Zero(desc.n_control);
  const Equilibrium trim = find_equilibrium(model, Eigen::VectorXd::Zero(desc.n_states), u_c);
  if (!trim.converged)
    throw SolverError("run_benchmark: trim did not converge");

  // Representative full-order cases spread evenly over the site grid.
  double fom_total = 0.0;
  for (int j = 0; j < report.fom_cases; ++j) {
    const int i = report.fom_cases == 1
                      ? (sweep.n_sites - 1) / 2
                      : static_cast<int>(std::lround(static_cast<double>(j) *
                                                     (sweep.n_sites - 1) /
                                                     (report.fom_cases - 1)));
    const double H_g = lengths[static_cast<size_t>(i)];
    const double w0 = design_gust_velocity(sweep.velocity, H_g, sweep.U_inf);
    const DiscreteGustSpec gust{w0, H_g, sweep.U_inf, sweep.t0};
    SimOptions options = sim;
    options.t_end = sweep.t0 + (1.0 + sweep.decay_margin) * (H_g / sweep.U_inf);
    const auto start = Clock::now();
    try {
      integrate_fom(model, trim.w0, gust_from_spec(gust), u_c, options);
    } catch (const DivergenceError&) {
      // Cost up to the blow-up still counts; the search flags such sites.
    }
    fom_total += seconds_since(start);
  }
  report.fom_mean_seconds = fom_total / report.fom_cases;
  report.extrapolated_fom_seconds = report.fom_mean_seconds * report.n_sites;

  const SweepResult search = run_search(model, sweep, rom_options, sim, 1);
  report.rom_build_seconds = search.rom_build_seconds;
  report.rom_sim_seconds = search.rom_sim_seconds;
  report.speedup =
      report.extrapolated_fom_seconds / (report.rom_build_seconds + report.rom_sim_seconds);
  return report;
}

void write_sweep_csv(const SweepResult& result, const SweepSpec& sweep, std::ostream& out) {
  out << "site,H_g,w0,diverged,divergence_time,objective";
  for (const std::string& channel : sweep.metric_channels)
    out << ',' << channel << "_peak," << channel << "_t_peak," << channel << "_final,"
        << channel << "_settled";
  out << ",wall_seconds\n";
  for (const SiteResult& site : result.sites) {
    out << site.index << ',' << format_double(site.H_g) << ',' << format_double(site.w0) << ','
        << (site.diverged ? 1 : 0) << ',' << format_double(site.divergence_time) << ','
        << format_double(site.objective);
    for (size_t c = 0; c < sweep.metric_channels.size(); ++c) {
      if (c < site.metrics.size()) {
        const ChannelMetrics& metrics = site.metrics[c];
        out << ',' << format_double(metrics.peak_abs) << ',' << format_double(metrics.t_peak)
            << ',' << format_double(metrics.final_abs) << ',' << (metrics.settled ? 1 : 0);
      } else {
        out << ",nan,nan,nan,0";
      }
    }
    out << ',' << format_double(site.wall_seconds) << '\n';
  }
}

void write_summary(const SweepResult& result, const SweepSpec& sweep, std::ostream& out) {
  out << "worst-case gust search summary\n";
  if (result.rom)
    out << "model: " << result.rom->fom.name << " (" << result.rom->fom.n_states
        << " states reduced to " << result.rom->modes() << " modes, order "
        << result.rom->order << ")\n";
  out << "grid: " << sweep.n_sites << " sites, H_g in [" << format_double(sweep.Hg_min) << ", "
      << format_double(sweep.Hg_max) << "], " << (sweep.log_spacing ? "log" : "linear")
      << " spacing, U_inf = " << format_double(sweep.U_inf) << "\n";
  if (sweep.velocity.law == VelocityLaw::constant_fraction)
    out << "velocity law: constant fraction " << format_double(sweep.velocity.fraction)
        << " of U_inf\n";
  else
    out << "velocity law: power law, U_ref = " << format_double(sweep.velocity.U_ref)
        << ", H_ref = " << format_double(sweep.velocity.H_ref)
        << ", exponent = " << format_double(sweep.velocity.exponent) << ", clip ["
        << format_double(sweep.velocity.w0_min) << ", " << format_double(sweep.velocity.w0_max)
        << "]\n";
  out << "objective: peak |" << sweep.metric_channels.front() << "|\n";

  if (result.worst_index >= 0) {
    const SiteResult& worst = result.worst();
    out << "worst site: " << worst.index << " of " << sweep.n_sites
        << ", H_g* = " << format_double(worst.H_g) << ", w0 = " << format_double(worst.w0)
        << ", objective = " << format_double(worst.objective) << "\n";
  } else {
    out << "worst site: none (every site diverged)\n";
  }

  out << "diverged sites: " << result.diverged_sites.size();
  if (!result.diverged_sites.empty()) {
    out << " [";
    const size_t shown = std::min<size_t>(result.diverged_sites.size(), 12);
    for (size_t i = 0; i < shown; ++i)
      out << (i ? ", " : "") << result.diverged_sites[i];
    if (shown < result.diverged_sites.size())
      out << ", ...";
    out << "]";
  }
  out << "\n";

  if (!result.validation.empty()) {
    out << "validation (top " << result.validation.size() << " by reduced objective):\n";
    out << "  site          H_g         rom peak         fom peak        rel error\n";
    for (const ValidationEntry& entry : result.validation) {
      char line[160];
      const double rom_peak =
          entry.rom_metrics.empty() ? 0.0 : entry.rom_metrics.front().peak_abs;
      const double fom_peak =
          entry.fom_metrics.empty() ? std::numeric_limits<double>::quiet_NaN()
                                    : entry.fom_metrics.front().peak_abs;
      std::snprintf(line, sizeof line, "  %4d %12.6g %16.9g %16.9g %16.3e\n", entry.site_index,
                    entry.H_g, rom_peak, fom_peak, entry.rel_error);
      out << line;
    }
  }

  out << "timings: rom build " << brief(result.rom_build_seconds) << " s, rom integration "
      << brief(result.rom_sim_seconds) << " s, fom per case "
      << brief(result.fom_per_case_seconds) << " s\n";
  out << "speedup (extrapolated full-order sweep / reduced pipeline): "
      << brief(result.speedup) << "x\n";
}

void write_bench_report(const BenchReport& report, std::ostream& out) {
  out << "speedup benchmark (strictly sequential)\n";
  out << "full-order cases timed: " << report.fom_cases << ", mean "
      << brief(report.fom_mean_seconds) << " s per case\n";
  out << "extrapolated full-order sweep over " << report.n_sites << " sites: "
      << brief(report.extrapolated_fom_seconds) << " s\n";
  out << "reduced pipeline: build " << brief(report.rom_build_seconds) << " s + integration "
      << brief(report.rom_sim_seconds) << " s = "
      << brief(report.rom_build_seconds + report.rom_sim_seconds) << " s\n";
  out << "speedup: " << brief(report.speedup) << "x\n";
}

} // namespace gustrom
