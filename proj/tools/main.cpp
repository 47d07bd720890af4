// Copyright (c) the gustrom project contributors.
// SPDX-License-Identifier: Apache-2.0

#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "gustrom/aerofoil.hpp"
#include "gustrom/config.hpp"
#include "gustrom/errors.hpp"
#include "gustrom/format.hpp"
#include "gustrom/model.hpp"
#include "gustrom/rom.hpp"
#include "gustrom/rom_io.hpp"
#include "gustrom/sim.hpp"
#include "gustrom/sweep.hpp"

namespace fs = std::filesystem;
using namespace gustrom;

namespace {

// Stream that targets stdout by default, or a file when a path is given.
class OutputTarget {
public:
  explicit OutputTarget(const std::string& path) : path_(path) {
    if (!path.empty() && path != "-") {
      file_.open(path, std::ios::binary);
      if (!file_) throw IoError("cannot open output file: " + path);
      out_ = &file_;
    }
  }
  std::ostream& stream() { return *out_; }
  void finish() {
    out_->flush();
    if (file_.is_open() && !file_.good()) throw IoError("write failed: " + path_);
    if (file_.is_open()) std::printf("wrote %s\n", path_.c_str());
  }

private:
  std::string path_;
  std::ofstream file_;
  std::ostream* out_ = &std::cout;
};

AppConfig load_cfg(const std::string& path) {
  return path.empty() ? app_config_from_text("", "<defaults>") : load_app_config(path);
}

Eigen::VectorXd zero_controls(const NonlinearModel& model) {
  return Eigen::VectorXd::Zero(model.descriptor().n_control);
}

Equilibrium trim_or_throw(const NonlinearModel& model, const Eigen::VectorXd& u_c) {
  const Eigen::VectorXd guess = Eigen::VectorXd::Zero(model.descriptor().n_states);
  Equilibrium eq = find_equilibrium(model, guess, u_c);
  if (!eq.converged)
    throw SolverError("trim did not converge: residual " + format_double(eq.residual_norm) +
                      " after " + std::to_string(eq.iterations) + " iterations");
  return eq;
}

// Search horizon for one gust site; must match the horizon used inside the
// sweep so replayed histories cover the same window.
SimOptions site_window(const SweepSpec& sweep, double H_g, double step, double t_begin) {
  SimOptions out;
  out.t_begin = t_begin;
  out.t_end = sweep.t0 + (1.0 + sweep.decay_margin) * (H_g / sweep.U_inf);
  out.step = step;
  return out;
}

// Halves the step until one more halving moves the sampled solution by less
// than `tol` in the relative discrete L2 norm.
template <class Integrate>
double resolve_step(const Integrate& run, double step, double tol) {
  double h = step;
  for (int round = 0; round < 12; ++round) {
    const Eigen::MatrixXcd coarse = run(h);
    const Eigen::MatrixXcd fine = run(h / 2);
    double num = 0.0;
    double den = 0.0;
    for (Eigen::Index i = 0; i < coarse.cols() && 2 * i < fine.cols(); ++i) {
      num += (coarse.col(i) - fine.col(2 * i)).squaredNorm();
      den += fine.col(2 * i).squaredNorm();
    }
    if (std::sqrt(num) <= tol * std::max(std::sqrt(den), 1e-12)) return h;
    h /= 2;
  }
  throw NumericalFailure("step halving stalled above tolerance " + format_double(tol) +
                         "; final step " + format_double(h));
}

struct GustChoice {
  GustFunction gust;
  std::shared_ptr<GustSignal> signal; // address-stable storage for sampled gusts
  double t_end = 0.0;
  std::string id;
};

GustChoice choose_gust(const AppConfig& cfg, double t_end_flag, std::uint64_t seed,
                       bool seed_set) {
  GustChoice out;
  if (cfg.gust.kind == GustKind::one_minus_cosine) {
    const DiscreteGustSpec& spec = cfg.gust.discrete;
    spec.validate();
    out.gust = gust_from_spec(spec);
    out.t_end = t_end_flag > 0 ? t_end_flag
                               : spec.t0 + (1.0 + cfg.sweep.decay_margin) * spec.duration();
    out.id = "one_minus_cosine w0=" + format_double(spec.w0) + " H_g=" + format_double(spec.H_g);
  } else {
    TurbulenceSpec spec = cfg.gust.turbulence;
    if (seed_set) spec.seed = seed;
    out.signal = std::make_shared<GustSignal>(von_karman_realization(spec));
    out.gust = gust_from_signal(*out.signal);
    out.t_end = t_end_flag > 0 ? t_end_flag : spec.duration;
    out.id = "von_karman seed=" + std::to_string(spec.seed);
  }
  return out;
}

void print_metrics(const std::vector<ChannelMetrics>& metrics) {
  std::printf("%-10s %16s %12s %16s %8s\n", "channel", "peak |value|", "t_peak", "final |value|",
              "settled");
  for (const ChannelMetrics& m : metrics)
    std::printf("%-10s %16s %12s %16s %8s\n", m.label.c_str(), format_double(m.peak_abs).c_str(),
                format_double(m.t_peak).c_str(), format_double(m.final_abs).c_str(),
                m.settled ? "yes" : "no");
}

void cmd_trim(const std::string& config, const std::string& out_path) {
  const AppConfig cfg = load_cfg(config);
  const std::unique_ptr<AerofoilModel> model = make_aerofoil(cfg.model);
  const ModelDescriptor& desc = model->descriptor();
  const Eigen::VectorXd u_c = zero_controls(*model);
  const Equilibrium eq =
      find_equilibrium(*model, Eigen::VectorXd::Zero(desc.n_states), u_c);

  OutputTarget target(out_path);
  std::ostream& os = target.stream();
  os << "model: " << desc.name << " (" << desc.n_states << " states)\n";
  os << "converged: " << (eq.converged ? "yes" : "no") << " after " << eq.iterations
     << " iterations, residual " << format_double(eq.residual_norm) << "\n";
  for (Eigen::Index i = 0; i < desc.n_states; ++i) {
    char line[96];
    std::snprintf(line, sizeof line, "%-12s %s\n", desc.state_labels[i].c_str(),
                  format_double(eq.w0[i]).c_str());
    os << line;
  }
  if (eq.converged) {
    const Eigen::MatrixXd jac = fd_state_jacobian(
        *model, eq.w0, Eigen::VectorXd::Zero(desc.n_disturbance), u_c, cfg.rom.fd_step_jacobian);
    const double abscissa = spectral_abscissa(jac);
    os << "spectral abscissa at trim: " << format_double(abscissa)
       << (abscissa < 0 ? " (stable)" : " (unstable)") << "\n";
  }
  target.finish();
  if (!eq.converged) throw SolverError("trim did not converge");
}

void cmd_flutter(const std::string& config, const std::string& out_path) {
  const AppConfig cfg = load_cfg(config);
  const FlutterConfig& f = cfg.flutter;
  const FlutterScan scan = flutter_trace(cfg.model, f.u_min, f.u_max, f.points, f.xtol);

  OutputTarget target(out_path);
  std::ostream& os = target.stream();
  os << "spectral abscissa of the trimmed system over reduced velocity\n";
  char line[96];
  std::snprintf(line, sizeof line, "%12s %18s\n", "U*", "max Re(lambda)");
  os << line;
  for (const FlutterPoint& p : scan.trace) {
    std::snprintf(line, sizeof line, "%12.6f %18.9e\n", p.U_star, p.max_re);
    os << line;
  }
  if (scan.crossing_found)
    os << "flutter onset: U* = " << format_double(scan.U_flutter) << "\n";
  else
    os << "no stable-to-unstable crossing in [" << format_double(f.u_min) << ", "
       << format_double(f.u_max) << "]\n";
  target.finish();
}

void print_rom_summary(const RomModel& rom) {
  std::printf("reduced model: %s, %td states -> %td modes, order %d\n", rom.fom.name.c_str(),
              rom.fom.n_states, rom.modes(), rom.order);
  for (Eigen::Index k = 0; k < rom.modes(); ++k) {
    const ModeInfo& mode = rom.basis.modes[static_cast<std::size_t>(k)];
    const Complex lambda = rom.basis.lambdas[k];
    char line[160];
    if (mode.representative)
      std::snprintf(line, sizeof line, "  z%td: lambda = %s %+si  [%s] %s\n", k,
                    format_double(lambda.real()).c_str(), format_double(lambda.imag()).c_str(),
                    mode.tag.c_str(), mode.reason.c_str());
    else
      std::snprintf(line, sizeof line, "  z%td: conjugate partner of z%d\n", k,
                    mode.pair_partner);
    std::fputs(line, stdout);
  }
  for (const std::string& warning : rom.basis.warnings)
    std::printf("warning: %s\n", warning.c_str());
  if (rom.order >= 2)
    std::printf("bilinear probe: h = %s, richardson dev = %s, residual evaluations = %ld\n",
                format_double(rom.bilinear_report.h).c_str(),
                format_double(rom.bilinear_report.richardson_dev).c_str(),
                rom.bilinear_report.residual_evaluations);
  if (rom.order >= 3)
    std::printf("trilinear probe: h = %s, richardson dev = %s, residual evaluations = %ld\n",
                format_double(rom.trilinear_report.h).c_str(),
                format_double(rom.trilinear_report.richardson_dev).c_str(),
                rom.trilinear_report.residual_evaluations);
  std::printf("content hash: %016" PRIx64 "\n", rom_content_hash(rom));
}

void cmd_build_rom(const std::string& config, const std::string& out_path) {
  const AppConfig cfg = load_cfg(config);
  const std::unique_ptr<AerofoilModel> model = make_aerofoil(cfg.model);
  const Eigen::VectorXd u_c = zero_controls(*model);
  const Equilibrium eq = trim_or_throw(*model, u_c);
  const RomModel rom = assemble_rom(*model, eq, u_c, cfg.rom);
  save_rom(rom, out_path);
  print_rom_summary(rom);
  std::printf("wrote %s\n", out_path.c_str());
}

void cmd_gust_preview(const std::string& config, const std::string& out_path, double t_end_flag,
                      double rate_flag, std::uint64_t seed, bool seed_set) {
  const AppConfig cfg = load_cfg(config);
  GustSignal signal;
  if (cfg.gust.kind == GustKind::one_minus_cosine) {
    const DiscreteGustSpec& spec = cfg.gust.discrete;
    spec.validate();
    const double t_begin = cfg.sim.t_begin;
    const double t_end = t_end_flag > 0 ? t_end_flag : spec.t0 + 1.25 * spec.duration();
    if (t_end <= t_begin)
      throw ConfigError("gust preview window is empty: t_end " + format_double(t_end) +
                        " <= t_begin " + format_double(t_begin));
    const double rate = rate_flag > 0 ? rate_flag : 511.0 / (t_end - t_begin);
    signal = sample_discrete_gust(spec, t_begin, t_end, rate);
  } else {
    TurbulenceSpec spec = cfg.gust.turbulence;
    if (seed_set) spec.seed = seed;
    signal = von_karman_realization(spec);
  }
  OutputTarget target(out_path);
  write_gust_table(signal, target.stream());
  target.finish();
}

void cmd_simulate(const std::string& config, const std::string& out_path,
                  const std::string& rom_path, double t_end_flag,
                  const std::vector<std::string>& channel_flags, std::uint64_t seed,
                  bool seed_set) {
  const AppConfig cfg = load_cfg(config);
  const GustChoice gust = choose_gust(cfg, t_end_flag, seed, seed_set);
  const std::vector<std::string>& channels =
      channel_flags.empty() ? cfg.sweep.metric_channels : channel_flags;

  SimOptions sim;
  sim.t_begin = cfg.sim.t_begin;
  sim.t_end = gust.t_end;
  sim.step = cfg.sim.step;

  if (!rom_path.empty()) {
    const auto rom = std::make_shared<const RomModel>(load_rom(rom_path));
    const Eigen::VectorXcd z0 = Eigen::VectorXcd::Zero(rom->modes());
    if (cfg.sim.auto_step)
      sim.step = resolve_step(
          [&](double h) {
            SimOptions probe = sim;
            probe.step = h;
            return integrate_rom(rom, z0, gust.gust, probe).z;
          },
          sim.step, cfg.sim.auto_step_tol);
    const ReducedHistory history = integrate_rom(rom, z0, gust.gust, sim);
    OutputTarget target(out_path);
    write_history_csv(history, channels, target.stream());
    target.finish();
    std::printf("reduced simulation: %s, step %s, %zu samples\n", gust.id.c_str(),
                format_double(sim.step).c_str(), history.t.size());
    print_metrics(extract_metrics(history, channels));
    return;
  }

  const std::unique_ptr<AerofoilModel> model = make_aerofoil(cfg.model);
  const Eigen::VectorXd u_c = zero_controls(*model);
  const Equilibrium eq = trim_or_throw(*model, u_c);
  if (cfg.sim.auto_step)
    sim.step = resolve_step(
        [&](double h) {
          SimOptions probe = sim;
          probe.step = h;
          return Eigen::MatrixXcd(
              integrate_fom(*model, eq.w0, gust.gust, u_c, probe).states.cast<Complex>());
        },
        sim.step, cfg.sim.auto_step_tol);
  const TimeHistory history = integrate_fom(*model, eq.w0, gust.gust, u_c, sim);
  OutputTarget target(out_path);
  write_history_csv(history, channels, target.stream());
  target.finish();
  std::printf("full-order simulation: %s, step %s, %zu samples\n", gust.id.c_str(),
              format_double(sim.step).c_str(), history.t.size());
  print_metrics(extract_metrics(history, channels));
}

void cmd_sweep(const std::string& config, const std::string& out_dir, int workers,
               int validate_top, const std::string& rom_path, const std::string& save_rom_path,
               const std::vector<int>& history_sites) {
  AppConfig cfg = load_cfg(config);
  if (validate_top >= 0) cfg.sweep.validate_top_k = validate_top;

  const std::unique_ptr<AerofoilModel> model = make_aerofoil(cfg.model);
  std::shared_ptr<const RomModel> prebuilt;
  if (!rom_path.empty()) prebuilt = std::make_shared<const RomModel>(load_rom(rom_path));

  SimOptions sim;
  sim.t_begin = cfg.sim.t_begin;
  sim.t_end = cfg.sim.t_begin + 1.0; // horizon is set per site by the search
  sim.step = cfg.sim.step;

  const SweepResult result = run_search(*model, cfg.sweep, cfg.rom, sim, workers, prebuilt);

  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw IoError("cannot create output directory: " + out_dir + ": " + ec.message());

  {
    OutputTarget csv((fs::path(out_dir) / "sweep.csv").string());
    write_sweep_csv(result, cfg.sweep, csv.stream());
    csv.finish();
  }
  {
    OutputTarget summary((fs::path(out_dir) / "summary.txt").string());
    write_summary(result, cfg.sweep, summary.stream());
    summary.finish();
  }
  if (!save_rom_path.empty()) {
    save_rom(*result.rom, save_rom_path);
    std::printf("wrote %s (content hash %016" PRIx64 ")\n", save_rom_path.c_str(),
                rom_content_hash(*result.rom));
  }
  for (const int site : history_sites) {
    if (site < 0 || site >= cfg.sweep.n_sites)
      throw ConfigError("history site " + std::to_string(site) + " outside [0, " +
                        std::to_string(cfg.sweep.n_sites - 1) + "]");
    const SiteResult& sr = result.sites[static_cast<std::size_t>(site)];
    DiscreteGustSpec spec;
    spec.w0 = sr.w0;
    spec.H_g = sr.H_g;
    spec.U_inf = cfg.sweep.U_inf;
    spec.t0 = cfg.sweep.t0;
    const SimOptions window = site_window(cfg.sweep, sr.H_g, cfg.sim.step, cfg.sim.t_begin);
    const ReducedHistory history = integrate_rom(
        result.rom, Eigen::VectorXcd::Zero(result.rom->modes()), gust_from_spec(spec), window);
    OutputTarget target((fs::path(out_dir) / ("history_" + std::to_string(site) + ".csv")).string());
    write_history_csv(history, cfg.sweep.metric_channels, target.stream());
    target.finish();
  }
  write_summary(result, cfg.sweep, std::cout);
}

void cmd_bench(const std::string& config, const std::string& out_path, int fom_cases) {
  const AppConfig cfg = load_cfg(config);
  const std::unique_ptr<AerofoilModel> model = make_aerofoil(cfg.model);
  SimOptions sim;
  sim.t_begin = cfg.sim.t_begin;
  sim.t_end = cfg.sim.t_begin + 1.0; // horizon is set per site by the search
  sim.step = cfg.sim.step;
  const BenchReport report = run_benchmark(*model, cfg.sweep, cfg.rom, sim, fom_cases);
  OutputTarget target(out_path);
  write_bench_report(report, target.stream());
  target.finish();
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"gustrom: reduced-order gust response toolkit"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_path;
  std::string rom_path;
  std::string save_rom_path;
  int workers = 1;
  int validate_top = -1;
  int fom_cases = 5;
  double t_end = 0.0;
  double rate = 0.0;
  std::uint64_t seed = 0;
  std::vector<int> history_sites;
  std::vector<std::string> channels;

  const auto add_config = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "configuration file (defaults when omitted)");
  };

  CLI::App* trim = app.add_subcommand("trim", "solve and report the trimmed equilibrium");
  add_config(trim);
  trim->add_option("--out", out_path, "report file ('-' or empty for stdout)");
  trim->callback([&] { cmd_trim(config_path, out_path); });

  CLI::App* flutter =
      app.add_subcommand("flutter", "trace stability over reduced velocity and locate onset");
  add_config(flutter);
  flutter->add_option("--out", out_path, "report file ('-' or empty for stdout)");
  flutter->callback([&] { cmd_flutter(config_path, out_path); });

  CLI::App* build = app.add_subcommand("build-rom", "assemble the reduced model and save it");
  add_config(build);
  out_path = "";
  build->add_option("--out", out_path, "output model file")->default_str("rom.bin");
  build->callback([&] { cmd_build_rom(config_path, out_path.empty() ? "rom.bin" : out_path); });

  CLI::App* simulate = app.add_subcommand("simulate", "integrate one gust response");
  add_config(simulate);
  simulate->add_option("--out", out_path, "history file ('-' for stdout)")
      ->default_str("history.csv");
  simulate->add_option("--rom", rom_path, "integrate this saved reduced model instead");
  simulate->add_option("--t-end", t_end, "override the simulation horizon");
  simulate->add_option("--channels", channels, "output channels (default: sweep metric channels)");
  CLI::Option* sim_seed = simulate->add_option("--seed", seed, "override the turbulence seed");
  simulate->callback([&] {
    cmd_simulate(config_path, out_path.empty() ? "history.csv" : out_path, rom_path, t_end,
                 channels, seed, sim_seed->count() > 0);
  });

  CLI::App* preview = app.add_subcommand("gust-preview", "tabulate the configured gust signal");
  add_config(preview);
  preview->add_option("--out", out_path, "table file ('-' or empty for stdout)");
  preview->add_option("--t-end", t_end, "sampling end time for discrete gusts");
  preview->add_option("--rate", rate, "samples per time unit for discrete gusts");
  CLI::Option* pre_seed = preview->add_option("--seed", seed, "override the turbulence seed");
  preview->callback([&] {
    cmd_gust_preview(config_path, out_path, t_end, rate, seed, pre_seed->count() > 0);
  });

  CLI::App* sweep =
      app.add_subcommand("sweep", "search gust lengths for the worst response and validate");
  add_config(sweep);
  sweep->add_option("--out", out_path, "output directory")->default_str(".");
  sweep->add_option("--workers", workers, "concurrent site integrations")
      ->check(CLI::PositiveNumber);
  sweep->add_option("--validate-top", validate_top,
                    "full-order validations of the top sites (overrides config)");
  sweep->add_option("--rom", rom_path, "reuse this saved reduced model");
  sweep->add_option("--save-rom", save_rom_path, "save the reduced model after the search");
  sweep->add_option("--history", history_sites, "site indices whose histories are written");
  sweep->callback([&] {
    cmd_sweep(config_path, out_path.empty() ? "." : out_path, workers, validate_top, rom_path,
              save_rom_path, history_sites);
  });

  CLI::App* bench = app.add_subcommand("bench", "measure full-order vs reduced sweep cost");
  add_config(bench);
  bench->add_option("--out", out_path, "report file ('-' or empty for stdout)");
  bench->add_option("--fom-cases", fom_cases, "full-order cases to time")
      ->check(CLI::PositiveNumber);
  bench->callback([&] { cmd_bench(config_path, out_path, fom_cases); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  } catch (const gustrom::Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return static_cast<int>(e.category());
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
