// Copyright (c) the gustrom project contributors.
// SPDX-License-Identifier: Apache-2.0

#include <bit>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include <doctest.h>

#include "gustrom/format.hpp"
#include "gustrom/rom_io.hpp"
#include "gustrom/sweep.hpp"
#include "test_models.hpp"

using namespace gustrom;
using testing::DuffingModel;
using testing::LinearModel;

namespace {
const Eigen::VectorXd kEmpty = Eigen::VectorXd::Zero(0);

std::uint64_t bits(double x) { return std::bit_cast<std::uint64_t>(x); }

// Softening cubic spring: dx/dt = v, dv/dt = -x + x^3 - c v + u. Orbits
// leaving |x| < 1 run away, so strong gusts diverge while weak ones ring.
class SofteningModel : public NonlinearModel {
public:
  SofteningModel() : NonlinearModel(ModelDescriptor{"softening", 2, 1, 0, {"x", "v"}}) {}

protected:
  void eval(const Eigen::VectorXd& w, const Eigen::VectorXd& u_d, const Eigen::VectorXd&,
            Eigen::VectorXd& out) const override {
    out[0] = w[1];
    out[1] = -w[0] + w[0] * w[0] * w[0] - 0.05 * w[1] + u_d[0];
  }
};

SweepSpec linear_spec() {
  SweepSpec spec;
  spec.Hg_min = 0.5;
  spec.Hg_max = 8.0;
  spec.n_sites = 8;
  spec.log_spacing = true;
  spec.velocity.law = VelocityLaw::constant_fraction;
  spec.velocity.fraction = 0.14;
  spec.metric_channels = {"s1", "s3"};
  spec.validate_top_k = 3;
  return spec;
}

SimOptions coarse_sim() {
  SimOptions sim;
  sim.step = 0.02;
  return sim;
}

std::vector<std::vector<std::string>> parse_csv(const std::string& text) {
  std::vector<std::vector<std::string>> rows;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    std::vector<std::string> fields;
    size_t from = 0;
    while (true) {
      const size_t comma = line.find(',', from);
      if (comma == std::string::npos) {
        fields.push_back(line.substr(from));
        break;
      }
      fields.push_back(line.substr(from, comma - from));
      from = comma + 1;
    }
    rows.push_back(fields);
  }
  return rows;
}

// Drops the trailing wall-clock column from every line.
std::string strip_wall_column(const std::string& csv) {
  std::istringstream in(csv);
  std::ostringstream out;
  std::string line;
  while (std::getline(in, line))
    out << line.substr(0, line.rfind(',')) << '\n';
  return out.str();
}

void check_same_search(const SweepResult& a, const SweepResult& b) {
  REQUIRE(b.sites.size() == a.sites.size());
  for (size_t i = 0; i < a.sites.size(); ++i) {
    CHECK(b.sites[i].index == a.sites[i].index);
    CHECK(bits(b.sites[i].H_g) == bits(a.sites[i].H_g));
    CHECK(bits(b.sites[i].w0) == bits(a.sites[i].w0));
    CHECK(b.sites[i].diverged == a.sites[i].diverged);
    CHECK(bits(b.sites[i].objective) == bits(a.sites[i].objective));
    REQUIRE(b.sites[i].metrics.size() == a.sites[i].metrics.size());
    for (size_t c = 0; c < a.sites[i].metrics.size(); ++c) {
      CHECK(bits(b.sites[i].metrics[c].peak_abs) == bits(a.sites[i].metrics[c].peak_abs));
      CHECK(bits(b.sites[i].metrics[c].t_peak) == bits(a.sites[i].metrics[c].t_peak));
      CHECK(bits(b.sites[i].metrics[c].final_abs) == bits(a.sites[i].metrics[c].final_abs));
      CHECK(b.sites[i].metrics[c].settled == a.sites[i].metrics[c].settled);
    }
  }
  CHECK(b.worst_index == a.worst_index);
  CHECK(b.diverged_sites == a.diverged_sites);
  REQUIRE(b.validation.size() == a.validation.size());
  for (size_t v = 0; v < a.validation.size(); ++v) {
    CHECK(b.validation[v].site_index == a.validation[v].site_index);
    CHECK(bits(b.validation[v].rel_error) == bits(a.validation[v].rel_error));
  }
}
} // namespace

TEST_CASE("design velocity laws") {
  VelocityLawSpec constant;
  constant.law = VelocityLaw::constant_fraction;
  constant.fraction = 0.14;
  for (double H : {0.1, 1.0, 55.0, 100.0})
    CHECK(design_gust_velocity(constant, H, 1.0) == 0.14);
  constant.fraction = 0.2;
  CHECK(design_gust_velocity(constant, 3.0, 2.0) == 0.4);

  VelocityLawSpec power;
  power.law = VelocityLaw::power_law;
  power.U_ref = 0.05;
  power.H_ref = 2.0;
  power.exponent = 1.0 / 6.0;
  CHECK(design_gust_velocity(power, 2.0, 1.0) == 0.05); // H_g = H_ref
  CHECK(design_gust_velocity(power, 128.0, 1.0) ==
        doctest::Approx(0.1).epsilon(1e-12)); // 64^(1/6) = 2

  SUBCASE("clipping") {
    power.w0_max = 0.06;
    CHECK(design_gust_velocity(power, 128.0, 1.0) == 0.06);
    power.w0_min = 0.055;
    CHECK(design_gust_velocity(power, 2.0, 1.0) == 0.055);
  }

  SUBCASE("preconditions") {
    CHECK_THROWS_AS(design_gust_velocity(constant, 0.0, 1.0), ContractViolation);
    CHECK_THROWS_AS(design_gust_velocity(constant, -1.0, 1.0), ContractViolation);
    CHECK_THROWS_AS(design_gust_velocity(constant, 1.0, 0.0), ContractViolation);
  }

  SUBCASE("law parameters are validated") {
    VelocityLawSpec bad = power;
    bad.H_ref = 0.0;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    bad = power;
    bad.w0_min = 1.0;
    bad.w0_max = 0.5;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    bad = constant;
    bad.fraction = -0.1;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    CHECK_NOTHROW(power.validate());
    CHECK_NOTHROW(constant.validate());
  }
}

TEST_CASE("site grids") {
  SweepSpec spec;
  spec.metric_channels = {"x"};

  SUBCASE("linear spacing is exact arithmetic") {
    spec.Hg_min = 1.0;
    spec.Hg_max = 3.0;
    spec.n_sites = 5;
    spec.log_spacing = false;
    const std::vector<double> h = spec.site_lengths();
    REQUIRE(h.size() == 5);
    CHECK(h[0] == 1.0);
    CHECK(h[1] == 1.5);
    CHECK(h[2] == 2.0);
    CHECK(h[3] == 2.5);
    CHECK(h[4] == 3.0);
  }

  SUBCASE("log spacing hits the decades with exact endpoints") {
    spec.Hg_min = 0.1;
    spec.Hg_max = 100.0;
    spec.n_sites = 4;
    spec.log_spacing = true;
    const std::vector<double> h = spec.site_lengths();
    REQUIRE(h.size() == 4);
    CHECK(h[0] == 0.1);
    CHECK(h[1] == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(h[2] == doctest::Approx(10.0).epsilon(1e-12));
    CHECK(h[3] == 100.0);
    for (size_t i = 1; i < h.size(); ++i)
      CHECK(h[i] > h[i - 1]);
  }

  SUBCASE("two sites are the bounds themselves") {
    spec.Hg_min = 0.7;
    spec.Hg_max = 41.0;
    spec.n_sites = 2;
    for (bool log_spacing : {true, false}) {
      spec.log_spacing = log_spacing;
      const std::vector<double> h = spec.site_lengths();
      REQUIRE(h.size() == 2);
      CHECK(h[0] == 0.7);
      CHECK(h[1] == 41.0);
    }
  }

  SUBCASE("invalid grids are refused") {
    auto bad = [&](auto&& tweak) {
      SweepSpec s = spec;
      tweak(s);
      CHECK_THROWS_AS(s.validate(), ConfigError);
    };
    bad([](SweepSpec& s) { s.Hg_min = 0.0; });
    bad([](SweepSpec& s) { s.Hg_min = 5.0, s.Hg_max = 5.0; });
    bad([](SweepSpec& s) { s.n_sites = 1; });
    bad([](SweepSpec& s) { s.validate_top_k = 0; });
    bad([](SweepSpec& s) { s.metric_channels.clear(); });
    bad([](SweepSpec& s) { s.U_inf = 0.0; });
    bad([](SweepSpec& s) { s.decay_margin = -1.0; });
    CHECK_NOTHROW(spec.validate());
  }
}

TEST_CASE("zero forcing yields zero response and ties resolve to the smallest gust") {
  auto model = testing::make_random_stable_linear(1, 1, 11);
  SweepSpec spec;
  spec.Hg_min = 1.0;
  spec.Hg_max = 4.0;
  spec.n_sites = 3;
  spec.log_spacing = false;
  spec.velocity.fraction = 0.0; // every site is unforced
  spec.metric_channels = {"s0"};
  spec.validate_top_k = 1;
  RomBuildOptions rom;
  rom.order = 1;
  rom.basis.m = 3;
  SimOptions sim;
  sim.step = 0.05;

  const SweepResult result = run_search(*model, spec, rom, sim);
  REQUIRE(result.sites.size() == 3);
  for (const SiteResult& site : result.sites) {
    CHECK(!site.diverged);
    CHECK(site.w0 == 0.0);
    CHECK(site.objective == 0.0);
  }
  CHECK(result.worst_index == 0);
  CHECK(result.worst().H_g == 1.0);
  REQUIRE(result.validation.size() == 1);
  CHECK(result.validation[0].fom_metrics[0].peak_abs == 0.0);
  CHECK(result.validation[0].rel_error == 0.0);
}

TEST_CASE("argmax certificate and full-model validation on an exactly reducible system") {
  auto model = testing::make_random_stable_linear(2, 2, 77);
  const SweepSpec spec = linear_spec();
  RomBuildOptions rom;
  rom.order = 1;
  rom.basis.m = 6;
  const SimOptions sim = coarse_sim();

  const SweepResult result = run_search(*model, spec, rom, sim);
  REQUIRE(result.rom);
  REQUIRE(result.rom->modes() == 6);
  REQUIRE(result.sites.size() == 8);
  CHECK(result.diverged_sites.empty());

  // The argmax certificate, re-derived by scan.
  int best = -1;
  for (int i = 0; i < 8; ++i)
    if (best < 0 || result.sites[size_t(i)].objective > result.sites[size_t(best)].objective)
      best = i;
  CHECK(result.worst_index == best);
  CHECK(result.worst().index == best);
  for (const SiteResult& site : result.sites) {
    CHECK(site.objective >= 0.0);
    CHECK(result.worst().objective >= site.objective);
    REQUIRE(site.metrics.size() == 2);
    CHECK(site.objective == site.metrics[0].peak_abs);
  }

  // Top-k validation: descending reduced objective, near-zero error for the
  // full-size basis of a linear model.
  REQUIRE(result.validation.size() == 3);
  CHECK(result.validation[0].site_index == best);
  for (size_t v = 0; v < result.validation.size(); ++v) {
    const ValidationEntry& entry = result.validation[v];
    REQUIRE(entry.rom_metrics.size() == 2);
    REQUIRE(entry.fom_metrics.size() == 2);
    CHECK(entry.rel_error < 1e-6);
    const double recomputed = std::abs(entry.rom_metrics[0].peak_abs -
                                       entry.fom_metrics[0].peak_abs) /
                              std::abs(entry.fom_metrics[0].peak_abs);
    CHECK(bits(entry.rel_error) == bits(recomputed));
    if (v > 0)
      CHECK(entry.rom_metrics[0].peak_abs <=
            result.validation[v - 1].rom_metrics[0].peak_abs);
    CHECK(entry.fom_wall_seconds > 0.0);
  }

  // Timing bookkeeping and the speedup identity.
  CHECK(result.rom_build_seconds > 0.0);
  CHECK(result.rom_sim_seconds > 0.0);
  CHECK(result.fom_per_case_seconds > 0.0);
  CHECK(result.speedup == result.fom_per_case_seconds * 8 /
                              (result.rom_build_seconds + result.rom_sim_seconds));

  // The emitted CSV re-certifies the argmax on its own.
  std::ostringstream csv;
  write_sweep_csv(result, spec, csv);
  const auto rows = parse_csv(csv.str());
  REQUIRE(rows.size() == 9); // header + 8 sites
  CHECK(rows[0][0] == "site");
  CHECK(rows[0][1] == "H_g");
  CHECK(rows[0].back() == "wall_seconds");
  int csv_best = -1;
  double csv_best_objective = 0.0;
  for (size_t r = 1; r < rows.size(); ++r) {
    REQUIRE(rows[r].size() == rows[0].size());
    if (rows[r][3] != "0")
      continue;
    const double objective = std::stod(rows[r][5]);
    if (csv_best < 0 || objective > csv_best_objective) {
      csv_best = std::stoi(rows[r][0]);
      csv_best_objective = objective;
    }
  }
  CHECK(csv_best == result.worst_index);
  CHECK(csv_best_objective == result.worst().objective); // round-trip precision

  // Summary names the worst gust length.
  std::ostringstream summary;
  write_summary(result, spec, summary);
  CHECK(summary.str().find("H_g*") != std::string::npos);
  CHECK(summary.str().find(format_double(result.worst().H_g)) != std::string::npos);
  CHECK(summary.str().find("speedup") != std::string::npos);
}

TEST_CASE("the search result does not depend on the worker schedule") {
  auto model = testing::make_random_stable_linear(2, 2, 77);
  const SweepSpec spec = linear_spec();
  RomBuildOptions rom;
  rom.order = 1;
  rom.basis.m = 6;
  const SimOptions sim = coarse_sim();

  const SweepResult serial = run_search(*model, spec, rom, sim, 1);
  const SweepResult threaded = run_search(*model, spec, rom, sim, 4);
  check_same_search(serial, threaded);

  std::ostringstream csv_a, csv_b;
  write_sweep_csv(serial, spec, csv_a);
  write_sweep_csv(threaded, spec, csv_b);
  CHECK(strip_wall_column(csv_a.str()) == strip_wall_column(csv_b.str()));
}

TEST_CASE("divergent sites are excluded from the argmax but reported") {
  SofteningModel model;
  SweepSpec spec;
  spec.Hg_min = 2.0;
  spec.Hg_max = 16.0;
  spec.n_sites = 6;
  spec.log_spacing = true;
  spec.velocity.law = VelocityLaw::power_law;
  spec.velocity.U_ref = 0.05;
  spec.velocity.H_ref = 1.0;
  spec.velocity.exponent = 1.0; // strong gusts at long sites blow up
  spec.metric_channels = {"x"};
  spec.validate_top_k = 2;
  RomBuildOptions rom;
  rom.order = 3;
  rom.basis.m = 2;
  SimOptions sim;
  sim.step = 0.01;

  const SweepResult result = run_search(model, spec, rom, sim);
  REQUIRE(!result.diverged_sites.empty());
  REQUIRE(result.worst_index >= 0);

  for (int site : result.diverged_sites) {
    const SiteResult& record = result.sites[static_cast<size_t>(site)];
    CHECK(record.diverged);
    CHECK(record.metrics.empty());
    CHECK(record.divergence_time > 0.0);
    CHECK(std::isnan(record.objective));
    CHECK(site != result.worst_index);
    for (const ValidationEntry& entry : result.validation)
      CHECK(entry.site_index != site);
  }
  const SiteResult& worst = result.worst();
  CHECK(!worst.diverged);
  for (const SiteResult& site : result.sites)
    if (!site.diverged)
      CHECK(worst.objective >= site.objective);

  // CSV marks the divergent rows and still certifies the argmax on the rest.
  std::ostringstream csv;
  write_sweep_csv(result, spec, csv);
  const auto rows = parse_csv(csv.str());
  int csv_best = -1;
  double csv_best_objective = 0.0;
  int csv_diverged = 0;
  for (size_t r = 1; r < rows.size(); ++r) {
    if (rows[r][3] == "1") {
      ++csv_diverged;
      CHECK(rows[r][5] == "nan");
      CHECK(std::stod(rows[r][4]) > 0.0);
      continue;
    }
    const double objective = std::stod(rows[r][5]);
    if (csv_best < 0 || objective > csv_best_objective) {
      csv_best = std::stoi(rows[r][0]);
      csv_best_objective = objective;
    }
  }
  CHECK(csv_diverged == static_cast<int>(result.diverged_sites.size()));
  CHECK(csv_best == result.worst_index);

  std::ostringstream summary;
  write_summary(result, spec, summary);
  CHECK(summary.str().find("diverged") != std::string::npos);
}

TEST_CASE("a search where every site diverges reports no worst case") {
  Eigen::MatrixXd a(1, 1), b(1, 1);
  a << 200.0; // RK4 at step 0.02 amplifies 34x per step, overflow inside 5s
  b << 1.0;
  LinearModel model(a, b);
  SweepSpec spec;
  spec.Hg_min = 1.0;
  spec.Hg_max = 2.0;
  spec.n_sites = 2;
  spec.metric_channels = {"s0"};
  spec.validate_top_k = 1;
  RomBuildOptions rom;
  rom.order = 1;
  rom.basis.m = 1;
  SimOptions sim;
  sim.step = 0.02;

  const SweepResult result = run_search(model, spec, rom, sim);
  CHECK(result.diverged_sites == std::vector<int>{0, 1});
  CHECK(result.worst_index == -1);
  CHECK(result.validation.empty());
  CHECK(result.speedup == 0.0);
  CHECK_THROWS_AS(result.worst(), ContractViolation);

  std::ostringstream summary;
  write_summary(result, spec, summary);
  CHECK(summary.str().find("diverged") != std::string::npos);
}

TEST_CASE("a prebuilt reduced model reproduces the search after a file round trip") {
  auto model = testing::make_random_stable_linear(2, 2, 77);
  const SweepSpec spec = linear_spec();
  RomBuildOptions rom;
  rom.order = 1;
  rom.basis.m = 6;
  const SimOptions sim = coarse_sim();

  const SweepResult fresh = run_search(*model, spec, rom, sim);
  REQUIRE(fresh.rom);

  const std::filesystem::path dir =
      std::filesystem::temp_directory_path() /
      ("gustrom-sweep-" + std::to_string(::getpid()));
  std::filesystem::create_directories(dir);
  const std::string path = (dir / "model.rom").string();
  save_rom(*fresh.rom, path);
  auto loaded = std::make_shared<const RomModel>(load_rom(path));
  std::error_code ec;
  std::filesystem::remove_all(dir, ec);

  const SweepResult replay = run_search(*model, spec, rom, sim, 1, loaded);
  CHECK(replay.rom_build_seconds == 0.0);
  check_same_search(fresh, replay);

  std::ostringstream csv_a, csv_b;
  write_sweep_csv(fresh, spec, csv_a);
  write_sweep_csv(replay, spec, csv_b);
  CHECK(strip_wall_column(csv_a.str()) == strip_wall_column(csv_b.str()));

  // A reduced model of some other system is refused.
  DuffingModel duffing;
  Equilibrium trim = find_equilibrium(duffing, Eigen::VectorXd::Zero(2), kEmpty);
  RomBuildOptions duffing_rom;
  duffing_rom.order = 1;
  duffing_rom.basis.m = 2;
  auto mismatched = std::make_shared<const RomModel>(
      assemble_rom(duffing, trim, kEmpty, duffing_rom));
  CHECK_THROWS_AS(run_search(*model, spec, rom, sim, 1, mismatched), ContractViolation);
}

TEST_CASE("benchmark identities") {
  DuffingModel model(0.1);
  SweepSpec spec;
  spec.Hg_min = 1.0;
  spec.Hg_max = 4.0;
  spec.n_sites = 10;
  spec.velocity.fraction = 0.1;
  spec.metric_channels = {"x"};
  spec.validate_top_k = 1;
  RomBuildOptions rom;
  rom.order = 3;
  rom.basis.m = 2;
  SimOptions sim;
  sim.step = 0.02;

  const BenchReport report = run_benchmark(model, spec, rom, sim, 3);
  CHECK(report.fom_cases == 3);
  CHECK(report.n_sites == 10);
  CHECK(report.fom_mean_seconds > 0.0);
  CHECK(report.rom_build_seconds > 0.0);
  CHECK(report.rom_sim_seconds > 0.0);
  CHECK(report.extrapolated_fom_seconds == report.fom_mean_seconds * 10);
  CHECK(report.speedup == report.extrapolated_fom_seconds /
                              (report.rom_build_seconds + report.rom_sim_seconds));
  // Same state count on both sides: the ratio must stay near unity, far from
  // the orders of magnitude a genuine reduction buys.
  CHECK(report.speedup > 0.02);
  CHECK(report.speedup < 100.0);

  std::ostringstream text;
  write_bench_report(report, text);
  CHECK(text.str().find("speedup") != std::string::npos);
}
