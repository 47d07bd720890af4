// Copyright (c) the gustrom project contributors.
// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <sstream>

#include <doctest.h>

#include "gustrom/gust.hpp"
#include "spectral.hpp"

using namespace gustrom;

TEST_CASE("one-minus-cosine gust matches the closed form and vanishes outside") {
  DiscreteGustSpec spec;
  spec.w0 = 2.0;
  spec.H_g = 4.0;
  spec.U_inf = 2.0;
  spec.t0 = 1.0;
  spec.validate();

  CHECK(spec.duration() == doctest::Approx(2.0).epsilon(1e-15));
  CHECK(gust_frequency(spec) == doctest::Approx(0.5).epsilon(1e-15));

  // Quarter period: phase pi/2, w = (w0/2)(1 - 0) = 1. Midpoint: w = w0.
  CHECK(one_minus_cosine(spec, 1.5) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(one_minus_cosine(spec, 2.0) == doctest::Approx(2.0).epsilon(1e-12));

  // Exactly zero outside the support, not merely small.
  CHECK(one_minus_cosine(spec, 0.999) == 0.0);
  CHECK(one_minus_cosine(spec, 3.001) == 0.0);
  CHECK(one_minus_cosine(spec, -5.0) == 0.0);
  CHECK(one_minus_cosine(spec, 1.0) == doctest::Approx(0.0).epsilon(1e-15));
  CHECK(one_minus_cosine(spec, 3.0) == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("gust spec validation") {
  DiscreteGustSpec spec;
  spec.H_g = -1.0;
  CHECK_THROWS_AS(spec.validate(), ConfigError);
  spec.H_g = 1.0;
  spec.U_inf = 0.0;
  CHECK_THROWS_AS(spec.validate(), ConfigError);

  TurbulenceSpec turb;
  turb.sigma_w = -0.1;
  CHECK_THROWS_AS(turb.validate(), ConfigError);
  turb.sigma_w = 1.0;
  turb.sample_rate = 0.0;
  CHECK_THROWS_AS(turb.validate(), ConfigError);
}

TEST_CASE("turbulence spectrum: value, normalization and inertial-range slope") {
  const double sigma = 1.7;
  const double length = 200.0;

  // Phi(0) = sigma^2 L / pi.
  CHECK(von_karman_psd(sigma, length, 0.0) ==
        doctest::Approx(sigma * sigma * length / M_PI).epsilon(1e-14));

  // One-sided integral over spatial frequency equals the variance. Trapezoid
  // on a log grid; the tail beyond the grid is negligible by the -5/3 decay.
  double integral = 0.0;
  const int points = 40000;
  const double lo = 1e-7 / length;
  const double hi = 1e7 / length;
  double prev_omega = 0.0;
  double prev_phi = von_karman_psd(sigma, length, 0.0);
  for (int i = 0; i < points; ++i) {
    const double omega =
        lo * std::pow(hi / lo, static_cast<double>(i) / static_cast<double>(points - 1));
    const double phi = von_karman_psd(sigma, length, omega);
    integral += 0.5 * (phi + prev_phi) * (omega - prev_omega);
    prev_omega = omega;
    prev_phi = phi;
  }
  CHECK(integral == doctest::Approx(sigma * sigma).epsilon(0.005));

  // Log-log slope deep in the inertial range.
  const double w1 = 1e3 / length;
  const double w2 = 1e4 / length;
  const double slope = (std::log(von_karman_psd(sigma, length, w2)) -
                        std::log(von_karman_psd(sigma, length, w1))) /
                       (std::log(w2) - std::log(w1));
  CHECK(slope == doctest::Approx(-5.0 / 3.0).epsilon(0.03));
}

TEST_CASE("welch estimator sanity on a pure tone") {
  // Oracle for the oracle: a sine of amplitude 2 has variance 2.
  const double dt = 0.01;
  const double omega0 = 2.0 * M_PI * 5.0;
  std::vector<double> x(1 << 15);
  for (size_t i = 0; i < x.size(); ++i)
    x[i] = 2.0 * std::sin(omega0 * static_cast<double>(i) * dt);

  auto res = testing::welch_psd(x, dt, 4096);
  double total = 0.0;
  for (size_t k = 1; k < res.psd.size(); ++k)
    total += res.psd[k] * (res.omega[k] - res.omega[k - 1]);
  CHECK(total == doctest::Approx(2.0).epsilon(0.02));
}

TEST_CASE("turbulence realization is reproducible and seed sensitive") {
  TurbulenceSpec spec;
  spec.sigma_w = 1.0;
  spec.L_w = 50.0;
  spec.U_inf = 100.0;
  spec.duration = 20.0;
  spec.sample_rate = 32.0;
  spec.seed = 12345;

  GustSignal a = von_karman_realization(spec);
  GustSignal b = von_karman_realization(spec);
  REQUIRE(a.t.size() == a.w.size());
  CHECK(a.t.front() == 0.0);
  CHECK(a.t[1] - a.t[0] == doctest::Approx(1.0 / 32.0).epsilon(1e-12));
  CHECK(a.w == b.w);
  CHECK(a.t == b.t);

  spec.seed = 54321;
  GustSignal c = von_karman_realization(spec);
  double diff = 0.0;
  for (size_t i = 0; i < std::min(a.w.size(), c.w.size()); ++i)
    diff = std::max(diff, std::abs(a.w[i] - c.w[i]));
  CHECK(diff > 1e-3);
}

TEST_CASE("turbulence realization reproduces the target spectrum and variance") {
  TurbulenceSpec spec;
  spec.sigma_w = 2.5;
  spec.L_w = 50.0;
  spec.U_inf = 100.0;
  spec.duration = 8192.0;
  spec.sample_rate = 32.0;
  spec.seed = 777;

  const GustSignal signal = von_karman_realization(spec);
  REQUIRE(signal.w.size() >= (1u << 18));

  // Variance against sigma^2.
  double mean = 0.0;
  for (double v : signal.w)
    mean += v;
  mean /= static_cast<double>(signal.w.size());
  double var = 0.0;
  for (double v : signal.w)
    var += (v - mean) * (v - mean);
  var /= static_cast<double>(signal.w.size() - 1);
  CHECK(var == doctest::Approx(spec.sigma_w * spec.sigma_w).epsilon(0.03));

  // Band-averaged Welch PSD against the analytic temporal density
  // Phi(omega/U)/U, within 2 dB across the resolved mid band.
  const double dt = 1.0 / spec.sample_rate;
  auto res = testing::welch_psd(signal.w, dt, 4096);

  const double lo = 0.3;  // rad/s, above the resolution floor
  const double hi = 12.0; // rad/s, below Nyquist and aliasing bias
  const int bands = 10;
  for (int b = 0; b < bands; ++b) {
    const double w_lo = lo * std::pow(hi / lo, static_cast<double>(b) / bands);
    const double w_hi = lo * std::pow(hi / lo, static_cast<double>(b + 1) / bands);
    double est = 0.0;
    double ref = 0.0;
    int count = 0;
    for (size_t k = 1; k + 1 < res.omega.size(); ++k) {
      if (res.omega[k] < w_lo || res.omega[k] >= w_hi)
        continue;
      est += res.psd[k];
      ref += von_karman_psd(spec.sigma_w, spec.L_w, res.omega[k] / spec.U_inf) / spec.U_inf;
      ++count;
    }
    REQUIRE(count > 0);
    const double ratio_db = 10.0 * std::log10(est / ref);
    CAPTURE(w_lo);
    CAPTURE(w_hi);
    CHECK(std::abs(ratio_db) < 2.0);
  }
}

TEST_CASE("penetration delay") {
  CHECK(penetration_delay(10.0, M_PI / 6.0, 50.0) == doctest::Approx(0.1).epsilon(1e-12));
  CHECK(penetration_delay(10.0, 0.0, 50.0) == 0.0);
  CHECK_THROWS_AS(penetration_delay(1.0, 0.0, 0.0), ContractViolation);
}

TEST_CASE("signal interpolation is linear inside and zero outside") {
  GustSignal s;
  s.t = {0.0, 1.0, 2.0};
  s.w = {0.0, 2.0, 4.0};
  CHECK(s.value_at(0.5) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(s.value_at(1.5) == doctest::Approx(3.0).epsilon(1e-15));
  CHECK(s.value_at(1.0) == doctest::Approx(2.0).epsilon(1e-15));
  CHECK(s.value_at(2.0) == doctest::Approx(4.0).epsilon(1e-15));
  CHECK(s.value_at(2.0000001) == 0.0);
  CHECK(s.value_at(-0.0000001) == 0.0);
}

TEST_CASE("gust table output round-trips through parsing") {
  DiscreteGustSpec spec;
  spec.w0 = 0.3333333333333333;
  spec.H_g = 7.0;
  spec.U_inf = 1.3;
  spec.t0 = 0.1;
  GustSignal s = sample_discrete_gust(spec, 0.0, 8.0, 10.0);
  REQUIRE(s.t.size() == 81);
  for (size_t i = 0; i < s.t.size(); ++i)
    CHECK(s.w[i] == one_minus_cosine(spec, s.t[i]));

  std::ostringstream out;
  write_gust_table(s, out);
  std::istringstream in(out.str());
  std::string header;
  std::getline(in, header);
  CHECK(header == "t,w");
  for (size_t i = 0; i < s.t.size(); ++i) {
    std::string line;
    REQUIRE(std::getline(in, line));
    const auto comma = line.find(',');
    REQUIRE(comma != std::string::npos);
    CHECK(std::stod(line.substr(0, comma)) == s.t[i]);
    CHECK(std::stod(line.substr(comma + 1)) == s.w[i]);
  }
}
