// Copyright (c) the gustrom project contributors.
// SPDX-License-Identifier: Apache-2.0

#include <string>

#include <doctest.h>

#include "gustrom/config.hpp"

using namespace gustrom;

namespace {
template <class Fn>
void expect_config_error(Fn&& fn, const std::vector<std::string>& needles) {
  try {
    fn();
    FAIL_CHECK("expected a configuration error");
  } catch (const ConfigError& e) {
    const std::string what = e.what();
    for (const std::string& needle : needles)
      CHECK_MESSAGE(what.find(needle) != std::string::npos,
                    "missing '" << needle << "' in: " << what);
  }
}
} // namespace

TEST_CASE("key-value parsing with sections, comments and whitespace") {
  const ConfigFile cfg = ConfigFile::parse_text("# leading comment\n"
                                                "\n"
                                                "[alpha]\n"
                                                "  name  =  spaced value  \n"
                                                "count = 42   ; trailing comment\n"
                                                "ratio = -2.5e-3\n"
                                                "flag_on = true\n"
                                                "flag_off = 0\n"
                                                "big = 18446744073709551615\n"
                                                "items = one, two , three\n"
                                                "empty_ok = \n"
                                                "\n"
                                                "[beta]\n"
                                                "x = 1\n",
                                                "demo.cfg");

  CHECK(cfg.has("alpha", "name"));
  CHECK(!cfg.has("alpha", "missing"));
  CHECK(!cfg.has("gamma", "name"));
  CHECK(cfg.get_string("alpha", "name", "") == "spaced value");
  CHECK(cfg.get_int("alpha", "count", 0) == 42);
  CHECK(cfg.get_double("alpha", "ratio", 0.0) == -2.5e-3);
  CHECK(cfg.get_bool("alpha", "flag_on", false) == true);
  CHECK(cfg.get_bool("alpha", "flag_off", true) == false);
  CHECK(cfg.get_uint64("alpha", "big", 0) == 18446744073709551615ULL);
  CHECK(cfg.get_string_list("alpha", "items", {}) ==
        std::vector<std::string>{"one", "two", "three"});
  CHECK(cfg.get_string("alpha", "empty_ok", "fallback").empty());

  // Fallbacks for absent keys do not invent entries.
  CHECK(cfg.get_double("alpha", "absent", 7.5) == 7.5);
  CHECK(cfg.get_string_list("beta", "absent", {"d"}) == std::vector<std::string>{"d"});
  CHECK(cfg.get_int("beta", "x", 0) == 1);

  CHECK_NOTHROW(cfg.reject_unknown());
}

TEST_CASE("syntax errors carry the origin and line number") {
  expect_config_error([] { ConfigFile::parse_text("key = 1\n", "o.cfg"); },
                      {"o.cfg", "1", "section"});
  expect_config_error([] { ConfigFile::parse_text("[a]\njust text\n", "o.cfg"); },
                      {"o.cfg", "2"});
  expect_config_error([] { ConfigFile::parse_text("[a\nx = 1\n", "o.cfg"); },
                      {"o.cfg", "1", "section"});
  expect_config_error([] { ConfigFile::parse_text("[]\n", "o.cfg"); }, {"o.cfg", "1"});
  expect_config_error([] { ConfigFile::parse_text("[a]\n = 3\n", "o.cfg"); }, {"o.cfg", "2"});
  expect_config_error([] { ConfigFile::parse_text("[a]\nx = 1\nx = 2\n", "o.cfg"); },
                      {"o.cfg", "3", "duplicate", "x"});
  expect_config_error([] { ConfigFile::parse_text("[a]\nx = 1\n[a]\ny = 2\n", "o.cfg"); },
                      {"o.cfg", "3", "duplicate", "a"});
}

TEST_CASE("typed access reports the offending field") {
  const ConfigFile cfg = ConfigFile::parse_text("[s]\n"
                                                "num = abc\n"
                                                "frac = 1.5extra\n"
                                                "flag = maybe\n"
                                                "n = 2.5\n",
                                                "t.cfg");
  expect_config_error([&] { cfg.get_double("s", "num", 0.0); }, {"t.cfg", "2", "num", "abc"});
  expect_config_error([&] { cfg.get_double("s", "frac", 0.0); }, {"t.cfg", "3", "frac"});
  expect_config_error([&] { cfg.get_bool("s", "flag", false); }, {"t.cfg", "4", "flag"});
  expect_config_error([&] { cfg.get_int("s", "n", 0); }, {"t.cfg", "5", "n"});
}

TEST_CASE("unconsumed keys and untouched sections are rejected") {
  const ConfigFile cfg = ConfigFile::parse_text("[used]\n"
                                                "read = 1\n"
                                                "stray = 2\n"
                                                "\n"
                                                "[orphan]\n"
                                                "anything = 3\n",
                                                "u.cfg");
  CHECK(cfg.get_int("used", "read", 0) == 1);
  expect_config_error([&] { cfg.reject_unknown(); }, {"u.cfg", "stray", "3", "orphan", "5"});
}

TEST_CASE("an empty application config is all defaults") {
  const AppConfig cfg = app_config_from_text("");
  CHECK(cfg.model.U_star == 4.5);
  CHECK(cfg.model.mu == 110.0);
  CHECK(cfg.model.omega_xi == 0.5);
  CHECK(cfg.gust.kind == GustKind::one_minus_cosine);
  CHECK(cfg.gust.discrete.U_inf == 1.0);
  CHECK(cfg.sweep.Hg_min == 0.1);
  CHECK(cfg.sweep.Hg_max == 100.0);
  CHECK(cfg.sweep.n_sites == 1000);
  CHECK(cfg.sweep.log_spacing == true);
  CHECK(cfg.sweep.velocity.law == VelocityLaw::constant_fraction);
  CHECK(cfg.sweep.velocity.fraction == 0.14);
  CHECK(cfg.sweep.metric_channels == std::vector<std::string>{"xi"});
  CHECK(cfg.rom.order == 3);
  CHECK(cfg.rom.basis.m == 4);
  CHECK(cfg.sim.step == 0.01);
  CHECK(cfg.sim.auto_step == false);
  CHECK(cfg.flutter.points == 19);
}

TEST_CASE("a fully specified application config lands in every field") {
  const AppConfig cfg = app_config_from_text("[model]\n"
                                             "U_star = 5.5\n"
                                             "a = -0.4\n"
                                             "c_h = 0.6\n"
                                             "x_alpha = 0.2\n"
                                             "r_alpha2 = 0.3\n"
                                             "x_delta = 0.01\n"
                                             "r_delta2 = 0.02\n"
                                             "mu = 90\n"
                                             "omega_xi = 0.4\n"
                                             "omega_delta = 2.5\n"
                                             "zeta_xi = 0.01\n"
                                             "zeta_alpha = 0.02\n"
                                             "zeta_delta = 0.03\n"
                                             "K_xi3 = 2\n"
                                             "K_alpha3 = 5\n"
                                             "[gust]\n"
                                             "kind = von_karman\n"
                                             "w0 = 0.2\n"
                                             "H_g = 30\n"
                                             "U_inf = 1.5\n"
                                             "t0 = 2\n"
                                             "sigma_w = 0.1\n"
                                             "L_w = 25\n"
                                             "duration = 400\n"
                                             "sample_rate = 8\n"
                                             "seed = 99\n"
                                             "[sweep]\n"
                                             "Hg_min = 0.5\n"
                                             "Hg_max = 50\n"
                                             "n_sites = 64\n"
                                             "spacing = linear\n"
                                             "U_inf = 2\n"
                                             "t0 = 1\n"
                                             "decay_margin = 3\n"
                                             "velocity_law = power-law\n"
                                             "fraction = 0.1\n"
                                             "U_ref = 0.3\n"
                                             "H_ref = 12\n"
                                             "exponent = 0.25\n"
                                             "w0_min = 0.01\n"
                                             "w0_max = 0.5\n"
                                             "metric_channels = xi, alpha, delta\n"
                                             "validate_top_k = 5\n"
                                             "[rom]\n"
                                             "order = 2\n"
                                             "modes = 6\n"
                                             "origin_radius_frac = 0.02\n"
                                             "max_damping_ratio = 0.3\n"
                                             "eig_residual_tol = 1e-7\n"
                                             "biortho_tol = 1e-9\n"
                                             "fd_step_jacobian = 1e-5\n"
                                             "h_bilinear = 5e-4\n"
                                             "h_trilinear = 2e-3\n"
                                             "richardson_check = false\n"
                                             "[sim]\n"
                                             "step = 0.005\n"
                                             "auto_step = true\n"
                                             "auto_step_tol = 1e-7\n"
                                             "t_begin = 0.5\n"
                                             "[flutter]\n"
                                             "u_min = 2\n"
                                             "u_max = 9\n"
                                             "points = 15\n"
                                             "xtol = 1e-5\n");

  CHECK(cfg.model.U_star == 5.5);
  CHECK(cfg.model.a == -0.4);
  CHECK(cfg.model.c_h == 0.6);
  CHECK(cfg.model.x_alpha == 0.2);
  CHECK(cfg.model.r_alpha2 == 0.3);
  CHECK(cfg.model.x_delta == 0.01);
  CHECK(cfg.model.r_delta2 == 0.02);
  CHECK(cfg.model.mu == 90.0);
  CHECK(cfg.model.omega_xi == 0.4);
  CHECK(cfg.model.omega_delta == 2.5);
  CHECK(cfg.model.zeta_xi == 0.01);
  CHECK(cfg.model.zeta_alpha == 0.02);
  CHECK(cfg.model.zeta_delta == 0.03);
  CHECK(cfg.model.K_xi3 == 2.0);
  CHECK(cfg.model.K_alpha3 == 5.0);

  CHECK(cfg.gust.kind == GustKind::von_karman);
  CHECK(cfg.gust.discrete.w0 == 0.2);
  CHECK(cfg.gust.discrete.H_g == 30.0);
  CHECK(cfg.gust.discrete.U_inf == 1.5);
  CHECK(cfg.gust.discrete.t0 == 2.0);
  CHECK(cfg.gust.turbulence.sigma_w == 0.1);
  CHECK(cfg.gust.turbulence.L_w == 25.0);
  CHECK(cfg.gust.turbulence.U_inf == 1.5);
  CHECK(cfg.gust.turbulence.duration == 400.0);
  CHECK(cfg.gust.turbulence.sample_rate == 8.0);
  CHECK(cfg.gust.turbulence.seed == 99);

  CHECK(cfg.sweep.Hg_min == 0.5);
  CHECK(cfg.sweep.Hg_max == 50.0);
  CHECK(cfg.sweep.n_sites == 64);
  CHECK(cfg.sweep.log_spacing == false);
  CHECK(cfg.sweep.U_inf == 2.0);
  CHECK(cfg.sweep.t0 == 1.0);
  CHECK(cfg.sweep.decay_margin == 3.0);
  CHECK(cfg.sweep.velocity.law == VelocityLaw::power_law);
  CHECK(cfg.sweep.velocity.fraction == 0.1);
  CHECK(cfg.sweep.velocity.U_ref == 0.3);
  CHECK(cfg.sweep.velocity.H_ref == 12.0);
  CHECK(cfg.sweep.velocity.exponent == 0.25);
  CHECK(cfg.sweep.velocity.w0_min == 0.01);
  CHECK(cfg.sweep.velocity.w0_max == 0.5);
  CHECK(cfg.sweep.metric_channels == std::vector<std::string>{"xi", "alpha", "delta"});
  CHECK(cfg.sweep.validate_top_k == 5);

  CHECK(cfg.rom.order == 2);
  CHECK(cfg.rom.basis.m == 6);
  CHECK(cfg.rom.basis.origin_radius_frac == 0.02);
  CHECK(cfg.rom.basis.max_damping_ratio == 0.3);
  CHECK(cfg.rom.basis.eig_residual_tol == 1e-7);
  CHECK(cfg.rom.basis.biortho_tol == 1e-9);
  CHECK(cfg.rom.fd_step_jacobian == 1e-5);
  CHECK(cfg.rom.coeffs.h_bilinear == 5e-4);
  CHECK(cfg.rom.coeffs.h_trilinear == 2e-3);
  CHECK(cfg.rom.coeffs.richardson_check == false);

  CHECK(cfg.sim.step == 0.005);
  CHECK(cfg.sim.auto_step == true);
  CHECK(cfg.sim.auto_step_tol == 1e-7);
  CHECK(cfg.sim.t_begin == 0.5);

  CHECK(cfg.flutter.u_min == 2.0);
  CHECK(cfg.flutter.u_max == 9.0);
  CHECK(cfg.flutter.points == 15);
  CHECK(cfg.flutter.xtol == 1e-5);
}

TEST_CASE("application config rejects unknown keys and bad enum values") {
  expect_config_error([] { app_config_from_text("[sweep]\nHg_mim = 0.5\n", "a.cfg"); },
                      {"a.cfg", "Hg_mim", "2"});
  expect_config_error([] { app_config_from_text("[swep]\nHg_min = 0.5\n", "a.cfg"); },
                      {"a.cfg", "swep"});
  expect_config_error([] { app_config_from_text("[gust]\nkind = sharp_edge\n", "a.cfg"); },
                      {"kind", "sharp_edge"});
  expect_config_error([] { app_config_from_text("[sweep]\nspacing = cubic\n", "a.cfg"); },
                      {"spacing", "cubic"});
  expect_config_error(
      [] { app_config_from_text("[sweep]\nvelocity_law = table\n", "a.cfg"); },
      {"velocity_law", "table"});
}

TEST_CASE("a missing config file is an i/o error") {
  CHECK_THROWS_AS(ConfigFile::parse_file("/nonexistent/x.cfg"), IoError);
  CHECK_THROWS_AS(load_app_config("/nonexistent/x.cfg"), IoError);
}
