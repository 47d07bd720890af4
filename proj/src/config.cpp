// Copyright (c) the gustrom project contributors.
// SPDX-License-Identifier: Apache-2.0

#include "gustrom/config.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "gustrom/errors.hpp"

namespace gustrom {

namespace {

std::string trim(const std::string& s) {
  const std::size_t first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return {};
  const std::size_t last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

std::string where(const std::string& origin, int line) {
  return origin + ":" + std::to_string(line) + ": ";
}

[[noreturn]] void bad_value(const std::string& origin, int line, const std::string& section,
                            const std::string& key, const std::string& value,
                            const std::string& expected) {
  throw ConfigError(where(origin, line) + "[" + section + "] " + key + ": expected " + expected +
                    ", got '" + value + "'");
}

} // namespace

ConfigFile ConfigFile::parse_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open config file: " + path);
  std::ostringstream text;
  text << in.rdbuf();
  if (in.bad()) throw IoError("cannot read config file: " + path);
  return parse_text(text.str(), path);
}

ConfigFile ConfigFile::parse_text(const std::string& text, const std::string& origin) {
  ConfigFile cfg;
  cfg.origin_ = origin;
  std::istringstream lines(text);
  std::string raw;
  std::string current;
  int line = 0;
  while (std::getline(lines, raw)) {
    ++line;
    const std::size_t comment = raw.find_first_of("#;");
    if (comment != std::string::npos) raw.erase(comment);
    const std::string body = trim(raw);
    if (body.empty()) continue;

    if (body.front() == '[') {
      if (body.back() != ']')
        throw ConfigError(where(origin, line) + "unterminated section header: " + body);
      const std::string name = trim(body.substr(1, body.size() - 2));
      if (name.empty()) throw ConfigError(where(origin, line) + "empty section name");
      const auto [it, inserted] = cfg.sections_.try_emplace(name);
      if (!inserted)
        throw ConfigError(where(origin, line) + "duplicate section [" + name +
                          "] (first opened at line " + std::to_string(it->second.line) + ")");
      it->second.line = line;
      current = name;
      continue;
    }

    const std::size_t eq = body.find('=');
    if (eq == std::string::npos)
      throw ConfigError(where(origin, line) + "expected 'key = value' or '[section]', got '" +
                        body + "'");
    const std::string key = trim(body.substr(0, eq));
    if (key.empty()) throw ConfigError(where(origin, line) + "missing key before '='");
    if (current.empty())
      throw ConfigError(where(origin, line) + "key '" + key +
                        "' appears before any [section] header");
    Entry entry;
    entry.value = trim(body.substr(eq + 1));
    entry.line = line;
    const auto [it, inserted] = cfg.sections_[current].entries.emplace(key, entry);
    if (!inserted)
      throw ConfigError(where(origin, line) + "duplicate key '" + key + "' in [" + current +
                        "] (first set at line " + std::to_string(it->second.line) + ")");
  }
  return cfg;
}

const ConfigFile::Entry* ConfigFile::find(const std::string& section,
                                          const std::string& key) const {
  const auto sit = sections_.find(section);
  if (sit == sections_.end()) return nullptr;
  sit->second.touched = true;
  const auto eit = sit->second.entries.find(key);
  if (eit == sit->second.entries.end()) return nullptr;
  eit->second.consumed = true;
  return &eit->second;
}

bool ConfigFile::has(const std::string& section, const std::string& key) const {
  const auto sit = sections_.find(section);
  return sit != sections_.end() && sit->second.entries.count(key) != 0;
}

std::string ConfigFile::get_string(const std::string& section, const std::string& key,
                                   const std::string& fallback) const {
  const Entry* e = find(section, key);
  return e ? e->value : fallback;
}

double ConfigFile::get_double(const std::string& section, const std::string& key,
                              double fallback) const {
  const Entry* e = find(section, key);
  if (!e) return fallback;
  double out = 0.0;
  const char* begin = e->value.data();
  const char* end = begin + e->value.size();
  const auto [ptr, ec] = std::from_chars(begin, end, out);
  if (ec != std::errc() || ptr != end)
    bad_value(origin_, e->line, section, key, e->value, "a number");
  return out;
}

int ConfigFile::get_int(const std::string& section, const std::string& key, int fallback) const {
  const Entry* e = find(section, key);
  if (!e) return fallback;
  int out = 0;
  const char* begin = e->value.data();
  const char* end = begin + e->value.size();
  const auto [ptr, ec] = std::from_chars(begin, end, out);
  if (ec != std::errc() || ptr != end)
    bad_value(origin_, e->line, section, key, e->value, "an integer");
  return out;
}

bool ConfigFile::get_bool(const std::string& section, const std::string& key,
                          bool fallback) const {
  const Entry* e = find(section, key);
  if (!e) return fallback;
  if (e->value == "true" || e->value == "1" || e->value == "yes" || e->value == "on") return true;
  if (e->value == "false" || e->value == "0" || e->value == "no" || e->value == "off")
    return false;
  bad_value(origin_, e->line, section, key, e->value, "a boolean (true/false)");
}

std::uint64_t ConfigFile::get_uint64(const std::string& section, const std::string& key,
                                     std::uint64_t fallback) const {
  const Entry* e = find(section, key);
  if (!e) return fallback;
  std::uint64_t out = 0;
  const char* begin = e->value.data();
  const char* end = begin + e->value.size();
  const auto [ptr, ec] = std::from_chars(begin, end, out);
  if (ec != std::errc() || ptr != end)
    bad_value(origin_, e->line, section, key, e->value, "an unsigned integer");
  return out;
}

std::vector<std::string> ConfigFile::get_string_list(const std::string& section,
                                                     const std::string& key,
                                                     const std::vector<std::string>& fallback) const {
  const Entry* e = find(section, key);
  if (!e) return fallback;
  std::vector<std::string> out;
  if (trim(e->value).empty()) return out;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = e->value.find(',', start);
    const std::string item =
        trim(e->value.substr(start, comma == std::string::npos ? comma : comma - start));
    if (item.empty()) bad_value(origin_, e->line, section, key, e->value, "a comma list");
    out.push_back(item);
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return out;
}

void ConfigFile::reject_unknown() const {
  std::string report;
  for (const auto& [name, section] : sections_) {
    if (!section.touched) {
      report += "\n  " + where(origin_, section.line) + "unknown section [" + name + "]";
      continue;
    }
    for (const auto& [key, entry] : section.entries)
      if (!entry.consumed)
        report +=
            "\n  " + where(origin_, entry.line) + "unknown key '" + key + "' in [" + name + "]";
  }
  if (!report.empty()) throw ConfigError("unrecognized configuration:" + report);
}

namespace {

GustKind parse_gust_kind(const std::string& value) {
  if (value == "one_minus_cosine") return GustKind::one_minus_cosine;
  if (value == "von_karman") return GustKind::von_karman;
  throw ConfigError("[gust] kind: unknown gust kind '" + value +
                    "' (expected one_minus_cosine or von_karman)");
}

bool parse_spacing(const std::string& value) {
  if (value == "log") return true;
  if (value == "linear") return false;
  throw ConfigError("[sweep] spacing: unknown spacing '" + value + "' (expected log or linear)");
}

VelocityLaw parse_velocity_law(const std::string& value) {
  if (value == "constant-fraction") return VelocityLaw::constant_fraction;
  if (value == "power-law") return VelocityLaw::power_law;
  throw ConfigError("[sweep] velocity_law: unknown velocity_law '" + value +
                    "' (expected constant-fraction or power-law)");
}

AppConfig assemble_app_config(const ConfigFile& cfg) {
  AppConfig out;

  AerofoilParams& mp = out.model;
  mp.U_star = cfg.get_double("model", "U_star", mp.U_star);
  mp.a = cfg.get_double("model", "a", mp.a);
  mp.c_h = cfg.get_double("model", "c_h", mp.c_h);
  mp.x_alpha = cfg.get_double("model", "x_alpha", mp.x_alpha);
  mp.r_alpha2 = cfg.get_double("model", "r_alpha2", mp.r_alpha2);
  mp.x_delta = cfg.get_double("model", "x_delta", mp.x_delta);
  mp.r_delta2 = cfg.get_double("model", "r_delta2", mp.r_delta2);
  mp.mu = cfg.get_double("model", "mu", mp.mu);
  mp.omega_xi = cfg.get_double("model", "omega_xi", mp.omega_xi);
  mp.omega_delta = cfg.get_double("model", "omega_delta", mp.omega_delta);
  mp.zeta_xi = cfg.get_double("model", "zeta_xi", mp.zeta_xi);
  mp.zeta_alpha = cfg.get_double("model", "zeta_alpha", mp.zeta_alpha);
  mp.zeta_delta = cfg.get_double("model", "zeta_delta", mp.zeta_delta);
  mp.K_xi3 = cfg.get_double("model", "K_xi3", mp.K_xi3);
  mp.K_alpha3 = cfg.get_double("model", "K_alpha3", mp.K_alpha3);

  GustConfig& g = out.gust;
  g.kind = parse_gust_kind(cfg.get_string("gust", "kind", "one_minus_cosine"));
  g.discrete.w0 = cfg.get_double("gust", "w0", g.discrete.w0);
  g.discrete.H_g = cfg.get_double("gust", "H_g", g.discrete.H_g);
  g.discrete.U_inf = cfg.get_double("gust", "U_inf", g.discrete.U_inf);
  g.discrete.t0 = cfg.get_double("gust", "t0", g.discrete.t0);
  g.turbulence.U_inf = g.discrete.U_inf; // one freestream for either gust kind
  g.turbulence.sigma_w = cfg.get_double("gust", "sigma_w", g.turbulence.sigma_w);
  g.turbulence.L_w = cfg.get_double("gust", "L_w", g.turbulence.L_w);
  g.turbulence.duration = cfg.get_double("gust", "duration", g.turbulence.duration);
  g.turbulence.sample_rate = cfg.get_double("gust", "sample_rate", g.turbulence.sample_rate);
  g.turbulence.seed = cfg.get_uint64("gust", "seed", g.turbulence.seed);

  SweepSpec& s = out.sweep;
  s.Hg_min = cfg.get_double("sweep", "Hg_min", s.Hg_min);
  s.Hg_max = cfg.get_double("sweep", "Hg_max", s.Hg_max);
  s.n_sites = cfg.get_int("sweep", "n_sites", s.n_sites);
  s.log_spacing = parse_spacing(cfg.get_string("sweep", "spacing", s.log_spacing ? "log" : "linear"));
  s.U_inf = cfg.get_double("sweep", "U_inf", s.U_inf);
  s.t0 = cfg.get_double("sweep", "t0", s.t0);
  s.decay_margin = cfg.get_double("sweep", "decay_margin", s.decay_margin);
  s.velocity.law = parse_velocity_law(cfg.get_string(
      "sweep", "velocity_law",
      s.velocity.law == VelocityLaw::constant_fraction ? "constant-fraction" : "power-law"));
  s.velocity.fraction = cfg.get_double("sweep", "fraction", s.velocity.fraction);
  s.velocity.U_ref = cfg.get_double("sweep", "U_ref", s.velocity.U_ref);
  s.velocity.H_ref = cfg.get_double("sweep", "H_ref", s.velocity.H_ref);
  s.velocity.exponent = cfg.get_double("sweep", "exponent", s.velocity.exponent);
  s.velocity.w0_min = cfg.get_double("sweep", "w0_min", s.velocity.w0_min);
  s.velocity.w0_max = cfg.get_double("sweep", "w0_max", s.velocity.w0_max);
  s.metric_channels = cfg.get_string_list("sweep", "metric_channels", s.metric_channels);
  s.validate_top_k = cfg.get_int("sweep", "validate_top_k", s.validate_top_k);

  RomBuildOptions& r = out.rom;
  r.order = cfg.get_int("rom", "order", r.order);
  r.basis.m = cfg.get_int("rom", "modes", r.basis.m);
  r.basis.origin_radius_frac =
      cfg.get_double("rom", "origin_radius_frac", r.basis.origin_radius_frac);
  r.basis.max_damping_ratio = cfg.get_double("rom", "max_damping_ratio", r.basis.max_damping_ratio);
  r.basis.eig_residual_tol = cfg.get_double("rom", "eig_residual_tol", r.basis.eig_residual_tol);
  r.basis.biortho_tol = cfg.get_double("rom", "biortho_tol", r.basis.biortho_tol);
  r.fd_step_jacobian = cfg.get_double("rom", "fd_step_jacobian", r.fd_step_jacobian);
  r.coeffs.h_bilinear = cfg.get_double("rom", "h_bilinear", r.coeffs.h_bilinear);
  r.coeffs.h_trilinear = cfg.get_double("rom", "h_trilinear", r.coeffs.h_trilinear);
  r.coeffs.richardson_check = cfg.get_bool("rom", "richardson_check", r.coeffs.richardson_check);

  SimConfig& si = out.sim;
  si.step = cfg.get_double("sim", "step", si.step);
  si.auto_step = cfg.get_bool("sim", "auto_step", si.auto_step);
  si.auto_step_tol = cfg.get_double("sim", "auto_step_tol", si.auto_step_tol);
  si.t_begin = cfg.get_double("sim", "t_begin", si.t_begin);

  FlutterConfig& f = out.flutter;
  f.u_min = cfg.get_double("flutter", "u_min", f.u_min);
  f.u_max = cfg.get_double("flutter", "u_max", f.u_max);
  f.points = cfg.get_int("flutter", "points", f.points);
  f.xtol = cfg.get_double("flutter", "xtol", f.xtol);

  cfg.reject_unknown();
  return out;
}

} // namespace

AppConfig load_app_config(const std::string& path) {
  return assemble_app_config(ConfigFile::parse_file(path));
}

AppConfig app_config_from_text(const std::string& text, const std::string& origin) {
  return assemble_app_config(ConfigFile::parse_text(text, origin));
}

} // namespace gustrom
