// Copyright (c) the gustrom project contributors.
// SPDX-License-Identifier: Apache-2.0

#ifndef GUSTROM_CONFIG_HPP
#define GUSTROM_CONFIG_HPP

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "gustrom/aerofoil.hpp"
#include "gustrom/gust.hpp"
#include "gustrom/rom.hpp"
#include "gustrom/sim.hpp"
#include "gustrom/sweep.hpp"

namespace gustrom {

// INI-style configuration: [section] headers, key = value lines, '#' or ';'
// comments. Keys are tracked so anything the application does not consume is
// reported as an error with its line number.
class ConfigFile {
public:
  static ConfigFile parse_file(const std::string& path);
  static ConfigFile parse_text(const std::string& text, const std::string& origin = "<string>");

  bool has(const std::string& section, const std::string& key) const;
  std::string get_string(const std::string& section, const std::string& key,
                         const std::string& fallback) const;
  double get_double(const std::string& section, const std::string& key, double fallback) const;
  int get_int(const std::string& section, const std::string& key, int fallback) const;
  bool get_bool(const std::string& section, const std::string& key, bool fallback) const;
  std::uint64_t get_uint64(const std::string& section, const std::string& key,
                           std::uint64_t fallback) const;
  std::vector<std::string> get_string_list(const std::string& section, const std::string& key,
                                           const std::vector<std::string>& fallback) const;

  // Throws ConfigError listing every key never read and every section never
  // touched, with line numbers.
  void reject_unknown() const;

private:
  struct Entry {
    std::string value;
    int line = 0;
    mutable bool consumed = false;
  };
  struct Section {
    std::map<std::string, Entry> entries;
    int line = 0;
    mutable bool touched = false;
  };
  const Entry* find(const std::string& section, const std::string& key) const;

  std::string origin_;
  std::map<std::string, Section> sections_;
};

enum class GustKind { one_minus_cosine, von_karman };

struct GustConfig {
  GustKind kind = GustKind::one_minus_cosine;
  DiscreteGustSpec discrete;
  TurbulenceSpec turbulence;
};

struct FlutterConfig {
  double u_min = 1.0;
  double u_max = 10.0;
  int points = 19;
  double xtol = 1e-4;
};

struct SimConfig {
  double step = 0.01;
  bool auto_step = false;   // halve until step halving changes the solution
  double auto_step_tol = 1e-6; // relative L2 threshold for auto halving
  double t_begin = 0.0;
};

// Everything the CLI needs, assembled from the [model], [gust], [sweep],
// [rom] and [sim] sections. Defaults are documented in README.md.
struct AppConfig {
  AerofoilParams model;
  GustConfig gust;
  SweepSpec sweep;
  RomBuildOptions rom;
  SimConfig sim;
  FlutterConfig flutter;
};

AppConfig load_app_config(const std::string& path);
AppConfig app_config_from_text(const std::string& text, const std::string& origin = "<string>");

} // namespace gustrom

#endif // GUSTROM_CONFIG_HPP
