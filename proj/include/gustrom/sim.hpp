// Copyright (c) the gustrom project contributors.
// SPDX-License-Identifier: Apache-2.0

#ifndef GUSTROM_SIM_HPP
#define GUSTROM_SIM_HPP

#include <functional>
#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

#include "gustrom/gust.hpp"
#include "gustrom/rom.hpp"

namespace gustrom {

// Scalar disturbance input over time. Fixed-step RK4 evaluates it at the
// stage times t, t + h/2 and t + h.
using GustFunction = std::function<double(double)>;

GustFunction zero_gust();
GustFunction gust_from_spec(const DiscreteGustSpec& spec);
GustFunction gust_from_signal(const GustSignal& signal); // caller keeps the signal alive

struct SimOptions {
  double t_begin = 0.0;
  double t_end = 1.0;
  double step = 0.01;

  void validate() const;
};

struct HistoryMeta {
  std::string model_id;
  std::string gust_id;
  double step = 0.0;
  double wall_seconds = 0.0; // excluded from any equality comparison
};

// Full-order trajectory, one column per sample.
struct TimeHistory {
  std::vector<double> t;
  Eigen::MatrixXd states; // n x N
  std::vector<std::string> labels; // one per state row
  HistoryMeta meta;
};

// Reduced trajectory kept in modal coordinates; reconstruction to physical
// channels happens lazily in extract_metrics / write_history_csv.
struct ReducedHistory {
  std::vector<double> t;
  Eigen::MatrixXcd z; // m x N
  std::shared_ptr<const RomModel> rom;
  HistoryMeta meta;
};

// Classic fixed-step RK4 on dw/dt = R(w, u_d(t), u_c). Models with a single
// disturbance input take the gust; models without disturbances require a
// zero gust. A non-finite state aborts with DivergenceError carrying the
// time and last finite state. Deterministic: identical inputs give
// bit-identical trajectories.
TimeHistory integrate_fom(const NonlinearModel& model, const Eigen::VectorXd& w_init,
                          const GustFunction& gust, const Eigen::VectorXd& u_c,
                          const SimOptions& options);

// Same integrator on the reduced dynamics. Only representative modes are
// marched; conjugate partners are reconstituted exactly, so z keeps
// z_partner = conj(z_representative) bit-exactly.
ReducedHistory integrate_rom(std::shared_ptr<const RomModel> rom, const Eigen::VectorXcd& z0,
                             const GustFunction& gust, const SimOptions& options);

struct ChannelMetrics {
  std::string label;
  double peak_abs = 0.0; // max |value|; earliest time wins ties
  double t_peak = 0.0;
  double final_abs = 0.0;
  bool settled = false; // trailing 10% of samples stays below 5% of the peak
};

std::vector<ChannelMetrics> extract_metrics(const TimeHistory& history,
                                            const std::vector<std::string>& channels);
std::vector<ChannelMetrics> extract_metrics(const ReducedHistory& history,
                                            const std::vector<std::string>& channels);

// Multi-column text output (time plus the named channels) with round-trip
// decimal precision.
void write_history_csv(const TimeHistory& history, const std::vector<std::string>& channels,
                       std::ostream& out);
void write_history_csv(const ReducedHistory& history, const std::vector<std::string>& channels,
                       std::ostream& out);

// Step-halving convergence probe: integrates at h, h/2 and h/4 and returns
// (|x_h - x_h/2|, |x_h/2 - x_h/4|) in the discrete L2 norm on the coarse
// sample grid. The ratio of the two is ~16 for a smooth RK4 problem.
std::pair<double, double> step_convergence_errors(const NonlinearModel& model,
                                                  const Eigen::VectorXd& w_init,
                                                  const GustFunction& gust,
                                                  const Eigen::VectorXd& u_c,
                                                  const SimOptions& options);

} // namespace gustrom

#endif // GUSTROM_SIM_HPP
