// Copyright (c) the gustrom project contributors.
// SPDX-License-Identifier: Apache-2.0

#ifndef GUSTROM_GUST_HPP
#define GUSTROM_GUST_HPP

#include <cstdint>
#include <iosfwd>
#include <vector>

#include "gustrom/errors.hpp"

namespace gustrom {

// Discrete one-minus-cosine gust. All quantities share one unit system; for
// the nondimensional aerofoil use U_inf = 1, lengths in semichords and w0 as
// a fraction of the freestream, so time is measured in semichords of travel.
struct DiscreteGustSpec {
  double w0 = 0.0;    // peak gust velocity
  double H_g = 1.0;   // gust length (same length unit as U_inf * time)
  double U_inf = 1.0; // freestream speed
  double t0 = 0.0;    // gust onset time

  void validate() const;
  double duration() const { return H_g / U_inf; }
};

// Gust velocity at time t: (w0/2) (1 - cos(2 pi U (t - t0) / H_g)) inside
// [t0, t0 + H_g/U], exactly zero outside.
double one_minus_cosine(const DiscreteGustSpec& spec, double t);

// Characteristic gust frequency U_inf / H_g.
double gust_frequency(const DiscreteGustSpec& spec);

// Von Karman vertical-velocity spectrum as a function of spatial frequency
// Omega (rad per length unit):
//   Phi(Omega) = sigma^2 L/pi (1 + 8/3 (1.339 L Omega)^2)
//                / (1 + (1.339 L Omega)^2)^(11/6)
// Integrates to sigma^2 over Omega in [0, inf).
double von_karman_psd(double sigma_w, double L_w, double Omega);

struct TurbulenceSpec {
  double sigma_w = 1.0;     // RMS gust velocity
  double L_w = 1.0;         // turbulence scale length
  double U_inf = 1.0;       // freestream speed
  double duration = 1.0;    // realization length in time units
  double sample_rate = 1.0; // samples per time unit
  std::uint64_t seed = 0;

  void validate() const;
};

// Uniformly sampled gust time series; strictly increasing times.
struct GustSignal {
  std::vector<double> t;
  std::vector<double> w;

  // Linear interpolation inside the sampled range, zero outside.
  double value_at(double time) const;
};

// Seeded turbulence realization: Gaussian white noise shaped by the
// three-pole/two-zero rational approximation of the Von Karman vertical
// transfer function. The stochastic system is discretized exactly, so the
// sampled points carry the stationary covariance of the continuous process
// at any sample rate, and the filter gain is renormalized so the stationary
// variance equals sigma_w^2. The generator (mt19937_64 + explicit
// Box-Muller) is fixed so realizations are reproducible across platforms.
GustSignal von_karman_realization(const TurbulenceSpec& spec);

// Time for a station at spanwise coordinate y on a wing swept by
// sweep_angle_rad to enter a gust front, y sin(sweep) / U_inf.
double penetration_delay(double y, double sweep_angle_rad, double U_inf);

// Two-column table (time, velocity) with round-trip precision.
void write_gust_table(const GustSignal& signal, std::ostream& out);

// Samples a discrete gust onto a uniform grid (helper for previews).
GustSignal sample_discrete_gust(const DiscreteGustSpec& spec, double t_begin, double t_end,
                                double sample_rate);

} // namespace gustrom

#endif // GUSTROM_GUST_HPP
