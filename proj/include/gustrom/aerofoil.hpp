// Copyright (c) the gustrom project contributors.
// SPDX-License-Identifier: Apache-2.0

#ifndef GUSTROM_AEROFOIL_HPP
#define GUSTROM_AEROFOIL_HPP

#include <functional>
#include <memory>

#include "gustrom/model.hpp"

namespace gustrom {

// Three-degree-of-freedom typical section: plunge xi = h/b (positive down),
// pitch alpha about the elastic axis (positive nose up) and trailing-edge
// flap delta about its hinge. Incompressible thin-aerofoil loads with
// two-term exponential Wagner and Kussner kernels; nondimensional time is
// tau = U t / b. Hardening cubic springs in plunge and pitch, linear flap.
//
// The structural and mass-ratio constants below are a placeholder set drawn
// from the classic cubic typical-section studies; they are stated in the
// shipped config and are expected to be overridden when a vetted set for a
// specific installation exists.
struct AerofoilParams {
  double U_star = 4.5;     // reduced velocity U / (b omega_alpha)
  double a = -0.5;         // elastic axis aft of midchord, semichords
  double c_h = 0.5;        // flap hinge aft of midchord, semichords
  double x_alpha = 0.25;   // section static unbalance about the elastic axis
  double r_alpha2 = 0.5;   // section radius of gyration squared
  double x_delta = 0.0125; // flap static unbalance about the hinge
  double r_delta2 = 0.0125; // flap radius of gyration squared
  double mu = 110.0;       // mass ratio m / (pi rho b^2)
  double omega_xi = 0.5;   // plunge/pitch uncoupled frequency ratio
  double omega_delta = 3.0; // flap/pitch uncoupled frequency ratio
  double zeta_xi = 0.0;    // structural damping ratios
  double zeta_alpha = 0.0;
  double zeta_delta = 0.0;
  double K_xi3 = 1.0;      // cubic plunge stiffness coefficient
  double K_alpha3 = 3.0;   // cubic pitch stiffness coefficient

  void validate() const;
};

// State layout (14 states):
//   [0..2]   xi, alpha, delta
//   [3..5]   d(xi)/dtau, d(alpha)/dtau, d(delta)/dtau
//   [6..11]  Wagner lag states, two per structural coordinate
//   [12..13] Kussner gust lag states
// Single disturbance input: vertical gust velocity over freestream, w_g/U.
class AerofoilModel : public NonlinearModel {
public:
  explicit AerofoilModel(const AerofoilParams& params);

  const AerofoilParams& params() const noexcept { return params_; }
  // Combined structural plus apparent-mass matrix (symmetric).
  const Eigen::Matrix3d& mass_matrix() const noexcept { return mass_; }

protected:
  void eval(const Eigen::VectorXd& w, const Eigen::VectorXd& u_d, const Eigen::VectorXd& u_c,
            Eigen::VectorXd& out) const override;

private:
  AerofoilParams params_;
  Eigen::Matrix3d mass_;
  Eigen::Matrix3d mass_inv_;
  Eigen::Matrix3d load_v_;  // aerodynamic loads linear in velocities
  Eigen::Matrix3d load_q_;  // aerodynamic loads linear in displacements
  Eigen::Vector3d load_dw_; // circulatory load distribution per unit downwash
  Eigen::Vector3d stiff_;   // diagonal linear stiffness
  Eigen::Vector3d damp_;    // diagonal structural damping
  double cubic_xi_ = 0.0;
  double cubic_alpha_ = 0.0;
  double downwash_q_[3] = {0, 0, 0}; // instantaneous downwash, displacements
  double downwash_v_[3] = {0, 0, 0}; // instantaneous downwash, velocities
  double lag_out_[2][3] = {{0, 0, 0}, {0, 0, 0}}; // Wagner lag state weights
  double kussner_out_[2] = {0, 0};
};

std::unique_ptr<AerofoilModel> make_aerofoil(const AerofoilParams& params);

// Wagner and Kussner two-term exponential kernels (Jones-type constants).
double wagner_function(double tau);
double kussner_function(double tau);

struct FlutterPoint {
  double U_star = 0.0;
  double max_re = 0.0; // spectral abscissa of the trim Jacobian
};

struct FlutterScan {
  std::vector<FlutterPoint> trace; // one entry per grid point, ascending U*
  bool crossing_found = false;
  double U_flutter = 0.0; // bisection estimate when crossing_found
};

// Traces the spectral abscissa of the trimmed Jacobian over a reduced
// velocity grid and refines the first stable-to-unstable crossing by
// bisection to x-tolerance `xtol`. No sign change flags crossing_found =
// false rather than failing.
FlutterScan flutter_trace(const AerofoilParams& params, double u_lo, double u_hi, int points,
                          double xtol = 1e-4);

// Generic bisection for the first sign change of a scalar margin function
// over [lo, hi]; requires margin(lo) < 0 < margin(hi).
double critical_parameter(const std::function<double(double)>& margin, double lo, double hi,
                          double xtol);

} // namespace gustrom

#endif // GUSTROM_AEROFOIL_HPP
