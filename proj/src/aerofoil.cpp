// Copyright (c) the gustrom project contributors.
// SPDX-License-Identifier: Apache-2.0

#include "gustrom/aerofoil.hpp"

#include <cmath>

#include "gustrom/rom.hpp"

namespace gustrom {

namespace {

constexpr double kPi = 3.14159265358979323846;

// Two-term exponential kernel constants (Jones for Wagner, Sears-type fit
// for Kussner). The Wagner weights satisfy 1 - psi1 - psi2 = phi(0) = 1/2;
// the Kussner kernel starts at zero, so gusts enter only through its lags.
constexpr double kWagnerW[2] = {0.165, 0.335};
constexpr double kWagnerE[2] = {0.0455, 0.3};
constexpr double kKussnerW[2] = {0.5, 0.5};
constexpr double kKussnerE[2] = {0.13, 1.0};

// Thin-aerofoil hinge geometry integrals evaluated at the flap hinge
// location c (Theodorsen's T family, plus the usual derived combinations).
struct HingeConstants {
  double t1, t3, t4, t5, t7, t8, t9, t10, t11, t12, t13;
  double t15, t16, t17, t18, t19;

  HingeConstants(double c, double a) {
    const double ac = std::acos(c);
    const double s = std::sqrt(1.0 - c * c);
    t1 = -(1.0 / 3.0) * (2.0 + c * c) * s + c * ac;
    t3 = -(0.125 + c * c) * ac * ac + 0.25 * c * s * ac * (7.0 + 2.0 * c * c) -
         0.125 * (1.0 - c * c) * (5.0 * c * c + 4.0);
    t4 = -ac + c * s;
    t5 = -(1.0 - c * c) - ac * ac + 2.0 * c * s * ac;
    t7 = -(0.125 + c * c) * ac + 0.125 * c * s * (7.0 + 2.0 * c * c);
    t8 = -(1.0 / 3.0) * (2.0 * c * c + 1.0) * s + c * ac;
    t9 = 0.5 * ((1.0 / 3.0) * s * s * s + a * t4);
    t10 = s + ac;
    t11 = ac * (1.0 - 2.0 * c) + s * (2.0 - c);
    t12 = s * (2.0 + c) - ac * (2.0 * c + 1.0);
    t13 = 0.5 * (-t7 - (c - a) * t1);
    t15 = t4 + t10;
    t16 = t1 - t8 - (c - a) * t4 + 0.5 * t11;
    t17 = -2.0 * t9 - t1 + (a - 0.5) * t4;
    t18 = t5 - t4 * t10;
    t19 = 0.5 * t4 * t11;
  }
};

} // namespace

double wagner_function(double tau) {
  if (tau < 0.0)
    return 0.0;
  return 1.0 - kWagnerW[0] * std::exp(-kWagnerE[0] * tau) -
         kWagnerW[1] * std::exp(-kWagnerE[1] * tau);
}

double kussner_function(double tau) {
  if (tau < 0.0)
    return 0.0;
  return 1.0 - kKussnerW[0] * std::exp(-kKussnerE[0] * tau) -
         kKussnerW[1] * std::exp(-kKussnerE[1] * tau);
}

void AerofoilParams::validate() const {
  if (!(U_star > 0.0))
    throw ConfigError("aerofoil: U_star must be positive");
  if (!(mu > 0.0))
    throw ConfigError("aerofoil: mass ratio must be positive");
  if (!(a > -1.0 && a < 1.0))
    throw ConfigError("aerofoil: elastic axis must lie inside the chord");
  if (!(c_h > -1.0 && c_h < 1.0))
    throw ConfigError("aerofoil: flap hinge must lie inside the chord");
  if (!(c_h > a))
    throw ConfigError("aerofoil: flap hinge must lie aft of the elastic axis");
  if (!(r_alpha2 > 0.0) || !(r_delta2 > 0.0))
    throw ConfigError("aerofoil: radii of gyration must be positive");
  if (!(omega_xi > 0.0) || !(omega_delta > 0.0))
    throw ConfigError("aerofoil: frequency ratios must be positive");
  if (zeta_xi < 0.0 || zeta_alpha < 0.0 || zeta_delta < 0.0)
    throw ConfigError("aerofoil: damping ratios must be non-negative");
  if (!std::isfinite(x_alpha) || !std::isfinite(x_delta) || !std::isfinite(K_xi3) ||
      !std::isfinite(K_alpha3))
    throw ConfigError("aerofoil: non-finite parameter");
}

namespace {

ModelDescriptor aerofoil_descriptor() {
  ModelDescriptor d;
  d.name = "aerofoil3dof";
  d.n_states = 14;
  d.n_disturbance = 1;
  d.n_control = 0;
  d.state_labels = {"xi",       "alpha",     "delta",     "xi_dot",   "alpha_dot",
                    "delta_dot", "lag1_xi",  "lag1_alpha", "lag1_delta",
                    "lag2_xi",  "lag2_alpha", "lag2_delta", "gust_lag1", "gust_lag2"};
  return d;
}

} // namespace

AerofoilModel::AerofoilModel(const AerofoilParams& params)
    : NonlinearModel(aerofoil_descriptor()), params_(params) {
  params_.validate();
  const double a = params_.a;
  const double c = params_.c_h;
  const double mu = params_.mu;
  const double us = params_.U_star;
  const HingeConstants t(c, a);

  // Structural inertia plus apparent mass. The apparent block is the
  // kinetic energy of the entrained flow and must stay positive
  // semidefinite; the pitch/flap coupling is 2 T13 / pi.
  mass_(0, 0) = 1.0 + 1.0 / mu;
  mass_(0, 1) = params_.x_alpha - a / mu;
  mass_(0, 2) = params_.x_delta - t.t1 / (kPi * mu);
  mass_(1, 1) = params_.r_alpha2 + (0.125 + a * a) / mu;
  mass_(1, 2) = params_.r_delta2 + (c - a) * params_.x_delta + 2.0 * t.t13 / (kPi * mu);
  mass_(2, 2) = params_.r_delta2 - t.t3 / (kPi * kPi * mu);
  mass_(1, 0) = mass_(0, 1);
  mass_(2, 0) = mass_(0, 2);
  mass_(2, 1) = mass_(1, 2);

  Eigen::LLT<Eigen::Matrix3d> llt(mass_);
  if (llt.info() != Eigen::Success)
    throw ConfigError("aerofoil: combined mass matrix is not positive definite");
  mass_inv_ = mass_.inverse();

  // Non-circulatory loads linear in the structural rates and displacements.
  // Every rotary-rate diagonal is dissipative; the whole family reduces to
  // the plain pitch-damping coefficients when the hinge is moved to the
  // leading edge, which fixes the signs of the flap couplings.
  load_v_ << 0.0, -1.0 / mu, t.t4 / (kPi * mu),
      0.0, -(0.5 - a) / mu, -t.t16 / (kPi * mu),
      0.0, -t.t17 / (kPi * mu), t.t19 / (kPi * kPi * mu);
  load_q_ << 0.0, 0.0, 0.0,
      0.0, 0.0, -t.t15 / (kPi * mu),
      0.0, 0.0, -t.t18 / (kPi * kPi * mu);

  // Circulatory load distribution per unit three-quarter-chord downwash.
  load_dw_ << -2.0 / mu, 2.0 * (a + 0.5) / mu, -t.t12 / (kPi * mu);

  // Quasi-steady downwash weights: q-part (0, 1, T10/pi), rate part
  // (1, 1/2 - a, T11/(2 pi)).
  const double cq[3] = {0.0, 1.0, t.t10 / kPi};
  const double dv[3] = {1.0, 0.5 - a, t.t11 / (2.0 * kPi)};
  const double s1 = kWagnerW[0] * kWagnerE[0] + kWagnerW[1] * kWagnerE[1];
  const double phi0 = 1.0 - kWagnerW[0] - kWagnerW[1];
  for (int j = 0; j < 3; ++j) {
    // Duhamel by parts: instantaneous part phi(0) Q + sum_i W_i e_i I_i with
    // the per-coordinate lag realization I_i = cq . X_i + dv . (q - e_i X_i).
    downwash_q_[j] = phi0 * cq[j] + s1 * dv[j];
    downwash_v_[j] = phi0 * dv[j];
    for (int i = 0; i < 2; ++i)
      lag_out_[i][j] = kWagnerW[i] * kWagnerE[i] * (cq[j] - kWagnerE[i] * dv[j]);
  }
  kussner_out_[0] = kKussnerW[0] * kKussnerE[0];
  kussner_out_[1] = kKussnerW[1] * kKussnerE[1];

  const double wx = params_.omega_xi;
  const double wd = params_.omega_delta;
  stiff_ << wx * wx / (us * us), params_.r_alpha2 / (us * us),
      params_.r_delta2 * wd * wd / (us * us);
  damp_ << 2.0 * params_.zeta_xi * wx / us, 2.0 * params_.zeta_alpha * params_.r_alpha2 / us,
      2.0 * params_.zeta_delta * params_.r_delta2 * wd / us;
  cubic_xi_ = params_.K_xi3 * wx * wx / (us * us);
  cubic_alpha_ = params_.K_alpha3 * params_.r_alpha2 / (us * us);
}

void AerofoilModel::eval(const Eigen::VectorXd& w, const Eigen::VectorXd& u_d,
                         const Eigen::VectorXd&, Eigen::VectorXd& out) const {
  const Eigen::Vector3d q = w.segment<3>(0);
  const Eigen::Vector3d v = w.segment<3>(3);
  const double wg = u_d[0];

  // Total effective downwash: instantaneous + Wagner lags + Kussner lags.
  double dw = kussner_out_[0] * w[12] + kussner_out_[1] * w[13];
  for (int j = 0; j < 3; ++j) {
    dw += downwash_q_[j] * q[j] + downwash_v_[j] * v[j];
    dw += lag_out_[0][j] * w[6 + j] + lag_out_[1][j] * w[9 + j];
  }

  Eigen::Vector3d rhs = load_v_ * v + load_q_ * q + load_dw_ * dw;
  rhs -= damp_.cwiseProduct(v);
  rhs -= stiff_.cwiseProduct(q);
  rhs[0] -= cubic_xi_ * q[0] * q[0] * q[0];
  rhs[1] -= cubic_alpha_ * q[1] * q[1] * q[1];

  out.segment<3>(0) = v;
  out.segment<3>(3) = mass_inv_ * rhs;
  for (int j = 0; j < 3; ++j) {
    out[6 + j] = -kWagnerE[0] * w[6 + j] + q[j];
    out[9 + j] = -kWagnerE[1] * w[9 + j] + q[j];
  }
  out[12] = -kKussnerE[0] * w[12] + wg;
  out[13] = -kKussnerE[1] * w[13] + wg;
}

std::unique_ptr<AerofoilModel> make_aerofoil(const AerofoilParams& params) {
  return std::make_unique<AerofoilModel>(params);
}

FlutterScan flutter_trace(const AerofoilParams& params, double u_lo, double u_hi, int points,
                          double xtol) {
  if (!(u_hi > u_lo) || !(u_lo > 0.0))
    throw ContractViolation("flutter_trace: need 0 < u_lo < u_hi");
  if (points < 2)
    throw ContractViolation("flutter_trace: need at least two grid points");
  if (!(xtol > 0.0))
    throw ContractViolation("flutter_trace: xtol must be positive");

  auto abscissa_at = [&params](double u) {
    AerofoilParams p = params;
    p.U_star = u;
    const AerofoilModel model(p);
    const Eigen::VectorXd w0 = Eigen::VectorXd::Zero(14);
    const Eigen::VectorXd u_d = Eigen::VectorXd::Zero(1);
    const Eigen::VectorXd u_c;
    return spectral_abscissa(fd_state_jacobian(model, w0, u_d, u_c));
  };

  FlutterScan scan;
  scan.trace.reserve(static_cast<size_t>(points));
  for (int i = 0; i < points; ++i) {
    const double u =
        u_lo + (u_hi - u_lo) * static_cast<double>(i) / static_cast<double>(points - 1);
    scan.trace.push_back({u, abscissa_at(u)});
  }

  for (size_t i = 0; i + 1 < scan.trace.size(); ++i) {
    if (scan.trace[i].max_re < 0.0 && scan.trace[i + 1].max_re >= 0.0) {
      double lo = scan.trace[i].U_star;
      double hi = scan.trace[i + 1].U_star;
      while (hi - lo > xtol) {
        const double mid = 0.5 * (lo + hi);
        (abscissa_at(mid) < 0.0 ? lo : hi) = mid;
      }
      scan.crossing_found = true;
      scan.U_flutter = 0.5 * (lo + hi);
      break;
    }
  }
  return scan;
}

double critical_parameter(const std::function<double(double)>& margin, double lo, double hi,
                          double xtol) {
  if (!(hi > lo) || !(xtol > 0.0))
    throw ContractViolation("critical_parameter: bad bracket or tolerance");
  double f_lo = margin(lo);
  double f_hi = margin(hi);
  if (!(f_lo < 0.0) || !(f_hi > 0.0))
    throw ContractViolation("critical_parameter: margin must change sign over the bracket");
  while (hi - lo > xtol) {
    const double mid = 0.5 * (lo + hi);
    const double f_mid = margin(mid);
    if (f_mid < 0.0)
      lo = mid;
    else
      hi = mid;
  }
  return 0.5 * (lo + hi);
}

} // namespace gustrom
