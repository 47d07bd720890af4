// Copyright (c) the gustrom project contributors.
// SPDX-License-Identifier: Apache-2.0

#include "gustrom/gust.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <random>

#include <Eigen/Dense>
#include <unsupported/Eigen/MatrixFunctions>

#include "gustrom/format.hpp"

namespace gustrom {

namespace {
constexpr double kPi = 3.14159265358979323846;
constexpr double kKarman = 1.339;
} // namespace

void DiscreteGustSpec::validate() const {
  if (!(H_g > 0.0))
    throw ConfigError("discrete gust: gust length must be positive");
  if (!(U_inf > 0.0))
    throw ConfigError("discrete gust: freestream speed must be positive");
  if (!std::isfinite(w0) || !std::isfinite(t0))
    throw ConfigError("discrete gust: non-finite parameter");
}

double one_minus_cosine(const DiscreteGustSpec& spec, double t) {
  const double span = spec.H_g / spec.U_inf;
  if (t < spec.t0 || t > spec.t0 + span)
    return 0.0;
  return 0.5 * spec.w0 * (1.0 - std::cos(2.0 * kPi * spec.U_inf * (t - spec.t0) / spec.H_g));
}

double gust_frequency(const DiscreteGustSpec& spec) { return spec.U_inf / spec.H_g; }

double von_karman_psd(double sigma_w, double L_w, double Omega) {
  if (!(sigma_w > 0.0) || !(L_w > 0.0))
    throw ContractViolation("von_karman_psd: sigma_w and L_w must be positive");
  if (Omega < 0.0)
    throw ContractViolation("von_karman_psd: Omega must be non-negative");
  const double x = kKarman * L_w * Omega;
  const double x2 = x * x;
  return sigma_w * sigma_w * L_w / kPi * (1.0 + 8.0 / 3.0 * x2) /
         std::pow(1.0 + x2, 11.0 / 6.0);
}

void TurbulenceSpec::validate() const {
  if (!(sigma_w > 0.0))
    throw ConfigError("turbulence: sigma_w must be positive");
  if (!(L_w > 0.0))
    throw ConfigError("turbulence: L_w must be positive");
  if (!(U_inf > 0.0))
    throw ConfigError("turbulence: U_inf must be positive");
  if (!(duration > 0.0))
    throw ConfigError("turbulence: duration must be positive");
  if (!(sample_rate > 0.0))
    throw ConfigError("turbulence: sample_rate must be positive");
}

double GustSignal::value_at(double time) const {
  if (t.empty() || time < t.front() || time > t.back())
    return 0.0;
  const auto it = std::upper_bound(t.begin(), t.end(), time);
  if (it == t.begin())
    return w.front();
  if (it == t.end())
    return w.back();
  const size_t hi = static_cast<size_t>(it - t.begin());
  const size_t lo = hi - 1;
  const double f = (time - t[lo]) / (t[hi] - t[lo]);
  return (1.0 - f) * w[lo] + f * w[hi];
}

namespace {

// 53-bit uniform in [0, 1) from one engine draw.
double to_unit(std::uint64_t bits) {
  return static_cast<double>(bits >> 11) * 0x1.0p-53;
}

// Explicit Box-Muller so the stream does not depend on any library's
// distribution internals.
class GaussianStream {
public:
  explicit GaussianStream(std::uint64_t seed) : rng_(seed) {}

  double next() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    const double u1 = 1.0 - to_unit(rng_()); // (0, 1]
    const double u2 = to_unit(rng_());
    const double r = std::sqrt(-2.0 * std::log(u1));
    spare_ = r * std::sin(2.0 * kPi * u2);
    have_spare_ = true;
    return r * std::cos(2.0 * kPi * u2);
  }

private:
  std::mt19937_64 rng_;
  double spare_ = 0.0;
  bool have_spare_ = false;
};

} // namespace

GustSignal von_karman_realization(const TurbulenceSpec& spec) {
  spec.validate();

  // Rational shaping filter for the vertical component,
  //   H(s) = sigma sqrt(L/(pi U)) (1 + 2.7478 T s + 0.3398 (T s)^2)
  //          / (1 + 2.9958 T s + 1.9754 (T s)^2 + 0.1539 (T s)^3),  T = L/U,
  // in controllable canonical form. Driven by white noise of two-sided
  // density pi, its output density matches von_karman_psd(omega/U)/U.
  const double T = spec.L_w / spec.U_inf;
  const double d3 = 0.1539 * T * T * T;
  const double gain = spec.sigma_w * std::sqrt(spec.L_w / (kPi * spec.U_inf));

  Eigen::Matrix3d a = Eigen::Matrix3d::Zero();
  a(0, 1) = 1.0;
  a(1, 2) = 1.0;
  a(2, 0) = -1.0 / d3;
  a(2, 1) = -2.9958 * T / d3;
  a(2, 2) = -1.9754 * T * T / d3;
  Eigen::Vector3d b(0.0, 0.0, 1.0);
  Eigen::RowVector3d c(gain / d3, gain * 2.7478 * T / d3, gain * 0.3398 * T * T / d3);

  // The rational tail falls like omega^-2 instead of omega^-5/3 and loses a
  // few percent of the variance. Renormalize the output so the stationary
  // variance is exactly sigma_w^2: solve A P + P A' + Qc = 0 for P and scale
  // by sigma_w / sqrt(c P c').
  {
    const Eigen::Matrix3d q_c = kPi * (b * b.transpose());
    Eigen::Matrix<double, 9, 9> kron = Eigen::Matrix<double, 9, 9>::Zero();
    Eigen::Matrix<double, 9, 1> rhs;
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) {
        for (int r = 0; r < 3; ++r) {
          kron(3 * i + j, 3 * r + j) += a(i, r);
          kron(3 * i + j, 3 * i + r) += a(j, r);
        }
        rhs(3 * i + j) = -q_c(i, j);
      }
    const Eigen::Matrix<double, 9, 1> pv = kron.fullPivLu().solve(rhs);
    Eigen::Matrix3d p;
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j)
        p(i, j) = pv(3 * i + j);
    const double var0 = (c * p * c.transpose())(0, 0);
    if (!(var0 > 0.0))
      throw NumericalFailure("von_karman_realization: non-positive filter variance");
    c *= spec.sigma_w / std::sqrt(var0);
  }

  // Exact discretization of the driven system: the sampled state has the
  // covariance of the continuous stationary process, so no variance is lost
  // to the sampling rate. Transition and noise covariance come from the
  // block-matrix exponential.
  const double dt = 1.0 / spec.sample_rate;
  Eigen::Matrix<double, 6, 6> block = Eigen::Matrix<double, 6, 6>::Zero();
  block.topLeftCorner<3, 3>() = -a;
  block.topRightCorner<3, 3>() = kPi * (b * b.transpose());
  block.bottomRightCorner<3, 3>() = a.transpose();
  const Eigen::Matrix<double, 6, 6> phi = (block * dt).exp();
  const Eigen::Matrix3d ad = phi.bottomRightCorner<3, 3>().transpose();
  const Eigen::Matrix3d qd = ad * phi.topRightCorner<3, 3>();

  // Symmetrize before factoring; qd is symmetric up to rounding.
  const Eigen::Matrix3d qd_sym = 0.5 * (qd + qd.transpose());
  Eigen::LLT<Eigen::Matrix3d> llt(qd_sym);
  Eigen::Matrix3d noise_l;
  if (llt.info() == Eigen::Success) {
    noise_l = llt.matrixL();
  } else {
    // Controllability makes qd positive definite; guard rounding anyway.
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(qd_sym);
    if (es.info() != Eigen::Success)
      throw NumericalFailure("von_karman_realization: noise covariance factorization failed");
    noise_l = es.eigenvectors() *
              es.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal();
  }

  GaussianStream gauss(spec.seed);
  Eigen::Vector3d x = Eigen::Vector3d::Zero();
  auto step = [&]() {
    const Eigen::Vector3d z(gauss.next(), gauss.next(), gauss.next());
    x = ad * x + noise_l * z;
  };

  // Settle the startup transient; the slowest filter pole decays like U/(2L).
  const long burn = static_cast<long>(std::ceil(10.0 * T / dt));
  for (long i = 0; i < burn; ++i)
    step();

  const long count = static_cast<long>(std::floor(spec.duration * spec.sample_rate)) + 1;
  GustSignal signal;
  signal.t.reserve(static_cast<size_t>(count));
  signal.w.reserve(static_cast<size_t>(count));
  for (long i = 0; i < count; ++i) {
    signal.t.push_back(static_cast<double>(i) * dt);
    signal.w.push_back(c * x);
    step();
  }
  return signal;
}

double penetration_delay(double y, double sweep_angle_rad, double U_inf) {
  if (!(U_inf > 0.0))
    throw ContractViolation("penetration_delay: U_inf must be positive");
  return y * std::sin(sweep_angle_rad) / U_inf;
}

void write_gust_table(const GustSignal& signal, std::ostream& out) {
  out << "t,w\n";
  for (size_t i = 0; i < signal.t.size(); ++i)
    out << format_double(signal.t[i]) << ',' << format_double(signal.w[i]) << '\n';
}

GustSignal sample_discrete_gust(const DiscreteGustSpec& spec, double t_begin, double t_end,
                                double sample_rate) {
  spec.validate();
  if (!(t_end > t_begin) || !(sample_rate > 0.0))
    throw ContractViolation("sample_discrete_gust: empty time range or bad rate");
  const long count = static_cast<long>(std::floor((t_end - t_begin) * sample_rate)) + 1;
  GustSignal signal;
  signal.t.reserve(static_cast<size_t>(count));
  signal.w.reserve(static_cast<size_t>(count));
  for (long i = 0; i < count; ++i) {
    const double t = t_begin + static_cast<double>(i) / sample_rate;
    signal.t.push_back(t);
    signal.w.push_back(one_minus_cosine(spec, t));
  }
  return signal;
}

} // namespace gustrom
