// Copyright (c) the gustrom project contributors.
// SPDX-License-Identifier: Apache-2.0

#ifndef GUSTROM_ROM_HPP
#define GUSTROM_ROM_HPP

#include <Eigen/Dense>
#include <complex>
#include <string>
#include <vector>

#include "gustrom/model.hpp"

namespace gustrom {

using Complex = std::complex<double>;

struct JacobianMatrix {
  Eigen::MatrixXd entries;    // n x n, dR/dw
  Eigen::VectorXd base_point; // w0 the derivative was taken at
  double fd_step = 0.0;       // base finite-difference step
};

JacobianMatrix compute_jacobian(const NonlinearModel& model, const Eigen::VectorXd& w0,
                                const Eigen::VectorXd& u_d0, const Eigen::VectorXd& u_c0,
                                double fd_step = 1e-6);

// Central-difference dR/du_d at (w0, u_d0, u_c0), n x n_disturbance.
Eigen::MatrixXd compute_gust_input_matrix(const NonlinearModel& model, const Eigen::VectorXd& w0,
                                          const Eigen::VectorXd& u_d0, const Eigen::VectorXd& u_c0,
                                          double fd_step = 1e-6);

enum class ModeKind { real_mode, complex_pair };

struct ModeInfo {
  ModeKind kind = ModeKind::real_mode;
  int pair_partner = -1; // basis index of the conjugate partner, -1 for real modes
  bool representative = true; // true for real modes and the Im(lambda) > 0 pair member
  std::string tag;    // "rigid-body/gust-coupling" for real modes, "structural" for pairs
  std::string reason; // selection stage and ranking metric
};

// Biorthonormal eigenvector basis: Psi^H * Phi = I. Complex modes always
// appear as adjacent conjugate pairs (representative first); the partner
// columns are exact conjugates of the representative columns.
struct EigenBasis {
  Eigen::VectorXcd lambdas; // m
  Eigen::MatrixXcd Phi;     // n x m right eigenvectors, unit 2-norm columns
  Eigen::MatrixXcd Psi;     // n x m left eigenvectors, scaled so Psi^H Phi = I
  std::vector<ModeInfo> modes;
  std::vector<std::string> warnings;

  Eigen::Index size() const { return lambdas.size(); }
  int representative_count() const;
};

struct BasisOptions {
  int m = 4;                        // requested basis size; pair atomicity may add one
  double origin_radius_frac = 0.05; // real-mode window, fraction of max |lambda|
  double max_damping_ratio = 0.2;   // light complex-pair threshold
  double eig_residual_tol = 1e-8;
  double biortho_tol = 1e-10;
};

// Retains real eigenvalues inside the origin window first, then complex
// pairs by ascending damping ratio, then fills remaining slots by ascending
// |lambda|. Conjugate pairs are atomic: both members or neither, exceeding
// the requested m by one (with a warning) when only one slot remains.
EigenBasis select_basis(const JacobianMatrix& jacobian, const BasisOptions& options);

// Dense symmetric complex 3- and 4-index coefficient tensors, m modes each.
class Tensor3c {
public:
  Tensor3c() = default;
  explicit Tensor3c(Eigen::Index m) : m_(m), v_(static_cast<size_t>(m * m * m), Complex(0, 0)) {}
  Eigen::Index dim() const { return m_; }
  Complex& operator()(Eigen::Index k, Eigen::Index i, Eigen::Index j) {
    return v_[static_cast<size_t>((k * m_ + i) * m_ + j)];
  }
  Complex operator()(Eigen::Index k, Eigen::Index i, Eigen::Index j) const {
    return v_[static_cast<size_t>((k * m_ + i) * m_ + j)];
  }
  double max_abs() const;
  const std::vector<Complex>& data() const { return v_; }
  std::vector<Complex>& data() { return v_; }

private:
  Eigen::Index m_ = 0;
  std::vector<Complex> v_;
};

class Tensor4c {
public:
  Tensor4c() = default;
  explicit Tensor4c(Eigen::Index m)
      : m_(m), v_(static_cast<size_t>(m * m * m * m), Complex(0, 0)) {}
  Eigen::Index dim() const { return m_; }
  Complex& operator()(Eigen::Index k, Eigen::Index i, Eigen::Index j, Eigen::Index l) {
    return v_[static_cast<size_t>(((k * m_ + i) * m_ + j) * m_ + l)];
  }
  Complex operator()(Eigen::Index k, Eigen::Index i, Eigen::Index j, Eigen::Index l) const {
    return v_[static_cast<size_t>(((k * m_ + i) * m_ + j) * m_ + l)];
  }
  double max_abs() const;
  const std::vector<Complex>& data() const { return v_; }
  std::vector<Complex>& data() { return v_; }

private:
  Eigen::Index m_ = 0;
  std::vector<Complex> v_;
};

struct CoeffOptions {
  double h_bilinear = 1e-3;
  double h_trilinear = 1e-3;
  bool richardson_check = true; // recompute at 2h and record the deviation
};

struct CoeffReport {
  double h = 0.0;
  double richardson_dev = 0.0; // max |T_h - T_2h| over all entries, 0 if not checked
  long residual_evaluations = 0;
};

// D_kij = 1/2 psi_k^H B(phi_i, phi_j) where B is the second derivative of R
// at w0, probed with centred four-point stencils along the basis directions.
// Symmetric in (i, j); the Taylor 1/2 is absorbed so the reduced quadratic
// term is sum_ij D_kij z_i z_j.
Tensor3c compute_bilinear_coefficients(const NonlinearModel& model, const Eigen::VectorXd& w0,
                                       const Eigen::VectorXd& u_c, const EigenBasis& basis,
                                       const CoeffOptions& options = {},
                                       CoeffReport* report = nullptr);

// E_kijl = 1/6 psi_k^H C(phi_i, phi_j, phi_l) with C the third derivative of
// R at w0, probed with eight-point centred stencils. Symmetric in (i, j, l).
Tensor4c compute_trilinear_coefficients(const NonlinearModel& model, const Eigen::VectorXd& w0,
                                        const Eigen::VectorXd& u_c, const EigenBasis& basis,
                                        const CoeffOptions& options = {},
                                        CoeffReport* report = nullptr);

// Reduced model of dw/dt = R(w, u_d, u_c) about a trimmed equilibrium:
//   dz_k/dt = lambda_k z_k + sum_ij D_kij z_i z_j
//             + sum_ijl E_kijl z_i z_j z_l + (Psi^H B_g u_d)_k
// Coefficients are excitation independent: build once, drive with any gust.
struct RomModel {
  ModelDescriptor fom;        // descriptor of the source model
  Eigen::VectorXd w0;         // expansion point
  Eigen::VectorXd u_c;        // held control inputs
  int order = 1;              // 1 linear, 2 adds D, 3 adds E
  EigenBasis basis;
  Eigen::MatrixXd Bg;         // n x n_d gust input matrix at w0
  Eigen::MatrixXcd Bg_reduced; // m x n_d, Psi^H Bg
  Tensor3c D;                 // order >= 2
  Tensor4c E;                 // order == 3
  double fd_step_jacobian = 0.0;
  CoeffReport bilinear_report;
  CoeffReport trilinear_report;

  Eigen::Index modes() const { return basis.size(); }
};

struct RomBuildOptions {
  int order = 3;
  BasisOptions basis;
  double fd_step_jacobian = 1e-6;
  CoeffOptions coeffs;
};

// Builds the full reduced model from a converged trim point. Order must be
// 1, 2 or 3; an unconverged equilibrium is refused.
RomModel assemble_rom(const NonlinearModel& model, const Equilibrium& trim,
                      const Eigen::VectorXd& u_c, const RomBuildOptions& options);

// Maps reduced coordinates back to the full state, w0 + Re(Phi z). The basis
// is conjugate closed, so Phi z is real up to rounding; an imaginary residue
// above tolerance (relative to |Phi z|) is a numerical failure.
Eigen::VectorXd reconstruct(const RomModel& rom, const Eigen::VectorXcd& z,
                            double imag_tol = 1e-12);

// z = Psi^H (w - w0).
Eigen::VectorXcd project(const RomModel& rom, const Eigen::VectorXd& w);

// Enforces exact conjugate symmetry: partner columns of Phi/Psi/lambda and
// partner rows of D/E/Bg_reduced are overwritten with conjugates of their
// representatives. Called after coefficient assembly and after file loads so
// both paths yield bit-identical models.
void complete_conjugate_rows(RomModel& rom);

// Largest real part of the eigenvalues of a real matrix.
double spectral_abscissa(const Eigen::MatrixXd& a);

} // namespace gustrom

#endif // GUSTROM_ROM_HPP
