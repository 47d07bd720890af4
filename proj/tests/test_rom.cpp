// Copyright (c) the gustrom project contributors.
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>

#include <doctest.h>

#include "gustrom/rom.hpp"
#include "test_models.hpp"

using namespace gustrom;
using testing::DuffingModel;
using testing::LinearModel;
using testing::QuadraticModel;

namespace {
const Eigen::VectorXd kEmpty = Eigen::VectorXd::Zero(0);

// One real mode inside the origin window, one lightly damped pair, one real
// mode outside the window, one heavily damped pair. max |lambda| ~ 4.9976,
// so the 5% origin window is ~0.25.
Eigen::MatrixXd staged_block_matrix() {
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(6, 6);
  a(0, 0) = -0.01;
  a(1, 1) = -0.1;
  a(1, 2) = 2.0;
  a(2, 1) = -2.0;
  a(2, 2) = -0.1;
  a(3, 3) = -3.0;
  a(4, 4) = -2.0;
  a(4, 5) = 4.58;
  a(5, 4) = -4.58;
  a(5, 5) = -2.0;
  return a;
}

double biortho_defect(const EigenBasis& basis) {
  const Eigen::MatrixXcd g = basis.Psi.adjoint() * basis.Phi;
  return (g - Eigen::MatrixXcd::Identity(g.rows(), g.cols())).cwiseAbs().maxCoeff();
}

double eig_residual(const Eigen::MatrixXd& a, const EigenBasis& basis) {
  double worst = 0.0;
  for (Eigen::Index k = 0; k < basis.size(); ++k) {
    const double r = (a * basis.Phi.col(k) - basis.lambdas[k] * basis.Phi.col(k)).norm();
    worst = std::max(worst, r / (1.0 + std::abs(basis.lambdas[k])));
  }
  return worst;
}
} // namespace

TEST_CASE("jacobian wrapper records the base point and step") {
  auto model = testing::make_random_stable_linear(1, 1, 3u);
  const Eigen::VectorXd w0 = Eigen::VectorXd::Constant(3, 0.25);
  const Eigen::VectorXd u_d = Eigen::VectorXd::Zero(1);
  JacobianMatrix jac = compute_jacobian(*model, w0, u_d, kEmpty, 1e-7);

  CHECK(jac.fd_step == 1e-7);
  CHECK((jac.base_point - w0).norm() == 0.0);
  CHECK((jac.entries - model->a()).cwiseAbs().maxCoeff() < 1e-6);
}

TEST_CASE("gust input matrix differentiates the disturbance channel") {
  auto model = testing::make_random_stable_linear(2, 1, 11u);
  const Eigen::Index n = model->descriptor().n_states;
  const Eigen::VectorXd w0 = Eigen::VectorXd::Zero(n);
  const Eigen::VectorXd u_d = Eigen::VectorXd::Zero(1);
  Eigen::MatrixXd bg = compute_gust_input_matrix(*model, w0, u_d, kEmpty);
  CHECK(bg.rows() == n);
  CHECK(bg.cols() == 1);
  CHECK((bg - model->b()).cwiseAbs().maxCoeff() < 1e-9);

  DuffingModel duffing;
  bg = compute_gust_input_matrix(duffing, Eigen::VectorXd::Zero(2), u_d, kEmpty);
  CHECK(bg(0, 0) == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(bg(1, 0) == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("basis selection keeps the slowest modes of a diagonal system") {
  JacobianMatrix jac;
  jac.entries = Eigen::Vector3d(-1.0, -2.0, -3.0).asDiagonal();
  jac.base_point = Eigen::VectorXd::Zero(3);
  jac.fd_step = 1e-6;

  BasisOptions opts;
  opts.m = 2;
  EigenBasis basis = select_basis(jac, opts);

  REQUIRE(basis.size() == 2);
  CHECK(basis.lambdas[0].real() == doctest::Approx(-1.0).epsilon(1e-12));
  CHECK(basis.lambdas[1].real() == doctest::Approx(-2.0).epsilon(1e-12));
  CHECK(basis.lambdas[0].imag() == 0.0);
  CHECK(basis.modes[0].kind == ModeKind::real_mode);
  CHECK(basis.modes[1].kind == ModeKind::real_mode);
  CHECK(basis.modes[0].pair_partner == -1);
  CHECK(basis.representative_count() == 2);
  CHECK(basis.warnings.empty());

  // Canonical eigenvectors of a diagonal matrix, sign fixed to +1.
  CHECK(std::abs(basis.Phi(0, 0) - Complex(1, 0)) < 1e-12);
  CHECK(std::abs(basis.Phi(1, 1) - Complex(1, 0)) < 1e-12);
  CHECK(basis.Phi.col(0).imag().cwiseAbs().maxCoeff() == 0.0);
  CHECK(biortho_defect(basis) < 1e-12);
}

TEST_CASE("basis selection treats conjugate pairs atomically") {
  JacobianMatrix jac;
  jac.entries = Eigen::MatrixXd(2, 2);
  jac.entries << 0.0, 1.0, -1.0, 0.0;
  jac.base_point = Eigen::VectorXd::Zero(2);
  jac.fd_step = 1e-6;

  BasisOptions opts;
  opts.m = 1;
  EigenBasis basis = select_basis(jac, opts);

  // Requesting one slot must deliver the whole pair plus a warning.
  REQUIRE(basis.size() == 2);
  CHECK_FALSE(basis.warnings.empty());
  CHECK(basis.lambdas[0].imag() == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(basis.lambdas[1].imag() == doctest::Approx(-1.0).epsilon(1e-12));
  CHECK(std::abs(basis.lambdas[0].real()) < 1e-12);
  CHECK(basis.modes[0].kind == ModeKind::complex_pair);
  CHECK(basis.modes[0].pair_partner == 1);
  CHECK(basis.modes[1].pair_partner == 0);
  CHECK(basis.modes[0].representative);
  CHECK_FALSE(basis.modes[1].representative);
  CHECK(basis.modes[0].tag == "structural");
  CHECK(basis.representative_count() == 1);

  // Partner columns are exact conjugates of the representative.
  for (Eigen::Index r = 0; r < 2; ++r) {
    CHECK(basis.Phi(r, 1) == std::conj(basis.Phi(r, 0)));
    CHECK(basis.Psi(r, 1) == std::conj(basis.Psi(r, 0)));
  }

  // The matrix is normal, so left and right eigenvectors coincide.
  CHECK((basis.Psi - basis.Phi).cwiseAbs().maxCoeff() < 1e-12);
  CHECK(biortho_defect(basis) < 1e-12);
}

TEST_CASE("basis selection stages: origin window, light pairs, fill by magnitude") {
  JacobianMatrix jac;
  jac.entries = staged_block_matrix();
  jac.base_point = Eigen::VectorXd::Zero(6);
  jac.fd_step = 1e-6;

  BasisOptions opts;
  opts.m = 4;
  EigenBasis basis = select_basis(jac, opts);

  REQUIRE(basis.size() == 4);
  CHECK(basis.lambdas[0].real() == doctest::Approx(-0.01).epsilon(1e-9));
  CHECK(basis.lambdas[0].imag() == 0.0);
  CHECK(basis.lambdas[1].real() == doctest::Approx(-0.1).epsilon(1e-9));
  CHECK(basis.lambdas[1].imag() == doctest::Approx(2.0).epsilon(1e-9));
  CHECK(basis.lambdas[2] == std::conj(basis.lambdas[1]));
  CHECK(basis.lambdas[3].real() == doctest::Approx(-3.0).epsilon(1e-9));
  CHECK(basis.modes[0].tag == "rigid-body/gust-coupling");
  CHECK(basis.modes[1].tag == "structural");
  CHECK(basis.modes[3].tag == "rigid-body/gust-coupling");
  CHECK(basis.warnings.empty());
  CHECK(basis.representative_count() == 3);
  for (const auto& mode : basis.modes)
    CHECK_FALSE(mode.reason.empty());
  CHECK(biortho_defect(basis) < 1e-10);
  CHECK(eig_residual(jac.entries, basis) < 1e-8);

  // One leftover slot and the next candidate is a pair: overshoot by one.
  opts.m = 5;
  basis = select_basis(jac, opts);
  REQUIRE(basis.size() == 6);
  CHECK_FALSE(basis.warnings.empty());
  CHECK(basis.lambdas[4].real() == doctest::Approx(-2.0).epsilon(1e-9));
  CHECK(basis.lambdas[4].imag() == doctest::Approx(4.58).epsilon(1e-9));

  // Same overshoot inside the light-pair stage.
  opts.m = 2;
  basis = select_basis(jac, opts);
  REQUIRE(basis.size() == 3);
  CHECK_FALSE(basis.warnings.empty());
}

TEST_CASE("basis selection rejects impossible requests and defective matrices") {
  JacobianMatrix jac;
  jac.entries = Eigen::Vector2d(-1.0, -2.0).asDiagonal();
  jac.base_point = Eigen::VectorXd::Zero(2);

  BasisOptions opts;
  opts.m = 3;
  CHECK_THROWS_AS(select_basis(jac, opts), ContractViolation);
  opts.m = 0;
  CHECK_THROWS_AS(select_basis(jac, opts), ContractViolation);

  // A Jordan block has no eigenvector basis.
  jac.entries << 0.0, 1.0, 0.0, 0.0;
  opts.m = 2;
  CHECK_THROWS_AS(select_basis(jac, opts), ReductionError);
}

TEST_CASE("full basis of a similarity-transformed system recovers the spectrum") {
  std::vector<Complex> planted;
  auto model = testing::make_random_stable_linear(2, 2, 99u, &planted);
  const Eigen::Index n = model->descriptor().n_states;

  JacobianMatrix jac = compute_jacobian(*model, Eigen::VectorXd::Zero(n),
                                        Eigen::VectorXd::Zero(1), kEmpty);
  BasisOptions opts;
  opts.m = static_cast<int>(n);
  EigenBasis basis = select_basis(jac, opts);

  REQUIRE(basis.size() == n);
  CHECK(biortho_defect(basis) < 1e-10);
  CHECK(eig_residual(jac.entries, basis) < 1e-7);

  // Every planted eigenvalue appears among the selected modes.
  for (const Complex& target : planted) {
    double best = 1e300;
    for (Eigen::Index k = 0; k < basis.size(); ++k)
      best = std::min(best, std::abs(basis.lambdas[k] - target));
    CHECK(best < 1e-5);
  }

  // Pairs are adjacent with the positive-imaginary member first.
  for (Eigen::Index k = 0; k < basis.size(); ++k) {
    if (basis.modes[k].kind == ModeKind::complex_pair && basis.modes[k].representative) {
      CHECK(basis.lambdas[k].imag() > 0.0);
      CHECK(basis.modes[k].pair_partner == k + 1);
    }
  }
}

TEST_CASE("bilinear coefficients match the closed form of a quadratic model") {
  // dw/dt = A w + (w_0^2, 0): B(u, v) = (2 u_0 v_0, 0), so
  // D_kij = conj(psi_k[0]) phi_i[0] phi_j[0] exactly.
  Eigen::MatrixXd a(2, 2);
  a << 0.0, 1.0, -2.0, -0.1;
  QuadraticModel model(a);

  JacobianMatrix jac = compute_jacobian(model, Eigen::VectorXd::Zero(2), kEmpty, kEmpty);
  BasisOptions bopts;
  bopts.m = 2;
  EigenBasis basis = select_basis(jac, bopts);
  REQUIRE(basis.size() == 2);

  CoeffReport report;
  Tensor3c d = compute_bilinear_coefficients(model, Eigen::VectorXd::Zero(2), kEmpty, basis, {},
                                             &report);
  REQUIRE(d.dim() == 2);
  CHECK(report.residual_evaluations > 0);
  // The stencil is exact on quadratics; only rounding remains, at both steps.
  CHECK(report.richardson_dev < 1e-8);

  for (Eigen::Index k = 0; k < 2; ++k)
    for (Eigen::Index i = 0; i < 2; ++i)
      for (Eigen::Index j = 0; j < 2; ++j) {
        const Complex expect = std::conj(basis.Psi(0, k)) * basis.Phi(0, i) * basis.Phi(0, j);
        CHECK(std::abs(d(k, i, j) - expect) < 1e-8);
        CHECK(d(k, i, j) == d(k, j, i));
      }

  // No cubic content: the trilinear tensor is pure stencil noise.
  Tensor4c e = compute_trilinear_coefficients(model, Eigen::VectorXd::Zero(2), kEmpty, basis);
  CHECK(e.max_abs() < 1e-6);
}

TEST_CASE("trilinear coefficients match the closed form of the cubic oscillator") {
  // dv/dt = -x - x^3: C(u, v, t) = (0, -6 u_0 v_0 t_0), so
  // E_kijl = -conj(psi_k[1]) phi_i[0] phi_j[0] phi_l[0] exactly.
  DuffingModel model;
  const Eigen::VectorXd w0 = Eigen::VectorXd::Zero(2);

  JacobianMatrix jac = compute_jacobian(model, w0, Eigen::VectorXd::Zero(1), kEmpty);
  BasisOptions bopts;
  bopts.m = 2;
  EigenBasis basis = select_basis(jac, bopts);
  REQUIRE(basis.size() == 2);

  // The residual is odd about the origin, so the centred bilinear stencil
  // cancels identically, not just to truncation order.
  Tensor3c d = compute_bilinear_coefficients(model, w0, kEmpty, basis);
  CHECK(d.max_abs() < 1e-12);

  CoeffReport report;
  Tensor4c e = compute_trilinear_coefficients(model, w0, kEmpty, basis, {}, &report);
  REQUIRE(e.dim() == 2);
  CHECK(report.residual_evaluations > 0);

  for (Eigen::Index k = 0; k < 2; ++k)
    for (Eigen::Index i = 0; i < 2; ++i)
      for (Eigen::Index j = 0; j < 2; ++j)
        for (Eigen::Index l = 0; l < 2; ++l) {
          const Complex expect =
              -std::conj(basis.Psi(1, k)) * basis.Phi(0, i) * basis.Phi(0, j) * basis.Phi(0, l);
          CHECK(std::abs(e(k, i, j, l) - expect) < 1e-6);
          CHECK(e(k, i, j, l) == e(k, j, i, l));
          CHECK(e(k, i, j, l) == e(k, l, j, i));
        }
}

TEST_CASE("linear systems produce coefficient tensors at the noise floor") {
  auto model = testing::make_random_stable_linear(1, 2, 21u);
  const Eigen::Index n = model->descriptor().n_states;
  const Eigen::VectorXd w0 = Eigen::VectorXd::Zero(n);

  JacobianMatrix jac = compute_jacobian(*model, w0, Eigen::VectorXd::Zero(1), kEmpty);
  BasisOptions bopts;
  bopts.m = static_cast<int>(n);
  EigenBasis basis = select_basis(jac, bopts);

  Tensor3c d = compute_bilinear_coefficients(*model, w0, kEmpty, basis);
  Tensor4c e = compute_trilinear_coefficients(*model, w0, kEmpty, basis);
  CHECK(d.max_abs() < 1e-6);
  CHECK(e.max_abs() < 1e-6);
}

TEST_CASE("full-basis reduced model of a linear system is exact") {
  auto model = testing::make_random_stable_linear(2, 2, 5u);
  const Eigen::Index n = model->descriptor().n_states;

  Equilibrium trim = find_equilibrium(*model, Eigen::VectorXd::Constant(n, 0.1), kEmpty);
  REQUIRE(trim.converged);

  RomBuildOptions opts;
  opts.order = 1;
  opts.basis.m = static_cast<int>(n);
  RomModel rom = assemble_rom(*model, trim, kEmpty, opts);

  CHECK(rom.order == 1);
  CHECK(rom.modes() == n);
  CHECK(rom.D.dim() == 0);
  CHECK(rom.E.dim() == 0);

  // Phi Lambda Psi^H reassembles A.
  const Eigen::MatrixXcd a_rec =
      rom.basis.Phi * rom.basis.lambdas.asDiagonal() * rom.basis.Psi.adjoint();
  CHECK((a_rec.real() - model->a()).cwiseAbs().maxCoeff() < 1e-6);
  CHECK(a_rec.imag().cwiseAbs().maxCoeff() < 1e-8);

  // Reduced gust input is the projected full input.
  const Eigen::MatrixXcd bg_expect = rom.basis.Psi.adjoint() * rom.Bg;
  CHECK((rom.Bg_reduced - bg_expect).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((rom.Bg - model->b()).cwiseAbs().maxCoeff() < 1e-9);

  // Projection followed by reconstruction is the identity on states.
  Eigen::VectorXd w = trim.w0;
  for (Eigen::Index i = 0; i < n; ++i)
    w[i] += 0.01 * static_cast<double>(i + 1) * (i % 2 ? -1.0 : 1.0);
  const Eigen::VectorXcd z = project(rom, w);
  const Eigen::VectorXd w_back = reconstruct(rom, z);
  CHECK((w_back - w).lpNorm<Eigen::Infinity>() < 1e-10);
}

TEST_CASE("third-order reduced model of the cubic oscillator") {
  DuffingModel model;
  Equilibrium trim = find_equilibrium(model, Eigen::VectorXd::Zero(2), kEmpty);
  REQUIRE(trim.converged);

  RomBuildOptions opts;
  opts.order = 3;
  opts.basis.m = 2;
  RomModel rom = assemble_rom(model, trim, kEmpty, opts);

  CHECK(rom.modes() == 2);
  CHECK(rom.D.dim() == 2);
  CHECK(rom.E.dim() == 2);
  CHECK(rom.D.max_abs() < 1e-12);
  CHECK(rom.E.max_abs() > 0.1); // the cubic projects onto the pair
  CHECK(rom.Bg(0, 0) == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(rom.Bg(1, 0) == doctest::Approx(1.0).epsilon(1e-9));

  // Conjugate closure is idempotent bit for bit.
  RomModel again = rom;
  complete_conjugate_rows(again);
  CHECK((again.basis.Phi.array() == rom.basis.Phi.array()).all());
  CHECK((again.basis.Psi.array() == rom.basis.Psi.array()).all());
  CHECK((again.Bg_reduced.array() == rom.Bg_reduced.array()).all());
  CHECK(again.D.data() == rom.D.data());
  CHECK(again.E.data() == rom.E.data());

  // Reconstruction demands conjugate-consistent coordinates.
  Eigen::VectorXcd z(2);
  z << Complex(0.1, 0.05), std::conj(Complex(0.1, 0.05));
  CHECK_NOTHROW(reconstruct(rom, z));
  z[1] = Complex(0.4, 0.4);
  CHECK_THROWS_AS(reconstruct(rom, z), NumericalFailure);
}

TEST_CASE("reduced model assembly validates its inputs") {
  DuffingModel model;
  Equilibrium bad;
  bad.w0 = Eigen::VectorXd::Zero(2);
  bad.converged = false;

  RomBuildOptions opts;
  opts.basis.m = 2;
  CHECK_THROWS_AS(assemble_rom(model, bad, kEmpty, opts), ContractViolation);

  Equilibrium trim = find_equilibrium(model, Eigen::VectorXd::Zero(2), kEmpty);
  opts.order = 4;
  CHECK_THROWS_AS(assemble_rom(model, trim, kEmpty, opts), ContractViolation);
  opts.order = 0;
  CHECK_THROWS_AS(assemble_rom(model, trim, kEmpty, opts), ContractViolation);
}

TEST_CASE("spectral abscissa of known matrices") {
  Eigen::MatrixXd a = Eigen::Vector2d(-1.0, -2.0).asDiagonal();
  CHECK(spectral_abscissa(a) == doctest::Approx(-1.0).epsilon(1e-12));

  Eigen::MatrixXd rot(2, 2);
  rot << 0.0, 1.0, -1.0, 0.0;
  CHECK(spectral_abscissa(rot) == doctest::Approx(0.0).epsilon(1e-12));
}
