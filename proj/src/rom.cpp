// Copyright (c) the gustrom project contributors.
// SPDX-License-Identifier: Apache-2.0

#include "gustrom/rom.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace gustrom {

namespace {

std::string fmt(double x) {
  std::ostringstream os;
  os.precision(6);
  os << x;
  return os.str();
}

} // namespace

int EigenBasis::representative_count() const {
  int count = 0;
  for (const ModeInfo& mode : modes)
    count += mode.representative ? 1 : 0;
  return count;
}

double Tensor3c::max_abs() const {
  double worst = 0.0;
  for (const Complex& c : v_)
    worst = std::max(worst, std::abs(c));
  return worst;
}

double Tensor4c::max_abs() const {
  double worst = 0.0;
  for (const Complex& c : v_)
    worst = std::max(worst, std::abs(c));
  return worst;
}

JacobianMatrix compute_jacobian(const NonlinearModel& model, const Eigen::VectorXd& w0,
                                const Eigen::VectorXd& u_d0, const Eigen::VectorXd& u_c0,
                                double fd_step) {
  JacobianMatrix jac;
  jac.entries = fd_state_jacobian(model, w0, u_d0, u_c0, fd_step);
  jac.base_point = w0;
  jac.fd_step = fd_step;
  return jac;
}

Eigen::MatrixXd compute_gust_input_matrix(const NonlinearModel& model, const Eigen::VectorXd& w0,
                                          const Eigen::VectorXd& u_d0, const Eigen::VectorXd& u_c0,
                                          double fd_step) {
  if (fd_step <= 0.0)
    throw ContractViolation("compute_gust_input_matrix: fd_step must be positive");
  const Eigen::Index n = model.descriptor().n_states;
  const Eigen::Index nd = model.descriptor().n_disturbance;
  if (u_d0.size() != nd)
    throw ContractViolation("compute_gust_input_matrix: disturbance size mismatch");

  Eigen::MatrixXd bg(n, nd);
  Eigen::VectorXd probe = u_d0;
  for (Eigen::Index j = 0; j < nd; ++j) {
    const double h = fd_step * (1.0 + std::abs(u_d0[j]));
    probe[j] = u_d0[j] + h;
    const Eigen::VectorXd plus = model.residual(w0, probe, u_c0);
    probe[j] = u_d0[j] - h;
    const Eigen::VectorXd minus = model.residual(w0, probe, u_c0);
    probe[j] = u_d0[j];
    bg.col(j) = (plus - minus) / (2.0 * h);
  }
  return bg;
}

namespace {

// One eigenvalue of the full spectrum: a real mode or a whole conjugate pair
// (stored through its positive-imaginary representative).
struct Candidate {
  Complex lambda;
  Eigen::VectorXcd phi; // canonical unit right eigenvector
  bool is_pair = false;
  double abs_lambda = 0.0;
  double zeta = 0.0; // -Re/|lambda|, pairs only
};

// Unit norm, largest-magnitude entry rotated onto the positive real axis.
// Ties go to the lowest index so the result is deterministic.
void canonicalize(Eigen::VectorXcd& v) {
  v.normalize();
  Eigen::Index lead = 0;
  double best = -1.0;
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (std::abs(v[i]) > best + 1e-14) {
      best = std::abs(v[i]);
      lead = i;
    }
  }
  const Complex pivot = v[lead];
  if (std::abs(pivot) > 0.0)
    v *= std::conj(pivot) / std::abs(pivot);
}

} // namespace

EigenBasis select_basis(const JacobianMatrix& jacobian, const BasisOptions& options) {
  const Eigen::Index n = jacobian.entries.rows();
  if (jacobian.entries.cols() != n)
    throw ContractViolation("select_basis: Jacobian must be square");
  if (options.m < 1)
    throw ContractViolation("select_basis: requested basis size must be >= 1");
  if (options.m > n)
    throw ContractViolation("select_basis: requested basis size " + std::to_string(options.m) +
                            " exceeds state dimension " + std::to_string(n));

  Eigen::EigenSolver<Eigen::MatrixXd> solver(jacobian.entries);
  if (solver.info() != Eigen::Success)
    throw ReductionError("select_basis: eigenvalue iteration failed to converge");
  const Eigen::VectorXcd lambdas = solver.eigenvalues();
  const Eigen::MatrixXcd vectors = solver.eigenvectors();

  // Group the spectrum into real modes and conjugate pairs. Real matrices
  // give exactly real eigenvalues for 1x1 Schur blocks, but match pairs by
  // distance rather than trusting any output ordering.
  std::vector<Candidate> reals;
  std::vector<Candidate> pairs;
  std::vector<bool> used(static_cast<size_t>(n), false);
  for (Eigen::Index i = 0; i < n; ++i) {
    if (used[static_cast<size_t>(i)])
      continue;
    const Complex li = lambdas[i];
    if (std::abs(li.imag()) <= 1e-12 * (1.0 + std::abs(li))) {
      Candidate c;
      c.lambda = Complex(li.real(), 0.0);
      c.phi = vectors.col(i);
      c.abs_lambda = std::abs(li.real());
      reals.push_back(std::move(c));
      used[static_cast<size_t>(i)] = true;
      continue;
    }
    // Find the unused conjugate partner.
    Eigen::Index match = -1;
    double best = 1e300;
    for (Eigen::Index j = i + 1; j < n; ++j) {
      if (used[static_cast<size_t>(j)])
        continue;
      const double dist = std::abs(lambdas[j] - std::conj(li));
      if (dist < best) {
        best = dist;
        match = j;
      }
    }
    if (match < 0 || best > 1e-8 * (1.0 + std::abs(li)))
      throw ReductionError("select_basis: complex eigenvalue " + fmt(li.real()) + " + " +
                           fmt(li.imag()) + "i has no conjugate partner");
    Candidate c;
    c.lambda = li.imag() > 0.0 ? li : std::conj(li);
    if (li.imag() > 0.0)
      c.phi = vectors.col(i);
    else
      c.phi = vectors.col(i).conjugate();
    c.is_pair = true;
    c.abs_lambda = std::abs(c.lambda);
    c.zeta = -c.lambda.real() / c.abs_lambda;
    pairs.push_back(std::move(c));
    used[static_cast<size_t>(i)] = true;
    used[static_cast<size_t>(match)] = true;
  }

  double max_abs = 0.0;
  for (const Candidate& c : reals)
    max_abs = std::max(max_abs, c.abs_lambda);
  for (const Candidate& c : pairs)
    max_abs = std::max(max_abs, c.abs_lambda);
  const double window = options.origin_radius_frac * max_abs;

  // Stage the candidates: origin-window reals by |lambda|, lightly damped
  // pairs by damping ratio, everything else by |lambda|.
  std::vector<std::pair<const Candidate*, std::string>> queue;
  {
    std::vector<const Candidate*> stage_a;
    for (const Candidate& c : reals)
      if (c.abs_lambda <= window)
        stage_a.push_back(&c);
    std::stable_sort(stage_a.begin(), stage_a.end(),
                     [](const Candidate* x, const Candidate* y) {
                       return x->abs_lambda < y->abs_lambda;
                     });
    for (const Candidate* c : stage_a)
      queue.emplace_back(c, "origin window: |lambda| = " + fmt(c->abs_lambda) +
                                " <= " + fmt(window));

    std::vector<const Candidate*> stage_b;
    for (const Candidate& c : pairs)
      if (c.zeta <= options.max_damping_ratio)
        stage_b.push_back(&c);
    std::stable_sort(stage_b.begin(), stage_b.end(),
                     [](const Candidate* x, const Candidate* y) { return x->zeta < y->zeta; });
    for (const Candidate* c : stage_b)
      queue.emplace_back(c, "light damping: zeta = " + fmt(c->zeta) +
                                " <= " + fmt(options.max_damping_ratio));

    std::vector<const Candidate*> stage_c;
    for (const Candidate& c : reals)
      if (c.abs_lambda > window)
        stage_c.push_back(&c);
    for (const Candidate& c : pairs)
      if (c.zeta > options.max_damping_ratio)
        stage_c.push_back(&c);
    std::stable_sort(stage_c.begin(), stage_c.end(),
                     [](const Candidate* x, const Candidate* y) {
                       return x->abs_lambda < y->abs_lambda;
                     });
    for (const Candidate* c : stage_c)
      queue.emplace_back(c, "fill by magnitude: |lambda| = " + fmt(c->abs_lambda));
  }

  EigenBasis basis;
  std::vector<const Candidate*> chosen;
  std::vector<std::string> reasons;
  int slots = options.m;
  for (const auto& [cand, reason] : queue) {
    if (slots <= 0)
      break;
    if (cand->is_pair && slots == 1) {
      basis.warnings.push_back("conjugate pair at lambda = " + fmt(cand->lambda.real()) + " + " +
                               fmt(cand->lambda.imag()) +
                               "i kept whole; basis exceeds the requested size by one");
    }
    chosen.push_back(cand);
    reasons.push_back(reason);
    slots -= cand->is_pair ? 2 : 1;
  }

  Eigen::Index m = 0;
  for (const Candidate* c : chosen)
    m += c->is_pair ? 2 : 1;

  basis.lambdas.resize(m);
  basis.Phi.resize(n, m);
  basis.Psi.resize(n, m);
  basis.modes.resize(static_cast<size_t>(m));

  // Canonicalize the full eigenvector matrix once; left vectors come from
  // its inverse so biorthonormality is automatic.
  Eigen::MatrixXcd v_full(n, n);
  {
    Eigen::Index col = 0;
    std::vector<Eigen::VectorXcd> cols;
    for (Candidate& c : reals) {
      Eigen::VectorXcd v = c.phi;
      canonicalize(v);
      v = v.real().cast<Complex>(); // exact realness for real modes
      v.normalize();
      c.phi = v;
      v_full.col(col++) = v;
    }
    for (Candidate& c : pairs) {
      Eigen::VectorXcd v = c.phi;
      canonicalize(v);
      c.phi = v;
      v_full.col(col++) = v;
      v_full.col(col++) = v.conjugate();
    }
  }
  Eigen::FullPivLU<Eigen::MatrixXcd> lu(v_full);
  if (!lu.isInvertible())
    throw ReductionError("select_basis: eigenvector matrix is numerically singular; "
                         "the Jacobian may be defective");
  const Eigen::MatrixXcd psi_full = lu.inverse().adjoint();

  // Column bookkeeping to find each candidate's slot in v_full.
  auto full_column_of = [&](const Candidate* target) -> Eigen::Index {
    Eigen::Index col = 0;
    for (const Candidate& c : reals) {
      if (&c == target)
        return col;
      ++col;
    }
    for (const Candidate& c : pairs) {
      if (&c == target)
        return col;
      col += 2;
    }
    throw ReductionError("select_basis: internal candidate bookkeeping failure");
  };

  Eigen::Index at = 0;
  for (size_t idx = 0; idx < chosen.size(); ++idx) {
    const Candidate* c = chosen[idx];
    const Eigen::Index src = full_column_of(c);
    if (!c->is_pair) {
      basis.lambdas[at] = c->lambda;
      basis.Phi.col(at) = c->phi;
      basis.Psi.col(at) = psi_full.col(src);
      ModeInfo& info = basis.modes[static_cast<size_t>(at)];
      info.kind = ModeKind::real_mode;
      info.pair_partner = -1;
      info.representative = true;
      info.tag = "rigid-body/gust-coupling";
      info.reason = reasons[idx];
      ++at;
      continue;
    }
    basis.lambdas[at] = c->lambda;
    basis.lambdas[at + 1] = std::conj(c->lambda);
    basis.Phi.col(at) = c->phi;
    basis.Phi.col(at + 1) = c->phi.conjugate();
    basis.Psi.col(at) = psi_full.col(src);
    basis.Psi.col(at + 1) = psi_full.col(src).conjugate();
    ModeInfo& rep = basis.modes[static_cast<size_t>(at)];
    rep.kind = ModeKind::complex_pair;
    rep.pair_partner = static_cast<int>(at) + 1;
    rep.representative = true;
    rep.tag = "structural";
    rep.reason = reasons[idx];
    ModeInfo& par = basis.modes[static_cast<size_t>(at + 1)];
    par.kind = ModeKind::complex_pair;
    par.pair_partner = static_cast<int>(at);
    par.representative = false;
    par.tag = "structural";
    par.reason = reasons[idx];
    at += 2;
  }

  // Polish the pairing scale, then verify the advertised invariants.
  for (Eigen::Index k = 0; k < m; ++k) {
    if (!basis.modes[static_cast<size_t>(k)].representative)
      continue;
    const Complex pairing = (basis.Psi.col(k).adjoint() * basis.Phi.col(k))(0, 0);
    if (std::abs(pairing) < 1e-14)
      throw ReductionError("select_basis: degenerate left/right pairing");
    basis.Psi.col(k) /= std::conj(pairing);
    const int partner = basis.modes[static_cast<size_t>(k)].pair_partner;
    if (partner >= 0)
      basis.Psi.col(partner) = basis.Psi.col(k).conjugate();
  }

  const Eigen::MatrixXcd gram = basis.Psi.adjoint() * basis.Phi;
  const double defect =
      (gram - Eigen::MatrixXcd::Identity(m, m)).cwiseAbs().maxCoeff();
  if (defect > options.biortho_tol)
    throw ReductionError("select_basis: biorthonormality defect " + fmt(defect) +
                         " exceeds tolerance " + fmt(options.biortho_tol));
  for (Eigen::Index k = 0; k < m; ++k) {
    const double resid =
        (jacobian.entries * basis.Phi.col(k) - basis.lambdas[k] * basis.Phi.col(k)).norm();
    if (resid > options.eig_residual_tol * (1.0 + std::abs(basis.lambdas[k])))
      throw ReductionError("select_basis: eigenpair residual " + fmt(resid) +
                           " exceeds tolerance for lambda = " + fmt(basis.lambdas[k].real()) +
                           " + " + fmt(basis.lambdas[k].imag()) + "i");
  }
  return basis;
}

namespace {

// Shared machinery for the centred difference stencils. Directions are fed
// through unit normalization; zero directions short-circuit to zero.
struct StencilContext {
  const NonlinearModel* model;
  Eigen::VectorXd w0;
  Eigen::VectorXd u_d0;
  Eigen::VectorXd u_c;
  long evaluations = 0;

  Eigen::VectorXd eval(const Eigen::VectorXd& w) {
    ++evaluations;
    return model->residual(w, u_d0, u_c);
  }
};

// B(u, v) by the four-point centred stencil; exact for quadratics and free of
// every odd-order Taylor term.
Eigen::VectorXd bilinear_real(StencilContext& ctx, const Eigen::VectorXd& u,
                              const Eigen::VectorXd& v, double h) {
  const double nu = u.norm();
  const double nv = v.norm();
  if (nu == 0.0 || nv == 0.0)
    return Eigen::VectorXd::Zero(ctx.w0.size());
  const Eigen::VectorXd uh = u / nu;
  const Eigen::VectorXd vh = v / nv;
  const Eigen::VectorXd fpp = ctx.eval(ctx.w0 + h * (uh + vh));
  const Eigen::VectorXd fpm = ctx.eval(ctx.w0 + h * (uh - vh));
  const Eigen::VectorXd fmp = ctx.eval(ctx.w0 - h * (uh - vh));
  const Eigen::VectorXd fmm = ctx.eval(ctx.w0 - h * (uh + vh));
  return (fpp - fpm - fmp + fmm) * (nu * nv / (4.0 * h * h));
}

// C(u, v, t) by the eight-point centred stencil; kills quartic terms too.
Eigen::VectorXd trilinear_real(StencilContext& ctx, const Eigen::VectorXd& u,
                               const Eigen::VectorXd& v, const Eigen::VectorXd& t, double h) {
  const double nu = u.norm();
  const double nv = v.norm();
  const double nt = t.norm();
  if (nu == 0.0 || nv == 0.0 || nt == 0.0)
    return Eigen::VectorXd::Zero(ctx.w0.size());
  const Eigen::VectorXd uh = u / nu;
  const Eigen::VectorXd vh = v / nv;
  const Eigen::VectorXd th = t / nt;
  Eigen::VectorXd acc = Eigen::VectorXd::Zero(ctx.w0.size());
  for (int s1 = -1; s1 <= 1; s1 += 2)
    for (int s2 = -1; s2 <= 1; s2 += 2)
      for (int s3 = -1; s3 <= 1; s3 += 2) {
        const double sign = static_cast<double>(s1 * s2 * s3);
        acc += sign * ctx.eval(ctx.w0 + h * (s1 * uh + s2 * vh + s3 * th));
      }
  return acc * (nu * nv * nt / (8.0 * h * h * h));
}

// Direction generators: real modes contribute (Re phi, 0), pair
// representatives (Re phi, Im phi). Partner columns reuse the same parts
// with the sign of the imaginary component flipped.
struct Generator {
  Eigen::Index mode;    // basis column of the representative
  Eigen::VectorXd re;
  Eigen::VectorXd im;   // zero for real modes
  bool has_partner = false;
  Eigen::Index partner = -1;
};

std::vector<Generator> collect_generators(const EigenBasis& basis) {
  std::vector<Generator> gens;
  for (Eigen::Index k = 0; k < basis.size(); ++k) {
    const ModeInfo& info = basis.modes[static_cast<size_t>(k)];
    if (!info.representative)
      continue;
    Generator g;
    g.mode = k;
    g.re = basis.Phi.col(k).real();
    g.im = basis.Phi.col(k).imag();
    g.has_partner = info.kind == ModeKind::complex_pair;
    g.partner = g.has_partner ? info.pair_partner : -1;
    gens.push_back(std::move(g));
  }
  return gens;
}

// Column indices and imaginary-part signs reachable from a generator.
struct OrbitEntry {
  Eigen::Index column;
  double sign;
};

std::vector<OrbitEntry> orbit(const Generator& g) {
  std::vector<OrbitEntry> entries{{g.mode, 1.0}};
  if (g.has_partner)
    entries.push_back({g.partner, -1.0});
  return entries;
}

Tensor3c bilinear_pass(StencilContext& ctx, const EigenBasis& basis, double h) {
  const Eigen::Index m = basis.size();
  Tensor3c d(m);
  const std::vector<Generator> gens = collect_generators(basis);

  for (size_t p = 0; p < gens.size(); ++p) {
    for (size_t q = p; q < gens.size(); ++q) {
      const Generator& gp = gens[p];
      const Generator& gq = gens[q];
      const Eigen::VectorXd baa = bilinear_real(ctx, gp.re, gq.re, h);
      const Eigen::VectorXd bab = bilinear_real(ctx, gp.re, gq.im, h);
      const Eigen::VectorXd bba = bilinear_real(ctx, gp.im, gq.re, h);
      const Eigen::VectorXd bbb = bilinear_real(ctx, gp.im, gq.im, h);

      for (const OrbitEntry& oi : orbit(gp)) {
        for (const OrbitEntry& oj : orbit(gq)) {
          // B(a_p + i s_i b_p, a_q + i s_j b_q)
          const Eigen::VectorXcd bij =
              (baa - oi.sign * oj.sign * bbb).cast<Complex>() +
              Complex(0, 1) * (oj.sign * bab + oi.sign * bba).cast<Complex>();
          for (Eigen::Index k = 0; k < m; ++k) {
            const Complex value = 0.5 * (basis.Psi.col(k).adjoint() * bij)(0, 0);
            d(k, oi.column, oj.column) = value;
            d(k, oj.column, oi.column) = value;
          }
        }
      }
    }
  }
  return d;
}

Tensor4c trilinear_pass(StencilContext& ctx, const EigenBasis& basis, double h) {
  const Eigen::Index m = basis.size();
  Tensor4c e(m);
  const std::vector<Generator> gens = collect_generators(basis);

  for (size_t p = 0; p < gens.size(); ++p) {
    for (size_t q = p; q < gens.size(); ++q) {
      for (size_t r = q; r < gens.size(); ++r) {
        const Generator& gp = gens[p];
        const Generator& gq = gens[q];
        const Generator& gr = gens[r];

        // c[x][y][z]: x, y, z pick the real (0) or imaginary (1) part.
        Eigen::VectorXd c[2][2][2];
        const Eigen::VectorXd* parts[3][2] = {
            {&gp.re, &gp.im}, {&gq.re, &gq.im}, {&gr.re, &gr.im}};
        for (int x = 0; x < 2; ++x)
          for (int y = 0; y < 2; ++y)
            for (int z = 0; z < 2; ++z)
              c[x][y][z] = trilinear_real(ctx, *parts[0][x], *parts[1][y], *parts[2][z], h);

        for (const OrbitEntry& oi : orbit(gp)) {
          for (const OrbitEntry& oj : orbit(gq)) {
            for (const OrbitEntry& ol : orbit(gr)) {
              // C(a+i s_i b, a+i s_j b, a+i s_l b) expanded multilinearly.
              Eigen::VectorXcd cv = Eigen::VectorXcd::Zero(ctx.w0.size());
              for (int x = 0; x < 2; ++x)
                for (int y = 0; y < 2; ++y)
                  for (int z = 0; z < 2; ++z) {
                    Complex factor(1.0, 0.0);
                    if (x)
                      factor *= Complex(0, oi.sign);
                    if (y)
                      factor *= Complex(0, oj.sign);
                    if (z)
                      factor *= Complex(0, ol.sign);
                    cv += factor * c[x][y][z].cast<Complex>();
                  }
              for (Eigen::Index k = 0; k < m; ++k) {
                const Complex value = (basis.Psi.col(k).adjoint() * cv)(0, 0) / 6.0;
                const Eigen::Index i = oi.column;
                const Eigen::Index j = oj.column;
                const Eigen::Index l = ol.column;
                e(k, i, j, l) = value;
                e(k, i, l, j) = value;
                e(k, j, i, l) = value;
                e(k, j, l, i) = value;
                e(k, l, i, j) = value;
                e(k, l, j, i) = value;
              }
            }
          }
        }
      }
    }
  }
  return e;
}

double tensor_deviation(const Tensor3c& a, const Tensor3c& b) {
  double worst = 0.0;
  for (size_t i = 0; i < a.data().size(); ++i)
    worst = std::max(worst, std::abs(a.data()[i] - b.data()[i]));
  return worst;
}

double tensor_deviation(const Tensor4c& a, const Tensor4c& b) {
  double worst = 0.0;
  for (size_t i = 0; i < a.data().size(); ++i)
    worst = std::max(worst, std::abs(a.data()[i] - b.data()[i]));
  return worst;
}

} // namespace

Tensor3c compute_bilinear_coefficients(const NonlinearModel& model, const Eigen::VectorXd& w0,
                                       const Eigen::VectorXd& u_c, const EigenBasis& basis,
                                       const CoeffOptions& options, CoeffReport* report) {
  if (options.h_bilinear <= 0.0)
    throw ContractViolation("compute_bilinear_coefficients: step must be positive");
  StencilContext ctx{&model, w0, Eigen::VectorXd::Zero(model.descriptor().n_disturbance), u_c, 0};

  Tensor3c d = bilinear_pass(ctx, basis, options.h_bilinear);
  double dev = 0.0;
  if (options.richardson_check) {
    const Tensor3c coarse = bilinear_pass(ctx, basis, 2.0 * options.h_bilinear);
    dev = tensor_deviation(d, coarse);
  }
  if (report) {
    report->h = options.h_bilinear;
    report->richardson_dev = dev;
    report->residual_evaluations = ctx.evaluations;
  }
  return d;
}

Tensor4c compute_trilinear_coefficients(const NonlinearModel& model, const Eigen::VectorXd& w0,
                                        const Eigen::VectorXd& u_c, const EigenBasis& basis,
                                        const CoeffOptions& options, CoeffReport* report) {
  if (options.h_trilinear <= 0.0)
    throw ContractViolation("compute_trilinear_coefficients: step must be positive");
  StencilContext ctx{&model, w0, Eigen::VectorXd::Zero(model.descriptor().n_disturbance), u_c, 0};

  Tensor4c e = trilinear_pass(ctx, basis, options.h_trilinear);
  double dev = 0.0;
  if (options.richardson_check) {
    const Tensor4c coarse = trilinear_pass(ctx, basis, 2.0 * options.h_trilinear);
    dev = tensor_deviation(e, coarse);
  }
  if (report) {
    report->h = options.h_trilinear;
    report->richardson_dev = dev;
    report->residual_evaluations = ctx.evaluations;
  }
  return e;
}

RomModel assemble_rom(const NonlinearModel& model, const Equilibrium& trim,
                      const Eigen::VectorXd& u_c, const RomBuildOptions& options) {
  if (!trim.converged)
    throw ContractViolation("assemble_rom: equilibrium did not converge (residual " +
                            fmt(trim.residual_norm) + ")");
  if (options.order < 1 || options.order > 3)
    throw ContractViolation("assemble_rom: order must be 1, 2 or 3");

  RomModel rom;
  rom.fom = model.descriptor();
  rom.w0 = trim.w0;
  rom.u_c = u_c;
  rom.order = options.order;
  rom.fd_step_jacobian = options.fd_step_jacobian;

  const Eigen::VectorXd u_d0 = Eigen::VectorXd::Zero(model.descriptor().n_disturbance);
  const JacobianMatrix jac =
      compute_jacobian(model, trim.w0, u_d0, u_c, options.fd_step_jacobian);
  rom.basis = select_basis(jac, options.basis);
  rom.Bg = compute_gust_input_matrix(model, trim.w0, u_d0, u_c, options.fd_step_jacobian);
  rom.Bg_reduced = rom.basis.Psi.adjoint() * rom.Bg;

  if (options.order >= 2)
    rom.D = compute_bilinear_coefficients(model, trim.w0, u_c, rom.basis, options.coeffs,
                                          &rom.bilinear_report);
  if (options.order >= 3)
    rom.E = compute_trilinear_coefficients(model, trim.w0, u_c, rom.basis, options.coeffs,
                                           &rom.trilinear_report);

  complete_conjugate_rows(rom);
  return rom;
}

Eigen::VectorXd reconstruct(const RomModel& rom, const Eigen::VectorXcd& z, double imag_tol) {
  if (z.size() != rom.modes())
    throw ContractViolation("reconstruct: coordinate size mismatch");
  const Eigen::VectorXcd x = rom.basis.Phi * z;
  const double imag_residue = x.imag().cwiseAbs().maxCoeff();
  const double scale = 1.0 + x.cwiseAbs().maxCoeff();
  if (imag_residue > imag_tol * scale)
    throw NumericalFailure("reconstruct: imaginary residue " + fmt(imag_residue) +
                           " indicates conjugate-inconsistent coordinates");
  return rom.w0 + x.real();
}

Eigen::VectorXcd project(const RomModel& rom, const Eigen::VectorXd& w) {
  if (w.size() != rom.w0.size())
    throw ContractViolation("project: state size mismatch");
  return rom.basis.Psi.adjoint() * (w - rom.w0).cast<Complex>();
}

void complete_conjugate_rows(RomModel& rom) {
  const Eigen::Index m = rom.modes();
  auto partner_of = [&](Eigen::Index i) -> Eigen::Index {
    const ModeInfo& info = rom.basis.modes[static_cast<size_t>(i)];
    return info.kind == ModeKind::complex_pair ? info.pair_partner : i;
  };

  for (Eigen::Index k = 0; k < m; ++k) {
    const ModeInfo& info = rom.basis.modes[static_cast<size_t>(k)];
    if (info.representative)
      continue;
    const Eigen::Index rep = info.pair_partner;
    rom.basis.lambdas[k] = std::conj(rom.basis.lambdas[rep]);
    rom.basis.Phi.col(k) = rom.basis.Phi.col(rep).conjugate();
    rom.basis.Psi.col(k) = rom.basis.Psi.col(rep).conjugate();
    if (rom.Bg_reduced.rows() == m)
      rom.Bg_reduced.row(k) = rom.Bg_reduced.row(rep).conjugate();
    if (rom.D.dim() == m)
      for (Eigen::Index i = 0; i < m; ++i)
        for (Eigen::Index j = 0; j < m; ++j)
          rom.D(k, i, j) = std::conj(rom.D(rep, partner_of(i), partner_of(j)));
    if (rom.E.dim() == m)
      for (Eigen::Index i = 0; i < m; ++i)
        for (Eigen::Index j = 0; j < m; ++j)
          for (Eigen::Index l = 0; l < m; ++l)
            rom.E(k, i, j, l) =
                std::conj(rom.E(rep, partner_of(i), partner_of(j), partner_of(l)));
  }
}

double spectral_abscissa(const Eigen::MatrixXd& a) {
  Eigen::EigenSolver<Eigen::MatrixXd> solver(a, false);
  if (solver.info() != Eigen::Success)
    throw NumericalFailure("spectral_abscissa: eigenvalue iteration failed");
  return solver.eigenvalues().real().maxCoeff();
}

} // namespace gustrom
