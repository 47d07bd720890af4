// Copyright (c) the gustrom project contributors.
// SPDX-License-Identifier: Apache-2.0

#include "gustrom/sim.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <map>
#include <memory>
#include <mutex>
#include <ostream>

#include "gustrom/format.hpp"

namespace gustrom {

namespace {

// Sample count for a fixed-step grid covering [t_begin, t_end]. A trailing
// partial step is not taken; times are formed by multiplication so halved
// steps land on bit-identical coarse-grid instants.
Eigen::Index sample_count(const SimOptions& options) {
  const double span = options.t_end - options.t_begin;
  return static_cast<Eigen::Index>(std::floor(span / options.step + 1e-9)) + 1;
}

std::vector<double> to_std(const Eigen::VectorXd& v) {
  return std::vector<double>(v.data(), v.data() + v.size());
}

double elapsed_seconds(std::chrono::steady_clock::time_point begin) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - begin).count();
}

// Coefficient tensors of physical systems are usually low-rank: a
// nonlinearity that reads s states and forces t equations gives input/output
// unfoldings of rank s and t regardless of the basis size. Singular values
// below max(kFactorRelTol * sigma_max, kFactorAbsTol * model scale) are
// dynamically irrelevant and truncated; the factored evaluation then costs
// O(m * rank) per derivative instead of O(m^degree).
constexpr double kFactorRelTol = 1e-8;
constexpr double kFactorAbsTol = 1e-10;

struct UnfoldFactor {
  Eigen::MatrixXcd U;      // m x m left singular vectors
  Eigen::VectorXd svals;   // descending
  int rank_above(double tol) const {
    int r = 0;
    while (r < svals.size() && svals[r] > tol)
      ++r;
    return r;
  }
};

// Left singular factors of the tensor flattened along the output index k
// (axis 0) or the first input index (axis 1); input slots are equivalent by
// symmetry.
UnfoldFactor unfold_factor(const std::vector<Complex>& data, Eigen::Index m, int degree,
                           int axis) {
  const Eigen::Index cols = degree == 3 ? m * m * m : m * m;
  Eigen::MatrixXcd unfolded(m, cols);
  if (axis == 0) {
    for (Eigen::Index k = 0; k < m; ++k)
      for (Eigen::Index c = 0; c < cols; ++c)
        unfolded(k, c) = data[static_cast<size_t>(k * cols + c)];
  } else {
    const Eigen::Index rest = cols / m; // (k, trailing inputs)
    for (Eigen::Index i = 0; i < m; ++i)
      for (Eigen::Index k = 0; k < m; ++k)
        for (Eigen::Index jl = 0; jl < rest; ++jl)
          unfolded(i, k * rest + jl) = data[static_cast<size_t>((k * m + i) * rest + jl)];
  }
  Eigen::JacobiSVD<Eigen::MatrixXcd> svd(unfolded, Eigen::ComputeThinU);
  return {svd.matrixU(), svd.singularValues()};
}

// Reduced dynamics in real modal coordinates: one variable per real mode and
// a (Re, Im) pair per conjugate pair, partners implied. Over the conjugate-
// completed mode vector the quadratic and cubic sums collapse to real
// polynomials in these variables. Two evaluation plans are prepared and the
// cheaper one (by contraction count) is used: packed dense monomial
// coefficients over all variables, or per-degree factored units
// out += W * core(P * v) built from truncated tensor unfoldings.
class ReducedEvaluator {
public:
  explicit ReducedEvaluator(const RomModel& rom) : m_(rom.modes()) {
    fill_.resize(static_cast<size_t>(m_));
    int nv = 0;
    for (Eigen::Index i = 0; i < m_; ++i) {
      const auto& mode = rom.basis.modes[static_cast<size_t>(i)];
      if (mode.kind == ModeKind::real_mode) {
        fill_[static_cast<size_t>(i)] = {nv, -1, 0.0};
        rows_.push_back({static_cast<int>(i), false});
        ++nv;
      } else if (mode.representative) {
        fill_[static_cast<size_t>(i)] = {nv, nv + 1, 1.0};
        fill_[static_cast<size_t>(mode.pair_partner)] = {nv, nv + 1, -1.0};
        rows_.push_back({static_cast<int>(i), false});
        rows_.push_back({static_cast<int>(i), true});
        nv += 2;
      }
    }
    nv_ = nv;

    // Complex weight of each real variable in each mode component of z.
    std::vector<std::vector<std::pair<int, Complex>>> wz(static_cast<size_t>(nv_));
    for (Eigen::Index i = 0; i < m_; ++i) {
      const Slot& f = fill_[static_cast<size_t>(i)];
      wz[static_cast<size_t>(f.re)].emplace_back(static_cast<int>(i), Complex(1, 0));
      if (f.im >= 0)
        wz[static_cast<size_t>(f.im)].emplace_back(static_cast<int>(i), Complex(0, f.sign));
    }

    deg2_ = rom.order >= 2 && rom.D.dim() == m_;
    deg3_ = rom.order >= 3 && rom.E.dim() == m_;
    deg_ = deg3_ ? (deg2_ ? 3 : 0) : (deg2_ ? 2 : 1); // 0 routes to the generic path
    const int n2 = deg2_ ? nv_ * (nv_ + 1) / 2 : 0;
    const int n3 = deg3_ ? nv_ * (nv_ + 1) * (nv_ + 2) / 6 : 0;
    cols_ = nv_ + n2 + n3;

    bg_.assign(static_cast<size_t>(nv_), 0.0);
    const auto part = [](Complex v, bool imag_part) { return imag_part ? v.imag() : v.real(); };
    for (int row = 0; row < nv_; ++row) {
      const int k = rows_[static_cast<size_t>(row)].mode;
      const bool im = rows_[static_cast<size_t>(row)].imag_part;
      if (rom.Bg_reduced.size() > 0)
        bg_[static_cast<size_t>(row)] = part(rom.Bg_reduced(k, 0), im);
    }

    if (deg2_ || deg3_)
      build_factored_plan(rom, wz);
    if (factored_) {
      deg_ = 1; // the dense monomial table holds only the linear term
      cols_ = nv_;
    }

    Eigen::MatrixXd coeff = Eigen::MatrixXd::Zero(nv_, cols_);
    u_.resize(static_cast<size_t>(cols_));
    for (int row = 0; row < nv_; ++row) {
      const int k = rows_[static_cast<size_t>(row)].mode;
      const bool im = rows_[static_cast<size_t>(row)].imag_part;
      const Complex lambda = rom.basis.lambdas[k];
      const Slot& f = fill_[static_cast<size_t>(k)];
      coeff(row, f.re) += part(lambda, im);
      if (f.im >= 0)
        coeff(row, f.im) += part(lambda * Complex(0, 1), im);
      if (factored_)
        continue;

      int col = nv_;
      if (deg2_)
        for (int a = 0; a < nv_; ++a)
          for (int b = a; b < nv_; ++b, ++col) {
            Complex s(0, 0);
            for (const auto& [i, wa] : wz[static_cast<size_t>(a)])
              for (const auto& [j, wb] : wz[static_cast<size_t>(b)])
                s += rom.D(k, i, j) * wa * wb;
            coeff(row, col) = (a == b ? 1.0 : 2.0) * part(s, im);
          }
      if (deg3_)
        for (int a = 0; a < nv_; ++a)
          for (int b = a; b < nv_; ++b)
            for (int c = b; c < nv_; ++c, ++col) {
              Complex s(0, 0);
              for (const auto& [i, wa] : wz[static_cast<size_t>(a)])
                for (const auto& [j, wb] : wz[static_cast<size_t>(b)])
                  for (const auto& [l, wc] : wz[static_cast<size_t>(c)])
                    s += rom.E(k, i, j, l) * wa * wb * wc;
              double mult = 6.0; // distinct indices
              if (a == b && b == c)
                mult = 1.0;
              else if (a == b || b == c)
                mult = 3.0;
              coeff(row, col) = mult * part(s, im);
            }
    }

    // Transposed flat layout: all row coefficients of one monomial adjacent,
    // so the contraction streams u once with per-row register accumulators.
    flat_.resize(static_cast<size_t>(nv_ * cols_));
    for (int j = 0; j < cols_; ++j)
      for (int r = 0; r < nv_; ++r)
        flat_[static_cast<size_t>(j * nv_ + r)] = coeff(r, j);
  }

  int variable_count() const { return nv_; }

  // Real coordinates of a conjugate-consistent z; partner entries unread.
  Eigen::VectorXd pack(const Eigen::VectorXcd& z) const {
    Eigen::VectorXd v(nv_);
    for (Eigen::Index i = 0; i < m_; ++i) {
      const Slot& f = fill_[static_cast<size_t>(i)];
      if (f.im < 0)
        v[f.re] = z[i].real();
      else if (f.sign > 0) {
        v[f.re] = z[i].real();
        v[f.im] = z[i].imag();
      }
    }
    return v;
  }

  void fill_full(const double* v, Eigen::VectorXcd& z_full) const {
    for (Eigen::Index i = 0; i < m_; ++i) {
      const Slot& f = fill_[static_cast<size_t>(i)];
      z_full[i] = Complex(v[f.re], f.im >= 0 ? f.sign * v[f.im] : 0.0);
    }
  }

  // One RK4 step of v in place, with the forcing at the step start, the two
  // midpoint stages and the step end.
  void advance(double* v, double h, double g0, double gm, double g1) const {
    if (factored_) {
      rk4(v, h, g0, gm, g1,
          [this](const double* x, double g, double* out) { run_factored(x, g, out); });
      return;
    }
    switch (nv_ * 4 + deg_) {
    case 1 * 4 + 1: step<1, 1>(v, h, g0, gm, g1); break;
    case 1 * 4 + 2: step<1, 2>(v, h, g0, gm, g1); break;
    case 1 * 4 + 3: step<1, 3>(v, h, g0, gm, g1); break;
    case 2 * 4 + 1: step<2, 1>(v, h, g0, gm, g1); break;
    case 2 * 4 + 2: step<2, 2>(v, h, g0, gm, g1); break;
    case 2 * 4 + 3: step<2, 3>(v, h, g0, gm, g1); break;
    case 3 * 4 + 1: step<3, 1>(v, h, g0, gm, g1); break;
    case 3 * 4 + 2: step<3, 2>(v, h, g0, gm, g1); break;
    case 3 * 4 + 3: step<3, 3>(v, h, g0, gm, g1); break;
    case 4 * 4 + 1: step<4, 1>(v, h, g0, gm, g1); break;
    case 4 * 4 + 2: step<4, 2>(v, h, g0, gm, g1); break;
    case 4 * 4 + 3: step<4, 3>(v, h, g0, gm, g1); break;
    case 5 * 4 + 1: step<5, 1>(v, h, g0, gm, g1); break;
    case 5 * 4 + 2: step<5, 2>(v, h, g0, gm, g1); break;
    case 5 * 4 + 3: step<5, 3>(v, h, g0, gm, g1); break;
    case 6 * 4 + 1: step<6, 1>(v, h, g0, gm, g1); break;
    case 6 * 4 + 2: step<6, 2>(v, h, g0, gm, g1); break;
    case 6 * 4 + 3: step<6, 3>(v, h, g0, gm, g1); break;
    case 7 * 4 + 1: step<7, 1>(v, h, g0, gm, g1); break;
    case 7 * 4 + 2: step<7, 2>(v, h, g0, gm, g1); break;
    case 7 * 4 + 3: step<7, 3>(v, h, g0, gm, g1); break;
    case 8 * 4 + 1: step<8, 1>(v, h, g0, gm, g1); break;
    case 8 * 4 + 2: step<8, 2>(v, h, g0, gm, g1); break;
    case 8 * 4 + 3: step<8, 3>(v, h, g0, gm, g1); break;
    default: step_any(v, h, g0, gm, g1); break;
    }
  }

private:
  template <int NV, int DEG>
  void step(double* v, double h, double g0, double gm, double g1) const {
    double k1[NV], k2[NV], k3[NV], k4[NV], tmp[NV];
    run<NV, DEG>(v, g0, k1);
    for (int r = 0; r < NV; ++r)
      tmp[r] = v[r] + 0.5 * h * k1[r];
    run<NV, DEG>(tmp, gm, k2);
    for (int r = 0; r < NV; ++r)
      tmp[r] = v[r] + 0.5 * h * k2[r];
    run<NV, DEG>(tmp, gm, k3);
    for (int r = 0; r < NV; ++r)
      tmp[r] = v[r] + h * k3[r];
    run<NV, DEG>(tmp, g1, k4);
    for (int r = 0; r < NV; ++r)
      v[r] += (h / 6.0) * (k1[r] + 2.0 * k2[r] + 2.0 * k3[r] + k4[r]);
  }

  template <class Rhs>
  void rk4(double* v, double h, double g0, double gm, double g1, const Rhs& rhs) const {
    const size_t n = static_cast<size_t>(nv_);
    scratch_.resize(5 * n);
    double* k1 = scratch_.data();
    double* k2 = k1 + n;
    double* k3 = k2 + n;
    double* k4 = k3 + n;
    double* tmp = k4 + n;
    rhs(v, g0, k1);
    for (int r = 0; r < nv_; ++r)
      tmp[r] = v[r] + 0.5 * h * k1[r];
    rhs(tmp, gm, k2);
    for (int r = 0; r < nv_; ++r)
      tmp[r] = v[r] + 0.5 * h * k2[r];
    rhs(tmp, gm, k3);
    for (int r = 0; r < nv_; ++r)
      tmp[r] = v[r] + h * k3[r];
    rhs(tmp, g1, k4);
    for (int r = 0; r < nv_; ++r)
      v[r] += (h / 6.0) * (k1[r] + 2.0 * k2[r] + 2.0 * k3[r] + k4[r]);
  }

  void step_any(double* v, double h, double g0, double gm, double g1) const {
    rk4(v, h, g0, gm, g1,
        [this](const double* x, double g, double* out) { run_any(x, g, out); });
  }

  // All loop bounds are compile-time constants (the contraction length is
  // the monomial count), and the dot products run on four independent
  // accumulator chains so consecutive fused multiply-adds pipeline.
  template <int NV, int DEG>
  void run(const double* __restrict v, double gust, double* __restrict out) const {
    constexpr int kU = NV + (DEG >= 2 ? NV * (NV + 1) / 2 : 0) +
                       (DEG >= 3 ? NV * (NV + 1) * (NV + 2) / 6 : 0);
    double u[kU];
    for (int a = 0; a < NV; ++a)
      u[a] = v[a];
    int idx = NV;
    if constexpr (DEG >= 2)
      for (int a = 0; a < NV; ++a)
        for (int b = a; b < NV; ++b, ++idx)
          u[idx] = v[a] * v[b];
    if constexpr (DEG >= 3)
      for (int a = 0; a < NV; ++a)
        for (int b = a; b < NV; ++b) {
          const double vab = v[a] * v[b];
          for (int c = b; c < NV; ++c, ++idx)
            u[idx] = vab * v[c];
        }
    const double* __restrict bg = bg_.data();
    const double* __restrict c = flat_.data();
    double acc0[NV], acc1[NV] = {}, acc2[NV] = {}, acc3[NV] = {};
    for (int r = 0; r < NV; ++r)
      acc0[r] = bg[r] * gust;
    constexpr int kMain = kU & ~3;
    for (int j = 0; j < kMain; j += 4) {
      for (int r = 0; r < NV; ++r)
        acc0[r] += c[(j + 0) * NV + r] * u[j + 0];
      for (int r = 0; r < NV; ++r)
        acc1[r] += c[(j + 1) * NV + r] * u[j + 1];
      for (int r = 0; r < NV; ++r)
        acc2[r] += c[(j + 2) * NV + r] * u[j + 2];
      for (int r = 0; r < NV; ++r)
        acc3[r] += c[(j + 3) * NV + r] * u[j + 3];
    }
    for (int j = kMain; j < kU; ++j)
      for (int r = 0; r < NV; ++r)
        acc0[r] += c[j * NV + r] * u[j];
    for (int r = 0; r < NV; ++r)
      out[r] = (acc0[r] + acc1[r]) + (acc2[r] + acc3[r]);
  }

  void run_any(const double* v, double gust, double* out) const {
    double* u = u_.data();
    for (int a = 0; a < nv_; ++a)
      u[a] = v[a];
    int idx = nv_;
    if (deg2_)
      for (int a = 0; a < nv_; ++a)
        for (int b = a; b < nv_; ++b, ++idx)
          u[idx] = v[a] * v[b];
    if (deg3_)
      for (int a = 0; a < nv_; ++a)
        for (int b = a; b < nv_; ++b) {
          const double vab = v[a] * v[b];
          for (int c = b; c < nv_; ++c, ++idx)
            u[idx] = vab * v[c];
        }
    for (int r = 0; r < nv_; ++r)
      out[r] = bg_[static_cast<size_t>(r)] * gust;
    const double* c = flat_.data();
    for (int j = 0; j < cols_; ++j, c += nv_) {
      const double uj = u[j];
      for (int r = 0; r < nv_; ++r)
        out[r] += c[r] * uj;
    }
  }

  // Factored plan: forcing plus the block-diagonal linear map, then each
  // polynomial unit as out += W * core(P * v) with packed monomials of the
  // projected inputs. Layouts are state-major so every pass streams its
  // matrix once with a handful of register accumulators.
  void run_factored(const double* __restrict v, double gust, double* __restrict out) const {
    const double* __restrict la = lin_a_.data();
    const double* __restrict lb = lin_b_.data();
    const int* __restrict pr = lin_partner_.data();
    const double* __restrict bg = bg_.data();
    for (int r = 0; r < nv_; ++r)
      out[r] = bg[r] * gust + la[r] * v[r] + lb[r] * v[pr[r]];
    for (const PolyUnit& unit : units_) {
      double* __restrict y = y_.data();
      double* __restrict mono = mono_.data();
      double* __restrict g = g_.data();
      for (int a = 0; a < unit.p; ++a)
        y[a] = 0.0;
      const double* pt = unit.P.data();
      for (int i = 0; i < nv_; ++i, pt += unit.p) {
        const double vi = v[i];
        for (int a = 0; a < unit.p; ++a)
          y[a] += pt[a] * vi;
      }
      int idx = 0;
      if (unit.deg == 2) {
        for (int a = 0; a < unit.p; ++a)
          for (int b = a; b < unit.p; ++b, ++idx)
            mono[idx] = y[a] * y[b];
      } else {
        for (int a = 0; a < unit.p; ++a)
          for (int b = a; b < unit.p; ++b) {
            const double yab = y[a] * y[b];
            for (int e = b; e < unit.p; ++e, ++idx)
              mono[idx] = yab * y[e];
          }
      }
      for (int t = 0; t < unit.q; ++t)
        g[t] = 0.0;
      const double* cc = unit.C.data();
      for (int j = 0; j < unit.monos; ++j, cc += unit.q) {
        const double mj = mono[j];
        for (int t = 0; t < unit.q; ++t)
          g[t] += cc[t] * mj;
      }
      const double* wt = unit.W.data();
      for (int t = 0; t < unit.q; ++t, wt += nv_) {
        const double gt = g[t];
        for (int r = 0; r < nv_; ++r)
          out[r] += wt[r] * gt;
      }
    }
  }

  // Builds the factored plan from truncated unfoldings of the coefficient
  // tensors and keeps it only if its per-derivative contraction count beats
  // the dense monomial table. Deterministic: fixed tolerances, thin SVD.
  void build_factored_plan(const RomModel& rom,
                           const std::vector<std::vector<std::pair<int, Complex>>>& wz) {
    if (nv_ <= 8)
      return; // the compile-time kernels beat dynamic loops at these sizes
    struct Candidate {
      int deg;
      const std::vector<Complex>* data;
      UnfoldFactor in, out;
      int r_in = 0, r_out = 0;
    };
    std::vector<Candidate> cands;
    if (deg2_)
      cands.push_back({2, &rom.D.data(), unfold_factor(rom.D.data(), m_, 2, 1),
                       unfold_factor(rom.D.data(), m_, 2, 0)});
    if (deg3_)
      cands.push_back({3, &rom.E.data(), unfold_factor(rom.E.data(), m_, 3, 1),
                       unfold_factor(rom.E.data(), m_, 3, 0)});

    // One scale for the absolute floor so a tensor that is pure noise next to
    // the linear dynamics or the other tensor truncates to rank zero.
    double scale = 0.0;
    for (Eigen::Index k = 0; k < m_; ++k)
      scale = std::max(scale, std::abs(rom.basis.lambdas[k]));
    if (rom.Bg_reduced.size() > 0)
      scale = std::max(scale, rom.Bg_reduced.cwiseAbs().maxCoeff());
    for (const Candidate& c : cands) {
      if (c.in.svals.size() > 0)
        scale = std::max(scale, c.in.svals[0]);
      if (c.out.svals.size() > 0)
        scale = std::max(scale, c.out.svals[0]);
    }

    long long factored_cost = static_cast<long long>(nv_) * nv_;
    for (Candidate& c : cands) {
      const double smax = std::max(c.in.svals.size() > 0 ? c.in.svals[0] : 0.0,
                                   c.out.svals.size() > 0 ? c.out.svals[0] : 0.0);
      const double tol = std::max(kFactorRelTol * smax, kFactorAbsTol * scale);
      c.r_in = c.in.rank_above(tol);
      c.r_out = c.out.rank_above(tol);
      if (c.r_in == 0 || c.r_out == 0)
        continue; // negligible tensor: contributes no unit at all
      const int p = 2 * c.r_in;
      const int q = 2 * c.r_out;
      const int monos = c.deg == 2 ? p * (p + 1) / 2 : p * (p + 1) * (p + 2) / 6;
      factored_cost += static_cast<long long>(p) * nv_ + static_cast<long long>(q) * monos +
                       static_cast<long long>(nv_) * q;
    }
    // Twofold margin: the factored units run dynamic-bound loops while the
    // dense table streams one contiguous contraction per derivative.
    if (2 * factored_cost >= static_cast<long long>(nv_) * cols_)
      return;

    const auto part = [](Complex v, bool imag_part) { return imag_part ? v.imag() : v.real(); };
    const auto uf = [](int alpha) { return alpha % 2 ? Complex(0, 1) : Complex(1, 0); };
    for (const Candidate& c : cands) {
      if (c.r_in == 0 || c.r_out == 0)
        continue;
      const int r = c.r_in;
      const Eigen::MatrixXcd Uin = c.in.U.leftCols(r);
      const Eigen::MatrixXcd Uout = c.out.U.leftCols(c.r_out);

      // Complex core: the tensor with every input contracted against Uin and
      // the output against conj(Uout), then symmetrized over input slots.
      const int block = c.deg == 2 ? r * r : r * r * r;
      std::vector<Complex> core(static_cast<size_t>(c.r_out) * block, Complex(0, 0));
      if (c.deg == 2) {
        Eigen::MatrixXcd slice(m_, m_);
        for (Eigen::Index k = 0; k < m_; ++k) {
          for (Eigen::Index i = 0; i < m_; ++i)
            for (Eigen::Index j = 0; j < m_; ++j)
              slice(i, j) = (*c.data)[static_cast<size_t>((k * m_ + i) * m_ + j)];
          const Eigen::MatrixXcd hat = Uin.transpose() * slice * Uin;
          for (int q = 0; q < c.r_out; ++q) {
            const Complex wk = std::conj(Uout(k, q));
            for (int a = 0; a < r; ++a)
              for (int b = 0; b < r; ++b)
                core[static_cast<size_t>(q * block + a * r + b)] += wk * hat(a, b);
          }
        }
        for (int q = 0; q < c.r_out; ++q)
          for (int a = 0; a < r; ++a)
            for (int b = a + 1; b < r; ++b) {
              Complex& ab = core[static_cast<size_t>(q * block + a * r + b)];
              Complex& ba = core[static_cast<size_t>(q * block + b * r + a)];
              const Complex s = 0.5 * (ab + ba);
              ab = s;
              ba = s;
            }
      } else {
        std::vector<Complex> t1(static_cast<size_t>(m_ * m_) * r);
        std::vector<Complex> t2(static_cast<size_t>(m_) * r * r);
        std::vector<Complex> t3(static_cast<size_t>(block));
        for (Eigen::Index k = 0; k < m_; ++k) {
          const Complex* base = c.data->data() + static_cast<size_t>(k * m_ * m_ * m_);
          std::fill(t1.begin(), t1.end(), Complex(0, 0));
          for (Eigen::Index ij = 0; ij < m_ * m_; ++ij) {
            const Complex* row = base + ij * m_;
            Complex* dst = t1.data() + ij * r;
            for (Eigen::Index l = 0; l < m_; ++l) {
              const Complex e = row[l];
              for (int cc = 0; cc < r; ++cc)
                dst[cc] += e * Uin(l, cc);
            }
          }
          std::fill(t2.begin(), t2.end(), Complex(0, 0));
          for (Eigen::Index i = 0; i < m_; ++i)
            for (Eigen::Index j = 0; j < m_; ++j) {
              const Complex* src = t1.data() + (i * m_ + j) * r;
              for (int b = 0; b < r; ++b) {
                const Complex w = Uin(j, b);
                Complex* dst = t2.data() + (i * r + b) * r;
                for (int cc = 0; cc < r; ++cc)
                  dst[cc] += w * src[cc];
              }
            }
          std::fill(t3.begin(), t3.end(), Complex(0, 0));
          for (Eigen::Index i = 0; i < m_; ++i)
            for (int a = 0; a < r; ++a) {
              const Complex w = Uin(i, a);
              for (int b = 0; b < r; ++b) {
                const Complex* src = t2.data() + (i * r + b) * r;
                Complex* dst = t3.data() + (a * r + b) * r;
                for (int cc = 0; cc < r; ++cc)
                  dst[cc] += w * src[cc];
              }
            }
          for (int q = 0; q < c.r_out; ++q) {
            const Complex wk = std::conj(Uout(k, q));
            Complex* dst = core.data() + static_cast<size_t>(q) * block;
            for (int abc = 0; abc < block; ++abc)
              dst[abc] += wk * t3[static_cast<size_t>(abc)];
          }
        }
        for (int q = 0; q < c.r_out; ++q) {
          Complex* cq = core.data() + static_cast<size_t>(q) * block;
          for (int a = 0; a < r; ++a)
            for (int b = a; b < r; ++b)
              for (int e = b; e < r; ++e) {
                const int idx[6] = {(a * r + b) * r + e, (a * r + e) * r + b,
                                    (b * r + a) * r + e, (b * r + e) * r + a,
                                    (e * r + a) * r + b, (e * r + b) * r + a};
                Complex s(0, 0);
                for (int t = 0; t < 6; ++t)
                  s += cq[idx[t]];
                s /= 6.0;
                for (int t = 0; t < 6; ++t)
                  cq[idx[t]] = s;
              }
        }
      }

      // Real form: each kept complex direction becomes a (Re, Im) variable
      // pair; monomial coefficients fold in the i factors of the Im slots and
      // the packed-multiplicity of the symmetric sum.
      PolyUnit unit;
      unit.deg = c.deg;
      unit.p = 2 * r;
      unit.q = 2 * c.r_out;
      unit.monos =
          c.deg == 2 ? unit.p * (unit.p + 1) / 2 : unit.p * (unit.p + 1) * (unit.p + 2) / 6;
      unit.P.assign(static_cast<size_t>(unit.p) * nv_, 0.0);
      for (int a = 0; a < r; ++a)
        for (int var = 0; var < nv_; ++var) {
          Complex w(0, 0);
          for (const auto& [i, wi] : wz[static_cast<size_t>(var)])
            w += std::conj(Uin(i, a)) * wi;
          unit.P[static_cast<size_t>(var) * unit.p + 2 * a] = w.real();
          unit.P[static_cast<size_t>(var) * unit.p + 2 * a + 1] = w.imag();
        }
      unit.C.assign(static_cast<size_t>(unit.monos) * unit.q, 0.0);
      int idx = 0;
      if (c.deg == 2) {
        for (int al = 0; al < unit.p; ++al)
          for (int be = al; be < unit.p; ++be, ++idx) {
            const Complex f = uf(al) * uf(be) * (al == be ? 1.0 : 2.0);
            const int base = (al / 2) * r + be / 2;
            for (int q = 0; q < c.r_out; ++q) {
              const Complex v = f * core[static_cast<size_t>(q * block + base)];
              unit.C[static_cast<size_t>(idx) * unit.q + 2 * q] = v.real();
              unit.C[static_cast<size_t>(idx) * unit.q + 2 * q + 1] = v.imag();
            }
          }
      } else {
        for (int al = 0; al < unit.p; ++al)
          for (int be = al; be < unit.p; ++be)
            for (int ga = be; ga < unit.p; ++ga, ++idx) {
              double mult = 6.0; // distinct packed indices
              if (al == be && be == ga)
                mult = 1.0;
              else if (al == be || be == ga)
                mult = 3.0;
              const Complex f = uf(al) * uf(be) * uf(ga) * mult;
              const int base = ((al / 2) * r + be / 2) * r + ga / 2;
              for (int q = 0; q < c.r_out; ++q) {
                const Complex v = f * core[static_cast<size_t>(q * block + base)];
                unit.C[static_cast<size_t>(idx) * unit.q + 2 * q] = v.real();
                unit.C[static_cast<size_t>(idx) * unit.q + 2 * q + 1] = v.imag();
              }
            }
      }
      unit.W.assign(static_cast<size_t>(nv_) * unit.q, 0.0);
      for (int row = 0; row < nv_; ++row) {
        const int k = rows_[static_cast<size_t>(row)].mode;
        const bool im = rows_[static_cast<size_t>(row)].imag_part;
        for (int q = 0; q < c.r_out; ++q) {
          const Complex w = Uout(k, q);
          unit.W[static_cast<size_t>(2 * q) * nv_ + row] = part(w, im);
          unit.W[static_cast<size_t>(2 * q + 1) * nv_ + row] = part(w * Complex(0, 1), im);
        }
      }
      units_.push_back(std::move(unit));
    }

    // Block-diagonal linear map in the packed variables: a real mode scales
    // its slot, a conjugate pair acts as the 2x2 rotation-scaling of lambda.
    lin_a_.assign(static_cast<size_t>(nv_), 0.0);
    lin_b_.assign(static_cast<size_t>(nv_), 0.0);
    lin_partner_.assign(static_cast<size_t>(nv_), 0);
    for (int row = 0; row < nv_; ++row) {
      const int k = rows_[static_cast<size_t>(row)].mode;
      const bool im = rows_[static_cast<size_t>(row)].imag_part;
      const Complex lambda = rom.basis.lambdas[k];
      const Slot& f = fill_[static_cast<size_t>(k)];
      lin_a_[static_cast<size_t>(row)] = lambda.real();
      if (f.im < 0) {
        lin_partner_[static_cast<size_t>(row)] = row; // lb stays zero
      } else if (!im) {
        lin_b_[static_cast<size_t>(row)] = -lambda.imag();
        lin_partner_[static_cast<size_t>(row)] = f.im;
      } else {
        lin_b_[static_cast<size_t>(row)] = lambda.imag();
        lin_partner_[static_cast<size_t>(row)] = f.re;
      }
    }

    factored_ = true;
    int pmax = 0, monomax = 0, qmax = 0;
    for (const PolyUnit& u : units_) {
      pmax = std::max(pmax, u.p);
      monomax = std::max(monomax, u.monos);
      qmax = std::max(qmax, u.q);
    }
    y_.resize(static_cast<size_t>(pmax));
    mono_.resize(static_cast<size_t>(monomax));
    g_.resize(static_cast<size_t>(qmax));
  }

  struct Slot {
    int re = -1;
    int im = -1;      // -1 for real modes
    double sign = 0.0; // +1 representative, -1 conjugate partner
  };
  struct Row {
    int mode = 0;
    bool imag_part = false;
  };
  // One factored polynomial term: out += W * core(P * v) where core forms the
  // packed degree-deg monomials of the p projected inputs and C maps them to
  // the q core outputs.
  struct PolyUnit {
    int deg = 2;
    int p = 0;
    int q = 0;
    int monos = 0;
    std::vector<double> P; // nv x p, state major: input projection
    std::vector<double> C; // monos x q, monomial major: core coefficients
    std::vector<double> W; // q x nv, core-output major: output map
  };

  Eigen::Index m_ = 0;
  int nv_ = 0;
  int cols_ = 0;
  int deg_ = 1;
  bool deg2_ = false;
  bool deg3_ = false;
  std::vector<Slot> fill_;
  std::vector<Row> rows_;
  std::vector<double> flat_; // cols x nv, monomial major
  std::vector<double> bg_;
  mutable std::vector<double> u_;
  mutable std::vector<double> scratch_;
  bool factored_ = false;
  std::vector<PolyUnit> units_;
  std::vector<double> lin_a_, lin_b_;
  std::vector<int> lin_partner_;
  mutable std::vector<double> y_, mono_, g_;
};

// The march plan depends only on the model, not the excitation, and building
// it does real work (tensor unfoldings), so it is shared across calls on the
// same model: a sweep then pays per site for the march alone. Expired entries
// are purged under the same lock that inserts, so a recycled address can
// never alias a live entry.
std::shared_ptr<const ReducedEvaluator>
evaluator_for(const std::shared_ptr<const RomModel>& rom) {
  static std::mutex mutex;
  static std::map<std::weak_ptr<const RomModel>, std::shared_ptr<const ReducedEvaluator>,
                  std::owner_less<void>>
      cache;
  std::lock_guard<std::mutex> lock(mutex);
  for (auto it = cache.begin(); it != cache.end();)
    it = it->first.expired() ? cache.erase(it) : std::next(it);
  const auto it = cache.find(rom);
  if (it != cache.end())
    return it->second;
  auto eval = std::make_shared<const ReducedEvaluator>(*rom);
  cache.emplace(rom, eval);
  return eval;
}

std::vector<double> complex_pairs(const Eigen::VectorXcd& z) {
  std::vector<double> flat;
  flat.reserve(static_cast<size_t>(2 * z.size()));
  for (Eigen::Index i = 0; i < z.size(); ++i) {
    flat.push_back(z[i].real());
    flat.push_back(z[i].imag());
  }
  return flat;
}

// Shared metric pass over one sampled scalar channel.
ChannelMetrics metrics_for(const std::string& label, const std::vector<double>& t,
                           const std::vector<double>& x) {
  ChannelMetrics m;
  m.label = label;
  const size_t n = x.size();
  for (size_t i = 0; i < n; ++i) {
    const double a = std::abs(x[i]);
    if (a > m.peak_abs) {
      m.peak_abs = a;
      m.t_peak = t[i];
    }
  }
  m.final_abs = std::abs(x.back());
  const size_t tail = std::max<size_t>(1, n / 10);
  m.settled = true;
  for (size_t i = n - tail; i < n; ++i)
    if (std::abs(x[i]) > 0.05 * m.peak_abs) {
      m.settled = false;
      break;
    }
  return m;
}

Eigen::Index label_row(const std::vector<std::string>& labels, const std::string& channel) {
  for (size_t i = 0; i < labels.size(); ++i)
    if (labels[i] == channel)
      return static_cast<Eigen::Index>(i);
  throw ContractViolation("unknown channel label: " + channel);
}

// Reconstructed physical channel of a reduced trajectory, one value per
// sample: w0[row] + Re(Phi.row(row) * z).
std::vector<double> reduced_channel(const ReducedHistory& history, Eigen::Index row) {
  const Eigen::Index cols = history.z.cols();
  std::vector<double> x(static_cast<size_t>(cols));
  const Eigen::RowVectorXcd phi_row = history.rom->basis.Phi.row(row);
  const double base = history.rom->w0[row];
  for (Eigen::Index s = 0; s < cols; ++s)
    x[static_cast<size_t>(s)] = base + (phi_row * history.z.col(s)).value().real();
  return x;
}

void write_csv_rows(const std::vector<double>& t,
                    const std::vector<std::vector<double>>& columns,
                    const std::vector<std::string>& names, std::ostream& out) {
  out << 't';
  for (const auto& name : names)
    out << ',' << name;
  out << '\n';
  for (size_t i = 0; i < t.size(); ++i) {
    out << format_double(t[i]);
    for (const auto& col : columns)
      out << ',' << format_double(col[i]);
    out << '\n';
  }
}

} // namespace

GustFunction zero_gust() {
  return [](double) { return 0.0; };
}

GustFunction gust_from_spec(const DiscreteGustSpec& spec) {
  spec.validate();
  return [spec](double t) { return one_minus_cosine(spec, t); };
}

GustFunction gust_from_signal(const GustSignal& signal) {
  return [sig = &signal](double t) { return sig->value_at(t); };
}

void SimOptions::validate() const {
  if (!std::isfinite(t_begin) || !std::isfinite(t_end) || t_end <= t_begin)
    throw ConfigError("sim: need finite t_begin < t_end");
  if (!(step > 0.0) || !std::isfinite(step))
    throw ConfigError("sim: step must be positive and finite");
  if ((t_end - t_begin) / step > 5e8)
    throw ConfigError("sim: more than 5e8 steps requested");
}

TimeHistory integrate_fom(const NonlinearModel& model, const Eigen::VectorXd& w_init,
                          const GustFunction& gust, const Eigen::VectorXd& u_c,
                          const SimOptions& options) {
  options.validate();
  if (!gust)
    throw ContractViolation("integrate_fom: empty gust function");
  const auto& desc = model.descriptor();
  if (w_init.size() != desc.n_states)
    throw ContractViolation("integrate_fom: initial state has wrong dimension");
  if (desc.n_disturbance > 1)
    throw ContractViolation("integrate_fom: only scalar disturbance inputs are supported");
  if (!w_init.allFinite())
    throw ContractViolation("integrate_fom: non-finite initial state");
  const bool has_gust_input = desc.n_disturbance == 1;

  const auto begin = std::chrono::steady_clock::now();
  const Eigen::Index n = desc.n_states;
  const Eigen::Index count = sample_count(options);
  const double h = options.step;

  TimeHistory history;
  history.t.resize(static_cast<size_t>(count));
  history.states.resize(n, count);
  history.labels = desc.state_labels;
  history.meta.model_id = desc.name;
  history.meta.step = h;

  // Forcing is sampled up front at the grid points and stage midpoints; the
  // two interior stages share the midpoint value.
  std::vector<double> g_grid(static_cast<size_t>(count));
  std::vector<double> g_mid(static_cast<size_t>(count > 0 ? count - 1 : 0));
  for (Eigen::Index i = 0; i < count; ++i) {
    const double t = options.t_begin + static_cast<double>(i) * h;
    g_grid[static_cast<size_t>(i)] = gust(t);
    if (i + 1 < count)
      g_mid[static_cast<size_t>(i)] = gust(t + 0.5 * h);
  }
  if (!has_gust_input)
    for (Eigen::Index i = 0; i < count; ++i)
      if (g_grid[static_cast<size_t>(i)] != 0.0 ||
          (i + 1 < count && g_mid[static_cast<size_t>(i)] != 0.0))
        throw ContractViolation("integrate_fom: nonzero gust for a model without disturbances");

  Eigen::VectorXd u_d(has_gust_input ? 1 : 0);
  auto deriv = [&](double g, const Eigen::VectorXd& w) {
    if (has_gust_input)
      u_d[0] = g;
    return model.residual(w, u_d, u_c);
  };

  Eigen::VectorXd w = w_init;
  for (Eigen::Index i = 0; i < count; ++i) {
    const double t = options.t_begin + static_cast<double>(i) * h;
    history.t[static_cast<size_t>(i)] = t;
    if (!w.allFinite())
      throw DivergenceError("integrate_fom: state diverged", t,
                            to_std(history.states.col(i - 1)));
    history.states.col(i) = w;
    if (i + 1 == count)
      break;
    const double g0 = g_grid[static_cast<size_t>(i)];
    const double gm = g_mid[static_cast<size_t>(i)];
    const double g1 = g_grid[static_cast<size_t>(i + 1)];
    const Eigen::VectorXd k1 = deriv(g0, w);
    const Eigen::VectorXd k2 = deriv(gm, w + (0.5 * h) * k1);
    const Eigen::VectorXd k3 = deriv(gm, w + (0.5 * h) * k2);
    const Eigen::VectorXd k4 = deriv(g1, w + h * k3);
    w += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  }

  history.meta.wall_seconds = elapsed_seconds(begin);
  return history;
}

ReducedHistory integrate_rom(std::shared_ptr<const RomModel> rom, const Eigen::VectorXcd& z0,
                             const GustFunction& gust, const SimOptions& options) {
  options.validate();
  if (!rom)
    throw ContractViolation("integrate_rom: null model");
  if (!gust)
    throw ContractViolation("integrate_rom: empty gust function");
  const Eigen::Index m = rom->modes();
  if (z0.size() != m)
    throw ContractViolation("integrate_rom: initial condition has wrong dimension");
  if (!z0.allFinite())
    throw ContractViolation("integrate_rom: non-finite initial condition");
  if (rom->fom.n_disturbance > 1)
    throw ContractViolation("integrate_rom: only scalar disturbance inputs are supported");
  const bool has_gust_input = rom->fom.n_disturbance == 1;

  const auto begin = std::chrono::steady_clock::now();
  const std::shared_ptr<const ReducedEvaluator> plan = evaluator_for(rom);
  const ReducedEvaluator& eval = *plan;

  // The march assumes partner components mirror their representatives and
  // real-mode components stay real; an inconsistent start would silently be
  // projected onto that manifold, so refuse it instead.
  Eigen::VectorXd v = eval.pack(z0);
  {
    Eigen::VectorXcd z_check(m);
    eval.fill_full(v.data(), z_check);
    for (Eigen::Index i = 0; i < m; ++i)
      if (std::abs(z_check[i] - z0[i]) > 1e-12 * (1.0 + std::abs(z0[i])))
        throw ContractViolation("integrate_rom: initial condition is not conjugate consistent");
  }

  const Eigen::Index count = sample_count(options);
  const double h = options.step;

  ReducedHistory history;
  history.t.resize(static_cast<size_t>(count));
  history.z.resize(m, count);
  history.rom = rom;
  history.meta.model_id = rom->fom.name;
  history.meta.step = h;

  // The forcing is sampled up front (grid points and stage midpoints) so the
  // march loop reads plain arrays.
  std::vector<double> g_grid(static_cast<size_t>(count));
  std::vector<double> g_mid(static_cast<size_t>(count > 0 ? count - 1 : 0));
  for (Eigen::Index i = 0; i < count; ++i) {
    const double t = options.t_begin + static_cast<double>(i) * h;
    g_grid[static_cast<size_t>(i)] = gust(t);
    if (i + 1 < count)
      g_mid[static_cast<size_t>(i)] = gust(t + 0.5 * h);
  }
  if (!has_gust_input)
    for (Eigen::Index i = 0; i < count; ++i)
      if (g_grid[static_cast<size_t>(i)] != 0.0 ||
          (i + 1 < count && g_mid[static_cast<size_t>(i)] != 0.0))
        throw ContractViolation("integrate_rom: nonzero gust for a model without disturbances");

  Eigen::VectorXcd z_full(m);
  for (Eigen::Index i = 0; i < count; ++i) {
    const double t = options.t_begin + static_cast<double>(i) * h;
    history.t[static_cast<size_t>(i)] = t;
    if (!v.allFinite())
      throw DivergenceError("integrate_rom: reduced state diverged", t,
                            complex_pairs(history.z.col(i - 1)));
    eval.fill_full(v.data(), z_full);
    history.z.col(i) = z_full;
    if (i + 1 == count)
      break;
    eval.advance(v.data(), h, g_grid[static_cast<size_t>(i)], g_mid[static_cast<size_t>(i)],
                 g_grid[static_cast<size_t>(i + 1)]);
  }

  history.meta.wall_seconds = elapsed_seconds(begin);
  return history;
}

std::vector<ChannelMetrics> extract_metrics(const TimeHistory& history,
                                            const std::vector<std::string>& channels) {
  if (history.t.empty())
    throw ContractViolation("extract_metrics: empty history");
  std::vector<ChannelMetrics> out;
  out.reserve(channels.size());
  for (const auto& channel : channels) {
    const Eigen::Index row = label_row(history.labels, channel);
    const std::vector<double> x(history.states.row(row).begin(), history.states.row(row).end());
    out.push_back(metrics_for(channel, history.t, x));
  }
  return out;
}

std::vector<ChannelMetrics> extract_metrics(const ReducedHistory& history,
                                            const std::vector<std::string>& channels) {
  if (history.t.empty() || !history.rom)
    throw ContractViolation("extract_metrics: empty history");
  std::vector<ChannelMetrics> out;
  out.reserve(channels.size());
  for (const auto& channel : channels) {
    const Eigen::Index row = label_row(history.rom->fom.state_labels, channel);
    out.push_back(metrics_for(channel, history.t, reduced_channel(history, row)));
  }
  return out;
}

void write_history_csv(const TimeHistory& history, const std::vector<std::string>& channels,
                       std::ostream& out) {
  std::vector<std::vector<double>> columns;
  columns.reserve(channels.size());
  for (const auto& channel : channels) {
    const Eigen::Index row = label_row(history.labels, channel);
    columns.emplace_back(history.states.row(row).begin(), history.states.row(row).end());
  }
  write_csv_rows(history.t, columns, channels, out);
}

void write_history_csv(const ReducedHistory& history, const std::vector<std::string>& channels,
                       std::ostream& out) {
  if (!history.rom)
    throw ContractViolation("write_history_csv: history has no model");
  std::vector<std::vector<double>> columns;
  columns.reserve(channels.size());
  for (const auto& channel : channels)
    columns.push_back(
        reduced_channel(history, label_row(history.rom->fom.state_labels, channel)));
  write_csv_rows(history.t, columns, channels, out);
}

std::pair<double, double> step_convergence_errors(const NonlinearModel& model,
                                                  const Eigen::VectorXd& w_init,
                                                  const GustFunction& gust,
                                                  const Eigen::VectorXd& u_c,
                                                  const SimOptions& options) {
  SimOptions half = options;
  half.step = options.step / 2.0;
  SimOptions quarter = options;
  quarter.step = options.step / 4.0;

  const TimeHistory coarse = integrate_fom(model, w_init, gust, u_c, options);
  const TimeHistory mid = integrate_fom(model, w_init, gust, u_c, half);
  const TimeHistory fine = integrate_fom(model, w_init, gust, u_c, quarter);

  const Eigen::Index count = static_cast<Eigen::Index>(coarse.t.size());
  double acc1 = 0.0;
  double acc2 = 0.0;
  for (Eigen::Index i = 0; i < count; ++i) {
    acc1 += (coarse.states.col(i) - mid.states.col(2 * i)).squaredNorm();
    acc2 += (mid.states.col(2 * i) - fine.states.col(4 * i)).squaredNorm();
  }
  const double scale = 1.0 / static_cast<double>(count);
  return {std::sqrt(acc1 * scale), std::sqrt(acc2 * scale)};
}

} // namespace gustrom
