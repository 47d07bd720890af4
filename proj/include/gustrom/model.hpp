// Copyright (c) the gustrom project contributors.
// SPDX-License-Identifier: Apache-2.0

#ifndef GUSTROM_MODEL_HPP
#define GUSTROM_MODEL_HPP

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "gustrom/errors.hpp"

namespace gustrom {

// Static description of a first-order state-space model
//   dw/dt = R(w, u_d, u_c)
// with disturbance inputs u_d (gust) and control inputs u_c (held fixed).
struct ModelDescriptor {
  std::string name;
  Eigen::Index n_states = 0;
  Eigen::Index n_disturbance = 0;
  Eigen::Index n_control = 0;
  std::vector<std::string> state_labels; // one per state, unique

  void validate() const;
  // Index of a labelled state; throws ContractViolation for unknown labels.
  Eigen::Index state_index(const std::string& label) const;
};

// Residual interface. Implementations are pure functions of their arguments:
// no internal state, no RNG, safe to call concurrently.
class NonlinearModel {
public:
  virtual ~NonlinearModel() = default;

  const ModelDescriptor& descriptor() const noexcept { return desc_; }

  // Evaluates R(w, u_d, u_c). Checks argument dimensions and that every
  // output component is finite; the offending index is reported otherwise.
  Eigen::VectorXd residual(const Eigen::VectorXd& w, const Eigen::VectorXd& u_d,
                           const Eigen::VectorXd& u_c) const;

protected:
  explicit NonlinearModel(ModelDescriptor desc);
  virtual void eval(const Eigen::VectorXd& w, const Eigen::VectorXd& u_d,
                    const Eigen::VectorXd& u_c, Eigen::VectorXd& out) const = 0;

private:
  ModelDescriptor desc_;
};

// Central-difference Jacobian dR/dw at (w0, u_d0, u_c0). The step for
// component j is fd_step * (1 + |w0_j|).
Eigen::MatrixXd fd_state_jacobian(const NonlinearModel& model, const Eigen::VectorXd& w0,
                                  const Eigen::VectorXd& u_d0, const Eigen::VectorXd& u_c0,
                                  double fd_step = 1e-6);

struct TrimOptions {
  double tolerance = 1e-10; // infinity norm of the residual
  int max_iterations = 50;
  int max_step_halvings = 10;
  double fd_step = 1e-6;
};

struct Equilibrium {
  Eigen::VectorXd w0;
  double residual_norm = 0.0; // infinity norm at w0
  bool converged = false;
  int iterations = 0;
  std::vector<double> residual_history; // starts with the norm at the guess
};

// Damped Newton solve of R(w, 0, u_c) = 0 from `guess`. A singular Jacobian
// or a step that fails to reduce the residual after the configured number of
// halvings raises SolverError naming the iteration. Running out of
// iterations returns converged = false.
Equilibrium find_equilibrium(const NonlinearModel& model, const Eigen::VectorXd& guess,
                             const Eigen::VectorXd& u_c, const TrimOptions& options = {});

} // namespace gustrom

#endif // GUSTROM_MODEL_HPP
