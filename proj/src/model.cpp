// Copyright (c) the gustrom project contributors.
// SPDX-License-Identifier: Apache-2.0

#include "gustrom/model.hpp"

#include <cmath>
#include <sstream>

namespace gustrom {

void ModelDescriptor::validate() const {
  if (name.empty())
    throw ContractViolation("model descriptor: name must not be empty");
  if (n_states < 1)
    throw ContractViolation("model descriptor: n_states must be >= 1");
  if (n_disturbance < 0 || n_control < 0)
    throw ContractViolation("model descriptor: negative input count");
  if (state_labels.size() != static_cast<size_t>(n_states))
    throw ContractViolation("model descriptor: state_labels must have one entry per state");
  for (size_t i = 0; i < state_labels.size(); ++i)
    for (size_t j = i + 1; j < state_labels.size(); ++j)
      if (state_labels[i] == state_labels[j])
        throw ContractViolation("model descriptor: duplicate state label '" + state_labels[i] + "'");
}

Eigen::Index ModelDescriptor::state_index(const std::string& label) const {
  for (size_t i = 0; i < state_labels.size(); ++i)
    if (state_labels[i] == label)
      return static_cast<Eigen::Index>(i);
  throw ContractViolation("model '" + name + "': unknown state label '" + label + "'");
}

NonlinearModel::NonlinearModel(ModelDescriptor desc) : desc_(std::move(desc)) {
  desc_.validate();
}

Eigen::VectorXd NonlinearModel::residual(const Eigen::VectorXd& w, const Eigen::VectorXd& u_d,
                                         const Eigen::VectorXd& u_c) const {
  if (w.size() != desc_.n_states)
    throw ContractViolation("model '" + desc_.name + "': state vector has size " +
                            std::to_string(w.size()) + ", expected " +
                            std::to_string(desc_.n_states));
  if (u_d.size() != desc_.n_disturbance)
    throw ContractViolation("model '" + desc_.name + "': disturbance vector has size " +
                            std::to_string(u_d.size()) + ", expected " +
                            std::to_string(desc_.n_disturbance));
  if (u_c.size() != desc_.n_control)
    throw ContractViolation("model '" + desc_.name + "': control vector has size " +
                            std::to_string(u_c.size()) + ", expected " +
                            std::to_string(desc_.n_control));

  Eigen::VectorXd out(desc_.n_states);
  eval(w, u_d, u_c, out);
  for (Eigen::Index i = 0; i < out.size(); ++i) {
    if (!std::isfinite(out[i]))
      throw NumericalFailure("model '" + desc_.name + "': residual component " +
                                 std::to_string(i) + " is not finite",
                             static_cast<long>(i));
  }
  return out;
}

Eigen::MatrixXd fd_state_jacobian(const NonlinearModel& model, const Eigen::VectorXd& w0,
                                  const Eigen::VectorXd& u_d0, const Eigen::VectorXd& u_c0,
                                  double fd_step) {
  if (fd_step <= 0.0)
    throw ContractViolation("fd_state_jacobian: fd_step must be positive");
  const Eigen::Index n = model.descriptor().n_states;
  if (w0.size() != n)
    throw ContractViolation("fd_state_jacobian: base point size mismatch");

  Eigen::MatrixXd jac(n, n);
  Eigen::VectorXd probe = w0;
  for (Eigen::Index j = 0; j < n; ++j) {
    const double h = fd_step * (1.0 + std::abs(w0[j]));
    probe[j] = w0[j] + h;
    const Eigen::VectorXd plus = model.residual(probe, u_d0, u_c0);
    probe[j] = w0[j] - h;
    const Eigen::VectorXd minus = model.residual(probe, u_d0, u_c0);
    probe[j] = w0[j];
    jac.col(j) = (plus - minus) / (2.0 * h);
  }
  return jac;
}

Equilibrium find_equilibrium(const NonlinearModel& model, const Eigen::VectorXd& guess,
                             const Eigen::VectorXd& u_c, const TrimOptions& options) {
  const Eigen::Index n = model.descriptor().n_states;
  if (guess.size() != n)
    throw ContractViolation("find_equilibrium: guess size mismatch");
  const Eigen::VectorXd u_d = Eigen::VectorXd::Zero(model.descriptor().n_disturbance);

  Equilibrium eq;
  eq.w0 = guess;
  Eigen::VectorXd r = model.residual(eq.w0, u_d, u_c);
  double rnorm = r.lpNorm<Eigen::Infinity>();
  eq.residual_history.push_back(rnorm);

  while (rnorm > options.tolerance && eq.iterations < options.max_iterations) {
    const Eigen::MatrixXd jac = fd_state_jacobian(model, eq.w0, u_d, u_c, options.fd_step);
    Eigen::FullPivLU<Eigen::MatrixXd> lu(jac);
    if (!lu.isInvertible())
      throw SolverError("find_equilibrium: singular Jacobian at iteration " +
                        std::to_string(eq.iterations));
    const Eigen::VectorXd dw = lu.solve(-r);

    // Halve the Newton step until the residual norm decreases.
    double scale = 1.0;
    bool accepted = false;
    for (int k = 0; k <= options.max_step_halvings; ++k) {
      const Eigen::VectorXd trial = eq.w0 + scale * dw;
      const Eigen::VectorXd r_trial = model.residual(trial, u_d, u_c);
      const double trial_norm = r_trial.lpNorm<Eigen::Infinity>();
      if (trial_norm < rnorm || trial_norm <= options.tolerance) {
        eq.w0 = trial;
        r = r_trial;
        rnorm = trial_norm;
        accepted = true;
        break;
      }
      scale *= 0.5;
    }
    ++eq.iterations;
    if (!accepted)
      throw SolverError("find_equilibrium: residual failed to decrease after " +
                        std::to_string(options.max_step_halvings) + " halvings at iteration " +
                        std::to_string(eq.iterations));
    eq.residual_history.push_back(rnorm);
  }

  eq.residual_norm = rnorm;
  eq.converged = rnorm <= options.tolerance;
  return eq;
}

} // namespace gustrom
