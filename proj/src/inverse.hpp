#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "forward.hpp"
#include "mesh.hpp"

namespace eit {

// rows: measurements in protocol order; columns: elements
using JacobianMatrix = Eigen::MatrixXd;

// J[s,e] = d(measurement s)/d(conductivity e) by the adjoint method: one
// factorization, drive fields + one field per distinct measurement pair, and
// J[s,e] = -area_e * (grad w_s . grad u_d) on each element.
JacobianMatrix compute_jacobian(const Mesh& mesh, const ConductivityField& sigma,
                                const std::vector<double>& contact_impedances,
                                const Protocol& protocol);

// Solves Jt J d = Jt (v - F(sigma)); `residual` is r = F(sigma) - v.
// Throws numeric_error when the normal equations are numerically singular.
Eigen::VectorXd gn_direction(const JacobianMatrix& J, const Eigen::VectorXd& residual);

// Solves (Jt J + lambda diag(Jt J)) d = Jt (v - F(sigma)); lambda >= 0.
// Throws numeric_error if a diagonal entry is exactly zero (lambda cannot
// regularize it) or the damped system remains singular.
Eigen::VectorXd lm_direction(const JacobianMatrix& J, const Eigen::VectorXd& residual,
                             double lambda);

struct InverseConfig {
  double lambda = 0.01;
  int max_iters = 20;
  double misfit_tol = 1e-10;
  ConductivityField initial_sigma;  // empty: homogeneous 1.0
  double positivity_floor = 1e-6;
};

struct ReconstructionResult {
  ConductivityField sigma;
  std::vector<double> trace;  // relative misfit per iteration; entry 0 is initial
  bool converged = false;     // misfit_tol reached
  bool aborted = false;       // numeric failure mid-iteration; partial results kept
  std::string abort_message;
};

// Damped Gauss-Newton iteration sigma_{k+1} = clamp(sigma_k + d_k) with misfit
// trace; a step that increases the misfit is halved (up to 30 times) before
// being accepted, keeping the noiseless trace non-increasing.
ReconstructionResult reconstruct(const MeasurementVector& v, const Mesh& mesh,
                                 const std::vector<double>& contact_impedances,
                                 const Protocol& protocol, const InverseConfig& config);

// "iteration,misfit" header then one row per trace entry. Per-element fields
// reuse the one-value-per-line measurement CSV helpers (same representation).
void save_trace_csv(const std::vector<double>& trace, const std::string& path);

}  // namespace eit
