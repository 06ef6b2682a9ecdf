#pragma once

#include <limits>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "momentopf/conic.hpp"

namespace mopf {

struct ConfigurationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class SolveStatus { optimal, near_optimal, infeasible, unbounded, numerical_failure };
std::string to_string(SolveStatus s);

struct SolverSettings {
  std::string backend = "clarabel";  // or "scs"
  double eps = 1e-8;
  bool retry_ladder = true;  // relax 1e-8 -> 1e-7 -> 1e-6 on numerical failure
  // Escalated moment programs force the moment matrix onto a face of the PSD
  // cone (the localized equalities imply M f = 0), so there is no strictly
  // feasible point and interior-point steps can collapse.  When the primary
  // backend exhausts its ladder we rerun with this one; ADMM does not care
  // about the missing interior.  Empty disables the handover.
  std::string fallback_backend = "scs";
  long scs_max_iter = 300000;  // ADMM needs room; the backend default is too tight
  // Last clarabel rung before the backend handover: retry with static KKT
  // regularization.  That rescues endgame stalls (step length -> 0 at a
  // rank-deficient optimum) but can also silently solve a *perturbed*
  // problem, so the result only counts if the returned point re-verifies
  // against the unregularized data below stat_reg_residual_tol.  0 disables.
  double clarabel_stat_reg = 1e-7;
  double stat_reg_residual_tol = 5e-7;
  // Second acceptance tier for the regularized rung: a point that misses
  // the residual gate but is still physically small (<= 1e-3) is kept as
  // *near_optimal* -- never a lower bound -- provided its objective does not
  // undercut this already-proven bound (the hierarchy is monotone, so a
  // regularized "optimum" below it has solved the wrong problem).  NaN
  // disables the tier; iterative_solve threads the running bound through.
  double known_lower_bound = std::numeric_limits<double>::quiet_NaN();
  double time_limit_sec = 0;
  std::string bridge_path;   // empty: $OPF_BRIDGE, exe-adjacent, source tree
  std::string python = "python3";
  bool verbose = false;
  bool keep_files = false;   // keep the exchange directory (debugging)
};

struct SolveAttempt {
  std::string backend;
  double eps = 0;
  std::string status;
  double seconds = 0;
  double stat_reg = 0;
};

struct ConicSolution {
  SolveStatus status = SolveStatus::numerical_failure;
  double objective = 0;           // includes the affine constant
  std::vector<double> x;          // per program variable
  std::vector<Eigen::MatrixXd> block_primal;  // assembled per PSD block
  double solve_time_sec = 0;
  std::string solver_id;          // e.g. "clarabel 0.9.0"
  std::string solver_status;      // backend-native status string
  int iterations = 0;
  double primal_residual = 0, dual_residual = 0;
  std::vector<SolveAttempt> attempts;
};

// Serializes the program, runs the bridge subprocess, and maps the
// result back; deterministic for identical inputs and solver versions.
ConicSolution solve(const ConicProgram& prog, const SolverSettings& settings = {});

struct ResidualReport {
  double max_equality_violation = 0;
  double max_inequality_violation = 0;  // positive when a row is negative
  double min_block_eigenvalue = 0;
  double objective_rel_error = 0;  // reported vs recomputed
};
// Independent feasibility recomputation from the returned point.
ResidualReport verify_solution(const ConicProgram& prog, const ConicSolution& sol);

}  // namespace mopf
