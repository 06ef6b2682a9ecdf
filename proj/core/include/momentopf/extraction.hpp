#pragma once

#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "momentopf/network.hpp"
#include "momentopf/preprocess.hpp"
#include "momentopf/relaxation.hpp"
#include "momentopf/solver.hpp"

namespace mopf {

struct StitchingError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Degree-2 moment submatrix W_c = L{x_c x_c'} over each clique's
// voltage variables (no constant row).
std::vector<Eigen::MatrixXd> second_order_blocks(const MomentVector& y,
                                                 const RelaxationInfo& info);

struct RankCheckResult {
  bool holds = false;
  std::vector<double> ratios;         // lambda1 / lambda2 per clique block
  std::vector<std::size_t> failing;   // blocks under the threshold
};
RankCheckResult rank_check(const std::vector<Eigen::MatrixXd>& blocks, double threshold = 1e4);

struct ExtractionResult {
  double lambda = 0;          // squared norm of the stitched eigenvector
  std::vector<double> mu;     // unit vector over [V_d | V_q without ref]
  VoltageSolution voltage;    // V = sqrt(lambda) * (mu_d + j mu_q)
  std::vector<double> block_ratios;
};

// Dominant eigenpair per clique, sign-stitched along the clique tree
// (overlap residual beyond stitch_tol raises StitchingError), global
// sign fixed by V_d >= 0 at the reference bus.
ExtractionResult extract_voltage(const MomentVector& y, const RelaxationInfo& info,
                                 const NetworkCase& nc, double stitch_tol = 1e-3);

struct MismatchReport {
  std::vector<double> S_mis_MVA;   // per bus position
  VoltageSolution rank_one_voltage;
  double max_MVA() const;
  std::size_t argmax() const;
};

// Apparent-power gap between the closest rank-one voltage profile and
// the moment-side injections L{f_Pk}, L{f_Qk}.
MismatchReport power_injection_mismatch(const MomentVector& y, const RelaxationInfo& info,
                                        const NetworkCase& nc);

// Up to two buses with the largest mismatch at or above tol_MVA that
// can still be escalated (order below gamma_max); deterministic
// tie-break by bus id.
std::vector<int> select_upgrade_buses(const MismatchReport& report, const NetworkCase& nc,
                                      double tol_MVA, const OrderAssignment& orders,
                                      std::uint32_t gamma_max);

struct FeasibilityTolerance {
  double power_MVA = 1.0;   // P and Q bound violations
  double voltage_pu = 1e-4;
  double flow_MVA = 1.0;
  double angle_rad = 1e-6;  // reference angle
};

struct FeasibilityReport {
  double max_P_violation_MW = 0;
  double max_Q_violation_MVAr = 0;
  double max_V_violation_pu = 0;
  double max_S_violation_MVA = 0;
  double ref_angle_rad = 0;
  std::string worst_constraint;
  bool pass(const FeasibilityTolerance& tol = {}) const;
  std::string summary() const;
};
FeasibilityReport check_feasibility(const NetworkCase& nc, const VoltageSolution& v);

// Percent gap 100 * (feasible - lower) / |feasible|, floored at zero;
// throws when the bound exceeds the feasible cost beyond tolerance.
double optimality_gap(double lower_bound, double feasible_objective, double tol_rel = 1e-6);

struct SolveOptions {
  double thrshz = 1e-3;
  double epsilon_b = 0;           // $/MVAr
  std::uint32_t gamma_max = 3;
  double mismatch_tol_MVA = 1.0;
  std::uint32_t max_iter = 10;
  double rank_ratio_threshold = 1e4;
  double clique_merge_threshold = 0;
  SolverSettings solver;
  std::function<void(const std::string&)> log;  // optional progress sink
};

struct IterationRecord {
  int iteration = 0;
  std::vector<int> upgraded_buses;  // reduced-network bus ids raised this iteration
  double objective = 0;             // relaxation objective (penalized)
  double max_mismatch_MVA = 0;
  double min_eigenvalue_ratio = 0;
  double solver_seconds = 0;
  std::string orders;               // "bus:gamma" list after the upgrade
};

struct OPFResult {
  std::string status;  // global | feasible | bound_only | infeasible | solver_failure
  bool feasible_found = false;
  bool certified = false;    // rank condition held with epsilon_b == 0
  double feasible_objective = 0;  // $/h, cost of the extracted point
  double lower_bound = 0;         // $/h, valid relaxation bound
  double gap_percent = 0;
  VoltageSolution voltage_full;     // recovered on the full network
  VoltageSolution voltage_reduced;
  std::vector<IntraGroupFlow> intra_flows;
  FeasibilityReport feasibility;    // on the reduced network
  std::vector<IterationRecord> iterations;
  std::vector<double> final_ratios;           // per clique block, ascending
  std::vector<double> final_mismatch_MVA;     // per reduced bus
  ReducedCase reduced;
  std::map<std::string, std::string> metadata;
};

// The full pipeline: preprocess, iterate the selective-order moment
// relaxation, extract, certify/diagnose, recover the full-network
// solution, and compute bound + gap (the bound comes from an
// unpenalized first-order solve when epsilon_b != 0).
OPFResult iterative_solve(const NetworkCase& full_case, const SolveOptions& opts = {});

}  // namespace mopf
