#pragma once

#include <map>
#include <string>
#include <vector>

#include "momentopf/network.hpp"

namespace mopf {

struct PreprocessConfig {
  double thrshz = 1e-3;  // group branches with |R + jX| < thrshz, pu
};

struct EliminatedBranch {
  int from_bus = 0, to_bus = 0;
  std::size_t original_branch_index = 0;
};

// How full-network buses map onto the reduced network.
struct ReductionMap {
  std::map<int, int> group_of;  // full bus id -> representative bus id
  std::vector<EliminatedBranch> eliminated;  // in-service intra-group branches
  std::vector<std::string> notes;
  bool identity() const;
  std::size_t group_size(int representative) const;
};

struct ReducedCase {
  NetworkCase network;
  ReductionMap map;
  std::string source_name;
  double thrshz = 0;
};

// Groups buses joined by low-impedance in-service branches (union-find
// over |R+jX| < thrshz), collapses each group onto its lowest-id member,
// sums loads and shunts (including eliminated line charging), intersects
// voltage bounds, and re-targets generators and surviving branches.
// Throws ValidationError when a group's voltage bounds are incompatible.
ReducedCase group_low_impedance(const NetworkCase& nc, const PreprocessConfig& cfg = {});

struct IntraGroupFlow {
  int from_bus = 0, to_bus = 0;  // full-network ids, direction of P/Q
  double P_MW = 0, Q_MVAr = 0;
};

struct RecoveredSolution {
  VoltageSolution voltage;                  // on the full network
  std::vector<IntraGroupFlow> intra_flows;  // over eliminated branches
};

// Expands a reduced-network voltage profile back to the full network:
// members share their representative's phasor, and flows on eliminated
// branches are recovered from the per-group balance (minimum-norm
// routing; exact when the group graph is a tree).
RecoveredSolution recover_full_solution(const VoltageSolution& reduced_v, const ReductionMap& map,
                                        const NetworkCase& full_case);

struct SensitivityReport {
  double max_voltage_delta_pu = 0;
  double max_angle_delta_deg = 0;   // over branch angle differences
  double objective_delta_percent = 0;
  std::string summary() const;
};

// Compares a full-network solution against a reduced-network one.
SensitivityReport preprocessing_sensitivity_report(const NetworkCase& full_case,
                                                   const ReducedCase& reduced,
                                                   const VoltageSolution& v_full,
                                                   const VoltageSolution& v_reduced);

std::string reduction_map_to_json(const ReductionMap& map);

}  // namespace mopf
