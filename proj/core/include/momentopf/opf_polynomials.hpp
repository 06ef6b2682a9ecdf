#pragma once

#include <optional>
#include <vector>

#include "momentopf/network.hpp"
#include "momentopf/polynomial.hpp"

namespace mopf {

// Polynomial variables: V_d of bus i is variable i, V_q of bus i is
// variable n+i.  The reference-bus V_q is pinned to zero and therefore
// never appears in polynomials or monomial bases.
struct VariableMap {
  std::size_t num_buses = 0;
  std::size_t ref_index = 0;

  std::size_t num_vars() const { return 2 * num_buses; }
  VarId vd(std::size_t bus) const { return static_cast<VarId>(bus); }
  VarId vq(std::size_t bus) const { return static_cast<VarId>(num_buses + bus); }
  bool eliminated(VarId v) const { return v == vq(ref_index); }

  // Variables of a sorted bus set, ascending id (d block then q block),
  // with the reference V_q omitted.
  std::vector<VarId> bus_vars(std::span<const int> bus_positions) const;
};

enum class ConstraintKind {
  active_injection,    // f_Pk within [P_min, P_max]
  reactive_injection,  // f_Qk within [Q_min, Q_max]
  voltage_magnitude,   // f_Vk within [V_min^2, V_max^2]
  apparent_flow        // f_Slm <= (S_max)^2  (squared-MVA polynomial)
};

struct ConstraintPolynomial {
  ConstraintKind kind;
  int bus_id = -1;        // injection / voltage constraints
  int branch_index = -1;  // flow constraints
  bool from_side = true;  // flow constraints: lm vs ml
  Polynomial f;           // per-unit polynomial in the voltage variables
  std::optional<double> lower, upper;  // per-unit bounds
  std::uint32_t half_degree = 1;       // beta with deg f == 2*beta
  std::vector<int> support_buses;      // sorted bus positions
};

// Quadratic flow polynomials of one branch (per unit).
struct BranchPolynomials {
  Polynomial P_lm, Q_lm, P_ml, Q_ml;
};

// f_Pk and f_Qk: per-unit bus generation as a quadratic in voltages,
// load included as a constant (so the polynomial equals P_Gk / Q_Gk).
Polynomial active_injection_polynomial(const NetworkCase& nc, std::size_t bus);
Polynomial reactive_injection_polynomial(const NetworkCase& nc, std::size_t bus);

// f_Vk = V_dk^2 + V_qk^2.
Polynomial voltage_polynomial(const NetworkCase& nc, std::size_t bus);

BranchPolynomials branch_flow_polynomials(const NetworkCase& nc, std::size_t branch);

// The full constraint list: P/Q/V per bus (bounds from the generation
// envelope), plus quartic squared-flow constraints per limited
// in-service branch (both directions).
std::vector<ConstraintPolynomial> constraint_polynomials(const NetworkCase& nc);

// Quartic dispatch-cost polynomial of bus k in $/h (cost applied to
// base_mva * f_Pk); only valid for a quadratic-cost envelope.
Polynomial cost_polynomial(const NetworkCase& nc, const BusGeneration& gen, std::size_t bus);

}  // namespace mopf
