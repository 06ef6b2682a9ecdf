#pragma once

#include <complex>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/SparseCore>

namespace mopf {

struct ValidationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Convex quadratic generation cost c2*P^2 + c1*P + c0 with P in MW.
struct CostCurve {
  double c2 = 0, c1 = 0, c0 = 0;
  double value(double p_mw) const { return (c2 * p_mw + c1) * p_mw + c0; }
  bool operator==(const CostCurve&) const = default;
};

struct BusRecord {
  int id = 0;
  double P_D = 0, Q_D = 0;      // load, MW / MVAr
  double V_min = 0, V_max = 0;  // voltage magnitude bounds, pu
  double shunt_G = 0, shunt_B = 0;  // bus shunt admittance, pu
  double base_kV = 1;
  bool operator==(const BusRecord&) const = default;
};

struct GeneratorRecord {
  int bus_id = 0;
  double P_min = 0, P_max = 0;  // MW
  double Q_min = 0, Q_max = 0;  // MVAr
  CostCurve cost;
  bool operator==(const GeneratorRecord&) const = default;
};

struct BranchRecord {
  int from_bus = 0, to_bus = 0;
  double R = 0, X = 0;      // series impedance, pu
  double b_sh = 0;          // total line-charging susceptance, pu
  double tau = 1;           // off-nominal tap ratio on the from side
  double theta_shift = 0;   // phase shift, radians
  double S_max = 0;         // apparent-power limit, MVA; 0 = unlimited
  bool in_service = true;
  bool operator==(const BranchRecord&) const = default;
};

struct NetworkCase {
  std::string name;
  double base_mva = 100;
  int reference_bus = 0;  // bus id
  std::vector<BusRecord> buses;
  std::vector<GeneratorRecord> generators;
  std::vector<BranchRecord> branches;
  std::vector<std::string> notes;  // normalization / aggregation metadata

  std::size_t bus_index(int bus_id) const;  // position in `buses`; throws
  std::size_t reference_index() const { return bus_index(reference_bus); }

  // Notes are normalization metadata, not case data, so they do not
  // participate in equality.
  bool operator==(const NetworkCase& o) const {
    return name == o.name && base_mva == o.base_mva && reference_bus == o.reference_bus &&
           buses == o.buses && generators == o.generators && branches == o.branches;
  }
};

// Structural invariants: unique bus ids, valid endpoints, one reference
// bus, voltage bounds ordered, connectivity over in-service branches.
// Zero-impedance branches are legal here; they are rejected only when
// assembling the admittance matrix (run preprocessing first).
void validate(const NetworkCase& nc);

// 2x2 branch admittance block of the Pi model behind the ideal
// transformer: [I_lm; I_ml] = [ff ft; tf tt] [V_l; V_m].
struct BranchAdmittance {
  std::complex<double> ff, ft, tf, tt;
};
BranchAdmittance branch_admittance(const BranchRecord& br);

struct AdmittanceMatrix {
  Eigen::SparseMatrix<std::complex<double>> Y;  // n x n, pu
  double G(Eigen::Index i, Eigen::Index j) const { return Y.coeff(i, j).real(); }
  double B(Eigen::Index i, Eigen::Index j) const { return Y.coeff(i, j).imag(); }
};
AdmittanceMatrix build_admittance(const NetworkCase& nc);

// Rectangular bus voltages in pu, indexed by bus position.
struct VoltageSolution {
  std::vector<double> V_d, V_q;
  std::size_t size() const { return V_d.size(); }
  std::complex<double> phasor(std::size_t i) const { return {V_d[i], V_q[i]}; }
  double magnitude(std::size_t i) const { return std::abs(phasor(i)); }
  double angle(std::size_t i) const { return std::arg(phasor(i)); }
};

// Generation implied by a voltage profile: P_G = Re{V diag conj(YV)}*base + P_D.
struct BusInjection {
  double P_G = 0, Q_G = 0;  // MW, MVAr
};
std::vector<BusInjection> evaluate_injections(const NetworkCase& nc, const VoltageSolution& v);

struct BranchFlow {
  double P_lm = 0, P_ml = 0;  // MW
  double Q_lm = 0, Q_ml = 0;  // MVAr
  double S_lm = 0, S_ml = 0;  // MVA
};
// One entry per branch; zeros for out-of-service branches.
std::vector<BranchFlow> evaluate_line_flows(const NetworkCase& nc, const VoltageSolution& v);

// Per-bus generation envelope used by the relaxation.  Buses without
// generators get all four bounds zero.  Multiple units at one bus are
// kept as individual dispatch units when every cost is linear (exact);
// otherwise they collapse to one equivalent quadratic whose c2/c1 are
// capacity-weighted averages (approximation, flagged + noted).
struct DispatchUnit {
  double P_min = 0, P_max = 0;  // MW
  double c1 = 0, c0 = 0;
};
struct BusGeneration {
  bool has_generator = false;
  double P_min = 0, P_max = 0, Q_min = 0, Q_max = 0;  // MW / MVAr, summed
  CostCurve cost;                      // used when dispatch is empty
  std::vector<DispatchUnit> dispatch;  // >1 linear-cost units kept exact
  bool aggregated = false;
};
std::vector<BusGeneration> aggregate_generators(const NetworkCase& nc,
                                                std::vector<std::string>* notes = nullptr);

// Cost of serving per-bus active generation p_mw (indexed by bus
// position) under the envelope model; multi-unit linear buses dispatch
// greedily by ascending marginal cost (the exact LP optimum for a box).
double generation_cost(std::span<const BusGeneration> gen, std::span<const double> p_mw);

// Total dispatch cost of a voltage profile, $/h.
double dispatch_cost(const NetworkCase& nc, const VoltageSolution& v);

}  // namespace mopf
