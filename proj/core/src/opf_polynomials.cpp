#include "momentopf/opf_polynomials.hpp"

#include <algorithm>
#include <complex>
#include <map>
#include <stdexcept>

namespace mopf {

std::vector<VarId> VariableMap::bus_vars(std::span<const int> bus_positions) const {
  std::vector<VarId> vars;
  vars.reserve(2 * bus_positions.size());
  for (int b : bus_positions) vars.push_back(vd(static_cast<std::size_t>(b)));
  for (int b : bus_positions) {
    if (static_cast<std::size_t>(b) != ref_index) vars.push_back(vq(static_cast<std::size_t>(b)));
  }
  std::sort(vars.begin(), vars.end());
  return vars;
}

namespace {

// Admittance row k as bus-position -> Y_ki, built from incident branches.
std::map<std::size_t, std::complex<double>> admittance_row(const NetworkCase& nc, std::size_t k) {
  std::map<std::size_t, std::complex<double>> row;
  const BusRecord& bus = nc.buses[k];
  row[k] = std::complex<double>(bus.shunt_G, bus.shunt_B);
  for (const BranchRecord& br : nc.branches) {
    if (!br.in_service) continue;
    const std::size_t l = nc.bus_index(br.from_bus);
    const std::size_t m = nc.bus_index(br.to_bus);
    if (l != k && m != k) continue;
    const BranchAdmittance a = branch_admittance(br);
    if (l == k) {
      row[l] += a.ff;
      row[m] += a.ft;
    } else {
      row[m] += a.tt;
      row[l] += a.tf;
    }
  }
  return row;
}

// Adds the contribution of Y_ki to the active/reactive injection
// quadratics at bus k:
//   P += G(VdkVdi + VqkVqi) + B(VqkVdi - VdkVqi)
//   Q += G(VqkVdi - VdkVqi) - B(VdkVdi + VqkVqi)
// Terms touching the eliminated reference V_q are dropped.
void accumulate_injection(Polynomial& P, Polynomial& Q, const VariableMap& vm, std::size_t k,
                          std::size_t i, std::complex<double> Y) {
  const double G = Y.real(), B = Y.imag();
  const bool k_has_q = k != vm.ref_index;
  const bool i_has_q = i != vm.ref_index;

  auto mono = [](VarId a, VarId b) { return Exponent::variable(a) + Exponent::variable(b); };
  const Exponent dd = mono(vm.vd(k), vm.vd(i));
  P.add_term(dd, G);
  Q.add_term(dd, -B);
  if (k_has_q && i_has_q) {
    const Exponent qq = mono(vm.vq(k), vm.vq(i));
    P.add_term(qq, G);
    Q.add_term(qq, -B);
  }
  if (k_has_q) {
    const Exponent qd = mono(vm.vq(k), vm.vd(i));
    P.add_term(qd, B);
    Q.add_term(qd, G);
  }
  if (i_has_q) {
    const Exponent dq = mono(vm.vd(k), vm.vq(i));
    P.add_term(dq, -B);
    Q.add_term(dq, -G);
  }
}

std::vector<int> support_positions(const Polynomial& f, const VariableMap& vm) {
  std::vector<int> buses;
  for (VarId v : f.support())
    buses.push_back(static_cast<int>(v < vm.num_buses ? v : v - vm.num_buses));
  std::sort(buses.begin(), buses.end());
  buses.erase(std::unique(buses.begin(), buses.end()), buses.end());
  return buses;
}

}  // namespace

Polynomial active_injection_polynomial(const NetworkCase& nc, std::size_t bus) {
  const VariableMap vm{nc.buses.size(), nc.reference_index()};
  Polynomial P, Q;
  for (const auto& [i, Y] : admittance_row(nc, bus)) accumulate_injection(P, Q, vm, bus, i, Y);
  P.add_term(Exponent{}, nc.buses[bus].P_D / nc.base_mva);
  return P;
}

Polynomial reactive_injection_polynomial(const NetworkCase& nc, std::size_t bus) {
  const VariableMap vm{nc.buses.size(), nc.reference_index()};
  Polynomial P, Q;
  for (const auto& [i, Y] : admittance_row(nc, bus)) accumulate_injection(P, Q, vm, bus, i, Y);
  Q.add_term(Exponent{}, nc.buses[bus].Q_D / nc.base_mva);
  return Q;
}

Polynomial voltage_polynomial(const NetworkCase& nc, std::size_t bus) {
  const VariableMap vm{nc.buses.size(), nc.reference_index()};
  Polynomial f;
  f.add_term(Exponent::variable(vm.vd(bus), 2), 1.0);
  if (bus != vm.ref_index) f.add_term(Exponent::variable(vm.vq(bus), 2), 1.0);
  return f;
}

BranchPolynomials branch_flow_polynomials(const NetworkCase& nc, std::size_t branch) {
  const BranchRecord& br = nc.branches.at(branch);
  const VariableMap vm{nc.buses.size(), nc.reference_index()};
  const BranchAdmittance a = branch_admittance(br);
  const std::size_t l = nc.bus_index(br.from_bus);
  const std::size_t m = nc.bus_index(br.to_bus);
  BranchPolynomials out;
  accumulate_injection(out.P_lm, out.Q_lm, vm, l, l, a.ff);
  accumulate_injection(out.P_lm, out.Q_lm, vm, l, m, a.ft);
  accumulate_injection(out.P_ml, out.Q_ml, vm, m, m, a.tt);
  accumulate_injection(out.P_ml, out.Q_ml, vm, m, l, a.tf);
  return out;
}

std::vector<ConstraintPolynomial> constraint_polynomials(const NetworkCase& nc) {
  const VariableMap vm{nc.buses.size(), nc.reference_index()};
  const std::vector<BusGeneration> gen = aggregate_generators(nc);
  std::vector<ConstraintPolynomial> out;
  out.reserve(3 * nc.buses.size() + 2 * nc.branches.size());

  for (std::size_t k = 0; k < nc.buses.size(); ++k) {
    ConstraintPolynomial p;
    p.kind = ConstraintKind::active_injection;
    p.bus_id = nc.buses[k].id;
    p.f = active_injection_polynomial(nc, k);
    p.lower = gen[k].P_min / nc.base_mva;
    p.upper = gen[k].P_max / nc.base_mva;
    p.half_degree = 1;
    p.support_buses = support_positions(p.f, vm);
    out.push_back(std::move(p));

    ConstraintPolynomial q;
    q.kind = ConstraintKind::reactive_injection;
    q.bus_id = nc.buses[k].id;
    q.f = reactive_injection_polynomial(nc, k);
    q.lower = gen[k].Q_min / nc.base_mva;
    q.upper = gen[k].Q_max / nc.base_mva;
    q.half_degree = 1;
    q.support_buses = support_positions(q.f, vm);
    out.push_back(std::move(q));

    ConstraintPolynomial v;
    v.kind = ConstraintKind::voltage_magnitude;
    v.bus_id = nc.buses[k].id;
    v.f = voltage_polynomial(nc, k);
    v.lower = nc.buses[k].V_min * nc.buses[k].V_min;
    v.upper = nc.buses[k].V_max * nc.buses[k].V_max;
    v.half_degree = 1;
    v.support_buses = {static_cast<int>(k)};
    out.push_back(std::move(v));
  }

  for (std::size_t i = 0; i < nc.branches.size(); ++i) {
    const BranchRecord& br = nc.branches[i];
    if (!br.in_service || br.S_max <= 0) continue;
    const BranchPolynomials bp = branch_flow_polynomials(nc, i);
    const double cap = br.S_max / nc.base_mva;
    for (bool from_side : {true, false}) {
      ConstraintPolynomial s;
      s.kind = ConstraintKind::apparent_flow;
      s.branch_index = static_cast<int>(i);
      s.from_side = from_side;
      const Polynomial& P = from_side ? bp.P_lm : bp.P_ml;
      const Polynomial& Q = from_side ? bp.Q_lm : bp.Q_ml;
      s.f = P * P + Q * Q;
      s.upper = cap * cap;
      s.half_degree = 2;
      s.support_buses = {static_cast<int>(nc.bus_index(br.from_bus)),
                         static_cast<int>(nc.bus_index(br.to_bus))};
      std::sort(s.support_buses.begin(), s.support_buses.end());
      out.push_back(std::move(s));
    }
  }
  return out;
}

Polynomial cost_polynomial(const NetworkCase& nc, const BusGeneration& gen, std::size_t bus) {
  if (!gen.has_generator)
    throw std::invalid_argument("cost_polynomial: bus has no generator");
  if (!gen.dispatch.empty())
    throw std::invalid_argument("cost_polynomial: bus uses linear dispatch units");
  const Polynomial fp = active_injection_polynomial(nc, bus);
  Polynomial f = Polynomial::constant(gen.cost.c0);
  f += gen.cost.c1 * nc.base_mva * fp;
  if (gen.cost.c2 != 0) f += gen.cost.c2 * nc.base_mva * nc.base_mva * (fp * fp);
  return f;
}

}  // namespace mopf
