#include "momentopf/network.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <queue>
#include <set>

namespace mopf {

std::size_t NetworkCase::bus_index(int bus_id) const {
  for (std::size_t i = 0; i < buses.size(); ++i)
    if (buses[i].id == bus_id) return i;
  throw ValidationError(name + ": unknown bus id " + std::to_string(bus_id));
}

void validate(const NetworkCase& nc) {
  const std::string where = nc.name.empty() ? "case" : nc.name;
  if (nc.base_mva <= 0) throw ValidationError(where + ": baseMVA must be positive");
  if (nc.buses.empty()) throw ValidationError(where + ": no buses");

  std::set<int> ids;
  for (const BusRecord& b : nc.buses) {
    if (!ids.insert(b.id).second)
      throw ValidationError(where + ": duplicate bus id " + std::to_string(b.id));
    if (b.V_min <= 0 || b.V_max < b.V_min)
      throw ValidationError(where + ": bus " + std::to_string(b.id) +
                            ": need 0 < V_min <= V_max");
    if (b.base_kV <= 0)
      throw ValidationError(where + ": bus " + std::to_string(b.id) + ": base_kV must be positive");
  }
  if (!ids.count(nc.reference_bus))
    throw ValidationError(where + ": reference bus " + std::to_string(nc.reference_bus) +
                          " is not in the bus table");

  for (const GeneratorRecord& g : nc.generators) {
    if (!ids.count(g.bus_id))
      throw ValidationError(where + ": generator references unknown bus " +
                            std::to_string(g.bus_id));
    if (g.P_min > g.P_max || g.Q_min > g.Q_max)
      throw ValidationError(where + ": generator at bus " + std::to_string(g.bus_id) +
                            ": inverted capability bounds");
    if (g.cost.c2 < 0)
      throw ValidationError(where + ": generator at bus " + std::to_string(g.bus_id) +
                            ": cost must be convex (c2 >= 0)");
  }

  for (std::size_t i = 0; i < nc.branches.size(); ++i) {
    const BranchRecord& br = nc.branches[i];
    if (!ids.count(br.from_bus) || !ids.count(br.to_bus))
      throw ValidationError(where + ": branch " + std::to_string(i) +
                            " references an unknown bus");
    if (br.from_bus == br.to_bus)
      throw ValidationError(where + ": branch " + std::to_string(i) + " is a self-loop");
    if (br.tau <= 0)
      throw ValidationError(where + ": branch " + std::to_string(i) +
                            ": tap ratio must be positive");
    if (br.S_max < 0)
      throw ValidationError(where + ": branch " + std::to_string(i) + ": negative flow limit");
  }

  // Connectivity over in-service branches.
  std::map<int, std::vector<int>> adj;
  for (const BranchRecord& br : nc.branches) {
    if (!br.in_service) continue;
    adj[br.from_bus].push_back(br.to_bus);
    adj[br.to_bus].push_back(br.from_bus);
  }
  std::set<int> seen;
  std::queue<int> frontier;
  frontier.push(nc.reference_bus);
  seen.insert(nc.reference_bus);
  while (!frontier.empty()) {
    int b = frontier.front();
    frontier.pop();
    for (int u : adj[b]) {
      if (seen.insert(u).second) frontier.push(u);
    }
  }
  if (seen.size() != nc.buses.size()) {
    for (const BusRecord& b : nc.buses) {
      if (!seen.count(b.id))
        throw ValidationError(where + ": bus " + std::to_string(b.id) +
                              " is not connected to the reference bus");
    }
  }
}

BranchAdmittance branch_admittance(const BranchRecord& br) {
  const std::complex<double> y = 1.0 / std::complex<double>(br.R, br.X);
  const std::complex<double> jbc2(0.0, br.b_sh / 2.0);
  const std::complex<double> shift = std::polar(1.0, br.theta_shift);
  const double t2 = br.tau * br.tau;
  BranchAdmittance a;
  a.ff = (y + jbc2) / t2;
  a.ft = -y * shift / br.tau;
  a.tf = -y * std::conj(shift) / br.tau;
  a.tt = y + jbc2;
  return a;
}

AdmittanceMatrix build_admittance(const NetworkCase& nc) {
  const auto n = static_cast<Eigen::Index>(nc.buses.size());
  std::vector<Eigen::Triplet<std::complex<double>>> trip;
  trip.reserve(nc.branches.size() * 4 + nc.buses.size());

  for (std::size_t i = 0; i < nc.branches.size(); ++i) {
    const BranchRecord& br = nc.branches[i];
    if (!br.in_service) continue;
    if (br.R == 0.0 && br.X == 0.0)
      throw ValidationError(nc.name + ": branch " + std::to_string(i) + " (" +
                            std::to_string(br.from_bus) + "-" + std::to_string(br.to_bus) +
                            ") has zero series impedance; run low-impedance preprocessing first");
    const auto l = static_cast<Eigen::Index>(nc.bus_index(br.from_bus));
    const auto m = static_cast<Eigen::Index>(nc.bus_index(br.to_bus));
    const BranchAdmittance a = branch_admittance(br);
    trip.emplace_back(l, l, a.ff);
    trip.emplace_back(l, m, a.ft);
    trip.emplace_back(m, l, a.tf);
    trip.emplace_back(m, m, a.tt);
  }
  for (std::size_t k = 0; k < nc.buses.size(); ++k) {
    const BusRecord& b = nc.buses[k];
    if (b.shunt_G != 0.0 || b.shunt_B != 0.0)
      trip.emplace_back(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(k),
                        std::complex<double>(b.shunt_G, b.shunt_B));
  }

  AdmittanceMatrix out;
  out.Y.resize(n, n);
  out.Y.setFromTriplets(trip.begin(), trip.end());
  return out;
}

std::vector<BusInjection> evaluate_injections(const NetworkCase& nc, const VoltageSolution& v) {
  if (v.size() != nc.buses.size())
    throw ValidationError(nc.name + ": voltage vector size mismatch");
  const AdmittanceMatrix adm = build_admittance(nc);
  Eigen::VectorXcd V(static_cast<Eigen::Index>(v.size()));
  for (std::size_t i = 0; i < v.size(); ++i) V(static_cast<Eigen::Index>(i)) = v.phasor(i);
  Eigen::VectorXcd I = adm.Y * V;
  std::vector<BusInjection> out(nc.buses.size());
  for (std::size_t k = 0; k < nc.buses.size(); ++k) {
    const std::complex<double> S = V(static_cast<Eigen::Index>(k)) *
                                   std::conj(I(static_cast<Eigen::Index>(k)));
    out[k].P_G = S.real() * nc.base_mva + nc.buses[k].P_D;
    out[k].Q_G = S.imag() * nc.base_mva + nc.buses[k].Q_D;
  }
  return out;
}

std::vector<BranchFlow> evaluate_line_flows(const NetworkCase& nc, const VoltageSolution& v) {
  if (v.size() != nc.buses.size())
    throw ValidationError(nc.name + ": voltage vector size mismatch");
  std::vector<BranchFlow> out(nc.branches.size());
  for (std::size_t i = 0; i < nc.branches.size(); ++i) {
    const BranchRecord& br = nc.branches[i];
    if (!br.in_service) continue;
    const BranchAdmittance a = branch_admittance(br);
    const std::complex<double> Vl = v.phasor(nc.bus_index(br.from_bus));
    const std::complex<double> Vm = v.phasor(nc.bus_index(br.to_bus));
    const std::complex<double> Slm = Vl * std::conj(a.ff * Vl + a.ft * Vm);
    const std::complex<double> Sml = Vm * std::conj(a.tf * Vl + a.tt * Vm);
    BranchFlow& f = out[i];
    f.P_lm = Slm.real() * nc.base_mva;
    f.Q_lm = Slm.imag() * nc.base_mva;
    f.P_ml = Sml.real() * nc.base_mva;
    f.Q_ml = Sml.imag() * nc.base_mva;
    f.S_lm = std::sqrt(f.P_lm * f.P_lm + f.Q_lm * f.Q_lm);
    f.S_ml = std::sqrt(f.P_ml * f.P_ml + f.Q_ml * f.Q_ml);
  }
  return out;
}

std::vector<BusGeneration> aggregate_generators(const NetworkCase& nc,
                                                std::vector<std::string>* notes) {
  std::vector<BusGeneration> out(nc.buses.size());
  std::vector<std::vector<const GeneratorRecord*>> by_bus(nc.buses.size());
  for (const GeneratorRecord& g : nc.generators) by_bus[nc.bus_index(g.bus_id)].push_back(&g);

  for (std::size_t k = 0; k < nc.buses.size(); ++k) {
    const auto& gens = by_bus[k];
    if (gens.empty()) continue;
    BusGeneration& bg = out[k];
    bg.has_generator = true;
    for (const GeneratorRecord* g : gens) {
      bg.P_min += g->P_min;
      bg.P_max += g->P_max;
      bg.Q_min += g->Q_min;
      bg.Q_max += g->Q_max;
    }
    if (gens.size() == 1) {
      bg.cost = gens[0]->cost;
      continue;
    }
    const bool all_linear = std::all_of(gens.begin(), gens.end(),
                                        [](const GeneratorRecord* g) { return g->cost.c2 == 0; });
    if (all_linear) {
      for (const GeneratorRecord* g : gens)
        bg.dispatch.push_back({g->P_min, g->P_max, g->cost.c1, g->cost.c0});
    } else {
      // Capacity-weighted single equivalent quadratic.
      double cap = 0;
      for (const GeneratorRecord* g : gens) cap += std::max(g->P_max, 0.0);
      for (const GeneratorRecord* g : gens) {
        const double w = cap > 0 ? std::max(g->P_max, 0.0) / cap : 1.0 / double(gens.size());
        bg.cost.c2 += w * g->cost.c2;
        bg.cost.c1 += w * g->cost.c1;
        bg.cost.c0 += g->cost.c0;
      }
      bg.aggregated = true;
      if (notes)
        notes->push_back("bus " + std::to_string(nc.buses[k].id) + ": " +
                         std::to_string(gens.size()) +
                         " units aggregated into one capacity-weighted quadratic cost");
    }
  }
  return out;
}

double generation_cost(std::span<const BusGeneration> gen, std::span<const double> p_mw) {
  if (gen.size() != p_mw.size()) throw ValidationError("generation_cost: size mismatch");
  double total = 0;
  for (std::size_t k = 0; k < gen.size(); ++k) {
    const BusGeneration& bg = gen[k];
    if (!bg.has_generator) continue;
    if (bg.dispatch.empty()) {
      total += bg.cost.value(p_mw[k]);
      continue;
    }
    // Greedy merit-order fill: exact for linear costs on a box.
    std::vector<DispatchUnit> units(bg.dispatch.begin(), bg.dispatch.end());
    std::sort(units.begin(), units.end(),
              [](const DispatchUnit& a, const DispatchUnit& b) { return a.c1 < b.c1; });
    double rem = p_mw[k];
    for (const DispatchUnit& u : units) {
      rem -= u.P_min;
      total += u.c1 * u.P_min + u.c0;
    }
    for (const DispatchUnit& u : units) {
      const double take = std::clamp(rem, 0.0, u.P_max - u.P_min);
      total += u.c1 * take;
      rem -= take;
    }
    // Any residual (p outside the aggregate box) is billed at the
    // marginal unit; feasibility checking reports the bound violation.
    if (rem > 0 && !units.empty()) total += units.back().c1 * rem;
    if (rem < 0 && !units.empty()) total += units.front().c1 * rem;
  }
  return total;
}

double dispatch_cost(const NetworkCase& nc, const VoltageSolution& v) {
  const std::vector<BusGeneration> gen = aggregate_generators(nc);
  const std::vector<BusInjection> inj = evaluate_injections(nc, v);
  std::vector<double> p(nc.buses.size());
  for (std::size_t k = 0; k < p.size(); ++k) p[k] = inj[k].P_G;
  return generation_cost(gen, p);
}

}  // namespace mopf
