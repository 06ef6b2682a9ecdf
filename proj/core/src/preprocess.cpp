#include "momentopf/preprocess.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <set>
#include <sstream>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

namespace mopf {

namespace {

struct UnionFind {
  std::vector<int> parent;
  explicit UnionFind(std::size_t n) : parent(n) {
    for (std::size_t i = 0; i < n; ++i) parent[i] = static_cast<int>(i);
  }
  int find(int a) {
    while (parent[a] != a) a = parent[a] = parent[parent[a]];
    return a;
  }
  void unite(int a, int b) {
    a = find(a);
    b = find(b);
    if (a != b) parent[std::max(a, b)] = std::min(a, b);  // keep the lowest position as root
  }
};

}  // namespace

bool ReductionMap::identity() const {
  for (const auto& [bus, rep] : group_of)
    if (bus != rep) return false;
  return true;
}

std::size_t ReductionMap::group_size(int representative) const {
  std::size_t n = 0;
  for (const auto& [bus, rep] : group_of)
    if (rep == representative) ++n;
  return n;
}

ReducedCase group_low_impedance(const NetworkCase& nc, const PreprocessConfig& cfg) {
  validate(nc);
  const std::size_t n = nc.buses.size();
  UnionFind uf(n);

  for (const BranchRecord& br : nc.branches) {
    if (!br.in_service) continue;
    if (std::hypot(br.R, br.X) < cfg.thrshz)
      uf.unite(static_cast<int>(nc.bus_index(br.from_bus)),
               static_cast<int>(nc.bus_index(br.to_bus)));
  }

  // Representative = member with the lowest bus id.  Union roots are
  // lowest-position, which need not be lowest-id, so resolve explicitly.
  std::map<int, int> rep_id_of_root;
  for (std::size_t i = 0; i < n; ++i) {
    const int root = uf.find(static_cast<int>(i));
    auto it = rep_id_of_root.find(root);
    if (it == rep_id_of_root.end() || nc.buses[i].id < it->second)
      rep_id_of_root[root] = nc.buses[i].id;
  }

  ReducedCase out;
  out.source_name = nc.name;
  out.thrshz = cfg.thrshz;
  ReductionMap& map = out.map;
  for (std::size_t i = 0; i < n; ++i)
    map.group_of[nc.buses[i].id] = rep_id_of_root[uf.find(static_cast<int>(i))];

  NetworkCase& red = out.network;
  red.name = nc.name;
  red.base_mva = nc.base_mva;
  red.reference_bus = map.group_of.at(nc.reference_bus);
  red.notes = nc.notes;

  // Reduced buses keep the full-case ordering of their representatives.
  std::map<int, std::size_t> red_pos;
  for (std::size_t i = 0; i < n; ++i) {
    const BusRecord& b = nc.buses[i];
    if (map.group_of.at(b.id) != b.id) continue;
    red_pos[b.id] = red.buses.size();
    BusRecord r = b;
    r.P_D = 0;
    r.Q_D = 0;
    r.shunt_G = 0;
    r.shunt_B = 0;
    red.buses.push_back(r);
  }

  std::map<int, std::vector<int>> members;  // rep id -> member ids
  for (std::size_t i = 0; i < n; ++i) {
    const BusRecord& b = nc.buses[i];
    const int rep = map.group_of.at(b.id);
    members[rep].push_back(b.id);
    BusRecord& r = red.buses[red_pos.at(rep)];
    r.P_D += b.P_D;
    r.Q_D += b.Q_D;
    r.shunt_G += b.shunt_G;
    r.shunt_B += b.shunt_B;
    if (b.id != rep) {
      r.V_min = std::max(r.V_min, b.V_min);
      r.V_max = std::min(r.V_max, b.V_max);
    }
  }
  for (const auto& [rep, ids] : members) {
    if (ids.size() < 2) continue;
    const BusRecord& r = red.buses[red_pos.at(rep)];
    if (r.V_min > r.V_max) {
      std::ostringstream os;
      os << nc.name << ": merged group {";
      for (std::size_t k = 0; k < ids.size(); ++k) os << (k ? ", " : "") << ids[k];
      os << "} has an empty voltage-bound intersection [" << r.V_min << ", " << r.V_max << "]";
      throw ValidationError(os.str());
    }
    std::ostringstream os;
    os << "merged buses {";
    for (std::size_t k = 0; k < ids.size(); ++k) os << (k ? ", " : "") << ids[k];
    os << "} onto bus " << rep;
    map.notes.push_back(os.str());
  }

  for (GeneratorRecord g : nc.generators) {
    g.bus_id = map.group_of.at(g.bus_id);
    red.generators.push_back(g);
  }

  for (std::size_t i = 0; i < nc.branches.size(); ++i) {
    BranchRecord br = nc.branches[i];
    const int rf = map.group_of.at(br.from_bus);
    const int rt = map.group_of.at(br.to_bus);
    if (rf == rt) {
      // Intra-group branch: series parameters are discarded; charging
      // susceptance stays, attached to the representative bus shunt.
      if (br.in_service) {
        map.eliminated.push_back({br.from_bus, br.to_bus, i});
        red.buses[red_pos.at(rf)].shunt_B += br.b_sh;
      }
      continue;
    }
    br.from_bus = rf;
    br.to_bus = rt;
    red.branches.push_back(br);
  }

  if (red.name.empty()) red.name = "reduced";
  validate(red);
  return out;
}

RecoveredSolution recover_full_solution(const VoltageSolution& reduced_v, const ReductionMap& map,
                                        const NetworkCase& full_case) {
  // Reduced bus order = representatives in full-case bus order.
  std::map<int, std::size_t> red_pos;
  for (const BusRecord& b : full_case.buses) {
    const int rep = map.group_of.at(b.id);
    if (rep == b.id) red_pos.emplace(b.id, red_pos.size());
  }
  if (red_pos.size() != reduced_v.size())
    throw ValidationError("recover_full_solution: reduced voltage size mismatch");

  RecoveredSolution out;
  const std::size_t n = full_case.buses.size();
  out.voltage.V_d.resize(n);
  out.voltage.V_q.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t rp = red_pos.at(map.group_of.at(full_case.buses[i].id));
    out.voltage.V_d[i] = reduced_v.V_d[rp];
    out.voltage.V_q[i] = reduced_v.V_q[rp];
  }

  if (map.eliminated.empty()) return out;

  // Net injection every member bus must push into its group's internal
  // branches: generation minus load, shunt, and inter-group exports.
  // Generation at gen buses is the group total split by capacity.
  const std::vector<BranchFlow> flows = evaluate_line_flows(full_case, out.voltage);
  std::set<std::size_t> eliminated_idx;
  for (const EliminatedBranch& e : map.eliminated) eliminated_idx.insert(e.original_branch_index);

  std::map<int, std::vector<std::size_t>> group_members;  // rep -> bus positions
  for (std::size_t i = 0; i < n; ++i)
    group_members[map.group_of.at(full_case.buses[i].id)].push_back(i);

  const std::vector<BusGeneration> gen = aggregate_generators(full_case);

  for (const auto& [rep, mem] : group_members) {
    if (mem.size() < 2) continue;

    // Residual balance n_b per member (MW, MVAr): starts from load,
    // shunt, and inter-group flows; generation is added below.
    std::vector<double> np(mem.size(), 0), nq(mem.size(), 0);
    std::map<int, std::size_t> local;  // bus id -> slot
    for (std::size_t s = 0; s < mem.size(); ++s) local[full_case.buses[mem[s]].id] = s;

    for (std::size_t s = 0; s < mem.size(); ++s) {
      const BusRecord& b = full_case.buses[mem[s]];
      const double vd = out.voltage.V_d[mem[s]], vq = out.voltage.V_q[mem[s]];
      const double v2 = vd * vd + vq * vq;
      np[s] -= b.P_D + b.shunt_G * v2 * full_case.base_mva;
      nq[s] -= b.Q_D - b.shunt_B * v2 * full_case.base_mva;
    }
    for (std::size_t i = 0; i < full_case.branches.size(); ++i) {
      if (eliminated_idx.count(i)) continue;
      const BranchRecord& br = full_case.branches[i];
      if (!br.in_service) continue;
      if (auto it = local.find(br.from_bus); it != local.end()) {
        np[it->second] -= flows[i].P_lm;
        nq[it->second] -= flows[i].Q_lm;
      }
      if (auto it = local.find(br.to_bus); it != local.end()) {
        np[it->second] -= flows[i].P_ml;
        nq[it->second] -= flows[i].Q_ml;
      }
    }
    // Group totals must balance: distribute the shortfall over
    // generator buses by active/reactive capacity.
    double needP = 0, needQ = 0;
    for (std::size_t s = 0; s < mem.size(); ++s) {
      needP -= np[s];
      needQ -= nq[s];
    }
    double capP = 0, capQ = 0;
    for (std::size_t s = 0; s < mem.size(); ++s) {
      capP += std::max(gen[mem[s]].P_max, 0.0);
      capQ += gen[mem[s]].has_generator ? (gen[mem[s]].Q_max - gen[mem[s]].Q_min) : 0.0;
    }
    std::size_t gen_count = 0;
    for (std::size_t s = 0; s < mem.size(); ++s)
      if (gen[mem[s]].has_generator) ++gen_count;
    for (std::size_t s = 0; s < mem.size(); ++s) {
      if (!gen[mem[s]].has_generator) continue;
      const double wP = capP > 0 ? std::max(gen[mem[s]].P_max, 0.0) / capP : 1.0 / gen_count;
      const double wQ = capQ > 0 ? (gen[mem[s]].Q_max - gen[mem[s]].Q_min) / capQ
                                 : 1.0 / gen_count;
      np[s] += wP * needP;
      nq[s] += wQ * needQ;
    }

    // Minimum-norm routing over the eliminated edges: f = A^T phi with
    // L phi = n, grounding the last member (L = A A^T is the group
    // Laplacian; consistent because the n_b now sum to ~0).
    std::vector<const EliminatedBranch*> edges;
    for (const EliminatedBranch& e : map.eliminated)
      if (local.count(e.from_bus)) edges.push_back(&e);

    const std::size_t g = mem.size();
    Eigen::MatrixXd L = Eigen::MatrixXd::Zero(g, g);
    for (const EliminatedBranch* e : edges) {
      const std::size_t a = local.at(e->from_bus), b = local.at(e->to_bus);
      L(a, a) += 1;
      L(b, b) += 1;
      L(a, b) -= 1;
      L(b, a) -= 1;
    }
    Eigen::MatrixXd Lr = L.topLeftCorner(g - 1, g - 1);
    Eigen::VectorXd rp(g - 1), rq(g - 1);
    for (std::size_t s = 0; s + 1 < g; ++s) {
      rp(s) = np[s];
      rq(s) = nq[s];
    }
    Eigen::VectorXd phiP = Eigen::VectorXd::Zero(g), phiQ = Eigen::VectorXd::Zero(g);
    phiP.head(g - 1) = Lr.ldlt().solve(rp);
    phiQ.head(g - 1) = Lr.ldlt().solve(rq);

    for (const EliminatedBranch* e : edges) {
      const std::size_t a = local.at(e->from_bus), b = local.at(e->to_bus);
      out.intra_flows.push_back(
          {e->from_bus, e->to_bus, phiP(a) - phiP(b), phiQ(a) - phiQ(b)});
    }
  }
  return out;
}

std::string SensitivityReport::summary() const {
  std::ostringstream os;
  os << "preprocessing sensitivity: max |dV| = " << max_voltage_delta_pu
     << " pu, max line angle delta = " << max_angle_delta_deg
     << " deg, objective delta = " << objective_delta_percent << "%";
  return os.str();
}

SensitivityReport preprocessing_sensitivity_report(const NetworkCase& full_case,
                                                   const ReducedCase& reduced,
                                                   const VoltageSolution& v_full,
                                                   const VoltageSolution& v_reduced) {
  SensitivityReport rep;
  const ReductionMap& map = reduced.map;
  std::map<int, std::size_t> red_pos;
  for (std::size_t i = 0; i < reduced.network.buses.size(); ++i)
    red_pos[reduced.network.buses[i].id] = i;

  auto reduced_phasor = [&](int full_bus_id) {
    return v_reduced.phasor(red_pos.at(map.group_of.at(full_bus_id)));
  };

  for (std::size_t i = 0; i < full_case.buses.size(); ++i) {
    const double dv =
        std::abs(v_full.magnitude(i) - std::abs(reduced_phasor(full_case.buses[i].id)));
    rep.max_voltage_delta_pu = std::max(rep.max_voltage_delta_pu, dv);
  }
  for (const BranchRecord& br : full_case.branches) {
    if (!br.in_service) continue;
    const double full_delta = v_full.angle(full_case.bus_index(br.from_bus)) -
                              v_full.angle(full_case.bus_index(br.to_bus));
    const double red_delta =
        std::arg(reduced_phasor(br.from_bus)) - std::arg(reduced_phasor(br.to_bus));
    const double d = std::abs(full_delta - red_delta) * 180.0 / std::numbers::pi;
    rep.max_angle_delta_deg = std::max(rep.max_angle_delta_deg, d);
  }
  const double cost_full = dispatch_cost(full_case, v_full);
  const double cost_red = dispatch_cost(reduced.network, v_reduced);
  if (cost_full != 0)
    rep.objective_delta_percent = 100.0 * std::abs(cost_red - cost_full) / std::abs(cost_full);
  return rep;
}

std::string reduction_map_to_json(const ReductionMap& map) {
  nlohmann::json j;
  j["group_of"] = nlohmann::json::object();
  for (const auto& [bus, rep] : map.group_of) j["group_of"][std::to_string(bus)] = rep;
  j["eliminated_branches"] = nlohmann::json::array();
  for (const EliminatedBranch& e : map.eliminated)
    j["eliminated_branches"].push_back(
        {{"from", e.from_bus}, {"to", e.to_bus}, {"branch_index", e.original_branch_index}});
  j["notes"] = map.notes;
  return j.dump(2);
}

}  // namespace mopf
