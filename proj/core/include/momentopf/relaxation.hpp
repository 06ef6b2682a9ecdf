#pragma once

#include <cstdint>
#include <map>

#include "momentopf/conic.hpp"
#include "momentopf/network.hpp"
#include "momentopf/opf_polynomials.hpp"
#include "momentopf/sparsity.hpp"

namespace mopf {

// Per-bus relaxation order gamma_k >= 1 (selective escalation).
struct OrderAssignment {
  std::uint32_t default_order = 1;
  std::map<int, std::uint32_t> bus_orders;  // keyed by bus id

  std::uint32_t order_of(int bus_id) const {
    auto it = bus_orders.find(bus_id);
    return it == bus_orders.end() ? default_order : std::max(it->second, 1u);
  }
  std::uint32_t max_order() const {
    std::uint32_t m = default_order;
    for (const auto& [bus, g] : bus_orders) m = std::max(m, g);
    return m;
  }
};

struct PenaltyConfig {
  double epsilon_b = 0;  // $/MVAr on reactive generation
};

// Bookkeeping the extraction step needs to interpret a solution.
struct RelaxationInfo {
  VariableMap vmap;
  std::vector<std::vector<int>> clique_buses;  // bus positions, sorted
  std::vector<std::vector<VarId>> clique_vars;
  std::vector<std::uint32_t> clique_orders;
  std::vector<CliqueTreeEdge> tree;
};

struct BuiltRelaxation {
  ConicProgram program;
  RelaxationInfo info;
};

// Assembles the clique-decomposed moment relaxation: one moment block
// per clique at its effective order (max over member buses), localizing
// blocks / scalar rows for every constraint assigned to its smallest
// covering clique, Schur-complement blocks for quadratic costs and
// apparent-flow limits at first-order buses, exact dispatch variables
// for multi-unit linear-cost buses, the y_0 = 1 pin, and the penalized
// objective.  Throws when a constraint's support cannot be covered at
// the required order (build cliques from coupling_graph()).
BuiltRelaxation build_relaxation(const NetworkCase& nc, const CliqueSet& cliques,
                                 const OrderAssignment& orders, const PenaltyConfig& penalty);

// Single clique over every bus: the dense relaxation.
CliqueSet single_clique(const NetworkCase& nc);

// The groups a coupling graph must contain for this order assignment:
// the closed neighborhood (constraint support) of every bus above
// first order.
std::vector<std::vector<int>> escalated_groups(const NetworkCase& nc,
                                               const OrderAssignment& orders);

// Network graph over bus positions (in-service branches).
Graph network_graph(const NetworkCase& nc);

// Penalized objective as a pure moment form over interned moments:
// L{sum_k f_Ck} + epsilon_b * base * sum_{gen buses} L{f_Qk}.  Only
// valid when no bus needs an epigraph or dispatch variable.
AffineForm penalized_objective(const NetworkCase& nc, double epsilon_b, MomentRegistry& reg);

}  // namespace mopf
