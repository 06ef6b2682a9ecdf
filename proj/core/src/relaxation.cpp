#include "momentopf/relaxation.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>
#include <stdexcept>

namespace mopf {

namespace {

std::string bound_tag(bool lower) { return lower ? "min" : "max"; }

std::string constraint_label(const ConstraintPolynomial& c, bool lower) {
  std::ostringstream os;
  switch (c.kind) {
    case ConstraintKind::active_injection:
      os << "P:bus" << c.bus_id;
      break;
    case ConstraintKind::reactive_injection:
      os << "Q:bus" << c.bus_id;
      break;
    case ConstraintKind::voltage_magnitude:
      os << "V:bus" << c.bus_id;
      break;
    case ConstraintKind::apparent_flow:
      os << "S:branch" << c.branch_index << (c.from_side ? ":lm" : ":ml");
      break;
  }
  if (c.kind != ConstraintKind::apparent_flow) os << ":" << bound_tag(lower);
  return os.str();
}

// L{g * x_i * x_j} as an affine form over interned moments.
AffineForm shifted_form(const Polynomial& g, const Exponent& xi, const Exponent& xj,
                        MomentRegistry& reg) {
  AffineForm f;
  const Exponent shift = xi + xj;
  for (const auto& [alpha, coef] : g.terms()) f.add(reg.intern_moment(alpha + shift), coef);
  return f;
}

}  // namespace

CliqueSet single_clique(const NetworkCase& nc) {
  CliqueSet cs;
  std::vector<int> all(nc.buses.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = static_cast<int>(i);
  cs.cliques.push_back(std::move(all));
  return cs;
}

Graph network_graph(const NetworkCase& nc) {
  std::vector<std::pair<int, int>> edges;
  edges.reserve(nc.branches.size());
  for (const BranchRecord& br : nc.branches) {
    if (!br.in_service) continue;
    edges.emplace_back(static_cast<int>(nc.bus_index(br.from_bus)),
                       static_cast<int>(nc.bus_index(br.to_bus)));
  }
  return Graph(nc.buses.size(), std::move(edges));
}

std::vector<std::vector<int>> escalated_groups(const NetworkCase& nc,
                                               const OrderAssignment& orders) {
  const VariableMap vm{nc.buses.size(), nc.reference_index()};
  std::vector<std::vector<int>> groups;
  for (std::size_t k = 0; k < nc.buses.size(); ++k) {
    if (orders.order_of(nc.buses[k].id) < 2) continue;
    Polynomial f = active_injection_polynomial(nc, k);
    f += reactive_injection_polynomial(nc, k);
    std::vector<int> grp;
    for (VarId v : f.support())
      grp.push_back(static_cast<int>(v < vm.num_buses ? v : v - vm.num_buses));
    grp.push_back(static_cast<int>(k));
    std::sort(grp.begin(), grp.end());
    grp.erase(std::unique(grp.begin(), grp.end()), grp.end());
    groups.push_back(std::move(grp));
  }
  return groups;
}

AffineForm penalized_objective(const NetworkCase& nc, double epsilon_b, MomentRegistry& reg) {
  const std::vector<BusGeneration> gen = aggregate_generators(nc);
  AffineForm obj;
  for (std::size_t k = 0; k < nc.buses.size(); ++k) {
    if (!gen[k].has_generator) continue;
    if (!gen[k].dispatch.empty())
      throw std::invalid_argument("penalized_objective: bus uses dispatch variables");
    obj.add(linear_form(cost_polynomial(nc, gen[k], k), reg));
    if (epsilon_b != 0)
      obj.add(linear_form(reactive_injection_polynomial(nc, k), reg), epsilon_b * nc.base_mva);
  }
  return obj;
}

BuiltRelaxation build_relaxation(const NetworkCase& nc, const CliqueSet& cliques,
                                 const OrderAssignment& orders, const PenaltyConfig& penalty) {
  validate(nc);
  BuiltRelaxation out;
  ConicProgram& prog = out.program;
  RelaxationInfo& info = out.info;
  MomentRegistry reg;

  const std::size_t n = nc.buses.size();
  info.vmap = VariableMap{n, nc.reference_index()};
  info.tree = cliques.tree;
  const VariableMap& vm = info.vmap;
  const std::vector<BusGeneration> gen = aggregate_generators(nc);

  // Clique bookkeeping: vars and effective order per clique.
  for (const std::vector<int>& c : cliques.cliques) {
    std::vector<int> sorted = c;
    std::sort(sorted.begin(), sorted.end());
    std::uint32_t g = 1;
    for (int b : sorted) g = std::max(g, orders.order_of(nc.buses[b].id));
    info.clique_buses.push_back(sorted);
    info.clique_vars.push_back(vm.bus_vars(sorted));
    info.clique_orders.push_back(g);
  }

  // Moment block per clique at its effective order.
  std::vector<std::vector<Exponent>> clique_basis(info.clique_buses.size());
  for (std::size_t c = 0; c < info.clique_buses.size(); ++c) {
    clique_basis[c] = monomial_basis(info.clique_vars[c], info.clique_orders[c]);
    PsdBlockDesc block;
    block.label = "moment:c" + std::to_string(c);
    block.dim = static_cast<std::uint32_t>(clique_basis[c].size());
    for (std::uint32_t i = 0; i < block.dim; ++i) {
      for (std::uint32_t j = i; j < block.dim; ++j) {
        PsdEntry e;
        e.row = i;
        e.col = j;
        e.value.add(reg.intern_moment(clique_basis[c][i] + clique_basis[c][j]), 1.0);
        block.entries.push_back(std::move(e));
      }
    }
    prog.psd_blocks.push_back(std::move(block));
  }

  // Assigns a constraint to the smallest covering clique whose order is
  // sufficient; returns clique index or throws.
  auto assign_clique = [&](const ConstraintPolynomial& c, std::uint32_t needed) -> std::size_t {
    std::size_t best = SIZE_MAX;
    for (std::size_t ci = 0; ci < info.clique_buses.size(); ++ci) {
      if (info.clique_orders[ci] < needed) continue;
      const auto& cb = info.clique_buses[ci];
      if (!std::includes(cb.begin(), cb.end(), c.support_buses.begin(), c.support_buses.end()))
        continue;
      if (best == SIZE_MAX || cb.size() < info.clique_buses[best].size()) best = ci;
    }
    if (best == SIZE_MAX)
      throw std::logic_error("build_relaxation: no clique covers constraint '" +
                             constraint_label(c, true) +
                             "' at order " + std::to_string(needed) +
                             "; build cliques from the coupling graph");
    return best;
  };

  // Equality constraints localized at d >= 1 are emitted after the main
  // loop so implied rows between interacting pairs can be dropped.
  struct EqLocalized {
    Polynomial g;  // f - a, == 0
    std::size_t clique;
    std::uint32_t d;
    std::string label;
    std::set<Exponent, GradedLexLess> dropped;
  };
  std::vector<EqLocalized> eq_localized;

  // Constraint rows / localizing blocks.
  const std::vector<ConstraintPolynomial> constraints = constraint_polynomials(nc);
  for (const ConstraintPolynomial& c : constraints) {
    std::uint32_t gamma_k;
    if (c.kind == ConstraintKind::apparent_flow) {
      const BranchRecord& br = nc.branches[c.branch_index];
      gamma_k = std::max(orders.order_of(br.from_bus), orders.order_of(br.to_bus));
      if (gamma_k < 2) continue;  // handled by a Schur block below
    } else {
      gamma_k = orders.order_of(c.bus_id);
    }
    const std::uint32_t d = gamma_k - c.half_degree;  // localizing order

    if (d == 0) {
      // Scalar rows; an exact pin collapses to one equality.
      if (c.lower && c.upper && *c.lower == *c.upper) {
        Polynomial g = c.f;
        g.add_term(Exponent{}, -*c.lower);
        prog.equalities.push_back({linear_form(g, reg), constraint_label(c, true) + ":eq"});
        continue;
      }
      if (c.lower) {
        Polynomial g = c.f;
        g.add_term(Exponent{}, -*c.lower);
        prog.inequalities.push_back({linear_form(g, reg), constraint_label(c, true)});
      }
      if (c.upper) {
        Polynomial g = -c.f;
        g.add_term(Exponent{}, *c.upper);
        prog.inequalities.push_back({linear_form(g, reg), constraint_label(c, false)});
      }
      continue;
    }

    const std::size_t ci = assign_clique(c, gamma_k);
    const std::vector<Exponent> basis = monomial_basis(info.clique_vars[ci], d);
    if (c.lower && c.upper && *c.lower == *c.upper) {
      // An exact pin: two opposing PSD localizing blocks would force a
      // PSD matrix to vanish (no interior), so enforce every entry of
      // L{(f-a) x_d x_d'} = 0 as equality rows instead (deferred).
      Polynomial g = c.f;
      g.add_term(Exponent{}, -*c.lower);
      eq_localized.push_back({std::move(g), ci, d,
                              "loc:" + constraint_label(c, true) + ":eq:c" + std::to_string(ci),
                              {}});
      continue;
    }
    auto emit_block = [&](const Polynomial& g, const std::string& label) {
      PsdBlockDesc block;
      block.label = label + ":c" + std::to_string(ci);
      block.dim = static_cast<std::uint32_t>(basis.size());
      for (std::uint32_t i = 0; i < block.dim; ++i) {
        for (std::uint32_t j = i; j < block.dim; ++j) {
          AffineForm f = shifted_form(g, basis[i], basis[j], reg);
          if (f.terms.empty() && f.constant == 0) continue;
          block.entries.push_back({i, j, std::move(f)});
        }
      }
      prog.psd_blocks.push_back(std::move(block));
    };
    if (c.lower) {
      Polynomial g = c.f;
      g.add_term(Exponent{}, -*c.lower);
      emit_block(g, "loc:" + constraint_label(c, true));
    }
    if (c.upper) {
      Polynomial g = -c.f;
      g.add_term(Exponent{}, *c.upper);
      emit_block(g, "loc:" + constraint_label(c, false));
    }
  }

  // Entrywise equality localization enforces L{g m} = 0 over the unique
  // shift monomials m with deg(m) <= 2d (pairwise products of the basis
  // repeat shifts, which would duplicate rows).  Interacting pairs
  // (g_i, g_j) obey one intrinsic relation, sum_m (g_i)_m L{g_j m} =
  // L{g_i g_j} = sum_m (g_j)_m L{g_i m}; conic solvers without a
  // presolve reject the dependent row, so drop one implied row per pair.
  for (std::size_t j = 0; j < eq_localized.size(); ++j) {
    for (std::size_t i = 0; i < j; ++i) {
      EqLocalized& a = eq_localized[i];
      EqLocalized& b = eq_localized[j];
      auto fits = [&](const Polynomial& f, const EqLocalized& host) {
        if (f.degree() > 2 * host.d) return false;
        const std::vector<VarId>& cv = info.clique_vars[host.clique];
        for (const auto& [alpha, coef] : f.terms())
          for (const auto& [v, p] : alpha.entries())
            if (!std::binary_search(cv.begin(), cv.end(), v)) return false;
        return true;
      };
      if (!fits(a.g, b) || !fits(b.g, a)) continue;
      auto drop_from = [](EqLocalized& host, const Polynomial& other) {
        // graded-lex-largest not yet dropped
        for (auto it = other.terms().rbegin(); it != other.terms().rend(); ++it)
          if (host.dropped.insert(it->first).second) return true;
        return false;
      };
      if (!drop_from(b, a.g)) drop_from(a, b.g);
    }
  }
  for (const EqLocalized& e : eq_localized) {
    for (const Exponent& m : monomial_basis(info.clique_vars[e.clique], 2 * e.d)) {
      if (e.dropped.count(m)) continue;
      AffineForm f = shifted_form(e.g, m, Exponent{}, reg);
      if (f.terms.empty() && f.constant == 0) continue;
      prog.equalities.push_back({std::move(f), e.label});
    }
  }

  // Objective: generation cost (+ reactive penalty), with epigraph and
  // dispatch auxiliaries where the quartic cost is not representable.
  AffineForm obj;
  for (std::size_t k = 0; k < n; ++k) {
    const BusGeneration& bg = gen[k];
    if (!bg.has_generator) continue;
    const int bus_id = nc.buses[k].id;
    const std::uint32_t gamma_k = orders.order_of(bus_id);
    const AffineForm p_pu = linear_form(active_injection_polynomial(nc, k), reg);

    if (!bg.dispatch.empty()) {
      // Exact per-unit dispatch for multiple linear-cost units.
      AffineForm balance;  // sum p_u - L{f_Pk} == 0
      balance.add(p_pu, -1.0);
      for (std::size_t u = 0; u < bg.dispatch.size(); ++u) {
        const DispatchUnit& unit = bg.dispatch[u];
        const std::uint32_t pv = reg.add_dispatch(bus_id, static_cast<int>(u));
        balance.add(pv, 1.0);
        AffineForm lo, hi;
        lo.add(pv, 1.0);
        lo.constant = -unit.P_min / nc.base_mva;
        hi.add(pv, -1.0);
        hi.constant = unit.P_max / nc.base_mva;
        prog.inequalities.push_back(
            {std::move(lo), "dispatch:bus" + std::to_string(bus_id) + ":u" + std::to_string(u) + ":min"});
        prog.inequalities.push_back(
            {std::move(hi), "dispatch:bus" + std::to_string(bus_id) + ":u" + std::to_string(u) + ":max"});
        obj.add(pv, unit.c1 * nc.base_mva);
        obj.constant += unit.c0;
      }
      prog.equalities.push_back({std::move(balance), "dispatch:bus" + std::to_string(bus_id)});
    } else if (bg.cost.c2 > 0 && gamma_k < 2) {
      // Epigraph sigma*t >= c2 P^2 + c1 P + c0 as a 2x2 Schur block,
      // P = base * L{f_Pk} in MW.  The block is divided by sigma (a
      // congruence, so the same feasible set) to keep its entries near
      // the admittance scale instead of cost * admittance, which on
      // stiff cases pushes coefficients past 1e5 and stalls the
      // interior-point solver.
      const double base = nc.base_mva;
      const double sigma = std::max({1.0, bg.cost.c1 * base, std::sqrt(bg.cost.c2) * base});
      const std::uint32_t t = reg.add_epigraph(bus_id);
      PsdBlockDesc block;
      block.label = "schur:cost:bus" + std::to_string(bus_id);
      block.dim = 2;
      AffineForm e00;
      e00.add(t, 1.0);
      e00.add(p_pu, -bg.cost.c1 * base / sigma);
      e00.constant -= bg.cost.c0 / sigma;
      AffineForm e01;
      e01.add(p_pu, std::sqrt(bg.cost.c2) * base / std::sqrt(sigma));
      AffineForm e11;
      e11.constant = 1.0;
      block.entries.push_back({0, 0, std::move(e00)});
      block.entries.push_back({0, 1, std::move(e01)});
      block.entries.push_back({1, 1, std::move(e11)});
      prog.psd_blocks.push_back(std::move(block));
      obj.add(t, sigma);
    } else if (bg.cost.c2 > 0) {
      // Quartic cost is representable directly at this order.
      obj.add(linear_form(cost_polynomial(nc, bg, k), reg));
    } else {
      obj.add(p_pu, bg.cost.c1 * nc.base_mva);
      obj.constant += bg.cost.c0;
    }

    if (penalty.epsilon_b != 0) {
      obj.add(linear_form(reactive_injection_polynomial(nc, k), reg),
              penalty.epsilon_b * nc.base_mva);
    }
  }
  prog.objective = std::move(obj);

  // Apparent-flow limits at first-order branches: 3x3 Schur blocks
  //   [[smax^2, p, q], [p, 1, 0], [q, 0, 1]] >= 0  (per unit).
  for (std::size_t i = 0; i < nc.branches.size(); ++i) {
    const BranchRecord& br = nc.branches[i];
    if (!br.in_service || br.S_max <= 0) continue;
    if (std::max(orders.order_of(br.from_bus), orders.order_of(br.to_bus)) >= 2) continue;
    const BranchPolynomials bp = branch_flow_polynomials(nc, i);
    const double cap = br.S_max / nc.base_mva;
    for (bool from_side : {true, false}) {
      PsdBlockDesc block;
      block.label = "schur:S:branch" + std::to_string(i) + (from_side ? ":lm" : ":ml");
      block.dim = 3;
      AffineForm e00;
      e00.constant = cap * cap;
      block.entries.push_back({0, 0, std::move(e00)});
      block.entries.push_back({0, 1, linear_form(from_side ? bp.P_lm : bp.P_ml, reg)});
      block.entries.push_back({0, 2, linear_form(from_side ? bp.Q_lm : bp.Q_ml, reg)});
      AffineForm one;
      one.constant = 1.0;
      block.entries.push_back({1, 1, one});
      block.entries.push_back({2, 2, one});
      prog.psd_blocks.push_back(std::move(block));
    }
  }

  // Pin the zero-order moment.
  AffineForm y0;
  y0.add(reg.intern_moment(Exponent{}), 1.0);
  y0.constant = -1.0;
  prog.equalities.push_back({std::move(y0), "y0"});

  // Deterministic indexing: moments in graded-lex order, then auxiliaries.
  const std::vector<std::uint32_t> perm = reg.finalize();
  remap(prog, perm);
  prog.variables = reg.variables();

  // Every moment must be pinned down by some PSD block; anything less
  // means a constraint escaped its clique.
  {
    std::vector<bool> seen(prog.variables.size(), false);
    for (const PsdBlockDesc& b : prog.psd_blocks)
      for (const PsdEntry& e : b.entries)
        for (const LinearTerm& t : e.value.terms) seen[t.var] = true;
    for (std::size_t v = 0; v < prog.variables.size(); ++v) {
      if (prog.variables[v].kind == VariableKind::moment && !seen[v])
        throw std::logic_error("build_relaxation: moment variable " + std::to_string(v) +
                               " not covered by any moment block");
    }
  }

  prog.metadata["case"] = nc.name;
  prog.metadata["base_mva"] = std::to_string(nc.base_mva);
  prog.metadata["epsilon_b"] = std::to_string(penalty.epsilon_b);
  prog.metadata["num_buses"] = std::to_string(n);
  {
    std::ostringstream os;
    os << orders.default_order;
    for (const auto& [bus, g] : orders.bus_orders) os << ";" << bus << ":" << g;
    prog.metadata["orders"] = os.str();
  }
  return out;
}

}  // namespace mopf
