#include "momentopf/extraction.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <set>
#include <sstream>

#include "momentopf/matpower.hpp"
#include "momentopf/opf_polynomials.hpp"

namespace mopf {

std::vector<Eigen::MatrixXd> second_order_blocks(const MomentVector& y,
                                                 const RelaxationInfo& info) {
  std::vector<Eigen::MatrixXd> blocks;
  blocks.reserve(info.clique_vars.size());
  for (const std::vector<VarId>& vars : info.clique_vars) {
    const auto m = static_cast<Eigen::Index>(vars.size());
    Eigen::MatrixXd W(m, m);
    for (Eigen::Index i = 0; i < m; ++i) {
      for (Eigen::Index j = i; j < m; ++j) {
        const Exponent e = Exponent::variable(vars[i]) + Exponent::variable(vars[j]);
        const auto v = y.get(e);
        if (!v) throw MissingMomentError(e, "second_order_blocks: missing degree-2 moment");
        W(i, j) = *v;
        W(j, i) = *v;
      }
    }
    blocks.push_back(std::move(W));
  }
  return blocks;
}

RankCheckResult rank_check(const std::vector<Eigen::MatrixXd>& blocks, double threshold) {
  RankCheckResult out;
  out.holds = true;
  for (std::size_t b = 0; b < blocks.size(); ++b) {
    const Eigen::MatrixXd& W = blocks[b];
    if (W.rows() <= 1) {
      out.ratios.push_back(std::numeric_limits<double>::infinity());
      continue;
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(W, Eigen::EigenvaluesOnly);
    const auto& ev = es.eigenvalues();  // ascending
    const double l1 = ev(ev.size() - 1);
    const double l2 = ev(ev.size() - 2);
    double ratio;
    if (l1 <= 0) {
      ratio = 0;  // degenerate block; cannot be rank one
    } else {
      // A tiny or slightly negative second eigenvalue means numerically
      // exact rank one; clamp the denominator to keep the ratio finite.
      const double floor_l2 = std::max(l2, l1 * 1e-16);
      ratio = l1 / floor_l2;
    }
    out.ratios.push_back(ratio);
    if (!(ratio > threshold)) {
      out.holds = false;
      out.failing.push_back(b);
    }
  }
  return out;
}

namespace {

struct StitchedVector {
  std::vector<double> u;  // indexed by VarId, unassigned slots zero
  std::vector<bool> assigned;
  double worst_residual = 0;
};

StitchedVector stitch_cliques(const MomentVector& y, const RelaxationInfo& info,
                              double stitch_tol, bool enforce) {
  const std::size_t nv = info.vmap.num_vars();
  StitchedVector out;
  out.u.assign(nv, 0.0);
  out.assigned.assign(nv, false);

  const std::vector<Eigen::MatrixXd> blocks = second_order_blocks(y, info);
  std::vector<Eigen::VectorXd> piece(blocks.size());
  for (std::size_t c = 0; c < blocks.size(); ++c) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(blocks[c]);
    const Eigen::Index last = es.eigenvalues().size() - 1;
    const double l1 = std::max(es.eigenvalues()(last), 0.0);
    piece[c] = std::sqrt(l1) * es.eigenvectors().col(last);
  }

  // Traverse the clique tree from a root containing the reference bus.
  const std::size_t m = info.clique_vars.size();
  std::vector<std::vector<std::size_t>> adj(m);
  for (const CliqueTreeEdge& e : info.tree) {
    adj[e.a].push_back(e.b);
    adj[e.b].push_back(e.a);
  }
  std::size_t root = 0;
  for (std::size_t c = 0; c < m; ++c) {
    if (std::binary_search(info.clique_buses[c].begin(), info.clique_buses[c].end(),
                           static_cast<int>(info.vmap.ref_index))) {
      root = c;
      break;
    }
  }

  std::vector<bool> visited(m, false);
  std::vector<std::size_t> queue;
  // Components of the clique tree beyond the root's are traversed too
  // (single-clique sets have no tree edges).
  std::vector<std::size_t> starts{root};
  for (std::size_t c = 0; c < m; ++c)
    if (c != root) starts.push_back(c);

  for (std::size_t s : starts) {
    if (visited[s]) continue;
    queue.push_back(s);
    visited[s] = true;
    while (!queue.empty()) {
      const std::size_t c = queue.back();
      queue.pop_back();
      const std::vector<VarId>& vars = info.clique_vars[c];
      Eigen::VectorXd& u = piece[c];

      double dot = 0, overlap_norm = 0;
      for (std::size_t i = 0; i < vars.size(); ++i) {
        if (out.assigned[vars[i]]) {
          dot += out.u[vars[i]] * u(static_cast<Eigen::Index>(i));
          overlap_norm = std::max(overlap_norm, std::abs(out.u[vars[i]]));
        }
      }
      if (dot < 0) u = -u;
      double residual = 0;
      for (std::size_t i = 0; i < vars.size(); ++i) {
        if (out.assigned[vars[i]])
          residual = std::max(residual,
                              std::abs(out.u[vars[i]] - u(static_cast<Eigen::Index>(i))));
      }
      out.worst_residual = std::max(out.worst_residual, residual);
      if (enforce && residual > stitch_tol * std::max(1.0, overlap_norm))
        throw StitchingError("extract_voltage: clique overlap disagrees by " +
                             std::to_string(residual) +
                             " (clique " + std::to_string(c) + "); the moment matrix is not "
                             "numerically rank one across separators");
      for (std::size_t i = 0; i < vars.size(); ++i) {
        if (!out.assigned[vars[i]]) {
          out.u[vars[i]] = u(static_cast<Eigen::Index>(i));
          out.assigned[vars[i]] = true;
        }
      }
      for (std::size_t nb : adj[c]) {
        if (!visited[nb]) {
          visited[nb] = true;
          queue.push_back(nb);
        }
      }
    }
  }

  // Global sign: the reference bus direct component is nonnegative.
  if (out.u[info.vmap.vd(info.vmap.ref_index)] < 0)
    for (double& v : out.u) v = -v;
  return out;
}

VoltageSolution voltage_from_vector(const std::vector<double>& u, const VariableMap& vm) {
  VoltageSolution v;
  v.V_d.resize(vm.num_buses);
  v.V_q.resize(vm.num_buses);
  for (std::size_t b = 0; b < vm.num_buses; ++b) {
    v.V_d[b] = u[vm.vd(b)];
    v.V_q[b] = b == vm.ref_index ? 0.0 : u[vm.vq(b)];
  }
  return v;
}

}  // namespace

ExtractionResult extract_voltage(const MomentVector& y, const RelaxationInfo& info,
                                 const NetworkCase& nc, double stitch_tol) {
  (void)nc;
  const StitchedVector sv = stitch_cliques(y, info, stitch_tol, /*enforce=*/true);
  ExtractionResult out;
  double norm2 = 0;
  for (double v : sv.u) norm2 += v * v;
  out.lambda = norm2;
  out.mu = sv.u;
  const double norm = std::sqrt(norm2);
  if (norm > 0)
    for (double& v : out.mu) v /= norm;
  out.voltage = voltage_from_vector(sv.u, info.vmap);

  const std::vector<Eigen::MatrixXd> blocks = second_order_blocks(y, info);
  out.block_ratios = rank_check(blocks).ratios;
  return out;
}

double MismatchReport::max_MVA() const {
  double m = 0;
  for (double v : S_mis_MVA) m = std::max(m, v);
  return m;
}

std::size_t MismatchReport::argmax() const {
  return std::distance(S_mis_MVA.begin(), std::max_element(S_mis_MVA.begin(), S_mis_MVA.end()));
}

MismatchReport power_injection_mismatch(const MomentVector& y, const RelaxationInfo& info,
                                        const NetworkCase& nc) {
  const StitchedVector sv =
      stitch_cliques(y, info, std::numeric_limits<double>::infinity(), /*enforce=*/false);
  MismatchReport rep;
  rep.rank_one_voltage = voltage_from_vector(sv.u, info.vmap);

  const std::vector<BusInjection> inj = evaluate_injections(nc, rep.rank_one_voltage);
  rep.S_mis_MVA.resize(nc.buses.size());
  for (std::size_t k = 0; k < nc.buses.size(); ++k) {
    const double p_mom = apply_Ly(active_injection_polynomial(nc, k), y) * nc.base_mva;
    const double q_mom = apply_Ly(reactive_injection_polynomial(nc, k), y) * nc.base_mva;
    rep.S_mis_MVA[k] = std::hypot(inj[k].P_G - p_mom, inj[k].Q_G - q_mom);
  }
  return rep;
}

std::vector<int> select_upgrade_buses(const MismatchReport& report, const NetworkCase& nc,
                                      double tol_MVA, const OrderAssignment& orders,
                                      std::uint32_t gamma_max) {
  struct Cand {
    double mis;
    int bus_id;
  };
  std::vector<Cand> cands;
  for (std::size_t k = 0; k < report.S_mis_MVA.size(); ++k) {
    if (report.S_mis_MVA[k] < tol_MVA) continue;
    const int bus_id = nc.buses[k].id;
    if (orders.order_of(bus_id) >= gamma_max) continue;  // capped; pick the next one
    cands.push_back({report.S_mis_MVA[k], bus_id});
  }
  std::sort(cands.begin(), cands.end(), [](const Cand& a, const Cand& b) {
    if (a.mis != b.mis) return a.mis > b.mis;
    return a.bus_id < b.bus_id;
  });
  std::vector<int> out;
  for (std::size_t i = 0; i < cands.size() && i < 2; ++i) out.push_back(cands[i].bus_id);
  return out;
}

bool FeasibilityReport::pass(const FeasibilityTolerance& tol) const {
  return max_P_violation_MW <= tol.power_MVA && max_Q_violation_MVAr <= tol.power_MVA &&
         max_V_violation_pu <= tol.voltage_pu && max_S_violation_MVA <= tol.flow_MVA &&
         std::abs(ref_angle_rad) <= tol.angle_rad;
}

std::string FeasibilityReport::summary() const {
  std::ostringstream os;
  os << "violations: P " << max_P_violation_MW << " MW, Q " << max_Q_violation_MVAr
     << " MVAr, V " << max_V_violation_pu << " pu, S " << max_S_violation_MVA
     << " MVA; worst " << (worst_constraint.empty() ? "none" : worst_constraint);
  return os.str();
}

FeasibilityReport check_feasibility(const NetworkCase& nc, const VoltageSolution& v) {
  FeasibilityReport rep;
  const std::vector<BusGeneration> gen = aggregate_generators(nc);
  const std::vector<BusInjection> inj = evaluate_injections(nc, v);
  double worst = 0;
  auto consider = [&](double violation, const std::string& name) {
    if (violation > worst) {
      worst = violation;
      rep.worst_constraint = name;
    }
  };

  for (std::size_t k = 0; k < nc.buses.size(); ++k) {
    const std::string bus = "bus" + std::to_string(nc.buses[k].id);
    const double pv =
        std::max({0.0, gen[k].P_min - inj[k].P_G, inj[k].P_G - gen[k].P_max});
    const double qv =
        std::max({0.0, gen[k].Q_min - inj[k].Q_G, inj[k].Q_G - gen[k].Q_max});
    rep.max_P_violation_MW = std::max(rep.max_P_violation_MW, pv);
    rep.max_Q_violation_MVAr = std::max(rep.max_Q_violation_MVAr, qv);
    consider(pv, "P:" + bus);
    consider(qv, "Q:" + bus);
    const double vm = v.magnitude(k);
    const double vv = std::max({0.0, nc.buses[k].V_min - vm, vm - nc.buses[k].V_max});
    rep.max_V_violation_pu = std::max(rep.max_V_violation_pu, vv);
    consider(vv, "V:" + bus);
  }
  const std::vector<BranchFlow> flows = evaluate_line_flows(nc, v);
  for (std::size_t i = 0; i < nc.branches.size(); ++i) {
    const BranchRecord& br = nc.branches[i];
    if (!br.in_service || br.S_max <= 0) continue;
    const double sv = std::max({0.0, flows[i].S_lm - br.S_max, flows[i].S_ml - br.S_max});
    rep.max_S_violation_MVA = std::max(rep.max_S_violation_MVA, sv);
    consider(sv, "S:branch" + std::to_string(i));
  }
  rep.ref_angle_rad = v.angle(nc.reference_index());
  return rep;
}

double optimality_gap(double lower_bound, double feasible_objective, double tol_rel) {
  if (!std::isfinite(lower_bound) || !std::isfinite(feasible_objective))
    throw std::invalid_argument("optimality_gap: non-finite inputs");
  const double scale = std::max(1.0, std::abs(feasible_objective));
  if (lower_bound > feasible_objective + tol_rel * scale)
    throw std::invalid_argument("optimality_gap: lower bound " + std::to_string(lower_bound) +
                                " exceeds feasible objective " +
                                std::to_string(feasible_objective));
  if (feasible_objective == 0) return 0;
  return std::max(0.0, 100.0 * (feasible_objective - lower_bound) /
                           std::abs(feasible_objective));
}

namespace {

std::string orders_string(const OrderAssignment& orders, const NetworkCase& nc) {
  std::ostringstream os;
  bool first = true;
  for (const BusRecord& b : nc.buses) {
    const std::uint32_t g = orders.order_of(b.id);
    if (g <= 1) continue;
    os << (first ? "" : " ") << b.id << ":" << g;
    first = false;
  }
  return first ? "all:1" : os.str();
}

}  // namespace

OPFResult iterative_solve(const NetworkCase& full_case, const SolveOptions& opts) {
  auto log = [&](const std::string& msg) {
    if (opts.log) opts.log(msg);
  };
  const auto t_start = std::chrono::steady_clock::now();

  OPFResult res;
  res.reduced = group_low_impedance(full_case, {opts.thrshz});
  const NetworkCase& nc = res.reduced.network;
  {
    std::ostringstream os;
    os << "preprocessing: " << full_case.buses.size() << " -> " << nc.buses.size() << " buses ("
       << res.reduced.map.eliminated.size() << " branches eliminated, thrshz = " << opts.thrshz
       << ")";
    log(os.str());
    res.metadata["buses_full"] = std::to_string(full_case.buses.size());
    res.metadata["buses_reduced"] = std::to_string(nc.buses.size());
    res.metadata["branches_eliminated"] = std::to_string(res.reduced.map.eliminated.size());
  }

  OrderAssignment orders;
  res.lower_bound = std::numeric_limits<double>::quiet_NaN();
  res.status = "bound_only";

  // A reactive penalty perturbs the objective, so the certified lower
  // bound comes from a dedicated unpenalized first-order solve.
  if (opts.epsilon_b != 0) {
    log("lower bound: unpenalized first-order relaxation");
    const Graph graph = network_graph(nc);
    const CliqueSet cs =
        merge_cliques(maximal_cliques(chordal_extension(graph)), {opts.clique_merge_threshold});
    BuiltRelaxation built = build_relaxation(nc, cs, orders, {0.0});
    ConicSolution sol = solve(built.program, opts.solver);
    res.metadata["lower_bound_seconds"] = std::to_string(sol.solve_time_sec);
    res.metadata["lower_bound_solver_status"] = sol.solver_status;
    if (sol.status == SolveStatus::infeasible) {
      res.status = "infeasible";
      res.metadata["solver"] = sol.solver_id;
      return res;
    }
    if (sol.status == SolveStatus::optimal) res.lower_bound = sol.objective;
  }

  std::optional<ExtractionResult> extraction;
  std::vector<int> pending_upgrade;
  std::string solver_id;

  for (std::uint32_t iter = 1; iter <= opts.max_iter; ++iter) {
    const std::vector<std::vector<int>> groups = escalated_groups(nc, orders);
    const Graph base = network_graph(nc);
    const Graph graph = coupling_graph(nc.buses.size(), base.edges, groups);
    const CliqueSet cs =
        merge_cliques(maximal_cliques(chordal_extension(graph)), {opts.clique_merge_threshold});
    BuiltRelaxation built = build_relaxation(nc, cs, orders, {opts.epsilon_b});

    {
      std::size_t max_clique = 0;
      for (const auto& c : cs.cliques) max_clique = std::max(max_clique, c.size());
      std::ostringstream os;
      os << "iteration " << iter << ": orders {" << orders_string(orders, nc) << "}, "
         << cs.cliques.size() << " cliques (max " << max_clique << "), "
         << built.program.variables.size() << " variables, " << built.program.psd_blocks.size()
         << " PSD blocks";
      log(os.str());
    }

    SolverSettings iter_solver = opts.solver;
    if (std::isfinite(res.lower_bound)) iter_solver.known_lower_bound = res.lower_bound;
    ConicSolution sol = solve(built.program, iter_solver);
    solver_id = sol.solver_id;

    if (sol.status == SolveStatus::infeasible) {
      res.status = "infeasible";
      log("relaxation infeasible: the OPF constraint set is empty");
      break;
    }
    if (sol.status == SolveStatus::unbounded ||
        sol.status == SolveStatus::numerical_failure) {
      res.status = "solver_failure";
      res.metadata["solver_failure"] = sol.solver_status;
      log("solver failure: " + sol.solver_status);
      break;
    }

    const MomentVector y = moments_from_solution(built.program, sol.x);
    const std::vector<Eigen::MatrixXd> W = second_order_blocks(y, built.info);
    const RankCheckResult rank = rank_check(W, opts.rank_ratio_threshold);
    const MismatchReport mis = power_injection_mismatch(y, built.info, nc);

    IterationRecord rec;
    rec.iteration = static_cast<int>(iter);
    rec.upgraded_buses = pending_upgrade;
    rec.objective = sol.objective;
    rec.max_mismatch_MVA = mis.max_MVA();
    rec.min_eigenvalue_ratio =
        rank.ratios.empty() ? 0 : *std::min_element(rank.ratios.begin(), rank.ratios.end());
    rec.solver_seconds = sol.solve_time_sec;
    rec.orders = orders_string(orders, nc);
    res.iterations.push_back(rec);
    res.final_ratios = rank.ratios;
    std::sort(res.final_ratios.begin(), res.final_ratios.end());
    res.final_mismatch_MVA = mis.S_mis_MVA;

    {
      std::ostringstream os;
      os << "  objective " << sol.objective << ", max mismatch " << rec.max_mismatch_MVA
         << " MVA, min ratio " << rec.min_eigenvalue_ratio << ", " << sol.solve_time_sec << " s ("
         << to_string(sol.status) << ")";
      log(os.str());
    }

    // Only a converged solve yields a trustworthy bound, and escalation can
    // only tighten it; never let an inexact later iteration lower it.
    if (opts.epsilon_b == 0 && sol.status == SolveStatus::optimal)
      res.lower_bound = std::isfinite(res.lower_bound) ? std::max(res.lower_bound, sol.objective)
                                                       : sol.objective;

    if (rank.holds) {
      extraction = extract_voltage(y, built.info, nc);
      res.certified = opts.epsilon_b == 0;
      res.status = res.certified ? "global" : "feasible";
      log(res.certified ? "  rank condition satisfied: certified global optimum"
                        : "  rank condition satisfied (penalized run)");
      break;
    }
    if (rec.max_mismatch_MVA < opts.mismatch_tol_MVA) {
      ExtractionResult er;
      er.voltage = mis.rank_one_voltage;
      er.block_ratios = rank.ratios;
      extraction = std::move(er);
      res.status = "feasible";
      log("  mismatch below tolerance: accepting the closest rank-one profile");
      break;
    }

    pending_upgrade =
        select_upgrade_buses(mis, nc, opts.mismatch_tol_MVA, orders, opts.gamma_max);
    if (pending_upgrade.empty()) {
      res.status = "bound_only";
      log("  no escalatable bus below gamma_max remains; stopping with the bound");
      break;
    }
    for (int bus : pending_upgrade) {
      const std::uint32_t g = orders.order_of(bus);
      orders.bus_orders[bus] = g + 1;
      std::ostringstream os;
      os << "  escalating bus " << bus << " to order " << g + 1;
      log(os.str());
    }
  }

  if (extraction) {
    res.voltage_reduced = extraction->voltage;
    res.feasibility = check_feasibility(nc, res.voltage_reduced);
    FeasibilityTolerance tol;
    tol.power_MVA = opts.mismatch_tol_MVA;
    tol.flow_MVA = opts.mismatch_tol_MVA;
    res.feasible_found = res.feasibility.pass(tol);
    res.feasible_objective = dispatch_cost(nc, res.voltage_reduced);
    if (!res.feasible_found) {
      res.status = "bound_only";
      res.certified = false;
      res.metadata["extraction_rejected"] = res.feasibility.summary();
      log("  extracted point rejected: " + res.feasibility.summary());
    } else {
      const RecoveredSolution rec =
          recover_full_solution(res.voltage_reduced, res.reduced.map, full_case);
      res.voltage_full = rec.voltage;
      res.intra_flows = rec.intra_flows;
      if (std::isfinite(res.lower_bound)) {
        // A profile accepted under the mismatch tolerance is only almost
        // balanced, so its dispatch may undercut the bound by what the
        // missing power would have cost; price that in before comparing.
        double price = 0;
        for (const GeneratorRecord& g : full_case.generators)
          price = std::max(price, g.cost.c1 + 2.0 * g.cost.c2 * g.P_max);
        const double slack = res.final_mismatch_MVA.empty()
                                 ? 0
                                 : price * *std::max_element(res.final_mismatch_MVA.begin(),
                                                             res.final_mismatch_MVA.end());
        const double scale = std::max(1.0, std::abs(res.feasible_objective));
        res.gap_percent = optimality_gap(res.lower_bound, res.feasible_objective,
                                         std::max(1e-6, slack / scale));
      }
      std::ostringstream os;
      os << "result: " << res.status << ", objective " << res.feasible_objective
         << " $/h, lower bound " << res.lower_bound << " $/h, gap " << res.gap_percent << "%";
      log(os.str());
    }
  }

  res.metadata["solver"] = solver_id;
  {
    // A uniform linear tariff minimizes total generation = load + losses.
    bool loss_min = !full_case.generators.empty();
    for (const GeneratorRecord& g : full_case.generators)
      loss_min = loss_min && g.cost.c2 == 0 && g.cost.c0 == 0 && g.cost.c1 > 0 &&
                 g.cost.c1 == full_case.generators.front().cost.c1;
    res.metadata["objective_kind"] = loss_min ? "loss_min" : "cost_min";
  }
  res.metadata["case"] = full_case.name.empty() ? "unnamed" : full_case.name;
  res.metadata["epsilon_b"] = std::to_string(opts.epsilon_b);
  res.metadata["thrshz"] = std::to_string(opts.thrshz);
  res.metadata["iterations"] = std::to_string(res.iterations.size());
  if (!res.reduced.map.notes.empty()) {
    std::ostringstream os;
    for (std::size_t i = 0; i < res.reduced.map.notes.size(); ++i)
      os << (i ? "; " : "") << res.reduced.map.notes[i];
    res.metadata["reduction_notes"] = os.str();
  }
  const auto t_end = std::chrono::steady_clock::now();
  res.metadata["total_seconds"] =
      std::to_string(std::chrono::duration<double>(t_end - t_start).count());
  double solver_total = 0;
  for (const IterationRecord& r : res.iterations) solver_total += r.solver_seconds;
  res.metadata["solver_seconds"] = std::to_string(solver_total);
  return res;
}

}  // namespace mopf
