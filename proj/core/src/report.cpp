#include "momentopf/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <iomanip>
#include <sstream>

namespace mopf {

namespace {

constexpr double kRadToDeg = 180.0 / 3.14159265358979323846;

std::string num(double v, const char* fmt = "%.10g") {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  std::snprintf(buf, sizeof buf, fmt, v);
  return buf;
}

nlohmann::json voltage_json(const VoltageSolution& v, const std::vector<BusRecord>& buses) {
  nlohmann::json out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    out.push_back({{"bus", buses[i].id},
                   {"V_d", v.V_d[i]},
                   {"V_q", v.V_q[i]},
                   {"magnitude_pu", v.magnitude(i)},
                   {"angle_deg", v.angle(i) * kRadToDeg}});
  }
  return out;
}

}  // namespace

std::string fnv1a_hex(std::string_view bytes) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

nlohmann::json result_to_json(const OPFResult& res, const NetworkCase& full_case) {
  nlohmann::json j;
  j["format"] = "momentopf-result-1";
  j["status"] = res.status;
  j["feasible_found"] = res.feasible_found;
  j["certified"] = res.certified;
  j["objective"] =
      res.feasible_found ? nlohmann::json(res.feasible_objective) : nlohmann::json(nullptr);
  j["lower_bound"] =
      std::isfinite(res.lower_bound) ? nlohmann::json(res.lower_bound) : nlohmann::json(nullptr);
  j["gap_percent"] = res.feasible_found && std::isfinite(res.lower_bound)
                         ? nlohmann::json(res.gap_percent)
                         : nlohmann::json(nullptr);

  if (res.feasible_found) {
    j["voltage"] = voltage_json(res.voltage_full, full_case.buses);
    j["voltage_reduced"] = voltage_json(res.voltage_reduced, res.reduced.network.buses);
    nlohmann::json flows = nlohmann::json::array();
    for (const IntraGroupFlow& f : res.intra_flows)
      flows.push_back({{"from", f.from_bus}, {"to", f.to_bus}, {"P_MW", f.P_MW},
                       {"Q_MVAr", f.Q_MVAr}});
    j["intra_group_flows"] = flows;
    j["feasibility"] = {{"max_P_violation_MW", res.feasibility.max_P_violation_MW},
                        {"max_Q_violation_MVAr", res.feasibility.max_Q_violation_MVAr},
                        {"max_V_violation_pu", res.feasibility.max_V_violation_pu},
                        {"max_S_violation_MVA", res.feasibility.max_S_violation_MVA},
                        {"ref_angle_rad", res.feasibility.ref_angle_rad},
                        {"worst_constraint", res.feasibility.worst_constraint}};
  }

  nlohmann::json iters = nlohmann::json::array();
  for (const IterationRecord& r : res.iterations) {
    iters.push_back({{"iteration", r.iteration},
                     {"upgraded_buses", r.upgraded_buses},
                     {"objective", r.objective},
                     {"max_mismatch_MVA", r.max_mismatch_MVA},
                     {"min_eigenvalue_ratio", r.min_eigenvalue_ratio},
                     {"solver_seconds", r.solver_seconds},
                     {"orders", r.orders}});
  }
  j["iterations"] = iters;
  j["eigenvalue_ratios"] = res.final_ratios;
  j["mismatch_MVA"] = res.final_mismatch_MVA;

  j["reduction"] = {{"buses_full", full_case.buses.size()},
                    {"buses_reduced", res.reduced.network.buses.size()},
                    {"branches_eliminated", res.reduced.map.eliminated.size()},
                    {"thrshz", res.reduced.thrshz}};
  j["metadata"] = res.metadata;
  return j;
}

nlohmann::json without_timing(nlohmann::json j) {
  if (j.is_object()) {
    for (auto it = j.begin(); it != j.end();) {
      const std::string& key = it.key();
      if (key.find("seconds") != std::string::npos || key.find("time") != std::string::npos) {
        it = j.erase(it);
      } else {
        *it = without_timing(std::move(*it));
        ++it;
      }
    }
  } else if (j.is_array()) {
    for (auto& e : j) e = without_timing(std::move(e));
  }
  return j;
}

std::string iterations_csv(const std::vector<IterationRecord>& recs) {
  std::ostringstream os;
  os << "iteration,upgraded_buses,objective,max_mismatch_MVA,min_eigenvalue_ratio,"
        "solver_seconds\n";
  for (const IterationRecord& r : recs) {
    os << r.iteration << ",";
    for (std::size_t i = 0; i < r.upgraded_buses.size(); ++i)
      os << (i ? ";" : "") << r.upgraded_buses[i];
    os << "," << num(r.objective) << "," << num(r.max_mismatch_MVA) << ","
       << num(r.min_eigenvalue_ratio, "%.6g") << "," << num(r.solver_seconds, "%.6g") << "\n";
  }
  return os.str();
}

std::string ratios_csv(std::vector<double> ratios) {
  std::sort(ratios.begin(), ratios.end());
  std::ostringstream os;
  os << "block,ratio\n";
  for (std::size_t i = 0; i < ratios.size(); ++i)
    os << i << "," << num(ratios[i], "%.6g") << "\n";
  return os.str();
}

std::string summary_text(const OPFResult& res) {
  std::ostringstream os;
  const auto meta = [&](const std::string& k) -> std::string {
    auto it = res.metadata.find(k);
    return it == res.metadata.end() ? "" : it->second;
  };
  os << "status          " << res.status << (res.certified ? " (certified)" : "") << "\n";
  if (res.feasible_found)
    os << "objective       " << num(res.feasible_objective, "%.6f") << " $/h\n";
  if (std::isfinite(res.lower_bound))
    os << "lower bound     " << num(res.lower_bound, "%.6f") << " $/h\n";
  if (res.feasible_found && std::isfinite(res.lower_bound))
    os << "optimality gap  " << num(res.gap_percent, "%.4f") << " %\n";
  os << "iterations      " << res.iterations.size();
  if (!meta("solver_seconds").empty())
    os << " (solver " << num(std::stod(meta("solver_seconds")), "%.3f") << " s)";
  os << "\n";
  if (!res.iterations.empty()) {
    const IterationRecord& last = res.iterations.back();
    os << "max mismatch    " << num(last.max_mismatch_MVA, "%.4f") << " MVA\n";
    os << "min eig ratio   " << num(last.min_eigenvalue_ratio, "%.4g") << "\n";
  }
  os << "network         " << res.reduced.network.buses.size() << " buses (reduced from "
     << meta("buses_full") << "; " << res.reduced.map.eliminated.size()
     << " branches eliminated)\n";
  if (res.feasible_found) {
    os << "violations      P " << num(res.feasibility.max_P_violation_MW, "%.4f") << " MW, Q "
       << num(res.feasibility.max_Q_violation_MVAr, "%.4f") << " MVAr, V "
       << num(res.feasibility.max_V_violation_pu, "%.6f") << " pu, S "
       << num(res.feasibility.max_S_violation_MVA, "%.4f") << " MVA\n";
  }
  if (!meta("solver").empty()) os << "solver          " << meta("solver") << "\n";
  return os.str();
}

namespace {

struct TableEntry {
  std::string name;
  std::size_t iterations = 0;
  std::string objective, gap, mismatch, seconds;
};

std::string render_section(const std::string& title, const std::vector<TableEntry>& rows) {
  if (rows.empty()) return "";
  std::ostringstream os;
  os << title << "\n";
  os << std::left << std::setw(20) << "case" << std::right << std::setw(6) << "iter"
     << std::setw(18) << "objective ($/h)" << std::setw(10) << "gap (%)" << std::setw(18)
     << "max S_mis (MVA)" << std::setw(13) << "solver (s)" << "\n";
  for (const TableEntry& r : rows) {
    os << std::left << std::setw(20) << r.name << std::right << std::setw(6) << r.iterations
       << std::setw(18) << r.objective << std::setw(10) << r.gap << std::setw(18) << r.mismatch
       << std::setw(13) << r.seconds << "\n";
  }
  return os.str();
}

}  // namespace

std::string comparison_table(const std::vector<nlohmann::json>& results) {
  std::vector<TableEntry> loss_rows, cost_rows;
  for (const nlohmann::json& j : results) {
    TableEntry e;
    const auto& meta = j.at("metadata");
    e.name = meta.contains("case") ? meta.at("case").get<std::string>() : "?";
    e.iterations = j.at("iterations").size();
    e.objective =
        j.at("objective").is_null() ? "-" : num(j.at("objective").get<double>(), "%.2f");
    e.gap = j.at("gap_percent").is_null() ? "-" : num(j.at("gap_percent").get<double>(), "%.3f");
    double mis = 0;
    for (const auto& m : j.at("mismatch_MVA")) mis = std::max(mis, m.get<double>());
    e.mismatch = num(mis, "%.3f");
    e.seconds = meta.contains("solver_seconds")
                    ? num(std::stod(meta.at("solver_seconds").get<std::string>()), "%.2f")
                    : "-";
    const bool loss_min =
        meta.contains("objective_kind") && meta.at("objective_kind") == "loss_min";
    (loss_min ? loss_rows : cost_rows).push_back(std::move(e));
  }
  std::string out = render_section("loss minimization", loss_rows);
  if (!out.empty() && !cost_rows.empty()) out += "\n";
  out += render_section("cost minimization", cost_rows);
  return out;
}

}  // namespace mopf
