// momentopf command-line tool: solve / preprocess / report.
//
// Exit codes: 0 feasible result, 2 bound only, 1 error, 64 usage.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "momentopf/extraction.hpp"
#include "momentopf/matpower.hpp"
#include "momentopf/report.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kVersion = "momentopf 0.1.0";

struct RunConfig {
  std::string case_path;
  std::string out_dir = ".";
  mopf::SolveOptions opts;
  bool verbose = false;
};

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

void write_file(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << content;
}

json config_json(const RunConfig& cfg) {
  return {{"thrshz", cfg.opts.thrshz},
          {"epsilon_b", cfg.opts.epsilon_b},
          {"gamma_max", cfg.opts.gamma_max},
          {"mismatch_tol_MVA", cfg.opts.mismatch_tol_MVA},
          {"max_iter", cfg.opts.max_iter},
          {"rank_ratio_threshold", cfg.opts.rank_ratio_threshold},
          {"clique_merge_threshold", cfg.opts.clique_merge_threshold},
          {"solver", cfg.opts.solver.backend},
          {"solver_eps", cfg.opts.solver.eps},
          {"scs_max_iter", cfg.opts.solver.scs_max_iter},
          {"fallback", cfg.opts.solver.fallback_backend},
          {"stat_reg", cfg.opts.solver.clarabel_stat_reg}};
}

std::string artifact_header(char comment, const RunConfig& cfg, const std::string& case_hash,
                            const std::string& solver_id) {
  std::ostringstream os;
  os << comment << " " << kVersion << "\n"
     << comment << " case " << cfg.case_path << " hash " << case_hash << "\n"
     << comment << " config hash " << mopf::fnv1a_hex(config_json(cfg).dump()) << "\n"
     << comment << " solver " << solver_id << "\n";
  return os.str();
}

void add_solve_flags(CLI::App* cmd, RunConfig& cfg) {
  cmd->add_option("case", cfg.case_path, "MATPOWER .m or case .json file")
      ->required()
      ->check(CLI::ExistingFile);
  cmd->add_option("--out", cfg.out_dir, "artifact directory")->envname("OPF_OUT");
  cmd->add_option("--thrshz", cfg.opts.thrshz, "low-impedance threshold (pu)")
      ->envname("OPF_THRSHZ")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  cmd->add_option("--epsilon-b", cfg.opts.epsilon_b, "reactive penalty ($/MVAr)")
      ->envname("OPF_EPSILON_B")
      ->check(CLI::NonNegativeNumber)
      ->capture_default_str();
  cmd->add_option("--gamma-max", cfg.opts.gamma_max, "relaxation order cap")
      ->envname("OPF_GAMMA_MAX")
      ->check(CLI::Range(1u, 6u))
      ->capture_default_str();
  cmd->add_option("--mismatch-tol", cfg.opts.mismatch_tol_MVA, "injection mismatch tolerance (MVA)")
      ->envname("OPF_MISMATCH_TOL")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  cmd->add_option("--max-iter", cfg.opts.max_iter, "escalation iteration limit")
      ->envname("OPF_MAX_ITER")
      ->capture_default_str();
  cmd->add_option("--rank-ratio-threshold", cfg.opts.rank_ratio_threshold,
                  "eigenvalue ratio certifying rank one")
      ->envname("OPF_RANK_RATIO_THRESHOLD")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  cmd->add_option("--clique-merge-threshold", cfg.opts.clique_merge_threshold,
                  "clique merge aggressiveness (0 disables)")
      ->envname("OPF_CLIQUE_MERGE_THRESHOLD")
      ->capture_default_str();
  cmd->add_option("--solver", cfg.opts.solver.backend, "conic backend")
      ->envname("OPF_SOLVER")
      ->check(CLI::IsMember({"clarabel", "scs"}))
      ->capture_default_str();
  cmd->add_option("--solver-eps", cfg.opts.solver.eps, "solver tolerance")
      ->envname("OPF_SOLVER_EPS")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  cmd->add_option("--scs-max-iter", cfg.opts.solver.scs_max_iter, "ADMM iteration cap")
      ->envname("OPF_SCS_MAX_ITER")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  cmd->add_option("--fallback", cfg.opts.solver.fallback_backend,
                  "backend retried after primary failure ('' disables)")
      ->envname("OPF_FALLBACK")
      ->capture_default_str();
  cmd->add_option("--stat-reg", cfg.opts.solver.clarabel_stat_reg,
                  "regularized clarabel retry, result re-verified (0 disables)")
      ->envname("OPF_STAT_REG")
      ->check(CLI::NonNegativeNumber)
      ->capture_default_str();
  cmd->add_option("--time-limit", cfg.opts.solver.time_limit_sec, "per-solve limit (s, 0 = none)")
      ->envname("OPF_TIME_LIMIT")
      ->check(CLI::NonNegativeNumber)
      ->capture_default_str();
  cmd->add_option("--bridge", cfg.opts.solver.bridge_path, "conic bridge script path")
      ->envname("OPF_BRIDGE");
  cmd->add_flag("-v,--verbose", cfg.verbose, "progress to stderr, keep solver files");
}

int cmd_solve(RunConfig& cfg) {
  const std::string raw = read_file(cfg.case_path);
  const mopf::NetworkCase nc = mopf::load_case_file(cfg.case_path);
  cfg.opts.solver.verbose = cfg.verbose;
  cfg.opts.solver.keep_files = cfg.verbose;
  cfg.opts.log = [](const std::string& line) { std::cerr << line << "\n"; };

  mopf::OPFResult res = mopf::iterative_solve(nc, cfg.opts);
  if (res.metadata["solver"].empty())
    res.metadata["solver"] = cfg.opts.solver.backend + " (not invoked)";
  const std::string case_hash = mopf::fnv1a_hex(raw);
  res.metadata["case_hash"] = case_hash;
  res.metadata["config_hash"] = mopf::fnv1a_hex(config_json(cfg).dump());
  res.metadata["tool"] = kVersion;

  fs::create_directories(cfg.out_dir);
  const fs::path out(cfg.out_dir);
  write_file(out / "result.json", mopf::result_to_json(res, nc).dump(2) + "\n");
  const std::string header = artifact_header('#', cfg, case_hash, res.metadata["solver"]);
  write_file(out / "iterations.csv", header + mopf::iterations_csv(res.iterations));
  write_file(out / "eigenvalue_ratios.csv", header + mopf::ratios_csv(res.final_ratios));
  const std::string summary = mopf::summary_text(res);
  write_file(out / "summary.txt", summary);
  std::cout << summary;

  if (res.status == "global" || res.status == "feasible") return 0;
  if (res.status == "bound_only") return 2;
  std::cerr << "momentopf: " << res.status << "\n";
  return 1;
}

int cmd_preprocess(RunConfig& cfg) {
  const std::string raw = read_file(cfg.case_path);
  const mopf::NetworkCase nc = mopf::load_case_file(cfg.case_path);
  const mopf::ReducedCase red = mopf::group_low_impedance(nc, {cfg.opts.thrshz});
  const std::string case_hash = mopf::fnv1a_hex(raw);
  const std::string header = artifact_header('%', cfg, case_hash, "none");

  fs::create_directories(cfg.out_dir);
  const fs::path out(cfg.out_dir);
  write_file(out / "reduced.m", header + mopf::write_matpower_case(red.network));

  json jc = json::parse(mopf::case_to_json(red.network));
  jc["metadata"] = {{"tool", kVersion},
                    {"case_hash", case_hash},
                    {"config_hash", mopf::fnv1a_hex(config_json(cfg).dump())},
                    {"thrshz", cfg.opts.thrshz}};
  write_file(out / "reduced.json", jc.dump(2) + "\n");

  json jm = json::parse(mopf::reduction_map_to_json(red.map));
  jm["metadata"] = jc["metadata"];
  write_file(out / "reduction_map.json", jm.dump(2) + "\n");

  const std::size_t before = nc.buses.size(), after = red.network.buses.size();
  const double pct = before ? 100.0 * static_cast<double>(before - after) / before : 0;
  char line[160];
  std::snprintf(line, sizeof line, "%zu → %zu buses (%.1f%%)", before, after, pct);
  std::cout << line << "\n";
  for (const std::string& note : red.map.notes) std::cerr << "note: " << note << "\n";
  return 0;
}

int cmd_report(const std::vector<std::string>& paths) {
  std::vector<json> results;
  for (const std::string& p : paths) {
    std::ifstream in(p);
    if (!in) {
      std::cerr << "momentopf: missing result file " << p << "\n";
      return 1;
    }
    json j;
    try {
      in >> j;
    } catch (const std::exception& e) {
      std::cerr << "momentopf: " << p << ": " << e.what() << "\n";
      return 1;
    }
    results.push_back(std::move(j));
  }
  std::cout << mopf::comparison_table(results);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"certified global AC optimal power flow via sparse moment relaxations"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);

  RunConfig cfg;
  CLI::App* solve = app.add_subcommand("solve", "solve a case to global optimality");
  add_solve_flags(solve, cfg);
  CLI::App* prep = app.add_subcommand("preprocess", "apply low-impedance reduction only");
  prep->add_option("case", cfg.case_path, "MATPOWER .m or case .json file")
      ->required()
      ->check(CLI::ExistingFile);
  prep->add_option("--out", cfg.out_dir, "artifact directory")->envname("OPF_OUT");
  prep->add_option("--thrshz", cfg.opts.thrshz, "low-impedance threshold (pu)")
      ->envname("OPF_THRSHZ")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  std::vector<std::string> report_paths;
  CLI::App* report = app.add_subcommand("report", "tabulate result JSON files");
  report->add_option("results", report_paths, "result.json paths")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 64;
  }

  try {
    if (solve->parsed()) return cmd_solve(cfg);
    if (prep->parsed()) return cmd_preprocess(cfg);
    return cmd_report(report_paths);
  } catch (const std::exception& e) {
    std::cerr << "momentopf: " << e.what() << "\n";
    return 1;
  }
}
