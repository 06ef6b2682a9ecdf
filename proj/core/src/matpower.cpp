#include "momentopf/matpower.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <numbers>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

namespace mopf {

namespace {

struct Token {
  std::string text;
  int line;
};

// Numeric table parsed from "mpc.<name> = [ ... ];"
struct Table {
  std::vector<std::vector<double>> rows;
  std::vector<int> row_lines;
  int header_line = 0;
  bool present = false;
};

double parse_number(const Token& tok) {
  const std::string& s = tok.text;
  if (s == "Inf" || s == "inf") return std::numeric_limits<double>::infinity();
  if (s == "-Inf" || s == "-inf") return -std::numeric_limits<double>::infinity();
  double value = 0;
  const char* begin = s.data();
  const char* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(begin, end, value);
  if (ec != std::errc() || ptr != end)
    throw ParseError(tok.line, "expected a number, got '" + s + "'");
  return value;
}

class CaseText {
 public:
  explicit CaseText(std::string_view text) {
    // Split into lines with comments stripped; record 1-based numbers.
    int line_no = 1;
    std::string line;
    for (std::size_t i = 0; i <= text.size(); ++i) {
      if (i == text.size() || text[i] == '\n') {
        auto cut = line.find('%');
        if (cut != std::string::npos) line.resize(cut);
        lines_.push_back({line, line_no});
        line.clear();
        ++line_no;
      } else if (text[i] != '\r') {
        line.push_back(text[i]);
      }
    }
  }

  std::string function_name() const {
    for (const auto& [text, no] : lines_) {
      auto pos = text.find("function");
      if (pos == std::string::npos) continue;
      auto eq = text.find('=', pos);
      std::string name = text.substr(eq == std::string::npos ? pos + 8 : eq + 1);
      // strip whitespace and a trailing argument list / semicolon
      std::erase_if(name, [](char c) { return std::isspace(static_cast<unsigned char>(c)); });
      if (auto paren = name.find('('); paren != std::string::npos) name.resize(paren);
      if (auto semi = name.find(';'); semi != std::string::npos) name.resize(semi);
      return name;
    }
    return "";
  }

  // Scalar assignment "mpc.<field> = <value>;"
  bool scalar(const std::string& field, double& out, int& line) const {
    const std::string key = "mpc." + field;
    for (const auto& [text, no] : lines_) {
      auto pos = text.find(key);
      if (pos == std::string::npos) continue;
      auto eq = text.find('=', pos + key.size());
      if (eq == std::string::npos) continue;
      // Skip table headers and quoted strings.
      auto rest = text.substr(eq + 1);
      if (rest.find('[') != std::string::npos) continue;
      std::erase_if(rest, [](char c) {
        return std::isspace(static_cast<unsigned char>(c)) || c == ';';
      });
      if (rest.empty() || rest.front() == '\'') continue;
      out = parse_number({rest, no});
      line = no;
      return true;
    }
    return false;
  }

  bool quoted(const std::string& field, std::string& out) const {
    const std::string key = "mpc." + field;
    for (const auto& [text, no] : lines_) {
      auto pos = text.find(key);
      if (pos == std::string::npos) continue;
      auto q1 = text.find('\'', pos);
      if (q1 == std::string::npos) continue;
      auto q2 = text.find('\'', q1 + 1);
      if (q2 == std::string::npos) throw ParseError(no, "unterminated string");
      out = text.substr(q1 + 1, q2 - q1 - 1);
      return true;
    }
    return false;
  }

  Table table(const std::string& field) const {
    Table t;
    const std::string key = "mpc." + field;
    std::size_t i = 0;
    for (; i < lines_.size(); ++i) {
      const auto& [text, no] = lines_[i];
      auto pos = text.find(key);
      if (pos == std::string::npos) continue;
      // Must be followed by '=' then '[' (possibly on this line).
      auto after = text.find_first_not_of(" \t", pos + key.size());
      if (after == std::string::npos || text[after] != '=') continue;
      t.present = true;
      t.header_line = no;
      break;
    }
    if (!t.present) return t;

    // Token stream from '[' to the matching ']'.
    bool started = false;
    std::vector<double> row;
    int row_line = 0;
    for (; i < lines_.size(); ++i) {
      const auto& [text, no] = lines_[i];
      std::size_t p = 0;
      if (!started) {
        p = text.find('[');
        if (p == std::string::npos) continue;
        started = true;
        ++p;
      }
      while (p < text.size()) {
        char c = text[p];
        if (std::isspace(static_cast<unsigned char>(c)) || c == ',') {
          ++p;
          continue;
        }
        if (c == ';') {
          if (!row.empty()) {
            t.rows.push_back(row);
            t.row_lines.push_back(row_line);
            row.clear();
          }
          ++p;
          continue;
        }
        if (c == ']') {
          if (!row.empty()) {
            t.rows.push_back(row);
            t.row_lines.push_back(row_line);
            row.clear();
          }
          return t;
        }
        auto q = p;
        while (q < text.size() && !std::isspace(static_cast<unsigned char>(text[q])) &&
               text[q] != ';' && text[q] != ']' && text[q] != ',')
          ++q;
        if (row.empty()) row_line = no;
        row.push_back(parse_number({text.substr(p, q - p), no}));
        p = q;
      }
      // End of line inside a row: MATPOWER rows are one-per-line, so a
      // line break also terminates the row.
      if (!row.empty()) {
        t.rows.push_back(row);
        t.row_lines.push_back(row_line);
        row.clear();
      }
    }
    throw ParseError(t.header_line, "unterminated table mpc." + field);
  }

 private:
  std::vector<std::pair<std::string, int>> lines_;
};

void require_cols(const Table& t, std::size_t row, std::size_t n, const std::string& what) {
  if (t.rows[row].size() < n)
    throw ParseError(t.row_lines[row], what + " row needs at least " + std::to_string(n) +
                                           " columns, got " + std::to_string(t.rows[row].size()));
}

}  // namespace

NetworkCase parse_matpower_case(std::string_view text, std::string_view case_name) {
  CaseText src(text);

  NetworkCase nc;
  nc.name = !case_name.empty() ? std::string(case_name) : src.function_name();

  std::string version;
  if (src.quoted("version", version) && version != "2")
    throw UnsupportedFeatureError("unsupported MATPOWER case version '" + version +
                                  "' (only version 2 is handled)");

  int line = 0;
  if (!src.scalar("baseMVA", nc.base_mva, line))
    throw ParseError(1, "mpc.baseMVA not found");
  if (nc.base_mva <= 0) throw ParseError(line, "baseMVA must be positive");

  const Table bus = src.table("bus");
  const Table gen = src.table("gen");
  const Table branch = src.table("branch");
  const Table gencost = src.table("gencost");
  if (!bus.present) throw ParseError(1, "mpc.bus not found");
  if (!branch.present) throw ParseError(1, "mpc.branch not found");
  if (gen.present && !gen.rows.empty() && !gencost.present)
    throw ParseError(gen.header_line, "mpc.gen present but mpc.gencost missing");

  std::set<int> isolated;
  std::vector<int> ref_buses;
  for (std::size_t r = 0; r < bus.rows.size(); ++r) {
    require_cols(bus, r, 13, "bus");
    const auto& row = bus.rows[r];
    const int id = static_cast<int>(row[0]);
    const int type = static_cast<int>(row[1]);
    if (type == 4) {
      isolated.insert(id);
      nc.notes.push_back("dropped isolated bus " + std::to_string(id));
      continue;
    }
    if (type == 3) ref_buses.push_back(id);
    BusRecord b;
    b.id = id;
    b.P_D = row[2];
    b.Q_D = row[3];
    b.shunt_G = row[4] / nc.base_mva;
    b.shunt_B = row[5] / nc.base_mva;
    b.base_kV = row[9];
    if (b.base_kV <= 0) {
      b.base_kV = 1.0;
      nc.notes.push_back("bus " + std::to_string(id) + ": nonpositive base_kV normalized to 1");
    }
    b.V_max = row[11];
    b.V_min = row[12];
    nc.buses.push_back(b);
  }
  if (ref_buses.empty()) throw ParseError(bus.header_line, "no reference (type 3) bus");
  if (ref_buses.size() > 1)
    throw UnsupportedFeatureError("multiple reference buses (multi-area cases unsupported)");
  nc.reference_bus = ref_buses[0];

  // Generators; rows map 1:1 onto gencost rows.
  std::vector<std::pair<GeneratorRecord, bool>> gens;  // (record, in service)
  if (gen.present) {
    for (std::size_t r = 0; r < gen.rows.size(); ++r) {
      require_cols(gen, r, 10, "gen");
      const auto& row = gen.rows[r];
      GeneratorRecord g;
      g.bus_id = static_cast<int>(row[0]);
      g.Q_max = row[3];
      g.Q_min = row[4];
      g.P_max = row[8];
      g.P_min = row[9];
      const bool on = row[7] > 0;
      if (isolated.count(g.bus_id)) {
        nc.notes.push_back("dropped generator at isolated bus " + std::to_string(g.bus_id));
        gens.emplace_back(g, false);
        continue;
      }
      if (!on) nc.notes.push_back("dropped out-of-service generator at bus " +
                                  std::to_string(g.bus_id));
      gens.emplace_back(g, on);
    }
  }

  if (gencost.present) {
    const std::size_t ng = gens.size();
    if (gencost.rows.size() != ng && gencost.rows.size() != 2 * ng)
      throw ParseError(gencost.header_line,
                       "gencost must have ng or 2*ng rows (ng = " + std::to_string(ng) +
                           ", got " + std::to_string(gencost.rows.size()) + ")");
    for (std::size_t r = 0; r < gencost.rows.size(); ++r) {
      require_cols(gencost, r, 4, "gencost");
      const auto& row = gencost.rows[r];
      const int model = static_cast<int>(row[0]);
      const int ncost = static_cast<int>(row[3]);
      if (static_cast<int>(row.size()) < 4 + ncost)
        throw ParseError(gencost.row_lines[r], "gencost row shorter than its NCOST");
      const bool is_q_row = r >= ng;
      if (model == 1) {
        // Piecewise-linear; tolerate all-zero placeholder rows only.
        bool all_zero = std::all_of(row.begin() + 4, row.begin() + 4 + ncost,
                                    [](double v) { return v == 0; });
        if (!all_zero)
          throw UnsupportedFeatureError("piecewise-linear generator costs are not supported");
        continue;
      }
      if (model != 2)
        throw ParseError(gencost.row_lines[r], "unknown gencost MODEL " + std::to_string(model));
      std::vector<double> coef(row.begin() + 4, row.begin() + 4 + ncost);  // highest first
      if (is_q_row) {
        if (std::any_of(coef.begin(), coef.end(), [](double v) { return v != 0; }))
          throw UnsupportedFeatureError("reactive-power cost curves are not supported");
        continue;
      }
      CostCurve c;
      const std::size_t n = coef.size();
      for (std::size_t i = 0; i < n; ++i) {
        const std::size_t power = n - 1 - i;
        if (power > 2) {
          if (coef[i] != 0)
            throw UnsupportedFeatureError("generator cost of degree > 2 is not supported");
          continue;
        }
        if (power == 2) c.c2 = coef[i];
        if (power == 1) c.c1 = coef[i];
        if (power == 0) c.c0 = coef[i];
      }
      gens[r].first.cost = c;
    }
  }
  for (const auto& [g, on] : gens)
    if (on) nc.generators.push_back(g);

  for (std::size_t r = 0; r < branch.rows.size(); ++r) {
    require_cols(branch, r, 11, "branch");
    const auto& row = branch.rows[r];
    BranchRecord br;
    br.from_bus = static_cast<int>(row[0]);
    br.to_bus = static_cast<int>(row[1]);
    if (isolated.count(br.from_bus) || isolated.count(br.to_bus)) {
      nc.notes.push_back("dropped branch " + std::to_string(br.from_bus) + "-" +
                         std::to_string(br.to_bus) + " touching an isolated bus");
      continue;
    }
    br.R = row[2];
    br.X = row[3];
    br.b_sh = row[4];
    br.S_max = std::isfinite(row[5]) ? row[5] : 0.0;
    br.tau = row[8] == 0.0 ? 1.0 : row[8];
    if (br.tau < 0) throw ParseError(branch.row_lines[r], "negative tap ratio");
    br.theta_shift = row[9] * std::numbers::pi / 180.0;
    br.in_service = row[10] > 0;
    nc.branches.push_back(br);
  }

  validate(nc);
  return nc;
}

namespace {
std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}
}  // namespace

std::string write_matpower_case(const NetworkCase& nc) {
  std::ostringstream os;
  std::string fn = nc.name.empty() ? "mpc_case" : nc.name;
  std::replace_if(fn.begin(), fn.end(),
                  [](char c) { return !std::isalnum(static_cast<unsigned char>(c)) && c != '_'; },
                  '_');
  os << "function mpc = " << fn << "\n";
  os << "mpc.version = '2';\n";
  os << "mpc.baseMVA = " << num(nc.base_mva) << ";\n\n";

  std::set<int> gen_buses;
  for (const GeneratorRecord& g : nc.generators) gen_buses.insert(g.bus_id);

  os << "%% bus_i type Pd Qd Gs Bs area Vm Va baseKV zone Vmax Vmin\n";
  os << "mpc.bus = [\n";
  for (const BusRecord& b : nc.buses) {
    const int type = b.id == nc.reference_bus ? 3 : (gen_buses.count(b.id) ? 2 : 1);
    os << "\t" << b.id << "\t" << type << "\t" << num(b.P_D) << "\t" << num(b.Q_D) << "\t"
       << num(b.shunt_G * nc.base_mva) << "\t" << num(b.shunt_B * nc.base_mva) << "\t1\t1\t0\t"
       << num(b.base_kV) << "\t1\t" << num(b.V_max) << "\t" << num(b.V_min) << ";\n";
  }
  os << "];\n\n";

  os << "%% bus Pg Qg Qmax Qmin Vg mBase status Pmax Pmin\n";
  os << "mpc.gen = [\n";
  for (const GeneratorRecord& g : nc.generators) {
    os << "\t" << g.bus_id << "\t0\t0\t" << num(g.Q_max) << "\t" << num(g.Q_min) << "\t1\t"
       << num(nc.base_mva) << "\t1\t" << num(g.P_max) << "\t" << num(g.P_min) << ";\n";
  }
  os << "];\n\n";

  os << "%% fbus tbus r x b rateA rateB rateC ratio angle status\n";
  os << "mpc.branch = [\n";
  for (const BranchRecord& br : nc.branches) {
    os << "\t" << br.from_bus << "\t" << br.to_bus << "\t" << num(br.R) << "\t" << num(br.X)
       << "\t" << num(br.b_sh) << "\t" << num(br.S_max) << "\t0\t0\t"
       << num(br.tau == 1.0 ? 0.0 : br.tau) << "\t" << num(br.theta_shift * 180.0 / std::numbers::pi)
       << "\t" << (br.in_service ? 1 : 0) << ";\n";
  }
  os << "];\n\n";

  os << "%% model startup shutdown n c2 c1 c0\n";
  os << "mpc.gencost = [\n";
  for (const GeneratorRecord& g : nc.generators) {
    os << "\t2\t0\t0\t3\t" << num(g.cost.c2) << "\t" << num(g.cost.c1) << "\t" << num(g.cost.c0)
       << ";\n";
  }
  os << "];\n";
  return os.str();
}

namespace {
using nlohmann::json;

json branch_to_json(const BranchRecord& b) {
  return json{{"from", b.from_bus}, {"to", b.to_bus},         {"r", b.R},
              {"x", b.X},           {"b_sh", b.b_sh},         {"tau", b.tau},
              {"shift", b.theta_shift}, {"s_max", b.S_max},   {"in_service", b.in_service}};
}
}  // namespace

std::string case_to_json(const NetworkCase& nc) {
  json j;
  j["name"] = nc.name;
  j["base_mva"] = nc.base_mva;
  j["reference_bus"] = nc.reference_bus;
  j["buses"] = json::array();
  for (const BusRecord& b : nc.buses) {
    j["buses"].push_back(json{{"id", b.id},
                              {"p_d", b.P_D},
                              {"q_d", b.Q_D},
                              {"v_min", b.V_min},
                              {"v_max", b.V_max},
                              {"shunt_g", b.shunt_G},
                              {"shunt_b", b.shunt_B},
                              {"base_kv", b.base_kV}});
  }
  j["generators"] = json::array();
  for (const GeneratorRecord& g : nc.generators) {
    j["generators"].push_back(json{{"bus", g.bus_id},
                                   {"p_min", g.P_min},
                                   {"p_max", g.P_max},
                                   {"q_min", g.Q_min},
                                   {"q_max", g.Q_max},
                                   {"cost", {g.cost.c2, g.cost.c1, g.cost.c0}}});
  }
  j["branches"] = json::array();
  for (const BranchRecord& b : nc.branches) j["branches"].push_back(branch_to_json(b));
  j["notes"] = nc.notes;
  return j.dump(2);
}

NetworkCase case_from_json(const std::string& text) {
  json j = json::parse(text);
  NetworkCase nc;
  nc.name = j.value("name", "");
  nc.base_mva = j.at("base_mva").get<double>();
  nc.reference_bus = j.at("reference_bus").get<int>();
  for (const json& b : j.at("buses")) {
    BusRecord r;
    r.id = b.at("id").get<int>();
    r.P_D = b.at("p_d").get<double>();
    r.Q_D = b.at("q_d").get<double>();
    r.V_min = b.at("v_min").get<double>();
    r.V_max = b.at("v_max").get<double>();
    r.shunt_G = b.at("shunt_g").get<double>();
    r.shunt_B = b.at("shunt_b").get<double>();
    r.base_kV = b.at("base_kv").get<double>();
    nc.buses.push_back(r);
  }
  for (const json& g : j.at("generators")) {
    GeneratorRecord r;
    r.bus_id = g.at("bus").get<int>();
    r.P_min = g.at("p_min").get<double>();
    r.P_max = g.at("p_max").get<double>();
    r.Q_min = g.at("q_min").get<double>();
    r.Q_max = g.at("q_max").get<double>();
    r.cost.c2 = g.at("cost")[0].get<double>();
    r.cost.c1 = g.at("cost")[1].get<double>();
    r.cost.c0 = g.at("cost")[2].get<double>();
    nc.generators.push_back(r);
  }
  for (const json& b : j.at("branches")) {
    BranchRecord r;
    r.from_bus = b.at("from").get<int>();
    r.to_bus = b.at("to").get<int>();
    r.R = b.at("r").get<double>();
    r.X = b.at("x").get<double>();
    r.b_sh = b.at("b_sh").get<double>();
    r.tau = b.at("tau").get<double>();
    r.theta_shift = b.at("shift").get<double>();
    r.S_max = b.at("s_max").get<double>();
    r.in_service = b.at("in_service").get<bool>();
    nc.branches.push_back(r);
  }
  if (j.contains("notes")) nc.notes = j.at("notes").get<std::vector<std::string>>();
  validate(nc);
  return nc;
}

NetworkCase load_case_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open case file: " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  if (path.size() >= 5 && path.substr(path.size() - 5) == ".json")
    return case_from_json(buf.str());
  // Derive the case name from the file stem.
  auto slash = path.find_last_of('/');
  std::string stem = slash == std::string::npos ? path : path.substr(slash + 1);
  if (auto dot = stem.find_last_of('.'); dot != std::string::npos) stem.resize(dot);
  return parse_matpower_case(buf.str(), stem);
}

}  // namespace mopf
