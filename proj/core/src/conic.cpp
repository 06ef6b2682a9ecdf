#include "momentopf/conic.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace mopf {

void AffineForm::add(std::uint32_t var, double coef) {
  if (coef == 0) return;
  auto it = std::lower_bound(terms.begin(), terms.end(), var,
                             [](const LinearTerm& t, std::uint32_t v) { return t.var < v; });
  if (it != terms.end() && it->var == var) {
    it->coef += coef;
    if (it->coef == 0) terms.erase(it);
  } else {
    terms.insert(it, {var, coef});
  }
}

void AffineForm::add(const AffineForm& other, double scale) {
  constant += scale * other.constant;
  for (const LinearTerm& t : other.terms) add(t.var, scale * t.coef);
}

double AffineForm::evaluate(std::span<const double> x) const {
  double v = constant;
  for (const LinearTerm& t : terms) {
    if (t.var >= x.size()) throw std::out_of_range("AffineForm::evaluate: variable out of range");
    v += t.coef * x[t.var];
  }
  return v;
}

std::string VariableInfo::name(std::size_t num_poly_vars) const {
  switch (kind) {
    case VariableKind::moment:
      return num_poly_vars ? "y_" + alpha.subscript(num_poly_vars) : "y";
    case VariableKind::epigraph:
      return "t_bus" + std::to_string(bus_id);
    case VariableKind::dispatch:
      return "p_bus" + std::to_string(bus_id) + "_u" + std::to_string(unit);
  }
  return "?";
}

std::uint32_t MomentRegistry::intern_moment(const Exponent& alpha) {
  auto it = moment_index_.find(alpha);
  if (it != moment_index_.end()) return it->second;
  const auto idx = static_cast<std::uint32_t>(vars_.size());
  vars_.push_back({VariableKind::moment, alpha, -1, -1});
  moment_index_.emplace(alpha, idx);
  return idx;
}

std::uint32_t MomentRegistry::add_epigraph(int bus_id) {
  const auto idx = static_cast<std::uint32_t>(vars_.size());
  vars_.push_back({VariableKind::epigraph, Exponent{}, bus_id, -1});
  return idx;
}

std::uint32_t MomentRegistry::add_dispatch(int bus_id, int unit) {
  const auto idx = static_cast<std::uint32_t>(vars_.size());
  vars_.push_back({VariableKind::dispatch, Exponent{}, bus_id, unit});
  return idx;
}

std::vector<std::uint32_t> MomentRegistry::finalize() {
  std::vector<std::uint32_t> order(vars_.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::uint32_t a, std::uint32_t b) {
    const VariableInfo& va = vars_[a];
    const VariableInfo& vb = vars_[b];
    if (va.kind != vb.kind) return static_cast<int>(va.kind) < static_cast<int>(vb.kind);
    if (va.kind == VariableKind::moment) return Exponent::graded_lex_less(va.alpha, vb.alpha);
    if (va.bus_id != vb.bus_id) return va.bus_id < vb.bus_id;
    return va.unit < vb.unit;
  });
  // order[new] = old; invert to perm[old] = new.
  std::vector<std::uint32_t> perm(vars_.size());
  std::vector<VariableInfo> sorted(vars_.size());
  for (std::uint32_t new_idx = 0; new_idx < order.size(); ++new_idx) {
    perm[order[new_idx]] = new_idx;
    sorted[new_idx] = vars_[order[new_idx]];
  }
  vars_ = std::move(sorted);
  moment_index_.clear();
  for (std::uint32_t i = 0; i < vars_.size(); ++i)
    if (vars_[i].kind == VariableKind::moment) moment_index_.emplace(vars_[i].alpha, i);
  return perm;
}

AffineForm linear_form(const Polynomial& g, MomentRegistry& reg) {
  AffineForm f;
  for (const auto& [alpha, coef] : g.terms()) {
    if (alpha.constant()) {
      f.constant += coef;
    } else {
      f.add(reg.intern_moment(alpha), coef);
    }
  }
  return f;
}

void remap(AffineForm& f, std::span<const std::uint32_t> perm) {
  for (LinearTerm& t : f.terms) t.var = perm[t.var];
  std::sort(f.terms.begin(), f.terms.end(),
            [](const LinearTerm& a, const LinearTerm& b) { return a.var < b.var; });
}

void remap(ConicProgram& p, std::span<const std::uint32_t> perm) {
  remap(p.objective, perm);
  for (LinearConstraint& c : p.equalities) remap(c.form, perm);
  for (LinearConstraint& c : p.inequalities) remap(c.form, perm);
  for (PsdBlockDesc& b : p.psd_blocks)
    for (PsdEntry& e : b.entries) remap(e.value, perm);
}

MomentVector moments_from_solution(const ConicProgram& p, std::span<const double> x) {
  if (x.size() != p.variables.size())
    throw std::invalid_argument("moments_from_solution: solution size mismatch");
  MomentVector y;
  for (std::size_t i = 0; i < p.variables.size(); ++i) {
    if (p.variables[i].kind == VariableKind::moment) y.set(p.variables[i].alpha, x[i]);
  }
  return y;
}

namespace {

using nlohmann::json;

json form_to_json(const AffineForm& f) {
  json terms = json::array();
  for (const LinearTerm& t : f.terms) terms.push_back({t.var, t.coef});
  return json{{"constant", f.constant}, {"terms", terms}};
}

AffineForm form_from_json(const json& j) {
  AffineForm f;
  f.constant = j.at("constant").get<double>();
  for (const json& t : j.at("terms")) f.add(t[0].get<std::uint32_t>(), t[1].get<double>());
  return f;
}

json alpha_to_json(const Exponent& e) {
  json out = json::array();
  for (const auto& [v, p] : e.entries()) out.push_back({v, p});
  return out;
}

Exponent alpha_from_json(const json& j) {
  std::vector<Exponent::Entry> entries;
  for (const json& e : j) entries.emplace_back(e[0].get<VarId>(), e[1].get<std::uint32_t>());
  return Exponent(std::move(entries));
}

}  // namespace

std::string program_to_json(const ConicProgram& p) {
  json j;
  j["format"] = "momentopf-conic-1";
  json vars = json::array();
  for (const VariableInfo& v : p.variables) {
    switch (v.kind) {
      case VariableKind::moment:
        vars.push_back({{"kind", "moment"}, {"alpha", alpha_to_json(v.alpha)}});
        break;
      case VariableKind::epigraph:
        vars.push_back({{"kind", "epigraph"}, {"bus", v.bus_id}});
        break;
      case VariableKind::dispatch:
        vars.push_back({{"kind", "dispatch"}, {"bus", v.bus_id}, {"unit", v.unit}});
        break;
    }
  }
  j["variables"] = std::move(vars);
  j["objective"] = form_to_json(p.objective);
  json eqs = json::array(), ineqs = json::array();
  for (const LinearConstraint& c : p.equalities) {
    json e = form_to_json(c.form);
    e["label"] = c.label;
    eqs.push_back(std::move(e));
  }
  for (const LinearConstraint& c : p.inequalities) {
    json e = form_to_json(c.form);
    e["label"] = c.label;
    ineqs.push_back(std::move(e));
  }
  j["equalities"] = std::move(eqs);
  j["inequalities"] = std::move(ineqs);
  json blocks = json::array();
  for (const PsdBlockDesc& b : p.psd_blocks) {
    json entries = json::array();
    for (const PsdEntry& e : b.entries)
      entries.push_back({e.row, e.col, form_to_json(e.value)});
    blocks.push_back({{"label", b.label}, {"dim", b.dim}, {"entries", std::move(entries)}});
  }
  j["psd_blocks"] = std::move(blocks);
  j["metadata"] = p.metadata;
  return j.dump();
}

ConicProgram program_from_json(const std::string& text) {
  const json j = json::parse(text);
  if (j.value("format", "") != "momentopf-conic-1")
    throw std::invalid_argument("program_from_json: unknown format tag");
  ConicProgram p;
  for (const json& v : j.at("variables")) {
    const std::string kind = v.at("kind").get<std::string>();
    VariableInfo info;
    if (kind == "moment") {
      info.kind = VariableKind::moment;
      info.alpha = alpha_from_json(v.at("alpha"));
    } else if (kind == "epigraph") {
      info.kind = VariableKind::epigraph;
      info.bus_id = v.at("bus").get<int>();
    } else if (kind == "dispatch") {
      info.kind = VariableKind::dispatch;
      info.bus_id = v.at("bus").get<int>();
      info.unit = v.at("unit").get<int>();
    } else {
      throw std::invalid_argument("program_from_json: unknown variable kind " + kind);
    }
    p.variables.push_back(std::move(info));
  }
  p.objective = form_from_json(j.at("objective"));
  for (const json& e : j.at("equalities"))
    p.equalities.push_back({form_from_json(e), e.value("label", "")});
  for (const json& e : j.at("inequalities"))
    p.inequalities.push_back({form_from_json(e), e.value("label", "")});
  for (const json& b : j.at("psd_blocks")) {
    PsdBlockDesc block;
    block.label = b.value("label", "");
    block.dim = b.at("dim").get<std::uint32_t>();
    for (const json& e : b.at("entries"))
      block.entries.push_back({e[0].get<std::uint32_t>(), e[1].get<std::uint32_t>(),
                               form_from_json(e[2])});
    p.psd_blocks.push_back(std::move(block));
  }
  if (j.contains("metadata"))
    p.metadata = j.at("metadata").get<std::map<std::string, std::string>>();
  return p;
}

}  // namespace mopf
