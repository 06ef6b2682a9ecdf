#include "momentopf/polynomial.hpp"

#include <algorithm>
#include <cmath>
#include <functional>

namespace mopf {

Exponent::Exponent(std::initializer_list<Entry> entries)
    : entries_(entries) {
  normalize();
}

Exponent::Exponent(std::vector<Entry> entries) : entries_(std::move(entries)) {
  normalize();
}

Exponent Exponent::variable(VarId v, std::uint32_t power) {
  Exponent e;
  if (power > 0) e.entries_.emplace_back(v, power);
  return e;
}

void Exponent::normalize() {
  std::sort(entries_.begin(), entries_.end(),
            [](const Entry& a, const Entry& b) { return a.first < b.first; });
  std::vector<Entry> merged;
  merged.reserve(entries_.size());
  for (const Entry& e : entries_) {
    if (!merged.empty() && merged.back().first == e.first) {
      merged.back().second += e.second;
    } else {
      merged.push_back(e);
    }
  }
  std::erase_if(merged, [](const Entry& e) { return e.second == 0; });
  entries_ = std::move(merged);
}

std::uint32_t Exponent::degree() const {
  std::uint32_t d = 0;
  for (const Entry& e : entries_) d += e.second;
  return d;
}

std::uint32_t Exponent::exponent_of(VarId v) const {
  for (const Entry& e : entries_)
    if (e.first == v) return e.second;
  return 0;
}

std::vector<std::uint32_t> Exponent::dense(std::size_t num_vars) const {
  std::vector<std::uint32_t> out(num_vars, 0);
  for (const Entry& e : entries_) {
    if (e.first < num_vars) out[e.first] = e.second;
  }
  return out;
}

Exponent Exponent::operator+(const Exponent& other) const {
  std::vector<Entry> sum;
  sum.reserve(entries_.size() + other.entries_.size());
  auto a = entries_.begin(), b = other.entries_.begin();
  while (a != entries_.end() && b != other.entries_.end()) {
    if (a->first < b->first) {
      sum.push_back(*a++);
    } else if (b->first < a->first) {
      sum.push_back(*b++);
    } else {
      sum.emplace_back(a->first, a->second + b->second);
      ++a;
      ++b;
    }
  }
  sum.insert(sum.end(), a, entries_.end());
  sum.insert(sum.end(), b, other.entries_.end());
  Exponent out;
  out.entries_ = std::move(sum);  // already sorted and merged
  return out;
}

bool Exponent::graded_lex_less(const Exponent& a, const Exponent& b) {
  const std::uint32_t da = a.degree(), db = b.degree();
  if (da != db) return da < db;
  // Same degree: compare powers variable by variable, ascending id.
  // Larger power on the earlier variable sorts first.
  auto ia = a.entries_.begin(), ib = b.entries_.begin();
  while (ia != a.entries_.end() || ib != b.entries_.end()) {
    VarId va = ia != a.entries_.end() ? ia->first : VarId(-1);
    VarId vb = ib != b.entries_.end() ? ib->first : VarId(-1);
    if (va == vb) {
      if (ia->second != ib->second) return ia->second > ib->second;
      ++ia;
      ++ib;
    } else if (va < vb) {
      return true;  // a has positive power on an earlier variable
    } else {
      return false;
    }
  }
  return false;  // equal
}

std::string Exponent::subscript(std::size_t num_vars) const {
  std::string s;
  for (std::uint32_t e : dense(num_vars)) {
    if (e > 9) {
      s += "(" + std::to_string(e) + ")";
    } else {
      s += static_cast<char>('0' + e);
    }
  }
  return s;
}

std::size_t ExponentHash::operator()(const Exponent& e) const noexcept {
  std::size_t h = 0x9e3779b97f4a7c15ull;
  for (const auto& [v, p] : e.entries()) {
    h ^= std::hash<std::uint64_t>{}((std::uint64_t(v) << 32) | p) + 0x9e3779b9 + (h << 6) + (h >> 2);
  }
  return h;
}

Polynomial Polynomial::constant(double c) {
  Polynomial p;
  p.add_term(Exponent{}, c);
  return p;
}

Polynomial Polynomial::monomial(Exponent e, double coefficient) {
  Polynomial p;
  p.add_term(e, coefficient);
  return p;
}

std::uint32_t Polynomial::degree() const {
  std::uint32_t d = 0;
  for (const auto& [e, c] : terms_) d = std::max(d, e.degree());
  return d;
}

double Polynomial::coefficient(const Exponent& e) const {
  auto it = terms_.find(e);
  return it == terms_.end() ? 0.0 : it->second;
}

void Polynomial::add_term(const Exponent& e, double coefficient) {
  if (coefficient == 0.0) return;
  auto [it, inserted] = terms_.emplace(e, coefficient);
  if (!inserted) {
    it->second += coefficient;
    if (it->second == 0.0) terms_.erase(it);
  }
}

Polynomial& Polynomial::operator+=(const Polynomial& other) {
  for (const auto& [e, c] : other.terms_) add_term(e, c);
  return *this;
}

Polynomial& Polynomial::operator-=(const Polynomial& other) {
  for (const auto& [e, c] : other.terms_) add_term(e, -c);
  return *this;
}

Polynomial& Polynomial::operator*=(double s) {
  if (s == 0.0) {
    terms_.clear();
    return *this;
  }
  for (auto& [e, c] : terms_) c *= s;
  return *this;
}

Polynomial Polynomial::operator*(const Polynomial& other) const {
  Polynomial out;
  for (const auto& [ea, ca] : terms_)
    for (const auto& [eb, cb] : other.terms_) out.add_term(ea + eb, ca * cb);
  return out;
}

Polynomial Polynomial::operator-() const {
  Polynomial out(*this);
  out *= -1.0;
  return out;
}

double Polynomial::evaluate(std::span<const double> x) const {
  double total = 0;
  for (const auto& [e, c] : terms_) {
    double m = c;
    for (const auto& [v, p] : e.entries()) {
      if (v >= x.size())
        throw std::out_of_range("Polynomial::evaluate: point does not cover variable " +
                                std::to_string(v));
      double base = x[v];
      for (std::uint32_t k = 0; k < p; ++k) m *= base;
    }
    total += m;
  }
  return total;
}

std::vector<VarId> Polynomial::support() const {
  std::vector<VarId> vars;
  for (const auto& [e, c] : terms_)
    for (const auto& [v, p] : e.entries()) vars.push_back(v);
  std::sort(vars.begin(), vars.end());
  vars.erase(std::unique(vars.begin(), vars.end()), vars.end());
  return vars;
}

void MomentVector::set(const Exponent& e, double value) { values_[e] = value; }

std::optional<double> MomentVector::get(const Exponent& e) const {
  auto it = values_.find(e);
  if (it == values_.end()) return std::nullopt;
  return it->second;
}

bool MomentVector::contains(const Exponent& e) const { return values_.count(e) > 0; }

MomentVector MomentVector::from_point(std::span<const double> x, std::span<const VarId> vars,
                                      std::uint32_t max_degree) {
  MomentVector y;
  for (const Exponent& alpha : monomial_basis(vars, max_degree)) {
    double m = 1;
    for (const auto& [v, p] : alpha.entries()) {
      if (v >= x.size())
        throw std::out_of_range("MomentVector::from_point: point does not cover variable " +
                                std::to_string(v));
      for (std::uint32_t k = 0; k < p; ++k) m *= x[v];
    }
    y.set(alpha, m);
  }
  return y;
}

double apply_Ly(const Polynomial& g, const MomentVector& y) {
  double total = 0;
  for (const auto& [alpha, coef] : g.terms()) {
    auto m = y.get(alpha);
    if (!m)
      throw MissingMomentError(alpha, "apply_Ly: moment y_alpha missing for a monomial of g");
    total += coef * *m;
  }
  return total;
}

namespace {
void emit_degree(std::span<const VarId> vars, std::size_t first, std::uint32_t deg,
                 std::vector<Exponent::Entry>& acc, std::vector<Exponent>& out) {
  if (deg == 0) {
    out.emplace_back(std::vector<Exponent::Entry>(acc));
    return;
  }
  if (first == vars.size()) return;
  if (first + 1 == vars.size()) {
    acc.emplace_back(vars[first], deg);
    out.emplace_back(std::vector<Exponent::Entry>(acc));
    acc.pop_back();
    return;
  }
  // Larger power on the earlier variable first.
  for (std::uint32_t e = deg; e > 0; --e) {
    acc.emplace_back(vars[first], e);
    emit_degree(vars, first + 1, deg - e, acc, out);
    acc.pop_back();
  }
  emit_degree(vars, first + 1, deg, acc, out);
}
}  // namespace

std::vector<Exponent> monomial_basis(std::span<const VarId> vars, std::uint32_t gamma) {
  std::vector<VarId> sorted(vars.begin(), vars.end());
  std::sort(sorted.begin(), sorted.end());
  sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());

  std::vector<Exponent> out;
  out.reserve(monomial_count(sorted.size(), gamma));
  std::vector<Exponent::Entry> acc;
  for (std::uint32_t d = 0; d <= gamma; ++d)
    emit_degree(std::span<const VarId>(sorted), 0, d, acc, out);
  return out;
}

std::vector<Exponent> monomial_basis(std::size_t num_vars, std::uint32_t gamma,
                                     std::span<const VarId> eliminated) {
  std::vector<VarId> vars;
  vars.reserve(num_vars);
  for (VarId v = 0; v < num_vars; ++v) {
    if (std::find(eliminated.begin(), eliminated.end(), v) == eliminated.end())
      vars.push_back(v);
  }
  return monomial_basis(vars, gamma);
}

unsigned long long monomial_count(std::size_t num_vars, std::uint32_t gamma) {
  unsigned long long c = 1;
  for (std::uint32_t k = 1; k <= gamma; ++k) {
    c = c * (num_vars + k) / k;  // exact: product of k consecutive ints divisible by k!
  }
  return c;
}

}  // namespace mopf
