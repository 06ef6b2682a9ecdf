#pragma once

#include <cstdint>
#include <initializer_list>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

namespace mopf {

using VarId = std::uint32_t;

// Monomial exponent vector alpha, stored sparsely as (variable, power)
// pairs sorted by variable id.  The monomial it denotes is x^alpha.
class Exponent {
 public:
  using Entry = std::pair<VarId, std::uint32_t>;

  Exponent() = default;
  Exponent(std::initializer_list<Entry> entries);
  explicit Exponent(std::vector<Entry> entries);

  static Exponent variable(VarId v, std::uint32_t power = 1);

  const std::vector<Entry>& entries() const { return entries_; }
  std::uint32_t degree() const;
  bool constant() const { return entries_.empty(); }
  std::uint32_t exponent_of(VarId v) const;

  // Dense exponent vector over variables [0, num_vars).
  std::vector<std::uint32_t> dense(std::size_t num_vars) const;

  // Monomial product x^a * x^b = x^(a+b).
  Exponent operator+(const Exponent& other) const;

  bool operator==(const Exponent& other) const { return entries_ == other.entries_; }
  bool operator!=(const Exponent& other) const { return !(*this == other); }

  // Ordering of the monomial basis x_gamma: lower total degree first;
  // within a degree the monomial with the larger power on the earliest
  // variable comes first (so [.., x1^2, x1 x2, x1 x3, x2^2, ..]).
  static bool graded_lex_less(const Exponent& a, const Exponent& b);

  // "y_020"-style subscript over a dense variable window, for messages.
  std::string subscript(std::size_t num_vars) const;

 private:
  void normalize();
  std::vector<Entry> entries_;
};

struct ExponentHash {
  std::size_t operator()(const Exponent& e) const noexcept;
};

struct GradedLexLess {
  bool operator()(const Exponent& a, const Exponent& b) const {
    return Exponent::graded_lex_less(a, b);
  }
};

// Sparse polynomial with real coefficients; no explicit zero terms.
class Polynomial {
 public:
  using TermMap = std::map<Exponent, double, GradedLexLess>;

  Polynomial() = default;
  static Polynomial constant(double c);
  static Polynomial monomial(Exponent e, double coefficient = 1.0);

  const TermMap& terms() const { return terms_; }
  bool zero() const { return terms_.empty(); }
  std::uint32_t degree() const;
  double coefficient(const Exponent& e) const;
  void add_term(const Exponent& e, double coefficient);

  Polynomial& operator+=(const Polynomial& other);
  Polynomial& operator-=(const Polynomial& other);
  Polynomial& operator*=(double s);

  friend Polynomial operator+(Polynomial a, const Polynomial& b) { return a += b; }
  friend Polynomial operator-(Polynomial a, const Polynomial& b) { return a -= b; }
  friend Polynomial operator*(Polynomial p, double s) { return p *= s; }
  friend Polynomial operator*(double s, Polynomial p) { return p *= s; }
  Polynomial operator*(const Polynomial& other) const;
  Polynomial operator-() const;

  // Evaluate at a point; x is indexed by VarId and must cover every
  // variable that appears.
  double evaluate(std::span<const double> x) const;

  // Variables appearing with nonzero coefficient, ascending.
  std::vector<VarId> support() const;

 private:
  TermMap terms_;
};

struct MissingMomentError : std::runtime_error {
  explicit MissingMomentError(const Exponent& alpha, const std::string& what)
      : std::runtime_error(what), alpha(alpha) {}
  Exponent alpha;
};

// Assignment alpha -> y_alpha of moment values to exponents.
class MomentVector {
 public:
  void set(const Exponent& e, double value);
  std::optional<double> get(const Exponent& e) const;
  bool contains(const Exponent& e) const;
  std::size_t size() const { return values_.size(); }

  // Moments of the Dirac measure at x: y_alpha = x^alpha for every
  // alpha over `vars` with |alpha| <= max_degree.
  static MomentVector from_point(std::span<const double> x, std::span<const VarId> vars,
                                 std::uint32_t max_degree);

 private:
  std::unordered_map<Exponent, double, ExponentHash> values_;
};

// L_y{g}: replace each monomial of g by its moment.  Throws
// MissingMomentError when a required moment is absent.
double apply_Ly(const Polynomial& g, const MomentVector& y);

// All monomials of total degree <= gamma over the given variables
// (ascending ids expected), in the x_gamma graded-lex order.
std::vector<Exponent> monomial_basis(std::span<const VarId> vars, std::uint32_t gamma);

// Convenience: variables 0..num_vars-1 with an eliminated subset removed.
std::vector<Exponent> monomial_basis(std::size_t num_vars, std::uint32_t gamma,
                                     std::span<const VarId> eliminated);

// Basis size without elimination: C(num_vars + gamma, gamma).
unsigned long long monomial_count(std::size_t num_vars, std::uint32_t gamma);

}  // namespace mopf
