#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "momentopf/polynomial.hpp"

namespace mopf {

struct LinearTerm {
  std::uint32_t var = 0;
  double coef = 0;
  bool operator==(const LinearTerm&) const = default;
};

// constant + sum coef_i * x_{var_i}, terms sorted by var and merged.
struct AffineForm {
  double constant = 0;
  std::vector<LinearTerm> terms;

  void add(std::uint32_t var, double coef);
  void add(const AffineForm& other, double scale = 1.0);
  double evaluate(std::span<const double> x) const;
  bool operator==(const AffineForm&) const = default;
};

enum class VariableKind { moment, epigraph, dispatch };

struct VariableInfo {
  VariableKind kind = VariableKind::moment;
  Exponent alpha;    // moment variables
  int bus_id = -1;   // epigraph / dispatch variables
  int unit = -1;     // dispatch variables
  std::string name(std::size_t num_poly_vars = 0) const;
};

// Labeled scalar constraint: form == 0 or form >= 0.
struct LinearConstraint {
  AffineForm form;
  std::string label;
};

// Symmetric matrix of affine forms required PSD; only the upper
// triangle (row <= col) is stored.
struct PsdEntry {
  std::uint32_t row = 0, col = 0;
  AffineForm value;
};
struct PsdBlockDesc {
  std::string label;
  std::uint32_t dim = 0;
  std::vector<PsdEntry> entries;
};

struct ConicProgram {
  std::vector<VariableInfo> variables;
  AffineForm objective;  // minimized
  std::vector<LinearConstraint> equalities;    // form == 0
  std::vector<LinearConstraint> inequalities;  // form >= 0
  std::vector<PsdBlockDesc> psd_blocks;
  std::map<std::string, std::string> metadata;
};

// Wire format (see README): {"format":"momentopf-conic-1", "variables",
// "objective", "equalities", "inequalities", "psd_blocks", "metadata"}.
std::string program_to_json(const ConicProgram& p);
ConicProgram program_from_json(const std::string& text);

// Interns moment exponents and auxiliary scalars during relaxation
// assembly; finalize() reindexes moments in graded-lex order (auxiliary
// variables after, ordered by kind/bus/unit) for deterministic output.
class MomentRegistry {
 public:
  std::uint32_t intern_moment(const Exponent& alpha);
  std::uint32_t add_epigraph(int bus_id);
  std::uint32_t add_dispatch(int bus_id, int unit);
  const std::vector<VariableInfo>& variables() const { return vars_; }
  std::size_t size() const { return vars_.size(); }

  // Returns perm with perm[old_index] == new_index and reorders the
  // stored variables accordingly.
  std::vector<std::uint32_t> finalize();

 private:
  std::vector<VariableInfo> vars_;
  std::unordered_map<Exponent, std::uint32_t, ExponentHash> moment_index_;
};

// Symbolic L_y{g}: one linear term per monomial (constants fold into
// the constant part, not y_0).
AffineForm linear_form(const Polynomial& g, MomentRegistry& reg);

// Remaps variable indices through a permutation (old index -> new).
void remap(AffineForm& f, std::span<const std::uint32_t> perm);
void remap(ConicProgram& p, std::span<const std::uint32_t> perm);

// Moment values keyed by exponent, from a solved variable vector.
MomentVector moments_from_solution(const ConicProgram& p, std::span<const double> x);

}  // namespace mopf
