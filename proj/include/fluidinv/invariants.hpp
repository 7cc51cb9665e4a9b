#pragma once
/// Scenario catalog and the checks on kinematic / Euler / Navier-Stokes
/// invariants: invariance, invariant derivations, ranks, orbit dimensions,
/// singular sets, Hilbert and Poincare accounting, g_sym fields.

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "fluidinv/geometry.hpp"
#include "fluidinv/symmetry.hpp"
#include "fluidinv/thermo.hpp"

namespace fluidinv {

struct GeneratorSpec {
  std::string name, text, part, anchor;  // part: "m" or "thermo"
  VectorField field;
};

struct InvariantSpec {
  std::string name, text, anchor;
  std::string derivation, argument;  // set when the item is derivation(argument)
  std::string conjugation;           // "dot" or "entry" for generated items
};

struct DerivationSpec {
  std::string name, anchor;
  std::map<std::string, std::string> text;
  TotalDerivation d;
};

struct SingularSet {
  std::string name, anchor;
  std::vector<std::string> equations;
};

struct HilbertPiece {
  int k_min = 0;
  std::optional<int> k_max;
  std::string formula;
};

struct ExponentCases {
  std::string exponent;      // rational exponent -m/k or m/k
  std::string sign = "any";  // negative | positive | any
  bool rational_only = false;
  std::vector<std::string> irrational, k_even, k_odd_m_even, k_odd_m_odd;
};

struct StateCase {
  std::string name, anchor, kind;  // one_dim | two_dim_commutative | two_dim_noncommutative | reference
  std::map<std::string, std::string> params;
  std::vector<std::pair<std::string, std::string>> symbols;  // ordered abbreviations
  std::map<std::string, std::string> functions;               // F -> instance in X
  std::string pressure, temperature;
  std::vector<std::string> constraints, relations;
  std::vector<std::string> domain_constraints;  // on (rho, s), checked by sign certification
  std::optional<ExponentCases> exponent_cases;
  std::optional<std::string> s_max, rho_min;
  std::vector<std::map<std::string, std::string>> algebra;  // combinations of h
  std::string expect = "admissible";
  int expected_dim = 0;
};

struct ScaledDerivation {
  std::string factor, derivation;
};

struct GsymCase {
  std::string name, anchor;
  std::vector<std::pair<std::string, std::string>> params;   // ordered; symbolic or rational
  std::vector<std::pair<std::string, std::string>> symbols;  // ordered abbreviations
  std::vector<std::map<std::string, std::string>> generators;  // combinations of g
  std::vector<std::string> relations, genericity;
  std::vector<std::pair<std::string, std::string>> action;  // invariant -> image under generators[0]
  std::vector<std::string> invariants;
  std::vector<ScaledDerivation> derivations;
};

struct StructureTable {
  std::string anchor;
  bool complete = true;
  std::vector<StructureEntry> entries;
};

struct Scenario {
  std::string name, anchor, geometry, kind, file;
  std::set<std::string> params;
  std::vector<GeneratorSpec> generators;
  std::vector<NamedField> h;
  std::string h_anchor;
  StructureTable h_structure;
  std::vector<InvariantSpec> invariants0, invariants1;
  struct ConjugationSpec {
    std::string anchor;
    bool tau = false;
    std::vector<std::vector<std::string>> frame, V;  // frame vectors, rows of V
    std::vector<std::string> dots, entries;          // names of generated items
  };
  std::optional<ConjugationSpec> conjugation;
  std::vector<std::string> derived_from;
  std::vector<DerivationSpec> derivations;
  std::string derivations_anchor, independence_condition;
  std::vector<SingularSet> singular_sets;
  std::string singular_anchor;
  std::vector<std::pair<std::string, std::string>> singular_sample;
  std::vector<HilbertPiece> hilbert;
  std::string hilbert_anchor, poincare, poincare_anchor;
  std::map<std::string, int> counts;
  std::string counts_anchor;
  std::vector<StateCase> states;
  std::vector<GsymCase> gsym;
  std::vector<std::string> notes;

  std::vector<NamedField> gm() const;
  std::vector<NamedField> g() const;
  const GeneratorSpec* generator(const std::string& name) const;
};

class CatalogError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::string catalog_dir();
Scenario load_scenario(const std::string& path);
// a single state entry in the catalog's state layout
StateCase load_state_case(const std::string& path);
std::vector<Scenario> load_catalog(const std::string& dir = catalog_dir());
// entries without an anchor string
std::vector<std::string> missing_anchors(const Scenario& sc);

// shared per-scenario work: built systems and named invariant expressions
class Workspace {
 public:
  explicit Workspace(const Scenario& sc);
  const Scenario& scenario() const { return sc_; }
  const PDESystem& generic() const;
  const PDESystem& free() const;
  const std::map<std::string, Expr>& named() const;  // invariants by name
  std::vector<Expr> order0() const;
  std::vector<Expr> order1() const;
  std::vector<std::string> order1_names() const;
  const TotalDerivation& derivation(const std::string& name) const;
  Expr parse(const std::string& text, const std::map<std::string, Expr>& extra = {}) const;

 private:
  const Scenario& sc_;
  mutable std::unique_ptr<PDESystem> generic_, free_;
  mutable std::unique_ptr<std::map<std::string, Expr>> named_;
};

// ---------------------------------------------------------------- checks

struct Verdict {
  ZeroVerdict v = ZeroVerdict::Certified;
  std::string detail;
  std::map<std::string, Q> witness;
};

Verdict check_invariance(const Expr& J, const std::vector<NamedField>& algebra, const PDESystem& S,
                         const ZeroOptions& opt = {});

struct DerivationCheck {
  Verdict commutators;
  bool independent = false;  // determinant is a nonzero multiple of the condition
  Expr determinant;
  std::string detail;
};
DerivationCheck check_derivations(const Workspace& w, const ZeroOptions& opt = {});

// a point of the solved system: free coordinates sampled, principal computed
struct ShellPoint {
  std::map<std::string, Q> values;
  EvalPolicy policy;
};
ShellPoint sample_point(const PDESystem& S, std::uint64_t seed,
                        const std::vector<std::pair<std::string, Expr>>& overrides = {});

// rank of d(exprs) w.r.t. free coordinates of order <= k
std::size_t independence_rank(const std::vector<Expr>& exprs, const PDESystem& S, const ShellPoint& pt,
                              int k);
// rank of { nabla_i J_j } w.r.t. free coordinates of order k+1, J of order <= k
std::size_t derived_rank(const std::vector<Expr>& js, const std::vector<TotalDerivation>& ds,
                         const PDESystem& S, const ShellPoint& pt, int k);
std::size_t orbit_dimension(const std::vector<NamedField>& algebra, const PDESystem& S,
                            const ShellPoint& pt, int k);

struct Membership {
  std::string set;
  bool member = false;
  std::vector<Q> values;
};
std::vector<Membership> singular_membership(const Workspace& w, const ShellPoint& pt);

// coefficients of the power series of a rational function of z
std::vector<Q> series(const Expr& rational_in_z, int n);
std::optional<Q> hilbert_value(const Scenario& sc, int k);

struct HilbertReport {
  bool series_ok = true;
  int first_bad_k = -1;
  std::vector<Q> series, hilbert;
  std::vector<std::pair<int, std::pair<long, long>>> accounting;  // k -> (sum H, dim - orbit)
  bool accounting_ok = true;
};
HilbertReport verify_hilbert_poincare(const Workspace& w, int k_max, std::uint64_t seed);

// H^-1 V H entries and the six dot products for the frame (a_g, grad rho, grad s)
struct Conjugation {
  std::vector<Expr> dots;  // rr, ss, rs, aa, ra, sa
  std::vector<Expr> entries;  // row-major 3x3
  Expr det;
};
Conjugation construct_conjugation_invariants(const std::vector<std::vector<Expr>>& frame_cols,
                                             const std::vector<std::vector<Expr>>& V);

struct GsymCheck {
  bool genericity_ok = true;
  std::string rejected;  // violated denominator / relation
  std::vector<std::pair<std::string, Verdict>> action, invariants, derivations;
};
GsymCheck check_gsym_field(const Workspace& w, const GsymCase& c, const ZeroOptions& opt = {});

// family instance from a state case; throws ConstraintViolation naming the inequality
StateSurface family_from_classification(const StateCase& c,
                                        const std::map<std::string, std::string>& overrides = {});
// the same family with its functions left undetermined
StateSurface symbolic_family(const StateCase& c);
// left-hand sides (> 0) of the domain constraints on the instantiated functions
std::vector<Expr> domain_constraints(const StateCase& c);
std::vector<VectorField> state_algebra(const Scenario& sc, const StateCase& c,
                                       const StateSurface& L);
// the same combinations taken over another basis named like h (e.g. lifts to g)
std::vector<VectorField> state_algebra(const Scenario& sc, const StateCase& c,
                                       const std::vector<NamedField>& basis);

}  // namespace fluidinv
