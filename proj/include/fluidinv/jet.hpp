#pragma once
/// Jet bundles, total derivatives and prolonged point vector fields.
///
/// A jet coordinate is a variable named dep_idx with idx a sorted multi-index
/// over single-letter independents (u_tx, rho_yy). Order zero is the bare name.

#include <map>
#include <string>
#include <vector>

#include "fluidinv/expr.hpp"
#include "fluidinv/parser.hpp"

namespace fluidinv {

struct JetBundle {
  std::vector<std::string> indep;  // t first
  std::vector<std::string> dep;
  int order = 2;

  static std::string jet_name(const std::string& dep, const std::string& idx);
  // dependent coordinate name -> (dep, idx); false for anything else
  bool split(const std::string& name, std::string& d, std::string& idx) const;
  bool is_indep(const std::string& name) const;
  int jet_order(const std::string& name) const;  // -1 if not a jet coordinate

  std::vector<std::string> multi_indices(int m) const;
  // base coordinates followed by all jets of order <= k, grouped by order
  std::vector<std::string> coordinates(int k) const;
  std::size_t dimension(int k) const { return coordinates(k).size(); }

  Alphabet alphabet(const std::set<std::string>& params = {}) const;
};

// D_i e
Expr total_derivative(const Expr& e, const std::string& i, const JetBundle& b);
// D_idx e for a multi-index
Expr total_derivative_multi(const Expr& e, const std::string& idx, const JetBundle& b);

struct VectorField {
  std::map<std::string, Expr> c;  // J^0 coordinate -> coefficient
  Expr coeff(const std::string& q) const;
  std::string str() const;
};

VectorField parse_vector_field(const std::string& text, const JetBundle& b,
                               const std::set<std::string>& params = {});
VectorField operator+(const VectorField& a, const VectorField& b);
VectorField operator*(const Expr& k, const VectorField& a);
bool is_zero_field(const VectorField& a);

// [X, Y] as point fields
VectorField bracket(const VectorField& x, const VectorField& y);

struct ProlongedField {
  VectorField base;
  int order = 0;
  std::map<std::string, Expr> c;  // every coordinate up to order
  Expr coeff(const std::string& q) const;
};

// recursion phi_{J,i} = D_i phi_J - sum_j D_i(xi^j) u_{J,j}
ProlongedField prolong(const VectorField& x, const JetBundle& b, int k);
// directional derivative; throws if e has jets beyond the prolongation order
Expr apply(const ProlongedField& x, const Expr& e);
Expr apply(const VectorField& x, const Expr& e);

struct TotalDerivation {
  std::map<std::string, Expr> a;  // independent -> coefficient
  Expr coeff(const std::string& i) const;
  std::string str() const;
};

Expr apply(const TotalDerivation& d, const Expr& e, const JetBundle& b);
// C^i = X(A_i) - nabla(xi^i)
TotalDerivation derivation_commutator(const ProlongedField& x, const TotalDerivation& d,
                                      const JetBundle& b);

}  // namespace fluidinv
