#pragma once
/// Point symmetries of the built systems, Lie-algebra presentations and the
/// thermodynamic projection theta.

#include <map>
#include <string>
#include <vector>

#include "fluidinv/geometry.hpp"
#include "fluidinv/jet.hpp"
#include "fluidinv/linalg.hpp"
#include "fluidinv/thermo.hpp"

namespace fluidinv {

struct SymmetryVerdict {
  ZeroVerdict verdict = ZeroVerdict::Certified;
  std::string where;  // failing component
  std::map<std::string, Q> witness;
  bool ok(bool strict = true) const {
    return verdict == ZeroVerdict::Certified || (!strict && verdict == ZeroVerdict::Probable);
  }
};

// drop d/dp, d/dT and restrict coefficients to the state surface
VectorField reduce_field(const VectorField& x, const PDESystem& s);
SymmetryVerdict is_symmetry(const VectorField& x, const PDESystem& s, const ZeroOptions& opt = {});

class NotProjectable : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};
// X(rho) d/drho + X(s) d/ds + X(p) d/dp + X(T) d/dT
VectorField theta_hom(const VectorField& x);

struct NamedField {
  std::string name;
  VectorField field;
};

// [a, b] = sum c_k x_k with constant c; empty optional if the bracket leaves the span
std::optional<std::vector<Q>> decompose(const VectorField& f, const std::vector<NamedField>& basis,
                                        std::uint64_t seed = 7);

struct StructureEntry {
  std::string a, b;
  std::map<std::string, Q> result;  // generator -> coefficient
};
struct StructureReport {
  bool ok = true;
  std::vector<std::string> failures;
  std::vector<StructureEntry> computed;  // nonzero brackets
};
// Brackets of all pairs must close on the span; listed entries must match
// exactly, unlisted pairs must commute when the table is declared complete.
StructureReport check_structure(const std::vector<NamedField>& gens,
                                const std::vector<StructureEntry>& table, bool complete);

// dimension of ker theta restricted to span(gens)
std::size_t kernel_theta_dimension(const std::vector<NamedField>& gens);

// [prolong(X), prolong(Y)] - prolong([X, Y]) on all coordinates up to order k
std::vector<std::pair<std::string, Expr>> prolongation_bracket_defect(const VectorField& x,
                                                                      const VectorField& y,
                                                                      const JetBundle& b, int k);

// preimages under theta of the thermodynamic basis h, taken inside span(gens)
std::vector<VectorField> theta_lifts(const std::vector<NamedField>& gens,
                                     const std::vector<NamedField>& h);

struct GsymAssembly {
  std::vector<NamedField> fields;
  StateSymmetries ht;
};
GsymAssembly assemble_gsym(const std::vector<NamedField>& gm, const std::vector<NamedField>& gens,
                           const std::vector<NamedField>& h, const StateSurface& L);

}  // namespace fluidinv
