#pragma once
/// Contact / symplectic thermodynamics on the (p, rho, s, T) space.
///
/// Omega = ds^T + rho^-2 drho^dp. A state is a Lagrangian surface given as
/// p = P(rho, s), T = Theta(rho, s); it is admissible when kappa is negative
/// definite, i.e. P_rho > 0 and Theta_s P_rho - rho^2 Theta_rho^2 > 0, with T > 0.

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "fluidinv/geometry.hpp"
#include "fluidinv/jet.hpp"

namespace fluidinv {

Expr poisson_bracket(const Expr& f, const Expr& g);

// substitute fixed parameter values of the state
Expr state_expr(const StateSurface& L, const Expr& e);
// restrict a function of (p, rho, s, T) to the surface
Expr on_surface(const StateSurface& L, const Expr& e);

struct LagrangianCheck {
  bool ok = false;
  Expr residual;          // P_s - rho^2 Theta_rho
  Expr bracket_residual;  // [p - P, T - Theta] on the surface
};
LagrangianCheck check_lagrangian(const StateSurface& L);

struct KappaForm {
  Matrix m;    // coefficients in (drho, ds)
  Expr minor1;  // P_rho
  Expr minor2;  // Theta_s P_rho - rho^2 Theta_rho^2
};
KappaForm kappa(const StateSurface& L);

enum class Sign { Pos, Neg, Unknown };

struct SignContext {
  std::vector<Expr> positive;  // expressions known to be > 0
  std::optional<Q> s_max;
};
SignContext sign_context(const StateSurface& L);
Sign certify_sign(const Expr& e, const SignContext& ctx);

enum class AdmissibleVerdict { Certified, Sampled, Inadmissible, Unknown };
std::string to_string(AdmissibleVerdict v);

struct AdmissibleResult {
  AdmissibleVerdict verdict = AdmissibleVerdict::Unknown;
  std::string failed;  // name of the first condition that failed or stayed open
  std::map<std::string, double> witness;
  std::vector<std::string> notes;
};
AdmissibleResult check_admissible(const StateSurface& L, int n_samples = 200,
                                  std::uint64_t seed = 1);

// pullback of iota_Z Omega: (drho component, ds component)
std::pair<Expr, Expr> tangency_residual(const VectorField& Z, const StateSurface& L);

struct StateSymmetries {
  std::vector<std::vector<Q>> basis;  // coefficient vectors over the given fields
  bool confirmed = true;              // every basis vector certified symbolically
  std::string note;
};
StateSymmetries state_symmetries(const StateSurface& L, const std::vector<VectorField>& H,
                                 std::uint64_t seed = 1);

// constraints read "A > B", "A < B", "A >= B", "A <= B" or "A != B"
Constraint parse_constraint(const std::string& text, const Alphabet& alpha = Alphabet::any());

class ConstraintViolation : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};
// checks constraints free of rho and s at the fixed parameter values
void validate_parameters(const StateSurface& L);

// No admissible state is tangent to a non-commutative two-dimensional
// subalgebra of h: such an algebra contains a nonzero element of [h, h].
struct NoncommutativeExclusion {
  bool excluded = false;
  std::string reason;
};
NoncommutativeExclusion noncommutative_exclusion(const std::vector<VectorField>& h);

}  // namespace fluidinv
