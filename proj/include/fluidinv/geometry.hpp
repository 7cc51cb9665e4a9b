#pragma once
/// Metric charts, metric operators and the Euler / Navier-Stokes systems
/// reduced through a thermodynamic state p = P(rho, s), T = Theta(rho, s).

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "fluidinv/expr.hpp"
#include "fluidinv/jet.hpp"

namespace fluidinv {

using Matrix = std::vector<std::vector<Expr>>;
using SymTensor2 = Matrix;

struct MetricChart {
  std::string name;
  std::vector<std::string> coords;  // spatial coordinates
  Matrix g;
  std::vector<Expr> gravity;  // contravariant components
  Expr sqrt_det;
  std::size_t dim() const { return coords.size(); }
};

class GeometryError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// plane | sphere | layer | space3
MetricChart chart(const std::string& name);
std::vector<std::string> chart_names();

Matrix inverse(const Matrix& m);
Expr determinant(const Matrix& m);

// G[k][i][j] = Gamma^k_ij
using Christoffel = std::vector<std::vector<std::vector<Expr>>>;
Christoffel christoffel(const MetricChart& m);
// d_k g_ij - Gamma^l_ki g_lj - Gamma^l_kj g_il for all (k,i,j); all zero for Levi-Civita
std::vector<Expr> metricity_residuals(const MetricChart& m, const Christoffel& gam);

Expr inner(const SymTensor2& a, const SymTensor2& b, const Matrix& ginv);
SymTensor2 rate_of_deformation(const std::vector<Expr>& u, const MetricChart& m, const JetBundle& b);
SymTensor2 viscous_stress(const SymTensor2& d, const MetricChart& m, const Expr& eta, const Expr& zeta);
Expr dissipation(const SymTensor2& sigma, const SymTensor2& d, const MetricChart& m);
Expr laplace_beltrami(const Expr& f, const MetricChart& m, const JetBundle& b);
std::vector<Expr> divergence_sym2(const SymTensor2& sigma, const MetricChart& m, const JetBundle& b);

struct Constraint {
  std::string text;  // as written, for reports
  Expr lhs;          // constraint reads lhs > 0
  bool nonzero = false;  // lhs != 0 instead
};

struct StateSurface {
  std::string name;
  Expr pressure;     // P(rho, s)
  Expr temperature;  // Theta(rho, s)
  std::optional<Expr> energy;
  std::map<std::string, Q> params;  // fixed values; other symbols stay symbolic
  std::vector<Constraint> constraints;
  std::optional<Q> s_max;
  Q rho_min = 0;
  bool free = false;  // p and T kept as unknowns
};

// P = rho^2 E_rho, T = E_s with an opaque energy E(rho, s)
StateSurface generic_state();
// p and T stay dependent variables with no state relation
StateSurface free_state();

class DegenerateState : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct PDESystem {
  JetBundle bundle;
  MetricChart chart;
  std::string kind;  // euler | navier_stokes
  StateSurface state;
  std::vector<Expr> equations;
  std::vector<std::string> principal;   // one per equation
  std::map<std::string, Expr> solved;   // principal jets up to order -> rhs in free jets
  std::set<std::string> params;

  bool is_principal(const std::string& v) const { return solved.count(v) > 0; }
  std::vector<std::string> free_coordinates(int k) const;
  std::size_t dimension(int k) const { return free_coordinates(k).size(); }
  // substitute solved forms; throws if a jet beyond the solved order remains
  Expr reduce(const Expr& e) const;
  // residual principal - rhs per equation
  std::vector<Expr> residuals() const;
};

PDESystem build_system(const MetricChart& m, const std::string& kind, const StateSurface& st,
                       int order = 2);

// pressure and temperature as jet expressions of the reduced bundle
Expr state_pressure(const PDESystem& s);
Expr state_temperature(const PDESystem& s);

}  // namespace fluidinv
