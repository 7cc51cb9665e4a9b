#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <random>

#include "fluidinv/invariants.hpp"
#include "fluidinv/parser.hpp"
#include "fluidinv/thermo.hpp"

using namespace fluidinv;

namespace {
Expr V(const std::string& n) { return Expr::var(n); }
Expr P(const std::string& s) { return parse_expr(s); }

StateSurface state(const std::string& p, const std::string& t, std::vector<std::string> cons = {},
                   std::optional<Q> smax = {}) {
  StateSurface L;
  L.pressure = P(p);
  L.temperature = P(t);
  for (auto& c : cons) L.constraints.push_back(parse_constraint(c));
  L.s_max = smax;
  return L;
}

StateSurface ideal_gas() {
  return state("k*rho^(k+1)*exp(s/gamma)", "(1/gamma)*rho^k*exp(s/gamma)", {"k > 0", "gamma > 0"});
}

JetBundle thermo_space() { return JetBundle{{}, {"p", "rho", "s", "T"}, 0}; }

std::vector<VectorField> fields(const std::vector<std::string>& texts) {
  std::vector<VectorField> out;
  for (auto& t : texts) out.push_back(parse_vector_field(t, thermo_space()));
  return out;
}

const std::vector<std::string> euler_plane_h{"d/ds", "d/dp", "rho*d/drho", "s*d/ds", "p*d/dp", "T*d/dT"};
const std::vector<std::string> ns_plane_h{"d/ds", "d/dp", "rho*d/drho - T*d/dT", "p*d/dp + T*d/dT"};

const Scenario& scenario(const std::string& name) {
  static const auto cat = load_catalog();
  for (auto& s : cat)
    if (s.name == name) return s;
  throw std::runtime_error("no scenario " + name);
}
const StateCase& state_case(const std::string& sc, const std::string& name) {
  for (auto& c : scenario(sc).states)
    if (c.name == name) return c;
  throw std::runtime_error("no state " + name);
}

Expr random_thermo_poly(std::mt19937_64& rng) {
  const char* vs[] = {"p", "rho", "s", "T"};
  Expr r;
  for (int t = 0; t < 3; ++t) {
    Expr m(static_cast<long>(rng() % 7) - 3);
    for (int f = 0; f < 2; ++f) m *= V(vs[rng() % 4]);
    r += m;
  }
  return r;
}
}  // namespace

TEST_CASE("poisson_bracket") {
  CHECK(poisson_bracket(V("s"), V("T")).same(Expr(1)));
  CHECK(poisson_bracket(V("p"), V("rho")).same(-V("rho") * V("rho")));
  auto f = P("p*rho + s^2*T");
  CHECK(poisson_bracket(f, f).is_zero_form());
}

TEST_CASE("poisson bracket is bilinear, antisymmetric and satisfies Jacobi") {
  std::mt19937_64 rng(31);
  for (int i = 0; i < 50; ++i) {
    auto f = random_thermo_poly(rng), g = random_thermo_poly(rng), h = random_thermo_poly(rng);
    CHECK((poisson_bracket(f, g) + poisson_bracket(g, f)).is_zero_form());
    CHECK((poisson_bracket(f + 2 * h, g) - poisson_bracket(f, g) - 2 * poisson_bracket(h, g)).is_zero_form());
    auto jac = poisson_bracket(f, poisson_bracket(g, h)) + poisson_bracket(g, poisson_bracket(h, f)) +
               poisson_bracket(h, poisson_bracket(f, g));
    CHECK(jac.is_zero_form());
  }
}

TEST_CASE("check_lagrangian") {
  auto ig = check_lagrangian(ideal_gas());
  CHECK(ig.ok);
  CHECK(ig.residual.is_zero_form());
  CHECK(ig.bracket_residual.is_zero_form());
  CHECK(check_lagrangian(state("rho", "s")).ok);
  auto bad = check_lagrangian(state("s", "s"));
  CHECK_FALSE(bad.ok);
  CHECK(bad.residual.same(Expr(1)));
}

TEST_CASE("kappa") {
  auto k = kappa(ideal_gas());
  CHECK(k.minor1.same(P("k*(k+1)*rho^k*exp(s/gamma)")));
  CHECK(k.minor2.same(P("k/gamma^2*rho^(2*k)*exp(2*s/gamma)")));
  // oracle: sampled positivity on rho in (0, 10], s in [-5, 5]
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> ur(0.01, 10.0), us(-5.0, 5.0), up(0.1, 4.0);
  for (int i = 0; i < 200; ++i) {
    std::map<std::string, double> a{{"rho", ur(rng)}, {"s", us(rng)}, {"k", up(rng)}, {"gamma", up(rng)}};
    CHECK(eval_double(k.minor1, a) > 0);
    CHECK(eval_double(k.minor2, a) > 0);
  }
  CHECK(kappa(state("-rho", "s")).minor1.same(Expr(-1)));
  auto f = kappa(state("rho^2 + 1", "-1/s"));
  CHECK(f.minor1.same(P("2*rho")));
  CHECK(f.minor2.same(P("2*rho/s^2")));
  CHECK(f.m[0][1].same(f.m[1][0]));
}

TEST_CASE("kappa agrees with the energy-form conditions") {
  auto L = generic_state();
  auto k = kappa(L);
  Expr rho = V("rho"), s = V("s");
  auto d = [&](int a, int b) { return fn("E", {a, b}, {rho, s}); };
  Expr pres = rho * rho * d(1, 0);
  Expr A = d(2, 0) + 2 * pres / (rho * rho * rho);
  CHECK((k.minor1 - rho * rho * A).is_zero_form());
  CHECK((k.minor2 - rho * rho * (d(0, 2) * A - d(1, 1) * d(1, 1))).is_zero_form());
}

TEST_CASE("check_admissible") {
  auto ig = check_admissible(ideal_gas());
  CHECK(ig.verdict == AdmissibleVerdict::Certified);
  auto neg = check_admissible(state("-rho", "s"));
  CHECK(neg.verdict == AdmissibleVerdict::Inadmissible);
  CHECK(neg.failed.find("P_rho") != std::string::npos);
  CHECK_FALSE(neg.witness.empty());
  auto fam = check_admissible(state("rho^2 + 1", "-1/s", {}, Q(0)));
  CHECK((fam.verdict == AdmissibleVerdict::Certified || fam.verdict == AdmissibleVerdict::Sampled));
  // temperature changes sign without the entropy bound
  auto open = check_admissible(state("rho^2 + 1", "-1/s"));
  CHECK(open.verdict == AdmissibleVerdict::Inadmissible);
}

TEST_CASE("tangency_residual") {
  auto H = fields(euler_plane_h);
  // lambda = (0, -2, 1, -1, 2, 1)
  std::vector<long> lam{0, -2, 1, -1, 2, 1};
  VectorField Z;
  for (std::size_t i = 0; i < H.size(); ++i) Z = Z + Expr(lam[i]) * H[i];
  auto L = state("rho^2 + 1", "-1/s");
  auto r = tangency_residual(Z, L);
  CHECK(r.first.is_zero_form());
  CHECK(r.second.is_zero_form());

  auto y1 = tangency_residual(H[0], ideal_gas());
  CHECK_FALSE((y1.first.is_zero_form() && y1.second.is_zero_form()));

  auto z = tangency_residual(VectorField{}, ideal_gas());
  CHECK(z.first.is_zero_form());
  CHECK(z.second.is_zero_form());
}

TEST_CASE("state_symmetries") {
  auto ig = state("2*rho^3*exp(s/3)", "(1/3)*rho^2*exp(s/3)");
  auto ss = state_symmetries(ig, fields(ns_plane_h));
  CHECK(ss.basis.size() == 2);
  CHECK(ss.confirmed);

  auto gen = state("rho^3 + rho*s^2 + s", "2*rho*s - 1/rho + s^3");
  CHECK(state_symmetries(gen, fields(euler_plane_h)).basis.size() == 0);

  auto fam = state_symmetries(state("rho^2 + 1", "-1/s"), fields(euler_plane_h));
  REQUIRE(fam.basis.size() >= 1);
  // the defining combination lies in the span
  QMatrix m = fam.basis;
  std::size_t r0 = rank(m);
  m.push_back({0, -2, 1, -1, 2, 1});
  CHECK(rank(m) == r0);
}

TEST_CASE("family_from_classification") {
  auto one = family_from_classification(state_case("euler-plane", "one-dim"));
  CHECK(one.pressure.same(P("rho^2 + 1")));
  CHECK(one.temperature.same(P("-1/s")));
  CHECK(check_lagrangian(one).ok);

  auto two = family_from_classification(state_case("ns-plane", "two-dim-commutative"));
  CHECK(two.pressure.same(P("exp(s)*rho^2 + 1")));
  CHECK(two.temperature.same(P("exp(s)*rho")));
  CHECK(check_admissible(two).verdict == AdmissibleVerdict::Certified);

  auto& c = state_case("euler-plane", "one-dim");
  try {
    family_from_classification(c, {{"lam5", "-2"}});
    FAIL("accepted");
  } catch (const ConstraintViolation& e) {
    CHECK(std::string(e.what()).find("lam5/lam3 > 0") != std::string::npos);
  }

  try {
    family_from_classification(state_case("ns-plane", "two-dim-commutative"), {{"b4", "1/2"}, {"b2", "-1/2"}});
    FAIL("accepted");
  } catch (const ConstraintViolation& e) {
    CHECK(std::string(e.what()).find("beta > 1") != std::string::npos);
  }
}

TEST_CASE("every classified family is Lagrangian and tangent to its algebra") {
  for (auto& sc : load_catalog()) {
    for (auto& c : sc.states) {
      if (c.kind == "two_dim_noncommutative") continue;
      CAPTURE(sc.name);
      CAPTURE(c.name);
      auto L = family_from_classification(c);
      CHECK(check_lagrangian(L).ok);
      for (auto& Z : state_algebra(sc, c, L)) {
        auto r = tangency_residual(Z, L);
        CHECK(r.first.is_zero_form());
        CHECK(r.second.is_zero_form());
      }
    }
  }
}

TEST_CASE("non-commutative two-dimensional algebras admit no state") {
  auto ex = noncommutative_exclusion(fields(euler_plane_h));
  CHECK(ex.excluded);
  CHECK_FALSE(ex.reason.empty());
}

TEST_CASE("constraints") {
  auto c = parse_constraint("beta > 1");
  CHECK(c.text == "beta > 1");
  CHECK(c.lhs.same(V("beta") - 1));
  CHECK(parse_constraint("a != b").nonzero);
  StateSurface L = state("rho", "s", {"C > 0"});
  L.params["C"] = Q(-1);
  CHECK_THROWS_AS(validate_parameters(L), ConstraintViolation);
}
