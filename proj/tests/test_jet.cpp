#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <random>

#include "fluidinv/jet.hpp"
#include "fluidinv/parser.hpp"

using namespace fluidinv;

namespace {
JetBundle plane(int k = 2) { return JetBundle{{"t", "x", "y"}, {"u", "v", "p", "rho", "s", "T"}, k}; }
Expr V(const std::string& n) { return Expr::var(n); }

// coefficient on u_J from the evolutionary representative:
// D_J(phi - xi^i u_i) + xi^i u_{J,i}
Expr closed_form(const VectorField& X, const JetBundle& b, const std::string& dep, const std::string& idx) {
  Expr q = X.coeff(dep);
  for (auto& i : b.indep) q -= X.coeff(i) * V(JetBundle::jet_name(dep, i));
  Expr r = total_derivative_multi(q, idx, b);
  for (auto& i : b.indep) r += X.coeff(i) * V(JetBundle::jet_name(dep, normalize_index(idx + i)));
  return r;
}

// random polynomial in jets of order <= 1
Expr random_jet_poly(std::mt19937_64& rng, const JetBundle& b) {
  auto coords = b.coordinates(1);
  Expr r;
  for (int t = 0; t < 3; ++t) {
    Expr m(static_cast<long>(rng() % 5) + 1);
    for (int f = 0; f < 2; ++f) m *= V(coords[rng() % coords.size()]);
    r += m;
  }
  return r;
}
}  // namespace

TEST_CASE("bundle dimensions") {
  auto b = plane();
  // 3 base + 6 * C(3 + k, k)
  CHECK(b.dimension(0) == 3 + 6);
  CHECK(b.dimension(1) == 3 + 6 * 4);
  CHECK(b.dimension(2) == 3 + 6 * 10);
  CHECK(b.jet_order("u_xy") == 2);
  CHECK(b.jet_order("x") == -1);
}

TEST_CASE("total_derivative") {
  auto b = plane();
  CHECK(total_derivative(V("u"), "x", b).same(V("u_x")));
  CHECK(total_derivative(V("s_x"), "t", b).same(V("s_tx")));
  CHECK(total_derivative(V("u") * V("u_y"), "x", b).same(V("u_x") * V("u_y") + V("u") * V("u_xy")));
  CHECK(total_derivative(V("x") * V("t"), "x", b).same(V("t")));
}

TEST_CASE("total derivatives commute") {
  auto b = plane(3);
  std::mt19937_64 rng(3);
  for (int i = 0; i < 30; ++i) {
    Expr e = random_jet_poly(rng, b) * sin(V("y")) + exp(V("x") * V("rho"));
    for (auto& a : b.indep)
      for (auto& c : b.indep)
        CHECK(total_derivative(total_derivative(e, a, b), c, b).same(total_derivative(total_derivative(e, c, b), a, b)));
  }
}

TEST_CASE("prolong translation") {
  auto b = plane();
  auto X = prolong(parse_vector_field("d/dx", b), b, 2);
  for (auto& q : b.coordinates(2))
    if (b.jet_order(q) >= 1) CHECK(X.coeff(q).is_zero_form());
}

TEST_CASE("prolong boost and rotation against the closed form") {
  auto b = plane();
  auto x4 = parse_vector_field("t*d/dx + d/du", b);
  auto p4 = prolong(x4, b, 1);
  CHECK(p4.coeff("u_t").same(-V("u_x")));
  CHECK(p4.coeff("v_t").same(-V("v_x")));
  CHECK(p4.coeff("u_x").is_zero_form());

  auto x3 = parse_vector_field("y*d/dx - x*d/dy + v*d/du - u*d/dv", b);
  auto p3 = prolong(x3, b, 1);
  CHECK(p3.coeff("u_x").same(V("v_x") + V("u_y")));
  CHECK(p3.coeff("u_y").same(V("v_y") - V("u_x")));

  for (auto* X : {&x3, &x4}) {
    auto P = prolong(*X, b, 2);
    for (auto& q : b.coordinates(2)) {
      std::string d, idx;
      if (!b.split(q, d, idx) || idx.empty()) continue;
      CHECK_MESSAGE(P.coeff(q).same(closed_form(*X, b, d, idx)), q);
    }
  }
}

TEST_CASE("apply") {
  auto b = plane();
  auto x3 = prolong(parse_vector_field("y*d/dx - x*d/dy + v*d/du - u*d/dv", b), b, 1);
  CHECK(apply(x3, V("u_x") + V("v_y")).is_zero_form());
  CHECK_FALSE(apply(x3, V("u_x")).is_zero_form());
  CHECK(apply(prolong(parse_vector_field("d/dt", b), b, 1), V("rho")).is_zero_form());
  auto x12 = prolong(parse_vector_field("p*d/dp + rho*d/drho - s*d/ds", b), b, 0);
  CHECK(apply(x12, V("rho")).same(V("rho")));
  CHECK_THROWS(apply(x12, V("rho_x")));
}

TEST_CASE("apply is a derivation") {
  auto b = plane();
  auto X = prolong(parse_vector_field("y*d/dx - x*d/dy + v*d/du - u*d/dv", b), b, 1);
  std::mt19937_64 rng(4);
  for (int i = 0; i < 20; ++i) {
    auto e1 = random_jet_poly(rng, b), e2 = random_jet_poly(rng, b);
    CHECK((apply(X, e1 * e2) - (apply(X, e1) * e2 + e1 * apply(X, e2))).is_zero_form());
  }
}

TEST_CASE("derivation_commutator") {
  auto b = plane();
  TotalDerivation n1{{{"t", Expr(1)}, {"x", V("u")}, {"y", V("v")}}};
  auto x4 = prolong(parse_vector_field("t*d/dx + d/du", b), b, 2);
  auto c = derivation_commutator(x4, n1, b);
  for (auto& i : b.indep) CHECK(c.coeff(i).is_zero_form());

  // oracle: both orders agree on random functions of order <= 1
  std::mt19937_64 rng(5);
  for (int i = 0; i < 20; ++i) {
    auto e = random_jet_poly(rng, b);
    CHECK((apply(x4, apply(n1, e, b)) - apply(n1, apply(x4, e), b)).is_zero_form());
  }

  auto dt = prolong(parse_vector_field("d/dt", b), b, 2);
  TotalDerivation dx{{{"x", Expr(1)}}};
  for (auto& i : b.indep) CHECK(derivation_commutator(dt, dx, b).coeff(i).is_zero_form());

  auto x3 = prolong(parse_vector_field("y*d/dx - x*d/dy + v*d/du - u*d/dv", b), b, 2);
  TotalDerivation n2{{{"x", V("rho_x")}, {"y", V("rho_y")}}};
  for (auto& i : b.indep) CHECK(derivation_commutator(x3, n2, b).coeff(i).is_zero_form());

  // a derivation that is not invariant
  TotalDerivation dxonly{{{"x", Expr(1)}}};
  CHECK_FALSE(derivation_commutator(x3, dxonly, b).coeff("y").is_zero_form());
}

TEST_CASE("bracket of point fields") {
  auto b = plane();
  auto x1 = parse_vector_field("d/dx", b), x2 = parse_vector_field("d/dy", b);
  CHECK(is_zero_field(bracket(x1, x2)));
  auto x4 = parse_vector_field("t*d/dx + d/du", b), x6 = parse_vector_field("d/dt", b);
  // [X4, X6] = -X1
  CHECK(is_zero_field(bracket(x4, x6) + x1));
}
