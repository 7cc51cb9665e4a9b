#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "fluidinv/invariants.hpp"
#include "fluidinv/parser.hpp"
#include "fluidinv/symmetry.hpp"

using namespace fluidinv;

namespace {
Expr V(const std::string& n) { return Expr::var(n); }

const std::vector<Scenario>& catalog() {
  static const auto cat = load_catalog();
  return cat;
}
const Scenario& scenario(const std::string& name) {
  for (auto& s : catalog())
    if (s.name == name) return s;
  throw std::runtime_error("no scenario " + name);
}

JetBundle with_state_coords(const PDESystem& S) {
  JetBundle b = S.bundle;
  if (!S.state.free) {
    b.dep.push_back("p");
    b.dep.push_back("T");
  }
  return b;
}

StateSurface ideal_gas() {
  StateSurface L;
  L.pressure = parse_expr("2*rho^3*exp(s/3)");
  L.temperature = parse_expr("(1/3)*rho^2*exp(s/3)");
  return L;
}
}  // namespace

TEST_CASE("is_symmetry") {
  auto S = build_system(chart("plane"), "euler", generic_state());
  auto b = with_state_coords(S);
  CHECK(is_symmetry(parse_vector_field("y*d/dx - x*d/dy + v*d/du - u*d/dv", b), S).verdict ==
        ZeroVerdict::Certified);

  // a pressure shift respects the equations only while the state is ignored
  auto shift = parse_vector_field("exp(t)*d/dp", b);
  auto with_state = is_symmetry(shift, S);
  CHECK(with_state.verdict == ZeroVerdict::Nonzero);
  CHECK(with_state.where.find("state") != std::string::npos);
  auto F = build_system(chart("plane"), "euler", free_state());
  CHECK(is_symmetry(parse_vector_field("exp(t)*d/dp", F.bundle), F).verdict == ZeroVerdict::Certified);

  // a field that is not a symmetry: dilation of x alone
  CHECK(is_symmetry(parse_vector_field("x*d/dx", b), S).verdict == ZeroVerdict::Nonzero);
}

TEST_CASE("time translation is a symmetry of every catalog system") {
  for (auto& sc : catalog()) {
    Workspace w(sc);
    auto& S = w.generic();
    CAPTURE(sc.name);
    CHECK(is_symmetry(parse_vector_field("d/dt", with_state_coords(S)), S).verdict == ZeroVerdict::Certified);
  }
}

TEST_CASE("bracket") {
  auto& sp = scenario("euler-sphere");
  auto find = [&](const std::string& n) {
    for (auto& f : sp.h)
      if (f.name == n) return f.field;
    throw std::runtime_error(n);
  };
  // [Y1, Y4] = -Y1
  CHECK(is_zero_field(bracket(find("Y1"), find("Y4")) + find("Y1")));

  auto& pl = scenario("euler-plane");
  auto X = [&](const std::string& n) { return pl.generator(n)->field; };
  CHECK(is_zero_field(bracket(X("X1"), X("X2"))));
  CHECK(is_zero_field(bracket(X("X4"), X("X6")) + X("X1")));
}

TEST_CASE("theta_hom") {
  auto& pl = scenario("euler-plane");
  auto X = [&](const std::string& n) { return pl.generator(n)->field; };
  CHECK(is_zero_field(theta_hom(X("X1"))));
  auto t12 = theta_hom(X("X12"));
  CHECK(t12.coeff("p").same(V("p")));
  CHECK(t12.coeff("rho").same(V("rho")));
  CHECK(t12.coeff("s").same(-V("s")));
  auto t10 = theta_hom(X("X10"));
  CHECK(t10.coeff("s").same(-V("s")));
  CHECK(t10.coeff("rho").is_zero_form());
  CHECK(t10.coeff("p").is_zero_form());
  JetBundle b{{"t", "x", "y"}, {"u", "v", "p", "rho", "s", "T"}, 0};
  CHECK_THROWS_AS(theta_hom(parse_vector_field("exp(t)*d/dp", b)), NotProjectable);
}

TEST_CASE("theta is a homomorphism and its kernel is g_m") {
  for (auto& sc : catalog()) {
    CAPTURE(sc.name);
    auto g = sc.g();
    for (std::size_t i = 0; i < g.size(); ++i)
      for (std::size_t j = i + 1; j < g.size(); ++j) {
        auto lhs = theta_hom(bracket(g[i].field, g[j].field));
        auto rhs = bracket(theta_hom(g[i].field), theta_hom(g[j].field));
        CHECK(is_zero_field(lhs + Expr(-1) * rhs));
      }
    CHECK(kernel_theta_dimension(g) == sc.gm().size());
  }
}

TEST_CASE("structure tables") {
  for (auto& sc : catalog()) {
    CAPTURE(sc.name);
    auto r = check_structure(sc.h, sc.h_structure.entries, sc.h_structure.complete);
    CHECK(r.ok);
  }
  auto& sp = scenario("euler-sphere");
  auto wrong = sp.h_structure.entries;
  wrong[0].result.begin()->second = Q(1);
  CHECK_FALSE(check_structure(sp.h, wrong, true).ok);
}

TEST_CASE("prolongation respects brackets") {
  auto& pl = scenario("euler-plane");
  Workspace w(pl);
  auto b = with_state_coords(w.generic());
  auto g = pl.g();
  for (std::size_t i = 0; i < g.size(); ++i)
    for (std::size_t j = i + 1; j < g.size(); ++j)
      for (auto& [q, e] : prolongation_bracket_defect(g[i].field, g[j].field, b, 2)) CHECK_MESSAGE(e.is_zero_form(), q);
}

TEST_CASE("assemble_gsym") {
  auto& pl = scenario("euler-plane");
  auto generic = assemble_gsym(pl.gm(), pl.g(), pl.h, generic_state());
  CHECK(generic.fields.size() == 6);
  CHECK(generic.ht.basis.empty());

  auto& ns = scenario("ns-plane");
  auto L = ideal_gas();
  auto ig = assemble_gsym(ns.gm(), ns.g(), ns.h, L);
  CHECK(ig.fields.size() == 6 + 2);
  auto S = build_system(chart("plane"), "navier_stokes", L);
  for (auto& f : ig.fields) {
    CAPTURE(f.name);
    CHECK(is_symmetry(f.field, S).verdict == ZeroVerdict::Certified);
  }

  // p = rho^2 + 1, T = -1/s: besides the defining combination the instance
  // keeps (rho d/drho + 2(p - 1) d/dp) and (s d/ds - T d/dT) separately
  StateSurface inst;
  inst.pressure = parse_expr("rho^2 + 1");
  inst.temperature = parse_expr("-1/s");
  auto one = assemble_gsym(pl.gm(), pl.g(), pl.h, inst);
  CHECK(one.fields.size() == 6 + 2);
}
