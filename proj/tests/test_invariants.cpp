#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "fluidinv/invariants.hpp"
#include "fluidinv/parser.hpp"

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

std::vector<Expr> all_named(const Workspace& w) {
  auto v = w.order0();
  for (auto& e : w.order1()) v.push_back(e);
  return v;
}

using Mat3 = std::vector<std::vector<Expr>>;
Mat3 mul(const Mat3& a, const Mat3& b) {
  Mat3 r(3, std::vector<Expr>(3));
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      for (int k = 0; k < 3; ++k) r[i][j] += a[i][k] * b[k][j];
  return r;
}
Mat3 transpose(const Mat3& a) {
  Mat3 r(3, std::vector<Expr>(3));
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) r[i][j] = a[j][i];
  return r;
}
}  // namespace

TEST_CASE("catalog") {
  CHECK(catalog().size() == 7);
  for (auto& sc : catalog()) {
    CAPTURE(sc.name);
    CHECK(missing_anchors(sc).empty());
    CHECK_FALSE(sc.anchor.empty());
  }
  CHECK_THROWS_AS(load_catalog("/nonexistent/catalog"), CatalogError);
}

TEST_CASE("check_invariance") {
  auto& pl = scenario("euler-plane");
  Workspace w(pl);
  auto& S = w.generic();
  CHECK(check_invariance(w.named().at("J5"), pl.gm(), S).v == ZeroVerdict::Certified);
  for (auto& sc : catalog()) {
    Workspace ws(sc);
    CHECK(check_invariance(V("rho"), sc.gm(), ws.generic()).v == ZeroVerdict::Certified);
  }
  std::vector<NamedField> rot{{"X3", pl.generator("X3")->field}};
  auto ux = check_invariance(V("u_x"), rot, S);
  CHECK(ux.v == ZeroVerdict::Nonzero);
  CHECK_FALSE(ux.witness.empty());
}

TEST_CASE("check_derivations") {
  Workspace pl(scenario("euler-plane"));
  auto d = check_derivations(pl);
  CHECK(d.commutators.v == ZeroVerdict::Certified);
  CHECK(d.independent);
  // det of the coefficient matrix is a multiple of rho_x s_y - rho_y s_x
  auto J5 = V("rho_x") * V("s_y") - V("rho_y") * V("s_x");
  auto q = d.determinant / J5;
  for (auto& v : variables(q)) CHECK((v == "t" || v == "x" || v == "y"));

  Workspace ly(scenario("euler-layer"));
  CHECK(scenario("euler-layer").derivations.size() == 4);
  auto dl = check_derivations(ly);
  CHECK(dl.commutators.v == ZeroVerdict::Certified);
  CHECK(dl.independent);
}

TEST_CASE("independence_rank and orbit_dimension") {
  auto& pl = scenario("euler-plane");
  Workspace w(pl);
  auto& S = w.generic();
  auto pt = sample_point(S, 3);
  CHECK(independence_rank(all_named(w), S, pt, 1) == 10);
  CHECK(independence_rank({Expr(1), Expr(Q(2, 3))}, S, pt, 1) == 0);
  std::vector<Expr> js;
  for (auto& n : pl.derived_from) js.push_back(w.named().at(n));
  std::vector<TotalDerivation> ds;
  for (auto& d : pl.derivations) ds.push_back(d.d);
  CHECK(js.size() * ds.size() == 24);
  CHECK(derived_rank(js, ds, S, pt, 1) == 14);
  CHECK(orbit_dimension(pl.gm(), S, pt, 1) == 6);

  std::vector<std::pair<std::string, Expr>> ov;
  for (auto& [a, b] : pl.singular_sample) ov.push_back({a, w.parse(b)});
  auto sing = sample_point(S, 5, ov);
  CHECK(orbit_dimension(pl.gm(), S, sing, 1) == 5);

  Workspace sp(scenario("euler-sphere"));
  CHECK(orbit_dimension(scenario("euler-sphere").gm(), sp.generic(), sample_point(sp.generic(), 3), 1) == 4);
}

TEST_CASE("sample_point lies on the system") {
  Workspace w(scenario("ns-plane"));
  auto& S = w.generic();
  auto pt = sample_point(S, 9);
  for (auto& r : S.residuals()) CHECK(eval_at(r, pt.values, pt.policy) == 0);
  for (auto& [v, q] : pt.values) {
    if (S.bundle.jet_order(v) < 0 || S.is_principal(v)) continue;
    CHECK(q.get_den() <= 64);
  }
}

TEST_CASE("singular_membership") {
  auto& pl = scenario("euler-plane");
  Workspace w(pl);
  auto& S = w.generic();
  auto member = [&](const std::vector<std::pair<std::string, std::string>>& ov) {
    std::vector<std::pair<std::string, Expr>> o;
    for (auto& [a, b] : ov) o.push_back({a, parse_expr(b)});
    std::map<std::string, bool> r;
    for (auto& m : singular_membership(w, sample_point(S, 11, o))) r[m.set] = m.member;
    return r;
  };
  std::vector<std::pair<std::string, std::string>> flat;
  for (auto& [a, b] : pl.singular_sample) flat.push_back({a, b});
  CHECK(member(flat)["Upsilon1"]);

  // orthogonal gradients: J3*J4 - J5^2 = (grad rho . grad s)^2 vanishes
  auto orth = member({{"rho_x", "1"}, {"rho_y", "0"}, {"s_x", "0"}, {"s_y", "1"}});
  CHECK_FALSE(orth["Upsilon1"]);
  CHECK(orth["Upsilon2"]);

  auto gen = member({{"rho_x", "1"}, {"rho_y", "0"}, {"s_x", "1"}, {"s_y", "1"}});
  CHECK_FALSE(gen["Upsilon1"]);
  CHECK_FALSE(gen["Upsilon2"]);

  auto par = member({{"rho_x", "1"}, {"rho_y", "2"}, {"s_x", "2"}, {"s_y", "4"}});
  CHECK(par["Upsilon2"]);
}

TEST_CASE("series and Hilbert values") {
  auto z = V("z");
  auto s = series((2 + 4 * z - z * z * z) / ((1 - z) * (1 - z)), 5);
  CHECK(s == std::vector<Q>{2, 8, 14, 19, 24});
  CHECK(series(1 / (1 - z), 4) == std::vector<Q>{1, 1, 1, 1});

  auto& pl = scenario("euler-plane");
  CHECK(*hilbert_value(pl, 0) == 2);
  CHECK(*hilbert_value(pl, 1) == 8);
  CHECK(*hilbert_value(pl, 3) == 19);
  CHECK(*hilbert_value(scenario("euler-layer"), 2) == 33);
  CHECK(*hilbert_value(scenario("ns-space3"), 1) == 16);
}

TEST_CASE("verify_hilbert_poincare") {
  Workspace pl(scenario("euler-plane"));
  auto r = verify_hilbert_poincare(pl, 8, 1);
  CHECK(r.series_ok);
  CHECK(r.accounting_ok);
  REQUIRE(r.accounting.size() >= 2);
  CHECK(r.accounting[1].second.first == 10);
  CHECK(r.accounting[1].second.second == 10);

  // the stored Poincare function and the piecewise H disagree from k = 2 on
  Workspace sp(scenario("euler-sphere"));
  auto bad = verify_hilbert_poincare(sp, 8, 1);
  CHECK_FALSE(bad.series_ok);
  CHECK(bad.first_bad_k == 2);
}

TEST_CASE("conjugation invariants") {
  // V = identity: trace of H^-1 V H is 3 for any frame
  std::vector<std::vector<Expr>> frame(3, std::vector<Expr>(3));
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) frame[i][j] = V("a" + std::to_string(i) + std::to_string(j));
  Mat3 I(3, std::vector<Expr>(3));
  for (int i = 0; i < 3; ++i) I[i][i] = 1;
  auto c = construct_conjugation_invariants(frame, I);
  CHECK((c.entries[0] + c.entries[4] + c.entries[8]).same(Expr(3)));

  // a rational rotation by the Cayley map leaves all 15 outputs fixed
  Mat3 A{{Expr(0), Expr(Q(1, 2)), Expr(Q(-1, 3))}, {Expr(Q(-1, 2)), Expr(0), Expr(2)}, {Expr(Q(1, 3)), Expr(-2), Expr(0)}};
  Mat3 IA(3, std::vector<Expr>(3)), IpA(3, std::vector<Expr>(3));
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) {
      IA[i][j] = I[i][j] - A[i][j];
      IpA[i][j] = I[i][j] + A[i][j];
    }
  // (I + A)^-1 by cofactors
  Expr det = determinant(IpA);
  Mat3 inv(3, std::vector<Expr>(3));
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) {
      int r0 = (j + 1) % 3, r1 = (j + 2) % 3, c0 = (i + 1) % 3, c1 = (i + 2) % 3;
      inv[i][j] = (IpA[r0][c0] * IpA[r1][c1] - IpA[r0][c1] * IpA[r1][c0]) / det;
    }
  Mat3 R = mul(IA, inv);
  auto RRt = mul(R, transpose(R));
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) REQUIRE(RRt[i][j].same(I[i][j]));

  Mat3 Vm{{Expr(1), Expr(2), Expr(-1)}, {Expr(Q(1, 2)), Expr(3), Expr(0)}, {Expr(4), Expr(-2), Expr(Q(5, 3))}};
  std::vector<std::vector<Expr>> cols{{Expr(1), Expr(0), Expr(2)}, {Expr(-1), Expr(3), Expr(1)}, {Expr(0), Expr(1), Expr(Q(1, 4))}};
  auto base = construct_conjugation_invariants(cols, Vm);
  std::vector<std::vector<Expr>> rcols;
  for (auto& col : cols) {
    std::vector<Expr> rc(3);
    for (int i = 0; i < 3; ++i)
      for (int k = 0; k < 3; ++k) rc[i] += R[i][k] * col[k];
    rcols.push_back(rc);
  }
  auto rot = construct_conjugation_invariants(rcols, mul(mul(R, Vm), transpose(R)));
  REQUIRE(rot.entries.size() == 9);
  REQUIRE(rot.dots.size() == 6);
  for (int i = 0; i < 9; ++i) CHECK(rot.entries[i].same(base.entries[i]));
  for (int i = 0; i < 6; ++i) CHECK(rot.dots[i].same(base.dots[i]));

  // a degenerate frame is rejected
  std::vector<std::vector<Expr>> flat{{Expr(1), Expr(0), Expr(0)}, {Expr(2), Expr(0), Expr(0)}, {Expr(0), Expr(1), Expr(0)}};
  CHECK_THROWS(construct_conjugation_invariants(flat, Vm));
}

TEST_CASE("the gravity frame vector reduces to the acceleration at g = 0") {
  auto& sc = scenario("ns-space3");
  REQUIRE(sc.conjugation);
  std::vector<Expr> a;
  for (auto& e : sc.conjugation->frame[0]) a.push_back(substitute(parse_expr(e), {{"g", Expr(0)}}));
  CHECK(a[0].same(V("u_t")));
  CHECK(a[1].same(V("v_t")));
  CHECK(a[2].same(V("w_t")));
}

TEST_CASE("check_gsym_field") {
  Workspace w(scenario("euler-plane"));
  for (auto& c : scenario("euler-plane").gsym) {
    if (c.name != "one-dim") continue;
    auto r = check_gsym_field(w, c);
    CHECK(r.genericity_ok);
    for (auto& [n, v] : r.invariants) CHECK_MESSAGE(v.v == ZeroVerdict::Certified, n);
    for (auto& [n, v] : r.derivations) CHECK_MESSAGE(v.v == ZeroVerdict::Certified, n);
    for (auto& [n, v] : r.action) CHECK_MESSAGE(v.v == ZeroVerdict::Certified, n);

    // a parameter choice on a genericity denominator is rejected
    GsymCase bad = c;
    REQUIRE_FALSE(bad.genericity.empty());
    auto den = parse_expr(bad.genericity[0]);
    auto vars = variables(den);
    std::map<std::string, std::string> given(bad.params.begin(), bad.params.end());
    // solve den = 0 for one parameter by a linear step when possible
    for (auto& v : vars) {
      auto dv = differentiate(den, v);
      if (!dv.is_const() || dv.is_zero_form()) continue;
      std::map<std::string, Expr> at;
      for (auto& [k, val] : given)
        if (k != v) at[k] = parse_expr(val);
      auto rest = substitute(den, at);
      auto c0 = substitute(rest, {{v, Expr(0)}});
      if (!c0.is_const()) continue;
      for (auto& [k, val] : bad.params)
        if (k == v) val = print_expr(-c0 / dv);
      break;
    }
    auto rej = check_gsym_field(w, bad);
    CHECK_FALSE(rej.genericity_ok);
    CHECK_FALSE(rej.rejected.empty());
  }
}
