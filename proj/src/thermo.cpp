#include "fluidinv/thermo.hpp"

#include <cmath>
#include <random>

#include "fluidinv/expr_internal.hpp"
#include "fluidinv/linalg.hpp"

namespace fluidinv {

namespace {

Expr V(const std::string& n) { return Expr::var(n); }

Expr d(const Expr& e, const char* v) { return differentiate(e, v); }

}  // namespace

Expr poisson_bracket(const Expr& f, const Expr& g) {
  Expr rho = V("rho");
  return rho * rho * (d(f, "rho") * d(g, "p") - d(f, "p") * d(g, "rho")) + d(f, "s") * d(g, "T") -
         d(f, "T") * d(g, "s");
}

Expr state_expr(const StateSurface& L, const Expr& e) {
  if (L.params.empty()) return e;
  std::map<std::string, Expr> sub;
  for (auto& [k, v] : L.params) sub.emplace(k, Expr(v));
  return substitute(e, sub);
}

Expr on_surface(const StateSurface& L, const Expr& e) {
  return substitute(state_expr(L, e), {{"p", state_expr(L, L.pressure)}, {"T", state_expr(L, L.temperature)}});
}

LagrangianCheck check_lagrangian(const StateSurface& L) {
  Expr P = state_expr(L, L.pressure), Th = state_expr(L, L.temperature);
  LagrangianCheck r;
  Expr rho = V("rho");
  r.residual = d(P, "s") - rho * rho * d(Th, "rho");
  r.bracket_residual = on_surface(L, poisson_bracket(V("p") - P, V("T") - Th));
  r.ok = r.residual.is_zero_form() && r.bracket_residual.is_zero_form();
  return r;
}

KappaForm kappa(const StateSurface& L) {
  Expr P = state_expr(L, L.pressure), Th = state_expr(L, L.temperature);
  Expr rho = V("rho");
  KappaForm k;
  Expr a = d(P, "rho") / (rho * rho), b = d(Th, "rho"), c = d(Th, "s");
  k.m = {{-a / Th, -b / Th}, {-b / Th, -c / Th}};
  k.minor1 = d(P, "rho");
  k.minor2 = c * d(P, "rho") - rho * rho * b * b;
  return k;
}

// ---------------------------------------------------------------- signs

namespace {

Sign mul(Sign a, Sign b) {
  if (a == Sign::Unknown || b == Sign::Unknown) return Sign::Unknown;
  return a == b ? Sign::Pos : Sign::Neg;
}

Sign powsign(Sign a, int e) {
  if (a == Sign::Unknown) return a;
  if (a == Sign::Pos || e % 2 == 0) return Sign::Pos;
  return Sign::Neg;
}

Sign qsign(const Q& q) { return sgn(q) > 0 ? Sign::Pos : sgn(q) < 0 ? Sign::Neg : Sign::Unknown; }

Sign sign_rec(const Expr& e, const SignContext& ctx, int depth);

Sign match_assumption(const Expr& e, const SignContext& ctx, int depth) {
  for (auto& p : ctx.positive) {
    Expr r = e / p;
    if (auto c = r.as_const()) return qsign(*c);
    if (depth < 2) {
      Sign s = sign_rec(r, ctx, depth + 1);
      if (s != Sign::Unknown) return s;
    }
  }
  return Sign::Unknown;
}

Sign atom_sign(AtomP a, const SignContext& ctx, int depth) {
  switch (a->kind) {
    case AtomKind::Exp:
      return Sign::Pos;
    case AtomKind::Pow: {
      Sign b = sign_rec(a->args[0], ctx, depth + 1);
      return b == Sign::Pos ? Sign::Pos : Sign::Unknown;
    }
    case AtomKind::Var:
      if (a->name == "rho") return Sign::Pos;
      if (a->name == "s" && ctx.s_max && sgn(*ctx.s_max) <= 0) return Sign::Neg;
      [[fallthrough]];
    default:
      if (depth > 3) return Sign::Unknown;
      return match_assumption(atom_expr(a, 1), ctx, depth + 1);
  }
}

Sign mono_sign(const Mono& m, const SignContext& ctx, int depth) {
  Sign s = Sign::Pos;
  for (auto& [a, e] : m.f) {
    s = mul(s, powsign(atom_sign(a, ctx, depth), e));
    if (s == Sign::Unknown) return s;
  }
  return s;
}

// a*s + b with numeric a, b on the domain s < s_max
Sign affine_in_s(const Poly& p, const SignContext& ctx) {
  if (!ctx.s_max) return Sign::Unknown;
  Q a = 0, b = 0;
  for (auto& t : p.terms) {
    if (t.m.f.empty()) {
      b += t.c;
    } else if (t.m.f.size() == 1 && t.m.f[0].first->kind == AtomKind::Var &&
               t.m.f[0].first->name == "s" && t.m.f[0].second == 1) {
      a += t.c;
    } else {
      return Sign::Unknown;
    }
  }
  Q edge = a * *ctx.s_max + b;  // value at the open end of the domain
  if (sgn(a) < 0 && sgn(edge) >= 0) return Sign::Pos;
  if (sgn(a) > 0 && sgn(edge) <= 0) return Sign::Neg;
  return Sign::Unknown;
}

Sign poly_sign(const Poly& p, const SignContext& ctx, int depth) {
  if (p.zero()) return Sign::Unknown;
  // monomial content
  Mono content;
  {
    std::map<AtomP, int, bool (*)(AtomP, AtomP)> mins(atom_less);
    for (auto& [a, e] : p.terms[0].m.f) mins.emplace(a, e);
    for (auto it = mins.begin(); it != mins.end();) {
      bool keep = true;
      for (auto& t : p.terms) {
        int e = 0;
        for (auto& pr : t.m.f)
          if (pr.first == it->first) e = pr.second;
        if (e == 0) {
          keep = false;
          break;
        }
        if ((e > 0) != (it->second > 0)) {
          keep = false;
          break;
        }
        it->second = it->second > 0 ? std::min(it->second, e) : std::max(it->second, e);
      }
      it = keep ? std::next(it) : mins.erase(it);
    }
    for (auto& [a, e] : mins) content.f.push_back({a, e});
  }
  Sign cs = mono_sign(content, ctx, depth);
  if (cs == Sign::Unknown) return cs;
  Poly rest = content.f.empty() ? p : poly_mul_term(p, mono_pow(content, -1), Q(1));
  if (rest.terms.size() == 1) return mul(cs, mul(qsign(rest.terms[0].c), mono_sign(rest.terms[0].m, ctx, depth)));
  Sign rs = match_assumption(poly_expr(rest), ctx, depth);
  if (rs == Sign::Unknown) {
    Sign common = Sign::Unknown;
    bool first = true, same = true;
    for (auto& t : rest.terms) {
      Sign ts = mul(qsign(t.c), mono_sign(t.m, ctx, depth));
      if (ts == Sign::Unknown || (!first && ts != common)) {
        same = false;
        break;
      }
      common = ts;
      first = false;
    }
    if (same) rs = common;
  }
  if (rs == Sign::Unknown) rs = affine_in_s(rest, ctx);
  return mul(cs, rs);
}

Sign sign_rec(const Expr& e, const SignContext& ctx, int depth) {
  if (auto c = e.as_const()) return qsign(*c);
  if (depth > 4) return Sign::Unknown;
  Sign m = match_assumption(e, ctx, depth);
  if (m != Sign::Unknown) return m;
  const RatFun& r = e.rf();
  Sign s = poly_sign(r.num, ctx, depth);
  for (auto& [f, k] : r.den) {
    if (s == Sign::Unknown) break;
    s = mul(s, powsign(poly_sign(f->p, ctx, depth + 1), k));
  }
  return s;
}

}  // namespace

SignContext sign_context(const StateSurface& L) {
  SignContext ctx;
  for (auto& c : L.constraints) {
    if (c.nonzero) continue;
    Expr lhs = state_expr(L, c.lhs);
    if (lhs.as_const()) continue;
    ctx.positive.push_back(lhs);
  }
  ctx.s_max = L.s_max;
  return ctx;
}

Sign certify_sign(const Expr& e, const SignContext& ctx) { return sign_rec(e, ctx, 0); }

std::string to_string(AdmissibleVerdict v) {
  switch (v) {
    case AdmissibleVerdict::Certified:
      return "admissible";
    case AdmissibleVerdict::Sampled:
      return "admissible-sampled";
    case AdmissibleVerdict::Inadmissible:
      return "inadmissible";
    default:
      return "unknown";
  }
}

AdmissibleResult check_admissible(const StateSurface& L, int n_samples, std::uint64_t seed) {
  if (L.s_max && L.rho_min < 0) throw std::invalid_argument("empty domain");
  KappaForm k = kappa(L);
  Expr Th = state_expr(L, L.temperature);
  std::vector<std::pair<std::string, Expr>> conds = {
      {"P_rho > 0", k.minor1}, {"Theta_s*P_rho - rho^2*Theta_rho^2 > 0", k.minor2}, {"T > 0", Th}};
  SignContext ctx = sign_context(L);
  AdmissibleResult res;
  std::vector<std::pair<std::string, Expr>> open;
  for (auto& [name, e] : conds) {
    Sign s = certify_sign(e, ctx);
    if (s == Sign::Neg) {
      res.verdict = AdmissibleVerdict::Inadmissible;
      res.failed = name;
      res.notes.push_back(name + ": certified negative");
      // any domain point serves as a witness
      res.witness = {{"rho", L.rho_min.get_d() + 1.0}, {"s", (L.s_max ? L.s_max->get_d() : 0.0) - 1.0}};
      return res;
    }
    if (s == Sign::Pos) {
      res.notes.push_back(name + ": certified");
    } else {
      open.push_back({name, e});
    }
  }
  if (open.empty()) {
    res.verdict = AdmissibleVerdict::Certified;
    return res;
  }
  // sampling fallback in floating point on the declared domain
  std::mt19937_64 rng(seed);
  double rlo = L.rho_min.get_d(), shi = L.s_max ? L.s_max->get_d() : 5.0;
  std::uniform_real_distribution<double> dr(rlo + 1e-3, rlo + 10.0), ds(std::min(shi, 5.0) - 10.0, std::min(shi, 5.0));
  std::map<std::string, double> pvals;
  for (auto& [name, e] : open) {
    for (int i = 0; i < n_samples; ++i) {
      std::map<std::string, double> pt{{"rho", dr(rng)}, {"s", ds(rng)}};
      double v;
      try {
        v = eval_double(e, pt);
      } catch (const std::exception&) {
        res.verdict = AdmissibleVerdict::Unknown;
        res.failed = name;
        res.notes.push_back(name + ": not decidable by sampling");
        return res;
      }
      if (!(v > 0)) {
        res.verdict = AdmissibleVerdict::Inadmissible;
        res.failed = name;
        res.witness = pt;
        return res;
      }
    }
    res.notes.push_back(name + ": sampled");
  }
  res.verdict = AdmissibleVerdict::Sampled;
  return res;
}

std::pair<Expr, Expr> tangency_residual(const VectorField& Z, const StateSurface& L) {
  Expr P = state_expr(L, L.pressure), Th = state_expr(L, L.temperature);
  Expr zp = on_surface(L, Z.coeff("p")), zr = on_surface(L, Z.coeff("rho"));
  Expr zs = on_surface(L, Z.coeff("s")), zT = on_surface(L, Z.coeff("T"));
  Expr ir2 = pow(V("rho"), -2);
  // iota_Z Omega = Z^s dT - Z^T ds + rho^-2 (Z^rho dp - Z^p drho)
  Expr drho = zs * d(Th, "rho") + ir2 * (zr * d(P, "rho") - zp);
  Expr dss = zs * d(Th, "s") - zT + ir2 * zr * d(P, "s");
  return {drho, dss};
}

StateSymmetries state_symmetries(const StateSurface& L, const std::vector<VectorField>& H,
                                 std::uint64_t seed) {
  std::size_t n = H.size();
  std::vector<std::pair<Expr, Expr>> res;
  for (auto& Y : H) res.push_back(tangency_residual(Y, L));
  std::set<std::string> syms;
  for (auto& [a, b] : res) {
    for (auto& v : variables(a)) syms.insert(v);
    for (auto& v : variables(b)) syms.insert(v);
  }
  QMatrix m;
  int points = static_cast<int>(2 * n + 6), tries = 0;
  while (static_cast<int>(m.size()) < 2 * points && tries < 8 * points) {
    ++tries;
    std::map<std::string, Q> pt;
    for (auto& v : syms) {
      Q q = sample_rational(hash_str(v + "#" + std::to_string(tries), seed), 9, 8);
      if (v == "rho") q = abs(q) + 1;
      pt[v] = q;
    }
    EvalPolicy pol{seed * 1000003ULL + static_cast<std::uint64_t>(tries)};
    std::vector<Q> r1(n), r2(n);
    try {
      for (std::size_t i = 0; i < n; ++i) {
        r1[i] = eval_at(res[i].first, pt, pol);
        r2[i] = eval_at(res[i].second, pt, pol);
      }
    } catch (const PoleError&) {
      continue;
    }
    m.push_back(r1);
    m.push_back(r2);
  }
  StateSymmetries out;
  out.basis = nullspace(m, n);
  for (auto& b : out.basis) {
    Expr a(0), c(0);
    for (std::size_t i = 0; i < n; ++i) {
      a += Expr(b[i]) * res[i].first;
      c += Expr(b[i]) * res[i].second;
    }
    if (!a.is_zero_form() || !c.is_zero_form()) {
      out.confirmed = false;
      out.note = "basis vector not certified symbolically; manual review";
    }
  }
  return out;
}

Constraint parse_constraint(const std::string& text, const Alphabet& alpha) {
  static const std::vector<std::string> ops = {">=", "<=", "!=", ">", "<"};
  for (auto& op : ops) {
    auto pos = text.find(op);
    if (pos == std::string::npos) continue;
    Expr a = parse_expr(text.substr(0, pos), alpha);
    Expr b = parse_expr(text.substr(pos + op.size()), alpha);
    Constraint c;
    c.text = text;
    if (op == "!=") {
      c.lhs = a - b;
      c.nonzero = true;
    } else if (op[0] == '>') {
      c.lhs = a - b;
    } else {
      c.lhs = b - a;
    }
    return c;
  }
  throw ParseError("constraint without a comparison: " + text, 1, 1);
}

void validate_parameters(const StateSurface& L) {
  for (auto& c : L.constraints) {
    Expr e = state_expr(L, c.lhs);
    auto v = e.as_const();
    if (!v) continue;
    bool ok = c.nonzero ? sgn(*v) != 0 : sgn(*v) > 0;
    if (!ok) throw ConstraintViolation("violated: " + c.text);
  }
}

NoncommutativeExclusion noncommutative_exclusion(const std::vector<VectorField>& h) {
  NoncommutativeExclusion r;
  std::vector<VectorField> derived;
  for (std::size_t i = 0; i < h.size(); ++i)
    for (std::size_t j = i + 1; j < h.size(); ++j) {
      VectorField b = bracket(h[i], h[j]);
      if (!is_zero_field(b)) derived.push_back(b);
    }
  if (derived.empty()) {
    r.excluded = true;
    r.reason = "h is commutative";
    return r;
  }
  for (auto& D : derived)
    for (auto& [q, c] : D.c) {
      if ((q != "p" && q != "s") || !c.as_const()) {
        r.reason = "[h,h] contains " + D.str() + ", outside span(d/dp, d/ds)";
        return r;
      }
    }
  r.excluded = true;
  r.reason =
      "[h,h] lies in span(d/dp, d/ds); a nonzero A = a d/ds + b d/dp in it is tangent only if "
      "b = a P_s and a Theta_s = 0, so a != 0, Theta_s = 0 and "
      "Theta_s P_rho - rho^2 Theta_rho^2 = -rho^2 Theta_rho^2 <= 0";
  return r;
}

}  // namespace fluidinv
