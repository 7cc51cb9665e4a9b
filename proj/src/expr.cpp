#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <mutex>
#include <unordered_map>

#include "fluidinv/expr_internal.hpp"

namespace fluidinv {

namespace {

const std::shared_ptr<const RatFun>& zero_rf() {
  static const auto z = std::make_shared<const RatFun>();
  return z;
}

using Den = std::vector<std::pair<FactorP, int>>;

Den den_merge(const Den& a, const Den& b, bool add) {
  Den r;
  std::size_t i = 0, j = 0;
  while (i < a.size() || j < b.size()) {
    if (i < a.size() && j < b.size() && a[i].first == b[j].first) {
      r.push_back({a[i].first, add ? a[i].second + b[j].second : std::max(a[i].second, b[j].second)});
      ++i;
      ++j;
    } else if (j >= b.size() || (i < a.size() && factor_less(a[i].first, b[j].first))) {
      r.push_back(a[i++]);
    } else {
      r.push_back(b[j++]);
    }
  }
  return r;
}

int exp_of(const Den& d, FactorP f) {
  for (auto& p : d)
    if (p.first == f) return p.second;
  return 0;
}

struct DescCmp {
  bool operator()(const Mono& a, const Mono& b) const { return mono_cmp(a, b) > 0; }
};

// Exact division of n by a canonical factor. Returns false when f does not
// divide n or when the division cannot be carried out reliably.
bool poly_divide(const Poly& n, FactorP fac, Poly& quot) {
  const Poly& f = fac->p;
  if (!fac->lead_unique) return false;
  const Mono& lt = f.terms[0].m;
  for (auto& [a, e] : lt.f)
    if (a->unit()) return false;
  if (f.terms.size() == 1) {
    // monomial factor such as sin(y): every term must contain it
    Poly q;
    for (auto& t : n.terms) {
      Mono m = t.m;
      for (auto& [a, e] : lt.f) {
        auto it = std::find_if(m.f.begin(), m.f.end(), [&](auto& p) { return p.first == a; });
        if (it == m.f.end() || it->second < e) return false;
        it->second -= e;
        if (it->second == 0) m.f.erase(it);
      }
      q.terms.push_back({m, t.c});
    }
    quot = std::move(q);
    return true;
  }
  // degree filter and Laurent shift
  std::map<AtomP, std::pair<int, int>, bool (*)(AtomP, AtomP)> range(atom_less);
  for (auto& t : n.terms)
    for (auto& [a, e] : t.m.f) {
      if (a->unit()) continue;
      auto it = range.find(a);
      if (it == range.end())
        range.emplace(a, std::make_pair(std::min(e, 0), std::max(e, 0)));
      else {
        it->second.first = std::min(it->second.first, e);
        it->second.second = std::max(it->second.second, e);
      }
    }
  for (auto& t : n.terms)
    for (auto& [a, r] : range) {
      bool present = false;
      for (auto& p : t.m.f)
        if (p.first == a) present = true;
      if (!present) {
        r.first = std::min(r.first, 0);
        r.second = std::max(r.second, 0);
      }
    }
  std::map<AtomP, int, bool (*)(AtomP, AtomP)> fdeg(atom_less);
  for (auto& t : f.terms)
    for (auto& [a, e] : t.m.f)
      if (!a->unit()) fdeg[a] = std::max(fdeg[a], e);
  for (auto& [a, d] : fdeg) {
    auto it = range.find(a);
    if (it == range.end()) return false;
    if (it->second.second - it->second.first < d) return false;
  }
  Mono shift;
  for (auto& [a, r] : range)
    if (r.first < 0) shift.f.push_back({a, -r.first});
  std::sort(shift.f.begin(), shift.f.end(), [](auto& x, auto& y) { return atom_less(x.first, y.first); });
  std::map<Mono, Q, DescCmp> rem;
  for (auto& t : n.terms) rem.emplace(shift.f.empty() ? t.m : mono_mul(t.m, shift), t.c);
  std::unordered_map<Mono, Q, MonoHash> q;
  std::size_t limit = 20000 + 50 * n.terms.size();
  for (std::size_t step = 0; !rem.empty(); ++step) {
    if (step > limit) return false;
    auto it = rem.begin();
    Mono m = it->first;
    Q c = it->second;
    // m must be divisible by the leading monomial
    Mono qm;
    {
      std::size_t j = 0;
      for (auto& p : m.f) {
        int e = p.second;
        if (j < lt.f.size() && lt.f[j].first == p.first) {
          e -= lt.f[j].second;
          ++j;
        }
        if (e < 0) return false;
        if (e) qm.f.push_back({p.first, e});
      }
      if (j != lt.f.size()) return false;
    }
    for (auto& ft : f.terms) {
      Mono pm = mono_mul(qm, ft.m);
      if (mono_has_kind(pm, AtomKind::Base)) return false;
      auto r = rem.find(pm);
      Q d = c * ft.c;
      if (r == rem.end()) {
        rem.emplace(pm, -d);
      } else {
        r->second -= d;
        if (sgn(r->second) == 0) rem.erase(r);
      }
    }
    q[qm] += c;
  }
  Poly qp = poly_from_map(std::move(q));
  if (!shift.f.empty()) {
    Mono inv = mono_pow(shift, -1);
    qp = poly_mul_term(qp, inv, Q(1));
  }
  quot = trig_reduce(qp);
  return true;
}

// 1/p in normal form
Expr inv_poly(const Poly& p);

Expr resolve_base(const Poly& num, const Den& den) {
  Poly plain;
  std::map<std::vector<std::pair<AtomP, int>>, Poly> groups;
  for (auto& t : num.terms) {
    Mono rest;
    std::vector<std::pair<AtomP, int>> marks;
    for (auto& p : t.m.f) {
      if (p.first->kind == AtomKind::Base)
        marks.push_back(p);
      else
        rest.f.push_back(p);
    }
    if (marks.empty()) {
      plain.terms.push_back(t);
    } else {
      groups[marks].terms.push_back({rest, t.c});
    }
  }
  Expr acc = poly_expr(plain);
  for (auto& [marks, poly] : groups) {
    std::sort(poly.terms.begin(), poly.terms.end(),
              [](const Term& a, const Term& b) { return mono_cmp(a.m, b.m) > 0; });
    Expr part = poly_expr(poly);
    for (auto& [a, k] : marks) part *= pow(a->args[0], static_cast<long>(k));
    acc += part;
  }
  return acc * make_expr(poly_const(1), den);
}

}  // namespace

Expr make_expr(Poly num, Den den) {
  if (poly_has_kind(num, AtomKind::Base)) return resolve_base(num, den);
  num = trig_reduce(num);
  if (num.zero()) return Expr();
  Den out;
  for (auto& [f, k] : den) {
    int m = k;
    while (m > 0) {
      Poly q;
      if (!poly_divide(num, f, q)) break;
      num = std::move(q);
      --m;
    }
    if (m > 0) out.push_back({f, m});
  }
  auto rf = std::make_shared<RatFun>();
  rf->num = std::move(num);
  rf->den = std::move(out);
  return Expr(std::shared_ptr<const RatFun>(std::move(rf)));
}

Expr poly_expr(Poly p) {
  if (p.zero()) return Expr();
  auto rf = std::make_shared<RatFun>();
  rf->num = std::move(p);
  return Expr(std::shared_ptr<const RatFun>(std::move(rf)));
}

Expr atom_expr(AtomP a, int e) {
  if (!a->laurent() && e < 0) return make_expr(poly_const(1), {}) / atom_expr(a, -e);
  return make_expr(poly_atom(a, e), {});
}

namespace {

Expr inv_poly(const Poly& p0) {
  if (p0.zero()) throw PoleError("division by zero");
  Poly p = p0;
  Q lc = p.terms[0].c;
  // monomial content: minimum exponent of each free atom
  std::map<AtomP, int, bool (*)(AtomP, AtomP)> mins(atom_less);
  for (auto& t : p.terms)
    for (auto& [a, e] : t.m.f)
      if (!a->unit()) mins.emplace(a, 0);
  for (auto& [a, mn] : mins) {
    bool first = true;
    for (auto& t : p.terms) {
      int e = 0;
      for (auto& pr : t.m.f)
        if (pr.first == a) e = pr.second;
      mn = first ? e : std::min(mn, e);
      first = false;
    }
  }
  Mono content;
  Den trig;
  for (auto& [a, e] : mins) {
    if (e == 0) continue;
    content.f.push_back({a, e});
    if (!a->laurent()) {
      Poly tp = poly_atom(a, 1);
      trig.push_back({intern_factor(tp), e});
    }
  }
  std::sort(trig.begin(), trig.end(), [](auto& x, auto& y) { return factor_less(x.first, y.first); });
  // The unit part divided out is chosen among the units of all terms so that
  // the monic result has the least key; p and p*w give the same candidates.
  auto with_units = [&](const Mono& units) {
    Mono m = content;
    for (auto& u : units.f) m.f.push_back(u);
    std::sort(m.f.begin(), m.f.end(), [](auto& x, auto& y) { return atom_less(x.first, y.first); });
    return m;
  };
  Mono strip = content;
  Poly rest = strip.f.empty() ? p : poly_mul_term(p, mono_pow(strip, -1), Q(1) / lc);
  std::string best;
  bool have = false;
  std::set<std::string> seen;
  bool any_units = false;
  for (auto& t : p.terms)
    for (auto& pr : t.m.f) any_units = any_units || pr.first->unit();
  for (auto& t : p.terms) {
    if (!any_units) break;
    Mono units;
    for (auto& [a, e] : t.m.f)
      if (a->unit()) units.f.push_back({a, e});
    Mono cand = with_units(units);
    Poly r = cand.f.empty() ? p : poly_mul_term(p, mono_pow(cand, -1), Q(1));
    if (poly_has_kind(r, AtomKind::Base) || r.zero()) continue;
    r = poly_scale(r, Q(1) / r.terms[0].c);
    std::string key = poly_str(r);
    if (!seen.insert(key).second) continue;
    if (!have || key < best) {
      best = key;
      strip = cand;
      have = true;
    }
  }
  if (have) rest = strip.f.empty() ? p : poly_mul_term(p, mono_pow(strip, -1), Q(1) / lc);
  if (strip.f.empty()) rest = poly_scale(p, Q(1) / lc);
  // numerator collects 1/(lc * laurent content * units)
  Mono laurent_inv;
  for (auto& [a, e] : strip.f)
    if (a->laurent()) laurent_inv.f.push_back({a, -e});
  canon_units(laurent_inv);
  Poly num;
  num.terms.push_back({laurent_inv, Q(1) / lc});
  if (mono_has_kind(laurent_inv, AtomKind::Base)) {
    Den d = trig;
    if (!(rest.terms.size() == 1 && rest.terms[0].m.f.empty()))
      d = den_merge(d, {{intern_factor(rest), 1}}, true);
    return make_expr(num, d);
  }
  if (rest.terms.size() == 1 && rest.terms[0].m.f.empty()) {
    num.terms[0].c /= rest.terms[0].c;
    return make_expr(num, trig);
  }
  if (rest.terms.size() == 1) {
    // leftover single term (possible after unit merges): fold into the numerator
    Mono inv = mono_pow(rest.terms[0].m, -1);
    Poly n2 = poly_mul_term(num, inv, Q(1) / rest.terms[0].c);
    return make_expr(n2, trig);
  }
  if (sgn(rest.terms[0].c) == 0) throw PoleError("degenerate factor");
  if (rest.terms[0].c != 1) {
    Q c = rest.terms[0].c;
    rest = poly_scale(rest, Q(1) / c);
    num = poly_scale(num, Q(1) / c);
  }
  Den d = den_merge(trig, {{intern_factor(rest), 1}}, true);
  return make_expr(num, d);
}

}  // namespace

// ---------------------------------------------------------------- Expr

Expr::Expr() : p_(zero_rf()) {}
Expr::Expr(long v) : Expr(Q(v)) {}
Expr::Expr(const Q& v) {
  if (sgn(v) == 0) {
    p_ = zero_rf();
    return;
  }
  Q c = v;
  c.canonicalize();
  auto rf = std::make_shared<RatFun>();
  rf->num = poly_const(c);
  p_ = std::move(rf);
}

Expr Expr::var(const std::string& name) { return atom_expr(var_atom(name), 1); }

bool Expr::is_const() const {
  return p_->den.empty() && (p_->num.zero() || (p_->num.terms.size() == 1 && p_->num.terms[0].m.f.empty()));
}

std::optional<Q> Expr::as_const() const {
  if (!is_const()) return std::nullopt;
  if (p_->num.zero()) return Q(0);
  return p_->num.terms[0].c;
}

AtomP Expr::as_var() const {
  if (!p_->den.empty() || p_->num.terms.size() != 1) return nullptr;
  auto& t = p_->num.terms[0];
  if (t.c != 1 || t.m.f.size() != 1 || t.m.f[0].second != 1) return nullptr;
  if (t.m.f[0].first->kind != AtomKind::Var) return nullptr;
  return t.m.f[0].first;
}

bool Expr::same(const Expr& o) const {
  if (p_ == o.p_) return true;
  auto& a = *p_;
  auto& b = *o.p_;
  if (a.den != b.den || a.num.terms.size() != b.num.terms.size()) return false;
  for (std::size_t i = 0; i < a.num.terms.size(); ++i) {
    if (!(a.num.terms[i].m == b.num.terms[i].m) || a.num.terms[i].c != b.num.terms[i].c) return false;
  }
  return true;
}

std::string Expr::str() const {
  auto& r = *p_;
  if (r.den.empty()) return poly_str(r.num);
  std::string ns = poly_str(r.num);
  if (r.num.terms.size() > 1) ns = "(" + ns + ")";
  std::string ds;
  bool wrap = r.den.size() > 1;
  for (auto& [f, k] : r.den) {
    if (!ds.empty()) ds += "*";
    std::string fs = f->key;
    if (f->p.terms.size() > 1 || k > 1) {
      if (f->p.terms.size() > 1) fs = "(" + fs + ")";
    }
    if (k > 1) {
      fs += "^" + std::to_string(k);
      wrap = true;
    }
    ds += fs;
  }
  if (wrap) ds = "(" + ds + ")";
  return ns + "/" + ds;
}

Expr Expr::operator-() const {
  auto rf = std::make_shared<RatFun>(*p_);
  for (auto& t : rf->num.terms) t.c = -t.c;
  return Expr(std::shared_ptr<const RatFun>(std::move(rf)));
}

Expr& Expr::operator+=(const Expr& o) {
  if (o.is_zero_form()) return *this;
  if (is_zero_form()) {
    *this = o;
    return *this;
  }
  auto& a = *p_;
  auto& b = *o.p_;
  if (a.den == b.den) {
    *this = make_expr(poly_add(a.num, b.num, Q(1)), a.den);
    return *this;
  }
  Den l = den_merge(a.den, b.den, false);
  Poly ma = poly_const(1), mb = poly_const(1);
  for (auto& [f, k] : l) {
    int ka = k - exp_of(a.den, f), kb = k - exp_of(b.den, f);
    if (ka) ma = poly_mul(ma, poly_pow(f->p, ka));
    if (kb) mb = poly_mul(mb, poly_pow(f->p, kb));
  }
  Poly n = poly_add(poly_mul(a.num, ma), poly_mul(b.num, mb), Q(1));
  *this = make_expr(std::move(n), std::move(l));
  return *this;
}

Expr& Expr::operator-=(const Expr& o) { return *this += -o; }

Expr& Expr::operator*=(const Expr& o) {
  if (is_zero_form() || o.is_zero_form()) {
    *this = Expr();
    return *this;
  }
  auto& a = *p_;
  auto& b = *o.p_;
  Poly n = poly_mul(a.num, b.num);
  *this = make_expr(std::move(n), den_merge(a.den, b.den, true));
  return *this;
}

Expr& Expr::operator/=(const Expr& o) {
  if (o.is_zero_form()) throw PoleError("division by zero");
  auto& b = *o.p_;
  Poly dn = poly_const(1);
  for (auto& [f, k] : b.den) dn = poly_mul(dn, poly_pow(f->p, k));
  Expr inv = inv_poly(b.num);
  Expr mult = make_expr(dn, {});
  *this *= mult;
  *this *= inv;
  return *this;
}

Expr operator+(Expr a, const Expr& b) { return a += b; }
Expr operator-(Expr a, const Expr& b) { return a -= b; }
Expr operator*(Expr a, const Expr& b) { return a *= b; }
Expr operator/(Expr a, const Expr& b) { return a /= b; }

Expr pow(const Expr& b, long n) {
  if (n == 0) return Expr(1);
  if (n < 0) return pow(Expr(1) / b, -n);
  if (b.is_zero_form()) return b;
  auto& r = b.rf();
  Poly num = poly_pow(r.num, static_cast<int>(n));
  Den d = r.den;
  for (auto& p : d) p.second *= static_cast<int>(n);
  return make_expr(std::move(num), std::move(d));
}

// ---------------------------------------------------------------- atoms

AtomP sin_atom(const Expr& a) { return intern_atom(AtomKind::Sin, "", {}, {a}); }
AtomP cos_atom(const Expr& a) { return intern_atom(AtomKind::Cos, "", {}, {a}); }
AtomP exp_atom(const Expr& a) { return intern_atom(AtomKind::Exp, "", {}, {a}); }

namespace {

AtomP single_atom(const Expr& e) {
  auto& r = e.rf();
  if (!r.den.empty() || r.num.terms.size() != 1) return nullptr;
  auto& t = r.num.terms[0];
  if (t.c != 1 || t.m.f.size() != 1 || t.m.f[0].second != 1) return nullptr;
  return t.m.f[0].first;
}

AtomP base_marker(const Expr& b) { return intern_atom(AtomKind::Base, "", {}, {b}); }

// integer part of an exponent
Q exponent_floor(const Expr& e) {
  auto& r = e.rf();
  if (!r.den.empty()) return Q(0);
  Q c0 = 0;
  for (auto& t : r.num.terms)
    if (t.m.f.empty()) c0 = t.c;
  mpz_class fl;
  mpz_fdiv_q(fl.get_mpz_t(), c0.get_num_mpz_t(), c0.get_den_mpz_t());
  return Q(fl);
}

}  // namespace

AtomP pow_family(AtomP powatom) {
  const Expr& b = powatom->args[0];
  AtomP a = single_atom(b);
  if (a && a->laurent() && !a->unit()) return a;
  return base_marker(b);
}

std::vector<std::pair<AtomP, int>> pow_factors(const Expr& base, const Expr& e) {
  std::vector<std::pair<AtomP, int>> out;
  Q n = exponent_floor(e);
  Expr r = e - Expr(n);
  AtomP a = single_atom(base);
  AtomP fam = (a && a->laurent() && !a->unit()) ? a : base_marker(base);
  long ni = n.get_num().get_si();
  if (ni != 0) out.push_back({fam, static_cast<int>(ni)});
  if (!r.is_zero_form()) out.push_back({intern_atom(AtomKind::Pow, "", {}, {base, r}), 1});
  std::sort(out.begin(), out.end(), [](auto& x, auto& y) { return atom_less(x.first, y.first); });
  return out;
}

namespace {

Expr from_factors(const std::vector<std::pair<AtomP, int>>& fs) {
  Mono m{fs};
  std::sort(m.f.begin(), m.f.end(), [](auto& x, auto& y) { return atom_less(x.first, y.first); });
  canon_units(m);
  Poly p;
  p.terms.push_back({m, Q(1)});
  return make_expr(std::move(p), {});
}

Expr pow_prime(const Expr& base, const Expr& e) {
  if (auto c = base.as_const()) {
    if (*c == 1) return Expr(1);
  }
  return from_factors(pow_factors(base, e));
}

Expr pow_atom(AtomP a, const Expr& e) {
  switch (a->kind) {
    case AtomKind::Exp:
      return exp(a->args[0] * e);
    case AtomKind::Pow:
      return pow(a->args[0], a->args[1] * e);
    default:
      return pow_prime(atom_expr(a, 1), e);
  }
}

Expr pow_poly(const Poly& p, const Expr& e) {
  if (p.terms.size() == 1) {
    Expr r = pow_prime(Expr(p.terms[0].c), e);
    for (auto& [a, k] : p.terms[0].m.f) r *= pow_atom(a, Expr(static_cast<long>(k)) * e);
    return r;
  }
  // positive rational content and monomial content come out
  mpz_class g = 0, l = 1;
  for (auto& t : p.terms) {
    mpz_gcd(g.get_mpz_t(), g.get_mpz_t(), t.c.get_num_mpz_t());
    mpz_lcm(l.get_mpz_t(), l.get_mpz_t(), t.c.get_den_mpz_t());
  }
  Q content(g, l);
  content.canonicalize();
  Expr r = pow_prime(Expr(content), e);
  Poly rest = poly_scale(p, Q(1) / content);
  Expr re = poly_expr(rest);
  // monomial content of free Laurent atoms
  std::map<AtomP, int, bool (*)(AtomP, AtomP)> mins(atom_less);
  bool first = true;
  for (auto& t : rest.terms) {
    std::map<AtomP, int, bool (*)(AtomP, AtomP)> here(atom_less);
    for (auto& [a, k] : t.m.f)
      if (!a->unit()) here[a] = k;
    if (first) {
      mins = here;
      first = false;
    } else {
      for (auto& [a, k] : mins) {
        auto it = here.find(a);
        k = std::min(k, it == here.end() ? 0 : it->second);
      }
    }
  }
  Expr mono(1);
  for (auto& [a, k] : mins)
    if (k != 0) {
      mono *= atom_expr(a, k);
      r *= pow_atom(a, Expr(static_cast<long>(k)) * e);
    }
  re = re / mono;
  r *= pow_prime(re, e);
  return r;
}

}  // namespace

Expr pow(const Expr& b, const Expr& e) {
  if (auto c = e.as_const()) {
    if (c->get_den() == 1) return pow(b, c->get_num().get_si());
  }
  if (b.is_zero_form()) return b;
  if (e.is_zero_form()) return Expr(1);
  auto& r = b.rf();
  Expr out = pow_poly(r.num, e);
  for (auto& [f, k] : r.den) out *= pow_poly(f->p, Expr(static_cast<long>(-k)) * e);
  return out;
}

Expr sin(const Expr& a) {
  if (a.is_zero_form()) return Expr();
  return atom_expr(sin_atom(a));
}
Expr cos(const Expr& a) {
  if (a.is_zero_form()) return Expr(1);
  return atom_expr(cos_atom(a));
}
Expr tan(const Expr& a) { return sin(a) / cos(a); }
Expr cot(const Expr& a) { return cos(a) / sin(a); }
Expr exp(const Expr& a) {
  if (a.is_zero_form()) return Expr(1);
  return atom_expr(exp_atom(a));
}
Expr ln(const Expr& a) {
  if (auto c = a.as_const()) {
    if (*c == 1) return Expr();
  }
  if (a.is_zero_form()) throw PoleError("ln(0)");
  return atom_expr(intern_atom(AtomKind::Ln, "", {}, {a}));
}
Expr fn(const std::string& name, int order, const Expr& arg) {
  return atom_expr(intern_atom(AtomKind::Fn, name, {order}, {arg}));
}
Expr fn(const std::string& name, const std::vector<int>& orders, const std::vector<Expr>& args) {
  return atom_expr(intern_atom(AtomKind::Fn, name, orders, args));
}

// ---------------------------------------------------------------- queries

namespace {

void collect_vars(const Poly& p, std::vector<AtomP>& out) {
  for (auto& t : p.terms)
    for (auto& [a, e] : t.m.f) out.insert(out.end(), a->vars.begin(), a->vars.end());
}

}  // namespace

std::vector<AtomP> variable_atoms(const Expr& e) {
  std::vector<AtomP> out;
  collect_vars(e.rf().num, out);
  for (auto& [f, k] : e.rf().den) collect_vars(f->p, out);
  std::sort(out.begin(), out.end(), atom_less);
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

std::set<std::string> variables(const Expr& e) {
  std::set<std::string> s;
  for (auto a : variable_atoms(e)) s.insert(a->name);
  return s;
}

namespace {
bool atom_depends(AtomP a, AtomP v) { return std::binary_search(a->vars.begin(), a->vars.end(), v, atom_less); }

bool poly_depends(const Poly& p, AtomP v) {
  for (auto& t : p.terms)
    for (auto& [a, e] : t.m.f)
      if (atom_depends(a, v)) return true;
  return false;
}
}  // namespace

bool depends_on(const Expr& e, AtomP v) {
  if (poly_depends(e.rf().num, v)) return true;
  for (auto& [f, k] : e.rf().den)
    if (poly_depends(f->p, v)) return true;
  return false;
}

Expr normalize(const Expr& e) { return make_expr(e.rf().num, e.rf().den); }

Expr numerator(const Expr& e) { return poly_expr(e.rf().num); }

Expr denominator(const Expr& e) {
  Poly d = poly_const(1);
  for (auto& [f, k] : e.rf().den) d = poly_mul(d, poly_pow(f->p, k));
  return poly_expr(d);
}

std::size_t term_count(const Expr& e) {
  std::size_t n = e.rf().num.terms.size();
  for (auto& [f, k] : e.rf().den) n += f->p.terms.size();
  return n;
}

// ---------------------------------------------------------------- calculus

namespace {

std::mutex g_dcache_mu;
std::map<std::pair<AtomP, AtomP>, Expr>& dcache() {
  static std::map<std::pair<AtomP, AtomP>, Expr> c;
  return c;
}

Expr atom_derivative(AtomP a, AtomP v) {
  if (a == v) return Expr(1);
  if (!atom_depends(a, v)) return Expr();
  {
    std::lock_guard lk(g_dcache_mu);
    auto it = dcache().find({a, v});
    if (it != dcache().end()) return it->second;
  }
  Expr r;
  switch (a->kind) {
    case AtomKind::Var:
      break;
    case AtomKind::Sin:
      r = cos(a->args[0]) * differentiate(a->args[0], v);
      break;
    case AtomKind::Cos:
      r = -sin(a->args[0]) * differentiate(a->args[0], v);
      break;
    case AtomKind::Exp:
      r = atom_expr(a) * differentiate(a->args[0], v);
      break;
    case AtomKind::Ln:
      r = differentiate(a->args[0], v) / a->args[0];
      break;
    case AtomKind::Base:
      r = differentiate(a->args[0], v);
      break;
    case AtomKind::Pow: {
      const Expr& b = a->args[0];
      const Expr& e = a->args[1];
      bool db = depends_on(b, v), de = depends_on(e, v);
      if (db && de) throw UnsupportedForm("power with base and exponent depending on " + v->name);
      if (db)
        r = e * atom_expr(a) * differentiate(b, v) / b;
      else
        r = atom_expr(a) * differentiate(e, v) * ln(b);
      break;
    }
    case AtomKind::Fn: {
      for (std::size_t k = 0; k < a->args.size(); ++k) {
        Expr dk = differentiate(a->args[k], v);
        if (dk.is_zero_form()) continue;
        auto ord = a->orders;
        ord[k] += 1;
        r += atom_expr(intern_atom(AtomKind::Fn, a->name, ord, a->args)) * dk;
      }
      break;
    }
  }
  std::lock_guard lk(g_dcache_mu);
  dcache().emplace(std::make_pair(a, v), r);
  return r;
}

// derivative of a polynomial, as an Expr
Expr poly_derivative(const Poly& p, AtomP v) {
  std::unordered_map<Mono, Q, MonoHash> direct;
  std::map<AtomP, std::unordered_map<Mono, Q, MonoHash>, bool (*)(AtomP, AtomP)> by_atom(atom_less);
  for (auto& t : p.terms) {
    for (std::size_t i = 0; i < t.m.f.size(); ++i) {
      auto [a, e] = t.m.f[i];
      if (!atom_depends(a, v)) continue;
      Mono m = t.m;
      if (e == 1)
        m.f.erase(m.f.begin() + static_cast<long>(i));
      else
        m.f[i].second = e - 1;
      Q c = t.c * e;
      if (a == v)
        direct[m] += c;
      else
        by_atom[a][m] += c;
    }
  }
  Expr r = poly_expr(poly_from_map(std::move(direct)));
  for (auto& [a, acc] : by_atom) r += poly_expr(poly_from_map(std::move(acc))) * atom_derivative(a, v);
  return r;
}

}  // namespace

Expr differentiate(const Expr& e, AtomP v) {
  if (!depends_on(e, v)) return Expr();
  auto& r = e.rf();
  Expr dn = poly_derivative(r.num, v);
  if (r.den.empty()) return dn;
  Expr s;
  for (auto& [f, k] : r.den) {
    if (!poly_depends(f->p, v)) continue;
    Expr df = poly_derivative(f->p, v);
    s += Expr(static_cast<long>(k)) * df / poly_expr(f->p);
  }
  Expr t = dn - poly_expr(r.num) * s;
  return t * make_expr(poly_const(1), r.den);
}

Expr differentiate(const Expr& e, const std::string& v) { return differentiate(e, var_atom(v)); }

// ---------------------------------------------------------------- substitution

namespace {

bool mentions_fn(const Expr& e, const std::string& name);

bool atom_mentions_fn(AtomP a, const std::string& name) {
  if (a->kind == AtomKind::Fn && a->name == name) return true;
  for (auto& x : a->args)
    if (mentions_fn(x, name)) return true;
  return false;
}

bool poly_mentions_fn(const Poly& p, const std::string& name) {
  for (auto& t : p.terms)
    for (auto& pr : t.m.f)
      if (pr.first->kind != AtomKind::Var && atom_mentions_fn(pr.first, name)) return true;
  return false;
}

bool mentions_fn(const Expr& e, const std::string& name) {
  if (poly_mentions_fn(e.rf().num, name)) return true;
  for (auto& [f, k] : e.rf().den)
    if (poly_mentions_fn(f->p, name)) return true;
  return false;
}

struct Subst {
  const std::map<AtomP, Expr>& s;
  std::map<AtomP, std::optional<Expr>> memo;
  std::string fname;
  std::function<Expr(int, const Expr&)> fimage;

  bool touches(AtomP a) const {
    if (fimage) return a->kind != AtomKind::Var && atom_mentions_fn(a, fname);
    for (auto v : a->vars)
      if (s.count(v)) return true;
    return false;
  }

  std::optional<Expr> image(AtomP a) {
    auto it = memo.find(a);
    if (it != memo.end()) return it->second;
    std::optional<Expr> r;
    if (a->kind == AtomKind::Var) {
      auto f = s.find(a);
      if (f != s.end()) r = f->second;
    } else if (touches(a)) {
      std::vector<Expr> na;
      for (auto& x : a->args) na.push_back(apply(x));
      switch (a->kind) {
        case AtomKind::Sin: r = sin(na[0]); break;
        case AtomKind::Cos: r = cos(na[0]); break;
        case AtomKind::Exp: r = exp(na[0]); break;
        case AtomKind::Ln: r = ln(na[0]); break;
        case AtomKind::Pow: r = pow(na[0], na[1]); break;
        case AtomKind::Base: r = na[0]; break;
        case AtomKind::Fn:
          if (fimage && a->name == fname && na.size() == 1)
            r = fimage(a->orders[0], na[0]);
          else
            r = fn(a->name, a->orders, na);
          break;
        case AtomKind::Var: break;
      }
    }
    memo[a] = r;
    return r;
  }

  Expr apply_poly(const Poly& p) {
    Poly keep;
    std::map<std::vector<std::pair<AtomP, int>>, std::unordered_map<Mono, Q, MonoHash>> groups;
    for (auto& t : p.terms) {
      Mono rest;
      std::vector<std::pair<AtomP, int>> ch;
      for (auto& pr : t.m.f) {
        if (image(pr.first))
          ch.push_back(pr);
        else
          rest.f.push_back(pr);
      }
      if (ch.empty())
        keep.terms.push_back(t);
      else
        groups[ch][rest] += t.c;
    }
    Expr r = poly_expr(keep);
    std::map<std::pair<AtomP, int>, Expr> powc;
    for (auto& [ch, acc] : groups) {
      Expr part = poly_expr(poly_from_map(std::move(acc)));
      for (auto& pr : ch) {
        auto it = powc.find(pr);
        if (it == powc.end()) it = powc.emplace(pr, pow(*image(pr.first), static_cast<long>(pr.second))).first;
        part *= it->second;
      }
      r += part;
    }
    return r;
  }

  Expr apply(const Expr& e) {
    auto& rf = e.rf();
    bool any = false;
    if (fimage) {
      any = mentions_fn(e, fname);
    } else {
      for (auto v : variable_atoms(e))
        if (s.count(v)) any = true;
    }
    if (!any) return e;
    Expr r = apply_poly(rf.num);
    for (auto& [f, k] : rf.den) r /= pow(apply_poly(f->p), static_cast<long>(k));
    return r;
  }
};

}  // namespace

Expr substitute(const Expr& e, const std::map<AtomP, Expr>& s) {
  Subst st{s, {}};
  return st.apply(e);
}

Expr substitute_function(const Expr& e, const std::string& name,
                         const std::function<Expr(int, const Expr&)>& image) {
  static const std::map<AtomP, Expr> none;
  Subst st{none, {}, name, image};
  return st.apply(e);
}

Expr substitute(const Expr& e, const std::map<std::string, Expr>& s) {
  std::map<AtomP, Expr> m;
  for (auto& [k, v] : s) m.emplace(var_atom(k), v);
  return substitute(e, m);
}

// ---------------------------------------------------------------- evaluation

std::uint64_t hash_str(const std::string& s, std::uint64_t seed) {
  std::uint64_t h = 1469598103934665603ull ^ (seed * 0x9e3779b97f4a7c15ull);
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  h ^= h >> 33;
  h *= 0xff51afd7ed558ccdull;
  h ^= h >> 33;
  return h;
}

Q sample_rational(std::uint64_t h, int range, int maxden) {
  long den = static_cast<long>(h % static_cast<std::uint64_t>(maxden)) + 1;
  long num = static_cast<long>((h >> 16) % static_cast<std::uint64_t>(2 * range * den + 1)) - range * den;
  Q q(num, den);
  q.canonicalize();
  return q;
}

namespace {

Q nonzero_sample(const std::string& key, std::uint64_t seed, bool positive) {
  for (std::uint64_t k = 0;; ++k) {
    Q q = sample_rational(hash_str(key, seed + 7919 * k));
    if (positive && sgn(q) < 0) q = -q;
    if (sgn(q) != 0) return q;
  }
}

Q qpow(const Q& b, long n) {
  Q r = 1;
  Q base = b;
  bool neg = n < 0;
  if (neg) {
    if (sgn(b) == 0) throw PoleError("zero to a negative power");
    n = -n;
  }
  while (n) {
    if (n & 1) r *= base;
    base *= base;
    n >>= 1;
  }
  return neg ? Q(1) / r : r;
}

struct QEval {
  const std::map<std::string, Q>& asg;
  std::uint64_t seed;
  std::unordered_map<AtomP, Q> memo;

  Q tau(AtomP trig) {
    const std::string k = "tau:" + trig->args[0].str();
    auto it = asg.find(k);
    if (it != asg.end()) return it->second;
    return sample_rational(hash_str(k, seed));
  }

  Q atom(AtomP a) {
    auto it = memo.find(a);
    if (it != memo.end()) return it->second;
    Q v;
    switch (a->kind) {
      case AtomKind::Var: {
        auto f = asg.find(a->name);
        if (f == asg.end()) throw std::runtime_error("unassigned variable " + a->name);
        v = f->second;
        break;
      }
      case AtomKind::Sin: {
        Q t = tau(a);
        v = 2 * t / (1 + t * t);
        break;
      }
      case AtomKind::Cos: {
        Q t = tau(a);
        v = (1 - t * t) / (1 + t * t);
        break;
      }
      case AtomKind::Pow: {
        Q e = expr(a->args[1]);
        if (e.get_den() == 1) {
          v = qpow(expr(a->args[0]), e.get_num().get_si());
          break;
        }
        v = nonzero_sample(a->key, seed, true);
        break;
      }
      case AtomKind::Base:
        v = expr(a->args[0]);
        break;
      case AtomKind::Exp:
        v = nonzero_sample(a->key, seed, true);
        break;
      default:
        v = nonzero_sample(a->key, seed, false);
        break;
    }
    memo.emplace(a, v);
    return v;
  }

  Q poly(const Poly& p) {
    Q s = 0;
    for (auto& t : p.terms) {
      Q m = t.c;
      for (auto& [a, e] : t.m.f) m *= qpow(atom(a), e);
      s += m;
    }
    return s;
  }

  Q expr(const Expr& e) {
    Q n = poly(e.rf().num);
    Q d = 1;
    for (auto& [f, k] : e.rf().den) {
      Q fv = poly(f->p);
      if (sgn(fv) == 0) throw PoleError("pole at factor " + f->key);
      d *= qpow(fv, k);
    }
    return n / d;
  }
};

struct DEval {
  const std::map<std::string, double>& asg;
  std::unordered_map<AtomP, double> memo;

  double fnval(AtomP a) {
    // undetermined functions are modelled by an exponential whose
    // derivatives are consistent with the formal orders
    double arg = 0, scale = 1;
    for (std::size_t k = 0; k < a->args.size(); ++k) {
      double w = 1.0 / static_cast<double>(k + 2);
      arg += w * expr(a->args[k]);
      scale *= std::pow(w, a->orders[k]);
    }
    return scale * std::exp(arg);
  }

  double atom(AtomP a) {
    auto it = memo.find(a);
    if (it != memo.end()) return it->second;
    double v = 0;
    switch (a->kind) {
      case AtomKind::Var: {
        auto f = asg.find(a->name);
        if (f == asg.end()) throw std::runtime_error("unassigned variable " + a->name);
        v = f->second;
        break;
      }
      case AtomKind::Sin: v = std::sin(expr(a->args[0])); break;
      case AtomKind::Cos: v = std::cos(expr(a->args[0])); break;
      case AtomKind::Exp: v = std::exp(expr(a->args[0])); break;
      case AtomKind::Ln: v = std::log(expr(a->args[0])); break;
      case AtomKind::Pow: v = std::pow(expr(a->args[0]), expr(a->args[1])); break;
      case AtomKind::Base: v = expr(a->args[0]); break;
      case AtomKind::Fn: v = fnval(a); break;
    }
    memo.emplace(a, v);
    return v;
  }

  double poly(const Poly& p) {
    double s = 0;
    for (auto& t : p.terms) {
      double m = t.c.get_d();
      for (auto& [a, e] : t.m.f) m *= std::pow(atom(a), e);
      s += m;
    }
    return s;
  }

  double expr(const Expr& e) {
    double n = poly(e.rf().num);
    for (auto& [f, k] : e.rf().den) n /= std::pow(poly(f->p), k);
    return n;
  }
};

struct DualEval {
  const std::map<std::string, Dual>& asg;
  std::size_t n;
  std::uint64_t seed;
  std::map<std::string, Q> qasg;
  std::unique_ptr<QEval> qe;
  std::unordered_map<AtomP, Dual> memo;

  DualEval(const std::map<std::string, Dual>& a, std::size_t nn, std::uint64_t s) : asg(a), n(nn), seed(s) {
    for (auto& [k, v] : asg) qasg[k] = v.v;
    qe = std::make_unique<QEval>(QEval{qasg, seed, {}});
  }

  Dual cst(const Q& c) { return Dual{c, std::vector<Q>(n)}; }

  static void axpy(std::vector<Q>& y, const Q& a, const std::vector<Q>& x) {
    if (sgn(a) == 0) return;
    for (std::size_t i = 0; i < y.size(); ++i)
      if (sgn(x[i]) != 0) y[i] += a * x[i];
  }

  Dual atom(AtomP a) {
    auto it = memo.find(a);
    if (it != memo.end()) return it->second;
    Dual d = cst(0);
    if (a->kind == AtomKind::Var) {
      auto f = asg.find(a->name);
      if (f == asg.end()) throw std::runtime_error("unassigned variable " + a->name);
      d = f->second;
      if (d.g.size() != n) d.g.resize(n);
    } else {
      d.v = qe->atom(a);
      // chain rule through each argument
      for (std::size_t k = 0; k < a->args.size(); ++k) {
        Dual ad = expr(a->args[k]);
        bool zero = true;
        for (auto& g : ad.g)
          if (sgn(g) != 0) zero = false;
        if (zero) continue;
        Q partial;
        switch (a->kind) {
          case AtomKind::Sin: partial = qe->atom(cos_atom(a->args[0])); break;
          case AtomKind::Cos: partial = -qe->atom(sin_atom(a->args[0])); break;
          case AtomKind::Exp: partial = d.v; break;
          case AtomKind::Ln: partial = Q(1) / ad.v; break;
          case AtomKind::Base: partial = 1; break;
          case AtomKind::Pow:
            if (k == 0)
              partial = qe->expr(a->args[1]) * d.v / ad.v;
            else
              partial = d.v * qe->expr(ln(a->args[0]));
            break;
          case AtomKind::Fn: {
            auto ord = a->orders;
            ord[k] += 1;
            partial = qe->atom(intern_atom(AtomKind::Fn, a->name, ord, a->args));
            break;
          }
          case AtomKind::Var: break;
        }
        axpy(d.g, partial, ad.g);
      }
    }
    memo.emplace(a, d);
    return d;
  }

  Dual powd(const Dual& b, int e) {
    // d(b^e) = e b^(e-1) db
    Dual r = cst(qpow(b.v, e));
    axpy(r.g, Q(e) * qpow(b.v, e - 1), b.g);
    return r;
  }

  Dual poly(const Poly& p) {
    Dual s = cst(0);
    for (auto& t : p.terms) {
      // value and gradient of one monomial via logarithmic derivative-free product rule
      Q val = t.c;
      std::vector<Dual> fs;
      for (auto& [a, e] : t.m.f) fs.push_back(powd(atom(a), e));
      for (auto& f : fs) val *= f.v;
      s.v += val;
      for (std::size_t i = 0; i < fs.size(); ++i) {
        Q others = t.c;
        for (std::size_t j = 0; j < fs.size(); ++j)
          if (j != i) others *= fs[j].v;
        axpy(s.g, others, fs[i].g);
      }
    }
    return s;
  }

  Dual expr(const Expr& e) {
    Dual num = poly(e.rf().num);
    for (auto& [f, k] : e.rf().den) {
      Dual fv = poly(f->p);
      if (sgn(fv.v) == 0) throw PoleError("pole at factor " + f->key);
      Dual inv = powd(fv, -k);
      // product rule
      Dual r = cst(num.v * inv.v);
      axpy(r.g, inv.v, num.g);
      axpy(r.g, num.v, inv.g);
      num = std::move(r);
    }
    return num;
  }
};

}  // namespace

Q eval_at(const Expr& e, const std::map<std::string, Q>& assignment, const EvalPolicy& pol) {
  QEval ev{assignment, pol.seed, {}};
  return ev.expr(e);
}

double eval_double(const Expr& e, const std::map<std::string, double>& a) {
  DEval ev{a, {}};
  return ev.expr(e);
}

Dual eval_dual(const Expr& e, const std::map<std::string, Dual>& assignment, std::size_t nseeds,
               const EvalPolicy& pol) {
  DualEval ev(assignment, nseeds, pol.seed);
  return ev.expr(e);
}

ZeroResult is_zero(const Expr& e, const ZeroOptions& opt) {
  if (e.is_zero_form()) return {ZeroVerdict::Certified, {}, Q(0)};
  auto vars = variables(e);
  // unit points first: they give readable witnesses
  for (const auto& v : vars) {
    std::map<std::string, Q> a;
    for (auto& w : vars) a[w] = (w == v) ? 1 : 0;
    try {
      Q val = eval_at(e, a, EvalPolicy{opt.seed});
      if (sgn(val) != 0) return {ZeroVerdict::Nonzero, a, val};
    } catch (const PoleError&) {
    }
  }
  int good = 0;
  for (int k = 0; k < opt.budget && good < opt.samples; ++k) {
    std::map<std::string, Q> a;
    for (auto& w : vars) a[w] = sample_rational(hash_str(w, opt.seed * 1000003ull + static_cast<std::uint64_t>(k)), 7, 9);
    try {
      Q val = eval_at(e, a, EvalPolicy{opt.seed + static_cast<std::uint64_t>(k)});
      ++good;
      if (sgn(val) != 0) return {ZeroVerdict::Nonzero, a, val};
    } catch (const PoleError&) {
    }
  }
  if (good < opt.samples) throw Inconclusive("could not find enough pole-free sample points");
  return {ZeroVerdict::Probable, {}, Q(0)};
}

}  // namespace fluidinv
