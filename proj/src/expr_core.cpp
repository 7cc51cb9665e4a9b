#include "fluidinv/expr_internal.hpp"

#include <algorithm>
#include <mutex>
#include <shared_mutex>
#include <unordered_map>

namespace fluidinv {

namespace {

std::uint64_t key_prefix(const std::string& k) {
  std::uint64_t p = 0;
  for (std::size_t i = 0; i < 8; ++i) {
    p <<= 8;
    if (i < k.size()) p |= static_cast<unsigned char>(k[i]);
  }
  return p;
}

struct AtomTable {
  std::shared_mutex mu;
  std::unordered_map<std::string, std::unique_ptr<Atom>> atoms;
  std::unordered_map<std::string, std::unique_ptr<Factor>> factors;
};

AtomTable& table() {
  static AtomTable t;
  return t;
}

}  // namespace

std::string atom_key(AtomKind k, const std::string& name, const std::vector<int>& orders,
                     const std::vector<Expr>& args) {
  switch (k) {
    case AtomKind::Var:
      return name;
    case AtomKind::Sin:
      return "sin(" + args[0].str() + ")";
    case AtomKind::Cos:
      return "cos(" + args[0].str() + ")";
    case AtomKind::Exp:
      return "exp(" + args[0].str() + ")";
    case AtomKind::Ln:
      return "ln(" + args[0].str() + ")";
    case AtomKind::Base:
      return "base(" + args[0].str() + ")";
    case AtomKind::Pow: {
      std::string b = args[0].str();
      if (!args[0].as_var()) b = "(" + b + ")";
      return b + "^(" + args[1].str() + ")";
    }
    case AtomKind::Fn: {
      std::string s = name;
      if (args.size() == 1) {
        if (orders[0] > 0) s += std::to_string(orders[0]);
      } else {
        bool any = false;
        for (int o : orders) any = any || o != 0;
        if (any) {
          s += "[";
          for (std::size_t i = 0; i < orders.size(); ++i) {
            if (i) s += ",";
            s += std::to_string(orders[i]);
          }
          s += "]";
        }
      }
      s += "(";
      for (std::size_t i = 0; i < args.size(); ++i) {
        if (i) s += ", ";
        s += args[i].str();
      }
      return s + ")";
    }
  }
  return {};
}

AtomP intern_atom(AtomKind k, const std::string& name, std::vector<int> orders,
                  std::vector<Expr> args) {
  std::string key = atom_key(k, name, orders, args);
  auto& t = table();
  {
    std::shared_lock lk(t.mu);
    auto it = t.atoms.find(key);
    if (it != t.atoms.end()) return it->second.get();
  }
  auto a = std::make_unique<Atom>();
  a->kind = k;
  a->name = name;
  a->orders = std::move(orders);
  a->args = std::move(args);
  a->key = key;
  a->prefix = key_prefix(key);
  std::unique_lock lk(t.mu);
  auto it = t.atoms.find(key);
  if (it != t.atoms.end()) return it->second.get();
  Atom* raw = a.get();
  if (k == AtomKind::Var) {
    raw->vars = {raw};
  } else {
    std::vector<AtomP> vs;
    for (auto& e : raw->args) {
      auto v = variable_atoms(e);
      vs.insert(vs.end(), v.begin(), v.end());
    }
    std::sort(vs.begin(), vs.end(), atom_less);
    vs.erase(std::unique(vs.begin(), vs.end()), vs.end());
    raw->vars = std::move(vs);
  }
  t.atoms.emplace(key, std::move(a));
  return raw;
}

AtomP var_atom(const std::string& name) { return intern_atom(AtomKind::Var, name, {}, {}); }

FactorP intern_factor(Poly p) {
  std::string key = poly_str(p);
  auto& t = table();
  {
    std::shared_lock lk(t.mu);
    auto it = t.factors.find(key);
    if (it != t.factors.end()) return it->second.get();
  }
  auto f = std::make_unique<Factor>();
  f->key = key;
  f->prefix = key_prefix(key);
  f->lead_unique = p.terms.size() < 2 || free_cmp(p.terms[0].m, p.terms[1].m) != 0;
  f->p = std::move(p);
  std::unique_lock lk(t.mu);
  auto it = t.factors.find(key);
  if (it != t.factors.end()) return it->second.get();
  FactorP raw = f.get();
  t.factors.emplace(key, std::move(f));
  return raw;
}

bool atom_less(AtomP a, AtomP b) {
  if (a == b) return false;
  bool ua = a->unit(), ub = b->unit();
  if (ua != ub) return ub;
  if (a->prefix != b->prefix) return a->prefix < b->prefix;
  return a->key < b->key;
}

bool factor_less(FactorP a, FactorP b) {
  if (a == b) return false;
  if (a->prefix != b->prefix) return a->prefix < b->prefix;
  return a->key < b->key;
}

// ---------------------------------------------------------------- monomials

int mono_cmp(const Mono& a, const Mono& b) {
  std::size_t i = 0, j = 0;
  while (i < a.f.size() || j < b.f.size()) {
    if (i < a.f.size() && j < b.f.size() && a.f[i].first == b.f[j].first) {
      if (a.f[i].second != b.f[j].second) return a.f[i].second > b.f[j].second ? 1 : -1;
      ++i;
      ++j;
      continue;
    }
    bool take_a = j >= b.f.size() || (i < a.f.size() && atom_less(a.f[i].first, b.f[j].first));
    if (take_a) return a.f[i].second > 0 ? 1 : -1;
    return b.f[j].second > 0 ? -1 : 1;
  }
  return 0;
}

int free_cmp(const Mono& a, const Mono& b) {
  std::size_t i = 0, j = 0;
  auto na = a.f.size(), nb = b.f.size();
  while (na && a.f[na - 1].first->unit()) --na;
  while (nb && b.f[nb - 1].first->unit()) --nb;
  while (i < na || j < nb) {
    if (i < na && j < nb && a.f[i].first == b.f[j].first) {
      if (a.f[i].second != b.f[j].second) return a.f[i].second > b.f[j].second ? 1 : -1;
      ++i;
      ++j;
      continue;
    }
    bool take_a = j >= nb || (i < na && atom_less(a.f[i].first, b.f[j].first));
    if (take_a) return a.f[i].second > 0 ? 1 : -1;
    return b.f[j].second > 0 ? -1 : 1;
  }
  return 0;
}

std::size_t MonoHash::operator()(const Mono& m) const {
  std::size_t h = 1469598103934665603ull;
  for (auto& [a, e] : m.f) {
    h ^= reinterpret_cast<std::uintptr_t>(a) + 0x9e3779b97f4a7c15ull + (h << 6) + (h >> 2);
    h ^= static_cast<std::size_t>(e) * 0x100000001b3ull;
  }
  return h;
}

namespace {

AtomP unit_family(AtomP u) {
  // exp atoms share one family, powers are grouped by base
  if (u->kind == AtomKind::Exp) return nullptr;
  return pow_family(u);
}

struct VecHash {
  std::size_t operator()(const std::vector<std::pair<AtomP, int>>& v) const {
    return MonoHash{}(Mono{v});
  }
};

std::mutex g_unit_mu;
std::unordered_map<std::vector<std::pair<AtomP, int>>, std::vector<std::pair<AtomP, int>>, VecHash>&
unit_cache() {
  static std::unordered_map<std::vector<std::pair<AtomP, int>>, std::vector<std::pair<AtomP, int>>,
                            VecHash>
      c;
  return c;
}

// combine unit atoms of one family into canonical factors
std::vector<std::pair<AtomP, int>> combine_units(const std::vector<std::pair<AtomP, int>>& us) {
  {
    std::lock_guard lk(g_unit_mu);
    auto it = unit_cache().find(us);
    if (it != unit_cache().end()) return it->second;
  }
  std::vector<std::pair<AtomP, int>> out;
  if (us.front().first->kind == AtomKind::Exp) {
    Expr arg;
    for (auto& [a, k] : us) arg += Expr(static_cast<long>(k)) * a->args[0];
    if (!arg.is_zero_form()) out.push_back({exp_atom(arg), 1});
  } else {
    Expr e;
    for (auto& [a, k] : us) e += Expr(static_cast<long>(k)) * a->args[1];
    out = pow_factors(us.front().first->args[0], e);
  }
  std::lock_guard lk(g_unit_mu);
  unit_cache().emplace(us, out);
  return out;
}

void merge_into(std::vector<std::pair<AtomP, int>>& dst,
                const std::vector<std::pair<AtomP, int>>& src) {
  std::vector<std::pair<AtomP, int>> r;
  r.reserve(dst.size() + src.size());
  std::size_t i = 0, j = 0;
  while (i < dst.size() || j < src.size()) {
    if (i < dst.size() && j < src.size() && dst[i].first == src[j].first) {
      int e = dst[i].second + src[j].second;
      if (e) r.push_back({dst[i].first, e});
      ++i;
      ++j;
    } else if (j >= src.size() || (i < dst.size() && atom_less(dst[i].first, src[j].first))) {
      r.push_back(dst[i++]);
    } else {
      r.push_back(src[j++]);
    }
  }
  dst.swap(r);
}

}  // namespace

// Canonicalise the unit part of a raw product.
void canon_units(Mono& m) {
  std::size_t first_unit = m.f.size();
  while (first_unit > 0 && m.f[first_unit - 1].first->unit()) --first_unit;
  std::size_t nu = m.f.size() - first_unit;
  if (nu == 0) return;
  bool clean = true;
  if (nu == 1) {
    clean = m.f.back().second == 1;
  } else {
    std::vector<AtomP> fams;
    for (std::size_t i = first_unit; i < m.f.size(); ++i) {
      if (m.f[i].second != 1) clean = false;
      fams.push_back(unit_family(m.f[i].first));
    }
    std::sort(fams.begin(), fams.end());
    if (std::adjacent_find(fams.begin(), fams.end()) != fams.end()) clean = false;
  }
  if (clean) return;
  std::vector<std::pair<AtomP, int>> units(m.f.begin() + first_unit, m.f.end());
  m.f.resize(first_unit);
  // group by family in a deterministic order
  std::vector<std::pair<AtomP, int>> rebuilt;
  std::vector<bool> used(units.size(), false);
  for (std::size_t i = 0; i < units.size(); ++i) {
    if (used[i]) continue;
    std::vector<std::pair<AtomP, int>> grp{units[i]};
    used[i] = true;
    AtomP fam = unit_family(units[i].first);
    for (std::size_t j = i + 1; j < units.size(); ++j) {
      if (!used[j] && unit_family(units[j].first) == fam) {
        grp.push_back(units[j]);
        used[j] = true;
      }
    }
    if (grp.size() == 1 && grp[0].second == 1) {
      rebuilt.push_back(grp[0]);
      continue;
    }
    auto parts = combine_units(grp);
    for (auto& p : parts) rebuilt.push_back(p);
  }
  std::sort(rebuilt.begin(), rebuilt.end(),
            [](auto& a, auto& b) { return atom_less(a.first, b.first); });
  // rebuilt may contain repeated atoms when families overlap; merge pairwise
  std::vector<std::pair<AtomP, int>> acc;
  for (auto& p : rebuilt) merge_into(acc, {p});
  merge_into(m.f, acc);
}

Mono mono_mul(const Mono& a, const Mono& b) {
  Mono r{a.f};
  merge_into(r.f, b.f);
  canon_units(r);
  return r;
}

Mono mono_pow(const Mono& a, int n) {
  Mono r;
  if (n == 0) return r;
  for (auto& [at, e] : a.f) r.f.push_back({at, e * n});
  canon_units(r);
  return r;
}

bool mono_has_kind(const Mono& m, AtomKind k) {
  for (auto& p : m.f)
    if (p.first->kind == k) return true;
  return false;
}

// ---------------------------------------------------------------- polynomials

Poly poly_from_map(std::unordered_map<Mono, Q, MonoHash>&& acc) {
  Poly p;
  p.terms.reserve(acc.size());
  for (auto& [m, c] : acc)
    if (sgn(c) != 0) p.terms.push_back({m, c});
  std::sort(p.terms.begin(), p.terms.end(),
            [](const Term& x, const Term& y) { return mono_cmp(x.m, y.m) > 0; });
  return p;
}

Poly poly_const(const Q& c) {
  Poly p;
  if (sgn(c) != 0) p.terms.push_back({Mono{}, c});
  return p;
}

Poly poly_atom(AtomP a, int e) {
  Poly p;
  Mono m{{{a, e}}};
  canon_units(m);
  p.terms.push_back({m, Q(1)});
  return p;
}

Poly poly_add(const Poly& a, const Poly& b, const Q& sb) {
  Poly r;
  r.terms.reserve(a.terms.size() + b.terms.size());
  std::size_t i = 0, j = 0;
  while (i < a.terms.size() || j < b.terms.size()) {
    int c;
    if (i >= a.terms.size())
      c = -1;
    else if (j >= b.terms.size())
      c = 1;
    else
      c = mono_cmp(a.terms[i].m, b.terms[j].m);
    if (c > 0) {
      r.terms.push_back(a.terms[i++]);
    } else if (c < 0) {
      r.terms.push_back({b.terms[j].m, b.terms[j].c * sb});
      ++j;
    } else {
      Q s = a.terms[i].c + b.terms[j].c * sb;
      if (sgn(s) != 0) r.terms.push_back({a.terms[i].m, s});
      ++i;
      ++j;
    }
  }
  return r;
}

Poly poly_scale(const Poly& a, const Q& c) {
  if (sgn(c) == 0) return {};
  Poly r = a;
  for (auto& t : r.terms) t.c *= c;
  return r;
}

Poly poly_mul_term(const Poly& a, const Mono& m, const Q& c) {
  bool has_units = false;
  for (auto& p : m.f) has_units = has_units || p.first->unit();
  if (!has_units) {
    // plain free monomial: order is preserved
    Poly r;
    r.terms.reserve(a.terms.size());
    bool order_ok = true;
    for (auto& t : a.terms) {
      Mono mm{t.m.f};
      merge_into(mm.f, m.f);
      canon_units(mm);
      r.terms.push_back({std::move(mm), t.c * c});
    }
    for (std::size_t i = 1; i < r.terms.size() && order_ok; ++i)
      order_ok = mono_cmp(r.terms[i - 1].m, r.terms[i].m) > 0;
    if (order_ok) return r;
    std::unordered_map<Mono, Q, MonoHash> acc;
    for (auto& t : r.terms) acc[t.m] += t.c;
    return poly_from_map(std::move(acc));
  }
  std::unordered_map<Mono, Q, MonoHash> acc;
  for (auto& t : a.terms) acc[mono_mul(t.m, m)] += t.c * c;
  return poly_from_map(std::move(acc));
}

Poly poly_mul(const Poly& a, const Poly& b) {
  if (a.zero() || b.zero()) return {};
  if (a.terms.size() == 1) return poly_mul_term(b, a.terms[0].m, a.terms[0].c);
  if (b.terms.size() == 1) return poly_mul_term(a, b.terms[0].m, b.terms[0].c);
  std::unordered_map<Mono, Q, MonoHash> acc;
  acc.reserve(a.terms.size() * b.terms.size());
  for (auto& x : a.terms)
    for (auto& y : b.terms) acc[mono_mul(x.m, y.m)] += x.c * y.c;
  return poly_from_map(std::move(acc));
}

Poly poly_pow(const Poly& a, int n) {
  Poly r = poly_const(1);
  Poly b = a;
  while (n > 0) {
    if (n & 1) r = poly_mul(r, b);
    n >>= 1;
    if (n) b = poly_mul(b, b);
  }
  return r;
}

bool poly_has_kind(const Poly& p, AtomKind k) {
  for (auto& t : p.terms)
    if (mono_has_kind(t.m, k)) return true;
  return false;
}

// cos(a)^n with n >= 2 is rewritten as cos(a)^(n-2) (1 - sin(a)^2)
Poly trig_reduce(const Poly& p) {
  bool need = false;
  for (auto& t : p.terms)
    for (auto& [a, e] : t.m.f)
      if (a->kind == AtomKind::Cos && e >= 2) need = true;
  if (!need) return p;
  std::unordered_map<Mono, Q, MonoHash> acc;
  std::vector<Term> work(p.terms.begin(), p.terms.end());
  while (!work.empty()) {
    Term t = std::move(work.back());
    work.pop_back();
    std::size_t idx = t.m.f.size();
    for (std::size_t i = 0; i < t.m.f.size(); ++i)
      if (t.m.f[i].first->kind == AtomKind::Cos && t.m.f[i].second >= 2) {
        idx = i;
        break;
      }
    if (idx == t.m.f.size()) {
      acc[t.m] += t.c;
      continue;
    }
    AtomP cosa = t.m.f[idx].first;
    AtomP sina = sin_atom(cosa->args[0]);
    Mono base = t.m;
    base.f[idx].second -= 2;
    if (base.f[idx].second == 0) base.f.erase(base.f.begin() + idx);
    Mono s2 = base;
    merge_into(s2.f, {{sina, 2}});
    work.push_back({base, t.c});
    work.push_back({s2, -t.c});
  }
  return poly_from_map(std::move(acc));
}

std::string mono_str(const Mono& m, bool& has_num, std::string& den) {
  std::string num;
  den.clear();
  int nden = 0;
  for (auto& [a, e] : m.f) {
    std::string s = a->key;
    int ae = e < 0 ? -e : e;
    if (a->kind == AtomKind::Pow && ae != 1) s = "(" + s + ")";
    if (ae != 1) s += "^" + std::to_string(ae);
    if (e > 0) {
      if (!num.empty()) num += "*";
      num += s;
    } else {
      if (!den.empty()) den += "*";
      den += s;
      ++nden;
    }
  }
  has_num = !num.empty();
  if (nden > 1) den = "(" + den + ")";
  return num;
}

std::string coef_str(const Q& c) {
  if (c.get_den() == 1) return c.get_num().get_str();
  return c.get_num().get_str() + "/" + c.get_den().get_str();
}

std::string poly_str(const Poly& p) {
  if (p.zero()) return "0";
  std::string s;
  bool first = true;
  for (auto& t : p.terms) {
    Q c = t.c;
    bool neg = sgn(c) < 0;
    if (neg) c = -c;
    if (first) {
      if (neg) s += "-";
    } else {
      s += neg ? " - " : " + ";
    }
    first = false;
    bool has_num;
    std::string den;
    std::string num = mono_str(t.m, has_num, den);
    std::string body;
    if (!has_num) {
      body = coef_str(c);
    } else if (c == 1) {
      body = num;
    } else if (c.get_den() == 1) {
      body = coef_str(c) + "*" + num;
    } else {
      // a/b*x reads as (a/b)*x under left association
      body = c.get_num().get_str() + "/" + c.get_den().get_str() + "*" + num;
    }
    if (!den.empty()) body += "/" + den;
    s += body;
  }
  return s;
}

}  // namespace fluidinv
