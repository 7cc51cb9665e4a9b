#include "fluidinv/jet.hpp"

#include <algorithm>
#include <functional>

namespace fluidinv {

std::string JetBundle::jet_name(const std::string& d, const std::string& idx) {
  return idx.empty() ? d : d + "_" + normalize_index(idx);
}

bool JetBundle::split(const std::string& name, std::string& d, std::string& idx) const {
  auto us = name.find('_');
  d = us == std::string::npos ? name : name.substr(0, us);
  idx = us == std::string::npos ? "" : name.substr(us + 1);
  if (std::find(dep.begin(), dep.end(), d) == dep.end()) return false;
  for (char ch : idx)
    if (!is_indep(std::string(1, ch))) return false;
  return true;
}

bool JetBundle::is_indep(const std::string& name) const {
  return std::find(indep.begin(), indep.end(), name) != indep.end();
}

int JetBundle::jet_order(const std::string& name) const {
  std::string d, idx;
  return split(name, d, idx) ? static_cast<int>(idx.size()) : -1;
}

std::vector<std::string> JetBundle::multi_indices(int m) const {
  std::vector<std::string> out;
  std::string cur;
  std::function<void(std::size_t, int)> rec = [&](std::size_t from, int left) {
    if (left == 0) {
      out.push_back(cur);
      return;
    }
    for (std::size_t i = from; i < indep.size(); ++i) {
      cur += indep[i];
      rec(i, left - 1);
      cur.pop_back();
    }
  };
  rec(0, m);
  for (auto& s : out) s = normalize_index(s);
  return out;
}

std::vector<std::string> JetBundle::coordinates(int k) const {
  std::vector<std::string> out(indep.begin(), indep.end());
  for (int m = 0; m <= k; ++m)
    for (auto& d : dep)
      for (auto& idx : multi_indices(m)) out.push_back(jet_name(d, idx));
  return out;
}

Alphabet JetBundle::alphabet(const std::set<std::string>& params) const {
  Alphabet a;
  a.independents = indep;
  a.dependents = dep;
  a.max_order = order;
  a.names = params;
  return a;
}

Expr total_derivative(const Expr& e, const std::string& i, const JetBundle& b) {
  Expr r(0);
  for (auto& v : variables(e)) {
    if (v == i) {
      r += differentiate(e, v);
      continue;
    }
    std::string d, idx;
    if (!b.split(v, d, idx)) continue;
    r += differentiate(e, v) * Expr::var(JetBundle::jet_name(d, idx + i));
  }
  return r;
}

Expr total_derivative_multi(const Expr& e, const std::string& idx, const JetBundle& b) {
  Expr r = e;
  for (char ch : idx) r = total_derivative(r, std::string(1, ch), b);
  return r;
}

Expr VectorField::coeff(const std::string& q) const {
  auto it = c.find(q);
  return it == c.end() ? Expr(0) : it->second;
}

std::string VectorField::str() const {
  FieldCoeffs f;
  for (auto& [q, e] : c)
    if (!e.is_zero_form()) f.emplace(q, e);
  return print_field(f);
}

VectorField parse_vector_field(const std::string& text, const JetBundle& b,
                               const std::set<std::string>& params) {
  Alphabet a = b.alphabet(params);
  VectorField x;
  for (auto& [q, e] : parse_field(text, a)) {
    if (!b.is_indep(q) && b.jet_order(q) != 0 && !params.count(q))
      throw UnknownIdentifier("d/d" + q + " is not a coordinate of the bundle");
    x.c.emplace(q, e);
  }
  return x;
}

VectorField operator+(const VectorField& a, const VectorField& b) {
  VectorField r = a;
  for (auto& [q, e] : b.c) {
    auto it = r.c.find(q);
    if (it == r.c.end())
      r.c.emplace(q, e);
    else
      it->second += e;
  }
  return r;
}

VectorField operator*(const Expr& k, const VectorField& a) {
  VectorField r;
  for (auto& [q, e] : a.c) r.c.emplace(q, k * e);
  return r;
}

bool is_zero_field(const VectorField& a) {
  return std::all_of(a.c.begin(), a.c.end(), [](auto& kv) { return kv.second.is_zero_form(); });
}

Expr apply(const VectorField& x, const Expr& e) {
  Expr r(0);
  for (auto& v : variables(e)) {
    auto it = x.c.find(v);
    if (it == x.c.end() || it->second.is_zero_form()) continue;
    r += it->second * differentiate(e, v);
  }
  return r;
}

VectorField bracket(const VectorField& x, const VectorField& y) {
  VectorField r;
  std::set<std::string> keys;
  for (auto& kv : x.c) keys.insert(kv.first);
  for (auto& kv : y.c) keys.insert(kv.first);
  for (auto& q : keys) {
    Expr v = apply(x, y.coeff(q)) - apply(y, x.coeff(q));
    if (!v.is_zero_form()) r.c.emplace(q, v);
  }
  return r;
}

Expr ProlongedField::coeff(const std::string& q) const {
  auto it = c.find(q);
  return it == c.end() ? Expr(0) : it->second;
}

ProlongedField prolong(const VectorField& x, const JetBundle& b, int k) {
  ProlongedField p;
  p.base = x;
  p.order = k;
  for (auto& i : b.indep) p.c[i] = x.coeff(i);
  for (auto& d : b.dep) p.c[d] = x.coeff(d);
  // D_i(xi^j), reused across all jets
  std::map<std::string, std::map<std::string, Expr>> dxi;
  for (auto& i : b.indep)
    for (auto& j : b.indep) dxi[i][j] = total_derivative(x.coeff(j), i, b);
  for (int m = 1; m <= k; ++m) {
    for (auto& d : b.dep) {
      for (auto& idx : b.multi_indices(m)) {
        std::string i(1, idx.back());
        std::string parent = idx.substr(0, idx.size() - 1);
        Expr r = total_derivative(p.c[JetBundle::jet_name(d, parent)], i, b);
        for (auto& j : b.indep) {
          const Expr& w = dxi[i][j];
          if (!w.is_zero_form()) r -= w * Expr::var(JetBundle::jet_name(d, parent + j));
        }
        p.c[JetBundle::jet_name(d, idx)] = r;
      }
    }
  }
  return p;
}

Expr apply(const ProlongedField& x, const Expr& e) {
  Expr r(0);
  for (auto& v : variables(e)) {
    auto it = x.c.find(v);
    if (it == x.c.end()) {
      if (x.base.c.count(v)) {
        r += x.base.c.at(v) * differentiate(e, v);
        continue;
      }
      auto us = v.find('_');
      if (us != std::string::npos && x.c.count(v.substr(0, us)))
        throw std::invalid_argument("jet coordinate " + v + " beyond prolongation order " +
                                    std::to_string(x.order));
      continue;
    }
    if (it->second.is_zero_form()) continue;
    r += it->second * differentiate(e, v);
  }
  return r;
}

Expr TotalDerivation::coeff(const std::string& i) const {
  auto it = a.find(i);
  return it == a.end() ? Expr(0) : it->second;
}

std::string TotalDerivation::str() const {
  std::string s;
  for (auto& [i, e] : a) {
    if (e.is_zero_form()) continue;
    if (!s.empty()) s += " + ";
    s += "(" + e.str() + ")*D" + i;
  }
  return s.empty() ? "0" : s;
}

Expr apply(const TotalDerivation& d, const Expr& e, const JetBundle& b) {
  Expr r(0);
  for (auto& [i, c] : d.a)
    if (!c.is_zero_form()) r += c * total_derivative(e, i, b);
  return r;
}

TotalDerivation derivation_commutator(const ProlongedField& x, const TotalDerivation& d,
                                      const JetBundle& b) {
  TotalDerivation r;
  for (auto& i : b.indep) r.a[i] = apply(x, d.coeff(i)) - apply(d, x.base.coeff(i), b);
  return r;
}

}  // namespace fluidinv
