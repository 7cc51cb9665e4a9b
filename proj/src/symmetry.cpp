#include "fluidinv/symmetry.hpp"

#include <algorithm>

namespace fluidinv {

namespace {

const std::set<std::string> kThermo = {"p", "rho", "s", "T"};

void merge(SymmetryVerdict& acc, const ZeroResult& z, const std::string& where) {
  if (z.verdict == ZeroVerdict::Certified) return;
  if (acc.verdict == ZeroVerdict::Nonzero) return;
  if (z.verdict == ZeroVerdict::Nonzero || acc.verdict == ZeroVerdict::Certified) {
    acc.verdict = z.verdict;
    acc.where = where;
    acc.witness = z.witness;
  }
}

std::set<std::string> field_vars(const VectorField& f) {
  std::set<std::string> out;
  for (auto& [q, c] : f.c) {
    out.insert(q);
    for (auto& v : variables(c)) out.insert(v);
  }
  return out;
}

}  // namespace

VectorField reduce_field(const VectorField& x, const PDESystem& s) {
  if (s.state.free) return x;
  std::map<std::string, Expr> sub{{"p", state_expr(s.state, s.state.pressure)},
                                  {"T", state_expr(s.state, s.state.temperature)}};
  VectorField r;
  for (auto& [q, c] : x.c) {
    if (q == "p" || q == "T") continue;
    Expr e = substitute(c, sub);
    if (!e.is_zero_form()) r.c.emplace(q, e);
  }
  return r;
}

SymmetryVerdict is_symmetry(const VectorField& x, const PDESystem& s, const ZeroOptions& opt) {
  SymmetryVerdict v;
  if (!s.state.free) {
    auto [a, b] = tangency_residual(x, s.state);
    merge(v, is_zero(a, opt), "state tangency (drho)");
    merge(v, is_zero(b, opt), "state tangency (ds)");
    if (v.verdict == ZeroVerdict::Nonzero) return v;
  }
  ProlongedField xp = prolong(reduce_field(x, s), s.bundle, s.bundle.order);
  for (std::size_t a = 0; a < s.equations.size(); ++a) {
    Expr r = s.reduce(apply(xp, s.equations[a]));
    merge(v, is_zero(r, opt), "equation for " + s.principal[a]);
    if (v.verdict == ZeroVerdict::Nonzero) return v;
  }
  return v;
}

VectorField theta_hom(const VectorField& x) {
  VectorField r;
  for (auto& q : kThermo) {
    Expr c = x.coeff(q);
    if (c.is_zero_form()) continue;
    for (auto& v : variables(c)) {
      bool base = v == "t" || v == "x" || v == "y" || v == "z" || v == "u" || v == "v" || v == "w";
      if (base) throw NotProjectable("coefficient of d/d" + q + " depends on " + v);
    }
    r.c.emplace(q, c);
  }
  return r;
}

std::optional<std::vector<Q>> decompose(const VectorField& f, const std::vector<NamedField>& basis,
                                        std::uint64_t seed) {
  std::size_t n = basis.size();
  std::set<std::string> vars = field_vars(f), coords;
  for (auto& [q, c] : f.c) coords.insert(q);
  for (auto& b : basis) {
    auto s = field_vars(b.field);
    vars.insert(s.begin(), s.end());
    for (auto& [q, c] : b.field.c) coords.insert(q);
  }
  QMatrix m;
  int npts = static_cast<int>(n) + 3;
  for (int k = 0, tries = 0; k < npts && tries < 10 * npts; ++tries) {
    std::map<std::string, Q> pt;
    for (auto& v : vars) pt[v] = sample_rational(hash_str(v + std::to_string(tries), seed), 9, 8);
    EvalPolicy pol{seed + static_cast<std::uint64_t>(tries)};
    QMatrix rows;
    try {
      for (auto& q : coords) {
        std::vector<Q> row(n + 1);
        for (std::size_t i = 0; i < n; ++i) row[i] = eval_at(basis[i].field.coeff(q), pt, pol);
        row[n] = eval_at(f.coeff(q), pt, pol);
        rows.push_back(row);
      }
    } catch (const PoleError&) {
      continue;
    }
    for (auto& r : rows) m.push_back(r);
    ++k;
  }
  auto piv = rref(m);
  if (!piv.empty() && piv.back() == n) return std::nullopt;
  std::vector<Q> c(n, Q(0));
  for (std::size_t i = 0; i < piv.size(); ++i) c[piv[i]] = m[i][n];
  VectorField rest = f;
  for (std::size_t i = 0; i < n; ++i)
    if (sgn(c[i]) != 0) rest = rest + Expr(-c[i]) * basis[i].field;
  if (!is_zero_field(rest)) return std::nullopt;
  return c;
}

StructureReport check_structure(const std::vector<NamedField>& gens,
                                const std::vector<StructureEntry>& table, bool complete) {
  StructureReport rep;
  std::map<std::pair<std::string, std::string>, const StructureEntry*> listed;
  for (auto& e : table) listed[{e.a, e.b}] = &e;
  for (std::size_t i = 0; i < gens.size(); ++i)
    for (std::size_t j = i + 1; j < gens.size(); ++j) {
      VectorField br = bracket(gens[i].field, gens[j].field);
      auto it = listed.find({gens[i].name, gens[j].name});
      Q sign = 1;
      if (it == listed.end()) {
        it = listed.find({gens[j].name, gens[i].name});
        sign = -1;
      }
      std::string pair = "[" + gens[i].name + "," + gens[j].name + "]";
      if (it != listed.end()) {
        VectorField expect;
        for (auto& [name, c] : it->second->result) {
          auto g = std::find_if(gens.begin(), gens.end(), [&](auto& x) { return x.name == name; });
          if (g == gens.end()) {
            rep.ok = false;
            rep.failures.push_back(pair + ": unknown generator " + name);
            continue;
          }
          expect = expect + Expr(sign * c) * g->field;
        }
        if (!is_zero_field(br + Expr(-1) * expect)) {
          rep.ok = false;
          rep.failures.push_back(pair + " differs from the table");
        }
      } else if (complete && !is_zero_field(br)) {
        rep.ok = false;
        rep.failures.push_back(pair + " = " + br.str() + " is missing from the table");
      }
      if (is_zero_field(br)) continue;
      auto c = decompose(br, gens);
      if (!c) {
        rep.ok = false;
        rep.failures.push_back(pair + " leaves the span");
        continue;
      }
      StructureEntry e{gens[i].name, gens[j].name, {}};
      for (std::size_t k = 0; k < gens.size(); ++k)
        if (sgn((*c)[k]) != 0) e.result[gens[k].name] = (*c)[k];
      rep.computed.push_back(e);
    }
  return rep;
}

std::size_t kernel_theta_dimension(const std::vector<NamedField>& gens) {
  std::size_t n = gens.size();
  std::vector<VectorField> img;
  std::set<std::string> vars;
  for (auto& g : gens) {
    img.push_back(theta_hom(g.field));
    auto s = field_vars(img.back());
    vars.insert(s.begin(), s.end());
  }
  QMatrix m;
  for (int k = 0; k < static_cast<int>(n) + 3; ++k) {
    std::map<std::string, Q> pt;
    for (auto& v : vars) pt[v] = sample_rational(hash_str(v + "#k" + std::to_string(k), 99), 9, 8);
    for (auto& q : kThermo) {
      std::vector<Q> row(n);
      for (std::size_t i = 0; i < n; ++i) row[i] = eval_at(img[i].coeff(q), pt);
      m.push_back(row);
    }
  }
  return n - rank(m);
}

std::vector<std::pair<std::string, Expr>> prolongation_bracket_defect(const VectorField& x,
                                                                      const VectorField& y,
                                                                      const JetBundle& b, int k) {
  ProlongedField xp = prolong(x, b, k), yp = prolong(y, b, k), zp = prolong(bracket(x, y), b, k);
  std::vector<std::pair<std::string, Expr>> out;
  for (auto& c : b.coordinates(k)) {
    Expr d = apply(xp, yp.coeff(c)) - apply(yp, xp.coeff(c)) - zp.coeff(c);
    if (!d.is_zero_form()) out.push_back({c, d});
  }
  return out;
}

std::vector<VectorField> theta_lifts(const std::vector<NamedField>& gens,
                                     const std::vector<NamedField>& h) {
  // theta(X_j) = sum_k M_jk Y_k
  std::size_t n = gens.size(), m = h.size();
  QMatrix M(n, std::vector<Q>(m, Q(0)));
  for (std::size_t j = 0; j < n; ++j) {
    VectorField t = theta_hom(gens[j].field);
    if (is_zero_field(t)) continue;
    auto c = decompose(t, h);
    if (!c) throw NotProjectable(gens[j].name + " does not project into h");
    M[j] = *c;
  }
  std::vector<VectorField> lifts;
  for (std::size_t i = 0; i < m; ++i) {
    // sum_j c_j M_jk = delta_ik
    QMatrix aug(m, std::vector<Q>(n + 1, Q(0)));
    for (std::size_t k = 0; k < m; ++k) {
      for (std::size_t j = 0; j < n; ++j) aug[k][j] = M[j][k];
      aug[k][n] = k == i ? 1 : 0;
    }
    auto piv = rref(aug);
    if (!piv.empty() && piv.back() == n) throw NotProjectable(h[i].name + " has no preimage");
    VectorField l;
    for (std::size_t r = 0; r < piv.size(); ++r)
      if (sgn(aug[r][n]) != 0) l = l + Expr(aug[r][n]) * gens[piv[r]].field;
    lifts.push_back(l);
  }
  return lifts;
}

GsymAssembly assemble_gsym(const std::vector<NamedField>& gm, const std::vector<NamedField>& gens,
                           const std::vector<NamedField>& h, const StateSurface& L) {
  GsymAssembly out;
  out.fields = gm;
  std::vector<VectorField> hf;
  for (auto& y : h) hf.push_back(y.field);
  out.ht = state_symmetries(L, hf);
  auto lifts = theta_lifts(gens, h);
  int idx = 1;
  for (auto& b : out.ht.basis) {
    VectorField f;
    for (std::size_t i = 0; i < b.size(); ++i)
      if (sgn(b[i]) != 0) f = f + Expr(b[i]) * lifts[i];
    out.fields.push_back({"Z" + std::to_string(idx++), f});
  }
  return out;
}

}  // namespace fluidinv
