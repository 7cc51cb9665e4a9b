#include "fluidinv/invariants.hpp"

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <sstream>

#include "json.hpp"

namespace fluidinv {

using json = nlohmann::json;

namespace {

std::string get_str(const json& j, const char* k, const std::string& d = "") {
  if (!j.contains(k)) return d;
  if (!j[k].is_string()) throw CatalogError(std::string("field '") + k + "' must be a string");
  return j[k].get<std::string>();
}

std::vector<std::string> get_strs(const json& j, const char* k) {
  std::vector<std::string> out;
  if (!j.contains(k)) return out;
  for (auto& e : j[k]) out.push_back(e.get<std::string>());
  return out;
}

std::vector<std::pair<std::string, std::string>> get_pairs(const json& j, const char* k) {
  std::vector<std::pair<std::string, std::string>> out;
  if (!j.contains(k)) return out;
  for (auto& e : j[k]) {
    if (!e.is_array() || e.size() != 2) throw CatalogError(std::string("'") + k + "' entries are [name, value] pairs");
    out.emplace_back(e[0].get<std::string>(), e[1].get<std::string>());
  }
  return out;
}

std::map<std::string, std::string> get_map(const json& j, const char* k) {
  std::map<std::string, std::string> out;
  if (!j.contains(k)) return out;
  for (auto& [a, b] : j[k].items()) out.emplace(a, b.get<std::string>());
  return out;
}

Q parse_rational(const std::string& text) {
  auto v = parse_expr(text).as_const();
  if (!v) throw CatalogError("not a rational number: " + text);
  return *v;
}

JetBundle full_bundle(const MetricChart& m) {
  static const std::vector<std::string> vel = {"u", "v", "w"};
  JetBundle b;
  b.indep = {"t"};
  for (auto& c : m.coords) b.indep.push_back(c);
  for (std::size_t i = 0; i < m.dim(); ++i) b.dep.push_back(vel[i]);
  for (auto d : {"p", "rho", "T", "s"}) b.dep.push_back(d);
  b.order = 2;
  return b;
}

JetBundle reduced_bundle(const MetricChart& m) {
  JetBundle b = full_bundle(m);
  std::vector<std::string> dep;
  for (auto& d : b.dep)
    if (d != "p" && d != "T") dep.push_back(d);
  b.dep = dep;
  return b;
}

int max_jet_order(const Expr& e, const JetBundle& b) {
  int o = 0;
  for (auto& v : variables(e)) o = std::max(o, b.jet_order(v));
  return o;
}

Verdict from_zero(const ZeroResult& z, const std::string& where) {
  Verdict v;
  v.v = z.verdict;
  if (z.verdict != ZeroVerdict::Certified) v.detail = where;
  if (z.verdict == ZeroVerdict::Nonzero) v.witness = z.witness;
  return v;
}

// keep the weaker verdict
void merge(Verdict& acc, const Verdict& v) {
  auto rank = [](ZeroVerdict z) { return z == ZeroVerdict::Certified ? 0 : z == ZeroVerdict::Probable ? 1 : 2; };
  if (rank(v.v) > rank(acc.v)) acc = v;
}

StateCase read_state(const json& e) {
  StateCase c;
  c.name = get_str(e, "name");
  c.kind = get_str(e, "kind");
  c.anchor = get_str(e, "anchor");
  c.params = get_map(e, "params");
  c.symbols = get_pairs(e, "symbols");
  c.functions = get_map(e, "functions");
  c.pressure = get_str(e, "pressure");
  c.temperature = get_str(e, "temperature");
  c.constraints = get_strs(e, "constraints");
  c.relations = get_strs(e, "relations");
  c.domain_constraints = get_strs(e, "domain_constraints");
  if (e.contains("exponent_cases")) {
    auto& x = e["exponent_cases"];
    ExponentCases ec;
    ec.exponent = get_str(x, "exponent");
    ec.sign = get_str(x, "sign", "any");
    ec.rational_only = x.value("rational_only", false);
    ec.irrational = get_strs(x, "irrational");
    ec.k_even = get_strs(x, "k_even");
    ec.k_odd_m_even = get_strs(x, "k_odd_m_even");
    ec.k_odd_m_odd = get_strs(x, "k_odd_m_odd");
    c.exponent_cases = ec;
  }
  if (e.contains("s_max")) c.s_max = get_str(e, "s_max");
  if (e.contains("rho_min")) c.rho_min = get_str(e, "rho_min");
  if (e.contains("algebra"))
    for (auto& a : e["algebra"]) {
      std::map<std::string, std::string> m;
      for (auto& [k, v] : a.items()) m.emplace(k, v.get<std::string>());
      c.algebra.push_back(m);
    }
  c.expect = get_str(e, "expect", "admissible");
  c.expected_dim = e.value("expected_dim", 0);
  return c;
}

}  // namespace

std::vector<NamedField> Scenario::gm() const {
  std::vector<NamedField> out;
  for (auto& g : generators)
    if (g.part == "m") out.push_back({g.name, g.field});
  return out;
}

std::vector<NamedField> Scenario::g() const {
  std::vector<NamedField> out;
  for (auto& g : generators) out.push_back({g.name, g.field});
  return out;
}

const GeneratorSpec* Scenario::generator(const std::string& name) const {
  for (auto& g : generators)
    if (g.name == name) return &g;
  return nullptr;
}

std::string catalog_dir() {
  if (const char* env = std::getenv("FLUIDINV_CATALOG"); env && *env) return env;
  return FLUIDINV_DEFAULT_CATALOG;
}

Scenario load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw CatalogError(path + ": cannot open");
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw CatalogError(path + ": " + e.what());
  }
  Scenario sc;
  sc.file = path;
  try {
    sc.name = get_str(j, "name");
    sc.anchor = get_str(j, "anchor");
    sc.geometry = get_str(j, "geometry");
    sc.kind = get_str(j, "kind");
    for (auto& p : get_strs(j, "params")) sc.params.insert(p);
    MetricChart m = chart(sc.geometry);
    JetBundle fb = full_bundle(m), rb = reduced_bundle(m);

    for (auto& g : j.at("generators")) {
      GeneratorSpec s;
      s.name = get_str(g, "name");
      s.text = get_str(g, "field");
      s.part = get_str(g, "part", "m");
      s.anchor = get_str(g, "anchor");
      s.field = parse_vector_field(s.text, fb, sc.params);
      sc.generators.push_back(std::move(s));
    }
    if (j.contains("h")) {
      auto& h = j["h"];
      sc.h_anchor = get_str(h, "anchor");
      for (auto& f : h.at("fields"))
        sc.h.push_back({get_str(f, "name"), parse_vector_field(get_str(f, "field"), fb, sc.params)});
      if (h.contains("structure")) {
        auto& st = h["structure"];
        sc.h_structure.anchor = get_str(st, "anchor");
        sc.h_structure.complete = st.value("complete", true);
        for (auto& e : st.at("entries")) {
          StructureEntry se;
          se.a = get_str(e, "a");
          se.b = get_str(e, "b");
          for (auto& [k, v] : get_map(e, "result")) se.result[k] = parse_rational(v);
          sc.h_structure.entries.push_back(se);
        }
      }
    }
    auto read_invariants = [&](const char* key, std::vector<InvariantSpec>& out) {
      if (!j.contains(key)) return;
      for (auto& e : j[key]) {
        InvariantSpec s;
        s.name = get_str(e, "name");
        s.text = get_str(e, "expr");
        s.anchor = get_str(e, "anchor");
        s.derivation = get_str(e, "derivation");
        s.argument = get_str(e, "argument");
        s.conjugation = get_str(e, "conjugation");
        if (s.text.empty() && s.derivation.empty() && s.conjugation.empty())
          throw CatalogError("invariant " + s.name + " has no definition");
        out.push_back(std::move(s));
      }
    };
    read_invariants("invariants0", sc.invariants0);
    read_invariants("invariants1", sc.invariants1);
    if (j.contains("conjugation")) {
      auto& c = j["conjugation"];
      Scenario::ConjugationSpec cs;
      cs.anchor = get_str(c, "anchor");
      cs.tau = c.value("tau", false);
      for (auto& row : c.at("frame")) cs.frame.push_back(row.get<std::vector<std::string>>());
      for (auto& row : c.at("V")) cs.V.push_back(row.get<std::vector<std::string>>());
      cs.dots = get_strs(c, "dots");
      cs.entries = get_strs(c, "entries");
      if (cs.frame.size() != 3 || cs.V.size() != 3 || cs.dots.size() != 6 || cs.entries.size() != 9)
        throw CatalogError("conjugation block needs a 3x3 frame, a 3x3 V, 6 dots and 9 entries");
      sc.conjugation = cs;
    }
    if (j.contains("derivations")) {
      auto& d = j["derivations"];
      sc.derivations_anchor = get_str(d, "anchor");
      sc.independence_condition = get_str(d, "independence_condition");
      Alphabet a = rb.alphabet(sc.params);
      for (auto& e : d.at("list")) {
        DerivationSpec s;
        s.name = get_str(e, "name");
        s.anchor = sc.derivations_anchor + "/" + s.name;
        s.text = get_map(e, "coeffs");
        for (auto& [i, t] : s.text) {
          if (!rb.is_indep(i)) throw CatalogError("derivation " + s.name + ": unknown independent " + i);
          s.d.a[i] = parse_expr(t, a);
        }
        sc.derivations.push_back(std::move(s));
      }
    }
    sc.derived_from = get_strs(j, "derived_from");
    if (sc.derived_from.empty())
      for (auto& i : sc.invariants1) sc.derived_from.push_back(i.name);
    if (j.contains("singular_sets")) {
      auto& s = j["singular_sets"];
      sc.singular_anchor = get_str(s, "anchor");
      for (auto& e : s.at("sets"))
        sc.singular_sets.push_back({get_str(e, "name"), sc.singular_anchor + "/" + get_str(e, "name"),
                                    get_strs(e, "equations")});
      sc.singular_sample = get_pairs(s, "sample");
    }
    if (j.contains("hilbert")) {
      sc.hilbert_anchor = get_str(j["hilbert"], "anchor");
      for (auto& p : j["hilbert"].at("pieces")) {
        HilbertPiece hp;
        hp.k_min = p.at("k_min").get<int>();
        if (p.contains("k_max")) hp.k_max = p["k_max"].get<int>();
        hp.formula = get_str(p, "formula");
        sc.hilbert.push_back(hp);
      }
    }
    if (j.contains("poincare")) {
      sc.poincare_anchor = get_str(j["poincare"], "anchor");
      sc.poincare = get_str(j["poincare"], "formula");
    }
    if (j.contains("counts")) {
      sc.counts_anchor = get_str(j["counts"], "anchor");
      for (auto& [k, v] : j["counts"].items())
        if (v.is_number_integer()) sc.counts[k] = v.get<int>();
    }
    if (j.contains("states"))
      for (auto& e : j["states"]) sc.states.push_back(read_state(e));
    if (j.contains("gsym"))
      for (auto& e : j["gsym"]) {
        GsymCase c;
        c.name = get_str(e, "name");
        c.anchor = get_str(e, "anchor");
        c.params = get_pairs(e, "params");
        c.symbols = get_pairs(e, "symbols");
        for (auto& a : e.at("generators")) {
          std::map<std::string, std::string> m;
          for (auto& [k, v] : a.items()) m.emplace(k, v.get<std::string>());
          c.generators.push_back(m);
        }
        c.relations = get_strs(e, "relations");
        c.genericity = get_strs(e, "genericity");
        c.action = get_pairs(e, "action");
        c.invariants = get_strs(e, "invariants");
        if (e.contains("derivations"))
          for (auto& d : e["derivations"]) c.derivations.push_back({get_str(d, "factor"), get_str(d, "derivation")});
        sc.gsym.push_back(std::move(c));
      }
    sc.notes = get_strs(j, "notes");
  } catch (const CatalogError& e) {
    throw CatalogError(path + ": " + e.what());
  } catch (const std::exception& e) {
    throw CatalogError(path + ": " + e.what());
  }
  return sc;
}

StateCase load_state_case(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw CatalogError(path + ": cannot open");
  try {
    json j;
    in >> j;
    StateCase c = read_state(j);
    if (c.name.empty()) c.name = std::filesystem::path(path).stem().string();
    if (c.kind.empty()) c.kind = "one_dim";
    return c;
  } catch (const std::exception& e) {
    throw CatalogError(path + ": " + e.what());
  }
}

std::vector<Scenario> load_catalog(const std::string& dir) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(dir)) throw CatalogError(dir + ": not a catalog directory");
  std::vector<std::string> files;
  for (auto& e : fs::directory_iterator(dir))
    if (e.path().extension() == ".json") files.push_back(e.path().string());
  std::sort(files.begin(), files.end());
  std::vector<Scenario> out;
  for (auto& f : files) out.push_back(load_scenario(f));
  std::sort(out.begin(), out.end(), [](const Scenario& a, const Scenario& b) { return a.name < b.name; });
  return out;
}

std::vector<std::string> missing_anchors(const Scenario& sc) {
  std::vector<std::string> out;
  auto need = [&](const std::string& a, const std::string& what) {
    if (a.empty()) out.push_back(what);
  };
  need(sc.anchor, "scenario");
  for (auto& g : sc.generators) need(g.anchor, "generator " + g.name);
  if (!sc.h.empty()) need(sc.h_anchor, "h");
  if (!sc.h_structure.entries.empty()) need(sc.h_structure.anchor, "h structure");
  for (auto& i : sc.invariants0) need(i.anchor, "invariant " + i.name);
  for (auto& i : sc.invariants1) need(i.anchor, "invariant " + i.name);
  if (sc.conjugation) need(sc.conjugation->anchor, "conjugation");
  if (!sc.derivations.empty()) need(sc.derivations_anchor, "derivations");
  if (!sc.singular_sets.empty()) need(sc.singular_anchor, "singular sets");
  if (!sc.hilbert.empty()) need(sc.hilbert_anchor, "hilbert");
  if (!sc.poincare.empty()) need(sc.poincare_anchor, "poincare");
  if (!sc.counts.empty()) need(sc.counts_anchor, "counts");
  for (auto& s : sc.states) need(s.anchor, "state " + s.name);
  for (auto& g : sc.gsym) need(g.anchor, "gsym " + g.name);
  return out;
}

// ---------------------------------------------------------------- workspace

namespace {
std::mutex& ws_mutex() {
  static std::mutex m;
  return m;
}
}  // namespace

Workspace::Workspace(const Scenario& sc) : sc_(sc) {}

const PDESystem& Workspace::generic() const {
  std::lock_guard<std::mutex> lk(ws_mutex());
  if (!generic_)
    generic_ = std::make_unique<PDESystem>(build_system(chart(sc_.geometry), sc_.kind, generic_state(), 2));
  return *generic_;
}

const PDESystem& Workspace::free() const {
  std::lock_guard<std::mutex> lk(ws_mutex());
  if (!free_) free_ = std::make_unique<PDESystem>(build_system(chart(sc_.geometry), sc_.kind, free_state(), 2));
  return *free_;
}

const TotalDerivation& Workspace::derivation(const std::string& name) const {
  for (auto& d : sc_.derivations)
    if (d.name == name) return d.d;
  throw CatalogError(sc_.name + ": unknown derivation " + name);
}

Expr Workspace::parse(const std::string& text, const std::map<std::string, Expr>& extra) const {
  const auto& nm = named();
  const JetBundle& b = generic().bundle;
  Alphabet a = b.alphabet(sc_.params);
  std::map<std::string, Expr> sub;
  for (auto& [k, v] : nm)
    if (b.jet_order(k) < 0) {
      a.names.insert(k);
      sub[k] = v;
    }
  for (auto& [k, v] : extra) {
    a.names.insert(k);
    sub[k] = v;
  }
  Expr e = parse_expr(text, a);
  return sub.empty() ? e : substitute(e, sub);
}

const std::map<std::string, Expr>& Workspace::named() const {
  {
    std::lock_guard<std::mutex> lk(ws_mutex());
    if (named_) return *named_;
  }
  const JetBundle& b = generic().bundle;
  auto out = std::make_unique<std::map<std::string, Expr>>();
  auto parse_local = [&](const std::string& text) {
    Alphabet a = b.alphabet(sc_.params);
    std::map<std::string, Expr> sub;
    for (auto& [k, v] : *out)
      if (b.jet_order(k) < 0) {
        a.names.insert(k);
        sub[k] = v;
      }
    Expr e = parse_expr(text, a);
    return sub.empty() ? e : substitute(e, sub);
  };
  std::optional<Conjugation> conj;
  auto conj_items = [&]() -> const Conjugation& {
    if (!conj) {
      const auto& cs = *sc_.conjugation;
      std::map<std::string, Expr> tau;
      if (cs.tau)
        for (auto& d : b.dep) {
          Expr r = Expr::var(JetBundle::jet_name(d, "t"));
          for (std::size_t i = 1; i < b.indep.size(); ++i)
            r += Expr::var(b.dep[i - 1]) * Expr::var(JetBundle::jet_name(d, b.indep[i]));
          tau.emplace(JetBundle::jet_name(d, "t"), r);
        }
      auto read = [&](const std::vector<std::vector<std::string>>& rows) {
        std::vector<std::vector<Expr>> m;
        for (auto& row : rows) {
          std::vector<Expr> r;
          for (auto& t : row) r.push_back(tau.empty() ? parse_local(t) : substitute(parse_local(t), tau));
          m.push_back(r);
        }
        return m;
      };
      conj = construct_conjugation_invariants(read(cs.frame), read(cs.V));
    }
    return *conj;
  };
  for (auto* list : {&sc_.invariants0, &sc_.invariants1})
    for (auto& inv : *list) {
      Expr e;
      if (!inv.text.empty()) {
        e = parse_local(inv.text);
      } else if (!inv.derivation.empty()) {
        e = apply(derivation(inv.derivation), parse_local(inv.argument), b);
      } else {
        if (!sc_.conjugation) throw CatalogError(sc_.name + ": " + inv.name + " needs a conjugation block");
        const auto& cs = *sc_.conjugation;
        const Conjugation& c = conj_items();
        auto find = [&](const std::vector<std::string>& names) {
          return std::find(names.begin(), names.end(), inv.name) - names.begin();
        };
        if (inv.conjugation == "dot" && find(cs.dots) < 6)
          e = c.dots[find(cs.dots)];
        else if (inv.conjugation == "entry" && find(cs.entries) < 9)
          e = c.entries[find(cs.entries)];
        else
          throw CatalogError(sc_.name + ": " + inv.name + " is not named in the conjugation block");
      }
      (*out)[inv.name] = e;
    }
  std::lock_guard<std::mutex> lk(ws_mutex());
  if (!named_) named_ = std::move(out);
  return *named_;
}

std::vector<Expr> Workspace::order0() const {
  std::vector<Expr> out;
  for (auto& i : sc_.invariants0) out.push_back(named().at(i.name));
  return out;
}

std::vector<Expr> Workspace::order1() const {
  std::vector<Expr> out;
  for (auto& i : sc_.invariants1) out.push_back(named().at(i.name));
  return out;
}

std::vector<std::string> Workspace::order1_names() const {
  std::vector<std::string> out;
  for (auto& i : sc_.invariants1) out.push_back(i.name);
  return out;
}

// ---------------------------------------------------------------- invariance

Verdict check_invariance(const Expr& J, const std::vector<NamedField>& algebra, const PDESystem& S,
                         const ZeroOptions& opt) {
  Verdict acc;
  int k = max_jet_order(J, S.bundle);
  for (auto& X : algebra) {
    Expr r = S.reduce(apply(prolong(X.field, S.bundle, k), J));
    merge(acc, from_zero(is_zero(r, opt), X.name));
  }
  return acc;
}

DerivationCheck check_derivations(const Workspace& w, const ZeroOptions& opt) {
  const PDESystem& S = w.generic();
  const Scenario& sc = w.scenario();
  DerivationCheck out;
  for (auto& X : sc.gm()) {
    ProlongedField P = prolong(X.field, S.bundle, 1);
    for (auto& d : sc.derivations) {
      TotalDerivation C = derivation_commutator(P, d.d, S.bundle);
      for (auto& i : S.bundle.indep) {
        Expr r = S.reduce(C.coeff(i));
        merge(out.commutators, from_zero(is_zero(r, opt), "[" + X.name + ", " + d.name + "] component " + i));
      }
    }
  }
  const auto& indep = S.bundle.indep;
  if (sc.derivations.size() != indep.size()) {
    out.detail = std::to_string(sc.derivations.size()) + " derivations for " + std::to_string(indep.size()) +
                 " independents";
    return out;
  }
  Matrix m;
  for (auto& d : sc.derivations) {
    std::vector<Expr> row;
    for (auto& i : indep) row.push_back(d.d.coeff(i));
    m.push_back(row);
  }
  out.determinant = determinant(m);
  if (out.determinant.is_zero_form()) {
    out.detail = "determinant vanishes";
    return out;
  }
  Expr cond = w.parse(sc.independence_condition);
  if (cond.is_zero_form()) {
    out.detail = "independence condition is zero";
    return out;
  }
  Expr q = out.determinant / cond;
  std::vector<std::string> extra;
  for (auto& v : variables(q))
    if (!S.bundle.is_indep(v)) extra.push_back(v);
  if (!extra.empty()) {
    std::string list;
    for (auto& v : extra) list += (list.empty() ? "" : ", ") + v;
    out.detail = "determinant / condition depends on " + list;
    return out;
  }
  out.independent = true;
  return out;
}

// ---------------------------------------------------------------- ranks

ShellPoint sample_point(const PDESystem& S, std::uint64_t seed,
                        const std::vector<std::pair<std::string, Expr>>& overrides) {
  ShellPoint pt;
  pt.policy.seed = seed;
  for (auto& c : S.bundle.coordinates(S.bundle.order))
    if (!S.is_principal(c)) pt.values[c] = sample_rational(hash_str(c, seed));
  for (auto& p : S.params) pt.values[p] = sample_rational(hash_str(p, seed));
  for (auto& [name, e] : overrides) pt.values[name] = eval_at(e, pt.values, pt.policy);
  for (auto& [c, rhs] : S.solved) pt.values[c] = eval_at(rhs, pt.values, pt.policy);
  return pt;
}

namespace {

// duals at pt with unit seeds on the listed coordinates; principal
// coordinates of order <= k follow their solved forms
std::map<std::string, Dual> dual_point(const PDESystem& S, const ShellPoint& pt,
                                       const std::vector<std::string>& seeds, int k) {
  std::size_t n = seeds.size();
  std::map<std::string, Dual> a;
  for (auto& [c, v] : pt.values) a[c] = Dual{v, std::vector<Q>(n, Q(0))};
  for (std::size_t i = 0; i < n; ++i) a[seeds[i]].g[i] = 1;
  std::map<std::string, Dual> principal;
  for (auto& [c, rhs] : S.solved)
    if (S.bundle.jet_order(c) <= k) principal[c] = eval_dual(rhs, a, n, pt.policy);
  for (auto& [c, d] : principal) a[c] = d;
  return a;
}

std::vector<std::string> free_of_order(const PDESystem& S, int k) {
  std::vector<std::string> out;
  for (auto& c : S.free_coordinates(k))
    if (S.bundle.jet_order(c) == k) out.push_back(c);
  return out;
}

}  // namespace

std::size_t independence_rank(const std::vector<Expr>& exprs, const PDESystem& S, const ShellPoint& pt, int k) {
  std::vector<std::string> seeds = S.free_coordinates(k);
  auto a = dual_point(S, pt, seeds, k);
  QMatrix m;
  for (auto& e : exprs) m.push_back(eval_dual(e, a, seeds.size(), pt.policy).g);
  return rank(m);
}

std::size_t derived_rank(const std::vector<Expr>& js, const std::vector<TotalDerivation>& ds, const PDESystem& S,
                         const ShellPoint& pt, int k) {
  const JetBundle& B = S.bundle;
  std::vector<std::string> top = free_of_order(S, k + 1), low = free_of_order(S, k);
  std::map<std::string, std::size_t> top_index;
  for (std::size_t i = 0; i < top.size(); ++i) top_index[top[i]] = i;
  // gradient of every order k+1 coordinate along the free ones
  std::map<std::string, Dual> a2;
  for (auto& [c, v] : pt.values) a2[c] = Dual{v, std::vector<Q>(top.size(), Q(0))};
  auto grad_top = [&](const std::string& c) {
    auto it = top_index.find(c);
    if (it != top_index.end()) {
      std::vector<Q> g(top.size(), Q(0));
      g[it->second] = 1;
      return g;
    }
    return eval_dual(S.solved.at(c), a2, top.size(), pt.policy).g;
  };
  std::map<std::string, std::vector<Q>> G;
  std::map<std::string, Dual> a1;
  for (auto& [c, v] : pt.values) a1[c] = Dual{v, std::vector<Q>(low.size(), Q(0))};
  for (std::size_t i = 0; i < low.size(); ++i) a1[low[i]].g[i] = 1;
  std::vector<std::vector<Q>> coeff;  // derivation x independent
  for (auto& d : ds) {
    std::vector<Q> row;
    for (auto& i : B.indep) row.push_back(eval_at(S.reduce(d.coeff(i)), pt.values, pt.policy));
    coeff.push_back(row);
  }
  QMatrix m;
  for (auto& J : js) {
    Dual dj = eval_dual(S.reduce(J), a1, low.size(), pt.policy);
    // second order part of D_i J along the free order k+1 coordinates
    std::vector<std::vector<Q>> DiJ;
    for (auto& i : B.indep) {
      std::vector<Q> r(top.size(), Q(0));
      for (std::size_t v = 0; v < low.size(); ++v) {
        if (sgn(dj.g[v]) == 0) continue;
        std::string dep, idx;
        B.split(low[v], dep, idx);
        std::string c = JetBundle::jet_name(dep, normalize_index(idx + i));
        auto it = G.find(c);
        if (it == G.end()) it = G.emplace(c, grad_top(c)).first;
        for (std::size_t t = 0; t < top.size(); ++t) r[t] += dj.g[v] * it->second[t];
      }
      DiJ.push_back(r);
    }
    for (auto& cr : coeff) {
      std::vector<Q> r(top.size(), Q(0));
      for (std::size_t i = 0; i < cr.size(); ++i)
        if (sgn(cr[i]) != 0)
          for (std::size_t t = 0; t < top.size(); ++t) r[t] += cr[i] * DiJ[i][t];
      m.push_back(r);
    }
  }
  return rank(m);
}

std::size_t orbit_dimension(const std::vector<NamedField>& algebra, const PDESystem& S, const ShellPoint& pt,
                            int k) {
  std::vector<std::string> cols = S.free_coordinates(k);
  QMatrix m;
  for (auto& X : algebra) {
    ProlongedField P = prolong(X.field, S.bundle, k);
    std::vector<Q> row;
    for (auto& c : cols) row.push_back(eval_at(S.reduce(P.coeff(c)), pt.values, pt.policy));
    m.push_back(row);
  }
  return rank(m);
}

std::vector<Membership> singular_membership(const Workspace& w, const ShellPoint& pt) {
  std::vector<Membership> out;
  const PDESystem& S = w.generic();
  for (auto& set : w.scenario().singular_sets) {
    Membership m;
    m.set = set.name;
    m.member = true;
    for (auto& eq : set.equations) {
      Q v = eval_at(S.reduce(w.parse(eq)), pt.values, pt.policy);
      if (sgn(v) != 0) m.member = false;
      m.values.push_back(v);
    }
    out.push_back(m);
  }
  return out;
}

// ---------------------------------------------------------------- Hilbert / Poincare

std::vector<Q> series(const Expr& f, int n) {
  auto coefficients = [&](const Expr& p) {
    std::vector<Q> c;
    Expr d = p;
    Q fact = 1;
    for (int i = 0; i < n; ++i) {
      if (i > 0) fact *= i;
      c.push_back(eval_at(d, {{"z", Q(0)}}) / fact);
      d = differentiate(d, "z");
    }
    return c;
  };
  std::vector<Q> a = coefficients(numerator(f)), b = coefficients(denominator(f));
  if (sgn(b[0]) == 0) throw PoleError("rational function has a pole at z = 0");
  std::vector<Q> c(n, Q(0));
  for (int i = 0; i < n; ++i) {
    Q s = a[i];
    for (int j = 1; j <= i; ++j) s -= b[j] * c[i - j];
    c[i] = s / b[0];
  }
  return c;
}

std::optional<Q> hilbert_value(const Scenario& sc, int k) {
  for (auto& p : sc.hilbert) {
    if (k < p.k_min || (p.k_max && k > *p.k_max)) continue;
    return substitute(parse_expr(p.formula), {{"k", Expr(k)}}).as_const();
  }
  return std::nullopt;
}

HilbertReport verify_hilbert_poincare(const Workspace& w, int k_max, std::uint64_t seed) {
  const Scenario& sc = w.scenario();
  HilbertReport r;
  r.series = series(parse_expr(sc.poincare), k_max + 1);
  for (int k = 0; k <= k_max; ++k) {
    auto h = hilbert_value(sc, k);
    r.hilbert.push_back(h ? *h : Q(-1));
    if (!h || *h != r.series[k]) {
      if (r.series_ok) r.first_bad_k = k;
      r.series_ok = false;
    }
  }
  const PDESystem& S = w.generic();
  ShellPoint pt = sample_point(S, seed);
  long sum = 0;
  for (int k = 0; k <= std::min(k_max, 2); ++k) {
    auto h = hilbert_value(sc, k);
    sum += h ? h->get_num().get_si() / h->get_den().get_si() : 0;
    long rhs = static_cast<long>(S.dimension(k)) - static_cast<long>(orbit_dimension(sc.gm(), S, pt, k));
    r.accounting.push_back({k, {sum, rhs}});
    if (sum != rhs) r.accounting_ok = false;
  }
  return r;
}

// ---------------------------------------------------------------- conjugation

Conjugation construct_conjugation_invariants(const std::vector<std::vector<Expr>>& frame_cols,
                                             const std::vector<std::vector<Expr>>& V) {
  Conjugation c;
  auto dot = [](const std::vector<Expr>& a, const std::vector<Expr>& b) {
    Expr s(0);
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
  };
  const auto &ag = frame_cols[0], &gr = frame_cols[1], &gs = frame_cols[2];
  c.dots = {dot(gr, gr), dot(gs, gs), dot(gr, gs), dot(ag, ag), dot(gr, ag), dot(gs, ag)};
  std::size_t n = frame_cols.size();
  Matrix H(n, std::vector<Expr>(n));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) H[i][j] = frame_cols[j][i];
  c.det = determinant(H);
  Matrix Hi = inverse(H);
  Matrix VH(n, std::vector<Expr>(n, Expr(0)));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      for (std::size_t l = 0; l < n; ++l) VH[i][j] += V[i][l] * H[l][j];
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      Expr e(0);
      for (std::size_t l = 0; l < n; ++l) e += Hi[i][l] * VH[l][j];
      c.entries.push_back(e);
    }
  return c;
}

// ---------------------------------------------------------------- g_sym fields

namespace {

// ordered abbreviations, each substituted with everything before it
std::map<std::string, Expr> bind_symbols(const std::vector<std::pair<std::string, std::string>>& list,
                                         std::map<std::string, Expr> env,
                                         const std::function<Expr(const std::string&, const std::map<std::string, Expr>&)>& parse) {
  for (auto& [name, text] : list) env[name] = parse(text, env);
  return env;
}

VectorField combination(const Scenario& sc, const std::map<std::string, std::string>& coeffs,
                        const std::function<Expr(const std::string&)>& value) {
  VectorField f;
  for (auto& [name, text] : coeffs) {
    const GeneratorSpec* g = sc.generator(name);
    if (!g) throw CatalogError(sc.name + ": unknown generator " + name);
    Expr k = value(text);
    if (k.is_zero_form()) continue;
    f = f + k * g->field;
  }
  return f;
}

}  // namespace

GsymCheck check_gsym_field(const Workspace& w, const GsymCase& c, const ZeroOptions& opt) {
  const Scenario& sc = w.scenario();
  const PDESystem& F = w.free();
  GsymCheck out;
  auto parse = [&](const std::string& t, const std::map<std::string, Expr>& env) { return w.parse(t, env); };
  std::map<std::string, Expr> env = bind_symbols(c.params, {}, parse);
  env = bind_symbols(c.symbols, env, parse);
  for (auto& r : c.relations) {
    Expr e = w.parse(r, env);
    if (!e.is_zero_form()) {
      out.genericity_ok = false;
      out.rejected = "relation " + r + " = " + e.str();
      return out;
    }
  }
  for (auto& g : c.genericity) {
    Expr e = w.parse(g, env);
    if (e.is_zero_form()) {
      out.genericity_ok = false;
      out.rejected = "genericity " + g + " = 0";
      return out;
    }
  }
  std::vector<NamedField> algebra = sc.gm();
  for (std::size_t i = 0; i < c.generators.size(); ++i)
    algebra.push_back({"A" + std::to_string(i + 1),
                       combination(sc, c.generators[i], [&](const std::string& t) { return w.parse(t, env); })});
  std::map<std::string, ProlongedField> pro;
  for (auto& X : algebra) pro.emplace(X.name, prolong(X.field, F.bundle, 1));

  if (!c.action.empty()) {
    const ProlongedField& A = pro.at("A1");
    for (auto& [name, image] : c.action) {
      Verdict v;
      try {
        Expr lhs = F.reduce(apply(A, w.parse(name, env)));
        Expr rhs = F.reduce(w.parse(image, env));
        v = from_zero(is_zero(lhs - rhs, opt), "A1(" + name + ") - (" + image + ")");
      } catch (const std::exception& e) {
        v.v = ZeroVerdict::Nonzero;
        v.detail = e.what();
      }
      out.action.push_back({name, v});
    }
  }
  for (auto& text : c.invariants) {
    Verdict acc;
    try {
      Expr J = w.parse(text, env);
      for (auto& X : algebra) {
        Expr r = F.reduce(apply(pro.at(X.name), J));
        merge(acc, from_zero(is_zero(r, opt), X.name));
      }
    } catch (const std::exception& e) {
      acc.v = ZeroVerdict::Nonzero;
      acc.detail = e.what();
    }
    out.invariants.push_back({text, acc});
  }
  for (auto& sd : c.derivations) {
    Verdict acc;
    std::string label = sd.factor + " " + sd.derivation;
    try {
      Expr f = w.parse(sd.factor, env);
      TotalDerivation d;
      for (auto& [i, a] : w.derivation(sd.derivation).a) d.a[i] = f * a;
      for (auto& X : algebra) {
        TotalDerivation C = derivation_commutator(pro.at(X.name), d, F.bundle);
        for (auto& i : F.bundle.indep)
          merge(acc, from_zero(is_zero(F.reduce(C.coeff(i)), opt), "[" + X.name + ", " + label + "] component " + i));
      }
    } catch (const std::exception& e) {
      acc.v = ZeroVerdict::Nonzero;
      acc.detail = e.what();
    }
    out.derivations.push_back({label, acc});
  }
  return out;
}

// ---------------------------------------------------------------- state families

namespace {

struct StateEnv {
  std::map<std::string, Expr> params, symbols;
};

StateEnv state_env(const StateCase& c, const std::map<std::string, std::string>& overrides) {
  StateEnv env;
  for (auto& [k, v] : c.params) env.params[k] = parse_expr(v);
  for (auto& [k, v] : overrides) {
    if (!c.params.count(k)) throw CatalogError("state " + c.name + " has no parameter " + k);
    env.params[k] = parse_expr(v);
  }
  std::map<std::string, Expr> all = env.params;
  for (auto& [k, v] : c.symbols) {
    Expr e = substitute(parse_expr(v), all);
    env.symbols[k] = e;
    all[k] = e;
  }
  return env;
}

Expr bind_text(const std::string& text, const StateEnv& env) {
  std::map<std::string, Expr> all = env.params;
  for (auto& [k, v] : env.symbols) all[k] = v;
  return substitute(parse_expr(text), all);
}

Expr instantiate(Expr e, const StateCase& c, const StateEnv& env) {
  for (auto& [name, inst] : c.functions) {
    // the instance is written in the first symbol's name
    std::string var = c.symbols.empty() ? "X" : c.symbols.front().first;
    Expr f = substitute(parse_expr(inst), env.params);
    e = substitute_function(e, name, [&](int n, const Expr& arg) {
      Expr d = f;
      for (int i = 0; i < n; ++i) d = differentiate(d, var);
      return substitute(d, {{var, arg}});
    });
  }
  return e;
}

Q constant(const Expr& e, const std::string& what) {
  auto v = e.as_const();
  if (!v) throw CatalogError(what + " is not a constant: " + e.str());
  return *v;
}

bool holds(const Constraint& k, const Q& v) { return k.nonzero ? sgn(v) != 0 : sgn(v) > 0; }

}  // namespace

StateSurface family_from_classification(const StateCase& c, const std::map<std::string, std::string>& overrides) {
  if (c.pressure.empty()) throw CatalogError("state " + c.name + " has no pressure formula");
  StateEnv env = state_env(c, overrides);
  std::map<std::string, Expr> all = env.params;
  for (auto& [k, v] : env.symbols) all[k] = v;
  for (auto& r : c.relations) {
    Expr e = bind_text(r, env);
    if (!e.is_zero_form()) throw ConstraintViolation("relation violated: " + r + " = 0");
  }
  StateSurface L;
  L.name = c.name;
  for (auto& t : c.constraints) {
    Constraint k = parse_constraint(t);
    k.lhs = instantiate(substitute(k.lhs, all), c, env);
    if (auto v = k.lhs.as_const()) {
      if (!holds(k, *v)) throw ConstraintViolation("violated: " + t);
      continue;
    }
    L.constraints.push_back(k);
  }
  if (c.exponent_cases) {
    const auto& x = *c.exponent_cases;
    Q e = constant(bind_text(x.exponent, env), "exponent " + x.exponent);
    if (x.sign == "negative" && sgn(e) >= 0) throw ConstraintViolation("violated: " + x.exponent + " < 0");
    if (x.sign == "positive" && sgn(e) <= 0) throw ConstraintViolation("violated: " + x.exponent + " > 0");
    mpz_class m = abs(e.get_num()), k = e.get_den();
    const std::vector<std::string>* list;
    std::string label;
    if (k % 2 == 0) {
      list = &x.k_even;
      label = "k even";
    } else if (m % 2 == 0) {
      list = &x.k_odd_m_even;
      label = "k odd, m even";
    } else {
      list = &x.k_odd_m_odd;
      label = "k odd, m odd";
    }
    for (auto& t : *list) {
      Constraint kc = parse_constraint(t);
      Q v = constant(substitute(kc.lhs, all), t);
      if (!holds(kc, v)) throw ConstraintViolation("violated: " + t + " (exponent case " + label + ")");
    }
  }
  if (c.s_max) L.s_max = constant(bind_text(*c.s_max, env), "s_max");
  if (c.rho_min) L.rho_min = constant(bind_text(*c.rho_min, env), "rho_min");
  L.pressure = instantiate(bind_text(c.pressure, env), c, env);
  L.temperature = instantiate(bind_text(c.temperature, env), c, env);
  return L;
}

StateSurface symbolic_family(const StateCase& c) {
  StateEnv env = state_env(c, {});
  StateSurface L;
  L.name = c.name + " (symbolic)";
  L.pressure = bind_text(c.pressure, env);
  L.temperature = bind_text(c.temperature, env);
  return L;
}

std::vector<Expr> domain_constraints(const StateCase& c) {
  StateEnv env = state_env(c, {});
  std::map<std::string, Expr> all = env.params;
  for (auto& [k, v] : env.symbols) all[k] = v;
  std::vector<Expr> out;
  for (auto& t : c.domain_constraints) {
    Constraint k = parse_constraint(t);
    out.push_back(instantiate(substitute(k.lhs, all), c, env));
  }
  return out;
}

std::vector<VectorField> state_algebra(const Scenario& sc, const StateCase& c, const StateSurface&) {
  return state_algebra(sc, c, sc.h);
}

std::vector<VectorField> state_algebra(const Scenario& sc, const StateCase& c, const std::vector<NamedField>& basis) {
  StateEnv env = state_env(c, {});
  std::vector<VectorField> out;
  for (auto& comb : c.algebra) {
    VectorField f;
    for (auto& [name, text] : comb) {
      auto it = std::find_if(basis.begin(), basis.end(), [&](const NamedField& n) { return n.name == name; });
      if (it == basis.end()) throw CatalogError(sc.name + ": unknown h field " + name);
      Expr k = bind_text(text, env);
      if (!k.is_zero_form()) f = f + k * it->field;
    }
    out.push_back(f);
  }
  return out;
}

}  // namespace fluidinv
