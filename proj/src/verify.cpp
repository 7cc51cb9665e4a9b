#include "fluidinv/verify.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <ctime>
#include <functional>
#include <sstream>
#include <thread>

#include "json.hpp"

namespace fluidinv {

using json = nlohmann::json;

namespace {

const char* kVersion = "0.1.0";

std::string verdict_of(ZeroVerdict v) {
  return v == ZeroVerdict::Certified ? "pass" : v == ZeroVerdict::Probable ? "probable" : "fail";
}

std::string witness_str(const std::map<std::string, Q>& w) {
  std::string s;
  std::size_t n = 0;
  for (auto& [k, v] : w) {
    if (n++ == 12) {
      s += ", ...";
      break;
    }
    s += (s.empty() ? "" : ", ") + k + "=" + v.get_str();
  }
  return s;
}

struct Sink {
  const Scenario& sc;
  std::string check;
  std::vector<Record> out;
  std::chrono::steady_clock::time_point t0 = std::chrono::steady_clock::now();

  void add(const std::string& item, const std::string& verdict, const std::string& anchor,
           const std::string& detail = "", const std::string& witness = "") {
    auto t = std::chrono::steady_clock::now();
    Record r{sc.name, check, item, verdict, anchor.empty() ? "plumbing" : anchor, witness, detail,
             std::chrono::duration<double, std::milli>(t - t0).count()};
    t0 = t;
    out.push_back(std::move(r));
  }
  void add(const std::string& item, const Verdict& v, const std::string& anchor) {
    add(item, verdict_of(v.v), anchor, v.detail, witness_str(v.witness));
  }
  void pass_if(const std::string& item, bool ok, const std::string& anchor, const std::string& detail) {
    add(item, ok ? "pass" : "fail", anchor, detail);
  }
  // runs body; an exception becomes a failed record for item
  void guard(const std::string& item, const std::string& anchor, const std::function<void()>& body) {
    try {
      body();
    } catch (const std::exception& e) {
      add(item, "fail", anchor, e.what());
    }
  }
};

Verdict zero_verdict(const Expr& e, const ZeroOptions& opt, const std::string& where) {
  ZeroResult z = is_zero(e, opt);
  Verdict v;
  v.v = z.verdict;
  if (z.verdict != ZeroVerdict::Certified) v.detail = where;
  if (z.verdict == ZeroVerdict::Nonzero) v.witness = z.witness;
  return v;
}

void worst(Verdict& acc, const Verdict& v) {
  auto rank = [](ZeroVerdict z) { return z == ZeroVerdict::Certified ? 0 : z == ZeroVerdict::Probable ? 1 : 2; };
  if (rank(v.v) > rank(acc.v)) acc = v;
}

// ---------------------------------------------------------------- symmetries

void check_symmetries(const Workspace& w, const RunConfig& cfg, Sink& s) {
  const Scenario& sc = w.scenario();
  ZeroOptions opt;
  opt.samples = cfg.samples;
  opt.seed = cfg.seed;
  for (auto& g : sc.generators) {
    s.guard(g.name, g.anchor, [&] {
      const PDESystem& S = g.part == "m" ? w.generic() : w.free();
      SymmetryVerdict v = is_symmetry(g.field, S, opt);
      s.add(g.name, verdict_of(v.verdict), g.anchor,
            (g.part == "m" ? "generic state" : "free state") + std::string(v.where.empty() ? "" : ": " + v.where),
            witness_str(v.witness));
    });
  }
  s.guard("h-structure", sc.h_structure.anchor, [&] {
    StructureReport r = check_structure(sc.h, sc.h_structure.entries, sc.h_structure.complete);
    std::string d;
    for (auto& f : r.failures) d += (d.empty() ? "" : "; ") + f;
    s.pass_if("h-structure", r.ok, sc.h_structure.anchor, d);
  });
  s.guard("g-closure", sc.anchor, [&] {
    // structure constants may depend on the parameters; close for fixed values
    std::vector<std::map<std::string, Expr>> values(1);
    if (!sc.params.empty()) {
      values.assign(2, {});
      for (auto& p : sc.params) {
        values[0][p] = Expr(Q(1));
        values[1][p] = Expr(sample_rational(hash_str(p, cfg.seed)));
      }
    }
    bool ok = true;
    std::string d;
    for (auto& val : values) {
      std::vector<NamedField> g = sc.g();
      if (!val.empty())
        for (auto& f : g)
          for (auto& [q, e] : f.field.c) e = substitute(e, val);
      StructureReport r = check_structure(g, {}, false);
      ok = ok && r.ok;
      for (auto& f : r.failures) d += (d.empty() ? "" : "; ") + f;
    }
    s.pass_if("g-closure", ok, sc.anchor, d);
  });
  s.guard("theta-kernel", sc.h_anchor, [&] {
    std::size_t k = kernel_theta_dimension(sc.g()), m = sc.gm().size();
    s.pass_if("theta-kernel", k == m, sc.h_anchor,
              "dim ker theta = " + std::to_string(k) + ", dim g_m = " + std::to_string(m));
  });
  s.guard("theta-image", sc.h_anchor, [&] {
    auto lifts = theta_lifts(sc.g(), sc.h);
    s.pass_if("theta-image", lifts.size() == sc.h.size(), sc.h_anchor,
              std::to_string(lifts.size()) + " of " + std::to_string(sc.h.size()) + " h fields lifted");
  });
  // lifts of each state's algebra are symmetries of the system with that state
  for (auto& c : sc.states) {
    if (c.algebra.empty() || c.kind == "two_dim_noncommutative") continue;
    std::string item = "state/" + c.name;
    s.guard(item, c.anchor, [&] {
      StateSurface L = family_from_classification(c);
      PDESystem S = build_system(chart(sc.geometry), sc.kind, L, 2);
      auto hl = theta_lifts(sc.g(), sc.h);
      if (hl.size() != sc.h.size()) {
        s.add(item, "fail", c.anchor, "h has no preimage in g");
        return;
      }
      std::vector<NamedField> basis;
      for (std::size_t i = 0; i < hl.size(); ++i) basis.push_back({sc.h[i].name, hl[i]});
      auto lifts = state_algebra(sc, c, basis);
      Verdict acc;
      for (std::size_t i = 0; i < lifts.size(); ++i) {
        SymmetryVerdict v = is_symmetry(lifts[i], S, opt);
        Verdict vv;
        vv.v = v.verdict;
        vv.detail = "Z" + std::to_string(i + 1) + (v.where.empty() ? "" : ": " + v.where);
        vv.witness = v.witness;
        worst(acc, vv);
      }
      s.add(item, acc, c.anchor);
    });
  }
}

// ---------------------------------------------------------------- states

void check_states(const Workspace& w, const RunConfig& cfg, Sink& s) {
  const Scenario& sc = w.scenario();
  ZeroOptions opt;
  opt.samples = cfg.samples;
  opt.seed = cfg.seed;
  std::vector<VectorField> h;
  for (auto& f : sc.h) h.push_back(f.field);
  for (auto& c : sc.states) {
    const std::string& a = c.anchor;
    if (c.kind == "two_dim_noncommutative") {
      s.guard(c.name + "/exclusion", a, [&] {
        NoncommutativeExclusion x = noncommutative_exclusion(h);
        s.pass_if(c.name + "/exclusion", x.excluded, a, x.reason);
      });
      if (c.pressure.empty()) continue;
      s.guard(c.name + "/instance", a, [&] {
        StateSurface L = family_from_classification(c);
        Verdict tv;
        for (auto& Z : state_algebra(sc, c, L)) {
          auto [r1, r2] = tangency_residual(Z, L);
          worst(tv, zero_verdict(r1, opt, "tangency (drho)"));
          worst(tv, zero_verdict(r2, opt, "tangency (ds)"));
        }
        AdmissibleResult ad = check_admissible(L, 200, cfg.seed);
        bool ok = tv.v == ZeroVerdict::Certified && ad.verdict == AdmissibleVerdict::Inadmissible;
        s.pass_if(c.name + "/instance", ok == (c.expect == "inadmissible"), a,
                  "tangent: " + verdict_of(tv.v) + ", " + to_string(ad.verdict) +
                      (ad.failed.empty() ? "" : " (" + ad.failed + ")"));
      });
      continue;
    }
    std::optional<StateSurface> L;
    s.guard(c.name + "/parameters", a, [&] {
      L = family_from_classification(c);
      s.add(c.name + "/parameters", "pass", a, "all parameter constraints hold");
    });
    if (!L) continue;
    s.guard(c.name + "/lagrangian", a, [&] {
      LagrangianCheck lc = check_lagrangian(*L);
      std::string d = "instance: " + std::string(lc.ok ? "certified" : "residual " + lc.residual.str());
      bool ok = lc.ok;
      if (!c.functions.empty()) {
        LagrangianCheck ls = check_lagrangian(symbolic_family(c));
        d += "; undetermined functions: " + std::string(ls.ok ? "certified" : "residual " + ls.residual.str());
        ok = ok && ls.ok;
      }
      s.pass_if(c.name + "/lagrangian", ok, a, d);
    });
    if (!c.algebra.empty())
      s.guard(c.name + "/tangency", a, [&] {
        Verdict tv;
        auto check = [&](const StateSurface& S, const std::string& tag) {
          for (auto& Z : state_algebra(sc, c, S)) {
            auto [r1, r2] = tangency_residual(Z, S);
            worst(tv, zero_verdict(r1, opt, tag + " tangency (drho)"));
            worst(tv, zero_verdict(r2, opt, tag + " tangency (ds)"));
          }
        };
        check(*L, "instance");
        if (!c.functions.empty()) check(symbolic_family(c), "undetermined functions");
        s.add(c.name + "/tangency", tv, a);
      });
    s.guard(c.name + "/admissible", a, [&] {
      AdmissibleResult ad = check_admissible(*L, 200, cfg.seed);
      std::string d = to_string(ad.verdict);
      for (auto& n : ad.notes) d += "; " + n;
      std::string v = ad.verdict == AdmissibleVerdict::Certified ? "pass"
                      : ad.verdict == AdmissibleVerdict::Sampled ? "probable"
                                                                  : "fail";
      SignContext ctx = sign_context(*L);
      auto dom = domain_constraints(c);
      for (std::size_t i = 0; i < dom.size(); ++i) {
        Sign sg = certify_sign(dom[i], ctx);
        d += "; " + c.domain_constraints[i] + ": " + (sg == Sign::Pos ? "certified" : sg == Sign::Neg ? "negative" : "open");
        if (sg == Sign::Neg) v = "fail";
        if (sg == Sign::Unknown && v == "pass") v = "probable";
      }
      s.add(c.name + "/admissible", v, a, d);
    });
    s.guard(c.name + "/symmetry-dimension", a, [&] {
      StateSymmetries st = state_symmetries(*L, h, cfg.seed);
      int dim = static_cast<int>(st.basis.size());
      s.pass_if(c.name + "/symmetry-dimension", dim >= c.expected_dim && st.confirmed, a,
                "dim h_t = " + std::to_string(dim) + ", stated " + std::to_string(c.expected_dim) +
                    (st.note.empty() ? "" : "; " + st.note));
    });
  }
}

// ---------------------------------------------------------------- kinematic invariants

void check_invariants(const Workspace& w, const RunConfig& cfg, Sink& s) {
  const Scenario& sc = w.scenario();
  ZeroOptions opt;
  opt.samples = cfg.samples;
  opt.seed = cfg.seed;
  auto gm = sc.gm();
  for (auto* list : {&sc.invariants0, &sc.invariants1})
    for (auto& inv : *list)
      s.guard(inv.name, inv.anchor, [&] { s.add(inv.name, check_invariance(w.named().at(inv.name), gm, w.generic(), opt), inv.anchor); });
}

void check_derivation_theorem(const Workspace& w, const RunConfig& cfg, Sink& s) {
  const Scenario& sc = w.scenario();
  if (sc.derivations.empty()) return;
  ZeroOptions opt;
  opt.samples = cfg.samples;
  opt.seed = cfg.seed;
  const std::string& a = sc.derivations_anchor;
  s.guard("commutators", a, [&] {
    DerivationCheck dc = check_derivations(w, opt);
    s.add("commutators", dc.commutators, a);
    s.pass_if("independence", dc.independent, a,
              dc.independent ? "determinant is a nonzero base-only multiple of " + sc.independence_condition : dc.detail);
  });
}

// ---------------------------------------------------------------- ranks

ShellPoint regular_point(const Workspace& w, std::uint64_t seed) {
  const PDESystem& S = w.generic();
  for (int attempt = 0; attempt < 16; ++attempt) {
    std::uint64_t sd = attempt == 0 ? seed : hash_str("resample" + std::to_string(attempt), seed);
    try {
      ShellPoint pt = sample_point(S, sd);
      bool singular = false;
      for (auto& m : singular_membership(w, pt)) singular = singular || m.member;
      if (!singular) return pt;
    } catch (const PoleError&) {
    }
  }
  throw std::runtime_error("no regular point found");
}

void check_ranks(const Workspace& w, const RunConfig& cfg, Sink& s) {
  const Scenario& sc = w.scenario();
  const PDESystem& S = w.generic();
  const std::string& a = sc.counts_anchor;
  std::vector<Expr> all = w.order0();
  for (auto& e : w.order1()) all.push_back(e);
  std::vector<TotalDerivation> ds;
  for (auto& d : sc.derivations) ds.push_back(d.d);
  std::vector<Expr> from;
  for (auto& n : sc.derived_from) from.push_back(w.named().at(n));
  auto gm = sc.gm();
  for (std::uint64_t k = 0; k < 3; ++k) {
    std::uint64_t seed = cfg.seed + k;
    std::string tag = "/seed=" + std::to_string(seed);
    s.guard("point" + tag, a, [&] {
      ShellPoint pt = regular_point(w, seed);
      if (sc.counts.count("codim1")) {
        std::size_t r = independence_rank(all, S, pt, 1);
        s.pass_if("codim1" + tag, static_cast<int>(r) == sc.counts.at("codim1"), a,
                  "rank " + std::to_string(r) + " of " + std::to_string(all.size()) + ", stated " +
                      std::to_string(sc.counts.at("codim1")));
      }
      if (sc.counts.count("derived_rank")) {
        std::size_t r = derived_rank(from, ds, S, pt, 1);
        std::size_t n = from.size() * ds.size();
        bool ok = static_cast<int>(r) == sc.counts.at("derived_rank") &&
                  (!sc.counts.count("derived_candidates") || static_cast<int>(n) == sc.counts.at("derived_candidates"));
        s.pass_if("derived" + tag, ok, a,
                  "rank " + std::to_string(r) + " of " + std::to_string(n) + ", stated " +
                      std::to_string(sc.counts.at("derived_rank")));
      }
      if (sc.counts.count("orbit")) {
        std::size_t r = orbit_dimension(gm, S, pt, 1);
        s.pass_if("orbit" + tag, static_cast<int>(r) == sc.counts.at("orbit"), a,
                  "dimension " + std::to_string(r) + ", stated " + std::to_string(sc.counts.at("orbit")));
      }
    });
  }
  if (sc.counts.count("orbit_singular") && !sc.singular_sample.empty()) {
    s.guard("orbit-singular", sc.singular_anchor, [&] {
      std::vector<std::pair<std::string, Expr>> ov;
      for (auto& [c, e] : sc.singular_sample) ov.push_back({c, w.parse(e)});
      ShellPoint pt = sample_point(S, cfg.seed, ov);
      auto mem = singular_membership(w, pt);
      bool in_first = !mem.empty() && mem.front().member;
      std::size_t r = orbit_dimension(gm, S, pt, 1);
      s.pass_if("orbit-singular", in_first && static_cast<int>(r) == sc.counts.at("orbit_singular"),
                sc.singular_anchor,
                std::string(in_first ? "point lies on " + mem.front().set : "point is not on the first singular set") +
                    ", dimension " + std::to_string(r) + ", stated " + std::to_string(sc.counts.at("orbit_singular")));
    });
  }
}

// ---------------------------------------------------------------- Hilbert

void check_hilbert(const Workspace& w, const RunConfig& cfg, Sink& s) {
  const Scenario& sc = w.scenario();
  if (sc.hilbert.empty()) return;
  s.guard("series", sc.poincare_anchor, [&] {
    auto ser = series(parse_expr(sc.poincare), cfg.k_max + 1);
    std::string d, bad;
    for (int k = 0; k <= cfg.k_max; ++k) {
      auto h = hilbert_value(sc, k);
      d += (k ? ", " : "") + ser[k].get_str();
      if (bad.empty() && (!h || *h != ser[k]))
        bad = "first mismatch at k=" + std::to_string(k) + ": series " + ser[k].get_str() + ", H " +
              (h ? h->get_str() : "undefined");
    }
    s.pass_if("series", bad.empty(), sc.poincare_anchor, bad.empty() ? "coefficients " + d : bad);
  });
  const PDESystem& S = w.generic();
  auto gm = sc.gm();
  for (std::uint64_t k = 0; k < 5; ++k) {
    std::uint64_t seed = cfg.seed + k;
    std::string item = "accounting/seed=" + std::to_string(seed);
    s.guard(item, sc.hilbert_anchor, [&] {
      ShellPoint pt = regular_point(w, seed);
      int top = k == 0 ? 2 : 1;
      long sum = 0;
      bool ok = true;
      std::string d;
      for (int j = 0; j <= top; ++j) {
        auto h = hilbert_value(sc, j);
        if (!h || h->get_den() != 1) throw std::runtime_error("H(" + std::to_string(j) + ") is not an integer");
        sum += h->get_num().get_si();
        long rhs = static_cast<long>(S.dimension(j)) - static_cast<long>(orbit_dimension(gm, S, pt, j));
        ok = ok && sum == rhs;
        d += (j ? "; " : "") + std::string("k=") + std::to_string(j) + ": sum H = " + std::to_string(sum) +
             ", dim - orbit = " + std::to_string(rhs);
      }
      s.pass_if(item, ok, sc.hilbert_anchor, d);
    });
  }
}

// ---------------------------------------------------------------- g_sym

void check_gsym(const Workspace& w, const RunConfig& cfg, Sink& s) {
  const Scenario& sc = w.scenario();
  ZeroOptions opt;
  opt.samples = cfg.samples;
  opt.seed = cfg.seed;
  for (auto& c : sc.gsym) {
    s.guard(c.name + "/genericity", c.anchor, [&] {
      GsymCheck r = check_gsym_field(w, c, opt);
      s.pass_if(c.name + "/genericity", r.genericity_ok, c.anchor, r.genericity_ok ? "" : "rejected: " + r.rejected);
      if (!r.genericity_ok) return;
      for (auto& [n, v] : r.action) s.add(c.name + "/action/" + n, v, c.anchor);
      for (auto& [n, v] : r.invariants) s.add(c.name + "/invariant/" + n, v, c.anchor);
      for (auto& [n, v] : r.derivations) s.add(c.name + "/derivation/" + n, v, c.anchor);
    });
  }
}

using CheckFn = void (*)(const Workspace&, const RunConfig&, Sink&);

const std::map<std::string, CheckFn>& check_table() {
  static const std::map<std::string, CheckFn> t = {
      {"symmetries", check_symmetries}, {"states", check_states},       {"invariants", check_invariants},
      {"derivations", check_derivation_theorem}, {"ranks", check_ranks}, {"hilbert", check_hilbert},
      {"gsym", check_gsym}};
  return t;
}

}  // namespace

const std::vector<std::string>& check_names() {
  static const std::vector<std::string> n = {"symmetries", "states", "invariants", "derivations",
                                             "ranks",      "hilbert", "gsym"};
  return n;
}

void validate(const RunConfig& cfg, const std::vector<Scenario>& catalog) {
  for (auto& n : cfg.scenarios)
    if (std::none_of(catalog.begin(), catalog.end(), [&](const Scenario& s) { return s.name == n; }))
      throw UsageError("unknown scenario '" + n + "'");
  for (auto& c : cfg.checks)
    if (c != "all" && !check_table().count(c)) throw UsageError("unknown check '" + c + "'");
  if (cfg.k_max < 2) throw UsageError("--kmax must be at least 2");
  if (cfg.samples < 1) throw UsageError("--samples must be at least 1");
  if (cfg.jobs < 1) throw UsageError("--jobs must be at least 1");
}

std::map<std::string, int> Report::summary() const {
  std::map<std::string, int> m{{"pass", 0}, {"fail", 0}, {"probable", 0}, {"skipped", 0}};
  for (auto& r : records) ++m[r.verdict];
  return m;
}

int Report::exit_status() const {
  for (auto& r : records)
    if (r.verdict == "fail" || (config.strict && r.verdict == "probable")) return 1;
  return 0;
}

Report run(const RunConfig& cfg, const std::vector<Scenario>& catalog) {
  validate(cfg, catalog);
  std::vector<std::string> checks;
  bool all = cfg.checks.empty() || std::count(cfg.checks.begin(), cfg.checks.end(), "all");
  for (auto& c : check_names())
    if (all || std::count(cfg.checks.begin(), cfg.checks.end(), c)) checks.push_back(c);
  std::vector<const Scenario*> scs;
  for (auto& s : catalog)
    if (cfg.scenarios.empty() || std::count(cfg.scenarios.begin(), cfg.scenarios.end(), s.name)) scs.push_back(&s);

  std::vector<std::unique_ptr<Workspace>> ws;
  for (auto* s : scs) ws.push_back(std::make_unique<Workspace>(*s));
  struct Task {
    std::size_t scenario;
    std::string check;
  };
  std::vector<Task> tasks;
  for (std::size_t i = 0; i < scs.size(); ++i)
    for (auto& c : checks) tasks.push_back({i, c});
  std::vector<std::vector<Record>> results(tasks.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t t; (t = next++) < tasks.size();) {
      Sink sink{*scs[tasks[t].scenario], tasks[t].check, {}};
      try {
        // missing anchors fail the scenario's symmetry task
        if (tasks[t].check == "symmetries")
          for (auto& m : missing_anchors(*scs[tasks[t].scenario])) sink.add("anchor/" + m, "fail", "", "entry has no anchor");
        check_table().at(tasks[t].check)(*ws[tasks[t].scenario], cfg, sink);
      } catch (const std::exception& e) {
        sink.add("setup", "fail", "", e.what());
      }
      results[t] = std::move(sink.out);
    }
  };
  std::size_t nthreads = std::min<std::size_t>(static_cast<std::size_t>(cfg.jobs), tasks.size());
  std::vector<std::thread> pool;
  for (std::size_t i = 1; i < nthreads; ++i) pool.emplace_back(worker);
  worker();
  for (auto& th : pool) th.join();

  Report rep;
  rep.config = cfg;
  for (auto& r : results)
    for (auto& rec : r) rep.records.push_back(std::move(rec));
  std::stable_sort(rep.records.begin(), rep.records.end(), [](const Record& a, const Record& b) {
    return std::tie(a.scenario, a.check, a.item) < std::tie(b.scenario, b.check, b.item);
  });
  return rep;
}

std::string report_json(const Report& r, bool stable) {
  json j;
  j["tool"] = "fluidinv";
  j["version"] = kVersion;
  json c;
  c["scenarios"] = r.config.scenarios;
  c["checks"] = r.config.checks;
  c["seed"] = r.config.seed;
  c["k_max"] = r.config.k_max;
  c["samples"] = r.config.samples;
  c["strict"] = r.config.strict;
  j["config"] = c;
  json recs = json::array();
  for (auto& x : r.records) {
    json o;
    o["scenario"] = x.scenario;
    o["check"] = x.check;
    o["item"] = x.item;
    o["verdict"] = x.verdict;
    o["anchor"] = x.anchor;
    if (!x.witness.empty()) o["witness"] = x.witness;
    if (!x.detail.empty()) o["detail"] = x.detail;
    if (!stable) o["elapsed_ms"] = std::round(x.elapsed_ms * 1000) / 1000;
    recs.push_back(o);
  }
  j["records"] = recs;
  j["summary"] = r.summary();
  j["exit_status"] = r.exit_status();
  if (!stable) {
    std::time_t now = std::time(nullptr);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));
    j["timestamp"] = buf;
  }
  return j.dump(2) + "\n";
}

std::string report_text(const Report& r) {
  std::ostringstream os;
  std::map<std::pair<std::string, std::string>, std::map<std::string, int>> by;
  for (auto& x : r.records) ++by[{x.scenario, x.check}][x.verdict];
  for (auto& [k, m] : by) {
    os << k.first << " " << k.second << ":";
    for (auto& [v, n] : m) os << " " << n << " " << v;
    os << "\n";
  }
  for (auto& x : r.records)
    if (x.verdict != "pass") os << "  " << x.verdict << " " << x.id() << (x.detail.empty() ? "" : ": " + x.detail) << "\n";
  auto s = r.summary();
  os << "total: " << s["pass"] << " pass, " << s["fail"] << " fail, " << s["probable"] << " probable, " << s["skipped"]
     << " skipped\n";
  return os.str();
}

// ---------------------------------------------------------------- explain

std::string explain(const std::vector<Scenario>& catalog, const std::string& scenario, const std::string& item) {
  auto it = std::find_if(catalog.begin(), catalog.end(), [&](const Scenario& s) { return s.name == scenario; });
  if (it == catalog.end()) throw NotFound("no scenario '" + scenario + "'");
  const Scenario& sc = *it;
  std::ostringstream os;
  for (auto& g : sc.generators)
    if (g.name == item) {
      os << g.text << "\nanchor: " << g.anchor << "\nchecks: symmetries"
         << (g.part == "m" ? ", invariants, derivations, ranks, hilbert" : ", gsym") << "\n";
      return os.str();
    }
  for (auto& f : sc.h)
    if (f.name == item) {
      os << f.field.str() << "\nanchor: " << sc.h_anchor << "\nchecks: symmetries, states\n";
      return os.str();
    }
  for (auto* list : {&sc.invariants0, &sc.invariants1})
    for (auto& inv : *list)
      if (inv.name == item) {
        if (!inv.text.empty())
          os << inv.text;
        else if (!inv.derivation.empty())
          os << inv.derivation << "(" << inv.argument << ")";
        else
          os << "conjugation " << inv.conjugation << " of the frame (a_g, grad rho, grad s)";
        bool derived = std::count(sc.derived_from.begin(), sc.derived_from.end(), item) > 0;
        os << "\nanchor: " << inv.anchor << "\nchecks: invariants, ranks, hilbert, gsym"
           << (derived ? ", derivations of this item enter the derived rank" : "") << "\n";
        return os.str();
      }
  for (auto& d : sc.derivations)
    if (d.name == item) {
      for (auto& [i, t] : d.text) os << "D" << i << ": " << t << "\n";
      os << "anchor: " << sc.derivations_anchor << "\nchecks: derivations, ranks, gsym\n";
      return os.str();
    }
  for (auto& set : sc.singular_sets)
    if (set.name == item) {
      for (auto& e : set.equations) os << e << " = 0\n";
      os << "anchor: " << sc.singular_anchor << "\nchecks: ranks\n";
      return os.str();
    }
  for (auto& c : sc.states)
    if (c.name == item) {
      if (!c.pressure.empty()) os << "p = " << c.pressure << "\nT = " << c.temperature << "\n";
      for (auto& k : c.constraints) os << "constraint: " << k << "\n";
      os << "anchor: " << c.anchor << "\nchecks: states, symmetries\n";
      return os.str();
    }
  for (auto& c : sc.gsym)
    if (c.name == item) {
      for (auto& g : c.generators) {
        std::string t;
        for (auto& [n, k] : g) t += (t.empty() ? "" : " + ") + k + "*" + n;
        os << "generator: " << t << "\n";
      }
      for (auto& i : c.invariants) os << "invariant: " << i << "\n";
      os << "anchor: " << c.anchor << "\nchecks: gsym\n";
      return os.str();
    }
  throw NotFound("no item '" + item + "' in scenario " + scenario);
}

// ---------------------------------------------------------------- state files

std::string state_check(const std::string& path, const std::vector<Scenario>& catalog, bool& ok) {
  StateCase c = load_state_case(path);
  std::ostringstream os;
  StateSurface L = family_from_classification(c);
  LagrangianCheck lc = check_lagrangian(L);
  os << "state: " << c.name << "\np = " << L.pressure.str() << "\nT = " << L.temperature.str() << "\n";
  os << "lagrangian: " << (lc.ok ? "certified" : "fails, residual " + lc.residual.str()) << "\n";
  AdmissibleResult ad = check_admissible(L);
  os << "kappa: " << to_string(ad.verdict) << (ad.failed.empty() ? "" : " (" + ad.failed + ")") << "\n";
  ok = lc.ok && (ad.verdict == AdmissibleVerdict::Certified || ad.verdict == AdmissibleVerdict::Sampled);
  // h_t against every scenario whose h is distinct
  std::set<std::string> seen;
  for (auto& sc : catalog) {
    std::string key;
    for (auto& f : sc.h) key += f.field.str() + ";";
    if (sc.h.empty() || !seen.insert(key).second) continue;
    std::vector<VectorField> h;
    for (auto& f : sc.h) h.push_back(f.field);
    StateSymmetries st = state_symmetries(L, h);
    os << "h_t in h(" << sc.name << "): dim " << st.basis.size();
    for (auto& v : st.basis) {
      std::string t;
      for (std::size_t i = 0; i < v.size(); ++i)
        if (sgn(v[i]) != 0) t += (t.empty() ? "" : " + ") + v[i].get_str() + "*" + sc.h[i].name;
      os << "; " << t;
    }
    os << "\n";
  }
  return os.str();
}

}  // namespace fluidinv
