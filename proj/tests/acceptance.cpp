// Acceptance suite: one PASS/FAIL line per criterion. Exit status is 0 when
// every criterion passes, with a pinned list of known catalog errata that must
// keep failing (a pinned record that starts passing fails its criterion too).

#include <sys/wait.h>

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <set>
#include <sstream>
#include <thread>

#include "fluidinv/parser.hpp"
#include "fluidinv/symmetry.hpp"
#include "fluidinv/thermo.hpp"
#include "fluidinv/verify.hpp"
#include "fuzz.hpp"

using namespace fluidinv;

namespace {

// pinned tolerances and seeds
constexpr double kFdStep = 1e-5;
constexpr double kFdRelTol = 1e-6;
constexpr std::uint64_t kSeed = 1729;
constexpr int kFuzzCount = 1000;
constexpr int kPoissonTriples = 50;
constexpr int kProlongOrder = 2;

// catalog entries known to disagree with exact computation; see the README
const std::set<std::string> kErrata{
    "euler-plane/gsym/two-dim/invariant/rho^4*J7/J3^2",
    "euler-plane/gsym/two-dim/invariant/J8/(J1*J3)",
    "euler-sphere/hilbert/series",
    "euler-sphere/states/two-dim-commutative/symmetry-dimension",
    "euler-layer/states/two-dim-commutative/symmetry-dimension",
    "ns-plane/gsym/one-dim/action/J7",
    "ns-plane/gsym/one-dim/action/J8",
    "ns-plane/gsym/two-dim/invariant/J1*rho^sig1*exp(sig2*s)",
    "ns-plane/gsym/two-dim/derivation/rho^sig1*exp(sig2*s) nabla1",
    "ns-plane/gsym/two-dim/derivation/rho^(sig1 - 2)*exp(sig2*s) nabla2",
    "ns-plane/gsym/two-dim/derivation/rho^(sig1 - 1)*exp(sig2*s) nabla3",
    "ns-space3/derivations/independence",
    "ns-space3/gsym/one-dim/invariant/rho*J3/n1s",
    "ns-space3/gsym/one-dim/invariant/rho*J32/(rho*n1s)",
};

struct Outcome {
  bool ok = true;
  std::vector<std::string> notes;
  void fail(const std::string& why) {
    ok = false;
    notes.push_back(why);
  }
};

int failures = 0;

void report(int n, const std::string& title, const Outcome& o, double secs) {
  std::cout << (o.ok ? "PASS" : "FAIL") << " criterion " << n << ": " << title << " (" << std::fixed
            << std::setprecision(1) << secs << " s)\n";
  for (auto& s : o.notes) std::cout << "    " << s << "\n";
  if (!o.ok) ++failures;
}

void criterion(int n, const std::string& title, const std::function<void(Outcome&)>& body) {
  auto t0 = std::chrono::steady_clock::now();
  Outcome o;
  try {
    body(o);
  } catch (const std::exception& e) {
    o.fail(std::string("exception: ") + e.what());
  }
  report(n, title, o, std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
}

// criteria backed by verify records: every record of the given checks passes,
// except pinned errata which must still fail
void from_records(const Report& r, const std::set<std::string>& checks, Outcome& o) {
  int seen = 0, known = 0;
  for (auto& rec : r.records) {
    if (!checks.count(rec.check)) continue;
    ++seen;
    bool pinned = kErrata.count(rec.id()) > 0;
    if (rec.verdict == "pass") {
      if (pinned) o.fail("pinned erratum now passes: " + rec.id());
    } else if (pinned) {
      ++known;
      o.notes.push_back("known erratum: " + rec.id());
    } else {
      o.fail(rec.verdict + ": " + rec.id() + (rec.detail.empty() ? "" : " (" + rec.detail + ")"));
    }
  }
  if (seen == 0) o.fail("no records");
  o.notes.insert(o.notes.begin(), std::to_string(seen) + " records, " + std::to_string(known) + " known errata");
}

Expr random_thermo_poly(std::mt19937_64& rng) {
  const char* vs[] = {"p", "rho", "s", "T"};
  Expr r;
  for (int t = 0; t < 3; ++t) {
    Expr m(static_cast<long>(rng() % 7) - 3);
    for (int f = 0; f < 2; ++f) m *= Expr::var(vs[rng() % 4]);
    r += m;
  }
  return r;
}

struct Run {
  int status;
  std::string out;
};

Run shell(const std::string& cmd) {
  FILE* p = popen((cmd + " 2>&1").c_str(), "r");
  if (!p) return {-1, ""};
  std::string out;
  std::array<char, 4096> buf;
  std::size_t n;
  while ((n = fread(buf.data(), 1, buf.size(), p)) > 0) out.append(buf.data(), n);
  int st = pclose(p);
  return {WIFEXITED(st) ? WEXITSTATUS(st) : -1, out};
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

int main() {
  std::vector<Scenario> catalog;
  try {
    catalog = load_catalog();
  } catch (const std::exception& e) {
    std::cerr << "catalog: " << e.what() << "\n";
    return 2;
  }

  criterion(1, "thermodynamics core", [&](Outcome& o) {
    std::mt19937_64 rng(kSeed);
    for (int i = 0; i < kPoissonTriples; ++i) {
      auto f = random_thermo_poly(rng), g = random_thermo_poly(rng), h = random_thermo_poly(rng);
      if (!(poisson_bracket(f, g) + poisson_bracket(g, f)).is_zero_form())
        o.fail("antisymmetry, triple " + std::to_string(i));
      auto jac = poisson_bracket(f, poisson_bracket(g, h)) + poisson_bracket(g, poisson_bracket(h, f)) +
                 poisson_bracket(h, poisson_bracket(f, g));
      if (!jac.is_zero_form()) o.fail("Jacobi, triple " + std::to_string(i));
    }
    StateSurface ig;
    ig.pressure = parse_expr("k*rho^(k+1)*exp(s/gamma)");
    ig.temperature = parse_expr("(1/gamma)*rho^k*exp(s/gamma)");
    ig.constraints = {parse_constraint("k > 0"), parse_constraint("gamma > 0")};
    auto lc = check_lagrangian(ig);
    if (!lc.ok) o.fail("ideal gas is not Lagrangian: " + lc.residual.str());
    auto ad = check_admissible(ig);
    if (ad.verdict != AdmissibleVerdict::Certified) o.fail("ideal gas admissibility: " + to_string(ad.verdict));
  });

  RunConfig cfg;
  cfg.seed = kSeed;
  cfg.strict = true;
  cfg.jobs = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  auto t0 = std::chrono::steady_clock::now();
  Report rep = run(cfg, catalog);
  std::cout << "catalog run: " << rep.records.size() << " records in " << std::fixed << std::setprecision(1)
            << std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count() << " s\n";

  criterion(2, "state classification", [&](Outcome& o) { from_records(rep, {"states"}, o); });
  criterion(3, "symmetries", [&](Outcome& o) { from_records(rep, {"symmetries"}, o); });
  criterion(4, "kinematic invariants and derivations",
            [&](Outcome& o) { from_records(rep, {"invariants", "derivations"}, o); });
  criterion(5, "ranks and orbit dimensions", [&](Outcome& o) { from_records(rep, {"ranks"}, o); });
  criterion(6, "Hilbert and Poincare functions", [&](Outcome& o) { from_records(rep, {"hilbert"}, o); });
  criterion(7, "g_sym fields", [&](Outcome& o) { from_records(rep, {"gsym"}, o); });

  criterion(8, "kernel properties", [&](Outcome& o) {
    fuzz::Gen g(kSeed);
    int rt = 0;
    for (int i = 0; i < kFuzzCount; ++i) {
      auto e = g.expr(3);
      if (!parse_expr(print_expr(e)).same(e)) ++rt;
    }
    if (rt) o.fail(std::to_string(rt) + " of " + std::to_string(kFuzzCount) + " round trips differ");

    fuzz::Gen a(kSeed + 1);
    std::map<std::string, double> pd{{"x", 0.37}, {"y", -0.61}, {"z", 1.13}};
    int fd_bad = 0, fd_used = 0;
    for (int i = 0; i < kFuzzCount; ++i) {
      auto e = a.expr(3);
      for (auto& v : {"x", "y", "z"}) {
        auto up = pd, dn = pd;
        up[v] += kFdStep;
        dn[v] -= kFdStep;
        double fd = (eval_double(e, up) - eval_double(e, dn)) / (2 * kFdStep);
        double ex = eval_double(differentiate(e, v), pd);
        if (!std::isfinite(fd) || !std::isfinite(ex)) continue;
        ++fd_used;
        if (std::abs(fd - ex) > kFdRelTol * std::max(1.0, std::abs(ex))) ++fd_bad;
      }
    }
    if (fd_bad) o.fail(std::to_string(fd_bad) + " of " + std::to_string(fd_used) + " finite-difference checks differ");

    JetBundle b{{"t", "x", "y"}, {"u", "v", "p", "rho", "s", "T"}, 3};
    auto coords = b.coordinates(1);
    std::mt19937_64 rng(kSeed + 2);
    for (int i = 0; i < 30; ++i) {
      Expr e;
      for (int t = 0; t < 3; ++t) e += Expr::var(coords[rng() % coords.size()]) * Expr::var(coords[rng() % coords.size()]);
      e = e * sin(Expr::var("y")) + exp(Expr::var("x") * Expr::var("rho"));
      for (auto& p : b.indep)
        for (auto& q : b.indep)
          if (!total_derivative(total_derivative(e, p, b), q, b).same(total_derivative(total_derivative(e, q, b), p, b)))
            o.fail("[D_" + p + ", D_" + q + "] != 0");
    }

    int pairs = 0;
    for (auto& sc : catalog) {
      Workspace w(sc);
      JetBundle jb = w.generic().bundle;
      if (!w.generic().state.free) {
        jb.dep.push_back("p");
        jb.dep.push_back("T");
      }
      auto gg = sc.g();
      for (std::size_t i = 0; i < gg.size(); ++i)
        for (std::size_t j = i + 1; j < gg.size(); ++j) {
          ++pairs;
          for (auto& [q, d] : prolongation_bracket_defect(gg[i].field, gg[j].field, jb, kProlongOrder))
            if (!d.is_zero_form()) o.fail(sc.name + ": [" + gg[i].name + ", " + gg[j].name + "] defect on " + q);
        }
    }
    o.notes.push_back(std::to_string(pairs) + " generator pairs, " + std::to_string(fd_used) + " derivative checks");
  });

  criterion(9, "determinism", [&](Outcome& o) {
    namespace fs = std::filesystem;
    std::random_device rd;
    auto dir = fs::temp_directory_path() / ("fluidinv-accept-" + std::to_string(rd()));
    fs::create_directories(dir);
    std::string base = "'" + std::string(FLUIDINV_BIN) + "' verify --scenario euler-plane --scenario ns-plane --seed " +
                       std::to_string(kSeed) + " --stable --report ";
    auto a = dir / "a.json", b = dir / "b.json";
    auto ra = shell(base + "'" + a.string() + "' --jobs 1");
    auto rb = shell(base + "'" + b.string() + "' --jobs 4");
    if (ra.status != rb.status) o.fail("exit status differs between runs");
    auto ta = slurp(a), tb = slurp(b);
    if (ta.empty()) o.fail("no report written");
    if (ta != tb) o.fail("reports differ");
    if (ra.out != rb.out) o.fail("text output differs");
    fs::remove_all(dir);
  });

  std::cout << (failures == 0 ? "acceptance: all criteria pass\n"
                              : "acceptance: " + std::to_string(failures) + " criteria fail\n");
  return failures == 0 ? 0 : 1;
}
