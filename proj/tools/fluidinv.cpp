#include <fstream>
#include <iostream>

#include "CLI11.hpp"
#include "fluidinv/verify.hpp"

using namespace fluidinv;

int main(int argc, char** argv) {
  CLI::App app{"Verification of differential invariants of Euler and Navier-Stokes flows"};
  app.require_subcommand(1);

  RunConfig cfg;
  auto* verify = app.add_subcommand("verify", "run verification checks over the catalog");
  verify->add_option("--scenario", cfg.scenarios, "scenario name (repeatable)");
  verify->add_option("--check", cfg.checks, "symmetries|states|invariants|derivations|ranks|hilbert|gsym|all");
  verify->add_option("--seed", cfg.seed, "seed for sampled points");
  verify->add_option("--kmax", cfg.k_max, "last Hilbert coefficient compared");
  verify->add_option("--samples", cfg.samples, "samples per probabilistic zero test");
  verify->add_flag("--strict", cfg.strict, "probable verdicts count as failures");
  verify->add_option("--jobs", cfg.jobs, "concurrent tasks");
  verify->add_option("--report", cfg.report_path, "JSON report path");
  bool stable = false;
  verify->add_flag("--stable", stable, "leave timestamp and timings out of the report");

  std::string ex_scenario, ex_item;
  auto* ex = app.add_subcommand("explain", "show a catalog item with its anchor");
  ex->add_option("scenario", ex_scenario)->required();
  ex->add_option("item", ex_item)->required();

  std::string state_file;
  auto* sc = app.add_subcommand("state-check", "Lagrangian, kappa and h_t checks for a state file");
  sc->add_option("file", state_file)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  std::vector<Scenario> catalog;
  try {
    catalog = load_catalog();
  } catch (const std::exception& e) {
    std::cerr << "catalog: " << e.what() << "\n";
    return 2;
  }

  if (*verify) {
    Report r;
    try {
      r = run(cfg, catalog);
    } catch (const UsageError& e) {
      std::cerr << "usage: " << e.what() << "\n";
      return 2;
    }
    std::cout << report_text(r);
    if (!cfg.report_path.empty()) {
      std::ofstream out(cfg.report_path);
      if (!out) {
        std::cerr << "cannot write " << cfg.report_path << "\n";
        return 2;
      }
      out << report_json(r, stable);
    }
    return r.exit_status();
  }
  if (*ex) {
    try {
      std::cout << explain(catalog, ex_scenario, ex_item);
      return 0;
    } catch (const NotFound& e) {
      std::cerr << e.what() << "\n";
      return 2;
    }
  }
  try {
    bool ok = false;
    std::cout << state_check(state_file, catalog, ok);
    return ok ? 0 : 1;
  } catch (const CatalogError& e) {
    std::cerr << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "state-check: " << e.what() << "\n";
    return 1;
  }
}
