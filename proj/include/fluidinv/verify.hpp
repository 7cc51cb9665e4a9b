#pragma once
/// Batch runner over the catalog: scenario x check tasks, records with
/// anchors, deterministic JSON reports.

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "fluidinv/invariants.hpp"

namespace fluidinv {

struct RunConfig {
  std::vector<std::string> scenarios;  // empty: all
  std::vector<std::string> checks;     // empty or "all": every check
  std::uint64_t seed = 1729;
  int k_max = 8;
  int samples = 16;
  bool strict = false;
  int jobs = 1;
  std::string report_path;
};

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Record {
  std::string scenario, check, item;
  std::string verdict;  // pass | fail | probable | skipped
  std::string anchor;   // catalog anchor or "plumbing"
  std::string witness, detail;
  double elapsed_ms = 0;
  std::string id() const { return scenario + "/" + check + "/" + item; }
};

struct Report {
  RunConfig config;
  std::vector<Record> records;  // sorted by (scenario, check, item)
  std::map<std::string, int> summary() const;
  int exit_status() const;  // 0 pass, 1 failure
};

const std::vector<std::string>& check_names();
// validates names, throws UsageError
void validate(const RunConfig& cfg, const std::vector<Scenario>& catalog);
Report run(const RunConfig& cfg, const std::vector<Scenario>& catalog);

// volatile fields (timestamp, elapsed_ms) are left out when stable is set
std::string report_json(const Report& r, bool stable = false);
std::string report_text(const Report& r);

class NotFound : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};
std::string explain(const std::vector<Scenario>& catalog, const std::string& scenario, const std::string& item);

// Lagrangian condition, kappa admissibility and h_t for a state file;
// returns the report text and sets ok
std::string state_check(const std::string& path, const std::vector<Scenario>& catalog, bool& ok);

}  // namespace fluidinv
