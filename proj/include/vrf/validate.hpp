#pragma once

// Self-check suites: every closed form against an independent numerical route,
// plus an analytic-versus-simulation grid.

#include <cstdint>
#include <string>
#include <vector>

namespace vrf::validate {

struct SuiteResult {
  std::string name;
  bool passed = false;
  double metric = 0.0;     // worst observed error (or failing-point count)
  double threshold = 0.0;  // pass bound on `metric`
  std::string detail;
};

struct Options {
  bool simulation = true;
  std::uint64_t sim_events = 200'000;
  std::uint64_t seed = 1;
  int random_specs = 50;
};

struct Report {
  std::vector<SuiteResult> suites;
  bool passed() const;
  std::string to_json() const;
};

SuiteResult steady_state_suite(std::uint64_t seed);
SuiteResult coefficient_suite(int specs, std::uint64_t seed);
SuiteResult decomposition_suite();
SuiteResult erlang_suite();
SuiteResult product_form_suite();
SuiteResult engset_suite();
SuiteResult simulation_suite(std::uint64_t events, std::uint64_t seed);

Report run_all(const Options& options);

}  // namespace vrf::validate
