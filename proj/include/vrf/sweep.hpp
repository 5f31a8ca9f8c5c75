#pragma once

// Parameter sweeps over cluster size, load, rate count, threshold gap and
// arrival process, written as one CSV row per grid point.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "vrf/aggregator.hpp"
#include "vrf/config.hpp"

namespace vrf::sweep {

enum class Mode { kAnalytic, kSimulate, kBoth };

struct SweepPlan {
  std::vector<int> cluster_sizes;
  std::vector<double> loads;
  std::vector<int> n_d;
  std::vector<int> gaps;
  std::vector<std::string> arrivals{"poisson"};
  Mode mode = Mode::kBoth;
  std::uint64_t events = 1'000'000;
  std::uint64_t seed = 1;
  ModelConfig base;
  aggregator::CapacityConvention convention = aggregator::CapacityConvention::kTrueN;
  std::optional<std::filesystem::path> out;

  std::size_t size() const;
};

/// JSON plan: {"cluster_sizes": [..], "loads": [..], "n_d": [..], "gaps": [..],
/// "arrivals": ["poisson", "weibull:1.5"], "mode": "analytic|simulate|both",
/// "events": int, "seed": int, "base": {config}, "capacity_convention":
/// "true_n|max_rru", "out": path}. Missing grids default to the base config value.
SweepPlan parse_plan(std::string_view json_text);
SweepPlan load_plan(const std::filesystem::path& path);

struct GridPoint {
  int n = 0;
  double a = 0.0;
  int n_d = 0;
  int gap = 0;
  std::string arrival;
};

/// Grid points in row-major order (n outermost, arrival innermost).
std::vector<GridPoint> expand(const SweepPlan& plan);

/// Per-point seed derived from the coordinates only.
std::uint64_t point_seed(std::uint64_t base_seed, const GridPoint& p);

struct SweepRow {
  GridPoint point;
  std::uint64_t events = 0;
  std::uint64_t seed = 0;
  std::optional<double> pb_analytic;
  std::vector<double> pb_components;
  std::optional<double> pb_sim;
  std::optional<double> pb_sim_ci;
  std::optional<double> pb_sim_se;
  std::uint64_t blocked_rru = 0;
  std::uint64_t blocked_fha = 0;
  std::string agree;  // "true", "false", "" (single mode) or "failed"
  std::string error;
  double wall_s = 0.0;
};

/// |analytic - sim| <= 3 se, or both below 1e-4.
bool agrees(double analytic, double sim, double se);

SweepRow run_point(const SweepPlan& plan, const GridPoint& point);

const std::vector<std::string>& csv_columns();
void write_header(std::ostream& out);
void write_row(std::ostream& out, const SweepRow& row);

/// Runs every grid point on `jobs` workers. Rows reach `sink` in grid order as
/// soon as all earlier rows are done. Returns the number of failed points.
std::size_t run_sweep(const SweepPlan& plan, int jobs, const std::function<void(const SweepRow&)>& sink);

}  // namespace vrf::sweep
