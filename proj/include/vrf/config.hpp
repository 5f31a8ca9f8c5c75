#pragma once

// Model inputs: CPRI rate profiles, rate-set selection, hysteresis thresholds
// and traffic normalization. Everything here is validated on construction and
// immutable afterwards.

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace vrf {

struct ProfileRow {
  double bandwidth_mhz = 0.0;
  int fft_size = 0;
  int prb_count = 0;
  double rate_mbps = 0.0;
  int max_users = 0;  // two PRBs per call
};

/// Ordered ladder of CPRI configurations, strictly increasing in rate and user capacity.
class CpriProfile {
 public:
  explicit CpriProfile(std::vector<ProfileRow> rows);

  const std::vector<ProfileRow>& rows() const { return rows_; }
  std::size_t size() const { return rows_.size(); }
  const ProfileRow& row(std::size_t i) const { return rows_.at(i); }

 private:
  std::vector<ProfileRow> rows_;
};

/// The standard six-row LTE profile (1.25 MHz ... 20 MHz).
CpriProfile default_profile();

/// Fronthaul rates d_1 < ... < d_M with their per-rate user capacities K_1 < ... < K_M.
/// Levels are 1-based in the accessors to match the usual l = 1..M indexing.
class RateSet {
 public:
  RateSet(std::vector<double> rates_mbps, std::vector<int> capacities);

  int size() const { return static_cast<int>(rates_.size()); }
  double rate(int level) const { return rates_.at(static_cast<std::size_t>(level - 1)); }
  int capacity(int level) const { return capacities_.at(static_cast<std::size_t>(level - 1)); }
  const std::vector<double>& rates() const { return rates_; }
  const std::vector<int>& capacities() const { return capacities_; }
  /// Per-RRU server count (capacity of the highest rate).
  int server_count() const { return capacities_.back(); }

 private:
  std::vector<double> rates_;
  std::vector<int> capacities_;
};

/// Picks `n_d` rates from the top of the profile, descending by halving:
/// the top rate, then the largest rate at most half of it, and so on.
/// The result is stored in ascending order.
RateSet select_rates(const CpriProfile& profile, int n_d);

/// Forward thresholds F_1..F_{M-1} and reverse thresholds R_1..R_{M-1}.
/// Conventions: R_0 = 0 and F_M = server count.
class ThresholdPolicy {
 public:
  /// Validates the policy against `rates` (F_l <= K_l, ordering, gaps).
  ThresholdPolicy(std::vector<int> forward, std::vector<int> reverse, const RateSet& rates);

  int levels() const { return static_cast<int>(forward_.size()) + 1; }
  /// F_l for l in 1..M.
  int forward(int level) const;
  /// R_l for l in 0..M-1.
  int reverse(int level) const;
  const std::vector<int>& forward_thresholds() const { return forward_; }
  const std::vector<int>& reverse_thresholds() const { return reverse_; }
  int server_count() const { return server_count_; }

 private:
  std::vector<int> forward_;
  std::vector<int> reverse_;
  int server_count_;
};

/// F_l = K_l and R_l = F_l - gap for l < M.
ThresholdPolicy default_thresholds(const RateSet& rates, int gap);

struct TrafficSpec {
  double lambda = 0.0;  // calls per time unit, per RRU
  double mu = 0.0;      // completions per time unit, per call
  double a = 0.0;       // lambda / (server_count * mu)
  int server_count = 0;

  double rho() const { return lambda / mu; }
};

TrafficSpec traffic_from_load(double a, double mu, int server_count);

/// On-disk model configuration (JSON). Unknown keys are rejected.
struct ModelConfig {
  std::optional<std::vector<ProfileRow>> profile;
  int n_d = 1;
  int threshold_gap = 1;
  double a = 0.2;
  double mu = 0.5;
  int server_count = 50;
  int cluster_size = 1;
  double fha_capacity_mbps = 10000.0;
};

ModelConfig parse_config(std::string_view json_text);
ModelConfig load_config(const std::filesystem::path& path);
std::string to_json(const ModelConfig& config);

/// Fully validated model derived from a ModelConfig.
struct Model {
  CpriProfile profile;
  RateSet rates;
  ThresholdPolicy thresholds;
  TrafficSpec traffic;
  int cluster_size;
  double capacity_mbps;
};

Model resolve(const ModelConfig& config);

}  // namespace vrf
