#pragma once

// Per-RRU threshold queue with hysteresis.
//
// An RRU serving N_u calls runs at rate level s (0 = off, 1..M = d_1..d_M).
// Arrivals at N_u = F_s move it up a level, departures down to N_u = R_{s-1}
// move it down. Level l covers the user counts R_{l-1}+1 .. F_l; level 1 is
// analysed together with the off state (0, 0), so its partition starts at 0.

#include <vector>

#include "vrf/config.hpp"
#include "vrf/ctmc.hpp"

namespace vrf::rru {

struct RruChainSpec {
  RateSet rates;
  ThresholdPolicy thresholds;
  TrafficSpec traffic;

  RruChainSpec(RateSet rates, ThresholdPolicy thresholds, TrafficSpec traffic);

  int levels() const { return rates.size(); }
  double rho() const { return traffic.rho(); }
  /// Smallest user count in partition l (0 for l = 1, the off state).
  int first_user(int level) const;
  /// Largest user count in partition l (F_l; the server count for l = M).
  int last_user(int level) const;
};

struct RruState {
  int users;
  int level;  // 0 = off
  friend bool operator==(const RruState&, const RruState&) = default;
};

class GlobalRruChain {
 public:
  explicit GlobalRruChain(const RruChainSpec& spec);

  const std::vector<RruState>& states() const { return states_; }
  std::size_t index(int users, int level) const;
  const ctmc::RateMatrix& generator() const { return generator_; }
  /// Global indices of partition l, in increasing user count (off state first for l = 1).
  std::vector<std::size_t> partition(int level) const;

 private:
  std::vector<RruState> states_;
  std::vector<std::vector<long>> lookup_;  // [level][users] -> index or -1
  ctmc::RateMatrix generator_;
};

GlobalRruChain build_global_chain(const RruChainSpec& spec);

/// C_i^l over the partition's user counts, relative to the partition base
/// (C = 1 at first_user). `log_values` holds log C_i where C_i > 0.
struct PartitionCoefficients {
  int level = 0;
  int first_user = 0;
  std::vector<double> values;
  std::vector<double> log_values;
};

/// Closed-form coefficients. Throws InvalidParameter for a level outside 1..M.
PartitionCoefficients partition_coefficients(const RruChainSpec& spec, int level);

struct PartitionDistribution {
  int level = 0;
  int first_user = 0;
  std::vector<double> coefficients;
  std::vector<double> probabilities;
  bool from_oracle = false;

  /// pi_l(users)
  double at(int users) const { return probabilities.at(static_cast<std::size_t>(users - first_user)); }
};

/// Conditional distribution of the user count given the RRU is in partition l.
/// Falls back to the CTMC fold-back oracle (and logs a diagnostic) when the
/// closed form does not apply or loses its sign to cancellation.
PartitionDistribution partition_distribution(const RruChainSpec& spec, int level);

/// The same distribution computed from the global chain by the fold-back construction.
PartitionDistribution oracle_partition_distribution(const RruChainSpec& spec, int level);

/// Whether the closed form's branch ranges are well ordered for level l
/// (F_{l-1} + 1 <= R_l for interior levels).
bool closed_form_applies(const RruChainSpec& spec, int level);

/// Level-transition rates: up[m] = lambda_m (m = 0..M-1, lambda_0 = lambda),
/// down[m-1] = mu_m (m = 1..M).
struct RruRates {
  std::vector<double> up;
  std::vector<double> down;

  int levels() const { return static_cast<int>(down.size()); }
};

RruRates transition_rates(const RruChainSpec& spec);

/// Stationary distribution of the birth-death chain over {off, d_1, ..., d_M}.
ctmc::Distribution rate_level_distribution(const RruRates& rates);

/// Probability that all servers of the RRU are busy.
double server_blocking(const RruChainSpec& spec);

}  // namespace vrf::rru
