#pragma once

// Fronthaul aggregator: N RRUs share a link of capacity B_c. The state is
// k = (k_1..k_M), the number of RRUs currently transmitting at rate d_m.

#include <cstdint>
#include <limits>
#include <optional>
#include <unordered_map>
#include <vector>

#include "vrf/config.hpp"
#include "vrf/ctmc.hpp"
#include "vrf/rru.hpp"

namespace vrf::aggregator {

/// How clusters larger than floor(B_c / d_1) are treated.
enum class CapacityConvention {
  kTrueN,   // all N RRUs generate wake-ups; feasibility caps the active count
  kMaxRru,  // the cluster is replaced by floor(B_c / d_1) RRUs throughout
};

struct AggregatorSpec {
  int cluster_size;
  RateSet rates;
  double capacity_mbps;
  rru::RruRates rru_rates;
  double lambda;
  CapacityConvention convention = CapacityConvention::kTrueN;
  std::size_t state_cap = 5'000'000;

  AggregatorSpec(int cluster_size, RateSet rates, double capacity_mbps, rru::RruRates rru_rates,
                 CapacityConvention convention = CapacityConvention::kTrueN);

  int levels() const { return rates.size(); }
  /// RRU count used by the binomial, the wake-up rate and the wake-up blocking set.
  int effective_rrus() const;
  bool fits(double load_mbps) const;
};

AggregatorSpec make_spec(const Model& model, CapacityConvention convention = CapacityConvention::kTrueN);

/// floor(B_c / d_1); saturates at INT_MAX for an unbounded link.
int max_rru(double capacity_mbps, double d1_mbps);

using StateVector = std::vector<int>;

class StateSpace {
 public:
  std::size_t size() const { return count_; }
  int levels() const { return levels_; }
  StateVector state(std::size_t i) const;
  int k(std::size_t i, int level) const { return data_[i * static_cast<std::size_t>(levels_) + static_cast<std::size_t>(level - 1)]; }
  int active(std::size_t i) const { return active_[i]; }
  double load(std::size_t i) const { return load_[i]; }
  std::optional<std::size_t> find(const StateVector& k) const;

 private:
  friend StateSpace enumerate_states(const AggregatorSpec& spec);
  std::uint64_t key(const int* k) const;

  int levels_ = 0;
  int radix_ = 0;
  std::size_t count_ = 0;
  std::vector<int> data_;
  std::vector<int> active_;
  std::vector<double> load_;
  std::unordered_map<std::uint64_t, std::size_t> index_;
};

/// Feasible states in lexicographic order. Throws CapacityError past spec.state_cap.
StateSpace enumerate_states(const AggregatorSpec& spec);

/// Rate of the direct transition from -> to (0 when they are not adjacent).
double transition_rate(const StateVector& from, const StateVector& to, const AggregatorSpec& spec);

ctmc::RateMatrix generator(const AggregatorSpec& spec, const StateSpace& space);

ctmc::Distribution product_form(const AggregatorSpec& spec, const StateSpace& space);
/// Log of the unnormalized product-form weight of every state.
std::vector<double> product_form_log_weights(const AggregatorSpec& spec, const StateSpace& space);
ctmc::Distribution direct_solve(const AggregatorSpec& spec, const StateSpace& space);

struct BlockingReport {
  std::vector<double> per_rate;         // m = 0..M-1 (0 = wake-up)
  double total = 0.0;
  std::vector<std::size_t> set_sizes;   // |K^{lambda_m}|
  int n_rru_effective = 0;
  std::vector<double> offered_flow;     // per m, stationary rate of upgrade attempts
  std::vector<double> blocked_flow;     // per m, rate of attempts that would exceed B_c
  std::size_t state_count = 0;
};

BlockingReport blocking(const AggregatorSpec& spec, const StateSpace& space, const ctmc::Distribution& p);
BlockingReport blocking(const AggregatorSpec& spec);

/// max over adjacent pairs of |P(i) q_ij - P(j) q_ji|, rates taken from `spec`.
double detailed_balance_check(const AggregatorSpec& spec, const StateSpace& space, const ctmc::Distribution& p);
double detailed_balance_check(const AggregatorSpec& spec);

/// Per-RRU probability of each rate level {off, d_1..d_M}.
std::vector<double> rate_level_marginal(const AggregatorSpec& spec, const StateSpace& space,
                                        const ctmc::Distribution& p);

}  // namespace vrf::aggregator
