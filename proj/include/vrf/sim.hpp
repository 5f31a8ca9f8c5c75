#pragma once

// Event-driven simulation of a cluster of RRUs behind one fronthaul link.
// Every RRU is an M/M/S(0)-style loss system whose CPRI rate follows the
// hysteresis thresholds; a call that needs a rate step the link cannot carry
// is rejected.

#include <cstdint>
#include <string>
#include <string_view>

#include "vrf/config.hpp"
#include "vrf/philox.hpp"

namespace vrf::sim {

struct ArrivalProcess {
  enum class Kind { kPoisson, kWeibull };
  Kind kind = Kind::kPoisson;
  double lambda = 1.0;
  double shape = 1.0;  // Weibull only

  static ArrivalProcess poisson(double lambda);
  static ArrivalProcess weibull(double shape, double lambda);

  /// Weibull scale 1 / lambda.
  double scale() const { return 1.0 / lambda; }
  double mean() const;
  /// "poisson" or "weibull:<k>".
  std::string label() const;
};

/// Parses "poisson" or "weibull:K".
ArrivalProcess parse_arrival(std::string_view text, double lambda);

double sample_interarrival(const ArrivalProcess& process, Philox& rng);

struct SimConfig {
  int cluster_size;
  RateSet rates;
  ThresholdPolicy thresholds;
  TrafficSpec traffic;
  double capacity_mbps;
  ArrivalProcess arrival;
  std::uint64_t events = 1'000'000;
  std::uint64_t seed = 1;
  double reconfig_latency = 0.0;
  int batches = 20;
  double warmup_fraction = 0.05;
};

SimConfig make_sim_config(const Model& model, const ArrivalProcess& arrival, std::uint64_t events,
                          std::uint64_t seed);

struct SimStats {
  std::uint64_t events = 0;  // arrivals and departures after warm-up
  std::uint64_t arrivals = 0;
  std::uint64_t accepted = 0;
  std::uint64_t blocked_rru = 0;       // no idle server
  std::uint64_t blocked_fha = 0;       // the link cannot carry the rate step
  std::uint64_t upgrade_requests = 0;  // arrivals that need a wake-up or a rate step

  double pb_fha = 0.0;  // blocked_fha / upgrade_requests
  double pb_fha_se = 0.0;
  double pb_fha_ci = 0.0;  // 95% half-width
  // Upgrade requests that are not a retry by an RRU whose previous request was
  // blocked with its user count unchanged since, and how many of them failed.
  std::uint64_t first_upgrade_requests = 0;
  std::uint64_t first_blocked_fha = 0;
  double pb_fha_first = 0.0;
  double pb_fha_first_se = 0.0;

  double pb_rru_call = 0.0;  // blocked_rru / arrivals
  double pb_rru_se = 0.0;
  double pb_fha_call = 0.0;  // blocked_fha / arrivals

  double mean_aggregate_rate = 0.0;
  double max_aggregate_rate = 0.0;
  double simulated_time = 0.0;

  friend bool operator==(const SimStats&, const SimStats&) = default;
};

/// Level after an arrival finds `users_before` calls at `level` (0 = off).
int rate_after_arrival(int level, int users_before, const ThresholdPolicy& thresholds);
/// Level after a departure leaves `users_after` calls at `level`.
int rate_after_departure(int level, int users_after, const ThresholdPolicy& thresholds);

SimStats run(const SimConfig& config);

/// Poisson probability of exactly n arrivals at `rate` within `window`.
double reconfig_arrival_probability(double rate, double window, int n);

}  // namespace vrf::sim
