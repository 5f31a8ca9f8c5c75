#include "vrf/sim.hpp"

#include <cmath>
#include <cstdio>
#include <queue>
#include <stdexcept>
#include <vector>

#include "vrf/error.hpp"

namespace vrf::sim {

ArrivalProcess ArrivalProcess::poisson(double lambda) {
  if (!(lambda > 0.0)) throw InvalidParameter("arrival rate must be positive");
  return {Kind::kPoisson, lambda, 1.0};
}

ArrivalProcess ArrivalProcess::weibull(double shape, double lambda) {
  if (!(lambda > 0.0)) throw InvalidParameter("arrival rate must be positive");
  if (!(shape > 0.0)) throw InvalidParameter("Weibull shape must be positive");
  return {Kind::kWeibull, lambda, shape};
}

double ArrivalProcess::mean() const {
  return kind == Kind::kPoisson ? 1.0 / lambda : std::tgamma(1.0 + 1.0 / shape) / lambda;
}

std::string ArrivalProcess::label() const {
  if (kind == Kind::kPoisson) return "poisson";
  char buf[48];
  std::snprintf(buf, sizeof buf, "weibull:%g", shape);
  return buf;
}

ArrivalProcess parse_arrival(std::string_view text, double lambda) {
  if (text == "poisson") return ArrivalProcess::poisson(lambda);
  constexpr std::string_view prefix = "weibull:";
  if (text.substr(0, prefix.size()) == prefix) {
    const std::string k(text.substr(prefix.size()));
    std::size_t used = 0;
    double shape = 0.0;
    try {
      shape = std::stod(k, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != k.size()) throw InvalidConfiguration("bad Weibull shape in '" + std::string(text) + "'");
    if (!(shape > 0.0)) throw InvalidConfiguration("Weibull shape must be positive");
    return ArrivalProcess::weibull(shape, lambda);
  }
  throw InvalidConfiguration("arrival must be 'poisson' or 'weibull:K', got '" + std::string(text) + "'");
}

double sample_interarrival(const ArrivalProcess& process, Philox& rng) {
  if (process.kind == ArrivalProcess::Kind::kPoisson) return rng.exponential(process.lambda);
  return process.scale() * std::pow(-std::log(rng.uniform()), 1.0 / process.shape);
}

SimConfig make_sim_config(const Model& model, const ArrivalProcess& arrival, std::uint64_t events,
                          std::uint64_t seed) {
  return SimConfig{model.cluster_size, model.rates, model.thresholds, model.traffic, model.capacity_mbps,
                   arrival, events, seed};
}

int rate_after_arrival(int level, int users_before, const ThresholdPolicy& thresholds) {
  if (level == 0) return 1;
  if (level < 1 || level > thresholds.levels()) throw InvalidParameter("level out of range");
  if (users_before > thresholds.forward(level)) throw InvalidParameter("users above the level's forward threshold");
  if (level < thresholds.levels() && users_before == thresholds.forward(level)) return level + 1;
  return level;
}

int rate_after_departure(int level, int users_after, const ThresholdPolicy& thresholds) {
  if (users_after < 0) throw InvalidParameter("negative user count");
  if (level < 1 || level > thresholds.levels()) throw InvalidParameter("level out of range");
  if (users_after == thresholds.reverse(level - 1)) return level - 1;
  return level;
}

double reconfig_arrival_probability(double rate, double window, int n) {
  if (!(rate > 0.0) || !(window > 0.0) || n < 0) throw InvalidParameter("Poisson window needs positive inputs");
  const double m = rate * window;
  return std::exp(n * std::log(m) - m - std::lgamma(n + 1.0));
}

namespace {

enum class EventKind : std::uint8_t { kArrival, kDeparture, kDowngrade };

struct Event {
  double time;
  std::uint64_t seq;
  int rru;
  EventKind kind;
  std::uint64_t tag;  // downgrade timer generation

  bool operator>(const Event& o) const { return time != o.time ? time > o.time : seq > o.seq; }
};

struct Rru {
  int users = 0;
  int level = 0;
  bool downgrade_pending = false;
  bool retrying = false;  // previous upgrade request was blocked, user count unchanged since
  std::uint64_t timer_generation = 0;
};

struct Batch {
  double arrivals = 0, upgrades = 0, blocked_rru = 0, blocked_fha = 0, first_upgrades = 0, first_blocked = 0;
};

// Batch-means standard error of the ratio sum(num) / sum(den).
double ratio_se(const std::vector<Batch>& batches, double Batch::*num, double Batch::*den) {
  const double b = static_cast<double>(batches.size());
  double sn = 0.0, sd = 0.0;
  for (const Batch& x : batches) {
    sn += x.*num;
    sd += x.*den;
  }
  if (sd <= 0.0 || batches.size() < 2) return 0.0;
  const double p = sn / sd;
  double ss = 0.0;
  for (const Batch& x : batches) {
    const double r = x.*num - p * (x.*den);
    ss += r * r;
  }
  return std::sqrt(ss / (b * (b - 1.0))) / (sd / b);
}

// Two-sided 97.5% Student-t quantiles for 1..30 degrees of freedom.
double t975(int dof) {
  static const double table[] = {12.706, 4.303, 3.182, 2.776, 2.571, 2.447, 2.365, 2.306, 2.262, 2.228,
                                 2.201,  2.179, 2.160, 2.145, 2.131, 2.120, 2.110, 2.101, 2.093, 2.086,
                                 2.080,  2.074, 2.069, 2.064, 2.060, 2.056, 2.052, 2.048, 2.045, 2.042};
  if (dof < 1) return 0.0;
  return dof <= 30 ? table[dof - 1] : 1.96;
}

}  // namespace

SimStats run(const SimConfig& cfg) {
  if (cfg.cluster_size < 1) throw InvalidConfiguration("cluster size must be >= 1");
  if (cfg.events == 0) throw InvalidConfiguration("event budget must be positive");
  if (cfg.batches < 2) throw InvalidConfiguration("at least two batches are required");
  if (cfg.reconfig_latency < 0.0) throw InvalidConfiguration("reconfiguration latency must be >= 0");
  if (!(cfg.capacity_mbps > cfg.rates.rate(1))) throw InvalidConfiguration("link capacity must exceed d_1");
  if (cfg.thresholds.levels() != cfg.rates.size() || cfg.traffic.server_count != cfg.rates.server_count())
    throw InvalidConfiguration("thresholds, rates and server count disagree");

  const int n = cfg.cluster_size;
  const int servers = cfg.traffic.server_count;
  const double mu = cfg.traffic.mu;
  const double tolerance = cfg.capacity_mbps * 1e-9;
  auto rate_of = [&](int level) { return level == 0 ? 0.0 : cfg.rates.rate(level); };

  Philox rng(cfg.seed);
  std::priority_queue<Event, std::vector<Event>, std::greater<>> fel;
  std::uint64_t seq = 0;
  auto schedule = [&](double t, int rru, EventKind kind, std::uint64_t tag = 0) {
    fel.push({t, seq++, rru, kind, tag});
  };

  std::vector<Rru> rrus(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) schedule(sample_interarrival(cfg.arrival, rng), i, EventKind::kArrival);

  const std::uint64_t warmup = static_cast<std::uint64_t>(std::ceil(cfg.events * cfg.warmup_fraction));
  const std::uint64_t total = warmup + cfg.events;
  const std::uint64_t per_batch = std::max<std::uint64_t>(1, cfg.events / static_cast<std::uint64_t>(cfg.batches));
  std::vector<Batch> batches(static_cast<std::size_t>(cfg.batches));

  SimStats s;
  double now = 0.0;
  double aggregate = 0.0;
  double measured_since = 0.0;
  double rate_area = 0.0;
  std::uint64_t processed = 0;

  auto check = [&](const Rru& r) {
    if (aggregate > cfg.capacity_mbps + tolerance) throw std::logic_error("aggregate rate exceeds link capacity");
    if (r.level == 0) {
      if (r.users != 0) throw std::logic_error("an off RRU carries calls");
    } else if (!r.downgrade_pending &&
               (r.users <= cfg.thresholds.reverse(r.level - 1) || r.users > cfg.thresholds.forward(r.level))) {
      throw std::logic_error("RRU left its hysteresis band");
    }
  };

  // Settles pending downgrades: drops levels while the user count is at or below R_{level-1}.
  auto settle = [&](Rru& r) {
    const double before = rate_of(r.level);
    while (r.level > 0 && r.users <= cfg.thresholds.reverse(r.level - 1)) --r.level;
    aggregate += rate_of(r.level) - before;
    r.downgrade_pending = false;
  };

  while (processed < total) {
    const Event e = fel.top();
    fel.pop();
    if (processed >= warmup) rate_area += aggregate * (e.time - now);
    now = e.time;
    Rru& r = rrus[static_cast<std::size_t>(e.rru)];

    if (e.kind == EventKind::kDowngrade) {
      if (r.downgrade_pending && e.tag == r.timer_generation) settle(r);
      check(r);
      continue;
    }

    const bool measuring = processed >= warmup;
    if (processed == warmup) measured_since = now;
    Batch& batch = batches[static_cast<std::size_t>(
        std::min<std::uint64_t>((processed - std::min(processed, warmup)) / per_batch,
                                static_cast<std::uint64_t>(cfg.batches - 1)))];
    ++processed;

    if (e.kind == EventKind::kArrival) {
      schedule(now + sample_interarrival(cfg.arrival, rng), e.rru, EventKind::kArrival);
      if (measuring) {
        ++s.arrivals;
        batch.arrivals += 1;
      }
      if (r.users == servers) {
        if (measuring) {
          ++s.blocked_rru;
          batch.blocked_rru += 1;
        }
      } else {
        int next = r.level;
        if (!r.downgrade_pending) next = rate_after_arrival(r.level, r.users, cfg.thresholds);
        bool admit = true;
        if (next != r.level) {
          const bool first = !r.retrying;
          if (measuring) {
            ++s.upgrade_requests;
            batch.upgrades += 1;
            if (first) {
              ++s.first_upgrade_requests;
              batch.first_upgrades += 1;
            }
          }
          const double after = aggregate - rate_of(r.level) + rate_of(next);
          if (after > cfg.capacity_mbps + tolerance) {
            admit = false;
            r.retrying = true;
            if (measuring) {
              ++s.blocked_fha;
              batch.blocked_fha += 1;
              if (first) {
                ++s.first_blocked_fha;
                batch.first_blocked += 1;
              }
            }
          } else {
            r.retrying = false;
            aggregate = after;
            r.level = next;
          }
        }
        if (admit) {
          ++r.users;
          if (measuring) ++s.accepted;
          schedule(now + rng.exponential(mu), e.rru, EventKind::kDeparture);
          if (r.downgrade_pending && r.users > cfg.thresholds.reverse(r.level - 1)) {
            r.downgrade_pending = false;
            ++r.timer_generation;
          }
        }
      }
    } else {
      r.retrying = false;
      --r.users;
      if (r.downgrade_pending) {
        // Timer already running; the level catches up when it fires.
      } else if (rate_after_departure(r.level, r.users, cfg.thresholds) != r.level) {
        if (cfg.reconfig_latency > 0.0) {
          r.downgrade_pending = true;
          schedule(now + cfg.reconfig_latency, e.rru, EventKind::kDowngrade, ++r.timer_generation);
        } else {
          settle(r);
        }
      }
    }
    if (measuring) ++s.events;
    s.max_aggregate_rate = std::max(s.max_aggregate_rate, aggregate);
    check(r);
  }

  s.simulated_time = now - measured_since;
  s.mean_aggregate_rate = s.simulated_time > 0.0 ? rate_area / s.simulated_time : aggregate;
  const double tq = t975(cfg.batches - 1);
  if (s.upgrade_requests > 0) {
    s.pb_fha = static_cast<double>(s.blocked_fha) / static_cast<double>(s.upgrade_requests);
    s.pb_fha_se = ratio_se(batches, &Batch::blocked_fha, &Batch::upgrades);
    s.pb_fha_ci = tq * s.pb_fha_se;
  }
  if (s.first_upgrade_requests > 0) {
    s.pb_fha_first = static_cast<double>(s.first_blocked_fha) / static_cast<double>(s.first_upgrade_requests);
    s.pb_fha_first_se = ratio_se(batches, &Batch::first_blocked, &Batch::first_upgrades);
  }
  if (s.arrivals > 0) {
    s.pb_rru_call = static_cast<double>(s.blocked_rru) / static_cast<double>(s.arrivals);
    s.pb_fha_call = static_cast<double>(s.blocked_fha) / static_cast<double>(s.arrivals);
    s.pb_rru_se = ratio_se(batches, &Batch::blocked_rru, &Batch::arrivals);
  }
  return s;
}

}  // namespace vrf::sim
