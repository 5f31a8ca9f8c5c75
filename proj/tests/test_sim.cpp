#include <cmath>
#include <cstdio>
#include <stdexcept>

#include "doctest.h"
#include "oracles.hpp"
#include "vrf/aggregator.hpp"
#include "vrf/error.hpp"
#include "vrf/sim.hpp"
#include "vrf/sweep.hpp"

using namespace vrf;
using namespace vrf::sim;

namespace {

Model model_of(int n, int n_d, double a, int gap = 1) {
  ModelConfig c;
  c.cluster_size = n;
  c.n_d = n_d;
  c.a = a;
  c.threshold_gap = gap;
  return resolve(c);
}

SimConfig config_of(int n, int n_d, double a, std::uint64_t events, std::uint64_t seed = 7) {
  const Model m = model_of(n, n_d, a);
  return make_sim_config(m, ArrivalProcess::poisson(m.traffic.lambda), events, seed);
}

}  // namespace

TEST_CASE("Philox4x32-10 known-answer vector") {
  const Philox::Block out = Philox::block({0, 0}, {0, 0, 0, 0});
  CHECK(out[0] == 0x6627e8d5u);
  CHECK(out[1] == 0xe169c58du);
  CHECK(out[2] == 0xbc57ac4cu);
  CHECK(out[3] == 0x9b00dbd8u);

  const Philox::Block ff = Philox::block({0xffffffffu, 0xffffffffu}, {0xffffffffu, 0xffffffffu, 0xffffffffu, 0xffffffffu});
  CHECK(ff[0] == 0x408f276du);
  CHECK(ff[1] == 0x41c83b0eu);
  CHECK(ff[2] == 0xa20bc7c6u);
  CHECK(ff[3] == 0x6d5451fdu);
}

TEST_CASE("Philox streams are reproducible and distinct") {
  Philox a(42), b(42), c(42, 1), d(43);
  int same_c = 0, same_d = 0;
  for (int i = 0; i < 1000; ++i) {
    const std::uint64_t x = a.next_u64();
    CHECK(x == b.next_u64());
    same_c += x == c.next_u64();
    same_d += x == d.next_u64();
  }
  CHECK(same_c == 0);
  CHECK(same_d == 0);

  Philox u(5);
  for (int i = 0; i < 100000; ++i) {
    const double x = u.uniform();
    REQUIRE(x > 0.0);
    REQUIRE(x < 1.0);
  }
}

TEST_CASE("rate after arrival") {
  const RateSet rates({100.0, 200.0, 400.0}, {3, 6, 12});
  const ThresholdPolicy t({3, 6}, {2, 5}, rates);
  CHECK(rate_after_arrival(1, 3, t) == 2);
  CHECK(rate_after_arrival(0, 0, t) == 1);
  CHECK(rate_after_arrival(2, 4, t) == 2);
  CHECK(rate_after_arrival(2, 6, t) == 3);
  CHECK(rate_after_arrival(3, 11, t) == 3);
}

TEST_CASE("rate after departure") {
  const RateSet rates({100.0, 200.0, 400.0}, {3, 6, 12});
  const ThresholdPolicy t({3, 6}, {2, 5}, rates);
  CHECK(rate_after_departure(2, 2, t) == 1);
  CHECK(rate_after_departure(1, 0, t) == 0);
  CHECK(rate_after_departure(3, 6, t) == 3);
  CHECK(rate_after_departure(3, 5, t) == 2);
  CHECK(rate_after_departure(2, 3, t) == 2);
}

TEST_CASE("arrival process parsing") {
  CHECK(parse_arrival("poisson", 2.0).kind == ArrivalProcess::Kind::kPoisson);
  const ArrivalProcess w = parse_arrival("weibull:1.5", 2.0);
  CHECK(w.kind == ArrivalProcess::Kind::kWeibull);
  CHECK(w.shape == 1.5);
  CHECK(w.scale() == 0.5);
  CHECK(w.label() == "weibull:1.5");
  CHECK(ArrivalProcess::poisson(4.0).mean() == doctest::Approx(0.25));
  CHECK(ArrivalProcess::weibull(0.9, 1.0).mean() == doctest::Approx(1.0522).epsilon(1e-4));
  for (const char* bad : {"", "weibull", "weibull:", "weibull:0", "weibull:-1", "weibull:x", "weibull:1.5x", "erlang"})
    CHECK_THROWS_AS(parse_arrival(bad, 1.0), InvalidConfiguration);
}

TEST_CASE("Weibull with shape 1 is exponential") {
  Philox rng(11);
  const ArrivalProcess w = ArrivalProcess::weibull(1.0, 2.0);
  std::vector<double> xs(100000);
  for (double& x : xs) x = sample_interarrival(w, rng);
  const double d = oracle::ks_statistic(xs, [](double x) { return 1.0 - std::exp(-2.0 * x); });
  CHECK(d < 1.628 / std::sqrt(100000.0));
}

TEST_CASE("Weibull moments") {
  Philox rng(12);
  const int n = 1000000;
  double s = 0.0;
  const ArrivalProcess a = ArrivalProcess::weibull(0.9, 1.0);
  for (int i = 0; i < n; ++i) s += sample_interarrival(a, rng);
  CHECK(std::fabs(s / n - 1.0522) / 1.0522 < 0.01);

  const ArrivalProcess b = ArrivalProcess::weibull(1.5, 1.0);
  double m1 = 0.0, m2 = 0.0;
  for (int i = 0; i < n; ++i) {
    const double x = sample_interarrival(b, rng);
    m1 += x;
    m2 += x * x;
  }
  m1 /= n;
  const double var = m2 / n - m1 * m1;
  const double want = std::tgamma(1.0 + 2.0 / 1.5) - std::pow(std::tgamma(1.0 + 1.0 / 1.5), 2);
  CHECK(std::fabs(var - want) / want < 0.02);
}

TEST_CASE("Poisson arrivals in a reconfiguration window") {
  const double per_s = 10.0 / 60.0;
  auto near = [](double got, double want, double tol) { return std::fabs(got - want) <= tol; };
  CHECK(near(reconfig_arrival_probability(per_s, 0.5, 1), 0.0767, 5e-5));
  CHECK(near(reconfig_arrival_probability(per_s, 0.5, 2), 0.0032, 5e-5));
  CHECK(near(reconfig_arrival_probability(per_s, 0.5, 3), 8.8739e-5, 5e-10));
  CHECK(near(reconfig_arrival_probability(per_s, 5.0, 2), 0.1509, 5e-5));
  CHECK(near(reconfig_arrival_probability(per_s, 5.0, 3), 0.0419, 5e-5));
  CHECK(near(reconfig_arrival_probability(per_s, 5.0, 4), 0.0087, 5e-5));
  double sum = 0.0;
  for (int n = 0; n < 60; ++n) sum += reconfig_arrival_probability(3.0, 2.0, n);
  CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("counters are conserved and runs reproduce") {
  for (int n_d = 1; n_d <= 4; ++n_d) {
    const SimConfig cfg = config_of(16, n_d, 0.3, 100000, 3);
    const SimStats s = run(cfg);
    CHECK(s.arrivals == s.accepted + s.blocked_rru + s.blocked_fha);
    CHECK(s.events >= 100000);
    CHECK(s.blocked_fha <= s.upgrade_requests);
    CHECK(s.first_upgrade_requests <= s.upgrade_requests);
    CHECK(s.max_aggregate_rate <= cfg.capacity_mbps + 1e-9);
    CHECK(s == run(cfg));
  }
  SimConfig other = config_of(16, 3, 0.3, 100000, 4);
  CHECK_FALSE(run(other) == run(config_of(16, 3, 0.3, 100000, 3)));
}

TEST_CASE("a cluster that fits the link never blocks on it") {
  const SimStats s = run(config_of(8, 1, 0.2, 1000000));
  CHECK(s.blocked_fha == 0);
  CHECK(s.pb_fha == 0.0);
  CHECK(run(config_of(9, 1, 0.2, 1000000)).blocked_fha > 0);
}

TEST_CASE("single-rate RRU blocks like Erlang-B") {
  const RateSet rates({100.0}, {5});
  TrafficSpec t;
  t.lambda = 2.5;
  t.mu = 1.0;
  t.server_count = 5;
  t.a = 0.5;
  const SimConfig cfg{1, rates, ThresholdPolicy({}, {}, rates), t, 1e6, ArrivalProcess::poisson(2.5), 1000000, 9};
  const SimStats s = run(cfg);
  const double want = oracle::erlang_b(5, 2.5);
  CHECK(want == doctest::Approx(0.0697).epsilon(1e-3));
  CHECK(std::fabs(s.pb_rru_call - want) <= 3.0 * s.pb_rru_se);
  CHECK(s.blocked_fha == 0);
}

TEST_CASE("simulation agrees with the analytic model at n_d = 2, N = 12") {
  const Model m = model_of(12, 2, 0.3);
  const double analytic = aggregator::blocking(aggregator::make_spec(m)).total;
  const SimStats s = run(make_sim_config(m, ArrivalProcess::poisson(m.traffic.lambda), 1000000, 21));
  INFO("analytic " << analytic << " simulated " << s.pb_fha << " se " << s.pb_fha_se);
  CHECK(sweep::agrees(analytic, s.pb_fha, s.pb_fha_se));
}

TEST_CASE("single-rate simulation matches the analytic knee") {
  const Model m = model_of(9, 1, 0.2);
  const double analytic = aggregator::blocking(aggregator::make_spec(m)).total;
  const SimStats s = run(make_sim_config(m, ArrivalProcess::poisson(m.traffic.lambda), 1000000, 5));
  INFO("analytic " << analytic << " simulated " << s.pb_fha << " se " << s.pb_fha_se);
  CHECK(std::fabs(analytic - s.pb_fha) <= 3.0 * s.pb_fha_se);
}

TEST_CASE("Weibull shape orders the blocking estimate") {
  const Model m = model_of(14, 3, 0.3);
  const double lambda = m.traffic.lambda;
  const double calm = run(make_sim_config(m, ArrivalProcess::weibull(1.5, lambda), 1000000, 1)).pb_fha;
  const double poisson = run(make_sim_config(m, ArrivalProcess::poisson(lambda), 1000000, 1)).pb_fha;
  const double bursty = run(make_sim_config(m, ArrivalProcess::weibull(0.9, lambda), 1000000, 1)).pb_fha;
  INFO("k=1.5 " << calm << " poisson " << poisson << " k=0.9 " << bursty);
  CHECK(bursty < poisson);
  CHECK(poisson < calm);
}

TEST_CASE("delayed downgrades hold the link longer") {
  SimConfig cfg = config_of(14, 3, 0.3, 300000, 2);
  const SimStats base = run(cfg);
  cfg.reconfig_latency = 2.0;
  const SimStats slow = run(cfg);
  CHECK(slow.arrivals == slow.accepted + slow.blocked_rru + slow.blocked_fha);
  CHECK(slow.mean_aggregate_rate > base.mean_aggregate_rate);
  CHECK(slow.pb_fha > base.pb_fha);
  CHECK(slow.max_aggregate_rate <= cfg.capacity_mbps + 1e-9);
}
