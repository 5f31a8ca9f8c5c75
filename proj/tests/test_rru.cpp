#include <cmath>
#include <random>

#include "doctest.h"
#include "oracles.hpp"
#include "vrf/error.hpp"
#include "vrf/rru.hpp"

using namespace vrf;
using rru::RruChainSpec;

namespace {

TrafficSpec traffic(double lambda, double mu, int servers) {
  TrafficSpec t;
  t.lambda = lambda;
  t.mu = mu;
  t.server_count = servers;
  t.a = lambda / (servers * mu);
  return t;
}

RruChainSpec custom(std::vector<int> caps, std::vector<int> f, std::vector<int> r, double lambda, double mu = 1.0) {
  std::vector<double> d;
  for (std::size_t i = 0; i < caps.size(); ++i) d.push_back(100.0 * static_cast<double>(i + 1));
  const RateSet rates(d, caps);
  return RruChainSpec(rates, ThresholdPolicy(std::move(f), std::move(r), rates), traffic(lambda, mu, caps.back()));
}

RruChainSpec table_spec(int m, int gap, double rho) {
  const RateSet rates = select_rates(default_profile(), m);
  return RruChainSpec(rates, default_thresholds(rates, gap), traffic(rho, 1.0, rates.server_count()));
}

std::map<std::pair<int, int>, double> global_oracle(const RruChainSpec& s) {
  return oracle::rru_global(s.thresholds.forward_thresholds(), s.thresholds.reverse_thresholds(),
                            s.traffic.server_count, s.traffic.lambda, s.traffic.mu);
}

// Oracle conditional distribution over partition l, in increasing user count.
std::vector<double> oracle_partition(const RruChainSpec& s, int l) {
  const auto g = global_oracle(s);
  std::vector<double> out;
  double sum = 0.0;
  for (const auto& [key, p] : g)
    if (key.second == l || (l == 1 && key.second == 0)) {
      out.push_back(p);
      sum += p;
    }
  for (double& x : out) x /= sum;
  return out;
}

}  // namespace

TEST_CASE("single-rate RRU chain is the M/M/K/K birth-death chain") {
  const auto spec = custom({3}, {}, {}, 2.0, 1.0);
  const rru::GlobalRruChain chain(spec);
  REQUIRE(chain.states().size() == 4);
  const auto& q = chain.generator();
  for (int u = 0; u < 3; ++u) {
    const std::size_t i = chain.index(u, u == 0 ? 0 : 1);
    const std::size_t j = chain.index(u + 1, 1);
    CHECK(q(i, j) == 2.0);
    CHECK(q(j, i) == doctest::Approx(u + 1.0));
  }
}

TEST_CASE("threshold crossings connect the right partitions") {
  const auto spec = custom({3, 6}, {3}, {2}, 1.5);
  const rru::GlobalRruChain chain(spec);
  const auto& q = chain.generator();
  CHECK(q(chain.index(3, 1), chain.index(4, 2)) == 1.5);
  CHECK(q(chain.index(3, 2), chain.index(2, 1)) == doctest::Approx(3.0));
  CHECK(q(chain.index(3, 1), chain.index(2, 1)) == doctest::Approx(3.0));
  CHECK(q(chain.index(0, 0), chain.index(1, 1)) == 1.5);
  CHECK(q(chain.index(1, 1), chain.index(0, 0)) == 1.0);
  CHECK_THROWS_AS(chain.index(2, 2), InvalidParameter);
  CHECK_THROWS_AS(chain.index(4, 1), InvalidParameter);
}

TEST_CASE("partitions span R_{l-1}+1..F_l and every move changes the user count by one") {
  const auto spec = table_spec(3, 1, 10.0);
  const rru::GlobalRruChain chain(spec);
  const auto& states = chain.states();
  for (const auto& s : states) {
    if (s.level == 0) {
      CHECK(s.users == 0);
      continue;
    }
    CHECK(s.users > spec.thresholds.reverse(s.level - 1));
    CHECK(s.users <= spec.thresholds.forward(s.level));
  }
  const auto& q = chain.generator();
  for (std::size_t i = 0; i < states.size(); ++i)
    for (std::size_t j = 0; j < states.size(); ++j)
      if (i != j && q(i, j) > 0.0) CHECK(std::abs(states[i].users - states[j].users) == 1);
  CHECK(chain.partition(2).size() == static_cast<std::size_t>(25 - 11));
  CHECK(chain.partition(1).size() == 13);
}

TEST_CASE("closed-form coefficients on hand-checkable cases") {
  const auto spec = custom({5, 10}, {5}, {3}, 1.0);
  const auto c1 = rru::partition_coefficients(spec, 1);
  CHECK(c1.values[0] == 1.0);
  CHECK(c1.values[2] == doctest::Approx(0.5).epsilon(1e-15));
  for (int m = 2; m <= 4; ++m)
    for (int gap = 1; gap <= 4; ++gap) {
      const auto s = table_spec(m, gap, 7.0);
      for (int l = 2; l <= m; ++l) CHECK(rru::partition_coefficients(s, l).values[0] == 1.0);
    }
  CHECK_THROWS_AS(rru::partition_coefficients(spec, 0), InvalidParameter);
  CHECK_THROWS_AS(rru::partition_coefficients(spec, 3), InvalidParameter);
}

TEST_CASE("coefficients match global-chain ratios on the small two-rate queue") {
  const auto spec = custom({3, 6}, {3}, {2}, 1.5);
  for (int l = 1; l <= 2; ++l) {
    const auto c = rru::partition_coefficients(spec, l);
    const auto ref = oracle_partition(spec, l);
    REQUIRE(c.values.size() == ref.size());
    for (std::size_t i = 0; i < ref.size(); ++i) CHECK(std::fabs(c.values[i] - ref[i] / ref[0]) <= 1e-9 * c.values[i]);
  }
}

TEST_CASE("single-rate partition is the Erlang occupancy") {
  const auto d = rru::partition_distribution(custom({3}, {}, {}, 1.0), 1);
  const double want[] = {6.0 / 16, 6.0 / 16, 3.0 / 16, 1.0 / 16};
  for (int i = 0; i < 4; ++i) CHECK(d.at(i) == doctest::Approx(want[i]).epsilon(1e-14));
}

TEST_CASE("partition distributions match the renormalized global chain") {
  const auto spec = custom({3, 6}, {3}, {2}, 1.5);
  for (int l = 1; l <= 2; ++l) {
    const auto d = rru::partition_distribution(spec, l);
    const auto ref = oracle_partition(spec, l);
    double s = 0.0;
    for (std::size_t i = 0; i < ref.size(); ++i) {
      CHECK(std::fabs(d.probabilities[i] - ref[i]) < 1e-9);
      s += d.probabilities[i];
    }
    CHECK(std::fabs(s - 1.0) < 1e-10);
  }
}

TEST_CASE("closed form agrees with the fold-back oracle on random specs") {
  std::mt19937_64 rng(31337);
  std::uniform_real_distribution<double> rho_dist(0.1, 40.0);
  double worst = 0.0;
  for (int trial = 0; trial < 60; ++trial) {
    const int m = 2 + static_cast<int>(rng() % 3);
    const int gap = 1 + static_cast<int>(rng() % 4);
    const auto spec = table_spec(m, gap, rho_dist(rng));
    for (int l = 1; l <= m; ++l) {
      const auto closed = rru::partition_distribution(spec, l);
      CHECK_FALSE(closed.from_oracle);
      const auto fold = rru::oracle_partition_distribution(spec, l);
      for (std::size_t i = 0; i < fold.probabilities.size(); ++i)
        worst = std::max(worst, std::fabs(closed.probabilities[i] - fold.probabilities[i]) / fold.probabilities[i]);
    }
  }
  CHECK(worst < 1e-9);
}

TEST_CASE("overlapping threshold bands fall back to the oracle") {
  const auto spec = custom({3, 6, 12}, {3, 6}, {2, 3}, 4.0);
  CHECK_FALSE(rru::closed_form_applies(spec, 2));
  const auto d = rru::partition_distribution(spec, 2);
  CHECK(d.from_oracle);
  const auto ref = oracle_partition(spec, 2);
  for (std::size_t i = 0; i < ref.size(); ++i) CHECK(std::fabs(d.probabilities[i] - ref[i]) < 1e-12);
}

TEST_CASE("level transition rates") {
  const auto spec = custom({3, 6}, {3}, {2}, 1.5);
  const auto r = rru::transition_rates(spec);
  CHECK(r.up[0] == 1.5);
  CHECK(r.up[1] < 1.5);
  for (double x : r.up) CHECK(x > 0.0);
  for (double x : r.down) CHECK(x > 0.0);

  // Two-rate queue: level masses of the birth-death chain equal the global chain's.
  const auto g = global_oracle(spec);
  const auto lv = rru::rate_level_distribution(r);
  double off = 0.0, s1 = 0.0, s2 = 0.0;
  for (const auto& [key, p] : g) (key.second == 0 ? off : key.second == 1 ? s1 : s2) += p;
  CHECK(std::fabs(lv[0] - off) < 1e-9);
  CHECK(std::fabs(lv[1] - s1) < 1e-9);
  CHECK(std::fabs(lv[2] - s2) < 1e-9);
}

TEST_CASE("single-rate idle probability") {
  const auto spec = custom({5}, {}, {}, 2.5);
  const auto r = rru::transition_rates(spec);
  const auto lv = rru::rate_level_distribution(r);
  CHECK(lv[0] == doctest::Approx(r.down[0] / (2.5 + r.down[0])).epsilon(1e-14));
  const auto g = global_oracle(spec);
  CHECK(std::fabs(lv[0] - g.at({0, 0})) < 1e-9);
}

TEST_CASE("decomposition is exact: global = level mass x conditional") {
  for (int m = 1; m <= 4; ++m)
    for (int gap = 1; gap <= 4; ++gap)
      for (double rho : {0.3, 4.0, 15.0, 35.0}) {
        const auto spec = table_spec(m, gap, rho);
        const auto g = global_oracle(spec);
        const auto lv = rru::rate_level_distribution(rru::transition_rates(spec));
        for (int l = 1; l <= m; ++l) {
          const auto d = rru::partition_distribution(spec, l);
          const double mass = l == 1 ? lv[0] + lv[1] : lv[static_cast<std::size_t>(l)];
          for (int u = d.first_user; u <= spec.last_user(l); ++u) {
            const int level = (l == 1 && u == 0) ? 0 : l;
            CHECK(std::fabs(g.at({u, level}) - mass * d.at(u)) < 1e-8);
          }
        }
      }
}

TEST_CASE("rate-level probabilities are positive and normalized") {
  const auto lv = rru::rate_level_distribution(rru::transition_rates(table_spec(4, 2, 12.0)));
  double s = 0.0;
  for (std::size_t i = 0; i < lv.size(); ++i) {
    CHECK(lv[i] > 0.0);
    s += lv[i];
  }
  CHECK(std::fabs(s - 1.0) < 1e-12);
}

TEST_CASE("single-rate RRU blocking is Erlang-B") {
  for (int k : {1, 2, 5, 10, 50})
    for (double rho : {0.1, 1.0, 2.5, 10.0, 40.0}) {
      const auto spec = custom({k}, {}, {}, rho);
      const double b = oracle::erlang_b(k, rho);
      CHECK(std::fabs(rru::server_blocking(spec) - b) <= 1e-12 * b);
    }
}

TEST_CASE("probability of sitting at the forward threshold grows with load") {
  for (int gap = 1; gap <= 4; ++gap) {
    std::vector<double> prev(3, 0.0);
    for (double rho = 0.5; rho <= 40.0; rho *= 1.3) {
      const auto spec = table_spec(4, gap, rho);
      for (int l = 1; l <= 3; ++l) {
        const double p = rru::partition_distribution(spec, l).at(spec.thresholds.forward(l));
        CHECK(p > prev[static_cast<std::size_t>(l - 1)]);
        prev[static_cast<std::size_t>(l - 1)] = p;
      }
    }
  }
}
