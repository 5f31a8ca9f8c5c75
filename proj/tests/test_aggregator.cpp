#include <cmath>
#include <limits>

#include "doctest.h"
#include "oracles.hpp"
#include "vrf/aggregator.hpp"
#include "vrf/error.hpp"

using namespace vrf;
using namespace vrf::aggregator;

namespace {

rru::RruRates rates_of(std::vector<double> up, std::vector<double> down) {
  rru::RruRates r;
  r.up = std::move(up);
  r.down = std::move(down);
  return r;
}

// The two-rate lattice with link capacity 6 d_1 and d_2 = 2 d_1.
AggregatorSpec lattice(int n, CapacityConvention c = CapacityConvention::kTrueN) {
  return AggregatorSpec(n, RateSet({100.0, 200.0}, {3, 6}), 600.0, rates_of({1.0, 0.6}, {0.8, 1.3}), c);
}

AggregatorSpec table_spec(int n, int n_d, double a, double capacity = 10000.0) {
  ModelConfig c;
  c.cluster_size = n;
  c.n_d = n_d;
  c.a = a;
  c.fha_capacity_mbps = capacity;
  return make_spec(resolve(c));
}

oracle::AggregatorChain chain_of(const AggregatorSpec& s) {
  return oracle::aggregator_chain(s.effective_rrus(), s.rates.rates(), s.capacity_mbps, s.rru_rates.up,
                                  s.rru_rates.down);
}

}  // namespace

TEST_CASE("max_rru is floor(B_c / d_1)") {
  CHECK(max_rru(10000.0, 1228.8) == 8);
  CHECK(max_rru(10000.0, 614.4) == 16);
  CHECK(max_rru(6 * 76.8, 76.8) == 6);
  CHECK(max_rru(std::numeric_limits<double>::infinity(), 1.0) == std::numeric_limits<int>::max());
  CHECK_THROWS_AS(max_rru(0.0, 1.0), InvalidParameter);
}

TEST_CASE("state enumeration") {
  const auto s = enumerate_states(lattice(6));
  CHECK(s.size() == 16);
  for (std::size_t i = 0; i < s.size(); ++i) {
    CHECK(s.active(i) <= 6);
    CHECK(s.load(i) <= 600.0);
    if (i > 0) CHECK(s.state(i - 1) < s.state(i));
    CHECK(s.find(s.state(i)) == i);
  }
  CHECK_FALSE(s.find({0, 4}).has_value());

  const AggregatorSpec one(5, RateSet({100.0}, {50}), 500.0, rates_of({1.0}, {2.0}));
  CHECK(enumerate_states(one).size() == 6);
}

TEST_CASE("state cap raises a capacity error") {
  AggregatorSpec s = table_spec(20, 4, 0.2);
  s.state_cap = 100;
  CHECK_THROWS_AS(enumerate_states(s), CapacityError);
}

TEST_CASE("transition rates follow the five move types") {
  const AggregatorSpec s = lattice(6);
  CHECK(transition_rate({2, 1}, {1, 2}, s) == doctest::Approx(2 * 0.6));
  CHECK(transition_rate({0, 0}, {1, 0}, s) == doctest::Approx(6 * 1.0));
  CHECK(transition_rate({1, 0}, {0, 0}, s) == doctest::Approx(0.8));
  CHECK(transition_rate({1, 2}, {2, 1}, s) == doctest::Approx(2 * 1.3));
  CHECK(transition_rate({2, 1}, {3, 1}, s) == doctest::Approx(3 * 1.0));
  CHECK(transition_rate({2, 2}, {1, 3}, s) == 0.0);  // would need 700 Mbit/s
  CHECK(transition_rate({2, 1}, {0, 2}, s) == 0.0);
  CHECK(transition_rate({2, 1}, {2, 1}, s) == 0.0);
}

TEST_CASE("generator matches the hand-built chain") {
  const AggregatorSpec s = lattice(6);
  const auto space = enumerate_states(s);
  const auto q = generator(s, space);
  const auto ref = chain_of(s);
  REQUIRE(ref.states.size() == space.size());
  for (std::size_t i = 0; i < space.size(); ++i)
    for (std::size_t j = 0; j < space.size(); ++j) CHECK(q(i, j) == doctest::Approx(ref.q[i][j]).epsilon(1e-14));
}

TEST_CASE("single-rate product form is the Engset form") {
  const AggregatorSpec s(7, RateSet({100.0}, {50}), 1e6, rates_of({0.7}, {1.9}));
  const auto space = enumerate_states(s);
  const auto p = product_form(s, space);
  double z = 0.0;
  for (int k = 0; k <= 7; ++k) z += std::tgamma(8.0) / (std::tgamma(k + 1.0) * std::tgamma(8.0 - k)) * std::pow(0.7 / 1.9, k);
  for (std::size_t i = 0; i < space.size(); ++i) {
    const int k = space.k(i, 1);
    const double want = std::tgamma(8.0) / (std::tgamma(k + 1.0) * std::tgamma(8.0 - k)) * std::pow(0.7 / 1.9, k) / z;
    CHECK(std::fabs(p[i] - want) < 1e-12);
  }
  CHECK(p[0] == doctest::Approx(1.0 / z).epsilon(1e-13));
}

TEST_CASE("product form equals the direct solve of the chain") {
  const AggregatorSpec s = lattice(6);
  const auto space = enumerate_states(s);
  const auto p = product_form(s, space);
  const auto ref = chain_of(s);
  for (std::size_t i = 0; i < space.size(); ++i) CHECK(std::fabs(p[i] - ref.pi[i]) < 1e-10);
}

TEST_CASE("product form equals direct solve for small clusters") {
  for (int m = 1; m <= 3; ++m)
    for (int n = 1; n <= 8; ++n)
      for (double a : {0.2, 0.5})
        for (double cap : {1500.0, 3000.0, 10000.0}) {
          const AggregatorSpec s = table_spec(n, m, a, cap);
          const auto space = enumerate_states(s);
          const auto p = product_form(s, space);
          const auto d = direct_solve(s, space);
          const auto ref = chain_of(s);
          double sum = 0.0;
          for (std::size_t i = 0; i < space.size(); ++i) {
            CHECK(std::fabs(p[i] - d[i]) < 1e-8);
            CHECK(std::fabs(p[i] - ref.pi[i]) < 1e-8);
            sum += p[i];
          }
          CHECK(std::fabs(sum - 1.0) < 1e-10);
        }
}

TEST_CASE("detailed balance") {
  for (int m = 1; m <= 3; ++m)
    for (int n = 1; n <= 6; ++n) CHECK(detailed_balance_check(table_spec(n, m, 0.3, 2500.0)) < 1e-10);
  CHECK(detailed_balance_check(AggregatorSpec(6, RateSet({100.0}, {50}), 350.0, rates_of({0.7}, {1.9}))) < 1e-14);

  const AggregatorSpec s = lattice(6);
  const auto space = enumerate_states(s);
  const auto p = product_form(s, space);
  AggregatorSpec perturbed = s;
  perturbed.rru_rates.down[1] *= 1.01;
  CHECK(detailed_balance_check(perturbed, space, p) > 1e-6);
}

TEST_CASE("blocking: no capacity pressure means no blocking") {
  const AggregatorSpec one(4, RateSet({100.0}, {50}), 400.0, rates_of({1.0}, {2.0}));
  CHECK(blocking(one).total == 0.0);
  for (int n = 1; n <= 8; ++n) CHECK(blocking(table_spec(n, 1, 0.2)).total == 0.0);
}

TEST_CASE("blocking equals the blocked-flow share counted on the direct chain") {
  for (int n = 2; n <= 8; ++n) {
    const AggregatorSpec s = lattice(n);
    const auto ref = chain_of(s);
    const double want = oracle::aggregator_blocking(ref, n, s.rates.rates(), s.capacity_mbps, s.rru_rates.up);
    const auto r = blocking(s);
    CHECK(std::fabs(r.total - want) < 1e-9);
  }
}

TEST_CASE("blocking report invariants") {
  for (int n_d = 1; n_d <= 4; ++n_d)
    for (int n : {5, 9, 14, 20}) {
      const auto r = blocking(table_spec(n, n_d, 0.3));
      double s = 0.0, offered = 0.0;
      for (double f : r.offered_flow) offered += f;
      for (std::size_t m = 0; m < r.per_rate.size(); ++m) {
        CHECK(r.per_rate[m] >= 0.0);
        CHECK(r.per_rate[m] <= 1.0);
        CHECK(r.per_rate[m] <= r.offered_flow[m] / offered + 1e-15);
        s += r.per_rate[m];
      }
      CHECK(r.total == doctest::Approx(s).epsilon(1e-12));
      CHECK(r.total <= 1.0);
      CHECK(r.n_rru_effective == n);
    }
}

TEST_CASE("blocking is non-decreasing in cluster size and load") {
  for (int n_d = 1; n_d <= 4; ++n_d) {
    std::vector<double> prev_a(19, 0.0);
    for (double a : {0.1, 0.2, 0.3, 0.5}) {
      double prev_n = 0.0;
      for (int n = 2; n <= 20; ++n) {
        const double pb = blocking(table_spec(n, n_d, a)).total;
        CHECK(pb >= prev_n - 1e-12);
        CHECK(pb >= prev_a[static_cast<std::size_t>(n - 2)] - 1e-12);
        prev_n = pb;
        prev_a[static_cast<std::size_t>(n - 2)] = pb;
      }
    }
  }
}

TEST_CASE("an unbounded link decouples the RRUs") {
  const double inf = std::numeric_limits<double>::infinity();
  for (int n_d = 1; n_d <= 3; ++n_d) {
    ModelConfig c;
    c.cluster_size = 4;
    c.n_d = n_d;
    c.a = 0.4;
    const Model model = resolve(c);
    const rru::RruChainSpec rspec(model.rates, model.thresholds, model.traffic);
    const auto rates = rru::transition_rates(rspec);
    const AggregatorSpec s(4, model.rates, inf, rates);
    const auto space = enumerate_states(s);
    const auto p = product_form(s, space);
    CHECK(blocking(s, space, p).total == 0.0);
    const auto marg = rate_level_marginal(s, space, p);
    const auto lv = rru::rate_level_distribution(rates);
    for (std::size_t l = 0; l < marg.size(); ++l) CHECK(std::fabs(marg[l] - lv[l]) < 1e-9);
  }
}

TEST_CASE("max-RRU convention is internally consistent") {
  const AggregatorSpec s = table_spec(12, 1, 0.2);
  AggregatorSpec capped = s;
  capped.convention = CapacityConvention::kMaxRru;
  CHECK(capped.effective_rrus() == 8);
  const auto space = enumerate_states(capped);
  const auto p = product_form(capped, space);
  const auto d = direct_solve(capped, space);
  for (std::size_t i = 0; i < space.size(); ++i) CHECK(std::fabs(p[i] - d[i]) < 1e-10);
  const auto r = blocking(capped, space, p);
  CHECK(r.n_rru_effective == 8);
  CHECK(r.total == 0.0);
  CHECK(blocking(s).total > 0.99);
}
