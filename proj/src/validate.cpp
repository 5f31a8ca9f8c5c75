#include "vrf/validate.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "json.hpp"
#include "vrf/aggregator.hpp"
#include "vrf/ctmc.hpp"
#include "vrf/philox.hpp"
#include "vrf/rru.hpp"
#include "vrf/sim.hpp"
#include "vrf/sweep.hpp"

namespace vrf::validate {

bool Report::passed() const {
  return std::all_of(suites.begin(), suites.end(), [](const SuiteResult& s) { return s.passed; });
}

std::string Report::to_json() const {
  nlohmann::json j;
  j["passed"] = passed();
  j["suites"] = nlohmann::json::array();
  for (const SuiteResult& s : suites)
    j["suites"].push_back(
        {{"name", s.name}, {"passed", s.passed}, {"metric", s.metric}, {"threshold", s.threshold}, {"detail", s.detail}});
  return j.dump(2);
}

namespace {

SuiteResult finish(std::string name, double metric, double threshold, std::string detail = {}) {
  return {std::move(name), metric < threshold, metric, threshold, std::move(detail)};
}

rru::RruChainSpec rru_spec(int n_d, int gap, double rho) {
  const RateSet rates = select_rates(default_profile(), n_d);
  TrafficSpec t;
  t.mu = 1.0;
  t.lambda = rho;
  t.server_count = rates.server_count();
  t.a = rho / t.server_count;
  return rru::RruChainSpec(rates, default_thresholds(rates, gap), t);
}

}  // namespace

SuiteResult steady_state_suite(std::uint64_t seed) {
  Philox rng(seed, 1);
  double worst = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t n = 3 + rng.next_u32() % 28;
    ctmc::Matrix rates(n, n);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j)
        if (i != j && rng.uniform() < 0.5) rates(i, j) = 0.1 + 2.0 * rng.uniform();
    for (std::size_t i = 0; i < n; ++i) rates(i, (i + 1) % n) += 0.5;  // a cycle keeps it irreducible
    const ctmc::RateMatrix q = ctmc::RateMatrix::from_rates(rates);
    const ctmc::Distribution pi = ctmc::steady_state(q);

    double zmax = 0.0;
    for (std::size_t i = 0; i < n; ++i) zmax = std::max(zmax, -q(i, i));
    const ctmc::Matrix p = ctmc::uniformize(q, 2.0 * zmax);
    std::vector<double> x(n, 1.0 / static_cast<double>(n)), y(n);
    for (int it = 0; it < 20000; ++it) {
      kernels::vec_mat(x, p.view(), y);
      double diff = 0.0;
      for (std::size_t i = 0; i < n; ++i) diff = std::max(diff, std::fabs(y[i] - x[i]));
      x.swap(y);
      if (diff < 1e-15) break;
    }
    for (std::size_t i = 0; i < n; ++i) worst = std::max(worst, std::fabs(pi[i] - x[i]));
    worst = std::max(worst, ctmc::balance_residual(q, pi.values()));
  }
  return finish("ctmc.steady_state_vs_power_iteration", worst, 1e-10);
}

SuiteResult coefficient_suite(int specs, std::uint64_t seed) {
  Philox rng(seed, 2);
  double worst = 0.0;
  std::string where;
  for (int s = 0; s < specs; ++s) {
    const int m = 2 + static_cast<int>(rng.next_u32() % 3);
    const int gap = 1 + static_cast<int>(rng.next_u32() % 4);
    const double rho = 0.1 + 39.9 * rng.uniform();
    const rru::RruChainSpec spec = rru_spec(m, gap, rho);
    for (int l = 1; l <= m; ++l) {
      const auto closed = rru::partition_distribution(spec, l);
      const auto oracle = rru::oracle_partition_distribution(spec, l);
      for (std::size_t i = 0; i < closed.probabilities.size(); ++i) {
        const double rel = std::fabs(closed.probabilities[i] - oracle.probabilities[i]) / oracle.probabilities[i];
        if (rel > worst) {
          worst = rel;
          std::ostringstream os;
          os << "M=" << m << " gap=" << gap << " rho=" << rho << " l=" << l << " i=" << closed.first_user + static_cast<int>(i);
          where = os.str();
        }
      }
    }
  }
  return finish("rru.closed_form_vs_fold_back", worst, 1e-9, where);
}

SuiteResult decomposition_suite() {
  double worst = 0.0;
  for (int m = 1; m <= 4; ++m)
    for (int gap = 1; gap <= 4; ++gap)
      for (double rho : {0.5, 5.0, 20.0, 40.0}) {
        const rru::RruChainSpec spec = rru_spec(m, gap, rho);
        const rru::GlobalRruChain chain(spec);
        const ctmc::Distribution pi = ctmc::steady_state(chain.generator());
        const ctmc::Distribution levels = rru::rate_level_distribution(rru::transition_rates(spec));
        for (int l = 1; l <= m; ++l) {
          const auto cond = rru::partition_distribution(spec, l);
          const double mass = l == 1 ? levels[0] + levels[1] : levels[static_cast<std::size_t>(l)];
          const auto members = chain.partition(l);
          for (std::size_t k = 0; k < members.size(); ++k)
            worst = std::max(worst, std::fabs(pi[members[k]] - mass * cond.probabilities[k]));
        }
      }
  return finish("rru.decomposition_exactness", worst, 1e-8);
}

SuiteResult erlang_suite() {
  double worst = 0.0;
  for (int servers : {1, 3, 5, 12, 50})
    for (double rho : {0.3, 2.5, 10.0, 40.0}) {
      const RateSet rates({100.0}, {servers});
      TrafficSpec t;
      t.mu = 1.0;
      t.lambda = rho;
      t.server_count = servers;
      t.a = rho / servers;
      const rru::RruChainSpec spec(rates, ThresholdPolicy({}, {}, rates), t);
      double b = 1.0;
      for (int k = 1; k <= servers; ++k) b = rho * b / (k + rho * b);
      worst = std::max(worst, std::fabs(rru::server_blocking(spec) - b) / b);
    }
  return finish("rru.erlang_b", worst, 1e-12);
}

SuiteResult product_form_suite() {
  double worst_pi = 0.0;
  double worst_db = 0.0;
  for (int m = 1; m <= 3; ++m)
    for (int n = 1; n <= 6; ++n)
      for (double a : {0.2, 0.5})
        for (double cap_factor : {1.5, 2.5, 4.0, 100.0}) {
          ModelConfig c;
          c.n_d = m;
          c.a = a;
          c.cluster_size = n;
          c.fha_capacity_mbps = cap_factor * 1228.8;
          const Model model = resolve(c);
          const auto spec = aggregator::make_spec(model);
          const auto space = aggregator::enumerate_states(spec);
          const auto pf = aggregator::product_form(spec, space);
          const auto direct = aggregator::direct_solve(spec, space);
          for (std::size_t i = 0; i < space.size(); ++i) worst_pi = std::max(worst_pi, std::fabs(pf[i] - direct[i]));
          worst_db = std::max(worst_db, aggregator::detailed_balance_check(spec, space, pf));
        }
  std::ostringstream os;
  os << "max |dpi| " << worst_pi << ", max detailed-balance residual " << worst_db;
  SuiteResult r = finish("aggregator.product_form_vs_direct", worst_pi, 1e-8, os.str());
  r.passed = r.passed && worst_db < 1e-10;
  return r;
}

SuiteResult engset_suite() {
  double worst = 0.0;
  for (int n = 1; n <= 12; ++n)
    for (double a : {0.2, 0.5}) {
      ModelConfig c;
      c.n_d = 1;
      c.a = a;
      c.cluster_size = n;
      const Model model = resolve(c);
      const auto spec = aggregator::make_spec(model);
      const auto space = aggregator::enumerate_states(spec);
      const auto pf = aggregator::product_form(spec, space);
      const double ratio = spec.rru_rates.up[0] / spec.rru_rates.down[0];
      std::vector<double> w(space.size());
      double sum = 0.0;
      for (std::size_t i = 0; i < space.size(); ++i) {
        const int k = space.k(i, 1);
        w[i] = std::exp(std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0)) * std::pow(ratio, k);
        sum += w[i];
      }
      for (std::size_t i = 0; i < space.size(); ++i) worst = std::max(worst, std::fabs(pf[i] - w[i] / sum));
    }
  return finish("aggregator.engset_marginal", worst, 1e-10);
}

SuiteResult simulation_suite(std::uint64_t events, std::uint64_t seed) {
  int failures = 0;
  int points = 0;
  std::string first;
  for (double a : {0.2, 0.3, 0.5})
    for (int nd = 1; nd <= 4; ++nd)
      for (int n : {8, 12, 16, 20}) {
        ModelConfig c;
        c.n_d = nd;
        c.a = a;
        c.cluster_size = n;
        const Model model = resolve(c);
        const double analytic = aggregator::blocking(aggregator::make_spec(model)).total;
        const sweep::GridPoint gp{n, a, nd, 1, "poisson"};
        const auto stats = sim::run(sim::make_sim_config(model, sim::ArrivalProcess::poisson(model.traffic.lambda),
                                                         events, sweep::point_seed(seed, gp)));
        ++points;
        if (!sweep::agrees(analytic, stats.pb_fha, stats.pb_fha_se)) {
          ++failures;
          if (first.empty()) {
            std::ostringstream os;
            os << "a=" << a << " n_d=" << nd << " N=" << n << ": analytic " << analytic << ", simulated "
               << stats.pb_fha << " +- " << stats.pb_fha_se;
            first = os.str();
          }
        }
      }
  std::ostringstream os;
  os << failures << " of " << points << " points outside 3 standard errors";
  if (!first.empty()) os << "; first: " << first;
  return finish("sim.analytic_agreement", failures, 0.5, os.str());
}

Report run_all(const Options& o) {
  Report r;
  r.suites.push_back(steady_state_suite(o.seed));
  r.suites.push_back(coefficient_suite(o.random_specs, o.seed));
  r.suites.push_back(decomposition_suite());
  r.suites.push_back(erlang_suite());
  r.suites.push_back(product_form_suite());
  r.suites.push_back(engset_suite());
  if (o.simulation) r.suites.push_back(simulation_suite(o.sim_events, o.seed));
  return r;
}

}  // namespace vrf::validate
