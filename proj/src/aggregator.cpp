#include "vrf/aggregator.hpp"

#include <algorithm>
#include <climits>
#include <cmath>
#include <string>

#include "vrf/error.hpp"

namespace vrf::aggregator {

AggregatorSpec::AggregatorSpec(int cluster_size_, RateSet rates_, double capacity_mbps_, rru::RruRates rru_rates_,
                               CapacityConvention convention_)
    : cluster_size(cluster_size_),
      rates(std::move(rates_)),
      capacity_mbps(capacity_mbps_),
      rru_rates(std::move(rru_rates_)),
      lambda(0.0),
      convention(convention_) {
  if (cluster_size < 1) throw InvalidConfiguration("cluster size must be >= 1");
  if (!(capacity_mbps > rates.rate(1))) throw InvalidConfiguration("link capacity must exceed d_1");
  if (rru_rates.levels() != rates.size() || rru_rates.up.size() != rru_rates.down.size())
    throw InvalidConfiguration("RRU rates do not match the rate set");
  for (std::size_t m = 0; m < rru_rates.up.size(); ++m)
    if (!(rru_rates.up[m] > 0.0) || !(rru_rates.down[m] > 0.0))
      throw InvalidConfiguration("RRU level-transition rates must be positive");
  lambda = rru_rates.up[0];
}

int AggregatorSpec::effective_rrus() const {
  if (convention == CapacityConvention::kTrueN) return cluster_size;
  return std::min(cluster_size, max_rru(capacity_mbps, rates.rate(1)));
}

bool AggregatorSpec::fits(double load_mbps) const { return load_mbps <= capacity_mbps * (1.0 + 1e-9); }

AggregatorSpec make_spec(const Model& model, CapacityConvention convention) {
  const rru::RruChainSpec chain(model.rates, model.thresholds, model.traffic);
  return AggregatorSpec(model.cluster_size, model.rates, model.capacity_mbps, rru::transition_rates(chain),
                        convention);
}

int max_rru(double capacity_mbps, double d1_mbps) {
  if (!(capacity_mbps > 0.0) || !(d1_mbps > 0.0)) throw InvalidParameter("max_rru needs positive inputs");
  const double q = std::floor(capacity_mbps / d1_mbps * (1.0 + 1e-12));
  return q >= static_cast<double>(INT_MAX) ? INT_MAX : static_cast<int>(q);
}

StateVector StateSpace::state(std::size_t i) const {
  const auto* p = data_.data() + i * static_cast<std::size_t>(levels_);
  return StateVector(p, p + levels_);
}

std::uint64_t StateSpace::key(const int* k) const {
  std::uint64_t h = 0;
  for (int m = levels_ - 1; m >= 0; --m) h = h * static_cast<std::uint64_t>(radix_) + static_cast<std::uint64_t>(k[m]);
  return h;
}

std::optional<std::size_t> StateSpace::find(const StateVector& k) const {
  if (static_cast<int>(k.size()) != levels_) return std::nullopt;
  for (int v : k)
    if (v < 0 || v >= radix_) return std::nullopt;
  const auto it = index_.find(key(k.data()));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

StateSpace enumerate_states(const AggregatorSpec& spec) {
  const int m = spec.levels();
  const int n = spec.effective_rrus();
  StateSpace s;
  s.levels_ = m;
  s.radix_ = n + 1;
  if (std::pow(static_cast<double>(s.radix_), m) > 9.0e18)
    throw CapacityError("aggregator state key overflows; reduce the cluster size or the rate count");

  // Depth-first over k_1, k_2, ... in increasing order gives lexicographic order.
  StateVector k(static_cast<std::size_t>(m), 0);
  auto visit = [&](auto&& self, int level, int active, double load) -> void {
    if (level == m) {
      if (s.count_ >= spec.state_cap)
        throw CapacityError("aggregator state space exceeds " + std::to_string(spec.state_cap) +
                            " states; reduce the cluster size or the rate count");
      s.data_.insert(s.data_.end(), k.begin(), k.end());
      s.active_.push_back(active);
      s.load_.push_back(load);
      s.index_.emplace(s.key(k.data()), s.count_);
      ++s.count_;
      return;
    }
    const double d = spec.rates.rate(level + 1);
    for (int v = 0; active + v <= n && spec.fits(load + v * d); ++v) {
      k[static_cast<std::size_t>(level)] = v;
      self(self, level + 1, active + v, load + v * d);
    }
    k[static_cast<std::size_t>(level)] = 0;
  };
  visit(visit, 0, 0, 0.0);
  return s;
}

namespace {

struct Move {
  std::size_t target;
  double rate;
};

// Calls f(kind, m, rate, to) for every transition out of state i that stays in
// the state space. kind: 0 wake-up, 1 upgrade m -> m+1, 2 downgrade m -> m-1, 3 sleep.
template <class F>
void for_each_move(const AggregatorSpec& spec, const StateSpace& space, std::size_t i, F&& f) {
  const int m = spec.levels();
  const int n = spec.effective_rrus();
  StateVector k = space.state(i);
  const int active = space.active(i);
  const auto& up = spec.rru_rates.up;
  const auto& down = spec.rru_rates.down;

  auto emit = [&](int kind, int level, double rate) {
    if (rate <= 0.0) return;
    if (const auto j = space.find(k)) f(kind, level, rate, *j);
  };

  if (active < n) {
    ++k[0];
    emit(0, 0, (n - active) * spec.lambda);
    --k[0];
  }
  for (int l = 1; l <= m; ++l) {
    const int c = k[static_cast<std::size_t>(l - 1)];
    if (c == 0) continue;
    --k[static_cast<std::size_t>(l - 1)];
    if (l < m) {
      ++k[static_cast<std::size_t>(l)];
      emit(1, l, c * up[static_cast<std::size_t>(l)]);
      --k[static_cast<std::size_t>(l)];
    }
    if (l >= 2) {
      ++k[static_cast<std::size_t>(l - 2)];
      emit(2, l, c * down[static_cast<std::size_t>(l - 1)]);
      --k[static_cast<std::size_t>(l - 2)];
    } else {
      emit(3, 1, c * down[0]);
    }
    ++k[static_cast<std::size_t>(l - 1)];
  }
}

}  // namespace

double transition_rate(const StateVector& from, const StateVector& to, const AggregatorSpec& spec) {
  const int m = spec.levels();
  if (static_cast<int>(from.size()) != m || static_cast<int>(to.size()) != m)
    throw InvalidParameter("state vectors must have one entry per rate");
  const int n = spec.effective_rrus();
  int active = 0;
  double load_to = 0.0;
  for (int l = 1; l <= m; ++l) {
    active += from[static_cast<std::size_t>(l - 1)];
    load_to += to[static_cast<std::size_t>(l - 1)] * spec.rates.rate(l);
  }
  if (!spec.fits(load_to)) return 0.0;

  std::vector<int> diff(static_cast<std::size_t>(m));
  int nonzero = 0;
  for (std::size_t l = 0; l < diff.size(); ++l) {
    diff[l] = to[l] - from[l];
    if (diff[l] != 0) ++nonzero;
  }
  auto at = [&](int l) { return diff[static_cast<std::size_t>(l - 1)]; };
  auto k = [&](int l) { return from[static_cast<std::size_t>(l - 1)]; };

  if (nonzero == 1) {
    if (at(1) == 1 && active < n) return (n - active) * spec.lambda;
    if (at(1) == -1) return k(1) * spec.rru_rates.down[0];
    return 0.0;
  }
  if (nonzero != 2) return 0.0;
  for (int l = 1; l < m; ++l) {
    if (at(l) == -1 && at(l + 1) == 1) return k(l) * spec.rru_rates.up[static_cast<std::size_t>(l)];
    if (at(l + 1) == -1 && at(l) == 1) return k(l + 1) * spec.rru_rates.down[static_cast<std::size_t>(l)];
  }
  return 0.0;
}

ctmc::RateMatrix generator(const AggregatorSpec& spec, const StateSpace& space) {
  ctmc::Matrix q(space.size(), space.size());
  for (std::size_t i = 0; i < space.size(); ++i)
    for_each_move(spec, space, i, [&](int, int, double rate, std::size_t j) { q(i, j) += rate; });
  return ctmc::RateMatrix::from_rates(std::move(q));
}

std::vector<double> product_form_log_weights(const AggregatorSpec& spec, const StateSpace& space) {
  const int m = spec.levels();
  const int n = spec.effective_rrus();
  std::vector<double> log_ratio(static_cast<std::size_t>(m));
  for (int l = 1; l <= m; ++l)
    log_ratio[static_cast<std::size_t>(l - 1)] =
        std::log(spec.rru_rates.up[static_cast<std::size_t>(l - 1)]) -
        std::log(spec.rru_rates.down[static_cast<std::size_t>(l - 1)]);
  const double log_n_fact = std::lgamma(n + 1.0);

  std::vector<double> w(space.size());
  for (std::size_t i = 0; i < space.size(); ++i) {
    // N! / ((N - K)! prod k_l!) * prod_l (lambda_{l-1} / mu_l)^{k_l + ... + k_M}
    double lw = log_n_fact - std::lgamma(n - space.active(i) + 1.0);
    int tail = 0;
    for (int l = m; l >= 1; --l) {
      const int c = space.k(i, l);
      tail += c;
      lw += tail * log_ratio[static_cast<std::size_t>(l - 1)] - std::lgamma(c + 1.0);
    }
    w[i] = lw;
  }
  return w;
}

ctmc::Distribution product_form(const AggregatorSpec& spec, const StateSpace& space) {
  std::vector<double> w = product_form_log_weights(spec, space);
  const double top = *std::max_element(w.begin(), w.end());
  double sum = 0.0;
  for (double& x : w) {
    x = std::exp(x - top);
    sum += x;
  }
  for (double& x : w) x /= sum;
  return ctmc::Distribution(std::move(w));
}

ctmc::Distribution direct_solve(const AggregatorSpec& spec, const StateSpace& space) {
  return ctmc::steady_state(generator(spec, space));
}

BlockingReport blocking(const AggregatorSpec& spec, const StateSpace& space, const ctmc::Distribution& p) {
  if (p.size() != space.size()) throw InvalidParameter("distribution does not match the state space");
  const int m = spec.levels();
  const int n = spec.effective_rrus();
  BlockingReport r;
  r.n_rru_effective = n;
  r.state_count = space.size();
  r.per_rate.assign(static_cast<std::size_t>(m), 0.0);
  r.set_sizes.assign(static_cast<std::size_t>(m), 0);
  r.offered_flow.assign(static_cast<std::size_t>(m), 0.0);
  r.blocked_flow.assign(static_cast<std::size_t>(m), 0.0);

  for (std::size_t i = 0; i < space.size(); ++i) {
    const double load = space.load(i);
    if (space.active(i) < n) {
      const double flow = p[i] * (n - space.active(i)) * spec.lambda;
      r.offered_flow[0] += flow;
      if (!spec.fits(load + spec.rates.rate(1))) {
        r.blocked_flow[0] += flow;
        ++r.set_sizes[0];
      }
    }
    for (int l = 1; l < m; ++l) {
      const int c = space.k(i, l);
      if (c == 0) continue;
      const double flow = p[i] * c * spec.rru_rates.up[static_cast<std::size_t>(l)];
      r.offered_flow[static_cast<std::size_t>(l)] += flow;
      if (!spec.fits(load - spec.rates.rate(l) + spec.rates.rate(l + 1))) {
        r.blocked_flow[static_cast<std::size_t>(l)] += flow;
        ++r.set_sizes[static_cast<std::size_t>(l)];
      }
    }
  }

  double offered = 0.0;
  for (double f : r.offered_flow) offered += f;
  for (std::size_t l = 0; l < r.per_rate.size(); ++l) {
    r.per_rate[l] = offered > 0.0 ? r.blocked_flow[l] / offered : 0.0;
    r.total += r.per_rate[l];
  }
  r.total = std::min(r.total, 1.0);
  return r;
}

BlockingReport blocking(const AggregatorSpec& spec) {
  const StateSpace space = enumerate_states(spec);
  return blocking(spec, space, product_form(spec, space));
}

double detailed_balance_check(const AggregatorSpec& spec, const StateSpace& space, const ctmc::Distribution& p) {
  if (p.size() != space.size()) throw InvalidParameter("distribution does not match the state space");
  double worst = 0.0;
  for (std::size_t i = 0; i < space.size(); ++i) {
    for_each_move(spec, space, i, [&](int kind, int, double rate, std::size_t j) {
      if (kind == 2 || kind == 3) return;  // each pair is visited once, from its upward end
      double back = 0.0;
      for_each_move(spec, space, j, [&](int, int, double r2, std::size_t t) {
        if (t == i) back += r2;
      });
      worst = std::max(worst, std::fabs(p[i] * rate - p[j] * back));
    });
  }
  return worst;
}

double detailed_balance_check(const AggregatorSpec& spec) {
  const StateSpace space = enumerate_states(spec);
  return detailed_balance_check(spec, space, product_form(spec, space));
}

std::vector<double> rate_level_marginal(const AggregatorSpec& spec, const StateSpace& space,
                                        const ctmc::Distribution& p) {
  const int m = spec.levels();
  const int n = spec.effective_rrus();
  std::vector<double> out(static_cast<std::size_t>(m + 1), 0.0);
  for (std::size_t i = 0; i < space.size(); ++i) {
    out[0] += p[i] * (n - space.active(i));
    for (int l = 1; l <= m; ++l) out[static_cast<std::size_t>(l)] += p[i] * space.k(i, l);
  }
  for (double& x : out) x /= n;
  return out;
}

}  // namespace vrf::aggregator
