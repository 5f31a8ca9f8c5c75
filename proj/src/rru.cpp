#include "vrf/rru.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "vrf/error.hpp"
#include "vrf/log.hpp"

namespace vrf::rru {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double log_sum_exp(const std::vector<double>& terms) {
  double m = kNegInf;
  for (double t : terms) m = std::max(m, t);
  if (m == kNegInf) return kNegInf;
  double s = 0.0;
  for (double t : terms) s += std::exp(t - m);
  return m + std::log(s);
}

double log_factorial(int n) { return std::lgamma(static_cast<double>(n) + 1.0); }

}  // namespace

RruChainSpec::RruChainSpec(RateSet rates_, ThresholdPolicy thresholds_, TrafficSpec traffic_)
    : rates(std::move(rates_)), thresholds(std::move(thresholds_)), traffic(traffic_) {
  if (thresholds.levels() != rates.size())
    throw InvalidConfiguration("threshold policy does not match the rate set");
  if (traffic.server_count != rates.server_count())
    throw InvalidConfiguration("traffic server count differs from the top rate's capacity");
  if (!(traffic.lambda > 0.0) || !(traffic.mu > 0.0)) throw InvalidConfiguration("rho must be positive");
}

int RruChainSpec::first_user(int level) const {
  if (level < 1 || level > levels()) throw InvalidParameter("level out of range");
  return level == 1 ? 0 : thresholds.reverse(level - 1) + 1;
}

int RruChainSpec::last_user(int level) const {
  if (level < 1 || level > levels()) throw InvalidParameter("level out of range");
  return thresholds.forward(level);
}

namespace {

ctmc::Matrix eq7_rates(const RruChainSpec& spec, const std::vector<RruState>& states,
                       const std::vector<std::vector<long>>& lookup) {
  const int m = spec.levels();
  const int servers = spec.traffic.server_count;
  const double lambda = spec.traffic.lambda;
  const double mu = spec.traffic.mu;
  auto idx = [&](int users, int level) {
    const long i = lookup[static_cast<std::size_t>(level)][static_cast<std::size_t>(users)];
    if (i < 0) throw std::logic_error("missing RRU state");
    return static_cast<std::size_t>(i);
  };

  ctmc::Matrix q(states.size(), states.size());
  q(idx(0, 0), idx(1, 1)) = lambda;
  for (const RruState& s : states) {
    if (s.level == 0) continue;
    const std::size_t from = idx(s.users, s.level);
    if (s.users < servers) {
      const bool crosses = s.level < m && s.users == spec.thresholds.forward(s.level);
      q(from, idx(s.users + 1, crosses ? s.level + 1 : s.level)) += lambda;
    }
    if (s.users == 1 && s.level == 1) {
      q(from, idx(0, 0)) += mu;
    } else if (s.users >= 1) {
      const bool crosses = s.level >= 2 && s.users - 1 == spec.thresholds.reverse(s.level - 1);
      q(from, idx(s.users - 1, crosses ? s.level - 1 : s.level)) += s.users * mu;
    }
  }
  return q;
}

}  // namespace

GlobalRruChain::GlobalRruChain(const RruChainSpec& spec)
    : generator_(ctmc::RateMatrix::from_rates(ctmc::Matrix(1, 1))) {
  const int m = spec.levels();
  const int servers = spec.traffic.server_count;
  lookup_.assign(static_cast<std::size_t>(m + 1), std::vector<long>(static_cast<std::size_t>(servers + 1), -1));
  auto add = [&](int users, int level) {
    lookup_[static_cast<std::size_t>(level)][static_cast<std::size_t>(users)] = static_cast<long>(states_.size());
    states_.push_back({users, level});
  };
  add(0, 0);
  for (int l = 1; l <= m; ++l)
    for (int u = std::max(1, spec.first_user(l)); u <= spec.last_user(l); ++u) add(u, l);
  generator_ = ctmc::RateMatrix::from_rates(eq7_rates(spec, states_, lookup_));
}

std::size_t GlobalRruChain::index(int users, int level) const {
  if (level < 0 || static_cast<std::size_t>(level) >= lookup_.size() || users < 0 ||
      static_cast<std::size_t>(users) >= lookup_[0].size())
    throw InvalidParameter("RRU state out of range");
  const long i = lookup_[static_cast<std::size_t>(level)][static_cast<std::size_t>(users)];
  if (i < 0) throw InvalidParameter("(" + std::to_string(users) + ", " + std::to_string(level) + ") is not a state");
  return static_cast<std::size_t>(i);
}

std::vector<std::size_t> GlobalRruChain::partition(int level) const {
  std::vector<std::size_t> out;
  if (level == 1) out.push_back(index(0, 0));
  for (std::size_t u = 0; u < lookup_[static_cast<std::size_t>(level)].size(); ++u) {
    const long i = lookup_[static_cast<std::size_t>(level)][u];
    if (i >= 0) out.push_back(static_cast<std::size_t>(i));
  }
  return out;
}

GlobalRruChain build_global_chain(const RruChainSpec& spec) { return GlobalRruChain(spec); }

bool closed_form_applies(const RruChainSpec& spec, int level) {
  const int m = spec.levels();
  if (level < 1 || level > m) throw InvalidParameter("level out of range");
  if (level == 1 || level == m) return true;
  return spec.thresholds.forward(level - 1) + 1 <= spec.thresholds.reverse(level);
}

PartitionCoefficients partition_coefficients(const RruChainSpec& spec, int level) {
  const int m = spec.levels();
  if (level < 1 || level > m) throw InvalidParameter("level " + std::to_string(level) + " outside 1.." + std::to_string(m));

  const double log_rho = std::log(spec.rho());
  const int first = spec.first_user(level);
  const int last = spec.last_user(level);
  const bool has_upper_fold = level < m;  // exits at F_l fold back to R_l

  // log of the fold-free part of C_i. For l = 1 this is rho^i / i!. For l >= 2 it
  // is the first sum minus the second; both run over the same summand, so the
  // difference keeps the terms j = max(0, i - F_{l-1} - 1) .. i - base.
  auto log_d = [&](int i) {
    if (level == 1) return i * log_rho - log_factorial(i);
    const int base = first;
    const int prev_forward = spec.thresholds.forward(level - 1);
    const int j0 = std::max(0, i - prev_forward - 1);
    std::vector<double> terms;
    for (int j = j0; j <= i - base; ++j) terms.push_back(j * log_rho + std::lgamma(static_cast<double>(i - j)));
    return std::log(static_cast<double>(base)) - log_factorial(i) + log_sum_exp(terms);
  };

  // log of (R_l! / i!) sum_{j=1}^{i-R_l} rho^j (i-j)! / R_l!
  auto log_e = [&](int i, int reverse) {
    std::vector<double> terms;
    for (int j = 1; j <= i - reverse; ++j) terms.push_back(j * log_rho + log_factorial(i - j));
    return terms.empty() ? kNegInf : log_sum_exp(terms) - log_factorial(i);
  };

  PartitionCoefficients out;
  out.level = level;
  out.first_user = first;
  const std::size_t n = static_cast<std::size_t>(last - first + 1);
  out.values.resize(n);
  out.log_values.resize(n);

  if (!has_upper_fold) {
    for (int i = first; i <= last; ++i) {
      const double ld = (level >= 2 && i == first) ? 0.0 : log_d(i);
      out.log_values[static_cast<std::size_t>(i - first)] = ld;
      out.values[static_cast<std::size_t>(i - first)] = std::exp(ld);
    }
    return out;
  }

  const int forward = last;
  const int reverse = spec.thresholds.reverse(level);
  // C_{F_l} = D_{F_l - 1} / (1 + F_l / rho + E_{F_l - 1})
  const double log_denominator =
      log_sum_exp({0.0, std::log(static_cast<double>(forward)) - log_rho, log_e(forward - 1, reverse)});
  const double log_cf = log_d(forward - 1) - log_denominator;

  for (int i = first; i <= last; ++i) {
    const std::size_t k = static_cast<std::size_t>(i - first);
    double lc;
    double c;
    if (i == forward) {
      lc = log_cf;
      c = std::exp(lc);
    } else if (i <= reverse) {
      lc = (level >= 2 && i == first) ? 0.0 : log_d(i);
      c = std::exp(lc);
    } else {
      // C_i = D_i - E_i C_F, evaluated as D_i (1 - exp(log E_i + log C_F - log D_i)).
      const double ld = log_d(i);
      const double ratio_log = log_e(i, reverse) + log_cf - ld;
      if (ratio_log < 0.0) {
        lc = ld + std::log1p(-std::exp(ratio_log));
        c = std::exp(lc);
      } else {
        // Sign lost to cancellation; report the (non-positive) value as is.
        c = std::exp(ld) * (1.0 - std::exp(ratio_log));
        lc = kNegInf;
      }
    }
    out.values[k] = c;
    out.log_values[k] = lc;
  }
  return out;
}

namespace {

PartitionDistribution from_log_coefficients(const PartitionCoefficients& c) {
  PartitionDistribution d;
  d.level = c.level;
  d.first_user = c.first_user;
  d.coefficients = c.values;
  const double log_norm = log_sum_exp(c.log_values);
  d.probabilities.resize(c.values.size());
  for (std::size_t i = 0; i < c.values.size(); ++i) d.probabilities[i] = std::exp(c.log_values[i] - log_norm);
  return d;
}

}  // namespace

PartitionDistribution oracle_partition_distribution(const RruChainSpec& spec, int level) {
  if (level < 1 || level > spec.levels()) throw InvalidParameter("level out of range");
  const GlobalRruChain chain(spec);
  const auto members = chain.partition(level);
  const ctmc::Partition part(chain.states().size(), members);
  const ctmc::Distribution cond = members.size() == chain.states().size()
                                      ? ctmc::steady_state(chain.generator())
                                      : ctmc::fold_back_conditional(chain.generator(), part);
  PartitionDistribution d;
  d.level = level;
  d.first_user = spec.first_user(level);
  d.from_oracle = true;
  d.probabilities.assign(cond.values().begin(), cond.values().end());
  d.coefficients.resize(d.probabilities.size());
  for (std::size_t i = 0; i < d.probabilities.size(); ++i) d.coefficients[i] = d.probabilities[i] / d.probabilities[0];
  return d;
}

PartitionDistribution partition_distribution(const RruChainSpec& spec, int level) {
  if (!closed_form_applies(spec, level)) {
    log().info("level {}: threshold bands overlap (F_{} + 1 > R_{}); using the fold-back oracle", level,
               level - 1, level);
    return oracle_partition_distribution(spec, level);
  }
  const PartitionCoefficients c = partition_coefficients(spec, level);
  double most_negative = 0.0;
  for (double v : c.values) most_negative = std::min(most_negative, v);
  for (std::size_t i = 0; i < c.values.size(); ++i) {
    if (c.log_values[i] == kNegInf) {
      if (most_negative < -1e-9) {
        log().warn("level {}: closed-form coefficient {} is negative ({}); using the fold-back oracle", level,
                   c.first_user + static_cast<int>(i), c.values[i]);
      } else {
        log().info("level {}: closed-form coefficient {} cancelled to {}; using the fold-back oracle", level,
                   c.first_user + static_cast<int>(i), c.values[i]);
      }
      return oracle_partition_distribution(spec, level);
    }
  }
  return from_log_coefficients(c);
}

RruRates transition_rates(const RruChainSpec& spec) {
  const int m = spec.levels();
  const double lambda = spec.traffic.lambda;
  const double mu = spec.traffic.mu;
  RruRates r;
  r.up.assign(static_cast<std::size_t>(m), 0.0);
  r.down.assign(static_cast<std::size_t>(m), 0.0);
  r.up[0] = lambda;
  for (int l = 1; l <= m; ++l) {
    const PartitionDistribution d = partition_distribution(spec, l);
    // Level 1 is conditioned on the RRU being active: drop the off state.
    double active_mass = 1.0;
    if (l == 1) {
      active_mass = 0.0;
      for (std::size_t i = 1; i < d.probabilities.size(); ++i) active_mass += d.probabilities[i];
    }
    const int base = std::max(1, d.first_user);
    r.down[static_cast<std::size_t>(l - 1)] = base * mu * d.at(base) / active_mass;
    if (l < m) r.up[static_cast<std::size_t>(l)] = lambda * d.at(spec.last_user(l)) / active_mass;
  }
  return r;
}

ctmc::Distribution rate_level_distribution(const RruRates& rates) {
  const std::size_t m = rates.down.size();
  if (m == 0 || rates.up.size() != m) throw InvalidParameter("malformed RRU rates");
  std::vector<double> logw(m + 1, 0.0);
  for (std::size_t l = 1; l <= m; ++l) {
    if (!(rates.up[l - 1] > 0.0) || !(rates.down[l - 1] > 0.0))
      throw InvalidParameter("RRU level-transition rates must be positive");
    logw[l] = logw[l - 1] + std::log(rates.up[l - 1]) - std::log(rates.down[l - 1]);
  }
  const double norm = log_sum_exp(logw);
  std::vector<double> p(m + 1);
  for (std::size_t l = 0; l <= m; ++l) p[l] = std::exp(logw[l] - norm);
  return ctmc::Distribution(std::move(p));
}

double server_blocking(const RruChainSpec& spec) {
  const int m = spec.levels();
  const PartitionDistribution top = partition_distribution(spec, m);
  const double at_full = top.at(spec.traffic.server_count);
  if (m == 1) return at_full;
  const ctmc::Distribution levels = rate_level_distribution(transition_rates(spec));
  return levels[static_cast<std::size_t>(m)] * at_full;
}

}  // namespace vrf::rru
