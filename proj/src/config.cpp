#include "vrf/config.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"
#include "vrf/error.hpp"

namespace vrf {

namespace {

[[noreturn]] void bad(const std::string& what) { throw InvalidConfiguration(what); }

}  // namespace

CpriProfile::CpriProfile(std::vector<ProfileRow> rows) : rows_(std::move(rows)) {
  if (rows_.empty()) bad("profile: at least one row is required");
  for (std::size_t i = 0; i < rows_.size(); ++i) {
    const ProfileRow& r = rows_[i];
    const std::string at = "profile row " + std::to_string(i) + ": ";
    if (!(r.bandwidth_mhz > 0.0) || r.fft_size <= 0 || r.prb_count <= 0 || !(r.rate_mbps > 0.0) ||
        r.max_users <= 0)
      bad(at + "all fields must be strictly positive");
    if (r.max_users != r.prb_count / 2)
      bad(at + "max_users must equal floor(prb_count / 2)");
    if (i > 0 && (r.rate_mbps <= rows_[i - 1].rate_mbps || r.max_users <= rows_[i - 1].max_users))
      bad(at + "rows must be strictly increasing in rate_mbps and max_users");
  }
}

CpriProfile default_profile() {
  return CpriProfile({
      {1.25, 128, 6, 76.8, 3},
      {2.5, 256, 12, 153.6, 6},
      {5.0, 512, 25, 307.2, 12},
      {10.0, 1024, 50, 614.4, 25},
      {15.0, 1536, 75, 921.6, 37},
      {20.0, 2048, 100, 1228.8, 50},
  });
}

RateSet::RateSet(std::vector<double> rates_mbps, std::vector<int> capacities)
    : rates_(std::move(rates_mbps)), capacities_(std::move(capacities)) {
  if (rates_.empty()) bad("rate set: at least one rate is required");
  if (rates_.size() != capacities_.size()) bad("rate set: rates and capacities differ in length");
  for (std::size_t i = 0; i < rates_.size(); ++i) {
    if (!(rates_[i] > 0.0) || capacities_[i] <= 0) bad("rate set: entries must be positive");
    if (i > 0 && (rates_[i] <= rates_[i - 1] || capacities_[i] <= capacities_[i - 1]))
      bad("rate set: rates and capacities must be strictly increasing");
  }
}

RateSet select_rates(const CpriProfile& profile, int n_d) {
  if (n_d < 1 || static_cast<std::size_t>(n_d) > profile.size())
    bad("n_d must be in 1.." + std::to_string(profile.size()) + ", got " + std::to_string(n_d));

  // Walk down from the top rate; each step takes the largest rate <= half the previous one.
  std::vector<std::size_t> picked{profile.size() - 1};
  while (picked.size() < static_cast<std::size_t>(n_d)) {
    const double limit = profile.row(picked.back()).rate_mbps / 2.0;
    std::optional<std::size_t> next;
    for (std::size_t i = picked.back(); i-- > 0;) {
      if (profile.row(i).rate_mbps <= limit * (1.0 + 1e-12)) {
        next = i;
        break;
      }
    }
    if (!next)
      bad("n_d = " + std::to_string(n_d) + " exceeds the profile's halving ladder (" +
          std::to_string(picked.size()) + " rates)");
    picked.push_back(*next);
  }

  std::vector<double> rates;
  std::vector<int> caps;
  for (auto it = picked.rbegin(); it != picked.rend(); ++it) {
    rates.push_back(profile.row(*it).rate_mbps);
    caps.push_back(profile.row(*it).max_users);
  }
  return RateSet(std::move(rates), std::move(caps));
}

ThresholdPolicy::ThresholdPolicy(std::vector<int> forward, std::vector<int> reverse,
                                 const RateSet& rates)
    : forward_(std::move(forward)), reverse_(std::move(reverse)), server_count_(rates.server_count()) {
  const std::size_t m = static_cast<std::size_t>(rates.size());
  if (forward_.size() + 1 != m || reverse_.size() + 1 != m)
    bad("thresholds: expected " + std::to_string(m - 1) + " forward and reverse thresholds");
  for (std::size_t i = 0; i < forward_.size(); ++i) {
    const std::string at = "thresholds[" + std::to_string(i + 1) + "]: ";
    if (reverse_[i] < 1) bad(at + "reverse threshold must be >= 1");
    if (forward_[i] - reverse_[i] < 1) bad(at + "forward - reverse must be >= 1");
    if (forward_[i] > rates.capacity(static_cast<int>(i) + 1))
      bad(at + "forward threshold exceeds the rate's user capacity");
    if (i > 0 && (forward_[i] <= forward_[i - 1] || reverse_[i] <= reverse_[i - 1]))
      bad(at + "thresholds must be strictly increasing");
  }
  if (!forward_.empty() && forward_.back() >= server_count_)
    bad("thresholds: F_{M-1} must be below the server count");
}

int ThresholdPolicy::forward(int level) const {
  if (level < 1 || level > levels()) throw InvalidParameter("forward threshold index out of range");
  return level == levels() ? server_count_ : forward_[static_cast<std::size_t>(level - 1)];
}

int ThresholdPolicy::reverse(int level) const {
  if (level < 0 || level >= levels()) throw InvalidParameter("reverse threshold index out of range");
  return level == 0 ? 0 : reverse_[static_cast<std::size_t>(level - 1)];
}

ThresholdPolicy default_thresholds(const RateSet& rates, int gap) {
  if (gap < 1) bad("threshold_gap must be >= 1");
  std::vector<int> f;
  std::vector<int> r;
  for (int l = 1; l < rates.size(); ++l) {
    f.push_back(rates.capacity(l));
    r.push_back(rates.capacity(l) - gap);
    if (r.back() < 1) bad("threshold_gap " + std::to_string(gap) + " makes R_" + std::to_string(l) + " < 1");
    if (r.size() > 1 && r.back() <= r[r.size() - 2])
      bad("threshold_gap " + std::to_string(gap) + " makes reverse thresholds non-increasing");
  }
  return ThresholdPolicy(std::move(f), std::move(r), rates);
}

TrafficSpec traffic_from_load(double a, double mu, int server_count) {
  if (!(a > 0.0) || !(a < 1.0)) bad("normalized load a must lie in (0, 1)");
  if (!(mu > 0.0)) bad("mu must be positive");
  if (server_count <= 0) bad("server_count must be positive");
  TrafficSpec t;
  t.a = a;
  t.mu = mu;
  t.server_count = server_count;
  t.lambda = a * server_count * mu;
  return t;
}

namespace {

using nlohmann::json;

template <class T>
T field(const json& j, const char* key) {
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    bad(std::string("config field '") + key + "': " + e.what());
  }
}

int int_field(const json& j, const char* key) {
  const json& v = j.at(key);
  if (!v.is_number_integer()) bad(std::string("config field '") + key + "' must be an integer");
  return v.get<int>();
}

double real_field(const json& j, const char* key) {
  const json& v = j.at(key);
  if (!v.is_number()) bad(std::string("config field '") + key + "' must be a number");
  return v.get<double>();
}

}  // namespace

ModelConfig parse_config(std::string_view json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error& e) {
    bad(std::string("config is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) bad("config must be a JSON object");

  static const std::set<std::string> known{"profile", "n_d", "threshold_gap", "a", "mu",
                                           "server_count", "cluster_size", "fha_capacity_mbps"};
  for (const auto& [key, value] : j.items()) {
    (void)value;
    if (!known.count(key)) bad("unknown config key '" + key + "'");
  }

  ModelConfig c;
  if (j.contains("profile")) {
    const json& p = j.at("profile");
    if (!p.is_array()) bad("config field 'profile' must be an array of rows");
    std::vector<ProfileRow> rows;
    static const std::set<std::string> row_keys{"bandwidth_mhz", "fft_size", "prb_count", "rate_mbps",
                                                "max_users"};
    for (const json& r : p) {
      if (!r.is_object()) bad("profile rows must be objects");
      for (const auto& [key, value] : r.items()) {
        (void)value;
        if (!row_keys.count(key)) bad("unknown profile row key '" + key + "'");
      }
      ProfileRow row;
      row.bandwidth_mhz = field<double>(r, "bandwidth_mhz");
      row.fft_size = field<int>(r, "fft_size");
      row.prb_count = field<int>(r, "prb_count");
      row.rate_mbps = field<double>(r, "rate_mbps");
      row.max_users = field<int>(r, "max_users");
      rows.push_back(row);
    }
    c.profile = std::move(rows);
  }
  if (j.contains("n_d")) c.n_d = int_field(j, "n_d");
  if (j.contains("threshold_gap")) c.threshold_gap = int_field(j, "threshold_gap");
  if (j.contains("a")) c.a = real_field(j, "a");
  if (j.contains("mu")) c.mu = real_field(j, "mu");
  if (j.contains("server_count")) c.server_count = int_field(j, "server_count");
  if (j.contains("cluster_size")) c.cluster_size = int_field(j, "cluster_size");
  if (j.contains("fha_capacity_mbps")) c.fha_capacity_mbps = real_field(j, "fha_capacity_mbps");
  return c;
}

ModelConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) bad("cannot read config file '" + path.string() + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::string to_json(const ModelConfig& c) {
  json j;
  if (c.profile) {
    j["profile"] = json::array();
    for (const ProfileRow& r : *c.profile)
      j["profile"].push_back({{"bandwidth_mhz", r.bandwidth_mhz},
                              {"fft_size", r.fft_size},
                              {"prb_count", r.prb_count},
                              {"rate_mbps", r.rate_mbps},
                              {"max_users", r.max_users}});
  }
  j["n_d"] = c.n_d;
  j["threshold_gap"] = c.threshold_gap;
  j["a"] = c.a;
  j["mu"] = c.mu;
  j["server_count"] = c.server_count;
  j["cluster_size"] = c.cluster_size;
  j["fha_capacity_mbps"] = c.fha_capacity_mbps;
  return j.dump(2);
}

Model resolve(const ModelConfig& c) {
  CpriProfile profile = c.profile ? CpriProfile(*c.profile) : default_profile();
  RateSet rates = select_rates(profile, c.n_d);
  if (rates.server_count() != c.server_count)
    bad("server_count (" + std::to_string(c.server_count) + ") must equal the top rate's capacity (" +
        std::to_string(rates.server_count()) + ")");
  ThresholdPolicy thresholds = default_thresholds(rates, c.threshold_gap);
  TrafficSpec traffic = traffic_from_load(c.a, c.mu, c.server_count);
  if (c.cluster_size < 1) bad("cluster_size must be >= 1");
  if (!(c.fha_capacity_mbps > rates.rate(1)))
    bad("fha_capacity_mbps must exceed the lowest fronthaul rate");
  return Model{std::move(profile), std::move(rates), std::move(thresholds), traffic, c.cluster_size,
               c.fha_capacity_mbps};
}

}  // namespace vrf
