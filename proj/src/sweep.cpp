#include "vrf/sweep.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <map>
#include <mutex>
#include <ostream>
#include <set>
#include <sstream>
#include <thread>

#include "json.hpp"
#include "vrf/error.hpp"
#include "vrf/log.hpp"
#include "vrf/philox.hpp"
#include "vrf/sim.hpp"

namespace vrf::sweep {

using nlohmann::json;

std::size_t SweepPlan::size() const {
  return cluster_sizes.size() * loads.size() * n_d.size() * gaps.size() * arrivals.size();
}

namespace {

[[noreturn]] void bad(const std::string& what) { throw InvalidConfiguration("plan: " + what); }

template <class T>
std::vector<T> grid(const json& j, const char* key, T fallback) {
  if (!j.contains(key)) return {fallback};
  const json& v = j.at(key);
  if (!v.is_array() || v.empty()) bad(std::string("'") + key + "' must be a non-empty array");
  std::vector<T> out;
  for (const json& x : v) {
    if constexpr (std::is_same_v<T, int>) {
      if (!x.is_number_integer()) bad(std::string("'") + key + "' entries must be integers");
    } else if constexpr (std::is_same_v<T, double>) {
      if (!x.is_number()) bad(std::string("'") + key + "' entries must be numbers");
    } else {
      if (!x.is_string()) bad(std::string("'") + key + "' entries must be strings");
    }
    out.push_back(x.get<T>());
  }
  return out;
}

std::string format_g(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

}  // namespace

SweepPlan parse_plan(std::string_view json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error& e) {
    bad(std::string("not valid JSON: ") + e.what());
  }
  if (!j.is_object()) bad("must be a JSON object");
  static const std::set<std::string> known{"cluster_sizes", "loads", "n_d",  "gaps",
                                           "arrivals",      "mode",  "events", "seed",
                                           "base",          "capacity_convention", "out"};
  for (const auto& [key, value] : j.items()) {
    (void)value;
    if (!known.count(key)) bad("unknown key '" + key + "'");
  }

  SweepPlan p;
  if (j.contains("base")) {
    if (!j.at("base").is_object()) bad("'base' must be a config object");
    p.base = parse_config(j.at("base").dump());
    resolve(p.base);
  }
  p.cluster_sizes = grid<int>(j, "cluster_sizes", p.base.cluster_size);
  p.loads = grid<double>(j, "loads", p.base.a);
  p.n_d = grid<int>(j, "n_d", p.base.n_d);
  p.gaps = grid<int>(j, "gaps", p.base.threshold_gap);
  p.arrivals = grid<std::string>(j, "arrivals", std::string("poisson"));
  for (const std::string& a : p.arrivals) sim::parse_arrival(a, 1.0);

  if (j.contains("mode")) {
    const std::string m = j.at("mode").is_string() ? j.at("mode").get<std::string>() : "";
    if (m == "analytic") p.mode = Mode::kAnalytic;
    else if (m == "simulate") p.mode = Mode::kSimulate;
    else if (m == "both") p.mode = Mode::kBoth;
    else bad("'mode' must be analytic, simulate or both");
  }
  if (j.contains("events")) {
    if (!j.at("events").is_number_unsigned() || j.at("events").get<std::uint64_t>() == 0)
      bad("'events' must be a positive integer");
    p.events = j.at("events").get<std::uint64_t>();
  }
  if (j.contains("seed")) {
    if (!j.at("seed").is_number_unsigned()) bad("'seed' must be a non-negative integer");
    p.seed = j.at("seed").get<std::uint64_t>();
  }
  if (j.contains("capacity_convention")) {
    const std::string c = j.at("capacity_convention").is_string() ? j.at("capacity_convention").get<std::string>() : "";
    if (c == "true_n") p.convention = aggregator::CapacityConvention::kTrueN;
    else if (c == "max_rru") p.convention = aggregator::CapacityConvention::kMaxRru;
    else bad("'capacity_convention' must be true_n or max_rru");
  }
  if (j.contains("out")) {
    if (!j.at("out").is_string()) bad("'out' must be a path string");
    p.out = j.at("out").get<std::string>();
  }
  return p;
}

SweepPlan load_plan(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) bad("cannot read '" + path.string() + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_plan(ss.str());
}

std::vector<GridPoint> expand(const SweepPlan& plan) {
  std::vector<GridPoint> out;
  out.reserve(plan.size());
  for (int n : plan.cluster_sizes)
    for (double a : plan.loads)
      for (int nd : plan.n_d)
        for (int gap : plan.gaps)
          for (const std::string& arr : plan.arrivals) out.push_back({n, a, nd, gap, arr});
  return out;
}

std::uint64_t point_seed(std::uint64_t base_seed, const GridPoint& p) {
  std::uint64_t a_bits = 0;
  std::memcpy(&a_bits, &p.a, sizeof a_bits);
  std::uint64_t arrival_hash = 0xcbf29ce484222325ull;  // FNV-1a
  for (unsigned char c : p.arrival) arrival_hash = (arrival_hash ^ c) * 0x100000001b3ull;
  std::uint64_t h = mix_seed(base_seed);
  for (std::uint64_t c : {static_cast<std::uint64_t>(p.n), a_bits, static_cast<std::uint64_t>(p.n_d),
                          static_cast<std::uint64_t>(p.gap), arrival_hash})
    h = mix_seed(h ^ c);
  return h;
}

bool agrees(double analytic, double sim, double se) {
  return std::fabs(analytic - sim) <= 3.0 * se || (analytic < 1e-4 && sim < 1e-4);
}

SweepRow run_point(const SweepPlan& plan, const GridPoint& point) {
  const auto start = std::chrono::steady_clock::now();
  SweepRow row;
  row.point = point;
  row.seed = point_seed(plan.seed, point);
  try {
    ModelConfig c = plan.base;
    c.cluster_size = point.n;
    c.a = point.a;
    c.n_d = point.n_d;
    c.threshold_gap = point.gap;
    const Model model = resolve(c);

    if (plan.mode != Mode::kSimulate) {
      const auto report = aggregator::blocking(aggregator::make_spec(model, plan.convention));
      row.pb_analytic = report.total;
      row.pb_components = report.per_rate;
    }
    if (plan.mode != Mode::kAnalytic) {
      const auto arrival = sim::parse_arrival(point.arrival, model.traffic.lambda);
      const auto stats = sim::run(sim::make_sim_config(model, arrival, plan.events, row.seed));
      row.events = stats.events;
      row.pb_sim = stats.pb_fha;
      row.pb_sim_ci = stats.pb_fha_ci;
      row.pb_sim_se = stats.pb_fha_se;
      row.blocked_rru = stats.blocked_rru;
      row.blocked_fha = stats.blocked_fha;
    }
    if (row.pb_analytic && row.pb_sim) row.agree = agrees(*row.pb_analytic, *row.pb_sim, *row.pb_sim_se) ? "true" : "false";
  } catch (const std::exception& e) {
    row.agree = "failed";
    row.error = e.what();
    log().error("grid point n={} a={} n_d={} gap={} {}: {}", point.n, point.a, point.n_d, point.gap, point.arrival,
                e.what());
  }
  row.wall_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return row;
}

const std::vector<std::string>& csv_columns() {
  static const std::vector<std::string> cols{"n",      "a",           "n_d",         "gap",         "arrival",
                                             "events", "seed",        "pb_analytic", "pb_components", "pb_sim",
                                             "pb_sim_ci", "blocked_rru", "blocked_fha", "agree",       "wall_s"};
  return cols;
}

void write_header(std::ostream& out) {
  const auto& cols = csv_columns();
  for (std::size_t i = 0; i < cols.size(); ++i) out << (i ? "," : "") << cols[i];
  out << '\n';
}

void write_row(std::ostream& out, const SweepRow& r) {
  auto opt = [](const std::optional<double>& v) { return v ? format_g(*v) : std::string(); };
  std::string comps;
  for (std::size_t i = 0; i < r.pb_components.size(); ++i) comps += (i ? ";" : "") + format_g(r.pb_components[i]);
  out << r.point.n << ',' << format_g(r.point.a) << ',' << r.point.n_d << ',' << r.point.gap << ',' << r.point.arrival
      << ',' << r.events << ',' << r.seed << ',' << opt(r.pb_analytic) << ',' << comps << ',' << opt(r.pb_sim) << ','
      << opt(r.pb_sim_ci) << ',' << r.blocked_rru << ',' << r.blocked_fha << ',' << r.agree << ','
      << format_g(r.wall_s) << '\n';
}

std::size_t run_sweep(const SweepPlan& plan, int jobs, const std::function<void(const SweepRow&)>& sink) {
  const std::vector<GridPoint> points = expand(plan);
  if (points.empty()) bad("grid is empty");
  const std::size_t workers =
      std::min<std::size_t>(points.size(), static_cast<std::size_t>(std::max(1, jobs)));

  std::atomic<std::size_t> next{0};
  std::mutex mu;
  std::map<std::size_t, SweepRow> pending;
  std::size_t emitted = 0;
  std::size_t failed = 0;

  auto work = [&] {
    for (std::size_t i = next++; i < points.size(); i = next++) {
      SweepRow row = run_point(plan, points[i]);
      std::lock_guard lock(mu);
      if (row.agree == "failed") ++failed;
      pending.emplace(i, std::move(row));
      while (!pending.empty() && pending.begin()->first == emitted) {
        sink(pending.begin()->second);
        pending.erase(pending.begin());
        ++emitted;
      }
    }
  };

  std::vector<std::thread> pool;
  for (std::size_t t = 1; t < workers; ++t) pool.emplace_back(work);
  work();
  for (auto& t : pool) t.join();
  return failed;
}

}  // namespace vrf::sweep
