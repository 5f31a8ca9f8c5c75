// vrf: fronthaul blocking analysis, simulation and sweeps.
//
// Exit codes: 0 success, 1 validation or sweep failure, 2 configuration error.

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <thread>

#include "CLI11.hpp"
#include "vrf/aggregator.hpp"
#include "vrf/error.hpp"
#include "vrf/log.hpp"
#include "vrf/rru.hpp"
#include "vrf/sim.hpp"
#include "vrf/sweep.hpp"
#include "vrf/validate.hpp"

namespace {

constexpr int kOk = 0;
constexpr int kFailed = 1;
constexpr int kConfigError = 2;

vrf::aggregator::CapacityConvention parse_convention(const std::string& s) {
  if (s == "true_n") return vrf::aggregator::CapacityConvention::kTrueN;
  if (s == "max_rru") return vrf::aggregator::CapacityConvention::kMaxRru;
  throw vrf::InvalidConfiguration("--capacity-convention must be true_n or max_rru");
}

vrf::ModelConfig load(const std::string& path, std::optional<int> gap) {
  vrf::ModelConfig c = path.empty() ? vrf::ModelConfig{} : vrf::load_config(path);
  if (gap) c.threshold_gap = *gap;
  return c;
}

void dump_matrix(const std::filesystem::path& file, const vrf::ctmc::RateMatrix& q) {
  std::ofstream out(file);
  if (!out) throw vrf::InvalidConfiguration("cannot write '" + file.string() + "'");
  out << "row,col,rate\n";
  for (std::size_t i = 0; i < q.size(); ++i)
    for (std::size_t j = 0; j < q.size(); ++j)
      if (q(i, j) != 0.0) out << i << ',' << j << ',' << q(i, j) << '\n';
}

std::ostream& open_out(const std::string& path, std::ofstream& file) {
  if (path.empty() || path == "-") return std::cout;
  file.open(path);
  if (!file) throw vrf::InvalidConfiguration("cannot write '" + path + "'");
  return file;
}

int analyze(const std::string& config, std::optional<int> gap, const std::string& out_path,
            const std::string& dump_dir, const std::string& convention) {
  const vrf::ModelConfig c = load(config, gap);
  const vrf::Model model = vrf::resolve(c);
  const auto spec = vrf::aggregator::make_spec(model, parse_convention(convention));
  const auto space = vrf::aggregator::enumerate_states(spec);
  const auto p = vrf::aggregator::product_form(spec, space);
  const auto report = vrf::aggregator::blocking(spec, space, p);

  std::printf("cluster size        %d (effective %d, link fits %d at d_1)\n", c.cluster_size, report.n_rru_effective,
              vrf::aggregator::max_rru(model.capacity_mbps, model.rates.rate(1)));
  std::printf("rates (Mbit/s)     ");
  for (double d : model.rates.rates()) std::printf(" %g", d);
  std::printf("\nstates              %zu\n", report.state_count);
  for (std::size_t m = 0; m < report.per_rate.size(); ++m)
    std::printf("P_B[%zu]              %.9g  (|K| = %zu)\n", m, report.per_rate[m], report.set_sizes[m]);
  std::printf("P_B                 %.9g\n", report.total);

  if (!out_path.empty()) {
    std::ofstream file;
    std::ostream& out = open_out(out_path, file);
    vrf::sweep::SweepRow row;
    row.point = {c.cluster_size, c.a, c.n_d, c.threshold_gap, "poisson"};
    row.pb_analytic = report.total;
    row.pb_components = report.per_rate;
    vrf::sweep::write_header(out);
    vrf::sweep::write_row(out, row);
  }
  if (!dump_dir.empty()) {
    std::filesystem::create_directories(dump_dir);
    const vrf::rru::RruChainSpec rspec(model.rates, model.thresholds, model.traffic);
    dump_matrix(std::filesystem::path(dump_dir) / "rru_generator.csv", vrf::rru::GlobalRruChain(rspec).generator());
    if (space.size() <= 5000)
      dump_matrix(std::filesystem::path(dump_dir) / "aggregator_generator.csv",
                  vrf::aggregator::generator(spec, space));
    else
      vrf::log().warn("aggregator has {} states; generator dump skipped", space.size());
  }
  return kOk;
}

int simulate(const std::string& config, std::optional<int> gap, const std::string& out_path, std::uint64_t events,
             std::uint64_t seed, const std::string& arrival_text, double latency) {
  const vrf::ModelConfig c = load(config, gap);
  const vrf::Model model = vrf::resolve(c);
  const auto arrival = vrf::sim::parse_arrival(arrival_text, model.traffic.lambda);
  vrf::sim::SimConfig cfg = vrf::sim::make_sim_config(model, arrival, events, seed);
  cfg.reconfig_latency = latency;

  const auto start = std::chrono::steady_clock::now();
  const auto s = vrf::sim::run(cfg);
  const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

  std::fprintf(stderr, "arrivals %llu  accepted %llu  blocked_rru %llu  blocked_fha %llu  upgrade requests %llu\n",
               static_cast<unsigned long long>(s.arrivals), static_cast<unsigned long long>(s.accepted),
               static_cast<unsigned long long>(s.blocked_rru), static_cast<unsigned long long>(s.blocked_fha),
               static_cast<unsigned long long>(s.upgrade_requests));
  std::fprintf(stderr, "P_B (link) %.6g +- %.3g   per call: link %.6g, servers %.6g\n", s.pb_fha, s.pb_fha_ci,
               s.pb_fha_call, s.pb_rru_call);
  std::fprintf(stderr, "aggregate rate: mean %.6g, max %.6g Mbit/s\n", s.mean_aggregate_rate, s.max_aggregate_rate);

  std::ofstream file;
  std::ostream& out = open_out(out_path, file);
  vrf::sweep::SweepRow row;
  row.point = {c.cluster_size, c.a, c.n_d, c.threshold_gap, arrival.label()};
  row.events = s.events;
  row.seed = seed;
  row.pb_sim = s.pb_fha;
  row.pb_sim_ci = s.pb_fha_ci;
  row.blocked_rru = s.blocked_rru;
  row.blocked_fha = s.blocked_fha;
  row.wall_s = wall;
  vrf::sweep::write_header(out);
  vrf::sweep::write_row(out, row);
  return kOk;
}

int sweep(const std::string& plan_path, const std::string& out_path, int jobs) {
  vrf::sweep::SweepPlan plan = vrf::sweep::load_plan(plan_path);
  std::string target = out_path;
  if (target.empty() && plan.out) target = plan.out->string();
  std::ofstream file;
  std::ostream& out = open_out(target, file);
  vrf::sweep::write_header(out);
  out.flush();
  const std::size_t failed = vrf::sweep::run_sweep(plan, jobs, [&](const vrf::sweep::SweepRow& row) {
    vrf::sweep::write_row(out, row);
    out.flush();
  });
  if (failed > 0) {
    std::fprintf(stderr, "%zu of %zu grid points failed\n", failed, plan.size());
    return kFailed;
  }
  return kOk;
}

int validate(bool skip_sim, std::uint64_t sim_events, std::uint64_t seed, const std::string& json_path) {
  vrf::validate::Options o;
  o.simulation = !skip_sim;
  o.sim_events = sim_events;
  o.seed = seed;
  const auto report = vrf::validate::run_all(o);
  for (const auto& s : report.suites) {
    std::printf("%s %-40s %.3g (< %.3g)", s.passed ? "PASS" : "FAIL", s.name.c_str(), s.metric, s.threshold);
    if (!s.detail.empty()) std::printf("  %s", s.detail.c_str());
    std::printf("\n");
  }
  if (!json_path.empty()) {
    std::ofstream file;
    open_out(json_path, file) << report.to_json() << '\n';
  }
  return report.passed() ? kOk : kFailed;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Variable-rate fronthaul blocking analysis"};
  app.require_subcommand(1);

  std::string config, plan, out, arrival = "poisson", dump_dir, convention = "true_n", json_path;
  std::optional<int> gap;
  std::uint64_t events = 1'000'000;
  std::uint64_t seed = 1;
  std::uint64_t sim_events = 200'000;
  int jobs = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  double latency = 0.0;
  bool skip_sim = false;

  auto* an = app.add_subcommand("analyze", "Analytic blocking probability for one configuration");
  an->add_option("--config", config, "Model configuration (JSON)")->check(CLI::ExistingFile);
  an->add_option("--gap", gap, "Override the forward/reverse threshold gap");
  an->add_option("--out", out, "Also write a CSV row here");
  an->add_option("--dump-dir", dump_dir, "Write generator matrices as (row, col, rate) CSV");
  an->add_option("--capacity-convention", convention, "true_n or max_rru");

  auto* si = app.add_subcommand("simulate", "Event-driven simulation for one configuration");
  si->add_option("--config", config, "Model configuration (JSON)")->check(CLI::ExistingFile);
  si->add_option("--gap", gap, "Override the forward/reverse threshold gap");
  si->add_option("--out", out, "CSV output (default stdout)");
  si->add_option("--events", events, "Events after warm-up");
  si->add_option("--seed", seed, "Random seed");
  si->add_option("--arrival", arrival, "poisson or weibull:K");
  si->add_option("--latency", latency, "Reconfiguration latency for downgrades (time units)");

  auto* sw = app.add_subcommand("sweep", "Run a parameter sweep plan");
  sw->add_option("--plan", plan, "Sweep plan (JSON)")->required()->check(CLI::ExistingFile);
  sw->add_option("--out", out, "CSV output (default: plan's out, else stdout)");
  sw->add_option("--jobs", jobs, "Worker threads")->check(CLI::PositiveNumber);

  auto* va = app.add_subcommand("validate", "Run the oracle and simulation self-checks");
  va->add_flag("--skip-sim", skip_sim, "Skip the analytic-versus-simulation grid");
  va->add_option("--sim-events", sim_events, "Events per simulated grid point");
  va->add_option("--seed", seed, "Random seed");
  va->add_option("--json", json_path, "Write a machine-readable summary");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kConfigError;
  }

  try {
    if (an->parsed()) return analyze(config, gap, out, dump_dir, convention);
    if (si->parsed()) return simulate(config, gap, out, events, seed, arrival, latency);
    if (sw->parsed()) return sweep(plan, out, jobs);
    if (va->parsed()) return validate(skip_sim, sim_events, seed, json_path);
  } catch (const vrf::InvalidConfiguration& e) {
    std::fprintf(stderr, "configuration error: %s\n", e.what());
    return kConfigError;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kFailed;
  }
  return kOk;
}
