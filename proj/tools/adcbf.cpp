// adcbf: run single scenarios, Monte Carlo sweeps and the invariant suite.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "adcbf/config.hpp"
#include "adcbf/harness.hpp"
#include "adcbf/verify.hpp"

namespace fs = std::filesystem;
using namespace adcbf;

namespace {

constexpr int kOk = 0;
constexpr int kConfigError = 1;
constexpr int kDiverged = 2;

struct CommonOptions {
  std::string config_path;
  std::vector<std::string> sets;
  std::string scenario, method, seed, out;
};

void add_common(CLI::App* cmd, CommonOptions& o) {
  cmd->add_option("-c,--config", o.config_path, "config file with 'key = value' lines");
  cmd->add_option("--set", o.sets, "override one key, 'key=value' (repeatable; applied after the file)");
  cmd->add_option("--scenario", o.scenario, "acc | nonpoly");
  cmd->add_option("--method", o.method, "adcbf | robust | nominal | adcbf-no-prediction");
  cmd->add_option("--seed", o.seed, "random seed");
  cmd->add_option("-o,--out", o.out, "output directory");
}

/// File keys first, then --set, then the dedicated flags.
void resolve(config::Registry& reg, const CommonOptions& o) {
  if (!o.config_path.empty()) reg.load_file(o.config_path);
  for (const auto& kv : o.sets) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + kv + "'");
    reg.set(config::trim(kv.substr(0, eq)), kv.substr(eq + 1));
  }
  if (!o.scenario.empty()) reg.set("scenario", o.scenario);
  if (!o.method.empty()) reg.set("method", o.method);
  if (!o.seed.empty()) reg.set("seed", o.seed);
  if (!o.out.empty()) reg.set("output_dir", o.out);
}

std::string run_prefix(const config::Settings& s) {
  return s.scenario + "_" + std::string(scen::to_string(s.method)) + "_s" + std::to_string(s.seed);
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream os(path);
  if (!os) throw Error("cannot write '" + path.string() + "'");
  os << text;
}

int cmd_run(const CommonOptions& o) {
  config::Settings s;
  config::Registry reg(s);
  resolve(reg, o);
  const auto sc = s.build();
  const auto cfg = s.sim_config();
  const auto result = sim::simulate(sc, cfg);

  const fs::path dir(s.output_dir);
  fs::create_directories(dir);
  const std::string prefix = run_prefix(s);
  {
    std::ofstream os(dir / (prefix + "_trace.csv"));
    if (!os) throw Error("cannot write trace in '" + dir.string() + "'");
    sim::write_trace_csv(os, result.trace);
  }
  nlohmann::ordered_json j;
  j["scenario"] = s.scenario;
  j["method"] = std::string(scen::to_string(s.method));
  j["seed"] = s.seed;
  j["summary"] = sim::summary_json(result.summary);
  j["param_count"] = sc.arch.param_count();
  j["theta_initial"] = std::vector<double>(result.theta_initial.data(),
                                           result.theta_initial.data() + result.theta_initial.size());
  j["theta_final"] =
      std::vector<double>(result.theta_final.data(), result.theta_final.data() + result.theta_final.size());
  if (s.scenario == "nonpoly" && scen::uses_identifier(s.method)) {
    const auto est = sim::estimate_loss_constants(sc, result.theta_final, s.nonpoly.diamond_radius);
    j["loss_constants_estimate"] = {{"Delta_U", est.mismatch}, {"L_U", est.lipschitz}, {"samples", est.samples}};
  }
  j["config"] = reg.echo_json();
  write_text(dir / (prefix + "_summary.json"), j.dump(2) + "\n");
  write_text(dir / (prefix + "_resolved.cfg"), reg.echo());

  for (const auto& w : result.summary.warnings) std::cerr << "warning: " << w << '\n';
  const auto& r = result.summary;
  std::cout << prefix << ": max_B " << r.max_B << ", steady_B " << r.steady_B << ", time outside " << r.time_outside
            << " s, rms " << r.rms_tracking << ", infeasible " << r.infeasible_count << ", runtime " << r.runtime_s
            << " s\n";
  if (r.aborted) {
    std::cerr << "run aborted at step " << r.abort_step << ": " << r.abort_reason << '\n';
    return kDiverged;
  }
  return kOk;
}

int cmd_montecarlo(const CommonOptions& o, int iterations, const std::string& trajectories, int workers) {
  config::Settings s;
  config::Registry reg(s);
  resolve(reg, o);
  if (iterations > 0) reg.set("iterations", std::to_string(iterations));
  if (!trajectories.empty()) reg.set("trajectories", trajectories);
  if (workers >= 0) reg.set("workers", std::to_string(workers));
  if (s.scenario != "nonpoly") throw ConfigError("montecarlo sweeps the nonpoly scenario; set scenario = nonpoly");

  sim::MonteCarloConfig mc;
  mc.trajectories = s.trajectories;
  mc.iterations = s.iterations;
  mc.base_seed = s.seed;
  mc.workers = s.workers;
  mc.sim = s.sim_config();
  if (s.method != scen::Method::Adcbf) mc.methods = {scen::Method::Adcbf, s.method};
  const auto res = sim::monte_carlo([&s](scen::RefKind k) { return s.build(k); }, mc);

  const fs::path dir(s.output_dir);
  fs::create_directories(dir);
  const std::string prefix = "montecarlo_" + s.scenario + "_s" + std::to_string(s.seed);
  {
    std::ofstream os(dir / (prefix + "_table.csv"));
    sim::write_table_csv(os, res.table);
  }
  {
    std::ofstream os(dir / (prefix + "_trials.csv"));
    os << "method,trajectory,iteration,seed,loss1_start,loss2_start,max_B,steady_B,time_outside_s,rms_tracking,"
          "infeasible_count,envelope_violations,aborted\n";
    for (const auto& t : res.trials) {
      os << scen::to_string(t.method) << ',' << scen::to_string(t.trajectory) << ',' << t.iteration << ',' << t.seed
         << ',' << sim::fmt17(t.losses[0].first) << ',' << sim::fmt17(t.losses[1].first) << ','
         << sim::fmt17(t.summary.max_B) << ',' << sim::fmt17(t.summary.steady_B) << ','
         << sim::fmt17(t.summary.time_outside) << ',' << sim::fmt17(t.summary.rms_tracking) << ','
         << t.summary.infeasible_count << ',' << t.summary.envelope_violations << ',' << (t.summary.aborted ? 1 : 0)
         << '\n';
    }
  }
  nlohmann::ordered_json j;
  j["iterations"] = s.iterations;
  j["config"] = reg.echo_json();
  write_text(dir / (prefix + "_summary.json"), j.dump(2) + "\n");
  write_text(dir / (prefix + "_resolved.cfg"), reg.echo());

  sim::write_table_csv(std::cout, res.table);
  bool aborted = false;
  for (const auto& t : res.trials) aborted = aborted || t.summary.aborted;
  return aborted ? kDiverged : kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Adaptive DNN control barrier function simulator"};
  app.require_subcommand(1);

  CommonOptions run_opts;
  auto* run = app.add_subcommand("run", "simulate one scenario and write trace + summary");
  add_common(run, run_opts);

  CommonOptions mc_opts;
  int iterations = 0;
  int workers = -1;
  std::string trajectories;
  auto* mc = app.add_subcommand("montecarlo", "seeded sweep over references with random outages");
  add_common(mc, mc_opts);
  mc->add_option("-n,--iterations", iterations, "iterations per trajectory");
  mc->add_option("--trajectories", trajectories, "comma-separated references");
  mc->add_option("-j,--workers", workers, "worker threads (0 = all hardware threads)");

  bool mutate_jacobian = false;
  auto* verify = app.add_subcommand("verify", "run the invariant suite");
  verify->add_flag("--mutate-jacobian", mutate_jacobian, "corrupt the analytic Jacobian (self-test of the suite)");

  app.add_subcommand("keys", "list every config key with its default");

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) return cmd_run(run_opts);
    if (mc->parsed()) return cmd_montecarlo(mc_opts, iterations, trajectories, workers);
    if (verify->parsed()) {
      verify::Options vo;
      vo.mutate_jacobian = mutate_jacobian;
      const auto report = verify::run_suite(vo, std::cout);
      return report.all_passed() ? kOk : 3;
    }
    config::Settings s;
    config::Registry reg(s);
    std::cout << reg.help();
    return kOk;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfigError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kConfigError;
  }
}
