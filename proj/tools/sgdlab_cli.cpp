// Command-line driver: experiment registry, oracle evaluation, artifact
// emission. Exit codes: 0 all tests passed, 1 test failure, 2 usage error,
// 3 I/O error.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "sgdlab/sgdlab.hpp"

namespace {

using namespace sgdlab;

struct CliOptions {
  std::uint64_t seed = 42;
  std::string out_dir = "out";
  int threads = 0;
  std::vector<std::string> sets;
  std::string config_file;
};

std::map<std::string, double> parse_sets(const std::vector<std::string>& sets) {
  std::map<std::string, double> overrides;
  for (const auto& kv : sets) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos)
      throw UsageError("--set expects key=value, got: " + kv);
    const std::string key = kv.substr(0, eq);
    overrides[key] = parse_double(key, kv.substr(eq + 1));
  }
  return overrides;
}

ExperimentSpec build_spec(const std::string& name, const CliOptions& opt) {
  RunConfig cfg;
  cfg.experiment = name;
  cfg.master_seed = opt.seed;
  cfg.out_dir = opt.out_dir;
  cfg.threads = opt.threads;
  if (!opt.config_file.empty()) apply_config_file(opt.config_file, cfg);
  // command line wins over the config file
  cfg.master_seed = opt.seed;
  cfg.threads = opt.threads;
  for (const auto& [k, v] : parse_sets(opt.sets)) cfg.overrides[k] = v;
  return resolve_spec(name, cfg.overrides, cfg.master_seed, cfg.threads);
}

int run_one(const std::string& name, const CliOptions& opt, bool& all_ok) {
  ExperimentSpec spec = build_spec(name, opt);
  ExperimentReport report = run_experiment(spec);
  emit_artifacts(report, opt.out_dir);
  for (const auto& r : report.results) {
    std::printf("  [%s] %s  (statistic %.6g vs threshold %.6g, n=%lld)\n",
                r.passed ? "PASS" : "FAIL", r.description.c_str(), r.statistic,
                r.threshold, static_cast<long long>(r.n_samples));
    if (!r.passed) all_ok = false;
  }
  std::printf("%s: %s in %.2f s -> %s/%s/report.json\n", name.c_str(),
              report.all_passed() ? "all tests passed" : "TEST FAILURES",
              report.wall_time_seconds, opt.out_dir.c_str(), name.c_str());
  return report.all_passed() ? 0 : 1;
}

void cmd_list() {
  for (const auto& info : experiment_registry()) {
    std::printf("%s\n  %s\n  anchor: %s\n  defaults:", info.name.c_str(),
                info.description.c_str(), info.anchor.c_str());
    for (const auto& [k, ps] : info.schema)
      std::printf(" %s=%s", k.c_str(), fmt_double(ps.def).c_str());
    std::printf("\n");
  }
}

int cmd_oracle_eval(const std::vector<std::string>& args) {
  if (args.empty()) throw UsageError("oracle eval: missing oracle name");
  const std::string& name = args[0];
  auto need = [&](std::size_t k) {
    if (args.size() != k + 1)
      throw UsageError("oracle eval " + name + ": expected " + std::to_string(k) +
                       " numeric arguments");
  };
  auto num = [&](std::size_t i) { return parse_double("arg", args[i]); };

  if (name == "bessel_j1") {
    need(1);
    const OracleResult r = bessel_j1_result(num(1));
    std::printf("%s (est_error %.3g)\n", fmt_double(r.value).c_str(), r.est_error);
  } else if (name == "bessel_y1") {
    need(1);
    const OracleResult r = bessel_y1_result(num(1));
    std::printf("%s (est_error %.3g)\n", fmt_double(r.value).c_str(), r.est_error);
  } else if (name == "exp_decay_path") {
    need(5);
    Vec tc(2), x0(2);
    tc << num(1), num(2);
    x0 << num(3), num(4);
    const Vec x = exp_decay_path(tc, x0, num(5));
    std::printf("%s %s (est_error 0)\n", fmt_double(x[0]).c_str(),
                fmt_double(x[1]).c_str());
  } else if (name == "bessel_path") {
    need(5);
    Vec tc(2), x0(2);
    tc << num(1), num(2);
    x0 << num(3), num(4);
    const Vec x = bessel_path(tc, x0, num(5));
    std::printf("%s %s (est_error 1e-13)\n", fmt_double(x[0]).c_str(),
                fmt_double(x[1]).c_str());
  } else if (name == "ou_variance") {
    need(3);
    Vec h(1), s(1);
    h << num(1);
    s << num(2);
    const Mat v = ou_variance(h, s, num(3));
    std::printf("%s (est_error 0)\n", fmt_double(v(0, 0)).c_str());
  } else if (name == "tensor_flow_x1sq") {
    need(2);
    std::printf("%s (est_error 0)\n", fmt_double(tensor_flow_x1sq(num(1), num(2))).c_str());
  } else if (name == "accel_limit_variance") {
    need(2);
    const OracleResult r = accel_limit_variance(num(1), num(2));
    std::printf("%s (est_error %.3g)\n", fmt_double(r.value).c_str(), r.est_error);
  } else {
    throw UsageError(
        "unknown oracle: " + name +
        " (available: bessel_j1 bessel_y1 exp_decay_path bessel_path ou_variance "
        "tensor_flow_x1sq accel_limit_variance)");
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"simulation laboratory for gradient-descent diffusion limits"};
  app.require_subcommand(1);
  CliOptions opt;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--seed", opt.seed, "master seed (default 42)");
    sub->add_option("--out", opt.out_dir, "output directory (default out)");
    sub->add_option("--threads", opt.threads, "worker threads, 0 = auto");
    sub->add_option("--set", opt.sets, "parameter override key=value")
        ->take_all();
    sub->add_option("--config", opt.config_file, "config file (key = value)");
  };

  CLI::App* list_cmd = app.add_subcommand("list", "list registered experiments");
  CLI::App* run_cmd = app.add_subcommand("run", "run one experiment");
  std::string run_name;
  run_cmd->add_option("experiment", run_name, "experiment name")->required();
  add_common(run_cmd);
  CLI::App* all_cmd = app.add_subcommand("all", "run the full acceptance suite");
  add_common(all_cmd);
  CLI::App* oracle_cmd = app.add_subcommand("oracle", "closed-form oracle access");
  CLI::App* eval_cmd = oracle_cmd->add_subcommand("eval", "evaluate an oracle");
  std::vector<std::string> oracle_args;
  eval_cmd->add_option("args", oracle_args, "oracle name and arguments")
      ->expected(-1);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (list_cmd->parsed()) {
      cmd_list();
      return 0;
    }
    if (oracle_cmd->parsed()) return cmd_oracle_eval(oracle_args);
    if (run_cmd->parsed()) {
      bool ok = true;
      return run_one(run_name, opt, ok);
    }
    if (all_cmd->parsed()) {
      bool all_ok = true;
      for (const auto& info : experiment_registry()) run_one(info.name, opt, all_ok);
      std::printf("suite: %s\n", all_ok ? "ALL PASSED" : "FAILURES PRESENT");
      return all_ok ? 0 : 1;
    }
  } catch (const UsageError& e) {
    std::fprintf(stderr, "usage error: %s\n", e.what());
    if (!std::string(e.what()).rfind("unknown experiment", 0)) {
      std::fprintf(stderr, "registered experiments:\n");
      for (const auto& info : experiment_registry())
        std::fprintf(stderr, "  %s\n", info.name.c_str());
    }
    return 2;
  } catch (const IoError& e) {
    std::fprintf(stderr, "io error: %s\n", e.what());
    return 3;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 2;
}
