// lorasim: batched LoRA kernel verification, roofline sweeps, and the
// deterministic multi-tenant serving simulator behind one command.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>

#include "CLI11.hpp"
#include "lorasim/config.hpp"
#include "lorasim/experiments.hpp"
#include "lorasim/simulator.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitVerificationFailure = 1;
constexpr int kExitConfigError = 2;

struct GlobalArgs {
  std::string config_path;
  std::string out_dir;
  bool seed_set = false;
  std::uint64_t seed = 0;
};

lorasim::ExperimentConfig resolve_config(const GlobalArgs& args) {
  lorasim::ExperimentConfig cfg;
  if (!args.config_path.empty()) {
    cfg = lorasim::load_config_file(args.config_path);
  } else {
    cfg.validate();
  }
  if (args.seed_set) cfg.workload.seed = args.seed;
  if (!args.out_dir.empty()) cfg.output.dir = args.out_dir;
  return cfg;
}

void write_file(const std::filesystem::path& path, const std::string& content) {
  std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
  out << content;
}

int run_verify(const GlobalArgs& args, int trials, bool inject_fault) {
  const std::uint64_t seed = args.seed_set ? args.seed : 42;
  if (trials == 0) {
    std::printf("verify-sgmv: 0 trials requested; vacuous pass (warning: nothing checked)\n");
    return kExitOk;
  }
  const lorasim::VerifyReport report = lorasim::verify_sgmv(trials, seed, inject_fault);
  for (const lorasim::VerifyCase& c : report.failed_cases) {
    std::fprintf(stderr,
                 "FAIL trial %d (%s): rows=%zu models=%zu h_in=%zu h_out=%zu rank=%zu "
                 "max deviation %.3e\n",
                 c.trial, lorasim::to_string(c.popularity), c.rows, c.models, c.h_in, c.h_out,
                 c.rank, c.deviation);
  }
  std::printf("verify-sgmv: %d trials, worst deviation %.3e, tolerance %.1e: %s\n",
              report.trials, report.worst_deviation, report.tolerance,
              report.passed() ? "PASS" : "FAIL");
  return report.passed() ? kExitOk : kExitVerificationFailure;
}

int run_roofline(const GlobalArgs& args, int max_batch) {
  const lorasim::ExperimentConfig cfg = resolve_config(args);
  const auto rows = lorasim::roofline_sweep(cfg.cost_params(), max_batch);
  const std::filesystem::path path = std::filesystem::path(cfg.output.dir) / "roofline.csv";
  write_file(path, lorasim::roofline_csv(rows));
  std::printf("roofline: wrote %zu rows to %s\n", rows.size(), path.string().c_str());
  return kExitOk;
}

int run_simulate(const GlobalArgs& args, const std::string& mode_name) {
  const lorasim::ExperimentConfig cfg = resolve_config(args);
  const lorasim::BatchMode mode = mode_name == "baseline" ? lorasim::BatchMode::SingleLora
                                                          : lorasim::BatchMode::MultiLora;
  const lorasim::MetricsLog log = lorasim::run_simulation(cfg, mode);
  const lorasim::Summary summary = log.summarize();
  const std::filesystem::path dir(cfg.output.dir);
  write_file(dir / cfg.output.steps_csv, log.steps_csv());
  write_file(dir / cfg.output.summary_json, summary.to_json_text());
  std::printf("simulate (%s mode): %d requests, %lld tokens, %.1f tok/s, p50 %.3f ms, "
              "p99 %.3f ms, %d migrations, peak %d GPUs busy\n",
              mode_name.c_str(), summary.total_requests,
              static_cast<long long>(summary.total_tokens), summary.throughput_tok_s,
              summary.p50_token_latency_s * 1e3, summary.p99_token_latency_s * 1e3,
              summary.migrations, summary.peak_gpus_busy);
  std::printf("simulate: wrote %s and %s\n", (dir / cfg.output.steps_csv).string().c_str(),
              (dir / cfg.output.summary_json).string().c_str());
  if (summary.stranded_requests > 0) {
    std::fprintf(stderr, "simulate: %d requests could never be placed (stranded)\n",
                 summary.stranded_requests);
    return kExitVerificationFailure;
  }
  return kExitOk;
}

int run_print_config(const GlobalArgs& args) {
  const lorasim::ExperimentConfig cfg = resolve_config(args);
  std::printf("%s", cfg.to_json_text().c_str());
  return kExitOk;
}

int run_compare(const GlobalArgs& args) {
  const lorasim::ExperimentConfig cfg = resolve_config(args);
  const lorasim::CompareReport report = lorasim::compare_modes(cfg);
  const std::filesystem::path path = std::filesystem::path(cfg.output.dir) / "compare.csv";
  write_file(path, lorasim::compare_csv(report));
  std::printf("%s", lorasim::compare_table(report).c_str());
  std::printf("compare: wrote %s\n", path.string().c_str());
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"batched LoRA serving reference kernels and cluster simulator"};
  app.require_subcommand(1);
  // Global flags are accepted on either side of the verb.
  app.fallthrough();

  GlobalArgs args;
  app.add_option("--config", args.config_path, "experiment config file (JSON)");
  app.add_option("--out", args.out_dir, "output directory (overrides config)");
  auto* seed_opt = app.add_option("--seed", args.seed, "workload seed (overrides config)");

  int trials = 1000;
  bool inject_fault = false;
  auto* verify = app.add_subcommand("verify-sgmv", "three-way kernel equivalence suite");
  verify->add_option("--trials", trials, "randomized trials to run");
  verify->add_flag("--inject-fault", inject_fault, "perturb one element (self-test hook)");

  int max_batch = 64;
  auto* roofline = app.add_subcommand("roofline", "kernel FLOP/IO/latency sweep as CSV");
  roofline->add_option("--max-batch", max_batch, "largest batch size in the sweep")
      ->check(CLI::PositiveNumber);

  std::string mode = "punica";
  auto* simulate = app.add_subcommand("simulate", "run the cluster simulator");
  simulate->add_option("--mode", mode, "batching mode")
      ->check(CLI::IsMember({"punica", "baseline"}));

  auto* compare = app.add_subcommand("compare", "punica vs baseline across workloads");

  auto* print_config =
      app.add_subcommand("print-config", "print the resolved config as canonical JSON");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfigError;
  }
  args.seed_set = seed_opt->count() > 0;

  try {
    if (verify->parsed()) return run_verify(args, trials, inject_fault);
    if (roofline->parsed()) return run_roofline(args, max_batch);
    if (simulate->parsed()) return run_simulate(args, mode);
    if (compare->parsed()) return run_compare(args);
    if (print_config->parsed()) return run_print_config(args);
  } catch (const lorasim::ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kExitConfigError;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitVerificationFailure;
  }
  return kExitOk;
}
