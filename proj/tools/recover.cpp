// Command-line front end: Monte-Carlo sweeps, single recovery runs with
// diagnostics, and the oracle-equivalence selftest.

#include <CLI11.hpp>

#include <chrono>
#include <fstream>
#include <iostream>
#include <stdexcept>

#include "nsr/harness.hpp"
#include "nsr/io.hpp"
#include "nsr/selftest.hpp"

namespace {

int cmd_sweep(const std::string& config_path) {
  const nsr::ExperimentConfig config = nsr::parse_config_file(config_path);
  const auto rows = nsr::run_sweep(config);
  std::cout << nsr::metrics_to_csv(rows, config.emit_runtime);
  if (!config.output_path.empty()) {
    std::cerr << "wrote " << config.output_path << "\n";
  }
  return 0;
}

int cmd_once(const std::string& config_path, const std::string& preset,
             double snr, const std::string& algo, uint64_t seed,
             int dump_marginal, const std::string& dump_path) {
  nsr::ExperimentConfig config = config_path.empty()
                                     ? nsr::preset_by_name(preset)
                                     : nsr::parse_config_file(config_path);
  config.seed = seed;
  config.trace_variable = dump_marginal;
  if (dump_marginal >= config.model.n) {
    throw std::invalid_argument("--dump-marginal index out of range");
  }

  const nsr::Instance inst = nsr::make_instance(config, snr, 0);
  const auto t0 = std::chrono::steady_clock::now();
  const nsr::RecoveryResult r = nsr::recover(algo, inst, config);
  const double seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
          .count();

  const nsr::NoiseModel noise{inst.sigma_n};
  std::cout << "algo=" << algo << " target_snr_db=" << snr << " seed=" << seed
            << "\n"
            << "n=" << config.model.n << " m=" << config.m
            << " column_weight=" << config.column_weight
            << " kind=" << (config.model.kind == nsr::SignalKind::kSigned
                                ? "signed"
                                : "gaussian")
            << "\n"
            << "sigma_n=" << nsr::format_double(inst.sigma_n)
            << " realized_snr_db="
            << nsr::format_double(nsr::snr_db(inst.matrix, inst.signal, noise))
            << "\n"
            << "true_support=" << inst.signal.support_size()
            << " detected_support="
            << std::count(r.s_hat.begin(), r.s_hat.end(), uint8_t{1}) << "\n"
            << "ser=" << nsr::format_double(r.ser) << "\n"
            << "nmse=" << nsr::format_double(r.nmse) << "\n"
            << "runtime_s=" << seconds << "\n"
            << "wrap_events=" << r.diagnostics.wrap_events
            << " underflow_fallbacks=" << r.diagnostics.underflow_fallbacks
            << "\n";

  if (dump_marginal >= 0) {
    if (r.diagnostics.trace.empty()) {
      std::cerr << "no marginal trace: algorithm '" << algo
                << "' does not run message passing\n";
    } else {
      std::ofstream os(dump_path);
      if (!os) {
        throw std::runtime_error("cannot open dump file: " + dump_path);
      }
      nsr::write_marginal_trace_csv(os, r.diagnostics.trace);
      std::cerr << "wrote " << dump_path << "\n";
    }
  }
  return 0;
}

int cmd_selftest() {
  const auto results = nsr::run_selftest();
  bool all_pass = true;
  for (const auto& r : results) {
    std::cout << (r.pass ? "[PASS] " : "[FAIL] ") << r.name << ": " << r.detail
              << "\n";
    all_pass = all_pass && r.pass;
  }
  return all_pass ? 0 : 2;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Noisy sparse-signal recovery benchmarks"};
  app.require_subcommand(1);

  auto* sweep = app.add_subcommand("sweep", "Run a Monte-Carlo SNR sweep");
  std::string sweep_config;
  sweep->add_option("--config", sweep_config, "key=value config file")
      ->required();

  auto* once = app.add_subcommand("once", "Recover a single instance");
  std::string once_config;
  std::string once_preset = "desk";
  std::string once_algo;
  double once_snr = 0.0;
  uint64_t once_seed = 1;
  int once_dump = -1;
  std::string once_dump_path = "marginal_trace.csv";
  once->add_option("--snr", once_snr, "target SNR in dB")->required();
  once->add_option("--algo", once_algo, "algorithm id")->required();
  once->add_option("--seed", once_seed, "RNG seed (default 1)");
  once->add_option("--config", once_config, "key=value config file");
  once->add_option("--preset", once_preset,
                   "preset when no config file is given (desk|full)");
  once->add_option("--dump-marginal", once_dump,
                   "element index whose per-round marginal is dumped");
  once->add_option("--dump-path", once_dump_path,
                   "trace CSV path (default marginal_trace.csv)");

  auto* selftest =
      app.add_subcommand("selftest", "Run the oracle-equivalence checks");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;  // malformed arguments -> 1
  }

  try {
    if (sweep->parsed()) return cmd_sweep(sweep_config);
    if (once->parsed()) {
      return cmd_once(once_config, once_preset, once_snr, once_algo, once_seed,
                      once_dump, once_dump_path);
    }
    if (selftest->parsed()) return cmd_selftest();
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
