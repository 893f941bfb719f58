#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "nsr/bp.hpp"
#include "nsr/detector.hpp"
#include "nsr/model.hpp"

namespace nsr {

// Algorithm identifiers accepted by the harness and the CLI:
//   bht-bp   noise-aware BP, calibrated hypothesis-test detector, ridge values
//   map-bp   noise-aware BP, peak detector, ridge values
//   csbp-ns  noise-aware BP, peak detector, peak value readout
//   csbp     noise-blind BP (narrow surrogate kernel), peak detector/readout
//   oracle   genie-aided: true support, ridge values
const std::vector<std::string>& known_algorithms();

struct ExperimentConfig {
  SignalModel model;       // n, q, sigma_x1, x_min, x_max, kind
  int m = 0;               // measurements
  int column_weight = 4;
  int n_d = 256;           // density grid size
  int iterations = 10;     // BP rounds
  double calibration_c = 1.0 / 6.0;
  double bht_x_min = -1.0;  // < 0: model.x_min (Gaussian) or sigma_x1 (Signed)
  std::vector<std::string> algos;
  std::vector<double> snr_points;  // dB
  int trials = 100;
  uint64_t seed = 1;
  std::string output_path = "sweep.csv";
  int workers = 0;           // 0: hardware concurrency
  bool emit_runtime = false; // true: real timings in the CSV (non-reproducible)
  int trace_variable = -1;   // single-run diagnostics: record this element's
                             // marginal after every BP round

  double effective_bht_x_min() const;
  void validate() const;
};

// Mid-size configuration for quick runs: N=512, M=256, L=4, q=0.05,
// sigma_x1=5, x_min=1.25, n_d=256, 10 rounds, 100 trials.
ExperimentConfig desk_preset();

// Full-size configuration: N=1024, M=512, 200 trials, otherwise as desk.
ExperimentConfig full_preset();

ExperimentConfig preset_by_name(const std::string& name);

// Flat key=value configuration text ('#' comments, blank lines ignored).
// "preset=<name>" loads that preset's defaults before later keys override.
ExperimentConfig parse_config_text(const std::string& text);
ExperimentConfig parse_config_file(const std::string& path);
void apply_key_value(ExperimentConfig& config, const std::string& key,
                     const std::string& value);

// One Monte-Carlo problem instance. The unit-variance noise draw is stored
// separately so different SNR points can reuse common random numbers.
struct Instance {
  SensingMatrix matrix;
  SparseSignal signal;
  std::vector<double> unit_noise;
  std::vector<double> z;
  double sigma_n = 0.0;
};

// Deterministic instance for (config, snr, trial): independent RNG stream
// mix(seed + trial), sigma_n from the target SNR, z = Phi x0 + sigma_n * u.
Instance make_instance(const ExperimentConfig& config, double snr_db,
                       int trial);

struct RecoveryResult {
  std::vector<double> x_hat;
  StateVector s_hat;
  double ser = 0.0;
  double nmse = 0.0;
  BpDiagnostics diagnostics;
};

// Support error rate: Hamming distance between the state vectors over N.
double ser(const StateVector& truth, const StateVector& detected);

// ||x_hat - x0||^2 / ||x0||^2. A zero-energy truth scores 0 for an all-zero
// estimate and ||x_hat||^2 otherwise.
double nmse(const std::vector<double>& x_hat, const std::vector<double>& x0);

// Single-algorithm pipelines (each runs its own BP where needed).
RecoveryResult recover_bht_bp(const Instance& inst,
                              const ExperimentConfig& config);
RecoveryResult recover_map_bp(const Instance& inst,
                              const ExperimentConfig& config);
RecoveryResult recover_csbp(const Instance& inst,
                            const ExperimentConfig& config, bool noise_aware);
RecoveryResult recover_oracle(const Instance& inst,
                              const ExperimentConfig& config);
RecoveryResult recover(const std::string& algo, const Instance& inst,
                       const ExperimentConfig& config);

struct MetricsRow {
  std::string algo;
  double snr_db = 0.0;
  int trials = 0;  // completed trials (failures are excluded and counted)
  long failures = 0;
  double ser_mean = 0.0;
  double nmse_mean = 0.0;
  double runtime_s = 0.0;  // summed per-trial seconds for this row
};

// Full Monte-Carlo sweep over config.snr_points x config.algos. Trials run
// on a worker pool; per-trial results reduce in trial order, so output is
// identical for any worker count. Within a trial all algorithms share the
// same instance, and BP marginals are reused across algorithms that request
// the same variant. Writes CSV to config.output_path unless it is empty.
std::vector<MetricsRow> run_sweep(const ExperimentConfig& config);

// CSV with header algo,snr_db,trials,ser_mean,nmse_mean,runtime_s. The
// runtime column prints as 0.000000 unless emit_runtime is set.
std::string metrics_to_csv(const std::vector<MetricsRow>& rows,
                           bool emit_runtime);

}  // namespace nsr
