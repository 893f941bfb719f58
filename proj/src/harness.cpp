#include "nsr/harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "nsr/estimator.hpp"

namespace nsr {

namespace {

std::string trim(const std::string& s) {
  size_t b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  size_t e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream is(s);
  while (std::getline(is, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

int to_int(const std::string& key, const std::string& v) {
  size_t pos = 0;
  int x = 0;
  try {
    x = std::stoi(v, &pos);
  } catch (const std::exception&) {
    throw std::invalid_argument("config key '" + key + "': not an integer: " + v);
  }
  if (pos != v.size()) {
    throw std::invalid_argument("config key '" + key + "': not an integer: " + v);
  }
  return x;
}

uint64_t to_u64(const std::string& key, const std::string& v) {
  size_t pos = 0;
  unsigned long long x = 0;
  try {
    x = std::stoull(v, &pos);
  } catch (const std::exception&) {
    throw std::invalid_argument("config key '" + key + "': not an unsigned integer: " + v);
  }
  if (pos != v.size()) {
    throw std::invalid_argument("config key '" + key + "': not an unsigned integer: " + v);
  }
  return x;
}

double to_double(const std::string& key, const std::string& v) {
  size_t pos = 0;
  double x = 0.0;
  try {
    x = std::stod(v, &pos);
  } catch (const std::exception&) {
    throw std::invalid_argument("config key '" + key + "': not a real number: " + v);
  }
  if (pos != v.size()) {
    throw std::invalid_argument("config key '" + key + "': not a real number: " + v);
  }
  return x;
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw std::invalid_argument("config key '" + key + "': not a boolean: " + v);
}

std::string fmt10(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.10g", v);
  return buf;
}

// Shared per-configuration objects for the recovery pipelines.
struct Pipelines {
  const ExperimentConfig& config;
  DensityGrid grid;
  SampledDensity prior;
  ReferencePair bht_refs;

  explicit Pipelines(const ExperimentConfig& cfg)
      : config(cfg),
        grid(DensityGrid::for_sigma(cfg.n_d, cfg.model.sigma_x1)),
        prior(sample_spike_slab_prior(grid, cfg.model.q, cfg.model.sigma_x1)) {
    const double x_min = cfg.effective_bht_x_min();
    bht_refs = (x_min > 0.0)
                   ? build_calibrated_references(grid, cfg.model.q,
                                                 cfg.model.sigma_x1, x_min,
                                                 cfg.calibration_c)
                   : build_references(grid, cfg.model.q, cfg.model.sigma_x1);
  }

  std::vector<SampledDensity> run_bp(const Instance& inst, bool noise_aware,
                                     BpDiagnostics* diag) const {
    BpConfig bp;
    bp.iterations = config.iterations;
    bp.noise_aware = noise_aware;
    bp.trace_variable = config.trace_variable;
    return bp_run(inst.matrix, inst.z, prior, inst.sigma_n, bp, diag);
  }

  void fill_metrics(RecoveryResult& r, const Instance& inst) const {
    r.ser = ser(inst.signal.state, r.s_hat);
    r.nmse = nmse(r.x_hat, inst.signal.values);
  }

  RecoveryResult finish_bht(const std::vector<SampledDensity>& marginals,
                            const Instance& inst) const {
    RecoveryResult r;
    r.s_hat = bht_detect(marginals, bht_refs, config.model.q);
    r.x_hat = mmse_on_support(inst.matrix, r.s_hat, inst.z,
                              config.model.sigma_x1, inst.sigma_n);
    fill_metrics(r, inst);
    return r;
  }

  RecoveryResult finish_map(const std::vector<SampledDensity>& marginals,
                            const Instance& inst) const {
    RecoveryResult r;
    r.s_hat = map_detect(marginals);
    r.x_hat = mmse_on_support(inst.matrix, r.s_hat, inst.z,
                              config.model.sigma_x1, inst.sigma_n);
    fill_metrics(r, inst);
    return r;
  }

  RecoveryResult finish_peak(const std::vector<SampledDensity>& marginals,
                             const Instance& inst) const {
    RecoveryResult r;
    r.s_hat = map_detect(marginals);
    r.x_hat = map_value_readout(marginals);
    fill_metrics(r, inst);
    return r;
  }

  RecoveryResult finish_oracle(const Instance& inst) const {
    RecoveryResult r;
    r.s_hat = inst.signal.state;
    r.x_hat = oracle_estimate(inst.matrix, inst.signal, inst.z,
                              config.model.sigma_x1, inst.sigma_n);
    fill_metrics(r, inst);
    return r;
  }
};

enum class BpVariant { kNone, kAware, kBlind };

BpVariant variant_for(const std::string& algo) {
  if (algo == "bht-bp" || algo == "map-bp" || algo == "csbp-ns") {
    return BpVariant::kAware;
  }
  if (algo == "csbp") return BpVariant::kBlind;
  return BpVariant::kNone;
}

}  // namespace

const std::vector<std::string>& known_algorithms() {
  static const std::vector<std::string> algos = {"bht-bp", "map-bp", "csbp-ns",
                                                 "csbp", "oracle"};
  return algos;
}

double ExperimentConfig::effective_bht_x_min() const {
  if (bht_x_min >= 0.0) return bht_x_min;
  return (model.kind == SignalKind::kSigned) ? model.sigma_x1 : model.x_min;
}

void ExperimentConfig::validate() const {
  model.validate();
  if (m <= 0) throw std::invalid_argument("measurement count must be positive");
  if (column_weight < 1 || column_weight > m) {
    throw std::invalid_argument("column weight must satisfy 1 <= weight <= M");
  }
  if (n_d <= 0 || n_d % 2 != 0) {
    throw std::invalid_argument("grid size must be positive and even");
  }
  if (iterations < 1) {
    throw std::invalid_argument("at least one BP round required");
  }
  if (!(calibration_c > 0.0)) {
    throw std::invalid_argument("calibration width factor must be positive");
  }
  if (trials < 1) throw std::invalid_argument("trial count must be positive");
  if (workers < 0) throw std::invalid_argument("worker count must be >= 0");
  if (algos.empty()) throw std::invalid_argument("no algorithms selected");
  for (const auto& a : algos) {
    const auto& known = known_algorithms();
    if (std::find(known.begin(), known.end(), a) == known.end()) {
      throw std::invalid_argument("unknown algorithm id: " + a);
    }
  }
  if (snr_points.empty()) throw std::invalid_argument("no SNR points given");
  for (double s : snr_points) {
    if (!std::isfinite(s)) {
      throw std::invalid_argument("SNR points must be finite");
    }
  }
}

ExperimentConfig desk_preset() {
  ExperimentConfig cfg;
  cfg.model = SignalModel::make_gaussian(512, 0.05, 5.0, 1.25);
  cfg.m = 256;
  cfg.column_weight = 4;
  cfg.n_d = 256;
  cfg.iterations = 10;
  cfg.algos = known_algorithms();
  cfg.snr_points = {10, 15, 20, 25, 30, 35, 40, 45, 50};
  cfg.trials = 100;
  cfg.seed = 1;
  return cfg;
}

ExperimentConfig full_preset() {
  ExperimentConfig cfg = desk_preset();
  cfg.model = SignalModel::make_gaussian(1024, 0.05, 5.0, 1.25);
  cfg.m = 512;
  cfg.trials = 200;
  return cfg;
}

ExperimentConfig preset_by_name(const std::string& name) {
  if (name == "desk") return desk_preset();
  if (name == "full") return full_preset();
  throw std::invalid_argument("unknown preset: " + name);
}

void apply_key_value(ExperimentConfig& config, const std::string& key,
                     const std::string& value) {
  if (key == "preset") {
    config = preset_by_name(value);
  } else if (key == "kind") {
    if (value == "gaussian") {
      config.model.kind = SignalKind::kGaussian;
    } else if (value == "signed") {
      config.model.kind = SignalKind::kSigned;
    } else {
      throw std::invalid_argument("unknown signal kind: " + value);
    }
  } else if (key == "n") {
    config.model.n = to_int(key, value);
  } else if (key == "m") {
    config.m = to_int(key, value);
  } else if (key == "column_weight") {
    config.column_weight = to_int(key, value);
  } else if (key == "q") {
    config.model.q = to_double(key, value);
  } else if (key == "sigma_x1") {
    config.model.sigma_x1 = to_double(key, value);
  } else if (key == "x_min") {
    config.model.x_min = to_double(key, value);
  } else if (key == "x_max") {
    config.model.x_max = to_double(key, value);
  } else if (key == "n_d") {
    config.n_d = to_int(key, value);
  } else if (key == "iterations") {
    config.iterations = to_int(key, value);
  } else if (key == "calibration_c") {
    config.calibration_c = to_double(key, value);
  } else if (key == "bht_x_min") {
    config.bht_x_min = to_double(key, value);
  } else if (key == "algos") {
    config.algos = split_list(value);
  } else if (key == "snr_db") {
    config.snr_points.clear();
    for (const auto& item : split_list(value)) {
      config.snr_points.push_back(to_double(key, item));
    }
  } else if (key == "trials") {
    config.trials = to_int(key, value);
  } else if (key == "seed") {
    config.seed = to_u64(key, value);
  } else if (key == "output") {
    config.output_path = value;
  } else if (key == "workers") {
    config.workers = to_int(key, value);
  } else if (key == "emit_runtime") {
    config.emit_runtime = to_bool(key, value);
  } else {
    throw std::invalid_argument("unknown config key: " + key);
  }
}

ExperimentConfig parse_config_text(const std::string& text) {
  ExperimentConfig config = desk_preset();
  std::istringstream is(text);
  std::string line;
  int line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    const size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const size_t eq = line.find('=');
    if (eq == std::string::npos) {
      throw std::invalid_argument("config line " + std::to_string(line_no) +
                                  " is not key=value: " + line);
    }
    apply_key_value(config, trim(line.substr(0, eq)),
                    trim(line.substr(eq + 1)));
  }
  if (config.model.x_max < 0.0) {
    config.model.x_max = 3.0 * config.model.sigma_x1;
  }
  config.validate();
  return config;
}

ExperimentConfig parse_config_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::invalid_argument("cannot open config file: " + path);
  std::ostringstream buf;
  buf << is.rdbuf();
  return parse_config_text(buf.str());
}

Instance make_instance(const ExperimentConfig& config, double snr_db,
                       int trial) {
  Rng rng = make_rng(config.seed + static_cast<uint64_t>(trial));
  Instance inst;
  inst.matrix =
      generate_matrix(config.m, config.model.n, config.column_weight, rng);
  inst.signal = generate_signal(config.model, rng);
  inst.unit_noise.resize(config.m);
  std::normal_distribution<double> unit(0.0, 1.0);
  for (double& u : inst.unit_noise) u = unit(rng);
  inst.sigma_n = sigma_for_snr(inst.matrix, config.model, snr_db);
  inst.z = apply_matrix(inst.matrix, inst.signal.values);
  for (int j = 0; j < config.m; ++j) inst.z[j] += inst.sigma_n * inst.unit_noise[j];
  return inst;
}

double ser(const StateVector& truth, const StateVector& detected) {
  if (truth.size() != detected.size()) {
    throw std::invalid_argument("state vectors differ in length");
  }
  if (truth.empty()) throw std::invalid_argument("empty state vectors");
  long errors = 0;
  for (size_t i = 0; i < truth.size(); ++i) {
    errors += ((truth[i] != 0) != (detected[i] != 0)) ? 1 : 0;
  }
  return static_cast<double>(errors) / static_cast<double>(truth.size());
}

double nmse(const std::vector<double>& x_hat, const std::vector<double>& x0) {
  if (x_hat.size() != x0.size()) {
    throw std::invalid_argument("estimate and truth differ in length");
  }
  double num = 0.0;
  double den = 0.0;
  for (size_t i = 0; i < x0.size(); ++i) {
    const double d = x_hat[i] - x0[i];
    num += d * d;
    den += x0[i] * x0[i];
  }
  if (den > 0.0) return num / den;
  return num;  // zero-energy truth: 0 for a zero estimate, ||x_hat||^2 else
}

RecoveryResult recover_bht_bp(const Instance& inst,
                              const ExperimentConfig& config) {
  Pipelines p(config);
  RecoveryResult r;
  const auto marginals = p.run_bp(inst, true, &r.diagnostics);
  RecoveryResult out = p.finish_bht(marginals, inst);
  out.diagnostics = std::move(r.diagnostics);
  return out;
}

RecoveryResult recover_map_bp(const Instance& inst,
                              const ExperimentConfig& config) {
  Pipelines p(config);
  RecoveryResult r;
  const auto marginals = p.run_bp(inst, true, &r.diagnostics);
  RecoveryResult out = p.finish_map(marginals, inst);
  out.diagnostics = std::move(r.diagnostics);
  return out;
}

RecoveryResult recover_csbp(const Instance& inst,
                            const ExperimentConfig& config, bool noise_aware) {
  Pipelines p(config);
  RecoveryResult r;
  const auto marginals = p.run_bp(inst, noise_aware, &r.diagnostics);
  RecoveryResult out = p.finish_peak(marginals, inst);
  out.diagnostics = std::move(r.diagnostics);
  return out;
}

RecoveryResult recover_oracle(const Instance& inst,
                              const ExperimentConfig& config) {
  Pipelines p(config);
  return p.finish_oracle(inst);
}

RecoveryResult recover(const std::string& algo, const Instance& inst,
                       const ExperimentConfig& config) {
  if (algo == "bht-bp") return recover_bht_bp(inst, config);
  if (algo == "map-bp") return recover_map_bp(inst, config);
  if (algo == "csbp-ns") return recover_csbp(inst, config, true);
  if (algo == "csbp") return recover_csbp(inst, config, false);
  if (algo == "oracle") return recover_oracle(inst, config);
  throw std::invalid_argument("unknown algorithm id: " + algo);
}

namespace {

struct AlgoTrial {
  bool ok = false;
  double ser = 0.0;
  double nmse = 0.0;
  double seconds = 0.0;
};

using TrialResults = std::vector<AlgoTrial>;  // one entry per config algo

TrialResults run_trial(const Pipelines& pipelines,
                       const ExperimentConfig& config, double snr,
                       int trial) {
  TrialResults out(config.algos.size());
  Instance inst;
  bool inst_ok = true;
  try {
    inst = make_instance(config, snr, trial);
  } catch (const std::exception& e) {
    inst_ok = false;
    std::cerr << "trial " << trial << " at " << snr
              << " dB: instance generation failed: " << e.what() << "\n";
  }
  std::optional<std::vector<SampledDensity>> aware;
  std::optional<std::vector<SampledDensity>> blind;

  for (size_t a = 0; a < config.algos.size(); ++a) {
    if (!inst_ok) break;
    const auto t0 = std::chrono::steady_clock::now();
    try {
      const std::string& algo = config.algos[a];
      RecoveryResult r;
      switch (variant_for(algo)) {
        case BpVariant::kAware:
          if (!aware) aware = pipelines.run_bp(inst, true, nullptr);
          r = (algo == "bht-bp")   ? pipelines.finish_bht(*aware, inst)
              : (algo == "map-bp") ? pipelines.finish_map(*aware, inst)
                                   : pipelines.finish_peak(*aware, inst);
          break;
        case BpVariant::kBlind:
          if (!blind) blind = pipelines.run_bp(inst, false, nullptr);
          r = pipelines.finish_peak(*blind, inst);
          break;
        case BpVariant::kNone:
          r = pipelines.finish_oracle(inst);
          break;
      }
      out[a].ok = true;
      out[a].ser = r.ser;
      out[a].nmse = r.nmse;
    } catch (const std::exception& e) {
      std::cerr << config.algos[a] << " trial " << trial << " at " << snr
                << " dB failed: " << e.what() << "\n";
    }
    out[a].seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
            .count();
  }
  return out;
}

}  // namespace

std::vector<MetricsRow> run_sweep(const ExperimentConfig& config) {
  config.validate();
  const Pipelines pipelines(config);
  const size_t n_snr = config.snr_points.size();
  const size_t n_tasks = n_snr * static_cast<size_t>(config.trials);

  std::vector<TrialResults> results(n_tasks);
  std::atomic<size_t> next{0};
  auto body = [&]() {
    for (size_t t = next.fetch_add(1); t < n_tasks; t = next.fetch_add(1)) {
      const size_t snr_idx = t / config.trials;
      const int trial = static_cast<int>(t % config.trials);
      results[t] =
          run_trial(pipelines, config, config.snr_points[snr_idx], trial);
    }
  };

  int workers = config.workers;
  if (workers == 0) {
    workers = static_cast<int>(std::thread::hardware_concurrency());
  }
  workers = std::max(1, std::min<int>(workers, static_cast<int>(n_tasks)));
  if (workers == 1) {
    body();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (int w = 0; w < workers; ++w) pool.emplace_back(body);
    for (auto& th : pool) th.join();
  }

  // Reduce in (algo, snr, trial) order: output bytes never depend on the
  // worker schedule.
  std::vector<MetricsRow> rows;
  rows.reserve(config.algos.size() * n_snr);
  for (size_t a = 0; a < config.algos.size(); ++a) {
    for (size_t s = 0; s < n_snr; ++s) {
      MetricsRow row;
      row.algo = config.algos[a];
      row.snr_db = config.snr_points[s];
      double ser_sum = 0.0;
      double nmse_sum = 0.0;
      for (int t = 0; t < config.trials; ++t) {
        const AlgoTrial& at = results[s * config.trials + t][a];
        row.runtime_s += at.seconds;
        if (!at.ok) {
          ++row.failures;
          continue;
        }
        ++row.trials;
        ser_sum += at.ser;
        nmse_sum += at.nmse;
      }
      if (row.trials > 0) {
        row.ser_mean = ser_sum / row.trials;
        row.nmse_mean = nmse_sum / row.trials;
      }
      if (row.failures > 0) {
        std::cerr << row.algo << " at " << row.snr_db << " dB: "
                  << row.failures << " failed trial(s) excluded\n";
      }
      rows.push_back(std::move(row));
    }
  }

  if (!config.output_path.empty()) {
    std::ofstream os(config.output_path);
    if (!os) {
      throw std::runtime_error("cannot open output file: " +
                               config.output_path);
    }
    os << metrics_to_csv(rows, config.emit_runtime);
  }
  return rows;
}

std::string metrics_to_csv(const std::vector<MetricsRow>& rows,
                           bool emit_runtime) {
  std::string out = "algo,snr_db,trials,ser_mean,nmse_mean,runtime_s\n";
  char runtime[40];
  for (const auto& r : rows) {
    std::snprintf(runtime, sizeof(runtime), "%.6f",
                  emit_runtime ? r.runtime_s : 0.0);
    out += r.algo;
    out += ',';
    out += fmt10(r.snr_db);
    out += ',';
    out += std::to_string(r.trials);
    out += ',';
    out += fmt10(r.ser_mean);
    out += ',';
    out += fmt10(r.nmse_mean);
    out += ',';
    out += runtime;
    out += '\n';
  }
  return out;
}

}  // namespace nsr
