// Acceptance gate: eight end-to-end criteria with pinned thresholds, one
// PASS/FAIL line each. Run with --criterion <1..8> for a single criterion
// (the ctest wiring) or with no arguments for the full battery. Exits
// nonzero if any executed criterion fails.

#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "nsr/estimator.hpp"
#include "nsr/harness.hpp"
#include "nsr/selftest.hpp"

using namespace nsr;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string format(const char* fmt, ...) {
  va_list args;
  va_start(args, fmt);
  char buf[512];
  std::vsnprintf(buf, sizeof buf, fmt, args);
  va_end(args);
  return buf;
}

const MetricsRow& row_for(const std::vector<MetricsRow>& rows,
                          const std::string& algo, double snr_db) {
  for (const MetricsRow& r : rows) {
    if (r.algo == algo && r.snr_db == snr_db) return r;
  }
  throw std::runtime_error("sweep produced no row for " + algo);
}

// SNR at which the error curve first falls to `target`, interpolating
// linearly in (dB, log error). Curves already below target at the first
// point report that point; curves never reaching it report +infinity.
double crossing_db(const std::vector<double>& snr_db,
                   const std::vector<double>& err, double target) {
  if (err.front() <= target) return snr_db.front();
  for (size_t i = 1; i < err.size(); ++i) {
    if (err[i] > target) continue;
    if (err[i] <= 0.0) return snr_db[i];  // log-interp undefined; exact hit
    const double la = std::log(err[i - 1]);
    const double lb = std::log(err[i]);
    const double t = (la - std::log(target)) / (la - lb);
    return snr_db[i - 1] + t * (snr_db[i] - snr_db[i - 1]);
  }
  return std::numeric_limits<double>::infinity();
}

double db_ratio(double num, double den) { return 10.0 * std::log10(num / den); }

// 1. Independent-oracle consistency suite, under a minute of wall time.
Outcome criterion1() {
  const auto t0 = std::chrono::steady_clock::now();
  const std::vector<CheckResult> checks = run_selftest();
  const double elapsed =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
          .count();
  int passed = 0;
  std::string failures;
  for (const CheckResult& c : checks) {
    if (c.pass) {
      ++passed;
    } else {
      failures += " [" + c.name + ": " + c.detail + "]";
    }
  }
  Outcome out;
  out.pass = passed == (int)checks.size() && elapsed < 60.0;
  out.detail = format("oracle checks %d/%zu in %.1f s (limit 60 s)%s", passed,
                      checks.size(), elapsed, failures.c_str());
  return out;
}

// 2. Quantization floor of the peak readout at high SNR, full-size shape.
Outcome criterion2() {
  ExperimentConfig cfg = full_preset();
  cfg.algos = {"csbp-ns"};
  cfg.snr_points = {50.0};
  cfg.trials = 200;
  cfg.output_path.clear();
  const double v = row_for(run_sweep(cfg), "csbp-ns", 50.0).nmse_mean;
  Outcome out;
  out.pass = v >= 4.6e-5 && v <= 1.4e-4;
  out.detail = format(
      "peak-readout NMSE at 50 dB = %.6g, required within [4.6e-05, 1.4e-04]",
      v);
  return out;
}

// 3. Peak detector hits an error floor at high SNR; the calibrated test
// stays at least 4x below it on the same instances.
Outcome criterion3() {
  ExperimentConfig cfg = desk_preset();
  cfg.algos = {"bht-bp", "map-bp"};
  cfg.snr_points = {50.0};
  cfg.trials = 200;
  cfg.output_path.clear();
  const std::vector<MetricsRow> rows = run_sweep(cfg);
  const double map_ser = row_for(rows, "map-bp", 50.0).ser_mean;
  const double bht_ser = row_for(rows, "bht-bp", 50.0).ser_mean;
  const bool floor_ok = map_ser >= 5e-4;
  const bool gap_ok = bht_ser <= map_ser / 4.0;
  Outcome out;
  out.pass = floor_ok && gap_ok;
  out.detail = format(
      "peak-detector SER at 50 dB = %.6g (required >= 5e-04%s), "
      "test-detector SER = %.6g (required <= peak/4 = %.6g%s)",
      map_ser, floor_ok ? "" : ", NOT MET", bht_ser, map_ser / 4.0,
      gap_ok ? "" : ", NOT MET");
  return out;
}

// 4. The calibrated test reaches SER 1e-2 at least 1 dB earlier than the
// peak detector on a paired low-SNR sweep.
Outcome criterion4() {
  ExperimentConfig cfg = desk_preset();
  cfg.algos = {"bht-bp", "map-bp"};
  cfg.snr_points = {8.0, 10.0, 12.0, 14.0};
  cfg.trials = 200;
  cfg.output_path.clear();
  const std::vector<MetricsRow> rows = run_sweep(cfg);
  std::vector<double> bht, map;
  for (double s : cfg.snr_points) {
    bht.push_back(row_for(rows, "bht-bp", s).ser_mean);
    map.push_back(row_for(rows, "map-bp", s).ser_mean);
  }
  const double bht_db = crossing_db(cfg.snr_points, bht, 1e-2);
  const double map_db = crossing_db(cfg.snr_points, map, 1e-2);
  const double gap = map_db - bht_db;
  Outcome out;
  out.pass = gap >= 1.0;
  out.detail = format(
      "SER 1e-2 reached at %.2f dB (test) vs %.2f dB (peak), gain %.2f dB, "
      "required >= 1 dB",
      bht_db, map_db, gap);
  return out;
}

// 5. At high SNR the detection-directed estimate tracks the genie-aided
// closed form within 3 dB while the peak readouts sit >= 10 dB above it.
Outcome criterion5() {
  ExperimentConfig cfg = desk_preset();
  cfg.algos = {"bht-bp", "csbp-ns", "csbp"};
  cfg.snr_points = {45.0};
  cfg.trials = 200;
  cfg.output_path.clear();
  const std::vector<MetricsRow> rows = run_sweep(cfg);

  double formula_sum = 0.0;
  for (int t = 0; t < cfg.trials; ++t) {
    const Instance inst = make_instance(cfg, 45.0, t);
    formula_sum += oracle_mse_formula(inst.matrix, inst.signal,
                                      cfg.model.sigma_x1, inst.sigma_n);
  }
  const double formula = formula_sum / cfg.trials;

  const double bht = row_for(rows, "bht-bp", 45.0).nmse_mean;
  const double ns = row_for(rows, "csbp-ns", 45.0).nmse_mean;
  const double blind = row_for(rows, "csbp", 45.0).nmse_mean;
  const double bht_db = db_ratio(bht, formula);
  const double ns_db = db_ratio(ns, formula);
  const double blind_db = db_ratio(blind, formula);
  Outcome out;
  out.pass =
      std::abs(bht_db) <= 3.0 && ns_db >= 10.0 && blind_db >= 10.0;
  out.detail = format(
      "genie formula NMSE = %.6g; detection-directed %.6g (%+.2f dB, "
      "required within 3), peak readouts %.6g (%+.2f dB) and %.6g "
      "(%+.2f dB, both required >= +10)",
      formula, bht, bht_db, ns, ns_db, blind, blind_db);
  return out;
}

// 6. Modeling the measurement noise is worth at least a 3x NMSE factor at
// moderate SNR.
Outcome criterion6() {
  ExperimentConfig cfg = desk_preset();
  cfg.algos = {"csbp", "csbp-ns"};
  cfg.snr_points = {15.0};
  cfg.trials = 200;
  cfg.output_path.clear();
  const std::vector<MetricsRow> rows = run_sweep(cfg);
  const double blind = row_for(rows, "csbp", 15.0).nmse_mean;
  const double aware = row_for(rows, "csbp-ns", 15.0).nmse_mean;
  const double ratio = blind / aware;
  Outcome out;
  out.pass = ratio >= 3.0;
  out.detail = format(
      "noise-blind NMSE at 15 dB = %.6g vs noise-aware %.6g, ratio %.1fx, "
      "required >= 3x",
      blind, aware, ratio);
  return out;
}

// 7. On a problem small enough to enumerate, the detection-directed output
// matches the full Bayesian posterior mean whenever the support is right,
// and the support is right on >= 80% of trials.
Outcome criterion7() {
  ExperimentConfig cfg = desk_preset();
  cfg.model = SignalModel::make_gaussian(10, 0.2, 5.0, 1.25);
  cfg.m = 6;
  cfg.column_weight = 2;
  // Tiny graphs are loop-dense; give the messages room to settle.
  cfg.iterations = 30;
  cfg.trials = 50;
  cfg.snr_points = {40.0};
  cfg.output_path.clear();

  int detected = 0;
  int compared = 0;
  int twinned = 0;  // an on-support column duplicated elsewhere: the pair is
                    // exchangeable in the posterior, so no detector can
                    // single out the true twin
  double worst = 0.0;
  for (int t = 0; t < cfg.trials; ++t) {
    const Instance inst = make_instance(cfg, 40.0, t);
    bool twin = false;
    for (int i = 0; i < cfg.model.n && !twin; ++i) {
      if (!inst.signal.state[i]) continue;
      for (int j = 0; j < cfg.model.n; ++j) {
        if (j != i && inst.matrix.columns[j] == inst.matrix.columns[i]) {
          twin = true;
          break;
        }
      }
    }
    twinned += twin;
    const RecoveryResult r = recover_bht_bp(inst, cfg);
    if (r.s_hat != inst.signal.state) continue;
    ++detected;
    const std::vector<double> exact =
        exhaustive_mmse(inst.matrix, inst.z, cfg.model.q, cfg.model.sigma_x1,
                        inst.sigma_n, cfg.model.kind);
    // Squared gap between the two estimates, on the scale of the realized
    // signal energy (raw energy when the true support is empty) -- the same
    // normalization convention nmse() uses.
    double diff2 = 0.0;
    double energy = 0.0;
    for (int i = 0; i < cfg.model.n; ++i) {
      diff2 += (r.x_hat[i] - exact[i]) * (r.x_hat[i] - exact[i]);
      energy += inst.signal.values[i] * inst.signal.values[i];
    }
    const double err = energy > 0.0 ? diff2 / energy : diff2;
    worst = std::max(worst, err);
    if (err <= 1e-3) ++compared;
  }
  const double rate = (double)detected / cfg.trials;
  Outcome out;
  out.pass = rate >= 0.8 && compared == detected;
  out.detail = format(
      "support exact on %d/%d trials (%.0f%%, required >= 80%%; %d trials "
      "carry a duplicated on-support column and are unidentifiable by any "
      "detector); posterior-mean agreement on %d/%d detected trials, worst "
      "NMSE %.3g (required <= 1e-03)",
      detected, cfg.trials, 100.0 * rate, twinned, compared, detected, worst);
  return out;
}

// 8. Byte-identical CSV across repeated runs and across worker counts.
Outcome criterion8() {
  ExperimentConfig cfg = desk_preset();
  cfg.model = SignalModel::make_gaussian(64, 0.05, 5.0, 1.25);
  cfg.m = 32;
  cfg.column_weight = 4;
  cfg.trials = 6;
  cfg.snr_points = {10.0, 20.0};
  cfg.algos = {"bht-bp", "csbp"};

  const auto dir = std::filesystem::temp_directory_path();
  const std::string path_a = (dir / "acceptance_det_a.csv").string();
  const std::string path_b = (dir / "acceptance_det_b.csv").string();

  auto read_all = [](const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
  };

  cfg.workers = 1;
  cfg.output_path = path_a;
  run_sweep(cfg);
  cfg.output_path = path_b;
  run_sweep(cfg);
  const std::string a = read_all(path_a);
  const std::string b = read_all(path_b);

  cfg.workers = 2;
  cfg.output_path = path_a;
  run_sweep(cfg);
  const std::string c = read_all(path_a);
  std::filesystem::remove(path_a);
  std::filesystem::remove(path_b);

  const bool repeat_ok = !a.empty() && a == b;
  const bool workers_ok = a == c;
  Outcome out;
  out.pass = repeat_ok && workers_ok;
  out.detail = format(
      "%zu-byte CSV: repeat run %s, 1-vs-2 workers %s", a.size(),
      repeat_ok ? "identical" : "DIFFERS", workers_ok ? "identical" : "DIFFERS");
  return out;
}

Outcome run_criterion(int k) {
  switch (k) {
    case 1: return criterion1();
    case 2: return criterion2();
    case 3: return criterion3();
    case 4: return criterion4();
    case 5: return criterion5();
    case 6: return criterion6();
    case 7: return criterion7();
    case 8: return criterion8();
    default: throw std::runtime_error("no such criterion");
  }
}

}  // namespace

int main(int argc, char** argv) {
  std::vector<int> selected;
  for (int i = 1; i < argc; ++i) {
    if (std::strcmp(argv[i], "--criterion") == 0 && i + 1 < argc) {
      selected.push_back(std::atoi(argv[++i]));
    } else {
      std::fprintf(stderr, "usage: %s [--criterion <1..8>]\n", argv[0]);
      return 2;
    }
  }
  if (selected.empty()) {
    for (int k = 1; k <= 8; ++k) selected.push_back(k);
  }

  bool all_pass = true;
  for (int k : selected) {
    if (k < 1 || k > 8) {
      std::fprintf(stderr, "criterion %d out of range 1..8\n", k);
      return 2;
    }
    Outcome out;
    try {
      out = run_criterion(k);
    } catch (const std::exception& e) {
      out.pass = false;
      out.detail = std::string("exception: ") + e.what();
    }
    std::printf("[%s] criterion %d: %s\n", out.pass ? "PASS" : "FAIL", k,
                out.detail.c_str());
    std::fflush(stdout);
    all_pass = all_pass && out.pass;
  }
  return all_pass ? 0 : 1;
}
