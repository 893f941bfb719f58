#pragma once

#include <cstdint>
#include <random>
#include <vector>

namespace nsr {

using Rng = std::mt19937_64;

// Stateless 64-bit mixer (splitmix64); used to spread seeds so consecutive
// base seeds yield unrelated generator states.
uint64_t mix64(uint64_t x);

// Deterministic generator for a given stream id.
Rng make_rng(uint64_t seed);

enum class SignalKind {
  kGaussian,  // on-support values ~ N(0, sigma_x1^2) truncated to
              // x_min <= |x| <= x_max
  kSigned,    // on-support values = +/- sigma_x1 with equal probability
};

// Sparse signal prior: each element is independently "on" with probability q;
// on-support magnitudes follow `kind`.
struct SignalModel {
  SignalKind kind = SignalKind::kGaussian;
  int n = 0;
  double q = 0.0;
  double sigma_x1 = 1.0;
  double x_min = 0.0;  // Gaussian kind only
  double x_max = 0.0;  // Gaussian kind only

  // x_max < 0 selects the default 3*sigma_x1.
  static SignalModel make_gaussian(int n, double q, double sigma_x1,
                                   double x_min, double x_max = -1.0);
  static SignalModel make_signed(int n, double q, double sigma_x1);

  void validate() const;  // throws std::invalid_argument
};

struct SparseSignal {
  std::vector<double> values;
  std::vector<uint8_t> state;  // 1 where the element is on-support

  int support_size() const;
  double support_energy() const;  // squared norm of the on-support values
};

// Sparse binary sensing matrix stored as bipartite adjacency. Generated
// matrices have a fixed column weight; hand-built irregular adjacency is
// allowed with column_weight == 0.
struct SensingMatrix {
  int m = 0;
  int n = 0;
  int column_weight = 0;  // 0 marks irregular (explicitly constructed)
  std::vector<std::vector<int>> columns;  // per signal element: measurement ids
  std::vector<std::vector<int>> rows;     // per measurement: signal element ids

  int edge_count() const;
  void validate() const;  // throws std::invalid_argument

  // Builds the row adjacency from explicit columns. column_weight > 0 asserts
  // that every column has exactly that many entries.
  static SensingMatrix from_columns(int m, int n,
                                    std::vector<std::vector<int>> columns,
                                    int column_weight = 0);
};

struct NoiseModel {
  double sigma_n = 0.0;  // standard deviation of the i.i.d. Gaussian noise
};

// Draws a signal from the model.
SparseSignal generate_signal(const SignalModel& model, Rng& rng);

// Uniformly random sparse binary matrix: each column picks `column_weight`
// distinct rows without replacement. Requires 1 <= column_weight <= m.
SensingMatrix generate_matrix(int m, int n, int column_weight, Rng& rng);

// y = Phi * x (binary matrix: sums of the selected entries).
std::vector<double> apply_matrix(const SensingMatrix& matrix,
                                 const std::vector<double>& x);

// z = Phi * x0 + noise, noise ~ N(0, sigma_n^2)^M.
std::vector<double> measure(const SensingMatrix& matrix,
                            const SparseSignal& signal,
                            const NoiseModel& noise, Rng& rng);

// Realized measurement SNR in dB: 10*log10(||Phi x0||^2 / (M * sigma_n^2)).
double snr_db(const SensingMatrix& matrix, const SparseSignal& signal,
              const NoiseModel& noise);

// E[X^2 | on-support] under the model (closed form for both kinds).
double on_support_second_moment(const SignalModel& model);

// Noise level that achieves a target expected SNR for (matrix, model):
// sigma_n = sqrt(N * L * q * E[X^2|on] / (M * 10^(snr/10))).
double sigma_for_snr(const SensingMatrix& matrix, const SignalModel& model,
                     double target_snr_db);

// Number of length-4 cycles in the bipartite graph (column pairs sharing
// two or more rows); a girth diagnostic for generated matrices.
long count_four_cycles(const SensingMatrix& matrix);

}  // namespace nsr
