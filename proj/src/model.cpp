#include "nsr/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <string>
#include <unordered_map>

namespace nsr {

namespace {

double std_normal_pdf(double x) {
  static const double kInvSqrt2Pi = 0.3989422804014327;
  return kInvSqrt2Pi * std::exp(-0.5 * x * x);
}

double std_normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

// Probability that |X/sigma| lands in [a, b] for standard normal X/sigma.
double truncation_mass(double a, double b) {
  return 2.0 * (std_normal_cdf(b) - std_normal_cdf(a));
}

}  // namespace

uint64_t mix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

Rng make_rng(uint64_t seed) { return Rng(mix64(seed)); }

SignalModel SignalModel::make_gaussian(int n, double q, double sigma_x1,
                                       double x_min, double x_max) {
  SignalModel m;
  m.kind = SignalKind::kGaussian;
  m.n = n;
  m.q = q;
  m.sigma_x1 = sigma_x1;
  m.x_min = x_min;
  m.x_max = (x_max < 0.0) ? 3.0 * sigma_x1 : x_max;
  m.validate();
  return m;
}

SignalModel SignalModel::make_signed(int n, double q, double sigma_x1) {
  SignalModel m;
  m.kind = SignalKind::kSigned;
  m.n = n;
  m.q = q;
  m.sigma_x1 = sigma_x1;
  m.x_min = sigma_x1;
  m.x_max = sigma_x1;
  m.validate();
  return m;
}

void SignalModel::validate() const {
  if (n <= 0) throw std::invalid_argument("signal length must be positive");
  if (!(q >= 0.0 && q <= 1.0)) {
    throw std::invalid_argument("sparsity rate q must lie in [0, 1]");
  }
  if (!(sigma_x1 > 0.0)) {
    throw std::invalid_argument("sigma_x1 must be positive");
  }
  if (kind == SignalKind::kGaussian) {
    if (x_min < 0.0 || x_max < x_min) {
      throw std::invalid_argument(
          "magnitude bounds need 0 <= x_min <= x_max");
    }
    if (x_max > x_min &&
        truncation_mass(x_min / sigma_x1, x_max / sigma_x1) < 1e-9) {
      throw std::invalid_argument(
          "truncation interval carries negligible probability mass");
    }
  }
}

int SparseSignal::support_size() const {
  return static_cast<int>(std::count(state.begin(), state.end(), uint8_t{1}));
}

double SparseSignal::support_energy() const {
  double e = 0.0;
  for (size_t i = 0; i < values.size(); ++i) {
    if (state[i]) e += values[i] * values[i];
  }
  return e;
}

int SensingMatrix::edge_count() const {
  int e = 0;
  for (const auto& col : columns) e += static_cast<int>(col.size());
  return e;
}

void SensingMatrix::validate() const {
  if (m <= 0 || n <= 0) {
    throw std::invalid_argument("matrix dimensions must be positive");
  }
  if (static_cast<int>(columns.size()) != n ||
      static_cast<int>(rows.size()) != m) {
    throw std::invalid_argument("adjacency sizes do not match dimensions");
  }
  long row_edges = 0;
  for (const auto& row : rows) row_edges += static_cast<long>(row.size());
  long col_edges = 0;
  for (int i = 0; i < n; ++i) {
    const auto& col = columns[i];
    col_edges += static_cast<long>(col.size());
    if (column_weight > 0 &&
        static_cast<int>(col.size()) != column_weight) {
      throw std::invalid_argument("column " + std::to_string(i) +
                                  " does not have the fixed column weight");
    }
    for (size_t t = 0; t < col.size(); ++t) {
      const int j = col[t];
      if (j < 0 || j >= m) {
        throw std::invalid_argument("row index out of range in column " +
                                    std::to_string(i));
      }
      for (size_t u = t + 1; u < col.size(); ++u) {
        if (col[u] == j) {
          throw std::invalid_argument("duplicate row index in column " +
                                      std::to_string(i));
        }
      }
      if (std::find(rows[j].begin(), rows[j].end(), i) == rows[j].end()) {
        throw std::invalid_argument("column/row adjacency mismatch");
      }
    }
  }
  if (row_edges != col_edges) {
    throw std::invalid_argument("column/row edge counts disagree");
  }
}

SensingMatrix SensingMatrix::from_columns(int m, int n,
                                          std::vector<std::vector<int>> columns,
                                          int column_weight) {
  SensingMatrix mat;
  mat.m = m;
  mat.n = n;
  mat.column_weight = column_weight;
  mat.columns = std::move(columns);
  mat.rows.assign(m, {});
  for (int i = 0; i < static_cast<int>(mat.columns.size()); ++i) {
    for (int j : mat.columns[i]) {
      if (j < 0 || j >= m) {
        throw std::invalid_argument("row index out of range in column " +
                                    std::to_string(i));
      }
      mat.rows[j].push_back(i);
    }
  }
  mat.validate();
  return mat;
}

SparseSignal generate_signal(const SignalModel& model, Rng& rng) {
  model.validate();
  SparseSignal sig;
  sig.values.assign(model.n, 0.0);
  sig.state.assign(model.n, 0);
  std::bernoulli_distribution on(model.q);
  std::bernoulli_distribution coin(0.5);
  std::normal_distribution<double> gauss(0.0, model.sigma_x1);
  for (int i = 0; i < model.n; ++i) {
    if (!on(rng)) continue;
    sig.state[i] = 1;
    if (model.kind == SignalKind::kSigned) {
      sig.values[i] = coin(rng) ? model.sigma_x1 : -model.sigma_x1;
    } else if (model.x_min == model.x_max) {
      sig.values[i] = coin(rng) ? model.x_min : -model.x_min;
    } else {
      // Rejection sampling of the truncated Gaussian; the validated model
      // guarantees non-negligible acceptance probability.
      double v = 0.0;
      do {
        v = gauss(rng);
      } while (std::abs(v) < model.x_min || std::abs(v) > model.x_max);
      sig.values[i] = v;
    }
  }
  return sig;
}

SensingMatrix generate_matrix(int m, int n, int column_weight, Rng& rng) {
  if (m <= 0 || n <= 0) {
    throw std::invalid_argument("matrix dimensions must be positive");
  }
  if (column_weight < 1 || column_weight > m) {
    throw std::invalid_argument(
        "column weight must satisfy 1 <= weight <= row count (got " +
        std::to_string(column_weight) + " for " + std::to_string(m) +
        " rows)");
  }
  std::vector<std::vector<int>> columns(n);
  std::vector<int> pool(m);
  for (int i = 0; i < n; ++i) {
    std::iota(pool.begin(), pool.end(), 0);
    // Partial Fisher-Yates: the first `column_weight` entries become a
    // uniform sample of distinct rows.
    for (int t = 0; t < column_weight; ++t) {
      std::uniform_int_distribution<int> pick(t, m - 1);
      std::swap(pool[t], pool[pick(rng)]);
    }
    columns[i].assign(pool.begin(), pool.begin() + column_weight);
    std::sort(columns[i].begin(), columns[i].end());
  }
  return SensingMatrix::from_columns(m, n, std::move(columns), column_weight);
}

std::vector<double> apply_matrix(const SensingMatrix& matrix,
                                 const std::vector<double>& x) {
  if (static_cast<int>(x.size()) != matrix.n) {
    throw std::invalid_argument("signal length does not match matrix columns");
  }
  std::vector<double> z(matrix.m, 0.0);
  for (int j = 0; j < matrix.m; ++j) {
    double acc = 0.0;
    for (int i : matrix.rows[j]) acc += x[i];
    z[j] = acc;
  }
  return z;
}

std::vector<double> measure(const SensingMatrix& matrix,
                            const SparseSignal& signal,
                            const NoiseModel& noise, Rng& rng) {
  if (noise.sigma_n < 0.0) {
    throw std::invalid_argument("noise level must be nonnegative");
  }
  std::vector<double> z = apply_matrix(matrix, signal.values);
  std::normal_distribution<double> unit(0.0, 1.0);
  for (double& v : z) v += noise.sigma_n * unit(rng);
  return z;
}

double snr_db(const SensingMatrix& matrix, const SparseSignal& signal,
              const NoiseModel& noise) {
  const std::vector<double> y = apply_matrix(matrix, signal.values);
  double energy = 0.0;
  for (double v : y) energy += v * v;
  if (noise.sigma_n == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 *
         std::log10(energy / (matrix.m * noise.sigma_n * noise.sigma_n));
}

double on_support_second_moment(const SignalModel& model) {
  model.validate();
  if (model.kind == SignalKind::kSigned) {
    return model.sigma_x1 * model.sigma_x1;
  }
  if (model.x_min == model.x_max) return model.x_min * model.x_min;
  const double a = model.x_min / model.sigma_x1;
  const double b = model.x_max / model.sigma_x1;
  const double mass = std_normal_cdf(b) - std_normal_cdf(a);
  const double correction =
      (a * std_normal_pdf(a) - b * std_normal_pdf(b)) / mass;
  return model.sigma_x1 * model.sigma_x1 * (1.0 + correction);
}

double sigma_for_snr(const SensingMatrix& matrix, const SignalModel& model,
                     double target_snr_db) {
  if (!std::isfinite(target_snr_db)) {
    throw std::invalid_argument("target SNR must be finite");
  }
  // E||Phi x0||^2 = |edges| * q * E[X^2 | on]: cross terms vanish because
  // elements are independent and zero-mean.
  const double signal_power =
      matrix.edge_count() * model.q * on_support_second_moment(model);
  if (!(signal_power > 0.0)) {
    throw std::invalid_argument(
        "expected signal power is zero; SNR target is unreachable");
  }
  const double ratio = std::pow(10.0, target_snr_db / 10.0);
  return std::sqrt(signal_power / (matrix.m * ratio));
}

long count_four_cycles(const SensingMatrix& matrix) {
  // Column pairs sharing r >= 2 rows contribute C(r, 2) four-cycles.
  std::unordered_map<long, int> shared;
  for (const auto& row : matrix.rows) {
    for (size_t t = 0; t < row.size(); ++t) {
      for (size_t u = t + 1; u < row.size(); ++u) {
        const long key =
            static_cast<long>(std::min(row[t], row[u])) * matrix.n +
            std::max(row[t], row[u]);
        ++shared[key];
      }
    }
  }
  long cycles = 0;
  for (const auto& [key, r] : shared) {
    (void)key;
    cycles += static_cast<long>(r) * (r - 1) / 2;
  }
  return cycles;
}

}  // namespace nsr
