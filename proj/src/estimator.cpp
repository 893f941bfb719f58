#include "nsr/estimator.hpp"

#include <Eigen/Dense>

#include <bit>
#include <cmath>
#include <stdexcept>
#include <string>

namespace nsr {

namespace {

std::vector<int> support_indices(const StateVector& support) {
  std::vector<int> idx;
  for (size_t i = 0; i < support.size(); ++i) {
    if (support[i]) idx.push_back(static_cast<int>(i));
  }
  return idx;
}

double effective_sigma_n(double sigma_n, double sigma_x1) {
  // Noiseless solves keep a vanishing ridge so the system stays well-posed.
  return (sigma_n > 0.0) ? sigma_n : 1e-6 * sigma_x1;
}

Eigen::MatrixXd dense_support_matrix(const SensingMatrix& matrix,
                                     const std::vector<int>& idx) {
  Eigen::MatrixXd b = Eigen::MatrixXd::Zero(matrix.m, idx.size());
  for (size_t k = 0; k < idx.size(); ++k) {
    for (int j : matrix.columns[idx[k]]) b(j, static_cast<Eigen::Index>(k)) = 1.0;
  }
  return b;
}

void check_inputs(const SensingMatrix& matrix, size_t support_size,
                  size_t z_size, double sigma_x1) {
  if (static_cast<int>(support_size) != matrix.n) {
    throw std::invalid_argument("support length does not match matrix columns");
  }
  if (static_cast<int>(z_size) != matrix.m) {
    throw std::invalid_argument("measurement length does not match matrix rows");
  }
  if (!(sigma_x1 > 0.0)) {
    throw std::invalid_argument("sigma_x1 must be positive");
  }
}

}  // namespace

std::vector<double> mmse_on_support(const SensingMatrix& matrix,
                                    const StateVector& support,
                                    std::span<const double> z, double sigma_x1,
                                    double sigma_n) {
  check_inputs(matrix, support.size(), z.size(), sigma_x1);
  const std::vector<int> idx = support_indices(support);
  std::vector<double> x(matrix.n, 0.0);
  if (idx.empty()) return x;

  const double sn = effective_sigma_n(sigma_n, sigma_x1);
  const Eigen::Index k = static_cast<Eigen::Index>(idx.size());

  // Ridge solve as stacked least squares: minimize
  // ||Phi_s u - z||^2 / sn^2 + ||u||^2 / sigma_x1^2.
  Eigen::MatrixXd a(matrix.m + k, k);
  a.topRows(matrix.m) = dense_support_matrix(matrix, idx) / sn;
  a.bottomRows(k) =
      Eigen::MatrixXd::Identity(k, k) / sigma_x1;
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(matrix.m + k);
  for (int j = 0; j < matrix.m; ++j) rhs(j) = z[j] / sn;

  const Eigen::VectorXd u = a.householderQr().solve(rhs);
  for (Eigen::Index t = 0; t < k; ++t) x[idx[t]] = u(t);
  return x;
}

std::vector<double> oracle_estimate(const SensingMatrix& matrix,
                                    const SparseSignal& signal,
                                    std::span<const double> z, double sigma_x1,
                                    double sigma_n) {
  return mmse_on_support(matrix, signal.state, z, sigma_x1, sigma_n);
}

double oracle_mse_formula(const SensingMatrix& matrix,
                          const SparseSignal& signal, double sigma_x1,
                          double sigma_n) {
  check_inputs(matrix, signal.state.size(), matrix.m, sigma_x1);
  const std::vector<int> idx = support_indices(signal.state);
  if (idx.empty()) {
    throw std::invalid_argument(
        "genie-aided error is undefined for an empty support");
  }
  const double energy = signal.support_energy();
  if (!(energy > 0.0)) {
    throw std::invalid_argument(
        "genie-aided error is undefined for zero support energy");
  }
  const double sn = effective_sigma_n(sigma_n, sigma_x1);
  const Eigen::MatrixXd b = dense_support_matrix(matrix, idx);
  const Eigen::Index k = static_cast<Eigen::Index>(idx.size());
  Eigen::MatrixXd h = (b.transpose() * b) / (sn * sn);
  h.diagonal().array() += 1.0 / (sigma_x1 * sigma_x1);
  const Eigen::MatrixXd inv =
      h.llt().solve(Eigen::MatrixXd::Identity(k, k));
  return inv.trace() / energy;
}

std::vector<double> exhaustive_mmse(const SensingMatrix& matrix,
                                    std::span<const double> z, double q,
                                    double sigma_x1, double sigma_n,
                                    SignalKind kind) {
  check_inputs(matrix, matrix.n, z.size(), sigma_x1);
  if (!(q >= 0.0 && q <= 1.0)) {
    throw std::invalid_argument("sparsity rate q must lie in [0, 1]");
  }
  if (!(sigma_n > 0.0)) {
    throw std::invalid_argument("exhaustive posterior needs positive noise");
  }
  const int n = matrix.n;
  const int limit = (kind == SignalKind::kGaussian) ? 16 : 12;
  if (n > limit) {
    throw std::invalid_argument("exhaustive posterior limited to " +
                                std::to_string(limit) + " elements");
  }
  std::vector<double> x(n, 0.0);
  if (q == 0.0) return x;

  const double sx2 = sigma_x1 * sigma_x1;
  const double sn2 = sigma_n * sigma_n;
  double zz = 0.0;
  for (double v : z) zz += v * v;

  if (kind == SignalKind::kGaussian) {
    // Precompute Gram entries |N(i1) cap N(i2)| and correlations col_i . z.
    Eigen::MatrixXd gram = Eigen::MatrixXd::Zero(n, n);
    Eigen::VectorXd corr = Eigen::VectorXd::Zero(n);
    for (int j = 0; j < matrix.m; ++j) {
      const auto& row = matrix.rows[j];
      for (size_t t = 0; t < row.size(); ++t) {
        corr(row[t]) += z[j];
        for (size_t u2 = 0; u2 < row.size(); ++u2) {
          gram(row[t], row[u2]) += 1.0;
        }
      }
    }

    const uint32_t masks = 1u << n;
    std::vector<double> logw(masks, -HUGE_VAL);
    std::vector<double> means;  // per-mask posterior means, concatenated
    std::vector<size_t> offset(masks, 0);
    means.reserve(static_cast<size_t>(masks));

    for (uint32_t mask = 0; mask < masks; ++mask) {
      const int k = std::popcount(mask);
      if ((k > 0 && q == 0.0) || (k < n && q == 1.0)) continue;
      double lw = 0.0;
      if (k > 0) lw += k * std::log(q);
      if (k < n) lw += (n - k) * std::log(1.0 - q);

      offset[mask] = means.size();
      if (k == 0) {
        // Evidence of z under pure noise.
        logw[mask] = lw - 0.5 * (zz / sn2 + matrix.m * std::log(2.0 * M_PI * sn2));
        continue;
      }
      std::vector<int> idx;
      idx.reserve(k);
      for (int i = 0; i < n; ++i) {
        if (mask & (1u << i)) idx.push_back(i);
      }
      Eigen::MatrixXd h(k, k);
      Eigen::VectorXd c(k);
      for (int a = 0; a < k; ++a) {
        c(a) = corr(idx[a]);
        for (int b2 = 0; b2 < k; ++b2) h(a, b2) = gram(idx[a], idx[b2]);
        h(a, a) += sn2 / sx2;
      }
      const Eigen::LLT<Eigen::MatrixXd> llt(h);
      if (llt.info() != Eigen::Success) {
        throw std::runtime_error("posterior covariance factorization failed");
      }
      const Eigen::VectorXd u = llt.solve(c);
      double logdet_h = 0.0;
      for (int a = 0; a < k; ++a) logdet_h += 2.0 * std::log(llt.matrixL()(a, a));
      // log det of the marginal covariance sx2*B B^T + sn2*I via the
      // K x K determinant identity.
      const double logdet =
          2.0 * (matrix.m - k) * std::log(sigma_n) + k * std::log(sx2) + logdet_h;
      const double quad = (zz - c.dot(u)) / sn2;
      logw[mask] = lw - 0.5 * (quad + logdet + matrix.m * std::log(2.0 * M_PI));
      for (int a = 0; a < k; ++a) means.push_back(u(a));
    }

    double mx = -HUGE_VAL;
    for (double v : logw) mx = std::max(mx, v);
    if (mx == -HUGE_VAL) {
      throw std::runtime_error("posterior enumeration produced no mass");
    }
    double total = 0.0;
    for (uint32_t mask = 0; mask < masks; ++mask) {
      if (logw[mask] == -HUGE_VAL) continue;
      const double w = std::exp(logw[mask] - mx);
      total += w;
      size_t pos = offset[mask];
      for (int i = 0; i < n; ++i) {
        if (mask & (1u << i)) x[i] += w * means[pos++];
      }
    }
    for (double& v : x) v /= total;
    return x;
  }

  // Signed kind: enumerate supports and +/- sign patterns.
  std::vector<double> y(matrix.m);
  double mx = -HUGE_VAL;
  std::vector<double> num(n, 0.0);
  double total = 0.0;
  const uint32_t masks = 1u << n;
  // Two passes: find the max log-weight, then accumulate stably.
  for (int pass = 0; pass < 2; ++pass) {
    for (uint32_t mask = 0; mask < masks; ++mask) {
      const int k = std::popcount(mask);
      if ((k > 0 && q == 0.0) || (k < n && q == 1.0)) continue;
      double lw = -k * std::log(2.0);
      if (k > 0) lw += k * std::log(q);
      if (k < n) lw += (n - k) * std::log(1.0 - q);
      std::vector<int> idx;
      idx.reserve(k);
      for (int i = 0; i < n; ++i) {
        if (mask & (1u << i)) idx.push_back(i);
      }
      const uint32_t signs = 1u << k;
      for (uint32_t sg = 0; sg < signs; ++sg) {
        std::fill(y.begin(), y.end(), 0.0);
        for (int a = 0; a < k; ++a) {
          const double v = (sg & (1u << a)) ? sigma_x1 : -sigma_x1;
          for (int j : matrix.columns[idx[a]]) y[j] += v;
        }
        double resid = 0.0;
        for (int j = 0; j < matrix.m; ++j) {
          const double d = z[j] - y[j];
          resid += d * d;
        }
        const double l = lw - 0.5 * resid / sn2;
        if (pass == 0) {
          mx = std::max(mx, l);
        } else {
          const double w = std::exp(l - mx);
          total += w;
          for (int a = 0; a < k; ++a) {
            num[idx[a]] += w * ((sg & (1u << a)) ? sigma_x1 : -sigma_x1);
          }
        }
      }
    }
  }
  if (!(total > 0.0)) {
    throw std::runtime_error("posterior enumeration produced no mass");
  }
  for (int i = 0; i < n; ++i) x[i] = num[i] / total;
  return x;
}

std::vector<double> map_value_readout(
    const std::vector<SampledDensity>& marginals) {
  std::vector<double> x(marginals.size(), 0.0);
  for (size_t i = 0; i < marginals.size(); ++i) {
    const auto& f = marginals[i];
    const int peak = f.argmax();
    if (f.mass[f.grid.center()] >= f.mass[peak]) continue;  // zero wins ties
    if (peak == 0) {
      // The first cell is the circular seam: -span/2 and +span/2 are the
      // same torus point. Pick the representative from where the residual
      // mass leaks -- more mass in the top cell means the value sits just
      // above +span/2's wrap, i.e. on the positive side.
      const int last = f.grid.n_d - 1;
      x[i] = (f.mass[last] > f.mass[1]) ? -f.grid.min_value()
                                        : f.grid.min_value();
      continue;
    }
    x[i] = f.grid.value(peak);
  }
  return x;
}

double quantization_floor_nmse(const DensityGrid& grid, double sigma_x1) {
  if (!(sigma_x1 > 0.0)) {
    throw std::invalid_argument("sigma_x1 must be positive");
  }
  return grid.t_s * grid.t_s / 12.0 / (sigma_x1 * sigma_x1);
}

}  // namespace nsr
