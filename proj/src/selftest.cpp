#include "nsr/selftest.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "nsr/bp.hpp"
#include "nsr/density.hpp"
#include "nsr/detector.hpp"
#include "nsr/estimator.hpp"
#include "nsr/model.hpp"

namespace nsr {

namespace {

SampledDensity random_density(const DensityGrid& grid, Rng& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::uniform_int_distribution<int> style(0, 2);
  SampledDensity d{grid, std::vector<double>(grid.n_d, 0.0)};
  switch (style(rng)) {
    case 0:  // rough positive noise
      for (double& v : d.mass) {
        const double x = u(rng);
        v = x * x + 1e-6;
      }
      break;
    case 1: {  // a few spikes
      std::uniform_int_distribution<int> pick(0, grid.n_d - 1);
      for (int k = 0; k < 4; ++k) d.mass[pick(rng)] += u(rng) + 0.1;
      break;
    }
    default: {  // random sampled Gaussian
      std::uniform_real_distribution<double> mean(grid.min_value(),
                                                  grid.max_value());
      std::uniform_real_distribution<double> sd(0.3 * grid.t_s,
                                                0.2 * grid.n_d * grid.t_s);
      const double s = sd(rng);
      return sample_gaussian(grid, mean(rng), s * s);
    }
  }
  detail::normalize_in_place(d.mass);
  return d;
}

// Direct-summation center-aligned circular convolution (the oracle route:
// no FFT anywhere).
std::vector<double> direct_convolve(const DensityGrid& grid,
                                    const std::vector<double>& a,
                                    const std::vector<double>& b) {
  const int n = grid.n_d;
  const int c = grid.center();
  std::vector<double> out(n, 0.0);
  for (int m = 0; m < n; ++m) {
    double acc = 0.0;
    for (int k = 0; k < n; ++k) {
      acc += a[k] * b[(((m - k + c) % n) + n) % n];
    }
    out[m] = acc;
  }
  detail::normalize_in_place(out);
  return out;
}

// Random connected bipartite tree: every new node attaches by one edge to a
// random existing node of the opposite side.
SensingMatrix random_tree(int n_vars, int n_meas, Rng& rng) {
  std::vector<std::vector<int>> columns(n_vars);
  columns[0].push_back(0);
  int made_vars = 1;
  int made_meas = 1;
  std::bernoulli_distribution coin(0.5);
  while (made_vars < n_vars || made_meas < n_meas) {
    bool add_var = coin(rng);
    if (made_vars >= n_vars) add_var = false;
    if (made_meas >= n_meas) add_var = true;
    if (add_var) {
      std::uniform_int_distribution<int> pick(0, made_meas - 1);
      columns[made_vars].push_back(pick(rng));
      ++made_vars;
    } else {
      std::uniform_int_distribution<int> pick(0, made_vars - 1);
      columns[pick(rng)].push_back(made_meas);
      ++made_meas;
    }
  }
  for (auto& col : columns) std::sort(col.begin(), col.end());
  return SensingMatrix::from_columns(n_meas, n_vars, std::move(columns), 0);
}

// Exhaustive sum-product marginals of the discrete model the message passer
// operates on: joint(m_1..m_N) ~ prod_i prior[m_i] *
// prod_j kernel_j[wrap(center + sum_{i in N(j)} (m_i - center))].
std::vector<std::vector<double>> enumerate_marginals(
    const SensingMatrix& graph, const DensityGrid& grid,
    const std::vector<SampledDensity>& kernels, const SampledDensity& prior) {
  const int n = graph.n;
  const int n_d = grid.n_d;
  const int c = grid.center();
  std::vector<std::vector<double>> marg(n, std::vector<double>(n_d, 0.0));
  std::vector<int> idx(n, 0);
  while (true) {
    double w = 1.0;
    for (int i = 0; i < n && w > 0.0; ++i) w *= prior.mass[idx[i]];
    for (int j = 0; j < graph.m && w > 0.0; ++j) {
      int off = c;
      for (int i : graph.rows[j]) off += idx[i] - c;
      off = ((off % n_d) + n_d) % n_d;
      w *= kernels[j].mass[off];
    }
    if (w > 0.0) {
      for (int i = 0; i < n; ++i) marg[i][idx[i]] += w;
    }
    int i = 0;
    while (i < n && ++idx[i] == n_d) {
      idx[i] = 0;
      ++i;
    }
    if (i == n) break;
  }
  for (auto& v : marg) detail::normalize_in_place(v);
  return marg;
}

// Hand-rolled Gauss-Jordan solve with partial pivoting (the oracle route:
// no linear-algebra library).
std::vector<double> gauss_jordan_solve(std::vector<std::vector<double>> a,
                                       std::vector<double> b) {
  const int n = static_cast<int>(b.size());
  for (int col = 0; col < n; ++col) {
    int pivot = col;
    for (int r = col + 1; r < n; ++r) {
      if (std::abs(a[r][col]) > std::abs(a[pivot][col])) pivot = r;
    }
    if (a[pivot][col] == 0.0) {
      throw std::runtime_error("singular system in oracle solve");
    }
    std::swap(a[pivot], a[col]);
    std::swap(b[pivot], b[col]);
    const double inv = 1.0 / a[col][col];
    for (int k = col; k < n; ++k) a[col][k] *= inv;
    b[col] *= inv;
    for (int r = 0; r < n; ++r) {
      if (r == col || a[r][col] == 0.0) continue;
      const double f = a[r][col];
      for (int k = col; k < n; ++k) a[r][k] -= f * a[col][k];
      b[r] -= f * b[col];
    }
  }
  return b;
}

double log_normal_pdf(double x, double variance) {
  return -0.5 * (x * x / variance + std::log(2.0 * M_PI * variance));
}

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(3);
  os << v;
  return os.str();
}

}  // namespace

CheckResult check_fft_convolution_oracle(uint64_t seed) {
  Rng rng = make_rng(seed);
  const DensityGrid grid = DensityGrid::for_sigma(256, 5.0);
  double worst = 0.0;
  for (int pair = 0; pair < 50; ++pair) {
    const SampledDensity a = random_density(grid, rng);
    const SampledDensity b = random_density(grid, rng);
    const SampledDensity fast = convolve_circular(a, b);
    const std::vector<double> slow = direct_convolve(grid, a.mass, b.mass);
    for (int m = 0; m < grid.n_d; ++m) {
      worst = std::max(worst, std::abs(fast.mass[m] - slow[m]));
    }
  }
  const bool pass = worst <= 1e-10;
  return {"fft-convolution-vs-direct", pass,
          "50 pairs at n_d=256, max |diff| = " + fmt(worst) +
              (pass ? " <= 1e-10" : " > 1e-10")};
}

CheckResult check_tree_bp_oracle(uint64_t seed) {
  Rng rng = make_rng(seed);
  const double sigma_x1 = 5.0;
  const double q = 0.25;
  double worst_tv = 0.0;
  const int cases[][3] = {  // {n_vars, n_meas, n_d}
      {4, 3, 8}, {6, 5, 8}, {5, 6, 8}, {4, 4, 16}, {5, 3, 16}};
  for (const auto& c : cases) {
    const int n_vars = c[0];
    const int n_meas = c[1];
    const DensityGrid grid = DensityGrid::for_sigma(c[2], sigma_x1);
    const SensingMatrix tree = random_tree(n_vars, n_meas, rng);
    const SampledDensity prior = sample_spike_slab_prior(grid, q, sigma_x1);

    // Grid-valued sparse signal, mild additive noise.
    std::uniform_int_distribution<int> cell(grid.n_d / 4, 3 * grid.n_d / 4);
    std::bernoulli_distribution on(0.5);
    std::vector<double> x(n_vars, 0.0);
    for (double& v : x) {
      if (on(rng)) v = grid.value(cell(rng));
    }
    std::uniform_real_distribution<double> sn_draw(0.8, 2.0);
    const double sigma_n = sn_draw(rng);
    std::normal_distribution<double> unit(0.0, 1.0);
    std::vector<double> z = apply_matrix(tree, x);
    for (double& v : z) v += sigma_n * unit(rng);

    BpConfig bp;
    bp.iterations = n_vars + n_meas;  // at least the tree diameter
    const std::vector<SampledDensity> fast = bp_run(tree, z, prior, sigma_n, bp);

    // The enumeration's interference sum wraps modulo the grid period, so the
    // matching measurement factor is the wrapped kernel the passer uses.
    std::vector<SampledDensity> kernels;
    kernels.reserve(n_meas);
    for (int j = 0; j < n_meas; ++j) {
      kernels.push_back(sample_gaussian_wrapped(grid, z[j], sigma_n * sigma_n));
    }
    const auto slow = enumerate_marginals(tree, grid, kernels, prior);
    for (int i = 0; i < n_vars; ++i) {
      double tv = 0.0;
      for (int m = 0; m < grid.n_d; ++m) {
        tv += std::abs(fast[i].mass[m] - slow[i][m]);
      }
      worst_tv = std::max(worst_tv, 0.5 * tv);
    }
  }
  const bool pass = worst_tv <= 1e-6;
  return {"tree-bp-vs-enumeration", pass,
          "5 random trees, max total variation = " + fmt(worst_tv) +
              (pass ? " <= 1e-6" : " > 1e-6")};
}

CheckResult check_ridge_dense_oracle(uint64_t seed) {
  Rng rng = make_rng(seed);
  const double sigma_x1 = 5.0;
  const double sigma_n = 0.7;
  double worst = 0.0;
  for (int inst = 0; inst < 20; ++inst) {
    const SensingMatrix mat = generate_matrix(8, 12, 3, rng);
    std::bernoulli_distribution on(0.4);
    StateVector support(12, 0);
    for (auto& s : support) s = on(rng) ? 1 : 0;
    std::normal_distribution<double> zdist(0.0, 3.0);
    std::vector<double> z(8);
    for (double& v : z) v = zdist(rng);

    const std::vector<double> fast =
        mmse_on_support(mat, support, z, sigma_x1, sigma_n);

    // Oracle: assemble the normal equations densely, invert by Gauss-Jordan.
    std::vector<int> idx;
    for (int i = 0; i < 12; ++i) {
      if (support[i]) idx.push_back(i);
    }
    std::vector<double> slow(12, 0.0);
    if (!idx.empty()) {
      const int k = static_cast<int>(idx.size());
      std::vector<std::vector<double>> h(k, std::vector<double>(k, 0.0));
      std::vector<double> rhs(k, 0.0);
      for (int a = 0; a < k; ++a) {
        for (int b = 0; b < k; ++b) {
          int shared = 0;
          for (int ja : mat.columns[idx[a]]) {
            for (int jb : mat.columns[idx[b]]) {
              if (ja == jb) ++shared;
            }
          }
          h[a][b] = shared / (sigma_n * sigma_n);
        }
        h[a][a] += 1.0 / (sigma_x1 * sigma_x1);
        for (int j : mat.columns[idx[a]]) rhs[a] += z[j];
        rhs[a] /= sigma_n * sigma_n;
      }
      const std::vector<double> u = gauss_jordan_solve(h, rhs);
      for (int a = 0; a < k; ++a) slow[idx[a]] = u[a];
    }

    double diff2 = 0.0;
    double ref2 = 0.0;
    for (int i = 0; i < 12; ++i) {
      diff2 += (fast[i] - slow[i]) * (fast[i] - slow[i]);
      ref2 += slow[i] * slow[i];
    }
    worst = std::max(worst, std::sqrt(diff2) / std::max(std::sqrt(ref2), 1e-30));
  }
  const bool pass = worst <= 1e-10;
  return {"ridge-solve-vs-dense-inverse", pass,
          "20 instances at 8x12, max relative error = " + fmt(worst) +
              (pass ? " <= 1e-10" : " > 1e-10")};
}

CheckResult check_support_test_analytic_oracle(uint64_t seed) {
  Rng rng = make_rng(seed);
  const double sigma_x1 = 5.0;
  const double q = 0.1;
  const SensingMatrix scalar = SensingMatrix::from_columns(1, 1, {{0}}, 1);
  const double log_thr = std::log((1.0 - q) / q);

  // Same pipeline at two grid resolutions; the difference between the two
  // statistics is a Richardson-style estimate of the quadrature error.
  struct Resolution {
    DensityGrid grid;
    SampledDensity prior;
    ReferencePair refs;
  };
  std::vector<Resolution> res;
  for (int n_d : {256, 512}) {
    const DensityGrid grid = DensityGrid::for_sigma(n_d, sigma_x1);
    res.push_back({grid, sample_spike_slab_prior(grid, q, sigma_x1),
                   build_references(grid, q, sigma_x1)});
  }

  std::uniform_real_distribution<double> zdraw(-10.0, 10.0);
  std::uniform_real_distribution<double> sndraw(0.3, 1.5);
  int decisive = 0;
  int disagreements = 0;
  for (int draw = 0; draw < 100; ++draw) {
    const double z = zdraw(rng);
    const double sigma_n = sndraw(rng);
    BpConfig bp;
    bp.iterations = 1;
    const std::vector<double> zv = {z};
    double log_stat[2];
    for (int r = 0; r < 2; ++r) {
      const auto marginals =
          bp_run(scalar, zv, res[r].prior, sigma_n, bp);
      log_stat[r] = std::log(bht_statistic(marginals[0], res[r].refs));
    }
    const double log_grid = log_stat[0];

    // Closed form: the scalar posterior odds reduce to a two-Gaussian
    // likelihood ratio with variances sigma_x1^2 + sigma_n^2 and sigma_n^2.
    const double log_exact =
        log_normal_pdf(z, sigma_x1 * sigma_x1 + sigma_n * sigma_n) -
        log_normal_pdf(z, sigma_n * sigma_n);

    const double eps = std::abs(log_stat[0] - log_stat[1]) + 1e-9;
    if (std::abs(log_exact - log_thr) <= 2.0 * eps) continue;  // inside band
    ++decisive;
    const bool grid_on = log_grid > log_thr;
    const bool exact_on = log_exact > log_thr;
    if (grid_on != exact_on) ++disagreements;
  }
  const bool pass = (disagreements == 0) && (decisive >= 90);
  return {"support-test-vs-analytic", pass,
          std::to_string(decisive) + "/100 draws decisive, " +
              std::to_string(disagreements) + " disagreement(s)" +
              (pass ? "" : " (need 0 disagreements and >= 90 decisive)")};
}

std::vector<CheckResult> run_selftest() {
  return {
      check_fft_convolution_oracle(101),
      check_tree_bp_oracle(202),
      check_ridge_dense_oracle(303),
      check_support_test_analytic_oracle(404),
  };
}

}  // namespace nsr
