#include "nsr/density.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <map>
#include <memory>
#include <mutex>
#include <stdexcept>
#include <string>

namespace nsr {

namespace {

constexpr double kUnderflowSum = 1e-300;

void check_grid(const DensityGrid& g) {
  if (g.n_d <= 0 || g.n_d % 2 != 0) {
    throw std::invalid_argument("grid size must be positive and even, got " +
                                std::to_string(g.n_d));
  }
  if (!(g.t_s > 0.0)) {
    throw std::invalid_argument("grid step must be positive");
  }
}

void check_same_grid(const SampledDensity& a, const SampledDensity& b) {
  if (!(a.grid == b.grid)) {
    throw std::invalid_argument("densities live on different grids");
  }
}

void check_sized(const SampledDensity& d) {
  check_grid(d.grid);
  if (static_cast<int>(d.mass.size()) != d.grid.n_d) {
    throw std::invalid_argument("density mass size does not match its grid");
  }
}

}  // namespace

DensityGrid DensityGrid::for_sigma(int n_d, double sigma_x1) {
  if (!(sigma_x1 > 0.0)) {
    throw std::invalid_argument("sigma_x1 must be positive");
  }
  DensityGrid g{n_d, 6.0 * sigma_x1 / n_d};
  check_grid(g);
  return g;
}

double DensityGrid::clamp_value(double x) const {
  return std::min(std::max(x, min_value()), max_value());
}

int DensityGrid::nearest_index(double x) const {
  const double c = clamp_value(x);
  const int idx = static_cast<int>(std::lround(c / t_s)) + n_d / 2;
  return std::min(std::max(idx, 0), n_d - 1);
}

double SampledDensity::sum() const { return detail::l1_sum(mass); }

int SampledDensity::argmax() const {
  return static_cast<int>(std::max_element(mass.begin(), mass.end()) -
                          mass.begin());
}

double SampledDensity::mean() const {
  double acc = 0.0;
  for (int m = 0; m < grid.n_d; ++m) acc += mass[m] * grid.value(m);
  return acc;
}

SampledDensity uniform_density(const DensityGrid& grid) {
  check_grid(grid);
  return {grid, std::vector<double>(grid.n_d, 1.0 / grid.n_d)};
}

SampledDensity delta_density(const DensityGrid& grid, int index) {
  check_grid(grid);
  if (index < 0 || index >= grid.n_d) {
    throw std::invalid_argument("delta index out of range");
  }
  SampledDensity d{grid, std::vector<double>(grid.n_d, 0.0)};
  d.mass[index] = 1.0;
  return d;
}

SampledDensity sample_gaussian(const DensityGrid& grid, double mean,
                               double variance) {
  check_grid(grid);
  if (!(variance > 0.0) || !std::isfinite(variance)) {
    throw std::invalid_argument("gaussian variance must be positive");
  }
  if (!std::isfinite(mean)) {
    throw std::invalid_argument("gaussian mean must be finite");
  }
  const double mu = grid.clamp_value(mean);
  SampledDensity d{grid, std::vector<double>(grid.n_d)};
  // Work with max-subtracted exponents: the best cell gets weight exactly 1,
  // so the sum is >= 1 and normalization never underflows even when the
  // variance is many orders below the cell width.
  double e_max = -HUGE_VAL;
  for (int m = 0; m < grid.n_d; ++m) {
    const double dv = grid.value(m) - mu;
    const double e = -0.5 * dv * dv / variance;
    d.mass[m] = e;
    e_max = std::max(e_max, e);
  }
  for (int m = 0; m < grid.n_d; ++m) d.mass[m] = std::exp(d.mass[m] - e_max);
  detail::normalize_in_place(d.mass);
  return d;
}

SampledDensity sample_gaussian_wrapped(const DensityGrid& grid, double mean,
                                       double variance) {
  check_grid(grid);
  if (!(variance > 0.0) || !std::isfinite(variance)) {
    throw std::invalid_argument("gaussian variance must be positive");
  }
  if (!std::isfinite(mean)) {
    throw std::invalid_argument("gaussian mean must be finite");
  }
  const double span = grid.span();
  // Translate the mean by a whole number of spans into the grid's window,
  // then accumulate the nearest periodic images. Three images bound the
  // truncation error by exp(-(span/sigma)^2) relative, far below double
  // precision for any variance the engine meets.
  const double mu =
      mean - span * std::floor((mean - grid.min_value()) / span);
  SampledDensity d{grid, std::vector<double>(grid.n_d)};
  std::vector<double> e2(grid.n_d);
  double e_min = HUGE_VAL;
  for (int m = 0; m < grid.n_d; ++m) {
    const double dv = grid.value(m) - mu;
    double best = dv * dv;
    for (int w = -1; w <= 1; w += 2) {
      const double dw = dv + w * span;
      best = std::min(best, dw * dw);
    }
    e2[m] = best;
    e_min = std::min(e_min, best);
  }
  for (int m = 0; m < grid.n_d; ++m) {
    const double dv = grid.value(m) - mu;
    double acc = 0.0;
    for (int w = -1; w <= 1; ++w) {
      const double dw = dv + w * span;
      acc += std::exp(-0.5 * (dw * dw - e_min) / variance);
    }
    d.mass[m] = acc;
  }
  detail::normalize_in_place(d.mass);
  return d;
}

SampledDensity sample_spike_slab_prior(const DensityGrid& grid, double q,
                                       double sigma_x1) {
  check_grid(grid);
  if (!(q >= 0.0 && q <= 1.0)) {
    throw std::invalid_argument("sparsity rate q must lie in [0, 1]");
  }
  if (q == 0.0) return delta_density(grid, grid.center());
  SampledDensity slab = sample_gaussian(grid, 0.0, sigma_x1 * sigma_x1);
  if (q == 1.0) return slab;
  for (double& v : slab.mass) v *= q;
  slab.mass[grid.center()] += 1.0 - q;
  return slab;
}

SampledDensity multiply_normalize(std::span<const SampledDensity> factors,
                                  long* underflow_events) {
  if (factors.empty()) {
    throw std::invalid_argument("multiply_normalize needs at least one factor");
  }
  check_sized(factors[0]);
  for (size_t f = 1; f < factors.size(); ++f) {
    check_sized(factors[f]);
    check_same_grid(factors[0], factors[f]);
  }
  const int n = factors[0].grid.n_d;
  std::vector<const double*> ptrs(factors.size());
  for (size_t f = 0; f < factors.size(); ++f) ptrs[f] = factors[f].mass.data();
  SampledDensity out{factors[0].grid, std::vector<double>(n)};
  detail::product_normalize(ptrs, n, out.mass.data(), underflow_events);
  return out;
}

SampledDensity reverse(const SampledDensity& d) {
  check_sized(d);
  const int n = d.grid.n_d;
  SampledDensity out{d.grid, std::vector<double>(n)};
  for (int m = 0; m < n; ++m) out.mass[m] = d.mass[(n - m) % n];
  return out;
}

SampledDensity convolve_circular(const SampledDensity& a,
                                 const SampledDensity& b) {
  const SampledDensity inputs[] = {a, b};
  return convolve_many(inputs);
}

SampledDensity convolve_many(std::span<const SampledDensity> inputs) {
  if (inputs.empty()) {
    throw std::invalid_argument("convolve_many needs at least one input");
  }
  check_sized(inputs[0]);
  if (inputs.size() == 1) {
    SampledDensity out = inputs[0];
    detail::normalize_in_place(out.mass);
    return out;
  }
  for (size_t j = 1; j < inputs.size(); ++j) {
    check_sized(inputs[j]);
    check_same_grid(inputs[0], inputs[j]);
  }

  const DensityGrid grid = inputs[0].grid;
  const int n = grid.n_d;
  const int c = grid.center();
  auto& ws = detail::thread_fft_workspace(n);
  const int ns = ws.spectrum_size();

  std::vector<std::complex<double>> acc(ns);
  std::vector<std::complex<double>> spec(ns);
  ws.forward(inputs[0].mass.data(), acc.data());
  for (size_t j = 1; j < inputs.size(); ++j) {
    ws.forward(inputs[j].mass.data(), spec.data());
    for (int k = 0; k < ns; ++k) acc[k] *= spec[k];
  }

  std::vector<double> std_conv(n);
  ws.inverse(acc.data(), std_conv.data());

  // The plain circular convolution of J center-referenced vectors carries an
  // offset of (J-1)*center; rotating by it restores value 0 to the center
  // cell. Tiny FFT negatives are clamped before renormalizing.
  const int shift = static_cast<int>(((inputs.size() - 1) * c) % n);
  SampledDensity out{grid, std::vector<double>(n)};
  for (int m = 0; m < n; ++m) {
    out.mass[m] = std::max(std_conv[(m + shift) % n], 0.0);
  }
  detail::normalize_in_place(out.mass);
  return out;
}

namespace detail {

double l1_sum(std::span<const double> mass) {
  double s = 0.0;
  for (double v : mass) s += v;
  return s;
}

void normalize_in_place(std::span<double> mass) {
  const double s = l1_sum(mass);
  if (!(s > 0.0) || !std::isfinite(s)) {
    throw std::runtime_error("cannot normalize a zero or non-finite density");
  }
  for (double& v : mass) v /= s;
}

void product_normalize(std::span<const double* const> factors, int n,
                       double* out, long* underflow_events) {
  if (factors.empty()) {
    throw std::invalid_argument("product_normalize needs at least one factor");
  }
  std::memcpy(out, factors[0], sizeof(double) * n);
  for (size_t f = 1; f < factors.size(); ++f) {
    const double* src = factors[f];
    for (int m = 0; m < n; ++m) out[m] *= src[m];
  }
  double s = 0.0;
  for (int m = 0; m < n; ++m) s += out[m];
  if (std::isfinite(s) && s > kUnderflowSum) {
    for (int m = 0; m < n; ++m) out[m] /= s;
    return;
  }

  // Linear product underflowed (or degenerated); redo in log space.
  if (underflow_events != nullptr) ++(*underflow_events);
  std::vector<double> lw(n, 0.0);
  for (size_t f = 0; f < factors.size(); ++f) {
    const double* src = factors[f];
    for (int m = 0; m < n; ++m) {
      lw[m] += (src[m] > 0.0) ? std::log(src[m]) : -HUGE_VAL;
    }
  }
  const double mx = *std::max_element(lw.begin(), lw.end());
  if (mx == -HUGE_VAL) {
    throw std::runtime_error("density product is identically zero");
  }
  double s2 = 0.0;
  for (int m = 0; m < n; ++m) {
    out[m] = std::exp(lw[m] - mx);
    s2 += out[m];
  }
  for (int m = 0; m < n; ++m) out[m] /= s2;
}

namespace {
// FFTW plan creation/destruction must be serialized across threads.
std::mutex& plan_mutex() {
  static std::mutex mu;
  return mu;
}
}  // namespace

FftWorkspace::FftWorkspace(int n) : n_(n) {
  if (n <= 0) throw std::invalid_argument("fft size must be positive");
  real_ = fftw_alloc_real(n);
  spec_ = fftw_alloc_complex(n / 2 + 1);
  if (real_ == nullptr || spec_ == nullptr) {
    fftw_free(real_);
    fftw_free(spec_);
    throw std::bad_alloc();
  }
  std::lock_guard<std::mutex> lock(plan_mutex());
  plan_fwd_ = fftw_plan_dft_r2c_1d(
      n, real_, static_cast<fftw_complex*>(spec_), FFTW_ESTIMATE);
  plan_bwd_ = fftw_plan_dft_c2r_1d(
      n, static_cast<fftw_complex*>(spec_), real_, FFTW_ESTIMATE);
  if (plan_fwd_ == nullptr || plan_bwd_ == nullptr) {
    throw std::runtime_error("fftw plan creation failed");
  }
}

FftWorkspace::~FftWorkspace() {
  std::lock_guard<std::mutex> lock(plan_mutex());
  if (plan_fwd_ != nullptr) fftw_destroy_plan(static_cast<fftw_plan>(plan_fwd_));
  if (plan_bwd_ != nullptr) fftw_destroy_plan(static_cast<fftw_plan>(plan_bwd_));
  fftw_free(real_);
  fftw_free(spec_);
}

void FftWorkspace::forward(const double* in, std::complex<double>* out) {
  std::memcpy(real_, in, sizeof(double) * n_);
  fftw_execute_dft_r2c(static_cast<fftw_plan>(plan_fwd_), real_,
                       static_cast<fftw_complex*>(spec_));
  std::memcpy(out, spec_, sizeof(fftw_complex) * spectrum_size());
}

void FftWorkspace::inverse(const std::complex<double>* in, double* out) {
  std::memcpy(spec_, in, sizeof(fftw_complex) * spectrum_size());
  fftw_execute_dft_c2r(static_cast<fftw_plan>(plan_bwd_),
                       static_cast<fftw_complex*>(spec_), real_);
  const double scale = 1.0 / n_;
  for (int m = 0; m < n_; ++m) out[m] = real_[m] * scale;
}

FftWorkspace& thread_fft_workspace(int n) {
  thread_local std::map<int, std::unique_ptr<FftWorkspace>> cache;
  auto it = cache.find(n);
  if (it == cache.end()) {
    it = cache.emplace(n, std::make_unique<FftWorkspace>(n)).first;
  }
  return *it->second;
}

}  // namespace detail

}  // namespace nsr
