#pragma once

#include <complex>
#include <span>
#include <vector>

namespace nsr {

// Uniform sampling grid shared by every density in one experiment. The grid
// covers [-3*sigma_x1, 3*sigma_x1) with step t_s = 6*sigma_x1 / n_d, and the
// value 0 falls exactly on index n_d/2 (n_d must be even). All convolution
// arithmetic is circular on this grid, so mass pushed past an edge wraps.
struct DensityGrid {
  int n_d = 0;
  double t_s = 0.0;

  // Grid matched to a signal scale: step chosen so n_d cells span +/-3 sigma.
  static DensityGrid for_sigma(int n_d, double sigma_x1);

  int center() const { return n_d / 2; }
  double value(int m) const { return (m - n_d / 2) * t_s; }
  double min_value() const { return value(0); }
  double max_value() const { return value(n_d - 1); }
  double span() const { return n_d * t_s; }  // circular period

  // Clamps a real value into the representable range [value(0), value(n_d-1)].
  double clamp_value(double x) const;
  // Index of the grid cell nearest to x, after clamping.
  int nearest_index(double x) const;

  bool operator==(const DensityGrid&) const = default;
};

// A probability mass vector over a DensityGrid. Library operations keep the
// mass nonnegative and normalized to unit sum.
struct SampledDensity {
  DensityGrid grid;
  std::vector<double> mass;

  double sum() const;
  int argmax() const;      // first index attaining the maximum
  double mean() const;     // sum_m mass[m] * value(m)
};

// All-cells-equal density (mass 1/n_d everywhere).
SampledDensity uniform_density(const DensityGrid& grid);

// Point mass at one grid index.
SampledDensity delta_density(const DensityGrid& grid, int index);

// Gaussian N(mean, variance) sampled at cell values and normalized. Means
// outside the grid are clamped to the nearest edge cell. Computed with
// max-subtracted exponentials so arbitrarily small variances cannot
// underflow to an all-zero vector. variance must be > 0.
SampledDensity sample_gaussian(const DensityGrid& grid, double mean,
                               double variance);

// Gaussian wrapped onto the grid's circular period: the mean is translated
// by whole spans into the window and nearby periodic images are summed, so
// an off-grid mean keeps its exact position modulo the span. This is the
// kernel form consistent with the engine's circular convolutions.
SampledDensity sample_gaussian_wrapped(const DensityGrid& grid, double mean,
                                       double variance);

// Spike-and-slab prior: (1-q) point mass at zero plus q times a sampled
// N(0, sigma_x1^2) slab. Requires 0 <= q <= 1.
SampledDensity sample_spike_slab_prior(const DensityGrid& grid, double q,
                                       double sigma_x1);

// Cellwise product of factors followed by normalization. Falls back to
// log-domain accumulation when the linear product underflows; increments
// *underflow_events (if given) when the fallback fires. Throws
// std::runtime_error if the product is identically zero.
SampledDensity multiply_normalize(std::span<const SampledDensity> factors,
                                  long* underflow_events = nullptr);

// Density of -X: mass'[m] = mass[(n_d - m) mod n_d]. An involution that
// fixes index 0 and the center cell.
SampledDensity reverse(const SampledDensity& d);

// Center-aligned circular convolution: the density of X + Y for independent
// grid variables, with the zero cell staying at the center index.
// mass'[m] = sum_k a[k] * b[(m - k + center) mod n_d].
SampledDensity convolve_circular(const SampledDensity& a,
                                 const SampledDensity& b);

// Fold of J >= 1 inputs under the same center-aligned circular convolution.
// J = 1 returns the input renormalized. FFT-backed; results are clamped to be
// nonnegative (FFT round-off can produce ~1e-17 negatives) and renormalized.
SampledDensity convolve_many(std::span<const SampledDensity> inputs);

namespace detail {

// Sum of a mass vector.
double l1_sum(std::span<const double> mass);

// Divides by the sum; throws std::runtime_error on a zero/non-finite sum.
void normalize_in_place(std::span<double> mass);

// Core product kernel over raw cell arrays: out[m] = prod_f factors[f][m],
// normalized, with the log-domain underflow fallback described above.
void product_normalize(std::span<const double* const> factors, int n,
                       double* out, long* underflow_events);

// Reusable FFTW real-to-complex transform pair for one grid size. Plan
// creation is serialized internally (FFTW planning is not thread-safe);
// execution is reentrant per workspace. Obtain per-thread instances through
// thread_fft_workspace().
class FftWorkspace {
 public:
  explicit FftWorkspace(int n);
  ~FftWorkspace();
  FftWorkspace(const FftWorkspace&) = delete;
  FftWorkspace& operator=(const FftWorkspace&) = delete;

  int size() const { return n_; }
  int spectrum_size() const { return n_ / 2 + 1; }

  // out must hold spectrum_size() complex values.
  void forward(const double* in, std::complex<double>* out);
  // Inverse transform including the 1/n scaling; out holds size() reals.
  void inverse(const std::complex<double>* in, double* out);

 private:
  int n_ = 0;
  double* real_ = nullptr;   // fftw-aligned scratch
  void* spec_ = nullptr;     // fftw_complex scratch
  void* plan_fwd_ = nullptr;
  void* plan_bwd_ = nullptr;
};

// Per-thread workspace cache keyed by grid size.
FftWorkspace& thread_fft_workspace(int n);

}  // namespace detail

}  // namespace nsr
