#pragma once

#include <span>
#include <vector>

#include "nsr/density.hpp"
#include "nsr/detector.hpp"
#include "nsr/model.hpp"

namespace nsr {

// Linear MMSE of the on-support values given a detected support: solves
//   x_s = (sigma_x1^-2 I + sigma_n^-2 Phi_s^T Phi_s)^-1 sigma_n^-2 Phi_s^T z
// and scatters the result into a length-N vector (zeros off-support).
// sigma_n == 0 is regularized as sigma_n^2 := 1e-12 * sigma_x1^2. An empty
// support yields the all-zero vector.
std::vector<double> mmse_on_support(const SensingMatrix& matrix,
                                    const StateVector& support,
                                    std::span<const double> z, double sigma_x1,
                                    double sigma_n);

// The same solve on the true support (the genie-aided estimator).
std::vector<double> oracle_estimate(const SensingMatrix& matrix,
                                    const SparseSignal& signal,
                                    std::span<const double> z, double sigma_x1,
                                    double sigma_n);

// Closed-form normalized MSE of the genie-aided estimator for one instance:
//   trace[(sigma_x1^-2 I + sigma_n^-2 Phi_s^T Phi_s)^-1] / ||x0_s||^2.
// Requires a nonempty support with positive energy.
double oracle_mse_formula(const SensingMatrix& matrix,
                          const SparseSignal& signal, double sigma_x1,
                          double sigma_n);

// Full Bayesian posterior mean by support enumeration (2^N supports).
// Gaussian kind treats on-support values as N(0, sigma_x1^2); Signed kind
// additionally enumerates the +/- sigma_x1 sign patterns. Guards: N <= 16
// (Gaussian), N <= 12 (Signed). Reference-quality, exponential cost.
std::vector<double> exhaustive_mmse(const SensingMatrix& matrix,
                                    std::span<const double> z, double q,
                                    double sigma_x1, double sigma_n,
                                    SignalKind kind = SignalKind::kGaussian);

// Peak readout per marginal: the grid value of the highest-mass cell, with
// ties involving the zero cell reading as 0 (consistent with map_detect).
std::vector<double> map_value_readout(
    const std::vector<SampledDensity>& marginals);

// Normalized MSE floor of any grid-quantized readout: t_s^2 / 12 divided by
// the on-support second moment sigma_x1^2.
double quantization_floor_nmse(const DensityGrid& grid, double sigma_x1);

}  // namespace nsr
