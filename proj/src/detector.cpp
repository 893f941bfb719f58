#include "nsr/detector.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace nsr {

namespace {

ReferencePair make_pair(const DensityGrid& grid, double q,
                        const std::vector<double>& slab,
                        const std::vector<double>& spike) {
  ReferencePair refs{grid, std::vector<double>(grid.n_d),
                     std::vector<double>(grid.n_d)};
  for (int m = 0; m < grid.n_d; ++m) {
    const double prior = q * slab[m] + (1.0 - q) * spike[m];
    if (!(prior > 0.0)) {
      throw std::runtime_error(
          "reference prior has a zero cell; grid and scales are inconsistent");
    }
    refs.r1[m] = slab[m] / prior;
    refs.r0[m] = spike[m] / prior;
  }
  return refs;
}

double clamp_q(double q) {
  if (!(q >= 0.0 && q <= 1.0)) {
    throw std::invalid_argument("sparsity rate q must lie in [0, 1]");
  }
  // Boundary rates degenerate the mixture; nudging them inward keeps the
  // references finite and drives every decision to the prior's verdict.
  return std::min(std::max(q, 1e-12), 1.0 - 1e-12);
}

}  // namespace

ReferencePair build_references(const DensityGrid& grid, double q,
                               double sigma_x1) {
  q = clamp_q(q);
  const SampledDensity slab = sample_gaussian(grid, 0.0, sigma_x1 * sigma_x1);
  std::vector<double> spike(grid.n_d, 0.0);
  spike[grid.center()] = 1.0;
  return make_pair(grid, q, slab.mass, spike);
}

ReferencePair build_calibrated_references(const DensityGrid& grid, double q,
                                          double sigma_x1, double x_min,
                                          double c) {
  q = clamp_q(q);
  if (!(x_min > 0.0) || !(c > 0.0)) {
    throw std::invalid_argument(
        "calibration needs positive x_min and width factor");
  }
  const SampledDensity slab = sample_gaussian(grid, 0.0, sigma_x1 * sigma_x1);
  const double width = c * x_min;
  const SampledDensity spike = sample_gaussian(grid, 0.0, width * width);
  return make_pair(grid, q, slab.mass, spike.mass);
}

double bht_statistic(const SampledDensity& marginal,
                     const ReferencePair& refs) {
  if (!(marginal.grid == refs.grid)) {
    throw std::invalid_argument("marginal grid does not match references");
  }
  double num = 0.0;
  double den = 0.0;
  for (int m = 0; m < refs.grid.n_d; ++m) {
    num += refs.r1[m] * marginal.mass[m];
    den += refs.r0[m] * marginal.mass[m];
  }
  if (den > 0.0) return num / den;
  if (num > 0.0) return std::numeric_limits<double>::infinity();
  return std::numeric_limits<double>::quiet_NaN();
}

StateVector bht_detect(const std::vector<SampledDensity>& marginals,
                       const ReferencePair& refs, double q,
                       DetectorDiagnostics* diag) {
  q = clamp_q(q);
  const double threshold = (1.0 - q) / q;
  StateVector s(marginals.size(), 0);
  for (size_t i = 0; i < marginals.size(); ++i) {
    const double stat = bht_statistic(marginals[i], refs);
    if (std::isnan(stat)) {
      if (diag != nullptr) ++diag->degenerate;
      continue;
    }
    s[i] = (stat > threshold) ? 1 : 0;
  }
  return s;
}

StateVector map_detect(const std::vector<SampledDensity>& marginals) {
  StateVector s(marginals.size(), 0);
  for (size_t i = 0; i < marginals.size(); ++i) {
    const auto& f = marginals[i];
    const double peak = *std::max_element(f.mass.begin(), f.mass.end());
    s[i] = (f.mass[f.grid.center()] < peak) ? 1 : 0;
  }
  return s;
}

}  // namespace nsr
