#pragma once

#include <cstdint>
#include <vector>

#include "nsr/density.hpp"

namespace nsr {

// Per-element support decisions (1 = on-support).
using StateVector = std::vector<uint8_t>;

// Cellwise likelihood-ratio references for the support test:
//   r1[m] = f(x_m | on)  / f_prior(x_m)
//   r0[m] = f(x_m | off) / f_prior(x_m)
// where f_prior = q * f(.|on) + (1-q) * f(.|off).
struct ReferencePair {
  DensityGrid grid;
  std::vector<double> r0;
  std::vector<double> r1;
};

struct DetectorDiagnostics {
  long degenerate = 0;  // marginals whose statistic was 0/0
};

// References for the exact prior: on-support density N(0, sigma_x1^2)
// (sampled), off-support density a point mass at zero. Boundary rates
// (q = 0 or 1) are clamped inward by 1e-12 so the references and the
// threshold stay finite, making the endpoint priors behave as limits of
// interior ones; the same applies to the other reference builder and to
// bht_detect.
ReferencePair build_references(const DensityGrid& grid, double q,
                               double sigma_x1);

// Calibrated references: the off-support point mass is widened to a sampled
// N(0, (c * x_min)^2) so that sub-threshold residue (|x| < x_min) counts as
// evidence for "off" instead of "on". c * x_min is a standard deviation;
// c -> 0 recovers build_references.
ReferencePair build_calibrated_references(const DensityGrid& grid, double q,
                                          double sigma_x1, double x_min,
                                          double c);

// Likelihood-ratio statistic sum(r1 * f) / sum(r0 * f) for one marginal.
// Returns +infinity when only the numerator is positive and NaN when both
// sums vanish.
double bht_statistic(const SampledDensity& marginal,
                     const ReferencePair& refs);

// Bayesian binary hypothesis test per element: on-support iff the statistic
// strictly exceeds (1-q)/q. Ties and degenerate 0/0 statistics resolve to
// off-support (the latter also increments diag->degenerate).
StateVector bht_detect(const std::vector<SampledDensity>& marginals,
                       const ReferencePair& refs, double q,
                       DetectorDiagnostics* diag = nullptr);

// Peak test per element: on-support iff some cell strictly exceeds the
// zero cell's mass (ties keep the element off-support).
StateVector map_detect(const std::vector<SampledDensity>& marginals);

}  // namespace nsr
