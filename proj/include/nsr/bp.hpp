#pragma once

#include <span>
#include <vector>

#include "nsr/density.hpp"
#include "nsr/model.hpp"

namespace nsr {

struct BpConfig {
  int iterations = 10;       // full message-passing rounds
  bool noise_aware = true;   // false: replace the noise kernel with a narrow
                             // surrogate of variance (t_s/2)^2
  int trace_variable = -1;   // >= 0: record that variable's marginal per round
};

struct BpDiagnostics {
  long wrap_events = 0;          // measurements outside the grid range,
                                 // folded onto the circular period
  long underflow_fallbacks = 0;  // log-domain product rescues
  std::vector<SampledDensity> trace;  // one marginal per completed round
};

// Message state over the bipartite graph. Edges are enumerated in column
// order: edge ids for signal element i occupy [col_begin[i], col_begin[i+1]),
// and the t-th of them connects i to matrix.columns[i][t]. Message vectors
// are stored flat, n_d doubles per edge.
struct BpState {
  const SensingMatrix* graph = nullptr;
  DensityGrid grid;
  int iteration = 0;

  std::vector<int> edge_var;               // edge -> signal element
  std::vector<int> edge_meas;              // edge -> measurement
  std::vector<int> col_begin;              // size n+1
  std::vector<std::vector<int>> row_edges; // per measurement: edge ids

  std::vector<double> signal_msg;  // element -> measurement messages
  std::vector<double> meas_msg;    // measurement -> element messages

  int edge_count() const { return static_cast<int>(edge_var.size()); }
  std::span<double> signal_edge(int e);
  std::span<const double> signal_edge(int e) const;
  std::span<double> meas_edge(int e);
  std::span<const double> meas_edge(int e) const;
};

// Builds the edge indexing and sets every measurement->element message to the
// uniform density (so the first signal-message round sees flat evidence).
BpState bp_init(const SensingMatrix& graph, const DensityGrid& grid);

// One round of element -> measurement updates: for each edge (i, j), the
// message is the normalized product of the prior with the incoming
// measurement messages at i from all neighbors except j.
void update_signal_messages(BpState& state, const SampledDensity& prior,
                            BpDiagnostics* diag = nullptr);

// One round of measurement -> element updates: for each edge (j, i), the
// message is the sampled measurement-noise density centered at z[j],
// circularly convolved with the reversed incoming element messages at j from
// all neighbors except i. FFT-backed with an exclusion (prefix/suffix)
// product over the row, so a degree-d row costs O(d n_d log n_d).
void update_measurement_messages(BpState& state, std::span<const double> z,
                                 double sigma_n, bool noise_aware = true,
                                 BpDiagnostics* diag = nullptr);

// Posterior marginal per element: normalized product of the prior with all
// incoming measurement messages.
std::vector<SampledDensity> compute_marginals(const BpState& state,
                                              const SampledDensity& prior,
                                              BpDiagnostics* diag = nullptr);

// Full pipeline: init, `iterations` alternating rounds, then marginals.
std::vector<SampledDensity> bp_run(const SensingMatrix& graph,
                                   std::span<const double> z,
                                   const SampledDensity& prior, double sigma_n,
                                   const BpConfig& config,
                                   BpDiagnostics* diag = nullptr);

}  // namespace nsr
