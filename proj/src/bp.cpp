#include "nsr/bp.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <stdexcept>
#include <string>

namespace nsr {

namespace {

// Uniform mass mixed into every measurement message after normalization.
// Mutually contradictory near-delta messages (a mismatched kernel, loopy
// transients) otherwise leave only FFT rounding dust for the renormalizer to
// amplify into confident garbage; the floor keeps disagreement multimodal
// and every downstream product strictly positive. Large enough to dominate
// FFT dust (~1e-15 relative), far too small to move any healthy message.
constexpr double kMessageFloor = 1e-9;

void check_state(const BpState& state) {
  if (state.graph == nullptr) {
    throw std::invalid_argument("belief propagation state has no graph");
  }
}

void floor_message(std::span<double> mass) {
  const double eps = kMessageFloor / static_cast<double>(mass.size());
  for (double& v : mass) v = (1.0 - kMessageFloor) * v + eps;
}

// Marginal of a single element: prior times its incoming measurement
// messages.
SampledDensity marginal_of(const BpState& state, const SampledDensity& prior,
                           int i, long* underflow_events) {
  const int n_d = state.grid.n_d;
  std::vector<const double*> factors;
  factors.reserve(state.col_begin[i + 1] - state.col_begin[i] + 1);
  factors.push_back(prior.mass.data());
  for (int e = state.col_begin[i]; e < state.col_begin[i + 1]; ++e) {
    factors.push_back(state.meas_msg.data() + static_cast<size_t>(e) * n_d);
  }
  SampledDensity out{state.grid, std::vector<double>(n_d)};
  detail::product_normalize(factors, n_d, out.mass.data(), underflow_events);
  return out;
}

}  // namespace

std::span<double> BpState::signal_edge(int e) {
  return {signal_msg.data() + static_cast<size_t>(e) * grid.n_d,
          static_cast<size_t>(grid.n_d)};
}

std::span<const double> BpState::signal_edge(int e) const {
  return {signal_msg.data() + static_cast<size_t>(e) * grid.n_d,
          static_cast<size_t>(grid.n_d)};
}

std::span<double> BpState::meas_edge(int e) {
  return {meas_msg.data() + static_cast<size_t>(e) * grid.n_d,
          static_cast<size_t>(grid.n_d)};
}

std::span<const double> BpState::meas_edge(int e) const {
  return {meas_msg.data() + static_cast<size_t>(e) * grid.n_d,
          static_cast<size_t>(grid.n_d)};
}

BpState bp_init(const SensingMatrix& graph, const DensityGrid& grid) {
  graph.validate();
  BpState state;
  state.graph = &graph;
  state.grid = grid;
  state.iteration = 0;

  state.col_begin.assign(graph.n + 1, 0);
  for (int i = 0; i < graph.n; ++i) {
    state.col_begin[i + 1] =
        state.col_begin[i] + static_cast<int>(graph.columns[i].size());
  }
  const int edges = state.col_begin[graph.n];
  state.edge_var.resize(edges);
  state.edge_meas.resize(edges);
  state.row_edges.assign(graph.m, {});
  for (int i = 0; i < graph.n; ++i) {
    for (size_t t = 0; t < graph.columns[i].size(); ++t) {
      const int e = state.col_begin[i] + static_cast<int>(t);
      const int j = graph.columns[i][t];
      state.edge_var[e] = i;
      state.edge_meas[e] = j;
      state.row_edges[j].push_back(e);
    }
  }

  const size_t cells = static_cast<size_t>(edges) * grid.n_d;
  state.signal_msg.assign(cells, 0.0);
  state.meas_msg.assign(cells, 1.0 / grid.n_d);
  return state;
}

void update_signal_messages(BpState& state, const SampledDensity& prior,
                            BpDiagnostics* diag) {
  check_state(state);
  if (!(prior.grid == state.grid)) {
    throw std::invalid_argument("prior grid does not match the state grid");
  }
  const int n_d = state.grid.n_d;
  long* underflow = (diag != nullptr) ? &diag->underflow_fallbacks : nullptr;
  std::vector<const double*> factors;
  for (int i = 0; i < state.graph->n; ++i) {
    const int begin = state.col_begin[i];
    const int end = state.col_begin[i + 1];
    for (int e = begin; e < end; ++e) {
      factors.clear();
      factors.push_back(prior.mass.data());
      for (int e2 = begin; e2 < end; ++e2) {
        if (e2 == e) continue;
        factors.push_back(state.meas_msg.data() +
                          static_cast<size_t>(e2) * n_d);
      }
      detail::product_normalize(
          factors, n_d, state.signal_msg.data() + static_cast<size_t>(e) * n_d,
          underflow);
    }
  }
}

void update_measurement_messages(BpState& state, std::span<const double> z,
                                 double sigma_n, bool noise_aware,
                                 BpDiagnostics* diag) {
  check_state(state);
  if (static_cast<int>(z.size()) != state.graph->m) {
    throw std::invalid_argument("measurement vector length mismatch");
  }
  if (noise_aware && !(sigma_n > 0.0)) {
    throw std::invalid_argument(
        "noise-aware updates need a positive noise level");
  }
  const DensityGrid grid = state.grid;
  const int n = grid.n_d;
  const int c = grid.center();
  const double half_cell = grid.t_s / 2.0;
  const double kernel_var =
      noise_aware ? sigma_n * sigma_n : half_cell * half_cell;

  auto& ws = detail::thread_fft_workspace(n);
  const int ns = ws.spectrum_size();

  std::vector<double> rev(n);
  std::vector<double> tmp(n);
  std::vector<std::complex<double>> spectra;
  std::vector<std::complex<double>> prefix;
  std::vector<std::complex<double>> suffix;
  std::vector<std::complex<double>> prod(ns);

  for (int j = 0; j < state.graph->m; ++j) {
    const auto& row = state.row_edges[j];
    const int d = static_cast<int>(row.size());
    if (d == 0) continue;

    if (diag != nullptr &&
        (z[j] < grid.min_value() || z[j] > grid.max_value())) {
      ++diag->wrap_events;
    }
    // Wrapped sampling keeps an out-of-range measurement at its exact
    // position modulo the span, matching the circular interference sums; a
    // clamped kernel would inject a contradiction that hardens with SNR.
    const SampledDensity kernel =
        sample_gaussian_wrapped(grid, z[j], kernel_var);

    if (d == 1) {
      std::copy(kernel.mass.begin(), kernel.mass.end(),
                state.meas_edge(row[0]).begin());
      floor_message(state.meas_edge(row[0]));
      continue;
    }

    spectra.resize(static_cast<size_t>(d) * ns);
    prefix.resize(static_cast<size_t>(d + 1) * ns);
    suffix.resize(static_cast<size_t>(d + 1) * ns);

    for (int t = 0; t < d; ++t) {
      const auto a = state.signal_edge(row[t]);
      for (int m = 0; m < n; ++m) rev[m] = a[(n - m) % n];
      ws.forward(rev.data(), &spectra[static_cast<size_t>(t) * ns]);
    }

    // prefix[t] = kernel * spectra[0..t), suffix[t] = spectra[t..d); the
    // message on edge t multiplies prefix[t] with suffix[t+1], excluding
    // exactly its own element's contribution.
    ws.forward(kernel.mass.data(), &prefix[0]);
    for (int t = 0; t < d; ++t) {
      const auto* p = &prefix[static_cast<size_t>(t) * ns];
      const auto* s = &spectra[static_cast<size_t>(t) * ns];
      auto* nxt = &prefix[static_cast<size_t>(t + 1) * ns];
      for (int k = 0; k < ns; ++k) nxt[k] = p[k] * s[k];
    }
    std::fill(&suffix[static_cast<size_t>(d) * ns],
              &suffix[static_cast<size_t>(d) * ns] + ns,
              std::complex<double>(1.0, 0.0));
    for (int t = d - 1; t >= 0; --t) {
      const auto* s = &spectra[static_cast<size_t>(t) * ns];
      const auto* nxt = &suffix[static_cast<size_t>(t + 1) * ns];
      auto* cur = &suffix[static_cast<size_t>(t) * ns];
      for (int k = 0; k < ns; ++k) cur[k] = s[k] * nxt[k];
    }

    // d inputs fold into each message (kernel + d-1 reversed messages), so
    // the center-alignment rotation is (d-1)*center.
    const int shift = static_cast<int>((static_cast<long>(d - 1) * c) % n);
    for (int t = 0; t < d; ++t) {
      const auto* p = &prefix[static_cast<size_t>(t) * ns];
      const auto* s = &suffix[static_cast<size_t>(t + 1) * ns];
      for (int k = 0; k < ns; ++k) prod[k] = p[k] * s[k];
      ws.inverse(prod.data(), tmp.data());
      auto b = state.meas_edge(row[t]);
      for (int m = 0; m < n; ++m) {
        b[m] = std::max(tmp[(m + shift) % n], 0.0);
      }
      detail::normalize_in_place(b);
      floor_message(b);
    }
  }
}

std::vector<SampledDensity> compute_marginals(const BpState& state,
                                              const SampledDensity& prior,
                                              BpDiagnostics* diag) {
  check_state(state);
  if (!(prior.grid == state.grid)) {
    throw std::invalid_argument("prior grid does not match the state grid");
  }
  long* underflow = (diag != nullptr) ? &diag->underflow_fallbacks : nullptr;
  std::vector<SampledDensity> marginals;
  marginals.reserve(state.graph->n);
  for (int i = 0; i < state.graph->n; ++i) {
    marginals.push_back(marginal_of(state, prior, i, underflow));
  }
  return marginals;
}

std::vector<SampledDensity> bp_run(const SensingMatrix& graph,
                                   std::span<const double> z,
                                   const SampledDensity& prior, double sigma_n,
                                   const BpConfig& config,
                                   BpDiagnostics* diag) {
  if (config.iterations < 1) {
    throw std::invalid_argument("at least one message-passing round required");
  }
  if (config.trace_variable >= graph.n) {
    throw std::invalid_argument("trace variable index out of range");
  }
  BpState state = bp_init(graph, prior.grid);
  long* underflow = (diag != nullptr) ? &diag->underflow_fallbacks : nullptr;
  for (int l = 0; l < config.iterations; ++l) {
    update_signal_messages(state, prior, diag);
    update_measurement_messages(state, z, sigma_n, config.noise_aware, diag);
    state.iteration = l + 1;
    if (diag != nullptr && config.trace_variable >= 0) {
      diag->trace.push_back(
          marginal_of(state, prior, config.trace_variable, underflow));
    }
  }
  return compute_marginals(state, prior, diag);
}

}  // namespace nsr
