#include <doctest.h>

#include <cmath>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "nsr/density.hpp"
#include "nsr/estimator.hpp"
#include "nsr/model.hpp"

using namespace nsr;

namespace {

double gauss_pdf(double x, double variance) {
  return std::exp(-0.5 * x * x / variance) /
         std::sqrt(2.0 * M_PI * variance);
}

double dot_diff2(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return s;
}

}  // namespace

TEST_CASE("empty detected support yields the zero estimate") {
  Rng rng = make_rng(41);
  const SensingMatrix mat = generate_matrix(6, 12, 2, rng);
  const StateVector none(12, 0);
  const std::vector<double> z(6, 1.0);
  const std::vector<double> x = mmse_on_support(mat, none, z, 5.0, 0.5);
  CHECK(x == std::vector<double>(12, 0.0));
}

TEST_CASE("single-element support solves the scalar ridge in closed form") {
  // One active column of weight L: x = sum(z over its rows) / (L + sn^2/sx^2).
  const SensingMatrix mat =
      SensingMatrix::from_columns(4, 2, {{0, 1, 2}, {3}}, 0);
  const std::vector<double> z = {1.0, 2.0, 0.5, 9.0};
  const double sx = 5.0;
  const double sn = 0.7;
  StateVector support = {1, 0};
  const std::vector<double> x = mmse_on_support(mat, support, z, sx, sn);
  const double want = (1.0 + 2.0 + 0.5) / (3.0 + sn * sn / (sx * sx));
  CHECK(x[0] == doctest::Approx(want).epsilon(1e-12));
  CHECK(x[1] == 0.0);
}

TEST_CASE("the ridge solution satisfies its normal equations") {
  Rng rng = make_rng(42);
  const SensingMatrix mat = generate_matrix(8, 16, 3, rng);
  StateVector support(16, 0);
  for (int i : {1, 4, 7, 11, 15}) support[i] = 1;
  std::normal_distribution<double> zd(0.0, 3.0);
  std::vector<double> z(8);
  for (double& v : z) v = zd(rng);
  const double sx = 5.0, sn = 0.6;

  const std::vector<double> x = mmse_on_support(mat, support, z, sx, sn);

  // Residual of (sx^-2 I + sn^-2 Phi_s' Phi_s) x_s = sn^-2 Phi_s' z.
  for (int i = 0; i < 16; ++i) {
    if (!support[i]) {
      CHECK(x[i] == 0.0);
      continue;
    }
    double lhs = x[i] / (sx * sx);
    double rhs = 0.0;
    for (int j : mat.columns[i]) {
      double row_sum = 0.0;
      for (int k : mat.rows[j]) {
        if (support[k]) row_sum += x[k];
      }
      lhs += row_sum / (sn * sn);
      rhs += z[j] / (sn * sn);
    }
    CHECK(std::abs(lhs - rhs) <= 1e-8 * std::max(1.0, std::abs(rhs)));
  }
}

TEST_CASE("strong noise shrinks the estimate toward zero") {
  Rng rng = make_rng(43);
  const SensingMatrix mat = generate_matrix(8, 16, 3, rng);
  StateVector support(16, 0);
  support[2] = support[9] = 1;
  const std::vector<double> z(8, 4.0);
  const std::vector<double> mild = mmse_on_support(mat, support, z, 5.0, 0.1);
  const std::vector<double> loud = mmse_on_support(mat, support, z, 5.0, 100.0);
  double mild2 = 0.0, loud2 = 0.0;
  for (int i = 0; i < 16; ++i) {
    mild2 += mild[i] * mild[i];
    loud2 += loud[i] * loud[i];
  }
  CHECK(loud2 < 1e-3 * mild2);
}

TEST_CASE("oracle estimator is the ridge on the true support") {
  Rng rng = make_rng(44);
  const SensingMatrix mat = generate_matrix(12, 24, 3, rng);
  const SignalModel model = SignalModel::make_gaussian(24, 0.2, 5.0, 1.25);
  const SparseSignal sig = generate_signal(model, rng);
  const double sn = 0.5;
  const std::vector<double> z = measure(mat, sig, {sn}, rng);

  const std::vector<double> a = oracle_estimate(mat, sig, z, 5.0, sn);
  StateVector s(sig.state.begin(), sig.state.end());
  const std::vector<double> b = mmse_on_support(mat, s, z, 5.0, sn);
  CHECK(dot_diff2(a, b) == 0.0);
}

TEST_CASE("vanishing noise recovers the exact signal") {
  Rng rng = make_rng(45);
  const SensingMatrix mat = generate_matrix(16, 32, 4, rng);
  const SignalModel model = SignalModel::make_gaussian(32, 0.15, 5.0, 1.25);
  SparseSignal sig = generate_signal(model, rng);
  if (sig.support_size() == 0) {
    sig.state[0] = 1;
    sig.values[0] = 2.0;
  }
  const std::vector<double> z = apply_matrix(mat, sig.values);

  for (double sn : {1e-9, 0.0}) {
    const std::vector<double> x = oracle_estimate(mat, sig, z, 5.0, sn);
    CHECK(dot_diff2(x, sig.values) / sig.support_energy() < 1e-12);
  }
}

TEST_CASE("closed-form oracle error matches Monte-Carlo") {
  Rng rng = make_rng(46);
  const SensingMatrix mat = generate_matrix(10, 20, 3, rng);
  const SignalModel model = SignalModel::make_gaussian(20, 0.25, 5.0, 1.25);
  SparseSignal sig = generate_signal(model, rng);
  if (sig.support_size() == 0) {
    sig.state[3] = 1;
    sig.values[3] = 3.0;
  }
  const double sn = 1.2;
  const double want = oracle_mse_formula(mat, sig, 5.0, sn);

  // Average the realized normalized error over fresh noise draws; the
  // trace formula is its exact expectation.
  double acc = 0.0;
  const int reps = 600;
  for (int r = 0; r < reps; ++r) {
    const std::vector<double> z = measure(mat, sig, {sn}, rng);
    const std::vector<double> x = oracle_estimate(mat, sig, z, 5.0, sn);
    acc += dot_diff2(x, sig.values) / sig.support_energy();
  }
  acc /= reps;
  CHECK(acc == doctest::Approx(want).epsilon(0.10));
}

TEST_CASE("closed-form oracle error on disjoint columns") {
  // Columns touching disjoint rows decouple: trace = sum of scalar ridge
  // variances 1 / (sx^-2 + L * sn^-2).
  const SensingMatrix mat =
      SensingMatrix::from_columns(4, 2, {{0, 1}, {2, 3}}, 2);
  SparseSignal sig;
  sig.values = {2.0, -3.0};
  sig.state = {1, 1};
  const double sx = 5.0, sn = 0.8;
  const double per = 1.0 / (1.0 / (sx * sx) + 2.0 / (sn * sn));
  CHECK(oracle_mse_formula(mat, sig, sx, sn) ==
        doctest::Approx(2.0 * per / 13.0).epsilon(1e-12));

  SparseSignal empty;
  empty.values = {0.0, 0.0};
  empty.state = {0, 0};
  CHECK_THROWS_AS((void)oracle_mse_formula(mat, empty, sx, sn),
                  std::invalid_argument);
}

TEST_CASE("exhaustive posterior mean: scalar gaussian closed form") {
  // N=M=1, weight-1 column: the support enumeration reduces to a two-term
  // mixture whose posterior mean has a textbook closed form.
  const SensingMatrix mat = SensingMatrix::from_columns(1, 1, {{0}}, 1);
  const double q = 0.2, sx = 5.0, sn = 0.9;
  for (double z : {0.3, 2.0, -6.5}) {
    const std::vector<double> x =
        exhaustive_mmse(mat, {{z}}, q, sx, sn, SignalKind::kGaussian);
    const double on = q * gauss_pdf(z, sx * sx + sn * sn);
    const double off = (1.0 - q) * gauss_pdf(z, sn * sn);
    const double w = on / (on + off);
    const double want = w * z * sx * sx / (sx * sx + sn * sn);
    CHECK(x[0] == doctest::Approx(want).epsilon(1e-10));
  }
}

TEST_CASE("exhaustive posterior mean: scalar signed closed form") {
  const SensingMatrix mat = SensingMatrix::from_columns(1, 1, {{0}}, 1);
  const double q = 0.3, sx = 5.0, sn = 1.1;
  for (double z : {0.5, 4.0, -5.0}) {
    const std::vector<double> x =
        exhaustive_mmse(mat, {{z}}, q, sx, sn, SignalKind::kSigned);
    const double p_plus = q * 0.5 * gauss_pdf(z - sx, sn * sn);
    const double p_minus = q * 0.5 * gauss_pdf(z + sx, sn * sn);
    const double p_off = (1.0 - q) * gauss_pdf(z, sn * sn);
    const double want = sx * (p_plus - p_minus) / (p_plus + p_minus + p_off);
    CHECK(x[0] == doctest::Approx(want).epsilon(1e-10));
  }
}

TEST_CASE("exhaustive posterior mean: degenerate rates and guards") {
  Rng rng = make_rng(47);
  const SensingMatrix mat = generate_matrix(4, 6, 2, rng);
  const std::vector<double> z = {1.0, -2.0, 0.5, 3.0};
  const std::vector<double> zero =
      exhaustive_mmse(mat, z, 0.0, 5.0, 0.8, SignalKind::kGaussian);
  CHECK(zero == std::vector<double>(6, 0.0));

  const SensingMatrix big_g = generate_matrix(4, 17, 2, rng);
  CHECK_THROWS_AS((void)exhaustive_mmse(big_g, z, 0.2, 5.0, 0.8,
                                        SignalKind::kGaussian),
                  std::invalid_argument);
  const SensingMatrix big_s = generate_matrix(4, 13, 2, rng);
  CHECK_THROWS_AS((void)exhaustive_mmse(big_s, z, 0.2, 5.0, 0.8,
                                        SignalKind::kSigned),
                  std::invalid_argument);
}

TEST_CASE("exhaustive posterior mean is equivariant to column relabeling") {
  Rng rng = make_rng(48);
  const SensingMatrix mat = generate_matrix(5, 6, 2, rng);
  std::vector<double> z = {0.7, -1.3, 2.2, 0.1, -0.6};
  const std::vector<double> x =
      exhaustive_mmse(mat, z, 0.25, 5.0, 0.7, SignalKind::kGaussian);

  // Reverse the column order.
  std::vector<std::vector<int>> cols(mat.columns.rbegin(),
                                     mat.columns.rend());
  const SensingMatrix rev = SensingMatrix::from_columns(5, 6, std::move(cols),
                                                        mat.column_weight);
  const std::vector<double> y =
      exhaustive_mmse(rev, z, 0.25, 5.0, 0.7, SignalKind::kGaussian);
  for (int i = 0; i < 6; ++i) {
    CHECK(y[i] == doctest::Approx(x[5 - i]).epsilon(1e-12));
  }
}

TEST_CASE("peak readout reports cell values with zero-favoring ties") {
  const DensityGrid g = DensityGrid::for_sigma(256, 5.0);
  const int at = g.nearest_index(6.7);
  std::vector<SampledDensity> marginals;
  marginals.push_back(delta_density(g, at));

  SampledDensity tie{g, std::vector<double>(g.n_d, 0.0)};
  tie.mass[g.center()] = 0.5;
  tie.mass[at] = 0.5;
  marginals.push_back(tie);

  const std::vector<double> x = map_value_readout(marginals);
  CHECK(x[0] == g.value(at));
  CHECK(x[1] == 0.0);
}

TEST_CASE("peak readout disambiguates the circular seam by neighbor mass") {
  const DensityGrid g = DensityGrid::for_sigma(256, 5.0);
  // Cell 0 represents both -15 and +15. A value just above +14.94 wraps its
  // upper tail into the top cells; a value just below -14.94 leaks into
  // cell 1 instead.
  SampledDensity high{g, std::vector<double>(g.n_d, 0.0)};
  high.mass[0] = 0.7;
  high.mass[255] = 0.25;
  high.mass[1] = 0.05;
  SampledDensity low{g, std::vector<double>(g.n_d, 0.0)};
  low.mass[0] = 0.7;
  low.mass[1] = 0.25;
  low.mass[255] = 0.05;

  const std::vector<double> x = map_value_readout({high, low});
  CHECK(x[0] == 15.0);
  CHECK(x[1] == -15.0);
}

TEST_CASE("quantization floor constant and empirical cell error") {
  const DensityGrid g = DensityGrid::for_sigma(256, 5.0);
  CHECK(quantization_floor_nmse(g, 5.0) == g.t_s * g.t_s / 12.0 / 25.0);
  CHECK(quantization_floor_nmse(g, 5.0) == doctest::Approx(4.5776e-5).epsilon(1e-3));

  // Rounding a smooth on-support draw to the grid loses t_s^2/12 per
  // element in expectation.
  Rng rng = make_rng(49);
  const SignalModel model = SignalModel::make_gaussian(200000, 1.0, 5.0, 1.25);
  const SparseSignal sig = generate_signal(model, rng);
  double err2 = 0.0;
  for (double v : sig.values) {
    const double d = v - g.value(g.nearest_index(v));
    err2 += d * d;
  }
  err2 /= model.n;
  CHECK(err2 == doctest::Approx(g.t_s * g.t_s / 12.0).epsilon(0.02));
}
