#pragma once

#include <string>
#include <vector>

namespace nsr {

struct CheckResult {
  std::string name;
  bool pass = false;
  std::string detail;
};

// Independent-oracle consistency checks. Each oracle avoids the production
// code path it validates: direct-summation convolution (no FFT), exhaustive
// discrete sum-product enumeration (no message passing), a hand-rolled dense
// Gauss-Jordan solve (no Eigen), and a closed-form Gaussian likelihood ratio
// (no grid).
CheckResult check_fft_convolution_oracle(uint64_t seed);
CheckResult check_tree_bp_oracle(uint64_t seed);
CheckResult check_ridge_dense_oracle(uint64_t seed);
CheckResult check_support_test_analytic_oracle(uint64_t seed);

// All four with fixed seeds, in order.
std::vector<CheckResult> run_selftest();

}  // namespace nsr
