#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "icnn/model.hpp"

namespace icnn {

struct CheckOptions {
  int64_t trials = -1;  // -1 = per-check default
  int64_t dim = -1;     // -1 = per-check default(s)
  int64_t k = 3;
  int64_t cin = 64;
  int64_t cout = 128;
  uint64_t seed = 0;
};

struct CheckResult {
  std::string name;
  bool pass = false;
  std::string detail;
  double seconds = 0.0;
};

// Gated-dense closed-form agreement: graph forward vs branch-selected
// scalar forward, max abs diff < 1e-12.
CheckResult check_equivalence(const CheckOptions& opt);

// Collapse and doubling limits of the convolutional unit: inner term forced
// negative -> bitwise equal to the plain conv; w'=0 with nonnegative main
// -> bitwise equal to twice the plain conv.
CheckResult check_reduction(const CheckOptions& opt);

// Finite-difference gradient audit over every layer kind.
CheckResult check_gradcheck(const CheckOptions& opt);

// Parameter and MAC deltas of one conv -> gated-conv swap at (k, cin, cout).
CheckResult check_overhead(const CheckOptions& opt);

// The full accounting grid k in {3,5}, cin in {16,64}, cout in {16,128}.
CheckResult check_overhead_grid(const CheckOptions& opt);

// Random-normal sweeps of the gate hyperplane angle monotonicity.
CheckResult check_angle_sweep(const CheckOptions& opt);

// Momentum/energy conservation and the transmission decomposition.
CheckResult check_collision(const CheckOptions& opt);

// Paired variants preserve every intermediate shape on random specs.
CheckResult check_shapes(const CheckOptions& opt);

// Serial and OpenMP kernels agree bitwise on random workloads.
CheckResult check_kernels(const CheckOptions& opt);

std::vector<CheckResult> all_checks(const CheckOptions& opt);
CheckResult run_named_check(const std::string& name,
                            const CheckOptions& opt);

// Random baseline architecture (conv/bn/relu/pool/blocks then
// flatten+dense); used by the shape-preservation check.
ModelSpec random_model_spec(uint64_t seed);

}  // namespace icnn
