#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace icnn {

// One-dimensional elastic collision: body 1 (mass m1, velocity v1) strikes
// body 2 (mass m2) at rest.
struct CollisionInput {
  double m1 = 1.0;
  double m2 = 1.0;
  double v1 = 0.0;
};

struct CollisionResult {
  double v1_after = 0.0;
  double v2_after = 0.0;
};

// Post-collision velocities from momentum and kinetic-energy conservation:
// v1' = (m1-m2)/(m1+m2) * v1, v2' = 2*m1/(m1+m2) * v1.
CollisionResult collision_velocities(const CollisionInput& c);

// Transmission form parameterized by w = 2*m1/(m1+m2): the striker keeps
// relu((w-1)*v1) and passes on w*v1; total is their sum.
struct TransmitResult {
  double kept = 0.0;     // relu((w-1) * v1)
  double passed = 0.0;   // w * v1
  double total = 0.0;
};

TransmitResult collision_transmit(double w, double v1);

// Cosine of the angle between the gate hyperplane normal (W - w'*I) and the
// all-ones direction I, in dimension N = W.size():
//   cos = (W.I - N*w') / sqrt(N*|W|^2 - 2*N*w'*(W.I) + N^2*w'^2)
// Strictly decreasing in w', bounded in (-1,1), zero at w' = W.I/N, provided
// W is not constant.
double hyperplane_cos_theta(const std::vector<double>& w, double w_prime);

struct SweepReport {
  std::vector<double> grid;
  std::vector<double> cos_values;
  bool strictly_decreasing = false;
  double min_cos = 0.0;
  double max_cos = 0.0;
  double zero_crossing = 0.0;  // analytic W.I/N, inserted into the grid
  double cos_at_crossing = 0.0;
  // indices bracketing the sign change
  int64_t bracket_lo = -1;
  int64_t bracket_hi = -1;
};

// Evaluates cos theta across the grid and asserts: strict decrease, values
// inside (-1,1), |cos| at the analytic crossing < 1e-10, and a sign change
// around it. Violations raise PropertyViolation naming the offending w'.
SweepReport angle_sweep(const std::vector<double>& w,
                            std::vector<double> grid);

// 2001 signed log-spaced magnitudes covering +-1e3 (plus zero); the analytic
// crossing point is inserted by angle_sweep.
std::vector<double> default_sweep_grid();

// Two-input unit y = relu(w1*x1 + w2*x2 + b1 + [relu(a1*x1 + a2*x2 + b2)]).
// The bracketed gate term is present only when has_inner is set.
struct TwoInputNeuron {
  double w1 = 0.0, w2 = 0.0, b1 = 0.0;
  bool has_inner = false;
  double a1 = 0.0, a2 = 0.0, b2 = 0.0;

  static TwoInputNeuron plain(double w1, double w2, double b1);
  static TwoInputNeuron with_inner(double w1, double w2, double b1, double a1,
                                   double a2, double b2);
  // Fixed-gate form with shared weights: inner slope is (w1-wp, w2-wp).
  static TwoInputNeuron collision(double w1, double w2, double b1, double b2,
                                  double wp);

  double eval(double x1, double x2) const;
  // 0: output identically zero (outer gate closed); 1: outer open, inner
  // closed; 2: outer and inner open. Regions whose output is identically
  // zero share label 0 regardless of the inner gate, which is what makes the
  // count match the visible decision regions.
  int label(double x1, double x2) const;
};

struct RegionMap {
  int64_t resolution = 0;
  double lo = 0.0, hi = 0.0;
  std::vector<uint8_t> labels;  // row-major, x2 rows by x1 columns
  int distinct = 0;
};

RegionMap region_map(const TwoInputNeuron& n, double lo = -1.5,
                     double hi = 1.5, int64_t resolution = 512);

std::string region_map_csv(const RegionMap& m);
std::string sweep_csv(const SweepReport& r);

}  // namespace icnn
