#include "icnn/collision.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "icnn/error.hpp"

namespace icnn {

CollisionResult collision_velocities(const CollisionInput& c) {
  if (!(c.m1 > 0.0) || !(c.m2 > 0.0))
    throw ValueError("collision masses must be positive");
  CollisionResult r;
  r.v1_after = (c.m1 - c.m2) / (c.m1 + c.m2) * c.v1;
  r.v2_after = 2.0 * c.m1 / (c.m1 + c.m2) * c.v1;
  return r;
}

TransmitResult collision_transmit(double w, double v1) {
  TransmitResult r;
  const double kept = (w - 1.0) * v1;
  r.kept = kept > 0.0 ? kept : 0.0;
  r.passed = w * v1;
  r.total = r.kept + r.passed;
  return r;
}

namespace {

void check_nonconstant(const std::vector<double>& w) {
  if (w.size() < 2)
    throw ValueError("weight vector must have dimension >= 2");
  const double first = w[0];
  for (double v : w)
    if (v != first) return;
  throw ValueError(
      "weight vector is constant (parallel to the all-ones direction); the "
      "gate hyperplane angle is undefined");
}

}  // namespace

double hyperplane_cos_theta(const std::vector<double>& w, double w_prime) {
  check_nonconstant(w);
  const double n = static_cast<double>(w.size());
  double dot = 0.0, norm2 = 0.0;
  for (double v : w) {
    dot += v;
    norm2 += v * v;
  }
  const double denom2 =
      n * norm2 - 2.0 * n * w_prime * dot + n * n * w_prime * w_prime;
  if (!(denom2 > 0.0))
    throw ValueError("degenerate gate normal (W - w'*I vanishes)");
  return (dot - n * w_prime) / std::sqrt(denom2);
}

std::vector<double> default_sweep_grid() {
  // 1000 log-spaced magnitudes per sign from 1e-3 to 1e3, plus zero
  std::vector<double> g;
  g.reserve(2001);
  const int per_side = 1000;
  for (int i = per_side - 1; i >= 0; --i)
    g.push_back(-std::pow(10.0, -3.0 + 6.0 * i / (per_side - 1)));
  g.push_back(0.0);
  for (int i = 0; i < per_side; ++i)
    g.push_back(std::pow(10.0, -3.0 + 6.0 * i / (per_side - 1)));
  return g;
}

SweepReport angle_sweep(const std::vector<double>& w,
                            std::vector<double> grid) {
  check_nonconstant(w);
  if (grid.size() < 2) throw ValueError("sweep grid needs >= 2 points");
  for (size_t i = 1; i < grid.size(); ++i)
    if (!(grid[i] > grid[i - 1]))
      throw ValueError("sweep grid must be strictly increasing");

  double dot = 0.0;
  for (double v : w) dot += v;
  const double crossing = dot / static_cast<double>(w.size());

  SweepReport r;
  r.zero_crossing = crossing;
  auto pos = std::lower_bound(grid.begin(), grid.end(), crossing);
  if (pos == grid.end() || *pos != crossing) grid.insert(pos, crossing);
  r.grid = std::move(grid);

  r.cos_values.reserve(r.grid.size());
  for (double wp : r.grid) r.cos_values.push_back(hyperplane_cos_theta(w, wp));

  r.min_cos = r.cos_values.front();
  r.max_cos = r.cos_values.front();
  r.strictly_decreasing = true;
  for (size_t i = 0; i < r.cos_values.size(); ++i) {
    const double c = r.cos_values[i];
    r.min_cos = std::min(r.min_cos, c);
    r.max_cos = std::max(r.max_cos, c);
    if (!(std::fabs(c) < 1.0))
      throw PropertyViolation("cos theta out of (-1,1) at w' = " +
                              std::to_string(r.grid[i]));
    if (i > 0 && !(c < r.cos_values[i - 1])) {
      r.strictly_decreasing = false;
      throw PropertyViolation("cos theta not strictly decreasing at w' = " +
                              std::to_string(r.grid[i]));
    }
  }

  const size_t ci = static_cast<size_t>(
      std::lower_bound(r.grid.begin(), r.grid.end(), crossing) -
      r.grid.begin());
  r.cos_at_crossing = r.cos_values[ci];
  if (std::fabs(r.cos_at_crossing) > 1e-10)
    throw PropertyViolation("cos theta at the analytic crossing w' = " +
                            std::to_string(crossing) + " is " +
                            std::to_string(r.cos_at_crossing));
  if (ci == 0 || ci + 1 == r.grid.size())
    throw PropertyViolation("crossing w' = " + std::to_string(crossing) +
                            " not interior to the sweep grid");
  if (!(r.cos_values[ci - 1] > 0.0) || !(r.cos_values[ci + 1] < 0.0))
    throw PropertyViolation("no sign change around w' = " +
                            std::to_string(crossing));
  r.bracket_lo = static_cast<int64_t>(ci) - 1;
  r.bracket_hi = static_cast<int64_t>(ci) + 1;
  return r;
}

TwoInputNeuron TwoInputNeuron::plain(double w1, double w2, double b1) {
  TwoInputNeuron n;
  n.w1 = w1;
  n.w2 = w2;
  n.b1 = b1;
  return n;
}

TwoInputNeuron TwoInputNeuron::with_inner(double w1, double w2, double b1,
                                          double a1, double a2, double b2) {
  TwoInputNeuron n;
  n.w1 = w1;
  n.w2 = w2;
  n.b1 = b1;
  n.has_inner = true;
  n.a1 = a1;
  n.a2 = a2;
  n.b2 = b2;
  return n;
}

TwoInputNeuron TwoInputNeuron::collision(double w1, double w2, double b1,
                                         double b2, double wp) {
  return with_inner(w1, w2, b1, w1 - wp, w2 - wp, b2);
}

double TwoInputNeuron::eval(double x1, double x2) const {
  double pre = w1 * x1 + w2 * x2 + b1;
  if (has_inner) {
    const double h = a1 * x1 + a2 * x2 + b2;
    if (h > 0.0) pre += h;
  }
  return pre > 0.0 ? pre : 0.0;
}

int TwoInputNeuron::label(double x1, double x2) const {
  const double h = has_inner ? a1 * x1 + a2 * x2 + b2 : 0.0;
  double pre = w1 * x1 + w2 * x2 + b1;
  if (has_inner && h > 0.0) pre += h;
  if (pre <= 0.0) return 0;
  return (has_inner && h > 0.0) ? 2 : 1;
}

RegionMap region_map(const TwoInputNeuron& n, double lo, double hi,
                     int64_t resolution) {
  if (resolution < 2) throw ValueError("region map resolution must be >= 2");
  if (!(hi > lo)) throw ValueError("region map bounds must satisfy lo < hi");
  RegionMap m;
  m.resolution = resolution;
  m.lo = lo;
  m.hi = hi;
  m.labels.resize(static_cast<size_t>(resolution * resolution));
  bool seen[3] = {false, false, false};
  const double step = (hi - lo) / static_cast<double>(resolution - 1);
  for (int64_t i = 0; i < resolution; ++i) {
    const double x2 = lo + step * static_cast<double>(i);
    for (int64_t j = 0; j < resolution; ++j) {
      const double x1 = lo + step * static_cast<double>(j);
      const int lab = n.label(x1, x2);
      m.labels[static_cast<size_t>(i * resolution + j)] =
          static_cast<uint8_t>(lab);
      seen[lab] = true;
    }
  }
  m.distinct = (seen[0] ? 1 : 0) + (seen[1] ? 1 : 0) + (seen[2] ? 1 : 0);
  return m;
}

std::string region_map_csv(const RegionMap& m) {
  std::ostringstream os;
  for (int64_t i = 0; i < m.resolution; ++i) {
    for (int64_t j = 0; j < m.resolution; ++j) {
      if (j) os << ',';
      os << static_cast<int>(m.labels[static_cast<size_t>(i * m.resolution + j)]);
    }
    os << '\n';
  }
  return os.str();
}

std::string sweep_csv(const SweepReport& r) {
  std::ostringstream os;
  os << "w_prime,cos_theta\n";
  os.precision(17);
  for (size_t i = 0; i < r.grid.size(); ++i)
    os << r.grid[i] << ',' << r.cos_values[i] << '\n';
  return os.str();
}

}  // namespace icnn
