#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <set>
#include <sstream>
#include <vector>

#include "icnn/collision.hpp"
#include "icnn/error.hpp"
#include "icnn/rng.hpp"

using namespace icnn;

TEST_CASE("collision velocities") {
  CollisionResult r = collision_velocities({1.0, 1.0, 1.0});
  CHECK(r.v1_after == 0.0);
  CHECK(r.v2_after == 1.0);

  r = collision_velocities({3.0, 1.0, 2.0});
  CHECK(r.v1_after == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(r.v2_after == doctest::Approx(3.0).epsilon(1e-15));

  r = collision_velocities({2.0, 5.0, 0.0});
  CHECK(r.v1_after == 0.0);
  CHECK(r.v2_after == 0.0);

  CHECK_THROWS_AS(collision_velocities({0.0, 1.0, 1.0}), ValueError);
  CHECK_THROWS_AS(collision_velocities({1.0, -2.0, 1.0}), ValueError);
}

TEST_CASE("momentum and energy conservation over random inputs") {
  Rng rng(derive_seed(0, 0xC0L));
  for (int t = 0; t < 10000; ++t) {
    CollisionInput c;
    c.m1 = rng.uniform(0.05, 20.0);
    c.m2 = rng.uniform(0.05, 20.0);
    c.v1 = rng.uniform(-15.0, 15.0);
    CollisionResult r = collision_velocities(c);
    double p_in = c.m1 * c.v1;
    double p_out = c.m1 * r.v1_after + c.m2 * r.v2_after;
    double e_in = 0.5 * c.m1 * c.v1 * c.v1;
    double e_out = 0.5 * c.m1 * r.v1_after * r.v1_after +
                   0.5 * c.m2 * r.v2_after * r.v2_after;
    CHECK(std::fabs(p_in - p_out) <= 1e-10 * std::max(1.0, std::fabs(p_in)));
    CHECK(std::fabs(e_in - e_out) <= 1e-10 * std::max(1.0, std::fabs(e_in)));
  }
}

TEST_CASE("transmission decomposition") {
  TransmitResult t = collision_transmit(1.0, 5.0);
  CHECK(t.kept == 0.0);
  CHECK(t.passed == 5.0);
  CHECK(t.total == 5.0);

  t = collision_transmit(0.5, 2.0);
  CHECK(t.kept == 0.0);
  CHECK(t.passed == 1.0);
  CHECK(t.total == 1.0);

  t = collision_transmit(1.5, 2.0);
  CHECK(t.kept == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(t.passed == doctest::Approx(3.0).epsilon(1e-15));
  CHECK(t.total == doctest::Approx(4.0).epsilon(1e-15));
}

TEST_CASE("transmission matches the two-body outcome for positive strikes") {
  Rng rng(derive_seed(1, 0xC0L));
  for (int t = 0; t < 2000; ++t) {
    CollisionInput c;
    c.m1 = rng.uniform(0.05, 20.0);
    c.m2 = rng.uniform(0.05, 20.0);
    c.v1 = rng.uniform(0.01, 15.0);
    CollisionResult r = collision_velocities(c);
    double w = 2.0 * c.m1 / (c.m1 + c.m2);
    TransmitResult tr = collision_transmit(w, c.v1);
    CHECK(tr.passed == doctest::Approx(r.v2_after).epsilon(1e-12));
    CHECK(tr.kept ==
          doctest::Approx(std::max(r.v1_after, 0.0)).epsilon(1e-12));
    CHECK(tr.total == doctest::Approx(tr.kept + tr.passed).epsilon(1e-15));
  }
}

TEST_CASE("gate hyperplane angle closed form") {
  CHECK(hyperplane_cos_theta({1, 0}, 0.0) ==
        doctest::Approx(1.0 / std::sqrt(2.0)).epsilon(1e-12));
  CHECK(std::fabs(hyperplane_cos_theta({1, 0}, 0.5)) < 1e-12);
  double far = hyperplane_cos_theta({1, 0}, 1000.0);
  CHECK(far < -0.9999);
  CHECK(far > -1.0);

  CHECK_THROWS_AS(hyperplane_cos_theta({1, 1}, 1.0), ValueError);
  CHECK_THROWS_AS(hyperplane_cos_theta({2}, 0.0), ValueError);  // N < 2
}

TEST_CASE("angle sweep properties") {
  SweepReport r = angle_sweep({1, 0}, default_sweep_grid());
  CHECK(r.strictly_decreasing);
  CHECK(r.min_cos > -1.0);
  CHECK(r.max_cos < 1.0);
  CHECK(r.zero_crossing == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(std::fabs(r.cos_at_crossing) < 1e-10);
  REQUIRE(r.bracket_lo >= 0);
  REQUIRE(r.bracket_hi > r.bracket_lo);
  CHECK(r.cos_values[size_t(r.bracket_lo)] > 0.0);
  CHECK(r.cos_values[size_t(r.bracket_hi)] < 0.0);

  CHECK_THROWS_AS(angle_sweep({1, 1}, default_sweep_grid()),
                  ValueError);  // constant weights are parallel to the gate

  Rng rng(derive_seed(2, 0xC0L));
  for (int t = 0; t < 20; ++t) {
    std::vector<double> w(4);
    for (auto& v : w) v = rng.normal();
    CHECK_NOTHROW(angle_sweep(w, default_sweep_grid()));
  }
}

TEST_CASE("default sweep grid") {
  std::vector<double> g = default_sweep_grid();
  CHECK(g.size() == 2001);
  for (size_t i = 1; i < g.size(); ++i) CHECK(g[i] > g[i - 1]);
  CHECK(g.front() == -1000.0);
  CHECK(g.back() == 1000.0);
}

TEST_CASE("two-input units and their region counts") {
  // single half-plane gate
  TwoInputNeuron plain = TwoInputNeuron::plain(1.0, -1.0, 0.0);
  CHECK(plain.eval(1.0, 0.0) == 1.0);
  CHECK(plain.eval(0.0, 1.0) == 0.0);
  CHECK(region_map(plain).distinct == 2);

  // adding an inner gate splits the active side
  TwoInputNeuron gated =
      TwoInputNeuron::with_inner(1.0, -1.0, 0.0, 0.0, -2.0, 0.0);
  CHECK(region_map(gated).distinct == 3);
}

TEST_CASE("the XOR-separating unit carves three regions") {
  TwoInputNeuron n =
      TwoInputNeuron::collision(0.2805, 0.2805, -0.3506, 0.6463, 1.0);
  CHECK(n.eval(0, 0) == doctest::Approx(0.2957).epsilon(1e-10));
  CHECK(n.eval(1, 1) == doctest::Approx(0.2104).epsilon(1e-10));
  CHECK(n.eval(1, 0) == 0.0);
  CHECK(n.eval(0, 1) == 0.0);

  RegionMap m = region_map(n);
  CHECK(m.resolution == 512);
  CHECK(m.distinct == 3);
  CHECK(n.label(1, 0) == n.label(0, 1));   // the two XOR-true points agree
  CHECK(n.label(0, 0) != n.label(1, 0));
  CHECK(n.label(1, 1) != n.label(1, 0));
}

TEST_CASE("region map csv format") {
  TwoInputNeuron n = TwoInputNeuron::plain(1.0, -1.0, 0.0);
  RegionMap m = region_map(n, -1.0, 1.0, 8);
  std::string csv = region_map_csv(m);
  std::istringstream is(csv);
  std::string line;
  int rows = 0;
  while (std::getline(is, line)) {
    int commas = 0;
    for (char ch : line) commas += ch == ',';
    CHECK(commas == 7);
    ++rows;
  }
  CHECK(rows == 8);
}
