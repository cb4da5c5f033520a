#include "facehn/muscle.hpp"
#include "facehn/rng.hpp"

#include <doctest.h>

#include <cmath>

using namespace facehn;
using namespace facehn::muscle;

namespace {

HillParams default_params() {
  HillParams p;
  p.passive_stiffness = 10.0;
  p.passive_shape = 1.0;
  p.passive_damping = 2.0;
  p.max_stiffness = 3000.0;
  p.threshold_length = 0.09;
  p.max_velocity = 0.5;
  p.rest_length = 0.1;
  return p;
}

}  // namespace

TEST_SUITE_BEGIN("muscle");

TEST_CASE("muscle_geometry: two fixed points 3 cm apart") {
  std::vector<Vector3> nodes = {Vector3(0, 0, 0), Vector3(0.03, 0, 0)};
  std::vector<Vector3> vels = {Vector3::Zero(), Vector3::Zero()};
  MusclePath path;
  path.via_points = {{-1, Vector3::Zero(), 0}, {-1, Vector3::Zero(), 1}};
  PoseContext ctx{nullptr, nullptr, &nodes, &vels};
  const auto [length, rate] = muscle_geometry(path, ctx);
  CHECK(length == doctest::Approx(0.03));
  CHECK(rate == doctest::Approx(0.0));
}

TEST_CASE("muscle_geometry: axial insertion velocity appears in ldot") {
  std::vector<Vector3> nodes = {Vector3(0, 0, 0), Vector3(0.05, 0, 0)};
  std::vector<Vector3> vels = {Vector3::Zero(), Vector3(0.01, 0, 0)};
  MusclePath path;
  path.via_points = {{-1, Vector3::Zero(), 0}, {-1, Vector3::Zero(), 1}};
  PoseContext ctx{nullptr, nullptr, &nodes, &vels};
  const auto [length, rate] = muscle_geometry(path, ctx);
  CHECK(length == doctest::Approx(0.05));
  CHECK(rate == doctest::Approx(0.01));
}

TEST_CASE("muscle_geometry: analytic ldot matches finite differences on random motions") {
  Rng rng(808);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<Vector3> pos(3), vel(3);
    for (size_t i = 0; i < 3; ++i) {
      pos[i] = Vector3(rng.uniform(-0.1, 0.1), rng.uniform(-0.1, 0.1), rng.uniform(-0.1, 0.1));
      vel[i] = Vector3(rng.uniform(-0.2, 0.2), rng.uniform(-0.2, 0.2), rng.uniform(-0.2, 0.2));
    }
    MusclePath path;
    path.via_points = {{-1, Vector3::Zero(), 0}, {-1, Vector3::Zero(), 1}, {-1, Vector3::Zero(), 2}};

    PoseContext ctx{nullptr, nullptr, &pos, &vel};
    const double rate = muscle_geometry(path, ctx).second;

    const double h = 1e-6;
    auto length_at = [&](double sign) {
      std::vector<Vector3> shifted(3);
      for (size_t i = 0; i < 3; ++i) shifted[i] = pos[i] + sign * h * vel[i];
      PoseContext c{nullptr, nullptr, &shifted, nullptr};
      return muscle_geometry(path, c).first;
    };
    const double fd = (length_at(1.0) - length_at(-1.0)) / (2.0 * h);
    CHECK(std::abs(rate - fd) < 1e-6);
  }
}

TEST_CASE("passive_force: zero at rest") {
  const HillParams p = default_params();
  CHECK(passive_force(p, make_state(p, p.rest_length, 0.0, 0.0)) == 0.0);
}

TEST_CASE("passive_force: exponential spring value") {
  const HillParams p = default_params();
  // k_s = 10, k_c = 1, e = ln 2 -> 10 (2 - 1) = 10.
  const double l = p.rest_length * (1.0 + std::log(2.0));
  CHECK(passive_force(p, make_state(p, l, 0.0, 0.0)) == doctest::Approx(10.0).epsilon(1e-12));
}

TEST_CASE("passive_force: clamped to zero under strong shortening") {
  const HillParams p = default_params();
  const MuscleState s = make_state(p, p.rest_length * 1.01, -10.0, 0.0);
  CHECK(passive_force(p, s) == 0.0);
}

TEST_CASE("contractile_force: zero activation gives zero force") {
  const HillParams p = default_params();
  Rng rng(11);
  for (int i = 0; i < 100; ++i) {
    const MuscleState s = make_state(p, rng.uniform(0.05, 0.2), rng.uniform(-1, 1), 0.0);
    CHECK(contractile_force(p, s) == 0.0);
  }
}

TEST_CASE("contractile_force: isometric case reduces to the force-length ramp") {
  const HillParams p = default_params();
  for (double l : {0.05, 0.09, 0.1, 0.12}) {
    const MuscleState s = make_state(p, l, 0.0, 0.7);
    CHECK(contractile_force(p, s) ==
          doctest::Approx(0.7 * std::max(0.0, p.max_stiffness * (l - p.threshold_length))));
  }
}

TEST_CASE("contractile_force: vanishes at the maximum shortening velocity") {
  const HillParams p = default_params();
  const MuscleState s = make_state(p, 0.12, -p.max_velocity, 1.0);
  CHECK(force_velocity(p, -p.max_velocity) == 0.0);
  CHECK(contractile_force(p, s) == 0.0);
}

TEST_CASE("force_velocity stays in [0,1] and is 1 for lengthening") {
  const HillParams p = default_params();
  Rng rng(99);
  for (int i = 0; i < 10000; ++i) {
    const double v = rng.uniform(-3.0, 3.0);
    const double fv = force_velocity(p, v);
    CHECK(fv >= 0.0);
    CHECK(fv <= 1.0);
    if (v >= 0.0) CHECK(fv == 1.0);
  }
}

TEST_CASE("forces are never negative anywhere") {
  const HillParams p = default_params();
  Rng rng(123);
  for (int i = 0; i < 10000; ++i) {
    const MuscleState s =
        make_state(p, rng.uniform(0.01, 0.3), rng.uniform(-2.0, 2.0), rng.uniform(0.0, 1.0));
    CHECK(passive_force(p, s) >= 0.0);
    CHECK(contractile_force(p, s) >= 0.0);
  }
}

TEST_CASE("activation sensitivity equals F_l * F_v") {
  const HillParams p = default_params();
  Rng rng(321);
  const double h = 1e-6;
  for (int i = 0; i < 200; ++i) {
    const double l = rng.uniform(0.05, 0.2);
    const double v = rng.uniform(-1.0, 1.0);
    const double a = rng.uniform(0.1, 0.9);
    const double f_plus = contractile_force(p, make_state(p, l, v, a + h));
    const double f_minus = contractile_force(p, make_state(p, l, v, a - h));
    const double grad = (f_plus - f_minus) / (2.0 * h);
    const double expected = force_length(p, l) * force_velocity(p, v);
    CHECK(grad == doctest::Approx(expected).epsilon(1e-6));
    CHECK(expected >= 0.0);
  }
}

TEST_CASE("passive_force is monotone non-decreasing in strain") {
  const HillParams p = default_params();
  Rng rng(555);
  for (int i = 0; i < 500; ++i) {
    const double edot = rng.uniform(-0.5, 0.5);
    const double e1 = rng.uniform(-0.5, 0.5);
    const double e2 = e1 + rng.uniform(0.0, 0.5);
    MuscleState s1, s2;
    s1.strain = e1;
    s1.strain_rate = edot;
    s2.strain = e2;
    s2.strain_rate = edot;
    CHECK(passive_force(p, s2) >= passive_force(p, s1));
  }
}

TEST_CASE("total_forces: slack muscles give a zero vector") {
  // l below both the rest length and the contractile threshold, no motion.
  std::vector<Vector3> nodes = {Vector3(0, 0, 0), Vector3(0.05, 0, 0)};
  Muscle m;
  m.name = "slack";
  m.path.via_points = {{-1, Vector3::Zero(), 0}, {-1, Vector3::Zero(), 1}};
  m.params = default_params();
  m.params.rest_length = 0.08;
  m.params.threshold_length = 0.06;
  m.activation = 0.9;
  PoseContext ctx{nullptr, nullptr, &nodes, nullptr};
  const VectorX f = total_forces({m}, ctx);
  REQUIRE(f.size() == 1);
  CHECK(f[0] == 0.0);
}

TEST_CASE("total_forces: monotone in activation and equals the sum of parts") {
  std::vector<Vector3> nodes = {Vector3(0, 0, 0), Vector3(0.12, 0, 0)};
  Muscle m;
  m.name = "m";
  m.path.via_points = {{-1, Vector3::Zero(), 0}, {-1, Vector3::Zero(), 1}};
  m.params = default_params();
  PoseContext ctx{nullptr, nullptr, &nodes, nullptr};

  double prev = -1.0;
  for (double a : {0.0, 0.2, 0.5, 0.8, 1.0}) {
    m.activation = a;
    const double f = total_forces({m}, ctx)[0];
    CHECK(f >= prev);
    prev = f;

    const MuscleState s = make_state(m.params, 0.12, 0.0, a);
    CHECK(f == doctest::Approx(passive_force(m.params, s) + contractile_force(m.params, s)));
  }
}

TEST_CASE("make_state clamps activation into [0,1]") {
  const HillParams p = default_params();
  CHECK(make_state(p, 0.1, 0.0, 1.7).activation == 1.0);
  CHECK(make_state(p, 0.1, 0.0, -0.3).activation == 0.0);
}

TEST_SUITE_END();
