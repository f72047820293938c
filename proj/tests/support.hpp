#pragma once

// Scene builders shared by the unit tests.

#include <algorithm>
#include <cmath>
#include <random>

#include "sonarpnp/correspondences.hpp"
#include "sonarpnp/geometry.hpp"
#include "sonarpnp/sim.hpp"

namespace testing {

using namespace sonarpnp;

enum class Model { Arc, Orthographic };

struct Fixture {
  Posed gt;
  CorrespondenceSet c;
  std::vector<Point3d> sonar_points;
};

/// Builds measurements from a harness scene with the chosen projection model.
inline Fixture scene(SceneMode mode, int n, std::uint64_t seed, Model model = Model::Arc) {
  ScenarioConfig sc;
  sc.mode = mode;
  sc.point_count = n;
  Rng rng(trial_seed(seed, 99, 0));
  Scene s = generate_scene(sc, rng);
  Fixture f;
  f.gt = s.ground_truth;
  for (std::size_t i = 0; i < s.correspondences.size(); ++i) {
    const Point3d pw = s.correspondences.world_points[i];
    const Point3d ps = transform(f.gt, pw);
    f.sonar_points.push_back(ps);
    f.c.push_back(pw, model == Model::Arc ? project_arc(ps) : project_orthographic(ps));
  }
  return f;
}

/// Geodesic angle, via ||A - B||_F = 2 sqrt(2) sin(angle / 2), which stays
/// accurate for tiny angles where acos of the trace does not.
inline double angle_between(const Rotation3d& a, const Rotation3d& b) {
  return 2.0 * std::asin(std::min(1.0, (a - b).norm() / (2.0 * std::sqrt(2.0))));
}

}  // namespace testing
