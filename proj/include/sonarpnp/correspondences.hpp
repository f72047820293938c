#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "sonarpnp/geometry.hpp"

namespace sonarpnp {

/// Paired world points and their sonar image measurements.
struct CorrespondenceSet {
  std::vector<Point3d> world_points;
  std::vector<Measurement2d> measurements;

  std::size_t size() const { return world_points.size(); }
  bool empty() const { return world_points.empty(); }

  void push_back(const Point3d& p, const Measurement2d& m) {
    world_points.push_back(p);
    measurements.push_back(m);
  }

  /// Throws InvalidInput on mismatched lengths, non-finite values or fewer
  /// than `min_points` pairs.
  void validate(std::size_t min_points = 1) const {
    if (world_points.size() != measurements.size()) {
      throw Error(ErrorKind::InvalidInput,
                  "correspondences: " + std::to_string(world_points.size()) +
                      " world points but " + std::to_string(measurements.size()) +
                      " measurements");
    }
    if (world_points.size() < min_points) {
      throw Error(ErrorKind::InvalidInput,
                  "correspondences: need at least " + std::to_string(min_points) +
                      " pairs, got " + std::to_string(world_points.size()));
    }
    for (std::size_t i = 0; i < world_points.size(); ++i) {
      if (!world_points[i].allFinite() || !measurements[i].allFinite()) {
        throw Error(ErrorKind::InvalidInput,
                    "correspondences: non-finite value at index " + std::to_string(i));
      }
    }
  }
};

}  // namespace sonarpnp
