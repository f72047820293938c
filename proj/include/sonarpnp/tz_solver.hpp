#pragma once

// Out-of-plane translation from the range constraints.
//
// With R and t_xy fixed, every correspondence gives
//   e_i(t) = (r1 p_i + tx)^2 + (r2 p_i + ty)^2 + (r3 p_i + t)^2 - ||m_i||^2
// and L(t) = (1/N) sum_i e_i(t)^2 is a quartic with leading coefficient 1.

#include <functional>
#include <vector>

#include <Eigen/Core>

#include "sonarpnp/correspondences.hpp"
#include "sonarpnp/geometry.hpp"

namespace sonarpnp {

struct QuarticObjective {
  /// (c4, c3, c2, c1, c0), highest degree first; c4 == 1.
  Eigen::Matrix<double, 5, 1> coefficients = Eigen::Matrix<double, 5, 1>::Zero();

  double operator()(double t) const;
  double derivative(double t) const;
  double second_derivative(double t) const;
};

QuarticObjective build_quartic(const Rotation3d& R, const Eigen::Vector2d& t_xy,
                               const CorrespondenceSet& c);

struct StationaryPoint {
  double t = 0.0;
  double value = 0.0;
  double curvature = 0.0;
};

struct TzResult {
  double t_z = 0.0;
  double value = 0.0;
  /// Every real root of dL/dt.
  std::vector<StationaryPoint> stationary;
  /// More than one minimiser attained the smallest value.
  bool tie = false;
  std::vector<double> tied_minimizers;
};

/// Higher is better; used only to break ties between equal minima.
using TzScore = std::function<int(double t_z)>;

/// Real roots of the derivative cubic via the companion matrix; among those
/// with positive curvature returns the one with the smallest L. Equal minima
/// (within tie_tol * (1 + L_min)) are separated by `score`, then by |t|, then
/// the larger t wins. Throws SolverFailure when no stationary point has
/// positive curvature.
TzResult minimize_quartic(const QuarticObjective& q, const TzScore& score = nullptr,
                          double tie_tol = 1e-9);

/// Count of points whose elevation in the sonar frame lies inside the FoV
/// band for the pose (R, [t_xy, t_z]).
int elevation_band_count(const Rotation3d& R, const Eigen::Vector3d& t,
                         const CorrespondenceSet& c, const FovSpec& fov);

}  // namespace sonarpnp
