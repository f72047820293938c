#pragma once

// Local refinement of the exact (arc model) reprojection objective
//   sum_i || M_p(phi_i) (R p_i + t) - m_i ||^2,  phi_min <= phi_i <= phi_max
// over all six pose parameters.

#include <vector>

#include <Eigen/Core>

#include "sonarpnp/correspondences.hpp"
#include "sonarpnp/geometry.hpp"

namespace sonarpnp {

enum class ConstraintMode { Penalty, Projection };

struct RefinementConfig {
  int max_iterations = 100;
  double step_tolerance = 1e-10;
  double residual_tolerance = 1e-12;
  double phi_min = -M_PI / 18.0;
  double phi_max = M_PI / 18.0;
  ConstraintMode constraint_mode = ConstraintMode::Penalty;
  /// Starting weight of the quadratic elevation penalty; multiplied by 10
  /// whenever a stage converges with the band still violated, each stage with
  /// its own iteration budget. Kept small because the linearised start often
  /// sits just outside the band, and a stiff penalty there can pin a point to
  /// the edge away from the true minimum.
  double penalty_weight = 1e-4;
  int max_penalty_ramps = 6;
  double initial_damping = 1e-3;

  bool valid() const {
    return max_iterations > 0 && step_tolerance > 0 && residual_tolerance > 0 && phi_min < phi_max;
  }
};

struct ReprojectionResult {
  std::vector<Eigen::Vector2d> residuals;
  double cost = 0.0;
};

/// Predicted minus measured, with the exact arc projection. Throws
/// DegenerateInput if a transformed point lands on the sonar origin.
ReprojectionResult reprojection_residual(const Posed& pose, const CorrespondenceSet& c);

struct AcceptedStep {
  double cost_before = 0.0;
  double cost_after = 0.0;
  double penalty_weight = 0.0;
};

struct RefinementReport {
  int iterations = 0;
  bool converged = false;
  /// No step was ever accepted; the initial pose is returned unchanged.
  bool not_improved = false;
  /// The initial pose violated the elevation band.
  bool started_infeasible = false;
  /// Projection mode fell back to the penalty because of started_infeasible.
  bool fell_back_to_penalty = false;
  int penalty_ramps = 0;
  int band_violations = 0;
  double initial_cost = 0.0;
  double final_cost = 0.0;
  std::vector<AcceptedStep> accepted;
};

struct RefinementResult {
  Posed pose;
  RefinementReport report;
};

/// Damped Gauss-Newton with multiplicative damping (x10 on reject, /10 on
/// accept) over [w, dt], rotation updated as exp([w]x) R.
RefinementResult cio_refine(const Posed& initial, const CorrespondenceSet& c,
                            const RefinementConfig& cfg = {});

/// Analytic Jacobian of the stacked residual (2N rows, plus one row per
/// point for the elevation penalty when `penalty_weight` > 0) with respect to
/// [w, dt]. Exposed for derivative checks.
Eigen::MatrixXd refinement_jacobian(const Posed& pose, const CorrespondenceSet& c,
                                    const RefinementConfig& cfg, double penalty_weight);
Eigen::VectorXd refinement_residual(const Posed& pose, const CorrespondenceSet& c,
                                    const RefinementConfig& cfg, double penalty_weight);

struct TzOptimizeResult {
  double t_z = 0.0;
  double cost = 0.0;
  int evaluations = 0;
};

/// One-dimensional minimisation of the reprojection cost over t_z with R and
/// t_xy held fixed: coarse scan over [-half_width, half_width] followed by
/// Brent's method around the best sample.
TzOptimizeResult optimize_tz_reprojection(const Rotation3d& R, const Eigen::Vector2d& t_xy,
                                          const CorrespondenceSet& c, double half_width = 6.0,
                                          int scan_samples = 241);

}  // namespace sonarpnp
