#pragma once

// Point-to-line registration view of sonar PnP.
//
// Under the orthographic approximation every measurement m_i constrains the
// transformed point R p_i + t to the vertical line through o_i = [m_i, 0]
// with direction d = e_z. The translation is eliminated in closed form, which
// leaves a homogeneous quadratic form in
//   r = [c1; c2; c3; h]   (columns of R stacked, plus a homogenising scalar)
// subject to 22 quadratic constraints that carve out SO(3). The Lagrangian
// dual of that QCQP is a 10x10 SDP whose certificate matrix Z has the
// minimiser in its null space.

#include <array>
#include <vector>

#include <Eigen/Core>

#include "sonarpnp/correspondences.hpp"
#include "sonarpnp/geometry.hpp"
#include "sonarpnp/sdp.hpp"

namespace sonarpnp {

using Vector10d = Eigen::Matrix<double, 10, 1>;
using Matrix10d = Eigen::Matrix<double, 10, 10>;

inline constexpr int kNumConstraints = 22;
inline constexpr int kHomogenizationIndex = 21;

struct PtLCost {
  std::vector<Point3d> anchors;
  Eigen::Vector3d direction = Eigen::Vector3d::UnitZ();
  /// I - d d^T.
  Eigen::Matrix3d weight = Eigen::Vector3d(1.0, 1.0, 0.0).asDiagonal();
};

PtLCost build_ptl_cost(const CorrespondenceSet& c);

/// sum_i || R p_i + t - o_i ||^2 weighted by I - d d^T.
double ptl_residual(const PtLCost& cost, const CorrespondenceSet& c, const Posed& pose);

/// Affine map from a rotation to its optimal in-plane translation:
///   t_xy(R) = anchor_mean_xy - (R centroid)_xy.
struct TranslationMap {
  Eigen::Vector3d centroid = Eigen::Vector3d::Zero();
  Eigen::Vector2d anchor_mean = Eigen::Vector2d::Zero();

  Eigen::Vector2d operator()(const Rotation3d& R) const {
    return anchor_mean - (R * centroid).head<2>();
  }
};

struct QcqpProblem {
  /// r^T cost r equals the PtL residual minimised over t, for h = 1.
  Matrix10d cost = Matrix10d::Zero();
  std::array<Matrix10d, kNumConstraints> constraints;
  std::array<double, kNumConstraints> rhs{};
  TranslationMap translation;
};

/// Stacks the columns of R followed by h.
Vector10d homogeneous_vector(const Rotation3d& R, double h = 1.0);

/// The 22 (A_j, c_j) pairs: 6 column-Gram, 6 row-Gram, 9 cross-product
/// (right-hand rule on the rows) and h^2 = 1 last.
void build_constraint_matrices(std::array<Matrix10d, kNumConstraints>& A,
                               std::array<double, kNumConstraints>& c);

/// Eliminates the translation. World points are centred at their centroid
/// first; the shift is folded back through the returned TranslationMap.
QcqpProblem marginalize_translation(const PtLCost& cost, const CorrespondenceSet& c);

struct DualOptions {
  /// Eigenvalues of the normalised Z at or below rank_tol * max(1, lambda_max)
  /// count toward the kernel.
  double rank_tol = 1e-6;
  sdp::Options sdp;
};

struct DualSolution {
  /// [lambda_1 .. lambda_21, gamma].
  Eigen::Matrix<double, kNumConstraints, 1> lambda;
  double dual_value = 0.0;
  /// Z = Q + sum_j lambda_j A_j - gamma A_h.
  Matrix10d Z = Matrix10d::Zero();
  Vector10d eigenvalues = Vector10d::Zero();
  /// Columns match `eigenvalues`.
  Matrix10d eigenvectors = Matrix10d::Identity();
  int kernel_dim = 0;
  /// Orthonormal, ordered by increasing eigenvalue of Z.
  std::vector<Vector10d> kernel_basis;
  /// Primal cost of the recovered rotation minus dual_value; filled in once
  /// a rotation has been recovered.
  double duality_gap = 0.0;
  sdp::Status status = sdp::Status::NumericalFailure;
  int iterations = 0;
  /// Factor that Q was divided by before the SDP solve.
  double cost_scale = 1.0;
};

/// Solves the dual SDP. Throws SolverFailure when the interior point method
/// does not converge and DegenerateConfiguration for a kernel wider than 2.
DualSolution solve_dual_sdp(const QcqpProblem& q, const DualOptions& options = {});

/// Kernel vector -> rotation: scale so h = +1, reshape, project onto SO(3).
Rotation3d recover_rotation_rank1(const Vector10d& kernel_vector);
Rotation3d recover_rotation_rank1(const DualSolution& dual);

struct PolishReport {
  int iterations = 0;
  double initial_cost = 0.0;
  double final_cost = 0.0;
};

/// Damped Gauss-Newton descent of r(R)^T Q r(R) over SO(3), started from a
/// recovered rotation. Once the certificate has located the global basin this
/// removes the residual error left by the interior point tolerances; it never
/// increases the cost.
Rotation3d polish_rotation(const QcqpProblem& q, const Rotation3d& R0,
                           PolishReport* report = nullptr, int max_iterations = 30);

/// In-plane translation that is optimal for R. The z component is not
/// observable in the point-to-line cost.
Eigen::Vector2d recover_translation_xy(const Rotation3d& R, const PtLCost& cost,
                                       const CorrespondenceSet& c);

/// r^T Q r - d*, for the rotation actually returned.
double duality_gap(const QcqpProblem& q, const DualSolution& dual, const Rotation3d& R);

/// Gap divided by 1 + |d*|.
double relative_gap(double gap, double dual_value);

}  // namespace sonarpnp
