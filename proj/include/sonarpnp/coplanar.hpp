#pragma once

// Rotation recovery when the certificate kernel is two dimensional.
//
// Coplanar scenes admit two rotations with identical point-to-line cost (the
// scene mirrored through the imaging plane), so the minimiser is only known
// to lie in span{v1, v2}. Writing R(a) for the 3x3 block of a1 v1 + a2 v2,
// every entry of R(a)^T R(a) is linear in the monomials [a1^2, a2^2, a1 a2],
// which gives the linear system F a = b used below. The stationary points of
// M = ||F a - b||^2 are found with a hidden-variable resultant in a2.

#include <array>
#include <vector>

#include <Eigen/Core>

#include "sonarpnp/correspondences.hpp"
#include "sonarpnp/polynomial.hpp"
#include "sonarpnp/ptl.hpp"

namespace sonarpnp {

struct KernelPair {
  Vector10d v1 = Vector10d::Zero();
  Vector10d v2 = Vector10d::Zero();
};

/// Rows: 3 off-diagonal Gram entries (= 0), d11 - d22 and d22 - d33 (= 0),
/// and the mean diagonal (= 1).
struct AlphaSystem {
  Eigen::Matrix<double, 6, 3> F = Eigen::Matrix<double, 6, 3>::Zero();
  Eigen::Matrix<double, 6, 1> b = (Eigen::Matrix<double, 6, 1>() << 0, 0, 0, 0, 0, 1).finished();

  double objective(double alpha1, double alpha2) const;
  /// (dM/da1, dM/da2).
  Eigen::Vector2d gradient(double alpha1, double alpha2) const;
};

struct AlphaCandidate {
  double alpha1 = 0.0;
  double alpha2 = 0.0;
  double objective = 0.0;
};

AlphaSystem build_alpha_system(const KernelPair& kernel);

/// g_i = c_i1 a1^3 + c_i2(a2) a1^2 + c_i3(a2) a1 + c_i4(a2), with
/// g_1 = dM/da1 and g_2 = dM/da2. Entry [i][j] holds c_{i+1, j+1} as a
/// polynomial in a2.
using GradientCoefficients = std::array<std::array<poly::Coeffs, 4>, 2>;

GradientCoefficients gradient_coefficients(const AlphaSystem& sys);

/// Determinant of the 6x6 Sylvester matrix of g_1 and g_2 in a1, expanded as
/// a polynomial in a2 (degree <= 9).
poly::Coeffs resultant_polynomial(const AlphaSystem& sys);

struct AlphaSolveOptions {
  /// Leading resultant coefficients with |k| <= lead_tol * max|k_i| are
  /// stripped.
  double lead_tol = 1e-12;
  /// Accept roots with |Im| <= imag_tol * (1 + |Re|).
  double imag_tol = 1e-8;
  /// |g_2| <= resid_tol * ||coefficients of g_2|| accepts an a1 root of g_1.
  double resid_tol = 1e-6;
};

/// Real stationary points of M, sorted by ascending objective. Throws
/// NoRealSolution when the resultant has no real root and the grid fallback
/// also finds nothing.
std::vector<AlphaCandidate> solve_alpha(const AlphaSystem& sys,
                                        const AlphaSolveOptions& options = {});

/// Brute-force minimiser of M over an n x n grid on [-range, range]^2,
/// polished with Newton steps on the gradient. Used as the fallback when no
/// resultant root survives back-substitution.
AlphaCandidate grid_minimize_alpha(const AlphaSystem& sys, double range = 2.0, int n = 400);

/// a1 v1 + a2 v2 -> 3x3 block, sign fixed so det > 0, projected onto SO(3).
Rotation3d assemble_rotation(const KernelPair& kernel, const AlphaCandidate& best);

/// Unit normal of the best-fit plane through the world points.
Eigen::Vector3d fit_plane_normal(const std::vector<Point3d>& points);

/// Number of the orientation conditions n_y n_z < 0 and n_x n_z > 0 met by
/// the scene plane normal expressed in the sonar frame (0, 1 or 2). The
/// mirrored pose flips the sign of both products.
int plane_orientation_score(const Rotation3d& R, const Eigen::Vector3d& world_normal);

/// (n_x - n_y) n_z for the sonar-frame normal. Positive whenever both
/// conditions above hold, and exactly negated by the mirrored pose, so its sign
/// separates the pair even when estimation error flips one product.
double plane_orientation_margin(const Rotation3d& R, const Eigen::Vector3d& world_normal);

/// Distinct rotations (up to 1e-6 Frobenius) assembled from the candidates
/// whose objective lies within tie_tol of the best one.
std::vector<Rotation3d> tied_rotations(const KernelPair& kernel,
                                       const std::vector<AlphaCandidate>& candidates,
                                       double tie_tol = 1e-8);

}  // namespace sonarpnp
