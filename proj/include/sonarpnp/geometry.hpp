#pragma once

// Imaging model of a 2D forward-looking sonar.
//
// Sonar frame: +y is the boresight, +x points to starboard, +z up. A point at
// range r, bearing theta and elevation phi sits at
//   [r cos(phi) sin(theta), r cos(phi) cos(theta), r sin(phi)].
// The sensor keeps (r, theta) and loses phi, so the image point is
//   m = [r sin(theta), r cos(theta)]
// which is the xy part of the point stretched by 1 / cos(phi) (arc model).

#include <cmath>

#include <Eigen/Core>
#include <Eigen/Geometry>

#include "sonarpnp/errors.hpp"

namespace sonarpnp {

template <typename Scalar>
using Point3 = Eigen::Matrix<Scalar, 3, 1>;

template <typename Scalar>
using SonarMeasurement = Eigen::Matrix<Scalar, 2, 1>;

template <typename Scalar>
using Rotation3 = Eigen::Matrix<Scalar, 3, 3>;

using Point3d = Point3<double>;
using Measurement2d = SonarMeasurement<double>;
using Rotation3d = Rotation3<double>;

template <typename Scalar>
struct SphericalCoord {
  Scalar r{0};
  Scalar theta{0};
  Scalar phi{0};
};

/// Rigid transform taking world coordinates to sonar coordinates.
template <typename Scalar>
struct Pose {
  Rotation3<Scalar> rotation = Rotation3<Scalar>::Identity();
  Point3<Scalar> translation = Point3<Scalar>::Zero();

  static Pose Identity() { return Pose{}; }
};

using Posed = Pose<double>;

enum class ProjectionKind { Arc, Orthographic };

/// Orthographic projection divides the xy part by alpha, the linearised
/// value of cos(phi). alpha = 1 is the plain orthographic model.
struct ProjectionModel {
  ProjectionKind kind = ProjectionKind::Arc;
  double alpha = 1.0;
};

struct FovSpec {
  double r_min = 0.0;
  double r_max = 6.0;
  double theta_min = -M_PI / 6.0;
  double theta_max = M_PI / 6.0;
  double phi_min = -M_PI / 18.0;
  double phi_max = M_PI / 18.0;

  bool valid() const {
    return r_min < r_max && theta_min < theta_max && phi_min < phi_max;
  }
};

inline double deg2rad(double deg) { return deg * M_PI / 180.0; }
inline double rad2deg(double rad) { return rad * 180.0 / M_PI; }

template <typename Scalar>
Point3<Scalar> spherical_to_cartesian(const SphericalCoord<Scalar>& s) {
  using std::cos;
  using std::sin;
  const Scalar rc = s.r * cos(s.phi);
  return Point3<Scalar>(rc * sin(s.theta), rc * cos(s.theta), s.r * sin(s.phi));
}

template <typename Derived>
SphericalCoord<typename Derived::Scalar> cartesian_to_spherical(
    const Eigen::MatrixBase<Derived>& p) {
  using Scalar = typename Derived::Scalar;
  using std::asin;
  using std::atan2;
  const Scalar r = p.norm();
  if (!(r > Scalar(0))) {
    throw Error(ErrorKind::DegenerateInput,
                "cartesian_to_spherical: zero-norm point");
  }
  SphericalCoord<Scalar> s;
  s.r = r;
  s.theta = atan2(p.x(), p.y());
  // z / r can exceed 1 by an ulp.
  Scalar ratio = p.z() / r;
  if (ratio > Scalar(1)) ratio = Scalar(1);
  if (ratio < Scalar(-1)) ratio = Scalar(-1);
  s.phi = asin(ratio);
  return s;
}

/// Arc projection: keeps range and bearing, so ||m|| == ||p||.
template <typename Derived>
SonarMeasurement<typename Derived::Scalar> project_arc(
    const Eigen::MatrixBase<Derived>& p) {
  using Scalar = typename Derived::Scalar;
  const Scalar r = p.norm();
  if (!(r > Scalar(0))) {
    throw Error(ErrorKind::DegenerateInput, "project_arc: zero-norm point");
  }
  const Scalar rho = p.template head<2>().norm();
  if (!(rho > Scalar(0))) {
    // Point on the z axis: bearing is undefined, atan2(0, 0) = 0 puts it on
    // the boresight.
    return SonarMeasurement<Scalar>(Scalar(0), r);
  }
  return p.template head<2>() * (r / rho);
}

template <typename Derived>
SonarMeasurement<typename Derived::Scalar> project_orthographic(
    const Eigen::MatrixBase<Derived>& p) {
  return p.template head<2>();
}

template <typename Derived>
SonarMeasurement<typename Derived::Scalar> project(
    const ProjectionModel& model, const Eigen::MatrixBase<Derived>& p) {
  using Scalar = typename Derived::Scalar;
  if (model.kind == ProjectionKind::Arc) return project_arc(p);
  return p.template head<2>() / Scalar(model.alpha);
}

template <typename Scalar, typename Derived>
Point3<Scalar> transform(const Pose<Scalar>& pose,
                         const Eigen::MatrixBase<Derived>& p_world) {
  return pose.rotation * p_world + pose.translation;
}

/// (a * b)(p) == a(b(p)).
template <typename Scalar>
Pose<Scalar> compose(const Pose<Scalar>& a, const Pose<Scalar>& b) {
  return Pose<Scalar>{a.rotation * b.rotation,
                      a.rotation * b.translation + a.translation};
}

template <typename Scalar>
Pose<Scalar> inverse(const Pose<Scalar>& pose) {
  const Rotation3<Scalar> rt = pose.rotation.transpose();
  return Pose<Scalar>{rt, -rt * pose.translation};
}

template <typename Derived>
bool in_fov(const FovSpec& fov, const Eigen::MatrixBase<Derived>& p_sonar) {
  const auto s = cartesian_to_spherical(p_sonar);
  return s.r >= fov.r_min && s.r <= fov.r_max && s.theta >= fov.theta_min &&
         s.theta <= fov.theta_max && s.phi >= fov.phi_min &&
         s.phi <= fov.phi_max;
}

template <typename Derived>
typename Derived::Scalar elevation(const Eigen::MatrixBase<Derived>& p) {
  return cartesian_to_spherical(p).phi;
}

/// ||R^T R - I||_F <= tol and |det R - 1| <= tol.
template <typename Derived>
bool is_rotation(const Eigen::MatrixBase<Derived>& R, double tol = 1e-9) {
  using Scalar = typename Derived::Scalar;
  const Rotation3<Scalar> gram = R.transpose() * R;
  return (gram - Rotation3<Scalar>::Identity()).norm() <= tol &&
         std::abs(R.determinant() - Scalar(1)) <= tol;
}

/// Nearest rotation in the Frobenius norm (orthogonal Procrustes with the
/// determinant forced to +1).
Rotation3d project_to_so3(const Eigen::Matrix3d& m);

}  // namespace sonarpnp
