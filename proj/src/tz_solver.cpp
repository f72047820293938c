#include "sonarpnp/tz_solver.hpp"

#include <algorithm>
#include <cmath>

#include "sonarpnp/polynomial.hpp"

namespace sonarpnp {

double QuarticObjective::operator()(double t) const {
  const auto& c = coefficients;
  return (((c[0] * t + c[1]) * t + c[2]) * t + c[3]) * t + c[4];
}

double QuarticObjective::derivative(double t) const {
  const auto& c = coefficients;
  return ((4 * c[0] * t + 3 * c[1]) * t + 2 * c[2]) * t + c[3];
}

double QuarticObjective::second_derivative(double t) const {
  const auto& c = coefficients;
  return (12 * c[0] * t + 6 * c[1]) * t + 2 * c[2];
}

QuarticObjective build_quartic(const Rotation3d& R, const Eigen::Vector2d& t_xy,
                               const CorrespondenceSet& c) {
  QuarticObjective q;
  const std::size_t n = c.size();
  if (n == 0) {
    throw Error(ErrorKind::InvalidInput, "build_quartic: no correspondences");
  }
  // e_i(t) = t^2 + 2 a_i t + s_i with a_i = r3 p_i and s_i = a_i^2 + k_i.
  Eigen::Matrix<double, 5, 1> acc = Eigen::Matrix<double, 5, 1>::Zero();
  for (std::size_t i = 0; i < n; ++i) {
    const Eigen::Vector3d rp = R * c.world_points[i];
    const double x = rp.x() + t_xy.x();
    const double y = rp.y() + t_xy.y();
    const double a = rp.z();
    const double s = x * x + y * y + a * a - c.measurements[i].squaredNorm();
    acc[0] += 1.0;
    acc[1] += 4.0 * a;
    acc[2] += 4.0 * a * a + 2.0 * s;
    acc[3] += 4.0 * a * s;
    acc[4] += s * s;
  }
  q.coefficients = acc / double(n);
  q.coefficients[0] = 1.0;
  return q;
}

TzResult minimize_quartic(const QuarticObjective& q, const TzScore& score, double tie_tol) {
  const auto& c = q.coefficients;
  // dL/dt in ascending order.
  poly::Coeffs d(4);
  d << c[3], 2 * c[2], 3 * c[1], 4 * c[0];
  TzResult out;
  for (double t : poly::real_roots(d)) {
    out.stationary.push_back(StationaryPoint{t, q(t), q.second_derivative(t)});
  }
  std::vector<StationaryPoint> minima;
  for (const auto& s : out.stationary) {
    if (s.curvature > 0.0) minima.push_back(s);
  }
  if (minima.empty()) {
    // A cubic with a double root at the minimiser has zero curvature there;
    // accept the stationary point with the smallest value in that case.
    for (const auto& s : out.stationary) {
      if (s.curvature >= 0.0) minima.push_back(s);
    }
  }
  if (minima.empty()) {
    throw Error(ErrorKind::SolverFailure,
                "minimize_quartic: no stationary point with positive curvature");
  }
  double best = minima.front().value;
  for (const auto& s : minima) best = std::min(best, s.value);
  std::vector<double> tied;
  for (const auto& s : minima) {
    if (s.value <= best + tie_tol * (1.0 + std::abs(best))) tied.push_back(s.t);
  }
  out.tie = tied.size() > 1;
  out.tied_minimizers = tied;

  auto better = [&](double a, double b) {
    if (score) {
      const int sa = score(a);
      const int sb = score(b);
      if (sa != sb) return sa > sb;
    }
    if (std::abs(a) != std::abs(b)) return std::abs(a) < std::abs(b);
    return a > b;
  };
  double pick = tied.front();
  for (double t : tied) {
    if (better(t, pick)) pick = t;
  }
  out.t_z = pick;
  out.value = q(pick);
  return out;
}

int elevation_band_count(const Rotation3d& R, const Eigen::Vector3d& t,
                         const CorrespondenceSet& c, const FovSpec& fov) {
  int count = 0;
  for (const auto& p : c.world_points) {
    const Eigen::Vector3d ps = R * p + t;
    const double r = ps.norm();
    if (!(r > 0.0)) continue;
    const double phi = std::asin(std::clamp(ps.z() / r, -1.0, 1.0));
    if (phi >= fov.phi_min && phi <= fov.phi_max) ++count;
  }
  return count;
}

}  // namespace sonarpnp
