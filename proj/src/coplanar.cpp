#include "sonarpnp/coplanar.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <Eigen/Dense>

namespace sonarpnp {

namespace {

using poly::Coeffs;

Eigen::Matrix3d block3(const Vector10d& v) {
  return Eigen::Map<const Eigen::Matrix3d>(v.data());
}

Coeffs monomial(double c, int deg) {
  Coeffs out = Coeffs::Zero(deg + 1);
  out[deg] = c;
  return out;
}

Coeffs poly_of(std::initializer_list<double> ascending) {
  Coeffs out(Eigen::Index(ascending.size()));
  Eigen::Index i = 0;
  for (double v : ascending) out[i++] = v;
  return out;
}

bool is_zero(const Coeffs& c) { return poly::degree(c) < 0; }

// Laplace expansion along the first remaining row. Rows are consumed in
// order; `cols` marks the columns still available.
Coeffs poly_det(const std::vector<std::vector<Coeffs>>& m, std::size_t row, unsigned cols) {
  const std::size_t n = m.size();
  if (row == n) return poly_of({1.0});
  Coeffs acc = poly_of({0.0});
  int sign = 1;
  for (std::size_t j = 0; j < n; ++j) {
    if (!(cols & (1u << j))) continue;
    if (!is_zero(m[row][j])) {
      const Coeffs minor = poly_det(m, row + 1, cols & ~(1u << j));
      acc = poly::add(acc, poly::scale(poly::multiply(m[row][j], minor), double(sign)));
    }
    sign = -sign;
  }
  return acc;
}

// Real roots of the cubic in a1 obtained by fixing a2 in g_i.
std::vector<double> cubic_roots_at(const std::array<Coeffs, 4>& c, double a2, double imag_tol) {
  Coeffs cubic(4);
  for (int j = 0; j < 4; ++j) cubic[3 - j] = poly::evaluate(c[j], a2);
  poly::RealRootOptions opts;
  opts.imag_tol = imag_tol;
  return poly::real_roots(cubic, opts);
}

double eval_g(const std::array<Coeffs, 4>& c, double a1, double a2) {
  double acc = 0.0;
  for (int j = 0; j < 4; ++j) acc = acc * a1 + poly::evaluate(c[j], a2);
  return acc;
}

double coeff_scale(const std::array<Coeffs, 4>& c, double a2) {
  double s = 0.0;
  for (int j = 0; j < 4; ++j) s = std::max(s, std::abs(poly::evaluate(c[j], a2)));
  return s;
}

Eigen::Matrix2d hessian(const AlphaSystem& sys, double a1, double a2) {
  // Central differences of the analytic gradient; only used for polishing.
  const double h = 1e-6 * (1.0 + std::abs(a1) + std::abs(a2));
  Eigen::Matrix2d H;
  H.col(0) = (sys.gradient(a1 + h, a2) - sys.gradient(a1 - h, a2)) / (2 * h);
  H.col(1) = (sys.gradient(a1, a2 + h) - sys.gradient(a1, a2 - h)) / (2 * h);
  return 0.5 * (H + H.transpose());
}

// Newton on grad M = 0; steps that raise |grad| are rejected.
Eigen::Vector2d newton_polish(const AlphaSystem& sys, Eigen::Vector2d a, int steps) {
  for (int k = 0; k < steps; ++k) {
    const Eigen::Vector2d g = sys.gradient(a[0], a[1]);
    if (g.norm() == 0.0) break;
    const Eigen::Matrix2d H = hessian(sys, a[0], a[1]);
    const Eigen::Vector2d next = a - H.completeOrthogonalDecomposition().solve(g);
    if (!next.allFinite() || sys.gradient(next[0], next[1]).norm() >= g.norm()) break;
    a = next;
  }
  return a;
}

}  // namespace

double AlphaSystem::objective(double alpha1, double alpha2) const {
  const Eigen::Vector3d a(alpha1 * alpha1, alpha2 * alpha2, alpha1 * alpha2);
  return (F * a - b).squaredNorm();
}

Eigen::Vector2d AlphaSystem::gradient(double alpha1, double alpha2) const {
  const Eigen::Vector3d a(alpha1 * alpha1, alpha2 * alpha2, alpha1 * alpha2);
  const Eigen::Matrix<double, 6, 1> r = F * a - b;
  const Eigen::Vector3d da1(2 * alpha1, 0.0, alpha2);
  const Eigen::Vector3d da2(0.0, 2 * alpha2, alpha1);
  return Eigen::Vector2d(2 * r.dot(F * da1), 2 * r.dot(F * da2));
}

AlphaSystem build_alpha_system(const KernelPair& kernel) {
  const Eigen::Matrix3d V1 = block3(kernel.v1);
  const Eigen::Matrix3d V2 = block3(kernel.v2);
  const Eigen::Matrix3d P = V1.transpose() * V1;
  const Eigen::Matrix3d Q = V2.transpose() * V2;
  const Eigen::Matrix3d S = V1.transpose() * V2 + V2.transpose() * V1;
  auto row = [&](int i, int j) { return Eigen::RowVector3d(P(i, j), Q(i, j), S(i, j)); };

  AlphaSystem sys;
  sys.F.row(0) = row(0, 1);
  sys.F.row(1) = row(0, 2);
  sys.F.row(2) = row(1, 2);
  sys.F.row(3) = row(0, 0) - row(1, 1);
  sys.F.row(4) = row(1, 1) - row(2, 2);
  sys.F.row(5) = (row(0, 0) + row(1, 1) + row(2, 2)) / 3.0;
  return sys;
}

GradientCoefficients gradient_coefficients(const AlphaSystem& sys) {
  const Eigen::Matrix3d G = sys.F.transpose() * sys.F;
  const Eigen::Vector3d h = sys.F.transpose() * sys.b;
  GradientCoefficients c;
  // dM/da1.
  c[0][0] = poly_of({4 * G(0, 0)});
  c[0][1] = monomial(6 * G(0, 2), 1);
  c[0][2] = poly_of({-4 * h[0], 0.0, 4 * G(0, 1) + 2 * G(2, 2)});
  c[0][3] = poly_of({0.0, -2 * h[2], 0.0, 2 * G(2, 1)});
  // dM/da2.
  c[1][0] = poly_of({2 * G(2, 0)});
  c[1][1] = monomial(4 * G(1, 0) + 2 * G(2, 2), 1);
  c[1][2] = poly_of({-2 * h[2], 0.0, 6 * G(1, 2)});
  c[1][3] = poly_of({0.0, -4 * h[1], 0.0, 4 * G(1, 1)});
  return c;
}

poly::Coeffs resultant_polynomial(const AlphaSystem& sys) {
  const GradientCoefficients c = gradient_coefficients(sys);
  const Coeffs z = poly_of({0.0});
  const auto& g1 = c[0];
  const auto& g2 = c[1];
  const std::vector<std::vector<Coeffs>> m = {
      {g1[0], z, z, g2[0], z, z},
      {g1[1], g1[0], z, g2[1], g2[0], z},
      {g1[2], g1[1], g1[0], g2[2], g2[1], g2[0]},
      {g1[3], g1[2], g1[1], g2[3], g2[2], g2[1]},
      {z, g1[3], g1[2], z, g2[3], g2[2]},
      {z, z, g1[3], z, z, g2[3]},
  };
  Coeffs det = poly_det(m, 0, (1u << 6) - 1);
  if (det.size() > 10) {
    // Isobaric weight 9: anything above is rounding noise.
    det = det.head(10).eval();
  }
  return det;
}

AlphaCandidate grid_minimize_alpha(const AlphaSystem& sys, double range, int n) {
  AlphaCandidate best;
  best.objective = std::numeric_limits<double>::infinity();
  const double step = 2.0 * range / double(n - 1);
  for (int i = 0; i < n; ++i) {
    const double a1 = -range + step * i;
    for (int j = 0; j < n; ++j) {
      const double a2 = -range + step * j;
      const double m = sys.objective(a1, a2);
      if (m < best.objective) best = AlphaCandidate{a1, a2, m};
    }
  }
  const Eigen::Vector2d a = newton_polish(sys, Eigen::Vector2d(best.alpha1, best.alpha2), 50);
  const double m = sys.objective(a[0], a[1]);
  if (m <= best.objective) best = AlphaCandidate{a[0], a[1], m};
  return best;
}

std::vector<AlphaCandidate> solve_alpha(const AlphaSystem& sys, const AlphaSolveOptions& options) {
  if (sys.F.isZero(0.0)) {
    throw Error(ErrorKind::DegenerateInput, "solve_alpha: F is identically zero");
  }
  const GradientCoefficients c = gradient_coefficients(sys);
  const Coeffs res = poly::trim(resultant_polynomial(sys), options.lead_tol);

  poly::RealRootOptions ropts;
  ropts.imag_tol = options.imag_tol;
  std::vector<double> a2_roots;
  if (poly::degree(res) >= 1) a2_roots = poly::real_roots(res, ropts);

  std::vector<AlphaCandidate> out;
  for (double a2 : a2_roots) {
    const double scale2 = std::max(coeff_scale(c[1], a2), 1e-300);
    for (double a1 : cubic_roots_at(c[0], a2, options.imag_tol)) {
      if (std::abs(eval_g(c[1], a1, a2)) > options.resid_tol * scale2) continue;
      const Eigen::Vector2d a = newton_polish(sys, Eigen::Vector2d(a1, a2), 5);
      out.push_back(AlphaCandidate{a[0], a[1], sys.objective(a[0], a[1])});
    }
  }
  if (a2_roots.empty() && poly::degree(res) >= 1) {
    throw Error(ErrorKind::NoRealSolution, "solve_alpha: resultant has no real root");
  }
  // Identically vanishing resultant, or no a1 survived back-substitution.
  if (out.empty()) out.push_back(grid_minimize_alpha(sys));

  std::sort(out.begin(), out.end(), [](const AlphaCandidate& x, const AlphaCandidate& y) {
    if (x.objective != y.objective) return x.objective < y.objective;
    if (x.alpha1 != y.alpha1) return x.alpha1 > y.alpha1;
    return x.alpha2 > y.alpha2;
  });
  // Collapse duplicates produced by near-multiple roots.
  std::vector<AlphaCandidate> unique;
  for (const auto& cand : out) {
    const bool dup = std::any_of(unique.begin(), unique.end(), [&](const AlphaCandidate& u) {
      return std::abs(u.alpha1 - cand.alpha1) + std::abs(u.alpha2 - cand.alpha2) <= 1e-9;
    });
    if (!dup) unique.push_back(cand);
  }
  return unique;
}

Rotation3d assemble_rotation(const KernelPair& kernel, const AlphaCandidate& best) {
  if (!std::isfinite(best.objective)) {
    throw Error(ErrorKind::RecoveryFailure, "assemble_rotation: non-finite objective");
  }
  Eigen::Matrix3d m = block3(best.alpha1 * kernel.v1 + best.alpha2 * kernel.v2);
  const double det = m.determinant();
  const double norm = m.norm();
  if (!(std::abs(det) > 1e-8 * norm * norm * norm)) {
    throw Error(ErrorKind::RecoveryFailure,
                "assemble_rotation: determinant vanishes for both signs of alpha");
  }
  // Negating a 3x3 matrix negates its determinant.
  if (det < 0.0) m = -m;
  return project_to_so3(m);
}

Eigen::Vector3d fit_plane_normal(const std::vector<Point3d>& points) {
  Eigen::Vector3d mean = Eigen::Vector3d::Zero();
  for (const auto& p : points) mean += p;
  mean /= double(std::max<std::size_t>(points.size(), 1));
  Eigen::Matrix3d scatter = Eigen::Matrix3d::Zero();
  for (const auto& p : points) scatter += (p - mean) * (p - mean).transpose();
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(scatter);
  return es.eigenvectors().col(0);
}

int plane_orientation_score(const Rotation3d& R, const Eigen::Vector3d& world_normal) {
  const Eigen::Vector3d n = R * world_normal;
  return int(n.y() * n.z() < 0.0) + int(n.x() * n.z() > 0.0);
}

double plane_orientation_margin(const Rotation3d& R, const Eigen::Vector3d& world_normal) {
  const Eigen::Vector3d n = R * world_normal;
  return (n.x() - n.y()) * n.z();
}

std::vector<Rotation3d> tied_rotations(const KernelPair& kernel,
                                       const std::vector<AlphaCandidate>& candidates,
                                       double tie_tol) {
  std::vector<Rotation3d> out;
  if (candidates.empty()) return out;
  const double best = candidates.front().objective;
  for (const auto& cand : candidates) {
    if (cand.objective > best + tie_tol * (1.0 + best)) break;
    Rotation3d R;
    try {
      R = assemble_rotation(kernel, cand);
    } catch (const Error&) {
      continue;
    }
    const bool dup = std::any_of(out.begin(), out.end(),
                                 [&](const Rotation3d& q) { return (q - R).norm() <= 1e-6; });
    if (!dup) out.push_back(R);
  }
  return out;
}

}  // namespace sonarpnp
