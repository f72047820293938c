#include "sonarpnp/ptl.hpp"

#include <cmath>
#include <string>

#include <Eigen/Eigenvalues>

namespace sonarpnp {

namespace {

// Position of R(row, col) inside the stacked-column vector.
constexpr int idx(int row, int col) { return 3 * col + row; }
constexpr int kH = 9;

void add_sym(Matrix10d& A, int i, int j, double v) {
  if (i == j) {
    A(i, i) += v;
  } else {
    A(i, j) += 0.5 * v;
    A(j, i) += 0.5 * v;
  }
}

double levi_civita(int l, int a, int b) {
  if (l == a || a == b || l == b) return 0.0;
  return ((a - l + 3) % 3 == 1) ? 1.0 : -1.0;
}

}  // namespace

PtLCost build_ptl_cost(const CorrespondenceSet& c) {
  PtLCost cost;
  cost.anchors.reserve(c.size());
  for (const auto& m : c.measurements) cost.anchors.emplace_back(m.x(), m.y(), 0.0);
  return cost;
}

double ptl_residual(const PtLCost& cost, const CorrespondenceSet& c, const Posed& pose) {
  double total = 0.0;
  for (std::size_t i = 0; i < c.size(); ++i) {
    const Eigen::Vector3d e = transform(pose, c.world_points[i]) - cost.anchors[i];
    total += e.dot(cost.weight * e);
  }
  return total;
}

Vector10d homogeneous_vector(const Rotation3d& R, double h) {
  Vector10d r;
  r.head<9>() = Eigen::Map<const Eigen::Matrix<double, 9, 1>>(R.data());
  r[kH] = h;
  return r;
}

void build_constraint_matrices(std::array<Matrix10d, kNumConstraints>& A,
                               std::array<double, kNumConstraints>& c) {
  for (auto& m : A) m.setZero();
  c.fill(0.0);
  int k = 0;
  // R^T R = h^2 I: entries c_a . c_b.
  for (int a = 0; a < 3; ++a) {
    for (int b = a; b < 3; ++b, ++k) {
      for (int s = 0; s < 3; ++s) add_sym(A[k], idx(s, a), idx(s, b), 1.0);
      if (a == b) A[k](kH, kH) = -1.0;
    }
  }
  // R R^T = h^2 I: entries r_a . r_b.
  for (int a = 0; a < 3; ++a) {
    for (int b = a; b < 3; ++b, ++k) {
      for (int s = 0; s < 3; ++s) add_sym(A[k], idx(a, s), idx(b, s), 1.0);
      if (a == b) A[k](kH, kH) = -1.0;
    }
  }
  // r_k1 x r_k2 = h r_k3 for cyclic (k1, k2, k3).
  constexpr int cyc[3][3] = {{0, 1, 2}, {1, 2, 0}, {2, 0, 1}};
  for (const auto& t : cyc) {
    for (int l = 0; l < 3; ++l, ++k) {
      for (int a = 0; a < 3; ++a) {
        for (int b = 0; b < 3; ++b) {
          const double e = levi_civita(l, a, b);
          if (e != 0.0) add_sym(A[k], idx(t[0], a), idx(t[1], b), e);
        }
      }
      add_sym(A[k], idx(t[2], l), kH, -1.0);
    }
  }
  // h^2 = 1.
  A[k](kH, kH) = 1.0;
  c[k] = 1.0;
}

QcqpProblem marginalize_translation(const PtLCost& cost, const CorrespondenceSet& c) {
  const std::size_t n = c.size();
  if (n == 0 || cost.anchors.size() != n) {
    throw Error(ErrorKind::DegenerateInput,
                "marginalize_translation: translation normal system is rank deficient");
  }
  QcqpProblem q;
  build_constraint_matrices(q.constraints, q.rhs);

  Eigen::Vector3d centroid = Eigen::Vector3d::Zero();
  Eigen::Vector3d anchor_mean = Eigen::Vector3d::Zero();
  for (std::size_t i = 0; i < n; ++i) {
    centroid += c.world_points[i];
    anchor_mean += cost.anchors[i];
  }
  centroid /= double(n);
  anchor_mean /= double(n);
  q.translation.centroid = centroid;
  q.translation.anchor_mean = anchor_mean.head<2>();

  // Each residual row s in {x, y} is  sum_j q_j R(s, j) - (o_i - o_mean)_s,
  // linear in the homogeneous vector.
  Matrix10d Q = Matrix10d::Zero();
  for (std::size_t i = 0; i < n; ++i) {
    const Eigen::Vector3d qi = c.world_points[i] - centroid;
    const Eigen::Vector3d oi = cost.anchors[i] - anchor_mean;
    for (int s = 0; s < 3; ++s) {
      if (cost.weight(s, s) == 0.0) continue;
      Vector10d row = Vector10d::Zero();
      for (int j = 0; j < 3; ++j) row[idx(s, j)] = qi[j];
      row[kH] = -oi[s];
      Q.noalias() += cost.weight(s, s) * row * row.transpose();
    }
  }
  q.cost = 0.5 * (Q + Q.transpose());
  return q;
}

DualSolution solve_dual_sdp(const QcqpProblem& q, const DualOptions& options) {
  double scale = q.cost.norm();
  if (!(scale > 0.0) || !std::isfinite(scale)) scale = 1.0;

  sdp::Problem problem;
  problem.C = q.cost / scale;
  problem.A.assign(q.constraints.begin(), q.constraints.end());
  problem.b = Eigen::Map<const Eigen::VectorXd>(q.rhs.data(), kNumConstraints);

  const sdp::InteriorPointSolver solver(options.sdp);
  const sdp::Result res = solver.solve(problem);

  const double rel_gap = std::abs(res.primal_objective - res.dual_objective) /
                         (1.0 + std::abs(res.primal_objective) + std::abs(res.dual_objective));
  // Near the optimum the interior point method may stall on a nearly singular
  // Z; an iterate that is accurate to 1e-6 is still a usable certificate.
  const bool usable =
      res.status == sdp::Status::Optimal ||
      (res.primal_infeasibility <= 1e-6 && res.dual_infeasibility <= 1e-6 && rel_gap <= 1e-6);
  if (!usable) {
    throw Error(ErrorKind::SolverFailure,
                std::string("dual SDP: solver status ") + sdp::to_string(res.status) +
                    " after " + std::to_string(res.iterations) + " iterations");
  }

  DualSolution dual;
  dual.status = res.status;
  dual.iterations = res.iterations;
  dual.cost_scale = scale;
  for (int j = 0; j < kNumConstraints; ++j) dual.lambda[j] = -scale * res.y[j];
  dual.lambda[kHomogenizationIndex] = scale * res.y[kHomogenizationIndex];
  dual.dual_value = dual.lambda[kHomogenizationIndex];

  const Matrix10d Zs = res.Z;
  dual.Z = scale * Zs;

  Eigen::SelfAdjointEigenSolver<Matrix10d> es(Zs);
  dual.eigenvalues = es.eigenvalues();
  const double threshold = options.rank_tol * std::max(1.0, es.eigenvalues()[9]);
  int kdim = 0;
  while (kdim < 10 && es.eigenvalues()[kdim] <= threshold) ++kdim;
  if (kdim > 2) {
    throw Error(ErrorKind::DegenerateConfiguration,
                "dual SDP: certificate kernel has dimension " + std::to_string(kdim));
  }
  // A strictly positive Z means the solver stopped short of the boundary; the
  // smallest eigenvector is still the best available kernel estimate.
  dual.kernel_dim = std::max(1, kdim);
  dual.eigenvectors = es.eigenvectors();
  for (int k = 0; k < dual.kernel_dim; ++k) dual.kernel_basis.push_back(es.eigenvectors().col(k));
  return dual;
}

Rotation3d recover_rotation_rank1(const Vector10d& v) {
  if (std::abs(v[kH]) < 1e-8) {
    throw Error(ErrorKind::RecoveryFailure,
                "rank-1 recovery: homogeneous component vanishes, scale undetermined");
  }
  const Vector10d r = v / v[kH];
  const Eigen::Matrix3d m = Eigen::Map<const Eigen::Matrix3d>(r.data());
  return project_to_so3(m);
}

Rotation3d recover_rotation_rank1(const DualSolution& dual) {
  if (dual.kernel_basis.empty()) {
    throw Error(ErrorKind::RecoveryFailure, "rank-1 recovery: empty kernel");
  }
  return recover_rotation_rank1(dual.kernel_basis.front());
}

Rotation3d polish_rotation(const QcqpProblem& q, const Rotation3d& R0, PolishReport* report,
                           int max_iterations) {
  auto cost_of = [&](const Rotation3d& R) {
    const Vector10d r = homogeneous_vector(R);
    return r.dot(q.cost * r);
  };
  Rotation3d R = R0;
  double f = cost_of(R);
  PolishReport rep;
  rep.initial_cost = f;
  double damping = 1e-6;
  int it = 0;
  for (; it < max_iterations; ++it) {
    // d/dw of exp([w]x) R applied to each column c_j is -[c_j]x.
    Eigen::Matrix<double, 10, 3> J = Eigen::Matrix<double, 10, 3>::Zero();
    for (int j = 0; j < 3; ++j) {
      const Eigen::Vector3d c = R.col(j);
      Eigen::Matrix3d cx;
      cx << 0, -c.z(), c.y(), c.z(), 0, -c.x(), -c.y(), c.x(), 0;
      J.block<3, 3>(3 * j, 0) = -cx;
    }
    const Vector10d r = homogeneous_vector(R);
    const Eigen::Vector3d g = J.transpose() * (q.cost * r);
    const Eigen::Matrix3d H = J.transpose() * q.cost * J;
    if (g.norm() <= 1e-16 * (1.0 + q.cost.norm())) break;
    bool accepted = false;
    for (int attempt = 0; attempt < 10 && !accepted; ++attempt) {
      const Eigen::Matrix3d Hd = H + damping * (1.0 + H.diagonal().maxCoeff()) *
                                         Eigen::Matrix3d::Identity();
      const Eigen::Vector3d w = -Hd.ldlt().solve(g);
      const double angle = w.norm();
      const Rotation3d step =
          angle > 0.0 ? Eigen::AngleAxisd(angle, w / angle).toRotationMatrix()
                      : Rotation3d::Identity();
      const Rotation3d candidate = project_to_so3(step * R);
      const double fc = cost_of(candidate);
      if (fc < f) {
        R = candidate;
        f = fc;
        damping = std::max(damping * 0.1, 1e-12);
        accepted = true;
      } else {
        damping *= 10.0;
      }
    }
    if (!accepted) break;
  }
  rep.iterations = it;
  rep.final_cost = f;
  if (report) *report = rep;
  return R;
}

Eigen::Vector2d recover_translation_xy(const Rotation3d& R, const PtLCost& cost,
                                       const CorrespondenceSet& c) {
  Eigen::Vector2d acc = Eigen::Vector2d::Zero();
  for (std::size_t i = 0; i < c.size(); ++i) {
    acc += cost.anchors[i].head<2>() - (R * c.world_points[i]).head<2>();
  }
  return acc / double(c.size());
}

double duality_gap(const QcqpProblem& q, const DualSolution& dual, const Rotation3d& R) {
  const Vector10d r = homogeneous_vector(R);
  return r.dot(q.cost * r) - dual.dual_value;
}

double relative_gap(double gap, double dual_value) { return gap / (1.0 + std::abs(dual_value)); }

}  // namespace sonarpnp
