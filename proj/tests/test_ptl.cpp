#include <doctest.h>

#include <random>

#include <Eigen/Dense>

#include "sonarpnp/ptl.hpp"
#include "support.hpp"

using namespace sonarpnp;
using testing::Model;

namespace {

// Marginalised point-to-line cost evaluated directly: optimal t_xy by a
// stacked least-squares solve, t_z free because C zeroes the z row.
double direct_cost(const Rotation3d& R, const CorrespondenceSet& c, Eigen::Vector2d* t_out = nullptr) {
  const int n = int(c.size());
  Eigen::MatrixXd A(2 * n, 2);
  Eigen::VectorXd b(2 * n);
  for (int i = 0; i < n; ++i) {
    A.block<2, 2>(2 * i, 0).setIdentity();
    b.segment<2>(2 * i) = c.measurements[i] - (R * c.world_points[i]).head<2>();
  }
  const Eigen::Vector2d t = A.colPivHouseholderQr().solve(b);
  if (t_out) *t_out = t;
  return (A * t - b).squaredNorm();
}

}  // namespace

TEST_CASE("point-to-line cost") {
  CorrespondenceSet c;
  c.push_back(Point3d(0, 0, 0), Measurement2d(1, 2));
  const PtLCost cost = build_ptl_cost(c);
  CHECK((cost.anchors[0] - Point3d(1, 2, 0)).norm() == 0.0);
  CHECK((cost.direction - Eigen::Vector3d::UnitZ()).norm() == 0.0);
  const Eigen::Vector3d ev = Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d>(cost.weight).eigenvalues();
  CHECK(ev[0] == doctest::Approx(0.0));
  CHECK(ev[1] == doctest::Approx(1.0));
  CHECK(ev[2] == doctest::Approx(1.0));

  const auto f = testing::scene(SceneMode::General, 20, 1, Model::Orthographic);
  CHECK(ptl_residual(build_ptl_cost(f.c), f.c, f.gt) < 1e-24);
  Posed shifted = f.gt;
  shifted.translation.z() += 3.0;  // along the line: free
  CHECK(ptl_residual(build_ptl_cost(f.c), f.c, shifted) < 1e-20);
}

TEST_CASE("marginalised quadratic form matches the direct cost") {
  Rng rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    const auto f = testing::scene(SceneMode::General, 7 + trial, 100 + trial);
    const QcqpProblem q = marginalize_translation(build_ptl_cost(f.c), f.c);
    CHECK((q.cost - q.cost.transpose()).norm() == 0.0);
    CHECK(Eigen::SelfAdjointEigenSolver<Matrix10d>(q.cost).eigenvalues()[0] >
          -1e-12 * q.cost.norm());
    for (int k = 0; k < 10; ++k) {
      const Rotation3d R = random_rotation(rng);
      const Vector10d r = homogeneous_vector(R);
      const double lhs = r.dot(q.cost * r);
      CHECK(lhs == doctest::Approx(direct_cost(R, f.c)).epsilon(1e-10));
      Eigen::Vector2d t;
      direct_cost(R, f.c, &t);
      CHECK((q.translation(R) - t).norm() < 1e-10);
    }
  }
  CorrespondenceSet empty;
  CHECK_THROWS_AS(marginalize_translation(build_ptl_cost(empty), empty), Error);
}

TEST_CASE("all 22 constraints hold on rotations; reflections break the cross products") {
  std::array<Matrix10d, kNumConstraints> A;
  std::array<double, kNumConstraints> rhs;
  build_constraint_matrices(A, rhs);
  CHECK(rhs[kHomogenizationIndex] == 1.0);
  for (const auto& M : A) CHECK((M - M.transpose()).norm() == 0.0);

  Rng rng(12);
  for (int k = 0; k < 1000; ++k) {
    const Rotation3d R = random_rotation(rng);
    const Vector10d r = homogeneous_vector(R);
    double worst = 0.0;
    for (int j = 0; j < kNumConstraints; ++j) worst = std::max(worst, std::abs(r.dot(A[j] * r) - rhs[j]));
    CHECK(worst <= 1e-12);

    Eigen::Matrix3d F = R;
    F.row(k % 3) *= -1.0;  // det = -1, still orthogonal
    const Vector10d s = homogeneous_vector(Rotation3d(F));
    double cross = 0.0;
    for (int j = 12; j < 21; ++j) cross = std::max(cross, std::abs(s.dot(A[j] * s) - rhs[j]));
    double gram = 0.0;
    for (int j = 0; j < 12; ++j) gram = std::max(gram, std::abs(s.dot(A[j] * s) - rhs[j]));
    CHECK(cross > 0.5);
    CHECK(gram <= 1e-12);
  }
}

TEST_CASE("dual certificate: weak duality, kernel consistency, Z identity") {
  Rng rng(13);
  for (int trial = 0; trial < 10; ++trial) {
    const auto f = testing::scene(SceneMode::General, 20, 200 + trial);
    const QcqpProblem q = marginalize_translation(build_ptl_cost(f.c), f.c);
    const DualSolution d = solve_dual_sdp(q);
    CHECK(d.kernel_dim == 1);
    REQUIRE(d.kernel_basis.size() == 1);
    CHECK((d.Z * d.kernel_basis[0]).norm() <= 1e-6 * d.Z.norm());
    // Z = Q + sum lambda A - gamma A_h.
    Matrix10d Z = q.cost;
    for (int j = 0; j < kNumConstraints; ++j) {
      const double w = j == kHomogenizationIndex ? -d.lambda[j] : d.lambda[j];
      Z += w * q.constraints[j];
    }
    CHECK((Z - d.Z).norm() <= 1e-9 * (1.0 + q.cost.norm()));
    for (int k = 0; k < 50; ++k) {
      const Vector10d r = homogeneous_vector(random_rotation(rng));
      const double primal = r.dot(q.cost * r);
      CHECK(primal >= d.dual_value - 1e-9 * (1.0 + std::abs(d.dual_value)));
      CHECK(r.dot(d.Z * r) == doctest::Approx(primal - d.dual_value).epsilon(1e-6).scale(q.cost.norm()));
    }
    const Rotation3d R = polish_rotation(q, recover_rotation_rank1(d));
    const double gap = duality_gap(q, d, R);
    CHECK(gap >= -1e-9);
    CHECK(relative_gap(gap, d.dual_value) <= 1e-5);
  }
}

TEST_CASE("noise-free orthographic data is recovered exactly") {
  for (int trial = 0; trial < 10; ++trial) {
    const auto f = testing::scene(SceneMode::General, 12 + trial, 300 + trial, Model::Orthographic);
    const PtLCost cost = build_ptl_cost(f.c);
    const QcqpProblem q = marginalize_translation(cost, f.c);
    const DualSolution d = solve_dual_sdp(q);
    const Rotation3d R0 = recover_rotation_rank1(d);
    CHECK(is_rotation(R0));
    const Rotation3d R = polish_rotation(q, R0);
    CHECK(testing::angle_between(R, f.gt.rotation) < deg2rad(1e-6));
    const Eigen::Vector2d t = recover_translation_xy(R, cost, f.c);
    CHECK((t - f.gt.translation.head<2>()).norm() < 1e-9);
  }
}

TEST_CASE("rank-1 recovery: scaling, sign and stability") {
  Rng rng(14);
  const Rotation3d R = random_rotation(rng);
  const Vector10d v = homogeneous_vector(R).normalized();
  CHECK(testing::angle_between(recover_rotation_rank1(v), R) < 1e-12);
  CHECK(testing::angle_between(recover_rotation_rank1(Vector10d(-v)), R) < 1e-12);
  std::mt19937_64 g(1);
  std::normal_distribution<double> n(0.0, 1e-6);
  Vector10d p = v;
  for (int i = 0; i < 10; ++i) p[i] += n(g);
  CHECK((recover_rotation_rank1(p) - recover_rotation_rank1(v)).norm() < 1e-5);
  Vector10d nohom = v;
  nohom[9] = 0.0;
  CHECK_THROWS_AS(recover_rotation_rank1(nohom), Error);
}

TEST_CASE("translation recovery") {
  CorrespondenceSet one;
  one.push_back(Point3d(0.5, 1.0, -0.2), Measurement2d(0.3, 2.0));
  Rng rng(15);
  const Rotation3d R = random_rotation(rng);
  const Eigen::Vector2d t = recover_translation_xy(R, build_ptl_cost(one), one);
  CHECK((t - (one.measurements[0] - (R * one.world_points[0]).head<2>())).norm() < 1e-15);

  const auto f = testing::scene(SceneMode::General, 30, 16);
  Eigen::Vector2d oracle;
  direct_cost(R, f.c, &oracle);
  CHECK((recover_translation_xy(R, build_ptl_cost(f.c), f.c) - oracle).norm() < 1e-10);
}

TEST_CASE("equivariance under a rigid change of world frame") {
  Rng rng(17);
  const auto f = testing::scene(SceneMode::General, 20, 18, Model::Orthographic);
  const Posed G{random_rotation(rng), Eigen::Vector3d(0.4, -1.0, 2.0)};
  CorrespondenceSet moved;
  for (std::size_t i = 0; i < f.c.size(); ++i) {
    moved.push_back(transform(G, f.c.world_points[i]), f.c.measurements[i]);
  }
  auto solve = [](const CorrespondenceSet& c) {
    const QcqpProblem q = marginalize_translation(build_ptl_cost(c), c);
    return polish_rotation(q, recover_rotation_rank1(solve_dual_sdp(q)));
  };
  const Rotation3d Ra = solve(f.c);
  const Rotation3d Rb = solve(moved);
  CHECK(testing::angle_between(Rotation3d(Rb * G.rotation), Ra) < 1e-8);
}

TEST_CASE("coplanar scenes give a two dimensional kernel") {
  for (int trial = 0; trial < 5; ++trial) {
    const auto f = testing::scene(SceneMode::Coplanar, 15, 400 + trial);
    const QcqpProblem q = marginalize_translation(build_ptl_cost(f.c), f.c);
    const DualSolution d = solve_dual_sdp(q);
    CHECK(d.kernel_dim == 2);
    for (const auto& v : d.kernel_basis) CHECK((d.Z * v).norm() <= 1e-6 * d.Z.norm());
  }
}

TEST_CASE("rank threshold is explicit") {
  const auto f = testing::scene(SceneMode::Coplanar, 15, 410);
  const QcqpProblem q = marginalize_translation(build_ptl_cost(f.c), f.c);
  DualOptions strict;
  strict.rank_tol = 1e-30;
  CHECK(solve_dual_sdp(q, strict).kernel_dim == 1);  // floor of one
  DualOptions loose;
  loose.rank_tol = 0.5;
  CHECK_THROWS_AS(solve_dual_sdp(q, loose), Error);
}
