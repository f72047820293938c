#include <doctest.h>

#include <random>

#include <Eigen/Dense>

#include "sonarpnp/sdp.hpp"

using namespace sonarpnp;

namespace {

Eigen::MatrixXd random_symmetric(int n, std::mt19937_64& rng) {
  std::normal_distribution<double> g;
  Eigen::MatrixXd M(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) M(i, j) = g(rng);
  }
  return 0.5 * (M + M.transpose());
}

}  // namespace

TEST_CASE("min <C, X> over unit-trace PSD matrices is the smallest eigenvalue") {
  std::mt19937_64 rng(1);
  for (int n : {2, 4, 7}) {
    sdp::Problem p;
    p.C = random_symmetric(n, rng);
    p.A = {Eigen::MatrixXd::Identity(n, n)};
    p.b = Eigen::VectorXd::Ones(1);
    const sdp::Result r = sdp::InteriorPointSolver().solve(p);
    const double lmin = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(p.C).eigenvalues()[0];
    CHECK(r.status == sdp::Status::Optimal);
    CHECK(r.dual_objective == doctest::Approx(lmin).epsilon(1e-7));
    CHECK(r.primal_objective == doctest::Approx(lmin).epsilon(1e-7));
    CHECK(Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(r.Z).eigenvalues()[0] > -1e-7);
  }
}

TEST_CASE("max-cut style relaxation: weak duality and complementarity") {
  std::mt19937_64 rng(2);
  const int n = 5;
  sdp::Problem p;
  p.C = random_symmetric(n, rng);
  for (int i = 0; i < n; ++i) {
    Eigen::MatrixXd E = Eigen::MatrixXd::Zero(n, n);
    E(i, i) = 1.0;
    p.A.push_back(E);
  }
  p.b = Eigen::VectorXd::Ones(n);
  const sdp::Result r = sdp::InteriorPointSolver().solve(p);
  CHECK(r.status == sdp::Status::Optimal);
  CHECK(r.primal_objective >= r.dual_objective - 1e-7);
  CHECK(std::abs(r.primal_objective - r.dual_objective) < 1e-6);
  CHECK((r.X * r.Z).trace() < 1e-7);
  // Any feasible X (here I) has cost at least the dual value.
  CHECK(p.C.trace() >= r.dual_objective - 1e-9);
}

TEST_CASE("dependent constraints are detected and ignored") {
  std::mt19937_64 rng(3);
  const int n = 3;
  sdp::Problem p;
  p.C = random_symmetric(n, rng);
  const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(n, n);
  p.A = {I, 2.0 * I};
  p.b = Eigen::Vector2d(1.0, 2.0);
  const auto idx = sdp::independent_constraints(p);
  REQUIRE(idx.size() == 1);
  CHECK(idx[0] == 0);
  const sdp::Result r = sdp::InteriorPointSolver().solve(p);
  CHECK(r.status == sdp::Status::Optimal);
  CHECK(r.y[1] == 0.0);
  CHECK((sdp::apply_constraints(p, r.X) - p.b).norm() < 1e-7);
  CHECK((r.Z - (p.C - sdp::adjoint(p, r.y))).norm() < 1e-12);
}
