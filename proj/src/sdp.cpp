#include "sonarpnp/sdp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <Eigen/LU>

namespace sonarpnp::sdp {

const char* to_string(Status status) {
  switch (status) {
    case Status::Optimal: return "optimal";
    case Status::MaxIterations: return "max_iterations";
    case Status::NumericalFailure: return "numerical_failure";
  }
  return "unknown";
}

Eigen::VectorXd apply_constraints(const Problem& problem, const Eigen::MatrixXd& X) {
  Eigen::VectorXd out(problem.num_constraints());
  for (Eigen::Index i = 0; i < problem.num_constraints(); ++i) {
    out[i] = problem.A[i].cwiseProduct(X).sum();
  }
  return out;
}

Eigen::MatrixXd adjoint(const Problem& problem, const Eigen::VectorXd& y) {
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(problem.dim(), problem.dim());
  for (Eigen::Index i = 0; i < problem.num_constraints(); ++i) out += y[i] * problem.A[i];
  return out;
}

namespace {

Eigen::MatrixXd sym(const Eigen::MatrixXd& m) { return 0.5 * (m + m.transpose()); }

// Largest alpha with M + alpha dM >= 0, for M positive definite.
double max_step(const Eigen::MatrixXd& M, const Eigen::MatrixXd& dM) {
  Eigen::LLT<Eigen::MatrixXd> llt(M);
  if (llt.info() != Eigen::Success) return 0.0;
  const Eigen::MatrixXd L = llt.matrixL();
  Eigen::MatrixXd W = L.triangularView<Eigen::Lower>().solve(dM);
  W = L.triangularView<Eigen::Lower>().solve(W.transpose()).transpose();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sym(W), Eigen::EigenvaluesOnly);
  const double lmin = es.eigenvalues()[0];
  if (lmin >= 0.0) return std::numeric_limits<double>::infinity();
  return -1.0 / lmin;
}

}  // namespace

std::vector<Eigen::Index> independent_constraints(const Problem& problem, double tol) {
  const Eigen::Index m = problem.num_constraints();
  const Eigen::Index nn = problem.dim() * problem.dim();
  std::vector<Eigen::Index> kept;
  if (m == 0) return kept;
  Eigen::MatrixXd stacked(nn, m);
  for (Eigen::Index i = 0; i < m; ++i) {
    stacked.col(i) = Eigen::Map<const Eigen::VectorXd>(problem.A[i].data(), nn);
  }
  // Greedy Gram-Schmidt in index order keeps the earliest constraints, so the
  // choice is deterministic and easy to reason about.
  Eigen::MatrixXd basis(nn, 0);
  for (Eigen::Index i = 0; i < m; ++i) {
    Eigen::VectorXd v = stacked.col(i);
    const double norm0 = v.norm();
    if (norm0 == 0.0) continue;
    for (int pass = 0; pass < 2; ++pass) {
      for (Eigen::Index k = 0; k < basis.cols(); ++k) v -= basis.col(k).dot(v) * basis.col(k);
    }
    if (v.norm() <= tol * norm0) continue;
    basis.conservativeResize(Eigen::NoChange, basis.cols() + 1);
    basis.col(basis.cols() - 1) = v.normalized();
    kept.push_back(i);
  }
  return kept;
}

Result InteriorPointSolver::solve(const Problem& full) const {
  // Linearly dependent constraints make the Schur complement singular; solve
  // over a maximal independent subset and give the rest zero multipliers.
  const std::vector<Eigen::Index> kept = independent_constraints(full);
  Problem problem;
  problem.C = full.C;
  problem.b.resize(Eigen::Index(kept.size()));
  for (std::size_t k = 0; k < kept.size(); ++k) {
    problem.A.push_back(full.A[kept[k]]);
    problem.b[Eigen::Index(k)] = full.b[kept[k]];
  }

  const Eigen::Index n = problem.dim();
  const Eigen::Index m = problem.num_constraints();
  const Eigen::MatrixXd& C = problem.C;
  const Eigen::VectorXd& b = problem.b;

  // Starting point scaled to the data.
  double xi = std::max(10.0, std::sqrt(double(n)));
  double eta = std::max({10.0, std::sqrt(double(n)), C.norm()});
  for (Eigen::Index i = 0; i < m; ++i) {
    const double an = problem.A[i].norm();
    xi = std::max(xi, (1.0 + std::abs(b[i])) / (1.0 + an));
    eta = std::max(eta, an);
  }
  Eigen::MatrixXd X = xi * Eigen::MatrixXd::Identity(n, n);
  Eigen::MatrixXd Z = eta * Eigen::MatrixXd::Identity(n, n);
  Eigen::VectorXd y = Eigen::VectorXd::Zero(m);

  const double b_norm = b.norm();
  const double c_norm = C.norm();

  Result result;
  result.status = Status::MaxIterations;

  // Near the optimum the iterates can stall and then drift as Z loses
  // conditioning; remember the most accurate one.
  Eigen::MatrixXd best_X = X;
  Eigen::VectorXd best_y = y;
  Eigen::MatrixXd best_Z = Z;
  double best_merit = std::numeric_limits<double>::infinity();
  int best_iter = 0;

  for (int iter = 0; iter < options_.max_iterations; ++iter) {
    const Eigen::VectorXd rp = b - apply_constraints(problem, X);
    const Eigen::MatrixXd Rd = C - adjoint(problem, y) - Z;
    const double pobj = C.cwiseProduct(X).sum();
    const double dobj = b.dot(y);
    const double pinf = rp.norm() / (1.0 + b_norm);
    const double dinf = Rd.norm() / (1.0 + c_norm);
    const double rel_gap = std::abs(pobj - dobj) / (1.0 + std::abs(pobj) + std::abs(dobj));
    const double mu = X.cwiseProduct(Z).sum() / double(n);
    result.iterations = iter;
    const double merit = std::max({pinf, dinf, rel_gap});
    if (merit < best_merit) {
      best_merit = merit;
      best_X = X;
      best_y = y;
      best_Z = Z;
      best_iter = iter;
    }
    if (pinf <= options_.feasibility_tol && dinf <= options_.feasibility_tol &&
        rel_gap <= options_.gap_tol && mu / (1.0 + std::abs(pobj)) <= options_.gap_tol) {
      result.status = Status::Optimal;
      break;
    }

    Eigen::LLT<Eigen::MatrixXd> zchol(Z);
    if (zchol.info() != Eigen::Success) {
      result.status = Status::NumericalFailure;
      break;
    }
    const Eigen::MatrixXd Zinv = zchol.solve(Eigen::MatrixXd::Identity(n, n));

    // Schur complement M_ij = tr(A_i X A_j Z^-1).
    std::vector<Eigen::MatrixXd> XAZ(m);
    for (Eigen::Index j = 0; j < m; ++j) XAZ[j] = X * problem.A[j] * Zinv;
    Eigen::MatrixXd schur(m, m);
    for (Eigen::Index i = 0; i < m; ++i) {
      for (Eigen::Index j = 0; j < m; ++j) {
        schur(i, j) = problem.A[i].cwiseProduct(XAZ[j].transpose()).sum();
      }
    }
    schur = sym(schur);
    Eigen::LDLT<Eigen::MatrixXd> schur_ldlt(schur);
    Eigen::PartialPivLU<Eigen::MatrixXd> schur_lu;
    const bool use_lu = schur_ldlt.info() != Eigen::Success || !schur_ldlt.isPositive();
    if (use_lu) schur_lu.compute(schur);
    auto solve_schur = [&](const Eigen::VectorXd& rhs) -> Eigen::VectorXd {
      return use_lu ? Eigen::VectorXd(schur_lu.solve(rhs)) : Eigen::VectorXd(schur_ldlt.solve(rhs));
    };

    const Eigen::MatrixXd XRdZinv = X * Rd * Zinv;

    // Direction for target sigma * mu with optional second-order term.
    auto direction = [&](double target, const Eigen::MatrixXd* second_order,
                         Eigen::MatrixXd& dX, Eigen::VectorXd& dy, Eigen::MatrixXd& dZ) {
      Eigen::MatrixXd T = target * Zinv - X;
      if (second_order) T -= *second_order;
      Eigen::VectorXd rhs = rp - apply_constraints(problem, T);
      for (Eigen::Index i = 0; i < m; ++i) {
        rhs[i] += problem.A[i].cwiseProduct(XRdZinv.transpose()).sum();
      }
      dy = solve_schur(rhs);
      dZ = Rd - adjoint(problem, dy);
      Eigen::MatrixXd raw = T - X * dZ * Zinv;
      dX = sym(raw);
    };

    Eigen::MatrixXd dX, dZ;
    Eigen::VectorXd dy;
    direction(0.0, nullptr, dX, dy, dZ);
    if (!dX.allFinite() || !dZ.allFinite()) {
      result.status = Status::NumericalFailure;
      break;
    }
    double ap = std::min(1.0, options_.step_fraction * max_step(X, dX));
    double ad = std::min(1.0, options_.step_fraction * max_step(Z, dZ));
    const double mu_aff = (X + ap * dX).cwiseProduct(Z + ad * dZ).sum() / double(n);
    double sigma = std::pow(std::max(0.0, mu_aff) / mu, 3.0);
    sigma = std::clamp(sigma, 0.0, 1.0);

    const Eigen::MatrixXd corr = dX * dZ * Zinv;
    Eigen::MatrixXd dXc, dZc;
    Eigen::VectorXd dyc;
    direction(sigma * mu, &corr, dXc, dyc, dZc);
    if (!dXc.allFinite() || !dZc.allFinite()) {
      result.status = Status::NumericalFailure;
      break;
    }
    const double frac = iter < 5 ? 0.9 : options_.step_fraction;
    ap = std::min(1.0, frac * max_step(X, dXc));
    ad = std::min(1.0, frac * max_step(Z, dZc));
    if (ap <= 0.0 && ad <= 0.0) {
      result.status = Status::NumericalFailure;
      break;
    }
    const Eigen::MatrixXd X_next = sym(X + ap * dXc);
    const Eigen::MatrixXd Z_next = sym(Z + ad * dZc);
    if (Eigen::LLT<Eigen::MatrixXd>(X_next).info() != Eigen::Success ||
        Eigen::LLT<Eigen::MatrixXd>(Z_next).info() != Eigen::Success) {
      // Lost definiteness to rounding; keep the last interior iterate.
      result.status = Status::NumericalFailure;
      break;
    }
    X = X_next;
    y += ad * dyc;
    Z = Z_next;
    result.iterations = iter + 1;
  }

  if (result.status != Status::Optimal) {
    X = best_X;
    y = best_y;
    Z = best_Z;
    result.iterations = best_iter;
  }
  result.X = X;
  result.y = Eigen::VectorXd::Zero(full.num_constraints());
  for (std::size_t k = 0; k < kept.size(); ++k) result.y[kept[k]] = y[Eigen::Index(k)];
  result.Z = sym(C - adjoint(full, result.y));
  result.primal_objective = C.cwiseProduct(X).sum();
  result.dual_objective = full.b.dot(result.y);
  result.primal_infeasibility =
      (full.b - apply_constraints(full, X)).norm() / (1.0 + full.b.norm());
  result.dual_infeasibility = (C - adjoint(full, result.y) - Z).norm() / (1.0 + c_norm);
  return result;
}

}  // namespace sonarpnp::sdp
