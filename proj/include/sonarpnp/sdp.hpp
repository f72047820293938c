#pragma once

// Small dense semidefinite programs in standard form.
//
//   primal:  min <C, X>   s.t.  <A_i, X> = b_i,  X >= 0
//   dual:    max b^T y    s.t.  Z = C - sum_i y_i A_i >= 0
//
// The registration solver only talks to this interface, so another conic
// solver can be dropped in behind it.

#include <string>
#include <vector>

#include <Eigen/Core>

namespace sonarpnp::sdp {

struct Problem {
  Eigen::MatrixXd C;
  std::vector<Eigen::MatrixXd> A;
  Eigen::VectorXd b;

  Eigen::Index dim() const { return C.rows(); }
  Eigen::Index num_constraints() const { return Eigen::Index(A.size()); }
};

struct Options {
  double feasibility_tol = 1e-9;
  double gap_tol = 1e-9;
  int max_iterations = 100;
  /// Fraction of the distance to the cone boundary taken per step.
  double step_fraction = 0.98;
};

enum class Status { Optimal, MaxIterations, NumericalFailure };

const char* to_string(Status status);

struct Result {
  Status status = Status::NumericalFailure;
  Eigen::MatrixXd X;
  Eigen::VectorXd y;
  /// Recomputed as C - sum y_i A_i from the final y, so that Z >= 0 is a
  /// statement about y alone.
  Eigen::MatrixXd Z;
  double primal_objective = 0.0;
  double dual_objective = 0.0;
  double primal_infeasibility = 0.0;
  double dual_infeasibility = 0.0;
  int iterations = 0;
};

/// Infeasible-start primal-dual path following with the HKM search direction
/// and a Mehrotra predictor-corrector step.
class InteriorPointSolver {
 public:
  explicit InteriorPointSolver(Options options = {}) : options_(options) {}

  Result solve(const Problem& problem) const;

  const Options& options() const { return options_; }

 private:
  Options options_;
};

/// Applies A(X)_i = <A_i, X>.
Eigen::VectorXd apply_constraints(const Problem& problem, const Eigen::MatrixXd& X);

/// Indices of a maximal linearly independent subset of the A_i, earliest
/// first.
std::vector<Eigen::Index> independent_constraints(const Problem& problem, double tol = 1e-10);

/// Returns sum_i y_i A_i.
Eigen::MatrixXd adjoint(const Problem& problem, const Eigen::VectorXd& y);

}  // namespace sonarpnp::sdp
