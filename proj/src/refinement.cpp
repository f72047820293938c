#include "sonarpnp/refinement.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <Eigen/Dense>
#include <boost/math/tools/minima.hpp>

namespace sonarpnp {

namespace {

constexpr double kStageDecreaseTol = 1e-7;

Eigen::Matrix3d skew(const Eigen::Vector3d& v) {
  Eigen::Matrix3d m;
  m << 0, -v.z(), v.y(), v.z(), 0, -v.x(), -v.y(), v.x(), 0;
  return m;
}

double elevation_of(const Eigen::Vector3d& p, double r) {
  return std::asin(std::clamp(p.z() / r, -1.0, 1.0));
}

// d(phi)/dp for phi = asin(z / r).
Eigen::RowVector3d elevation_gradient(const Eigen::Vector3d& p) {
  const double r2 = p.squaredNorm();
  const double rho = p.head<2>().norm();
  Eigen::Vector3d g = -p.z() * p;
  g.z() += r2;
  return (g / (rho * r2)).transpose();
}

bool projection_active(const RefinementConfig& cfg, bool penalty_fallback) {
  return cfg.constraint_mode == ConstraintMode::Projection && !penalty_fallback;
}

struct Evaluation {
  Eigen::VectorXd residual;
  double reprojection_cost = 0.0;
  double objective = 0.0;
  int violations = 0;
};

Evaluation evaluate(const Posed& pose, const CorrespondenceSet& c, const RefinementConfig& cfg,
                    double penalty_weight, bool clamp_elevation) {
  const std::size_t n = c.size();
  const bool with_penalty = penalty_weight > 0.0;
  Evaluation ev;
  ev.residual.resize(Eigen::Index(2 * n + (with_penalty ? n : 0)));
  const double sw = std::sqrt(std::max(penalty_weight, 0.0));
  for (std::size_t i = 0; i < n; ++i) {
    const Eigen::Vector3d p = transform(pose, c.world_points[i]);
    const double r = p.norm();
    if (!(r > 0.0)) {
      throw Error(ErrorKind::DegenerateInput,
                  "reprojection: point " + std::to_string(i) + " maps to the sonar origin");
    }
    const double phi = elevation_of(p, r);
    const bool above = phi > cfg.phi_max;
    const bool below = phi < cfg.phi_min;
    if (above || below) ++ev.violations;
    Eigen::Vector2d pred;
    if (clamp_elevation && (above || below)) {
      pred = p.head<2>() / std::cos(above ? cfg.phi_max : cfg.phi_min);
    } else {
      pred = project_arc(p);
    }
    const Eigen::Vector2d e = pred - c.measurements[i];
    ev.residual.segment<2>(Eigen::Index(2 * i)) = e;
    ev.reprojection_cost += e.squaredNorm();
    if (with_penalty) {
      const double viol = above ? phi - cfg.phi_max : (below ? cfg.phi_min - phi : 0.0);
      ev.residual[Eigen::Index(2 * n + i)] = sw * viol;
    }
  }
  ev.objective = ev.residual.squaredNorm();
  return ev;
}

Eigen::MatrixXd jacobian(const Posed& pose, const CorrespondenceSet& c, const RefinementConfig& cfg,
                         double penalty_weight, bool clamp_elevation) {
  const std::size_t n = c.size();
  const bool with_penalty = penalty_weight > 0.0;
  const double sw = std::sqrt(std::max(penalty_weight, 0.0));
  Eigen::MatrixXd J = Eigen::MatrixXd::Zero(Eigen::Index(2 * n + (with_penalty ? n : 0)), 6);
  for (std::size_t i = 0; i < n; ++i) {
    const Eigen::Vector3d rp = pose.rotation * c.world_points[i];
    const Eigen::Vector3d p = rp + pose.translation;
    Eigen::Matrix<double, 3, 6> dp;
    dp.leftCols<3>() = -skew(rp);
    dp.rightCols<3>().setIdentity();

    const double r = p.norm();
    const double rho = p.head<2>().norm();
    const double phi = elevation_of(p, r);
    const bool above = phi > cfg.phi_max;
    const bool below = phi < cfg.phi_min;

    Eigen::Matrix<double, 2, 3> dm = Eigen::Matrix<double, 2, 3>::Zero();
    if (clamp_elevation && (above || below)) {
      dm.leftCols<2>() = Eigen::Matrix2d::Identity() / std::cos(above ? cfg.phi_max : cfg.phi_min);
    } else {
      // m = p_xy * s, s = r / rho.
      const double s = r / rho;
      Eigen::RowVector3d ds = (p / (r * rho)).transpose();
      ds.head<2>() -= (r / (rho * rho * rho)) * p.head<2>().transpose();
      dm.leftCols<2>() = s * Eigen::Matrix2d::Identity();
      dm += p.head<2>() * ds;
    }
    J.block<2, 6>(Eigen::Index(2 * i), 0) = dm * dp;
    if (with_penalty && (above || below)) {
      const Eigen::RowVector3d dphi = elevation_gradient(p);
      J.row(Eigen::Index(2 * n + i)) = (above ? sw : -sw) * dphi * dp;
    }
  }
  return J;
}

Posed apply_step(const Posed& pose, const Eigen::Matrix<double, 6, 1>& delta) {
  const Eigen::Vector3d w = delta.head<3>();
  const double angle = w.norm();
  const Rotation3d step =
      angle > 0.0 ? Eigen::AngleAxisd(angle, w / angle).toRotationMatrix() : Rotation3d::Identity();
  Posed out;
  out.rotation = project_to_so3(step * pose.rotation);
  out.translation = pose.translation + delta.tail<3>();
  return out;
}

}  // namespace

ReprojectionResult reprojection_residual(const Posed& pose, const CorrespondenceSet& c) {
  ReprojectionResult out;
  out.residuals.reserve(c.size());
  for (std::size_t i = 0; i < c.size(); ++i) {
    const Eigen::Vector3d p = transform(pose, c.world_points[i]);
    if (!(p.norm() > 0.0)) {
      throw Error(ErrorKind::DegenerateInput,
                  "reprojection: point " + std::to_string(i) + " maps to the sonar origin");
    }
    const Eigen::Vector2d e = project_arc(p) - c.measurements[i];
    out.residuals.push_back(e);
    out.cost += e.squaredNorm();
  }
  return out;
}

Eigen::MatrixXd refinement_jacobian(const Posed& pose, const CorrespondenceSet& c,
                                    const RefinementConfig& cfg, double penalty_weight) {
  return jacobian(pose, c, cfg, penalty_weight, projection_active(cfg, false));
}

Eigen::VectorXd refinement_residual(const Posed& pose, const CorrespondenceSet& c,
                                    const RefinementConfig& cfg, double penalty_weight) {
  return evaluate(pose, c, cfg, penalty_weight, projection_active(cfg, false)).residual;
}

RefinementResult cio_refine(const Posed& initial, const CorrespondenceSet& c,
                            const RefinementConfig& cfg) {
  if (!cfg.valid()) {
    throw Error(ErrorKind::InvalidInput, "cio_refine: invalid refinement configuration");
  }
  c.validate(1);
  RefinementResult out;
  RefinementReport& rep = out.report;

  Posed pose = initial;
  const Evaluation start = evaluate(pose, c, cfg, 0.0, false);
  rep.initial_cost = start.reprojection_cost;
  rep.started_infeasible = start.violations > 0;
  const bool fallback = cfg.constraint_mode == ConstraintMode::Projection && rep.started_infeasible;
  rep.fell_back_to_penalty = fallback;
  const bool clamp = projection_active(cfg, fallback);
  double weight = clamp ? 0.0 : cfg.penalty_weight;

  Evaluation cur = evaluate(pose, c, cfg, weight, clamp);
  double damping = cfg.initial_damping;
  int iter = 0;
  int stage_iter = 0;  // the iteration budget applies to each penalty stage
  bool converged = cur.objective <= cfg.residual_tolerance;

  while (stage_iter < cfg.max_iterations) {
    if (converged) {
      // Constraint still violated at convergence: stiffen the penalty.
      if (!clamp && cur.violations > 0 && rep.penalty_ramps < cfg.max_penalty_ramps) {
        weight *= 10.0;
        ++rep.penalty_ramps;
        cur = evaluate(pose, c, cfg, weight, clamp);
        damping = cfg.initial_damping;
        converged = false;
        stage_iter = 0;
      } else {
        break;
      }
    }
    ++iter;
    ++stage_iter;
    const Eigen::MatrixXd J = jacobian(pose, c, cfg, weight, clamp);
    const Eigen::Matrix<double, 6, 1> g = J.transpose() * cur.residual;
    const Eigen::Matrix<double, 6, 6> H = J.transpose() * J;
    if (g.lpNorm<Eigen::Infinity>() <= 1e-15 * (1.0 + cur.objective)) {
      converged = true;
      continue;
    }
    bool accepted = false;
    while (!accepted) {
      Eigen::Matrix<double, 6, 6> A = H;
      A.diagonal() += damping * (H.diagonal().array() + 1e-12).matrix();
      const Eigen::Matrix<double, 6, 1> delta = A.ldlt().solve(-g);
      if (!delta.allFinite()) {
        damping *= 10.0;
      } else {
        const Posed cand = apply_step(pose, delta);
        Evaluation ev;
        bool ok = true;
        try {
          ev = evaluate(cand, c, cfg, weight, clamp);
        } catch (const Error&) {
          ok = false;
        }
        if (ok && ev.objective < cur.objective) {
          rep.accepted.push_back(AcceptedStep{cur.objective, ev.objective, weight});
          const double decrease = cur.objective - ev.objective;
          pose = cand;
          cur = ev;
          damping = std::max(damping / 10.0, 1e-15);
          accepted = true;
          // While the band is still violated, a stalled stage only needs to be
          // good enough to hand over to a stiffer penalty.
          const bool will_ramp = !clamp && cur.violations > 0 &&
                                 rep.penalty_ramps < cfg.max_penalty_ramps;
          const double decrease_tol = will_ramp ? kStageDecreaseTol : cfg.residual_tolerance;
          if (delta.norm() <= cfg.step_tolerance ||
              decrease <= decrease_tol * (1.0 + cur.objective) ||
              cur.objective <= cfg.residual_tolerance) {
            converged = true;
          }
        } else {
          damping *= 10.0;
        }
      }
      if (!accepted && damping > 1e16) {
        // No descent available at any damping: a local minimum to precision.
        converged = true;
        break;
      }
    }
  }

  rep.iterations = iter;
  rep.converged = converged;
  rep.not_improved = rep.accepted.empty() && start.reprojection_cost > cfg.residual_tolerance;
  const Evaluation fin = evaluate(pose, c, cfg, 0.0, false);
  rep.final_cost = fin.reprojection_cost;
  rep.band_violations = fin.violations;
  out.pose = rep.accepted.empty() ? initial : pose;
  return out;
}

TzOptimizeResult optimize_tz_reprojection(const Rotation3d& R, const Eigen::Vector2d& t_xy,
                                          const CorrespondenceSet& c, double half_width,
                                          int scan_samples) {
  TzOptimizeResult out;
  auto cost = [&](double tz) {
    ++out.evaluations;
    Posed pose{R, Eigen::Vector3d(t_xy.x(), t_xy.y(), tz)};
    try {
      return reprojection_residual(pose, c).cost;
    } catch (const Error&) {
      return std::numeric_limits<double>::infinity();
    }
  };
  scan_samples = std::max(scan_samples, 3);
  const double step = 2.0 * half_width / double(scan_samples - 1);
  int best = 0;
  double best_cost = std::numeric_limits<double>::infinity();
  for (int i = 0; i < scan_samples; ++i) {
    const double f = cost(-half_width + step * i);
    if (f < best_cost) {
      best_cost = f;
      best = i;
    }
  }
  const double lo = -half_width + step * std::max(best - 1, 0);
  const double hi = -half_width + step * std::min(best + 1, scan_samples - 1);
  const auto [tz, f] =
      boost::math::tools::brent_find_minima(cost, lo, hi, std::numeric_limits<double>::digits / 2);
  out.t_z = tz;
  out.cost = f;
  return out;
}

}  // namespace sonarpnp
