#include "sonarpnp/pipeline.hpp"

#include <chrono>
#include <cmath>
#include <limits>
#include <tuple>
#include <utility>

namespace sonarpnp {

const char* to_string(CoplanarPolicy p) {
  switch (p) {
    case CoplanarPolicy::Auto: return "auto";
    case CoplanarPolicy::ForceGeneral: return "general";
    case CoplanarPolicy::ForceCoplanar: return "coplanar";
  }
  return "?";
}

const char* to_string(TzMethod m) { return m == TzMethod::ClosedForm ? "closed" : "opt"; }

const char* to_string(RecoveryPath p) { return p == RecoveryPath::Rank1 ? "rank1" : "coplanar"; }

namespace {

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

template <class F>
auto staged(const char* stage, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const Error& e) {
    throw Error(e.kind(), std::string(stage) + ": " + e.what());
  }
}

int count_in_front(const Posed& pose, const CorrespondenceSet& c) {
  int n = 0;
  for (const auto& p : c.world_points) n += transform(pose, p).y() > 0.0;
  return n;
}

struct TranslationFit {
  Eigen::Vector3d t;
  TzResult tz;
  std::optional<TzOptimizeResult> optimized;
};

TranslationFit fit_translation(const Rotation3d& R, const PtLCost& cost, const SolveRequest& req) {
  const auto& c = req.correspondences;
  TranslationFit out;
  const Eigen::Vector2d txy = recover_translation_xy(R, cost, c);
  const auto band = [&](double tz) {
    return elevation_band_count(R, Eigen::Vector3d(txy.x(), txy.y(), tz), c, req.fov);
  };
  out.tz = minimize_quartic(build_quartic(R, txy, c), band);
  double tz = out.tz.t_z;
  if (req.tz_method == TzMethod::Optimize) {
    out.optimized = optimize_tz_reprojection(R, txy, c);
    tz = out.optimized->t_z;
  }
  out.t = Eigen::Vector3d(txy.x(), txy.y(), tz);
  return out;
}

}  // namespace

Rotation3d mirror_rotation(const Rotation3d& R, const Eigen::Vector3d& world_normal) {
  const Eigen::Vector3d n = world_normal.normalized();
  const Eigen::Matrix3d H = Eigen::Matrix3d::Identity() - 2.0 * n * n.transpose();
  const Eigen::Matrix3d S = Eigen::Vector3d(1.0, 1.0, -1.0).asDiagonal();
  return project_to_so3(S * R * H);
}

SolveResult pipeline_solve(const SolveRequest& req) {
  const auto t_start = Clock::now();
  const CorrespondenceSet& c = req.correspondences;
  staged("input", [&] { c.validate(kMinPointsCoplanar); });
  if (req.coplanar_policy == CoplanarPolicy::ForceGeneral && c.size() < kMinPointsGeneral) {
    throw Error(ErrorKind::InvalidInput, "input: general case needs at least " +
                                             std::to_string(kMinPointsGeneral) + " points, got " +
                                             std::to_string(c.size()));
  }

  SolveResult result;
  SolveDiagnostics& diag = result.diagnostics;

  auto t0 = Clock::now();
  const PtLCost cost = build_ptl_cost(c);
  const QcqpProblem q = staged("ptl", [&] { return marginalize_translation(cost, c); });
  diag.timings.ptl_ms = ms_since(t0);

  t0 = Clock::now();
  const DualSolution dual = staged("sdp", [&] { return solve_dual_sdp(q, req.dual); });
  diag.timings.sdp_ms = ms_since(t0);
  diag.kernel_dim = dual.kernel_dim;
  diag.z_eigenvalues = dual.eigenvalues;
  diag.dual_value = dual.dual_value;
  diag.sdp_iterations = dual.iterations;
  diag.sdp_status = sdp::to_string(dual.status);

  const bool coplanar = req.coplanar_policy == CoplanarPolicy::ForceCoplanar ||
                        (req.coplanar_policy == CoplanarPolicy::Auto && dual.kernel_dim == 2);
  if (!coplanar && c.size() < kMinPointsGeneral) {
    throw Error(ErrorKind::InvalidInput,
                "input: kernel is one dimensional (general scene) and needs at least " +
                    std::to_string(kMinPointsGeneral) + " points, got " +
                    std::to_string(c.size()));
  }
  diag.path = coplanar ? RecoveryPath::Coplanar : RecoveryPath::Rank1;

  Posed pose;
  t0 = Clock::now();
  double tz_ms = 0.0;
  if (!coplanar) {
    Rotation3d R = staged("recovery", [&] { return recover_rotation_rank1(dual); });
    R = polish_rotation(q, R);
    const auto t1 = Clock::now();
    const TranslationFit fit = staged("tz", [&] { return fit_translation(R, cost, req); });
    tz_ms = ms_since(t1);
    pose = Posed{R, fit.t};
    diag.tz = fit.tz;
    diag.tz_optimized = fit.optimized;
  } else {
    KernelPair kernel;
    kernel.v1 = dual.eigenvectors.col(0);
    kernel.v2 = dual.eigenvectors.col(1);
    const AlphaSystem sys = build_alpha_system(kernel);
    diag.alpha_candidates = staged("coplanar", [&] { return solve_alpha(sys); });
    Rotation3d R = staged("coplanar",
                          [&] { return assemble_rotation(kernel, diag.alpha_candidates.front()); });
    R = polish_rotation(q, R);

    // The mirrored pose has identical cost; rank the pair explicitly.
    const Eigen::Vector3d normal = fit_plane_normal(c.world_points);
    const Rotation3d pair[2] = {R, mirror_rotation(R, normal)};
    std::vector<TranslationFit> fits;
    for (const Rotation3d& Rk : pair) {
      const auto t1 = Clock::now();
      fits.push_back(staged("tz", [&] { return fit_translation(Rk, cost, req); }));
      tz_ms += ms_since(t1);
      MirrorAlternative alt;
      alt.pose = Posed{Rk, fits.back().t};
      alt.band_count = elevation_band_count(Rk, alt.pose.translation, c, req.fov);
      alt.in_front = count_in_front(alt.pose, c);
      alt.orientation_score = plane_orientation_score(Rk, normal);
      alt.orientation_margin = plane_orientation_margin(Rk, normal);
      diag.mirror_alternatives.push_back(alt);
    }
    const auto key = [](const MirrorAlternative& a) {
      return std::make_tuple(a.band_count, a.in_front, a.orientation_margin);
    };
    const auto& a = diag.mirror_alternatives;
    const std::size_t pick = key(a[1]) > key(a[0]) ? 1 : 0;
    diag.mirror_tie =
        a[0].band_count == a[1].band_count && a[0].in_front == a[1].in_front;
    if (diag.mirror_tie) diag.flags.push_back("mirror_tie");
    pose = a[pick].pose;
    diag.tz = fits[pick].tz;
    diag.tz_optimized = fits[pick].optimized;
  }
  diag.timings.tz_ms = tz_ms;
  diag.timings.recovery_ms = ms_since(t0) - tz_ms;
  if (diag.tz.tie) diag.flags.push_back("tz_tie");

  diag.duality_gap = duality_gap(q, dual, pose.rotation);
  diag.relative_gap = relative_gap(diag.duality_gap, dual.dual_value);
  diag.certified = diag.relative_gap <= req.gap_tol;
  if (!diag.certified) diag.flags.push_back("gap_exceeded");
  if (dual.status != sdp::Status::Optimal) diag.flags.push_back("sdp_inexact");

  result.pose_before_refinement = pose;
  try {
    diag.reprojection_before = reprojection_residual(pose, c).cost;
  } catch (const Error&) {
    diag.reprojection_before = std::numeric_limits<double>::infinity();
  }
  diag.reprojection_after = diag.reprojection_before;

  if (req.refine) {
    t0 = Clock::now();
    try {
      RefinementResult ref = cio_refine(pose, c, req.refinement);
      const double after = reprojection_residual(ref.pose, c).cost;
      diag.refinement = ref.report;
      if (ref.report.fell_back_to_penalty) diag.flags.push_back("refine_penalty_fallback");
      if (ref.report.not_improved) diag.flags.push_back("refine_not_improved");
      if (after <= diag.reprojection_before) {
        pose = ref.pose;
        diag.reprojection_after = after;
      } else {
        diag.refinement_rejected = true;
      }
    } catch (const Error& e) {
      diag.refinement_rejected = true;
      diag.refinement_error = std::string("refine: ") + e.what();
    }
    if (diag.refinement_rejected) diag.flags.push_back("refine_rejected");
    diag.timings.refine_ms = ms_since(t0);
  }

  result.pose = pose;
  diag.timings.total_ms = ms_since(t_start);
  return result;
}

}  // namespace sonarpnp
