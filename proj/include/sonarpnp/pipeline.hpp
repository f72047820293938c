#pragma once

// End-to-end sonar PnP: point-to-line reduction, certified dual solve,
// kernel branch (rank-1 recovery or the coplanar alpha solver), t_z and an
// optional local refinement.

#include <optional>
#include <string>
#include <vector>

#include "sonarpnp/coplanar.hpp"
#include "sonarpnp/correspondences.hpp"
#include "sonarpnp/geometry.hpp"
#include "sonarpnp/ptl.hpp"
#include "sonarpnp/refinement.hpp"
#include "sonarpnp/tz_solver.hpp"

namespace sonarpnp {

enum class CoplanarPolicy { Auto, ForceGeneral, ForceCoplanar };
enum class TzMethod { ClosedForm, Optimize };

const char* to_string(CoplanarPolicy p);
const char* to_string(TzMethod m);

inline constexpr std::size_t kMinPointsCoplanar = 5;
inline constexpr std::size_t kMinPointsGeneral = 7;

struct SolveRequest {
  CorrespondenceSet correspondences;
  bool refine = false;
  CoplanarPolicy coplanar_policy = CoplanarPolicy::Auto;
  TzMethod tz_method = TzMethod::ClosedForm;
  FovSpec fov;
  DualOptions dual;
  RefinementConfig refinement;
  /// Relative duality gap above which the result is flagged uncertified.
  double gap_tol = 1e-5;
};

struct StageTimings {
  double ptl_ms = 0.0;
  double sdp_ms = 0.0;
  double recovery_ms = 0.0;
  double tz_ms = 0.0;
  double refine_ms = 0.0;
  double total_ms = 0.0;
};

enum class RecoveryPath { Rank1, Coplanar };
const char* to_string(RecoveryPath p);

/// One pose consistent with the coplanar kernel, with the quantities used to
/// rank it against its mirror.
struct MirrorAlternative {
  Posed pose;
  int band_count = 0;
  int in_front = 0;
  int orientation_score = 0;
  double orientation_margin = 0.0;
};

struct SolveDiagnostics {
  RecoveryPath path = RecoveryPath::Rank1;
  int kernel_dim = 0;
  Vector10d z_eigenvalues = Vector10d::Zero();
  double dual_value = 0.0;
  double duality_gap = 0.0;
  double relative_gap = 0.0;
  bool certified = false;
  int sdp_iterations = 0;
  std::string sdp_status;

  std::vector<AlphaCandidate> alpha_candidates;
  std::vector<MirrorAlternative> mirror_alternatives;
  /// The mirror pair could not be separated by any rule but the orientation
  /// prior.
  bool mirror_tie = false;

  TzResult tz;
  std::optional<TzOptimizeResult> tz_optimized;

  std::optional<RefinementReport> refinement;
  /// Refinement threw or raised the reprojection cost; pre-refinement pose kept.
  bool refinement_rejected = false;
  std::string refinement_error;

  double reprojection_before = 0.0;
  double reprojection_after = 0.0;
  StageTimings timings;
  std::vector<std::string> flags;
};

struct SolveResult {
  Posed pose;
  Posed pose_before_refinement;
  SolveDiagnostics diagnostics;
};

/// Runs the full pipeline. Errors are rethrown as sonarpnp::Error with the
/// stage name prefixed to the message and the original kind preserved.
SolveResult pipeline_solve(const SolveRequest& request);

/// Reflection of a coplanar-scene pose through the sonar imaging plane: the
/// rotation that yields identical measurements after re-estimating t.
Rotation3d mirror_rotation(const Rotation3d& R, const Eigen::Vector3d& world_normal);

}  // namespace sonarpnp
