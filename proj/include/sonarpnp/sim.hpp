#pragma once

// Synthetic scenes, polar noise, error metrics and seeded Monte-Carlo sweeps.

#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "sonarpnp/correspondences.hpp"
#include "sonarpnp/geometry.hpp"
#include "sonarpnp/pipeline.hpp"

namespace sonarpnp {

enum class SceneMode { General, Coplanar };
const char* to_string(SceneMode m);
SceneMode parse_scene_mode(const std::string& s);

using Rng = std::mt19937_64;

struct ScenarioConfig {
  SceneMode mode = SceneMode::General;
  int point_count = 20;
  FovSpec fov;
  double noise_sigma = 0.0;
  int trials = 1;
  std::uint64_t seed = 0;

  /// Throws InvalidInput naming the offending field.
  void validate() const;
};

struct PlaneSpec {
  Point3d anchor = Point3d(0.0, 3.0, 0.0);
  Eigen::Vector3d normal = Eigen::Vector3d::UnitZ();
  double dihedral = 0.0;
};

struct Scene {
  Posed ground_truth;
  CorrespondenceSet correspondences;
  /// Sonar-frame plane, Coplanar mode only.
  std::optional<PlaneSpec> plane;
};

/// Dihedral angle to the imaging plane in [5, 70] deg and an azimuth chosen so
/// that n_y n_z < 0 and n_x n_z > 0.
PlaneSpec sample_plane(Rng& rng);

Rotation3d random_rotation(Rng& rng);

/// Points are drawn in the sonar frame, then mapped to the world frame with
/// the inverse of a random ground-truth pose whose translation is one more
/// point drawn from the FoV. Throws GenerationFailure when coplanar rejection
/// sampling runs out of budget (100 draws per point).
Scene generate_scene(const ScenarioConfig& cfg, Rng& rng);

/// Gaussian noise of standard deviation sigma on range (m) and bearing (rad).
/// Negative ranges are clamped to zero and counted in `clamped`.
CorrespondenceSet apply_polar_noise(const CorrespondenceSet& clean, double sigma, Rng& rng,
                                    int* clamped = nullptr);

/// max_k acos(r_k^gt . r_k^est) in degrees over the three row pairs.
double rotation_error_deg(const Rotation3d& R_gt, const Rotation3d& R_est);

/// (||t_xy difference||, |t_z difference|).
std::pair<double, double> translation_errors(const Eigen::Vector3d& t_gt,
                                             const Eigen::Vector3d& t_est);

/// Per-trial stream seed from (seed, cell, trial), splitmix64 mixed.
std::uint64_t trial_seed(std::uint64_t seed, std::uint64_t cell, std::uint64_t trial);

struct TrialRecord {
  SceneMode mode = SceneMode::General;
  int n_points = 0;
  double sigma = 0.0;
  int trial = 0;
  bool ok = false;
  double rot_err_deg = 0.0;
  double txy_err_m = 0.0;
  double tz_err_m = 0.0;
  double gap = 0.0;
  int kernel_dim = 0;
  double time_total_ms = 0.0;
  double time_sdp_ms = 0.0;
  double time_tz_ms = 0.0;
  std::vector<std::string> flags;
};

struct PipelineOptions {
  bool refine = false;
  TzMethod tz_method = TzMethod::ClosedForm;
  CoplanarPolicy coplanar_policy = CoplanarPolicy::Auto;
};

/// Scene generation, noise and one pipeline solve. Failures are caught and
/// recorded as a "fail:<kind>" flag with ok == false.
TrialRecord run_trial(const ScenarioConfig& cfg, const PipelineOptions& opts, int trial,
                      std::uint64_t cell_index);

struct SweepConfig {
  std::vector<SceneMode> modes = {SceneMode::General};
  std::vector<int> n_points = {7, 10, 20, 30, 40, 50, 100, 250, 500, 1000};
  /// Empty means n_points with 7 replaced by 5.
  std::vector<int> n_points_coplanar;
  std::vector<double> sigmas = {0.025};
  int trials = 300;
  std::uint64_t seed = 0;
  FovSpec fov;
  PipelineOptions pipeline;
  /// 0 means SONARPNP_THREADS from the environment, else hardware concurrency.
  int threads = 0;

  std::vector<int> coplanar_grid() const;
  void validate() const;
};

struct Summary {
  double median = 0.0;
  double iqr = 0.0;
};

struct CellAggregate {
  SceneMode mode = SceneMode::General;
  int n_points = 0;
  double sigma = 0.0;
  int trials = 0;
  int failures = 0;
  Summary rot_err_deg;
  Summary txy_err_m;
  Summary tz_err_m;
  Summary gap;
  Summary time_total_ms;
};

struct SweepResult {
  std::vector<TrialRecord> records;
  std::vector<CellAggregate> cells;
};

/// Linear-interpolation quantile (the usual "type 7"). Empty input gives NaN.
double quantile(std::vector<double> v, double q);

int default_thread_count();

/// Cells ordered by mode, then point count, then sigma; records ordered by
/// (cell, trial) regardless of the thread count.
SweepResult run_sweep(const SweepConfig& cfg);

}  // namespace sonarpnp
