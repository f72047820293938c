#include "sonarpnp/sim.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <limits>
#include <thread>

#include <Eigen/Geometry>

namespace sonarpnp {

const char* to_string(SceneMode m) { return m == SceneMode::General ? "general" : "coplanar"; }

SceneMode parse_scene_mode(const std::string& s) {
  if (s == "general") return SceneMode::General;
  if (s == "coplanar") return SceneMode::Coplanar;
  throw Error(ErrorKind::InvalidInput, "mode: expected 'general' or 'coplanar', got '" + s + "'");
}

void ScenarioConfig::validate() const {
  const int min_n = mode == SceneMode::Coplanar ? 5 : 7;
  if (point_count < min_n) {
    throw Error(ErrorKind::InvalidInput, std::string("point_count: ") + to_string(mode) +
                                             " scenes need at least " + std::to_string(min_n));
  }
  if (!(noise_sigma >= 0.0)) throw Error(ErrorKind::InvalidInput, "noise_sigma: must be >= 0");
  if (trials < 1) throw Error(ErrorKind::InvalidInput, "trials: must be >= 1");
  if (!fov.valid()) throw Error(ErrorKind::InvalidInput, "fov: bounds are not ordered");
}

namespace {

double uniform(Rng& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

Point3d sample_fov_point(const FovSpec& fov, Rng& rng) {
  SphericalCoord<double> s;
  s.r = uniform(rng, fov.r_min, fov.r_max);
  s.theta = uniform(rng, fov.theta_min, fov.theta_max);
  s.phi = uniform(rng, fov.phi_min, fov.phi_max);
  return spherical_to_cartesian(s);
}

bool usable(const FovSpec& fov, const Point3d& p) {
  return p.norm() > 0.0 && in_fov(fov, p);
}

}  // namespace

PlaneSpec sample_plane(Rng& rng) {
  PlaneSpec plane;
  plane.dihedral = uniform(rng, deg2rad(5.0), deg2rad(70.0));
  // Open interval keeps both products strictly signed.
  double psi = 0.0;
  do {
    psi = uniform(rng, -M_PI / 2.0, 0.0);
  } while (psi <= -M_PI / 2.0 || psi >= 0.0);
  plane.normal = Eigen::Vector3d(std::sin(plane.dihedral) * std::cos(psi),
                                 std::sin(plane.dihedral) * std::sin(psi),
                                 std::cos(plane.dihedral));
  return plane;
}

Rotation3d random_rotation(Rng& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  Eigen::Vector4d v;
  do {
    v = Eigen::Vector4d(g(rng), g(rng), g(rng), g(rng));
  } while (v.norm() < 1e-12);
  v.normalize();
  return Eigen::Quaterniond(v[0], v[1], v[2], v[3]).toRotationMatrix();
}

Scene generate_scene(const ScenarioConfig& cfg, Rng& rng) {
  cfg.validate();
  Scene scene;
  const std::size_t n = std::size_t(cfg.point_count);
  std::vector<Point3d> sonar_points;
  sonar_points.reserve(n);

  if (cfg.mode == SceneMode::General) {
    while (sonar_points.size() < n) {
      const Point3d p = sample_fov_point(cfg.fov, rng);
      if (p.norm() > 0.0) sonar_points.push_back(p);
    }
  } else {
    const PlaneSpec plane = sample_plane(rng);
    const Eigen::Vector3d u = plane.normal.unitOrthogonal();
    const Eigen::Vector3d w = plane.normal.cross(u);
    const double radius = 2.5;
    const std::size_t budget = 100 * n;
    std::size_t draws = 0;
    while (sonar_points.size() < n) {
      if (draws++ >= budget) {
        throw Error(ErrorKind::GenerationFailure,
                    "generate_scene: coplanar rejection sampling exceeded " +
                        std::to_string(budget) + " draws");
      }
      const double rr = radius * std::sqrt(uniform(rng, 0.0, 1.0));
      const double ang = uniform(rng, 0.0, 2.0 * M_PI);
      const Point3d p = plane.anchor + rr * (std::cos(ang) * u + std::sin(ang) * w);
      if (usable(cfg.fov, p)) sonar_points.push_back(p);
    }
    scene.plane = plane;
  }

  // t_gt: the coordinates of one more FoV point, in the sonar frame.
  Posed gt;
  gt.rotation = random_rotation(rng);
  gt.translation = sample_fov_point(cfg.fov, rng);
  scene.ground_truth = gt;

  const Posed world_from_sonar = inverse(gt);
  for (const auto& ps : sonar_points) {
    scene.correspondences.push_back(transform(world_from_sonar, ps), project_arc(ps));
  }
  return scene;
}

CorrespondenceSet apply_polar_noise(const CorrespondenceSet& clean, double sigma, Rng& rng,
                                    int* clamped) {
  if (!(sigma >= 0.0)) throw Error(ErrorKind::InvalidInput, "sigma: must be >= 0");
  if (clamped) *clamped = 0;
  if (sigma == 0.0) return clean;
  std::normal_distribution<double> g(0.0, sigma);
  CorrespondenceSet out = clean;
  for (auto& m : out.measurements) {
    double r = m.norm() + g(rng);
    const double theta = std::atan2(m.x(), m.y()) + g(rng);
    if (r < 0.0) {
      r = 0.0;
      if (clamped) ++*clamped;
    }
    m = Measurement2d(r * std::sin(theta), r * std::cos(theta));
  }
  return out;
}

double rotation_error_deg(const Rotation3d& R_gt, const Rotation3d& R_est) {
  double worst = 0.0;
  for (int k = 0; k < 3; ++k) {
    const double d = R_gt.row(k).dot(R_est.row(k));
    if (std::abs(d) > 1.0 + 1e-9) {
      throw Error(ErrorKind::InvalidInput,
                  "rotation_error_deg: row dot product " + std::to_string(d) + " outside [-1, 1]");
    }
    worst = std::max(worst, std::acos(std::clamp(d, -1.0, 1.0)));
  }
  return rad2deg(worst);
}

std::pair<double, double> translation_errors(const Eigen::Vector3d& t_gt,
                                             const Eigen::Vector3d& t_est) {
  return {(t_est.head<2>() - t_gt.head<2>()).norm(), std::abs(t_est.z() - t_gt.z())};
}

namespace {

std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace

std::uint64_t trial_seed(std::uint64_t seed, std::uint64_t cell, std::uint64_t trial) {
  std::uint64_t s = seed;
  std::uint64_t h = splitmix64(s);
  s = h ^ cell;
  h = splitmix64(s);
  s = h ^ trial;
  return splitmix64(s);
}

TrialRecord run_trial(const ScenarioConfig& cfg, const PipelineOptions& opts, int trial,
                      std::uint64_t cell_index) {
  TrialRecord rec;
  rec.mode = cfg.mode;
  rec.n_points = cfg.point_count;
  rec.sigma = cfg.noise_sigma;
  rec.trial = trial;
  Rng rng(trial_seed(cfg.seed, cell_index, std::uint64_t(trial)));
  try {
    const Scene scene = generate_scene(cfg, rng);
    int clamped = 0;
    SolveRequest req;
    req.correspondences = apply_polar_noise(scene.correspondences, cfg.noise_sigma, rng, &clamped);
    req.refine = opts.refine;
    req.tz_method = opts.tz_method;
    req.coplanar_policy = opts.coplanar_policy;
    req.fov = cfg.fov;
    if (clamped > 0) rec.flags.push_back("range_clamped");
    const SolveResult res = pipeline_solve(req);
    const auto& d = res.diagnostics;
    rec.rot_err_deg = rotation_error_deg(scene.ground_truth.rotation, res.pose.rotation);
    std::tie(rec.txy_err_m, rec.tz_err_m) =
        translation_errors(scene.ground_truth.translation, res.pose.translation);
    rec.gap = d.relative_gap;
    rec.kernel_dim = d.kernel_dim;
    rec.time_total_ms = d.timings.total_ms;
    rec.time_sdp_ms = d.timings.sdp_ms;
    rec.time_tz_ms = d.timings.tz_ms;
    rec.flags.insert(rec.flags.end(), d.flags.begin(), d.flags.end());
    rec.ok = true;
  } catch (const Error& e) {
    rec.ok = false;
    rec.flags.push_back(std::string("fail:") + to_string(e.kind()));
    const double nan = std::numeric_limits<double>::quiet_NaN();
    rec.rot_err_deg = rec.txy_err_m = rec.tz_err_m = rec.gap = nan;
  }
  return rec;
}

std::vector<int> SweepConfig::coplanar_grid() const {
  if (!n_points_coplanar.empty()) return n_points_coplanar;
  std::vector<int> g = n_points;
  for (int& n : g) {
    if (n == 7) n = 5;
  }
  return g;
}

void SweepConfig::validate() const {
  if (modes.empty()) throw Error(ErrorKind::InvalidInput, "modes: grid is empty");
  if (n_points.empty()) throw Error(ErrorKind::InvalidInput, "n_points: grid is empty");
  if (sigmas.empty()) throw Error(ErrorKind::InvalidInput, "sigma: grid is empty");
  if (trials < 1) throw Error(ErrorKind::InvalidInput, "trials: must be >= 1");
  for (double s : sigmas) {
    if (!(s >= 0.0)) throw Error(ErrorKind::InvalidInput, "sigma: values must be >= 0");
  }
  for (SceneMode m : modes) {
    const int min_n = m == SceneMode::Coplanar ? 5 : 7;
    for (int n : m == SceneMode::Coplanar ? coplanar_grid() : n_points) {
      if (n < min_n) {
        throw Error(ErrorKind::InvalidInput, std::string("n_points: ") + to_string(m) +
                                                 " scenes need at least " + std::to_string(min_n));
      }
    }
  }
  if (!fov.valid()) throw Error(ErrorKind::InvalidInput, "fov: bounds are not ordered");
}

double quantile(std::vector<double> v, double q) {
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(v.begin(), v.end());
  const double h = (double(v.size()) - 1.0) * q;
  const std::size_t lo = std::size_t(std::floor(h));
  const std::size_t hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (h - double(lo)) * (v[hi] - v[lo]);
}

int default_thread_count() {
  if (const char* env = std::getenv("SONARPNP_THREADS")) {
    const int n = std::atoi(env);
    if (n > 0) return n;
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

namespace {

Summary summarize(const std::vector<TrialRecord>& recs, double TrialRecord::*field) {
  std::vector<double> v;
  for (const auto& r : recs) {
    if (r.ok) v.push_back(r.*field);
  }
  return Summary{quantile(v, 0.5), quantile(v, 0.75) - quantile(v, 0.25)};
}

}  // namespace

SweepResult run_sweep(const SweepConfig& cfg) {
  cfg.validate();
  std::vector<ScenarioConfig> cells;
  for (SceneMode mode : cfg.modes) {
    for (int n : mode == SceneMode::Coplanar ? cfg.coplanar_grid() : cfg.n_points) {
      for (double sigma : cfg.sigmas) {
        ScenarioConfig sc;
        sc.mode = mode;
        sc.point_count = n;
        sc.noise_sigma = sigma;
        sc.fov = cfg.fov;
        sc.trials = cfg.trials;
        sc.seed = cfg.seed;
        sc.validate();
        cells.push_back(sc);
      }
    }
  }

  const std::size_t per_cell = std::size_t(cfg.trials);
  const std::size_t total = cells.size() * per_cell;
  SweepResult out;
  out.records.resize(total);

  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t k = next++; k < total; k = next++) {
      const std::size_t cell = k / per_cell;
      out.records[k] = run_trial(cells[cell], cfg.pipeline, int(k % per_cell), cell);
    }
  };
  const int threads = std::max(1, cfg.threads > 0 ? cfg.threads : default_thread_count());
  std::vector<std::thread> pool;
  for (int i = 1; i < threads; ++i) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();

  for (std::size_t ci = 0; ci < cells.size(); ++ci) {
    const std::vector<TrialRecord> recs(out.records.begin() + long(ci * per_cell),
                                        out.records.begin() + long((ci + 1) * per_cell));
    CellAggregate agg;
    agg.mode = cells[ci].mode;
    agg.n_points = cells[ci].point_count;
    agg.sigma = cells[ci].noise_sigma;
    agg.trials = cfg.trials;
    agg.failures = int(std::count_if(recs.begin(), recs.end(), [](const auto& r) { return !r.ok; }));
    agg.rot_err_deg = summarize(recs, &TrialRecord::rot_err_deg);
    agg.txy_err_m = summarize(recs, &TrialRecord::txy_err_m);
    agg.tz_err_m = summarize(recs, &TrialRecord::tz_err_m);
    agg.gap = summarize(recs, &TrialRecord::gap);
    agg.time_total_ms = summarize(recs, &TrialRecord::time_total_ms);
    out.cells.push_back(agg);
  }
  return out;
}

}  // namespace sonarpnp
