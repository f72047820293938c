// sonarpnp: solve single instances, run seeded sweeps, generate scenes.
//
// Exit codes: 0 success, 1 input error, 2 solver failure.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "sonarpnp/io.hpp"
#include "sonarpnp/pipeline.hpp"
#include "sonarpnp/sim.hpp"

namespace fs = std::filesystem;
using namespace sonarpnp;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInput = 1;
constexpr int kExitSolver = 2;

int exit_code_for(ErrorKind k) {
  switch (k) {
    case ErrorKind::InvalidInput:
    case ErrorKind::DegenerateInput:
    case ErrorKind::GenerationFailure:
      return kExitInput;
    default:
      return kExitSolver;
  }
}

void emit(const std::string& text, const std::string& path) {
  if (path.empty()) {
    std::cout << text;
    return;
  }
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::InvalidInput, "output: cannot write '" + path + "'");
  out << text;
}

struct SolveArgs {
  std::string input;
  bool refine = false;
  std::string tz = "closed";
  std::string coplanar = "auto";
  std::string output;
  std::string format = "json";
};

int run_solve(const SolveArgs& a) {
  const io::Instance inst = io::read_instance(a.input);
  SolveRequest req;
  req.correspondences = inst.correspondences;
  req.refine = a.refine;
  req.tz_method = a.tz == "opt" ? TzMethod::Optimize : TzMethod::ClosedForm;
  req.coplanar_policy = a.coplanar == "general"    ? CoplanarPolicy::ForceGeneral
                        : a.coplanar == "coplanar" ? CoplanarPolicy::ForceCoplanar
                                                   : CoplanarPolicy::Auto;
  spdlog::info("solving {} correspondences from {}", req.correspondences.size(), a.input);
  const SolveResult res = pipeline_solve(req);
  const auto& d = res.diagnostics;
  spdlog::info("path {} kernel_dim {} gap {:.3e} (relative {:.3e}) certified {}", to_string(d.path),
               d.kernel_dim, d.duality_gap, d.relative_gap, d.certified);
  spdlog::debug("timings ms: sdp {:.2f} tz {:.2f} refine {:.2f} total {:.2f}", d.timings.sdp_ms,
                d.timings.tz_ms, d.timings.refine_ms, d.timings.total_ms);
  for (const auto& f : d.flags) spdlog::warn("flag: {}", f);

  std::optional<io::ErrorMetrics> errors;
  if (inst.ground_truth) {
    io::ErrorMetrics e;
    e.rot_err_deg = rotation_error_deg(inst.ground_truth->rotation, res.pose.rotation);
    std::tie(e.txy_err_m, e.tz_err_m) =
        translation_errors(inst.ground_truth->translation, res.pose.translation);
    errors = e;
  }
  if (a.format == "csv") {
    emit(io::solve_to_csv(res, errors), a.output);
  } else {
    emit(io::solve_to_json(res, req, errors).dump(2) + "\n", a.output);
  }
  return kExitOk;
}

struct SweepArgs {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<int> trials;
  std::optional<int> threads;
  std::string out_dir = ".";
  bool plots = false;
  bool timing = false;
};

int run_sweep_cmd(const SweepArgs& a) {
  SweepConfig cfg = io::load_sweep_config(a.config);
  if (a.seed) cfg.seed = *a.seed;
  if (a.trials) cfg.trials = *a.trials;
  if (a.threads) cfg.threads = *a.threads;
  cfg.validate();
  fs::create_directories(a.out_dir);
  spdlog::info("sweep: seed {} trials {} threads {}", cfg.seed, cfg.trials,
               cfg.threads > 0 ? cfg.threads : default_thread_count());

  const SweepResult res = run_sweep(cfg);
  {
    std::ofstream csv(fs::path(a.out_dir) / "sweep.csv");
    if (!csv) throw Error(ErrorKind::InvalidInput, "out-dir: cannot write sweep.csv");
    io::write_sweep_csv(csv, res, a.timing);
  }
  emit(io::sweep_aggregate_json(res, cfg, a.timing).dump(2) + "\n",
       (fs::path(a.out_dir) / "aggregate.json").string());
  if (a.plots) {
    for (SceneMode m : cfg.modes) {
      for (const char* metric : {"rot_err_deg", "txy_err_m", "tz_err_m"}) {
        const fs::path p =
            fs::path(a.out_dir) / (std::string(to_string(m)) + "_" + metric + ".svg");
        emit(io::sweep_svg(res, m, metric), p.string());
      }
    }
  }
  int failures = 0;
  for (const auto& c : res.cells) {
    failures += c.failures;
    spdlog::info("{} N={} sigma={}: median rot {:.4f} deg, txy {:.4f} m, tz {:.4f} m, {} failed",
                 to_string(c.mode), c.n_points, c.sigma, c.rot_err_deg.median, c.txy_err_m.median,
                 c.tz_err_m.median, c.failures);
  }
  spdlog::info("wrote {} records to {}", res.records.size(), a.out_dir);
  return kExitOk;
}

struct GenArgs {
  std::string mode = "general";
  int n = 20;
  double sigma = 0.0;
  std::uint64_t seed = 0;
  std::string output;
};

int run_gen(const GenArgs& a) {
  ScenarioConfig sc;
  sc.mode = parse_scene_mode(a.mode);
  sc.point_count = a.n;
  sc.noise_sigma = a.sigma;
  sc.seed = a.seed;
  Rng rng(trial_seed(a.seed, 0, 0));
  const Scene scene = generate_scene(sc, rng);
  io::Instance inst;
  int clamped = 0;
  inst.correspondences = apply_polar_noise(scene.correspondences, a.sigma, rng, &clamped);
  inst.ground_truth = scene.ground_truth;
  inst.meta = {{"mode", a.mode},
               {"n_points", a.n},
               {"sigma", a.sigma},
               {"seed", a.seed},
               {"projection", "arc"},
               {"ground_truth_translation", "FoV point drawn in the sonar frame"},
               {"clamped_ranges", clamped}};
  if (scene.plane) {
    const auto& n = scene.plane->normal;
    inst.meta["plane_normal_sonar"] = {n.x(), n.y(), n.z()};
    inst.meta["plane_dihedral_deg"] = rad2deg(scene.plane->dihedral);
  }
  emit(io::instance_to_json(inst).dump(2) + "\n", a.output);
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  auto logger = spdlog::stderr_color_mt("sonarpnp");
  spdlog::set_default_logger(logger);
  spdlog::set_pattern("[%l] %v");

  CLI::App app{"Pose estimation for 2D forward-looking sonar"};
  app.require_subcommand(1);
  std::string log_level = "error";
  app.add_option("--log", log_level, "Log level")
      ->check(CLI::IsMember({"error", "info", "debug"}));

  SolveArgs solve;
  auto* s = app.add_subcommand("solve", "Estimate the pose of one instance file");
  s->add_option("--input", solve.input, "Instance JSON")->required();
  s->add_flag("--refine", solve.refine, "Refine on the exact reprojection error");
  s->add_option("--tz", solve.tz, "t_z method")->check(CLI::IsMember({"closed", "opt"}));
  s->add_option("--coplanar", solve.coplanar, "Kernel branch policy")
      ->check(CLI::IsMember({"auto", "general", "coplanar"}));
  s->add_option("--output", solve.output, "Write the report here instead of stdout");
  s->add_option("--format", solve.format, "Report format")->check(CLI::IsMember({"json", "csv"}));

  SweepArgs sweep;
  auto* w = app.add_subcommand("sweep", "Run a seeded Monte-Carlo sweep");
  w->add_option("--config", sweep.config, "Sweep configuration file")->required();
  w->add_option("--seed", sweep.seed, "Override the configured seed");
  w->add_option("--trials", sweep.trials, "Override the configured trial count")
      ->check(CLI::PositiveNumber);
  w->add_option("--threads", sweep.threads, "Worker threads (default SONARPNP_THREADS or cores)")
      ->check(CLI::PositiveNumber);
  w->add_option("--out-dir", sweep.out_dir, "Directory for sweep.csv, aggregate.json and plots");
  w->add_flag("--plots", sweep.plots, "Write SVG summary plots");
  w->add_flag("--timing", sweep.timing, "Record wall-clock timings (output is then not reproducible)");

  GenArgs gen;
  auto* g = app.add_subcommand("gen", "Write a synthetic instance file");
  g->add_option("--mode", gen.mode, "Scene type")->check(CLI::IsMember({"general", "coplanar"}));
  g->add_option("--n", gen.n, "Point count");
  g->add_option("--sigma", gen.sigma, "Polar noise level (m and rad)")->check(CLI::NonNegativeNumber);
  g->add_option("--seed", gen.seed, "Seed");
  g->add_option("--output", gen.output, "Write here instead of stdout");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitInput;
  }
  spdlog::set_level(spdlog::level::from_str(log_level));

  try {
    if (*s) return run_solve(solve);
    if (*w) return run_sweep_cmd(sweep);
    if (*g) return run_gen(gen);
  } catch (const Error& e) {
    spdlog::error("{}", e.what());
    return exit_code_for(e.kind());
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return kExitSolver;
  }
  return kExitInput;
}
