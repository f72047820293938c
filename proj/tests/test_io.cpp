#include <doctest.h>

#include <sstream>

#include "sonarpnp/io.hpp"
#include "support.hpp"

using namespace sonarpnp;
using sonarpnp::io::json;

namespace {

std::string error_text(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::InvalidInput);
    return e.what();
  }
  FAIL("expected InvalidInput");
  return {};
}

}  // namespace

TEST_CASE("instance round trip is exact") {
  const auto f = testing::scene(SceneMode::General, 12, 8);
  io::Instance inst;
  inst.correspondences = f.c;
  inst.ground_truth = f.gt;
  inst.meta = {{"seed", 8}};
  const io::Instance back = io::parse_instance(json::parse(io::instance_to_json(inst).dump()));
  REQUIRE(back.correspondences.size() == 12);
  for (std::size_t i = 0; i < 12; ++i) {
    CHECK(back.correspondences.world_points[i] == f.c.world_points[i]);
    CHECK(back.correspondences.measurements[i] == f.c.measurements[i]);
  }
  REQUIRE(back.ground_truth);
  CHECK(back.ground_truth->rotation == f.gt.rotation);
  CHECK(back.ground_truth->translation == f.gt.translation);
  CHECK(back.meta["seed"] == 8);
}

TEST_CASE("instance errors name the field") {
  CHECK(error_text([] { io::parse_instance(json::array()); }).find("instance") == 0);
  CHECK(error_text([] { io::parse_instance(json{{"measurements", json::array()}}); })
            .find("world_points") == 0);
  CHECK(error_text([] {
          io::parse_instance(json{{"world_points", {{1, 2}}}, {"measurements", {{1, 2}}}});
        }) == "world_points[0]: expected an array of 3");
  CHECK(error_text([] {
          io::parse_instance(json{{"world_points", {{1, 2, 3}}}, {"measurements", {{1, "x"}}}});
        }).find("measurements[0][1]") == 0);
  CHECK(error_text([] {
          io::parse_instance(json{{"world_points", {{1, 2, 3}}}, {"measurements", json::array()}});
        }).find("measurements") == 0);
  CHECK(error_text([] {
          io::parse_instance(json{{"world_points", {{1, 2, 3}}},
                                  {"measurements", {{1, 2}}},
                                  {"ground_truth",
                                   {{"rotation_rows", {{2, 0, 0}, {0, 1, 0}, {0, 0, 1}}},
                                    {"translation", {0, 0, 0}}}}});
        }).find("ground_truth.rotation_rows") == 0);
  CHECK(error_text([] { io::read_instance("/nonexistent/file.json"); }).find("input") == 0);
}

TEST_CASE("sweep configuration parsing") {
  const SweepConfig cfg = io::parse_sweep_config(R"(
# baseline
[sweep]
modes = ["general", "coplanar"]
n_points = [10, 20]   # grid
sigma = [0.0, 0.025]
trials = 5
seed = 42
refine = true
tz = "opt"
fov_theta_deg = [-20, 20]
)");
  CHECK(cfg.modes.size() == 2);
  CHECK(cfg.modes[1] == SceneMode::Coplanar);
  CHECK(cfg.n_points == std::vector<int>{10, 20});
  CHECK(cfg.sigmas == std::vector<double>{0.0, 0.025});
  CHECK(cfg.trials == 5);
  CHECK(cfg.seed == 42);
  CHECK(cfg.pipeline.refine);
  CHECK(cfg.pipeline.tz_method == TzMethod::Optimize);
  CHECK(cfg.fov.theta_max == doctest::Approx(deg2rad(20.0)));

  CHECK(error_text([] { io::parse_sweep_config("colour = 3\n"); }).find("colour") == 0);
  CHECK(error_text([] { io::parse_sweep_config("trials\n"); }).find("config line 1") == 0);
  CHECK(error_text([] { io::parse_sweep_config("tz = \"fast\"\n"); }).find("tz") == 0);
  CHECK_THROWS_AS(io::parse_sweep_config("trials = 0\n"), Error);
}

TEST_CASE("sweep CSV layout") {
  SweepConfig cfg;
  cfg.n_points = {8};
  cfg.trials = 3;
  cfg.seed = 2;
  cfg.threads = 1;
  const SweepResult res = run_sweep(cfg);
  std::ostringstream os;
  io::write_sweep_csv(os, res, false);
  std::istringstream is(os.str());
  std::string line;
  std::getline(is, line);
  CHECK(line == io::kSweepCsvHeader);
  int rows = 0;
  while (std::getline(is, line)) {
    ++rows;
    CHECK(line.rfind("general,8,", 0) == 0);
  }
  CHECK(rows == 3);

  const json agg = io::sweep_aggregate_json(res, cfg, false);
  CHECK(agg.dump() == io::sweep_aggregate_json(run_sweep(cfg), cfg, false).dump());
  const std::string svg = io::sweep_svg(res, SceneMode::General, "rot_err_deg");
  CHECK(svg.find("<svg") != std::string::npos);
}

TEST_CASE("solve report carries the pose and diagnostics") {
  const auto f = testing::scene(SceneMode::General, 15, 31);
  SolveRequest req;
  req.correspondences = f.c;
  const SolveResult res = pipeline_solve(req);
  const json j = io::solve_to_json(res, req, io::ErrorMetrics{0.1, 0.2, 0.3});
  CHECK(j.dump().find("kernel_dim") != std::string::npos);
  const std::string csv = io::solve_to_csv(res, std::nullopt);
  CHECK(csv.rfind("r11,", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 2);
}
