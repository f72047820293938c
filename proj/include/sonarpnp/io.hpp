#pragma once

// File formats: JSON instances and solve reports, the key-value sweep
// configuration, sweep CSV, aggregate JSON and SVG summary plots.

#include <iosfwd>
#include <optional>
#include <string>

#include <json.hpp>

#include "sonarpnp/correspondences.hpp"
#include "sonarpnp/pipeline.hpp"
#include "sonarpnp/sim.hpp"

namespace sonarpnp::io {

using nlohmann::json;

struct Instance {
  CorrespondenceSet correspondences;
  json meta = json::object();
  std::optional<Posed> ground_truth;
};

/// Throws InvalidInput naming the offending field.
Instance parse_instance(const json& doc);
Instance read_instance(const std::string& path);
json instance_to_json(const Instance& inst);
void write_instance(const std::string& path, const Instance& inst);

struct ErrorMetrics {
  double rot_err_deg = 0.0;
  double txy_err_m = 0.0;
  double tz_err_m = 0.0;
};

json solve_to_json(const SolveResult& res, const SolveRequest& req,
                   const std::optional<ErrorMetrics>& errors);
/// Header line plus one row.
std::string solve_to_csv(const SolveResult& res, const std::optional<ErrorMetrics>& errors);

/// Flat "key = value" lines with '#' comments, optional [section] headers
/// (ignored), numbers, booleans, quoted strings and one-line arrays.
SweepConfig parse_sweep_config(const std::string& text);
SweepConfig load_sweep_config(const std::string& path);

inline constexpr const char* kSweepCsvHeader =
    "mode,n_points,sigma,trial,rot_err_deg,txy_err_m,tz_err_m,gap,kernel_dim,time_total_ms,"
    "time_sdp_ms,time_tz_ms,flags";

/// Timing columns are written as 0 unless `with_timing`, which keeps reruns
/// byte-identical by default.
void write_sweep_csv(std::ostream& os, const SweepResult& res, bool with_timing);
json sweep_aggregate_json(const SweepResult& res, const SweepConfig& cfg, bool with_timing);

/// Median with IQR band against point count (one series per sigma), or
/// against sigma when the point grid has a single entry.
std::string sweep_svg(const SweepResult& res, SceneMode mode, const std::string& metric);

}  // namespace sonarpnp::io
