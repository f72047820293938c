#include "sonarpnp/io.hpp"

#include <algorithm>
#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <ostream>
#include <sstream>
#include <tuple>

namespace sonarpnp::io {

namespace {

[[noreturn]] void bad(const std::string& field, const std::string& why) {
  throw Error(ErrorKind::InvalidInput, field + ": " + why);
}

double number_at(const json& v, const std::string& field) {
  if (!v.is_number()) bad(field, "expected a number");
  const double x = v.get<double>();
  if (!std::isfinite(x)) bad(field, "not finite");
  return x;
}

template <int N>
Eigen::Matrix<double, N, 1> vector_at(const json& v, const std::string& field) {
  if (!v.is_array() || v.size() != N) bad(field, "expected an array of " + std::to_string(N));
  Eigen::Matrix<double, N, 1> out;
  for (int k = 0; k < N; ++k) out[k] = number_at(v[k], field + "[" + std::to_string(k) + "]");
  return out;
}

json vec_json(const Eigen::VectorXd& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

json rows_json(const Eigen::Matrix3d& R) {
  json a = json::array();
  for (int r = 0; r < 3; ++r) a.push_back(vec_json(R.row(r).transpose()));
  return a;
}

json pose_json(const Posed& p) {
  return json{{"rotation_rows", rows_json(p.rotation)}, {"translation", vec_json(p.translation)}};
}

std::string read_file(const std::string& path, const std::string& what) {
  std::ifstream in(path, std::ios::binary);
  if (!in) bad(what, "cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string fmt_num(double x) {
  if (std::isnan(x)) return "nan";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.9g", x);
  return buf;
}

std::string join(const std::vector<std::string>& v, char sep) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += sep;
    out += v[i];
  }
  return out;
}

}  // namespace

Instance parse_instance(const json& doc) {
  if (!doc.is_object()) bad("instance", "top level must be an object");
  Instance inst;
  if (!doc.contains("world_points")) bad("world_points", "missing");
  if (!doc.contains("measurements")) bad("measurements", "missing");
  const json& wp = doc["world_points"];
  const json& ms = doc["measurements"];
  if (!wp.is_array()) bad("world_points", "expected an array");
  if (!ms.is_array()) bad("measurements", "expected an array");
  if (wp.size() != ms.size()) {
    bad("measurements", "has " + std::to_string(ms.size()) + " entries but world_points has " +
                            std::to_string(wp.size()));
  }
  for (std::size_t i = 0; i < wp.size(); ++i) {
    const std::string idx = "[" + std::to_string(i) + "]";
    inst.correspondences.push_back(vector_at<3>(wp[i], "world_points" + idx),
                                   vector_at<2>(ms[i], "measurements" + idx));
  }
  if (doc.contains("meta")) {
    if (!doc["meta"].is_object()) bad("meta", "expected an object");
    inst.meta = doc["meta"];
  }
  if (doc.contains("ground_truth")) {
    const json& gt = doc["ground_truth"];
    if (!gt.is_object()) bad("ground_truth", "expected an object");
    if (!gt.contains("rotation_rows")) bad("ground_truth.rotation_rows", "missing");
    if (!gt.contains("translation")) bad("ground_truth.translation", "missing");
    const json& rows = gt["rotation_rows"];
    if (!rows.is_array() || rows.size() != 3) bad("ground_truth.rotation_rows", "expected 3 rows");
    Posed p;
    for (int r = 0; r < 3; ++r) {
      p.rotation.row(r) =
          vector_at<3>(rows[r], "ground_truth.rotation_rows[" + std::to_string(r) + "]").transpose();
    }
    if (!is_rotation(p.rotation, 1e-6)) bad("ground_truth.rotation_rows", "not a rotation");
    p.translation = vector_at<3>(gt["translation"], "ground_truth.translation");
    inst.ground_truth = p;
  }
  return inst;
}

Instance read_instance(const std::string& path) {
  const std::string text = read_file(path, "input");
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    bad("input", std::string("malformed JSON: ") + e.what());
  }
  return parse_instance(doc);
}

json instance_to_json(const Instance& inst) {
  json doc;
  json wp = json::array();
  json ms = json::array();
  for (std::size_t i = 0; i < inst.correspondences.size(); ++i) {
    wp.push_back(vec_json(inst.correspondences.world_points[i]));
    ms.push_back(vec_json(inst.correspondences.measurements[i]));
  }
  doc["world_points"] = wp;
  doc["measurements"] = ms;
  doc["meta"] = inst.meta;
  if (inst.ground_truth) doc["ground_truth"] = pose_json(*inst.ground_truth);
  return doc;
}

void write_instance(const std::string& path, const Instance& inst) {
  std::ofstream out(path);
  if (!out) bad("output", "cannot write '" + path + "'");
  out << instance_to_json(inst).dump(2) << '\n';
}

json solve_to_json(const SolveResult& res, const SolveRequest& req,
                   const std::optional<ErrorMetrics>& errors) {
  const SolveDiagnostics& d = res.diagnostics;
  json diag;
  diag["path"] = to_string(d.path);
  diag["kernel_dim"] = d.kernel_dim;
  diag["z_eigenvalues"] = vec_json(d.z_eigenvalues);
  diag["dual_value"] = d.dual_value;
  diag["duality_gap"] = d.duality_gap;
  diag["relative_gap"] = d.relative_gap;
  diag["certified"] = d.certified;
  diag["sdp_status"] = d.sdp_status;
  diag["sdp_iterations"] = d.sdp_iterations;

  json alphas = json::array();
  for (const auto& a : d.alpha_candidates) {
    alphas.push_back({{"alpha1", a.alpha1}, {"alpha2", a.alpha2}, {"objective", a.objective}});
  }
  diag["alpha_candidates"] = alphas;
  json mirrors = json::array();
  for (const auto& m : d.mirror_alternatives) {
    mirrors.push_back({{"pose", pose_json(m.pose)},
                       {"band_count", m.band_count},
                       {"in_front", m.in_front},
                       {"orientation_score", m.orientation_score},
                       {"orientation_margin", m.orientation_margin}});
  }
  diag["mirror_alternatives"] = mirrors;
  diag["mirror_tie"] = d.mirror_tie;

  json stationary = json::array();
  for (const auto& s : d.tz.stationary) {
    stationary.push_back({{"t", s.t}, {"value", s.value}, {"curvature", s.curvature}});
  }
  diag["tz"] = {{"t_z", d.tz.t_z},
                {"value", d.tz.value},
                {"stationary", stationary},
                {"tie", d.tz.tie},
                {"tied_minimizers", d.tz.tied_minimizers}};
  if (d.tz_optimized) {
    diag["tz_optimized"] = {{"t_z", d.tz_optimized->t_z},
                            {"cost", d.tz_optimized->cost},
                            {"evaluations", d.tz_optimized->evaluations}};
  }
  if (d.refinement) {
    const auto& r = *d.refinement;
    diag["refinement"] = {{"iterations", r.iterations},
                          {"converged", r.converged},
                          {"not_improved", r.not_improved},
                          {"started_infeasible", r.started_infeasible},
                          {"fell_back_to_penalty", r.fell_back_to_penalty},
                          {"penalty_ramps", r.penalty_ramps},
                          {"band_violations", r.band_violations},
                          {"initial_cost", r.initial_cost},
                          {"final_cost", r.final_cost},
                          {"accepted_steps", r.accepted.size()}};
  }
  diag["refinement_rejected"] = d.refinement_rejected;
  if (!d.refinement_error.empty()) diag["refinement_error"] = d.refinement_error;
  diag["reprojection_before"] = d.reprojection_before;
  diag["reprojection_after"] = d.reprojection_after;
  diag["timings_ms"] = {{"ptl", d.timings.ptl_ms},         {"sdp", d.timings.sdp_ms},
                        {"recovery", d.timings.recovery_ms}, {"tz", d.timings.tz_ms},
                        {"refine", d.timings.refine_ms},   {"total", d.timings.total_ms}};
  diag["flags"] = d.flags;

  json doc;
  doc["pose"] = pose_json(res.pose);
  doc["pose_before_refinement"] = pose_json(res.pose_before_refinement);
  doc["request"] = {{"refine", req.refine},
                    {"tz", to_string(req.tz_method)},
                    {"coplanar", to_string(req.coplanar_policy)},
                    {"n_points", req.correspondences.size()}};
  doc["diagnostics"] = diag;
  if (errors) {
    doc["errors"] = {{"rot_err_deg", errors->rot_err_deg},
                     {"txy_err_m", errors->txy_err_m},
                     {"tz_err_m", errors->tz_err_m}};
  }
  return doc;
}

std::string solve_to_csv(const SolveResult& res, const std::optional<ErrorMetrics>& errors) {
  const auto& d = res.diagnostics;
  const auto& R = res.pose.rotation;
  const auto& t = res.pose.translation;
  std::string head =
      "r11,r12,r13,r21,r22,r23,r31,r32,r33,tx,ty,tz,path,kernel_dim,duality_gap,relative_gap,"
      "certified,time_ptl_ms,time_sdp_ms,time_recovery_ms,time_tz_ms,time_refine_ms,"
      "time_total_ms";
  std::vector<std::string> row;
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) row.push_back(fmt_num(R(r, c)));
  }
  for (int k = 0; k < 3; ++k) row.push_back(fmt_num(t[k]));
  row.push_back(to_string(d.path));
  row.push_back(std::to_string(d.kernel_dim));
  row.push_back(fmt_num(d.duality_gap));
  row.push_back(fmt_num(d.relative_gap));
  row.push_back(d.certified ? "1" : "0");
  for (double v : {d.timings.ptl_ms, d.timings.sdp_ms, d.timings.recovery_ms, d.timings.tz_ms,
                   d.timings.refine_ms, d.timings.total_ms}) {
    row.push_back(fmt_num(v));
  }
  if (errors) {
    head += ",rot_err_deg,txy_err_m,tz_err_m";
    row.push_back(fmt_num(errors->rot_err_deg));
    row.push_back(fmt_num(errors->txy_err_m));
    row.push_back(fmt_num(errors->tz_err_m));
  }
  head += ",flags";
  row.push_back(join(d.flags, ';'));
  return head + "\n" + join(row, ',') + "\n";
}

// ---------------------------------------------------------------------------
// Sweep configuration

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::string strip_comment(const std::string& line) {
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    if (line[i] == '"') quoted = !quoted;
    if (line[i] == '#' && !quoted) return line.substr(0, i);
  }
  return line;
}

std::vector<std::string> scalars(const std::string& key, const std::string& raw) {
  std::string v = trim(raw);
  if (v.empty()) bad(key, "missing value");
  if (v.front() != '[') return {v};
  if (v.back() != ']') bad(key, "unterminated array");
  std::vector<std::string> out;
  std::stringstream ss(v.substr(1, v.size() - 2));
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  if (out.empty()) bad(key, "empty array");
  return out;
}

double to_double(const std::string& key, const std::string& s) {
  errno = 0;
  char* end = nullptr;
  const double x = std::strtod(s.c_str(), &end);
  if (end == s.c_str() || *end != '\0' || errno == ERANGE || !std::isfinite(x)) {
    bad(key, "expected a number, got '" + s + "'");
  }
  return x;
}

long long to_int(const std::string& key, const std::string& s) {
  const double x = to_double(key, s);
  if (x != std::floor(x)) bad(key, "expected an integer, got '" + s + "'");
  return static_cast<long long>(x);
}

std::string to_str(const std::string& key, const std::string& s) {
  if (s.size() < 2 || s.front() != '"' || s.back() != '"') {
    bad(key, "expected a quoted string, got '" + s + "'");
  }
  return s.substr(1, s.size() - 2);
}

bool to_bool(const std::string& key, const std::string& s) {
  if (s == "true") return true;
  if (s == "false") return false;
  bad(key, "expected true or false, got '" + s + "'");
}

std::pair<double, double> range_pair(const std::string& key, const std::vector<std::string>& v) {
  if (v.size() != 2) bad(key, "expected [min, max]");
  return {to_double(key, v[0]), to_double(key, v[1])};
}

}  // namespace

SweepConfig parse_sweep_config(const std::string& text) {
  SweepConfig cfg;
  std::stringstream ss(text);
  std::string line;
  int lineno = 0;
  while (std::getline(ss, line)) {
    ++lineno;
    line = trim(strip_comment(line));
    if (line.empty() || line.front() == '[') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      bad("config line " + std::to_string(lineno), "expected 'key = value'");
    }
    const std::string key = trim(line.substr(0, eq));
    const std::vector<std::string> vals = scalars(key, line.substr(eq + 1));
    if (key == "mode" || key == "modes") {
      cfg.modes.clear();
      for (const auto& v : vals) cfg.modes.push_back(parse_scene_mode(to_str(key, v)));
    } else if (key == "n_points" || key == "n_points_coplanar") {
      auto& dst = key == "n_points" ? cfg.n_points : cfg.n_points_coplanar;
      dst.clear();
      for (const auto& v : vals) dst.push_back(int(to_int(key, v)));
    } else if (key == "sigma" || key == "sigmas") {
      cfg.sigmas.clear();
      for (const auto& v : vals) cfg.sigmas.push_back(to_double(key, v));
    } else if (key == "trials") {
      cfg.trials = int(to_int(key, vals.at(0)));
    } else if (key == "seed") {
      cfg.seed = std::uint64_t(to_int(key, vals.at(0)));
    } else if (key == "threads") {
      cfg.threads = int(to_int(key, vals.at(0)));
    } else if (key == "refine") {
      cfg.pipeline.refine = to_bool(key, vals.at(0));
    } else if (key == "tz") {
      const std::string m = to_str(key, vals.at(0));
      if (m == "closed") cfg.pipeline.tz_method = TzMethod::ClosedForm;
      else if (m == "opt") cfg.pipeline.tz_method = TzMethod::Optimize;
      else bad(key, "expected \"closed\" or \"opt\"");
    } else if (key == "coplanar") {
      const std::string m = to_str(key, vals.at(0));
      if (m == "auto") cfg.pipeline.coplanar_policy = CoplanarPolicy::Auto;
      else if (m == "general") cfg.pipeline.coplanar_policy = CoplanarPolicy::ForceGeneral;
      else if (m == "coplanar") cfg.pipeline.coplanar_policy = CoplanarPolicy::ForceCoplanar;
      else bad(key, "expected \"auto\", \"general\" or \"coplanar\"");
    } else if (key == "fov_r") {
      std::tie(cfg.fov.r_min, cfg.fov.r_max) = range_pair(key, vals);
    } else if (key == "fov_theta_deg") {
      const auto [lo, hi] = range_pair(key, vals);
      cfg.fov.theta_min = deg2rad(lo);
      cfg.fov.theta_max = deg2rad(hi);
    } else if (key == "fov_phi_deg") {
      const auto [lo, hi] = range_pair(key, vals);
      cfg.fov.phi_min = deg2rad(lo);
      cfg.fov.phi_max = deg2rad(hi);
    } else {
      bad(key, "unknown configuration key");
    }
  }
  cfg.validate();
  return cfg;
}

SweepConfig load_sweep_config(const std::string& path) {
  return parse_sweep_config(read_file(path, "config"));
}

// ---------------------------------------------------------------------------
// Sweep output

void write_sweep_csv(std::ostream& os, const SweepResult& res, bool with_timing) {
  os << kSweepCsvHeader << '\n';
  for (const auto& r : res.records) {
    os << to_string(r.mode) << ',' << r.n_points << ',' << fmt_num(r.sigma) << ',' << r.trial << ','
       << fmt_num(r.rot_err_deg) << ',' << fmt_num(r.txy_err_m) << ',' << fmt_num(r.tz_err_m)
       << ',' << fmt_num(r.gap) << ',' << r.kernel_dim << ','
       << fmt_num(with_timing ? r.time_total_ms : 0.0) << ','
       << fmt_num(with_timing ? r.time_sdp_ms : 0.0) << ','
       << fmt_num(with_timing ? r.time_tz_ms : 0.0) << ',' << join(r.flags, ';') << '\n';
  }
}

namespace {

json summary_json(const Summary& s) {
  return {{"median", std::isnan(s.median) ? json(nullptr) : json(s.median)},
          {"iqr", std::isnan(s.iqr) ? json(nullptr) : json(s.iqr)}};
}

}  // namespace

json sweep_aggregate_json(const SweepResult& res, const SweepConfig& cfg, bool with_timing) {
  json cells = json::array();
  for (const auto& c : res.cells) {
    json cell = {{"mode", to_string(c.mode)},     {"n_points", c.n_points},
                 {"sigma", c.sigma},              {"trials", c.trials},
                 {"failures", c.failures},        {"rot_err_deg", summary_json(c.rot_err_deg)},
                 {"txy_err_m", summary_json(c.txy_err_m)}, {"tz_err_m", summary_json(c.tz_err_m)},
                 {"gap", summary_json(c.gap)}};
    if (with_timing) cell["time_total_ms"] = summary_json(c.time_total_ms);
    cells.push_back(cell);
  }
  json modes = json::array();
  for (SceneMode m : cfg.modes) modes.push_back(to_string(m));
  return {{"seed", cfg.seed},
          {"trials", cfg.trials},
          {"modes", modes},
          {"refine", cfg.pipeline.refine},
          {"tz", to_string(cfg.pipeline.tz_method)},
          {"ground_truth_translation", "FoV point drawn in the sonar frame"},
          {"cells", cells}};
}

std::string sweep_svg(const SweepResult& res, SceneMode mode, const std::string& metric) {
  const auto pick = [&](const CellAggregate& c) -> const Summary& {
    if (metric == "rot_err_deg") return c.rot_err_deg;
    if (metric == "txy_err_m") return c.txy_err_m;
    if (metric == "tz_err_m") return c.tz_err_m;
    bad("metric", "unknown metric '" + metric + "'");
  };
  std::vector<const CellAggregate*> cells;
  for (const auto& c : res.cells) {
    if (c.mode == mode) cells.push_back(&c);
  }
  std::map<int, int> n_seen;
  for (const auto* c : cells) n_seen[c->n_points]++;
  const bool x_is_n = n_seen.size() > 1;

  // series key -> (x, median, q1, q3)
  struct Pt {
    double x, med, lo, hi;
  };
  std::map<double, std::vector<Pt>> series;
  for (const auto* c : cells) {
    const Summary& s = pick(*c);
    if (std::isnan(s.median)) continue;
    const double x = x_is_n ? std::log10(double(c->n_points)) : c->sigma;
    const double key = x_is_n ? c->sigma : double(c->n_points);
    series[key].push_back({x, s.median, s.median - 0.5 * s.iqr, s.median + 0.5 * s.iqr});
  }

  const double W = 640, H = 400, L = 70, R = 20, T = 30, B = 50;
  double xmin = 1e300, xmax = -1e300, ymin = 0.0, ymax = -1e300;
  for (auto& [k, pts] : series) {
    std::sort(pts.begin(), pts.end(), [](const Pt& a, const Pt& b) { return a.x < b.x; });
    for (const auto& p : pts) {
      xmin = std::min(xmin, p.x);
      xmax = std::max(xmax, p.x);
      ymax = std::max(ymax, p.hi);
    }
  }
  if (series.empty()) {
    xmin = 0;
    xmax = 1;
    ymax = 1;
  }
  if (xmax <= xmin) xmax = xmin + 1.0;
  if (ymax <= ymin) ymax = ymin + 1.0;
  const auto sx = [&](double x) { return L + (x - xmin) / (xmax - xmin) * (W - L - R); };
  const auto sy = [&](double y) { return H - B - (y - ymin) / (ymax - ymin) * (H - T - B); };

  static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"};
  std::ostringstream o;
  o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\">\n";
  o << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  o << "<text x=\"" << L << "\" y=\"20\" font-size=\"14\">" << to_string(mode) << " " << metric
    << " (median, IQR band)</text>\n";
  o << "<line x1=\"" << L << "\" y1=\"" << H - B << "\" x2=\"" << W - R << "\" y2=\"" << H - B
    << "\" stroke=\"black\"/>\n";
  o << "<line x1=\"" << L << "\" y1=\"" << T << "\" x2=\"" << L << "\" y2=\"" << H - B
    << "\" stroke=\"black\"/>\n";
  o << "<text x=\"" << (W / 2) << "\" y=\"" << H - 10 << "\" font-size=\"12\">"
    << (x_is_n ? "log10(N)" : "sigma") << "</text>\n";
  for (int k = 0; k <= 4; ++k) {
    const double y = ymin + (ymax - ymin) * k / 4.0;
    o << "<text x=\"5\" y=\"" << sy(y) + 4 << "\" font-size=\"10\">" << fmt_num(y) << "</text>\n";
    const double x = xmin + (xmax - xmin) * k / 4.0;
    o << "<text x=\"" << sx(x) - 10 << "\" y=\"" << H - B + 15 << "\" font-size=\"10\">"
      << fmt_num(x) << "</text>\n";
  }
  int ci = 0;
  for (const auto& [key, pts] : series) {
    const char* col = colors[ci++ % 6];
    o << "<polygon fill=\"" << col << "\" fill-opacity=\"0.2\" stroke=\"none\" points=\"";
    for (const auto& p : pts) o << sx(p.x) << ',' << sy(p.hi) << ' ';
    for (auto it = pts.rbegin(); it != pts.rend(); ++it) o << sx(it->x) << ',' << sy(it->lo) << ' ';
    o << "\"/>\n<polyline fill=\"none\" stroke=\"" << col << "\" stroke-width=\"2\" points=\"";
    for (const auto& p : pts) o << sx(p.x) << ',' << sy(p.med) << ' ';
    o << "\"/>\n";
    o << "<text x=\"" << W - R - 110 << "\" y=\"" << T + 15 * ci << "\" font-size=\"11\" fill=\""
      << col << "\">" << (x_is_n ? "sigma=" : "N=") << fmt_num(key) << "</text>\n";
  }
  o << "</svg>\n";
  return o.str();
}

}  // namespace sonarpnp::io
