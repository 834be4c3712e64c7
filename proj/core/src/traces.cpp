#include "grpoctrl/traces.hpp"

#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "grpoctrl/errors.hpp"

namespace grpoctrl {
namespace {

std::string g9(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

double to_double(const std::string& cell) {
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
  if (ec != std::errc() || ptr != cell.data() + cell.size())
    throw Error(ErrorCode::kInvalidArgument, "bad number in trace: '" + cell + "'");
  return v;
}

void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path);
  out << text;
}

}  // namespace

std::vector<std::string> trace_columns(const SystemSpec& spec) {
  switch (spec.kind) {
    case SystemKind::kDoubleIntegrator:
    case SystemKind::kVanDerPol: return {"t", "x", "x_dot", "u"};
    case SystemKind::kOrbitRaising: return {"t", "r", "u", "v", "phi"};
    case SystemKind::kDetumbling:
      return {"t", "omega_1", "omega_2", "omega_3", "u_1", "u_2", "u_3"};
  }
  return {};
}

std::string trace_csv(const SystemSpec& spec, const Trajectory& traj) {
  std::string out;
  const auto cols = trace_columns(spec);
  for (std::size_t i = 0; i < cols.size(); ++i) out += (i ? "," : "") + cols[i];
  out += '\n';
  for (std::size_t t = 0; t < traj.states.size(); ++t) {
    out += g9(traj.times[t]);
    for (Eigen::Index i = 0; i < traj.states[t].size(); ++i) out += "," + g9(traj.states[t][i]);
    for (int i = 0; i < spec.control_dim; ++i) {
      out += ',';
      if (t < traj.controls.size()) out += g9(traj.controls[t][i]);
    }
    out += '\n';
  }
  return out;
}

void write_trace_csv(const std::string& path, const SystemSpec& spec, const Trajectory& traj) {
  write_file(path, trace_csv(spec, traj));
}

Trajectory parse_trace_csv(const SystemSpec& spec, const std::string& text) {
  std::istringstream in(text);
  std::string line;
  const auto cols = trace_columns(spec);
  if (!std::getline(in, line) || split(line) != cols)
    throw Error(ErrorCode::kInvalidArgument, "trace header does not match the system");
  Trajectory traj;
  std::vector<std::vector<std::string>> rows;
  while (std::getline(in, line))
    if (!line.empty()) rows.push_back(split(line));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const auto& cells = rows[r];
    if (cells.size() != cols.size())
      throw Error(ErrorCode::kInvalidArgument, "trace row has the wrong number of cells");
    traj.times.push_back(to_double(cells[0]));
    State s(spec.state_dim);
    for (int i = 0; i < spec.state_dim; ++i) s[i] = to_double(cells[1 + i]);
    traj.states.push_back(std::move(s));
    if (r + 1 < rows.size()) {
      Control c(spec.control_dim);
      for (int i = 0; i < spec.control_dim; ++i) c[i] = to_double(cells[1 + spec.state_dim + i]);
      traj.controls.push_back(std::move(c));
    }
  }
  traj.target = target_state(spec);
  if (!traj.controls.empty()) assign_costs(traj, CostWeights::defaults(spec));
  return traj;
}

Trajectory read_trace_csv(const std::string& path, const SystemSpec& spec) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_trace_csv(spec, ss.str());
}

std::vector<std::string> export_traces(const std::string& dir, const SystemSpec& spec,
                                       const EvalResult& result) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  std::vector<std::string> paths;
  std::string summary = "episode";
  for (int i = 0; i < spec.state_dim; ++i) summary += ",s0_" + std::to_string(i + 1);
  summary += ",status,clip_events,used_fallback,final_error,cost,effort,violation_rate,"
             "convergence_quality,reward\n";
  for (std::size_t e = 0; e < result.episodes.size(); ++e) {
    const Episode& ep = result.episodes[e];
    char name[32];
    std::snprintf(name, sizeof name, "episode_%03zu.csv", e);
    const std::string path = (fs::path(dir) / name).string();
    write_trace_csv(path, spec, ep.trajectory);
    paths.push_back(path);
    summary += std::to_string(e);
    for (Eigen::Index i = 0; i < ep.s0.size(); ++i) summary += "," + g9(ep.s0[i]);
    summary += "," + std::string(to_string(ep.status)) + "," + std::to_string(ep.clip_events) +
               "," + (ep.used_fallback ? "1" : "0") + "," + g9(ep.metrics.final_error) + "," +
               g9(ep.metrics.cost) + "," + g9(ep.metrics.effort) + "," +
               g9(ep.metrics.violation_rate) + "," + g9(ep.metrics.convergence_quality) + "," +
               g9(ep.reward.total) + "\n";
  }
  write_file((fs::path(dir) / "episodes.csv").string(), summary);
  write_file((fs::path(dir) / "metrics.json").string(), result.metrics_json() + "\n");
  return paths;
}

}  // namespace grpoctrl
