#include "satsync/cli_io.hpp"

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

#include "satsync/linalg.hpp"
#include "satsync/riccati.hpp"

namespace satsync {

namespace {

using nlohmann::json;

constexpr std::size_t kMaxReportedEvents = 100;

std::string join_issues(const std::vector<ScenarioIssue>& issues) {
  std::string out = "invalid scenario";
  for (const ScenarioIssue& issue : issues) out += "\n  " + issue.pointer + ": " + issue.message;
  return out;
}

class Reader {
 public:
  std::vector<ScenarioIssue> issues;

  void fail(const std::string& pointer, const std::string& message) {
    issues.push_back({pointer, message});
  }

  const json* member(const json& obj, const std::string& pointer, const char* key, bool required) {
    if (!obj.is_object()) return nullptr;
    auto it = obj.find(key);
    if (it == obj.end()) {
      if (required) fail(pointer + "/" + key, "missing");
      return nullptr;
    }
    return &*it;
  }

  std::optional<Vector> vector(const json& v, const std::string& pointer,
                               std::optional<Eigen::Index> size = std::nullopt) {
    if (!v.is_array()) {
      fail(pointer, "expected an array of numbers");
      return std::nullopt;
    }
    Vector out(static_cast<Eigen::Index>(v.size()));
    bool ok = true;
    for (std::size_t k = 0; k < v.size(); ++k) {
      if (!v[k].is_number()) {
        fail(pointer + "/" + std::to_string(k), "expected a number");
        ok = false;
        continue;
      }
      out[static_cast<Eigen::Index>(k)] = v[k].get<double>();
      if (!std::isfinite(out[static_cast<Eigen::Index>(k)])) {
        fail(pointer + "/" + std::to_string(k), "must be finite");
        ok = false;
      }
    }
    if (ok && size && out.size() != *size) {
      fail(pointer, "expected " + std::to_string(*size) + " entries, got " +
                        std::to_string(out.size()));
      ok = false;
    }
    return ok ? std::optional<Vector>(out) : std::nullopt;
  }

  // Row-major nested arrays.
  std::optional<Matrix> matrix(const json& v, const std::string& pointer) {
    if (!v.is_array() || v.empty()) {
      fail(pointer, "expected a non-empty array of rows");
      return std::nullopt;
    }
    std::optional<Eigen::Index> cols;
    std::vector<Vector> rows;
    bool ok = true;
    for (std::size_t r = 0; r < v.size(); ++r) {
      auto row = vector(v[r], pointer + "/" + std::to_string(r), cols);
      if (!row) {
        ok = false;
        continue;
      }
      if (!cols) cols = row->size();
      rows.push_back(*row);
    }
    if (!ok) return std::nullopt;
    Matrix out(static_cast<Eigen::Index>(rows.size()), *cols);
    for (std::size_t r = 0; r < rows.size(); ++r)
      out.row(static_cast<Eigen::Index>(r)) = rows[r].transpose();
    return out;
  }

  // One n-vector per agent, stored as columns.
  std::optional<Matrix> per_agent(const json& v, const std::string& pointer, int agents, int n) {
    if (!v.is_array() || static_cast<int>(v.size()) != agents) {
      fail(pointer, "expected one " + std::to_string(n) + "-vector per agent (" +
                        std::to_string(agents) + ")");
      return std::nullopt;
    }
    Matrix out(n, agents);
    bool ok = true;
    for (int i = 0; i < agents; ++i) {
      auto col = vector(v[static_cast<std::size_t>(i)], pointer + "/" + std::to_string(i), n);
      if (col)
        out.col(i) = *col;
      else
        ok = false;
    }
    return ok ? std::optional<Matrix>(out) : std::nullopt;
  }
};

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

json matrix_json(const Matrix& m) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(row);
  }
  return rows;
}

json columns_json(const Matrix& m) { return matrix_json(m.transpose()); }

json vector_json(const Vector& v) { return json(std::vector<double>(v.data(), v.data() + v.size())); }

std::uint64_t fnv1a(const std::string& text) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 1099511628211ull;
  }
  return h;
}

}  // namespace

ScenarioError::ScenarioError(std::vector<ScenarioIssue> issues)
    : ValidationError(issues.empty() ? "/" : issues.front().pointer, join_issues(issues)),
      issues_(std::move(issues)) {}

Scenario parse_scenario(const json& doc, std::vector<std::string>* warnings) {
  Reader rd;
  if (!doc.is_object()) throw ScenarioError(std::vector<ScenarioIssue>{{"", "scenario must be a JSON object"}});

  std::string name;
  if (const json* v = rd.member(doc, "", "name", false)) {
    if (v->is_string())
      name = v->get<std::string>();
    else
      rd.fail("/name", "expected a string");
  }

  std::optional<Matrix> a, b, c;
  if (const json* model = rd.member(doc, "", "model", true)) {
    if (!model->is_object()) {
      rd.fail("/model", "expected an object with A, B, C");
    } else {
      if (const json* v = rd.member(*model, "/model", "A", true)) a = rd.matrix(*v, "/model/A");
      if (const json* v = rd.member(*model, "/model", "B", true)) b = rd.matrix(*v, "/model/B");
      if (const json* v = rd.member(*model, "/model", "C", true)) c = rd.matrix(*v, "/model/C");
    }
  }
  if (a && a->rows() != a->cols()) {
    rd.fail("/model/A", "must be square");
    a.reset();
  }
  if (a && b && b->rows() != a->rows()) {
    rd.fail("/model/B", "must have " + std::to_string(a->rows()) + " rows");
    b.reset();
  }
  if (a && c && c->cols() != a->rows()) {
    rd.fail("/model/C", "must have " + std::to_string(a->rows()) + " columns");
    c.reset();
  }

  std::optional<Matrix> adjacency;
  std::vector<bool> roots;
  bool roots_ok = false;
  if (const json* network = rd.member(doc, "", "network", true)) {
    if (const json* v = rd.member(*network, "/network", "adjacency", true)) {
      adjacency = rd.matrix(*v, "/network/adjacency");
      if (adjacency && adjacency->rows() != adjacency->cols()) {
        rd.fail("/network/adjacency", "must be square");
        adjacency.reset();
      }
    }
    if (adjacency) {
      bool ok = true;
      for (Eigen::Index i = 0; i < adjacency->rows(); ++i)
        for (Eigen::Index j = 0; j < adjacency->cols(); ++j) {
          const std::string ptr =
              "/network/adjacency/" + std::to_string(i) + "/" + std::to_string(j);
          const double w = (*adjacency)(i, j);
          if (w < 0.0) {
            rd.fail(ptr, "weights must be nonnegative");
            ok = false;
          } else if (i == j && w != 0.0) {
            rd.fail(ptr, "self-loop: diagonal entries must be zero");
            ok = false;
          }
        }
      if (!ok) adjacency.reset();
    }
    if (const json* v = rd.member(*network, "/network", "roots", true)) {
      if (!v->is_array()) {
        rd.fail("/network/roots", "expected an array of 0-based agent indices");
      } else if (adjacency) {
        roots.assign(static_cast<std::size_t>(adjacency->rows()), false);
        roots_ok = true;
        for (std::size_t k = 0; k < v->size(); ++k) {
          const json& r = (*v)[k];
          const std::string ptr = "/network/roots/" + std::to_string(k);
          if (!r.is_number_integer() || r.get<long>() < 0 || r.get<long>() >= adjacency->rows()) {
            rd.fail(ptr, "expected an agent index in [0, " + std::to_string(adjacency->rows()) + ")");
            roots_ok = false;
          } else if (roots[r.get<std::size_t>()]) {
            rd.fail(ptr, "duplicate root");
            roots_ok = false;
          } else {
            roots[r.get<std::size_t>()] = true;
          }
        }
      }
    }
  }

  Coupling coupling = Coupling::kPartial;
  if (const json* v = rd.member(doc, "", "coupling", true)) {
    if (*v == "full")
      coupling = Coupling::kFull;
    else if (*v == "partial")
      coupling = Coupling::kPartial;
    else
      rd.fail("/coupling", "expected \"full\" or \"partial\"");
  }

  std::optional<Matrix> x0, chi0, xhat0;
  std::optional<Vector> xr0;
  const bool sized = a && adjacency;
  const int n = a ? static_cast<int>(a->rows()) : 0;
  const int agents = adjacency ? static_cast<int>(adjacency->rows()) : 0;
  if (const json* v = rd.member(doc, "", "x0", true); v && sized) x0 = rd.per_agent(*v, "/x0", agents, n);
  if (const json* v = rd.member(doc, "", "xr0", true); v && a) xr0 = rd.vector(*v, "/xr0", n);
  if (const json* p = rd.member(doc, "", "protocol_x0", false); p && sized) {
    if (!p->is_object()) rd.fail("/protocol_x0", "expected an object with chi and/or xhat");
    if (const json* v = rd.member(*p, "/protocol_x0", "chi", false))
      chi0 = rd.per_agent(*v, "/protocol_x0/chi", agents, n);
    if (const json* v = rd.member(*p, "/protocol_x0", "xhat", false)) {
      if (coupling == Coupling::kFull)
        rd.fail("/protocol_x0/xhat", "full-state coupling carries no observer state");
      else
        xhat0 = rd.per_agent(*v, "/protocol_x0/xhat", agents, n);
    }
  }

  if (!rd.issues.empty()) throw ScenarioError(std::move(rd.issues));
  if (!a || !b || !c || !adjacency || !roots_ok || !x0 || !xr0)
    throw ScenarioError(std::vector<ScenarioIssue>{{"", "incomplete scenario"}});

  Scenario s{name,         AgentModel(*a, *b, *c), Network(*adjacency, roots),
             *x0,          *xr0,                   chi0.value_or(Matrix()),
             xhat0.value_or(Matrix()), coupling};
  if (warnings) {
    const RootedCheck rooted = check_rooted_family(s.net);
    if (!rooted.member) warnings->push_back("/network: " + rooted.diagnostic);
    if (!check_assumption(s.model).pass)
      warnings->push_back("/model: eigenvalues of A must lie in the closed left half plane with "
                          "(A, B) stabilizable and (A, C) detectable");
  }
  return s;
}

Scenario load_scenario(const std::filesystem::path& path, std::vector<std::string>* warnings) {
  std::ifstream in(path);
  if (!in) throw ScenarioError(std::vector<ScenarioIssue>{{"", "cannot open " + path.string()}});
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ScenarioError(std::vector<ScenarioIssue>{{"", std::string("parse error: ") + e.what()}});
  }
  return parse_scenario(doc, warnings);
}

json scenario_to_json(const Scenario& s) {
  json doc;
  if (!s.name.empty()) doc["name"] = s.name;
  doc["model"] = {{"A", matrix_json(s.model.a())},
                  {"B", matrix_json(s.model.b())},
                  {"C", matrix_json(s.model.c())}};
  json roots = json::array();
  for (int i = 0; i < s.net.size(); ++i)
    if (s.net.is_root(i)) roots.push_back(i);
  doc["network"] = {{"adjacency", matrix_json(s.net.adjacency())}, {"roots", roots}};
  doc["coupling"] = s.coupling == Coupling::kFull ? "full" : "partial";
  doc["x0"] = columns_json(s.x0);
  doc["xr0"] = vector_json(s.xr0);
  if (s.chi0.size() != 0) doc["protocol_x0"]["chi"] = columns_json(s.chi0);
  if (s.xhat0.size() != 0) doc["protocol_x0"]["xhat"] = columns_json(s.xhat0);
  return doc;
}

std::string scenario_fingerprint(const Scenario& scenario) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx",
                static_cast<unsigned long long>(fnv1a(scenario_to_json(scenario).dump())));
  return buf;
}

void check_protocol_coupling(const Scenario& scenario, ProtocolKind kind) {
  const bool partial = scenario.coupling == Coupling::kPartial;
  if (partial != is_partial(kind))
    throw ValidationError("/coupling", "protocol " + to_string(kind) + " needs " +
                                           (is_partial(kind) ? "partial" : "full") +
                                           "-state coupling");
}

std::vector<std::string> trajectory_csv_header(const StackedLayout& l, bool with_epsilon) {
  std::vector<std::string> h{"t"};
  auto block = [&](const std::string& name) {
    for (int i = 0; i < l.agents; ++i)
      for (int k = 0; k < l.n; ++k)
        h.push_back(name + "[" + std::to_string(i) + "][" + std::to_string(k) + "]");
  };
  block("x");
  for (int k = 0; k < l.n; ++k) h.push_back("xr[" + std::to_string(k) + "]");
  block("chi");
  if (l.partial) block("xhat");
  for (int i = 0; i < l.agents; ++i)
    for (int k = 0; k < l.m; ++k)
      h.push_back("u[" + std::to_string(i) + "][" + std::to_string(k) + "]");
  if (with_epsilon)
    for (int i = 0; i < l.agents; ++i) h.push_back("eps[" + std::to_string(i) + "]");
  h.push_back("sync_error");
  return h;
}

void write_trajectory_csv(const Trajectory& traj, const std::filesystem::path& path) {
  if (!traj.layout) throw ParameterError("trajectory CSV needs a closed-loop trajectory");
  const StackedLayout& l = *traj.layout;
  const bool with_epsilon = !traj.realized_epsilon.empty() && traj.realized_epsilon[0].size() != 0;
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  const std::vector<std::string> header = trajectory_csv_header(l, with_epsilon);
  for (std::size_t k = 0; k < header.size(); ++k) out << (k ? "," : "") << header[k];
  out << '\n';
  for (std::size_t s = 0; s < traj.times.size(); ++s) {
    out << format_double(traj.times[s]);
    const Vector& z = traj.states[s];
    for (Eigen::Index k = 0; k < z.size(); ++k) out << ',' << format_double(z[k]);
    const Matrix& u = traj.controls[s];
    for (Eigen::Index k = 0; k < u.size(); ++k) out << ',' << format_double(u.data()[k]);
    if (with_epsilon)
      for (Eigen::Index i = 0; i < traj.realized_epsilon[s].size(); ++i)
        out << ',' << format_double(traj.realized_epsilon[s][i]);
    out << ',' << format_double(sync_error(z, l)) << '\n';
  }
  if (!out) throw Error("write failed for " + path.string());
}

std::size_t CsvTable::column(const std::string& name) const {
  for (std::size_t k = 0; k < header.size(); ++k)
    if (header[k] == name) return k;
  throw ValidationError(name, "column not present");
}

CsvTable read_trajectory_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string());
  CsvTable table;
  std::string line;
  if (!std::getline(in, line)) throw ValidationError(path.string(), "empty file");
  {
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) table.header.push_back(cell);
  }
  std::size_t row_number = 1;
  while (std::getline(in, line)) {
    ++row_number;
    if (line.empty()) continue;
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      char* end = nullptr;
      const double v = std::strtod(cell.c_str(), &end);
      if (end == cell.c_str() || *end != '\0')
        throw ValidationError(path.string(), "row " + std::to_string(row_number) +
                                                 ": not a number: '" + cell + "'");
      row.push_back(v);
    }
    if (row.size() != table.header.size())
      throw ValidationError(path.string(), "row " + std::to_string(row_number) + " has " +
                                               std::to_string(row.size()) + " columns");
    table.rows.push_back(std::move(row));
  }
  return table;
}

RunResult run_scenario(const Scenario& scenario, const RunOptions& options,
                       std::shared_ptr<const PCache> cache) {
  check_protocol_coupling(scenario, options.kind);
  if (!check_assumption(scenario.model).pass)
    throw ValidationError("/model", "agent model violates the structural assumption");
  const auto start = std::chrono::steady_clock::now();
  ProtocolConfig config = make_protocol(options.kind, scenario.model, options.epsilon, std::move(cache));
  const ClosedLoop loop(scenario.model, scenario.net, config);
  const Vector z0 = loop.initial_state(scenario.x0, scenario.xr0, scenario.chi0, scenario.xhat0);

  RunResult result;
  result.trajectory = simulate(loop, z0, options.integrator);
  const double wall =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  result.metrics = sync_metrics(result.trajectory, options.tolerance);
  result.saturation = saturation_events(result.trajectory);
  const double final_error = result.metrics.error_series.back();
  result.converged = final_error < options.tolerance;

  json protocol = {{"kind", to_string(options.kind)}};
  if (is_global(options.kind)) {
    protocol["schedule"] = {{"grid", config.cache->grid()},
                            {"rho_min", config.cache->rho_min()},
                            {"bracket_subdivisions", kBracketSubdivisions}};
  } else {
    protocol["epsilon"] = options.epsilon;
  }
  if (is_partial(options.kind)) protocol["observer_gain"] = matrix_json(config.observer_gain);

  const IntegratorOptions& io = options.integrator;
  json integrator = {{"method", io.method == Method::kRk4 ? "rk4" : "rk45"},
                     {"t0", io.t0},
                     {"t_final", io.t_final},
                     {"accepted_steps", result.trajectory.stats.accepted},
                     {"rejected_steps", result.trajectory.stats.rejected},
                     {"evaluations", result.trajectory.stats.evaluations}};
  if (io.method == Method::kRk4) {
    integrator["dt"] = io.dt;
  } else {
    integrator["rtol"] = io.rtol;
    integrator["atol"] = io.atol;
    integrator["dt_min"] = io.dt_min;
  }

  double min_eps = 1.0;
  bool any_eps = false;
  for (const Vector& e : result.trajectory.realized_epsilon)
    if (e.size() != 0) {
      min_eps = std::min(min_eps, e.minCoeff());
      any_eps = true;
    }
  json metrics = {{"tolerance", options.tolerance},
                  {"final_sync_error", final_error},
                  {"max_control_inf_norm", result.metrics.max_control_inf_norm},
                  {"convergence_time", nullptr}};
  if (result.metrics.convergence_time) metrics["convergence_time"] = *result.metrics.convergence_time;
  if (any_eps) metrics["min_realized_epsilon"] = min_eps;

  json events = json::array();
  for (std::size_t k = 0; k < result.saturation.size() && k < kMaxReportedEvents; ++k) {
    const SaturationEvent& e = result.saturation[k];
    events.push_back({{"t", e.t}, {"agent", e.agent}, {"component", e.component}, {"magnitude", e.magnitude}});
  }

  result.report = {{"scenario", {{"name", scenario.name}, {"fingerprint", scenario_fingerprint(scenario)},
                                 {"agents", scenario.net.size()}}},
                   {"protocol", protocol},
                   {"integrator", integrator},
                   {"metrics", metrics},
                   {"saturation", {{"count", result.saturation.size()}, {"events", events}}},
                   {"converged", result.converged},
                   {"wall_clock_seconds", wall}};
  return result;
}

void write_run(const RunResult& result, const std::filesystem::path& out_dir) {
  std::filesystem::create_directories(out_dir);
  write_trajectory_csv(result.trajectory, out_dir / "trajectory.csv");
  std::ofstream out(out_dir / "report.json");
  if (!out) throw Error("cannot write " + (out_dir / "report.json").string());
  out << result.report.dump(2) << '\n';
}

std::filesystem::path data_directory() {
  if (const char* env = std::getenv("SATSYNC_DATA"); env && *env) return env;
  return SATSYNC_DATA_DIR;
}

RunResult reproduce(int case_number, const std::filesystem::path& out_dir,
                    std::shared_ptr<const PCache> cache) {
  if (case_number < 1 || case_number > 3)
    throw ParameterError("case must be 1, 2 or 3, got " + std::to_string(case_number));
  const Scenario scenario =
      load_scenario(data_directory() / ("case" + std::to_string(case_number) + ".json"));
  RunOptions options;
  options.kind = ProtocolKind::kGlobalPartial;
  options.integrator.t_final = 50.0;
  RunResult result = run_scenario(scenario, options, std::move(cache));
  result.report["case"] = case_number;
  if (!out_dir.empty()) write_run(result, out_dir);
  return result;
}

json check_report(const Scenario& scenario) {
  const AssumptionReport assumption = check_assumption(scenario.model);
  const RootedCheck rooted = check_rooted_family(scenario.net);
  const ExpandedLaplacian lt = expanded_laplacian(scenario.net);
  json spectrum = json::array();
  for (Eigen::Index k = 0; k < lt.spectrum.size(); ++k)
    spectrum.push_back({lt.spectrum[k].real(), lt.spectrum[k].imag()});
  json eig_a = json::array();
  for (Eigen::Index k = 0; k < assumption.eig_a.size(); ++k)
    eig_a.push_back({assumption.eig_a[k].real(), assumption.eig_a[k].imag()});

  json doc = {{"scenario", {{"name", scenario.name}, {"fingerprint", scenario_fingerprint(scenario)}}},
              {"assumption",
               {{"pass", assumption.pass},
                {"eigenvalues_a", eig_a},
                {"max_real_part", assumption.max_real_part},
                {"stabilizable", assumption.stabilizable},
                {"detectable", assumption.detectable}}},
              {"rooted_family", {{"member", rooted.member}, {"unreachable", rooted.unreachable}}},
              {"expanded_laplacian",
               {{"spectrum", spectrum}, {"min_real_part", lt.min_real_part()}}}};
  if (!rooted.diagnostic.empty()) doc["rooted_family"]["diagnostic"] = rooted.diagnostic;
  bool target = false;
  if (assumption.pass) {
    target = target_dynamics_stable(scenario.net, scenario.model);
    doc["target_dynamics_stable"] = target;
  } else {
    doc["target_dynamics_stable"] = nullptr;
  }
  doc["pass"] = assumption.pass && rooted.member && target;
  return doc;
}

json riccati_json(const RiccatiSolution& sol) {
  return {{"kind", sol.kind == RiccatiKind::kScheduled ? "scheduled" : "lowgain"},
          {"param", sol.parameter},
          {"P", matrix_json(sol.p)},
          {"residual_norm", sol.residual_norm},
          {"residual_tolerance", sol.residual_tolerance},
          {"min_eigenvalue", linalg::min_symmetric_eigenvalue(sol.p)},
          {"closed_loop_stable", sol.closed_loop_stable},
          {"newton_steps", sol.newton_steps}};
}

json candidate_json(const CandidateRecord& r) {
  json doc = {{"epsilon", r.epsilon},
              {"passed", r.passed},
              {"max_control_inf_norm", r.max_control_inf_norm},
              {"max_final_sync_error", r.max_final_sync_error},
              {"saturation_violations", r.saturation_violations},
              {"sync_violations", r.sync_violations},
              {"failures", r.failures}};
  if (!r.first_failure.empty()) doc["first_failure"] = r.first_failure;
  return doc;
}

json selection_json(const SelectionReport& report, const SelectionOptions& options,
                    const CompactSetSpec& sets) {
  json tried = json::array();
  for (const CandidateRecord& r : report.tried) tried.push_back(candidate_json(r));
  json recheck = json::array();
  for (const CandidateRecord& r : report.recheck) recheck.push_back(candidate_json(r));
  return {{"epsilon_star", report.epsilon_star},
          {"protocol", to_string(report.kind)},
          {"method", "validation by direct simulation from a deterministic vertex sample"},
          {"sets", {{"agents", sets.agents}, {"exosystem", sets.exosystem}, {"protocol", sets.protocol}}},
          {"parameters",
           {{"epsilon0", options.epsilon0},
            {"ratio", options.ratio},
            {"floor", options.floor},
            {"margin", options.margin},
            {"t_validation", options.t_validation},
            {"tolerance", options.tolerance}}},
          {"samples", {{"count", report.sample_count}, {"all_vertices", report.all_vertices}}},
          {"tried", tried},
          {"recheck", {{"heuristic", true},
                       {"stride", options.recheck_stride},
                       {"passed", report.recheck_passed},
                       {"candidates", recheck}}}};
}

}  // namespace satsync
