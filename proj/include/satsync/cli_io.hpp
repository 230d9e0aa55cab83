#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "satsync/graph.hpp"
#include "satsync/model.hpp"
#include "satsync/protocols.hpp"
#include "satsync/riccati.hpp"
#include "satsync/selection.hpp"
#include "satsync/sim.hpp"

namespace satsync {

enum class Coupling { kFull, kPartial };

struct Scenario {
  std::string name;
  AgentModel model;
  Network net;
  Matrix x0;     // n x N, one column per agent
  Vector xr0;
  Matrix chi0;   // empty: zero
  Matrix xhat0;  // empty: zero
  Coupling coupling = Coupling::kPartial;
};

struct ScenarioIssue {
  std::string pointer;  // JSON pointer into the scenario file
  std::string message;
};

/// Every problem found in a scenario file, reported together.
class ScenarioError : public ValidationError {
 public:
  explicit ScenarioError(std::vector<ScenarioIssue> issues);
  const std::vector<ScenarioIssue>& issues() const noexcept { return issues_; }

 private:
  std::vector<ScenarioIssue> issues_;
};

/// Throws ScenarioError on parse or validation failures. A network outside
/// the rooted family and a model violating the structural assumption are
/// reported as warnings.
Scenario parse_scenario(const nlohmann::json& doc, std::vector<std::string>* warnings = nullptr);
Scenario load_scenario(const std::filesystem::path& path,
                       std::vector<std::string>* warnings = nullptr);
nlohmann::json scenario_to_json(const Scenario& scenario);
/// FNV-1a of the canonical JSON dump, as 16 hex digits.
std::string scenario_fingerprint(const Scenario& scenario);

/// Protocol compatible with the scenario's coupling; throws ValidationError
/// when a partial-state protocol meets full coupling or vice versa.
void check_protocol_coupling(const Scenario& scenario, ProtocolKind kind);

/// Header t, x[i][k].., xr[k].., chi[i][k].., xhat[i][k].., u[i][k]..,
/// eps[i].., sync_error with 0-based indices; values printed with 17
/// significant digits.
std::vector<std::string> trajectory_csv_header(const StackedLayout& layout, bool with_epsilon);
void write_trajectory_csv(const Trajectory& traj, const std::filesystem::path& path);

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;

  /// Throws ValidationError when the column is absent.
  std::size_t column(const std::string& name) const;
};
CsvTable read_trajectory_csv(const std::filesystem::path& path);

struct RunOptions {
  ProtocolKind kind = ProtocolKind::kGlobalPartial;
  double epsilon = 0.0;
  IntegratorOptions integrator;
  double tolerance = 1e-2;
};

struct RunResult {
  Trajectory trajectory;
  SyncMetrics metrics;
  std::vector<SaturationEvent> saturation;
  bool converged = false;  // final sync error below tolerance
  nlohmann::json report;
};

RunResult run_scenario(const Scenario& scenario, const RunOptions& options,
                       std::shared_ptr<const PCache> cache = nullptr);

/// Writes trajectory.csv and report.json into out_dir (created if needed).
void write_run(const RunResult& result, const std::filesystem::path& out_dir);

/// Directory holding the bundled scenarios; SATSYNC_DATA overrides the
/// build-time location.
std::filesystem::path data_directory();

/// Global partial-state protocol on bundled case 1, 2 or 3 with the default
/// integrator and T = 50. Writes into out_dir when it is non-empty.
RunResult reproduce(int case_number, const std::filesystem::path& out_dir,
                    std::shared_ptr<const PCache> cache = nullptr);

/// Structural checks on a scenario: assumption, rooted family, expanded
/// Laplacian spectrum and target dynamics. "pass" is true when all hold.
nlohmann::json check_report(const Scenario& scenario);

nlohmann::json riccati_json(const RiccatiSolution& solution);
nlohmann::json candidate_json(const CandidateRecord& record);
nlohmann::json selection_json(const SelectionReport& report, const SelectionOptions& options,
                              const CompactSetSpec& sets);

}  // namespace satsync
