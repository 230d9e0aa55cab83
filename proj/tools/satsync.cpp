#include <cstdio>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "satsync/cli_io.hpp"
#include "satsync/riccati.hpp"
#include "satsync/selection.hpp"

namespace {

using namespace satsync;

constexpr int kExitOk = 0;
constexpr int kExitError = 1;
constexpr int kExitValidation = 2;
constexpr int kExitAssertion = 3;

Scenario load_with_warnings(const std::string& path) {
  std::vector<std::string> warnings;
  Scenario scenario = load_scenario(path, &warnings);
  for (const std::string& w : warnings) std::cerr << "warning: " << w << '\n';
  return scenario;
}

void print_run_summary(const RunResult& r) {
  std::cout << "final sync error " << r.report["metrics"]["final_sync_error"].get<double>()
            << ", max |u| " << r.metrics.max_control_inf_norm << ", saturation events "
            << r.saturation.size() << ", converged " << (r.converged ? "yes" : "no") << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Regulated state synchronization of saturated multi-agent systems"};
  app.require_subcommand(1);

  std::string scenario_path;
  std::string out_dir;

  auto* simulate = app.add_subcommand("simulate", "Simulate a scenario under one protocol");
  std::string protocol;
  double epsilon = 0.0;
  double t_final = 50.0;
  double dt = 1e-3;
  std::string method = "rk45";
  simulate->add_option("--scenario", scenario_path, "Scenario JSON")->required();
  simulate->add_option("--protocol", protocol)
      ->required()
      ->check(CLI::IsMember({"global-full", "global-partial", "semiglobal-full", "semiglobal-partial"}));
  simulate->add_option("--epsilon", epsilon, "Low-gain parameter (semi-global protocols)");
  simulate->add_option("--t-final", t_final, "Horizon")->capture_default_str();
  simulate->add_option("--dt", dt, "Fixed step for rk4")->capture_default_str();
  simulate->add_option("--method", method)->check(CLI::IsMember({"rk4", "rk45"}))->capture_default_str();
  simulate->add_option("--out", out_dir, "Output directory")->required();

  auto* check = app.add_subcommand("check", "Check the assumption and graph conditions");
  check->add_option("--scenario", scenario_path)->required();

  auto* riccati = app.add_subcommand("riccati", "Solve one of the Riccati equations");
  std::string kind;
  double param = 0.0;
  riccati->add_option("--scenario", scenario_path)->required();
  riccati->add_option("--kind", kind)->required()->check(CLI::IsMember({"scheduled", "lowgain"}));
  riccati->add_option("--param", param)->required();

  auto* select = app.add_subcommand("select-eps", "Select the semi-global low-gain parameter");
  double half_width = 0.0;
  select->add_option("--scenario", scenario_path)->required();
  select->add_option("--half-width", half_width)->required()->check(CLI::NonNegativeNumber);

  auto* reproduce_cmd = app.add_subcommand("reproduce", "Run a bundled example case");
  int case_number = 1;
  reproduce_cmd->add_option("--case", case_number)->required()->check(CLI::IsMember({1, 2, 3}));
  reproduce_cmd->add_option("--out", out_dir)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kExitOk : kExitValidation;
  }

  try {
    if (*simulate) {
      const Scenario scenario = load_with_warnings(scenario_path);
      RunOptions options;
      options.kind = parse_protocol_kind(protocol);
      options.epsilon = epsilon;
      options.integrator.method = method == "rk4" ? Method::kRk4 : Method::kRk45;
      options.integrator.t_final = t_final;
      options.integrator.dt = dt;
      const RunResult result = run_scenario(scenario, options);
      write_run(result, out_dir);
      print_run_summary(result);
      return kExitOk;
    }
    if (*check) {
      const Scenario scenario = load_with_warnings(scenario_path);
      const nlohmann::json report = check_report(scenario);
      std::cout << report.dump(2) << '\n';
      return report["pass"].get<bool>() ? kExitOk : kExitValidation;
    }
    if (*riccati) {
      const Scenario scenario = load_with_warnings(scenario_path);
      const RiccatiSolution sol = kind == "scheduled" ? solve_scheduled_are(scenario.model, param)
                                                      : solve_lowgain_are(scenario.model, param);
      std::cout << riccati_json(sol).dump(2) << '\n';
      return kExitOk;
    }
    if (*select) {
      const Scenario scenario = load_with_warnings(scenario_path);
      const ProtocolKind protocol_kind = scenario.coupling == Coupling::kFull
                                             ? ProtocolKind::kSemiglobalFull
                                             : ProtocolKind::kSemiglobalPartial;
      const CompactSetSpec sets{half_width, half_width, half_width};
      const SelectionOptions options;
      try {
        const SelectionReport report =
            select_semiglobal_epsilon(scenario.model, scenario.net, sets, protocol_kind, options);
        std::cout << selection_json(report, options, sets).dump(2) << '\n';
        return kExitOk;
      } catch (const SelectionError& e) {
        nlohmann::json tried = nlohmann::json::array();
        for (const CandidateRecord& r : e.tried()) tried.push_back(candidate_json(r));
        std::cout << nlohmann::json{{"error", e.what()}, {"best", candidate_json(e.best())}, {"tried", tried}}
                         .dump(2)
                  << '\n';
        return kExitAssertion;
      }
    }
    if (*reproduce_cmd) {
      const RunResult result = reproduce(case_number, out_dir);
      print_run_summary(result);
      if (!result.converged) {
        std::cerr << "case " << case_number << " did not reach sync error < 1e-2 by T = 50\n";
        return kExitAssertion;
      }
      return kExitOk;
    }
  } catch (const ScenarioError& e) {
    std::cerr << e.what() << '\n';
    return kExitValidation;
  } catch (const ValidationError& e) {
    std::cerr << "validation failed: " << e.what() << '\n';
    return kExitValidation;
  } catch (const ParameterError& e) {
    std::cerr << "invalid parameter: " << e.what() << '\n';
    return kExitValidation;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitError;
  }
  return kExitError;
}
