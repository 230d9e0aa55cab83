#pragma once

#include <string>
#include <vector>

#include "satsync/graph.hpp"
#include "satsync/model.hpp"
#include "satsync/protocols.hpp"
#include "satsync/sim.hpp"

namespace satsync {

/// Axis-aligned boxes around the origin for agent states, the exosystem
/// state and the protocol states (chi and, for partial kinds, xhat).
struct CompactSetSpec {
  double agents = 0.0;
  double exosystem = 0.0;
  double protocol = 0.0;
};

struct SelectionOptions {
  double epsilon0 = 1.0;
  double ratio = 0.5;
  double floor = 0x1p-30;
  double margin = 0.05;
  double t_validation = 50.0;
  double tolerance = 1e-2;
  /// Every tenth sample is used for the check below the selected value.
  int recheck_stride = 10;
  IntegratorOptions integrator;
  Execution execution = Execution::kParallel;
};

struct CandidateRecord {
  double epsilon = 0.0;
  bool passed = false;
  double max_control_inf_norm = 0.0;
  double max_final_sync_error = 0.0;
  int saturation_violations = 0;  // samples above 1 - margin
  int sync_violations = 0;        // samples not below tolerance at the horizon
  int failures = 0;               // samples whose integration failed
  std::string first_failure;
};

struct SelectionReport {
  double epsilon_star = 0.0;
  ProtocolKind kind = ProtocolKind::kSemiglobalFull;
  int sample_count = 0;
  bool all_vertices = false;  // false: Hadamard vertex sample plus the origin
  std::vector<CandidateRecord> tried;
  /// Heuristic: smaller grid values on a subsample, saturation margin only.
  std::vector<CandidateRecord> recheck;
  bool recheck_passed = true;
};

/// No grid value down to the floor passed. Carries the closest candidate and
/// every record.
class SelectionError : public Error {
 public:
  SelectionError(const std::string& what, CandidateRecord best, std::vector<CandidateRecord> tried)
      : Error(what), best_(std::move(best)), tried_(std::move(tried)) {}
  const CandidateRecord& best() const noexcept { return best_; }
  const std::vector<CandidateRecord>& tried() const noexcept { return tried_; }

 private:
  CandidateRecord best_;
  std::vector<CandidateRecord> tried_;
};

/// Deterministic vertex sample of the compact sets in the stacked layout.
/// Only coordinates with a positive half-width span the box; all vertices
/// are returned when there are at most 8 such coordinates, otherwise 256 rows of a
/// Sylvester-Hadamard sign pattern followed by the origin.
std::vector<Vector> vertex_samples(const StackedLayout& layout, const CompactSetSpec& sets);

/// Number of stacked coordinates with a positive half-width.
int box_dimension(const StackedLayout& layout, const CompactSetSpec& sets);

/// Scans epsilon0 * ratio^k downward and returns the first value whose
/// simulations from every sample keep ||u||_inf <= 1 - margin and end with a
/// sync error below tolerance. Throws SelectionError when none passes.
SelectionReport select_semiglobal_epsilon(const AgentModel& model, const Network& net,
                                          const CompactSetSpec& sets, ProtocolKind kind,
                                          const SelectionOptions& options = {});

/// Runs one candidate; exposed for re-simulation checks.
CandidateRecord validate_candidate(const AgentModel& model, const Network& net, ProtocolKind kind,
                                   double epsilon, const std::vector<Vector>& samples,
                                   const SelectionOptions& options, double horizon,
                                   bool check_sync = true);

}  // namespace satsync
