#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <mutex>
#include <vector>

#include "satsync/model.hpp"
#include "satsync/parallel.hpp"
#include "satsync/riccati.hpp"
#include "satsync/types.hpp"

namespace satsync {

/// Grid rho in {1, 1/2, ..., 2^-kScheduleLevels}.
inline constexpr int kScheduleLevels = 20;
/// Uniform refinement of each grid bracket; 1/1024 < 1e-3 relative width.
inline constexpr int kBracketSubdivisions = 1024;

/// The state lies outside the region where even rho_min keeps the control
/// inside the unit box.
class ScheduleFloorError : public Error {
 public:
  ScheduleFloorError(double state_norm, double g_at_floor);
  double state_norm() const noexcept { return state_norm_; }

 private:
  double state_norm_;
};

/// Solutions of the scheduled equation on a uniform grid inside one bracket
/// [grid[k+1], grid[k]], endpoints included.
struct BracketTable {
  std::vector<double> rho;  // ascending
  std::vector<Matrix> p;
  std::vector<Matrix> bt_p;  // B' P
  std::vector<double> trace_btpb;
};

/// Scheduled Riccati solutions on the dyadic grid plus lazily built bracket
/// refinements. Read-only after construction apart from the bracket tables,
/// which are filled at most once each under a lock.
class PCache {
 public:
  /// Throws ValidationError if the model fails the structural assumption.
  explicit PCache(const AgentModel& model, Execution execution = Execution::kParallel);

  PCache(const PCache&) = delete;
  PCache& operator=(const PCache&) = delete;

  const AgentModel& model() const noexcept { return model_; }
  /// Descending: grid()[0] == 1, grid().back() == rho_min().
  const std::vector<double>& grid() const noexcept { return grid_; }
  const std::vector<RiccatiSolution>& solutions() const noexcept { return solutions_; }
  double rho_min() const noexcept { return grid_.back(); }
  /// Hash of (A, B) bits; used to check a cache matches the model in use.
  std::uint64_t fingerprint() const noexcept { return fingerprint_; }

  /// g(rho, chi) = chi' P chi * trace(B' P B) at grid point k.
  double g_at_grid(int k, const Vector& chi) const;

  /// Table for the bracket between grid()[k+1] and grid()[k].
  const BracketTable& bracket(int k) const;

  /// Fills every bracket table (otherwise built on first use).
  void warm_all() const;

 private:
  AgentModel model_;
  Execution execution_;
  std::uint64_t fingerprint_ = 0;
  std::vector<double> grid_;
  std::vector<RiccatiSolution> solutions_;
  std::vector<double> trace_btpb_;
  mutable std::array<std::once_flag, kScheduleLevels> bracket_once_;
  mutable std::array<std::unique_ptr<BracketTable>, kScheduleLevels> brackets_;
};

/// Solves every interior point of a bracket; serial reference and OpenMP
/// kernel give identical tables.
BracketTable build_bracket(const AgentModel& model, const RiccatiSolution& lo,
                           const RiccatiSolution& hi, Execution execution);

std::uint64_t model_fingerprint(const AgentModel& model);

/// Largest rho in (rho_min, 1] with chi' P_rho chi * trace(B' P_rho B) <= 1,
/// together with the feedback row block B' P_rho that realizes it.
struct ScheduledGain {
  double epsilon = 1.0;
  Matrix bt_p;
  double g = 0.0;  // constraint value at epsilon
};

/// Grid bracketing, then bisection over the bracket table to relative width
/// 1e-3, then the exact crossing of the constraint for P interpolated linearly
/// inside the final sub-interval. Throws ScheduleFloorError when g(rho_min) > 1.
ScheduledGain schedule_gain(const Vector& chi, const PCache& cache);

inline double epsilon_of_state(const Vector& chi, const PCache& cache) {
  return schedule_gain(chi, cache).epsilon;
}

}  // namespace satsync
