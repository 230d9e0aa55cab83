#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "satsync/layout.hpp"
#include "satsync/parallel.hpp"
#include "satsync/types.hpp"

namespace satsync {

class ClosedLoop;

/// Step-size underflow in the adaptive integrator; carries the state reached.
class IntegrationError : public Error {
 public:
  IntegrationError(const std::string& what, double time, Vector state)
      : Error(what), time_(time), state_(std::move(state)) {}
  double time() const noexcept { return time_; }
  const Vector& state() const noexcept { return state_; }

 private:
  double time_;
  Vector state_;
};

/// A non-finite state or derivative.
class DivergenceError : public Error {
 public:
  DivergenceError(const std::string& what, double time) : Error(what), time_(time) {}
  double time() const noexcept { return time_; }

 private:
  double time_;
};

enum class Method { kRk4, kRk45 };

struct IntegratorOptions {
  Method method = Method::kRk45;
  double t0 = 0.0;
  double t_final = 50.0;
  double dt = 1e-3;  // fixed step for rk4
  double rtol = 1e-8;
  double atol = 1e-10;
  double dt_min = 1e-10;
  double dt_max = 0.0;  // 0: no cap
  long max_steps = 50'000'000;
};

struct IntegratorStats {
  long accepted = 0;
  long rejected = 0;
  long evaluations = 0;
};

/// Right-hand side plus an optional probe reporting the pre-saturation
/// controls (m x N) and realized schedule values (N or empty) at a state.
struct OdeSystem {
  std::function<void(double, const Vector&, Vector&)> rhs;
  std::function<void(double, const Vector&, Matrix&, Vector&)> probe;
};

OdeSystem make_ode(const ClosedLoop& loop);

struct Trajectory {
  std::vector<double> times;
  std::vector<Vector> states;
  std::vector<Matrix> controls;  // m x N, pre-saturation
  std::vector<Vector> realized_epsilon;
  std::optional<StackedLayout> layout;
  IntegratorStats stats;
};

/// Called at t0 and after every accepted step.
using StepObserver =
    std::function<void(double t, const Vector& z, const Matrix& u, const Vector& epsilon)>;

IntegratorStats integrate_observed(const OdeSystem& system, const Vector& z0,
                                   const IntegratorOptions& options, const StepObserver& observer);

Trajectory integrate(const OdeSystem& system, const Vector& z0, const IntegratorOptions& options);

/// Integrates the closed loop and attaches its layout.
Trajectory simulate(const ClosedLoop& loop, const Vector& z0, const IntegratorOptions& options);

struct SaturationEvent {
  double t = 0.0;
  int agent = 0;
  int component = 0;
  double magnitude = 0.0;
};

/// Every recorded (time, agent, component) with |u| > 1.
std::vector<SaturationEvent> saturation_events(const Trajectory& traj);

struct SyncMetrics {
  std::vector<double> error_series;
  std::optional<double> convergence_time;
  double max_control_inf_norm = 0.0;
};

/// max_i ||x_i - x_r||_2 for a stacked state.
double sync_error(const Vector& z, const StackedLayout& layout);

/// Requires traj.layout.
SyncMetrics sync_metrics(const Trajectory& traj, double tol);

/// First time from which every later error is below tol.
std::optional<double> convergence_time(const std::vector<double>& times,
                                       const std::vector<double>& errors, double tol);

/// Summary of one closed-loop run used by batch validation.
struct SampleOutcome {
  double max_control_inf_norm = 0.0;
  double final_sync_error = 0.0;
  double min_epsilon = 0.0;  // 0 for semi-global kinds
  bool failed = false;
  std::string failure;
};

/// Runs every initial state without recording trajectories. The OpenMP
/// kernel and the serial reference produce identical outcomes.
std::vector<SampleOutcome> simulate_batch(const ClosedLoop& loop,
                                          const std::vector<Vector>& initial_states,
                                          const IntegratorOptions& options,
                                          Execution execution = Execution::kParallel);

}  // namespace satsync
