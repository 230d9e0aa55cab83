#include "satsync/sim.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "satsync/protocols.hpp"

namespace satsync {

namespace {

bool all_finite(const Vector& v) { return v.allFinite(); }

void probe_at(const OdeSystem& system, double t, const Vector& z, Matrix& u, Vector& eps) {
  if (system.probe) {
    system.probe(t, z, u, eps);
  } else {
    u.resize(0, 0);
    eps.resize(0);
  }
}

void eval(const OdeSystem& system, double t, const Vector& z, Vector& dz, IntegratorStats& stats) {
  system.rhs(t, z, dz);
  ++stats.evaluations;
  if (!all_finite(dz)) throw DivergenceError("non-finite derivative", t);
}

IntegratorStats run_rk4(const OdeSystem& system, const Vector& z0, const IntegratorOptions& o,
                        const StepObserver& observer) {
  if (!(o.dt > 0.0)) throw ParameterError("rk4 needs dt > 0");
  IntegratorStats stats;
  const double span = o.t_final - o.t0;
  const auto steps = static_cast<long>(std::ceil(span / o.dt - 1e-9));
  if (steps > o.max_steps) throw ParameterError("rk4 step count exceeds max_steps");
  Vector z = z0;
  Vector k1, k2, k3, k4, tmp;
  Matrix u;
  Vector eps;
  probe_at(system, o.t0, z, u, eps);
  observer(o.t0, z, u, eps);
  for (long s = 0; s < steps; ++s) {
    const double t = o.t0 + static_cast<double>(s) * o.dt;
    const double t_next = s + 1 == steps ? o.t_final : o.t0 + static_cast<double>(s + 1) * o.dt;
    const double h = t_next - t;
    eval(system, t, z, k1, stats);
    tmp = z + 0.5 * h * k1;
    eval(system, t + 0.5 * h, tmp, k2, stats);
    tmp = z + 0.5 * h * k2;
    eval(system, t + 0.5 * h, tmp, k3, stats);
    tmp = z + h * k3;
    eval(system, t + h, tmp, k4, stats);
    z += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    if (!all_finite(z)) throw DivergenceError("non-finite state", t_next);
    ++stats.accepted;
    probe_at(system, t_next, z, u, eps);
    observer(t_next, z, u, eps);
  }
  return stats;
}

// Dormand-Prince 5(4) tableau.
constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
constexpr double a21 = 1.0 / 5;
constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561,
                 a54 = -212.0 / 729;
constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                 a65 = -5103.0 / 18656;
constexpr double a71 = 35.0 / 384, a73 = 500.0 / 1113, a74 = 125.0 / 192, a75 = -2187.0 / 6784,
                 a76 = 11.0 / 84;
constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920, e5 = -17253.0 / 339200,
                 e6 = 22.0 / 525, e7 = -1.0 / 40;

double scaled_norm(const Vector& err, const Vector& z, const Vector& z_new,
                   const IntegratorOptions& o) {
  double worst = 0.0;
  for (Eigen::Index i = 0; i < err.size(); ++i) {
    const double scale = o.atol + o.rtol * std::max(std::abs(z[i]), std::abs(z_new[i]));
    worst = std::max(worst, std::abs(err[i]) / scale);
  }
  return worst;
}

double initial_step(const OdeSystem& system, const Vector& z0, const Vector& f0,
                    const IntegratorOptions& o, IntegratorStats& stats) {
  const double d0 = scaled_norm(z0, z0, z0, o);
  const double d1 = scaled_norm(f0, z0, z0, o);
  double h0 = (d0 < 1e-5 || d1 < 1e-5) ? 1e-6 : 0.01 * d0 / d1;
  h0 = std::min(h0, o.t_final - o.t0);
  const Vector z1 = z0 + h0 * f0;
  Vector f1;
  eval(system, o.t0 + h0, z1, f1, stats);
  const double d2 = scaled_norm(f1 - f0, z0, z0, o) / h0;
  const double h1 = std::max(d1, d2) <= 1e-15 ? std::max(1e-6, h0 * 1e-3)
                                                : std::pow(0.01 / std::max(d1, d2), 1.0 / 5.0);
  return std::min(100.0 * h0, h1);
}

IntegratorStats run_rk45(const OdeSystem& system, const Vector& z0, const IntegratorOptions& o,
                         const StepObserver& observer) {
  if (!(o.rtol > 0.0) || !(o.atol > 0.0)) throw ParameterError("rk45 needs rtol, atol > 0");
  IntegratorStats stats;
  Vector z = z0;
  Matrix u;
  Vector eps;
  probe_at(system, o.t0, z, u, eps);
  observer(o.t0, z, u, eps);

  Vector k1, k2, k3, k4, k5, k6, k7, tmp, z_new, err;
  eval(system, o.t0, z, k1, stats);
  double t = o.t0;
  double h = initial_step(system, z, k1, o, stats);
  if (o.dt_max > 0.0) h = std::min(h, o.dt_max);
  while (t < o.t_final) {
    if (stats.accepted + stats.rejected >= o.max_steps)
      throw IntegrationError("step budget exhausted", t, z);
    if (h < o.dt_min) throw IntegrationError("step size underflow", t, z);
    const bool last = t + h >= o.t_final;
    const double step = last ? o.t_final - t : h;

    tmp = z + step * (a21 * k1);
    eval(system, t + c2 * step, tmp, k2, stats);
    tmp = z + step * (a31 * k1 + a32 * k2);
    eval(system, t + c3 * step, tmp, k3, stats);
    tmp = z + step * (a41 * k1 + a42 * k2 + a43 * k3);
    eval(system, t + c4 * step, tmp, k4, stats);
    tmp = z + step * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4);
    eval(system, t + c5 * step, tmp, k5, stats);
    tmp = z + step * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5);
    eval(system, t + step, tmp, k6, stats);
    z_new = z + step * (a71 * k1 + a73 * k3 + a74 * k4 + a75 * k5 + a76 * k6);
    if (!all_finite(z_new)) throw DivergenceError("non-finite state", t + step);
    eval(system, t + step, z_new, k7, stats);
    err = step * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7);

    const double norm = scaled_norm(err, z, z_new, o);
    if (norm <= 1.0) {
      t = last ? o.t_final : t + step;
      z.swap(z_new);
      k1.swap(k7);
      ++stats.accepted;
      probe_at(system, t, z, u, eps);
      observer(t, z, u, eps);
      const double factor = norm == 0.0 ? 5.0 : std::clamp(0.9 * std::pow(norm, -0.2), 0.2, 5.0);
      h = step * factor;
    } else {
      ++stats.rejected;
      h = step * std::max(0.2, 0.9 * std::pow(norm, -0.2));
    }
    if (o.dt_max > 0.0) h = std::min(h, o.dt_max);
  }
  return stats;
}

}  // namespace

OdeSystem make_ode(const ClosedLoop& loop) {
  OdeSystem system;
  system.rhs = [&loop](double, const Vector& z, Vector& dz) { loop.derivative(z, dz); };
  system.probe = [&loop](double, const Vector& z, Matrix& u, Vector& eps) {
    ControlSample sample = loop.controls(z);
    u = std::move(sample.u);
    eps = std::move(sample.epsilon);
  };
  return system;
}

IntegratorStats integrate_observed(const OdeSystem& system, const Vector& z0,
                                   const IntegratorOptions& options, const StepObserver& observer) {
  if (!(options.t_final > options.t0)) throw ParameterError("t_final must exceed t0");
  if (!all_finite(z0)) throw DivergenceError("non-finite initial state", options.t0);
  return options.method == Method::kRk4 ? run_rk4(system, z0, options, observer)
                                        : run_rk45(system, z0, options, observer);
}

Trajectory integrate(const OdeSystem& system, const Vector& z0, const IntegratorOptions& options) {
  Trajectory traj;
  traj.stats = integrate_observed(
      system, z0, options, [&traj](double t, const Vector& z, const Matrix& u, const Vector& eps) {
        traj.times.push_back(t);
        traj.states.push_back(z);
        traj.controls.push_back(u);
        traj.realized_epsilon.push_back(eps);
      });
  return traj;
}

Trajectory simulate(const ClosedLoop& loop, const Vector& z0, const IntegratorOptions& options) {
  if (z0.size() != loop.layout().dim())
    throw ValidationError("z0", "expected " + std::to_string(loop.layout().dim()) + " entries");
  Trajectory traj = integrate(make_ode(loop), z0, options);
  traj.layout = loop.layout();
  return traj;
}

std::vector<SaturationEvent> saturation_events(const Trajectory& traj) {
  std::vector<SaturationEvent> events;
  for (std::size_t s = 0; s < traj.controls.size(); ++s) {
    const Matrix& u = traj.controls[s];
    for (Eigen::Index i = 0; i < u.cols(); ++i)
      for (Eigen::Index k = 0; k < u.rows(); ++k)
        if (std::abs(u(k, i)) > 1.0)
          events.push_back({traj.times[s], static_cast<int>(i), static_cast<int>(k),
                            std::abs(u(k, i))});
  }
  return events;
}

double sync_error(const Vector& z, const StackedLayout& layout) {
  double worst = 0.0;
  const auto xr = z.segment(layout.xr(), layout.n);
  for (int i = 0; i < layout.agents; ++i)
    worst = std::max(worst, (z.segment(layout.x(i), layout.n) - xr).norm());
  return worst;
}

std::optional<double> convergence_time(const std::vector<double>& times,
                                       const std::vector<double>& errors, double tol) {
  std::optional<double> result;
  for (std::size_t k = errors.size(); k-- > 0;) {
    if (!(errors[k] < tol)) break;
    result = times[k];
  }
  return result;
}

SyncMetrics sync_metrics(const Trajectory& traj, double tol) {
  if (!traj.layout) throw ParameterError("sync metrics need a closed-loop trajectory");
  SyncMetrics metrics;
  metrics.error_series.reserve(traj.states.size());
  for (const Vector& z : traj.states) metrics.error_series.push_back(sync_error(z, *traj.layout));
  metrics.convergence_time = convergence_time(traj.times, metrics.error_series, tol);
  for (const Matrix& u : traj.controls)
    if (u.size() != 0)
      metrics.max_control_inf_norm = std::max(metrics.max_control_inf_norm, u.cwiseAbs().maxCoeff());
  return metrics;
}

std::vector<SampleOutcome> simulate_batch(const ClosedLoop& loop,
                                          const std::vector<Vector>& initial_states,
                                          const IntegratorOptions& options, Execution execution) {
  const OdeSystem system = make_ode(loop);
  const StackedLayout layout = loop.layout();
  const bool global = is_global(loop.config().kind);
  std::vector<SampleOutcome> outcomes(initial_states.size());

  auto run = [&](std::size_t s) {
    SampleOutcome& out = outcomes[s];
    out.min_epsilon = global ? std::numeric_limits<double>::infinity() : 0.0;
    Vector last;
    try {
      integrate_observed(system, initial_states[s], options,
                         [&](double, const Vector& z, const Matrix& u, const Vector& eps) {
                           if (u.size() != 0)
                             out.max_control_inf_norm =
                                 std::max(out.max_control_inf_norm, u.cwiseAbs().maxCoeff());
                           if (eps.size() != 0) out.min_epsilon = std::min(out.min_epsilon, eps.minCoeff());
                           last = z;
                         });
      out.final_sync_error = sync_error(last, layout);
    } catch (const std::exception& e) {
      out.failed = true;
      out.failure = e.what();
    }
  };

  const auto count = static_cast<long>(initial_states.size());
  if (execution == Execution::kParallel) {
#pragma omp parallel for schedule(dynamic, 1)
    for (long s = 0; s < count; ++s) run(static_cast<std::size_t>(s));
  } else {
    for (long s = 0; s < count; ++s) run(static_cast<std::size_t>(s));
  }
  return outcomes;
}

}  // namespace satsync
