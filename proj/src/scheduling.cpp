#include "satsync/scheduling.hpp"

#include <cmath>
#include <cstring>
#include <exception>
#include <string>

namespace satsync {

ScheduleFloorError::ScheduleFloorError(double state_norm, double g_at_floor)
    : Error("gain schedule floor reached: ||chi|| = " + std::to_string(state_norm) +
            " gives g(rho_min, chi) = " + std::to_string(g_at_floor) + " > 1"),
      state_norm_(state_norm) {}

std::uint64_t model_fingerprint(const AgentModel& model) {
  // FNV-1a over the raw bits of A and B.
  std::uint64_t h = 1469598103934665603ull;
  auto mix = [&h](const Matrix& m) {
    for (Eigen::Index k = 0; k < m.size(); ++k) {
      std::uint64_t bits = 0;
      const double v = m.data()[k];
      std::memcpy(&bits, &v, sizeof bits);
      for (int byte = 0; byte < 8; ++byte) {
        h ^= (bits >> (8 * byte)) & 0xffu;
        h *= 1099511628211ull;
      }
    }
    h ^= static_cast<std::uint64_t>(m.rows()) * 0x9e3779b97f4a7c15ull;
  };
  mix(model.a());
  mix(model.b());
  return h;
}

BracketTable build_bracket(const AgentModel& model, const RiccatiSolution& lo,
                           const RiccatiSolution& hi, Execution execution) {
  constexpr int kPoints = kBracketSubdivisions + 1;
  BracketTable table;
  table.rho.resize(kPoints);
  table.p.resize(kPoints);
  table.bt_p.resize(kPoints);
  table.trace_btpb.resize(kPoints);
  const detail::Coordinates coords = detail::rescaled(hi.p, hi.coordinates);
  const Matrix& b = model.b();

  std::vector<std::exception_ptr> errors(kPoints);
  auto fill = [&](int j) {
    try {
      const double rho =
          j == 0 ? lo.parameter
                 : (j == kBracketSubdivisions
                        ? hi.parameter
                        : lo.parameter + (hi.parameter - lo.parameter) * j / kBracketSubdivisions);
      Matrix p;
      if (j == 0) {
        p = lo.p;
      } else if (j == kBracketSubdivisions) {
        p = hi.p;
      } else {
        p = detail::solve_scheduled_scaled(model, rho, coords, &hi.p).p;
      }
      table.rho[j] = rho;
      table.bt_p[j] = b.transpose() * p;
      table.trace_btpb[j] = (table.bt_p[j] * b).trace();
      table.p[j] = std::move(p);
    } catch (...) {
      errors[j] = std::current_exception();
    }
  };

  if (execution == Execution::kParallel) {
#pragma omp parallel for schedule(dynamic, 16)
    for (int j = 0; j < kPoints; ++j) fill(j);
  } else {
    for (int j = 0; j < kPoints; ++j) fill(j);
  }
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);
  return table;
}

PCache::PCache(const AgentModel& model, Execution execution)
    : model_(model), execution_(execution), fingerprint_(model_fingerprint(model)) {
  if (!check_assumption(model_).pass)
    throw ValidationError("model", "gain schedule requires a model satisfying the assumption");
  grid_.reserve(kScheduleLevels + 1);
  solutions_.reserve(kScheduleLevels + 1);
  detail::Coordinates coords = detail::initial_coordinates(model_.a());
  for (int k = 0; k <= kScheduleLevels; ++k) {
    const double rho = std::exp2(-k);
    RiccatiSolution sol = detail::solve_scheduled_scaled(
        model_, rho, coords, solutions_.empty() ? nullptr : &solutions_.back().p);
    if (!sol.closed_loop_stable)
      throw NumericalError("scheduled solution at rho = " + std::to_string(rho) +
                           " failed the closed-loop certificate");
    coords = detail::rescaled(sol.p, sol.coordinates);
    const Matrix bt_p = model_.b().transpose() * sol.p;
    trace_btpb_.push_back((bt_p * model_.b()).trace());
    grid_.push_back(rho);
    solutions_.push_back(std::move(sol));
  }
}

double PCache::g_at_grid(int k, const Vector& chi) const {
  return chi.dot(solutions_[static_cast<std::size_t>(k)].p * chi) *
         trace_btpb_[static_cast<std::size_t>(k)];
}

const BracketTable& PCache::bracket(int k) const {
  const auto idx = static_cast<std::size_t>(k);
  std::call_once(bracket_once_.at(idx), [&] {
    brackets_[idx] = std::make_unique<BracketTable>(
        build_bracket(model_, solutions_[idx + 1], solutions_[idx], execution_));
  });
  return *brackets_[idx];
}

void PCache::warm_all() const {
  for (int k = 0; k < kScheduleLevels; ++k) bracket(k);
}

ScheduledGain schedule_gain(const Vector& chi, const PCache& cache) {
  ScheduledGain out;
  const double g_top = cache.g_at_grid(0, chi);
  if (g_top <= 1.0) {
    out.epsilon = 1.0;
    out.bt_p = cache.model().b().transpose() * cache.solutions().front().p;
    out.g = g_top;
    return out;
  }
  const double g_floor = cache.g_at_grid(kScheduleLevels, chi);
  if (g_floor > 1.0) throw ScheduleFloorError(chi.norm(), g_floor);

  // Grid bracket: g(grid[hi]) > 1 >= g(grid[lo]), lo = hi + 1.
  int infeasible = 0;
  int feasible = kScheduleLevels;
  while (feasible - infeasible > 1) {
    const int mid = (infeasible + feasible) / 2;
    if (cache.g_at_grid(mid, chi) <= 1.0)
      feasible = mid;
    else
      infeasible = mid;
  }
  const BracketTable& table = cache.bracket(infeasible);

  auto g_at = [&](int j) {
    const auto s = static_cast<std::size_t>(j);
    return chi.dot(table.p[s] * chi) * table.trace_btpb[s];
  };
  // Sub-grid bisection: index 0 feasible, kBracketSubdivisions infeasible.
  int lo = 0;
  int hi = kBracketSubdivisions;
  while (hi - lo > 1) {
    const int mid = (lo + hi) / 2;
    if (g_at(mid) <= 1.0)
      lo = mid;
    else
      hi = mid;
  }

  // Exact crossing for P interpolated linearly on [rho_lo, rho_hi]; the
  // constraint is a product of two affine functions of the weight.
  const auto slo = static_cast<std::size_t>(lo);
  const auto shi = static_cast<std::size_t>(hi);
  const double a0 = chi.dot(table.p[slo] * chi);
  const double a1 = chi.dot(table.p[shi] * chi);
  const double b0 = table.trace_btpb[slo];
  const double b1 = table.trace_btpb[shi];
  auto g_interp = [&](double w) { return (a0 + w * (a1 - a0)) * (b0 + w * (b1 - b0)); };
  double w_lo = 0.0;
  double w_hi = 1.0;
  for (int it = 0; it < 64 && w_hi - w_lo > 0.0; ++it) {
    const double w = 0.5 * (w_lo + w_hi);
    if (w == w_lo || w == w_hi) break;
    if (g_interp(w) <= 1.0)
      w_lo = w;
    else
      w_hi = w;
  }
  out.epsilon = table.rho[slo] + w_lo * (table.rho[shi] - table.rho[slo]);
  out.bt_p = (1.0 - w_lo) * table.bt_p[slo] + w_lo * table.bt_p[shi];
  out.g = g_interp(w_lo);
  return out;
}

}  // namespace satsync
