#pragma once

#include "satsync/model.hpp"
#include "satsync/types.hpp"

namespace satsync {

/// Hurwitz threshold: max Re(eig) must be below -kHurwitzMargin.
inline constexpr double kHurwitzMargin = 1e-9;
/// Smallest eigenvalue accepted for a positive-semidefinite solution.
inline constexpr double kPsdTolerance = 1e-8;

enum class RiccatiKind {
  kScheduled,  // A'P + PA - PBB'P + rho P = 0
  kLowGain,    // A'P + PA - PBB'P + eps I = 0
};

namespace detail {

/// Working coordinates x = U D z for a solve: U orthogonal (real Schur vectors
/// of A, or the identity when A is already upper triangular) and
/// D = diag(scaling).
struct Coordinates {
  Matrix u;
  Vector scaling;
};

}  // namespace detail

struct RiccatiSolution {
  Matrix p;
  RiccatiKind kind = RiccatiKind::kLowGain;
  double parameter = 0.0;
  double residual_norm = 0.0;
  /// 1e-9 * (1 + ||P||^2); the residual is certified against this bound.
  double residual_tolerance = 0.0;
  bool closed_loop_stable = false;
  int newton_steps = 0;
  /// Coordinates the solve was carried out in. Seeds the next solve of a
  /// continuation in the parameter.
  detail::Coordinates coordinates;
};

struct ObserverGain {
  Matrix k;
  /// max Re(eig(A - K C)), negative by construction.
  double spectral_abscissa = 0.0;
};

/// True iff max Re(eig(M)) < -kHurwitzMargin (eigenvalues of the balanced matrix).
bool is_hurwitz(const Matrix& m);

/// Stabilizing psd solution of A'P + PA - PBB'P + rho P = 0, rho in (0, 1].
/// Solved as the shifted standard equation with A + rho/2 I and zero state
/// weight, continued from rho = 1 through halvings to keep the scaled problem
/// well conditioned.
RiccatiSolution solve_scheduled_are(const AgentModel& model, double rho);

/// Stabilizing solution of A'P + PA - PBB'P + eps I = 0, eps in (0, 1].
RiccatiSolution solve_lowgain_are(const AgentModel& model, double eps);

/// K = P_o C' with A P_o + P_o A' - P_o C'C P_o + I = 0. Throws DesignError when
/// (A, C) is not detectable or A - KC fails the Hurwitz certificate.
ObserverGain design_observer_gain(const AgentModel& model);

/// Residuals in the 2-norm, evaluated in the original coordinates.
double scheduled_are_residual(const AgentModel& model, double rho, const Matrix& p);
double lowgain_are_residual(const AgentModel& model, double eps, const Matrix& p);

namespace detail {

struct CareResult {
  Matrix p;
  int newton_steps = 0;
  double condition_estimate = 0.0;
};

/// Schur basis of A with unit scaling.
Coordinates initial_coordinates(const Matrix& a);

/// Stabilizing solution of A'P + PA - P G P + Q = 0 (G = BB'), computed in the
/// given coordinates: matrix sign function of the Hamiltonian followed by at
/// most 20 Newton-Kleinman steps. With a guess (original coordinates, must be
/// stabilizing) the sign function is skipped. The returned P is in the
/// working coordinates z.
CareResult solve_stabilizing_care(const Matrix& a, const Matrix& b, const Matrix& q,
                                  const Coordinates& coords, const Matrix* guess = nullptr);

/// Single solve of the scheduled equation without model validation or
/// continuation. Used by the gain-schedule cache. A solution for a larger
/// parameter is stabilizing here and may be passed as guess; it is used
/// when the sign-function solve fails.
RiccatiSolution solve_scheduled_scaled(const AgentModel& model, double rho,
                                       const Coordinates& coords, const Matrix* guess = nullptr);
RiccatiSolution solve_lowgain_scaled(const AgentModel& model, double eps,
                                     const Coordinates& coords, const Matrix* guess = nullptr);

/// Rescales so the diagonal of P in the working basis is about one (powers of
/// two). Entries with a nonpositive diagonal keep their previous value.
Coordinates rescaled(const Matrix& p, const Coordinates& previous);

}  // namespace detail

}  // namespace satsync
