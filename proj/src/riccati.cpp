#include "satsync/riccati.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "satsync/linalg.hpp"

namespace satsync {

namespace {

constexpr int kMaxSignIterations = 100;
constexpr int kMaxNewtonSteps = 20;
constexpr double kResidualScale = 1e-9;

double norm2(const Matrix& m) {
  if (m.size() == 0) return 0.0;
  Eigen::JacobiSVD<Matrix> svd(m);
  return svd.singularValues()(0);
}

double residual_tolerance(const Matrix& p) {
  const double np = norm2(p);
  return kResidualScale * (1.0 + np * np);
}

Matrix care_residual(const Matrix& a, const Matrix& g, const Matrix& q, const Matrix& p) {
  return a.transpose() * p + p * a - p * g * p + q;
}

// sign(H) by the scaled Newton iteration Z <- (c Z + (c Z)^{-1}) / 2.
Matrix matrix_sign(const Matrix& h) {
  const auto order = static_cast<double>(h.rows());
  Matrix z = h;
  bool scale = true;
  for (int iter = 0; iter < kMaxSignIterations; ++iter) {
    Eigen::PartialPivLU<Matrix> lu(z);
    const double rcond = lu.rcond();
    if (!(rcond > 1e-15))
      throw NumericalError("Hamiltonian has eigenvalues on or near the imaginary axis",
                           1.0 / std::max(rcond, 1e-300));
    const Matrix zinv = lu.inverse();
    double c = 1.0;
    if (scale) {
      const double log_det = lu.matrixLU().diagonal().cwiseAbs().array().log().sum();
      c = std::exp(-log_det / order);
    }
    const Matrix next = 0.5 * (c * z + zinv / c);
    const double change = (next - z).cwiseAbs().colwise().sum().maxCoeff();
    const double size = next.cwiseAbs().colwise().sum().maxCoeff();
    z = next;
    if (change <= 1e-2 * size) scale = false;
    if (change <= 1e-13 * size) return z;
  }
  throw NumericalError("matrix sign iteration did not converge");
}

RiccatiSolution finish(const AgentModel& model, RiccatiKind kind, double parameter,
                       const detail::CareResult& care, const detail::Coordinates& coords) {
  RiccatiSolution sol;
  sol.kind = kind;
  sol.parameter = parameter;
  sol.coordinates = coords;
  sol.newton_steps = care.newton_steps;
  const Matrix& u = coords.u;
  const Vector dinv = coords.scaling.cwiseInverse();
  sol.p = linalg::symmetrize(u * (dinv.asDiagonal() * care.p * dinv.asDiagonal()) * u.transpose());
  sol.residual_tolerance = residual_tolerance(sol.p);
  sol.residual_norm = kind == RiccatiKind::kScheduled
                          ? scheduled_are_residual(model, parameter, sol.p)
                          : lowgain_are_residual(model, parameter, sol.p);

  // Certificate in the scaled coordinates, where the closed loop is balanced.
  Matrix a_scaled = dinv.asDiagonal() * (u.transpose() * model.a() * u) * coords.scaling.asDiagonal();
  if (kind == RiccatiKind::kScheduled) a_scaled.diagonal().array() += 0.5 * parameter;
  const Matrix b_scaled = dinv.asDiagonal() * u.transpose() * model.b();
  const Matrix closed = a_scaled - b_scaled * b_scaled.transpose() * care.p;
  sol.closed_loop_stable = is_hurwitz(closed);

  if (!(sol.residual_norm <= sol.residual_tolerance))
    throw NumericalError("Riccati residual " + std::to_string(sol.residual_norm) +
                             " exceeds tolerance " + std::to_string(sol.residual_tolerance),
                         care.condition_estimate);
  if (linalg::min_symmetric_eigenvalue(sol.p) < -kPsdTolerance)
    throw NumericalError("Riccati solution is not positive semidefinite", care.condition_estimate);
  return sol;
}

void check_parameter(double value, const char* name) {
  if (!(value > 0.0 && value <= 1.0))
    throw ParameterError(std::string(name) + " must lie in (0, 1], got " + std::to_string(value));
}

void require_assumption(const AgentModel& model) {
  if (!check_assumption(model).pass)
    throw ValidationError("model", "agent model violates the closed-left-half-plane/"
                                   "stabilizability/detectability assumption");
}

}  // namespace

bool is_hurwitz(const Matrix& m) { return linalg::spectral_abscissa(m) < -kHurwitzMargin; }

double scheduled_are_residual(const AgentModel& model, double rho, const Matrix& p) {
  const Matrix& a = model.a();
  const Matrix& b = model.b();
  return norm2(a.transpose() * p + p * a - p * b * b.transpose() * p + rho * p);
}

double lowgain_are_residual(const AgentModel& model, double eps, const Matrix& p) {
  const Matrix& a = model.a();
  const Matrix& b = model.b();
  Matrix r = a.transpose() * p + p * a - p * b * b.transpose() * p;
  r.diagonal().array() += eps;
  return norm2(r);
}

namespace detail {

Coordinates initial_coordinates(const Matrix& a) {
  const Eigen::Index n = a.rows();
  Coordinates coords{Matrix::Identity(n, n), Vector::Ones(n)};
  // Upper triangular A (integrator chains) is used as given; otherwise the
  // Schur form exposes nilpotent chains to the diagonal scaling.
  if (a.triangularView<Eigen::StrictlyLower>().toDenseMatrix().isZero(0.0)) return coords;
  coords.u = Eigen::RealSchur<Matrix>(a).matrixU();
  return coords;
}

CareResult solve_stabilizing_care(const Matrix& a, const Matrix& b, const Matrix& q,
                                  const Coordinates& coords, const Matrix* guess) {
  const Eigen::Index n = a.rows();
  const Matrix& u = coords.u;
  const Vector& scaling = coords.scaling;
  const Vector dinv = scaling.cwiseInverse();
  const Matrix as = dinv.asDiagonal() * (u.transpose() * a * u) * scaling.asDiagonal();
  const Matrix bs = dinv.asDiagonal() * u.transpose() * b;
  const Matrix gs = bs * bs.transpose();
  const Matrix qs = scaling.asDiagonal() * (u.transpose() * q * u) * scaling.asDiagonal();

  CareResult result;
  Matrix p;
  if (guess) {
    p = linalg::symmetrize(scaling.asDiagonal() * (u.transpose() * *guess * u) * scaling.asDiagonal());
  } else {
    Matrix h(2 * n, 2 * n);
    h << as, -gs, -qs, -as.transpose();
    const Matrix w = matrix_sign(h);

    Matrix lhs(2 * n, n);
    lhs << w.topRightCorner(n, n), w.bottomRightCorner(n, n) + Matrix::Identity(n, n);
    Matrix rhs(2 * n, n);
    rhs << w.topLeftCorner(n, n) + Matrix::Identity(n, n), w.bottomLeftCorner(n, n);
    Eigen::ColPivHouseholderQR<Matrix> qr(lhs);
    qr.setThreshold(1e-12);
    const Eigen::Index rank = qr.rank();
    const Vector rdiag = qr.matrixR().diagonal().cwiseAbs();
    const double cond = rdiag.minCoeff() > 0.0 ? rdiag.maxCoeff() / rdiag.minCoeff()
                                               : std::numeric_limits<double>::infinity();
    if (rank < n) throw NumericalError("stable invariant subspace is not a graph over the state", cond);

    result.condition_estimate = cond;
    p = linalg::symmetrize(-qr.solve(rhs));
  }

  auto residual_of = [&](const Matrix& x) {
    return care_residual(as, gs, qs, x).cwiseAbs().colwise().sum().maxCoeff();
  };
  double res = residual_of(p);
  for (int step = 0; step < kMaxNewtonSteps; ++step) {
    const double target = 1e-15 * (1.0 + p.cwiseAbs().maxCoeff() * p.cwiseAbs().maxCoeff());
    if (res <= target) break;
    const Matrix closed = as - gs * p;
    Matrix delta;
    try {
      delta = linalg::solve_lyapunov(closed.transpose(), -care_residual(as, gs, qs, p));
    } catch (const NumericalError&) {
      break;
    }
    const Matrix next = linalg::symmetrize(p + delta);
    const double next_res = residual_of(next);
    if (!(next_res < res)) break;
    p = next;
    res = next_res;
    ++result.newton_steps;
  }
  result.p = std::move(p);
  return result;
}

namespace {

// Sign-function solve; when that fails and a stabilizing guess is available,
// Newton-Kleinman from the guess instead.
template <typename Solve>
RiccatiSolution with_fallback(Solve solve, const Matrix* guess) {
  if (!guess) return solve(nullptr);
  try {
    RiccatiSolution sol = solve(nullptr);
    if (sol.closed_loop_stable) return sol;
  } catch (const NumericalError&) {
  }
  return solve(guess);
}

}  // namespace

RiccatiSolution solve_scheduled_scaled(const AgentModel& model, double rho, const Coordinates& coords,
                                       const Matrix* guess) {
  check_parameter(rho, "rho");
  Matrix shifted = model.a();
  shifted.diagonal().array() += 0.5 * rho;
  const Matrix zero = Matrix::Zero(model.n(), model.n());
  return with_fallback(
      [&](const Matrix* g) {
        return finish(model, RiccatiKind::kScheduled, rho,
                      solve_stabilizing_care(shifted, model.b(), zero, coords, g), coords);
      },
      guess);
}

RiccatiSolution solve_lowgain_scaled(const AgentModel& model, double eps, const Coordinates& coords,
                                     const Matrix* guess) {
  check_parameter(eps, "eps");
  const Matrix q = eps * Matrix::Identity(model.n(), model.n());
  return with_fallback(
      [&](const Matrix* g) {
        return finish(model, RiccatiKind::kLowGain, eps,
                      solve_stabilizing_care(model.a(), model.b(), q, coords, g), coords);
      },
      guess);
}

Coordinates rescaled(const Matrix& p, const Coordinates& previous) {
  Coordinates next_coords = previous;
  Vector& next = next_coords.scaling;
  const Vector basis_diag = (previous.u.transpose() * p * previous.u).diagonal();
  const Vector scaled_diag = (previous.scaling.array().square() * basis_diag.array()).matrix();
  const double largest = scaled_diag.maxCoeff();
  if (!(largest > 0.0)) return next_coords;
  for (Eigen::Index i = 0; i < p.rows(); ++i) {
    const double v = scaled_diag[i];
    // Numerically zero modes (stable directions of a semidefinite solution)
    // keep their scaling.
    if (!(v > 1e-8 * largest)) continue;
    next[i] = previous.scaling[i] * std::exp2(std::round(-0.5 * std::log2(v)));
  }
  return next_coords;
}

}  // namespace detail

namespace {

template <typename SolveFn>
RiccatiSolution continue_from_one(const AgentModel& model, double target, SolveFn solve) {
  detail::Coordinates coords = detail::initial_coordinates(model.a());
  Matrix previous;
  for (double r = 1.0; r > target; r *= 0.5) {
    previous = solve(model, r, coords, previous.size() ? &previous : nullptr).p;
    coords = detail::rescaled(previous, coords);
  }
  return solve(model, target, coords, previous.size() ? &previous : nullptr);
}

}  // namespace

RiccatiSolution solve_scheduled_are(const AgentModel& model, double rho) {
  check_parameter(rho, "rho");
  require_assumption(model);
  return continue_from_one(model, rho, detail::solve_scheduled_scaled);
}

RiccatiSolution solve_lowgain_are(const AgentModel& model, double eps) {
  check_parameter(eps, "eps");
  require_assumption(model);
  return continue_from_one(model, eps, detail::solve_lowgain_scaled);
}

ObserverGain design_observer_gain(const AgentModel& model) {
  if (!is_detectable(model.a(), model.c()))
    throw DesignError("(A, C) is not detectable; no observer gain exists");
  const int n = model.n();
  const Matrix at = model.a().transpose();
  const Matrix ct = model.c().transpose();
  detail::CareResult care;
  try {
    care = detail::solve_stabilizing_care(at, ct, Matrix::Identity(n, n),
                                          {Matrix::Identity(n, n), Vector::Ones(n)});
  } catch (const NumericalError& e) {
    throw DesignError(std::string("dual Riccati solve failed: ") + e.what());
  }
  ObserverGain gain;
  gain.k = care.p * ct;
  gain.spectral_abscissa = linalg::spectral_abscissa(model.a() - gain.k * model.c());
  if (!(gain.spectral_abscissa < -kHurwitzMargin))
    throw DesignError("A - KC is not Hurwitz");
  return gain;
}

}  // namespace satsync
