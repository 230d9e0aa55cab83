#pragma once

#include <vector>

#include "satsync/types.hpp"

namespace satsync {

/// Closed-left-half-plane membership tolerance for eigenvalues of A.
inline constexpr double kEigTolerance = 1e-8;
/// Relative singular-value threshold used by the PBH rank tests.
inline constexpr double kPbhRankTolerance = 1e-9;

/// Linear agent dynamics x' = A x + B sat(u), y = C x. The exosystem shares A
/// and C and has no input.
class AgentModel {
 public:
  /// Throws ValidationError naming "A", "B" or "C" on a shape mismatch.
  AgentModel(Matrix a, Matrix b, Matrix c);

  const Matrix& a() const noexcept { return a_; }
  const Matrix& b() const noexcept { return b_; }
  const Matrix& c() const noexcept { return c_; }

  int n() const noexcept { return static_cast<int>(a_.rows()); }
  int m() const noexcept { return static_cast<int>(b_.cols()); }
  int q() const noexcept { return static_cast<int>(c_.rows()); }

  /// Triple integrator with position output.
  static AgentModel triple_integrator();

 private:
  Matrix a_;
  Matrix b_;
  Matrix c_;
};

struct AssumptionReport {
  ComplexVector eig_a;
  double max_real_part = 0.0;
  bool stabilizable = false;
  bool detectable = false;
  bool pass = false;
};

/// Componentwise sgn(v_k) * min(1, |v_k|).
Vector saturate(const Vector& v);

/// In-place variant used on hot paths.
void saturate_in_place(Eigen::Ref<Vector> v);

/// Eigenvalues of A in the closed left half plane, (A,B) stabilizable and
/// (A,C) detectable, both by PBH rank tests at every eigenvalue with
/// Re >= -kEigTolerance.
AssumptionReport check_assumption(const AgentModel& model);

/// PBH test of rank [A - lambda I, B] = n for every eigenvalue of A with
/// Re lambda >= -kEigTolerance.
bool is_stabilizable(const Matrix& a, const Matrix& b);

/// Dual of is_stabilizable on (A^T, C^T).
bool is_detectable(const Matrix& a, const Matrix& c);

}  // namespace satsync
