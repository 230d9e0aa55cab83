#pragma once

#include "satsync/types.hpp"

namespace satsync::linalg {

/// Diagonal similarity D (powers of two) such that D^{-1} M D has comparable
/// row and column norms. Returns the diagonal of D.
Vector balancing_scale(const Matrix& m);

/// Eigenvalues computed on the balanced matrix.
ComplexVector eigenvalues(const Matrix& m);

/// max Re(eig(M)).
double spectral_abscissa(const Matrix& m);

/// Solves F X + X F^T = C by Bartels-Stewart on the complex Schur form of F.
/// Requires lambda_i + conj(lambda_j) != 0 for all eigenvalue pairs of F;
/// throws NumericalError otherwise.
Matrix solve_lyapunov(const Matrix& f, const Matrix& c);

Matrix kron(const Matrix& a, const Matrix& b);

/// (M + M^T) / 2.
inline Matrix symmetrize(const Matrix& m) { return 0.5 * (m + m.transpose()); }

/// Smallest eigenvalue of a symmetric matrix.
double min_symmetric_eigenvalue(const Matrix& m);

}  // namespace satsync::linalg
