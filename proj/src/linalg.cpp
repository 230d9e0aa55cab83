#include "satsync/linalg.hpp"

#include <cmath>
#include <complex>

namespace satsync::linalg {

Vector balancing_scale(const Matrix& m) {
  const Eigen::Index n = m.rows();
  Matrix work = m;
  Vector scale = Vector::Ones(n);
  constexpr double kRadix = 2.0;
  constexpr double kRadixSq = kRadix * kRadix;
  bool done = false;
  for (int sweep = 0; sweep < 100 && !done; ++sweep) {
    done = true;
    for (Eigen::Index i = 0; i < n; ++i) {
      double c = work.col(i).cwiseAbs().sum() - std::abs(work(i, i));
      double r = work.row(i).cwiseAbs().sum() - std::abs(work(i, i));
      if (c == 0.0 || r == 0.0) continue;
      const double s = c + r;
      double f = 1.0;
      double g = r / kRadix;
      while (c < g) {
        f *= kRadix;
        c *= kRadixSq;
      }
      g = r * kRadix;
      while (c > g) {
        f /= kRadix;
        c /= kRadixSq;
      }
      if ((c + r) / f < 0.95 * s) {
        done = false;
        scale[i] *= f;
        work.row(i) /= f;
        work.col(i) *= f;
      }
    }
  }
  return scale;
}

ComplexVector eigenvalues(const Matrix& m) {
  const Vector d = balancing_scale(m);
  const Matrix balanced = d.cwiseInverse().asDiagonal() * m * d.asDiagonal();
  Eigen::EigenSolver<Matrix> es(balanced, false);
  return es.eigenvalues();
}

double spectral_abscissa(const Matrix& m) { return eigenvalues(m).real().maxCoeff(); }

Matrix solve_lyapunov(const Matrix& f, const Matrix& c) {
  using Complex = std::complex<double>;
  const Eigen::Index n = f.rows();
  Eigen::ComplexSchur<ComplexMatrix> schur(f.cast<Complex>());
  const ComplexMatrix& t = schur.matrixT();
  const ComplexMatrix& u = schur.matrixU();
  const ComplexMatrix rhs = u.adjoint() * c.cast<Complex>() * u;

  // T Y + Y T^H = rhs, solved column by column from the right.
  ComplexMatrix y = ComplexMatrix::Zero(n, n);
  const double scale = std::max(1.0, t.cwiseAbs().maxCoeff());
  for (Eigen::Index j = n - 1; j >= 0; --j) {
    ComplexVector col = rhs.col(j);
    for (Eigen::Index k = j + 1; k < n; ++k) col -= std::conj(t(j, k)) * y.col(k);
    ComplexMatrix shifted = t;
    shifted.diagonal().array() += std::conj(t(j, j));
    const double pivot = shifted.diagonal().cwiseAbs().minCoeff();
    if (pivot <= 1e-14 * scale)
      throw NumericalError("Lyapunov operator is singular (eigenvalues symmetric about the imaginary axis)",
                           scale / std::max(pivot, 1e-300));
    y.col(j) = shifted.triangularView<Eigen::Upper>().solve(col);
  }
  return (u * y * u.adjoint()).real();
}

Matrix kron(const Matrix& a, const Matrix& b) {
  Matrix out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < a.cols(); ++j)
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return out;
}

double min_symmetric_eigenvalue(const Matrix& m) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(symmetrize(m), Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

}  // namespace satsync::linalg
