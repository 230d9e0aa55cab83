#include "satsync/model.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace satsync {

namespace {

std::string shape(const Matrix& m) {
  return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

// Rank of a complex matrix with a threshold relative to its infinity norm.
int numerical_rank(const ComplexMatrix& m) {
  const double norm_inf = m.cwiseAbs().rowwise().sum().maxCoeff();
  if (norm_inf == 0.0) return 0;
  Eigen::JacobiSVD<ComplexMatrix> svd(m);
  const auto& sv = svd.singularValues();
  const double threshold = kPbhRankTolerance * norm_inf;
  return static_cast<int>((sv.array() > threshold).count());
}

bool pbh_full_rank(const Matrix& a, const Matrix& b) {
  const Eigen::Index n = a.rows();
  Eigen::EigenSolver<Matrix> es(a, false);
  const ComplexVector eig = es.eigenvalues();
  ComplexMatrix test(n, n + b.cols());
  for (Eigen::Index k = 0; k < eig.size(); ++k) {
    if (eig[k].real() < -kEigTolerance) continue;
    test.leftCols(n) = a.cast<std::complex<double>>();
    test.leftCols(n).diagonal().array() -= eig[k];
    test.rightCols(b.cols()) = b.cast<std::complex<double>>();
    if (numerical_rank(test) < n) return false;
  }
  return true;
}

}  // namespace

AgentModel::AgentModel(Matrix a, Matrix b, Matrix c)
    : a_(std::move(a)), b_(std::move(b)), c_(std::move(c)) {
  if (a_.rows() == 0 || a_.rows() != a_.cols())
    throw ValidationError("A", "must be a nonempty square matrix, got " + shape(a_));
  if (b_.rows() != a_.rows() || b_.cols() == 0)
    throw ValidationError("B", "expected " + std::to_string(a_.rows()) + "xm with m>0, got " +
                                   shape(b_));
  if (c_.cols() != a_.rows() || c_.rows() == 0)
    throw ValidationError("C", "expected qx" + std::to_string(a_.rows()) + " with q>0, got " +
                                   shape(c_));
}

AgentModel AgentModel::triple_integrator() {
  Matrix a = Matrix::Zero(3, 3);
  a(0, 1) = 1.0;
  a(1, 2) = 1.0;
  Matrix b = Matrix::Zero(3, 1);
  b(2, 0) = 1.0;
  Matrix c = Matrix::Zero(1, 3);
  c(0, 0) = 1.0;
  return AgentModel(std::move(a), std::move(b), std::move(c));
}

Vector saturate(const Vector& v) {
  Vector out = v;
  saturate_in_place(out);
  return out;
}

void saturate_in_place(Eigen::Ref<Vector> v) {
  for (Eigen::Index k = 0; k < v.size(); ++k) v[k] = std::clamp(v[k], -1.0, 1.0);
}

bool is_stabilizable(const Matrix& a, const Matrix& b) { return pbh_full_rank(a, b); }

bool is_detectable(const Matrix& a, const Matrix& c) {
  return pbh_full_rank(a.transpose(), c.transpose());
}

AssumptionReport check_assumption(const AgentModel& model) {
  AssumptionReport report;
  Eigen::EigenSolver<Matrix> es(model.a(), false);
  report.eig_a = es.eigenvalues();
  report.max_real_part = report.eig_a.real().maxCoeff();
  report.stabilizable = is_stabilizable(model.a(), model.b());
  report.detectable = is_detectable(model.a(), model.c());
  report.pass =
      report.max_real_part <= kEigTolerance && report.stabilizable && report.detectable;
  return report;
}

}  // namespace satsync
