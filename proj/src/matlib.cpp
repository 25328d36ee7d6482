#include "kblab/matlib.hpp"

#include <cmath>
#include <sstream>

namespace kblab {
namespace matlib {

namespace {

bool entries_finite(const Matrix& m) { return m.allFinite(); }

}  // namespace

std::string spd_violation(const Matrix& m, double psd_tolerance) {
  if (m.rows() != m.cols()) return "matrix is not square";
  if (m.rows() < 1) return "matrix is empty";
  if (!entries_finite(m)) return "matrix has non-finite entries";
  const double scale = 1.0 + m.cwiseAbs().maxCoeff();
  const double asym = (m - m.transpose()).cwiseAbs().maxCoeff();
  if (asym > 1e-12 * scale) {
    std::ostringstream os;
    os << "matrix is not symmetric: max |A - A'| = " << asym;
    return os.str();
  }
  Eigen::SelfAdjointEigenSolver<Matrix> es(symmetrize(m),
                                           Eigen::EigenvaluesOnly);
  const double lmin = es.eigenvalues().minCoeff();
  const double lmax = es.eigenvalues().maxCoeff();
  if (lmin < -psd_tolerance * (1.0 + lmax)) {
    std::ostringstream os;
    os << "matrix is not positive semi-definite: lambda_min = " << lmin
       << ", floor = " << -psd_tolerance * (1.0 + lmax);
    return os.str();
  }
  return {};
}

SpdMatrix::SpdMatrix(Matrix base, double psd_tolerance)
    : m_(std::move(base)), psd_tol_(psd_tolerance) {
  const std::string msg = spd_violation(m_, psd_tol_);
  if (!msg.empty()) throw InvalidInputError("SpdMatrix: " + msg);
  m_ = symmetrize(m_);
  Eigen::SelfAdjointEigenSolver<Matrix> es(m_, Eigen::EigenvaluesOnly);
  lambda_min_ = es.eigenvalues().minCoeff();
  lambda_max_ = es.eigenvalues().maxCoeff();
}

Matrix symmetrize(const Matrix& a) {
  if (a.rows() != a.cols())
    throw DimensionError("symmetrize: matrix must be square");
  return 0.5 * (a + a.transpose());
}

double log_norm(const Matrix& a) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(symmetrize(a),
                                           Eigen::EigenvaluesOnly);
  return es.eigenvalues().maxCoeff();
}

double spectral_abscissa(const Matrix& a) {
  if (a.rows() != a.cols())
    throw DimensionError("spectral_abscissa: matrix must be square");
  Eigen::EigenSolver<Matrix> es(a, /*computeEigenvectors=*/false);
  return es.eigenvalues().real().maxCoeff();
}

double spectral_norm(const Matrix& a) {
  if (a.size() == 0) return 0.0;
  Eigen::JacobiSVD<Matrix> svd(a);
  return svd.singularValues()(0);
}

Matrix hadamard(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw DimensionError("hadamard: operand dimensions differ");
  return a.cwiseProduct(b);
}

SpdMatrix sqrt_spd(const SpdMatrix& q) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(q.mat());
  Vector d = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  Matrix root = es.eigenvectors() * d.asDiagonal() *
                es.eigenvectors().transpose();
  return SpdMatrix(symmetrize(root), q.psd_tolerance());
}

double min_eigenvalue(const Matrix& sym) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(symmetrize(sym),
                                           Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

double loewner_gap(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw DimensionError("loewner_gap: operand dimensions differ");
  return min_eigenvalue(a - b);
}

bool loewner_geq(const Matrix& a, const Matrix& b, double tol) {
  const double scale_a = 1.0 + a.cwiseAbs().maxCoeff();
  const double asym_a = (a - a.transpose()).cwiseAbs().maxCoeff();
  const double scale_b = 1.0 + b.cwiseAbs().maxCoeff();
  const double asym_b = (b - b.transpose()).cwiseAbs().maxCoeff();
  if (asym_a > 1e-10 * scale_a || asym_b > 1e-10 * scale_b)
    throw InvalidInputError("loewner_geq: operands must be symmetric");
  const double gap = loewner_gap(a, b);
  return gap >= -tol * (1.0 + spectral_norm(a) + spectral_norm(b));
}

SpdMatrix pinv_spd(const SpdMatrix& q, double rel_tol) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(q.mat());
  const Vector& d = es.eigenvalues();
  const double floor = rel_tol * std::max(d.maxCoeff(), 0.0);
  Vector dinv = Vector::Zero(d.size());
  for (Eigen::Index i = 0; i < d.size(); ++i)
    if (d(i) > floor && d(i) > 0.0) dinv(i) = 1.0 / d(i);
  Matrix pinv = es.eigenvectors() * dinv.asDiagonal() *
                es.eigenvectors().transpose();
  return SpdMatrix(symmetrize(pinv), q.psd_tolerance());
}

}  // namespace matlib
}  // namespace kblab
