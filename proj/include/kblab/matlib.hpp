#ifndef KBLAB_MATLIB_HPP
#define KBLAB_MATLIB_HPP

#include <Eigen/Dense>

#include "kblab/errors.hpp"

namespace kblab {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

namespace matlib {

/// Symmetric positive semi-definite matrix with validated invariants.
///
/// Construction checks symmetry (relative 1e-12) and the eigenvalue floor
///   lambda_min >= -psd_tolerance * (1 + lambda_max).
/// The relative floor absorbs the roundoff that Riccati integration
/// accumulates at the semidefinite boundary.
class SpdMatrix {
 public:
  static constexpr double kDefaultPsdTol = 1e-10;

  SpdMatrix() = default;
  explicit SpdMatrix(Matrix base, double psd_tolerance = kDefaultPsdTol);

  const Matrix& mat() const { return m_; }
  Eigen::Index dim() const { return m_.rows(); }
  double psd_tolerance() const { return psd_tol_; }

  double lambda_min() const { return lambda_min_; }
  double lambda_max() const { return lambda_max_; }

 private:
  Matrix m_;
  double psd_tol_ = kDefaultPsdTol;
  double lambda_min_ = 0.0;
  double lambda_max_ = 0.0;
};

/// (A + A')/2. Idempotent.
Matrix symmetrize(const Matrix& a);

/// Logarithmic norm mu(A) = lambda_max((A + A')/2).
/// Satisfies mu(A) >= spectral_abscissa(A) and ||exp(At)||_2 <= exp(mu(A) t).
double log_norm(const Matrix& a);

/// Largest real part over the spectrum of A.
double spectral_abscissa(const Matrix& a);

/// Spectral (operator 2-) norm, largest singular value.
double spectral_norm(const Matrix& a);

/// Entrywise (Hadamard-Schur) product. Throws DimensionError on mismatch.
Matrix hadamard(const Matrix& a, const Matrix& b);

/// Principal square root of a PSD matrix via symmetric eigendecomposition.
/// Negative eigenvalues within the validation tolerance are clamped to zero.
SpdMatrix sqrt_spd(const SpdMatrix& q);

/// Loewner order test: true iff lambda_min(A - B) >= -tol*(1 + ||A|| + ||B||).
/// Uses the smallest eigenvalue of the difference so callers get a graded
/// violation magnitude through loewner_gap.
bool loewner_geq(const Matrix& a, const Matrix& b, double tol);

/// lambda_min(A - B); nonnegative (up to roundoff) when A >= B.
double loewner_gap(const Matrix& a, const Matrix& b);

/// Eigen-clipped Moore-Penrose pseudo-inverse of a PSD matrix: eigenvalues
/// below rel_tol * lambda_max are inverted to zero.
SpdMatrix pinv_spd(const SpdMatrix& q, double rel_tol = 1e-12);

/// Convenience: lambda_min of a symmetric matrix.
double min_eigenvalue(const Matrix& sym);

/// Validation helper used by SpdMatrix and by flow diagnostics. Returns a
/// nonempty message on violation, empty string when the matrix passes.
std::string spd_violation(const Matrix& m, double psd_tolerance);

}  // namespace matlib
}  // namespace kblab

#endif  // KBLAB_MATLIB_HPP
