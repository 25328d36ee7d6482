#ifndef KBLAB_MODEL_HPP
#define KBLAB_MODEL_HPP

#include <string>

#include "kblab/matlib.hpp"

namespace kblab {

/// Linear-Gaussian signal/observation model
///   dX = A X dt + R^{1/2} dW,   dY = C X dt + Sigma^{1/2} dV,
/// with S := C' Sigma^{-1} C derived at construction. R and Sigma must be
/// strictly positive definite.
struct FilterModel {
  Matrix A;                  // r x r drift
  matlib::SpdMatrix R;       // r x r, PD
  Matrix C;                  // r' x r observation
  matlib::SpdMatrix Sigma;   // r' x r', PD
  Matrix S;                  // r x r, = C' Sigma^{-1} C
  Vector x0_mean;            // r
  matlib::SpdMatrix P0;      // r x r

  Eigen::Index dim() const { return A.rows(); }
  Eigen::Index obs_dim() const { return C.rows(); }
};

/// Numerical rank report for the controllability/observability matrices.
struct RankReport {
  Eigen::Index controllability_rank = 0;
  Eigen::Index observability_rank = 0;
  double controllability_sigma_min = 0.0;  // smallest retained singular value
  double observability_sigma_min = 0.0;
  Eigen::Index dim = 0;
  bool full_rank() const {
    return controllability_rank == dim && observability_rank == dim;
  }
};

/// Numerical ranks of [R^{1/2}, A R^{1/2}, ..., A^{r-1} R^{1/2}] and of the
/// stacked [C; CA; ...; CA^{r-1}]. Report-only, never throws.
RankReport check_rank_conditions(const FilterModel& model,
                                 double svd_tol = 1e-10);

enum class RankPolicy { kRequire, kSkip };

/// Build and validate a model. With RankPolicy::kRequire (the default) the
/// controllability/observability conditions are enforced; kSkip admits
/// degenerate models for diagnostic use.
FilterModel make_filter_model(Matrix A, Matrix R, Matrix C, Matrix Sigma,
                              Vector x0_mean, Matrix P0,
                              RankPolicy policy = RankPolicy::kRequire,
                              double svd_tol = 1e-10);

}  // namespace kblab

#endif  // KBLAB_MODEL_HPP
