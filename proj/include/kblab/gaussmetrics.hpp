#ifndef KBLAB_GAUSSMETRICS_HPP
#define KBLAB_GAUSSMETRICS_HPP

#include <vector>

#include "kblab/matlib.hpp"
#include "kblab/model.hpp"
#include "kblab/regmaps.hpp"
#include "kblab/sde.hpp"

namespace kblab {
namespace gaussmetrics {

struct GaussianLaw {
  Vector mean;
  matlib::SpdMatrix cov;
};

/// Wasserstein-2 distance between Gaussian laws:
/// sqrt(||m1 - m2||^2 + tr(Q1 + Q2 - 2 (Q1^{1/2} Q2 Q1^{1/2})^{1/2})).
/// The inner product is symmetrized before rooting; the trace term is
/// clamped at zero against roundoff.
double w2_gaussian(const GaussianLaw& g1, const GaussianLaw& g2);

/// Relative entropy Ent(g1 | g2); g2 must have a positive definite
/// covariance. Evaluated through the eigenvalues of the congruence
/// Q2^{-1/2} Q1 Q2^{-1/2}, which keeps the log-det term stable and the
/// result nonnegative by construction.
double kl_gaussian(const GaussianLaw& g1, const GaussianLaw& g2);

struct LogDetCheck {
  double lhs = 0.0;  // |log det(I - A)|
  double rhs = 0.0;  // (3/2) sqrt(r) ||A||_2
  bool ok = false;
};

/// Checks |log det(I - A)| <= (3/2) sqrt(r) ||A||_2 for admissible A.
/// Throws InvalidInputError unless ||A||_2 < 1 / (2 sqrt(r)).
LogDetCheck logdet_bound_check(const Matrix& a);

struct GapRow {
  double t = 0.0;
  double ent_lhs = 0.0;
  double ent_rhs = 0.0;
  double w2sq_lhs = 0.0;
  double w2sq_rhs = 0.0;
};

struct GapReport {
  std::vector<GapRow> rows;
  double min_ent_ratio = 0.0;  // min over rows of ent_rhs / ent_lhs
  double min_w2_ratio = 0.0;
  bool all_ok = false;         // every row has rhs >= lhs for both bounds
};

/// Runs the nominal and pi filters on a shared observation path and
/// evaluates both sides of the relative-entropy and Wasserstein bounds at
/// each requested time >= v, substituting the measured Gramian extremal
/// eigenvalues for the varpi parameters.
GapReport entropy_wasserstein_gap_report(const FilterModel& model,
                                         const regmaps::RegMap& map,
                                         const sde::PathBundle& paths,
                                         const matlib::SpdMatrix& q0, double v,
                                         double gramian_step,
                                         const std::vector<double>& t_grid);

}  // namespace gaussmetrics
}  // namespace kblab

#endif  // KBLAB_GAUSSMETRICS_HPP
