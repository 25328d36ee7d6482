#include "kblab/gaussmetrics.hpp"

#include <cmath>
#include <limits>

#include "kblab/riccati.hpp"

namespace kblab {
namespace gaussmetrics {

double w2_gaussian(const GaussianLaw& g1, const GaussianLaw& g2) {
  if (g1.mean.size() != g2.mean.size())
    throw DimensionError("w2_gaussian: dimension mismatch");
  const Matrix& q1 = g1.cov.mat();
  const Matrix& q2 = g2.cov.mat();
  const Matrix root1 = matlib::sqrt_spd(g1.cov).mat();
  const Matrix inner = matlib::symmetrize(root1 * q2 * root1);
  const Matrix cross = matlib::sqrt_spd(matlib::SpdMatrix(inner, 1e-9)).mat();
  const double trace_term =
      std::max(0.0, q1.trace() + q2.trace() - 2.0 * cross.trace());
  return std::sqrt((g1.mean - g2.mean).squaredNorm() + trace_term);
}

double kl_gaussian(const GaussianLaw& g1, const GaussianLaw& g2) {
  if (g1.mean.size() != g2.mean.size())
    throw DimensionError("kl_gaussian: dimension mismatch");
  if (g2.cov.lambda_min() <= 0.0)
    throw InvalidInputError("kl_gaussian: reference covariance is singular");
  const Eigen::Index r = g1.mean.size();

  // congruence M = Q2^{-1/2} Q1 Q2^{-1/2}; KL = 1/2 [sum(lam - 1 - log lam)
  // + (m1-m2)' Q2^{-1} (m1-m2)]
  Eigen::SelfAdjointEigenSolver<Matrix> es2(g2.cov.mat());
  const Vector d2 = es2.eigenvalues();
  const Matrix q2_inv_half = es2.eigenvectors() *
                             d2.cwiseInverse().cwiseSqrt().asDiagonal() *
                             es2.eigenvectors().transpose();
  const Matrix m = matlib::symmetrize(q2_inv_half * g1.cov.mat() * q2_inv_half);
  Eigen::SelfAdjointEigenSolver<Matrix> es(m, Eigen::EigenvaluesOnly);

  double sum = 0.0;
  for (Eigen::Index i = 0; i < r; ++i) {
    const double lam = es.eigenvalues()(i);
    if (lam <= 0.0)
      return std::numeric_limits<double>::infinity();  // g1 degenerate w.r.t. g2
    sum += lam - 1.0 - std::log(lam);
  }
  const Vector diff = q2_inv_half * (g1.mean - g2.mean);
  return 0.5 * (sum + diff.squaredNorm());
}

LogDetCheck logdet_bound_check(const Matrix& a) {
  if (a.rows() != a.cols())
    throw DimensionError("logdet_bound_check: matrix must be square");
  const double r = static_cast<double>(a.rows());
  const double norm = matlib::spectral_norm(a);
  if (!(norm < 0.5 / std::sqrt(r)))
    throw InvalidInputError(
        "logdet_bound_check: requires ||A||_2 < 1/(2 sqrt(r))");
  const Matrix m = Matrix::Identity(a.rows(), a.rows()) - a;
  const double det = m.fullPivLu().determinant();
  LogDetCheck check;
  check.lhs = std::abs(std::log(det));
  check.rhs = 1.5 * std::sqrt(r) * norm;
  check.ok = check.lhs <= check.rhs + 1e-12;
  return check;
}

GapReport entropy_wasserstein_gap_report(const FilterModel& model,
                                         const regmaps::RegMap& map,
                                         const sde::PathBundle& paths,
                                         const matlib::SpdMatrix& q0, double v,
                                         double gramian_step,
                                         const std::vector<double>& t_grid) {
  for (double t : t_grid)
    if (t < v)
      throw InvalidInputError(
          "entropy_wasserstein_gap_report: bounds require t >= v");

  const auto nominal = sde::kalman_bucy_filter(model, regmaps::make_identity(),
                                               paths, model.x0_mean, q0);
  const auto perturbed =
      sde::kalman_bucy_filter(model, map, paths, model.x0_mean, q0);

  const riccati::GramianSet g = riccati::gramians(model, v, gramian_step);
  const double ent_const =
      g.O_v_of_C.lambda_max() + 1.0 / g.C_v.lambda_min();
  const double w2_const = 4.0 * static_cast<double>(model.dim()) *
                          (g.C_v_of_O.lambda_max() + 1.0 / g.O_v.lambda_min()) *
                          ent_const;
  const double sqrt_r = std::sqrt(static_cast<double>(model.dim()));

  GapReport report;
  report.all_ok = true;
  report.min_ent_ratio = std::numeric_limits<double>::infinity();
  report.min_w2_ratio = std::numeric_limits<double>::infinity();

  for (double t : t_grid) {
    const auto idx = static_cast<std::size_t>(std::llround(t / paths.step));
    if (idx >= nominal.size())
      throw InvalidInputError("entropy_wasserstein_gap_report: t beyond path");
    const auto& nom = nominal[idx];
    const auto& pert = perturbed[idx];
    const double mean_gap_sq = (pert.mean - nom.mean).squaredNorm();
    const Matrix cov_gap = pert.cov - nom.cov;
    const double cov_gap_norm = matlib::spectral_norm(cov_gap);

    GapRow row;
    row.t = nom.t;
    const GaussianLaw law_pi{pert.mean, matlib::SpdMatrix(pert.cov, 1e-8)};
    const GaussianLaw law_nom{nom.mean, matlib::SpdMatrix(nom.cov, 1e-8)};
    row.ent_lhs = kl_gaussian(law_pi, law_nom);
    row.ent_rhs =
        0.5 * ent_const * (mean_gap_sq + 2.5 * sqrt_r * cov_gap_norm);
    const double w2 = w2_gaussian(law_pi, law_nom);
    row.w2sq_lhs = w2 * w2;
    row.w2sq_rhs = mean_gap_sq + cov_gap.trace() + w2_const * cov_gap_norm;
    report.rows.push_back(row);

    if (row.ent_rhs < row.ent_lhs - 1e-12 || row.w2sq_rhs < row.w2sq_lhs - 1e-12)
      report.all_ok = false;
    if (row.ent_lhs > 0.0)
      report.min_ent_ratio = std::min(report.min_ent_ratio, row.ent_rhs / row.ent_lhs);
    if (row.w2sq_lhs > 0.0)
      report.min_w2_ratio = std::min(report.min_w2_ratio, row.w2sq_rhs / row.w2sq_lhs);
  }
  return report;
}

}  // namespace gaussmetrics
}  // namespace kblab
