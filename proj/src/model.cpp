#include "kblab/model.hpp"

#include <sstream>

namespace kblab {

namespace {

Eigen::Index numerical_rank(const Matrix& m, double svd_tol, double* sigma_min) {
  Eigen::JacobiSVD<Matrix> svd(m);
  const auto& sv = svd.singularValues();
  if (sv.size() == 0 || sv(0) == 0.0) {
    *sigma_min = 0.0;
    return 0;
  }
  Eigen::Index rank = 0;
  double smallest = sv(0);
  for (Eigen::Index i = 0; i < sv.size(); ++i) {
    if (sv(i) >= svd_tol * sv(0)) {
      rank = i + 1;
      smallest = sv(i);
    }
  }
  *sigma_min = smallest;
  return rank;
}

}  // namespace

RankReport check_rank_conditions(const FilterModel& model, double svd_tol) {
  const Eigen::Index r = model.dim();
  RankReport report;
  report.dim = r;

  const Matrix r_half = matlib::sqrt_spd(model.R).mat();
  Matrix ctrb(r, r * r);
  Matrix block = r_half;
  for (Eigen::Index k = 0; k < r; ++k) {
    ctrb.middleCols(k * r, r) = block;
    block = model.A * block;
  }
  report.controllability_rank =
      numerical_rank(ctrb, svd_tol, &report.controllability_sigma_min);

  const Eigen::Index rp = model.obs_dim();
  Matrix obsv(rp * r, r);
  Matrix row = model.C;
  for (Eigen::Index k = 0; k < r; ++k) {
    obsv.middleRows(k * rp, rp) = row;
    row = row * model.A;
  }
  report.observability_rank =
      numerical_rank(obsv, svd_tol, &report.observability_sigma_min);
  return report;
}

FilterModel make_filter_model(Matrix A, Matrix R, Matrix C, Matrix Sigma,
                              Vector x0_mean, Matrix P0, RankPolicy policy,
                              double svd_tol) {
  const Eigen::Index r = A.rows();
  if (A.cols() != r) throw DimensionError("FilterModel: A must be square");
  if (R.rows() != r || R.cols() != r)
    throw DimensionError("FilterModel: R must be r x r");
  if (C.cols() != r) throw DimensionError("FilterModel: C must have r columns");
  const Eigen::Index rp = C.rows();
  if (Sigma.rows() != rp || Sigma.cols() != rp)
    throw DimensionError("FilterModel: Sigma must be r' x r'");
  if (x0_mean.size() != r)
    throw DimensionError("FilterModel: x0_mean must have length r");
  if (P0.rows() != r || P0.cols() != r)
    throw DimensionError("FilterModel: P0 must be r x r");

  FilterModel model;
  model.A = std::move(A);
  model.R = matlib::SpdMatrix(std::move(R));
  model.Sigma = matlib::SpdMatrix(std::move(Sigma));
  if (model.R.lambda_min() <= 0.0)
    throw InvalidInputError("FilterModel: R must be strictly positive definite");
  if (model.Sigma.lambda_min() <= 0.0)
    throw InvalidInputError("FilterModel: Sigma must be strictly positive definite");
  model.C = std::move(C);
  model.S = matlib::symmetrize(
      model.C.transpose() *
      model.Sigma.mat().llt().solve(model.C));
  model.x0_mean = std::move(x0_mean);
  model.P0 = matlib::SpdMatrix(std::move(P0));

  if (policy == RankPolicy::kRequire) {
    const RankReport report = check_rank_conditions(model, svd_tol);
    if (!report.full_rank()) {
      std::ostringstream os;
      os << "FilterModel: rank conditions violated (controllability rank "
         << report.controllability_rank << ", observability rank "
         << report.observability_rank << ", need " << r << ")";
      throw InvalidInputError(os.str());
    }
  }
  return model;
}

}  // namespace kblab
