#include <doctest.h>

#include "kblab/gaussmetrics.hpp"
#include "kblab/regmaps.hpp"
#include "kblab/rng.hpp"
#include "kblab/sde.hpp"
#include "oracles.hpp"

using namespace kblab;
using gaussmetrics::GaussianLaw;
using matlib::SpdMatrix;

namespace {

GaussianLaw random_law(Eigen::Index r, rng::Stream& stream) {
  return {stream.gaussian_vector(r), SpdMatrix(regmaps::random_spd(r, stream))};
}

}  // namespace

TEST_CASE("w2_gaussian: coincidence, mean shifts, scalar reduction") {
  rng::Stream stream(71);
  const GaussianLaw g = random_law(3, stream);
  CHECK(gaussmetrics::w2_gaussian(g, g) <= 1e-9);

  Vector d(3);
  d << 0.5, -1.0, 2.0;
  const GaussianLaw shifted{g.mean + d, g.cov};
  CHECK(gaussmetrics::w2_gaussian(g, shifted) ==
        doctest::Approx(d.norm()).epsilon(1e-10));

  const GaussianLaw s1{Vector::Constant(1, 0.3),
                       SpdMatrix(Matrix::Constant(1, 1, 2.0))};
  const GaussianLaw s2{Vector::Constant(1, -0.7),
                       SpdMatrix(Matrix::Constant(1, 1, 0.5))};
  const double expected = std::sqrt(std::pow(0.3 + 0.7, 2) +
                                    std::pow(std::sqrt(2.0) - std::sqrt(0.5), 2));
  CHECK(gaussmetrics::w2_gaussian(s1, s2) == doctest::Approx(expected));
}

TEST_CASE("w2_gaussian is a metric on sampled laws") {
  rng::Stream stream(72);
  for (int k = 0; k < 20; ++k) {
    const GaussianLaw a = random_law(3, stream);
    const GaussianLaw b = random_law(3, stream);
    const GaussianLaw c = random_law(3, stream);
    const double ab = gaussmetrics::w2_gaussian(a, b);
    const double ba = gaussmetrics::w2_gaussian(b, a);
    CHECK(std::abs(ab - ba) <= 1e-10 * (1 + ab));
    CHECK(gaussmetrics::w2_gaussian(a, c) <=
          ab + gaussmetrics::w2_gaussian(b, c) + 1e-10);
    CHECK(ab >= 0.0);
  }
}

TEST_CASE("w2_gaussian on commuting covariances reduces to the sqrt gap") {
  rng::Stream stream(73);
  const Matrix basis = regmaps::random_spd(3, stream);
  Eigen::SelfAdjointEigenSolver<Matrix> es(basis);
  const Matrix v = es.eigenvectors();
  Vector d1(3), d2(3);
  d1 << 0.5, 1.5, 2.5;
  d2 << 1.0, 0.4, 3.0;
  const Matrix q1 = v * d1.asDiagonal() * v.transpose();
  const Matrix q2 = v * d2.asDiagonal() * v.transpose();
  const GaussianLaw g1{Vector::Zero(3), SpdMatrix(q1)};
  const GaussianLaw g2{Vector::Zero(3), SpdMatrix(q2)};
  const double w2 = gaussmetrics::w2_gaussian(g1, g2);
  const Matrix root_gap = matlib::sqrt_spd(g1.cov).mat() -
                          matlib::sqrt_spd(g2.cov).mat();
  const double expected_sq = (root_gap * root_gap).trace();
  CHECK(w2 * w2 <= expected_sq + 1e-10);
  CHECK(w2 * w2 == doctest::Approx(expected_sq).epsilon(1e-9));
}

TEST_CASE("kl_gaussian: coincidence, quadratic term, nonnegativity") {
  rng::Stream stream(74);
  const GaussianLaw g = random_law(3, stream);
  CHECK(gaussmetrics::kl_gaussian(g, g) <= 1e-11);

  Vector d(3);
  d << 0.2, -0.4, 0.6;
  const GaussianLaw id1{d, SpdMatrix(Matrix::Identity(3, 3))};
  const GaussianLaw id2{Vector::Zero(3), SpdMatrix(Matrix::Identity(3, 3))};
  CHECK(gaussmetrics::kl_gaussian(id1, id2) ==
        doctest::Approx(0.5 * d.squaredNorm()).epsilon(1e-12));

  for (int k = 0; k < 30; ++k) {
    const GaussianLaw a = random_law(3, stream);
    const GaussianLaw b = random_law(3, stream);
    CHECK(gaussmetrics::kl_gaussian(a, b) >= -1e-12);
  }

  Matrix singular = Matrix::Identity(2, 2);
  singular(1, 1) = 0.0;
  CHECK_THROWS_AS(
      gaussmetrics::kl_gaussian(id2, GaussianLaw{Vector::Zero(2),
                                                 SpdMatrix(singular, 1e-9)}),
      Error);
}

TEST_CASE("kl_gaussian matches a Monte Carlo log-density-ratio oracle") {
  Matrix q1(2, 2), q2(2, 2);
  q1 << 1.0, 0.4, 0.4, 0.9;
  q2 << 0.8, -0.1, -0.1, 1.4;
  Vector m1(2), m2(2);
  m1 << 0.1, -0.2;
  m2 << 0.5, 0.3;
  const GaussianLaw g1{m1, SpdMatrix(q1)};
  const GaussianLaw g2{m2, SpdMatrix(q2)};

  rng::Stream stream(75);
  const Matrix root1 = matlib::sqrt_spd(g1.cov).mat();
  const Matrix q1i = q1.inverse();
  const Matrix q2i = q2.inverse();
  const double logdet_ratio = std::log(q2.determinant() / q1.determinant());
  const int samples = 100000;
  double acc = 0.0, acc2 = 0.0;
  for (int k = 0; k < samples; ++k) {
    const Vector x = m1 + root1 * stream.gaussian_vector(2);
    const double lr = 0.5 * (logdet_ratio - (x - m1).dot(q1i * (x - m1)) +
                             (x - m2).dot(q2i * (x - m2)));
    acc += lr;
    acc2 += lr * lr;
  }
  const double mc = acc / samples;
  const double se = std::sqrt((acc2 / samples - mc * mc) / samples);
  CHECK(std::abs(gaussmetrics::kl_gaussian(g1, g2) - mc) <= 3 * se);
}

TEST_CASE("logdet_bound_check: zero matrix and precondition") {
  const auto zero = gaussmetrics::logdet_bound_check(Matrix::Zero(3, 3));
  CHECK(zero.lhs == 0.0);
  CHECK(zero.rhs == 0.0);
  CHECK(zero.ok);

  CHECK_THROWS_AS(gaussmetrics::logdet_bound_check(Matrix::Identity(3, 3)),
                  InvalidInputError);
}

TEST_CASE("logdet_bound_check documents the scaled-identity counterexample") {
  // r = 2 with small c: |2 log(1-c)| ~ 2c <= 1.5 sqrt(2) c holds
  const auto ok2 = gaussmetrics::logdet_bound_check(0.01 * Matrix::Identity(2, 2));
  CHECK(ok2.ok);

  // r = 3 with small c: lhs ~ 3c exceeds 1.5 sqrt(3) c ~ 2.6c, so the
  // stated display fails on admissible input and the checker reports it
  const auto bad3 = gaussmetrics::logdet_bound_check(0.01 * Matrix::Identity(3, 3));
  CHECK(std::abs(bad3.lhs - std::abs(3 * std::log(0.99))) <= 1e-12);
  CHECK(std::abs(bad3.rhs - 1.5 * std::sqrt(3.0) * 0.01) <= 1e-12);
  CHECK_FALSE(bad3.ok);

  // r = 2 near the admissible norm boundary fails as well
  const auto bad2 = gaussmetrics::logdet_bound_check(0.35 * Matrix::Identity(2, 2));
  CHECK_FALSE(bad2.ok);

  // the corrected right-hand side (3/2) sqrt(r) ||A||_F covers both cases
  for (const Matrix& a :
       {Matrix(0.01 * Matrix::Identity(3, 3)),
        Matrix(0.35 * Matrix::Identity(2, 2))}) {
    const double lhs = std::abs(std::log(
        (Matrix::Identity(a.rows(), a.rows()) - a).determinant()));
    CHECK(lhs <= 1.5 * std::sqrt(double(a.rows())) * a.norm());
  }
}

TEST_CASE("gap report: identity map has both sides zero") {
  Matrix a(2, 2), r(2, 2);
  a << -0.6, 0.15, 0.1, -0.8;
  r << 0.8, 0.2, 0.2, 0.9;
  const FilterModel model = make_filter_model(
      a, r, Matrix::Identity(2, 2), Matrix::Identity(2, 2), Vector::Zero(2),
      Matrix::Identity(2, 2));
  const auto paths = sde::simulate_signal_obs(model, 2.0, 1e-3, 77);
  const auto report = gaussmetrics::entropy_wasserstein_gap_report(
      model, regmaps::make_identity(), paths, model.P0, 1.0, 1e-3,
      {1.0, 1.5, 2.0});
  CHECK(report.all_ok);
  for (const auto& row : report.rows) {
    CHECK(row.ent_lhs <= 1e-12);
    CHECK(row.w2sq_lhs <= 1e-12);
  }

  CHECK_THROWS_AS(gaussmetrics::entropy_wasserstein_gap_report(
                      model, regmaps::make_identity(), paths, model.P0, 1.0,
                      1e-3, {0.5}),
                  InvalidInputError);
}
