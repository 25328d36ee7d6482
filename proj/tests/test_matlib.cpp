#include <doctest.h>

#include <sstream>

#include "kblab/matlib.hpp"
#include "kblab/matrix_io.hpp"
#include "kblab/rng.hpp"
#include "oracles.hpp"

using namespace kblab;
using matlib::SpdMatrix;

namespace {

Matrix random_square(Eigen::Index r, rng::Stream& stream) {
  Matrix g(r, r);
  for (Eigen::Index i = 0; i < r; ++i)
    for (Eigen::Index j = 0; j < r; ++j) g(i, j) = stream.next_gaussian();
  return g;
}

Matrix random_spd(Eigen::Index r, rng::Stream& stream, double floor = 0.25) {
  const Matrix g = random_square(r, stream);
  return matlib::symmetrize(g * g.transpose() / double(r)) +
         floor * Matrix::Identity(r, r);
}

}  // namespace

TEST_CASE("symmetrize: fixed points, forced values, idempotence") {
  rng::Stream stream(11);
  const Matrix s = random_spd(3, stream);
  CHECK((matlib::symmetrize(s) - s).norm() == doctest::Approx(0.0));

  Matrix a(2, 2);
  a << 0, 1, 0, 0;
  Matrix expected(2, 2);
  expected << 0, 0.5, 0.5, 0;
  CHECK((matlib::symmetrize(a) - expected).norm() == doctest::Approx(0.0));

  Matrix skew(3, 3);
  skew << 0, 2, -1, -2, 0, 3, 1, -3, 0;
  CHECK(matlib::symmetrize(skew).norm() == doctest::Approx(0.0));

  for (int k = 0; k < 20; ++k) {
    const Matrix m = random_square(4, stream);
    const Matrix once = matlib::symmetrize(m);
    CHECK((matlib::symmetrize(once) - once).norm() <= 1e-14 * (1 + once.norm()));
  }
}

TEST_CASE("log_norm and spectral_abscissa") {
  Matrix d = Matrix::Zero(2, 2);
  d(0, 0) = -1;
  d(1, 1) = -2;
  CHECK(matlib::log_norm(d) == doctest::Approx(-1.0));
  CHECK(matlib::spectral_abscissa(d) == doctest::Approx(-1.0));

  Matrix rot(2, 2);
  rot << 0, -1, 1, 0;
  CHECK(matlib::log_norm(rot) == doctest::Approx(0.0));
  CHECK(matlib::spectral_abscissa(rot) == doctest::Approx(0.0).epsilon(1e-9));

  rng::Stream stream(12);
  for (int k = 0; k < 30; ++k) {
    const Matrix a = random_square(3, stream);
    CHECK(matlib::log_norm(a) >= matlib::spectral_abscissa(a) - 1e-10);
  }
}

TEST_CASE("log_norm bounds the exponential growth") {
  rng::Stream stream(13);
  for (int k = 0; k < 10; ++k) {
    const Matrix a = random_square(4, stream);
    const double mu = matlib::log_norm(a);
    for (double t : {0.3, 1.0, 2.5}) {
      const double growth = matlib::spectral_norm(oracles::expm(a * t));
      CHECK(growth <= std::exp(mu * t) * (1 + 1e-9));
    }
  }
}

TEST_CASE("hadamard: identity, diagonal extraction, monotonicity") {
  rng::Stream stream(14);
  const Matrix a = random_square(3, stream);
  const Matrix j = Matrix::Ones(3, 3);
  CHECK((matlib::hadamard(a, j) - a).norm() == doctest::Approx(0.0));
  const Matrix diag = matlib::hadamard(a, Matrix::Identity(3, 3));
  CHECK((diag - Matrix(a.diagonal().asDiagonal())).norm() ==
        doctest::Approx(0.0));

  CHECK_THROWS_AS(matlib::hadamard(a, Matrix::Ones(2, 2)), DimensionError);

  // P >= Q >= 0 and A >= B >= 0 imply P (had) A >= Q (had) B
  for (int k = 0; k < 40; ++k) {
    const Matrix q = random_spd(4, stream);
    const Matrix w = random_square(4, stream);
    const Matrix p = q + matlib::symmetrize(w * w.transpose());
    const Matrix b = random_spd(4, stream);
    const Matrix v = random_square(4, stream);
    const Matrix a2 = b + matlib::symmetrize(v * v.transpose());
    const Matrix gap = matlib::hadamard(p, a2) - matlib::hadamard(q, b);
    const double scale = 1 + gap.cwiseAbs().maxCoeff();
    CHECK(matlib::min_eigenvalue(gap) >= -1e-10 * scale);
  }
}

TEST_CASE("sqrt_spd: fixed values, square property, Lipschitz bound") {
  CHECK((matlib::sqrt_spd(SpdMatrix(Matrix::Identity(3, 3))).mat() -
         Matrix::Identity(3, 3))
            .norm() == doctest::Approx(0.0));

  Matrix d = Matrix::Zero(2, 2);
  d(0, 0) = 4;
  d(1, 1) = 9;
  Matrix expected = Matrix::Zero(2, 2);
  expected(0, 0) = 2;
  expected(1, 1) = 3;
  CHECK((matlib::sqrt_spd(SpdMatrix(d)).mat() - expected).norm() <= 1e-12);

  rng::Stream stream(15);
  for (int k = 0; k < 30; ++k) {
    const SpdMatrix q(random_spd(4, stream, 0.5));
    const Matrix root = matlib::sqrt_spd(q).mat();
    CHECK((root * root - q.mat()).norm() <= 1e-10 * (1 + q.mat().norm()));
  }

  for (int k = 0; k < 30; ++k) {
    const SpdMatrix q1(random_spd(3, stream, 0.5));
    const SpdMatrix q2(random_spd(3, stream, 0.5));
    const double lhs = matlib::spectral_norm(matlib::sqrt_spd(q1).mat() -
                                             matlib::sqrt_spd(q2).mat());
    const double rhs =
        matlib::spectral_norm(q1.mat() - q2.mat()) /
        (std::sqrt(q1.lambda_min()) + std::sqrt(q2.lambda_min()));
    CHECK(lhs <= rhs * (1 + 1e-10));
  }

  Matrix not_psd = Matrix::Identity(2, 2);
  not_psd(1, 1) = -0.5;
  CHECK_THROWS_AS(SpdMatrix{not_psd}, InvalidInputError);
}

TEST_CASE("loewner_geq: orientation and symmetry requirement") {
  CHECK(matlib::loewner_geq(Matrix::Identity(3, 3), Matrix::Zero(3, 3), 1e-8));
  CHECK_FALSE(
      matlib::loewner_geq(Matrix::Zero(3, 3), Matrix::Identity(3, 3), 1e-8));

  Matrix asym(2, 2);
  asym << 1, 0.5, 0, 1;
  CHECK_THROWS_AS(matlib::loewner_geq(asym, Matrix::Zero(2, 2), 1e-8),
                  InvalidInputError);
}

TEST_CASE("pinv_spd: fixed values and rank-1 closed form") {
  CHECK((matlib::pinv_spd(SpdMatrix(Matrix::Identity(3, 3))).mat() -
         Matrix::Identity(3, 3))
            .norm() <= 1e-13);

  Matrix d = Matrix::Zero(2, 2);
  d(0, 0) = 2;
  Matrix expected = Matrix::Zero(2, 2);
  expected(0, 0) = 0.5;
  CHECK((matlib::pinv_spd(SpdMatrix(d, 1e-9)).mat() - expected).norm() <= 1e-13);

  rng::Stream stream(16);
  Vector v = stream.gaussian_vector(4);
  const Matrix vv = v * v.transpose();
  const Matrix pinv = matlib::pinv_spd(SpdMatrix(vv, 1e-9)).mat();
  const Matrix closed = vv / std::pow(v.squaredNorm(), 2);
  CHECK((pinv - closed).norm() <= 1e-10 * (1 + closed.norm()));

  // Q Q+ Q = Q
  for (int k = 0; k < 20; ++k) {
    const Matrix q = random_spd(4, stream, 0.0);
    const Matrix qp = matlib::pinv_spd(SpdMatrix(q, 1e-9)).mat();
    CHECK((q * qp * q - q).norm() <= 1e-9 * (1 + q.norm()));
  }
}

TEST_CASE("norm equivalence ||A||_2^2 <= ||A||_F^2 <= r ||A||_2^2") {
  rng::Stream stream(17);
  for (int k = 0; k < 30; ++k) {
    const Eigen::Index r = 2 + (k % 4);
    const Matrix a = random_square(r, stream);
    const double two = matlib::spectral_norm(a);
    const double fro = a.norm();
    CHECK(two * two <= fro * fro * (1 + 1e-12));
    CHECK(fro * fro <= double(r) * two * two * (1 + 1e-12));
  }
}

TEST_CASE("SpdMatrix validation uses a relative eigenvalue floor") {
  Matrix m = Matrix::Identity(2, 2);
  m(1, 1) = -1e-12;
  CHECK_NOTHROW(SpdMatrix(m, 1e-10));
  m(1, 1) = -1e-6;
  CHECK_THROWS_AS(SpdMatrix(m, 1e-10), InvalidInputError);
}

TEST_CASE("matrix text format round-trips at full precision") {
  rng::Stream stream(18);
  Matrix m(3, 5);
  for (Eigen::Index i = 0; i < 3; ++i)
    for (Eigen::Index j = 0; j < 5; ++j) m(i, j) = stream.next_gaussian() * 1e3;
  std::stringstream buffer;
  matlib::write_matrix(buffer, m);
  const Matrix back = matlib::read_matrix(buffer, "<memory>");
  CHECK(back.rows() == 3);
  CHECK(back.cols() == 5);
  CHECK((back - m).cwiseAbs().maxCoeff() == 0.0);  // bit-exact
}

TEST_CASE("matrix reader reports file and line on malformed input") {
  std::stringstream buffer("2 2\n1 2\n3\n");
  try {
    matlib::read_matrix(buffer, "bad.txt");
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("bad.txt") != std::string::npos);
    CHECK(msg.find(":3:") != std::string::npos);
  }
}
