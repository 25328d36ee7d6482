#include <doctest.h>

#include "kblab/regmaps.hpp"
#include "kblab/riccati.hpp"
#include "kblab/rng.hpp"
#include "kblab/schemes.hpp"
#include "oracles.hpp"

using namespace kblab;
using matlib::SpdMatrix;

namespace {

// independent brute-force recount of one structural constant
long count_triangles(const Eigen::MatrixXi& labels, int q, int q1, int q2) {
  const Eigen::Index r = labels.rows();
  long expected = -1;
  for (Eigen::Index i = 0; i < r; ++i)
    for (Eigen::Index j = 0; j < r; ++j) {
      if (labels(i, j) != q) continue;
      long count = 0;
      for (Eigen::Index k = 0; k < r; ++k)
        if (labels(i, k) == q1 && labels(k, j) == q2) ++count;
      if (expected < 0) expected = count;
      REQUIRE(expected == count);
    }
  return expected;
}

}  // namespace

TEST_CASE("trivial scheme carries the complete-graph constants") {
  const auto scheme = schemes::trivial_scheme(5);
  CHECK(scheme.classes() == 1);
  CHECK(scheme.valencies()[0] == 1);
  CHECK(scheme.valencies()[1] == 4);
  for (int q = 0; q <= 1; ++q)
    for (int q1 = 0; q1 <= 1; ++q1)
      for (int q2 = 0; q2 <= 1; ++q2)
        CHECK(scheme.structural_constant(q, q1, q2) ==
              count_triangles(scheme.class_labels(), q, q1, q2));
}

TEST_CASE("six-point example: adjacency algebra in exact integers") {
  const auto scheme = schemes::group_divisible_scheme(2, 3);
  CHECK(scheme.points() == 6);
  CHECK(scheme.classes() == 2);
  const Matrix& b0 = scheme.adjacency()[0];
  const Matrix& b1 = scheme.adjacency()[1];
  const Matrix& b2 = scheme.adjacency()[2];
  CHECK((b0 - Matrix::Identity(6, 6)).norm() == 0.0);
  CHECK((b0 + b1 + b2 - Matrix::Ones(6, 6)).norm() == 0.0);
  CHECK((b1 * b1 - (2 * b0 + b1)).norm() == 0.0);
  // the matrix product B1 B2 equals 2 B2 (= v1 J - B1 - B1^2); the zero
  // identity holds for the Hadamard product of the disjoint classes
  CHECK((b1 * b2 - 2 * b2).norm() == 0.0);
  CHECK(b1.cwiseProduct(b2).norm() == 0.0);
}

TEST_CASE("partition axioms are enforced") {
  // a non-symmetric class
  Eigen::MatrixXi bad(3, 3);
  bad << 0, 1, 2, 2, 0, 1, 1, 2, 0;
  CHECK_THROWS_AS(schemes::from_partition(bad), InvalidInputError);

  // diagonal must be class 0
  Eigen::MatrixXi off(2, 2);
  off << 1, 0, 0, 1;
  CHECK_THROWS_AS(schemes::from_partition(off), InvalidInputError);
}

TEST_CASE("distance-regular graphs: K4, C6, and a failing path") {
  const Matrix k4 = Matrix::Ones(4, 4) - Matrix::Identity(4, 4);
  const auto complete = schemes::from_distance_regular_graph(k4);
  CHECK(complete.classes() == 1);
  CHECK((complete.adjacency()[1] - k4).norm() == 0.0);

  const auto cycle = schemes::from_distance_regular_graph(schemes::cycle_graph(6));
  CHECK(cycle.classes() == 3);  // diameter 3: four distance classes with B_0
  CHECK(cycle.valencies()[1] == 2);
  CHECK(cycle.valencies()[3] == 1);
  for (int q = 0; q <= 3; ++q)
    for (int q1 = 0; q1 <= 3; ++q1)
      CHECK(cycle.structural_constant(q, q1, 1) ==
            count_triangles(cycle.class_labels(), q, q1, 1));

  Matrix path = Matrix::Zero(4, 4);
  for (int i = 0; i < 3; ++i) path(i, i + 1) = path(i + 1, i) = 1;
  CHECK_THROWS_AS(schemes::from_distance_regular_graph(path), InvalidInputError);

  Matrix disconnected = Matrix::Zero(4, 4);
  disconnected(0, 1) = disconnected(1, 0) = 1;
  disconnected(2, 3) = disconnected(3, 2) = 1;
  CHECK_THROWS_AS(schemes::from_distance_regular_graph(disconnected),
                  InvalidInputError);
}

TEST_CASE("idempotents: trivial closed form and residuals") {
  const auto trivial = schemes::trivial_scheme(5);
  REQUIRE(trivial.idempotent_count() == 2);
  const Matrix jr = Matrix::Constant(5, 5, 0.2);
  CHECK((trivial.idempotents()[0] - jr).norm() <= 1e-12);
  CHECK((trivial.idempotents()[1] - (Matrix::Identity(5, 5) - jr)).norm() <=
        1e-12);

  for (const auto& scheme :
       {schemes::group_divisible_scheme(2, 3),
        schemes::from_distance_regular_graph(schemes::cycle_graph(6))}) {
    const auto& ds = scheme.idempotents();
    Matrix sum = Matrix::Zero(scheme.points(), scheme.points());
    for (std::size_t i = 0; i < ds.size(); ++i) {
      sum += ds[i];
      for (std::size_t j = 0; j < ds.size(); ++j) {
        const Matrix prod = ds[i] * ds[j];
        if (i == j)
          CHECK((prod - ds[i]).norm() <= 1e-10);
        else
          CHECK(prod.norm() <= 1e-10);
      }
      // trace equals the eigenspace dimension, an integer rank
      const double trace = ds[i].trace();
      CHECK(std::abs(trace - std::round(trace)) <= 1e-10);
      CHECK(std::round(trace) >= 1);
    }
    CHECK((sum - Matrix::Identity(scheme.points(), scheme.points())).norm() <=
          1e-10);
  }
}

TEST_CASE("eigen_table matches direct eigenvalue extraction") {
  const auto scheme = schemes::group_divisible_scheme(2, 3);
  // valencies appear as the eigenvalues on the constants eigenspace
  for (int q = 0; q <= scheme.classes(); ++q)
    CHECK(scheme.eigen_table()(0, q) ==
          doctest::Approx(double(scheme.valencies()[q])));
  // B_q D_k = lambda_k(B_q) D_k
  for (int k = 0; k < scheme.idempotent_count(); ++k)
    for (int q = 0; q <= scheme.classes(); ++q) {
      const Matrix& d = scheme.idempotents()[k];
      CHECK((scheme.adjacency()[q] * d - scheme.eigen_table()(k, q) * d)
                .norm() <= 1e-9);
    }
}

TEST_CASE("project: ring fixed points, unitality, positivity, Pythagoras") {
  const auto scheme = schemes::group_divisible_scheme(2, 3);
  rng::Stream stream(61);

  const Matrix member = scheme.combine_adjacency({0.5, -1.2, 0.3});
  CHECK((scheme.project(member) - member).norm() <= 1e-12);
  CHECK((scheme.project(Matrix::Identity(6, 6)) - Matrix::Identity(6, 6))
            .norm() <= 1e-12);

  for (int k = 0; k < 100; ++k) {
    const Matrix q = regmaps::random_spd(6, stream);
    const Matrix pq = scheme.project(q);
    CHECK(matlib::min_eigenvalue(pq) >= -1e-10 * (1 + q.norm()));
    CHECK(pq.trace() == doctest::Approx(q.trace()).epsilon(1e-12));
    CHECK((scheme.project(pq) - pq).norm() <= 1e-12 * (1 + q.norm()));
    // Frobenius Pythagoras
    const double total = q.squaredNorm();
    const double split = pq.squaredNorm() + (q - pq).squaredNorm();
    CHECK(split == doctest::Approx(total).epsilon(1e-10));
    // the adjacency-basis and idempotent-basis forms agree
    CHECK((scheme.project_via_idempotents(q) - pq).norm() <=
          1e-10 * (1 + q.norm()));
  }
}

TEST_CASE("membership and decompose") {
  const auto scheme = schemes::group_divisible_scheme(2, 3);
  rng::Stream stream(62);

  CHECK(scheme.membership(scheme.combine_adjacency({1.0, 2.0, -0.5})));
  Matrix spiked = Matrix::Identity(6, 6);
  spiked(0, 1) = spiked(1, 0) = 1.0;  // breaks class-1 constancy
  CHECK_FALSE(scheme.membership(spiked));
  CHECK(scheme.membership(scheme.project(regmaps::random_spd(6, stream))));

  const auto id_coeffs = scheme.decompose(Matrix::Identity(6, 6));
  for (double c : id_coeffs) CHECK(c == doctest::Approx(1.0));

  const auto j_coeffs = scheme.decompose(Matrix::Ones(6, 6));
  CHECK(j_coeffs[0] == doctest::Approx(6.0));
  for (std::size_t k = 1; k < j_coeffs.size(); ++k)
    CHECK(std::abs(j_coeffs[k]) <= 1e-10);

  const Matrix member = scheme.combine_adjacency({0.3, 1.4, -0.6});
  CHECK((scheme.combine(scheme.decompose(member)) - member).norm() <= 1e-10);

  CHECK_THROWS_AS(scheme.decompose(spiked), InvalidInputError);
}

TEST_CASE("scalar closed form: fixed point, integrator cross-check, branches") {
  CHECK(schemes::scalar_riccati_closed_form(0, 1, 1, 1.0, 3.7) ==
        doctest::Approx(1.0));

  // RK4 oracle for the scalar equation d a = 2 a_q a + r - s a^2
  auto rk4 = [](double a, double r, double s, double alpha0, double t_end) {
    double alpha = alpha0;
    const long steps = std::llround(t_end / 1e-5);
    const double h = t_end / double(steps);
    auto f = [&](double x) { return 2 * a * x + r - s * x * x; };
    for (long k = 0; k < steps; ++k) {
      const double k1 = f(alpha);
      const double k2 = f(alpha + 0.5 * h * k1);
      const double k3 = f(alpha + 0.5 * h * k2);
      const double k4 = f(alpha + h * k3);
      alpha += h / 6 * (k1 + 2 * k2 + 2 * k3 + k4);
    }
    return alpha;
  };
  CHECK(schemes::scalar_riccati_closed_form(0, 1, 1, 4.0, 1.0) ==
        doctest::Approx(rk4(0, 1, 1, 4.0, 1.0)).epsilon(1e-8));
  CHECK(schemes::scalar_riccati_closed_form(-0.4, 1.3, 0.8, 0.2, 2.0) ==
        doctest::Approx(rk4(-0.4, 1.3, 0.8, 0.2, 2.0)).epsilon(1e-8));

  // s = 0 branches solve the linear equation
  CHECK(schemes::scalar_riccati_closed_form(0.3, 0.7, 0.0, 1.1, 2.0) ==
        doctest::Approx(rk4(0.3, 0.7, 0.0, 1.1, 2.0)).epsilon(1e-8));
  CHECK(schemes::scalar_riccati_closed_form(0.0, 0.7, 0.0, 1.1, 2.0) ==
        doctest::Approx(1.1 + 0.7 * 2.0));
}

TEST_CASE("matrix closed form matches the RK4 flow on the six-point scheme") {
  const auto scheme = std::make_shared<schemes::AssociationScheme>(
      schemes::group_divisible_scheme(2, 3));
  const Matrix a = scheme->combine({-0.2, -0.5, -0.9});
  const Matrix r = scheme->combine({1.0, 0.8, 1.3});
  const Matrix s = scheme->combine({1.2, 0.7, 1.0});
  const Matrix p0 = scheme->combine({1.8, 0.6, 1.1});
  const Matrix c = matlib::sqrt_spd(SpdMatrix(s, 1e-10)).mat();
  const FilterModel model =
      make_filter_model(a, r, c, Matrix::Identity(6, 6), Vector::Zero(6), p0);

  const auto coeffs =
      schemes::extract_coefficients(*scheme, a, r, model.S, p0);
  const auto traj = riccati::flow(model, riccati::Nominal{}, model.P0, 5.0, 5e-4);
  for (double t : {0.0, 0.5, 1.5, 3.0, 5.0}) {
    const Matrix closed =
        schemes::scheme_riccati_closed_form(*scheme, coeffs, t).mat();
    CHECK((closed - traj.state_at(t)).norm() <= 1e-6 * (1 + closed.norm()));
  }

  // extraction refuses non-members
  Matrix bad = a;
  bad(0, 1) += 0.5;
  CHECK_THROWS_AS(schemes::extract_coefficients(*scheme, bad, r, model.S, p0),
                  InvalidInputError);
}

TEST_CASE("long-time limit approaches z2 at rate 2 sqrt(a^2 + s r)") {
  const double a = -0.3, r = 1.1, s = 0.9, alpha0 = 3.0;
  const double z2 = schemes::scalar_riccati_limit(a, r, s);
  const double rate = 2.0 * std::sqrt(a * a + s * r);
  std::vector<double> ts, logs;
  for (double t = 2.0; t <= 5.0; t += 0.05) {
    ts.push_back(t);
    logs.push_back(
        std::log(std::abs(schemes::scalar_riccati_closed_form(a, r, s, alpha0, t) - z2)));
  }
  const double slope = oracles::ls_slope(ts, logs);
  CHECK(std::abs(-slope - rate) <= 0.05 * rate);
}
