#include <doctest.h>

#include "kblab/gaussmetrics.hpp"
#include "kblab/regmaps.hpp"
#include "kblab/riccati.hpp"
#include "kblab/rng.hpp"
#include "kblab/schemes.hpp"
#include "kblab/sde.hpp"
#include "oracles.hpp"

using namespace kblab;
using matlib::SpdMatrix;

namespace {

FilterModel scalar_model(double a, double r, double s, double p0 = 1.0) {
  return make_filter_model(Matrix::Constant(1, 1, a), Matrix::Constant(1, 1, r),
                           Matrix::Constant(1, 1, std::sqrt(s)),
                           Matrix::Identity(1, 1), Vector::Zero(1),
                           Matrix::Constant(1, 1, p0));
}

FilterModel stable_2d() {
  Matrix a(2, 2), r(2, 2), p0(2, 2);
  a << -0.7, 0.2, 0.1, -0.9;
  r << 0.9, 0.15, 0.15, 0.8;
  p0 << 0.8, 0.1, 0.1, 0.9;
  return make_filter_model(a, r, Matrix::Identity(2, 2), Matrix::Identity(2, 2),
                           Vector::Zero(2), p0);
}

// discrete-time Kalman filter on the Euler-discretized system, driven by the
// same observation increments
std::vector<Vector> discrete_kalman(const FilterModel& model,
                                    const sde::PathBundle& paths,
                                    const Vector& x0, const Matrix& q0) {
  const Eigen::Index r = model.dim();
  const Eigen::Index rp = model.obs_dim();
  const double h = paths.step;
  const Matrix f = Matrix::Identity(r, r) + model.A * h;
  const Matrix obs = model.C * h;
  const Matrix noise = model.Sigma.mat() * h;

  std::vector<Vector> means{x0};
  Vector m = x0;
  Matrix p = q0;
  for (std::size_t k = 0; k < paths.steps(); ++k) {
    const Vector m_pred = f * m;
    const Matrix p_pred = f * p * f.transpose() + model.R.mat() * h;
    const Matrix innov_cov = obs * p_pred * obs.transpose() + noise;
    const Matrix gain =
        p_pred * obs.transpose() * innov_cov.llt().solve(Matrix::Identity(rp, rp));
    m = m_pred + gain * (paths.obs_increments[k] - obs * m_pred);
    p = (Matrix::Identity(r, r) - gain * obs) * p_pred;
    means.push_back(m);
  }
  return means;
}

}  // namespace

TEST_CASE("simulate_signal_obs: determinism and pure-noise observations") {
  const FilterModel model = stable_2d();
  const auto a = sde::simulate_signal_obs(model, 1.0, 1e-2, 7);
  const auto b = sde::simulate_signal_obs(model, 1.0, 1e-2, 7);
  for (std::size_t k = 0; k < a.signal.size(); ++k)
    CHECK((a.signal[k] - b.signal[k]).norm() == 0.0);
  const auto c = sde::simulate_signal_obs(model, 1.0, 1e-2, 8);
  CHECK((a.signal.back() - c.signal.back()).norm() > 0.0);

  // C = 0: observation increments are pure noise with variance Sigma * step
  const double sigma_var = 1.7;
  const FilterModel blind = make_filter_model(
      Matrix::Constant(1, 1, -0.2), Matrix::Identity(1, 1), Matrix::Zero(1, 1),
      Matrix::Constant(1, 1, sigma_var), Vector::Zero(1),
      Matrix::Identity(1, 1), RankPolicy::kSkip);
  const double step = 1e-2;
  const auto noise = sde::simulate_signal_obs(blind, 100.0, step, 21);
  double acc = 0.0, acc2 = 0.0;
  for (const Vector& dy : noise.obs_increments) {
    acc += dy(0);
    acc2 += dy(0) * dy(0);
  }
  const double n = double(noise.steps());
  const double mean = acc / n;
  const double var = acc2 / n - mean * mean;
  const double expected = sigma_var * step;
  CHECK(std::abs(var - expected) <= 3.0 * expected * std::sqrt(2.0 / n));
}

TEST_CASE("signal variance grows like P0 + t Id when A = 0") {
  const FilterModel model = make_filter_model(
      Matrix::Zero(1, 1), Matrix::Identity(1, 1), Matrix::Identity(1, 1),
      Matrix::Identity(1, 1), Vector::Zero(1), Matrix::Constant(1, 1, 0.5));
  const int paths = 10000;
  const double t_end = 1.0, step = 1e-2;
  double acc = 0.0, acc2 = 0.0;
  for (int k = 0; k < paths; ++k) {
    const auto path = sde::simulate_signal_obs(model, t_end, step,
                                               rng::derive_key(900, k));
    const double x = path.signal.back()(0);
    acc += x;
    acc2 += x * x;
  }
  const double mean = acc / paths;
  const double var = acc2 / paths - mean * mean;
  const double expected = 0.5 + t_end;  // P0 + t
  // 3-sigma band for a Gaussian sample variance
  CHECK(std::abs(var - expected) <=
        3.0 * expected * std::sqrt(2.0 / double(paths)));
}

TEST_CASE("kalman_bucy_filter: vanishing gain decouples mean and covariance") {
  const Eigen::Index r = 2;
  Matrix a(2, 2);
  a << -0.4, 0.3, -0.2, -0.6;
  const FilterModel blind = make_filter_model(
      a, Matrix::Identity(r, r), Matrix::Zero(1, r), Matrix::Identity(1, 1),
      Vector::Zero(r), Matrix::Identity(r, r), RankPolicy::kSkip);
  const double step = 1e-3, t_end = 1.0;
  const auto paths = sde::simulate_signal_obs(blind, t_end, step, 5);
  Vector x0(2);
  x0 << 1.0, -0.5;
  const auto states = sde::kalman_bucy_filter(blind, regmaps::make_identity(),
                                              paths, x0, blind.P0);

  // gain is zero: the mean follows the Euler recursion exactly
  Vector m = x0;
  for (std::size_t k = 0; k < paths.steps(); ++k) {
    m += a * m * step;
    CHECK((states[k + 1].mean - m).norm() <= 1e-13 * (1 + m.norm()));
  }

  // covariance follows the S = 0 Lyapunov flow: P(t) = e^{At} P0 e^{A't} + C_t
  const Matrix eat = oracles::expm(a * t_end);
  Matrix quad = Matrix::Zero(r, r);
  const int n_quad = 2000;
  for (int i = 0; i <= n_quad; ++i) {
    const double s = t_end * i / n_quad;
    const Matrix e = oracles::expm(a * s);
    const double w = (i == 0 || i == n_quad) ? 0.5 : 1.0;
    quad += w * e * e.transpose() * (t_end / n_quad);
  }
  const Matrix expected = eat * eat.transpose() + quad;
  CHECK((states.back().cov - expected).norm() <= 1e-5 * (1 + expected.norm()));
}

TEST_CASE("kalman_bucy_filter: stationary start stays at the ARE fixed point") {
  const FilterModel model = stable_2d();
  const SpdMatrix p = riccati::are_solve(model, riccati::Nominal{});
  const auto paths = sde::simulate_signal_obs(model, 2.0, 1e-3, 11);
  Vector x0(2);
  x0 << 0.7, -0.4;
  const auto states =
      sde::kalman_bucy_filter(model, regmaps::make_identity(), paths, x0, p);
  double worst = 0.0;
  for (const auto& state : states)
    worst = std::max(worst, (state.cov - p.mat()).norm());
  CHECK(worst <= 1e-8 * (1 + p.mat().norm()));
}

TEST_CASE("kalman_bucy_filter agrees with the discrete Kalman oracle to O(step)") {
  const FilterModel model = stable_2d();
  auto run_error = [&](double step) {
    const auto paths = sde::simulate_signal_obs(model, 1.0, step, 13);
    const auto cont = sde::kalman_bucy_filter(model, regmaps::make_identity(),
                                              paths, model.x0_mean, model.P0);
    const auto disc =
        discrete_kalman(model, paths, model.x0_mean, model.P0.mat());
    double worst = 0.0, scale = 0.0;
    for (std::size_t k = 0; k < cont.size(); ++k) {
      worst = std::max(worst, (cont[k].mean - disc[k]).norm());
      scale = std::max(scale, disc[k].norm());
    }
    return std::make_pair(worst, scale);
  };
  const auto [err_h, scale] = run_error(2e-3);
  const auto [err_h2, scale2] = run_error(1e-3);
  CHECK(err_h <= 0.05 * (1 + scale));
  CHECK(err_h2 <= 0.9 * err_h);  // first-order in the step
}

TEST_CASE("sample covariance: degenerate and two-point cases, two-pass oracle") {
  Matrix equal(3, 4);
  equal.colwise() = Vector::Ones(3);
  CHECK(sde::sample_covariance(equal).norm() == 0.0);

  Vector x(2);
  x << 1.0, -2.0;
  Matrix two(2, 2);
  two.col(0) = x;
  two.col(1) = -x;
  CHECK((sde::rescaled_sample_covariance(two) - 2.0 * x * x.transpose()).norm() <=
        1e-14);

  rng::Stream stream(63);
  Matrix particles(3, 50);
  for (int i = 0; i < 50; ++i) particles.col(i) = stream.gaussian_vector(3);
  // two-pass oracle
  Vector mean = Vector::Zero(3);
  for (int i = 0; i < 50; ++i) mean += particles.col(i);
  mean /= 50.0;
  Matrix cov = Matrix::Zero(3, 3);
  for (int i = 0; i < 50; ++i) {
    const Vector d = particles.col(i) - mean;
    cov += d * d.transpose();
  }
  cov /= 50.0;
  CHECK((sde::sample_covariance(particles) - cov).norm() <=
        1e-12 * (1 + cov.norm()));

  CHECK_THROWS_AS(sde::sample_covariance(Matrix::Ones(3, 1)),
                  InvalidInputError);
}

TEST_CASE("enkf: rank-deficiency warning with N - 1 < r") {
  const Eigen::Index r = 3;
  Matrix a = -0.5 * Matrix::Identity(r, r);
  const FilterModel model = make_filter_model(
      a, Matrix::Identity(r, r), Matrix::Identity(r, r), Matrix::Identity(r, r),
      Vector::Zero(r), Matrix::Identity(r, r));
  const auto paths = sde::simulate_signal_obs(model, 0.05, 1e-2, 17);
  const auto run = sde::enkf(model, regmaps::make_identity(), 2, paths, 17);
  CHECK(run.snapshots.front().cov_rank <= 1);
  REQUIRE(!run.rank_warnings.empty());
  CHECK(run.rank_warnings.front().t == 0.0);
}

TEST_CASE("enkf: large-ensemble covariance approaches the Riccati flow") {
  const FilterModel model = scalar_model(-0.5, 1.0, 1.0, 1.0);
  const double t_end = 1.0, step = 2e-3;
  const int n = 4096;
  const auto paths = sde::simulate_signal_obs(model, t_end, step, 19);
  const auto run = sde::enkf(model, regmaps::make_identity(), n, paths, 19);
  const auto limit =
      riccati::flow(model, riccati::Nominal{}, model.P0, t_end, step);
  const double p_t = run.snapshots.back().sample_cov_rescaled(0, 0);
  const double phi_t = limit.final_state()(0, 0);
  const double mc_se = phi_t * std::sqrt(2.0 / n);
  CHECK(std::abs(p_t - phi_t) <= 5.0 * mc_se);
}

TEST_CASE("enkf: identical seeds give bit-identical ensembles") {
  const FilterModel model = stable_2d();
  const auto paths = sde::simulate_signal_obs(model, 0.3, 1e-2, 23);
  const auto run1 = sde::enkf(model, regmaps::make_identity(), 32, paths, 23);
  const auto run2 = sde::enkf(model, regmaps::make_identity(), 32, paths, 23);
  CHECK((run1.snapshots.back().particles - run2.snapshots.back().particles)
            .cwiseAbs()
            .maxCoeff() == 0.0);
}

TEST_CASE("coupled comparison: identity map gives exactly zero gap") {
  const FilterModel model = stable_2d();
  const auto report = sde::coupled_filter_comparison(
      model, regmaps::make_identity(), {5, 1.0, 2e-3, 31});
  CHECK(report.filter_gap_sup == 0.0);
  CHECK(report.filter_gap_steady == 0.0);
}

TEST_CASE("coupled comparison: steady moment is first order in epsilon") {
  const FilterModel model = scalar_model(-1.0, 1.0, 1.0);
  sde::MonteCarloParams params{400, 2.0, 2e-3, 37};
  const auto eps_run = sde::coupled_filter_comparison(
      model, regmaps::make_inflation(0.1, Matrix::Identity(1, 1)), params);
  const auto half_run = sde::coupled_filter_comparison(
      model, regmaps::make_inflation(0.05, Matrix::Identity(1, 1)), params);
  const double ratio = eps_run.filter_gap_steady / half_run.filter_gap_steady;
  CHECK(ratio >= 1.7);
  CHECK(ratio <= 2.3);
}

TEST_CASE("coupled comparison: filter-vs-signal moment is time-uniform") {
  const FilterModel model = stable_2d();
  const auto report = sde::coupled_filter_comparison(
      model, regmaps::make_inflation(0.05, Matrix::Identity(2, 2)),
      {100, 4.0, 2e-3, 41});
  // the error moment settles: the sup over the whole horizon stays within a
  // modest factor of the early-window sup
  CHECK(report.signal_gap_sup <= 1.5 * report.signal_gap_early);
}

TEST_CASE("projection maps: pi-filter equals nominal filter at pi(Q)") {
  const auto scheme = std::make_shared<schemes::AssociationScheme>(
      schemes::group_divisible_scheme(2, 2));
  const Matrix a = scheme->combine({-0.5, -0.7, -0.6});
  const Matrix r = scheme->combine({1.0, 0.8, 1.2});
  const Matrix s = scheme->combine({0.9, 1.1, 0.7});
  const Matrix c = matlib::sqrt_spd(SpdMatrix(s, 1e-10)).mat();
  const FilterModel model = make_filter_model(
      a, r, c, Matrix::Identity(4, 4), Vector::Zero(4), Matrix::Identity(4, 4));
  const auto proj = regmaps::make_scheme_projection(scheme);

  rng::Stream stream(43);
  const SpdMatrix q0(regmaps::random_spd(4, stream, 0.3), 1e-9);
  const SpdMatrix pq0 = regmaps::apply(proj, q0);

  const auto paths = sde::simulate_signal_obs(model, 2.0, 1e-3, 47);
  const auto pi_filter =
      sde::kalman_bucy_filter(model, proj, paths, model.x0_mean, q0);
  const auto nominal_filter = sde::kalman_bucy_filter(
      model, regmaps::make_identity(), paths, model.x0_mean, pq0);
  double worst = 0.0;
  for (std::size_t k = 0; k < pi_filter.size(); ++k)
    worst = std::max(worst,
                     (pi_filter[k].mean - nominal_filter[k].mean).norm());
  CHECK(worst <= 1e-6 * (1 + nominal_filter.back().mean.norm()));
}

TEST_CASE("innovations are zero-mean with the predicted variance") {
  const FilterModel model = scalar_model(-0.5, 1.0, 1.0);
  const SpdMatrix p = riccati::are_solve(model, riccati::Nominal{});
  const double step = 1e-3, t_end = 20.0;
  const auto paths = sde::simulate_signal_obs(model, t_end, step, 53);
  const auto states =
      sde::kalman_bucy_filter(model, regmaps::make_identity(), paths,
                              model.x0_mean, p);
  double acc = 0.0, acc2 = 0.0;
  const double n = double(paths.steps());
  for (std::size_t k = 0; k < paths.steps(); ++k) {
    const double innov =
        paths.obs_increments[k](0) - model.C(0, 0) * states[k].mean(0) * step;
    acc += innov;
    acc2 += innov * innov;
  }
  const double mean = acc / n;
  const double var = acc2 / n - mean * mean;
  const double predicted =
      model.Sigma.mat()(0, 0) * step +
      model.C(0, 0) * p.mat()(0, 0) * model.C(0, 0) * step * step;
  CHECK(std::abs(mean) <= 3.0 * std::sqrt(predicted / n));
  CHECK(std::abs(var - predicted) <= 3.0 * predicted * std::sqrt(2.0 / n));
}
