#include "kblab/sde.hpp"

#include <cmath>

#include "kblab/riccati.hpp"

namespace kblab {
namespace sde {

namespace {

// RNG channels, combined with (replicate, particle) lanes
constexpr std::uint64_t kChannelSignal = 1;
constexpr std::uint64_t kChannelObs = 2;
constexpr std::uint64_t kChannelInit = 3;
constexpr std::uint64_t kChannelParticleW = 4;
constexpr std::uint64_t kChannelParticleV = 5;
constexpr std::uint64_t kChannelParticleInit = 6;

Eigen::Index rank_of(const Matrix& sym, double rel_tol = 1e-10) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(matlib::symmetrize(sym),
                                           Eigen::EigenvaluesOnly);
  const double top = std::max(es.eigenvalues().cwiseAbs().maxCoeff(), 0.0);
  if (top == 0.0) return 0;
  return (es.eigenvalues().array() > rel_tol * top).count();
}

}  // namespace

PathBundle simulate_signal_obs(const FilterModel& model, double t_end,
                               double step, std::uint64_t seed) {
  if (step <= 0.0) throw InvalidInputError("simulate_signal_obs: step must be positive");
  const Eigen::Index r = model.dim();
  const Eigen::Index rp = model.obs_dim();
  const Matrix r_half = matlib::sqrt_spd(model.R).mat();
  const Matrix sigma_half = matlib::sqrt_spd(model.Sigma).mat();
  const Matrix p0_half = matlib::sqrt_spd(model.P0).mat();
  const double sqrt_step = std::sqrt(step);

  rng::Stream init_stream(rng::derive_key(seed, 0, 0, kChannelInit));
  rng::Stream signal_stream(rng::derive_key(seed, 0, 0, kChannelSignal));
  rng::Stream obs_stream(rng::derive_key(seed, 0, 0, kChannelObs));

  PathBundle bundle;
  bundle.step = step;
  bundle.seed = seed;
  const auto n_steps = static_cast<std::size_t>(std::ceil(t_end / step - 1e-9));
  bundle.times.reserve(n_steps + 1);
  bundle.signal.reserve(n_steps + 1);
  bundle.obs_increments.reserve(n_steps);

  Vector x = model.x0_mean + p0_half * init_stream.gaussian_vector(r);
  bundle.times.push_back(0.0);
  bundle.signal.push_back(x);
  for (std::size_t k = 0; k < n_steps; ++k) {
    const Vector dy = model.C * x * step +
                      sigma_half * (sqrt_step * obs_stream.gaussian_vector(rp));
    x += model.A * x * step +
         r_half * (sqrt_step * signal_stream.gaussian_vector(r));
    bundle.obs_increments.push_back(dy);
    bundle.times.push_back(static_cast<double>(k + 1) * step);
    bundle.signal.push_back(x);
  }
  return bundle;
}

std::vector<FilterState> kalman_bucy_filter(const FilterModel& model,
                                            const regmaps::RegMap& map,
                                            const PathBundle& paths,
                                            const Vector& x0,
                                            const matlib::SpdMatrix& q0) {
  const Eigen::Index r = model.dim();
  if (x0.size() != r)
    throw DimensionError("kalman_bucy_filter: x0 dimension mismatch");
  if (paths.times.empty() ||
      paths.obs_increments.size() + 1 != paths.times.size())
    throw InvalidInputError("kalman_bucy_filter: inconsistent path bundle");
  const double h = paths.step;
  const Matrix c_sigma_inv =
      model.C.transpose() *
      model.Sigma.mat().llt().solve(Matrix::Identity(model.obs_dim(), model.obs_dim()));

  const riccati::DriftVariant variant = riccati::Perturbed{map};

  std::vector<FilterState> states;
  states.reserve(paths.times.size());
  Vector m = x0;
  Matrix p = q0.mat();
  states.push_back({0.0, m, p});

  for (std::size_t k = 0; k < paths.steps(); ++k) {
    const Matrix gain =
        regmaps::apply(map, matlib::SpdMatrix(p, 1e-6)).mat() * c_sigma_inv;
    m += model.A * m * h + gain * (paths.obs_increments[k] - model.C * m * h);

    // one RK4 step of the pi-Riccati flow
    const Matrix k1 = riccati::drift(p, model, variant);
    const Matrix k2 = riccati::drift(p + 0.5 * h * k1, model, variant);
    const Matrix k3 = riccati::drift(p + 0.5 * h * k2, model, variant);
    const Matrix k4 = riccati::drift(p + h * k3, model, variant);
    p = matlib::symmetrize(p + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4));
    if (!p.allFinite() || p.norm() > 1e12)
      throw BlowUpError("kalman_bucy_filter: covariance blow-up",
                        paths.times[k + 1]);

    states.push_back({paths.times[k + 1], m, p});
  }
  return states;
}

Matrix sample_covariance(const Matrix& particles) {
  const Eigen::Index n = particles.cols();
  if (n < 2) throw InvalidInputError("sample_covariance: need at least 2 particles");
  const Vector mean = particles.rowwise().mean();
  const Matrix centered = particles.colwise() - mean;
  return matlib::symmetrize(centered * centered.transpose() /
                            static_cast<double>(n));
}

Matrix rescaled_sample_covariance(const Matrix& particles) {
  const double n = static_cast<double>(particles.cols());
  return sample_covariance(particles) * (n / (n - 1.0));
}

EnkfRun enkf(const FilterModel& model, const regmaps::RegMap& map, int n,
             const PathBundle& paths, std::uint64_t seed,
             std::size_t particle_stride) {
  if (n < 2) throw InvalidInputError("enkf: need at least 2 particles");
  const Eigen::Index r = model.dim();
  const Eigen::Index rp = model.obs_dim();
  const double h = paths.step;
  const double sqrt_h = std::sqrt(h);
  const Matrix r_half = matlib::sqrt_spd(model.R).mat();
  const Matrix sigma_half = matlib::sqrt_spd(model.Sigma).mat();
  const Matrix p0_half = matlib::sqrt_spd(model.P0).mat();
  const Matrix c_sigma_inv =
      model.C.transpose() *
      model.Sigma.mat().llt().solve(Matrix::Identity(rp, rp));

  EnkfRun run;
  run.n = n;
  run.seed = seed;

  Matrix particles(r, n);
  std::vector<rng::Stream> w_streams, v_streams;
  w_streams.reserve(n);
  v_streams.reserve(n);
  for (int i = 0; i < n; ++i) {
    rng::Stream init(rng::derive_key(seed, 0, static_cast<std::uint64_t>(i),
                                     kChannelParticleInit));
    particles.col(i) = model.x0_mean + p0_half * init.gaussian_vector(r);
    w_streams.emplace_back(rng::derive_key(seed, 0, static_cast<std::uint64_t>(i),
                                           kChannelParticleW));
    v_streams.emplace_back(rng::derive_key(seed, 0, static_cast<std::uint64_t>(i),
                                           kChannelParticleV));
  }

  auto record = [&](double t, std::size_t step_idx, bool last) {
    ParticleEnsemble snap;
    snap.t = t;
    snap.n = n;
    snap.mean = particles.rowwise().mean();
    snap.sample_cov_rescaled = rescaled_sample_covariance(particles);
    snap.cov_rank = rank_of(snap.sample_cov_rescaled);
    if (snap.cov_rank < r)
      run.rank_warnings.push_back({t, snap.cov_rank});
    const bool record_particles =
        last || (particle_stride != 0 && step_idx % particle_stride == 0);
    if (record_particles) snap.particles = particles;
    run.snapshots.push_back(std::move(snap));
  };

  record(0.0, 0, paths.steps() == 0);
  for (std::size_t k = 0; k < paths.steps(); ++k) {
    const Matrix p_t = rescaled_sample_covariance(particles);
    const Matrix gain =
        regmaps::apply(map, matlib::SpdMatrix(matlib::symmetrize(p_t), 1e-6)).mat() *
        c_sigma_inv;
    const Vector& dy = paths.obs_increments[k];
    Matrix next(r, n);
    for (int i = 0; i < n; ++i) {
      const Vector xi = particles.col(i);
      const Vector dw = sqrt_h * w_streams[i].gaussian_vector(r);
      const Vector dv = sqrt_h * v_streams[i].gaussian_vector(rp);
      next.col(i) = xi + model.A * xi * h + r_half * dw +
                    gain * (dy - (model.C * xi * h + sigma_half * dv));
    }
    particles = std::move(next);
    if (!particles.allFinite())
      throw BlowUpError("enkf: particle system blow-up", paths.times[k + 1]);
    record(paths.times[k + 1], k + 1, k + 1 == paths.steps());
  }
  return run;
}

CoupledMomentReport coupled_filter_comparison(const FilterModel& model,
                                              const regmaps::RegMap& map,
                                              const MonteCarloParams& params) {
  if (params.replicates < 1)
    throw InvalidInputError("coupled_filter_comparison: need replicates >= 1");

  std::vector<double> sq_gap;      // per grid point, summed over replicates
  std::vector<double> sq_signal;
  std::size_t grid_size = 0;

  for (int rep = 0; rep < params.replicates; ++rep) {
    // the observation path is generated once per replicate and shared by
    // both filters under comparison
    const std::uint64_t path_seed =
        rng::derive_key(params.seed, 0xC0, static_cast<std::uint64_t>(rep));
    const PathBundle paths =
        simulate_signal_obs(model, params.t_end, params.step, path_seed);
    const auto nominal = kalman_bucy_filter(model, regmaps::make_identity(),
                                            paths, model.x0_mean, model.P0);
    const auto perturbed =
        kalman_bucy_filter(model, map, paths, model.x0_mean, model.P0);

    if (rep == 0) {
      grid_size = nominal.size();
      sq_gap.assign(grid_size, 0.0);
      sq_signal.assign(grid_size, 0.0);
    }
    for (std::size_t k = 0; k < grid_size; ++k) {
      sq_gap[k] += (perturbed[k].mean - nominal[k].mean).squaredNorm();
      sq_signal[k] += (perturbed[k].mean - paths.signal[k]).squaredNorm();
    }
  }

  CoupledMomentReport report;
  report.replicates = params.replicates;
  const double inv_rep = 1.0 / static_cast<double>(params.replicates);
  double steady_acc = 0.0;
  std::size_t steady_count = 0;
  for (std::size_t k = 0; k < grid_size; ++k) {
    const double rms_gap = std::sqrt(sq_gap[k] * inv_rep);
    const double rms_sig = std::sqrt(sq_signal[k] * inv_rep);
    report.filter_gap_sup = std::max(report.filter_gap_sup, rms_gap);
    report.signal_gap_sup = std::max(report.signal_gap_sup, rms_sig);
    if (k <= grid_size / 4)
      report.signal_gap_early = std::max(report.signal_gap_early, rms_sig);
    if (k >= (3 * grid_size) / 4) {
      steady_acc += sq_gap[k] * inv_rep;
      ++steady_count;
    }
  }
  report.filter_gap_steady =
      std::sqrt(steady_acc / static_cast<double>(std::max<std::size_t>(1, steady_count)));
  return report;
}

}  // namespace sde
}  // namespace kblab
