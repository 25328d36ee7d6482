#ifndef KBLAB_SDE_HPP
#define KBLAB_SDE_HPP

#include <cstdint>
#include <vector>

#include "kblab/model.hpp"
#include "kblab/regmaps.hpp"
#include "kblab/rng.hpp"

namespace kblab {
namespace sde {

/// Euler-Maruyama sample path of the signal/observation pair on a fixed
/// grid. Observation increments dY are stored per step; Y_0 = 0.
/// Reproducible: identical (model, t_end, step, seed) give identical paths.
struct PathBundle {
  std::vector<double> times;            // grid points t_0 = 0 .. t_K
  std::vector<Vector> signal;           // X_t at each grid point
  std::vector<Vector> obs_increments;   // dY over [t_k, t_{k+1}), size K
  double step = 0.0;
  std::uint64_t seed = 0;

  std::size_t steps() const { return obs_increments.size(); }
};

PathBundle simulate_signal_obs(const FilterModel& model, double t_end,
                               double step, std::uint64_t seed);

/// Conditional mean and covariance of a (possibly pi-regularized)
/// Kalman-Bucy filter at one grid point.
struct FilterState {
  double t = 0.0;
  Vector mean;
  Matrix cov;
};

/// Co-integrates the pi-Riccati flow (RK4) and the mean equation
///   dm = A m dt + pi(P_t) C' Sigma^{-1} [dY - C m dt]
/// driven by the observation increments of the path bundle. The gain is
/// refreshed every step. The Identity map reproduces the classical filter.
std::vector<FilterState> kalman_bucy_filter(const FilterModel& model,
                                            const regmaps::RegMap& map,
                                            const PathBundle& paths,
                                            const Vector& x0,
                                            const matlib::SpdMatrix& q0);

/// Ensemble snapshot. Particle positions are recorded only at the requested
/// stride (and always at the final time); means, rescaled sample covariances
/// and covariance ranks are recorded at every step.
struct ParticleEnsemble {
  double t = 0.0;
  int n = 0;
  Vector mean;
  Matrix sample_cov_rescaled;   // (1 - 1/N)^{-1} P_{eta^N}
  Eigen::Index cov_rank = 0;
  Matrix particles;             // r x N, empty unless recorded
};

struct RankWarning {
  double t = 0.0;
  Eigen::Index rank = 0;
};

struct EnkfRun {
  std::vector<ParticleEnsemble> snapshots;
  std::vector<RankWarning> rank_warnings;  // steps where p_t is rank-deficient
  int n = 0;
  std::uint64_t seed = 0;
};

/// Interacting EnKF particle system with per-particle independent Brownian
/// copies and gain pi(p_t) refreshed every step. Rank deficiency of the
/// sample covariance is reported, not fatal. particle_stride == 0 records
/// particle positions only at the final step.
EnkfRun enkf(const FilterModel& model, const regmaps::RegMap& map, int n,
             const PathBundle& paths, std::uint64_t seed,
             std::size_t particle_stride = 0);

/// Empirical covariance about the empirical mean (divisor N).
Matrix sample_covariance(const Matrix& particles);
/// Rescaled variant: (1 - 1/N)^{-1} times the empirical covariance.
Matrix rescaled_sample_covariance(const Matrix& particles);

struct MonteCarloParams {
  int replicates = 50;
  double t_end = 2.0;
  double step = 1e-3;
  std::uint64_t seed = 0;
};

/// Coupled comparison of the pi-filter and the nominal filter on shared
/// observation paths: root-mean-square moments of the filter gap and the
/// filter-vs-signal error across replicates.
struct CoupledMomentReport {
  double filter_gap_steady = 0.0;   // sqrt(E ||psi^pi - psi||^2), last quarter
  double filter_gap_sup = 0.0;      // sup over grid of the RMS gap
  double signal_gap_sup = 0.0;      // sup over grid, sqrt(E ||psi^pi - X||^2)
  double signal_gap_early = 0.0;    // same sup over the first quarter
  int replicates = 0;
};

CoupledMomentReport coupled_filter_comparison(const FilterModel& model,
                                              const regmaps::RegMap& map,
                                              const MonteCarloParams& params);

}  // namespace sde
}  // namespace kblab

#endif  // KBLAB_SDE_HPP
