#ifndef KBLAB_RICCATI_HPP
#define KBLAB_RICCATI_HPP

#include <utility>
#include <variant>
#include <vector>

#include "kblab/matlib.hpp"
#include "kblab/model.hpp"
#include "kblab/regmaps.hpp"

namespace kblab {
namespace riccati {

using kblab::check_rank_conditions;
using kblab::RankReport;

// Drift selection for the matrix Riccati flows.

struct Nominal {};

/// pi-regularized drift: the filter gain uses pi(P) instead of P.
struct Perturbed {
  regmaps::RegMap map;
};

/// Direct (A_pi, R_pi, S_pi) replacement in the nominal drift.
struct Triplet {
  Matrix A;
  Matrix R;  // symmetric PD
  Matrix S;  // symmetric PSD
};

/// Mean-repulsion rescaling of the quadratic term:
/// S_eps = (1 + 2 (eps1 + eps2)) S, requires eps1 + eps2 > -1/2.
struct MeanRepulsion {
  double eps1 = 0.0;
  double eps2 = 0.0;
};

using DriftVariant = std::variant<Nominal, Perturbed, Triplet, MeanRepulsion>;

Triplet make_triplet(Matrix A, Matrix R, Matrix S);
DriftVariant triplet_variant(const regmaps::InducedTriplet& t);

/// Ricc(Q) = A Q + Q A' - Q S Q + R.
Matrix ricc(const Matrix& q, const FilterModel& model);

/// Ricc^pi(Q) = [A - pi(Q) S] Q + Q [A - pi(Q) S]' + R + pi(Q) S pi(Q).
Matrix ricc_pi(const Matrix& q, const FilterModel& model,
               const regmaps::RegMap& map);

/// A Q + Q A' + R - (1 + 2 (eps1 + eps2)) Q S Q.
Matrix ricc_repulsion(const Matrix& q, const FilterModel& model, double eps1,
                      double eps2);

/// Drift of the selected variant evaluated at Q.
Matrix drift(const Matrix& q, const FilterModel& model,
             const DriftVariant& variant);

/// Frechet derivative of Ricc at Q in direction H:
/// (A - Q S) H + H (A - Q S)'.
Matrix frechet_ricc(const Matrix& q, const Matrix& h, const FilterModel& model);

/// Time grid plus matrix path of a Riccati flow, with optionally
/// co-integrated transition matrices E_{0,t}.
struct FlowTrajectory {
  std::vector<double> times;
  std::vector<Matrix> states;
  std::vector<Matrix> transitions;  // empty unless requested
  double step = 0.0;

  std::size_t index_at(double t) const;
  const Matrix& state_at(double t) const;
  const Matrix& transition_at(double t) const;
  const Matrix& final_state() const { return states.back(); }
};

/// Fixed-step RK4 integration of the chosen drift with post-step
/// symmetrization. Every recorded state must pass SPD validation at
/// psd_tol; non-finite states or Frobenius norm above 1e12 abort with a
/// BlowUpError carrying the failure time. When with_transitions is set, the
/// matrix ODE dE = (A_eff - gain(P) S_eff) E is co-integrated from E = Id.
FlowTrajectory flow(const FilterModel& model, const DriftVariant& variant,
                    const matlib::SpdMatrix& q0, double t_end, double step,
                    bool with_transitions = false, double psd_tol = 1e-8);

/// Frechet derivative of the flow map: E_t(Q) H E_t(Q)'.
Matrix frechet_flow(const FilterModel& model, const matlib::SpdMatrix& q,
                    const Matrix& h, double t, double step);

/// Solve F' X + X F = -W for symmetric X by Kronecker vectorization.
/// Throws NumericalError when F and -F share an eigenvalue.
Matrix lyapunov_solve(const Matrix& f, const Matrix& w);

/// Positive definite fixed point of the algebraic Riccati equation for the
/// nominal or a triplet drift: long-horizon flow warm start followed by
/// Newton steps, each solving the closed-loop Lyapunov equation. The result
/// satisfies ||drift(P)||_F <= tol ||R||_F and A_eff - P S_eff Hurwitz.
matlib::SpdMatrix are_solve(const FilterModel& model,
                            const DriftVariant& variant, double tol = 1e-12);

/// Observability and controllability Gramians over [0, v], with the
/// sandwiched pair C_v(O) and O_v(C). All four are positive definite when
/// the rank conditions hold; their extremal eigenvalues are the varpi
/// parameters used by the steady-state and entropy bounds.
struct GramianSet {
  double v = 0.0;
  matlib::SpdMatrix O_v;
  matlib::SpdMatrix C_v;
  matlib::SpdMatrix C_v_of_O;
  matlib::SpdMatrix O_v_of_C;
};

GramianSet gramians(const Matrix& a, const Matrix& r, const Matrix& s, double v,
                    double step);
GramianSet gramians(const FilterModel& model, double v, double step);

/// The uniform steady-state estimates: for t >= v,
///   (O_v(C) + C_v^{-1})^{-1} <= phi_t(Q) <= O_v^{-1} + C_v(O).
std::pair<matlib::SpdMatrix, matlib::SpdMatrix> steady_bounds(
    const FilterModel& model, double v, double step);

/// Fitted exponential contraction rate between two flows.
struct RateEstimate {
  double nu_hat = 0.0;        // -slope/2 of log||phi_t(Q1) - phi_t(Q2)||_2
  double window_lo = 0.0;
  double window_hi = 0.0;
  double residual = 0.0;      // RMS of the linear fit
};

/// Least-squares decay-rate fit over the window; the first 20% of the
/// window is discarded as burn-in. Throws NumericalError when the flows
/// have numerically merged (distance underflow).
RateEstimate estimate_contraction_rate(const FilterModel& model,
                                       const matlib::SpdMatrix& q1,
                                       const matlib::SpdMatrix& q2,
                                       double t_end, double step,
                                       std::pair<double, double> window);

/// Default integrator step: 1e-3 times the characteristic time
/// 1 / max(1, mu(A), ||S|| ||Q0||, sqrt(||S|| ||R||)).
double default_step(const FilterModel& model, double q0_norm);

}  // namespace riccati
}  // namespace kblab

#endif  // KBLAB_RICCATI_HPP
