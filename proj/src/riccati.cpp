#include "kblab/riccati.hpp"

#include <cmath>
#include <sstream>

namespace kblab {
namespace riccati {

namespace {

constexpr double kBlowUpNorm = 1e12;

void require_square_match(const Matrix& q, const FilterModel& model,
                          const char* who) {
  if (q.rows() != model.dim() || q.cols() != model.dim())
    throw DimensionError(std::string(who) + ": dimension mismatch with model");
}

/// Effective matrices of a variant: drift uses gain(P), the transition
/// equation uses A_eff - gain(P) S_eff.
struct EffectiveSystem {
  Matrix A;
  Matrix R;
  Matrix S;
  const regmaps::RegMap* map = nullptr;  // non-null for Perturbed
};

EffectiveSystem effective_system(const FilterModel& model,
                                 const DriftVariant& variant) {
  EffectiveSystem sys;
  if (std::holds_alternative<Nominal>(variant)) {
    sys.A = model.A;
    sys.R = model.R.mat();
    sys.S = model.S;
  } else if (const auto* pert = std::get_if<Perturbed>(&variant)) {
    sys.A = model.A;
    sys.R = model.R.mat();
    sys.S = model.S;
    sys.map = &pert->map;
  } else if (const auto* trip = std::get_if<Triplet>(&variant)) {
    sys.A = trip->A;
    sys.R = trip->R;
    sys.S = trip->S;
  } else {
    const auto& rep = std::get<MeanRepulsion>(variant);
    if (rep.eps1 + rep.eps2 <= -0.5)
      throw InvalidInputError("mean repulsion: requires eps1 + eps2 > -1/2");
    sys.A = model.A;
    sys.R = model.R.mat();
    sys.S = (1.0 + 2.0 * (rep.eps1 + rep.eps2)) * model.S;
  }
  return sys;
}

Matrix gain_of(const EffectiveSystem& sys, const Matrix& p) {
  if (sys.map == nullptr) return p;
  return regmaps::apply(*sys.map, matlib::SpdMatrix(matlib::symmetrize(p), 1e-6))
      .mat();
}

Matrix drift_of(const EffectiveSystem& sys, const Matrix& p) {
  if (sys.map == nullptr) {
    return matlib::symmetrize(sys.A * p + p * sys.A.transpose() + sys.R -
                              p * sys.S * p);
  }
  const Matrix g = gain_of(sys, p);
  const Matrix closed = sys.A - g * sys.S;
  return matlib::symmetrize(closed * p + p * closed.transpose() + sys.R +
                            g * sys.S * g);
}

Matrix kron(const Matrix& a, const Matrix& b) {
  Matrix out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < a.cols(); ++j)
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return out;
}

}  // namespace

Triplet make_triplet(Matrix a, Matrix r, Matrix s) {
  const Eigen::Index dim = a.rows();
  if (a.cols() != dim || r.rows() != dim || r.cols() != dim ||
      s.rows() != dim || s.cols() != dim)
    throw DimensionError("triplet: matrices must be square of equal size");
  matlib::SpdMatrix r_checked(r);
  if (r_checked.lambda_min() <= 0.0)
    throw InvalidInputError("triplet: R_pi must be positive definite");
  matlib::SpdMatrix s_checked(s, 1e-10);
  return Triplet{std::move(a), r_checked.mat(), s_checked.mat()};
}

DriftVariant triplet_variant(const regmaps::InducedTriplet& t) {
  return make_triplet(t.A, t.R, t.S);
}

Matrix ricc(const Matrix& q, const FilterModel& model) {
  require_square_match(q, model, "ricc");
  return matlib::symmetrize(model.A * q + q * model.A.transpose() -
                            q * model.S * q + model.R.mat());
}

Matrix ricc_pi(const Matrix& q, const FilterModel& model,
               const regmaps::RegMap& map) {
  require_square_match(q, model, "ricc_pi");
  const DriftVariant variant = Perturbed{map};  // keeps sys.map alive
  EffectiveSystem sys = effective_system(model, variant);
  return drift_of(sys, q);
}

Matrix ricc_repulsion(const Matrix& q, const FilterModel& model, double eps1,
                      double eps2) {
  require_square_match(q, model, "ricc_repulsion");
  EffectiveSystem sys = effective_system(model, MeanRepulsion{eps1, eps2});
  return drift_of(sys, q);
}

Matrix drift(const Matrix& q, const FilterModel& model,
             const DriftVariant& variant) {
  require_square_match(q, model, "drift");
  EffectiveSystem sys = effective_system(model, variant);
  return drift_of(sys, q);
}

Matrix frechet_ricc(const Matrix& q, const Matrix& h, const FilterModel& model) {
  require_square_match(q, model, "frechet_ricc");
  require_square_match(h, model, "frechet_ricc");
  if ((h - h.transpose()).cwiseAbs().maxCoeff() >
      1e-10 * (1.0 + h.cwiseAbs().maxCoeff()))
    throw InvalidInputError("frechet_ricc: direction H must be symmetric");
  const Matrix closed = model.A - q * model.S;
  return matlib::symmetrize(closed * h + h * closed.transpose());
}

std::size_t FlowTrajectory::index_at(double t) const {
  if (times.empty()) throw NumericalError("trajectory is empty");
  const double pos = (t - times.front()) / step;
  const auto idx = static_cast<std::ptrdiff_t>(std::llround(pos));
  if (idx < 0 || idx >= static_cast<std::ptrdiff_t>(times.size()) ||
      std::abs(times[idx] - t) > 0.5 * step)
    throw InvalidInputError("trajectory: time not on the grid");
  return static_cast<std::size_t>(idx);
}

const Matrix& FlowTrajectory::state_at(double t) const {
  return states[index_at(t)];
}

const Matrix& FlowTrajectory::transition_at(double t) const {
  if (transitions.empty())
    throw InvalidInputError("trajectory: transitions were not requested");
  return transitions[index_at(t)];
}

FlowTrajectory flow(const FilterModel& model, const DriftVariant& variant,
                    const matlib::SpdMatrix& q0, double t_end, double step,
                    bool with_transitions, double psd_tol) {
  if (step <= 0.0) throw InvalidInputError("flow: step must be positive");
  if (t_end < 0.0) throw InvalidInputError("flow: t_end must be nonnegative");
  require_square_match(q0.mat(), model, "flow");

  EffectiveSystem sys = effective_system(model, variant);
  const Eigen::Index r = model.dim();

  const auto n_steps = static_cast<std::size_t>(std::ceil(t_end / step - 1e-9));

  FlowTrajectory traj;
  traj.step = step;
  traj.times.reserve(n_steps + 1);
  traj.states.reserve(n_steps + 1);
  if (with_transitions) traj.transitions.reserve(n_steps + 1);

  Matrix p = q0.mat();
  Matrix e = Matrix::Identity(r, r);
  traj.times.push_back(0.0);
  traj.states.push_back(p);
  if (with_transitions) traj.transitions.push_back(e);

  auto transition_matrix = [&sys](const Matrix& state) -> Matrix {
    return sys.A - gain_of(sys, state) * sys.S;
  };

  for (std::size_t k = 0; k < n_steps; ++k) {
    const double t = static_cast<double>(k) * step;
    const double h = std::min(step, t_end - t);

    const Matrix k1 = drift_of(sys, p);
    const Matrix p2 = p + 0.5 * h * k1;
    const Matrix k2 = drift_of(sys, p2);
    const Matrix p3 = p + 0.5 * h * k2;
    const Matrix k3 = drift_of(sys, p3);
    const Matrix p4 = p + h * k3;
    const Matrix k4 = drift_of(sys, p4);
    Matrix p_next =
        matlib::symmetrize(p + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4));

    if (with_transitions) {
      const Matrix e1 = transition_matrix(p) * e;
      const Matrix e2 = transition_matrix(p2) * (e + 0.5 * h * e1);
      const Matrix e3 = transition_matrix(p3) * (e + 0.5 * h * e2);
      const Matrix e4 = transition_matrix(p4) * (e + h * e3);
      e += (h / 6.0) * (e1 + 2.0 * e2 + 2.0 * e3 + e4);
    }

    const double t_next = std::min(t + h, t_end);
    if (!p_next.allFinite() || p_next.norm() > kBlowUpNorm)
      throw BlowUpError("flow: Riccati state left the admissible region", t_next);
    const std::string violation = matlib::spd_violation(p_next, psd_tol);
    if (!violation.empty())
      throw BlowUpError("flow: state failed SPD validation (" + violation + ")",
                        t_next);

    p = std::move(p_next);
    traj.times.push_back(t_next);
    traj.states.push_back(p);
    if (with_transitions) traj.transitions.push_back(e);
  }
  return traj;
}

Matrix frechet_flow(const FilterModel& model, const matlib::SpdMatrix& q,
                    const Matrix& h, double t, double step) {
  if ((h - h.transpose()).cwiseAbs().maxCoeff() >
      1e-10 * (1.0 + h.cwiseAbs().maxCoeff()))
    throw InvalidInputError("frechet_flow: direction H must be symmetric");
  if (t == 0.0) return h;
  const FlowTrajectory traj = flow(model, Nominal{}, q, t, step, true);
  const Matrix& e = traj.transitions.back();
  return matlib::symmetrize(e * h * e.transpose());
}

Matrix lyapunov_solve(const Matrix& f, const Matrix& w) {
  const Eigen::Index r = f.rows();
  if (f.cols() != r || w.rows() != r || w.cols() != r)
    throw DimensionError("lyapunov_solve: operands must be square, equal size");
  if ((w - w.transpose()).cwiseAbs().maxCoeff() >
      1e-10 * (1.0 + w.cwiseAbs().maxCoeff()))
    throw InvalidInputError("lyapunov_solve: W must be symmetric");

  const Matrix identity = Matrix::Identity(r, r);
  const Matrix ft = f.transpose();
  const Matrix system = kron(identity, ft) + kron(ft, identity);
  Eigen::FullPivLU<Matrix> lu(system);
  if (!lu.isInvertible())
    throw NumericalError(
        "lyapunov_solve: singular Kronecker system (F and -F share an "
        "eigenvalue)");
  const Eigen::Map<const Vector> w_vec(w.data(), r * r);
  Vector x_vec = lu.solve(-w_vec);
  Matrix x = matlib::symmetrize(Eigen::Map<Matrix>(x_vec.data(), r, r));
  const double residual =
      (ft * x + x * f + w).norm();
  if (residual > 1e-10 * std::max(1.0, w.norm()))
    throw NumericalError("lyapunov_solve: residual too large");
  return x;
}

matlib::SpdMatrix are_solve(const FilterModel& model,
                            const DriftVariant& variant, double tol) {
  if (!std::holds_alternative<Nominal>(variant) &&
      !std::holds_alternative<Triplet>(variant))
    throw InvalidInputError("are_solve: variant must be Nominal or Triplet");
  EffectiveSystem sys = effective_system(model, variant);
  const double r_norm = sys.R.norm();

  // warm start: the flow converges globally under the standing assumptions
  const double q0_norm = matlib::spectral_norm(sys.R);
  const double char_time =
      1.0 / std::max({1.0, matlib::log_norm(sys.A),
                      matlib::spectral_norm(sys.S) * q0_norm,
                      std::sqrt(matlib::spectral_norm(sys.S) *
                                matlib::spectral_norm(sys.R))});
  const FlowTrajectory warm =
      flow(model, variant, matlib::SpdMatrix(sys.R, 1e-9), 50.0 * char_time,
           char_time / 100.0, false, 1e-6);
  Matrix p = warm.final_state();

  double residual = drift_of(sys, p).norm();
  for (int iter = 0; iter < 30 && residual > tol * r_norm; ++iter) {
    const Matrix closed_loop_t = (sys.A - p * sys.S).transpose();
    const Matrix w = matlib::symmetrize(sys.R + p * sys.S * p);
    p = lyapunov_solve(closed_loop_t, w);
    residual = drift_of(sys, p).norm();
  }
  if (residual > tol * r_norm)
    throw NumericalError("are_solve: Newton iteration did not converge");
  if (matlib::spectral_abscissa(sys.A - p * sys.S) >= 0.0)
    throw NumericalError("are_solve: closed loop A - P S is not Hurwitz");
  matlib::SpdMatrix result(p, 1e-10);
  if (result.lambda_min() <= 0.0)
    throw NumericalError("are_solve: fixed point is not positive definite");
  return result;
}

GramianSet gramians(const Matrix& a, const Matrix& r_mat, const Matrix& s,
                    double v, double step) {
  if (v <= 0.0) throw InvalidInputError("gramians: v must be positive");
  if (step <= 0.0) throw InvalidInputError("gramians: step must be positive");
  const Eigen::Index r = a.rows();

  // Coupled quadrature state, all integrated with one RK4 pass:
  //   U = exp(-A t), N = exp(A t),
  //   O' = U' S U            (observability Gramian)
  //   C' = N R N'            (controllability Gramian)
  //   K' = -A'K - KA + O R O (inner integral of C_v(O))
  //   J' =  AJ + JA' + C S C (inner integral of O_v(C))
  struct State {
    Matrix u, n, o, c, k, j;
  };
  auto deriv = [&](const State& x) {
    State d;
    d.u = -a * x.u;
    d.n = a * x.n;
    d.o = x.u.transpose() * s * x.u;
    d.c = x.n * r_mat * x.n.transpose();
    d.k = -a.transpose() * x.k - x.k * a + x.o * r_mat * x.o;
    d.j = a * x.j + x.j * a.transpose() + x.c * s * x.c;
    return d;
  };
  auto axpy = [&](const State& x, double h, const State& d) {
    return State{x.u + h * d.u, x.n + h * d.n, x.o + h * d.o,
                 x.c + h * d.c, x.k + h * d.k, x.j + h * d.j};
  };

  State x{Matrix::Identity(r, r), Matrix::Identity(r, r),
          Matrix::Zero(r, r),     Matrix::Zero(r, r),
          Matrix::Zero(r, r),     Matrix::Zero(r, r)};
  const auto n_steps = static_cast<std::size_t>(std::ceil(v / step - 1e-9));
  for (std::size_t i = 0; i < n_steps; ++i) {
    const double t = static_cast<double>(i) * step;
    const double h = std::min(step, v - t);
    const State k1 = deriv(x);
    const State k2 = deriv(axpy(x, 0.5 * h, k1));
    const State k3 = deriv(axpy(x, 0.5 * h, k2));
    const State k4 = deriv(axpy(x, h, k3));
    x = State{
        x.u + (h / 6.0) * (k1.u + 2.0 * k2.u + 2.0 * k3.u + k4.u),
        x.n + (h / 6.0) * (k1.n + 2.0 * k2.n + 2.0 * k3.n + k4.n),
        matlib::symmetrize(x.o + (h / 6.0) * (k1.o + 2.0 * k2.o + 2.0 * k3.o + k4.o)),
        matlib::symmetrize(x.c + (h / 6.0) * (k1.c + 2.0 * k2.c + 2.0 * k3.c + k4.c)),
        matlib::symmetrize(x.k + (h / 6.0) * (k1.k + 2.0 * k2.k + 2.0 * k3.k + k4.k)),
        matlib::symmetrize(x.j + (h / 6.0) * (k1.j + 2.0 * k2.j + 2.0 * k3.j + k4.j))};
  }

  GramianSet g;
  g.v = v;
  g.O_v = matlib::SpdMatrix(x.o, 1e-10);
  g.C_v = matlib::SpdMatrix(x.c, 1e-10);
  const double singular_tol = 1e-12;
  if (g.O_v.lambda_min() <= singular_tol * std::max(1.0, g.O_v.lambda_max()) ||
      g.C_v.lambda_min() <= singular_tol * std::max(1.0, g.C_v.lambda_max()))
    throw NumericalError(
        "gramians: O_v or C_v is singular within tolerance; refusing to form "
        "the sandwiched Gramians");
  const Matrix o_inv = x.o.llt().solve(Matrix::Identity(r, r));
  const Matrix c_inv = x.c.llt().solve(Matrix::Identity(r, r));
  g.C_v_of_O = matlib::SpdMatrix(matlib::symmetrize(o_inv * x.k * o_inv), 1e-9);
  g.O_v_of_C = matlib::SpdMatrix(matlib::symmetrize(c_inv * x.j * c_inv), 1e-9);
  return g;
}

GramianSet gramians(const FilterModel& model, double v, double step) {
  return gramians(model.A, model.R.mat(), model.S, v, step);
}

std::pair<matlib::SpdMatrix, matlib::SpdMatrix> steady_bounds(
    const FilterModel& model, double v, double step) {
  const GramianSet g = gramians(model, v, step);
  const Eigen::Index r = model.dim();
  const Matrix c_inv = g.C_v.mat().llt().solve(Matrix::Identity(r, r));
  const Matrix o_inv = g.O_v.mat().llt().solve(Matrix::Identity(r, r));
  const Matrix lower_inv = g.O_v_of_C.mat() + c_inv;
  const Matrix lower =
      matlib::symmetrize(lower_inv.llt().solve(Matrix::Identity(r, r)));
  const Matrix upper = matlib::symmetrize(o_inv + g.C_v_of_O.mat());
  return {matlib::SpdMatrix(lower, 1e-9), matlib::SpdMatrix(upper, 1e-9)};
}

RateEstimate estimate_contraction_rate(const FilterModel& model,
                                       const matlib::SpdMatrix& q1,
                                       const matlib::SpdMatrix& q2,
                                       double t_end, double step,
                                       std::pair<double, double> window) {
  const auto [lo, hi] = window;
  if (!(0.0 <= lo && lo < hi && hi <= t_end))
    throw InvalidInputError("estimate_contraction_rate: window must lie in [0, t_end]");

  const FlowTrajectory f1 = flow(model, Nominal{}, q1, t_end, step);
  const FlowTrajectory f2 = flow(model, Nominal{}, q2, t_end, step);

  // discard the first 20% of the window as burn-in
  const double fit_lo = lo + 0.2 * (hi - lo);
  std::vector<double> ts, logds;
  for (std::size_t k = 0; k < f1.times.size(); ++k) {
    const double t = f1.times[k];
    if (t < fit_lo || t > hi) continue;
    const double dist = matlib::spectral_norm(f1.states[k] - f2.states[k]);
    const double scale = 1.0 + matlib::spectral_norm(f1.states[k]);
    if (dist < 1e-14 * scale) {
      std::ostringstream os;
      os << "estimate_contraction_rate: distance underflow at t = " << t
         << " (flows numerically merged)";
      throw NumericalError(os.str());
    }
    ts.push_back(t);
    logds.push_back(std::log(dist));
  }
  if (ts.size() < 3)
    throw InvalidInputError("estimate_contraction_rate: window too short");

  const double n = static_cast<double>(ts.size());
  double st = 0.0, sy = 0.0, stt = 0.0, sty = 0.0;
  for (std::size_t i = 0; i < ts.size(); ++i) {
    st += ts[i];
    sy += logds[i];
    stt += ts[i] * ts[i];
    sty += ts[i] * logds[i];
  }
  const double denom = n * stt - st * st;
  const double slope = (n * sty - st * sy) / denom;
  const double intercept = (sy - slope * st) / n;
  double rss = 0.0;
  for (std::size_t i = 0; i < ts.size(); ++i) {
    const double resid = logds[i] - (intercept + slope * ts[i]);
    rss += resid * resid;
  }

  RateEstimate est;
  est.nu_hat = -0.5 * slope;
  est.window_lo = lo;
  est.window_hi = hi;
  est.residual = std::sqrt(rss / n);
  return est;
}

double default_step(const FilterModel& model, double q0_norm) {
  const double s_norm = matlib::spectral_norm(model.S);
  const double rate =
      std::max({1.0, matlib::log_norm(model.A), s_norm * q0_norm,
                std::sqrt(s_norm * matlib::spectral_norm(model.R.mat()))});
  return 1e-3 / rate;
}

}  // namespace riccati
}  // namespace kblab
