#include "kblab/regmaps.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "kblab/riccati.hpp"

namespace kblab {
namespace regmaps {

namespace {

constexpr double kApplyPsdTol = 1e-9;

std::vector<Eigen::Index> complement(const std::vector<Eigen::Index>& p,
                                     Eigen::Index dim) {
  std::vector<bool> in_p(dim, false);
  for (Eigen::Index i : p) in_p[i] = true;
  std::vector<Eigen::Index> pc;
  for (Eigen::Index i = 0; i < dim; ++i)
    if (!in_p[i]) pc.push_back(i);
  return pc;
}

Matrix submatrix(const Matrix& q, const std::vector<Eigen::Index>& rows,
                 const std::vector<Eigen::Index>& cols) {
  Matrix out(rows.size(), cols.size());
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < cols.size(); ++j)
      out(i, j) = q(rows[i], cols[j]);
  return out;
}

Matrix banded_mask(Eigen::Index dim, int iota) {
  Matrix l = Matrix::Zero(dim, dim);
  for (Eigen::Index i = 0; i < dim; ++i)
    for (Eigen::Index j = 0; j < dim; ++j)
      if (std::abs(static_cast<long>(i) - static_cast<long>(j)) < iota)
        l(i, j) = 1.0;
  return l;
}

/// Target map T(Q) of a shrinkage spec.
Matrix shrink_target(const TargetSpec& target, const Matrix& q) {
  if (const auto* band = std::get_if<MaskBand>(&target))
    return matlib::hadamard(banded_mask(q.rows(), band->iota), q);
  if (const auto* st = std::get_if<SchemeTarget>(&target))
    return st->scheme->project(q);
  const auto& nt = std::get<NystromTarget>(target);
  return nystrom_target(q, nt.partition);
}

/// l_T(Q) for the indicator threshold. Mask and scheme targets use the
/// analytic bounds; the Nystrom target has no displayed bound, so the exact
/// deviation norm serves as l_T.
double shrink_deviation(const TargetSpec& target, const Matrix& q) {
  if (std::holds_alternative<NystromTarget>(target))
    return matlib::spectral_norm(shrink_target(target, q) - q);
  return mask_deviation_bound(q, target);
}

void validate_partition(const std::vector<Eigen::Index>& partition,
                        Eigen::Index dim) {
  if (partition.empty())
    throw InvalidInputError("nystrom: partition must be nonempty");
  if (static_cast<Eigen::Index>(partition.size()) >= dim)
    throw InvalidInputError("nystrom: partition must be proper");
  for (std::size_t i = 0; i < partition.size(); ++i) {
    if (partition[i] < 0 || partition[i] >= dim)
      throw InvalidInputError("nystrom: partition index out of range");
    if (i > 0 && partition[i] <= partition[i - 1])
      throw InvalidInputError("nystrom: partition must be sorted and unique");
  }
}

}  // namespace

RegMap make_identity() { return Identity{}; }

RegMap make_inflation(double epsilon, Matrix t) {
  if (epsilon < 0.0 || epsilon > 1.0)
    throw InvalidInputError("inflation: epsilon must lie in [0, 1]");
  matlib::SpdMatrix checked(t);  // validates symmetry and PSD
  return Inflation{epsilon, checked.mat()};
}

RegMap make_hadamard_mask(Matrix l) {
  matlib::SpdMatrix checked(l, 1e-10);
  bool binary = true;
  for (Eigen::Index i = 0; i < l.rows() && binary; ++i)
    for (Eigen::Index j = 0; j < l.cols() && binary; ++j)
      if (l(i, j) != 0.0 && l(i, j) != 1.0) binary = false;
  return HadamardMask{checked.mat(), binary};
}

RegMap make_scheme_projection(
    std::shared_ptr<const schemes::AssociationScheme> scheme) {
  if (!scheme) throw InvalidInputError("scheme projection: null scheme");
  return SchemeProjection{std::move(scheme)};
}

RegMap make_stein_shrinkage(double eps1, double eps2, TargetSpec target) {
  if (!(eps1 >= 0.0 && eps1 <= 1.0))
    throw InvalidInputError("shrinkage: eps1 must lie in [0, 1]");
  if (!(eps2 > 0.0) || !std::isfinite(eps2))
    throw InvalidInputError("shrinkage: eps2 must be positive and finite");
  if (const auto* nt = std::get_if<NystromTarget>(&target))
    if (nt->partition.empty())
      throw InvalidInputError("shrinkage: nystrom target partition empty");
  return SteinShrinkage{eps1, eps2, std::move(target)};
}

RegMap make_nystrom(std::vector<Eigen::Index> partition, Eigen::Index dim) {
  std::sort(partition.begin(), partition.end());
  validate_partition(partition, dim);
  return Nystrom{std::move(partition)};
}

Matrix block_mask(const std::vector<Eigen::Index>& block_sizes) {
  Eigen::Index dim = 0;
  for (Eigen::Index b : block_sizes) dim += b;
  Matrix l = Matrix::Zero(dim, dim);
  Eigen::Index offset = 0;
  for (Eigen::Index b : block_sizes) {
    l.block(offset, offset, b, b).setOnes();
    offset += b;
  }
  return l;
}

bool is_heuristic(const RegMap& map) {
  if (const auto* mask = std::get_if<HadamardMask>(&map)) return !mask->binary;
  return false;
}

bool is_idempotent_variant(const RegMap& map) {
  if (std::holds_alternative<Identity>(map)) return true;
  if (std::holds_alternative<SchemeProjection>(map)) return true;
  if (const auto* mask = std::get_if<HadamardMask>(&map)) return mask->binary;
  return false;
}

std::string describe(const RegMap& map) {
  std::ostringstream os;
  if (std::holds_alternative<Identity>(map)) {
    os << "identity";
  } else if (const auto* inf = std::get_if<Inflation>(&map)) {
    os << "inflation(eps=" << inf->epsilon << ")";
  } else if (const auto* mask = std::get_if<HadamardMask>(&map)) {
    os << (mask->binary ? "mask" : "mask[heuristic]");
  } else if (std::holds_alternative<SchemeProjection>(map)) {
    os << "scheme-projection";
  } else if (const auto* sh = std::get_if<SteinShrinkage>(&map)) {
    os << "shrinkage(eps1=" << sh->eps1 << ",eps2=" << sh->eps2 << ")";
  } else {
    os << "nystrom";
  }
  return os.str();
}

matlib::SpdMatrix apply(const RegMap& map, const matlib::SpdMatrix& q) {
  const Matrix& qm = q.mat();
  if (std::holds_alternative<Identity>(map)) return q;
  if (const auto* inf = std::get_if<Inflation>(&map)) {
    if (inf->T.rows() != qm.rows())
      throw DimensionError("apply: inflation reference dimension mismatch");
    return matlib::SpdMatrix(qm + inf->epsilon * inf->T, kApplyPsdTol);
  }
  if (const auto* mask = std::get_if<HadamardMask>(&map)) {
    return matlib::SpdMatrix(matlib::hadamard(mask->L, qm), kApplyPsdTol);
  }
  if (const auto* proj = std::get_if<SchemeProjection>(&map)) {
    return matlib::SpdMatrix(proj->scheme->project(qm), kApplyPsdTol);
  }
  if (const auto* sh = std::get_if<SteinShrinkage>(&map)) {
    const double dev = shrink_deviation(sh->target, qm);
    const double eps = dev <= 1.0 / sh->eps2 ? sh->eps1 : 0.0;
    if (eps == 0.0) return q;
    const Matrix target = shrink_target(sh->target, qm);
    return matlib::SpdMatrix(qm + eps * (target - qm), kApplyPsdTol);
  }
  const auto& ny = std::get<Nystrom>(map);
  return matlib::SpdMatrix(nystrom_target(qm, ny.partition), kApplyPsdTol);
}

Matrix gamma_pi(const RegMap& map, const matlib::SpdMatrix& q,
                const FilterModel& model) {
  return riccati::ricc_pi(q.mat(), model, map) - riccati::ricc(q.mat(), model);
}

InducedTriplet induced_triplet(const RegMap& map, const FilterModel& model) {
  if (std::holds_alternative<Identity>(map))
    return {model.A, model.R.mat(), model.S};
  if (const auto* inf = std::get_if<Inflation>(&map)) {
    const Matrix tst = inf->T * model.S * inf->T;
    return {model.A,
            model.R.mat() + inf->epsilon * inf->epsilon * matlib::symmetrize(tst),
            model.S};
  }
  if (const auto* sh = std::get_if<SteinShrinkage>(&map)) {
    if (std::holds_alternative<MaskBand>(sh->target)) {
      const double ratio = sh->eps1 / sh->eps2;
      const double varpi = ratio * ratio * matlib::spectral_norm(model.S);
      return {model.A,
              model.R.mat() + varpi * Matrix::Identity(model.dim(), model.dim()),
              model.S};
    }
    throw InvalidInputError(
        "induced_triplet: only banded-mask shrinkage has an explicit triplet");
  }
  throw InvalidInputError("induced_triplet: unsupported for " + describe(map) +
                          " (projection maps have no perturbation triplet)");
}

double mask_deviation_bound(const Matrix& q, const TargetSpec& target) {
  if (const auto* band = std::get_if<MaskBand>(&target)) {
    double worst = 0.0;
    for (Eigen::Index i = 0; i < q.rows(); ++i) {
      double row = 0.0;
      for (Eigen::Index j = 0; j < q.cols(); ++j)
        if (std::abs(static_cast<long>(i) - static_cast<long>(j)) >= band->iota)
          row += std::abs(q(i, j));
      worst = std::max(worst, row);
    }
    return worst;
  }
  if (std::holds_alternative<SchemeTarget>(target)) return q.trace();
  throw InvalidInputError("mask_deviation_bound: unsupported target");
}

Matrix nystrom_target(const Matrix& q, const std::vector<Eigen::Index>& partition) {
  validate_partition(partition, q.rows());
  const auto pc = complement(partition, q.rows());
  const Matrix q_p = submatrix(q, partition, partition);
  const Matrix q_cp = submatrix(q, pc, partition);
  const Matrix pinv = matlib::pinv_spd(matlib::SpdMatrix(q_p, 1e-9)).mat();
  const Matrix w = q_cp * pinv * q_cp.transpose();
  Matrix out = q;
  for (std::size_t i = 0; i < pc.size(); ++i)
    for (std::size_t j = 0; j < pc.size(); ++j) out(pc[i], pc[j]) = w(i, j);
  return matlib::symmetrize(out);
}

Matrix nystrom_bias(const Matrix& q, const std::vector<Eigen::Index>& partition,
                    long n_particles) {
  if (n_particles < 1)
    throw InvalidInputError("nystrom_bias: particle count must be >= 1");
  validate_partition(partition, q.rows());
  const auto pc = complement(partition, q.rows());
  const double s_over_n =
      static_cast<double>(partition.size()) / static_cast<double>(n_particles);
  Matrix out = nystrom_target(q, partition);
  const Matrix q_cp = submatrix(q, pc, partition);
  const Matrix q_pc = submatrix(q, pc, pc);
  const Matrix pinv =
      matlib::pinv_spd(matlib::SpdMatrix(submatrix(q, partition, partition), 1e-9))
          .mat();
  const Matrix schur = q_pc - q_cp * pinv * q_cp.transpose();
  for (std::size_t i = 0; i < pc.size(); ++i)
    for (std::size_t j = 0; j < pc.size(); ++j)
      out(pc[i], pc[j]) += s_over_n * schur(i, j);
  return matlib::symmetrize(out);
}

Matrix random_spd(Eigen::Index dim, rng::Stream& stream, double eigen_floor) {
  Matrix g(dim, dim);
  for (Eigen::Index i = 0; i < dim; ++i)
    for (Eigen::Index j = 0; j < dim; ++j) g(i, j) = stream.next_gaussian();
  return matlib::symmetrize(g * g.transpose() / static_cast<double>(dim)) +
         eigen_floor * Matrix::Identity(dim, dim);
}

H3Report check_h3(const RegMap& map, Eigen::Index dim, int sample_count,
                  std::uint64_t rng_seed) {
  if (!is_idempotent_variant(map))
    throw InvalidInputError("check_h3: map must be an idempotent variant");
  rng::Stream stream(rng::derive_key(rng_seed, 0x483));

  // random element of the ring the projection maps onto
  auto random_ring_element = [&](rng::Stream& s) -> Matrix {
    if (const auto* proj = std::get_if<SchemeProjection>(&map)) {
      const auto& scheme = *proj->scheme;
      std::vector<double> b(scheme.adjacency().size());
      for (double& v : b) v = 2.0 * s.next_double() - 1.0;
      return scheme.combine_adjacency(b);
    }
    if (const auto* mask = std::get_if<HadamardMask>(&map)) {
      Matrix g(dim, dim);
      for (Eigen::Index i = 0; i < dim; ++i)
        for (Eigen::Index j = 0; j < dim; ++j) g(i, j) = s.next_gaussian();
      return matlib::hadamard(mask->L, g);
    }
    Matrix g(dim, dim);
    for (Eigen::Index i = 0; i < dim; ++i)
      for (Eigen::Index j = 0; j < dim; ++j) g(i, j) = s.next_gaussian();
    return g;  // identity map: the ring is all of M_r
  };

  H3Report report;
  report.samples = sample_count;
  report.min_cauchy_schwarz_gap = std::numeric_limits<double>::infinity();
  for (int k = 0; k < sample_count; ++k) {
    const matlib::SpdMatrix q(random_spd(dim, stream), 1e-9);
    const Matrix pq = apply(map, q).mat();
    const Matrix residual_arg = q.mat() - pq;
    const Matrix b = random_ring_element(stream);

    const Matrix h3 =
        apply_to_general(map, b * residual_arg + residual_arg * b);
    report.max_orthogonality_residual =
        std::max(report.max_orthogonality_residual, h3.norm());

    const Matrix ppq = apply_to_general(map, pq);
    report.max_idempotence_residual =
        std::max(report.max_idempotence_residual,
                 (ppq - pq).norm() / (1.0 + q.mat().norm()));

    const Matrix lhs = apply_to_general(map, q.mat() * q.mat());
    const Matrix gap = lhs - pq * pq.transpose();
    report.min_cauchy_schwarz_gap =
        std::min(report.min_cauchy_schwarz_gap, matlib::min_eigenvalue(gap));
  }
  return report;
}

Matrix apply_to_general(const RegMap& map, const Matrix& q) {
  if (std::holds_alternative<Identity>(map)) return q;
  if (const auto* mask = std::get_if<HadamardMask>(&map))
    return matlib::hadamard(mask->L, q);
  if (const auto* proj = std::get_if<SchemeProjection>(&map))
    return proj->scheme->project(q);
  throw InvalidInputError("apply_to_general: linear projection variants only");
}

}  // namespace regmaps
}  // namespace kblab
