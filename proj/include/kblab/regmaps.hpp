#ifndef KBLAB_REGMAPS_HPP
#define KBLAB_REGMAPS_HPP

#include <cstdint>
#include <memory>
#include <string>
#include <variant>
#include <vector>

#include "kblab/matlib.hpp"
#include "kblab/model.hpp"
#include "kblab/rng.hpp"
#include "kblab/schemes.hpp"

namespace kblab {
namespace regmaps {

// Covariance regularization maps pi. Perturbation-type variants live close
// to the identity (inflation, shrinkage); projection-type variants are
// idempotent (masks with {0,1} entries, scheme projections).

struct Identity {};

/// pi(Q) = Q + epsilon * T with a PSD reference matrix T.
struct Inflation {
  double epsilon = 0.0;
  Matrix T;
};

/// pi(Q) = L (Hadamard) Q. Rigorous for {0,1}-valued block masks; general
/// PSD masks are accepted but flagged heuristic.
struct HadamardMask {
  Matrix L;
  bool binary = false;
};

/// Frobenius-orthogonal projection onto a Bose-Mesner algebra.
struct SchemeProjection {
  std::shared_ptr<const schemes::AssociationScheme> scheme;
};

/// Banded mask target T(Q) = L (Hadamard) Q with L_{ij} = 1_{|i-j| < iota}.
struct MaskBand {
  int iota = 1;
};

/// Scheme-projection target.
struct SchemeTarget {
  std::shared_ptr<const schemes::AssociationScheme> scheme;
};

/// Schur-complement reconstruction target over a coordinate partition.
struct NystromTarget {
  std::vector<Eigen::Index> partition;  // 0-based, sorted
};

using TargetSpec = std::variant<MaskBand, SchemeTarget, NystromTarget>;

/// pi(Q) = Q + eps(Q) (T(Q) - Q) with eps(Q) = eps1 * 1{l_T(Q) <= 1/eps2}.
/// Ties l_T(Q) = 1/eps2 count as inside the threshold (closed sub-level set).
struct SteinShrinkage {
  double eps1 = 0.0;
  double eps2 = 1.0;
  TargetSpec target;
};

/// pi(Q) = T(Q), the Schur-complement reconstruction itself.
struct Nystrom {
  std::vector<Eigen::Index> partition;
};

using RegMap = std::variant<Identity, Inflation, HadamardMask, SchemeProjection,
                            SteinShrinkage, Nystrom>;

RegMap make_identity();
RegMap make_inflation(double epsilon, Matrix T);
RegMap make_hadamard_mask(Matrix L);
RegMap make_scheme_projection(std::shared_ptr<const schemes::AssociationScheme> scheme);
RegMap make_stein_shrinkage(double eps1, double eps2, TargetSpec target);
RegMap make_nystrom(std::vector<Eigen::Index> partition, Eigen::Index dim);

/// Block-diagonal {0,1} mask diag(J_1, ..., J_n) for the given block sizes.
Matrix block_mask(const std::vector<Eigen::Index>& block_sizes);

/// True for non-{0,1} PSD masks (outside the rigorous block case).
bool is_heuristic(const RegMap& map);
/// True for the idempotent (projection-type) variants.
bool is_idempotent_variant(const RegMap& map);
std::string describe(const RegMap& map);

/// Evaluate pi(Q).
matlib::SpdMatrix apply(const RegMap& map, const matlib::SpdMatrix& q);

/// Linear extension of the projection variants (identity, mask, scheme) to
/// arbitrary square matrices, as needed by the (H)_3 orthogonality check.
Matrix apply_to_general(const RegMap& map, const Matrix& q);

/// Gamma_pi(Q) = Ricc^pi(Q) - Ricc(Q). Equals eps^2 T S T for inflation.
Matrix gamma_pi(const RegMap& map, const matlib::SpdMatrix& q,
                const FilterModel& model);

struct InducedTriplet {
  Matrix A;
  Matrix R;
  Matrix S;
};

/// The (A_pi, R_pi, S_pi) triplet induced by the map: inflation gives
/// (A, R + eps^2 T S T, S); banded-mask shrinkage gives
/// (A, R + (eps1/eps2)^2 ||S||_2 Id, S). Projection variants have no such
/// triplet and are rejected.
InducedTriplet induced_triplet(const RegMap& map, const FilterModel& model);

/// Deviation bound l_T(Q): the Gershgorin row-sum bound
/// max_i sum_{|i-j| >= iota} |Q_ij| for banded masks, tr(Q) for scheme
/// targets. Nystrom targets are not supported.
double mask_deviation_bound(const Matrix& q, const TargetSpec& target);

/// T(Q) = (J - L_{P^c}) (Hadamard) Q + L_{P^c} (Hadamard) [Q_{P^c,P} Q_P^+ Q_{P,P^c}].
Matrix nystrom_target(const Matrix& q, const std::vector<Eigen::Index>& partition);

/// Predicted expectation of the sample Nystrom estimator over N particles:
/// T(Q) + (s/N) L_{P^c} (Hadamard) [Q_{P^c} - Q_{P^c,P} Q_P^+ Q_{P,P^c}].
Matrix nystrom_bias(const Matrix& q, const std::vector<Eigen::Index>& partition,
                    long n_particles);

struct H3Report {
  double max_orthogonality_residual = 0.0;  // pi(B[Q-pi(Q)] + [Q-pi(Q)]B)
  double max_idempotence_residual = 0.0;    // ||pi(pi(Q)) - pi(Q)||_F / ||Q||_F
  double min_cauchy_schwarz_gap = 0.0;      // lambda_min(pi(QQ') - pi(Q)pi(Q)')
  int samples = 0;
};

/// Sample the (H)_3 orthogonality residual over random SPD matrices Q and
/// random ring elements B, together with idempotence and the projection
/// Cauchy-Schwarz inequality. Only meaningful for idempotent variants.
H3Report check_h3(const RegMap& map, Eigen::Index dim, int sample_count,
                  std::uint64_t rng_seed);

/// Deterministic random SPD matrix with lambda_min >= eigen_floor.
Matrix random_spd(Eigen::Index dim, rng::Stream& stream, double eigen_floor = 0.25);

}  // namespace regmaps
}  // namespace kblab

#endif  // KBLAB_REGMAPS_HPP
