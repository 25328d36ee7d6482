#ifndef KBLAB_SCHEMES_HPP
#define KBLAB_SCHEMES_HPP

#include <cstdint>
#include <vector>

#include "kblab/matlib.hpp"

namespace kblab {
namespace schemes {

/// Spectral coefficients of ring members (A, R, S) and the initial
/// condition, one scalar per minimal idempotent.
struct SchemeCoefficients {
  std::vector<double> a;
  std::vector<double> r;
  std::vector<double> s;
  std::vector<double> alpha0;
};

/// An association scheme with its Bose-Mesner algebra data: adjacency basis
/// B_0..B_n ({0,1} matrices, B_0 = Id, sum = J), integer structural constants
/// w^q_{q1,q2} with B_{q1} B_{q2} = sum_q w^q_{q1,q2} B_q exactly, and the
/// basis of minimal orthogonal idempotents D_0..D_m (D_0 = J/r).
class AssociationScheme {
 public:
  Eigen::Index points() const { return labels_.rows(); }
  int classes() const { return n_; }
  int idempotent_count() const { return static_cast<int>(idempotents_.size()); }

  const Eigen::MatrixXi& class_labels() const { return labels_; }
  const std::vector<Matrix>& adjacency() const { return adjacency_; }
  const std::vector<long>& valencies() const { return valencies_; }
  /// w^q_{q1,q2}
  long structural_constant(int q, int q1, int q2) const {
    return w_[static_cast<std::size_t>(q)][static_cast<std::size_t>(q1)]
             [static_cast<std::size_t>(q2)];
  }
  const std::vector<Matrix>& idempotents() const { return idempotents_; }
  /// lambda_k(B_q), row k = idempotent index, column q = class index.
  const Matrix& eigen_table() const { return eigen_table_; }

  /// Frobenius-orthogonal projection onto the Bose-Mesner algebra,
  /// evaluated in the adjacency basis (class averages).
  Matrix project(const Matrix& q) const;
  /// Same projection evaluated in the idempotent basis; agrees with
  /// project() to 1e-10 and exists for cross-checking.
  Matrix project_via_idempotents(const Matrix& q) const;

  /// True iff q is constant within every class to the given tolerance.
  bool membership(const Matrix& q, double tol = 1e-10) const;

  /// Coefficients c with sum_k c_k D_k = q. Throws InvalidInputError when q
  /// is not a ring member.
  std::vector<double> decompose(const Matrix& q, double tol = 1e-10) const;

  /// sum_k coeffs[k] D_k
  Matrix combine(const std::vector<double>& coeffs) const;
  /// sum_q b[q] B_q
  Matrix combine_adjacency(const std::vector<double>& b) const;

  friend AssociationScheme from_partition(const Eigen::MatrixXi& class_labels,
                                          double idempotent_tol);
  friend AssociationScheme from_distance_regular_graph(const Matrix& adjacency,
                                                       double idempotent_tol);

 private:
  AssociationScheme() = default;
  void build_idempotents(double tol);

  Eigen::MatrixXi labels_;
  int n_ = 0;
  std::vector<Matrix> adjacency_;
  std::vector<long> valencies_;
  std::vector<std::vector<std::vector<long>>> w_;
  std::vector<Matrix> idempotents_;
  Matrix eigen_table_;
};

/// Build a scheme from an (i, j) -> class label matrix. Class 0 must be the
/// diagonal; classes must be symmetric; the structural constants are counted
/// by brute force and must be constant over every class.
AssociationScheme from_partition(const Eigen::MatrixXi& class_labels,
                                 double idempotent_tol = 1e-8);

/// Build the distance scheme of a connected distance-regular graph from its
/// {0,1} adjacency matrix. Throws when the graph is disconnected or the
/// distance partition fails the scheme axioms, and verifies the tridiagonal
/// recursion satisfied by B_1 B_q.
AssociationScheme from_distance_regular_graph(const Matrix& adjacency,
                                              double idempotent_tol = 1e-8);

/// The trivial scheme on r points: diagonal plus everything else.
AssociationScheme trivial_scheme(Eigen::Index r);

/// Group-divisible scheme: `groups` disjoint copies of the complete graph on
/// `group_size` points (class 1 within groups, class 2 across).
AssociationScheme group_divisible_scheme(int groups, int group_size);

/// Adjacency matrix of the cycle graph on r vertices.
Matrix cycle_graph(Eigen::Index r);

/// Closed-form solution of the scalar Riccati equation
///   d alpha / dt = 2 a alpha + r - s alpha^2
/// from alpha(0) = alpha0. Uses the two-root formula when s != 0 and the
/// linear-equation solution when s = 0.
double scalar_riccati_closed_form(double a, double r, double s, double alpha0,
                                  double t);

/// Stationary root z2 = (a + sqrt(a^2 + s r)) / s of the scalar equation.
double scalar_riccati_limit(double a, double r, double s);

/// Extract per-idempotent coefficients of ring members (A, R, S, P0).
/// Throws when any input fails membership.
SchemeCoefficients extract_coefficients(const AssociationScheme& scheme,
                                        const Matrix& a, const Matrix& r,
                                        const Matrix& s, const Matrix& p0,
                                        double tol = 1e-9);

/// P_t = sum_q alpha_q(t) D_q with alpha_q solved in closed form.
matlib::SpdMatrix scheme_riccati_closed_form(const AssociationScheme& scheme,
                                             const SchemeCoefficients& coeffs,
                                             double t);

}  // namespace schemes
}  // namespace kblab

#endif  // KBLAB_SCHEMES_HPP
