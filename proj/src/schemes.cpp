#include "kblab/schemes.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <sstream>

#include "kblab/rng.hpp"

namespace kblab {
namespace schemes {

namespace {

constexpr std::uint64_t kIdempotentSeed = 0x5C8E3EA11DULL;

[[noreturn]] void scheme_error(const std::string& what) {
  throw InvalidInputError("AssociationScheme: " + what);
}

}  // namespace

AssociationScheme from_partition(const Eigen::MatrixXi& labels,
                                 double idempotent_tol) {
  const Eigen::Index r = labels.rows();
  if (labels.cols() != r || r < 2) scheme_error("label matrix must be square, r >= 2");

  int n = 0;
  for (Eigen::Index i = 0; i < r; ++i)
    for (Eigen::Index j = 0; j < r; ++j) {
      if (labels(i, j) < 0) scheme_error("negative class label");
      n = std::max(n, labels(i, j));
      if (labels(i, j) != labels(j, i))
        scheme_error("class " + std::to_string(labels(i, j)) + " is not symmetric");
      if ((i == j) != (labels(i, j) == 0))
        scheme_error("class 0 must be exactly the diagonal");
    }
  // every class index up to n must be used
  std::vector<long> counts(static_cast<std::size_t>(n) + 1, 0);
  for (Eigen::Index i = 0; i < r; ++i)
    for (Eigen::Index j = 0; j < r; ++j) ++counts[labels(i, j)];
  for (int q = 0; q <= n; ++q)
    if (counts[q] == 0) scheme_error("class " + std::to_string(q) + " is empty");

  AssociationScheme scheme;
  scheme.labels_ = labels;
  scheme.n_ = n;

  std::vector<Eigen::MatrixXi> bq(static_cast<std::size_t>(n) + 1,
                                  Eigen::MatrixXi::Zero(r, r));
  for (Eigen::Index i = 0; i < r; ++i)
    for (Eigen::Index j = 0; j < r; ++j) bq[labels(i, j)](i, j) = 1;

  // Triangle counting in exact integer arithmetic. The product B_{q1} B_{q2}
  // must be constant over every class; the constant is w^q_{q1,q2}.
  scheme.w_.assign(n + 1, std::vector<std::vector<long>>(
                              n + 1, std::vector<long>(n + 1, 0)));
  for (int q1 = 0; q1 <= n; ++q1) {
    for (int q2 = q1; q2 <= n; ++q2) {
      const Eigen::MatrixXi prod = bq[q1] * bq[q2];
      std::vector<long> value(static_cast<std::size_t>(n) + 1, -1);
      for (Eigen::Index i = 0; i < r; ++i)
        for (Eigen::Index j = 0; j < r; ++j) {
          const int q = labels(i, j);
          const long v = prod(i, j);
          if (value[q] < 0) {
            value[q] = v;
          } else if (value[q] != v) {
            std::ostringstream os;
            os << "not an association scheme: triangle count for classes ("
               << q1 << ", " << q2 << ") is not constant over class " << q;
            scheme_error(os.str());
          }
        }
      for (int q = 0; q <= n; ++q) {
        scheme.w_[q][q1][q2] = value[q];
        scheme.w_[q][q2][q1] = value[q];
      }
    }
  }

  scheme.valencies_.resize(static_cast<std::size_t>(n) + 1);
  for (int q = 0; q <= n; ++q) scheme.valencies_[q] = scheme.w_[0][q][q];

  scheme.adjacency_.resize(static_cast<std::size_t>(n) + 1);
  for (int q = 0; q <= n; ++q) scheme.adjacency_[q] = bq[q].cast<double>();

  scheme.build_idempotents(idempotent_tol);
  return scheme;
}

void AssociationScheme::build_idempotents(double tol) {
  const Eigen::Index r = points();
  const Matrix identity = Matrix::Identity(r, r);
  const Matrix jr = Matrix::Constant(r, r, 1.0 / static_cast<double>(r));

  for (int attempt = 0; attempt < 5; ++attempt) {
    rng::Stream stream(rng::derive_key(kIdempotentSeed, attempt));
    Matrix m = Matrix::Zero(r, r);
    for (int q = 0; q <= n_; ++q) m += stream.next_double() * adjacency_[q];
    m = matlib::symmetrize(m);

    Eigen::SelfAdjointEigenSolver<Matrix> es(m);
    const Vector& ev = es.eigenvalues();
    const double spread = std::max(ev.maxCoeff() - ev.minCoeff(), 1.0);
    const double gap_tol = tol * spread;

    // cluster sorted eigenvalues
    std::vector<std::pair<Eigen::Index, Eigen::Index>> clusters;  // [begin,end)
    Eigen::Index begin = 0;
    for (Eigen::Index i = 1; i <= r; ++i) {
      if (i == r || ev(i) - ev(i - 1) > gap_tol) {
        clusters.emplace_back(begin, i);
        begin = i;
      }
    }

    std::vector<Matrix> projectors;
    projectors.reserve(clusters.size());
    for (const auto& [b, e] : clusters) {
      const Matrix v = es.eigenvectors().middleCols(b, e - b);
      projectors.push_back(matlib::symmetrize(v * v.transpose()));
    }

    // each projector must be a common eigenprojector of the whole basis
    bool ok = true;
    const double residual_tol = 1e-9 * static_cast<double>(r);
    Matrix table(static_cast<Eigen::Index>(projectors.size()), n_ + 1);
    for (std::size_t k = 0; k < projectors.size() && ok; ++k) {
      const Matrix& d = projectors[k];
      const double dd = d.squaredNorm();
      for (int q = 0; q <= n_ && ok; ++q) {
        const double lambda = (adjacency_[q].cwiseProduct(d)).sum() / dd;
        const double res = (adjacency_[q] * d - lambda * d).norm();
        if (res > residual_tol * (1.0 + std::abs(lambda))) ok = false;
        table(static_cast<Eigen::Index>(k), q) = lambda;
      }
    }
    if (!ok) continue;

    // locate the constants eigenspace and pin D_0 = J/r
    std::size_t k0 = projectors.size();
    for (std::size_t k = 0; k < projectors.size(); ++k) {
      if ((projectors[k] - jr).norm() < 1e-8 * static_cast<double>(r)) {
        k0 = k;
        break;
      }
    }
    if (k0 == projectors.size()) continue;  // constants collided with another eigenspace
    projectors[k0] = jr;
    std::swap(projectors[0], projectors[k0]);
    {
      Matrix row0 = table.row(static_cast<Eigen::Index>(k0));
      table.row(static_cast<Eigen::Index>(k0)) = table.row(0);
      table.row(0) = row0;
    }

    // residual validation: mutual orthogonality and resolution of identity
    Matrix sum = Matrix::Zero(r, r);
    double max_cross = 0.0;
    for (std::size_t i = 0; i < projectors.size(); ++i) {
      sum += projectors[i];
      for (std::size_t j = i + 1; j < projectors.size(); ++j)
        max_cross = std::max(max_cross, (projectors[i] * projectors[j]).norm());
      max_cross = std::max(
          max_cross, (projectors[i] * projectors[i] - projectors[i]).norm());
    }
    if (max_cross > 1e-10 || (sum - identity).norm() > 1e-10) continue;

    idempotents_ = std::move(projectors);
    eigen_table_ = table;
    return;
  }
  scheme_error("idempotent eigenvalue grouping failed after 5 attempts");
}

Matrix AssociationScheme::project(const Matrix& q) const {
  const Eigen::Index r = points();
  if (q.rows() != r || q.cols() != r)
    throw DimensionError("project: dimension mismatch with scheme");
  std::vector<double> sum(static_cast<std::size_t>(n_) + 1, 0.0);
  std::vector<long> cnt(static_cast<std::size_t>(n_) + 1, 0);
  for (Eigen::Index i = 0; i < r; ++i)
    for (Eigen::Index j = 0; j < r; ++j) {
      sum[labels_(i, j)] += q(i, j);
      ++cnt[labels_(i, j)];
    }
  Matrix out(r, r);
  for (Eigen::Index i = 0; i < r; ++i)
    for (Eigen::Index j = 0; j < r; ++j) {
      const int c = labels_(i, j);
      out(i, j) = sum[c] / static_cast<double>(cnt[c]);
    }
  return out;
}

Matrix AssociationScheme::project_via_idempotents(const Matrix& q) const {
  const Eigen::Index r = points();
  if (q.rows() != r || q.cols() != r)
    throw DimensionError("project: dimension mismatch with scheme");
  Matrix out = Matrix::Zero(r, r);
  for (const Matrix& d : idempotents_)
    out += (d.cwiseProduct(q).sum() / d.squaredNorm()) * d;
  return out;
}

bool AssociationScheme::membership(const Matrix& q, double tol) const {
  const Eigen::Index r = points();
  if (q.rows() != r || q.cols() != r)
    throw DimensionError("membership: dimension mismatch with scheme");
  const double scale = 1.0 + q.cwiseAbs().maxCoeff();
  return (q - project(q)).cwiseAbs().maxCoeff() <= tol * scale;
}

std::vector<double> AssociationScheme::decompose(const Matrix& q,
                                                 double tol) const {
  if (!membership(q, tol))
    throw InvalidInputError("decompose: matrix is not a ring member");
  std::vector<double> coeffs;
  coeffs.reserve(idempotents_.size());
  for (const Matrix& d : idempotents_)
    coeffs.push_back(d.cwiseProduct(q).sum() / d.squaredNorm());
  const double recon = (combine(coeffs) - q).norm();
  if (recon > 1e-10 * (1.0 + q.norm()))
    throw InvalidInputError("decompose: reconstruction residual too large");
  return coeffs;
}

Matrix AssociationScheme::combine(const std::vector<double>& coeffs) const {
  if (coeffs.size() != idempotents_.size())
    throw DimensionError("combine: one coefficient per idempotent required");
  Matrix out = Matrix::Zero(points(), points());
  for (std::size_t k = 0; k < coeffs.size(); ++k)
    out += coeffs[k] * idempotents_[k];
  return out;
}

Matrix AssociationScheme::combine_adjacency(const std::vector<double>& b) const {
  if (b.size() != adjacency_.size())
    throw DimensionError("combine_adjacency: one coefficient per class required");
  Matrix out = Matrix::Zero(points(), points());
  for (std::size_t q = 0; q < b.size(); ++q) out += b[q] * adjacency_[q];
  return out;
}

AssociationScheme from_distance_regular_graph(const Matrix& adjacency,
                                              double idempotent_tol) {
  const Eigen::Index r = adjacency.rows();
  if (adjacency.cols() != r) scheme_error("adjacency matrix must be square");
  for (Eigen::Index i = 0; i < r; ++i) {
    if (adjacency(i, i) != 0.0) scheme_error("adjacency diagonal must be zero");
    for (Eigen::Index j = 0; j < r; ++j) {
      if (adjacency(i, j) != 0.0 && adjacency(i, j) != 1.0)
        scheme_error("adjacency entries must be 0 or 1");
      if (adjacency(i, j) != adjacency(j, i))
        scheme_error("adjacency matrix must be symmetric");
    }
  }

  // BFS path-length distances
  Eigen::MatrixXi dist = Eigen::MatrixXi::Constant(r, r, -1);
  for (Eigen::Index src = 0; src < r; ++src) {
    std::deque<Eigen::Index> queue{src};
    dist(src, src) = 0;
    while (!queue.empty()) {
      const Eigen::Index u = queue.front();
      queue.pop_front();
      for (Eigen::Index v = 0; v < r; ++v) {
        if (adjacency(u, v) != 0.0 && dist(src, v) < 0) {
          dist(src, v) = dist(src, u) + 1;
          queue.push_back(v);
        }
      }
    }
  }
  if ((dist.array() < 0).any()) scheme_error("graph is disconnected");

  AssociationScheme scheme;
  try {
    scheme = from_partition(dist, idempotent_tol);
  } catch (const InvalidInputError& e) {
    scheme_error("graph is not distance regular (" + std::string(e.what()) + ")");
  }

  // tridiagonal recursion over the exact structural constants:
  //   B_1 B_q = c_{q-1} B_{q-1} + (a_1 - b_q - c_q) B_q + b_{q+1} B_{q+1}
  // with a_q = w^0_{q,q}, b_q = w^q_{q-1,1}, c_q = w^q_{q+1,1}.
  const int d = scheme.classes();
  auto w = [&scheme](int q, int q1, int q2) {
    return scheme.structural_constant(q, q1, q2);
  };
  const long a1 = w(0, 1, 1);
  for (int q = 1; q <= d; ++q) {
    for (int p = 0; p <= d; ++p)
      if (std::abs(p - q) >= 2 && w(p, 1, q) != 0)
        scheme_error("distance-regular recursion violated (long-range term)");
    const long b_q = w(q, q - 1, 1);
    const long c_q = q + 1 <= d ? w(q, q + 1, 1) : 0;
    if (w(q, 1, q) != a1 - b_q - c_q)
      scheme_error("distance-regular recursion violated (diagonal term)");
  }
  return scheme;
}

AssociationScheme trivial_scheme(Eigen::Index r) {
  Eigen::MatrixXi labels = Eigen::MatrixXi::Ones(r, r);
  labels.diagonal().setZero();
  return from_partition(labels);
}

AssociationScheme group_divisible_scheme(int groups, int group_size) {
  const Eigen::Index r = static_cast<Eigen::Index>(groups) * group_size;
  Eigen::MatrixXi labels(r, r);
  for (Eigen::Index i = 0; i < r; ++i)
    for (Eigen::Index j = 0; j < r; ++j) {
      if (i == j)
        labels(i, j) = 0;
      else if (i / group_size == j / group_size)
        labels(i, j) = 1;
      else
        labels(i, j) = 2;
    }
  return from_partition(labels);
}

Matrix cycle_graph(Eigen::Index r) {
  Matrix adj = Matrix::Zero(r, r);
  for (Eigen::Index i = 0; i < r; ++i) {
    adj(i, (i + 1) % r) = 1.0;
    adj((i + 1) % r, i) = 1.0;
  }
  return adj;
}

double scalar_riccati_limit(double a, double r, double s) {
  if (s == 0.0) throw InvalidInputError("scalar_riccati_limit: s must be nonzero");
  return (a + std::sqrt(a * a + s * r)) / s;
}

double scalar_riccati_closed_form(double a, double r, double s, double alpha0,
                                  double t) {
  if (s == 0.0) {
    // linear equation d alpha = 2 a alpha + r
    if (std::abs(a) < 1e-300) return alpha0 + r * t;
    const double growth = std::exp(2.0 * a * t);
    return growth * alpha0 + r * (growth - 1.0) / (2.0 * a);
  }
  const double disc = a * a + s * r;
  if (disc < 0.0)
    throw NumericalError("scalar_riccati_closed_form: negative discriminant");
  if (disc == 0.0) {
    // double root z = a/s: d alpha = -s (alpha - z)^2
    const double z = a / s;
    return z + (alpha0 - z) / (1.0 + s * (alpha0 - z) * t);
  }
  const double root = std::sqrt(disc);
  const double z1 = (a - root) / s;
  const double z2 = (a + root) / s;
  const double decay = std::exp(-2.0 * t * root);
  const double denom = (z2 - alpha0) * decay + (alpha0 - z1);
  if (denom == 0.0)
    throw NumericalError("scalar_riccati_closed_form: solution escapes in finite time");
  return z2 + (alpha0 - z2) * (z2 - z1) * decay / denom;
}

SchemeCoefficients extract_coefficients(const AssociationScheme& scheme,
                                        const Matrix& a, const Matrix& r,
                                        const Matrix& s, const Matrix& p0,
                                        double tol) {
  SchemeCoefficients coeffs;
  coeffs.a = scheme.decompose(a, tol);
  coeffs.r = scheme.decompose(r, tol);
  coeffs.s = scheme.decompose(s, tol);
  coeffs.alpha0 = scheme.decompose(p0, tol);
  for (double rq : coeffs.r)
    if (rq < -tol)
      throw InvalidInputError("extract_coefficients: R coefficient is negative");
  return coeffs;
}

matlib::SpdMatrix scheme_riccati_closed_form(const AssociationScheme& scheme,
                                             const SchemeCoefficients& coeffs,
                                             double t) {
  const std::size_t m = scheme.idempotents().size();
  if (coeffs.a.size() != m || coeffs.r.size() != m || coeffs.s.size() != m ||
      coeffs.alpha0.size() != m)
    throw DimensionError("scheme_riccati_closed_form: coefficient count mismatch");
  std::vector<double> alpha(m);
  for (std::size_t q = 0; q < m; ++q)
    alpha[q] = scalar_riccati_closed_form(coeffs.a[q], coeffs.r[q], coeffs.s[q],
                                          coeffs.alpha0[q], t);
  return matlib::SpdMatrix(scheme.combine(alpha), 1e-9);
}

}  // namespace schemes
}  // namespace kblab
