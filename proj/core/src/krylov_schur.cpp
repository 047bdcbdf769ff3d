// Krylov-Schur restarted Arnoldi (Stewart 2001) for complex non-Hermitian operators.
//
// The basis satisfies A V_j = V_j B_j + v_j b^T at all times. After each expansion
// the Rayleigh quotient is brought to complex Schur form, wanted Ritz values are
// moved to the front by unitary swaps and the decomposition is truncated.

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include <Eigen/Dense>

#include "nhkpm/eigensolver.hpp"

namespace nhkpm {

namespace {

StateVector random_vector(Index n, std::mt19937_64& rng) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  StateVector v(n);
  for (Index i = 0; i < n; ++i) v[i] = cplx{gauss(rng), gauss(rng)};
  return v;
}

// Classical Gram-Schmidt against the first `cols` columns with one DGKS correction.
Eigen::VectorXcd orthogonalize(const Eigen::MatrixXcd& V, Index cols, StateVector& w) {
  Eigen::VectorXcd h = Eigen::VectorXcd::Zero(cols);
  if (cols == 0) return h;
  const double before = w.norm();
  h = V.leftCols(cols).adjoint() * w;
  w.noalias() -= V.leftCols(cols) * h;
  if (w.norm() < 0.7071 * before) {
    Eigen::VectorXcd c = V.leftCols(cols).adjoint() * w;
    w.noalias() -= V.leftCols(cols) * c;
    h += c;
  }
  return h;
}

// Swap the adjacent diagonal entries i, i+1 of upper triangular T, updating Q.
void swap_schur(Eigen::MatrixXcd& T, Eigen::MatrixXcd& Q, Index i) {
  const cplx a = T(i, i), b = T(i, i + 1), c = T(i + 1, i + 1);
  Eigen::Vector2cd x(b, c - a);
  const double nx = x.norm();
  if (nx == 0.0) return;  // equal eigenvalues, nothing to do
  x /= nx;
  Eigen::Matrix2cd G;
  G << x[0], -std::conj(x[1]), x[1], std::conj(x[0]);
  T.middleCols(i, 2) = T.middleCols(i, 2) * G;
  T.middleRows(i, 2) = G.adjoint() * T.middleRows(i, 2);
  Q.middleCols(i, 2) = Q.middleCols(i, 2) * G;
  T(i + 1, i) = 0.0;
}

// Reorder T so that its diagonal is sorted by decreasing real part (then imaginary).
void sort_schur(Eigen::MatrixXcd& T, Eigen::MatrixXcd& Q) {
  const Index m = T.rows();
  auto before = [](cplx p, cplx q) {
    if (p.real() != q.real()) return p.real() > q.real();
    return p.imag() < q.imag();
  };
  for (Index pass = 0; pass < m; ++pass) {
    bool swapped = false;
    for (Index i = 0; i + 1 < m - pass; ++i) {
      if (before(T(i + 1, i + 1), T(i, i))) {
        swap_schur(T, Q, i);
        swapped = true;
      }
    }
    if (!swapped) break;
  }
}

// Eigenvectors of the leading k x k block of upper triangular T (back substitution).
Eigen::MatrixXcd triangular_eigenvectors(const Eigen::MatrixXcd& T, Index k) {
  Eigen::MatrixXcd X = Eigen::MatrixXcd::Zero(k, k);
  const double small = std::numeric_limits<double>::epsilon() * std::max(1.0, T.norm());
  for (Index j = 0; j < k; ++j) {
    const cplx lam = T(j, j);
    X(j, j) = 1.0;
    for (Index i = j - 1; i >= 0; --i) {
      cplx s = 0.0;
      for (Index p = i + 1; p <= j; ++p) s += T(i, p) * X(p, j);
      cplx d = T(i, i) - lam;
      if (std::abs(d) < small) d = small;
      X(i, j) = -s / d;
    }
    X.col(j).normalize();
  }
  return X;
}

}  // namespace

RitzPairs krylov_schur_largest_real(const SparseOperator& A, const KrylovOptions& opts) {
  const Index n = A.dim();
  if (n < 1) throw InvalidArgument("Krylov-Schur needs a non-empty operator");
  if (opts.candidates < 1) throw InvalidArgument("candidates must be >= 1");
  if (!(opts.tol > 0.0)) throw InvalidArgument("tolerance must be positive");
  if (opts.max_restarts < 0) throw InvalidArgument("max_restarts must be non-negative");

  const Index m = std::min<Index>(std::max<Index>(opts.subspace, opts.candidates + 2), n);
  const Index nev = std::min<Index>(opts.candidates, m == n ? n : m - 1);
  const Index keep = std::min<Index>(m - 1, nev + (m - nev) / 2);

  std::mt19937_64 rng(opts.seed);
  Eigen::MatrixXcd V = Eigen::MatrixXcd::Zero(n, m + 1);
  Eigen::MatrixXcd B = Eigen::MatrixXcd::Zero(m + 1, m);
  {
    StateVector v0 = random_vector(n, rng);
    V.col(0) = v0 / v0.norm();
  }
  Index k = 0;
  double best = std::numeric_limits<double>::infinity();
  double norm_estimate = 0.0;

  for (int restart = 0;; ++restart) {
    // Arnoldi expansion from column k to m.
    for (Index j = k; j < m; ++j) {
      StateVector w = A.apply(V.col(j));
      const double wnorm = w.norm();
      Eigen::VectorXcd h = orthogonalize(V, j + 1, w);
      B.col(j).head(j + 1) = h;
      double beta = w.norm();
      if (beta <= 1e-12 * std::max(wnorm, 1e-300) || beta == 0.0) {
        // Invariant subspace found. Continue with a fresh direction if one exists.
        B(j + 1, j) = 0.0;
        if (j + 1 < n) {
          StateVector r = random_vector(n, rng);
          orthogonalize(V, j + 1, r);
          orthogonalize(V, j + 1, r);
          V.col(j + 1) = r / r.norm();
        } else {
          V.col(j + 1).setZero();
        }
      } else {
        B(j + 1, j) = beta;
        V.col(j + 1) = w / beta;
      }
    }

    Eigen::ComplexSchur<Eigen::MatrixXcd> schur(B.topRows(m));
    Eigen::MatrixXcd T = schur.matrixT();
    Eigen::MatrixXcd Q = schur.matrixU();
    sort_schur(T, Q);
    norm_estimate = std::max(norm_estimate, T.jacobiSvd().singularValues()(0));

    // b^T = B(m, :) Q; only the last column of B(m, :) is nonzero.
    const Eigen::RowVectorXcd b = B(m, m - 1) * Q.row(m - 1);
    const Eigen::MatrixXcd X = triangular_eigenvectors(T, nev);
    std::vector<double> res(static_cast<std::size_t>(nev));
    double worst = 0.0;
    for (Index i = 0; i < nev; ++i) {
      res[static_cast<std::size_t>(i)] = std::abs((b.head(nev) * X.col(i)).value());
      worst = std::max(worst, res[static_cast<std::size_t>(i)]);
    }
    best = std::min(best, worst);
    const double threshold = opts.tol * std::max(norm_estimate, 1e-300);

    if (worst <= threshold) {
      RitzPairs out;
      out.norm_estimate = norm_estimate;
      out.restarts = restart;
      const Eigen::MatrixXcd VQ = V.leftCols(m) * Q.leftCols(nev);
      for (Index i = 0; i < nev; ++i) {
        StateVector y = VQ * X.col(i);
        y.normalize();
        out.values.push_back(T(i, i));
        out.vectors.push_back(std::move(y));
        out.residuals.push_back(res[static_cast<std::size_t>(i)]);
      }
      return out;
    }
    if (restart >= opts.max_restarts) {
      throw NonConvergence("Krylov-Schur did not converge after " + std::to_string(restart) +
                               " restarts (best residual " + std::to_string(best) + ")",
                           best, restart);
    }

    // Truncate to the `keep` leading Schur vectors.
    k = keep;
    Eigen::MatrixXcd Vk = V.leftCols(m) * Q.leftCols(k);
    const StateVector vnext = V.col(m);
    V.setZero();
    V.leftCols(k) = Vk;
    V.col(k) = vnext;
    B.setZero();
    B.topLeftCorner(k, k) = T.topLeftCorner(k, k).triangularView<Eigen::Upper>();
    B.row(k).head(k) = b.head(k);
  }
}

}  // namespace nhkpm
