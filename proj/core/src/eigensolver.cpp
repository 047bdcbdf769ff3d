#include "nhkpm/eigensolver.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include <Eigen/Dense>

namespace nhkpm {

namespace {

constexpr double kPairingThreshold = 1e-10;

double relative_variance(const SparseOperator::Matrix& A, const StateVector& v) {
  const double n = v.norm();
  if (n == 0.0) throw InvalidArgument("fidelity deviation of a zero vector is undefined");
  const StateVector u = v / n;
  const StateVector Au = A * u;
  const double second = Au.squaredNorm();  // <u|A^dagger A|u>
  if (second == 0.0) return 0.0;           // A u = 0: u is an exact eigenvector
  const double first = std::norm(u.dot(Au));
  return std::clamp((second - first) / second, 0.0, 1.0);
}

bool eigen_order(cplx a, cplx b, double tie) {
  if (std::abs(a.real() - b.real()) > tie) return a.real() < b.real();
  if (a.imag() != b.imag()) return a.imag() < b.imag();
  return a.real() < b.real();
}

}  // namespace

std::pair<double, double> fidelity_deviations(const SparseOperator& H, const StateVector& right,
                                              const StateVector& left) {
  if (right.size() != H.dim() || left.size() != H.dim()) {
    throw InvalidArgument("vector length does not match operator dimension");
  }
  const SparseOperator::Matrix Hd = H.matrix().adjoint();
  return {relative_variance(H.matrix(), right), relative_variance(Hd, left)};
}

std::pair<StateVector, StateVector> biorthonormalize(const StateVector& left, const StateVector& right) {
  if (left.size() != right.size()) throw InvalidArgument("left and right vectors differ in length");
  const double nl = left.norm(), nr = right.norm();
  if (nl == 0.0 || nr == 0.0) throw InvalidArgument("cannot biorthonormalize a zero vector");
  const cplx overlap = left.dot(right);
  if (std::abs(overlap) / (nl * nr) <= 1e-12) {
    throw PairingFailure("left and right vectors are (nearly) orthogonal; |<L|R>|/(|L||R|) = " +
                         std::to_string(std::abs(overlap) / (nl * nr)));
  }
  StateVector r = right / nr;
  StateVector l = left * (nr / std::conj(overlap));
  return {std::move(l), std::move(r)};
}

SpectrumDecomposition dense_eig(const SparseOperator& H) {
  const Index n = H.dim();
  if (n > kDenseEigMaxDim) {
    throw InvalidArgument("dense_eig limited to dimension " + std::to_string(kDenseEigMaxDim) +
                          ", got " + std::to_string(n));
  }
  const Eigen::MatrixXcd dense = H.to_dense();
  Eigen::ComplexEigenSolver<Eigen::MatrixXcd> solver(dense, true);
  if (solver.info() != Eigen::Success) throw NumericalError("dense eigensolver failed");

  const Eigen::VectorXcd& vals = solver.eigenvalues();
  const Eigen::MatrixXcd& vecs = solver.eigenvectors();
  const Eigen::MatrixXcd inv = vecs.fullPivLu().inverse();

  const double scale = std::max(1.0, vals.cwiseAbs().maxCoeff());
  std::vector<Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Index{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](Index a, Index b) { return eigen_order(vals[a], vals[b], 1e-10 * scale); });

  SpectrumDecomposition out;
  out.values.resize(n);
  out.rights.resize(n, n);
  out.lefts.resize(n, n);
  for (Index k = 0; k < n; ++k) {
    const Index src = order[static_cast<std::size_t>(k)];
    const StateVector r = vecs.col(src);
    const StateVector l = inv.row(src).adjoint();
    const double pairing = std::abs(l.dot(r)) / (l.norm() * r.norm());
    if (!(pairing >= kPairingThreshold)) {
      throw PairingFailure("eigenvalue " + std::to_string(vals[src].real()) + "+" +
                           std::to_string(vals[src].imag()) +
                           "i has |<L|R>| below 1e-10; the matrix is (numerically) defective");
    }
    auto [lb, rb] = biorthonormalize(l, r);
    out.values[k] = vals[src];
    out.rights.col(k) = rb;
    out.lefts.col(k) = lb;
  }
  return out;
}

EigenPair smallest_real_eigpair(const SparseOperator& H, const KrylovOptions& opts) {
  if (opts.candidates < 4) throw InvalidArgument("at least 4 Ritz candidates are required");

  const RitzPairs rs = krylov_schur_largest_real(cplx{-1.0} * H, opts);
  // Ritz values come sorted by decreasing real part of -H; the first one has the
  // smallest real part of H, ties going to the smaller imaginary part of H.
  std::size_t pick = 0;
  const double tie = 1e-10 * std::max(1.0, rs.norm_estimate);
  for (std::size_t i = 1; i < rs.values.size(); ++i) {
    if (eigen_order(-rs.values[i], -rs.values[pick], tie)) pick = i;
  }
  const cplx E = -rs.values[pick];

  const RitzPairs ls = krylov_schur_largest_real(cplx{-1.0} * H.adjoint(), opts);
  std::size_t lpick = 0;
  for (std::size_t i = 1; i < ls.values.size(); ++i) {
    if (std::abs(-ls.values[i] - std::conj(E)) < std::abs(-ls.values[lpick] - std::conj(E))) lpick = i;
  }

  const StateVector& right = rs.vectors[pick];
  const StateVector& left = ls.vectors[lpick];
  const double pairing = std::abs(left.dot(right)) / (left.norm() * right.norm());
  if (!(pairing >= kPairingThreshold)) {
    throw PairingFailure("left/right ground-state vectors are nearly orthogonal (|<L|R>| = " +
                         std::to_string(pairing) + ")");
  }

  EigenPair gs;
  gs.value = E;
  std::tie(gs.left, gs.right) = biorthonormalize(left, right);
  std::tie(gs.d_right, gs.d_left) = fidelity_deviations(H, gs.right, gs.left);
  return gs;
}

}  // namespace nhkpm
