#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "nhkpm/nhkpm.hpp"
#include "oracle.hpp"

using namespace nhkpm;

namespace {

SparseOperator diag(std::initializer_list<cplx> d) {
  std::vector<SparseOperator::Triplet> t;
  Index i = 0;
  for (cplx v : d) t.emplace_back(i, i, v), ++i;
  return SparseOperator::from_triplets(static_cast<Index>(d.size()), t);
}

SpinChainParams chain(int L, double gamma, double hz) {
  SpinChainParams p;
  p.L = L;
  p.gamma = gamma;
  p.hz = hz;
  return p;
}

cplx min_real_eigenvalue(const Eigen::MatrixXcd& H) { return oracle::sorted_eigenvalues(H).front(); }

StateVector random_vector(Index n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> d;
  StateVector v(n);
  for (Index i = 0; i < n; ++i) v[i] = {d(rng), d(rng)};
  return v;
}

}  // namespace

TEST(DenseEig, Diagonal) {
  // Eigenvalues {1, 2i}; sorted by real part, 2i comes first.
  const auto d = dense_eig(diag({1.0, cplx{0, 2}}));
  EXPECT_EQ(d.values[0], cplx(0, 2));
  EXPECT_EQ(d.values[1], cplx(1.0));
  // Canonical vectors up to phase, with the biorthogonal normalization.
  EXPECT_NEAR(std::abs(d.rights(1, 0)), 1.0, 1e-15);
  EXPECT_NEAR(std::abs(d.rights(0, 1)), 1.0, 1e-15);
  EXPECT_NEAR(std::abs(d.rights(0, 0)) + std::abs(d.rights(1, 1)), 0.0, 1e-15);
  EXPECT_LT((d.lefts - d.rights).norm(), 1e-15);
  EXPECT_NEAR(std::abs(d.lefts.col(0).dot(d.rights.col(0)) - 1.0), 0.0, 1e-15);
}

TEST(DenseEig, HatanoNelsonTwoSites) {
  const auto d = dense_eig(build_hatano_nelson(2, 1.0, 0.4, Boundary::open));
  const double r = std::sqrt(0.84);
  EXPECT_NEAR(std::abs(d.values[0] - (-r)), 0.0, 1e-12);
  EXPECT_NEAR(std::abs(d.values[1] - r), 0.0, 1e-12);
  // Right vectors proportional to (+-sqrt(1.4), sqrt(0.6)).
  for (int k = 0; k < 2; ++k) {
    const double sign = k == 0 ? -1.0 : 1.0;
    Eigen::Vector2cd expected(sign * std::sqrt(1.4), std::sqrt(0.6));
    expected.normalize();
    EXPECT_NEAR(std::abs(expected.dot(d.rights.col(k))), 1.0, 1e-12);
  }
}

TEST(DenseEig, Reconstruction) {
  const auto H = build_spin_chain(chain(4, 0.0, 1.0));
  const auto d = dense_eig(H);
  const Eigen::MatrixXcd R = d.rights * d.values.asDiagonal() * d.lefts.adjoint();
  EXPECT_LT((R - H.to_dense()).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(DenseEig, SortedByRealThenImaginary) {
  const auto d = dense_eig(diag({cplx{2, 0}, cplx{1, 3}, cplx{1, -3}, cplx{0.5, 9}}));
  EXPECT_EQ(d.values[0], cplx(0.5, 9));
  EXPECT_EQ(d.values[1], cplx(1, -3));
  EXPECT_EQ(d.values[2], cplx(1, 3));
  EXPECT_EQ(d.values[3], cplx(2, 0));
}

TEST(DenseEig, DefectiveMatrixReported) {
  Eigen::MatrixXcd J(2, 2);
  J << 1, 1, 0, 1;
  EXPECT_THROW(dense_eig(SparseOperator::from_dense(J)), PairingFailure);
}

TEST(DenseEig, DimensionLimit) {
  EXPECT_THROW(dense_eig(SparseOperator::identity(kDenseEigMaxDim + 1)), InvalidArgument);
}

TEST(DenseEig, HatanoNelsonBiorthonormal) {
  const auto d = dense_eig(build_hatano_nelson(4, 1.0, 0.4, Boundary::open));
  const Eigen::MatrixXcd G = d.lefts.adjoint() * d.rights;
  EXPECT_LT((G - Eigen::MatrixXcd::Identity(4, 4)).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(Krylov, HermitianChainMatchesDense) {
  const auto H = build_spin_chain(chain(8, 0.0, 0.0));
  const auto gs = smallest_real_eigpair(H);
  const cplx ref = min_real_eigenvalue(H.to_dense());
  EXPECT_LT(std::abs(gs.value - ref), 1e-8);
  // Left and right agree up to a global phase.
  EXPECT_GT(std::abs(gs.left.normalized().dot(gs.right.normalized())), 1.0 - 1e-8);
}

TEST(Krylov, StaggeredFieldFidelity) {
  const auto H = build_spin_chain(chain(8, 0.0, 2.0));
  const auto gs = smallest_real_eigpair(H);
  EXPECT_LT(std::abs(gs.value - min_real_eigenvalue(H.to_dense())), 1e-8);
  EXPECT_LT(gs.d_right, 1e-3);
  EXPECT_LT(gs.d_left, 1e-3);
  EXPECT_NEAR(std::abs(gs.left.dot(gs.right) - 1.0), 0.0, 1e-12);
  EXPECT_NEAR(gs.right.norm(), 1.0, 1e-12);
}

TEST(Krylov, FieldOneFidelity) {
  const auto gs = smallest_real_eigpair(build_spin_chain(chain(8, 0.0, 1.0)));
  EXPECT_LT(gs.d_right, 1e-3);
  EXPECT_LT(gs.d_left, 1e-3);
}

TEST(Krylov, SmallestRealPartIgnoresImaginary) {
  const auto gs = smallest_real_eigpair(diag({3.0, cplx{1, 5}, 2.0}));
  EXPECT_LT(std::abs(gs.value - cplx(1, 5)), 1e-12);
}

TEST(Krylov, DegenerateRealPartPrefersSmallerImaginary) {
  const auto gs = smallest_real_eigpair(diag({cplx{1, 2}, 4.0, cplx{1, -2}, 3.0, 5.0}));
  EXPECT_LT(std::abs(gs.value - cplx(1, -2)), 1e-12);
}

TEST(Krylov, RequiresFourCandidates) {
  KrylovOptions o;
  o.candidates = 3;
  EXPECT_THROW(smallest_real_eigpair(diag({1.0, 2.0, 3.0, 4.0, 5.0}), o), InvalidArgument);
}

TEST(Krylov, NonConvergenceReportsBestResidual) {
  KrylovOptions o;
  o.max_restarts = 0;
  o.subspace = 6;
  o.tol = 1e-15;
  try {
    smallest_real_eigpair(build_spin_chain(chain(8, 0.0, 2.0)), o);
    FAIL() << "expected NonConvergence";
  } catch (const NonConvergence& e) {
    EXPECT_GT(e.best_residual(), 0.0);
    EXPECT_EQ(e.restarts(), 0);
  }
}

TEST(Krylov, OracleAgreementAcrossModels) {
  std::vector<SparseOperator> models{
      build_spin_chain(chain(6, 0.1, 2.0)),
      build_spin_chain([] { auto p = chain(6, 0.3, 1.0); p.bc = Boundary::periodic; return p; }()),
      build_fermion_chain(chain(6, 0.2, 1.5)),
      build_hatano_nelson(64, 1.0, 0.4, Boundary::periodic),
      build_spin_chain(chain(8, 0.1, 2.0)),
  };
  for (std::size_t m = 0; m < models.size(); ++m) {
    const auto& H = models[m];
    KrylovOptions o;
    const auto gs = smallest_real_eigpair(H, o);
    EXPECT_LT(std::abs(gs.value - min_real_eigenvalue(H.to_dense())), 1e-8) << "model " << m;
    // Residual contract with ||H|| estimated by the largest singular value.
    Eigen::JacobiSVD<Eigen::MatrixXcd> svd(H.to_dense());
    const double normH = svd.singularValues()[0];
    const StateVector r = gs.right.normalized(), l = gs.left.normalized();
    EXPECT_LE((H.apply(r) - gs.value * r).norm(), o.tol * normH * 1.0001) << "model " << m;
    EXPECT_LE((H.adjoint().apply(l) - std::conj(gs.value) * l).norm(), o.tol * normH * 1.0001) << "model " << m;
  }
}

TEST(Krylov, Deterministic) {
  const auto H = build_spin_chain(chain(6, 0.1, 2.0));
  const auto a = smallest_real_eigpair(H);
  const auto b = smallest_real_eigpair(H);
  EXPECT_EQ(a.value, b.value);
  EXPECT_EQ((a.right - b.right).norm(), 0.0);
}

TEST(Fidelity, ExactEigenvector) {
  const auto H = diag({1.0, 2.0});
  const StateVector e = StateVector::Unit(2, 1);
  const auto [dr, dl] = fidelity_deviations(H, e, e);
  EXPECT_EQ(dr, 0.0);
  EXPECT_EQ(dl, 0.0);
}

TEST(Fidelity, EqualSuperposition) {
  const auto H = diag({0.0, 1.0});
  StateVector v(2);
  v << 1.0, 1.0;
  v /= std::sqrt(2.0);
  const auto [dr, dl] = fidelity_deviations(H, v, v);
  EXPECT_NEAR(dr, 0.5, 1e-15);
  EXPECT_NEAR(dl, 0.5, 1e-15);
}

TEST(Fidelity, PhaseAndScaleInvariant) {
  SpinChainParams p = chain(4, 0.2, 1.0);
  const auto H = build_spin_chain(p);
  const StateVector r = random_vector(16, 5), l = random_vector(16, 6);
  const auto [dr, dl] = fidelity_deviations(H, r, l);
  const auto [dr2, dl2] = fidelity_deviations(H, cplx{0, -3.5} * r, std::polar(0.01, 1.1) * l);
  EXPECT_NEAR(dr, dr2, 1e-12);
  EXPECT_NEAR(dl, dl2, 1e-12);
  EXPECT_GE(dr, 0.0);
  EXPECT_LE(dr, 1.0);
}

TEST(Fidelity, ZeroVectorRejected) {
  const auto H = diag({0.0, 1.0});
  EXPECT_THROW(fidelity_deviations(H, StateVector::Zero(2), StateVector::Unit(2, 0)), InvalidArgument);
}

TEST(Biorthonormalize, UnitPairUnchanged) {
  const StateVector e = StateVector::Unit(3, 1);
  const auto [l, r] = biorthonormalize(e, e);
  EXPECT_EQ((l - e).norm(), 0.0);
  EXPECT_EQ((r - e).norm(), 0.0);
}

TEST(Biorthonormalize, LeftAbsorbsScale) {
  const StateVector e = StateVector::Unit(3, 0);
  const auto [l, r] = biorthonormalize(2.0 * e, e);
  EXPECT_LT((l - e).norm(), 1e-15);
  EXPECT_LT((r - e).norm(), 1e-15);
}

TEST(Biorthonormalize, GeneralPair) {
  const StateVector l0 = random_vector(10, 1), r0 = random_vector(10, 2);
  const auto [l, r] = biorthonormalize(l0, r0);
  EXPECT_NEAR(std::abs(l.dot(r) - 1.0), 0.0, 1e-13);
  EXPECT_NEAR(r.norm(), 1.0, 1e-14);
}

TEST(Biorthonormalize, HatanoNelsonAllPairs) {
  const Eigen::MatrixXcd H = build_hatano_nelson(4, 1.0, 0.4, Boundary::open).to_dense();
  // Left and right eigenvectors from two independent dense solves.
  Eigen::ComplexEigenSolver<Eigen::MatrixXcd> er(H), el(H.adjoint());
  std::vector<StateVector> lefts, rights;
  for (Index n = 0; n < 4; ++n) {
    Index best = 0;
    for (Index m = 1; m < 4; ++m)
      if (std::abs(el.eigenvalues()[m] - std::conj(er.eigenvalues()[n])) <
          std::abs(el.eigenvalues()[best] - std::conj(er.eigenvalues()[n])))
        best = m;
    auto [l, r] = biorthonormalize(el.eigenvectors().col(best), er.eigenvectors().col(n));
    lefts.push_back(l);
    rights.push_back(r);
  }
  for (int m = 0; m < 4; ++m)
    for (int n = 0; n < 4; ++n) EXPECT_NEAR(std::abs(lefts[m].dot(rights[n]) - (m == n ? 1.0 : 0.0)), 0.0, 1e-10);
}

TEST(Biorthonormalize, OrthogonalPairRejected) {
  EXPECT_THROW(biorthonormalize(StateVector::Unit(2, 0), StateVector::Unit(2, 1)), PairingFailure);
}
