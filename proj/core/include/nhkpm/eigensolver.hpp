#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "nhkpm/operators.hpp"

namespace nhkpm {

struct EigenPair {
  cplx value{0.0, 0.0};
  StateVector right;
  StateVector left;
  double d_right = 0.0;
  double d_left = 0.0;
};

/// Full eigensystem with <lefts.col(m)|rights.col(n)> = delta_mn and unit-norm rights.
struct SpectrumDecomposition {
  Eigen::VectorXcd values;
  Eigen::MatrixXcd rights;
  Eigen::MatrixXcd lefts;
};

struct KrylovOptions {
  int candidates = 4;     // Ritz values that must converge
  int subspace = 30;      // maximal Krylov basis size
  double tol = 1e-9;      // relative residual tolerance
  int max_restarts = 200;
  std::uint64_t seed = 20240917;
};

/// Converged Ritz pairs from a Krylov-Schur run, ordered by decreasing real part.
struct RitzPairs {
  std::vector<cplx> values;
  std::vector<StateVector> vectors;  // unit norm
  std::vector<double> residuals;     // ||A y - theta y||
  double norm_estimate = 0.0;        // ||Rayleigh quotient||_2
  int restarts = 0;
};

inline constexpr Index kDenseEigMaxDim = 4096;

/// Dense left/right eigensystem, sorted by real part and then imaginary part.
/// Throws PairingFailure if some eigenvalue has |<L|R>| / (|L||R|) < 1e-10.
SpectrumDecomposition dense_eig(const SparseOperator& H);

/// Restarted Krylov-Schur iteration for the eigenvalues of A with the largest
/// real parts. Throws NonConvergence when max_restarts is exhausted.
RitzPairs krylov_schur_largest_real(const SparseOperator& A, const KrylovOptions& opts);

/// Ground state in the non-Hermitian sense: the eigenvalue with the smallest real
/// part. The right vector comes from a solve on -H, the left from an independent
/// solve on -H^dagger; the pair is biorthonormalized and its fidelity deviations
/// are filled in.
EigenPair smallest_real_eigpair(const SparseOperator& H, const KrylovOptions& opts = {});

/// (d_R, d_L): relative variance of H on right and of H^dagger on left.
std::pair<double, double> fidelity_deviations(const SparseOperator& H, const StateVector& right,
                                              const StateVector& left);

/// Rescale so that |right| = 1 and <left|right> = 1. Returns (left, right).
std::pair<StateVector, StateVector> biorthonormalize(const StateVector& left, const StateVector& right);

}  // namespace nhkpm
