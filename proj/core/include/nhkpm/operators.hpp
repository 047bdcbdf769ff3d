#pragma once

// Sparse operators for the models handled by the library: the non-Hermitian
// XXZ spin chain with an imaginary staggered field, its Jordan-Wigner fermion
// form, the Hatano-Nelson chain, and the Hermitrized block operator used by the
// kernel polynomial engine.
//
// Basis conventions (fixed, golden files depend on them):
//   * sites are numbered 1..L;
//   * the spin basis index is a bit string with site 1 in the least significant
//     bit, and bit value 1 means spin up (S^z = +1/2);
//   * the Jordan-Wigner string is c_l = prod_{j<l} (-2 S^z_j) S^-_l, so an
//     occupied fermion mode corresponds to an up spin.

#include <utility>
#include <vector>

#include <Eigen/SparseCore>

#include "nhkpm/types.hpp"

namespace nhkpm {

/// Entries with modulus at or below this value are removed after assembly.
inline constexpr double kDropTolerance = 1e-14;

/// Largest spin chain the many-body builders accept (dimension 2^24).
inline constexpr int kMaxSites = 24;

enum class Boundary { open, periodic };

enum class SpinKind { x, y, z, plus, minus };

struct SpinChainParams {
  int L = 8;
  double J = 1.0;
  double gamma = 0.0;
  double Jz = 0.5;
  double hz = 0.0;
  Boundary bc = Boundary::open;

  /// Throws InvalidArgument unless L >= 1 and every coupling is finite.
  void validate() const;
};

/// Immutable square complex sparse matrix in compressed row storage.
///
/// Construction sums duplicate entries and drops anything at or below
/// kDropTolerance, so the stored pattern never contains explicit zeros.
class SparseOperator {
 public:
  using Matrix = Eigen::SparseMatrix<cplx, Eigen::RowMajor>;
  using Triplet = Eigen::Triplet<cplx>;

  SparseOperator() = default;
  explicit SparseOperator(Matrix m);

  static SparseOperator from_triplets(Index dim, const std::vector<Triplet>& entries);
  static SparseOperator from_dense(const Eigen::MatrixXcd& dense);
  static SparseOperator identity(Index dim);

  Index dim() const noexcept { return matrix_.rows(); }
  Index nonzeros() const noexcept { return matrix_.nonZeros(); }
  const Matrix& matrix() const noexcept { return matrix_; }

  cplx coeff(Index row, Index col) const { return matrix_.coeff(row, col); }
  SparseOperator adjoint() const;
  Eigen::MatrixXcd to_dense() const { return Eigen::MatrixXcd(matrix_); }

  StateVector apply(const StateVector& v) const { return matrix_ * v; }

  /// Largest absolute row sum (the induced infinity norm).
  double max_row_sum() const;
  /// Largest absolute column sum (the induced 1-norm).
  double max_col_sum() const;
  /// Largest |A_ij - conj(A_ji)| over all entries.
  double hermiticity_defect() const;

  friend SparseOperator operator+(const SparseOperator& a, const SparseOperator& b);
  friend SparseOperator operator-(const SparseOperator& a, const SparseOperator& b);
  friend SparseOperator operator*(const SparseOperator& a, const SparseOperator& b);
  friend SparseOperator operator*(cplx s, const SparseOperator& a);

 private:
  Matrix matrix_;
};

/// Maps energies between physical units and the scaled Chebyshev window.
struct ScalingRecord {
  double delta = 1.0;
  cplx shift{0.0, 0.0};

  cplx to_scaled(cplx energy) const { return (energy - shift) / delta; }
  cplx to_physical(cplx scaled) const { return scaled * delta + shift; }
};

/// h_l^z of the staggered imaginary field: -hz when l mod 4 is 2 or 3, else 0.
double staggered_field(int site, double hz);

/// Spin-1/2 operator on one site of an L-site chain (identity elsewhere).
SparseOperator spin_operator(int site, SpinKind kind, int L);

SparseOperator build_spin_chain(const SpinChainParams& p);

/// Same Hamiltonian assembled from Jordan-Wigner fermion operators. Open chains only.
SparseOperator build_fermion_chain(const SpinChainParams& p);

/// Single-particle Hatano-Nelson chain: t+gamma above the diagonal, t-gamma below.
SparseOperator build_hatano_nelson(int L, double t, double gamma, Boundary bc);

/// Block operator [[0, omega - H], [conj(omega) - H^dagger, 0]]; Hermitian by construction.
SparseOperator hermitrize(const SparseOperator& H, cplx omega);

/// Parameters of the gamma = 0 chain related to p by the imaginary gauge
/// transformation exp(alpha sum_l l S^z_l); J' = sqrt((J+gamma)(J-gamma)).
SpinChainParams similarity_transform_params(const SpinChainParams& p);

/// (H - shift) / delta together with the record that undoes it.
std::pair<SparseOperator, ScalingRecord> rescale(const SparseOperator& H, double delta, cplx shift);
SparseOperator unscale(const SparseOperator& H_scaled, const ScalingRecord& record);

/// Upper bound on every singular value of (omega - H) for |omega| <= omega_max,
/// widened by 10%. Uses max(row sum, column sum), which is the infinity norm of
/// the Hermitrized operator.
double estimate_scale_factor(const SparseOperator& H, double omega_max);

}  // namespace nhkpm
