#pragma once

// Chebyshev/kernel-polynomial machinery.
//
// Hermitian path: moments mu_n = <L|T_n(H)|R> and the Jackson-damped density.
// Non-Hermitian path: for omega in the complex plane, the Hermitrized block
// operator of (omega - H) is expanded in odd Chebyshev polynomials; a four-vector
// recursion carries both the expansion vectors alpha_n and their derivatives
// psi_n = d alpha_n / d omega*, which yields
//
//   f(omega) = <L| delta^2(omega - H) |R>
//           ~= 2/pi sum_{n=1..N} (-1)^{n+1} g_{2n-1} <L|psi_{2n-1}> / Delta^2.
//
// A single pole at E turns into a peak of radial FWHM ~ pi Delta / N with unit
// integral over the complex plane.

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "nhkpm/grid.hpp"
#include "nhkpm/operators.hpp"

namespace nhkpm {

/// Jackson damping factors g_0..g_M for a degree-M expansion.
std::vector<double> jackson_kernel(int M);

struct KpmPlan {
  int order = 0;  // N: retained odd terms, polynomial degree 2N-1
  ScalingRecord scaling;
  std::vector<double> kernel;  // g_0..g_{2N}

  static KpmPlan make(int order, double delta, cplx shift = {0.0, 0.0});

  /// Resolution pi/N in scaled units.
  double sigma() const;
  /// Resolution pi Delta / N in energy units.
  double physical_sigma() const { return sigma() * scaling.delta; }
  void validate() const;
};

struct MomentSequence {
  std::vector<cplx> mu;
};

/// mu_n = <left|T_n(H_scaled)|right> for n = 0..n_max. Throws ScalingViolation if
/// the recursion vector grows beyond 10x its initial norm.
MomentSequence chebyshev_moments(const SparseOperator& H_scaled, const StateVector& left,
                                 const StateVector& right, int n_max);

/// Jackson-damped density on scaled energies |E| < 1.
std::vector<cplx> hermitian_kpm_density(const MomentSequence& moments, const std::vector<double>& kernel,
                                        const std::vector<double>& E_grid);

/// 2/pi sum_{n=1..N} (-1)^{n+1} g_{2n-1} mu_{2n-1}, N = floor(#moments / 2).
cplx green_function_at_zero(const MomentSequence& moments, const std::vector<double>& kernel);

namespace detail {
/// Compressed rows with split real/imaginary values, the layout used by the
/// recursion kernel.
struct SplitCsr {
  Index rows = 0;
  std::vector<int> ptr;
  std::vector<int> col;
  std::vector<double> re;
  std::vector<double> im;
};
}  // namespace detail

/// Evaluates f(omega) for many (omega, left, right) triples against one
/// operator. The scaled operator and its adjoint are prepared once; columns are
/// processed in blocks so the sparse products run on several vectors at a time.
class NhkpmEngine {
 public:
  NhkpmEngine(const SparseOperator& H, const KpmPlan& plan);

  const KpmPlan& plan() const noexcept { return plan_; }
  Index dim() const noexcept { return H_.rows; }

  /// f(omega_c) for each column c of (lefts, rights). All three must have the
  /// same column count. Physical-energy omegas.
  std::vector<cplx> evaluate_columns(const Eigen::MatrixXcd& lefts, const Eigen::MatrixXcd& rights,
                                     const std::vector<cplx>& omegas) const;

  /// f(omega) at many omegas for one (left, right) pair. Results go to fixed
  /// slots; `threads` workers share the work.
  std::vector<cplx> evaluate(const StateVector& left, const StateVector& right,
                             const std::vector<cplx>& omegas, int threads = 1) const;

  /// sum_j f_j(omega) with left = right = e_j over the whole basis.
  std::vector<cplx> trace(const std::vector<cplx>& omegas, int threads = 1) const;

  static constexpr Index kBlock = 16;

 private:
  detail::SplitCsr H_;   // (H - shift) / Delta
  detail::SplitCsr Hd_;  // its adjoint
  KpmPlan plan_;
};

cplx nhkpm_point(const SparseOperator& H, const StateVector& left, const StateVector& right, cplx omega,
                 const KpmPlan& plan);

SpectralMap nhkpm_grid(const SparseOperator& H, const StateVector& left, const StateVector& right,
                       const ComplexGrid& grid, const KpmPlan& plan, int threads = 1);

/// Pseudospectrum diagnostic. At probe points farther than 3 sigma Delta from
/// every eigenvalue, a smallest singular value of (omega - H) below 2 sigma Delta
/// means the expansion cannot tell the point from the spectrum.
struct ResolutionReport {
  double min_singular_value = 0.0;   // over flagged probes, or over all if none flagged
  std::optional<cplx> worst_probe;   // first probe that triggered the warning
  bool warning = false;
  std::string message;
};

ResolutionReport resolution_check(const SparseOperator& H, const std::vector<cplx>& probes,
                                  const KpmPlan& plan);

/// Runs fn(i) for i in [0, count) on `threads` workers; rethrows the first error
/// by index order after all workers stop.
void parallel_for(std::size_t count, int threads, const std::function<void(std::size_t)>& fn);

}  // namespace nhkpm
