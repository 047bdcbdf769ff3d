#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "nhkpm/eigensolver.hpp"
#include "nhkpm/grid.hpp"
#include "nhkpm/kpm.hpp"

namespace nhkpm {

/// rho(E, l) on an energy axis for a set of sites; values[e * sites.size() + s].
struct ProjectedProfile {
  std::vector<double> E_axis;
  std::vector<int> sites;
  std::vector<double> values;

  double at(std::size_t e, std::size_t s) const { return values[e * sites.size() + s]; }
};

/// Number of sites of a spin-1/2 chain with the given Hilbert-space dimension.
int chain_length(Index dim);

/// S(omega, l) = f+(omega) + f-(omega) for each requested site, where
///   f+ = <GS_L| S_l^- delta^2(omega + E_GS - H) S_l^+ |GS_R>
///   f- = <GS_L| S_l^+ delta^2(omega + E_GS - H) S_l^- |GS_R>.
/// omega is measured from the ground-state energy; the plan's shift is replaced
/// by gs.value. All sites share one sweep over the grid.
std::vector<SpectralMap> site_correlators(const SparseOperator& H, const EigenPair& gs,
                                          const std::vector<int>& sites, const ComplexGrid& grid,
                                          const KpmPlan& plan, int threads = 1);

SpectralMap dynamical_spin_correlator(const SparseOperator& H, const EigenPair& gs, int site,
                                      const ComplexGrid& grid, const KpmPlan& plan, int threads = 1);

/// |sum_l S(omega, l)|; the modulus is taken after summation.
SpectralMap total_correlator(const std::vector<SpectralMap>& maps);

/// rho(E, l) = |integral S(E + iy, l) dy| by the trapezoid rule over each map's
/// imaginary axis, with linear interpolation along the real axis.
///
/// The imaginary axis must reach at least `im_extent + 3 sigma_delta` on both
/// sides, where im_extent is the largest |Im| of the excitation spectrum when
/// known (zero otherwise). Throws InvalidArgument when it does not.
ProjectedProfile projected_structure_factor(const std::vector<SpectralMap>& maps,
                                            const std::vector<int>& sites,
                                            const std::vector<double>& E_axis, double sigma_delta,
                                            std::optional<double> im_extent = std::nullopt);

enum class DosMode { exact_trace, stochastic };

struct DosOptions {
  DosMode mode = DosMode::exact_trace;
  int samples = 16;  // random-phase vectors in stochastic mode
  std::uint64_t seed = 7;
  int threads = 1;
};

struct DosResult {
  SpectralMap map;
  std::vector<double> std_error;  // per node; empty in exact mode
};

/// rho_tot(omega) = sum_j <e_j| delta^2(omega - H) |e_j>.
DosResult total_dos(const SparseOperator& H, const ComplexGrid& grid, const KpmPlan& plan,
                    const DosOptions& options = {});

/// Von Neumann entropy (base 2) of sites 1..cut.
double entanglement_entropy(const StateVector& state, int L, int cut);

/// Hermitian local structure factor rho(E, l) for energies E measured from the
/// ground state, via Chebyshev moments of (H0 - E_GS)/Delta with the plan's
/// kernel (degree 2N). Throws InvalidArgument if H0 is not Hermitian.
std::vector<double> hermitian_structure_factor(const SparseOperator& H0, const EigenPair& gs, int site,
                                               const std::vector<double>& E_grid, const KpmPlan& plan);

}  // namespace nhkpm
