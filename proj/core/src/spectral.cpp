#include "nhkpm/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <random>
#include <string>

#include <Eigen/Dense>

namespace nhkpm {

namespace {

// Evaluates f for columns (node k, vector pair c) over all grid nodes and vector
// pairs, batching NhkpmEngine::kBlock columns per sparse sweep.
std::vector<cplx> sweep(const NhkpmEngine& engine, const Eigen::MatrixXcd& lefts, const Eigen::MatrixXcd& rights,
                        const std::vector<cplx>& omegas, int threads) {
  const std::size_t pairs = static_cast<std::size_t>(rights.cols());
  const std::size_t total = omegas.size() * pairs;
  const std::size_t B = static_cast<std::size_t>(NhkpmEngine::kBlock);
  const std::size_t chunks = (total + B - 1) / B;
  std::vector<cplx> out(total);
  parallel_for(chunks, threads, [&](std::size_t chunk) {
    const std::size_t c0 = chunk * B;
    const std::size_t nb = std::min(B, total - c0);
    Eigen::MatrixXcd L(lefts.rows(), static_cast<Index>(nb));
    Eigen::MatrixXcd R(rights.rows(), static_cast<Index>(nb));
    std::vector<cplx> w(nb);
    for (std::size_t c = 0; c < nb; ++c) {
      const std::size_t flat = c0 + c;
      const Index p = static_cast<Index>(flat % pairs);
      L.col(static_cast<Index>(c)) = lefts.col(p);
      R.col(static_cast<Index>(c)) = rights.col(p);
      w[c] = omegas[flat / pairs];
    }
    std::vector<cplx> f;
    try {
      f = engine.evaluate_columns(L, R, w);
    } catch (const ScalingViolation& e) {
      throw ScalingViolation("grid nodes " + std::to_string(c0 / pairs) + ".." +
                                 std::to_string((c0 + nb - 1) / pairs) + ": " + e.what(),
                             e.step(), e.growth());
    }
    std::copy(f.begin(), f.end(), out.begin() + static_cast<std::ptrdiff_t>(c0));
  });
  return out;
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

int chain_length(Index dim) {
  int L = 0;
  while ((Index{1} << L) < dim) ++L;
  if ((Index{1} << L) != dim || L < 1) {
    throw InvalidArgument("dimension " + std::to_string(dim) + " is not that of a spin-1/2 chain");
  }
  return L;
}

std::vector<SpectralMap> site_correlators(const SparseOperator& H, const EigenPair& gs,
                                          const std::vector<int>& sites, const ComplexGrid& grid,
                                          const KpmPlan& plan, int threads) {
  grid.validate();
  const int L = chain_length(H.dim());
  if (gs.right.size() != H.dim() || gs.left.size() != H.dim()) {
    throw InvalidArgument("ground state does not match the operator dimension");
  }
  if (sites.empty()) throw InvalidArgument("no sites requested");
  const Index S = static_cast<Index>(sites.size());
  Eigen::MatrixXcd lefts(H.dim(), 2 * S), rights(H.dim(), 2 * S);
  for (Index s = 0; s < S; ++s) {
    const int l = sites[static_cast<std::size_t>(s)];
    const SparseOperator up = spin_operator(l, SpinKind::plus, L);
    const SparseOperator down = spin_operator(l, SpinKind::minus, L);
    // <GS_L| S^- ... S^+ |GS_R>: the bra S^+|GS_L> pairs with the ket S^+|GS_R>.
    lefts.col(2 * s) = up.apply(gs.left);
    rights.col(2 * s) = up.apply(gs.right);
    lefts.col(2 * s + 1) = down.apply(gs.left);
    rights.col(2 * s + 1) = down.apply(gs.right);
  }

  KpmPlan shifted = plan;
  shifted.scaling.shift = gs.value;
  const NhkpmEngine engine(H, shifted);
  std::vector<cplx> omegas = grid.nodes();
  for (auto& w : omegas) w += gs.value;
  const std::vector<cplx> f = sweep(engine, lefts, rights, omegas, threads);

  std::vector<SpectralMap> maps(sites.size());
  const std::size_t pairs = static_cast<std::size_t>(2 * S);
  for (std::size_t s = 0; s < sites.size(); ++s) {
    SpectralMap& m = maps[s];
    m.grid = grid;
    m.values.resize(grid.size());
    for (std::size_t k = 0; k < grid.size(); ++k) {
      m.values[k] = f[k * pairs + 2 * s] + f[k * pairs + 2 * s + 1];
    }
    m.metadata["quantity"] = "local_dynamical_spin_correlator";
    m.metadata["site"] = std::to_string(sites[s]);
    m.metadata["N"] = std::to_string(plan.order);
    m.metadata["delta"] = fmt(plan.scaling.delta);
    m.metadata["E_GS"] = fmt(gs.value.real()) + "," + fmt(gs.value.imag());
  }
  return maps;
}

SpectralMap dynamical_spin_correlator(const SparseOperator& H, const EigenPair& gs, int site,
                                      const ComplexGrid& grid, const KpmPlan& plan, int threads) {
  return site_correlators(H, gs, {site}, grid, plan, threads).front();
}

SpectralMap total_correlator(const std::vector<SpectralMap>& maps) {
  if (maps.empty()) throw InvalidArgument("no maps to sum");
  SpectralMap out;
  out.grid = maps.front().grid;
  out.values.assign(out.grid.size(), cplx{0.0, 0.0});
  for (const auto& m : maps) {
    if (!same_axes(m.grid, out.grid) || m.values.size() != out.values.size()) {
      throw InvalidArgument("maps are defined on different grids");
    }
    for (std::size_t k = 0; k < m.values.size(); ++k) out.values[k] += m.values[k];
  }
  for (auto& v : out.values) v = std::abs(v);
  out.metadata = maps.front().metadata;
  out.metadata.erase("site");
  out.metadata["quantity"] = "total_dynamical_spin_correlator";
  return out;
}

ProjectedProfile projected_structure_factor(const std::vector<SpectralMap>& maps,
                                            const std::vector<int>& sites,
                                            const std::vector<double>& E_axis, double sigma_delta,
                                            std::optional<double> im_extent) {
  if (maps.empty() || maps.size() != sites.size()) {
    throw InvalidArgument("need one map per site");
  }
  const ComplexGrid& grid = maps.front().grid;
  for (const auto& m : maps) {
    if (!same_axes(m.grid, grid)) throw InvalidArgument("maps are defined on different grids");
  }
  const double need = im_extent.value_or(0.0) + 3.0 * sigma_delta;
  if (grid.im.front() > -need || grid.im.back() < need) {
    throw InvalidArgument("imaginary axis [" + std::to_string(grid.im.front()) + ", " +
                          std::to_string(grid.im.back()) + "] does not cover +-" + std::to_string(need) +
                          " (spectral extent plus 3 sigma Delta)");
  }
  const auto& re = grid.re;
  const auto& im = grid.im;
  for (double E : E_axis) {
    if (E < re.front() || E > re.back()) {
      throw InvalidArgument("energy " + std::to_string(E) + " outside the map's real axis");
    }
  }

  ProjectedProfile out;
  out.E_axis = E_axis;
  out.sites = sites;
  out.values.resize(E_axis.size() * sites.size());
  for (std::size_t e = 0; e < E_axis.size(); ++e) {
    // Locate the bracketing real-axis nodes.
    const double E = E_axis[e];
    std::size_t i1 = static_cast<std::size_t>(std::upper_bound(re.begin(), re.end(), E) - re.begin());
    i1 = std::clamp<std::size_t>(i1, 1, std::max<std::size_t>(re.size() - 1, 1));
    const std::size_t i0 = re.size() > 1 ? i1 - 1 : 0;
    const double t = re.size() > 1 ? (E - re[i0]) / (re[i1] - re[i0]) : 0.0;
    for (std::size_t s = 0; s < sites.size(); ++s) {
      const SpectralMap& m = maps[s];
      cplx integral = 0.0;
      for (std::size_t j = 0; j + 1 < im.size(); ++j) {
        auto value = [&](std::size_t jj) {
          return re.size() > 1 ? (1.0 - t) * m.at(i0, jj) + t * m.at(i1, jj) : m.at(0, jj);
        };
        integral += 0.5 * (im[j + 1] - im[j]) * (value(j) + value(j + 1));
      }
      out.values[e * sites.size() + s] = std::abs(integral);
    }
  }
  return out;
}

DosResult total_dos(const SparseOperator& H, const ComplexGrid& grid, const KpmPlan& plan,
                    const DosOptions& options) {
  grid.validate();
  const NhkpmEngine engine(H, plan);
  const std::vector<cplx> omegas = grid.nodes();
  DosResult res;
  res.map.grid = grid;
  res.map.metadata["quantity"] = "total_density_of_states";
  res.map.metadata["N"] = std::to_string(plan.order);
  res.map.metadata["delta"] = fmt(plan.scaling.delta);

  if (options.mode == DosMode::exact_trace) {
    if (H.dim() > kDenseEigMaxDim) {
      throw InvalidArgument("exact trace limited to dimension " + std::to_string(kDenseEigMaxDim));
    }
    res.map.values = engine.trace(omegas, options.threads);
    res.map.metadata["mode"] = "exact_trace";
    return res;
  }

  if (options.samples < 1) throw InvalidArgument("stochastic trace needs at least one sample");
  const Index n = H.dim();
  const Index R = options.samples;
  Eigen::MatrixXcd phases(n, R);
  std::mt19937_64 rng(options.seed);
  std::uniform_real_distribution<double> angle(0.0, 2.0 * std::numbers::pi);
  for (Index c = 0; c < R; ++c)
    for (Index i = 0; i < n; ++i) phases(i, c) = std::polar(1.0, angle(rng));

  const std::vector<cplx> f = sweep(engine, phases, phases, omegas, options.threads);
  res.map.values.resize(omegas.size());
  res.std_error.resize(omegas.size());
  for (std::size_t k = 0; k < omegas.size(); ++k) {
    cplx mean = 0.0;
    for (Index c = 0; c < R; ++c) mean += f[k * static_cast<std::size_t>(R) + static_cast<std::size_t>(c)];
    mean /= static_cast<double>(R);
    double var = 0.0;
    for (Index c = 0; c < R; ++c) {
      var += std::norm(f[k * static_cast<std::size_t>(R) + static_cast<std::size_t>(c)] - mean);
    }
    res.map.values[k] = mean;
    res.std_error[k] = R > 1 ? std::sqrt(var / static_cast<double>(R - 1) / static_cast<double>(R)) : 0.0;
  }
  res.map.metadata["mode"] = "stochastic";
  res.map.metadata["samples"] = std::to_string(R);
  return res;
}

double entanglement_entropy(const StateVector& state, int L, int cut) {
  if (L < 2 || L > 30) throw InvalidArgument("entanglement entropy needs 2 <= L <= 30");
  if (cut < 1 || cut >= L) throw InvalidArgument("cut must satisfy 1 <= cut < L");
  const Index rows = Index{1} << cut;
  const Index cols = Index{1} << (L - cut);
  if (state.size() != rows * cols) throw InvalidArgument("state length is not 2^L");
  if (std::abs(state.norm() - 1.0) > 1e-8) throw InvalidArgument("state must be normalized");
  // Sites 1..cut occupy the low bits, so the column-major reshape has them as the row index.
  const Eigen::Map<const Eigen::MatrixXcd> psi(state.data(), rows, cols);
  const Eigen::VectorXd s = Eigen::BDCSVD<Eigen::MatrixXcd>(psi).singularValues();
  double S = 0.0;
  for (Index i = 0; i < s.size(); ++i) {
    const double lam = s[i] * s[i];
    if (lam > 1e-300) S -= lam * std::log2(lam);
  }
  return std::max(S, 0.0);
}

std::vector<double> hermitian_structure_factor(const SparseOperator& H0, const EigenPair& gs, int site,
                                               const std::vector<double>& E_grid, const KpmPlan& plan) {
  plan.validate();
  const double scale = std::max(1.0, H0.max_row_sum());
  if (H0.hermiticity_defect() > 1e-12 * scale) {
    throw InvalidArgument("hermitian_structure_factor requires a Hermitian operator");
  }
  const int L = chain_length(H0.dim());
  const double delta = plan.scaling.delta;
  const SparseOperator Hs = rescale(H0, delta, cplx{gs.value.real(), 0.0}).first;
  std::vector<double> x;
  x.reserve(E_grid.size());
  for (double E : E_grid) x.push_back(E / delta);

  const std::vector<double> kernel = plan.kernel.empty() ? jackson_kernel(2 * plan.order) : plan.kernel;
  const int n_max = static_cast<int>(kernel.size()) - 1;
  std::vector<double> out(E_grid.size(), 0.0);
  for (SpinKind kind : {SpinKind::plus, SpinKind::minus}) {
    const SparseOperator op = spin_operator(site, kind, L);
    const MomentSequence mu = chebyshev_moments(Hs, op.apply(gs.left), op.apply(gs.right), n_max);
    const std::vector<cplx> rho = hermitian_kpm_density(mu, kernel, x);
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += rho[i].real() / delta;
  }
  return out;
}

}  // namespace nhkpm
