#include "nhkpm/kpm.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <limits>
#include <numbers>
#include <optional>
#include <thread>

#include <Eigen/Dense>

namespace nhkpm {

namespace {

constexpr double kGrowthLimit = 10.0;
constexpr int kGuardStride = 8;

struct BlockFailure {
  Index column = -1;
  int step = 0;
  double growth = 0.0;
};

std::string format_growth(int step, double growth) {
  return "Chebyshev recursion vector grew by " + std::to_string(growth) + "x at step " +
         std::to_string(step) + "; the scale factor does not bound the spectrum";
}

}  // namespace

std::vector<double> jackson_kernel(int M) {
  if (M < 0) throw InvalidArgument("kernel degree must be non-negative");
  std::vector<double> g(static_cast<std::size_t>(M) + 1, 1.0);
  if (M == 0) return g;
  const double a = std::numbers::pi / (M + 1);
  const double cot = std::cos(a) / std::sin(a);
  for (int n = 1; n <= M; ++n) {
    const double v = ((M - n + 1) * std::cos(n * a) + std::sin(n * a) * cot) / (M + 1);
    // g_M vanishes analytically; rounding can leave it slightly negative.
    g[static_cast<std::size_t>(n)] = std::max(v, 0.0);
  }
  return g;
}

KpmPlan KpmPlan::make(int order, double delta, cplx shift) {
  KpmPlan p;
  p.order = order;
  p.scaling = ScalingRecord{delta, shift};
  p.validate();
  p.kernel = jackson_kernel(2 * order);
  return p;
}

double KpmPlan::sigma() const { return std::numbers::pi / order; }

void KpmPlan::validate() const {
  if (order < 1) throw InvalidArgument("expansion order N must be >= 1, got " + std::to_string(order));
  if (!(scaling.delta > 0.0) || !std::isfinite(scaling.delta)) {
    throw InvalidArgument("scale factor must be positive and finite");
  }
  if (!kernel.empty() && kernel.size() < static_cast<std::size_t>(2 * order)) {
    throw InvalidArgument("kernel shorter than the expansion order");
  }
}

MomentSequence chebyshev_moments(const SparseOperator& H_scaled, const StateVector& left,
                                 const StateVector& right, int n_max) {
  if (n_max < 0) throw InvalidArgument("n_max must be non-negative");
  if (left.size() != H_scaled.dim() || right.size() != H_scaled.dim()) {
    throw InvalidArgument("vector length does not match operator dimension");
  }
  const auto& H = H_scaled.matrix();
  MomentSequence m;
  m.mu.reserve(static_cast<std::size_t>(n_max) + 1);
  const double r0 = right.norm();
  StateVector prev = right;
  m.mu.push_back(left.dot(prev));
  if (n_max == 0) return m;
  StateVector cur = H * right;
  m.mu.push_back(left.dot(cur));
  StateVector next(right.size());
  for (int n = 2; n <= n_max; ++n) {
    next.noalias() = 2.0 * (H * cur);
    next -= prev;
    std::swap(prev, cur);
    std::swap(cur, next);
    m.mu.push_back(left.dot(cur));
    const double growth = r0 > 0.0 ? cur.norm() / r0 : 0.0;
    if (growth > kGrowthLimit) throw ScalingViolation(format_growth(n, growth), n, growth);
  }
  return m;
}

std::vector<cplx> hermitian_kpm_density(const MomentSequence& moments, const std::vector<double>& kernel,
                                        const std::vector<double>& E_grid) {
  const std::size_t nm = moments.mu.size();
  if (nm == 0) throw InvalidArgument("no moments");
  if (kernel.size() < nm) throw InvalidArgument("kernel shorter than the moment sequence");
  std::vector<cplx> out;
  out.reserve(E_grid.size());
  for (double E : E_grid) {
    if (!(std::abs(E) < 1.0)) {
      throw InvalidArgument("density grid point " + std::to_string(E) + " outside (-1, 1)");
    }
    cplx s = kernel[0] * moments.mu[0];
    double t_prev = 1.0, t_cur = E;
    for (std::size_t n = 1; n < nm; ++n) {
      s += 2.0 * kernel[n] * moments.mu[n] * t_cur;
      const double t_next = 2.0 * E * t_cur - t_prev;
      t_prev = t_cur;
      t_cur = t_next;
    }
    out.push_back(s / (std::numbers::pi * std::sqrt(1.0 - E * E)));
  }
  return out;
}

cplx green_function_at_zero(const MomentSequence& moments, const std::vector<double>& kernel) {
  const std::size_t N = moments.mu.size() / 2;
  if (kernel.size() < 2 * N) throw InvalidArgument("kernel shorter than the moment sequence");
  cplx s = 0.0;
  for (std::size_t n = 1; n <= N; ++n) {
    const double sign = (n % 2 == 1) ? 1.0 : -1.0;
    s += sign * kernel[2 * n - 1] * moments.mu[2 * n - 1];
  }
  return (2.0 / std::numbers::pi) * s;
}

namespace {

detail::SplitCsr split(const SparseOperator& op) {
  const auto& m = op.matrix();
  detail::SplitCsr c;
  c.rows = m.rows();
  c.ptr.assign(m.outerIndexPtr(), m.outerIndexPtr() + m.outerSize() + 1);
  c.col.assign(m.innerIndexPtr(), m.innerIndexPtr() + m.nonZeros());
  c.re.reserve(static_cast<std::size_t>(m.nonZeros()));
  c.im.reserve(static_cast<std::size_t>(m.nonZeros()));
  for (Index k = 0; k < m.nonZeros(); ++k) {
    c.re.push_back(m.valuePtr()[k].real());
    c.im.push_back(m.valuePtr()[k].imag());
  }
  return c;
}

// Blocks of kW columns. Row i occupies 2*kW doubles: kW real parts, then kW
// imaginary parts, so the inner loops over columns vectorize. The width is a
// template parameter so that small blocks do not pay for idle lanes; every
// column sees the same arithmetic at any width.

// Y <- 2 (X diag(w) - M X + Z) - Y, with Z optional. This is one Chebyshev step of
// the shifted operator (w - M) fused with the source term of the psi recursion.
template <int kW>
void chebyshev_step(const detail::SplitCsr& M, const double* wr, const double* wi, const double* X,
                    const double* Z, double* Y) {
  constexpr int kRow = 2 * kW;
  const int n = static_cast<int>(M.rows);
  for (int i = 0; i < n; ++i) {
    double sr[kW] = {};
    double si[kW] = {};
    for (int k = M.ptr[static_cast<std::size_t>(i)]; k < M.ptr[static_cast<std::size_t>(i) + 1]; ++k) {
      const double vr = M.re[static_cast<std::size_t>(k)];
      const double vi = M.im[static_cast<std::size_t>(k)];
      const double* xr = X + static_cast<std::ptrdiff_t>(M.col[static_cast<std::size_t>(k)]) * kRow;
      const double* xi = xr + kW;
      for (int c = 0; c < kW; ++c) {
        sr[c] += vr * xr[c] - vi * xi[c];
        si[c] += vr * xi[c] + vi * xr[c];
      }
    }
    const double* xr = X + static_cast<std::ptrdiff_t>(i) * kRow;
    const double* xi = xr + kW;
    double* yr = Y + static_cast<std::ptrdiff_t>(i) * kRow;
    double* yi = yr + kW;
    if (Z) {
      const double* zr = Z + static_cast<std::ptrdiff_t>(i) * kRow;
      const double* zi = zr + kW;
      for (int c = 0; c < kW; ++c) {
        sr[c] -= zr[c];
        si[c] -= zi[c];
      }
    }
    for (int c = 0; c < kW; ++c) {
      const double tr = wr[c] * xr[c] - wi[c] * xi[c] - sr[c];
      const double ti = wr[c] * xi[c] + wi[c] * xr[c] - si[c];
      yr[c] = 2.0 * tr - yr[c];
      yi[c] = 2.0 * ti - yi[c];
    }
  }
}

template <int kW>
std::vector<double> pack(const Eigen::MatrixXcd& M) {
  constexpr int kRow = 2 * kW;
  std::vector<double> out(static_cast<std::size_t>(M.rows()) * kRow, 0.0);
  for (Index i = 0; i < M.rows(); ++i)
    for (Index c = 0; c < M.cols(); ++c) {
      out[static_cast<std::size_t>(i * kRow + c)] = M(i, c).real();
      out[static_cast<std::size_t>(i * kRow + kW + c)] = M(i, c).imag();
    }
  return out;
}

// Four-vector recursion on up to kW columns; column c uses scaled frequency w[c].
// Writes f into out[c]; returns the first column whose alpha vectors grew.
template <int kW>
std::optional<BlockFailure> run_block_w(const detail::SplitCsr& H, const detail::SplitCsr& Hd,
                                      const KpmPlan& plan, const Eigen::MatrixXcd& L,
                                      const Eigen::MatrixXcd& R, const Eigen::VectorXcd& w, cplx* out) {
  constexpr int kRow = 2 * kW;
  const Index n = R.rows();
  const Index B = R.cols();
  const int N = plan.order;
  const auto& g = plan.kernel;
  double wr[kW] = {}, wi[kW] = {}, wci[kW] = {};
  for (Index c = 0; c < B; ++c) {
    wr[c] = w[c].real();
    wi[c] = w[c].imag();
    wci[c] = -w[c].imag();
  }
  const Eigen::RowVectorXd r0 = R.colwise().norm();
  const std::vector<double> Lp = pack<kW>(L);
  const std::size_t len = static_cast<std::size_t>(n) * kRow;

  // After each sweep: a_prev = alpha_{2k}, a_cur = alpha_{2k+1}, likewise for psi.
  std::vector<double> a_prev = pack<kW>(R);
  std::vector<double> a_cur(len, 0.0);
  std::vector<double> p_prev(len, 0.0);
  std::vector<double> p_cur = a_prev;
  {
    // alpha_1 = A^dagger R: a step with "previous" zero, halved.
    chebyshev_step<kW>(Hd, wr, wci, a_prev.data(), nullptr, a_cur.data());
    for (double& v : a_cur) v *= 0.5;
  }

  double acc_r[kW] = {}, acc_i[kW] = {};
  auto accumulate = [&](double coef) {
    for (Index i = 0; i < n; ++i) {
      const double* lr = Lp.data() + i * kRow;
      const double* li = lr + kW;
      const double* pr = p_cur.data() + i * kRow;
      const double* pi = pr + kW;
      for (int c = 0; c < kW; ++c) {
        acc_r[c] += coef * (lr[c] * pr[c] + li[c] * pi[c]);
        acc_i[c] += coef * (lr[c] * pi[c] - li[c] * pr[c]);
      }
    }
  };
  accumulate(g[1]);

  for (int k = 1; k < N; ++k) {
    // alpha_{2k} = 2 A alpha_{2k-1} - alpha_{2k-2};  psi_{2k} likewise.
    chebyshev_step<kW>(H, wr, wi, a_cur.data(), nullptr, a_prev.data());
    chebyshev_step<kW>(H, wr, wi, p_cur.data(), nullptr, p_prev.data());
    // alpha_{2k+1} = 2 A^dagger alpha_{2k} - alpha_{2k-1}
    // psi_{2k+1}   = 2 alpha_{2k} + 2 A^dagger psi_{2k} - psi_{2k-1}
    chebyshev_step<kW>(Hd, wr, wci, a_prev.data(), nullptr, a_cur.data());
    chebyshev_step<kW>(Hd, wr, wci, p_prev.data(), a_prev.data(), p_cur.data());

    accumulate(((k % 2 == 0) ? 1.0 : -1.0) * g[static_cast<std::size_t>(2 * k + 1)]);

    if (k % kGuardStride == 0 || k == N - 1) {
      for (Index c = 0; c < B; ++c) {
        double s = 0.0;
        for (Index i = 0; i < n; ++i) {
          const double re = a_cur[static_cast<std::size_t>(i * kRow + c)];
          const double im = a_cur[static_cast<std::size_t>(i * kRow + kW + c)];
          s += re * re + im * im;
        }
        const double an = std::sqrt(s);
        if (r0[c] > 0.0 && !(an <= kGrowthLimit * r0[c])) return BlockFailure{c, 2 * k + 1, an / r0[c]};
      }
    }
  }
  const double norm = 2.0 / (std::numbers::pi * plan.scaling.delta * plan.scaling.delta);
  for (Index c = 0; c < B; ++c) out[c] = norm * cplx{acc_r[c], acc_i[c]};
  return std::nullopt;
}

std::optional<BlockFailure> run_block(const detail::SplitCsr& H, const detail::SplitCsr& Hd,
                                      const KpmPlan& plan, const Eigen::MatrixXcd& L,
                                      const Eigen::MatrixXcd& R, const Eigen::VectorXcd& w, cplx* out) {
  static_assert(NhkpmEngine::kBlock == 16);
  switch (R.cols()) {
    case 1: return run_block_w<1>(H, Hd, plan, L, R, w, out);
    case 2: return run_block_w<2>(H, Hd, plan, L, R, w, out);
    case 3:
    case 4: return run_block_w<4>(H, Hd, plan, L, R, w, out);
    case 5:
    case 6:
    case 7:
    case 8: return run_block_w<8>(H, Hd, plan, L, R, w, out);
    default: return run_block_w<16>(H, Hd, plan, L, R, w, out);
  }
}

Eigen::VectorXcd scaled_omegas(const KpmPlan& plan, const cplx* omegas, Index count) {
  Eigen::VectorXcd w(count);
  for (Index c = 0; c < count; ++c) w[c] = plan.scaling.to_scaled(omegas[c]);
  return w;
}

}  // namespace

NhkpmEngine::NhkpmEngine(const SparseOperator& H, const KpmPlan& plan) : plan_(plan) {
  plan_.validate();
  if (plan_.kernel.empty()) plan_.kernel = jackson_kernel(2 * plan_.order);
  auto scaled = rescale(H, plan_.scaling.delta, plan_.scaling.shift).first;
  H_ = split(scaled);
  Hd_ = split(scaled.adjoint());
}

std::vector<cplx> NhkpmEngine::evaluate_columns(const Eigen::MatrixXcd& lefts, const Eigen::MatrixXcd& rights,
                                                const std::vector<cplx>& omegas) const {
  const Index B = rights.cols();
  if (lefts.cols() != B || static_cast<Index>(omegas.size()) != B) {
    throw InvalidArgument("left/right/omega column counts differ");
  }
  if (lefts.rows() != dim() || rights.rows() != dim()) {
    throw InvalidArgument("vector length does not match operator dimension");
  }
  std::vector<cplx> out(static_cast<std::size_t>(B));
  for (Index c0 = 0; c0 < B; c0 += kBlock) {
    const Index nb = std::min(kBlock, B - c0);
    auto fail = run_block(H_, Hd_, plan_, lefts.middleCols(c0, nb), rights.middleCols(c0, nb),
                          scaled_omegas(plan_, omegas.data() + c0, nb), out.data() + c0);
    if (fail) {
      throw ScalingViolation("column " + std::to_string(c0 + fail->column) + ": " +
                                 format_growth(fail->step, fail->growth),
                             fail->step, fail->growth);
    }
  }
  return out;
}

std::vector<cplx> NhkpmEngine::evaluate(const StateVector& left, const StateVector& right,
                                        const std::vector<cplx>& omegas, int threads) const {
  if (left.size() != dim() || right.size() != dim()) {
    throw InvalidArgument("vector length does not match operator dimension");
  }
  std::vector<cplx> out(omegas.size());
  const std::size_t nblocks = (omegas.size() + kBlock - 1) / kBlock;
  parallel_for(nblocks, threads, [&](std::size_t b) {
    const std::size_t c0 = b * kBlock;
    const Index nb = static_cast<Index>(std::min<std::size_t>(kBlock, omegas.size() - c0));
    const Eigen::MatrixXcd L = left.replicate(1, nb);
    const Eigen::MatrixXcd R = right.replicate(1, nb);
    auto fail = run_block(H_, Hd_, plan_, L, R, scaled_omegas(plan_, omegas.data() + c0, nb),
                          out.data() + c0);
    if (fail) {
      const std::size_t node = c0 + static_cast<std::size_t>(fail->column);
      throw ScalingViolation("grid node " + std::to_string(node) + " (omega = " +
                                 std::to_string(omegas[node].real()) + "+" +
                                 std::to_string(omegas[node].imag()) +
                                 "i): " + format_growth(fail->step, fail->growth),
                             fail->step, fail->growth);
    }
  });
  return out;
}

std::vector<cplx> NhkpmEngine::trace(const std::vector<cplx>& omegas, int threads) const {
  const Index n = dim();
  const std::size_t chunks = static_cast<std::size_t>((n + kBlock - 1) / kBlock);
  std::vector<cplx> partial(omegas.size() * chunks);
  parallel_for(partial.size(), threads, [&](std::size_t item) {
    const std::size_t k = item / chunks;
    const Index j0 = static_cast<Index>(item % chunks) * kBlock;
    const Index nb = std::min(kBlock, n - j0);
    Eigen::MatrixXcd E = Eigen::MatrixXcd::Zero(n, nb);
    for (Index c = 0; c < nb; ++c) E(j0 + c, c) = 1.0;
    const Eigen::VectorXcd w = Eigen::VectorXcd::Constant(nb, plan_.scaling.to_scaled(omegas[k]));
    std::vector<cplx> f(static_cast<std::size_t>(nb));
    auto fail = run_block(H_, Hd_, plan_, E, E, w, f.data());
    if (fail) {
      throw ScalingViolation("grid node " + std::to_string(k) + ": " + format_growth(fail->step, fail->growth),
                             fail->step, fail->growth);
    }
    cplx s = 0.0;
    for (cplx v : f) s += v;
    partial[item] = s;
  });
  std::vector<cplx> out(omegas.size(), cplx{0.0, 0.0});
  for (std::size_t k = 0; k < omegas.size(); ++k)
    for (std::size_t c = 0; c < chunks; ++c) out[k] += partial[k * chunks + c];
  return out;
}

cplx nhkpm_point(const SparseOperator& H, const StateVector& left, const StateVector& right, cplx omega,
                 const KpmPlan& plan) {
  return NhkpmEngine(H, plan).evaluate(left, right, {omega}).front();
}

SpectralMap nhkpm_grid(const SparseOperator& H, const StateVector& left, const StateVector& right,
                       const ComplexGrid& grid, const KpmPlan& plan, int threads) {
  grid.validate();
  SpectralMap map;
  map.grid = grid;
  map.values = NhkpmEngine(H, plan).evaluate(left, right, grid.nodes(), threads);
  return map;
}

ResolutionReport resolution_check(const SparseOperator& H, const std::vector<cplx>& probes,
                                  const KpmPlan& plan) {
  plan.validate();
  const Eigen::MatrixXcd dense = H.to_dense();
  const Eigen::VectorXcd eig = Eigen::ComplexEigenSolver<Eigen::MatrixXcd>(dense, false).eigenvalues();
  const double width = plan.physical_sigma();
  const Eigen::MatrixXcd id = Eigen::MatrixXcd::Identity(dense.rows(), dense.cols());

  ResolutionReport rep;
  rep.min_singular_value = std::numeric_limits<double>::infinity();
  for (cplx w : probes) {
    double dist = std::numeric_limits<double>::infinity();
    for (Index i = 0; i < eig.size(); ++i) dist = std::min(dist, std::abs(w - eig[i]));
    if (dist <= 3.0 * width) continue;
    const Eigen::VectorXd sv = Eigen::BDCSVD<Eigen::MatrixXcd>(w * id - dense).singularValues();
    const double smin = sv.size() ? sv.minCoeff() : 0.0;
    rep.min_singular_value = std::min(rep.min_singular_value, smin);
    // Resolution bound: the expansion resolves the point only if s_min / (2 Delta) > sigma.
    if (smin / (2.0 * plan.scaling.delta) < plan.sigma() && !rep.warning) {
      rep.warning = true;
      rep.worst_probe = w;
      rep.message = "pseudospectrum: at omega = " + std::to_string(w.real()) + "+" +
                    std::to_string(w.imag()) + "i, " + std::to_string(dist) +
                    " away from the spectrum, s_min(omega - H) = " + std::to_string(smin) +
                    " < 2 sigma Delta = " + std::to_string(2.0 * width) +
                    "; increase N to separate spurious weight from true eigenvalues";
    }
  }
  return rep;
}

void parallel_for(std::size_t count, int threads, const std::function<void(std::size_t)>& fn) {
  const std::size_t workers = std::min<std::size_t>(std::max(threads, 1), std::max<std::size_t>(count, 1));
  std::vector<std::exception_ptr> errors(count);
  std::atomic<bool> failed{false};
  auto work = [&](std::atomic<std::size_t>& next) {
    for (std::size_t i = next++; i < count && !failed; i = next++) {
      try {
        fn(i);
      } catch (...) {
        errors[i] = std::current_exception();
        failed = true;
      }
    }
  };
  std::atomic<std::size_t> next{0};
  if (workers <= 1) {
    work(next);
  } else {
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (std::size_t t = 0; t < workers; ++t) pool.emplace_back(work, std::ref(next));
    for (auto& th : pool) th.join();
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

}  // namespace nhkpm
