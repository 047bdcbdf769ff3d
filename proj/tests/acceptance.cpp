// Acceptance checks 1-8. Prints one "criterion k: PASS|FAIL ..." line per check;
// exit status is non-zero if any selected check fails.
//
//   acceptance [k]    run only criterion k

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numbers>
#include <sstream>
#include <string>

#include "config.hpp"
#include "nhkpm/nhkpm.hpp"
#include "oracle.hpp"
#include "runner.hpp"

using namespace nhkpm;
using namespace nhkpm::cli;
namespace fs = std::filesystem;

namespace {

struct Verdict {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

RunConfig shipped(const std::string& name) { return load_config((fs::path(NHKPM_CONFIG_DIR) / name).string()); }

fs::path out_dir(const std::string& name) { return fs::path("acceptance_out") / name; }

RunOutcome must_run(const RunConfig& c, const std::string& name) {
  RunOutcome r = run(c, out_dir(name).string(), 1);
  if (r.exit_code != kExitOk) throw std::runtime_error(name + ": run failed with status " + std::to_string(r.exit_code));
  return r;
}

std::vector<cplx> peaks_of(const RunOutcome& r) {
  std::vector<cplx> out;
  for (const auto& p : r.manifest["peaks"]) out.emplace_back(p["re"].get<double>(), p["im"].get<double>());
  return out;
}

double sigma_delta(const RunOutcome& r) { return r.manifest["scaling"]["sigma_delta"].get<double>(); }

// Value columns of a map CSV.
std::vector<cplx> read_map(const fs::path& p) {
  std::ifstream in(p);
  std::string line;
  std::getline(in, line);
  std::vector<cplx> v;
  double a, b, c, d;
  while (std::getline(in, line)) {
    if (std::sscanf(line.c_str(), "%lf,%lf,%lf,%lf", &a, &b, &c, &d) == 4) v.emplace_back(c, d);
  }
  return v;
}

// rho(E, site) from a profile CSV, keyed by site, in energy order.
std::map<int, std::vector<double>> read_profile(const fs::path& p) {
  std::ifstream in(p);
  std::string line;
  std::getline(in, line);
  std::map<int, std::vector<double>> out;
  double e, v;
  int site;
  while (std::getline(in, line)) {
    if (std::sscanf(line.c_str(), "%lf,%d,%lf", &e, &site, &v) == 3) out[site].push_back(v);
  }
  return out;
}

// Share of the projected weight at energy E that sits on the chain ends.
double end_weight(RunConfig c, double E, const std::string& name) {
  c.task = TaskKind::projected;
  c.delta.reset();
  c.re = Axis{E - 0.3, E + 0.3, 13};
  c.im.reset();
  c.energies = Axis{E, E, 1};
  c.sites.clear();
  must_run(c, name);
  const auto prof = read_profile(out_dir(name) / "projected.csv");
  double ends = 0.0, total = 0.0;
  for (const auto& [site, v] : prof) {
    total += v.front();
    if (site == 1 || site == c.model.L) ends += v.front();
  }
  return ends / total;
}

// Criterion 3 on a given configuration: two near-zero peaks, isolated, end-localized.
Verdict zero_mode_pair(const std::string& config, const std::string& tag) {
  const RunConfig c = shipped(config);
  const RunOutcome r = must_run(c, tag);
  const double J = c.model.J;
  std::vector<cplx> zero, other;
  for (cplx p : peaks_of(r)) (std::abs(p.real()) < 0.1 * J ? zero : other).push_back(p);
  double gap = INFINITY;
  for (cplx z : zero)
    for (cplx o : other) gap = std::min(gap, std::abs(o.real() - z.real()));
  std::string pos;
  for (cplx z : zero) pos += fmt(" %.3f%+.3fi", z.real(), z.imag());
  if (zero.size() != 2) return {false, fmt("%zu near-zero peaks (need 2):%s", zero.size(), pos.c_str())};
  const double E0 = 0.5 * (zero[0].real() + zero[1].real());
  const double w = end_weight(c, E0, tag + "_projected");
  const bool ok = gap > 0.3 * J && w > 0.6;
  return {ok, fmt("near-zero peaks%s; real-axis gap %.3f (> %.1f); end weight at E=%.4f: %.1f%% (> 60%%)", pos.c_str(),
                  gap, 0.3 * J, E0, 100 * w)};
}

Verdict criterion1() {
  const RunConfig c = shipped("hn_pbc_dos.json");
  const auto t0 = std::chrono::steady_clock::now();
  const RunOutcome r = must_run(c, "c1");
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  const double sd = sigma_delta(r);
  const auto peaks = peaks_of(r);
  // Analytic ring 2 cos k - 0.8 i sin k, k = 2 pi m / L.
  std::vector<cplx> ring;
  for (int m = 0; m < c.model.L; ++m) {
    const double k = 2 * std::numbers::pi * m / c.model.L;
    ring.emplace_back(2 * c.model.t * std::cos(k), -2 * c.model.gamma * std::sin(k));
  }
  double worst = 0.0;
  for (cplx e : ring) {
    double d = INFINITY;
    for (cplx p : peaks) d = std::min(d, std::abs(p - e));
    worst = std::max(worst, d);
  }
  double stray = 0.0;
  for (cplx p : peaks) {
    double d = INFINITY;
    for (cplx e : ring) d = std::min(d, std::abs(p - e));
    stray = std::max(stray, d);
  }
  const bool ok = peaks.size() == ring.size() && worst < sd && stray < sd && secs < 60.0;
  return {ok, fmt("%zu peaks for %zu eigenvalues; max eigenvalue-to-peak %.2e, max peak-to-eigenvalue %.2e "
                  "(sigma*Delta %.3f); %.1f s (< 60 s)",
                  peaks.size(), ring.size(), worst, stray, sd, secs)};
}

Verdict criterion2() {
  const RunOutcome hi = must_run(shipped("hn_obc_dos_n1000.json"), "c2_n1000");
  const RunOutcome lo = must_run(shipped("hn_obc_dos_n50.json"), "c2_n50");
  double im_hi = 0.0, im_lo = 0.0;
  for (cplx p : peaks_of(hi)) im_hi = std::max(im_hi, std::abs(p.imag()));
  for (cplx p : peaks_of(lo)) im_lo = std::max(im_lo, std::abs(p.imag()));
  const double s_hi = sigma_delta(hi), s_lo = sigma_delta(lo);
  const bool real_ok = im_hi < s_hi, pseudo_ok = im_lo > 3 * s_lo;
  return {real_ok && pseudo_ok,
          fmt("N=1000: %zu peaks, max|Im| %.2e < sigma*Delta %.4f [%s]; N=50: max|Im| %.3f > 3 sigma*Delta %.3f [%s]",
              peaks_of(hi).size(), im_hi, s_hi, real_ok ? "ok" : "no", im_lo, 3 * s_lo, pseudo_ok ? "ok" : "no")};
}

Verdict criterion3() { return zero_mode_pair("spin_hz2_obc.json", "c3"); }

Verdict criterion4() {
  const RunConfig c = shipped("spin_hz0_obc.json");
  const RunOutcome r = must_run(c, "c4");
  std::string detail;
  bool ok = true;
  int low = 0;
  for (cplx p : peaks_of(r)) {
    if (p.real() >= 0.1 * c.model.J) continue;
    const double w = end_weight(c, p.real(), "c4_projected_" + std::to_string(low++));
    detail += fmt(" peak %.3f%+.3fi end weight %.1f%%;", p.real(), p.imag(), 100 * w);
    ok = ok && w <= 0.4;
  }
  if (low == 0) detail = " no peak below 0.1J";
  return {ok, "hz=0:" + detail};
}

Verdict criterion5() {
  const Verdict obc = zero_mode_pair("spin_hz2_gamma01_obc.json", "c5_obc");
  const RunConfig c = shipped("spin_hz2_gamma01_pbc.json");
  const RunOutcome r = must_run(c, "c5_pbc");
  int near = 0;
  for (cplx p : peaks_of(r)) near += std::abs(p.real()) < 0.1 * c.model.J;
  const bool pbc_ok = near < 2;
  return {obc.pass && pbc_ok,
          "OBC: " + obc.detail + fmt(" | PBC: %d near-zero peaks (need < 2) [%s]", near, pbc_ok ? "ok" : "no")};
}

Verdict criterion6() {
  const RunConfig a = shipped("similarity_gamma.json"), b = shipped("similarity_hermitian.json");
  const double Jp = std::sqrt(a.model.J * a.model.J - a.model.gamma * a.model.gamma);
  if (std::abs(b.model.J - Jp) > 1e-12 || b.model.gamma != 0.0 || a.delta != b.delta)
    return {false, "similarity configs are inconsistent"};
  must_run(a, "c6_gamma");
  must_run(b, "c6_hermitian");
  const auto x = read_map(out_dir("c6_gamma") / "total_correlator.csv");
  const auto y = read_map(out_dir("c6_hermitian") / "total_correlator.csv");
  if (x.size() != y.size() || x.empty()) return {false, "map sizes differ"};
  double peak = 0.0, diff = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    peak = std::max({peak, std::abs(x[i]), std::abs(y[i])});
    diff = std::max(diff, std::abs(x[i] - y[i]));
  }
  return {diff <= 0.1 * peak, fmt("max|S(J=1,g=0.1) - S(J'=%.4f,g=0)| = %.3e, %.2e of max %.3f (<= 10%%)", Jp, diff,
                                  diff / peak, peak)};
}

// Projected NHKPM profile vs Hermitian KPM vs broadened ED, gamma = hz = 0.
Verdict criterion7() {
  SpinChainParams p;
  p.L = 8;
  const int N = 150;
  const SparseOperator H = build_spin_chain(p);
  const EigenPair gs = smallest_real_eigpair(H);
  const double e_hi = 3.3;
  const double delta = estimate_scale_factor(H - gs.value * SparseOperator::identity(H.dim()), std::hypot(e_hi, 1.0));
  const KpmPlan plan = KpmPlan::make(N, delta);
  const double sd = plan.physical_sigma();
  const ComplexGrid grid = ComplexGrid::uniform(-0.2, e_hi, static_cast<int>((e_hi + 0.2) / (sd / 4)) + 1, -4 * sd,
                                                4 * sd, 33);
  std::vector<int> sites(p.L);
  for (int l = 1; l <= p.L; ++l) sites[l - 1] = l;
  const auto maps = site_correlators(H, gs, sites, grid, plan);
  const std::vector<double> E = linspace(0.0, 3.2, 321);
  const ProjectedProfile proj = projected_structure_factor(maps, sites, E, sd, 0.0);

  const auto dec = oracle::decompose(oracle::spin_chain(p.L, p.J, 0.0, p.Jz, 0.0, false));
  double worst_ph = 0, worst_po = 0, worst_ho = 0;
  for (std::size_t s = 0; s < sites.size(); ++s) {
    const auto herm = hermitian_structure_factor(H, gs, sites[s], E, plan);
    const auto poles = oracle::correlator_poles(dec, sites[s], p.L);
    std::vector<double> pr(E.size()), o_proj(E.size()), o_herm(E.size());
    double peak = 0.0, dph = 0.0;
    for (std::size_t e = 0; e < E.size(); ++e) {
      pr[e] = proj.at(e, s);
      peak = std::max(peak, pr[e]);
      dph = std::max(dph, std::abs(pr[e] - herm[e]));
      o_proj[e] = oracle::broadened_1d(poles, E[e], sd);
      o_herm[e] = oracle::broadened_1d(poles, E[e], oracle::fwhm_of_std(sd / 2));
    }
    worst_ph = std::max(worst_ph, dph / peak);
    worst_po = std::max(worst_po, oracle::relative_l2(pr, o_proj));
    worst_ho = std::max(worst_ho, oracle::relative_l2(herm, o_herm));
  }
  const bool ok = worst_ph <= 0.05 && worst_po <= 0.10 && worst_ho <= 0.10;
  return {ok, fmt("N=%d: max|proj - herm|/peak %.3f (<= 0.05); L2(proj, ED) %.3f, L2(herm, ED) %.3f (<= 0.10)", N,
                  worst_ph, worst_po, worst_ho)};
}

// Criterion 8 parts.
struct Check {
  std::string name;
  bool pass;
  std::string value;
};

Check parity() {
  const SparseOperator H = build_hatano_nelson(8, 1.0, 0.4, Boundary::open);
  const cplx w{0.3, 0.2};
  const SparseOperator B = hermitrize(H, w);
  const auto [Bs, rec] = rescale(B, estimate_scale_factor(H, std::abs(w)), 0.0);
  double worst = 0.0;
  for (Index j = 0; j < H.dim(); ++j) {
    StateVector l = StateVector::Zero(B.dim()), r = StateVector::Zero(B.dim());
    l[j] = 1.0;
    r[H.dim() + j] = 1.0;
    const auto mu = chebyshev_moments(Bs, l, r, 200).mu;
    for (std::size_t n = 0; n < mu.size(); n += 2) worst = std::max(worst, std::abs(mu[n]));
  }
  return {"even moments", worst < 1e-12, fmt("max|mu_2n| %.1e", worst)};
}

// Grid around every weighted pole of every site, spacing a third of a width.
Check site_sum_rule() {
  SpinChainParams p;
  p.L = 6;
  p.gamma = 0.1;
  p.hz = 2.0;
  const SparseOperator H = build_spin_chain(p);
  const EigenPair gs = smallest_real_eigpair(H);
  const auto dec = oracle::decompose(H.to_dense());
  double re = 0.0, im = 0.0;
  for (int l = 1; l <= p.L; ++l) {
    const auto [r, i] = oracle::pole_extent(oracle::correlator_poles(dec, l, p.L));
    re = std::max(re, r);
    im = std::max(im, i);
  }
  const int N = 60;
  const SparseOperator Hs = H - gs.value * SparseOperator::identity(H.dim());
  double delta = estimate_scale_factor(Hs, std::hypot(re, im));
  ComplexGrid grid;
  for (int it = 0; it < 30; ++it) {
    const double sd = std::numbers::pi * delta / N, m = 4 * sd;
    grid = ComplexGrid::uniform(-m, re + m, static_cast<int>((re + 2 * m) / (sd / 3)) + 2, -im - m, im + m,
                                static_cast<int>((2 * im + 2 * m) / (sd / 3)) + 2);
    const double need = estimate_scale_factor(Hs, grid.max_abs());
    if (need <= delta) break;
    delta = need;
  }
  std::vector<int> sites(p.L);
  for (int l = 1; l <= p.L; ++l) sites[l - 1] = l;
  const auto maps = site_correlators(H, gs, sites, grid, KpmPlan::make(N, delta));
  double worst = 0.0;
  for (const auto& m : maps) worst = std::max(worst, std::abs(m.integrate() - 1.0));
  return {"site sum rule", worst <= 0.05, fmt("max|int S - 1| %.3f over %d sites", worst, p.L)};
}

Check dos_sum_rule() {
  const SparseOperator H = build_hatano_nelson(8, 1.0, 0.4, Boundary::periodic);
  const int N = 100;
  double delta = estimate_scale_factor(H, std::hypot(2.0, 0.8));
  ComplexGrid grid;
  for (int it = 0; it < 30; ++it) {
    const double sd = std::numbers::pi * delta / N, m = 4 * sd;
    grid = ComplexGrid::uniform(-2 - m, 2 + m, static_cast<int>((4 + 2 * m) / (sd / 3)) + 2, -0.8 - m,
                                0.8 + m, static_cast<int>((1.6 + 2 * m) / (sd / 3)) + 2);
    const double need = estimate_scale_factor(H, grid.max_abs());
    if (need <= delta) break;
    delta = need;
  }
  const double total = total_dos(H, grid, KpmPlan::make(N, delta)).map.integrate().real();
  return {"DOS sum rule", std::abs(total - 8.0) <= 0.05 * 8.0, fmt("int rho_tot %.3f (dim 8)", total)};
}

Check jackson_g0() {
  double worst = 0.0;
  for (int M : {1, 10, 200, 2000}) worst = std::max(worst, std::abs(jackson_kernel(M)[0] - 1.0));
  return {"Jackson g0", worst == 0.0, fmt("max|g0 - 1| %.1e", worst)};
}

// FWHM of |f| along the real line through a single pole.
Check pole_width() {
  const cplx a{0.3, -0.2};
  const SparseOperator H = SparseOperator::from_dense(Eigen::MatrixXcd::Constant(1, 1, a));
  const int N = 100;
  const double delta = 2.5;
  const KpmPlan plan = KpmPlan::make(N, delta);
  const double sd = plan.physical_sigma();
  const ComplexGrid line = ComplexGrid::uniform(a.real() - 2 * sd, a.real() + 2 * sd, 801, a.imag(), a.imag(), 1);
  const StateVector one = StateVector::Ones(1);
  const SpectralMap f = nhkpm_grid(H, one, one, line, plan);
  std::vector<double> mag(f.values.size());
  for (std::size_t i = 0; i < mag.size(); ++i) mag[i] = std::abs(f.values[i]);
  const std::size_t top = std::max_element(mag.begin(), mag.end()) - mag.begin();
  const double half = mag[top] / 2;
  auto cross = [&](int dir) {
    for (std::size_t i = top; i > 0 && i + 1 < mag.size(); i += dir) {
      const std::size_t j = i + dir;
      if (mag[j] < half) return line.re[i] + (line.re[j] - line.re[i]) * (mag[i] - half) / (mag[i] - mag[j]);
    }
    return std::nan("");
  };
  const double fwhm = cross(1) - cross(-1);
  return {"single-pole width", std::abs(fwhm / sd - 1.0) <= 0.10, fmt("FWHM/(pi Delta/N) %.3f", fwhm / sd)};
}

Check entropy_cases() {
  double worst = 0.0;
  StateVector prod = StateVector::Zero(16);
  prod[5] = 1.0;
  for (int cut = 1; cut < 4; ++cut) worst = std::max(worst, std::abs(entanglement_entropy(prod, 4, cut)));
  StateVector singlet = StateVector::Zero(4);
  singlet[1] = 1 / std::sqrt(2.0);
  singlet[2] = -1 / std::sqrt(2.0);
  worst = std::max(worst, std::abs(entanglement_entropy(singlet, 2, 1) - 1.0));
  StateVector ghz = StateVector::Zero(16);
  ghz[0] = ghz[15] = 1 / std::sqrt(2.0);
  for (int cut = 1; cut < 4; ++cut) worst = std::max(worst, std::abs(entanglement_entropy(ghz, 4, cut) - 1.0));
  return {"entanglement", worst <= 1e-10, fmt("max error %.1e", worst)};
}

// Every model of every shipped configuration: Krylov vs dense ground energy and fidelities.
std::pair<Check, Check> shipped_ground_states() {
  double worst_e = 0.0, worst_d = 0.0;
  int count = 0;
  for (const auto& entry : fs::directory_iterator(NHKPM_CONFIG_DIR)) {
    if (entry.path().extension() != ".json") continue;
    const RunConfig c = load_config(entry.path().string());
    std::vector<ModelConfig> models{c.model};
    if (c.task == TaskKind::bench) {
      models.clear();
      for (int L : c.bench.L) {
        models.push_back(c.model);
        models.back().L = L;
      }
    }
    for (const auto& m : models) {
      const SparseOperator H = build_model(m);
      KrylovOptions o;
      o.subspace = c.krylov_subspace;
      o.tol = c.krylov_tol;
      o.max_restarts = c.krylov_max_restarts;
      o.seed = c.seed;
      const EigenPair gs = smallest_real_eigpair(H, o);
      const auto ev = oracle::sorted_eigenvalues(H.to_dense());
      worst_e = std::max(worst_e, std::abs(gs.value - ev.front()));
      worst_d = std::max({worst_d, gs.d_right, gs.d_left});
      ++count;
    }
  }
  return {{"Krylov vs dense", worst_e <= 1e-8, fmt("max|dE| %.1e over %d models", worst_e, count)},
          {"d_R/d_L", worst_d <= 1e-3, fmt("max %.1e", worst_d)}};
}

Verdict criterion8() {
  std::vector<Check> checks{parity(), site_sum_rule(), dos_sum_rule(), jackson_g0(), pole_width(), entropy_cases()};
  const auto [e, d] = shipped_ground_states();
  checks.push_back(e);
  checks.push_back(d);
  Verdict v{true, ""};
  for (const auto& c : checks) {
    v.pass = v.pass && c.pass;
    v.detail += (v.detail.empty() ? "" : "; ") + c.name + " " + (c.pass ? "ok" : "FAIL") + " (" + c.value + ")";
  }
  return v;
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::function<Verdict()>> criteria{criterion1, criterion2, criterion3, criterion4,
                                                       criterion5, criterion6, criterion7, criterion8};
  int only = 0;
  if (argc > 1) {
    only = std::atoi(argv[1]);
    if (only < 1 || only > static_cast<int>(criteria.size())) {
      std::fprintf(stderr, "usage: %s [1-%zu]\n", argv[0], criteria.size());
      return 2;
    }
  }
  fs::create_directories("acceptance_out");
  bool all = true;
  for (int k = 1; k <= static_cast<int>(criteria.size()); ++k) {
    if (only && k != only) continue;
    Verdict v;
    try {
      v = criteria[k - 1]();
    } catch (const std::exception& e) {
      v = {false, std::string("error: ") + e.what()};
    }
    std::printf("criterion %d: %s %s\n", k, v.pass ? "PASS" : "FAIL", v.detail.c_str());
    std::fflush(stdout);
    all = all && v.pass;
  }
  return all ? 0 : 1;
}
