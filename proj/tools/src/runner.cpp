#include "runner.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numbers>

#include <Eigen/Eigenvalues>

#include "nhkpm/version.hpp"

namespace nhkpm::cli {

namespace {

namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

// Largest dimension for which the runner diagonalizes densely to size grids
// and to probe the pseudospectrum.
constexpr Index kDenseProbeMaxDim = 1024;
constexpr int kMaxAxisNodes = 4001;

struct Pending {
  std::string name;
  std::string content;
};

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string utc_timestamp() {
  const std::time_t now = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

json complex_json(cplx z) { return json::array({z.real(), z.imag()}); }

json peaks_json(const std::vector<Peak>& peaks) {
  json out = json::array();
  for (const auto& p : peaks) out.push_back(json{{"re", p.position.real()}, {"im", p.position.imag()}, {"height", p.height}});
  return out;
}

// Energy scale of the spin models, used for default real axes.
double spin_scale(const ModelConfig& m) {
  const double u = std::max({std::abs(m.J), std::abs(m.Jz), std::abs(m.hz)});
  return u > 0.0 ? u : 1.0;
}

// Largest |Im(E_n - shift)| over the spectrum: dense when small, else twice
// the row-sum bound of the anti-Hermitian part.
double im_extent(const SparseOperator& H, cplx shift, bool& exact) {
  const SparseOperator A = cplx{0.5, 0.0} * (H - H.adjoint());
  if (A.nonzeros() == 0) {
    exact = true;
    return std::abs(shift.imag()) > 0.0 ? std::abs(shift.imag()) : 0.0;
  }
  if (H.dim() <= kDenseProbeMaxDim) {
    exact = true;
    const Eigen::VectorXcd ev = Eigen::ComplexEigenSolver<Eigen::MatrixXcd>(H.to_dense(), false).eigenvalues();
    double m = 0.0;
    for (Index i = 0; i < ev.size(); ++i) m = std::max(m, std::abs((ev[i] - shift).imag()));
    return m;
  }
  exact = false;
  return 2.0 * std::max(A.max_row_sum(), A.max_col_sum());
}

int nodes_for(double lo, double hi, double step) {
  if (!(hi > lo)) return 1;
  const double n = std::ceil((hi - lo) / step) + 1.0;
  return static_cast<int>(std::clamp(n, 2.0, static_cast<double>(kMaxAxisNodes)));
}

double corner_abs(const Axis& re, const Axis& im) {
  const double x = std::max(std::abs(re.lo), std::abs(re.hi));
  const double y = std::max(std::abs(im.lo), std::abs(im.hi));
  return std::hypot(x, y);
}

// Default axes as functions of the resolution sigma*Delta.
struct AxisDefaults {
  std::function<std::pair<double, double>(double)> re;
  std::function<std::pair<double, double>(double)> im;
};

// Resolves Delta (fixed point when automatic: the default grid widens with
// sigma*Delta, which grows with Delta) and the grid. Fills the resolved config.
KpmPlan resolve_plan(const RunConfig& c, const SparseOperator& H, cplx shift, const AxisDefaults& defaults,
                     RunConfig& resolved, ComplexGrid& grid) {
  auto axes = [&](double sd, bool counts) {
    Axis re = c.re.value_or(Axis{}), im = c.im.value_or(Axis{});
    if (!c.re) std::tie(re.lo, re.hi) = defaults.re(sd);
    if (!c.im) std::tie(im.lo, im.hi) = defaults.im(sd);
    if (counts) {
      if (!c.re) re.n = nodes_for(re.lo, re.hi, sd / 2.0);
      if (!c.im) im.n = nodes_for(im.lo, im.hi, sd / 2.0);
    }
    return std::pair{re, im};
  };

  double delta = c.delta.value_or(0.0);
  if (!c.delta) {
    const SparseOperator Hs = H - shift * SparseOperator::identity(H.dim());
    double sd = 0.0;
    bool converged = false;
    for (int it = 0; it < 200 && !converged; ++it) {
      const auto [re, im] = axes(sd, false);
      const double next = estimate_scale_factor(Hs, corner_abs(re, im));
      converged = std::abs(next - delta) <= 1e-13 * next;
      delta = next;
      sd = std::numbers::pi * delta / c.N;
    }
    if (!converged) {
      throw ConfigError("automatic plan.delta does not settle for N = " + std::to_string(c.N) +
                        " with a default grid; set plan.delta or both grid axes");
    }
  }
  KpmPlan plan = KpmPlan::make(c.N, delta, shift);
  const auto [re, im] = axes(plan.physical_sigma(), true);
  grid = ComplexGrid::uniform(re.lo, re.hi, re.n, im.lo, im.hi, im.n);
  resolved.delta = delta;
  resolved.re = re;
  resolved.im = im;
  return plan;
}

// Probes a subset of grid nodes (energies relative to `shift`) for points the
// expansion cannot tell apart from the spectrum.
void pseudospectrum_warnings(const SparseOperator& H, const ComplexGrid& grid, cplx shift, const KpmPlan& plan,
                             json& warnings) {
  if (H.hermiticity_defect() <= 1e-12) return;
  if (H.dim() > kDenseProbeMaxDim) {
    warnings.push_back("resolution check skipped: dimension " + std::to_string(H.dim()) + " > " +
                       std::to_string(kDenseProbeMaxDim));
    return;
  }
  const std::size_t total = grid.size();
  const std::size_t stride = H.dim() <= 64 ? 1 : std::max<std::size_t>(1, (total + 63) / 64);
  std::vector<cplx> probes;
  for (std::size_t i = 0; i < total; i += stride) probes.push_back(grid.node(i) + shift);
  const ResolutionReport rep = resolution_check(H, probes, plan);
  if (rep.warning) warnings.push_back(rep.message);
}

KrylovOptions krylov_options(const RunConfig& c) {
  KrylovOptions o;
  o.subspace = c.krylov_subspace;
  o.tol = c.krylov_tol;
  o.max_restarts = c.krylov_max_restarts;
  o.seed = c.seed;
  return o;
}

json ground_state_json(const EigenPair& gs) {
  return json{{"energy", complex_json(gs.value)}, {"d_R", gs.d_right}, {"d_L", gs.d_left}};
}

json scaling_json(const KpmPlan& plan) {
  return json{{"delta", plan.scaling.delta},
              {"shift", complex_json(plan.scaling.shift)},
              {"N", plan.order},
              {"sigma", plan.sigma()},
              {"sigma_delta", plan.physical_sigma()}};
}

std::vector<int> resolved_sites(const RunConfig& c) {
  if (!c.sites.empty()) return c.sites;
  std::vector<int> all(c.model.L);
  for (int l = 1; l <= c.model.L; ++l) all[l - 1] = l;
  return all;
}

std::string site_file(int site) { return "correlator_site" + std::to_string(site) + ".csv"; }

// correlator and projected share the per-site maps.
void run_site_maps(const RunConfig& c, int threads, RunConfig& resolved, json& m, std::vector<Pending>& out) {
  const SparseOperator H = build_model(c.model);
  const EigenPair gs = smallest_real_eigpair(H, krylov_options(c));
  m["ground_state"] = ground_state_json(gs);

  bool exact = false;
  const double extent = im_extent(H, gs.value, exact);
  const double u = spin_scale(c.model);
  AxisDefaults defaults{[u](double) { return std::pair{-0.2 * u, 2.5 * u}; },
                        [extent](double sd) {
                          const double h = 1.2 * extent + 3.0 * sd;
                          return std::pair{-h, h};
                        }};
  ComplexGrid grid;
  const KpmPlan plan = resolve_plan(c, H, gs.value, defaults, resolved, grid);
  m["scaling"] = scaling_json(plan);
  pseudospectrum_warnings(H, grid, gs.value, plan, m["warnings"]);

  const std::vector<int> sites = resolved_sites(c);
  resolved.sites = sites;
  const std::vector<SpectralMap> maps = site_correlators(H, gs, sites, grid, plan, threads);
  const SpectralMap total = total_correlator(maps);
  m["peaks"] = peaks_json(find_peaks(total, PeakOptions::for_width(plan.physical_sigma())));

  if (c.task == TaskKind::correlator) {
    json integrals = json::object();
    for (std::size_t s = 0; s < sites.size(); ++s) {
      out.push_back({site_file(sites[s]), map_csv(maps[s])});
      integrals[std::to_string(sites[s])] = complex_json(maps[s].integrate());
    }
    out.push_back({"total_correlator.csv", map_csv(total)});
    m["site_integrals"] = integrals;
    return;
  }

  Axis e = c.energies.value_or(*resolved.re);
  resolved.energies = e;
  const std::vector<double> E_axis = linspace(e.lo, e.hi, e.n);
  if (E_axis.front() < grid.re.front() || E_axis.back() > grid.re.back()) {
    throw ConfigError("energies [" + std::to_string(e.lo) + ", " + std::to_string(e.hi) +
                      "] must lie inside grid.re [" + std::to_string(grid.re.front()) + ", " +
                      std::to_string(grid.re.back()) + "]");
  }
  ProjectedProfile profile;
  try {
    profile = projected_structure_factor(maps, sites, E_axis, plan.physical_sigma(),
                                         exact ? std::optional<double>(extent) : std::nullopt);
  } catch (const InvalidArgument& err) {
    throw ConfigError(std::string("grid.im too narrow for the projected profile: ") + err.what());
  }
  out.push_back({"projected.csv", profile_csv(profile)});
}

void run_dos(const RunConfig& c, int threads, RunConfig& resolved, json& m, std::vector<Pending>& out) {
  const SparseOperator H = build_model(c.model);
  bool exact = false;
  const double extent = im_extent(H, {0.0, 0.0}, exact);
  const double R = std::max(H.max_row_sum(), H.max_col_sum());
  AxisDefaults defaults{[R](double sd) { return std::pair{-R - 3.0 * sd, R + 3.0 * sd}; },
                        [extent](double sd) {
                          const double h = 1.2 * extent + 3.0 * sd;
                          return std::pair{-h, h};
                        }};
  ComplexGrid grid;
  const KpmPlan plan = resolve_plan(c, H, {0.0, 0.0}, defaults, resolved, grid);
  m["scaling"] = scaling_json(plan);
  pseudospectrum_warnings(H, grid, {0.0, 0.0}, plan, m["warnings"]);

  DosOptions opts;
  opts.mode = c.dos_mode == "stochastic" ? DosMode::stochastic : DosMode::exact_trace;
  opts.samples = c.dos_samples;
  opts.seed = c.seed;
  opts.threads = threads;
  const DosResult dos = total_dos(H, grid, plan, opts);
  m["peaks"] = peaks_json(find_peaks(dos.map, PeakOptions::for_width(plan.physical_sigma())));
  m["integral"] = complex_json(dos.map.integrate());
  m["dimension"] = H.dim();
  out.push_back({"dos.csv", map_csv(dos.map)});
  if (!dos.std_error.empty()) {
    SpectralMap err{grid, {}, {}};
    err.values.reserve(dos.std_error.size());
    for (double s : dos.std_error) err.values.emplace_back(s, 0.0);
    out.push_back({"dos_stderr.csv", map_csv(err)});
  }
}

void run_hermitian_sf(const RunConfig& c, RunConfig& resolved, json& m, std::vector<Pending>& out) {
  const SparseOperator H = build_model(c.model);
  const EigenPair gs = smallest_real_eigpair(H, krylov_options(c));
  m["ground_state"] = ground_state_json(gs);
  const double u = spin_scale(c.model);
  Axis e = c.energies.value_or(Axis{-0.2 * u, 2.5 * u, 0});

  double delta = c.delta.value_or(0.0);
  if (!c.delta) {
    const SparseOperator Hs = H - gs.value * SparseOperator::identity(H.dim());
    delta = estimate_scale_factor(Hs, std::max(std::abs(e.lo), std::abs(e.hi)));
  }
  const KpmPlan plan = KpmPlan::make(c.N, delta, gs.value);
  if (!c.energies) e.n = nodes_for(e.lo, e.hi, plan.physical_sigma() / 4.0);
  resolved.delta = delta;
  resolved.energies = e;
  m["scaling"] = scaling_json(plan);

  ProjectedProfile profile;
  profile.sites = resolved_sites(c);
  resolved.sites = profile.sites;
  profile.E_axis = linspace(e.lo, e.hi, e.n);
  std::vector<std::vector<double>> per_site;
  for (int site : profile.sites) per_site.push_back(hermitian_structure_factor(H, gs, site, profile.E_axis, plan));
  profile.values.resize(profile.E_axis.size() * profile.sites.size());
  for (std::size_t k = 0; k < profile.E_axis.size(); ++k)
    for (std::size_t s = 0; s < profile.sites.size(); ++s)
      profile.values[k * profile.sites.size() + s] = per_site[s][k];
  out.push_back({"hermitian_sf.csv", profile_csv(profile)});
}

bool run_validate(const RunConfig& c, json& m) {
  const SparseOperator H = build_model(c.model);
  const EigenPair gs = smallest_real_eigpair(H, krylov_options(c));
  m["ground_state"] = ground_state_json(gs);
  json v{{"dimension", H.dim()}, {"d_R", gs.d_right}, {"d_L", gs.d_left}, {"fidelity_bound", 1e-3}};
  bool ok = gs.d_right < 1e-3 && gs.d_left < 1e-3;
  if (H.dim() <= kDenseEigMaxDim) {
    const Eigen::VectorXcd ev = Eigen::ComplexEigenSolver<Eigen::MatrixXcd>(H.to_dense(), false).eigenvalues();
    Index best = 0;
    for (Index i = 1; i < ev.size(); ++i)
      if (ev[i].real() < ev[best].real()) best = i;
    const double diff = std::abs(ev[best] - gs.value);
    v["dense_energy"] = complex_json(ev[best]);
    v["energy_difference"] = diff;
    v["energy_bound"] = 1e-8;
    ok = ok && diff < 1e-8;
  } else {
    m["warnings"].push_back("dense comparison skipped: dimension " + std::to_string(H.dim()) + " > " +
                            std::to_string(kDenseEigMaxDim));
  }
  v["passed"] = ok;
  m["validation"] = v;
  return ok;
}

// Wall time of one correlator evaluation at a single omega; best of `repeats`.
double time_point(const SparseOperator& H, const EigenPair& gs, int site, const ComplexGrid& grid,
                  const KpmPlan& plan, int repeats, int threads, cplx& value) {
  double best = std::numeric_limits<double>::infinity();
  for (int r = 0; r < repeats; ++r) {
    const auto t0 = Clock::now();
    value = dynamical_spin_correlator(H, gs, site, grid, plan, threads).values.front();
    best = std::min(best, seconds_since(t0));
  }
  return best;
}

void run_bench(const RunConfig& c, int threads, json& m, std::vector<Pending>& out) {
  const BenchConfig& b = c.bench;
  const cplx omega{b.omega_re, b.omega_im};
  const ComplexGrid grid = ComplexGrid::uniform(omega.real(), omega.real(), 1, omega.imag(), omega.imag(), 1);
  json rows = json::array();
  std::vector<double> xs, ys;
  double doubling = std::nan("");
  const int L_max = *std::max_element(b.L.begin(), b.L.end());
  for (int L : b.L) {
    ModelConfig model = c.model;
    model.L = L;
    const SparseOperator H = build_model(model);
    const EigenPair gs = smallest_real_eigpair(H, krylov_options(c));
    const int N = b.n_per_site * L;
    const SparseOperator Hs = H - gs.value * SparseOperator::identity(H.dim());
    const KpmPlan plan = KpmPlan::make(N, estimate_scale_factor(Hs, std::abs(omega)), gs.value);
    cplx value;
    const double t = time_point(H, gs, b.site, grid, plan, b.repeats, threads, value);
    rows.push_back(json{{"L", L}, {"N", N}, {"dimension", H.dim()}, {"seconds", t}, {"value", complex_json(value)}});
    xs.push_back(std::log(L));
    ys.push_back(std::log(t));
    if (L == L_max && std::isnan(doubling)) {
      const KpmPlan twice = KpmPlan::make(2 * N, plan.scaling.delta, gs.value);
      cplx v2;
      doubling = time_point(H, gs, b.site, grid, twice, b.repeats, threads, v2) / t;
    }
  }
  json report{{"omega", complex_json(omega)}, {"site", b.site}, {"n_per_site", b.n_per_site}, {"timings", rows}};
  std::vector<double> distinct = xs;
  std::sort(distinct.begin(), distinct.end());
  if (std::unique(distinct.begin(), distinct.end()) - distinct.begin() >= 2) {
    const double n = static_cast<double>(xs.size());
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
      sx += xs[i];
      sy += ys[i];
      sxx += xs[i] * xs[i];
      sxy += xs[i] * ys[i];
    }
    report["loglog_slope"] = (n * sxy - sx * sy) / (n * sxx - sx * sx);
  } else {
    report["loglog_slope"] = nullptr;
  }
  report["doubling_N"] = json{{"L", L_max}, {"time_ratio", doubling}, {"within_30_percent", std::abs(doubling - 2.0) <= 0.6}};
  m["bench"] = report;
  out.push_back({"bench.json", report.dump(2) + "\n"});
}

void write_atomically(const fs::path& path, const std::string& content) {
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw std::runtime_error("cannot write " + tmp.string());
    f << content;
    if (!f.flush()) throw std::runtime_error("cannot write " + tmp.string());
  }
  fs::rename(tmp, path);
}

}  // namespace

SparseOperator build_model(const ModelConfig& model) {
  switch (model.kind) {
    case ModelKind::spin_chain: return build_spin_chain(model.chain_params());
    case ModelKind::fermion_chain: return build_fermion_chain(model.chain_params());
    case ModelKind::hatano_nelson: return build_hatano_nelson(model.L, model.t, model.gamma, model.bc);
  }
  throw InvalidArgument("unknown model kind");
}

int resolve_threads(std::optional<int> cli_threads, const RunConfig& config) {
  if (cli_threads && *cli_threads > 0) return *cli_threads;
  if (config.threads > 0) return config.threads;
  if (const char* env = std::getenv("NHKPM_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && v > 0 && v <= 4096) return static_cast<int>(v);
  }
  return 1;
}

std::string map_csv(const SpectralMap& map) {
  std::string s = "re_omega,im_omega,re_value,im_value\n";
  s.reserve(s.size() + map.values.size() * 96);
  char line[160];
  for (std::size_t i = 0; i < map.values.size(); ++i) {
    const cplx w = map.grid.node(i);
    std::snprintf(line, sizeof line, "%.17g,%.17g,%.17g,%.17g\n", w.real(), w.imag(), map.values[i].real(),
                  map.values[i].imag());
    s += line;
  }
  return s;
}

std::string profile_csv(const ProjectedProfile& profile) {
  std::string s = "E,site,value\n";
  char line[128];
  for (std::size_t e = 0; e < profile.E_axis.size(); ++e) {
    for (std::size_t k = 0; k < profile.sites.size(); ++k) {
      std::snprintf(line, sizeof line, "%.17g,%d,%.17g\n", profile.E_axis[e], profile.sites[k], profile.at(e, k));
      s += line;
    }
  }
  return s;
}

RunOutcome run(const RunConfig& config, const std::string& out_dir, int threads) {
  const auto t0 = Clock::now();
  RunConfig resolved = config;
  resolved.output = out_dir;
  json m;
  m["nhkpm_version"] = kVersion;
  m["task"] = to_string(config.task);
  m["status"] = "ok";
  m["warnings"] = json::array();
  std::vector<Pending> pending;
  RunOutcome outcome;

  try {
    switch (config.task) {
      case TaskKind::correlator:
      case TaskKind::projected: run_site_maps(config, threads, resolved, m, pending); break;
      case TaskKind::dos: run_dos(config, threads, resolved, m, pending); break;
      case TaskKind::hermitian_sf: run_hermitian_sf(config, resolved, m, pending); break;
      case TaskKind::validate:
        if (!run_validate(config, m)) {
          m["status"] = "contract_violation";
          outcome.exit_code = kExitNumerical;
        }
        break;
      case TaskKind::bench: run_bench(config, threads, m, pending); break;
    }
  } catch (const NumericalError& e) {
    json d{{"error", e.what()}};
    if (const auto* nc = dynamic_cast<const NonConvergence*>(&e)) {
      d["type"] = "non_convergence";
      d["best_residual"] = nc->best_residual();
      d["restarts"] = nc->restarts();
    } else if (const auto* sv = dynamic_cast<const ScalingViolation*>(&e)) {
      d["type"] = "scaling_violation";
      d["step"] = sv->step();
      d["growth"] = sv->growth();
    } else if (dynamic_cast<const PairingFailure*>(&e)) {
      d["type"] = "pairing_failure";
    } else {
      d["type"] = "numerical_error";
    }
    m["status"] = "failed";
    m["diagnostics"] = d;
    pending.clear();
    outcome.exit_code = kExitNumerical;
  }

  m["resolved_config"] = to_json(resolved);
  json names = json::array();
  for (const auto& p : pending) names.push_back(p.name);
  m["outputs"] = names;
  m["threads"] = threads;
  m["wall_time_s"] = seconds_since(t0);
  m["timestamp"] = utc_timestamp();

  const fs::path dir(out_dir);
  fs::create_directories(dir);
  for (const auto& p : pending) {
    write_atomically(dir / p.name, p.content);
    outcome.files.push_back((dir / p.name).string());
  }
  write_atomically(dir / "manifest.json", m.dump(2) + "\n");
  outcome.files.push_back((dir / "manifest.json").string());
  outcome.manifest = std::move(m);
  return outcome;
}

}  // namespace nhkpm::cli
