#pragma once

// Run configuration for the nhkpm command-line runner: a JSON document with a
// fixed schema. Unknown keys and ill-typed values are errors that point at the
// offending line of the source file.

#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "nhkpm/operators.hpp"

namespace nhkpm::cli {

using json = nlohmann::ordered_json;

/// Malformed or inconsistent configuration (exit status 2).
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Line numbers of every key and array element of a JSON text, by JSON pointer.
class SourceMap {
 public:
  static SourceMap build(const std::string& text);

  /// Line of the pointer, or of its closest recorded ancestor; 0 if unknown.
  int line_of(const std::string& pointer) const;

  void record(const std::string& pointer, int line) { lines_.emplace(pointer, line); }

 private:
  std::map<std::string, int> lines_;
};

enum class ModelKind { spin_chain, fermion_chain, hatano_nelson };
enum class TaskKind { correlator, projected, dos, hermitian_sf, validate, bench };

struct ModelConfig {
  ModelKind kind = ModelKind::spin_chain;
  int L = 8;
  double J = 1.0;
  double gamma = 0.0;
  double Jz = 0.5;
  double hz = 0.0;
  double t = 1.0;
  Boundary bc = Boundary::open;

  SpinChainParams chain_params() const;
  /// Hilbert-space dimension: 2^L for the many-body models, L for Hatano-Nelson.
  Index dim() const;
};

struct Axis {
  double lo = 0.0;
  double hi = 0.0;
  int n = 1;
};

struct BenchConfig {
  std::vector<int> L{4, 6, 8, 10};
  int n_per_site = 25;  // N = n_per_site * L
  double omega_re = 0.0;
  double omega_im = 0.23;
  int site = 1;
  int repeats = 3;
};

struct RunConfig {
  ModelConfig model;
  TaskKind task = TaskKind::correlator;
  int N = 100;
  std::optional<double> delta;  // nullopt: automatic
  std::optional<Axis> re;       // nullopt: task default
  std::optional<Axis> im;
  std::optional<Axis> energies;  // projected / hermitian_sf energy axis
  std::vector<int> sites;        // empty: all sites
  std::string dos_mode = "exact_trace";
  int dos_samples = 16;
  int krylov_subspace = 30;
  double krylov_tol = 1e-9;
  int krylov_max_restarts = 200;
  std::uint64_t seed = 20240917;
  int threads = 0;  // 0: NHKPM_THREADS or 1
  std::string output = "out";
  BenchConfig bench;
};

/// Parse and validate. `origin` names the source in error messages. If the
/// document is a run manifest, its resolved configuration is used.
RunConfig parse_config(const std::string& text, const std::string& origin = "<config>");
RunConfig load_config(const std::string& path);

/// Apply "dotted.key=value" to a configuration document before validation.
/// The value is read as JSON when it parses as such, otherwise as a string.
void apply_override(json& doc, const std::string& assignment);

/// Like parse_config, with overrides applied to the document first.
RunConfig parse_config(const std::string& text, const std::string& origin,
                       const std::vector<std::string>& overrides);

/// Canonical JSON form of a configuration; parse_config(to_json(c)) == c.
json to_json(const RunConfig& config);

std::string to_string(ModelKind kind);
std::string to_string(TaskKind kind);

}  // namespace nhkpm::cli
