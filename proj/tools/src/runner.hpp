#pragma once

// Executes a RunConfig: builds the model, resolves the expansion plan and the
// grids, runs the task and writes CSV files plus manifest.json. Files are
// written only after every computation has finished.

#include <optional>
#include <string>
#include <vector>

#include "config.hpp"
#include "nhkpm/nhkpm.hpp"

namespace nhkpm::cli {

/// Exit statuses of `nhkpm run` / `nhkpm bench`.
enum ExitCode : int { kExitOk = 0, kExitUnexpected = 1, kExitConfig = 2, kExitNumerical = 3 };

/// Operator of the configured model.
SparseOperator build_model(const ModelConfig& model);

/// Worker count: explicit value if given and positive, else the config's, else
/// the NHKPM_THREADS environment variable, else 1.
int resolve_threads(std::optional<int> cli_threads, const RunConfig& config);

/// One CSV row per node (Re fastest), header re_omega,im_omega,re_value,im_value.
std::string map_csv(const SpectralMap& map);
/// Header E,site,value; rows ordered by energy, then site.
std::string profile_csv(const ProjectedProfile& profile);

struct RunOutcome {
  int exit_code = kExitOk;
  json manifest;
  std::vector<std::string> files;  // written paths, manifest last
};

/// Run the task into `out_dir` (created if needed). Configuration problems
/// detected while resolving defaults throw ConfigError; numerical failures are
/// reported through the manifest and exit code 3.
RunOutcome run(const RunConfig& config, const std::string& out_dir, int threads);

}  // namespace nhkpm::cli
