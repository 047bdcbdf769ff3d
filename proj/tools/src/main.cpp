// nhkpm: run spectral-function experiments from JSON configurations.
//
//   nhkpm run <config.json> [--out DIR] [--threads K] [--override key=value]...
//   nhkpm bench <config.json> [--out DIR] [--threads K] [--override key=value]...
//
// Exit status: 0 success, 2 configuration error, 3 numerical failure.

#include <cstdio>
#include <exception>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "config.hpp"
#include "runner.hpp"

namespace {

using namespace nhkpm::cli;

struct Args {
  std::string config;
  std::string out;
  int threads = 0;
  std::vector<std::string> overrides;
};

void add_common(CLI::App* cmd, Args& a) {
  cmd->add_option("config", a.config, "JSON configuration or run manifest")->required();
  cmd->add_option("--out", a.out, "Output directory (default: the config's output)");
  cmd->add_option("--threads", a.threads, "Worker threads (default: config, then NHKPM_THREADS, then 1)")
      ->check(CLI::NonNegativeNumber);
  cmd->add_option("--override", a.overrides, "Set a config value before validation, e.g. model.hz=2");
}

int execute(const Args& a, bool bench) {
  std::vector<std::string> overrides = a.overrides;
  if (bench) overrides.push_back("task=bench");
  std::ifstream in(a.config, std::ios::binary);
  if (!in) throw ConfigError(a.config + ": cannot open file");
  const std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  const RunConfig config = parse_config(text, a.config, overrides);
  const std::string out = a.out.empty() ? config.output : a.out;
  const int threads = resolve_threads(a.threads > 0 ? std::optional<int>(a.threads) : std::nullopt, config);

  const RunOutcome r = run(config, out, threads);
  for (const auto& w : r.manifest["warnings"]) std::cerr << "warning: " << w.get<std::string>() << "\n";
  if (r.exit_code == kExitOk) {
    std::cout << "wrote " << r.files.size() << " file(s) to " << out << "\n";
  } else if (r.manifest.contains("diagnostics")) {
    std::cerr << "error: " << r.manifest["diagnostics"]["error"].get<std::string>() << " (see " << out
              << "/manifest.json)\n";
  } else {
    std::cerr << "error: " << r.manifest["status"].get<std::string>() << " (see " << out << "/manifest.json)\n";
  }
  return r.exit_code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Non-Hermitian kernel polynomial method runner"};
  app.require_subcommand(1);
  Args args;
  CLI::App* run_cmd = app.add_subcommand("run", "Run the configured task");
  CLI::App* bench_cmd = app.add_subcommand("bench", "Time the correlator recursion against chain length");
  add_common(run_cmd, args);
  add_common(bench_cmd, args);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    return execute(args, bench_cmd->parsed());
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const nhkpm::InvalidArgument& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUnexpected;
  }
}
