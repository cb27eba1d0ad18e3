// ecasim: run a scenario file (or a bundled scenario name) and write
// summary.csv, runs.csv and optionally one trace per run.

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <thread>

#include <CLI11.hpp>

#include "ecasim/error.hpp"
#include "ecasim/scenario.hpp"
#include "ecasim/sweep.hpp"

namespace {

constexpr const char* kOutDirEnv = "ECASIM_OUT_DIR";

std::filesystem::path output_dir(const std::optional<std::string>& flag,
                                 const ecasim::Scenario& scenario) {
  if (flag) return *flag;
  if (!scenario.out_dir.empty()) return scenario.out_dir;
  if (const char* env = std::getenv(kOutDirEnv)) return std::filesystem::path(env) / scenario.name;
  return std::filesystem::path("ecasim-out") / scenario.name;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Slotted CSMA contention simulator (CA, ECA, sticky and adaptive ECA)"};

  std::string scenario_arg;
  std::optional<std::string> seeds;
  std::optional<std::string> horizon;
  std::optional<std::string> out_dir;
  unsigned workers = std::max(1u, std::thread::hardware_concurrency());
  bool trace = false;
  bool quiet = false;

  app.add_option("scenario", scenario_arg, "Scenario YAML file or bundled scenario name")
      ->required();
  app.add_option("--seeds", seeds, "Seed count N (1..N), range A..B, or list A,B,C");
  app.add_option("--horizon", horizon, "Run length in slots, or microseconds with a 'us' suffix");
  app.add_option("--out-dir", out_dir,
                 std::string("Output directory (default: scenario output.dir, then $") +
                     kOutDirEnv + "/<name>, then ecasim-out/<name>)");
  app.add_option("--workers", workers, "Parallel runs")->check(CLI::PositiveNumber);
  app.add_flag("--trace", trace, "Also write the full per-slot trace of every run");
  app.add_flag("-q,--quiet", quiet, "Do not echo the summary to stdout");

  CLI11_PARSE(app, argc, argv);

  try {
    ecasim::Scenario scenario = ecasim::load_scenario(ecasim::resolve_scenario(scenario_arg));
    if (seeds) scenario.seeds = ecasim::parse_seed_spec(*seeds);
    if (horizon) scenario.horizon = ecasim::parse_horizon(*horizon);
    scenario.validate();

    const auto dir = output_dir(out_dir, scenario);
    ecasim::SweepOptions options;
    options.workers = workers;
    if (trace || scenario.emit_traces) options.trace_dir = dir / "traces";

    const auto result = ecasim::run_sweep(scenario, options);
    ecasim::write_sweep_outputs(result, dir);
    if (!quiet) ecasim::write_summary_csv(std::cout, result.summary);
    std::cerr << "wrote " << (dir / "summary.csv").string() << " and "
              << (dir / "runs.csv").string() << '\n';
    return 0;
  } catch (const ecasim::Error& e) {
    std::cerr << "ecasim: " << e.what() << '\n';
    return e.exit_code();
  } catch (const std::exception& e) {
    std::cerr << "ecasim: " << e.what() << '\n';
    return 1;
  }
}
