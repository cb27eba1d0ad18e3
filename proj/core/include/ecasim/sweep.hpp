#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ecasim/metrics.hpp"
#include "ecasim/scenario.hpp"

namespace ecasim {

struct SweepOptions {
  unsigned workers = 1;
  // Write one trace file per run here when set.
  std::optional<std::filesystem::path> trace_dir;
};

struct RunRecord {
  std::string protocol;
  std::uint32_t n_stations = 0;
  std::uint64_t seed = 0;
  MetricsReport metrics;
  std::uint64_t slots = 0;
  std::int64_t wall_time_us = 0;
};

/// Mean and sample standard deviation over the finite samples.
struct SampleStats {
  std::size_t count = 0;
  double mean = 0.0;
  double stddev = 0.0;

  static SampleStats of(std::span<const double> samples);
  double standard_error() const;
};

struct CellSummary {
  std::string protocol;
  std::uint32_t n_stations = 0;
  std::size_t n_seeds = 0;
  SampleStats throughput;
  SampleStats collision_probability;
  SampleStats convergence_slot;  // converged runs only
  std::size_t non_converged = 0;
  SampleStats jain_index;
};

struct SweepResult {
  std::vector<RunRecord> runs;         // cell order, then seed order
  std::vector<CellSummary> summary;    // cell order
};

/// Runs every (cell, seed) pair on a bounded worker pool. Results do not
/// depend on the worker count. Run failures are rethrown with the cell and
/// seed prefixed to the message.
SweepResult run_sweep(const Scenario& scenario, const SweepOptions& options = {});

inline constexpr const char* kSummaryColumns =
    "protocol,n_stations,n_seeds,throughput_mean,throughput_std,collision_probability_mean,"
    "collision_probability_std,convergence_slot_mean,convergence_slot_std,non_converged,"
    "jain_index_mean,jain_index_std";

inline constexpr const char* kRunColumns =
    "protocol,n_stations,seed,normalized_throughput,packet_throughput,collision_probability,"
    "convergence_slot,jain_index,slots,wall_time_us";

void write_summary_csv(std::ostream& out, std::span<const CellSummary> summary);
void write_runs_csv(std::ostream& out, std::span<const RunRecord> runs);

/// Writes summary.csv and runs.csv into `dir`, creating it if needed.
void write_sweep_outputs(const SweepResult& result, const std::filesystem::path& dir);

/// File name for one run's trace, e.g. "StickyECA-2_n10_seed3.trace".
std::string trace_file_name(const std::string& protocol, std::uint32_t n, std::uint64_t seed);

}  // namespace ecasim
