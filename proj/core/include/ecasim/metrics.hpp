#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ecasim/channel.hpp"

namespace ecasim {

struct StationMetrics {
  std::uint64_t packets = 0;
  std::uint64_t attempts = 0;
  double mean_access_delay_us = 0.0;  // NaN without a success
  double jitter_us = 0.0;             // stddev of inter-success times; NaN below 3 successes
};

struct MetricsReport {
  double normalized_throughput = 0.0;
  double packet_throughput = 0.0;       // packets per second
  double collision_probability = 0.0;   // failed attempts / attempts
  std::optional<std::uint64_t> convergence_slot;
  double jain_index = 0.0;
  std::vector<StationMetrics> per_station;
};

/// Payload airtime over total airtime. Throws UndefinedMetric on zero time.
double throughput(const Trace& trace, const SlotDurations& durations);

/// Delivered packets per simulated second. Throws UndefinedMetric on zero time.
double packet_throughput(const Trace& trace);

/// Per-attempt failure fraction (a k-station collision is k failed attempts).
/// Throws UndefinedMetric when nobody attempted.
double collision_probability(const Trace& trace);

/// Same, restricted to slots with index >= first_slot.
double collision_probability(const Trace& trace, std::uint64_t first_slot);

/// (sum x)^2 / (n * sum x^2). Throws UndefinedMetric for empty or all-zero input.
double jain_fairness(std::span<const std::uint64_t> allocations);

/// First slot after which absorption was certified, if tracked online.
/// Traces without state tracking fall back to detect_convergence_observational
/// when `fallback_hyper_cycle` is non-zero.
std::optional<std::uint64_t> detect_convergence(const Trace& trace,
                                                std::uint64_t fallback_hyper_cycle = 0);

/// First slot opening a run of 3 * hyper_cycle failure-free slots that
/// contains a success and lasts to the end of the trace.
std::optional<std::uint64_t> detect_convergence_observational(const Trace& trace,
                                                              std::uint64_t hyper_cycle);

/// Packets each station delivered in slots [first_slot, last_slot).
std::vector<std::uint64_t> packets_in_window(const Trace& trace, std::size_t n_stations,
                                             std::uint64_t first_slot, std::uint64_t last_slot);

/// Full report. Metrics that are undefined for this trace come out as NaN.
MetricsReport evaluate(const Trace& trace, const SlotDurations& durations);

/// Flat `key=value` lines; per-station keys are `station.<i>.<field>`.
std::string to_key_value(const MetricsReport& report);

}  // namespace ecasim
