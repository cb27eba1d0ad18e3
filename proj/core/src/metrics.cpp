#include "ecasim/metrics.hpp"

#include <cmath>
#include <limits>

#include <fmt/format.h>

#include "ecasim/error.hpp"

namespace ecasim {
namespace {

__extension__ using uint128 = unsigned __int128;

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::int64_t total_time(const Trace& trace) {
  if (trace.slots.empty()) return trace.wall_time_us;
  std::int64_t sum = 0;
  for (const auto& rec : trace.slots) sum += rec.duration_us;
  return sum;
}

std::uint64_t total_packets(const Trace& trace) {
  std::uint64_t packets = 0;
  if (trace.slots.empty()) {
    for (const auto& c : trace.counters) packets += c.packets;
    return packets;
  }
  for (const auto& rec : trace.slots) {
    if (rec.outcome == SlotOutcome::kSuccess) packets += rec.n_packets;
  }
  return packets;
}

template <class F>
double or_nan(F&& f) {
  try {
    return f();
  } catch (const UndefinedMetric&) {
    return kNaN;
  }
}

std::string format_optional(const std::optional<std::uint64_t>& v) {
  return v ? std::to_string(*v) : std::string("none");
}

}  // namespace

double throughput(const Trace& trace, const SlotDurations& durations) {
  const std::int64_t time = total_time(trace);
  if (time <= 0) throw UndefinedMetric("throughput undefined for zero total time");
  const auto payload = static_cast<double>(total_packets(trace)) * static_cast<double>(durations.t_payload);
  return payload / static_cast<double>(time);
}

double packet_throughput(const Trace& trace) {
  const std::int64_t time = total_time(trace);
  if (time <= 0) throw UndefinedMetric("packet throughput undefined for zero total time");
  return static_cast<double>(total_packets(trace)) * 1e6 / static_cast<double>(time);
}

double collision_probability(const Trace& trace, std::uint64_t first_slot) {
  std::uint64_t attempts = 0;
  std::uint64_t failures = 0;
  if (trace.slots.empty() && first_slot == 0) {
    for (const auto& c : trace.counters) {
      attempts += c.attempts;
      failures += c.failures;
    }
  }
  for (const auto& rec : trace.slots) {
    if (rec.slot_index < first_slot || rec.outcome == SlotOutcome::kEmpty) continue;
    attempts += rec.transmitters.size();
    if (rec.failed()) failures += rec.transmitters.size();
  }
  if (attempts == 0) throw UndefinedMetric("collision probability undefined without attempts");
  return static_cast<double>(failures) / static_cast<double>(attempts);
}

double collision_probability(const Trace& trace) { return collision_probability(trace, 0); }

double jain_fairness(std::span<const std::uint64_t> allocations) {
  if (allocations.empty()) throw UndefinedMetric("jain index undefined for zero stations");
  // Integer sums keep the equal-allocation case exactly 1.0.
  uint128 sum = 0;
  uint128 sum_sq = 0;
  for (const auto x : allocations) {
    sum += x;
    sum_sq += static_cast<uint128>(x) * x;
  }
  if (sum == 0) throw UndefinedMetric("jain index undefined for an all-zero allocation");
  const uint128 numerator = sum * sum;
  const uint128 denominator = sum_sq * allocations.size();
  if (numerator == denominator) return 1.0;
  return static_cast<double>(static_cast<long double>(numerator) /
                             static_cast<long double>(denominator));
}

std::optional<std::uint64_t> detect_convergence(const Trace& trace,
                                                std::uint64_t fallback_hyper_cycle) {
  if (trace.convergence_tracked) return trace.convergence_slot;
  if (fallback_hyper_cycle == 0) return std::nullopt;
  return detect_convergence_observational(trace, fallback_hyper_cycle);
}

std::optional<std::uint64_t> detect_convergence_observational(const Trace& trace,
                                                              std::uint64_t hyper_cycle) {
  if (trace.slots.empty() || hyper_cycle == 0) return std::nullopt;
  // Start of the failure-free suffix.
  std::size_t start = trace.slots.size();
  bool any_success = false;
  while (start > 0 && !trace.slots[start - 1].failed()) {
    --start;
    any_success |= trace.slots[start].outcome == SlotOutcome::kSuccess;
  }
  if (!any_success || trace.slots.size() - start < 3 * hyper_cycle) return std::nullopt;
  return trace.slots[start].slot_index;
}

std::vector<std::uint64_t> packets_in_window(const Trace& trace, std::size_t n_stations,
                                             std::uint64_t first_slot, std::uint64_t last_slot) {
  std::vector<std::uint64_t> packets(n_stations, 0);
  for (const auto& rec : trace.slots) {
    if (rec.slot_index < first_slot || rec.slot_index >= last_slot) continue;
    if (rec.outcome == SlotOutcome::kSuccess) packets.at(rec.transmitters.front()) += rec.n_packets;
  }
  return packets;
}

MetricsReport evaluate(const Trace& trace, const SlotDurations& durations) {
  MetricsReport report;
  report.normalized_throughput = or_nan([&] { return throughput(trace, durations); });
  report.packet_throughput = or_nan([&] { return packet_throughput(trace); });
  report.collision_probability = or_nan([&] { return collision_probability(trace); });
  report.convergence_slot = detect_convergence(trace);

  const std::size_t n = trace.counters.size();
  std::vector<std::uint64_t> packets(n);
  for (std::size_t i = 0; i < n; ++i) packets[i] = trace.counters[i].packets;
  report.jain_index = or_nan([&] { return jain_fairness(packets); });

  // Inter-success gaps from success slot end times.
  std::vector<std::int64_t> last_end(n, -1);
  std::vector<double> gap_sum(n, 0.0);
  std::vector<double> gap_sq(n, 0.0);
  std::vector<std::uint64_t> gaps(n, 0);
  for (const auto& rec : trace.slots) {
    if (rec.outcome != SlotOutcome::kSuccess) continue;
    const std::uint32_t i = rec.transmitters.front();
    const std::int64_t end = rec.wall_time_start_us + rec.duration_us;
    if (last_end[i] >= 0) {
      const auto gap = static_cast<double>(end - last_end[i]);
      gap_sum[i] += gap;
      gap_sq[i] += gap * gap;
      ++gaps[i];
    }
    last_end[i] = end;
  }

  report.per_station.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const StationCounters& c = trace.counters[i];
    StationMetrics& m = report.per_station[i];
    m.packets = c.packets;
    m.attempts = c.attempts;
    m.mean_access_delay_us = c.successes > 0 ? static_cast<double>(c.access_delay_sum_us) /
                                                   static_cast<double>(c.successes)
                                             : kNaN;
    if (gaps[i] >= 2) {
      const double k = static_cast<double>(gaps[i]);
      const double mean = gap_sum[i] / k;
      const double var = std::max(0.0, (gap_sq[i] - k * mean * mean) / (k - 1.0));
      m.jitter_us = std::sqrt(var);
    } else {
      m.jitter_us = kNaN;
    }
  }
  return report;
}

std::string to_key_value(const MetricsReport& report) {
  std::string out;
  out += fmt::format("normalized_throughput={:.9g}\n", report.normalized_throughput);
  out += fmt::format("packet_throughput={:.9g}\n", report.packet_throughput);
  out += fmt::format("collision_probability={:.9g}\n", report.collision_probability);
  out += fmt::format("convergence_slot={}\n", format_optional(report.convergence_slot));
  out += fmt::format("jain_index={:.9g}\n", report.jain_index);
  for (std::size_t i = 0; i < report.per_station.size(); ++i) {
    const StationMetrics& m = report.per_station[i];
    out += fmt::format("station.{}.packets={}\n", i, m.packets);
    out += fmt::format("station.{}.attempts={}\n", i, m.attempts);
    out += fmt::format("station.{}.mean_access_delay_us={:.9g}\n", i, m.mean_access_delay_us);
    out += fmt::format("station.{}.jitter_us={:.9g}\n", i, m.jitter_us);
  }
  return out;
}

}  // namespace ecasim
