#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ecasim/protocol.hpp"
#include "ecasim/random.hpp"

namespace ecasim {

/// Slot durations in integer microseconds.
struct SlotDurations {
  std::int64_t sigma = 20;
  std::int64_t t_overhead = 200;
  std::int64_t t_payload = 1000;
  std::int64_t t_collision = 1200;

  void validate() const;
  std::int64_t success(std::uint32_t n_packets) const { return t_overhead + n_packets * t_payload; }

  friend bool operator==(const SlotDurations&, const SlotDurations&) = default;
};

struct TrafficModel {
  enum class Kind : std::uint8_t { kSaturated, kBernoulli, kSinglePacket };

  Kind kind = Kind::kSaturated;
  double arrival_prob = 0.0;          // kBernoulli: per station per slot
  std::uint32_t queue_capacity = 1;   // kBernoulli
  double join_rate = 0.0;             // kSinglePacket: per idle station per slot

  static TrafficModel saturated() { return {}; }
  static TrafficModel bernoulli(double p, std::uint32_t capacity) {
    return {Kind::kBernoulli, p, capacity, 0.0};
  }
  static TrafficModel single_packet(double join_rate) {
    return {Kind::kSinglePacket, 0.0, 1, join_rate};
  }

  void validate() const;
  std::string describe() const;
  bool saturated_traffic() const { return kind == Kind::kSaturated; }

  friend bool operator==(const TrafficModel&, const TrafficModel&) = default;
};

struct ImpairmentModel {
  double p_err = 0.0;
  double p_misalign = 0.0;

  void validate() const;
  bool ideal() const { return p_err == 0.0 && p_misalign == 0.0; }

  friend bool operator==(const ImpairmentModel&, const ImpairmentModel&) = default;
};

enum class SlotOutcome : std::uint8_t { kEmpty, kSuccess, kCollision, kChannelError };

/// Single-letter code used in trace files: E, S, C, X.
char outcome_code(SlotOutcome outcome);
SlotOutcome outcome_from_code(char code);

struct SlotRecord {
  std::uint64_t slot_index = 0;
  SlotOutcome outcome = SlotOutcome::kEmpty;
  std::vector<std::uint32_t> transmitters;  // ascending station ids
  std::uint32_t n_packets = 0;              // success only
  std::int64_t duration_us = 0;
  std::int64_t wall_time_start_us = 0;

  bool failed() const {
    return outcome == SlotOutcome::kCollision || outcome == SlotOutcome::kChannelError;
  }

  friend bool operator==(const SlotRecord&, const SlotRecord&) = default;
};

struct StationGroup {
  std::uint32_t count = 1;
  ProtocolConfig protocol;
  TrafficModel traffic;

  friend bool operator==(const StationGroup&, const StationGroup&) = default;
};

struct Horizon {
  enum class Unit : std::uint8_t { kSlots, kMicroseconds };

  Unit unit = Unit::kSlots;
  std::uint64_t value = 100000;

  static Horizon slots(std::uint64_t n) { return {Unit::kSlots, n}; }
  static Horizon microseconds(std::uint64_t us) { return {Unit::kMicroseconds, us}; }

  friend bool operator==(const Horizon&, const Horizon&) = default;
};

/// Everything one simulation run needs besides the seed.
struct RunConfig {
  std::vector<StationGroup> groups;
  SlotDurations durations;
  ImpairmentModel impairments;
  Horizon horizon;
  bool record_slots = true;
  // Stop as soon as absorption is certified (Monte-Carlo convergence studies).
  bool stop_at_convergence = false;

  /// Throws ConfigError.
  void validate() const;
  std::uint32_t station_count() const;
  bool all_saturated() const;

  /// Stable text form of every field that affects the trajectory.
  std::string canonical() const;
  /// FNV-1a 64 of canonical().
  std::uint64_t fingerprint() const;
};

struct StationCounters {
  std::uint64_t attempts = 0;
  std::uint64_t successes = 0;
  std::uint64_t failures = 0;
  std::uint64_t packets = 0;
  // Head-of-queue to success feedback, summed over successful accesses.
  std::int64_t access_delay_sum_us = 0;

  friend bool operator==(const StationCounters&, const StationCounters&) = default;
};

struct Trace {
  std::uint64_t fingerprint = 0;
  std::uint64_t seed = 0;
  std::vector<SlotRecord> slots;
  std::vector<StationCounters> counters;
  std::vector<StationState> final_states;
  std::uint64_t slot_count = 0;
  std::int64_t wall_time_us = 0;
  // Set only when absorption was tracked online (all-saturated runs).
  bool convergence_tracked = false;
  std::optional<std::uint64_t> convergence_slot;

  friend bool operator==(const Trace&, const Trace&) = default;
};

/// Slotted channel with its stations and traffic.
class World {
 public:
  World(const RunConfig& cfg, std::uint64_t seed);

  /// Saturated world with explicit station states (one per station, group
  /// order). Streams are still derived from `seed`.
  World(const RunConfig& cfg, std::span<const StationState> states, std::uint64_t seed);

  /// Advances one slot using the world's own streams.
  SlotRecord step();
  /// Advances one slot drawing every random choice from `choices`.
  SlotRecord step(ChoiceSource& choices);

  bool done() const;
  Trace run_to_horizon();

  /// Overwrites every station's protocol state; clears convergence tracking.
  void set_states(std::span<const StationState> states);
  std::vector<StationState> states() const;

  std::span<const Station> stations() const { return stations_; }
  std::span<const StationCounters> counters() const { return counters_; }
  bool is_active(std::size_t station) const { return nodes_[station].active; }
  std::uint64_t slot_index() const { return slot_index_; }
  std::int64_t wall_time_us() const { return wall_time_us_; }
  std::optional<std::uint64_t> convergence_slot() const { return convergence_slot_; }
  bool tracks_convergence() const { return track_convergence_; }
  const RunConfig& config() const { return cfg_; }

 private:
  struct Node {
    TrafficModel traffic;
    RandomStream traffic_stream;
    std::uint64_t queue = 0;
    bool active = false;
    std::int64_t head_of_line_us = 0;
  };

  SlotRecord step_impl(ChoiceSource* override);
  void apply_arrivals(ChoiceSource* override);
  void check_convergence();

  RunConfig cfg_;
  std::uint64_t seed_;
  std::vector<Station> stations_;
  std::vector<Node> nodes_;
  std::vector<StationCounters> counters_;
  RandomStream channel_stream_;
  std::uint64_t slot_index_ = 0;
  std::int64_t wall_time_us_ = 0;
  bool track_convergence_ = false;
  std::optional<std::uint64_t> convergence_slot_;
  std::vector<SlotRecord> records_;
  std::vector<std::uint32_t> transmitters_;  // scratch
};

/// Runs `cfg` from `seed` to its horizon. Throws ConfigError on invalid input.
Trace run(const RunConfig& cfg, std::uint64_t seed);

}  // namespace ecasim
