#pragma once

#include <bit>
#include <compare>
#include <cstdint>
#include <string>
#include <string_view>

#include "ecasim/random.hpp"

namespace ecasim {

enum class Mode : std::uint8_t { kRandom, kDeterministic };
enum class Outcome : std::uint8_t { kSuccess, kFailure };

/// Which backoff rule a station follows.
struct ProtocolKind {
  enum class Family : std::uint8_t { kCA, kECA, kStickyECA, kProbStickyECA, kAdaptiveECA };

  Family family = Family::kECA;
  std::uint32_t stickiness = 0;  // kStickyECA only
  double p_stick = 0.0;          // kProbStickyECA only

  static ProtocolKind ca() { return {Family::kCA}; }
  static ProtocolKind eca() { return {Family::kECA}; }
  static ProtocolKind sticky(std::uint32_t k) { return {Family::kStickyECA, k}; }
  static ProtocolKind prob_sticky(double p) { return {Family::kProbStickyECA, 0, p}; }
  static ProtocolKind adaptive() { return {Family::kAdaptiveECA}; }

  /// Parses "CA", "ECA", "StickyECA(k)", "E2CA", "ProbStickyECA(p)",
  /// "ProbStickyECA" (p = 0.5) and "AdaptiveECA". Throws ConfigError.
  static ProtocolKind parse(std::string_view text);

  /// Canonical name, the inverse of parse().
  std::string name() const;

  bool is_eca_family() const { return family != Family::kCA; }

  friend bool operator==(const ProtocolKind&, const ProtocolKind&) = default;
};

struct ProtocolConfig {
  std::uint32_t cw_min = 16;
  std::uint32_t cw_max = 1024;
  std::uint32_t base_cycle = 16;  // C0; the deterministic cycle is C0 * 2^j slots
  std::uint32_t max_schedule_exponent = 3;
  std::uint32_t adapt_window = 8;  // own attempts, at most 64
  double adapt_threshold = 0.5;
  // Off by default: shrinking the schedule has no agreed rule.
  bool allow_schedule_halving = false;
  ProtocolKind kind = ProtocolKind::eca();

  /// Throws ConfigError naming the offending field.
  void validate() const;

  /// D(j) = C0 * 2^j - 1.
  std::uint64_t deterministic_backoff(std::uint32_t j) const {
    return (std::uint64_t{base_cycle} << j) - 1;
  }
  std::uint64_t cycle_length(std::uint32_t j) const { return std::uint64_t{base_cycle} << j; }
  /// A(j) = 2^j packets per access.
  std::uint32_t aggregation(std::uint32_t j) const { return std::uint32_t{1} << j; }

  /// Upper bound on any backoff counter this config can produce.
  std::uint64_t counter_bound() const;

  friend bool operator==(const ProtocolConfig&, const ProtocolConfig&) = default;
};

/// Last-W attempt outcomes of one station, newest in bit 0 (1 = failure).
class OutcomeWindow {
 public:
  void push(Outcome outcome, std::uint32_t capacity) {
    const std::uint64_t mask = capacity >= 64 ? ~std::uint64_t{0} : (std::uint64_t{1} << capacity) - 1;
    bits_ = ((bits_ << 1) | (outcome == Outcome::kFailure ? 1u : 0u)) & mask;
    if (size_ < capacity) ++size_;
  }
  void clear() { bits_ = 0, size_ = 0; }

  std::uint32_t size() const { return size_; }
  std::uint32_t failures() const { return static_cast<std::uint32_t>(std::popcount(bits_)); }

  auto operator<=>(const OutcomeWindow&) const = default;

 private:
  std::uint64_t bits_ = 0;
  std::uint32_t size_ = 0;
};

/// Pure per-station protocol state. The random stream lives in Station so the
/// exact oracle can key on this struct alone.
struct StationState {
  std::uint64_t backoff = 0;
  std::uint32_t cw = 0;
  Mode mode = Mode::kRandom;
  std::uint32_t consecutive_failures = 0;
  std::uint32_t schedule_exponent = 0;
  OutcomeWindow recent;
  bool awaiting_feedback = false;

  auto operator<=>(const StationState&) const = default;
};

struct TransmitDecision {
  bool transmit = false;
  std::uint32_t n_packets = 0;
};

// Engine transitions. All randomness comes from `choices`.

StationState initial_state(const ProtocolConfig& cfg, ChoiceSource& choices);

/// One channel slot: decrement, or transmit when the counter is already zero.
TransmitDecision slot_tick(const ProtocolConfig& cfg, StationState& state);

/// Re-arms the counter after the station's own transmission.
/// Throws ProtocolViolation if the station did not just transmit.
void on_feedback(const ProtocolConfig& cfg, StationState& state, Outcome outcome,
                 ChoiceSource& choices);

/// Doubles the schedule when the windowed failure rate exceeds the threshold.
/// Returns true if the exponent changed.
bool adapt_schedule(const ProtocolConfig& cfg, StationState& state);

/// Station re-joins contention after idling with an empty queue: fresh random
/// backoff from cw_min. The schedule exponent and window are kept.
void reenter(const ProtocolConfig& cfg, StationState& state, ChoiceSource& choices);

/// A station: config, state and its own named random stream.
class Station {
 public:
  /// new_station: validated config, Random mode, b ~ U[0, cw_min - 1].
  Station(const ProtocolConfig& cfg, std::uint64_t seed, std::uint32_t id);

  /// Station with an explicit state; the stream is still derived from (seed, id).
  Station(const ProtocolConfig& cfg, const StationState& state, std::uint64_t seed,
          std::uint32_t id);

  TransmitDecision slot_tick() { return ecasim::slot_tick(cfg_, state_); }
  void on_feedback(Outcome outcome) { ecasim::on_feedback(cfg_, state_, outcome, stream_); }
  void on_feedback(Outcome outcome, ChoiceSource& choices) {
    ecasim::on_feedback(cfg_, state_, outcome, choices);
  }
  void reenter() { ecasim::reenter(cfg_, state_, stream_); }
  void reenter(ChoiceSource& choices) { ecasim::reenter(cfg_, state_, choices); }

  const ProtocolConfig& config() const { return cfg_; }
  const StationState& state() const { return state_; }
  StationState& state() { return state_; }
  std::uint32_t id() const { return id_; }
  RandomStream& stream() { return stream_; }

  friend bool operator==(const Station&, const Station&) = default;

 private:
  ProtocolConfig cfg_;
  StationState state_;
  RandomStream stream_;
  std::uint32_t id_ = 0;
};

}  // namespace ecasim
