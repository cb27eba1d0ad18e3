#include "ecasim/protocol.hpp"

#include <algorithm>
#include <charconv>
#include <cstdlib>
#include <string>

#include <fmt/format.h>

#include "ecasim/error.hpp"

namespace ecasim {
namespace {

constexpr std::uint32_t kMaxScheduleExponent = 20;

bool is_power_of_two(std::uint64_t x) { return x != 0 && (x & (x - 1)) == 0; }

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
  return s;
}

// "Name(arg)" -> {"Name", "arg"}; "Name" -> {"Name", ""}.
std::pair<std::string_view, std::string_view> split_call(std::string_view text) {
  const auto open = text.find('(');
  if (open == std::string_view::npos) return {trim(text), {}};
  if (text.back() != ')') {
    throw ConfigError(fmt::format("malformed protocol '{}'", text));
  }
  return {trim(text.substr(0, open)), trim(text.substr(open + 1, text.size() - open - 2))};
}

void draw_random_backoff(StationState& state, ChoiceSource& choices) {
  state.backoff = choices.uniform_below(state.cw);
}

void eca_failure(const ProtocolConfig& cfg, StationState& state, ChoiceSource& choices) {
  state.mode = Mode::kRandom;
  state.consecutive_failures = 0;
  state.cw = std::min(state.cw * 2, cfg.cw_max);
  draw_random_backoff(state, choices);
}

void stick(const ProtocolConfig& cfg, StationState& state) {
  ++state.consecutive_failures;
  state.backoff = cfg.deterministic_backoff(state.schedule_exponent);
}

}  // namespace

ProtocolKind ProtocolKind::parse(std::string_view text) {
  const auto [head, arg] = split_call(trim(text));
  if (head == "CA" && arg.empty()) return ca();
  if (head == "ECA" && arg.empty()) return eca();
  if (head == "E2CA" && arg.empty()) return sticky(2);
  if (head == "AdaptiveECA" && arg.empty()) return adaptive();
  if (head == "StickyECA") {
    std::uint32_t k = 0;
    const auto [ptr, ec] = std::from_chars(arg.data(), arg.data() + arg.size(), k);
    if (arg.empty() || ec != std::errc{} || ptr != arg.data() + arg.size() || k < 1) {
      throw ConfigError(fmt::format("stickiness must be a positive integer in '{}'", text));
    }
    return sticky(k);
  }
  if (head == "ProbStickyECA") {
    if (arg.empty()) return prob_sticky(0.5);
    const std::string owned(arg);
    char* end = nullptr;
    const double p = std::strtod(owned.c_str(), &end);
    if (end != owned.c_str() + owned.size() || !(p >= 0.0 && p <= 1.0)) {
      throw ConfigError(fmt::format("p_stick must be a probability in '{}'", text));
    }
    return prob_sticky(p);
  }
  throw ConfigError(fmt::format("unknown protocol '{}'", text));
}

std::string ProtocolKind::name() const {
  switch (family) {
    case Family::kCA:
      return "CA";
    case Family::kECA:
      return "ECA";
    case Family::kStickyECA:
      return fmt::format("StickyECA({})", stickiness);
    case Family::kProbStickyECA:
      return fmt::format("ProbStickyECA({})", p_stick);
    case Family::kAdaptiveECA:
      return "AdaptiveECA";
  }
  return "?";
}

void ProtocolConfig::validate() const {
  if (!is_power_of_two(cw_min)) throw ConfigError("cw_min must be a power of two");
  if (!is_power_of_two(cw_max)) throw ConfigError("cw_max must be a power of two");
  if (cw_min > cw_max) throw ConfigError("cw_min must not exceed cw_max");
  if (!is_power_of_two(base_cycle)) throw ConfigError("c0 must be a power of two");
  if (max_schedule_exponent > kMaxScheduleExponent) {
    throw ConfigError(fmt::format("j_max must be at most {}", kMaxScheduleExponent));
  }
  if (adapt_window < 1 || adapt_window > 64) {
    throw ConfigError("adapt_window must be in [1, 64]");
  }
  if (!(adapt_threshold >= 0.0 && adapt_threshold <= 1.0)) {
    throw ConfigError("adapt_threshold must be in [0, 1]");
  }
  if (kind.family == ProtocolKind::Family::kStickyECA && kind.stickiness < 1) {
    throw ConfigError("stickiness must be at least 1");
  }
  if (kind.family == ProtocolKind::Family::kProbStickyECA &&
      !(kind.p_stick >= 0.0 && kind.p_stick <= 1.0)) {
    throw ConfigError("p_stick must be in [0, 1]");
  }
}

std::uint64_t ProtocolConfig::counter_bound() const {
  return std::max<std::uint64_t>(cw_max - 1, deterministic_backoff(max_schedule_exponent));
}

StationState initial_state(const ProtocolConfig& cfg, ChoiceSource& choices) {
  StationState state;
  state.cw = cfg.cw_min;
  draw_random_backoff(state, choices);
  return state;
}

TransmitDecision slot_tick(const ProtocolConfig& cfg, StationState& state) {
  if (state.awaiting_feedback) {
    throw ProtocolViolation("slot_tick called while a transmission awaits feedback");
  }
  if (state.backoff > 0) {
    --state.backoff;
    return {};
  }
  state.awaiting_feedback = true;
  return {true, cfg.aggregation(state.schedule_exponent)};
}

void on_feedback(const ProtocolConfig& cfg, StationState& state, Outcome outcome,
                 ChoiceSource& choices) {
  if (!state.awaiting_feedback) {
    throw ProtocolViolation("feedback received without a preceding transmission");
  }
  state.awaiting_feedback = false;
  state.recent.push(outcome, cfg.adapt_window);

  using Family = ProtocolKind::Family;
  const Family family = cfg.kind.family;

  if (family == Family::kCA) {
    state.cw = outcome == Outcome::kSuccess ? cfg.cw_min : std::min(state.cw * 2, cfg.cw_max);
    draw_random_backoff(state, choices);
    return;
  }

  if (outcome == Outcome::kSuccess) {
    // Adapt before re-arming so the new schedule takes effect immediately.
    if (family == Family::kAdaptiveECA) adapt_schedule(cfg, state);
    state.mode = Mode::kDeterministic;
    state.consecutive_failures = 0;
    state.cw = cfg.cw_min;
    state.backoff = cfg.deterministic_backoff(state.schedule_exponent);
    return;
  }

  if (state.mode == Mode::kDeterministic) {
    if (family == Family::kStickyECA && state.consecutive_failures + 1 < cfg.kind.stickiness) {
      stick(cfg, state);
      return;
    }
    if (family == Family::kProbStickyECA && choices.bernoulli(cfg.kind.p_stick)) {
      stick(cfg, state);
      return;
    }
  }
  eca_failure(cfg, state, choices);
}

bool adapt_schedule(const ProtocolConfig& cfg, StationState& state) {
  if (cfg.kind.family != ProtocolKind::Family::kAdaptiveECA) return false;
  if (state.recent.size() < cfg.adapt_window) return false;
  const double failure_rate =
      static_cast<double>(state.recent.failures()) / static_cast<double>(cfg.adapt_window);
  if (failure_rate > cfg.adapt_threshold && state.schedule_exponent < cfg.max_schedule_exponent) {
    ++state.schedule_exponent;
    state.recent.clear();
    return true;
  }
  if (cfg.allow_schedule_halving && state.recent.failures() == 0 && state.schedule_exponent > 0) {
    --state.schedule_exponent;
    state.recent.clear();
    return true;
  }
  return false;
}

void reenter(const ProtocolConfig& cfg, StationState& state, ChoiceSource& choices) {
  state.mode = Mode::kRandom;
  state.cw = cfg.cw_min;
  state.consecutive_failures = 0;
  state.awaiting_feedback = false;
  draw_random_backoff(state, choices);
}

Station::Station(const ProtocolConfig& cfg, std::uint64_t seed, std::uint32_t id)
    : cfg_(cfg), stream_(derive_seed(seed, StreamTag::kStation, id)), id_(id) {
  cfg_.validate();
  state_ = initial_state(cfg_, stream_);
}

Station::Station(const ProtocolConfig& cfg, const StationState& state, std::uint64_t seed,
                 std::uint32_t id)
    : cfg_(cfg), state_(state), stream_(derive_seed(seed, StreamTag::kStation, id)), id_(id) {
  cfg_.validate();
}

}  // namespace ecasim
