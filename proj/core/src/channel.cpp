#include "ecasim/channel.hpp"

#include <algorithm>
#include <utility>

#include <fmt/format.h>

#include "ecasim/error.hpp"
#include "ecasim/oracle.hpp"

namespace ecasim {
namespace {

bool is_probability(double p) { return p >= 0.0 && p <= 1.0; }

std::uint64_t fnv1a64(std::string_view text) {
  std::uint64_t hash = 0xcbf29ce484222325ULL;
  for (const char c : text) {
    hash ^= static_cast<unsigned char>(c);
    hash *= 0x100000001b3ULL;
  }
  return hash;
}

}  // namespace

void SlotDurations::validate() const {
  if (sigma <= 0) throw ConfigError("sigma must be positive");
  if (t_overhead <= 0) throw ConfigError("t_overhead must be positive");
  if (t_payload <= 0) throw ConfigError("t_payload must be positive");
  if (t_collision <= 0) throw ConfigError("t_collision must be positive");
  if (sigma >= t_collision) throw ConfigError("sigma must be shorter than t_collision");
}

void TrafficModel::validate() const {
  switch (kind) {
    case Kind::kSaturated:
      return;
    case Kind::kBernoulli:
      if (!is_probability(arrival_prob)) throw ConfigError("arrival_prob must be in [0, 1]");
      if (queue_capacity < 1) throw ConfigError("queue_capacity must be at least 1");
      return;
    case Kind::kSinglePacket:
      if (!is_probability(join_rate)) throw ConfigError("join_rate must be in [0, 1]");
      return;
  }
}

std::string TrafficModel::describe() const {
  switch (kind) {
    case Kind::kSaturated:
      return "saturated";
    case Kind::kBernoulli:
      return fmt::format("bernoulli({},{})", arrival_prob, queue_capacity);
    case Kind::kSinglePacket:
      return fmt::format("single_packet({})", join_rate);
  }
  return "?";
}

void ImpairmentModel::validate() const {
  if (!is_probability(p_err)) throw ConfigError("p_err must be in [0, 1]");
  if (!is_probability(p_misalign)) throw ConfigError("p_misalign must be in [0, 1]");
}

char outcome_code(SlotOutcome outcome) {
  switch (outcome) {
    case SlotOutcome::kEmpty:
      return 'E';
    case SlotOutcome::kSuccess:
      return 'S';
    case SlotOutcome::kCollision:
      return 'C';
    case SlotOutcome::kChannelError:
      return 'X';
  }
  return '?';
}

SlotOutcome outcome_from_code(char code) {
  switch (code) {
    case 'E':
      return SlotOutcome::kEmpty;
    case 'S':
      return SlotOutcome::kSuccess;
    case 'C':
      return SlotOutcome::kCollision;
    case 'X':
      return SlotOutcome::kChannelError;
    default:
      throw ConfigError(fmt::format("unknown outcome code '{}'", code));
  }
}

void RunConfig::validate() const {
  if (groups.empty()) throw ConfigError("at least one station group is required");
  if (station_count() == 0) throw ConfigError("scenario has zero stations");
  for (const auto& group : groups) {
    group.protocol.validate();
    group.traffic.validate();
  }
  durations.validate();
  impairments.validate();
  if (horizon.value == 0) throw ConfigError("horizon must be positive");
}

std::uint32_t RunConfig::station_count() const {
  std::uint32_t n = 0;
  for (const auto& group : groups) n += group.count;
  return n;
}

bool RunConfig::all_saturated() const {
  return std::all_of(groups.begin(), groups.end(),
                     [](const StationGroup& g) { return g.traffic.saturated_traffic(); });
}

std::string RunConfig::canonical() const {
  std::string out;
  for (const auto& g : groups) {
    const auto& p = g.protocol;
    out += fmt::format(
        "group count={} kind={} cw_min={} cw_max={} c0={} j_max={} window={} threshold={} "
        "halving={} traffic={}\n",
        g.count, p.kind.name(), p.cw_min, p.cw_max, p.base_cycle, p.max_schedule_exponent,
        p.adapt_window, p.adapt_threshold, p.allow_schedule_halving, g.traffic.describe());
  }
  out += fmt::format("durations sigma={} overhead={} payload={} collision={}\n", durations.sigma,
                     durations.t_overhead, durations.t_payload, durations.t_collision);
  out += fmt::format("impairments p_err={} p_misalign={}\n", impairments.p_err,
                     impairments.p_misalign);
  out += fmt::format("horizon {}={}\n", horizon.unit == Horizon::Unit::kSlots ? "slots" : "us",
                     horizon.value);
  out += fmt::format("stop_at_convergence={}\n", stop_at_convergence);
  return out;
}

std::uint64_t RunConfig::fingerprint() const { return fnv1a64(canonical()); }

World::World(const RunConfig& cfg, std::uint64_t seed)
    : cfg_(cfg), seed_(seed), channel_stream_(derive_seed(seed, StreamTag::kChannel, 0)) {
  cfg_.validate();
  const std::uint32_t n = cfg_.station_count();
  stations_.reserve(n);
  nodes_.reserve(n);
  counters_.assign(n, StationCounters{});
  std::uint32_t id = 0;
  for (const auto& group : cfg_.groups) {
    for (std::uint32_t k = 0; k < group.count; ++k, ++id) {
      stations_.emplace_back(group.protocol, seed, id);
      Node node{group.traffic, RandomStream(derive_seed(seed, StreamTag::kTraffic, id))};
      node.active = group.traffic.saturated_traffic();
      nodes_.push_back(std::move(node));
    }
  }
  track_convergence_ = cfg_.all_saturated();
}

World::World(const RunConfig& cfg, std::span<const StationState> states, std::uint64_t seed)
    : World(cfg, seed) {
  if (!cfg_.all_saturated()) {
    throw ConfigError("explicit station states require saturated traffic");
  }
  set_states(states);
}

void World::set_states(std::span<const StationState> states) {
  if (states.size() != stations_.size()) {
    throw ConfigError(fmt::format("expected {} station states, got {}", stations_.size(),
                                  states.size()));
  }
  for (std::size_t i = 0; i < states.size(); ++i) stations_[i].state() = states[i];
  convergence_slot_.reset();
}

std::vector<StationState> World::states() const {
  std::vector<StationState> out;
  out.reserve(stations_.size());
  for (const auto& s : stations_) out.push_back(s.state());
  return out;
}

SlotRecord World::step() { return step_impl(nullptr); }

SlotRecord World::step(ChoiceSource& choices) { return step_impl(&choices); }

bool World::done() const {
  if (cfg_.stop_at_convergence && convergence_slot_) return true;
  if (cfg_.horizon.unit == Horizon::Unit::kSlots) return slot_index_ >= cfg_.horizon.value;
  return wall_time_us_ >= static_cast<std::int64_t>(cfg_.horizon.value);
}

void World::apply_arrivals(ChoiceSource* override) {
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    Node& node = nodes_[i];
    if (node.traffic.kind == TrafficModel::Kind::kSaturated) continue;
    ChoiceSource& arrivals = override ? *override : node.traffic_stream;
    bool arrived = false;
    if (node.traffic.kind == TrafficModel::Kind::kBernoulli) {
      if (arrivals.bernoulli(node.traffic.arrival_prob) && node.queue < node.traffic.queue_capacity) {
        ++node.queue;
        arrived = true;
      }
    } else if (!node.active && arrivals.bernoulli(node.traffic.join_rate)) {
      node.queue = 1;
      arrived = true;
    }
    if (arrived && !node.active) {
      node.active = true;
      node.head_of_line_us = wall_time_us_;
      if (override) {
        stations_[i].reenter(*override);
      } else {
        stations_[i].reenter();
      }
    }
  }
}

SlotRecord World::step_impl(ChoiceSource* override) {
  apply_arrivals(override);

  transmitters_.clear();
  std::uint32_t requested_packets = 0;
  for (std::size_t i = 0; i < stations_.size(); ++i) {
    if (!nodes_[i].active) continue;
    const TransmitDecision decision = stations_[i].slot_tick();
    if (decision.transmit) {
      transmitters_.push_back(static_cast<std::uint32_t>(i));
      requested_packets = decision.n_packets;
    }
  }

  auto feedback = [&](std::uint32_t i, Outcome outcome) {
    if (override) {
      stations_[i].on_feedback(outcome, *override);
    } else {
      stations_[i].on_feedback(outcome);
    }
  };

  SlotRecord rec;
  rec.slot_index = slot_index_;
  rec.wall_time_start_us = wall_time_us_;
  rec.transmitters = transmitters_;
  const SlotDurations& d = cfg_.durations;

  if (transmitters_.empty()) {
    rec.outcome = SlotOutcome::kEmpty;
    rec.duration_us = d.sigma;
  } else if (transmitters_.size() >= 2) {
    rec.outcome = SlotOutcome::kCollision;
    rec.duration_us = d.t_collision;
    for (const auto i : transmitters_) {
      ++counters_[i].attempts;
      ++counters_[i].failures;
      feedback(i, Outcome::kFailure);
    }
  } else {
    const std::uint32_t i = transmitters_.front();
    Node& node = nodes_[i];
    ++counters_[i].attempts;
    ChoiceSource& channel = override ? *override : channel_stream_;
    const bool deterministic = stations_[i].state().mode == Mode::kDeterministic;
    if (channel.bernoulli(cfg_.impairments.p_err)) {
      rec.outcome = SlotOutcome::kChannelError;
    } else if (deterministic && channel.bernoulli(cfg_.impairments.p_misalign)) {
      rec.outcome = SlotOutcome::kCollision;
    } else {
      rec.outcome = SlotOutcome::kSuccess;
    }

    if (rec.outcome == SlotOutcome::kSuccess) {
      std::uint32_t n = requested_packets;
      const bool saturated = node.traffic.saturated_traffic();
      if (!saturated) {
        n = static_cast<std::uint32_t>(std::min<std::uint64_t>(n, node.queue));
        node.queue -= n;
      }
      rec.n_packets = n;
      rec.duration_us = d.success(n);
      const std::int64_t end = wall_time_us_ + rec.duration_us;
      ++counters_[i].successes;
      counters_[i].packets += n;
      counters_[i].access_delay_sum_us += end - node.head_of_line_us;
      node.head_of_line_us = end;
      feedback(i, Outcome::kSuccess);
      if (!saturated && node.queue == 0) node.active = false;
    } else {
      rec.duration_us = d.t_collision;
      ++counters_[i].failures;
      feedback(i, Outcome::kFailure);
    }
  }

  wall_time_us_ += rec.duration_us;
  ++slot_index_;
  if (track_convergence_ && !convergence_slot_) check_convergence();
  if (cfg_.record_slots) records_.push_back(rec);
  return rec;
}

void World::check_convergence() {
  for (const auto& s : stations_) {
    if (s.state().mode != Mode::kDeterministic) return;
  }
  const TrafficModel saturated = TrafficModel::saturated();
  if (certify(stations_, saturated).certified) convergence_slot_ = slot_index_ - 1;
}

Trace World::run_to_horizon() {
  while (!done()) step();
  Trace trace;
  trace.fingerprint = cfg_.fingerprint();
  trace.seed = seed_;
  trace.slots = std::move(records_);
  records_.clear();
  trace.counters = counters_;
  trace.final_states = states();
  trace.slot_count = slot_index_;
  trace.wall_time_us = wall_time_us_;
  trace.convergence_tracked = track_convergence_;
  trace.convergence_slot = convergence_slot_;
  return trace;
}

Trace run(const RunConfig& cfg, std::uint64_t seed) {
  World world(cfg, seed);
  return world.run_to_horizon();
}

}  // namespace ecasim
