#include "ecasim/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <ostream>
#include <set>
#include <tuple>

#include <fmt/format.h>
#include <fmt/ostream.h>

#include "ecasim/error.hpp"

namespace ecasim {
namespace {

using JointState = std::vector<StationState>;

// Deterministic paths must never consult randomness; flags any attempt.
class ForbiddenChoices final : public ChoiceSource {
 public:
  std::uint64_t uniform_below(std::uint64_t n) override {
    if (n > 1) consulted_ = true;
    return 0;
  }
  bool bernoulli(double p) override {
    if (p <= 0.0) return false;
    if (p >= 1.0) return true;
    consulted_ = true;
    return false;
  }
  bool consulted() const { return consulted_; }

 private:
  bool consulted_ = false;
};

// Replays a prefix of enumerated choices. The first choice beyond the prefix
// is answered with 0 and its arity recorded, so the caller can branch on it.
class ScriptedChoices final : public ChoiceSource {
 public:
  explicit ScriptedChoices(std::span<const std::uint32_t> script) : script_(script) {}

  std::uint64_t uniform_below(std::uint64_t n) override {
    if (n <= 1) return 0;
    const std::uint32_t k = take(static_cast<std::uint32_t>(n));
    if (!exhausted_) probability_ /= static_cast<long double>(n);
    return k;
  }

  bool bernoulli(double p) override {
    if (p <= 0.0) return false;
    if (p >= 1.0) return true;
    const bool hit = take(2) == 1;
    if (!exhausted_) probability_ *= hit ? static_cast<long double>(p) : 1.0L - p;
    return hit;
  }

  bool exhausted() const { return exhausted_; }
  std::uint32_t pending_arity() const { return pending_arity_; }
  long double probability() const { return probability_; }

 private:
  std::uint32_t take(std::uint32_t arity) {
    if (exhausted_) return 0;
    if (pos_ < script_.size()) return script_[pos_++];
    exhausted_ = true;
    pending_arity_ = arity;
    return 0;
  }

  std::span<const std::uint32_t> script_;
  std::size_t pos_ = 0;
  bool exhausted_ = false;
  std::uint32_t pending_arity_ = 0;
  long double probability_ = 1.0L;
};

// Depth-first expansion over every choice sequence `body` may request.
template <class Body, class Emit>
void enumerate_choices(Body&& body, Emit&& emit) {
  std::vector<std::vector<std::uint32_t>> stack{{}};
  while (!stack.empty()) {
    std::vector<std::uint32_t> script = std::move(stack.back());
    stack.pop_back();
    ScriptedChoices choices(script);
    body(choices);
    if (choices.exhausted()) {
      for (std::uint32_t k = choices.pending_arity(); k-- > 0;) {
        auto longer = script;
        longer.push_back(k);
        stack.push_back(std::move(longer));
      }
    } else {
      emit(choices.probability());
    }
  }
}

// No exponent change can ever fire again if only successes follow.
bool schedule_stable(const ProtocolConfig& cfg, const StationState& state) {
  if (cfg.kind.family != ProtocolKind::Family::kAdaptiveECA) return true;
  if (cfg.allow_schedule_halving && state.schedule_exponent > 0) return false;
  if (state.schedule_exponent >= cfg.max_schedule_exponent) return true;
  const double rate =
      static_cast<double>(state.recent.failures()) / static_cast<double>(cfg.adapt_window);
  return rate <= cfg.adapt_threshold;
}

template <class ConfigAt>
ConvergenceCertificate certify_impl(ConfigAt&& config_at, std::span<const StationState> states) {
  ConvergenceCertificate cert;
  if (states.empty()) return cert;

  std::uint64_t hyper = 1;
  for (std::size_t i = 0; i < states.size(); ++i) {
    const std::uint64_t cycle = config_at(i).cycle_length(states[i].schedule_exponent);
    hyper = std::lcm(hyper, cycle);
    cert.offsets.push_back(states[i].backoff % cycle);
  }
  cert.hyper_cycle = hyper;

  for (std::size_t i = 0; i < states.size(); ++i) {
    const StationState& s = states[i];
    if (s.mode != Mode::kDeterministic || s.awaiting_feedback) return cert;
    if (!schedule_stable(config_at(i), s)) return cert;
  }

  JointState sim(states.begin(), states.end());
  ForbiddenChoices none;
  for (std::uint64_t t = 0; t < hyper; ++t) {
    std::size_t transmitter = 0;
    int count = 0;
    for (std::size_t i = 0; i < sim.size(); ++i) {
      if (slot_tick(config_at(i), sim[i]).transmit) {
        ++count;
        transmitter = i;
      }
    }
    if (count >= 2) return cert;
    if (count == 1) {
      on_feedback(config_at(transmitter), sim[transmitter], Outcome::kSuccess, none);
      if (none.consulted()) return cert;
    }
  }
  for (std::size_t i = 0; i < sim.size(); ++i) {
    if (sim[i].mode != Mode::kDeterministic ||
        sim[i].schedule_exponent != states[i].schedule_exponent) {
      return cert;
    }
  }
  cert.certified = true;
  return cert;
}

std::uint64_t saturating_mul(std::uint64_t a, std::uint64_t b) {
  if (a != 0 && b > std::numeric_limits<std::uint64_t>::max() / a) {
    return std::numeric_limits<std::uint64_t>::max();
  }
  return a * b;
}

void validate_query(const ExactQuery& q) {
  if (q.n_stations < 1 || q.n_stations > kMaxExactStations) {
    throw ConfigError(fmt::format("n_stations must be in [1, {}]", kMaxExactStations));
  }
  q.protocol.validate();
  if (q.protocol.cw_min > kMaxExactCwMin) {
    throw ConfigError(fmt::format("cw_min must be at most {} for exact enumeration", kMaxExactCwMin));
  }
  if (q.protocol.base_cycle > kMaxExactBaseCycle) {
    throw ConfigError(fmt::format("c0 must be at most {} for exact enumeration", kMaxExactBaseCycle));
  }
  if (q.horizon_slots == 0) throw ConfigError("horizon must be positive");
  const std::uint64_t space = estimated_state_space(q);
  if (space > kMaxExactStateSpace) {
    throw TooLarge(fmt::format("state space estimate {} exceeds {}", space, kMaxExactStateSpace));
  }
}

RunConfig toy_run_config(const ExactQuery& q) {
  RunConfig rc;
  rc.groups.push_back({q.n_stations, q.protocol, TrafficModel::saturated()});
  rc.horizon = Horizon::slots(std::numeric_limits<std::uint64_t>::max());
  rc.record_slots = false;
  return rc;
}

// Only the adaptive rule reads the outcome window. Dropping it elsewhere
// merges states that differ in nothing the future depends on.
void canonicalize(const ProtocolConfig& cfg, JointState& states) {
  if (cfg.kind.family == ProtocolKind::Family::kAdaptiveECA) return;
  for (auto& s : states) s.recent.clear();
}

// Transition cache for the time-homogeneous chain.
class Expander {
 public:
  explicit Expander(const ExactQuery& q)
      : query_(q), world_(toy_run_config(q), JointState(q.n_stations, seed_state(q)), 0) {}

  const std::vector<Transition>& successors(const JointState& states) {
    if (auto it = cache_.find(states); it != cache_.end()) return it->second;
    std::vector<Transition> out;
    enumerate_choices(
        [&](ChoiceSource& choices) {
          world_.set_states(states);
          last_ = world_.step(choices);
        },
        [&](long double p) {
          JointState next = world_.states();
          canonicalize(query_.protocol, next);
          out.push_back({std::move(next), p, last_.failed()});
        });
    // Merge identical successors so downstream maps stay small.
    std::sort(out.begin(), out.end(), [](const Transition& a, const Transition& b) {
      return std::tie(a.next, a.collision) < std::tie(b.next, b.collision);
    });
    std::vector<Transition> merged;
    for (auto& t : out) {
      if (!merged.empty() && merged.back().next == t.next && merged.back().collision == t.collision) {
        merged.back().probability += t.probability;
      } else {
        merged.push_back(std::move(t));
      }
    }
    cached_transitions_ += merged.size();
    if (cached_transitions_ > kCacheLimit) {
      scratch_ = std::move(merged);
      return scratch_;
    }
    return cache_.emplace(states, std::move(merged)).first->second;
  }

  std::vector<std::pair<JointState, long double>> initial() const {
    std::vector<std::pair<JointState, long double>> out;
    enumerate_choices(
        [&](ChoiceSource& choices) {
          initial_scratch_.clear();
          for (std::uint32_t i = 0; i < query_.n_stations; ++i) {
            initial_scratch_.push_back(initial_state(query_.protocol, choices));
          }
        },
        [&](long double p) { out.emplace_back(initial_scratch_, p); });
    return out;
  }

 private:
  static constexpr std::uint64_t kCacheLimit = 4'000'000;

  static StationState seed_state(const ExactQuery& q) {
    StationState s;
    s.cw = q.protocol.cw_min;
    return s;
  }

  ExactQuery query_;
  World world_;
  SlotRecord last_;
  std::map<JointState, std::vector<Transition>> cache_;
  std::vector<Transition> scratch_;
  std::uint64_t cached_transitions_ = 0;
  mutable JointState initial_scratch_;
};

}  // namespace

ConvergenceCertificate certify(std::span<const Station> stations,
                               std::span<const TrafficModel> traffic) {
  if (traffic.size() != 1 && traffic.size() != stations.size()) {
    throw ConfigError("traffic must be given once or per station");
  }
  for (const auto& t : traffic) {
    if (!t.saturated_traffic()) {
      throw NotCertifiable("absorption is only defined under saturated traffic");
    }
  }
  JointState states;
  states.reserve(stations.size());
  for (const auto& s : stations) states.push_back(s.state());
  return certify_impl([&](std::size_t i) -> const ProtocolConfig& { return stations[i].config(); },
                      states);
}

ConvergenceCertificate certify(std::span<const Station> stations, const TrafficModel& traffic) {
  return certify(stations, std::span<const TrafficModel>(&traffic, 1));
}

ConvergenceCertificate certify_states(const ProtocolConfig& cfg,
                                      std::span<const StationState> states) {
  return certify_impl([&](std::size_t) -> const ProtocolConfig& { return cfg; }, states);
}

std::uint64_t estimated_state_space(const ExactQuery& q) {
  const ProtocolConfig& p = q.protocol;
  using Family = ProtocolKind::Family;
  std::uint64_t random_states = 0;
  for (std::uint64_t cw = p.cw_min; cw <= p.cw_max; cw *= 2) random_states += cw;

  std::uint64_t deterministic_states = 0;
  const std::uint32_t top_exponent = p.kind.family == Family::kAdaptiveECA ? p.max_schedule_exponent : 0;
  if (p.kind.is_eca_family()) {
    for (std::uint32_t j = 0; j <= top_exponent; ++j) deterministic_states += p.cycle_length(j);
  }

  std::uint64_t per_station = 0;
  switch (p.kind.family) {
    case Family::kCA:
    case Family::kECA:
      per_station = random_states + deterministic_states;
      break;
    case Family::kStickyECA:
      per_station = random_states + saturating_mul(deterministic_states, p.kind.stickiness);
      break;
    case Family::kProbStickyECA:
      // The failure count is unbounded in principle; the horizon caps it.
      per_station =
          random_states + saturating_mul(deterministic_states, q.horizon_slots + 1);
      break;
    case Family::kAdaptiveECA: {
      const std::uint64_t windows = saturating_mul(p.adapt_window + 1, std::uint64_t{1} << std::min(p.adapt_window, 40u));
      per_station = saturating_mul(
          saturating_mul(random_states, top_exponent + 1) + deterministic_states, windows);
      break;
    }
  }
  std::uint64_t total = 1;
  for (std::uint32_t i = 0; i < q.n_stations; ++i) total = saturating_mul(total, per_station);
  return total;
}

ConvergenceDistribution exact_convergence_distribution(const ExactQuery& query) {
  validate_query(query);
  Expander expander(query);
  ConvergenceDistribution dist;
  dist.mass.assign(query.horizon_slots, 0.0L);

  std::map<JointState, long double> frontier;
  for (auto& [state, p] : expander.initial()) frontier[state] += p;

  std::map<JointState, bool> certified_cache;
  auto is_certified = [&](const JointState& s) {
    if (auto it = certified_cache.find(s); it != certified_cache.end()) return it->second;
    const bool ok = certify_states(query.protocol, s).certified;
    certified_cache.emplace(s, ok);
    return ok;
  };

  for (std::uint64_t t = 0; t < query.horizon_slots && !frontier.empty(); ++t) {
    dist.peak_frontier = std::max<std::uint64_t>(dist.peak_frontier, frontier.size());
    std::map<JointState, long double> next;
    for (const auto& [state, p] : frontier) {
      for (const Transition& tr : expander.successors(state)) {
        const long double mass = p * tr.probability;
        if (is_certified(tr.next)) {
          dist.mass[t] += mass;
        } else {
          next[tr.next] += mass;
        }
      }
    }
    frontier = std::move(next);
  }
  for (const auto& [state, p] : frontier) dist.deficit += p;
  return dist;
}

std::vector<Transition> enumerate_successors(const ExactQuery& query,
                                             std::span<const StationState> states) {
  validate_query(query);
  Expander expander(query);
  return expander.successors(JointState(states.begin(), states.end()));
}

std::vector<JointState> reachable_states(const ExactQuery& query) {
  validate_query(query);
  Expander expander(query);
  std::set<JointState> seen;
  std::vector<JointState> layer;
  for (auto& [state, p] : expander.initial()) {
    if (seen.insert(state).second) layer.push_back(state);
  }
  for (std::uint64_t t = 0; t < query.horizon_slots && !layer.empty(); ++t) {
    std::vector<JointState> next;
    for (const auto& state : layer) {
      for (const Transition& tr : expander.successors(state)) {
        if (seen.insert(tr.next).second) next.push_back(tr.next);
      }
    }
    layer = std::move(next);
  }
  return {seen.begin(), seen.end()};
}

double total_variation(std::span<const long double> p, long double p_never,
                       std::span<const long double> q, long double q_never) {
  long double sum = std::fabs(p_never - q_never);
  const std::size_t n = std::max(p.size(), q.size());
  for (std::size_t i = 0; i < n; ++i) {
    const long double a = i < p.size() ? p[i] : 0.0L;
    const long double b = i < q.size() ? q[i] : 0.0L;
    sum += std::fabs(a - b);
  }
  return static_cast<double>(sum / 2.0L);
}

void write_distribution_csv(std::ostream& out, const ConvergenceDistribution& dist) {
  out << "slot_index,probability\n";
  for (std::size_t t = 0; t < dist.mass.size(); ++t) {
    fmt::print(out, "{},{:.17g}\n", t, static_cast<double>(dist.mass[t]));
  }
  fmt::print(out, "never,{:.17g}\n", static_cast<double>(dist.deficit));
}

}  // namespace ecasim
