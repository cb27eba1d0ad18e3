#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

#include "ecasim/channel.hpp"
#include "ecasim/protocol.hpp"

namespace ecasim {

/// Proof that a saturated system is collision-free-absorbing.
struct ConvergenceCertificate {
  bool certified = false;
  std::uint64_t hyper_cycle = 0;       // lcm of every station's D(j) + 1
  std::vector<std::uint64_t> offsets;  // slots until next transmission, mod own cycle
};

/// Certifies absorption: every station Deterministic, no schedule change
/// pending, and one full hyper-cycle simulated forward (ideal channel) without
/// a collision or a drop to Random mode.
///
/// `traffic` is either one model for all stations or one per station.
/// Throws NotCertifiable for non-saturated traffic.
ConvergenceCertificate certify(std::span<const Station> stations,
                               std::span<const TrafficModel> traffic);
ConvergenceCertificate certify(std::span<const Station> stations, const TrafficModel& traffic);

/// Same predicate on bare states sharing one config.
ConvergenceCertificate certify_states(const ProtocolConfig& cfg,
                                      std::span<const StationState> states);

/// Toy instance for exhaustive enumeration: n identical saturated stations on
/// an ideal channel.
struct ExactQuery {
  std::uint32_t n_stations = 2;
  ProtocolConfig protocol;
  std::uint64_t horizon_slots = 256;
};

inline constexpr std::uint64_t kMaxExactStateSpace = 10'000'000;
inline constexpr std::uint32_t kMaxExactStations = 3;
inline constexpr std::uint32_t kMaxExactCwMin = 8;
inline constexpr std::uint32_t kMaxExactBaseCycle = 8;

struct ConvergenceDistribution {
  // mass[t] = P(absorption first certified after slot t).
  std::vector<long double> mass;
  // P(not certified by the horizon).
  long double deficit = 0.0L;
  std::uint64_t peak_frontier = 0;
};

/// Upper bound on the joint state count the enumeration may touch.
std::uint64_t estimated_state_space(const ExactQuery& query);

/// Exhaustive expansion of the joint backoff chain. Each random choice the
/// simulator would make is enumerated with its exact probability.
/// Throws ConfigError for out-of-range queries and TooLarge when the state
/// space exceeds kMaxExactStateSpace.
ConvergenceDistribution exact_convergence_distribution(const ExactQuery& query);

/// Every joint state the enumeration visits up to the horizon, in order.
std::vector<std::vector<StationState>> reachable_states(const ExactQuery& query);

/// One-slot successors of `states` with exact branch probabilities.
struct Transition {
  std::vector<StationState> next;
  long double probability = 0.0L;
  bool collision = false;
};
std::vector<Transition> enumerate_successors(const ExactQuery& query,
                                             std::span<const StationState> states);

/// Total-variation distance between two pmfs over slots plus a "never" bucket.
double total_variation(std::span<const long double> p, long double p_never,
                       std::span<const long double> q, long double q_never);

/// CSV with header `slot_index,probability`; the last row is `never`.
void write_distribution_csv(std::ostream& out, const ConvergenceDistribution& dist);

}  // namespace ecasim
