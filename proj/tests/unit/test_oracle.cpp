#include <doctest.h>

#include <map>
#include <set>
#include <sstream>

#include "ecasim/error.hpp"
#include "ecasim/oracle.hpp"

using namespace ecasim;

namespace {

using Joint = std::vector<StationState>;

StationState det(std::uint64_t backoff, std::uint32_t j = 0) {
  return {.backoff = backoff, .cw = 16, .mode = Mode::kDeterministic, .schedule_exponent = j};
}

ExactQuery toy(std::uint32_t n, std::uint32_t cw_max, std::uint64_t horizon,
               ProtocolKind kind = ProtocolKind::eca()) {
  ExactQuery q;
  q.n_stations = n;
  q.protocol.cw_min = 4;
  q.protocol.cw_max = cw_max;
  q.protocol.base_cycle = 4;
  q.protocol.kind = kind;
  q.horizon_slots = horizon;
  return q;
}

long double total_mass(const ConvergenceDistribution& d) {
  long double sum = d.deficit;
  for (const auto m : d.mass) sum += m;
  return sum;
}

}  // namespace

TEST_CASE("certificate examples") {
  const ProtocolConfig cfg;
  auto c = certify_states(cfg, Joint{det(3), det(9)});
  CHECK(c.certified);
  CHECK(c.hyper_cycle == 16);
  CHECK(c.offsets == std::vector<std::uint64_t>{3, 9});

  CHECK_FALSE(certify_states(cfg, Joint{det(3), det(3)}).certified);

  ProtocolConfig adaptive;
  adaptive.kind = ProtocolKind::adaptive();
  c = certify_states(adaptive, Joint{det(0), det(5), det(10, 1)});
  CHECK(c.certified);
  CHECK(c.hyper_cycle == 32);

  // Station 3 on the long cycle meets station 1 sixteen slots later.
  CHECK_FALSE(certify_states(adaptive, Joint{det(0), det(5), det(16, 1)}).certified);
}

TEST_CASE("random or pending stations are never certified") {
  const ProtocolConfig cfg;
  StationState r = det(4);
  r.mode = Mode::kRandom;
  CHECK_FALSE(certify_states(cfg, Joint{det(3), r}).certified);
  StationState pending = det(0);
  pending.awaiting_feedback = true;
  CHECK_FALSE(certify_states(cfg, Joint{pending}).certified);
  CHECK_FALSE(certify_states(cfg, Joint{}).certified);
}

TEST_CASE("adaptive station about to double is not stable") {
  ProtocolConfig cfg;
  cfg.kind = ProtocolKind::adaptive();
  StationState s = det(3);
  for (int i = 0; i < 8; ++i) s.recent.push(Outcome::kFailure, cfg.adapt_window);
  CHECK_FALSE(certify_states(cfg, Joint{s, det(9)}).certified);
  s.schedule_exponent = cfg.max_schedule_exponent;
  s.backoff = 3;
  CHECK(certify_states(cfg, Joint{s, det(9)}).certified);
}

TEST_CASE("certify needs saturated traffic") {
  std::vector<Station> stations{Station(ProtocolConfig{}, 1, 0), Station(ProtocolConfig{}, 1, 1)};
  CHECK_THROWS_AS(certify(stations, TrafficModel::bernoulli(0.1, 1)), NotCertifiable);
  const std::vector<TrafficModel> two(3, TrafficModel::saturated());
  CHECK_THROWS_AS(certify(stations, two), ConfigError);
  stations[0].state() = det(2);
  stations[1].state() = det(7);
  CHECK(certify(stations, TrafficModel::saturated()).certified);
}

TEST_CASE("certificates are sound") {
  // Every certificate issued during real runs must hold for ten hyper-cycles.
  for (const auto kind : {ProtocolKind::eca(), ProtocolKind::sticky(2), ProtocolKind::adaptive()}) {
    RunConfig rc;
    ProtocolConfig p;
    p.kind = kind;
    rc.groups.push_back({8, p, TrafficModel::saturated()});
    rc.horizon = Horizon::slots(200000);
    rc.stop_at_convergence = true;
    rc.record_slots = false;
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
      World w(rc, seed);
      while (!w.done()) w.step();
      REQUIRE(w.convergence_slot());
      const auto cert = certify(w.stations(), TrafficModel::saturated());
      REQUIRE(cert.certified);
      RunConfig after = rc;
      after.stop_at_convergence = false;
      after.horizon = Horizon::slots(10 * cert.hyper_cycle);
      after.record_slots = true;
      World check(after, w.states(), seed);
      const Trace t = check.run_to_horizon();
      for (const auto& rec : t.slots) REQUIRE_FALSE(rec.failed());
    }
  }
}

TEST_CASE("certificates are complete on a toy instance") {
  // Closure of the reachable chain, then "no collision in any future" by
  // backward propagation from colliding transitions.
  const ExactQuery q = toy(2, 8, 400);
  const auto states = reachable_states(q);
  std::map<Joint, std::vector<Transition>> graph;
  for (const auto& s : states) graph[s] = enumerate_successors(q, s);
  for (const auto& [s, out] : graph) {
    for (const auto& tr : out) REQUIRE(graph.count(tr.next) == 1);
  }

  std::set<Joint> unsafe;
  for (bool changed = true; changed;) {
    changed = false;
    for (const auto& [s, out] : graph) {
      if (unsafe.count(s)) continue;
      for (const auto& tr : out) {
        if (tr.collision || unsafe.count(tr.next)) {
          unsafe.insert(s);
          changed = true;
          break;
        }
      }
    }
  }

  std::size_t certified = 0;
  for (const auto& s : states) {
    bool all_det = true;
    for (const auto& st : s) all_det &= st.mode == Mode::kDeterministic && !st.awaiting_feedback;
    const bool expect = all_det && !unsafe.count(s);
    CHECK(certify_states(q.protocol, s).certified == expect);
    certified += expect;
  }
  CHECK(certified > 0);
}

TEST_CASE("one station converges at its first transmission") {
  ExactQuery q = toy(1, 8, 20);
  const auto d = exact_convergence_distribution(q);
  for (std::uint64_t t = 0; t < 4; ++t) CHECK(d.mass[t] == doctest::Approx(0.25));
  for (std::uint64_t t = 4; t < 20; ++t) CHECK(d.mass[t] == 0.0L);
  CHECK(d.deficit == 0.0L);
}

TEST_CASE("two stations sharing a one-slot cycle never converge") {
  ExactQuery q = toy(2, 8, 100);
  q.protocol.base_cycle = 1;
  const auto d = exact_convergence_distribution(q);
  CHECK(static_cast<double>(d.deficit) == doctest::Approx(1.0));
  for (const auto m : d.mass) CHECK(m == 0.0L);
}

TEST_CASE("probability is conserved") {
  for (const auto kind : {ProtocolKind::eca(), ProtocolKind::sticky(2), ProtocolKind::ca()}) {
    const auto d = exact_convergence_distribution(toy(2, 16, 80, kind));
    CHECK(static_cast<double>(total_mass(d)) == doctest::Approx(1.0).epsilon(1e-12));
  }
  const auto d3 = exact_convergence_distribution(toy(3, 8, 40));
  CHECK(static_cast<double>(total_mass(d3)) == doctest::Approx(1.0).epsilon(1e-12));
  const auto ca = exact_convergence_distribution(toy(2, 16, 80, ProtocolKind::ca()));
  CHECK(static_cast<double>(ca.deficit) == doctest::Approx(1.0));
}

TEST_CASE("successor probabilities sum to one") {
  const ExactQuery q = toy(3, 8, 10, ProtocolKind::prob_sticky(0.25));
  StationState random_one;
  random_one.cw = 4;
  const Joint start{det(0), det(0), random_one};
  const auto out = enumerate_successors(q, start);
  long double sum = 0.0L;
  for (const auto& tr : out) {
    sum += tr.probability;
    CHECK(tr.collision);
  }
  CHECK(static_cast<double>(sum) == doctest::Approx(1.0).epsilon(1e-15));
  // All three collide. Each deterministic station sticks or redraws from cw 8;
  // the random one redraws from cw 8.
  CHECK(out.size() == (1 + 8) * (1 + 8) * 8);
}

TEST_CASE("exact distribution matches a small Monte-Carlo run") {
  const ExactQuery q = toy(2, 16, 60);
  const auto d = exact_convergence_distribution(q);
  RunConfig rc;
  rc.groups.push_back({2, q.protocol, TrafficModel::saturated()});
  rc.horizon = Horizon::slots(q.horizon_slots);
  rc.stop_at_convergence = true;
  rc.record_slots = false;
  constexpr int kSeeds = 20000;
  std::vector<long double> mc(q.horizon_slots, 0.0L);
  long double never = 0.0L;
  for (int s = 1; s <= kSeeds; ++s) {
    World w(rc, s);
    while (!w.done()) w.step();
    if (w.convergence_slot()) {
      mc[*w.convergence_slot()] += 1.0L / kSeeds;
    } else {
      never += 1.0L / kSeeds;
    }
  }
  CHECK(total_variation(d.mass, d.deficit, mc, never) < 0.02);
}

TEST_CASE("query limits") {
  CHECK_THROWS_AS(exact_convergence_distribution(toy(4, 8, 10)), ConfigError);
  ExactQuery big_cw = toy(2, 64, 10);
  big_cw.protocol.cw_min = 16;
  CHECK_THROWS_AS(exact_convergence_distribution(big_cw), ConfigError);
  ExactQuery big_c0 = toy(2, 64, 10);
  big_c0.protocol.base_cycle = 16;
  CHECK_THROWS_AS(exact_convergence_distribution(big_c0), ConfigError);

  ExactQuery huge = toy(3, 1024, 1000, ProtocolKind::prob_sticky(0.5));
  huge.protocol.cw_min = 8;
  huge.protocol.base_cycle = 8;
  CHECK(estimated_state_space(huge) > kMaxExactStateSpace);
  CHECK_THROWS_AS(exact_convergence_distribution(huge), TooLarge);
  CHECK_THROWS_AS(exact_convergence_distribution(toy(3, 8, 10, ProtocolKind::adaptive())),
                  TooLarge);
}

TEST_CASE("total variation") {
  const std::vector<long double> p{0.5L, 0.5L};
  const std::vector<long double> q{0.25L, 0.25L, 0.25L};
  CHECK(total_variation(p, 0.0L, p, 0.0L) == 0.0);
  CHECK(total_variation(p, 0.0L, q, 0.25L) == doctest::Approx(0.5));
}

TEST_CASE("distribution CSV") {
  ConvergenceDistribution d;
  d.mass = {0.0L, 0.75L};
  d.deficit = 0.25L;
  std::ostringstream out;
  write_distribution_csv(out, d);
  CHECK(out.str() == "slot_index,probability\n0,0\n1,0.75\nnever,0.25\n");
}
