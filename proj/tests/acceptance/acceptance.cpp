// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any
// criterion fails. Statistical thresholds and frozen seeds live here.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include <fmt/format.h>

#include "ecasim/metrics.hpp"
#include "ecasim/oracle.hpp"
#include "ecasim/scenario.hpp"
#include "ecasim/sweep.hpp"

using namespace ecasim;
namespace fs = std::filesystem;

namespace {

struct Verdict {
  bool pass = false;
  std::string detail;
};

unsigned workers() { return std::max(1u, std::thread::hardware_concurrency()); }

RunConfig saturated(std::uint32_t n, ProtocolKind kind, std::uint64_t slots) {
  RunConfig rc;
  ProtocolConfig p;
  p.kind = kind;
  rc.groups.push_back({n, p, TrafficModel::saturated()});
  rc.horizon = Horizon::slots(slots);
  rc.record_slots = false;
  return rc;
}

// Runs ten hyper-cycles from `states` on an ideal channel.
bool collision_free_after(const RunConfig& base, std::span<const StationState> states,
                          std::uint64_t hyper, std::uint64_t seed) {
  RunConfig rc = base;
  rc.impairments = {};
  rc.stop_at_convergence = false;
  rc.horizon = Horizon::slots(10 * hyper);
  World w(rc, states, seed);
  while (!w.done()) {
    if (w.step().failed()) return false;
  }
  return true;
}

// Difference of two cell means in units of its standard error.
double z_score(const SampleStats& hi, const SampleStats& lo) {
  const double se = std::hypot(hi.standard_error(), lo.standard_error());
  if (se > 0.0) return (hi.mean - lo.mean) / se;
  return hi.mean > lo.mean ? std::numeric_limits<double>::infinity() : 0.0;
}

const CellSummary& cell(const SweepResult& r, const std::string& protocol, std::uint32_t n) {
  for (const auto& s : r.summary) {
    if (s.protocol == protocol && s.n_stations == n) return s;
  }
  throw std::runtime_error("missing cell " + protocol + " n=" + std::to_string(n));
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

double median(std::vector<double> xs) {
  std::sort(xs.begin(), xs.end());
  const std::size_t n = xs.size();
  return n % 2 ? xs[n / 2] : 0.5 * (xs[n / 2 - 1] + xs[n / 2]);
}

Verdict two_station_convergence() {
  const RunConfig rc = saturated(2, ProtocolKind::eca(), 10000);
  int converged = 0, late = 0;
  for (std::uint64_t seed = 1; seed <= 1000; ++seed) {
    World w(rc, seed);
    while (!w.done()) {
      const SlotRecord rec = w.step();
      if (rec.failed() && w.convergence_slot() && rec.slot_index > *w.convergence_slot()) ++late;
    }
    converged += w.convergence_slot().has_value();
  }
  return {converged == 1000 && late == 0,
          fmt::format("converged {}/1000, collisions after convergence {}", converged, late)};
}

Verdict n_station_absorption() {
  bool pass = true;
  std::string detail;
  for (const std::uint32_t n : {2u, 4u, 6u, 8u, 12u, 16u}) {
    RunConfig rc = saturated(n, ProtocolKind::eca(), 1'000'000);
    rc.stop_at_convergence = true;
    int converged = 0, unsound = 0;
    for (std::uint64_t seed = 1; seed <= 100; ++seed) {
      World w(rc, seed);
      while (!w.done()) w.step();
      if (!w.convergence_slot()) continue;
      ++converged;
      const auto cert = certify(w.stations(), TrafficModel::saturated());
      const auto states = w.states();
      if (!cert.certified || !collision_free_after(rc, states, cert.hyper_cycle, seed)) ++unsound;
    }
    pass &= converged == 100 && unsound == 0;
    detail += fmt::format("{}N={}: {}/100 converged, {} unsound", detail.empty() ? "" : "; ", n,
                          converged, unsound);
  }
  return {pass, detail};
}

Verdict oracle_equivalence() {
  ExactQuery q;
  q.n_stations = 2;
  q.protocol.cw_min = 4;
  q.protocol.cw_max = 64;
  q.protocol.base_cycle = 4;
  q.horizon_slots = 200;
  const auto exact = exact_convergence_distribution(q);

  RunConfig rc;
  rc.groups.push_back({2, q.protocol, TrafficModel::saturated()});
  rc.horizon = Horizon::slots(q.horizon_slots);
  rc.stop_at_convergence = true;
  rc.record_slots = false;
  constexpr int kSeeds = 100000;
  std::vector<long double> mc(q.horizon_slots, 0.0L);
  long double never = 0.0L;
  for (int seed = 1; seed <= kSeeds; ++seed) {
    World w(rc, seed);
    while (!w.done()) w.step();
    if (w.convergence_slot()) {
      mc[*w.convergence_slot()] += 1.0L / kSeeds;
    } else {
      never += 1.0L / kSeeds;
    }
  }
  const double tv = total_variation(exact.mass, exact.deficit, mc, never);
  return {tv <= 0.01, fmt::format("TV distance {:.5f} (exact deficit {:.2e})", tv,
                                  static_cast<double>(exact.deficit))};
}

Verdict throughput_ordering(const SweepResult& fig5, const std::vector<std::uint32_t>& grid) {
  bool pass = true;
  double min_eca_ca = INFINITY, min_sticky_eca = INFINITY;
  std::string worst;
  for (const auto n : grid) {
    const double z_eca = z_score(cell(fig5, "ECA", n).throughput, cell(fig5, "CA", n).throughput);
    const double z_sticky =
        z_score(cell(fig5, "StickyECA(2)", n).throughput, cell(fig5, "ECA", n).throughput);
    if (n >= 5) {
      min_eca_ca = std::min(min_eca_ca, z_eca);
      if (z_eca <= 2.0) {
        pass = false;
        worst += fmt::format(" ECA-CA at N={} z={:.2f};", n, z_eca);
      }
    }
    min_sticky_eca = std::min(min_sticky_eca, z_sticky);
    if (z_sticky <= 2.0) {
      pass = false;
      worst += fmt::format(" StickyECA(2)-ECA at N={} z={:.2f};", n, z_sticky);
    }
  }
  return {pass, fmt::format("min z ECA-CA {:.2f}, min z StickyECA(2)-ECA {:.2f}{}", min_eca_ca,
                            min_sticky_eca, worst)};
}

Verdict ca_degradation(const SweepResult& fig5, const std::vector<std::uint32_t>& grid) {
  int violations = 0;
  std::string curve;
  double prev = INFINITY;
  for (const auto n : grid) {
    const double t = cell(fig5, "CA", n).throughput.mean;
    if (t > prev) ++violations;
    prev = t;
    curve += fmt::format(" {:.4f}", t);
  }
  return {violations <= 1, fmt::format("{} increases; CA means{}", violations, curve)};
}

Verdict stickiness_speed() {
  auto medians = [](ProtocolKind kind) {
    RunConfig rc = saturated(10, kind, 1'000'000);
    rc.stop_at_convergence = true;
    std::vector<double> slots;
    for (std::uint64_t seed = 1; seed <= 200; ++seed) {
      World w(rc, seed);
      while (!w.done()) w.step();
      slots.push_back(w.convergence_slot() ? static_cast<double>(*w.convergence_slot())
                                           : std::numeric_limits<double>::infinity());
    }
    return median(slots);
  };
  const double sticky = medians(ProtocolKind::sticky(2));
  const double eca = medians(ProtocolKind::eca());
  return {sticky < eca, fmt::format("median StickyECA(2) {} vs ECA {}", sticky, eca)};
}

Verdict adaptive_fairness() {
  // Frozen seed: converges with final exponents {0,0,1}.
  constexpr std::uint64_t kSeed = 64;
  ProtocolConfig p;
  p.kind = ProtocolKind::adaptive();
  p.cw_min = 4;
  p.cw_max = 64;
  p.base_cycle = 4;
  p.max_schedule_exponent = 1;
  RunConfig rc;
  rc.groups.push_back({3, p, TrafficModel::saturated()});
  rc.horizon = Horizon::slots(5000);
  const Trace t = run(rc, kSeed);
  if (!t.convergence_slot) return {false, "frozen run did not converge"};
  std::vector<std::uint32_t> exps;
  for (const auto& s : t.final_states) exps.push_back(s.schedule_exponent);
  std::sort(exps.begin(), exps.end());
  const auto cert = certify_states(p, t.final_states);
  const std::uint64_t start = *t.convergence_slot + 1;
  const auto packets = packets_in_window(t, 3, start, start + 10 * cert.hyper_cycle);
  const double jain = jain_fairness(packets);
  return {exps == std::vector<std::uint32_t>{0, 0, 1} && jain == 1.0,
          fmt::format("seed {} converged at {}, exponents {{{},{},{}}}, hyper-cycle {}, packets "
                      "[{},{},{}], jain {:.17g}",
                      kSeed, *t.convergence_slot, exps[0], exps[1], exps[2], cert.hyper_cycle,
                      packets[0], packets[1], packets[2], jain)};
}

Verdict single_packet_fallback() {
  Scenario sc = load_scenario(resolve_scenario("single_packet"));
  sc.seeds = parse_seed_spec("100");
  const SweepResult r = run_sweep(sc, {.workers = workers()});
  const double ca = cell(r, "CA", 20).throughput.mean;
  const double eca = cell(r, "ECA", 20).throughput.mean;
  const double rel = std::fabs(eca - ca) / ca;
  return {rel < 0.02, fmt::format("CA {:.5f}, ECA {:.5f}, relative difference {:.4f}", ca, eca, rel)};
}

Verdict legacy_coexistence() {
  Scenario mixed = load_scenario(resolve_scenario("legacy_mix"));
  Scenario legacy = mixed;
  legacy.groups = {mixed.groups[0]};
  legacy.groups[0].count = 10;
  const SweepResult rm = run_sweep(mixed, {.workers = workers()});
  const SweepResult rl = run_sweep(legacy, {.workers = workers()});
  const double z = z_score(rm.summary[0].throughput, rl.summary[0].throughput);

  // Probe the certificate in every slot of a few mixed runs as well.
  int issued = 0;
  for (const auto& rec : rm.runs) issued += rec.metrics.convergence_slot.has_value();
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    RunConfig rc = mixed.cells()[0].run;
    rc.record_slots = false;
    World w(rc, seed);
    while (!w.done()) {
      w.step();
      issued += certify(w.stations(), TrafficModel::saturated()).certified;
    }
  }
  return {z > 2.0 && issued == 0,
          fmt::format("5CA+5ECA {:.5f} vs 10CA {:.5f} (z={:.2f}), certificates issued {}",
                      rm.summary[0].throughput.mean, rl.summary[0].throughput.mean, z, issued)};
}

Verdict drift_robustness() {
  RunConfig sticky = saturated(10, ProtocolKind::sticky(2), 100000);
  sticky.impairments.p_misalign = 0.01;
  RunConfig ca = sticky;
  ca.groups[0].protocol.kind = ProtocolKind::ca();

  int deadlocks = 0;
  std::vector<double> p_sticky, p_ca;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    World w(sticky, seed);
    std::vector<int> streak(10, 0);
    while (!w.done()) {
      const SlotRecord rec = w.step();
      for (const auto i : rec.transmitters) {
        streak[i] = rec.failed() ? streak[i] + 1 : 0;
        if (streak[i] >= 2 && w.stations()[i].state().mode == Mode::kDeterministic) ++deadlocks;
      }
    }
    const Trace ts = w.run_to_horizon();
    p_sticky.push_back(evaluate(ts, {}).collision_probability);
    p_ca.push_back(evaluate(run(ca, seed), {}).collision_probability);
  }
  const double ms = SampleStats::of(p_sticky).mean;
  const double mc = SampleStats::of(p_ca).mean;
  return {deadlocks == 0 && ms < mc,
          fmt::format("deterministic after 2 failures: {}; collision probability StickyECA(2) "
                      "{:.5f} vs CA {:.5f}",
                      deadlocks, ms, mc)};
}

Verdict replay() {
  const fs::path root = fs::temp_directory_path() / "ecasim_acceptance_replay";
  fs::remove_all(root);
  bool identical = true;
  std::size_t files = 0;
  for (const char* name : {"two_station", "drift", "legacy_mix"}) {
    Scenario sc = load_scenario(resolve_scenario(name));
    sc.seeds = {3, 11};
    sc.horizon = Horizon::slots(20000);
    for (const char* pass : {"a", "b"}) {
      const fs::path dir = root / pass / name;
      const auto r = run_sweep(sc, {.workers = pass[0] == 'a' ? 1u : workers(),
                                    .trace_dir = dir / "traces"});
      write_sweep_outputs(r, dir);
    }
    for (const auto& entry : fs::recursive_directory_iterator(root / "a" / name)) {
      if (!entry.is_regular_file()) continue;
      const fs::path other = root / "b" / fs::relative(entry.path(), root / "a");
      identical &= fs::exists(other) && slurp(entry.path()) == slurp(other);
      ++files;
    }
  }
  fs::remove_all(root);
  return {identical && files > 0, fmt::format("{} files compared across two runs", files)};
}

}  // namespace

int main() {
  int failures = 0;
  auto report = [&](int id, const char* title, const std::function<Verdict()>& check) {
    const auto t0 = std::chrono::steady_clock::now();
    Verdict v;
    try {
      v = check();
    } catch (const std::exception& e) {
      v = {false, std::string("exception: ") + e.what()};
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    failures += !v.pass;
    std::printf("%s  %2d %-28s %s (%.1fs)\n", v.pass ? "PASS" : "FAIL", id, title,
                v.detail.c_str(), secs);
    std::fflush(stdout);
  };

  report(1, "two-station convergence", two_station_convergence);
  report(2, "n-station absorption", n_station_absorption);
  report(3, "oracle equivalence", oracle_equivalence);

  SweepResult fig5;
  std::vector<std::uint32_t> grid;
  std::string fig5_error;
  const auto t0 = std::chrono::steady_clock::now();
  try {
    const Scenario sc = load_scenario(resolve_scenario("fig5_sweep"));
    grid = sc.sweep->n_values;
    fig5 = run_sweep(sc, {.workers = workers()});
  } catch (const std::exception& e) {
    fig5_error = e.what();
  }
  std::printf("      fig5_sweep ran in %.1fs\n",
              std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
  auto with_fig5 = [&](auto fn) {
    return [&, fn]() -> Verdict {
      if (!fig5_error.empty()) return {false, "fig5_sweep failed: " + fig5_error};
      return fn(fig5, grid);
    };
  };
  report(4, "throughput ordering", with_fig5(throughput_ordering));
  report(5, "CA degradation shape", with_fig5(ca_degradation));

  report(6, "stickiness speed", stickiness_speed);
  report(7, "adaptive fairness", adaptive_fairness);
  report(8, "single-packet fallback", single_packet_fallback);
  report(9, "legacy coexistence", legacy_coexistence);
  report(10, "drift robustness", drift_robustness);
  report(11, "replay", replay);

  std::printf("%d of 11 criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
