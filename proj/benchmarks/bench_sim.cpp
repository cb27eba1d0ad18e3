#include <benchmark/benchmark.h>

#include "ecasim/channel.hpp"
#include "ecasim/oracle.hpp"

namespace {

ecasim::RunConfig saturated(std::uint32_t n, ecasim::ProtocolKind kind, std::uint64_t slots) {
  ecasim::RunConfig rc;
  ecasim::ProtocolConfig p;
  p.kind = kind;
  rc.groups.push_back({n, p, ecasim::TrafficModel::saturated()});
  rc.horizon = ecasim::Horizon::slots(slots);
  return rc;
}

void BM_RunSlots(benchmark::State& state, ecasim::ProtocolKind kind) {
  const auto n = static_cast<std::uint32_t>(state.range(0));
  const auto rc = saturated(n, kind, 100000);
  std::uint64_t seed = 1;
  for (auto _ : state) {
    auto trace = ecasim::run(rc, seed++);
    benchmark::DoNotOptimize(trace.wall_time_us);
  }
  state.SetItemsProcessed(state.iterations() * 100000);
}
BENCHMARK_CAPTURE(BM_RunSlots, CA, ecasim::ProtocolKind::ca())->Arg(10)->Arg(50);
BENCHMARK_CAPTURE(BM_RunSlots, ECA, ecasim::ProtocolKind::eca())->Arg(10)->Arg(50);

void BM_Certify(benchmark::State& state) {
  auto rc = saturated(static_cast<std::uint32_t>(state.range(0)), ecasim::ProtocolKind::eca(), 1);
  rc.stop_at_convergence = true;
  rc.horizon = ecasim::Horizon::slots(1'000'000);
  ecasim::World world(rc, 7);
  while (!world.done()) world.step();
  for (auto _ : state) {
    auto cert = ecasim::certify(world.stations(), ecasim::TrafficModel::saturated());
    benchmark::DoNotOptimize(cert.certified);
  }
}
BENCHMARK(BM_Certify)->Arg(6)->Arg(12);

void BM_ExactDistribution(benchmark::State& state) {
  ecasim::ExactQuery q;
  q.n_stations = 2;
  q.protocol.cw_min = 4;
  q.protocol.cw_max = static_cast<std::uint32_t>(state.range(0));
  q.protocol.base_cycle = 4;
  q.horizon_slots = 128;
  for (auto _ : state) {
    auto dist = ecasim::exact_convergence_distribution(q);
    benchmark::DoNotOptimize(dist.deficit);
  }
}
BENCHMARK(BM_ExactDistribution)->Arg(16)->Arg(64)->Unit(benchmark::kMillisecond);

}  // namespace
BENCHMARK_MAIN();
