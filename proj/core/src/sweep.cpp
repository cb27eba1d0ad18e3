#include "ecasim/sweep.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <fstream>
#include <ostream>
#include <thread>

#include <fmt/format.h>
#include <fmt/ostream.h>

#include "ecasim/error.hpp"
#include "ecasim/trace_io.hpp"

namespace ecasim {
namespace {

struct Job {
  std::size_t cell;
  std::uint64_t seed;
};

std::string fixed(double v) { return std::isfinite(v) ? fmt::format("{:.6f}", v) : "nan"; }

}  // namespace

SampleStats SampleStats::of(std::span<const double> samples) {
  SampleStats s;
  double sum = 0.0;
  for (const double x : samples) {
    if (!std::isfinite(x)) continue;
    sum += x;
    ++s.count;
  }
  if (s.count == 0) {
    s.mean = s.stddev = std::nan("");
    return s;
  }
  s.mean = sum / static_cast<double>(s.count);
  if (s.count < 2) return s;
  double sq = 0.0;
  for (const double x : samples) {
    if (std::isfinite(x)) sq += (x - s.mean) * (x - s.mean);
  }
  s.stddev = std::sqrt(sq / static_cast<double>(s.count - 1));
  return s;
}

double SampleStats::standard_error() const {
  return count > 0 ? stddev / std::sqrt(static_cast<double>(count)) : std::nan("");
}

std::string trace_file_name(const std::string& protocol, std::uint32_t n, std::uint64_t seed) {
  std::string safe;
  for (const char c : protocol) {
    if (c == '(' || c == '.') {
      safe += '-';
    } else if (c != ')') {
      safe += c;
    }
  }
  return fmt::format("{}_n{}_seed{}.trace", safe, n, seed);
}

SweepResult run_sweep(const Scenario& scenario, const SweepOptions& options) {
  scenario.validate();
  const auto cells = scenario.cells();

  std::vector<Job> jobs;
  for (std::size_t c = 0; c < cells.size(); ++c) {
    for (const auto seed : scenario.seeds) jobs.push_back({c, seed});
  }

  if (options.trace_dir) std::filesystem::create_directories(*options.trace_dir);

  SweepResult result;
  result.runs.resize(jobs.size());
  std::vector<std::exception_ptr> errors(jobs.size());
  std::atomic<std::size_t> next{0};

  auto worker = [&] {
    for (std::size_t k = next++; k < jobs.size(); k = next++) {
      const Job& job = jobs[k];
      const auto& cell = cells[job.cell];
      try {
        try {
          const Trace trace = run(cell.run, job.seed);
          RunRecord& rec = result.runs[k];
          rec.protocol = cell.protocol;
          rec.n_stations = cell.n_stations;
          rec.seed = job.seed;
          rec.metrics = evaluate(trace, cell.run.durations);
          rec.slots = trace.slot_count;
          rec.wall_time_us = trace.wall_time_us;
          if (options.trace_dir) {
            const auto path =
                *options.trace_dir / trace_file_name(cell.protocol, cell.n_stations, job.seed);
            std::ofstream out(path);
            if (!out) throw IoError(fmt::format("cannot write trace '{}'", path.string()));
            write_trace(out, trace);
          }
        } catch (const Error& e) {
          throw Error(e.category(), fmt::format("protocol={} n={} seed={}: {}", cell.protocol,
                                                cell.n_stations, job.seed, e.what()));
        }
      } catch (...) {
        errors[k] = std::current_exception();
      }
    }
  };

  const unsigned n_workers =
      std::max(1u, std::min<unsigned>(options.workers, static_cast<unsigned>(jobs.size())));
  if (n_workers == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (unsigned w = 0; w < n_workers; ++w) pool.emplace_back(worker);
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }

  const std::size_t per_cell = scenario.seeds.size();
  for (std::size_t c = 0; c < cells.size(); ++c) {
    CellSummary s;
    s.protocol = cells[c].protocol;
    s.n_stations = cells[c].n_stations;
    s.n_seeds = per_cell;
    std::vector<double> thr, col, conv, jain;
    for (std::size_t k = c * per_cell; k < (c + 1) * per_cell; ++k) {
      const MetricsReport& m = result.runs[k].metrics;
      thr.push_back(m.normalized_throughput);
      col.push_back(m.collision_probability);
      jain.push_back(m.jain_index);
      if (m.convergence_slot) {
        conv.push_back(static_cast<double>(*m.convergence_slot));
      } else {
        ++s.non_converged;
      }
    }
    s.throughput = SampleStats::of(thr);
    s.collision_probability = SampleStats::of(col);
    s.convergence_slot = SampleStats::of(conv);
    s.jain_index = SampleStats::of(jain);
    result.summary.push_back(std::move(s));
  }
  return result;
}

void write_summary_csv(std::ostream& out, std::span<const CellSummary> summary) {
  out << kSummaryColumns << '\n';
  for (const auto& s : summary) {
    fmt::print(out, "{},{},{},{},{},{},{},{},{},{},{},{}\n", s.protocol, s.n_stations, s.n_seeds,
               fixed(s.throughput.mean), fixed(s.throughput.stddev),
               fixed(s.collision_probability.mean), fixed(s.collision_probability.stddev),
               fixed(s.convergence_slot.mean), fixed(s.convergence_slot.stddev), s.non_converged,
               fixed(s.jain_index.mean), fixed(s.jain_index.stddev));
  }
}

void write_runs_csv(std::ostream& out, std::span<const RunRecord> runs) {
  out << kRunColumns << '\n';
  for (const auto& r : runs) {
    const auto& m = r.metrics;
    fmt::print(out, "{},{},{},{},{},{},{},{},{},{}\n", r.protocol, r.n_stations, r.seed,
               fixed(m.normalized_throughput), fixed(m.packet_throughput),
               fixed(m.collision_probability),
               m.convergence_slot ? std::to_string(*m.convergence_slot) : std::string("none"),
               fixed(m.jain_index), r.slots, r.wall_time_us);
  }
}

void write_sweep_outputs(const SweepResult& result, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError(fmt::format("cannot create '{}': {}", dir.string(), ec.message()));
  auto open = [&](const char* name) {
    std::ofstream out(dir / name);
    if (!out) throw IoError(fmt::format("cannot write '{}'", (dir / name).string()));
    return out;
  };
  {
    auto out = open("summary.csv");
    write_summary_csv(out, result.summary);
  }
  {
    auto out = open("runs.csv");
    write_runs_csv(out, result.runs);
  }
}

}  // namespace ecasim
