#include "ecasim/trace_io.hpp"

#include <charconv>
#include <istream>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include <fmt/format.h>
#include <fmt/ostream.h>

#include "ecasim/error.hpp"

namespace ecasim {
namespace {

std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = s.find(sep, start);
    out.push_back(s.substr(start, pos == std::string_view::npos ? pos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

template <class T>
T parse_number(std::string_view text, std::size_t line, int base = 10) {
  T value{};
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value, base);
  if (ec != std::errc{} || ptr != text.data() + text.size()) {
    throw ParseError(fmt::format("bad number '{}'", text), line);
  }
  return value;
}

// "key=value" from the header comment.
std::string_view header_field(std::string_view header, std::string_view key, std::size_t line) {
  const std::string needle = std::string(key) + "=";
  const auto pos = header.find(needle);
  if (pos == std::string_view::npos) {
    throw ParseError(fmt::format("trace header lacks '{}'", key), line);
  }
  auto rest = header.substr(pos + needle.size());
  return rest.substr(0, rest.find(' '));
}

}  // namespace

void write_trace(std::ostream& out, const Trace& trace) {
  fmt::print(out, "# ecasim-trace fingerprint={:016x} seed={} stations={}\n", trace.fingerprint,
             trace.seed, trace.counters.size());
  out << kTraceColumns << '\n';
  std::string ids;
  for (const auto& rec : trace.slots) {
    ids.clear();
    for (std::size_t k = 0; k < rec.transmitters.size(); ++k) {
      if (k > 0) ids += ';';
      ids += std::to_string(rec.transmitters[k]);
    }
    fmt::print(out, "{},{},{},{},{},{}\n", rec.slot_index, outcome_code(rec.outcome), ids,
               rec.n_packets, rec.duration_us, rec.wall_time_start_us);
  }
}

Trace read_trace(std::istream& in) {
  Trace trace;
  std::string line;
  std::size_t line_no = 0;

  if (!std::getline(in, line)) throw ParseError("empty trace", 1);
  ++line_no;
  if (line.rfind("# ecasim-trace", 0) != 0) throw ParseError("missing trace header", line_no);
  trace.fingerprint = parse_number<std::uint64_t>(header_field(line, "fingerprint", line_no), line_no, 16);
  trace.seed = parse_number<std::uint64_t>(header_field(line, "seed", line_no), line_no);
  const auto n_stations = parse_number<std::size_t>(header_field(line, "stations", line_no), line_no);
  trace.counters.assign(n_stations, StationCounters{});

  if (!std::getline(in, line) || line != kTraceColumns) {
    throw ParseError("unexpected column header", line_no + 1);
  }
  ++line_no;

  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto cols = split(line, ',');
    if (cols.size() != 6) throw ParseError("expected 6 columns", line_no);
    SlotRecord rec;
    rec.slot_index = parse_number<std::uint64_t>(cols[0], line_no);
    if (cols[1].size() != 1) throw ParseError("bad outcome code", line_no);
    try {
      rec.outcome = outcome_from_code(cols[1][0]);
    } catch (const ConfigError& e) {
      throw ParseError(e.what(), line_no);
    }
    if (!cols[2].empty()) {
      for (const auto id : split(cols[2], ';')) {
        const auto station = parse_number<std::uint32_t>(id, line_no);
        if (station >= n_stations) throw ParseError("station id out of range", line_no);
        rec.transmitters.push_back(station);
      }
    }
    rec.n_packets = parse_number<std::uint32_t>(cols[3], line_no);
    rec.duration_us = parse_number<std::int64_t>(cols[4], line_no);
    rec.wall_time_start_us = parse_number<std::int64_t>(cols[5], line_no);

    for (const auto id : rec.transmitters) {
      StationCounters& c = trace.counters[id];
      ++c.attempts;
      if (rec.failed()) ++c.failures;
      if (rec.outcome == SlotOutcome::kSuccess) {
        ++c.successes;
        c.packets += rec.n_packets;
      }
    }
    trace.wall_time_us = rec.wall_time_start_us + rec.duration_us;
    trace.slot_count = rec.slot_index + 1;
    trace.slots.push_back(std::move(rec));
  }
  return trace;
}

}  // namespace ecasim
