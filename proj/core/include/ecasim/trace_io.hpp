#pragma once

#include <iosfwd>

#include "ecasim/channel.hpp"

namespace ecasim {

// Trace file layout, one slot per line:
//
//   # ecasim-trace fingerprint=<16 hex> seed=<u64> stations=<n>
//   slot_index,outcome_code,transmitter_ids,n_packets,duration_us,wall_time_us
//   0,E,,0,20,0
//   1,C,0;3,0,1200,20
//
// outcome_code is E/S/C/X (empty, success, collision, channel error),
// transmitter_ids are ';'-separated and wall_time_us is the slot start.

inline constexpr const char* kTraceColumns =
    "slot_index,outcome_code,transmitter_ids,n_packets,duration_us,wall_time_us";

void write_trace(std::ostream& out, const Trace& trace);

/// Rebuilds slot records and the counters derivable from them (access delay
/// is not stored and reads back as zero). Throws ParseError with a line number.
Trace read_trace(std::istream& in);

}  // namespace ecasim
