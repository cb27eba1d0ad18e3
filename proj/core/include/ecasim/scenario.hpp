#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "ecasim/channel.hpp"

namespace ecasim {

struct SweepAxes {
  std::vector<std::uint32_t> n_values;
  std::vector<ProtocolKind> protocols;
};

/// A full experiment: station mix, channel, horizon, seeds and outputs.
struct Scenario {
  std::string name;
  std::vector<StationGroup> groups;
  SlotDurations durations;
  ImpairmentModel impairments;
  Horizon horizon;
  std::vector<std::uint64_t> seeds{1};
  // When set, each (protocol, n) pair replaces the single station group.
  std::optional<SweepAxes> sweep;
  std::filesystem::path out_dir;  // empty: caller decides
  bool emit_traces = false;

  /// Throws ValidationError naming the field.
  void validate() const;

  struct Cell {
    std::string protocol;  // label, e.g. "ECA" or "CA+ECA" for mixes
    std::uint32_t n_stations = 0;
    RunConfig run;
  };
  /// One entry per (protocol, n) pair, protocol-major in file order.
  std::vector<Cell> cells() const;
};

/// Parses scenario YAML. Omitted fields take their defaults:
/// cw_min 16, cw_max 1024, c0 = cw_min, sigma 20, t_overhead 200,
/// t_payload 1000, t_collision 1200, saturated traffic, ideal channel,
/// horizon 100000 slots, seeds [1].
/// Throws ParseError (with line) or ValidationError (with field).
Scenario parse_scenario(std::string_view text, std::string default_name = "scenario");

/// Reads and parses a scenario file; the file stem is the default name.
/// Throws IoError if the file cannot be read.
Scenario load_scenario(const std::filesystem::path& path);

/// `path` if it exists, else `<bundled dir>/<name>.yaml` for bundled names
/// such as "fig5_sweep".
std::filesystem::path resolve_scenario(std::string_view name_or_path);
std::filesystem::path bundled_scenario_dir();

/// "100000" is slots, "2500000us" microseconds. Throws ValidationError.
Horizon parse_horizon(std::string_view text);

/// "30" is seeds 1..30, "5..9" an inclusive range, "3,7,11" a list.
std::vector<std::uint64_t> parse_seed_spec(std::string_view text);

}  // namespace ecasim
