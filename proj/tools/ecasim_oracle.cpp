// ecasim-oracle: exact convergence-slot distribution for a toy saturated
// network, written as CSV (slot_index,probability; last row is "never").

#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "ecasim/error.hpp"
#include "ecasim/oracle.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Exact convergence distribution by exhaustive enumeration"};

  ecasim::ExactQuery query;
  query.protocol.cw_min = 4;
  query.protocol.cw_max = 64;
  std::optional<std::uint32_t> c0;
  std::string protocol = "ECA";
  std::optional<std::string> out_path;

  app.add_option("-n,--stations", query.n_stations, "Number of stations (1-3)");
  app.add_option("--protocol", protocol, "CA, ECA, StickyECA(k), ProbStickyECA(p), AdaptiveECA");
  app.add_option("--cw-min", query.protocol.cw_min, "Minimum contention window (<= 8)");
  app.add_option("--cw-max", query.protocol.cw_max, "Maximum contention window");
  app.add_option("--c0", c0, "Deterministic cycle length (<= 8, default cw-min)");
  app.add_option("--horizon", query.horizon_slots, "Slots to expand");
  app.add_option("-o,--out", out_path, "Output CSV (default stdout)");

  CLI11_PARSE(app, argc, argv);

  try {
    query.protocol.kind = ecasim::ProtocolKind::parse(protocol);
    query.protocol.base_cycle = c0.value_or(query.protocol.cw_min);
    const auto dist = ecasim::exact_convergence_distribution(query);
    if (out_path) {
      std::ofstream out(*out_path);
      if (!out) throw ecasim::IoError("cannot write " + *out_path);
      ecasim::write_distribution_csv(out, dist);
    } else {
      ecasim::write_distribution_csv(std::cout, dist);
    }
    return 0;
  } catch (const ecasim::Error& e) {
    std::cerr << "ecasim-oracle: " << e.what() << '\n';
    return e.exit_code();
  }
}
