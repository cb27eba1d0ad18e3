#include "ecasim/scenario.hpp"

#include <algorithm>
#include <charconv>
#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

#include <fmt/format.h>
#include <yaml-cpp/yaml.h>

#include "ecasim/error.hpp"

#ifndef ECASIM_SCENARIO_DIR
#define ECASIM_SCENARIO_DIR "scenarios"
#endif

namespace ecasim {
namespace {

std::size_t line_of(const YAML::Node& node) {
  const auto mark = node.Mark();
  return mark.line >= 0 ? static_cast<std::size_t>(mark.line) + 1 : 0;
}

void check_keys(const YAML::Node& map, std::initializer_list<std::string_view> allowed,
                std::string_view where) {
  if (!map.IsMap()) throw ParseError(fmt::format("{} must be a mapping", where), line_of(map));
  for (const auto& kv : map) {
    const auto key = kv.first.as<std::string>();
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
      throw ParseError(fmt::format("unknown key '{}' in {}", key, where), line_of(kv.first));
    }
  }
}

template <class T>
T scalar(const YAML::Node& node, std::string_view field) {
  try {
    return node.as<T>();
  } catch (const YAML::Exception&) {
    throw ParseError(fmt::format("field '{}' has the wrong type", field), line_of(node));
  }
}

// Protocol knobs that may appear at the top level or inside a group.
struct ProtocolKnobs {
  std::optional<std::string> protocol;
  std::optional<std::uint32_t> cw_min, cw_max, c0, j_max, adapt_window;
  std::optional<double> adapt_threshold;
  std::optional<bool> allow_halving;
  std::optional<TrafficModel> traffic;
};

TrafficModel parse_traffic(const YAML::Node& node) {
  if (node.IsScalar()) {
    const auto model = scalar<std::string>(node, "traffic");
    if (model == "saturated") return TrafficModel::saturated();
    throw ParseError(fmt::format("unknown traffic model '{}'", model), line_of(node));
  }
  check_keys(node, {"model", "arrival_prob", "queue_capacity", "join_rate"}, "traffic");
  if (!node["model"]) throw ParseError("traffic needs a 'model'", line_of(node));
  const auto model = scalar<std::string>(node["model"], "traffic.model");
  if (model == "saturated") return TrafficModel::saturated();
  if (model == "bernoulli") {
    return TrafficModel::bernoulli(
        node["arrival_prob"] ? scalar<double>(node["arrival_prob"], "arrival_prob") : 0.0,
        node["queue_capacity"] ? scalar<std::uint32_t>(node["queue_capacity"], "queue_capacity")
                               : 1);
  }
  if (model == "single_packet") {
    return TrafficModel::single_packet(
        node["join_rate"] ? scalar<double>(node["join_rate"], "join_rate") : 0.0);
  }
  throw ParseError(fmt::format("unknown traffic model '{}'", model), line_of(node["model"]));
}

void read_knobs(const YAML::Node& map, ProtocolKnobs& k) {
  if (auto n = map["protocol"]) k.protocol = scalar<std::string>(n, "protocol");
  if (auto n = map["cw_min"]) k.cw_min = scalar<std::uint32_t>(n, "cw_min");
  if (auto n = map["cw_max"]) k.cw_max = scalar<std::uint32_t>(n, "cw_max");
  if (auto n = map["c0"]) k.c0 = scalar<std::uint32_t>(n, "c0");
  if (auto n = map["j_max"]) k.j_max = scalar<std::uint32_t>(n, "j_max");
  if (auto n = map["adapt_window"]) k.adapt_window = scalar<std::uint32_t>(n, "adapt_window");
  if (auto n = map["adapt_threshold"]) k.adapt_threshold = scalar<double>(n, "adapt_threshold");
  if (auto n = map["allow_halving"]) k.allow_halving = scalar<bool>(n, "allow_halving");
  if (auto n = map["traffic"]) k.traffic = parse_traffic(n);
}

ProtocolKnobs overlay(ProtocolKnobs base, const ProtocolKnobs& top) {
  auto pick = [](auto& dst, const auto& src) {
    if (src) dst = src;
  };
  pick(base.protocol, top.protocol);
  pick(base.cw_min, top.cw_min);
  pick(base.cw_max, top.cw_max);
  pick(base.c0, top.c0);
  pick(base.j_max, top.j_max);
  pick(base.adapt_window, top.adapt_window);
  pick(base.adapt_threshold, top.adapt_threshold);
  pick(base.allow_halving, top.allow_halving);
  pick(base.traffic, top.traffic);
  return base;
}

std::pair<ProtocolConfig, TrafficModel> realize(const ProtocolKnobs& k, std::size_t line) {
  ProtocolConfig cfg;
  if (k.protocol) {
    try {
      cfg.kind = ProtocolKind::parse(*k.protocol);
    } catch (const ConfigError& e) {
      throw ValidationError("protocol", e.what());
    }
  } else {
    throw ParseError("station group needs a 'protocol'", line);
  }
  if (k.cw_min) cfg.cw_min = *k.cw_min;
  if (k.cw_max) cfg.cw_max = *k.cw_max;
  cfg.base_cycle = k.c0 ? *k.c0 : cfg.cw_min;
  if (k.j_max) cfg.max_schedule_exponent = *k.j_max;
  if (k.adapt_window) cfg.adapt_window = *k.adapt_window;
  if (k.adapt_threshold) cfg.adapt_threshold = *k.adapt_threshold;
  if (k.allow_halving) cfg.allow_schedule_halving = *k.allow_halving;
  return {cfg, k.traffic.value_or(TrafficModel::saturated())};
}

// Rewraps a ConfigError from a validate() call as a ValidationError whose
// field is the message's first word.
template <class F>
void as_validation(F&& f) {
  try {
    f();
  } catch (const ConfigError& e) {
    const std::string what = e.what();
    throw ValidationError(what.substr(0, what.find(' ')), what);
  }
}

std::vector<std::uint64_t> seed_range(std::uint64_t base, std::uint64_t count) {
  std::vector<std::uint64_t> seeds(count);
  for (std::uint64_t i = 0; i < count; ++i) seeds[i] = base + i;
  return seeds;
}

template <class T>
std::optional<T> number(std::string_view s) {
  T v{};
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size()) return std::nullopt;
  return v;
}

}  // namespace

void Scenario::validate() const {
  if (groups.empty()) throw ValidationError("groups", "at least one station group is required");
  if (seeds.empty()) throw ValidationError("seeds", "at least one seed is required");
  if (std::set<std::uint64_t>(seeds.begin(), seeds.end()).size() != seeds.size()) {
    throw ValidationError("seeds", "seeds must be distinct");
  }
  if (horizon.value == 0) throw ValidationError("horizon", "horizon must be positive");
  if (sweep) {
    if (groups.size() != 1) {
      throw ValidationError("sweep", "sweep requires a single station group");
    }
    if (sweep->n_values.empty() || sweep->protocols.empty()) {
      throw ValidationError("sweep", "sweep needs at least one n and one protocol");
    }
    for (const auto n : sweep->n_values) {
      if (n == 0) throw ValidationError("sweep", "sweep n values must be positive");
    }
  }
  as_validation([&] {
    for (const auto& cell : cells()) cell.run.validate();
  });
}

std::vector<Scenario::Cell> Scenario::cells() const {
  std::vector<Cell> out;
  auto base_run = [&] {
    RunConfig rc;
    rc.durations = durations;
    rc.impairments = impairments;
    rc.horizon = horizon;
    return rc;
  };
  if (sweep) {
    for (const auto& kind : sweep->protocols) {
      for (const auto n : sweep->n_values) {
        Cell cell{kind.name(), n, base_run()};
        StationGroup group = groups.front();
        group.count = n;
        group.protocol.kind = kind;
        cell.run.groups.push_back(group);
        out.push_back(std::move(cell));
      }
    }
    return out;
  }
  Cell cell{"", 0, base_run()};
  cell.run.groups = groups;
  for (const auto& g : groups) {
    if (!cell.protocol.empty()) cell.protocol += '+';
    cell.protocol += g.protocol.kind.name();
    cell.n_stations += g.count;
  }
  out.push_back(std::move(cell));
  return out;
}

Scenario parse_scenario(std::string_view text, std::string default_name) {
  YAML::Node root;
  try {
    root = YAML::Load(std::string(text));
  } catch (const YAML::Exception& e) {
    throw ParseError(e.msg, e.mark.line >= 0 ? static_cast<std::size_t>(e.mark.line) + 1 : 0);
  }
  if (!root || root.IsNull()) throw ParseError("empty scenario", 1);
  check_keys(root,
             {"name", "protocol", "n", "cw_min", "cw_max", "c0", "j_max", "adapt_window",
              "adapt_threshold", "allow_halving", "traffic", "groups", "durations", "impairments",
              "horizon", "seeds", "sweep", "output"},
             "scenario");

  Scenario sc;
  sc.name = root["name"] ? scalar<std::string>(root["name"], "name") : std::move(default_name);

  ProtocolKnobs top;
  read_knobs(root, top);

  if (root["groups"] && root["n"]) {
    throw ParseError("use either 'groups' or 'n', not both", line_of(root["n"]));
  }
  if (const auto groups = root["groups"]) {
    if (!groups.IsSequence()) throw ParseError("'groups' must be a list", line_of(groups));
    for (const auto& g : groups) {
      check_keys(g,
                 {"count", "protocol", "cw_min", "cw_max", "c0", "j_max", "adapt_window",
                  "adapt_threshold", "allow_halving", "traffic"},
                 "group");
      ProtocolKnobs own;
      read_knobs(g, own);
      // A group's own cw_min also moves its default c0 unless c0 is explicit somewhere.
      ProtocolKnobs merged = overlay(top, own);
      if (own.cw_min && !own.c0 && !top.c0) merged.c0.reset();
      auto [cfg, traffic] = realize(merged, line_of(g));
      if (!g["count"]) throw ParseError("group needs a 'count'", line_of(g));
      sc.groups.push_back({scalar<std::uint32_t>(g["count"], "count"), cfg, traffic});
    }
  } else {
    const std::uint32_t n = root["n"] ? scalar<std::uint32_t>(root["n"], "n") : 1;
    if (!top.protocol && root["sweep"]) top.protocol = "CA";
    auto [cfg, traffic] = realize(top, 1);
    sc.groups.push_back({n, cfg, traffic});
  }

  if (const auto d = root["durations"]) {
    check_keys(d, {"sigma", "t_overhead", "t_payload", "t_collision"}, "durations");
    if (d["sigma"]) sc.durations.sigma = scalar<std::int64_t>(d["sigma"], "sigma");
    if (d["t_overhead"]) sc.durations.t_overhead = scalar<std::int64_t>(d["t_overhead"], "t_overhead");
    if (d["t_payload"]) sc.durations.t_payload = scalar<std::int64_t>(d["t_payload"], "t_payload");
    if (d["t_collision"]) sc.durations.t_collision = scalar<std::int64_t>(d["t_collision"], "t_collision");
  }
  if (const auto imp = root["impairments"]) {
    check_keys(imp, {"p_err", "p_misalign"}, "impairments");
    if (imp["p_err"]) sc.impairments.p_err = scalar<double>(imp["p_err"], "p_err");
    if (imp["p_misalign"]) sc.impairments.p_misalign = scalar<double>(imp["p_misalign"], "p_misalign");
  }
  if (const auto h = root["horizon"]) {
    if (h.IsScalar()) {
      sc.horizon = parse_horizon(scalar<std::string>(h, "horizon"));
    } else {
      check_keys(h, {"slots", "us"}, "horizon");
      if (h["slots"] && h["us"]) throw ParseError("horizon takes 'slots' or 'us'", line_of(h));
      sc.horizon = h["us"] ? Horizon::microseconds(scalar<std::uint64_t>(h["us"], "horizon.us"))
                           : Horizon::slots(scalar<std::uint64_t>(h["slots"], "horizon.slots"));
    }
  }
  if (const auto s = root["seeds"]) {
    if (s.IsSequence()) {
      sc.seeds.clear();
      for (const auto& v : s) sc.seeds.push_back(scalar<std::uint64_t>(v, "seeds"));
    } else if (s.IsMap()) {
      check_keys(s, {"base", "count"}, "seeds");
      const std::uint64_t base = s["base"] ? scalar<std::uint64_t>(s["base"], "seeds.base") : 1;
      const std::uint64_t count = s["count"] ? scalar<std::uint64_t>(s["count"], "seeds.count") : 1;
      sc.seeds = seed_range(base, count);
    } else {
      sc.seeds = parse_seed_spec(scalar<std::string>(s, "seeds"));
    }
  }
  if (const auto sw = root["sweep"]) {
    check_keys(sw, {"n", "protocols"}, "sweep");
    SweepAxes axes;
    if (sw["n"]) {
      for (const auto& v : sw["n"]) axes.n_values.push_back(scalar<std::uint32_t>(v, "sweep.n"));
    } else {
      axes.n_values.push_back(sc.groups.front().count);
    }
    if (sw["protocols"]) {
      for (const auto& v : sw["protocols"]) {
        try {
          axes.protocols.push_back(ProtocolKind::parse(scalar<std::string>(v, "sweep.protocols")));
        } catch (const ConfigError& e) {
          throw ValidationError("sweep.protocols", e.what());
        }
      }
    } else {
      axes.protocols.push_back(sc.groups.front().protocol.kind);
    }
    sc.sweep = std::move(axes);
  }
  if (const auto out = root["output"]) {
    check_keys(out, {"dir", "trace"}, "output");
    if (out["dir"]) sc.out_dir = scalar<std::string>(out["dir"], "output.dir");
    if (out["trace"]) sc.emit_traces = scalar<bool>(out["trace"], "output.trace");
  }

  sc.validate();
  return sc;
}

Scenario load_scenario(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError(fmt::format("cannot read scenario '{}'", path.string()));
  std::ostringstream text;
  text << in.rdbuf();
  return parse_scenario(text.str(), path.stem().string());
}

std::filesystem::path bundled_scenario_dir() {
  if (const char* env = std::getenv("ECASIM_SCENARIO_DIR")) return env;
  return ECASIM_SCENARIO_DIR;
}

std::filesystem::path resolve_scenario(std::string_view name_or_path) {
  std::filesystem::path path(name_or_path);
  if (std::filesystem::exists(path)) return path;
  auto bundled = bundled_scenario_dir() / path;
  if (!bundled.has_extension()) bundled += ".yaml";
  if (std::filesystem::exists(bundled)) return bundled;
  return path;
}

Horizon parse_horizon(std::string_view text) {
  const bool micro = text.size() > 2 && text.substr(text.size() - 2) == "us";
  const auto digits = micro ? text.substr(0, text.size() - 2) : text;
  const auto value = number<std::uint64_t>(digits);
  if (!value || *value == 0) {
    throw ValidationError("horizon", fmt::format("horizon must be a positive count, got '{}'", text));
  }
  return micro ? Horizon::microseconds(*value) : Horizon::slots(*value);
}

std::vector<std::uint64_t> parse_seed_spec(std::string_view text) {
  if (const auto dots = text.find(".."); dots != std::string_view::npos) {
    const auto lo = number<std::uint64_t>(text.substr(0, dots));
    const auto hi = number<std::uint64_t>(text.substr(dots + 2));
    if (!lo || !hi || *hi < *lo) throw ValidationError("seeds", fmt::format("bad seed range '{}'", text));
    return seed_range(*lo, *hi - *lo + 1);
  }
  if (text.find(',') != std::string_view::npos) {
    std::vector<std::uint64_t> seeds;
    std::size_t start = 0;
    while (start <= text.size()) {
      const auto comma = text.find(',', start);
      const auto part = text.substr(start, comma == std::string_view::npos ? comma : comma - start);
      const auto v = number<std::uint64_t>(part);
      if (!v) throw ValidationError("seeds", fmt::format("bad seed '{}'", part));
      seeds.push_back(*v);
      if (comma == std::string_view::npos) break;
      start = comma + 1;
    }
    return seeds;
  }
  const auto count = number<std::uint64_t>(text);
  if (!count || *count == 0) throw ValidationError("seeds", fmt::format("bad seed count '{}'", text));
  return seed_range(1, *count);
}

}  // namespace ecasim
