#include "nodnav/io.hpp"

#include <yaml-cpp/yaml.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <istream>
#include <limits>
#include <map>
#include <ostream>
#include <sstream>
#include <type_traits>

namespace nodnav::io {

using sim::ConfigError;

namespace {

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path.string() + ": cannot open");
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

YAML::Node parse_yaml(const std::string& text, const std::string& source) {
  try {
    return YAML::Load(text);
  } catch (const YAML::Exception& e) {
    throw ConfigError(source + ": " + e.what());
  }
}

void check_schema(const YAML::Node& root, const std::string& source) {
  if (!root.IsMap()) throw ConfigError(source + ": expected a mapping at the top level");
  if (const auto s = root["schema"]; s && s.as<int>() != kFileSchema)
    throw ConfigError(source + ": schema: unsupported version " + s.as<std::string>());
}

template <class T>
T scalar(const YAML::Node& n, const std::string& name) {
  try {
    return n.as<T>();
  } catch (const YAML::Exception&) {
    throw ConfigError(name + ": cannot read value '" + (n.IsScalar() ? n.Scalar() : "<non-scalar>") + "'");
  }
}

Vec2 point(const YAML::Node& n, const std::string& name) {
  if (!n.IsSequence() || n.size() != 2) throw ConfigError(name + ": expected [x, y]");
  return {scalar<double>(n[0], name), scalar<double>(n[1], name)};
}

std::vector<Vec2> points(const YAML::Node& n, const std::string& name) {
  if (!n || !n.IsSequence()) throw ConfigError(name + ": expected a list of [x, y] points");
  std::vector<Vec2> out;
  for (std::size_t i = 0; i < n.size(); ++i) out.push_back(point(n[i], name + "[" + std::to_string(i) + "]"));
  return out;
}

std::vector<std::vector<double>> rows(const YAML::Node& n, const std::string& name) {
  if (!n.IsSequence()) throw ConfigError(name + ": expected a list of rows");
  std::vector<std::vector<double>> out;
  for (std::size_t i = 0; i < n.size(); ++i) {
    const std::string row_name = name + "[" + std::to_string(i) + "]";
    if (!n[i].IsSequence()) throw ConfigError(row_name + ": expected a list of numbers");
    std::vector<double> row;
    for (const auto& v : n[i]) row.push_back(scalar<double>(v, row_name));
    out.push_back(std::move(row));
  }
  return out;
}

template <class V>
void assign(V& field, const std::string& name, const std::string& text) {
  auto fail = [&] { throw ConfigError(name + ": cannot parse '" + text + "'"); };
  if constexpr (std::is_same_v<V, double>) {
    std::size_t used = 0;
    try {
      field = std::stod(text, &used);
    } catch (const std::exception&) {
      fail();
    }
    if (used != text.size()) fail();
  } else if constexpr (std::is_same_v<V, int> || std::is_same_v<V, std::uint64_t>) {
    std::size_t used = 0;
    long long v = 0;
    try {
      v = std::stoll(text, &used);
    } catch (const std::exception&) {
      fail();
    }
    if (used != text.size() || (std::is_same_v<V, std::uint64_t> && v < 0)) fail();
    field = static_cast<V>(v);
  } else if constexpr (std::is_same_v<V, bool>) {
    if (text == "true") field = true;
    else if (text == "false") field = false;
    else fail();
  } else if constexpr (std::is_same_v<V, nod::MaskedTermMode>) {
    field = sim::parse_masked_mode(text);
  } else {
    // Comma-separated sample budgets.
    V values;
    std::stringstream s(text);
    std::string item;
    while (std::getline(s, item, ',')) {
      std::size_t used = 0;
      long long v = 0;
      try {
        v = std::stoll(item, &used);
      } catch (const std::exception&) {
        fail();
      }
      if (used != item.size() || v < 0) fail();
      values.push_back(static_cast<std::size_t>(v));
    }
    if (values.empty()) fail();
    field = std::move(values);
  }
}

bool set_field(sim::SimConfig& config, const std::string& key, const std::string& text) {
  bool found = false;
  sim::visit_fields(config, [&](const char* name, auto& field) {
    if (key == name) {
      assign(field, key, text);
      found = true;
    }
  });
  return found;
}

std::string fmt(double v) {
  if (std::isnan(v)) return "nan";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

}  // namespace

sim::Scenario parse_scenario(const std::string& text, const std::string& source) {
  const YAML::Node root = parse_yaml(text, source);
  check_schema(root, source);
  static const char* known[] = {"schema", "name",   "label", "n_robots", "origins",
                                "destinations", "initial_opinions", "biases", "k"};
  for (const auto& kv : root) {
    const auto key = kv.first.as<std::string>();
    if (std::find(std::begin(known), std::end(known), key) == std::end(known))
      throw ConfigError(source + ": unknown field '" + key + "'");
  }
  sim::Scenario s;
  try {
    s.name = root["name"] ? scalar<std::string>(root["name"], "name") : std::filesystem::path(source).stem().string();
    s.label = root["label"] ? scalar<std::string>(root["label"], "label") : s.name;
    s.origins = points(root["origins"], "origins");
    s.destinations = points(root["destinations"], "destinations");
    if (const auto n = root["n_robots"]; n && scalar<int>(n, "n_robots") != s.robots())
      throw ConfigError("n_robots: does not match the number of origins");
    if (const auto z = root["initial_opinions"]) {
      if (z.IsScalar()) {
        const auto kind = z.as<std::string>();
        if (kind == "zero") s.initial = sim::InitialOpinions::Zero;
        else if (kind == "distance_based") s.initial = sim::InitialOpinions::DistanceBased;
        else throw ConfigError("initial_opinions: expected zero, distance_based or a list of rows");
      } else {
        s.initial = sim::InitialOpinions::Explicit;
        s.opinions = rows(z, "initial_opinions");
      }
    }
    if (const auto b = root["biases"]) s.biases = rows(b, "biases");
    if (const auto k = root["k"]) {
      s.k = scalar<int>(k, "k");
      if (s.k < 0) throw ConfigError("k: must be nonnegative");
    }
    s.validate(Environment::corridor_world());
  } catch (const ConfigError& e) {
    throw ConfigError(source + ": " + e.what());
  }
  return s;
}

sim::Scenario load_scenario(const std::filesystem::path& path) {
  return parse_scenario(read_file(path), path.string());
}

sim::SimConfig parse_config(const std::string& text, const std::string& source) {
  const YAML::Node root = parse_yaml(text, source);
  sim::SimConfig config;
  if (root.IsNull()) return config;
  check_schema(root, source);
  for (const auto& section : root) {
    const auto name = section.first.as<std::string>();
    if (name == "schema") continue;
    if (!section.second.IsMap()) throw ConfigError(source + ": " + name + ": expected a mapping");
    for (const auto& kv : section.second) {
      const std::string key = name + "." + kv.first.as<std::string>();
      std::string value;
      if (kv.second.IsSequence()) {
        for (std::size_t i = 0; i < kv.second.size(); ++i)
          value += (i ? "," : "") + kv.second[i].as<std::string>();
      } else if (kv.second.IsScalar()) {
        value = kv.second.Scalar();
      } else {
        throw ConfigError(source + ": " + key + ": expected a value");
      }
      try {
        if (!set_field(config, key, value)) throw ConfigError("unknown field '" + key + "'");
      } catch (const ConfigError& e) {
        throw ConfigError(source + ": " + e.what());
      }
    }
  }
  config.validate();
  return config;
}

sim::SimConfig load_config(const std::filesystem::path& path) {
  return parse_config(read_file(path), path.string());
}

void apply_override(sim::SimConfig& config, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0)
    throw ConfigError("override '" + assignment + "': expected key=value");
  const std::string key = assignment.substr(0, eq);
  if (!set_field(config, key, assignment.substr(eq + 1)))
    throw ConfigError("override: unknown field '" + key + "'");
  config.validate();
}

std::string provenance(const sim::SimConfig& config, const std::string& extra) {
  char hash[17];
  std::snprintf(hash, sizeof hash, "%016llx", static_cast<unsigned long long>(config.hash()));
  std::string line = "# schema=" + std::to_string(kFileSchema) + " config_hash=" + hash +
                     " seed=" + std::to_string(config.seed);
  if (!extra.empty()) line += " " + extra;
  return line;
}

AggregateRow aggregate_row(const sim::Scenario& scenario, const sim::BatchResult& result) {
  AggregateRow row{scenario.name, scenario.capacity(), result.trials, result.success_rate(), {}, result.mean_time};
  for (std::size_t s = 0; s < result.strategy_counts.size(); ++s) row.frequencies.push_back(result.frequency(s));
  return row;
}

void write_aggregate_csv(std::ostream& out, const std::vector<AggregateRow>& rows,
                         const std::string& provenance_line) {
  const std::size_t ns = rows.empty() ? 0 : rows.front().frequencies.size();
  out << provenance_line << '\n' << "scenario,k,trials,success_rate";
  for (std::size_t s = 0; s < ns; ++s) out << ",S_" << s + 1;
  out << ",mean_time\n";
  for (const auto& r : rows) {
    if (r.frequencies.size() != ns) throw std::invalid_argument("write_aggregate_csv: mixed strategy counts");
    out << r.scenario << ',' << r.k << ',' << r.trials << ',' << fmt(r.success_rate);
    for (double f : r.frequencies) out << ',' << fmt(f);
    out << ',' << fmt(r.mean_time) << '\n';
  }
}

std::vector<AggregateRow> read_aggregate_csv(std::istream& in) {
  std::vector<AggregateRow> rows;
  std::string line;
  bool header = false;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::vector<std::string> cells;
    std::stringstream s(line);
    std::string cell;
    while (std::getline(s, cell, ',')) cells.push_back(cell);
    if (!header) {
      if (cells.size() < 5 || cells[0] != "scenario") throw ConfigError("aggregate csv: bad header");
      header = true;
      continue;
    }
    if (cells.size() < 5) throw ConfigError("aggregate csv: short row '" + line + "'");
    AggregateRow r;
    r.scenario = cells[0];
    r.k = std::stoi(cells[1]);
    r.trials = std::stoi(cells[2]);
    r.success_rate = std::stod(cells[3]);
    for (std::size_t i = 4; i + 1 < cells.size(); ++i) r.frequencies.push_back(std::stod(cells[i]));
    r.mean_time = cells.back() == "nan" ? std::numeric_limits<double>::quiet_NaN() : std::stod(cells.back());
    rows.push_back(std::move(r));
  }
  return rows;
}

void write_sweep_csv(std::ostream& out, const std::vector<sim::HeatmapCell>& cells,
                     const std::string& provenance_line) {
  out << provenance_line << '\n' << "z11_0,z21_0,x11,x21\n";
  out << std::setprecision(17);
  for (const auto& c : cells) out << c.z11 << ',' << c.z21 << ',' << c.x11 << ',' << c.x21 << '\n';
}

std::string format_table(const std::vector<AggregateRow>& rows) {
  std::ostringstream out;
  std::size_t ns = 0;
  for (const auto& r : rows) ns = std::max(ns, r.frequencies.size());
  const int n_robots = ns == 24 ? 4 : ns == 6 ? 3 : ns == 2 ? 2 : 1;
  std::vector<std::string> names;
  for (const auto& s : game::enumerate_strategies(n_robots)) names.push_back(s.to_string());
  out << std::left << std::setw(14) << "scenario" << std::setw(4) << "k" << std::setw(8) << "trials"
      << std::setw(10) << "success";
  for (std::size_t s = 0; s < ns; ++s)
    out << std::setw(12) << ("S" + std::to_string(s + 1) + " " + names[s]);
  out << "mean_time\n";
  for (const auto& r : rows) {
    out << std::setw(14) << r.scenario << std::setw(4) << r.k << std::setw(8) << r.trials
        << std::setw(10) << (fmt(r.success_rate) + "%");
    for (std::size_t s = 0; s < ns; ++s)
      out << std::setw(12) << (s < r.frequencies.size() ? fmt(r.frequencies[s]) + "%" : "-");
    out << fmt(r.mean_time) << '\n';
  }
  return out.str();
}

}  // namespace nodnav::io
