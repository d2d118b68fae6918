#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "cli.hpp"
#include "doctest.h"
#include "nodnav/io.hpp"

using namespace nodnav;
namespace fs = std::filesystem;

namespace {

const fs::path kSource = NODNAV_SOURCE_DIR;
const fs::path kShared = NODNAV_TEST_CACHE;

struct Result {
  int code;
  std::string out, err;
};

Result invoke(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

fs::path fresh_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("nodnav_test_cli_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

std::string error_of(const std::string& yaml) {
  try {
    io::parse_scenario(yaml, "case.yaml");
  } catch (const sim::ConfigError& e) {
    return e.what();
  }
  return "";
}

const std::string one_robot = (kSource / "tests/data/1r_diagonal.yaml").string();

}  // namespace

TEST_CASE("shipped scenario loads") {
  const auto s = io::load_scenario(kSource / "scenarios/2r_case1.yaml");
  CHECK(s.name == "2r_case1");
  CHECK(s.robots() == 2);
  CHECK(s.capacity() == 1);
  CHECK(s.initial == sim::InitialOpinions::Zero);
  for (const char* name : {"3r_case2_distance", "3r_case3_bias", "4r_case4"})
    CHECK_NOTHROW(io::load_scenario(kSource / "scenarios" / (std::string(name) + ".yaml")));
  CHECK_NOTHROW(io::load_config(kSource / "configs/default.yaml"));
}

TEST_CASE("scenario errors name the field") {
  const std::string close = error_of(
      "schema: 1\norigins: [[-5, 1], [-5, 1.2]]\ndestinations: [[5, 1], [5, -1]]\n");
  CHECK(close.find("origins") != std::string::npos);
  const std::string unknown = error_of(
      "schema: 1\norigins: [[-5, 1]]\ndestinations: [[5, 1]]\nspeed: 3\n");
  CHECK(unknown.find("speed") != std::string::npos);
  CHECK(unknown.find("case.yaml") != std::string::npos);
  CHECK(error_of("schema: 2\norigins: [[-5, 1]]\ndestinations: [[5, 1]]\n").find("schema") !=
        std::string::npos);
  CHECK(error_of("schema: 1\norigins: [[-5, 1]]\ndestinations: [[5, 1]]\nbiases: [[1, 2]]\n") != "");
}

TEST_CASE("overrides") {
  sim::SimConfig c;
  io::apply_override(c, "nod.u=12.5");
  CHECK(c.nod.u == 12.5);
  io::apply_override(c, "planner.budgets=100,200");
  CHECK(c.planner.budgets == std::vector<std::size_t>{100, 200});
  CHECK_THROWS_AS(io::apply_override(c, "nod.speed=1"), sim::ConfigError);
  CHECK_THROWS_AS(io::apply_override(c, "nod.u=fast"), sim::ConfigError);
  CHECK_THROWS_AS(io::apply_override(c, "sim.dt=-1"), sim::ConfigError);
  CHECK_THROWS_AS(io::apply_override(c, "nod.u"), sim::ConfigError);
  CHECK_THROWS_AS(io::parse_config("schema: 1\nnod:\n  speed: 2\n"), sim::ConfigError);
  CHECK(io::parse_config("schema: 1\nnod:\n  u: 3\n").nod.u == 3.0);
}

TEST_CASE("batch CSV matches the golden file") {
  const fs::path out = fresh_dir("golden");
  const std::vector<std::string> args{"batch", "--scenario", one_robot, "--trials", "3",
                                      "--cache-dir", kShared.string(), "--out", out.string()};
  const Result r = invoke(args);
  REQUIRE(r.code == 0);
  const std::string csv = slurp(out / "1r_diagonal_k0.csv");
  CHECK(csv == slurp(kSource / "tests/data/1r_diagonal_k0.csv"));
  REQUIRE(invoke(args).code == 0);
  CHECK(slurp(out / "1r_diagonal_k0.csv") == csv);

  std::istringstream in(csv);
  const auto rows = io::read_aggregate_csv(in);
  REQUIRE(rows.size() == 1);
  CHECK(rows[0].success_rate == 100.0);
  CHECK(rows[0].frequencies == std::vector<double>{100.0});
  // Straight-line travel at full speed bounds the arrival time from below.
  CHECK(rows[0].mean_time >= std::hypot(10.0, 2.0) - 0.2);
  CHECK(rows[0].mean_time < 1.2 * std::hypot(10.0, 2.0));
}

TEST_CASE("run writes a trace") {
  const fs::path out = fresh_dir("run");
  const Result r = invoke({"run", "--scenario", one_robot, "--seed", "7", "--cache-dir", kShared.string(),
                        "--out", out.string()});
  REQUIRE(r.code == 0);
  CHECK(r.out.find("outcome=success") != std::string::npos);
  CHECK(fs::file_size(out / "1r_diagonal_k0_seed7.ndjson") > 0);
}

TEST_CASE("direct sweep") {
  const fs::path out = fresh_dir("sweep");
  const Result r = invoke({"sweep", "--mode", "direct", "--resolution", "5", "--override", "nod.u=1",
                        "--out", out.string()});
  REQUIRE(r.code == 0);
  std::istringstream in(slurp(out / "sweep_direct.csv"));
  std::string line;
  std::getline(in, line);
  CHECK(line.rfind("# schema=1", 0) == 0);
  std::getline(in, line);
  CHECK(line == "z11_0,z21_0,x11,x21");
  int rows = 0;
  while (std::getline(in, line)) ++rows;
  CHECK(rows == 25);
  CHECK(invoke({"sweep", "--scenario", one_robot, "--out", out.string()}).code == 2);
}

TEST_CASE("report round trip") {
  const fs::path out = fresh_dir("report");
  io::AggregateRow a{"2r_case1", 1, 40, 95.0, {60.0, 35.0}, 21.5};
  io::AggregateRow b{"2r_case2", 1, 40, 0.0, {0.0, 0.0}, std::nan("")};
  std::ostringstream csv;
  io::write_aggregate_csv(csv, {a, b}, "# schema=1");
  {
    std::ofstream f(out / "rows.csv");
    f << csv.str();
  }
  std::istringstream in(csv.str());
  const auto rows = io::read_aggregate_csv(in);
  REQUIRE(rows.size() == 2);
  CHECK(rows[0].frequencies == a.frequencies);
  CHECK(rows[0].mean_time == a.mean_time);
  CHECK(std::isnan(rows[1].mean_time));
  const Result r = invoke({"report", (out / "rows.csv").string()});
  REQUIRE(r.code == 0);
  CHECK(r.out == io::format_table(rows));
  CHECK(r.out.find("2r_case2") != std::string::npos);
}

TEST_CASE("build-cache is idempotent") {
  const fs::path cache = fresh_dir("cache");
  const std::vector<std::string> args{"build-cache", "--scenario", one_robot, "--cache-dir", cache.string()};
  Result r = invoke(args);
  REQUIRE(r.code == 0);
  CHECK(r.out == "group size 1: 1 built, 0 cached\n");
  r = invoke(args);
  REQUIRE(r.code == 0);
  CHECK(r.out == "group size 1: 0 built, 1 cached\n");
}

TEST_CASE("missing roadmap without building fails") {
  const fs::path cache = fresh_dir("empty");
  const Result r = invoke({"run", "--scenario", one_robot, "--cache-dir", cache.string(), "--no-build",
                        "--out", (cache / "out").string()});
  CHECK(r.code != 0);
  CHECK(r.err.find("error") != std::string::npos);
  CHECK(invoke({"run", "--scenario", "/nonexistent.yaml"}).code == 2);
  CHECK(invoke({"frobnicate"}).code != 0);
}
