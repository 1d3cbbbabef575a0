#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "spii/config.hpp"

using namespace spii;

namespace {

namespace fs = std::filesystem;

std::string write_temp(const std::string& name, const std::string& text) {
  fs::path p = fs::temp_directory_path() / name;
  std::ofstream out(p);
  out << text;
  return p.string();
}

}  // namespace

TEST_CASE("config: symmetric-channel Max-Weight experiment") {
  std::string path = write_temp("spii_cfg_mw.yaml", R"(
schedule_set:
  preset: single_server
  queues: 2
channel:
  kind: symmetric
  n: 2
  eps: 0.5
arrivals: [0.3, 0.3]
policy:
  kind: mw
  theta: direct
horizon: 120000
seed: 99
stability:
  window: 4000
  slope_threshold: 0.003
)");
  ExperimentConfig cfg = load_experiment(path);
  CHECK(cfg.schedules.size() == 3);
  CHECK(cfg.channel.matrix(0, 0) == doctest::Approx(0.75));
  CHECK(cfg.lambda(0) == doctest::Approx(0.3));
  CHECK(cfg.horizon == 120000);
  CHECK(cfg.seed == 99);
  CHECK(cfg.stability.window == 4000);
  CHECK(policy_kind_name(cfg.policy) == "mw");
  CHECK(validate_experiment(cfg).empty());
  std::remove(path.c_str());
}

TEST_CASE("config: rational channel rows are preserved exactly") {
  std::string path = write_temp("spii_cfg_rat.yaml", R"(
schedule_set:
  schedules: [[0, 0], [1, 0], [0, 1]]
channel:
  kind: matrix
  rows:
    - ["3/4", "1/4"]
    - ["1/4", "3/4"]
arrivals: [0.2, 0.2]
policy:
  kind: index
)");
  ExperimentConfig cfg = load_experiment(path);
  REQUIRE(cfg.channel.exact.has_value());
  CHECK((*cfg.channel.exact)[0][0] == Rat(3, 4));
  CHECK(cfg.channel.matrix(1, 0) == doctest::Approx(0.25));
  std::remove(path.c_str());
}

TEST_CASE("config: matrix by file reference, relative to the config") {
  fs::path dir = fs::temp_directory_path();
  {
    std::ofstream m(dir / "spii_ge.txt");
    m << "0.5 0.5\n0.25 0.75\n";
  }
  std::string path = write_temp("spii_cfg_simple.yaml", R"(
schedule_set:
  preset: single_server
  queues: 2
channel:
  kind: symmetric
  n: 2
  eps: 0.25
arrivals: [0.1, 0.1]
policy:
  kind: simple
  g_e:
    file: spii_ge.txt
  theta: direct
)");
  ExperimentConfig cfg = load_experiment(path);
  const auto* p = std::get_if<SimplePolicy>(&cfg.policy);
  REQUIRE(p != nullptr);
  CHECK(p->encoder.g_e(1, 1) == doctest::Approx(0.75));
  CHECK(p->alloc.mem_bits == 0);
  std::remove(path.c_str());
  std::remove((dir / "spii_ge.txt").string().c_str());
}

TEST_CASE("config: grid files in both forms") {
  std::string path = write_temp("spii_grid_points.yaml", R"(
points:
  - lambda: [0.1, 0.2]
  - rho: 0.5
    direction: [1, 0]
)");
  auto points = load_grid(path);
  REQUIRE(points.size() == 2);
  CHECK(points[0].lambda(1) == doctest::Approx(0.2));
  CHECK(points[1].lambda(0) == doctest::Approx(0.5));
  CHECK(points[1].rho == doctest::Approx(0.5));
  std::remove(path.c_str());

  std::string gen = write_temp("spii_grid_gen.yaml", R"(
direction: [0.5, 0.5]
rho_values: [0.2, 0.4, 0.6]
)");
  points = load_grid(gen);
  REQUIRE(points.size() == 3);
  CHECK(points[2].lambda(0) == doctest::Approx(0.3));
  std::remove(gen.c_str());
}

TEST_CASE("config: missing keys fail with a clear message") {
  std::string path = write_temp("spii_cfg_bad.yaml", R"(
channel:
  kind: identity
  n: 2
arrivals: [0.1, 0.1]
policy:
  kind: mw
)");
  CHECK_THROWS_WITH_AS(load_experiment(path),
                       doctest::Contains("schedule_set"), std::runtime_error);
  std::remove(path.c_str());
}
