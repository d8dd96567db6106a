#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "mrta/io.hpp"
#include "mrta/rng.hpp"
#include "mrta/world.hpp"

using namespace mrta;

namespace {

WorldInstance tiny_world(std::vector<Point2> agents, std::vector<Point2> tasks,
                         double side = 10.0, int capacity = 0) {
  WorldInstance w;
  w.id = {7, 0};
  w.workspace_side = side;
  w.agents = std::move(agents);
  w.tasks = std::move(tasks);
  w.capacity = capacity > 0 ? capacity : static_cast<int>(w.tasks.size());
  return w;
}

double brute_path_length(const Point2& start, const std::vector<int>& route,
                         const WorldInstance& w) {
  double total = 0.0;
  Point2 at = start;
  for (int t : route) {
    total += std::sqrt((at.x - w.tasks[t].x) * (at.x - w.tasks[t].x) +
                       (at.y - w.tasks[t].y) * (at.y - w.tasks[t].y));
    at = w.tasks[t];
  }
  return total;
}

}  // namespace

TEST_CASE("generate_world is deterministic for fixed seed and args") {
  const auto a = generate_world(42, 3, 5, {10, 20}, {25.0, 55.0});
  const auto b = generate_world(42, 3, 5, {10, 20}, {25.0, 55.0});
  CHECK(a.id == b.id);
  CHECK(a.workspace_side == b.workspace_side);
  CHECK(a.agents == b.agents);
  CHECK(a.tasks == b.tasks);
  CHECK(a.capacity == b.capacity);

  const auto c = generate_world(43, 3, 5, {10, 20}, {25.0, 55.0});
  CHECK(a.tasks != c.tasks);
}

TEST_CASE("generated worlds respect bounds and counts") {
  for (int i = 0; i < 1000; ++i) {
    const auto w = generate_world(5, static_cast<std::uint32_t>(i), 2, {3, 3},
                                  {10.0, 10.0});
    CHECK(w.n_tasks() == 3);
    CHECK(w.n_agents() == 2);
    CHECK(w.workspace_side == 10.0);
    for (const auto& p : w.agents) {
      CHECK(p.x >= 0.0);
      CHECK(p.x <= 10.0);
      CHECK(p.y >= 0.0);
      CHECK(p.y <= 10.0);
    }
    for (const auto& p : w.tasks) {
      CHECK(p.x >= 0.0);
      CHECK(p.x <= 10.0);
      CHECK(p.y >= 0.0);
      CHECK(p.y <= 10.0);
    }
    CHECK_NOTHROW(w.validate());
  }
}

TEST_CASE("paper training distribution draws tasks and sides in range") {
  int lo_seen = 100, hi_seen = 0;
  for (int i = 0; i < 300; ++i) {
    const auto w = generate_world(11, static_cast<std::uint32_t>(i), 5,
                                  {10, 20}, {25.0, 55.0});
    CHECK(w.n_agents() == 5);
    CHECK(w.n_tasks() >= 10);
    CHECK(w.n_tasks() <= 20);
    CHECK(w.workspace_side >= 25.0);
    CHECK(w.workspace_side <= 55.0);
    lo_seen = std::min(lo_seen, w.n_tasks());
    hi_seen = std::max(hi_seen, w.n_tasks());
  }
  CHECK(lo_seen == 10);
  CHECK(hi_seen == 20);
}

TEST_CASE("generate_world rejects empty ranges and bad capacity") {
  CHECK_THROWS_AS(generate_world(1, 0, 5, {20, 10}, {25.0, 55.0}),
                  std::invalid_argument);
  CHECK_THROWS_AS(generate_world(1, 0, 5, {10, 20}, {55.0, 25.0}),
                  std::invalid_argument);
  CHECK_THROWS_AS(generate_world(1, 0, 0, {10, 20}, {25.0, 55.0}),
                  std::invalid_argument);
  // 2 agents x capacity 1 cannot cover 3 tasks
  CHECK_THROWS_AS(generate_world(1, 0, 2, {3, 3}, {10.0, 10.0}, {1}),
                  std::invalid_argument);
}

TEST_CASE("path_length basics") {
  const auto w = tiny_world({{0, 0}}, {{3, 4}, {1, 0}, {1, 1}});

  CHECK(path_length({0, 0}, Path{0, {}}, w) == 0.0);
  CHECK(path_length({0, 0}, Path{0, {0}}, w) == doctest::Approx(5.0));
  CHECK(path_length({0, 0}, Path{0, {1, 2}}, w) == doctest::Approx(2.0));

  CHECK_THROWS_AS(path_length({0, 0}, Path{0, {9}}, w), std::invalid_argument);
}

TEST_CASE("path_length equals hand oracle on random routes") {
  Rng rng(99);
  for (int trial = 0; trial < 200; ++trial) {
    const auto w = generate_world(17, static_cast<std::uint32_t>(trial), 1,
                                  {6, 6}, {30.0, 30.0});
    std::vector<int> route = {0, 1, 2, 3, 4, 5};
    for (std::size_t i = route.size(); i > 1; --i)
      std::swap(route[i - 1],
                route[static_cast<std::size_t>(rng.uniform_int(0, i - 1))]);
    const int len = static_cast<int>(rng.uniform_int(0, 6));
    route.resize(len);
    const Path p{0, route};
    CHECK(path_length(w.agents[0], p, w) ==
          doctest::Approx(brute_path_length(w.agents[0], route, w)).epsilon(1e-12));
  }
}

TEST_CASE("cheapest_insertion on empty and collinear paths") {
  const auto w = tiny_world({{0, 0}}, {{3, 4}, {2, 0}, {1, 0}});

  const auto ins = cheapest_insertion({0, 0}, Path{0, {}}, 0, w);
  CHECK(ins.position == 0);
  CHECK(ins.delta == doctest::Approx(5.0));

  // inserting (1,0) into 0 -> (2,0) is free and ties break to slot 0
  const auto col = cheapest_insertion({0, 0}, Path{0, {1}}, 2, w);
  CHECK(col.position == 0);
  CHECK(col.delta == doctest::Approx(0.0));
}

TEST_CASE("cheapest_insertion equals exhaustive slot enumeration") {
  for (int trial = 0; trial < 300; ++trial) {
    const auto w = generate_world(23, static_cast<std::uint32_t>(trial), 1,
                                  {6, 11}, {40.0, 40.0});
    Rng rng(derive_seed(23, "ins", static_cast<std::uint64_t>(trial)));
    std::vector<int> route;
    for (int t = 1; t < w.n_tasks(); ++t) route.push_back(t);
    for (std::size_t i = route.size(); i > 1; --i)
      std::swap(route[i - 1],
                route[static_cast<std::size_t>(rng.uniform_int(0, i - 1))]);
    route.resize(std::min(route.size(),
                          static_cast<std::size_t>(rng.uniform_int(0, 10))));
    const Path p{0, route};

    const auto got = cheapest_insertion(w.agents[0], p, 0, w);
    CHECK(got.delta >= 0.0);

    double best_delta = 1e300;
    const double before = path_length(w.agents[0], p, w);
    for (int slot = 0; slot <= static_cast<int>(route.size()); ++slot) {
      Path q = p;
      q.tasks.insert(q.tasks.begin() + slot, 0);
      best_delta = std::min(best_delta, path_length(w.agents[0], q, w) - before);
    }
    CHECK(got.delta == doctest::Approx(std::max(best_delta, 0.0)).epsilon(1e-9));
  }
}

TEST_CASE("cheapest_insertion guards") {
  auto w = tiny_world({{0, 0}}, {{3, 4}, {2, 0}}, 10.0, 1);
  CHECK_THROWS_AS(cheapest_insertion({0, 0}, Path{0, {0}}, 0, w),
                  std::invalid_argument);
  CHECK_THROWS_AS(cheapest_insertion({0, 0}, Path{0, {0}}, 1, w),
                  std::length_error);
}

TEST_CASE("world jsonl round trip and reader validation") {
  const auto dir = std::filesystem::temp_directory_path() / "mrta_world_test";
  std::filesystem::create_directories(dir);
  const auto path = dir / "worlds.jsonl";

  std::vector<WorldInstance> worlds;
  for (int i = 0; i < 20; ++i)
    worlds.push_back(generate_world(31, static_cast<std::uint32_t>(i), 4,
                                    {8, 16}, {25.0, 55.0}));
  save_worlds_jsonl(path, worlds);
  const auto loaded = load_worlds_jsonl(path);
  REQUIRE(loaded.size() == worlds.size());
  for (std::size_t i = 0; i < worlds.size(); ++i) {
    CHECK(loaded[i].id == worlds[i].id);
    CHECK(loaded[i].agents == worlds[i].agents);
    CHECK(loaded[i].tasks == worlds[i].tasks);
    CHECK(loaded[i].workspace_side == worlds[i].workspace_side);
  }

  // byte-identical on rewrite
  const auto h1 = file_hash(path);
  save_worlds_jsonl(path, worlds);
  CHECK(file_hash(path) == h1);

  // a record with a task outside the workspace must be rejected
  atomic_write(path, [](std::ostream& out) {
    out << R"({"id":"1:0","workspace_side":10.0,"capacity":1,"agents":[[1,1]],"tasks":[[11,1]]})"
        << "\n";
  });
  CHECK_THROWS_AS(load_worlds_jsonl(path), std::invalid_argument);

  std::filesystem::remove_all(dir);
}

TEST_CASE("world id parsing") {
  const WorldId id{123456789, 42};
  CHECK(WorldId::parse(id.str()) == id);
  CHECK_THROWS_AS(WorldId::parse("nonsense"), std::invalid_argument);
  CHECK_THROWS_AS(WorldId::parse("1:2:3"), std::invalid_argument);
}
