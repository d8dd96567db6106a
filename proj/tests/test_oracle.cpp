#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "mrta/oracle.hpp"
#include "mrta/rng.hpp"
#include "mrta/world.hpp"

using namespace mrta;

namespace {

WorldInstance hand_world(std::vector<Point2> agents, std::vector<Point2> tasks,
                         double side = 10.0, int capacity = 0) {
  WorldInstance w;
  w.id = {1, 0};
  w.workspace_side = side;
  w.agents = std::move(agents);
  w.tasks = std::move(tasks);
  w.capacity = capacity > 0 ? capacity : std::max<int>(1, w.tasks.size());
  return w;
}

WorldInstance random_world(std::uint64_t seed, std::uint32_t ordinal,
                           int n_agents, int lo_tasks, int hi_tasks) {
  return generate_world(seed, ordinal, n_agents, {lo_tasks, hi_tasks},
                        {20.0, 50.0});
}

}  // namespace

TEST_CASE("single agent single task") {
  const auto w = hand_world({{0, 0}}, {{3, 4}});
  const auto exact = solve_exact(w);
  CHECK(exact.exact);
  CHECK(exact.total_distance == doctest::Approx(5.0));
  CHECK(exact.routes[0].tasks == std::vector<int>{0});
}

TEST_CASE("brute force handles empty task set and two orderings") {
  auto empty = hand_world({{0, 0}}, {});
  empty.capacity = 1;
  const auto a = brute_force(empty);
  CHECK(a.total_distance == 0.0);
  CHECK(a.exact);
  CHECK(a.routes.size() == 1);
  CHECK(a.routes[0].tasks.empty());

  // 1 agent, 2 tasks: best of the two visiting orders
  const auto w = hand_world({{0, 0}}, {{1, 0}, {5, 0}});
  const auto b = brute_force(w);
  const double order_a = 1.0 + 4.0;  // 0 -> t0 -> t1
  const double order_b = 5.0 + 4.0;  // 0 -> t1 -> t0
  CHECK(b.total_distance == doctest::Approx(std::min(order_a, order_b)));
  CHECK(b.routes[0].tasks == std::vector<int>{0, 1});
  CHECK_THROWS_AS(brute_force(random_world(3, 0, 2, 9, 9)),
                  std::invalid_argument);
}

TEST_CASE("two agents each serve their neighbor") {
  const auto w = hand_world({{0, 0}, {10, 10}}, {{1, 0}, {9, 10}});
  const auto exact = solve_exact(w);
  CHECK(exact.exact);
  CHECK(exact.total_distance == doctest::Approx(2.0));
  CHECK(exact.routes[0].tasks == std::vector<int>{0});
  CHECK(exact.routes[1].tasks == std::vector<int>{1});
  const auto brute = brute_force(w);
  CHECK(brute.total_distance == doctest::Approx(exact.total_distance));
}

TEST_CASE("branch and bound equals exhaustive enumeration on small worlds") {
  for (int trial = 0; trial < 200; ++trial) {
    const int n_agents = 1 + trial % 4;
    const auto w = random_world(101, static_cast<std::uint32_t>(trial),
                                n_agents, 2, 6);
    const auto exact = solve_exact(w);
    const auto brute = brute_force(w);
    REQUIRE(exact.exact);
    CHECK(std::abs(exact.total_distance - brute.total_distance) <= 1e-9);
    CHECK_NOTHROW(validate_assignment(exact, w));
    CHECK_NOTHROW(validate_assignment(brute, w));
  }
}

TEST_CASE("branch and bound respects binding capacity") {
  for (int trial = 0; trial < 60; ++trial) {
    auto w = generate_world(131, static_cast<std::uint32_t>(trial), 3, {5, 6},
                            {20.0, 50.0}, {2});
    const auto exact = solve_exact(w);
    const auto brute = brute_force(w);
    REQUIRE(exact.exact);
    CHECK(std::abs(exact.total_distance - brute.total_distance) <= 1e-9);
    for (const auto& r : exact.routes) CHECK(r.tasks.size() <= 2);
  }
}

TEST_CASE("root lower bound never exceeds the optimum") {
  for (int trial = 0; trial < 150; ++trial) {
    const auto w = random_world(151, static_cast<std::uint32_t>(trial),
                                1 + trial % 3, 2, 6);
    const auto brute = brute_force(w);
    CHECK(oracle_root_bound(w) <= brute.total_distance + 1e-9);
  }
}

TEST_CASE("best_known upper-bounds the optimum and is usually close") {
  int within_5_percent = 0;
  const int trials = 500;
  for (int trial = 0; trial < trials; ++trial) {
    const auto w = random_world(171, static_cast<std::uint32_t>(trial),
                                1 + trial % 3, 2, 6);
    const auto heur = best_known(w, 7);
    const auto brute = brute_force(w);
    CHECK(!heur.exact);
    CHECK_NOTHROW(validate_assignment(heur, w));
    CHECK(heur.total_distance >= brute.total_distance - 1e-9);
    if (heur.total_distance <= brute.total_distance * 1.05 + 1e-9)
      ++within_5_percent;
  }
  CHECK(within_5_percent >= trials * 95 / 100);
}

TEST_CASE("best_known is deterministic given the seed") {
  const auto w = random_world(191, 0, 3, 10, 14);
  const auto a = best_known(w, 12345);
  const auto b = best_known(w, 12345);
  CHECK(a.total_distance == b.total_distance);
  for (std::size_t i = 0; i < a.routes.size(); ++i)
    CHECK(a.routes[i].tasks == b.routes[i].tasks);
}

TEST_CASE("budget exhaustion returns the incumbent without a proof") {
  const auto w = random_world(211, 0, 4, 16, 16);
  SolverBudget tight;
  tight.max_nodes = 1;
  const auto a = solve_exact(w, tight);
  CHECK(!a.exact);
  CHECK_NOTHROW(validate_assignment(a, w));

  // same incumbent quality as best_known with the matching seed
  const auto heur = best_known(w, 0);
  CHECK(a.total_distance <= heur.total_distance + 1e-9);
}

TEST_CASE("solve_oracle dispatches by task count") {
  SolverBudget budget;
  budget.exact_threshold = 6;
  const auto small = random_world(231, 0, 2, 4, 6);
  CHECK(solve_oracle(small, budget, 1).exact);
  const auto big = random_world(231, 1, 2, 10, 12);
  CHECK(!solve_oracle(big, budget, 1).exact);
}

TEST_CASE("oracle cache round trip") {
  OracleCache cache;
  for (int i = 0; i < 5; ++i) {
    const auto w = random_world(251, static_cast<std::uint32_t>(i), 2, 3, 5);
    cache[w.id.str()] = solve_exact(w);
  }
  const auto dir = std::filesystem::temp_directory_path() / "mrta_oracle_test";
  std::filesystem::create_directories(dir);
  const auto path = dir / "cache.jsonl";
  save_oracle_cache(path, cache);
  const auto loaded = load_oracle_cache(path);
  REQUIRE(loaded.size() == cache.size());
  for (const auto& [id, a] : cache) {
    REQUIRE(loaded.count(id));
    CHECK(loaded.at(id).total_distance == a.total_distance);
    CHECK(loaded.at(id).exact == a.exact);
    for (std::size_t i = 0; i < a.routes.size(); ++i)
      CHECK(loaded.at(id).routes[i].tasks == a.routes[i].tasks);
  }
  std::filesystem::remove_all(dir);
}
