#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <functional>

#include "mrta/bidding.hpp"
#include "mrta/consensus.hpp"
#include "mrta/rng.hpp"
#include "mrta/world.hpp"

using namespace mrta;

namespace {

WorldInstance hand_world(std::vector<Point2> agents, std::vector<Point2> tasks,
                         double side = 10.0, int capacity = 0) {
  WorldInstance w;
  w.id = {2, 0};
  w.workspace_side = side;
  w.agents = std::move(agents);
  w.tasks = std::move(tasks);
  w.capacity = capacity > 0 ? capacity : std::max<int>(1, w.tasks.size());
  return w;
}

// test-only policy emitting a fixed function of the state
class LambdaBidder final : public Bidder {
 public:
  using Fn = std::function<BidVector(const AgentState&, const WorldInstance&)>;
  explicit LambdaBidder(Fn fn) : fn_(std::move(fn)) {}
  std::string name() const override { return "lambda"; }
  BidVector bid(const AgentState& s, const WorldInstance& w, int) override {
    return fn_(s, w);
  }
  std::unique_ptr<Bidder> clone() const override {
    return std::make_unique<LambdaBidder>(fn_);
  }

 private:
  Fn fn_;
};

bool same_view(const AgentState& a, const AgentState& b) {
  return a.winning_bids == b.winning_bids && a.winners == b.winners &&
         a.bundle == b.bundle && a.path.tasks == b.path.tasks;
}

}  // namespace

TEST_CASE("mask_bundle_bids") {
  const std::vector<double> bids{0.5, 0.25, 0.75, 0.1};

  CHECK(mask_bundle_bids(bids, {}) == bids);

  const auto all = mask_bundle_bids(bids, {0, 1, 2, 3});
  for (double b : all) CHECK(b == -std::numeric_limits<double>::infinity());

  const auto one = mask_bundle_bids(bids, {2});
  CHECK(one[0] == 0.5);
  CHECK(one[1] == 0.25);
  CHECK(one[2] == -std::numeric_limits<double>::infinity());
  CHECK(one[3] == 0.1);
}

TEST_CASE("build_bundle follows the hand-stepped greedy trace") {
  const auto w = hand_world({{0, 0}}, {{1, 0}, {2, 0}, {0, 3}});
  const double sigma = w.diagonal();
  ClassicBidder classic;
  AgentState s = AgentState::fresh(0, w);
  build_bundle(s, w, classic, 1);

  // highest bid first, each inserted at its cheapest slot
  CHECK(s.bundle == std::vector<int>{0, 1, 2});
  CHECK(s.path.tasks == std::vector<int>{0, 1, 2});
  CHECK(s.winning_bids[0] == doctest::Approx(std::exp(-1.0 / sigma)));
  CHECK(s.winning_bids[1] == doctest::Approx(std::exp(-2.0 / sigma)));
  CHECK(s.winning_bids[2] == doctest::Approx(std::exp(-3.0 / sigma)));
  CHECK(s.winners == std::vector<int>{0, 0, 0});
  CHECK_NOTHROW(validate_agent_state(s, w));

  // second pass: everything now masked, state unchanged
  AgentState before = s;
  build_bundle(s, w, classic, 2);
  CHECK(same_view(before, s));
}

TEST_CASE("build_bundle leaves state alone when no bid beats y") {
  const auto w = hand_world({{0, 0}}, {{1, 0}, {2, 0}});
  AgentState s = AgentState::fresh(0, w);
  s.winning_bids = {2.0, 2.0};  // classic bids are <= 1
  s.winners = {1, 1};
  ClassicBidder classic;
  AgentState before = s;
  build_bundle(s, w, classic, 1);
  CHECK(same_view(before, s));
}

TEST_CASE("build_bundle does nothing once the bundle is full") {
  const auto w = hand_world({{0, 0}}, {{1, 0}, {2, 0}}, 10.0, 1);
  ClassicBidder classic;
  AgentState s = AgentState::fresh(0, w);
  build_bundle(s, w, classic, 1);
  REQUIRE(s.bundle.size() == 1);
  AgentState before = s;
  build_bundle(s, w, classic, 2);
  CHECK(same_view(before, s));
}

TEST_CASE("release_from clears the tail") {
  const auto w = hand_world({{0, 0}}, {{1, 0}, {2, 0}, {3, 0}, {4, 0}});
  ClassicBidder classic;
  AgentState s = AgentState::fresh(0, w);
  build_bundle(s, w, classic, 1);
  REQUIRE(s.bundle == std::vector<int>{0, 1, 2, 3});

  SUBCASE("release the newest entry only") {
    AgentState t = s;
    release_from(t, 3);
    CHECK(t.bundle == std::vector<int>{0, 1, 2});
    CHECK(t.path.tasks == std::vector<int>{0, 1, 2});
    CHECK(t.winners[3] == kNoWinner);
    CHECK(t.winning_bids[3] == 0.0);
    CHECK_NOTHROW(validate_agent_state(t, w));
  }

  SUBCASE("release from index 1 drops positions 1..3") {
    AgentState t = s;
    release_from(t, 1);
    CHECK(t.bundle == std::vector<int>{0});
    CHECK(t.path.tasks == std::vector<int>{0});
    for (int j : {1, 2, 3}) {
      CHECK(t.winners[j] == kNoWinner);
      CHECK(t.winning_bids[j] == 0.0);
    }
    CHECK(t.winners[0] == 0);
    CHECK_NOTHROW(validate_agent_state(t, w));
  }

  SUBCASE("release everything") {
    AgentState t = s;
    release_from(t, 0);
    CHECK(t.bundle.empty());
    CHECK(t.path.tasks.empty());
    for (int j = 0; j < 4; ++j) CHECK(t.winners[j] == kNoWinner);
    CHECK_NOTHROW(validate_agent_state(t, w));
  }

  SUBCASE("kept entries survive when another agent already took the task") {
    AgentState t = s;
    t.winners[2] = 1;  // conflict resolution reassigned task 2
    t.winning_bids[2] = 0.9;
    // task 2 sits at bundle position 2, so releasing there drops 2 and 3
    release_from(t, 2);
    CHECK(t.bundle == std::vector<int>{0, 1});
    CHECK(t.winners[2] == 1);
    CHECK(t.winning_bids[2] == 0.9);
    CHECK(t.winners[3] == kNoWinner);
  }

  CHECK_THROWS_AS(release_from(s, 4), std::invalid_argument);
  CHECK_THROWS_AS(release_from(s, -1), std::invalid_argument);
}

TEST_CASE("resolve_conflicts leaves an identical view unchanged") {
  const auto w = hand_world({{0, 0}, {5, 5}}, {{1, 0}, {2, 0}});
  AgentState r = AgentState::fresh(0, w);
  r.winning_bids = {0.5, 0.0};
  r.winners = {0, kNoWinner};
  r.bundle = {0};
  r.path.tasks = {0};

  Message msg;
  msg.sender = 1;
  msg.winning_bids = {0.5, 0.0};
  msg.winners = {0, kNoWinner};
  msg.timestamps = {0.0, 1.0};

  AgentState before = r;
  resolve_conflicts(r, msg, 1.0);
  CHECK(same_view(before, r));
}

TEST_CASE("resolve_conflicts: outbid on an owned task updates and releases") {
  const auto w = hand_world({{0, 0}, {5, 5}}, {{1, 0}, {2, 0}});
  ClassicBidder classic;
  AgentState r = AgentState::fresh(0, w);
  build_bundle(r, w, classic, 1);
  REQUIRE(r.bundle == std::vector<int>{0, 1});

  Message msg;
  msg.sender = 1;
  msg.winning_bids = {2.0, 0.0};
  msg.winners = {1, kNoWinner};
  msg.timestamps = {0.0, 1.0};

  resolve_conflicts(r, msg, 1.0);
  CHECK(r.winners[0] == 1);
  CHECK(r.winning_bids[0] == 2.0);
  // losing bundle position 0 also releases task 1
  CHECK(r.bundle.empty());
  CHECK(r.winners[1] == kNoWinner);
  CHECK(r.winning_bids[1] == 0.0);
  CHECK_NOTHROW(validate_agent_state(r, w));
}

TEST_CASE("equal bids resolve to the lower agent index") {
  const auto w = hand_world({{0, 0}, {5, 5}}, {{1, 0}});
  Rng rng(404);
  for (int trial = 0; trial < 100; ++trial) {
    const double bid = 0.1 + rng.uniform();

    // receiver 1 owns the task, sender 0 claims it with an equal bid
    AgentState r1 = AgentState::fresh(1, w);
    r1.winning_bids = {bid};
    r1.winners = {1};
    r1.bundle = {0};
    r1.path.tasks = {0};
    Message from0;
    from0.sender = 0;
    from0.winning_bids = {bid};
    from0.winners = {0};
    from0.timestamps = {1.0, 0.0};
    resolve_conflicts(r1, from0, 1.0);
    CHECK(r1.winners[0] == 0);
    CHECK(r1.bundle.empty());

    // receiver 0 owns the task, sender 1 claims it with an equal bid
    AgentState r0 = AgentState::fresh(0, w);
    r0.winning_bids = {bid};
    r0.winners = {0};
    r0.bundle = {0};
    r0.path.tasks = {0};
    Message from1;
    from1.sender = 1;
    from1.winning_bids = {bid};
    from1.winners = {1};
    from1.timestamps = {0.0, 1.0};
    resolve_conflicts(r0, from1, 1.0);
    CHECK(r0.winners[0] == 0);
    CHECK(r0.bundle == std::vector<int>{0});
  }
}

TEST_CASE("single agent converges in one iteration") {
  const auto w = hand_world({{2, 2}}, {{1, 0}, {2, 0}, {0, 3}, {5, 5}});
  ClassicBidder classic;
  RunConfig cfg;
  cfg.validate = true;
  const auto result = run_allocation(w, classic, cfg);
  CHECK(!result.timed_out);
  CHECK(result.iterations_used == 1);
  CHECK(result.assignment[0].tasks.size() == 4);
}

TEST_CASE("two agents split symmetric tasks without conflict") {
  const auto w = hand_world({{0, 0}, {10, 0}}, {{1, 0}, {9, 0}});
  ClassicBidder classic;
  RunConfig cfg;
  cfg.validate = true;
  const auto result = run_allocation(w, classic, cfg);
  CHECK(!result.timed_out);
  CHECK(result.iterations_used == 1);
  CHECK(result.assignment[0].tasks == std::vector<int>{0});
  CHECK(result.assignment[1].tasks == std::vector<int>{1});
}

TEST_CASE("runs are deterministic") {
  const auto w = generate_world(333, 0, 5, {10, 20}, {25.0, 55.0});
  ClassicBidder classic;
  RunConfig cfg;
  const auto a = run_allocation(w, classic, cfg);
  const auto b = run_allocation(w, classic, cfg);
  CHECK(a.iterations_used == b.iterations_used);
  CHECK(a.timed_out == b.timed_out);
  REQUIRE(a.assignment.size() == b.assignment.size());
  for (std::size_t i = 0; i < a.assignment.size(); ++i)
    CHECK(a.assignment[i].tasks == b.assignment[i].tasks);
  REQUIRE(a.trajectory.size() == b.trajectory.size());
  for (std::size_t r = 0; r < a.trajectory.size(); ++r)
    for (std::size_t i = 0; i < a.trajectory[r].states.size(); ++i)
      CHECK(same_view(a.trajectory[r].states[i], b.trajectory[r].states[i]));
}

TEST_CASE("classic bidder on the training distribution stays sound") {
  int total_iterations = 0;
  int max_iterations = 0;
  for (int i = 0; i < 200; ++i) {
    const auto w = generate_world(555, static_cast<std::uint32_t>(i), 5,
                                  {10, 20}, {25.0, 55.0});
    ClassicBidder classic;
    RunConfig cfg;
    cfg.validate = true;  // validator runs after every transition
    cfg.record_trajectory = false;
    const auto result = run_allocation(w, classic, cfg);
    CHECK(!result.timed_out);

    // every task covered exactly once at convergence
    std::vector<int> owners(w.n_tasks(), kNoWinner);
    for (const auto& p : result.assignment)
      for (int t : p.tasks) {
        CHECK(owners[t] == kNoWinner);
        owners[t] = p.owner;
      }
    for (int j = 0; j < w.n_tasks(); ++j) CHECK(owners[j] != kNoWinner);

    total_iterations += result.iterations_used;
    max_iterations = std::max(max_iterations, result.iterations_used);
  }
  CHECK(max_iterations <= 12);
  MESSAGE("classic mean iterations: ", total_iterations / 200.0,
          " max: ", max_iterations);
}

TEST_CASE("an always-escalating bidder livelocks into a timeout") {
  const auto w = hand_world({{0, 0}, {10, 0}}, {{5, 0}});
  LambdaBidder escalator([](const AgentState& s, const WorldInstance& w) {
    BidVector bids(w.n_tasks());
    for (int j = 0; j < w.n_tasks(); ++j) bids[j] = s.winning_bids[j] + 1.0;
    return bids;
  });
  RunConfig cfg;
  cfg.max_iterations = 25;
  cfg.validate = true;
  const auto result = run_allocation(w, escalator, cfg);
  CHECK(result.timed_out);
  CHECK(result.iterations_used == 25);
}

TEST_CASE("ring topology still reaches a conflict-free allocation") {
  const auto w = generate_world(777, 3, 4, {8, 12}, {25.0, 55.0});
  Topology ring;
  ring.neighbors.resize(4);
  for (int i = 0; i < 4; ++i) {
    ring.neighbors[i].push_back((i + 3) % 4);
    ring.neighbors[i].push_back((i + 1) % 4);
  }
  ClassicBidder classic;
  RunConfig cfg;
  cfg.topology = ring;
  cfg.validate = true;
  const auto result = run_allocation(w, classic, cfg);
  CHECK(!result.timed_out);
}
