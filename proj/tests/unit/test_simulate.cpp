#include <doctest.h>

#include <sstream>

#include "oracles.hpp"
#include "support.hpp"

using namespace video2plan;
using namespace testing;

namespace {

ActionGraph lanes(const std::map<std::string, int>& sizes) {
  ActionGraph g;
  int id = 0;
  for (const auto& [agent, n] : sizes) {
    g.agents.push_back(agent);
    for (int i = 0; i < n; ++i) {
      g.nodes.push_back({id, agent, PrimitiveKind::Actuate, "x", "", {}});
      if (i > 0) g.edges.push_back({id - 1, id});
      g.lanes[agent].push_back(id);
      ++id;
    }
  }
  return g;
}

DurationModel unit_durations() {
  DurationModel d;
  for (auto& [k, v] : d.defaults) v = 1;
  return d;
}

ActionGraph fixture_plan(const std::string& name) {
  const auto fx = make_fixture(name);
  const auto segs = run_segment_stage(fx.stream, {});
  const auto assoc = associate_stream(fx.stream, segs);
  const auto rec = recognize_segments(assoc, fx.stream.fps, kitchen_mini_table());
  const auto trees = run_parse_stage(rec);
  return run_plan_stage(trees, PrimitiveLibrary::defaults());
}

double time_of(const ExecutionTrace& t, int node, Phase phase) {
  for (const auto& e : t.events) {
    if (e.node == node && e.phase == phase) return e.time;
  }
  return -1;
}

}  // namespace

TEST_SUITE("simulate") {
  TEST_CASE("single chain runs back to back") {
    const auto g = lanes({{"P1", 3}});
    const auto t = run(g, unit_durations());
    CHECK(t.makespan == 3);
    CHECK(t.events.size() == 6);
    CHECK(check_trace(t, g).empty());
  }

  TEST_CASE("independent lanes run in parallel") {
    const auto g = lanes({{"P1", 2}, {"P2", 2}});
    const auto t = run(g, unit_durations());
    CHECK(t.makespan == 2);
    CHECK(check_trace(t, g).empty());
  }

  TEST_CASE("sync edge delays the waiting agent") {
    auto g = lanes({{"P1", 2}, {"P2", 2}});
    g.sync_edges = {{1, 2}};
    const auto t = run(g, unit_durations());
    CHECK(t.makespan == 4);
    CHECK(time_of(t, 2, Phase::Start) == 2);
    CHECK(t.makespan == critical_path(g, unit_durations()));
  }

  TEST_CASE("per-node durations override the kind defaults") {
    const auto g = lanes({{"P1", 3}});
    auto d = unit_durations();
    d.per_node[1] = 2.5;
    CHECK(run(g, d).makespan == 4.5);
    d.per_node[2] = 0;
    CHECK_THROWS_AS(d.validate(), InputError);
  }

  TEST_CASE("cyclic sync deadlocks") {
    auto g = lanes({{"P1", 2}, {"P2", 2}});
    g.sync_edges = {{1, 2}, {3, 0}};
    try {
      run(g, unit_durations());
      FAIL("expected a plan error");
    } catch (const PlanError& e) {
      CHECK(std::string(e.what()).find('0') != std::string::npos);
    }
  }

  TEST_CASE("empty graph") {
    const ActionGraph g;
    const auto t = run(g);
    CHECK(t.events.empty());
    CHECK(t.makespan == 0);
    CHECK(check_trace(t, g).empty());
  }

  TEST_CASE("handover fixture honours the exchange order") {
    const auto g = fixture_plan("handover-lemon");
    const auto t = run(g);
    CHECK(check_trace(t, g).empty());
    int meet = -1, release = -1;
    for (const auto& n : g.nodes) {
      if (n.agent == "P2" && n.tag() == "meet") meet = n.id;
      if (n.agent == "P1" && n.tag() == "release") release = n.id;
    }
    REQUIRE(meet >= 0);
    REQUIRE(release >= 0);
    CHECK(time_of(t, meet, Phase::End) <= time_of(t, release, Phase::Start));
  }

  TEST_CASE("swapped handover trace shows one sync violation") {
    const auto g = fixture_plan("handover-lemon");
    int meet = -1, release = -1;
    for (const auto& n : g.nodes) {
      if (n.agent == "P2" && n.tag() == "meet") meet = n.id;
      if (n.agent == "P1" && n.tag() == "release") release = n.id;
    }
    // schedule without the exchange constraint and a slow receiver, so the
    // giver releases before the receiver has engaged
    auto loose = g;
    std::erase(loose.sync_edges, Edge{meet, release});
    DurationModel d;
    d.per_node[meet] = 20;
    const auto t = run(loose, d);
    REQUIRE(time_of(t, meet, Phase::End) > time_of(t, release, Phase::Start));
    const auto violations = check_trace(t, g);
    REQUIRE(violations.size() == 1);
    CHECK(violations[0].rfind("sync edge " + std::to_string(meet) + "->" + std::to_string(release), 0) == 0);
  }

  TEST_CASE("makespan equals the longest weighted path on fixture plans") {
    for (const auto& name : fixture_names()) {
      CAPTURE(name);
      const auto g = fixture_plan(name);
      const auto t = run(g);
      CHECK(check_trace(t, g).empty());
      CHECK(t.makespan == oracles::longest_path(g, DurationModel{}));
      CHECK(t.makespan == critical_path(g));
    }
  }

  TEST_CASE("trace file round trip and determinism") {
    const auto g = fixture_plan("holding-cut");
    const auto t = run(g);
    std::stringstream a, b;
    write_trace(t, a);
    write_trace(run(g), b);
    CHECK(a.str() == b.str());
    CHECK(a.str().rfind("time,agent,node,phase\n", 0) == 0);
    auto back = parse_trace(a);
    CHECK(back.events == t.events);
  }
}
