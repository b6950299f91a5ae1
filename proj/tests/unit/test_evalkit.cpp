#include <doctest.h>

#include <numeric>
#include <sstream>

#include "support.hpp"

using namespace video2plan;
using namespace testing;

namespace {

ActionTree tree_of(std::size_t scenario) { return parse(success_scenarios().at(scenario).sentence); }

LabeledTree labeled(FrameRange span, const std::string& agent, ActionTree tree,
                    std::optional<FailureType> failure = std::nullopt) {
  return {span, agent, std::move(tree), failure};
}

// Rounds half away from zero to two decimals, the way a table prints it.
double printed(double v) { return std::floor(v * 100 + 0.5 + 1e-12) / 100; }

}  // namespace

TEST_SUITE("evalkit") {
  TEST_CASE("table metric arithmetic") {
    const auto v1 = precision_recall(24, 16, 32);
    CHECK(printed(v1.precision) == doctest::Approx(0.67));
    CHECK(printed(v1.recall) == doctest::Approx(0.50));
    const auto v2 = precision_recall(24, 14, 37);
    CHECK(printed(v2.precision) == doctest::Approx(0.58));
    CHECK(printed(v2.recall) == doctest::Approx(0.38));
    const auto total = precision_recall(48, 30, 70);
    CHECK(total.precision == 0.625);
    CHECK(printed(total.precision) == doctest::Approx(0.63));
    CHECK(printed(total.recall) == doctest::Approx(0.43));
  }

  TEST_CASE("zero detections are flagged") {
    const auto m = precision_recall(0, 0, 5);
    CHECK(m.no_detections);
    CHECK(m.precision == 0);
    CHECK(m.recall == 0);
    const auto r = match_trees({}, std::vector<LabeledTree>{labeled({0, 10}, "P1", tree_of(3))});
    CHECK(r.metrics.no_detections);
    CHECK(r.truth == 1);
    CHECK_THROWS_AS(precision_recall(3, 4, 10), std::invalid_argument);
  }

  TEST_CASE("matching counts 24 detected, 16 correct, 32 truth") {
    std::vector<LabeledTree> pred, truth;
    for (int i = 0; i < 32; ++i) truth.push_back(labeled({i * 10, i * 10 + 10}, "P1", tree_of(3)));
    for (int i = 0; i < 16; ++i) pred.push_back(labeled({i * 10 + 2, i * 10 + 12}, "P1", tree_of(3)));
    for (int i = 16; i < 24; ++i) pred.push_back(labeled({i * 10, i * 10 + 10}, "P1", tree_of(4)));
    const auto r = match_trees(pred, truth);
    CHECK(r.detected == 24);
    CHECK(r.correct == 16);
    CHECK(r.truth == 32);
    CHECK(r.metrics.precision * 24 == doctest::Approx(16));
    CHECK(r.metrics.recall == 0.5);
    std::set<std::size_t> used;
    for (const auto& [p, t] : r.matches) CHECK(used.insert(t).second);
  }

  TEST_CASE("identical trees with disjoint spans do not match") {
    const std::vector<LabeledTree> pred{labeled({0, 10}, "P1", tree_of(3))};
    const std::vector<LabeledTree> truth{labeled({10, 20}, "P1", tree_of(3))};
    CHECK(match_trees(pred, truth).correct == 0);
  }

  TEST_CASE("one truth entry is matched once") {
    const std::vector<LabeledTree> pred{labeled({0, 10}, "P1", tree_of(3)), labeled({5, 15}, "P1", tree_of(3))};
    const std::vector<LabeledTree> truth{labeled({0, 20}, "P1", tree_of(3))};
    const auto r = match_trees(pred, truth);
    CHECK(r.correct == 1);
    CHECK(r.matches.size() == 1);
  }

  TEST_CASE("larger overlap wins") {
    const std::vector<LabeledTree> pred{labeled({8, 30}, "P1", tree_of(3))};
    const std::vector<LabeledTree> truth{labeled({0, 10}, "P1", tree_of(3)), labeled({10, 40}, "P1", tree_of(3))};
    const auto r = match_trees(pred, truth);
    REQUIRE(r.matches.size() == 1);
    CHECK(r.matches[0].second == 1);
  }

  TEST_CASE("unmatched annotated truth is tallied by failure type") {
    const std::vector<LabeledTree> truth{labeled({0, 10}, "P1", tree_of(3), FailureType::HandObject),
                                         labeled({10, 20}, "P1", tree_of(4), FailureType::ObjectObject),
                                         labeled({20, 30}, "P1", tree_of(5), FailureType::ActionRecognition)};
    const std::vector<LabeledTree> pred{labeled({0, 10}, "P1", tree_of(3))};
    const auto r = match_trees(pred, truth);
    CHECK(r.failures.count(FailureType::HandObject) == 0);
    CHECK(r.failures.at(FailureType::ObjectObject) == 1);
    CHECK(r.failures.at(FailureType::ActionRecognition) == 1);
  }

  TEST_CASE("truth file round trip") {
    const std::vector<LabeledTree> truth{labeled({0, 10}, "P1", tree_of(0)),
                                         labeled({10, 20}, "P2", tree_of(1), FailureType::HandObject)};
    std::stringstream ss;
    write_truth(truth, ss);
    CHECK(parse_truth(ss) == truth);
    std::istringstream bad("0\t10\tP1\t(HP (H RH_P1)\n");
    CHECK_THROWS(parse_truth(bad));
  }

  TEST_CASE("perfect labels give the identity matrix") {
    const std::vector<std::string> labels{"cut", "stir", "roll"};
    const auto m = confusion_matrix(labels, labels, labels);
    for (std::size_t i = 0; i < 3; ++i) {
      for (std::size_t j = 0; j < 3; ++j) CHECK(m.values[i][j] == (i == j ? 1.0 : 0.0));
    }
  }

  TEST_CASE("all cut mislabeled as stir") {
    const std::vector<std::string> labels{"cut", "stir"};
    const std::vector<std::string> truth{"cut", "cut", "cut"};
    const std::vector<std::string> pred{"stir", "stir", "stir"};
    const auto m = confusion_matrix(pred, truth, labels);
    CHECK(m.at("cut", "stir") == 1.0);
    CHECK(m.at("cut", "cut") == 0.0);
    CHECK(m.at("stir", "stir") == 0.0);
  }

  TEST_CASE("ten labels, rows sum to one") {
    const std::vector<std::string> labels{"cut",     "spread", "grip", "stir", "sprinkle",
                                          "squeeze", "heat",   "wrap", "roll", "pour"};
    std::vector<std::string> truth, pred;
    for (std::size_t i = 0; i < labels.size(); ++i) {
      for (std::size_t k = 0; k <= i; ++k) {
        truth.push_back(labels[i]);
        pred.push_back(labels[(i + k * 3) % labels.size()]);
      }
    }
    const auto m = confusion_matrix(pred, truth, labels);
    const auto raw = confusion_matrix(pred, truth, labels, false);
    for (std::size_t i = 0; i < labels.size(); ++i) {
      CHECK(std::accumulate(m.values[i].begin(), m.values[i].end(), 0.0) == doctest::Approx(1.0).epsilon(1e-9));
      const double total = std::accumulate(raw.values[i].begin(), raw.values[i].end(), 0.0);
      CHECK(total == static_cast<double>(i + 1));
      for (std::size_t j = 0; j < labels.size(); ++j) CHECK(m.values[i][j] == raw.values[i][j] / total);
    }
    // "cut" appears once and was predicted as cut
    CHECK(m.at("cut", "cut") == 1.0);
  }

  TEST_CASE("unknown labels are rejected") {
    const std::vector<std::string> labels{"cut"};
    const std::vector<std::string> other{"stir"};
    CHECK_THROWS_AS(confusion_matrix(other, other, labels), std::invalid_argument);
  }

  TEST_CASE("action label of a tree") {
    CHECK(action_label(tree_of(0)) == "handover");
    CHECK(action_label(tree_of(2)) == "transfer");
    CHECK(action_label(parse(std::vector<Terminal>{H("RH_P1"), O("knife")})) == "grasp");
  }

  TEST_CASE("timeline rows") {
    const std::vector<LabeledTree> pred{labeled({0, 3}, "P1", tree_of(3))};
    const auto rows = timeline_export(pred, {});
    REQUIRE(rows.size() == 3);
    CHECK(rows[0] == TimelineRow{"P1", 0, "stir", "none"});
    CHECK(rows[2].frame == 2);

    const std::vector<LabeledTree> truth{labeled({5, 7}, "P2", tree_of(4))};
    const auto only_truth = timeline_export({}, truth);
    REQUIRE(only_truth.size() == 2);
    for (const auto& r : only_truth) CHECK(r.predicted == "none");

    const std::vector<LabeledTree> both{labeled({0, 2}, "P2", tree_of(4)), labeled({0, 2}, "P1", tree_of(3))};
    const auto grouped = timeline_export(both, {});
    REQUIRE(grouped.size() == 4);
    CHECK(grouped[0].agent == "P1");
    CHECK(grouped[1].agent == "P1");
    CHECK(grouped[2].agent == "P2");

    std::ostringstream csv;
    write_timeline_csv(rows, csv);
    CHECK(csv.str() == "agent,frame,predicted,truth\nP1,0,stir,none\nP1,1,stir,none\nP1,2,stir,none\n");
  }

  TEST_CASE("aligned labels pair truth with same-hand predictions") {
    // stir and heat are both right-hand P1 trees, roll belongs to P2
    const std::vector<LabeledTree> pred{labeled({0, 10}, "P1", tree_of(5))};
    const std::vector<LabeledTree> truth{labeled({2, 8}, "P1", tree_of(3)), labeled({2, 8}, "P2", tree_of(4))};
    const auto [p, t] = aligned_labels(pred, truth);
    CHECK(p == std::vector<std::string>{"heat", "none"});
    CHECK(t == std::vector<std::string>{"stir", "roll"});
  }

  TEST_CASE("predictions leave out bare grasps") {
    const auto rh = HandKey::parse("RH_P1");
    const Timeline t{{{0, 30}, {0}, {{rh, parse(std::vector<Terminal>{H("RH_P1"), O("knife")})}}},
                     {{30, 60}, {1}, {{rh, tree_of(3)}}}};
    const auto p = predictions(t);
    REQUIRE(p.size() == 1);
    CHECK(p[0].span == FrameRange{30, 60});
    CHECK(p[0].agent == "P1");
  }
}
