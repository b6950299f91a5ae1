#include <doctest.h>

#include <sstream>

#include "oracles.hpp"
#include "support.hpp"

using namespace video2plan;
using namespace testing;

namespace {

WordObservation word(const std::string& label, ObjectClass cls = ObjectClass::Tool) { return {label, cls}; }

BigramTable uniform_table() {
  BigramTable t;
  for (ActionLabel a : individual_actions()) {
    t.general.actions[a] = {1.0 / 11, {{"pan", 0.1}, {"knife", 0.1}}, 0.1};
    t.recipe.actions[a] = {1.0 / 11, {{"egg", 0.1}}, 0.1};
  }
  return t;
}

HandObjectLink link(const std::string& hand, const std::string& object, FrameRange support) {
  return {HandKey::parse(hand), object, {support}};
}

AssociationRecord record(int id, FrameRange span, std::vector<HandObjectLink> links,
                         std::vector<ObjectObjectLink> object_links = {}) {
  AssociationRecord r;
  r.segment_id = id;
  r.span = span;
  r.hand_links = std::move(links);
  r.object_links = std::move(object_links);
  return r;
}

}  // namespace

TEST_SUITE("recognize") {
  TEST_CASE("knife and onion give cut") {
    const auto t = worked_example_table();
    const std::vector<WordObservation> ws{word("knife"), word("onion", ObjectClass::Ingredient)};
    const auto r = recognize_individual(ws, t);
    CHECK(r.action == ActionLabel::Cut);
    CHECK(r.score == doctest::Approx(std::log(0.5 * 0.036 * 0.015)));
    // stir scores 0.5 * 2e-4 * 0.029
    CHECK(r.score > std::log(0.5 * 2e-4 * 0.029));
  }

  TEST_CASE("uniform table falls back to the first action name") {
    const std::vector<WordObservation> ws{word("pan"), word("egg", ObjectClass::Ingredient)};
    CHECK(recognize_individual(ws, uniform_table()).action == ActionLabel::Coat);
  }

  TEST_CASE("a dominating conditional wins") {
    auto t = uniform_table();
    t.general.actions[ActionLabel::Heat].given["pan"] = 0.1;
    for (ActionLabel a : individual_actions()) {
      if (a != ActionLabel::Heat) t.general.actions[a].given["pan"] = 0.005;
    }
    const std::vector<WordObservation> ws{word("pan", ObjectClass::Container)};
    CHECK(recognize_individual(ws, t).action == ActionLabel::Heat);
  }

  TEST_CASE("empty observation list is a precondition error") {
    CHECK_THROWS_AS(recognize_individual(std::vector<WordObservation>{}, worked_example_table()), std::invalid_argument);
  }

  TEST_CASE("repeated labels count once by default") {
    auto t = uniform_table();
    const std::vector<WordObservation> twice{word("knife"), word("knife")};
    const std::vector<WordObservation> once{word("knife")};
    CHECK(recognize_individual(twice, t).score == recognize_individual(once, t).score);
    RecognitionOptions keep;
    keep.deduplicate = false;
    CHECK(recognize_individual(twice, t, keep).score < recognize_individual(once, t, keep).score);
  }

  TEST_CASE("class weights scale the conditional terms") {
    const auto t = worked_example_table();
    RecognitionOptions opts;
    opts.class_weights[ObjectClass::Ingredient] = 0;
    const std::vector<WordObservation> ws{word("knife"), word("onion", ObjectClass::Ingredient)};
    CHECK(recognize_individual(ws, t, opts).score == doctest::Approx(std::log(0.5 * 0.036)));
  }

  TEST_CASE("kitchen table agrees with the product oracle on fixture words") {
    const auto t = kitchen_mini_table();
    const auto lexicon = kitchen_lexicon();
    std::vector<WordObservation> all;
    for (const auto& [label, cls] : lexicon.entries()) all.push_back({label, cls});
    for (std::size_t i = 0; i < all.size(); ++i) {
      for (std::size_t j = i; j < all.size(); ++j) {
        const std::vector<WordObservation> ws{all[i], all[j]};
        const auto got = recognize_individual(ws, t);
        const auto [action, logp] = oracles::naive_bayes(ws, t, true);
        INFO(all[i].label, " ", all[j].label, " ", got.score, " ", logp);
        CHECK(got.action == action);
        CHECK(got.score == doctest::Approx(logp));
      }
    }
  }

  TEST_CASE("two-sentence corpus") {
    const std::vector<ActionLabel> actions{ActionLabel::Cut, ActionLabel::Stir};
    const std::vector<std::string> objects{"onion", "knife", "pot"};
    const double eps = 1e-12;
    const auto b = build_bigram_table("cut the onion with a knife. stir the pot.", "cut the onion.\nstir the pot.",
                                      actions, objects, eps);
    const auto& g = b.table.general.actions;
    CHECK(g.at(ActionLabel::Cut).given.at("knife") == doctest::Approx(1.0));
    CHECK(g.at(ActionLabel::Stir).given.at("pot") == doctest::Approx(1.0));
    CHECK(g.at(ActionLabel::Cut).prior == doctest::Approx(0.5));
    CHECK(g.at(ActionLabel::Stir).prior == doctest::Approx(0.5));
    CHECK(g.at(ActionLabel::Stir).given.at("knife") == doctest::Approx(0.0));
    CHECK(b.warnings.empty());
  }

  TEST_CASE("smoothing floor for a word that never co-occurs") {
    const std::vector<ActionLabel> actions{ActionLabel::Cut, ActionLabel::Stir};
    const std::vector<std::string> objects{"knife", "pot", "saffron"};
    const double eps = 1e-3;
    const auto b = build_bigram_table("cut with a knife.\ncut again.\nstir the pot.", "stir.", actions, objects, eps);
    const auto& g = b.table.general.actions;
    CHECK(g.at(ActionLabel::Cut).given.at("saffron") == doctest::Approx(eps / (2 + 3 * eps)));
    CHECK(g.at(ActionLabel::Stir).given.at("saffron") == doctest::Approx(eps / (1 + 3 * eps)));
    CHECK(*g.at(ActionLabel::Cut).unseen == doctest::Approx(eps / (2 + 3 * eps)));
    // cut is absent from the recipe corpus
    REQUIRE(b.warnings.size() == 1);
    CHECK(b.warnings[0].find("cut") != std::string::npos);
    CHECK(b.table.recipe.actions.at(ActionLabel::Cut).prior == doctest::Approx(eps / (1 + 2 * eps)));
  }

  TEST_CASE("empty corpus is an error") {
    const std::vector<ActionLabel> actions{ActionLabel::Cut};
    const std::vector<std::string> objects{"knife"};
    CHECK_THROWS_AS(build_bigram_table("", "cut.", actions, objects), InputError);
    CHECK_THROWS_AS(build_bigram_table("  \n\n", "cut.", actions, objects), InputError);
    CHECK_THROWS_AS(build_bigram_table("cut.", "", actions, objects), InputError);
  }

  TEST_CASE("table file round trip and validation") {
    const auto t = kitchen_mini_table();
    CHECK_NOTHROW(t.validate());
    std::stringstream ss;
    write_bigram_table(t, ss);
    CHECK(parse_bigram_table(ss) == t);

    auto bad = t;
    bad.general.actions[ActionLabel::Cut].prior = 0.5;
    CHECK_THROWS_AS(bad.validate(), InputError);
    bad = t;
    bad.general.actions[ActionLabel::Cut].given["knife"] = 1.5;
    CHECK_THROWS_AS(bad.validate(), InputError);
    bad = t;
    bad.epsilon = 0;
    CHECK_THROWS_AS(bad.validate(), InputError);
  }

  TEST_CASE("transfer from board to pot") {
    ContainerHistory h;
    for (int s = 1; s <= 3; ++s) h["chicken_1"].push_back({s, "board_1"});
    for (int s = 4; s <= 6; ++s) h["chicken_1"].push_back({s, "pot_1"});
    const auto events = detect_transfer(h);
    REQUIRE(events.size() == 1);
    CHECK(events[0] == TransferEvent{"chicken_1", "board_1", "pot_1", 4, 3});
  }

  TEST_CASE("no transfer without a container change") {
    ContainerHistory h;
    for (int s = 1; s <= 5; ++s) h["egg_1"].push_back({s, "pan_1"});
    CHECK(detect_transfer(h).empty());
    ContainerHistory gap;
    gap["egg_1"] = {{1, "pan_1"}, {4, "pan_1"}};
    CHECK(detect_transfer(gap).empty());
  }

  TEST_CASE("handover when the grasping person changes") {
    const std::vector<AssociationRecord> records{
        record(0, {0, 50}, {link("LH_P1", "lemon_1", {0, 50})}),
        record(1, {50, 100}, {link("LH_P1", "lemon_1", {50, 51}), link("RH_P2", "lemon_1", {48, 100})}),
    };
    const auto events = detect_collaboration(grasp_history(records), records, 30);
    REQUIRE(events.size() == 1);
    const auto& e = events[0];
    CHECK(e.label == ActionLabel::Handover);
    CHECK(e.first == HandKey::parse("LH_P1"));
    CHECK(e.second == HandKey::parse("RH_P2"));
    CHECK(e.object == "lemon_1");
  }

  TEST_CASE("handover needs the gap to be bridged") {
    const std::vector<AssociationRecord> records{
        record(0, {0, 50}, {link("LH_P1", "lemon_1", {0, 50})}),
        record(1, {50, 200}, {link("RH_P2", "lemon_1", {150, 200})}),
    };
    CHECK(detect_collaboration(grasp_history(records), records, 30).empty());
  }

  TEST_CASE("simultaneous grasp is holding") {
    const std::vector<AssociationRecord> records{
        record(0, {0, 60}, {link("LH_P1", "pot_1", {0, 60}), link("RH_P2", "pot_1", {0, 60})}),
    };
    const auto events = detect_collaboration(grasp_history(records), records, 30);
    REQUIRE(events.size() == 1);
    CHECK(events[0].label == ActionLabel::Holding);
    CHECK(events[0].kind == CollaborationCase::SharedGrasp);
    CHECK(events[0].object == "pot_1");
    CHECK(events[0].first.person != events[0].second.person);
    CHECK(events[0].segment == 0);
  }

  TEST_CASE("tool used on an object another person holds") {
    const std::vector<AssociationRecord> records{
        record(3, {0, 90}, {link("LH_P1", "board_1", {0, 90}), link("RH_P2", "knife_1", {0, 90})},
               {{"knife_1", "board_1", LinkKind::ToolOnTarget, 90}}),
    };
    const auto events = detect_collaboration(grasp_history(records), records, 30);
    REQUIRE(events.size() == 1);
    const auto& e = events[0];
    CHECK(e.kind == CollaborationCase::ToolOnHeld);
    CHECK(e.label == ActionLabel::Holding);
    CHECK(e.first == HandKey::parse("LH_P1"));
    CHECK(e.second == HandKey::parse("RH_P2"));
    CHECK(e.tool == "knife_1");
    CHECK(e.segment == 3);
  }

  TEST_CASE("same-person tool link is not collaboration") {
    const std::vector<AssociationRecord> records{
        record(0, {0, 90}, {link("LH_P1", "board_1", {0, 90}), link("RH_P1", "knife_1", {0, 90})},
               {{"knife_1", "board_1", LinkKind::ToolOnTarget, 90}}),
    };
    CHECK(detect_collaboration(grasp_history(records), records, 30).empty());
  }

  TEST_CASE("recognized segments round trip") {
    const auto fx = make_fixture("transfer-chicken");
    const auto segs = run_segment_stage(fx.stream, {});
    const auto assoc = associate_stream(fx.stream, segs);
    const auto rec = recognize_segments(assoc, fx.stream.fps, kitchen_mini_table());
    REQUIRE_FALSE(rec.empty());
    std::stringstream ss;
    write_recognized(rec, ss);
    CHECK(parse_recognized(ss) == rec);
  }
}
