#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <set>
#include <sstream>

#include "oracles.hpp"
#include "support.hpp"

using namespace video2plan;
using namespace testing;

namespace {

constexpr int kCases = 500;

using Rng = std::mt19937_64;

int uniform(Rng& rng, int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); }
double uniform(Rng& rng, double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); }
template <class T>
const T& pick(Rng& rng, const std::vector<T>& v) {
  return v[static_cast<std::size_t>(uniform(rng, 0, static_cast<int>(v.size()) - 1))];
}

const std::vector<std::string> kHands{"LH_P1", "RH_P1", "LH_P2", "RH_P2"};
const std::vector<std::string> kTools{"knife", "spoon", "spatula", "rolling_pin"};
const std::vector<std::string> kContainers{"board", "pot", "bowl", "pan"};
const std::vector<std::string> kIngredients{"onion", "flour", "egg", "dough", "chicken"};

Terminal tool(Rng& rng, int instance = 1) {
  const auto w = pick(rng, kTools);
  return Terminal::object({w + "_" + std::to_string(instance), w, ObjectClass::Tool});
}
Terminal container(Rng& rng) { return O(pick(rng, kContainers), ObjectClass::Container); }
Terminal ingredient(Rng& rng) { return O(pick(rng, kIngredients), ObjectClass::Ingredient); }

std::string partner_of(Rng& rng, const std::string& hand) {
  const std::string other = hand.substr(3) == "P1" ? "P2" : "P1";
  return (uniform(rng, 0, 1) ? "LH_" : "RH_") + other;
}

// One sentence of constructor patterns (a)-(g) for `hand`.
std::vector<Terminal> pattern_sentence(Rng& rng, const std::string& hand, int pattern) {
  const auto actions = individual_actions();
  const ActionLabel act = actions[static_cast<std::size_t>(uniform(rng, 0, static_cast<int>(actions.size()) - 1))];
  switch (pattern) {
    case 0:
      return {H(hand), tool(rng, uniform(rng, 1, 2))};
    case 1:
      return {H(hand), tool(rng), A(act), container(rng)};
    case 2:
      return {H(hand), tool(rng), A(act), ingredient(rng), container(rng)};
    case 3:
      return {H(hand), tool(rng), A(ActionLabel::Transfer), ingredient(rng), container(rng), container(rng)};
    case 4: {
      const auto obj = ingredient(rng);
      return {H(hand), obj, A(ActionLabel::Handover), H(partner_of(rng, hand)), obj};
    }
    case 5:
      return {H(hand), tool(rng), A(act), H(partner_of(rng, hand)), container(rng)};
    default: {
      const auto obj = container(rng);
      return {H(hand), obj, A(ActionLabel::Holding), H(partner_of(rng, hand)), obj};
    }
  }
}

// Contiguous timeline of 1-6 entries. Each entry holds either one
// collaborative tree or individual trees for one or two hands; entries repeat
// the previous trees often so merging has work to do.
Timeline random_timeline(Rng& rng) {
  Timeline t;
  Frame at = 0;
  const int n = uniform(rng, 1, 6);
  for (int i = 0; i < n; ++i) {
    TimelineEntry e;
    const Frame len = uniform(rng, 10, 60);
    e.span = {at, at + len};
    e.segments = {i};
    at += len;
    if (i > 0 && uniform(rng, 0, 2) == 0) {
      e.trees = t.back().trees;
    } else if (uniform(rng, 0, 3) == 0) {
      const auto hand = pick(rng, kHands);
      e.trees[HandKey::parse(hand)] = parse(pattern_sentence(rng, hand, uniform(rng, 4, 6)));
    } else {
      const auto first = pick(rng, kHands);
      e.trees[HandKey::parse(first)] = parse(pattern_sentence(rng, first, uniform(rng, 0, 3)));
      if (uniform(rng, 0, 1)) {
        const auto second = pick(rng, kHands);
        e.trees[HandKey::parse(second)] = parse(pattern_sentence(rng, second, uniform(rng, 0, 3)));
      }
    }
    t.push_back(std::move(e));
  }
  return t;
}

BigramTable random_table(Rng& rng, const std::vector<WordObservation>& vocabulary) {
  BigramTable t;
  t.epsilon = 1e-6;
  std::vector<double> priors;
  for (std::size_t i = 0; i < individual_actions().size(); ++i) priors.push_back(uniform(rng, 0.1, 1.0));
  const double sum = std::accumulate(priors.begin(), priors.end(), 0.0);
  std::size_t k = 0;
  for (ActionLabel a : individual_actions()) {
    auto& g = t.general.actions[a];
    auto& r = t.recipe.actions[a];
    g.prior = r.prior = priors[k++] / sum;
    for (const auto& w : vocabulary) {
      if (uniform(rng, 0, 2) == 0) continue;
      auto& sub = w.cls == ObjectClass::Ingredient ? r : g;
      sub.given[w.label] = uniform(rng, 1e-4, 0.2);
    }
    if (uniform(rng, 0, 1)) g.unseen = uniform(rng, 1e-6, 1e-4);
    if (uniform(rng, 0, 1)) r.unseen = uniform(rng, 1e-6, 1e-4);
  }
  return t;
}

std::vector<WordObservation> vocabulary() {
  std::vector<WordObservation> v;
  const auto lexicon = kitchen_lexicon();
  for (const auto& [label, cls] : lexicon.entries()) v.push_back({label, cls});
  return v;
}

std::vector<WordObservation> random_words(Rng& rng, const std::vector<WordObservation>& vocab) {
  std::vector<WordObservation> ws;
  const int n = uniform(rng, 1, 5);
  for (int i = 0; i < n; ++i) ws.push_back(pick(rng, vocab));
  return ws;
}

DetectionStream random_stream(Rng& rng) {
  DetectionStream s;
  s.lexicon = kitchen_lexicon();
  s.fps = pick(rng, std::vector<double>{15, 25, 30});
  if (uniform(rng, 0, 1)) s.image = ImageSize{1280, 720};
  const auto labels = vocabulary();
  const int frames = uniform(rng, 0, 8);
  Frame f = 0;
  for (int i = 0; i < frames; ++i) {
    FrameDetections fd;
    fd.frame_index = f;
    fd.time_s = static_cast<double>(f) / s.fps;
    f += uniform(rng, 1, 3);
    for (const auto& hand : kHands) {
      if (uniform(rng, 0, 2) == 0) continue;
      const auto key = HandKey::parse(hand);
      fd.hands.push_back({key.person, key.side, random_box(rng), std::round(uniform(rng, 0.0, 1.0) * 100) / 100});
    }
    const int objects = uniform(rng, 0, 4);
    for (int k = 0; k < objects; ++k) {
      const auto& w = pick(rng, labels);
      fd.objects.push_back({w.label + "_" + std::to_string(k), w.label, random_box(rng)});
    }
    s.frames.push_back(std::move(fd));
  }
  return s;
}

std::size_t actuate_count(const ActionGraph& g) {
  return static_cast<std::size_t>(
      std::count_if(g.nodes.begin(), g.nodes.end(), [](const auto& n) { return n.kind == PrimitiveKind::Actuate; }));
}

}  // namespace

TEST_SUITE("property") {
  TEST_CASE("merge is idempotent") {
    Rng rng(101);
    for (int i = 0; i < kCases; ++i) {
      const auto t = random_timeline(rng);
      const auto once = merge_segments(t);
      CHECK(merge_segments(once) == once);
      CHECK(once.front().span.begin == t.front().span.begin);
      CHECK(once.back().span.end == t.back().span.end);
      for (std::size_t k = 1; k < once.size(); ++k) CHECK(once[k - 1].span.end == once[k].span.begin);
    }
  }

  TEST_CASE("jaccard is symmetric, bounded and one on itself") {
    Rng rng(102);
    for (int i = 0; i < kCases * 2; ++i) {
      const auto a = random_box(rng);
      const auto b = random_box(rng);
      const double ab = jaccard(a, b);
      CHECK(ab == jaccard(b, a));
      CHECK(ab >= 0);
      CHECK(ab <= 1);
      CHECK(jaccard(a, a) == 1.0);
    }
  }

  TEST_CASE("naive Bayes equals the product oracle") {
    Rng rng(103);
    const auto vocab = vocabulary();
    for (int i = 0; i < kCases; ++i) {
      const auto table = random_table(rng, vocab);
      const auto words = random_words(rng, vocab);
      const auto got = recognize_individual(words, table);
      const auto [action, logp] = oracles::naive_bayes(words, table, true);
      CHECK(got.action == action);
      CHECK(got.score == doctest::Approx(logp).epsilon(1e-9));

      RecognitionOptions keep;
      keep.deduplicate = false;
      const auto all = recognize_individual(words, table, keep);
      const auto [action_all, logp_all] = oracles::naive_bayes(words, table, false);
      CHECK(all.action == action_all);
      CHECK(all.score == doctest::Approx(logp_all).epsilon(1e-9));
    }
  }

  TEST_CASE("naive Bayes ignores word order") {
    Rng rng(104);
    const auto vocab = vocabulary();
    for (int i = 0; i < kCases; ++i) {
      const auto table = random_table(rng, vocab);
      auto words = random_words(rng, vocab);
      const auto before = recognize_individual(words, table);
      std::shuffle(words.begin(), words.end(), rng);
      const auto after = recognize_individual(words, table);
      CHECK(before.action == after.action);
      CHECK(before.score == doctest::Approx(after.score).epsilon(1e-12));
    }
  }

  TEST_CASE("scaling all probabilities keeps the argmax") {
    Rng rng(105);
    const auto vocab = vocabulary();
    for (int i = 0; i < kCases; ++i) {
      const auto table = random_table(rng, vocab);
      const auto words = random_words(rng, vocab);
      const double c_prior = uniform(rng, 0.01, 5.0);
      const double c_word = uniform(rng, 0.01, 5.0);
      auto scaled = table;
      scaled.epsilon *= c_word;
      for (auto* sub : {&scaled.general, &scaled.recipe}) {
        for (auto& [a, stats] : sub->actions) {
          stats.prior *= c_prior;
          for (auto& [w, p] : stats.given) p *= c_word;
          if (stats.unseen) *stats.unseen *= c_word;
        }
      }
      CHECK(recognize_individual(words, scaled).action == recognize_individual(words, table).action);
    }
  }

  TEST_CASE("stream round trip") {
    Rng rng(106);
    for (int i = 0; i < kCases; ++i) {
      const auto s = random_stream(rng);
      std::stringstream ss;
      write_stream(s, ss);
      const auto back = parse_stream(ss, s.lexicon);
      CHECK(back == s);
    }
  }

  TEST_CASE("trees and truth round trip") {
    Rng rng(107);
    for (int i = 0; i < kCases; ++i) {
      const auto t = random_timeline(rng);
      std::vector<TreeRecord> records;
      std::vector<LabeledTree> truth;
      for (const auto& e : t) {
        if (e.trees.empty()) records.push_back({e.segments[0], e.span, std::nullopt, std::nullopt});
        for (const auto& [hand, tree] : e.trees) {
          records.push_back({e.segments[0], e.span, hand, tree});
          std::optional<FailureType> failure;
          if (uniform(rng, 0, 3) == 0) failure = static_cast<FailureType>(uniform(rng, 0, 2));
          truth.push_back({e.span, hand.person, tree, failure});
        }
      }
      std::stringstream ts, gs;
      write_trees(records, ts);
      CHECK(parse_trees(ts) == records);
      write_truth(truth, gs);
      CHECK(parse_truth(gs) == truth);
    }
  }

  TEST_CASE("plan and table round trip") {
    Rng rng(108);
    const auto vocab = vocabulary();
    for (int i = 0; i < kCases; ++i) {
      const auto g = build_graph(merge_segments(random_timeline(rng)), PrimitiveLibrary::defaults());
      std::stringstream ps;
      write_plan(g, ps);
      CHECK(parse_plan(ps) == g);

      auto table = random_table(rng, vocab);
      std::stringstream bs;
      write_bigram_table(table, bs);
      CHECK(parse_bigram_table(bs) == table);
    }
  }

  TEST_CASE("automaton errors agree with chart membership") {
    Rng rng(109);
    const std::vector<Terminal> alphabet{H("RH_P1"), O("knife"), A(ActionLabel::Cut), A(ActionLabel::Handover)};
    for (int i = 0; i < kCases * 2; ++i) {
      std::vector<Terminal> s;
      const int n = uniform(rng, 1, 8);
      for (int k = 0; k < n; ++k) s.push_back(pick(rng, alphabet));
      std::vector<Symbol> kinds;
      for (const auto& t : s) kinds.push_back(t.kind);
      const bool member = !oracles::all_derivations(kinds).empty();
      const auto err = first_error(s);
      CHECK(member == !err.has_value());
      if (err) {
        CHECK_THROWS_AS(parse(s), ParseError);
        // every prefix before the error can still be completed, the one through it cannot
        auto viable = [&](std::size_t len) {
          const std::vector<Terminal> prefix(s.begin(), s.begin() + static_cast<std::ptrdiff_t>(len));
          return !first_error(prefix) || *first_error(prefix) == len;
        };
        CHECK(viable(*err));
        if (*err < s.size()) CHECK_FALSE(viable(*err + 1));
      } else {
        CHECK_NOTHROW(parse(s));
      }
    }
  }

  TEST_CASE("parse and unparse invert on canonical trees") {
    Rng rng(110);
    for (int i = 0; i < 1000; ++i) {
      const auto sentence = random_sentence(rng);
      const auto tree = parse(sentence);
      CHECK(is_canonical(tree));
      CHECK_NOTHROW(validate_tree(tree));
      const auto again = unparse(tree);
      CHECK(again.terminals == sentence);
      CHECK(parse(again) == tree);
      CHECK(parse_sexpr(to_sexpr(tree)) == tree);
    }
  }

  TEST_CASE("every constructed sentence parses") {
    Rng rng(111);
    for (int i = 0; i < kCases; ++i) {
      const auto hand = pick(rng, kHands);
      const auto key = HandKey::parse(hand);
      const int pattern = uniform(rng, 0, 6);
      const auto words = pattern_sentence(rng, hand, pattern);

      RecognizedSegment seg;
      seg.id = i;
      seg.span = {0, 30};
      auto ref = [](const Terminal& t) { return ObjectRef{t.id, t.word, *t.cls}; };
      for (const auto& t : words) {
        if (t.kind == Symbol::O) seg.objects[t.id] = ref(t);
      }
      HandActivity act;
      act.hand = key;
      act.grasped = ref(words[1]);
      if (pattern >= 1 && pattern <= 3) {
        act.action = parse_action(words[2].word);
        for (std::size_t k = 3; k < words.size(); ++k) act.targets.push_back(ref(words[k]));
      } else if (pattern >= 4) {
        CollaborativeEvent e;
        e.label = pattern == 5 ? ActionLabel::Holding : parse_action(words[2].word);
        e.kind = pattern == 5 ? CollaborationCase::ToolOnHeld : CollaborationCase::SharedGrasp;
        e.object = words[4].id;
        const auto other = HandKey::parse(words[3].word);
        e.first = pattern == 5 ? other : key;
        e.second = pattern == 5 ? key : other;
        if (pattern == 5) {
          e.tool = words[1].id;
          act.action = parse_action(words[2].word);
          act.targets = {ref(words[4])};
        }
        seg.events.push_back(e);
        HandActivity partner;
        partner.hand = other;
        partner.grasped = ref(words[4]);
        partner.suppressed = true;
        seg.hands.push_back(partner);
      }
      seg.hands.push_back(act);
      std::sort(seg.hands.begin(), seg.hands.end(), [](const auto& a, const auto& b) { return a.hand < b.hand; });

      const auto sentence = build_sentence(seg, key);
      REQUIRE(sentence);
      CHECK(sentence->terminals == words);
      const auto tree = parse(*sentence);
      CHECK(unparse(tree).terminals == sentence->terminals);
    }
  }

  TEST_CASE("plans are acyclic and simulate cleanly") {
    Rng rng(112);
    for (int i = 0; i < kCases; ++i) {
      const auto merged = merge_segments(random_timeline(rng));
      const auto g = build_graph(merged, PrimitiveLibrary::defaults());
      CHECK_NOTHROW(validate_graph(g));
      CHECK(topological_order(g).size() == g.nodes.size());
      for (const auto& [u, v] : g.sync_edges) CHECK(g.node(u).agent != g.node(v).agent);

      BuildOptions keep;
      keep.elide_transitions = false;
      const auto full = build_graph(merged, PrimitiveLibrary::defaults(), keep);
      CHECK(actuate_count(full) == actuate_count(g));
      CHECK((full.nodes.size() - g.nodes.size()) % 2 == 0);

      DurationModel d;
      for (const auto& n : g.nodes) {
        if (uniform(rng, 0, 3) == 0) d.per_node[n.id] = uniform(rng, 0.5, 6.0);
      }
      const auto trace = run(g, d);
      CHECK(check_trace(trace, g).empty());
      CHECK(trace.makespan == doctest::Approx(oracles::longest_path(g, d)).epsilon(1e-12));
    }
  }

  TEST_CASE("transfers never stay in place and handovers change person") {
    Rng rng(113);
    const std::vector<std::string> containers{"board_1", "pot_1", "bowl_1"};
    for (int i = 0; i < kCases; ++i) {
      ContainerHistory h;
      for (int k = 0; k < uniform(rng, 1, 8); ++k) h["egg_1"].push_back({k, pick(rng, containers)});
      for (const auto& e : detect_transfer(h)) CHECK(e.source != e.destination);

      std::vector<AssociationRecord> records;
      Frame at = 0;
      for (int k = 0; k < uniform(rng, 1, 5); ++k) {
        AssociationRecord r;
        r.segment_id = k;
        const Frame len = uniform(rng, 10, 60);
        r.span = {at, at + len};
        for (const auto& hand : kHands) {
          if (uniform(rng, 0, 2) != 0) continue;
          const Frame b = at + uniform(rng, 0, static_cast<int>(len) - 5);
          r.hand_links.push_back({HandKey::parse(hand), "lemon_1", {{b, std::min(at + len, b + uniform(rng, 5, 40))}}});
        }
        at += len;
        records.push_back(std::move(r));
      }
      for (const auto& e : detect_collaboration(grasp_history(records), records, 30)) {
        if (e.label == ActionLabel::Handover) CHECK(e.first.person != e.second.person);
      }
    }
  }
}
