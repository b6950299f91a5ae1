#include "video2plan/recognize.hpp"

#include <array>
#include <cctype>
#include <cmath>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

#include <json.hpp>

namespace video2plan {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

constexpr std::array<std::pair<ActionLabel, std::string_view>, 14> kActionNames{{
    {ActionLabel::Cut, "cut"},
    {ActionLabel::Spread, "spread"},
    {ActionLabel::Grip, "grip"},
    {ActionLabel::Stir, "stir"},
    {ActionLabel::Sprinkle, "sprinkle"},
    {ActionLabel::Squeeze, "squeeze"},
    {ActionLabel::Heat, "heat"},
    {ActionLabel::Wrap, "wrap"},
    {ActionLabel::Roll, "roll"},
    {ActionLabel::Pour, "pour"},
    {ActionLabel::Coat, "coat"},
    {ActionLabel::Transfer, "transfer"},
    {ActionLabel::Handover, "handover"},
    {ActionLabel::Holding, "holding"},
}};

constexpr std::array<ActionLabel, 11> kIndividual{
    ActionLabel::Cut,     ActionLabel::Spread, ActionLabel::Grip, ActionLabel::Stir,
    ActionLabel::Sprinkle, ActionLabel::Squeeze, ActionLabel::Heat, ActionLabel::Wrap,
    ActionLabel::Roll,    ActionLabel::Pour,   ActionLabel::Coat,
};

}  // namespace

std::string_view to_string(ActionLabel a) {
  for (const auto& [label, name] : kActionNames) {
    if (label == a) return name;
  }
  return "cut";
}

std::optional<ActionLabel> find_action(std::string_view text) {
  for (const auto& [label, name] : kActionNames) {
    if (name == text) return label;
  }
  return std::nullopt;
}

ActionLabel parse_action(std::string_view text) {
  if (auto a = find_action(text)) return *a;
  throw InputError("unknown action '" + std::string(text) + "'");
}

bool is_individual(ActionLabel a) { return std::find(kIndividual.begin(), kIndividual.end(), a) != kIndividual.end(); }
bool is_collaborative(ActionLabel a) { return a == ActionLabel::Handover || a == ActionLabel::Holding; }
std::span<const ActionLabel> individual_actions() { return kIndividual; }

// ---------------------------------------------------------------------------
// Bigram tables

double BigramSubTable::probability(ActionLabel action, std::string_view word, double epsilon) const {
  auto it = actions.find(action);
  if (it == actions.end()) return epsilon;
  auto w = it->second.given.find(word);
  if (w != it->second.given.end()) return w->second;
  return it->second.unseen.value_or(epsilon);
}

std::vector<ActionLabel> BigramTable::candidate_actions() const {
  std::vector<ActionLabel> out;
  for (const auto& [a, stats] : general.actions) {
    if (is_individual(a)) out.push_back(a);
  }
  return out;
}

void BigramTable::validate() const {
  if (!(epsilon > 0)) throw InputError("bigram table: epsilon must be > 0");
  if (candidate_actions().empty()) throw InputError("bigram table: general table has no individual actions");
  double prior_sum = 0;
  for (const auto* sub : {&general, &recipe}) {
    for (const auto& [a, stats] : sub->actions) {
      if (!is_individual(a)) {
        throw InputError("bigram table: '" + std::string(to_string(a)) + "' is not an individual action");
      }
      auto check = [&](double p, const std::string& what) {
        if (!(p > 0 && p <= 1)) {
          throw InputError("bigram table: probability " + what + " for '" + std::string(to_string(a)) +
                           "' outside (0, 1]");
        }
      };
      for (const auto& [word, p] : stats.given) check(p, "of '" + word + "'");
      if (stats.unseen) check(*stats.unseen, "of unseen words");
      if (sub == &general) {
        check(stats.prior, "prior");
        prior_sum += stats.prior;
      }
    }
  }
  if (std::abs(prior_sum - 1.0) > 1e-9) throw InputError("bigram table: action priors do not sum to 1");
}

namespace {

ordered_json subtable_to_json(const BigramSubTable& sub) {
  ordered_json j = ordered_json::object();
  for (const auto& [a, stats] : sub.actions) {
    ordered_json e;
    e["prior"] = stats.prior;
    if (stats.unseen) e["unseen"] = *stats.unseen;
    e["objects"] = ordered_json::object();
    for (const auto& [word, p] : stats.given) e["objects"][word] = p;
    j[std::string(to_string(a))] = std::move(e);
  }
  return j;
}

BigramSubTable subtable_from_json(const json& j) {
  BigramSubTable sub;
  for (const auto& [name, e] : j.items()) {
    ActionStats stats;
    stats.prior = e.value("prior", 0.0);
    if (e.contains("unseen")) stats.unseen = e.at("unseen").get<double>();
    if (e.contains("objects")) {
      for (const auto& [word, p] : e.at("objects").items()) stats.given[word] = p.get<double>();
    }
    sub.actions[parse_action(name)] = std::move(stats);
  }
  return sub;
}

}  // namespace

BigramTable parse_bigram_table(std::istream& in) {
  BigramTable table;
  try {
    const json j = json::parse(in);
    table.epsilon = j.at("epsilon").get<double>();
    table.general = subtable_from_json(j.at("general"));
    table.recipe = subtable_from_json(j.at("recipe"));
  } catch (const json::exception& e) {
    throw InputError(std::string("malformed bigram table: ") + e.what());
  }
  table.validate();
  return table;
}

BigramTable load_bigram_table(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open bigram table " + path.string());
  return parse_bigram_table(in);
}

void write_bigram_table(const BigramTable& table, std::ostream& out) {
  ordered_json j;
  j["epsilon"] = table.epsilon;
  j["general"] = subtable_to_json(table.general);
  j["recipe"] = subtable_to_json(table.recipe);
  out << j.dump(2) << '\n';
}

void save_bigram_table(const BigramTable& table, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  write_bigram_table(table, out);
}

BigramTable worked_example_table() {
  BigramTable t;
  t.general.actions[ActionLabel::Cut] = {0.5, {{"knife", 0.036}}, std::nullopt};
  t.general.actions[ActionLabel::Stir] = {0.5, {{"knife", 2e-4}}, std::nullopt};
  t.recipe.actions[ActionLabel::Cut] = {0.0, {{"onion", 0.015}}, std::nullopt};
  t.recipe.actions[ActionLabel::Stir] = {0.0, {{"onion", 0.029}}, std::nullopt};
  return t;
}

BigramTable kitchen_mini_table() {
  BigramTable t;
  t.epsilon = 1e-6;
  const double prior = 1.0 / static_cast<double>(kIndividual.size());
  const double unseen = 1e-4;
  using Words = std::map<std::string, double, std::less<>>;
  const std::map<ActionLabel, std::pair<Words, Words>> words{
      {ActionLabel::Cut, {{{"knife", 0.036}, {"board", 0.02}},
                          {{"onion", 0.015}, {"meat", 0.02}, {"chicken", 0.02}, {"tomato", 0.02}, {"patty", 0.01},
                           {"lemon", 0.01}}}},
      {ActionLabel::Spread, {{{"knife", 0.01}, {"spatula", 0.01}}, {{"butter", 0.05}, {"sauce", 0.03}, {"bread", 0.02}}}},
      {ActionLabel::Grip, {{{"tongs", 0.05}, {"fork", 0.03}}, {{"meat", 0.01}}}},
      {ActionLabel::Stir, {{{"spoon", 0.04}, {"pot", 0.03}, {"bowl", 0.02}, {"pan", 0.01}, {"knife", 2e-4}},
                           {{"onion", 0.029}, {"flour", 0.02}, {"sauce", 0.02}, {"egg", 0.01}}}},
      {ActionLabel::Sprinkle, {{{"spoon", 0.005}, {"bowl", 0.01}, {"pot", 0.01}},
                               {{"salt", 0.05}, {"sugar", 0.03}, {"flour", 0.01}}}},
      {ActionLabel::Squeeze, {{{"bottle", 0.02}}, {{"lemon", 0.06}}}},
      {ActionLabel::Heat, {{{"pan", 0.05}, {"pot", 0.02}, {"stove", 0.05}}, {{"oil", 0.005}, {"egg", 0.02}}}},
      {ActionLabel::Wrap, {{{"foil", 0.05}}, {{"seaweed", 0.05}}}},
      {ActionLabel::Roll, {{{"rolling_pin", 0.06}, {"board", 0.01}}, {{"dough", 0.06}}}},
      {ActionLabel::Pour, {{{"cup", 0.03}, {"bowl", 0.01}, {"pot", 0.01}, {"pan", 0.008}, {"jug", 0.04}},
                           {{"oil", 0.04}, {"sauce", 0.02}}}},
      {ActionLabel::Coat, {{{"bowl", 0.005}, {"plate", 0.01}, {"brush", 0.03}}, {{"flour", 0.03}, {"egg", 0.02}}}},
  };
  for (ActionLabel a : kIndividual) {
    const auto& [general, recipe] = words.at(a);
    t.general.actions[a] = {prior, general, unseen};
    t.recipe.actions[a] = {prior, recipe, unseen};
  }
  return t;
}

// ---------------------------------------------------------------------------
// Corpus statistics

namespace {

std::vector<std::vector<std::string>> sentences_of(std::string_view text) {
  std::vector<std::vector<std::string>> out;
  std::vector<std::string> sentence;
  std::string word;
  auto end_word = [&] {
    if (!word.empty()) sentence.push_back(std::move(word));
    word.clear();
  };
  auto end_sentence = [&] {
    end_word();
    if (!sentence.empty()) out.push_back(std::move(sentence));
    sentence.clear();
  };
  for (char ch : text) {
    const auto c = static_cast<unsigned char>(ch);
    if (std::isalnum(c) || ch == '\'') {
      word.push_back(static_cast<char>(std::tolower(c)));
    } else if (ch == '\n' || ch == '.' || ch == '!' || ch == '?' || ch == ';') {
      end_sentence();
    } else {
      end_word();
    }
  }
  end_sentence();
  return out;
}

std::set<std::string> inflections(std::string_view verb) {
  const std::string v(verb);
  std::set<std::string> forms{v, v + "s", v + "es", v + "ed", v + "d", v + "ing"};
  if (!v.empty()) {
    forms.insert(v + v.back() + "ing");
    forms.insert(v + v.back() + "ed");
    if (v.back() == 'e') forms.insert(v.substr(0, v.size() - 1) + "ing");
  }
  return forms;
}

std::vector<std::string> label_tokens(std::string_view label) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : label) {
    if (ch == '_' || ch == ' ' || ch == '-') {
      if (!cur.empty()) out.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(ch))));
    }
  }
  if (!cur.empty()) out.push_back(cur);
  return out;
}

bool mentions_object(const std::vector<std::string>& sentence, const std::vector<std::string>& tokens) {
  if (tokens.empty() || sentence.size() < tokens.size()) return false;
  for (std::size_t i = 0; i + tokens.size() <= sentence.size(); ++i) {
    bool ok = true;
    for (std::size_t k = 0; k < tokens.size() && ok; ++k) {
      const auto& w = sentence[i + k];
      const auto& t = tokens[k];
      ok = w == t || (k + 1 == tokens.size() && (w == t + "s" || w == t + "es"));
    }
    if (ok) return true;
  }
  return false;
}

BigramSubTable count_corpus(std::string_view text, const char* name, std::span<const ActionLabel> actions,
                            std::span<const std::string> objects, double epsilon, std::vector<std::string>& warnings) {
  const auto sentences = sentences_of(text);
  if (sentences.empty()) throw InputError(std::string("empty ") + name + " corpus");

  std::vector<std::vector<std::string>> object_tokens;
  for (const auto& o : objects) object_tokens.push_back(label_tokens(o));

  std::map<ActionLabel, double> action_count;
  std::map<ActionLabel, std::map<std::string, double>> pair_count;
  for (ActionLabel a : actions) {
    const auto forms = inflections(to_string(a));
    action_count[a] = 0;
    for (const auto& s : sentences) {
      const bool has = std::any_of(s.begin(), s.end(), [&](const std::string& w) { return forms.count(w) > 0; });
      if (!has) continue;
      action_count[a] += 1;
      for (std::size_t k = 0; k < objects.size(); ++k) {
        if (mentions_object(s, object_tokens[k])) pair_count[a][objects[k]] += 1;
      }
    }
  }

  double total = 0;
  for (const auto& [a, c] : action_count) total += c;
  const auto n_actions = static_cast<double>(actions.size());
  const auto n_objects = static_cast<double>(objects.size());

  BigramSubTable sub;
  for (ActionLabel a : actions) {
    const double ca = action_count[a];
    if (ca == 0) {
      warnings.push_back("action '" + std::string(to_string(a)) + "' absent from " + name +
                         " corpus; prior and conditionals smoothed");
    }
    ActionStats stats;
    stats.prior = (ca + epsilon) / (total + epsilon * n_actions);
    const double denom = ca + epsilon * n_objects;
    for (const auto& o : objects) stats.given[o] = (pair_count[a][o] + epsilon) / denom;
    stats.unseen = epsilon / denom;
    sub.actions[a] = std::move(stats);
  }
  return sub;
}

}  // namespace

CorpusBuild build_bigram_table(std::string_view general_text, std::string_view recipe_text,
                               std::span<const ActionLabel> actions, std::span<const std::string> object_labels,
                               double epsilon) {
  if (!(epsilon > 0)) throw std::invalid_argument("build_bigram_table: epsilon must be > 0");
  if (actions.empty()) throw std::invalid_argument("build_bigram_table: empty action set");
  for (ActionLabel a : actions) {
    if (!is_individual(a)) throw std::invalid_argument("build_bigram_table: only individual actions are counted");
  }
  CorpusBuild build;
  build.table.epsilon = epsilon;
  build.table.general = count_corpus(general_text, "general", actions, object_labels, epsilon, build.warnings);
  build.table.recipe = count_corpus(recipe_text, "recipe", actions, object_labels, epsilon, build.warnings);
  return build;
}

// ---------------------------------------------------------------------------
// Individual actions

double RecognitionOptions::weight(ObjectClass c) const {
  auto it = class_weights.find(c);
  return it == class_weights.end() ? 1.0 : it->second;
}

Recognition recognize_individual(std::span<const WordObservation> objects, const BigramTable& table,
                                 const RecognitionOptions& options) {
  if (objects.empty()) throw std::invalid_argument("recognize_individual: at least one object is required");
  std::vector<WordObservation> words(objects.begin(), objects.end());
  if (options.deduplicate) {
    std::sort(words.begin(), words.end(), [](const auto& a, const auto& b) { return a.label < b.label; });
    words.erase(std::unique(words.begin(), words.end(), [](const auto& a, const auto& b) { return a.label == b.label; }),
                words.end());
  }
  const auto candidates = table.candidate_actions();
  if (candidates.empty()) throw std::invalid_argument("recognize_individual: table has no candidate actions");

  std::optional<Recognition> best;
  for (ActionLabel a : candidates) {
    double score = std::log(table.general.actions.at(a).prior);
    for (const auto& w : words) {
      const auto& sub = w.cls == ObjectClass::Ingredient ? table.recipe : table.general;
      score += options.weight(w.cls) * std::log(sub.probability(a, w.label, table.epsilon));
    }
    // scores equal up to rounding are ties
    const bool tie = best && std::abs(score - best->score) <= 1e-12 * std::abs(best->score);
    if (!best || (!tie && score > best->score) || (tie && to_string(a) < to_string(best->action))) {
      best = Recognition{a, score};
    }
  }
  return *best;
}

// ---------------------------------------------------------------------------
// Transfers

ContainerHistory container_history(std::span<const AssociationRecord> records) {
  ContainerHistory history;
  for (const auto& r : records) {
    for (const auto& l : r.object_links) {
      if (l.kind == LinkKind::ContainerHolds) history[l.target].push_back({r.segment_id, l.source});
    }
  }
  return history;
}

std::vector<TransferEvent> detect_transfer(const ContainerHistory& history) {
  std::vector<TransferEvent> out;
  for (const auto& [ingredient, obs] : history) {
    for (std::size_t i = 1; i < obs.size(); ++i) {
      if (obs[i].container != obs[i - 1].container) {
        out.push_back({ingredient, obs[i - 1].container, obs[i].container, obs[i].segment, obs[i - 1].segment});
      }
    }
  }
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
    return std::tie(a.segment, a.ingredient) < std::tie(b.segment, b.ingredient);
  });
  return out;
}

// ---------------------------------------------------------------------------
// Collaboration

GraspHistory grasp_history(std::span<const AssociationRecord> records) {
  GraspHistory history;
  for (const auto& r : records) {
    for (const auto& l : r.hand_links) {
      for (const auto& s : l.support) history[l.object_id].push_back({s, l.hand});
    }
  }
  for (auto& [obj, intervals] : history) {
    std::sort(intervals.begin(), intervals.end(), [](const auto& a, const auto& b) {
      return std::tie(a.frames, a.hand) < std::tie(b.frames, b.hand);
    });
  }
  return history;
}

namespace {

struct Piece {
  FrameRange frames;
  std::set<std::string> persons;
};

// Splits the object's grasp timeline into maximal pieces with a constant,
// non-empty set of grasping persons.
std::vector<Piece> grasper_pieces(const std::vector<GraspInterval>& intervals) {
  std::map<std::string, std::vector<FrameRange>> by_person;
  for (const auto& g : intervals) by_person[g.hand.person].push_back(g.frames);
  std::set<Frame> cuts;
  for (auto& [person, ranges] : by_person) {
    ranges = normalize_ranges(ranges);
    for (const auto& r : ranges) {
      cuts.insert(r.begin);
      cuts.insert(r.end);
    }
  }
  std::vector<Piece> pieces;
  for (auto it = cuts.begin(); it != cuts.end() && std::next(it) != cuts.end(); ++it) {
    const FrameRange span{*it, *std::next(it)};
    std::set<std::string> persons;
    for (const auto& [person, ranges] : by_person) {
      for (const auto& r : ranges) {
        if (r.contains(span.begin)) persons.insert(person);
      }
    }
    if (persons.empty()) continue;
    if (!pieces.empty() && pieces.back().frames.end == span.begin && pieces.back().persons == persons) {
      pieces.back().frames.end = span.end;
    } else {
      pieces.push_back({span, std::move(persons)});
    }
  }
  return pieces;
}

// The person's hand whose grasp is closest to `frame`: latest-ending before
// it when `before`, else earliest-starting at or after it.
HandKey hand_near(const std::vector<GraspInterval>& intervals, const std::string& person, Frame frame, bool before) {
  const GraspInterval* best = nullptr;
  for (const auto& g : intervals) {
    if (g.hand.person != person) continue;
    if (before) {
      if (g.frames.begin > frame) continue;
      if (!best || g.frames.end > best->frames.end) best = &g;
    } else {
      if (g.frames.end <= frame) continue;
      if (!best || g.frames.begin < best->frames.begin) best = &g;
    }
  }
  if (!best) {
    for (const auto& g : intervals) {
      if (g.hand.person == person) return g.hand;
    }
  }
  return best ? best->hand : HandKey{person, HandSide::Left};
}

HandKey hand_at(const std::vector<GraspInterval>& intervals, const std::string& person, Frame frame) {
  std::optional<HandKey> best;
  for (const auto& g : intervals) {
    if (g.hand.person == person && g.frames.contains(frame) && (!best || g.hand < *best)) best = g.hand;
  }
  return best ? *best : hand_near(intervals, person, frame, false);
}

Frame first_grasp(const std::vector<GraspInterval>& intervals, const std::string& person, Frame at) {
  // Start of the person's grasp that is ongoing at `at`.
  std::vector<FrameRange> ranges;
  for (const auto& g : intervals) {
    if (g.hand.person == person) ranges.push_back(g.frames);
  }
  for (const auto& r : normalize_ranges(ranges)) {
    if (r.contains(at)) return r.begin;
  }
  return at;
}

}  // namespace

std::vector<CollaborativeEvent> detect_collaboration(const GraspHistory& history,
                                                     std::span<const AssociationRecord> records,
                                                     Frame gap_tolerance) {
  std::vector<CollaborativeEvent> out;
  for (const auto& [object, intervals] : history) {
    const auto pieces = grasper_pieces(intervals);
    std::vector<bool> consumed(pieces.size(), false);

    // Handover: the sole grasper changes person, with only joint grasps and
    // short gaps in between.
    std::optional<std::size_t> last_sole;
    for (std::size_t i = 0; i < pieces.size(); ++i) {
      if (pieces[i].persons.size() != 1) continue;
      if (last_sole) {
        const auto& a = pieces[*last_sole];
        const auto& b = pieces[i];
        const auto& giver = *a.persons.begin();
        const auto& receiver = *b.persons.begin();
        bool bridged = true;
        for (std::size_t k = *last_sole + 1; k <= i; ++k) {
          bridged &= pieces[k].frames.begin - pieces[k - 1].frames.end <= gap_tolerance;
        }
        if (giver != receiver && bridged) {
          const Frame exchange = *last_sole + 1 < i ? pieces[*last_sole + 1].frames.begin : b.frames.begin;
          CollaborativeEvent e;
          e.label = ActionLabel::Handover;
          e.kind = CollaborationCase::SharedGrasp;
          e.object = object;
          e.first = hand_near(intervals, giver, exchange, true);
          e.second = hand_near(intervals, receiver, exchange, false);
          e.frame = exchange;
          out.push_back(std::move(e));
          for (std::size_t k = *last_sole + 1; k < i; ++k) consumed[k] = true;
        }
      }
      last_sole = i;
    }

    // Remaining joint grasps are holding.
    for (std::size_t i = 0; i < pieces.size(); ++i) {
      if (consumed[i] || pieces[i].persons.size() < 2) continue;
      if (i > 0 && pieces[i - 1].persons.size() >= 2 && !consumed[i - 1] &&
          pieces[i - 1].frames.end == pieces[i].frames.begin) {
        continue;  // continuation of the previous joint grasp
      }
      const Frame at = pieces[i].frames.begin;
      std::vector<std::pair<Frame, std::string>> order;
      for (const auto& p : pieces[i].persons) order.emplace_back(first_grasp(intervals, p, at), p);
      std::sort(order.begin(), order.end());
      CollaborativeEvent e;
      e.label = ActionLabel::Holding;
      e.kind = CollaborationCase::SharedGrasp;
      e.object = object;
      e.first = hand_at(intervals, order[0].second, at);
      e.second = hand_at(intervals, order[1].second, at);
      e.frame = at;
      out.push_back(std::move(e));
    }
  }

  for (const auto& r : records) {
    for (const auto& actor : r.hand_links) {
      const auto target = r.target_of(actor.object_id);
      if (!target) continue;
      for (const auto& holder : r.hand_links) {
        if (holder.object_id != *target || holder.hand.person == actor.hand.person) continue;
        CollaborativeEvent e;
        e.label = ActionLabel::Holding;
        e.kind = CollaborationCase::ToolOnHeld;
        e.object = *target;
        e.first = holder.hand;
        e.second = actor.hand;
        e.frame = r.span.begin;
        e.tool = actor.object_id;
        e.segment = r.segment_id;
        out.push_back(std::move(e));
      }
    }
  }

  for (auto& e : out) {
    if (e.segment) continue;
    for (const auto& r : records) {
      if (r.span.contains(e.frame) || (r.span.begin <= e.frame && !e.segment)) e.segment = r.segment_id;
      if (r.span.contains(e.frame)) break;
    }
  }
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
    return std::tie(a.frame, a.object, a.first, a.second) < std::tie(b.frame, b.object, b.first, b.second);
  });
  return out;
}

// ---------------------------------------------------------------------------
// Segment labelling

const HandActivity* RecognizedSegment::activity(const HandKey& hand) const {
  for (const auto& h : hands) {
    if (h.hand == hand) return &h;
  }
  return nullptr;
}

std::vector<RecognizedSegment> recognize_segments(std::span<const AssociationRecord> records, double fps,
                                                  const BigramTable& table, const RecognizeConfig& cfg) {
  std::map<std::string, ObjectRef> all_objects;
  for (const auto& r : records) all_objects.insert(r.objects.begin(), r.objects.end());
  auto ref = [&](const std::string& id) {
    auto it = all_objects.find(id);
    if (it == all_objects.end()) throw Error("association records reference unknown object '" + id + "'");
    return it->second;
  };

  std::vector<RecognizedSegment> out;
  std::map<int, std::size_t> index_of;
  for (const auto& r : records) {
    RecognizedSegment seg;
    seg.id = r.segment_id;
    seg.span = r.span;
    seg.objects = r.objects;
    for (const auto& link : r.hand_links) {
      HandActivity act;
      act.hand = link.hand;
      act.grasped = ref(link.object_id);
      auto t = r.target_of(link.object_id);
      if (t && act.grasped.cls == ObjectClass::Container && r.container_of(*t) == link.object_id) {
        t.reset();  // what a held container carries is its content, not a target
      }
      if (t) {
        const ObjectRef target = ref(*t);
        std::optional<ObjectRef> content;
        if (target.cls == ObjectClass::Container) {
          Frame best_support = -1;
          for (const auto& l : r.object_links) {
            if (l.kind == LinkKind::ContainerHolds && l.source == target.id && l.target != link.object_id &&
                l.support > best_support) {
              content = ref(l.target);
              best_support = l.support;
            }
          }
        }
        if (content) act.targets.push_back(*content);
        act.targets.push_back(target);
        std::vector<WordObservation> words{{act.grasped.label, act.grasped.cls}};
        for (const auto& o : act.targets) words.push_back({o.label, o.cls});
        const auto rec = recognize_individual(words, table, cfg.options);
        act.action = rec.action;
        act.score = rec.score;
      }
      seg.hands.push_back(std::move(act));
    }
    index_of[seg.id] = out.size();
    out.push_back(std::move(seg));
  }

  const auto gap = static_cast<Frame>(std::llround(cfg.handover_gap_s * fps));
  for (auto& e : detect_collaboration(grasp_history(records), records, gap)) {
    if (!e.segment || !index_of.count(*e.segment)) continue;
    auto& seg = out[index_of.at(*e.segment)];
    const HandKey& folded =
        e.kind == CollaborationCase::ToolOnHeld ? e.first : e.second;  // holder / receiver / second holder
    for (auto& h : seg.hands) {
      if (h.hand == folded) h.suppressed = true;
    }
    seg.objects.emplace(e.object, ref(e.object));
    if (!e.tool.empty()) seg.objects.emplace(e.tool, ref(e.tool));
    seg.events.push_back(std::move(e));
  }

  for (const auto& t : detect_transfer(container_history(records))) {
    std::vector<int> order;
    for (const auto& r : records) {
      if (r.segment_id > t.last_source_segment && r.segment_id < t.segment) order.push_back(r.segment_id);
    }
    order.push_back(t.segment);
    order.push_back(t.last_source_segment);
    // Prefer a hand touching the ingredient, then one working the source,
    // then one at the destination.
    auto tier = [&](const HandActivity& h, const AssociationRecord& rec) {
      const auto target = rec.target_of(h.grasped.id);
      if (h.grasped.id == t.ingredient || target == t.ingredient) return 0;
      if (h.grasped.id == t.source || target == t.source) return 1;
      if (target == t.destination) return 2;
      return 3;
    };
    std::optional<std::pair<HandKey, std::string>> mover;  // hand and the object it moves the ingredient with
    for (int wanted = 0; wanted < 3 && !mover; ++wanted) {
      for (int id : order) {
        const auto& seg = out[index_of.at(id)];
        const auto& rec = records[index_of.at(id)];
        for (const auto& h : seg.hands) {
          if (!h.suppressed && tier(h, rec) == wanted) {
            mover = {h.hand, h.grasped.id};
            break;
          }
        }
        if (mover) break;
      }
    }
    if (!mover) continue;
    // The whole scoop-carry-dump span of that hand and object becomes one
    // transfer, so it merges downstream instead of leaving stray labels.
    const std::vector<ObjectRef> targets{ref(t.ingredient), ref(t.source), ref(t.destination)};
    auto works_source = [&](std::size_t i) {
      const HandActivity* h = out[i].activity(mover->first);
      return h && !h->suppressed && h->grasped.id == mover->second && tier(*h, records[i]) <= 1;
    };
    int first = t.last_source_segment;
    for (std::size_t i = index_of.at(first); i > 0 && works_source(i - 1); --i) first = out[i - 1].id;
    for (auto& seg : out) {
      if (seg.id < first || seg.id > t.segment) continue;
      for (auto& h : seg.hands) {
        if (h.suppressed || h.hand != mover->first || h.grasped.id != mover->second) continue;
        h.action = ActionLabel::Transfer;
        h.score = 0;
        h.targets = targets;
        for (const auto& o : targets) seg.objects.emplace(o.id, o);
      }
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Recognized-segments file

namespace {

ordered_json object_map_json(const std::map<std::string, ObjectRef>& objects) {
  ordered_json j = ordered_json::object();
  for (const auto& [id, o] : objects) j[id] = {{"label", o.label}, {"class", std::string(to_string(o.cls))}};
  return j;
}

}  // namespace

void write_recognized(const std::vector<RecognizedSegment>& segments, std::ostream& out) {
  for (const auto& s : segments) {
    ordered_json j;
    j["segment"] = s.id;
    j["start"] = s.span.begin;
    j["end"] = s.span.end;
    j["objects"] = object_map_json(s.objects);
    j["hands"] = ordered_json::array();
    for (const auto& h : s.hands) {
      ordered_json hj;
      hj["hand"] = h.hand.str();
      hj["grasped"] = h.grasped.id;
      hj["action"] = h.action ? ordered_json(std::string(to_string(*h.action))) : ordered_json(nullptr);
      hj["score"] = h.score;
      hj["targets"] = ordered_json::array();
      for (const auto& t : h.targets) hj["targets"].push_back(t.id);
      hj["suppressed"] = h.suppressed;
      j["hands"].push_back(std::move(hj));
    }
    j["events"] = ordered_json::array();
    for (const auto& e : s.events) {
      ordered_json ej;
      ej["label"] = std::string(to_string(e.label));
      ej["case"] = e.kind == CollaborationCase::SharedGrasp ? "shared_grasp" : "tool_on_held";
      ej["object"] = e.object;
      ej["first"] = e.first.str();
      ej["second"] = e.second.str();
      ej["frame"] = e.frame;
      if (!e.tool.empty()) ej["tool"] = e.tool;
      j["events"].push_back(std::move(ej));
    }
    out << j.dump() << '\n';
  }
}

std::vector<RecognizedSegment> parse_recognized(std::istream& in) {
  std::vector<RecognizedSegment> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const json j = json::parse(line);
      RecognizedSegment s;
      s.id = j.at("segment").get<int>();
      s.span = {j.at("start").get<Frame>(), j.at("end").get<Frame>()};
      for (const auto& [id, o] : j.at("objects").items()) {
        s.objects[id] = {id, o.at("label").get<std::string>(), parse_object_class(o.at("class").get<std::string>())};
      }
      auto ref = [&](const std::string& id) {
        auto it = s.objects.find(id);
        if (it == s.objects.end()) throw InputError("unknown object '" + id + "'");
        return it->second;
      };
      for (const auto& hj : j.at("hands")) {
        HandActivity h;
        h.hand = HandKey::parse(hj.at("hand").get<std::string>());
        h.grasped = ref(hj.at("grasped").get<std::string>());
        if (!hj.at("action").is_null()) h.action = parse_action(hj.at("action").get<std::string>());
        h.score = hj.value("score", 0.0);
        for (const auto& t : hj.at("targets")) h.targets.push_back(ref(t.get<std::string>()));
        h.suppressed = hj.value("suppressed", false);
        s.hands.push_back(std::move(h));
      }
      for (const auto& ej : j.at("events")) {
        CollaborativeEvent e;
        e.label = parse_action(ej.at("label").get<std::string>());
        e.kind = ej.at("case").get<std::string>() == "tool_on_held" ? CollaborationCase::ToolOnHeld
                                                                     : CollaborationCase::SharedGrasp;
        e.object = ej.at("object").get<std::string>();
        e.first = HandKey::parse(ej.at("first").get<std::string>());
        e.second = HandKey::parse(ej.at("second").get<std::string>());
        e.frame = ej.at("frame").get<Frame>();
        e.tool = ej.value("tool", std::string());
        e.segment = s.id;
        s.events.push_back(std::move(e));
      }
      out.push_back(std::move(s));
    } catch (const InputError&) {
      throw;
    } catch (const std::exception& e) {
      throw InputError("malformed recognized segment at line " + std::to_string(line_no) + ": " + e.what(), line_no);
    }
  }
  return out;
}

void save_recognized(const std::vector<RecognizedSegment>& segments, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  write_recognized(segments, out);
}

std::vector<RecognizedSegment> load_recognized(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open recognized-segments file " + path.string());
  return parse_recognized(in);
}

}  // namespace video2plan
