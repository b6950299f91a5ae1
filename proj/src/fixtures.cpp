#include "video2plan/fixtures.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <numbers>
#include <random>
#include <set>

#include <json.hpp>

#include "video2plan/pipeline.hpp"

namespace video2plan {

namespace {

// Box-Muller over mt19937_64 so the streams do not depend on the standard
// library's distribution implementations.
class Noise {
 public:
  explicit Noise(std::uint64_t seed) : rng_(seed) {}

  double normal(double sigma) {
    if (sigma <= 0) return 0;
    if (spare_) {
      const double v = *spare_;
      spare_.reset();
      return v * sigma;
    }
    double u1 = uniform();
    while (u1 <= 0) u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    spare_ = r * std::sin(2 * std::numbers::pi * u2);
    return r * std::cos(2 * std::numbers::pi * u2) * sigma;
  }

 private:
  double uniform() { return static_cast<double>(rng_() >> 11) * 0x1.0p-53; }

  std::mt19937_64 rng_;
  std::optional<double> spare_;
};

double round2(double v) { return std::round(v * 100) / 100; }

BoundingBox centered(Point c, double w, double h) { return {c.x - w / 2, c.y - h / 2, w, h}; }

bool hidden_at(const ScriptObject& o, Frame f) {
  return std::any_of(o.hidden.begin(), o.hidden.end(), [&](const FrameRange& r) { return r.contains(f); });
}

}  // namespace

DetectionStream generate_stream(const Script& script, const Lexicon& lexicon) {
  if (!(script.fps > 0)) throw InputError("script fps must be positive");
  DetectionStream stream;
  stream.fps = script.fps;
  stream.image = script.image;
  stream.lexicon = lexicon;

  std::map<std::string, BoundingBox> boxes;
  for (const auto& o : script.objects) {
    if (!lexicon.find(o.label)) throw InputError("script '" + script.name + "' uses unknown label '" + o.label + "'");
    if (!boxes.emplace(o.id, o.box).second) throw InputError("duplicate object id '" + o.id + "'");
  }
  std::map<HandKey, Point> pos;
  for (const auto& h : script.hands) pos[h.hand] = h.rest;

  std::map<HandKey, std::vector<const ScriptEvent*>> by_hand;
  for (const auto& e : script.events) {
    if (!pos.count(e.hand)) throw InputError("script event for unknown hand " + e.hand.str());
    if (e.frames.length() <= 0) throw InputError("script event with an empty frame range");
    for (const auto& c : e.carry) {
      if (!boxes.count(c)) throw InputError("script carries unknown object '" + c + "'");
    }
    if (e.at && !boxes.count(*e.at)) throw InputError("script targets unknown object '" + *e.at + "'");
    by_hand[e.hand].push_back(&e);
  }
  for (auto& [hand, events] : by_hand) {
    std::sort(events.begin(), events.end(), [](auto* a, auto* b) { return a->frames.begin < b->frames.begin; });
    for (std::size_t i = 1; i < events.size(); ++i) {
      if (events[i]->frames.begin < events[i - 1]->frames.end) {
        throw InputError("overlapping script events for " + hand.str());
      }
    }
  }

  struct Active {
    Point start;
    Point dest;
  };
  std::map<const ScriptEvent*, Active> active;
  Noise noise(script.seed);

  for (Frame f = 0; f < script.length; ++f) {
    FrameDetections frame;
    frame.frame_index = f;
    frame.time_s = static_cast<double>(f) / script.fps;
    std::set<HandKey> hidden_hands;

    for (auto& [hand, events] : by_hand) {
      const ScriptEvent* e = nullptr;
      for (const auto* ev : events) {
        if (ev->frames.contains(f)) e = ev;
      }
      if (!e) continue;
      Point& p = pos[hand];
      if (f == e->frames.begin) {
        Point dest = e->to;
        if (e->at) {
          const auto& b = boxes.at(*e->at);
          dest = {b.center_x() + e->offset.x, b.center_y() + e->offset.y};
        }
        active[e] = {p, dest};
      }
      const Active& a = active.at(e);
      const double len = static_cast<double>(e->frames.length());
      const double k = static_cast<double>(f - e->frames.begin + 1);
      Point next = p;
      switch (e->motion) {
        case Motion::Reach:
        case Motion::Carry:
          next = {a.start.x + (a.dest.x - a.start.x) * k / len, a.start.y + (a.dest.y - a.start.y) * k / len};
          break;
        case Motion::Work: {
          const double s = std::sin(2 * std::numbers::pi * (k / script.fps) / e->period_s);
          next = {a.start.x + e->swing.x * s, a.start.y + e->swing.y * s};
          break;
        }
        case Motion::Hide:
          hidden_hands.insert(hand);
          break;
      }
      if (e->motion == Motion::Carry || e->motion == Motion::Work) {
        for (const auto& id : e->carry) {
          boxes[id].x += next.x - p.x;
          boxes[id].y += next.y - p.y;
        }
      }
      p = next;
    }

    for (const auto& h : script.hands) {
      if (hidden_hands.count(h.hand)) continue;
      const Point p = pos[h.hand];
      const Point c{p.x + noise.normal(script.noise_px), p.y + noise.normal(script.noise_px)};
      BoundingBox b = centered(c, script.hand_size, script.hand_size);
      frame.hands.push_back({h.hand.person, h.hand.side, {round2(b.x), round2(b.y), round2(b.w), round2(b.h)}, 1.0});
    }
    for (const auto& o : script.objects) {
      if (hidden_at(o, f)) continue;
      const auto& b = boxes.at(o.id);
      const double dx = noise.normal(script.noise_px / 2);
      const double dy = noise.normal(script.noise_px / 2);
      frame.objects.push_back({o.id, o.label, {round2(b.x + dx), round2(b.y + dy), round2(b.w), round2(b.h)}});
    }
    stream.frames.push_back(std::move(frame));
  }
  validate_stream(stream);
  return stream;
}

Lexicon kitchen_lexicon() {
  Lexicon lex;
  for (const char* t : {"knife", "spoon", "spatula", "rolling_pin", "fork", "tongs", "brush", "foil"}) {
    lex.add(t, ObjectClass::Tool);
  }
  for (const char* c : {"board", "pot", "pan", "bowl", "cup", "plate", "jug"}) lex.add(c, ObjectClass::Container);
  for (const char* i : {"lemon", "meat", "chicken", "flour", "dough", "egg", "patty", "onion", "oil", "tomato",
                        "butter", "bread", "salt", "sugar", "sauce", "seaweed"}) {
    lex.add(i, ObjectClass::Ingredient);
  }
  return lex;
}

// ---------------------------------------------------------------------------
// Scenarios

namespace {

const HandKey LH1{"P1", HandSide::Left};
const HandKey RH1{"P1", HandSide::Right};
const HandKey LH2{"P2", HandSide::Left};
const HandKey RH2{"P2", HandSide::Right};

ScriptObject object(const std::string& id, const std::string& label, Point c, double w, double h) {
  return {id, label, centered(c, w, h), {}};
}

ScriptEvent reach(const HandKey& h, Frame b, Frame e, Point to) {
  ScriptEvent ev;
  ev.hand = h;
  ev.frames = {b, e};
  ev.motion = Motion::Reach;
  ev.to = to;
  return ev;
}

ScriptEvent reach_to(const HandKey& h, Frame b, Frame e, const std::string& obj, Point offset = {}) {
  ScriptEvent ev = reach(h, b, e, {});
  ev.at = obj;
  ev.offset = offset;
  return ev;
}

ScriptEvent carry(const HandKey& h, Frame b, Frame e, Point to, std::vector<std::string> objs) {
  ScriptEvent ev = reach(h, b, e, to);
  ev.motion = Motion::Carry;
  ev.carry = std::move(objs);
  return ev;
}

ScriptEvent work(const HandKey& h, Frame b, Frame e, Point swing, std::vector<std::string> objs) {
  ScriptEvent ev = reach(h, b, e, {});
  ev.motion = Motion::Work;
  ev.swing = swing;
  ev.carry = std::move(objs);
  return ev;
}

std::vector<ScriptHand> two_people() {
  return {{LH1, {150, 600}}, {RH1, {300, 650}}, {LH2, {980, 650}}, {RH2, {1130, 600}}};
}

LabeledTree truth(Frame b, Frame e, const std::string& agent, const std::string& sexpr,
                  std::optional<FailureType> failure = std::nullopt) {
  return {{b, e}, agent, parse_sexpr(sexpr), failure};
}

Fixture handover_lemon() {
  Fixture f;
  f.name = "handover-lemon";
  f.description = "P1 hands a lemon to P2";
  auto& s = f.script;
  s.length = 360;
  s.hands = two_people();
  s.objects = {object("lemon_1", "lemon", {400, 450}, 40, 40)};
  s.events = {
      reach_to(LH1, 30, 75, "lemon_1"),
      carry(LH1, 105, 165, {640, 400}, {"lemon_1"}),
      reach(RH2, 135, 180, {680, 400}),
      carry(RH2, 225, 285, {1000, 450}, {"lemon_1"}),
      reach(LH1, 225, 270, {150, 600}),
      reach(RH2, 300, 340, {1130, 600}),
  };
  const std::string tree = "(HP (HP (H LH_P1) (O lemon)) (CP (C handover) (HP (H RH_P2) (O lemon))))";
  f.truth = {truth(135, 225, "P1", tree)};
  f.expected_trees = {tree};
  f.lanes = {"P1: grasp engage actuate", "P2: engage actuate place"};
  return f;
}

Fixture holding_cut() {
  Fixture f;
  f.name = "holding-cut";
  f.description = "P1 holds the board while P2 cuts the meat on it";
  auto& s = f.script;
  s.length = 420;
  s.hands = two_people();
  s.objects = {
      object("board_1", "board", {640, 420}, 260, 160),
      object("meat_1", "meat", {640, 420}, 70, 40),
      object("knife_1", "knife", {900, 560}, 120, 20),
  };
  s.events = {
      reach(LH1, 20, 70, {520, 420}),
      reach_to(RH2, 60, 100, "knife_1", {60, 0}),
      carry(RH2, 100, 150, {810, 420}, {"knife_1"}),
      work(RH2, 150, 300, {0, 12}, {"knife_1"}),
      carry(RH2, 300, 345, {960, 560}, {"knife_1"}),
      reach(RH2, 345, 390, {1130, 600}),
      reach(LH1, 360, 400, {150, 600}),
  };
  const std::string tree = "(HP (HP (H RH_P2) (O knife)) (AP (A cut) (HP (H LH_P1) (O board))))";
  f.truth = {truth(150, 300, "P2", tree)};
  f.expected_trees = {tree};
  f.lanes = {"P1: grasp actuate place", "P2: grasp engage actuate place"};
  return f;
}

Fixture transfer_chicken() {
  Fixture f;
  f.name = "transfer-chicken";
  f.description = "P1 moves chicken from the board to the pot with a spatula";
  auto& s = f.script;
  s.length = 360;
  s.hands = two_people();
  s.objects = {
      object("board_1", "board", {450, 430}, 160, 110),
      object("chicken_1", "chicken", {500, 430}, 60, 40),
      object("pot_1", "pot", {820, 430}, 180, 140),
      object("spatula_1", "spatula", {640, 580}, 20, 120),
  };
  s.events = {
      reach_to(RH1, 20, 60, "spatula_1", {0, 70}),
      carry(RH1, 60, 110, {500, 545}, {"spatula_1"}),
      work(RH1, 110, 150, {0, 6}, {"spatula_1"}),
      carry(RH1, 150, 210, {820, 560}, {"spatula_1", "chicken_1"}),
      work(RH1, 210, 240, {0, 6}, {"spatula_1"}),
      carry(RH1, 240, 290, {640, 650}, {"spatula_1"}),
      reach(RH1, 290, 330, {300, 650}),
  };
  const std::string tree =
      "(HP (HP (H RH_P1) (O spatula)) (AP (A transfer) (OP (O chicken) (OP (O board) (O pot)))))";
  f.truth = {truth(110, 240, "P1", tree)};
  f.expected_trees = {tree};
  f.lanes = {"P1: grasp engage actuate engage actuate place"};
  return f;
}

Fixture stir_transfer_flour() {
  Fixture f;
  f.name = "stir-transfer-flour";
  f.description = "P1 stirs the pot while P2 moves flour from the bowl to the pot";
  auto& s = f.script;
  s.length = 480;
  s.hands = two_people();
  s.objects = {
      object("pot_1", "pot", {640, 380}, 200, 150),
      object("spoon_1", "spoon", {420, 600}, 16, 110),
      object("bowl_1", "bowl", {980, 400}, 140, 100),
      object("flour_1", "flour", {980, 400}, 60, 45),
      object("spoon_2", "spoon", {1100, 560}, 16, 110),
  };
  s.events = {
      reach_to(RH1, 20, 60, "spoon_1", {0, 70}),
      carry(RH1, 60, 100, {600, 520}, {"spoon_1"}),
      work(RH1, 100, 420, {20, 0}, {"spoon_1"}),
      carry(RH1, 420, 460, {420, 670}, {"spoon_1"}),
      reach_to(RH2, 40, 80, "spoon_2", {0, 70}),
      carry(RH2, 80, 130, {980, 520}, {"spoon_2"}),
      work(RH2, 130, 160, {0, 6}, {"spoon_2"}),
      carry(RH2, 160, 220, {690, 520}, {"spoon_2", "flour_1"}),
      work(RH2, 220, 250, {0, 6}, {"spoon_2"}),
      carry(RH2, 250, 310, {1100, 630}, {"spoon_2"}),
      reach(RH2, 310, 350, {1130, 600}),
  };
  const std::string stir = "(HP (HP (H RH_P1) (O spoon)) (AP (A stir) (OP (O flour) (O pot))))";
  const std::string move = "(HP (HP (H RH_P2) (O spoon)) (AP (A transfer) (OP (O flour) (OP (O bowl) (O pot)))))";
  f.truth = {truth(100, 420, "P1", stir), truth(130, 250, "P2", move)};
  f.expected_trees = {stir, move};
  f.lanes = {"P1: grasp engage actuate place", "P2: grasp engage actuate engage actuate place"};
  return f;
}

Fixture roll_dough() {
  Fixture f;
  f.name = "roll-dough";
  f.description = "P2 rolls the dough on the board";
  auto& s = f.script;
  s.length = 330;
  s.hands = two_people();
  s.objects = {
      object("board_1", "board", {900, 420}, 220, 140),
      object("dough_1", "dough", {930, 420}, 80, 50),
      object("pin_1", "rolling_pin", {1050, 560}, 140, 24),
  };
  s.events = {
      reach_to(RH2, 20, 60, "pin_1", {70, 0}),
      carry(RH2, 60, 110, {1075, 420}, {"pin_1"}),
      work(RH2, 110, 260, {25, 0}, {"pin_1"}),
      carry(RH2, 260, 300, {1120, 560}, {"pin_1"}),
  };
  const std::string tree = "(HP (HP (H RH_P2) (O rolling_pin)) (AP (A roll) (OP (O dough) (O board))))";
  f.truth = {truth(110, 260, "P2", tree)};
  f.expected_trees = {tree};
  f.lanes = {"P2: grasp engage actuate place"};
  return f;
}

Fixture heat_pan() {
  Fixture f;
  f.name = "heat-pan";
  f.description = "P1 heats an egg in the pan, tending it with a spatula";
  auto& s = f.script;
  s.length = 330;
  s.hands = two_people();
  s.objects = {
      object("pan_1", "pan", {450, 400}, 200, 140),
      object("egg_1", "egg", {450, 400}, 50, 40),
      object("spatula_1", "spatula", {640, 580}, 20, 120),
  };
  s.events = {
      reach_to(RH1, 20, 60, "spatula_1", {0, 70}),
      carry(RH1, 60, 110, {450, 530}, {"spatula_1"}),
      work(RH1, 110, 260, {10, 4}, {"spatula_1"}),
      carry(RH1, 260, 300, {640, 650}, {"spatula_1"}),
  };
  const std::string tree = "(HP (HP (H RH_P1) (O spatula)) (AP (A heat) (OP (O egg) (O pan))))";
  f.truth = {truth(110, 260, "P1", tree)};
  f.expected_trees = {tree};
  f.lanes = {"P1: grasp engage actuate place"};
  return f;
}

Fixture cup_cut_patty() {
  Fixture f;
  f.name = "cup-cut-patty";
  f.description = "P1 cuts a patty with a cup; commonsense statistics favour another action";
  f.failure = true;
  auto& s = f.script;
  s.length = 330;
  s.hands = two_people();
  s.objects = {
      object("plate_1", "plate", {640, 450}, 200, 120),
      object("patty_1", "patty", {640, 450}, 80, 40),
      object("cup_1", "cup", {420, 560}, 60, 80),
  };
  s.events = {
      reach_to(RH1, 20, 60, "cup_1", {0, -50}),
      carry(RH1, 60, 110, {640, 320}, {"cup_1"}),
      work(RH1, 110, 260, {0, 10}, {"cup_1"}),
      carry(RH1, 260, 300, {420, 510}, {"cup_1"}),
  };
  const std::string intended = "(HP (HP (H RH_P1) (O cup)) (AP (A cut) (OP (O patty) (O plate))))";
  f.truth = {truth(110, 260, "P1", intended, FailureType::ActionRecognition)};
  f.expected_trees = {"(HP (HP (H RH_P1) (O cup)) (AP (A pour) (OP (O patty) (O plate))))"};
  f.missing_trees = {intended};
  f.lanes = {"P1: grasp engage actuate place"};
  return f;
}

Fixture missing_onion() {
  Fixture f;
  f.name = "missing-onion";
  f.description = "P2 sprinkles onion into the pot, but the onion is never annotated";
  f.failure = true;
  auto& s = f.script;
  s.length = 300;
  s.hands = two_people();
  s.objects = {object("pot_1", "pot", {640, 380}, 200, 150)};
  s.events = {
      reach(RH2, 20, 70, {800, 300}),
      work(RH2, 70, 220, {0, 15}, {}),
      reach(RH2, 220, 270, {1130, 600}),
  };
  const std::string intended = "(HP (HP (H RH_P2) (O onion)) (AP (A sprinkle) (O pot)))";
  f.truth = {truth(70, 220, "P2", intended, FailureType::HandObject)};
  f.missing_trees = {intended};
  return f;
}

Fixture oil_wrong_container() {
  Fixture f;
  f.name = "oil-wrong-container";
  f.description = "P1 pours oil into the pot, but the neighbouring pan is the nearer overlapping container";
  f.failure = true;
  auto& s = f.script;
  s.length = 330;
  s.hands = two_people();
  s.objects = {
      object("pot_1", "pot", {640, 420}, 200, 140),
      object("pan_1", "pan", {820, 380}, 180, 120),
      object("oil_1", "oil", {520, 620}, 30, 70),
  };
  s.events = {
      reach_to(RH1, 20, 60, "oil_1", {0, -80}),
      carry(RH1, 60, 90, {520, 190}, {"oil_1"}),
      carry(RH1, 90, 120, {745, 190}, {"oil_1"}),
      carry(RH1, 120, 130, {745, 250}, {"oil_1"}),
      work(RH1, 130, 250, {0, 5}, {"oil_1"}),
      carry(RH1, 250, 260, {745, 190}, {"oil_1"}),
      carry(RH1, 260, 280, {520, 190}, {"oil_1"}),
      carry(RH1, 280, 310, {520, 540}, {"oil_1"}),
  };
  const std::string intended = "(HP (HP (H RH_P1) (O oil)) (AP (A pour) (O pot)))";
  f.truth = {truth(130, 250, "P1", intended, FailureType::ObjectObject)};
  f.expected_trees = {"(HP (HP (H RH_P1) (O oil)) (AP (A pour) (O pan)))"};
  f.missing_trees = {intended};
  f.lanes = {"P1: grasp engage actuate place"};
  return f;
}

Fixture spurious_oil() {
  Fixture f;
  f.name = "spurious-oil";
  f.description = "P1 rests a hand next to the oil by the pot without doing anything";
  f.failure = true;
  auto& s = f.script;
  s.length = 300;
  s.hands = two_people();
  s.objects = {
      object("pot_1", "pot", {640, 420}, 200, 140),
      object("oil_1", "oil", {750, 420}, 30, 70),
  };
  s.events = {
      reach(LH1, 30, 80, {850, 580}),
      reach(LH1, 80, 100, {850, 480}),
      reach(LH1, 240, 260, {850, 580}),
      reach(LH1, 260, 290, {150, 600}),
  };
  f.expected_trees = {"(HP (HP (H LH_P1) (O oil)) (AP (A pour) (O pot)))"};
  f.lanes = {"P1: grasp engage actuate place"};
  return f;
}

}  // namespace

std::vector<std::string> fixture_names() {
  return {"handover-lemon", "holding-cut",   "transfer-chicken",    "stir-transfer-flour", "roll-dough",
          "heat-pan",       "cup-cut-patty", "missing-onion",       "oil-wrong-container", "spurious-oil"};
}

Fixture make_fixture(const std::string& name) {
  Fixture f;
  if (name == "handover-lemon") f = handover_lemon();
  else if (name == "holding-cut") f = holding_cut();
  else if (name == "transfer-chicken") f = transfer_chicken();
  else if (name == "stir-transfer-flour") f = stir_transfer_flour();
  else if (name == "roll-dough") f = roll_dough();
  else if (name == "heat-pan") f = heat_pan();
  else if (name == "cup-cut-patty") f = cup_cut_patty();
  else if (name == "missing-onion") f = missing_onion();
  else if (name == "oil-wrong-container") f = oil_wrong_container();
  else if (name == "spurious-oil") f = spurious_oil();
  else {
    std::string known;
    for (const auto& n : fixture_names()) known += (known.empty() ? "" : ", ") + n;
    throw InputError("unknown fixture '" + name + "'; available: " + known);
  }
  f.script.name = f.name;
  f.stream = generate_stream(f.script, kitchen_lexicon());
  return f;
}

Timeline cut_then_spread_timeline() {
  auto tree = [](const std::string& sexpr, const std::vector<std::pair<std::string, ObjectClass>>& bindings) {
    ActionTree t = parse_sexpr(sexpr);
    std::size_t next = 0;
    std::function<void(ActionTree&)> bind = [&](ActionTree& n) {
      if (n.is_leaf()) {
        if (n.label == Symbol::O) {
          n.leaf.id = bindings.at(next).first;
          n.leaf.cls = bindings.at(next).second;
          ++next;
        }
        return;
      }
      for (auto& c : n.children) bind(c);
    };
    bind(t);
    return t;
  };
  const ActionTree cut = tree("(HP (HP (H RH_P1) (O knife)) (AP (A cut) (OP (O bread) (O board))))",
                              {{"knife_1", ObjectClass::Tool},
                               {"bread_1", ObjectClass::Ingredient},
                               {"board_1", ObjectClass::Container}});
  const ActionTree spread = tree("(HP (HP (H RH_P1) (O knife)) (AP (A spread) (O bread)))",
                                 {{"knife_1", ObjectClass::Tool}, {"bread_1", ObjectClass::Ingredient}});
  return {
      {{0, 90}, {0}, {{RH1, cut}}},
      {{90, 180}, {1}, {{RH1, spread}}},
  };
}

std::vector<std::string> lane_signature(const ActionGraph& g) {
  std::vector<std::string> out;
  for (const auto& agent : g.agents) {
    std::string line = agent + ":";
    auto it = g.lanes.find(agent);
    if (it != g.lanes.end()) {
      for (int id : it->second) line += " " + std::string(to_string(g.node(id).kind));
    }
    out.push_back(line);
  }
  return out;
}

std::vector<std::string> write_fixture(const Fixture& f, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  auto open = [&](const std::string& name) {
    std::ofstream out(dir / name, std::ios::binary);
    if (!out) throw Error("cannot write " + (dir / name).string());
    return out;
  };
  std::vector<std::string> files{"stream.jsonl", "lexicon.json", "table.json", "library.json", "truth.tsv",
                                 "config.json"};
  save_stream(f.stream, dir / "stream.jsonl");
  save_lexicon(f.stream.lexicon, dir / "lexicon.json");
  save_bigram_table(kitchen_mini_table(), dir / "table.json");
  save_library(PrimitiveLibrary::defaults(), dir / "library.json");
  {
    auto out = open("truth.tsv");
    write_truth(f.truth, out);
  }
  {
    PipelineConfig cfg;
    cfg.stream = "stream.jsonl";
    cfg.lexicon = "lexicon.json";
    cfg.table = "table.json";
    cfg.library = "library.json";
    cfg.truth = "truth.tsv";
    cfg.output_dir = "out";
    auto out = open("config.json");
    write_config(cfg, out);
  }
  nlohmann::ordered_json j;
  j["name"] = f.name;
  j["description"] = f.description;
  j["failure"] = f.failure;
  j["seed"] = f.script.seed;
  j["files"] = files;
  j["expected_trees"] = f.expected_trees;
  j["missing_trees"] = f.missing_trees;
  j["lanes"] = f.lanes;
  {
    auto out = open("fixture.json");
    out << j.dump(2) << '\n';
  }
  files.push_back("fixture.json");
  return files;
}

}  // namespace video2plan
