#pragma once

#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "video2plan/fixtures.hpp"
#include "video2plan/grammar.hpp"
#include "video2plan/pipeline.hpp"

namespace testing {

using namespace video2plan;

inline std::filesystem::path temp_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("video2plan_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

inline std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file(const std::filesystem::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  out << text;
}

inline Terminal H(const std::string& hand) { return Terminal::hand(HandKey::parse(hand)); }
inline Terminal O(const std::string& word, ObjectClass cls = ObjectClass::Tool) {
  return Terminal::object({word + "_1", word, cls});
}
inline Terminal A(ActionLabel a) { return Terminal::action(a); }

struct Scenario {
  std::string name;
  std::vector<Terminal> sentence;
  std::string tree;
};

// Sentences and trees of the six success scenarios.
inline std::vector<Scenario> success_scenarios() {
  using C = ObjectClass;
  return {
      {"handover-lemon",
       {H("LH_P1"), O("lemon", C::Ingredient), A(ActionLabel::Handover), H("RH_P2"), O("lemon", C::Ingredient)},
       "(HP (HP (H LH_P1) (O lemon)) (CP (C handover) (HP (H RH_P2) (O lemon))))"},
      {"holding-cut",
       {H("RH_P2"), O("knife"), A(ActionLabel::Cut), H("LH_P1"), O("board", C::Container)},
       "(HP (HP (H RH_P2) (O knife)) (AP (A cut) (HP (H LH_P1) (O board))))"},
      {"transfer-chicken",
       {H("RH_P1"), O("spatula"), A(ActionLabel::Transfer), O("chicken", C::Ingredient), O("board", C::Container),
        O("pot", C::Container)},
       "(HP (HP (H RH_P1) (O spatula)) (AP (A transfer) (OP (O chicken) (OP (O board) (O pot)))))"},
      {"stir-pot",
       {H("RH_P1"), O("spoon"), A(ActionLabel::Stir), O("flour", C::Ingredient), O("pot", C::Container)},
       "(HP (HP (H RH_P1) (O spoon)) (AP (A stir) (OP (O flour) (O pot))))"},
      {"roll-dough",
       {H("RH_P2"), O("rolling_pin"), A(ActionLabel::Roll), O("dough", C::Ingredient), O("board", C::Container)},
       "(HP (HP (H RH_P2) (O rolling_pin)) (AP (A roll) (OP (O dough) (O board))))"},
      {"heat-pan",
       {H("RH_P1"), O("spatula"), A(ActionLabel::Heat), O("egg", C::Ingredient), O("pan", C::Container)},
       "(HP (HP (H RH_P1) (O spatula)) (AP (A heat) (OP (O egg) (O pan))))"},
  };
}

// Random sentence of the grammar's language, built from the H O (A O+ |
// A H O | C H O)* shape with bounded repetition.
inline std::vector<Terminal> random_sentence(std::mt19937_64& rng, int max_phrases = 3, int max_objects = 4) {
  static const std::vector<std::string> hands{"LH_P1", "RH_P1", "LH_P2", "RH_P2"};
  static const std::vector<std::string> objects{"knife", "pot", "lemon", "board", "spoon", "flour", "bowl"};
  auto pick = [&](const auto& v) { return v[std::uniform_int_distribution<std::size_t>(0, v.size() - 1)(rng)]; };
  auto actions = individual_actions();
  std::vector<Terminal> s{H(pick(hands)), O(pick(objects))};
  const int phrases = std::uniform_int_distribution<int>(0, max_phrases)(rng);
  for (int p = 0; p < phrases; ++p) {
    const int kind = std::uniform_int_distribution<int>(0, 2)(rng);
    if (kind == 0) {
      s.push_back(A(actions[std::uniform_int_distribution<std::size_t>(0, actions.size() - 1)(rng)]));
      const int n = std::uniform_int_distribution<int>(1, max_objects)(rng);
      for (int i = 0; i < n; ++i) s.push_back(O(pick(objects)));
    } else if (kind == 1) {
      s.push_back(A(actions[std::uniform_int_distribution<std::size_t>(0, actions.size() - 1)(rng)]));
      s.push_back(H(pick(hands)));
      s.push_back(O(pick(objects)));
    } else {
      s.push_back(A(std::bernoulli_distribution(0.5)(rng) ? ActionLabel::Handover : ActionLabel::Holding));
      s.push_back(H(pick(hands)));
      s.push_back(O(pick(objects)));
    }
  }
  return s;
}

inline BoundingBox random_box(std::mt19937_64& rng, double max_xy = 400, double max_wh = 120) {
  std::uniform_real_distribution<double> xy(0, max_xy), wh(1, max_wh);
  auto q = [](double v) { return std::round(v * 100) / 100; };
  return {q(xy(rng)), q(xy(rng)), q(wh(rng)), q(wh(rng))};
}

}  // namespace testing
