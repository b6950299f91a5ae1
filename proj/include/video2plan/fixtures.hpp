#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "video2plan/evalkit.hpp"
#include "video2plan/ingest.hpp"
#include "video2plan/plan.hpp"
#include "video2plan/recognize.hpp"

namespace video2plan {

struct Point {
  double x = 0;
  double y = 0;
};

struct ScriptObject {
  std::string id;
  std::string label;
  BoundingBox box;
  std::vector<FrameRange> hidden;  // frames where the detector misses it
};

struct ScriptHand {
  HandKey hand;
  Point rest;  // box center at frame 0
};

enum class Motion {
  Reach,  // move to `to` (or onto `at`) without carrying
  Carry,  // move to `to` (or onto `at`), carried objects follow
  Work,   // oscillate in place, carried objects follow
  Hide,   // hand not detected
};

struct ScriptEvent {
  HandKey hand;
  FrameRange frames;
  Motion motion = Motion::Reach;
  std::optional<std::string> at;  // destination: this object's current center plus `offset`
  Point to;                       // destination when `at` is empty
  Point offset;
  std::vector<std::string> carry;
  Point swing{20, 0};     // Work: peak displacement, pixels
  double period_s = 0.6;  // Work
};

// Outside its events a hand stays where the last event left it.
struct Script {
  std::string name;
  double fps = 30;
  Frame length = 0;
  ImageSize image{1280, 720};
  double hand_size = 60;
  double noise_px = 1.0;
  std::uint64_t seed = 7;
  std::vector<ScriptObject> objects;
  std::vector<ScriptHand> hands;
  std::vector<ScriptEvent> events;
};

// Renders the script into per-frame detections. Deterministic for a seed;
// throws InputError for labels outside the lexicon or unknown objects/hands.
DetectionStream generate_stream(const Script& script, const Lexicon& lexicon);

struct Fixture {
  std::string name;
  std::string description;
  bool failure = false;
  Script script;
  DetectionStream stream;
  std::vector<LabeledTree> truth;
  // Trees the pipeline must emit (s-expressions). For failure fixtures these
  // are the documented wrong trees.
  std::vector<std::string> expected_trees;
  // Truth trees the pipeline must not emit (failure fixtures).
  std::vector<std::string> missing_trees;
  // Per-agent lane signature of the plan, e.g. "P1: grasp engage actuate".
  std::vector<std::string> lanes;
};

Lexicon kitchen_lexicon();

std::vector<std::string> fixture_names();
Fixture make_fixture(const std::string& name);

// Trees-only timeline: one agent cuts and then spreads with the same knife.
Timeline cut_then_spread_timeline();

// Writes stream, lexicon, table, library, truth, config and a fixture
// manifest into `dir`; returns the written file names.
std::vector<std::string> write_fixture(const Fixture& f, const std::filesystem::path& dir);

// "P1: grasp engage actuate place" per agent, in agent order.
std::vector<std::string> lane_signature(const ActionGraph& g);

}  // namespace video2plan
