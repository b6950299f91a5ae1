#pragma once

#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "video2plan/grammar.hpp"

namespace video2plan {

// ---------------------------------------------------------------------------
// Merged timeline

struct TimelineEntry {
  FrameRange span;
  std::vector<int> segments;
  std::map<HandKey, ActionTree> trees;

  bool operator==(const TimelineEntry&) const = default;
};

using Timeline = std::vector<TimelineEntry>;

// One entry per segment, in segment order.
Timeline make_timeline(std::span<const TreeRecord> records);

// Leaf sequence of the tree with ingredient objects dropped; equal keys mean
// the same action, hands and associations.
std::string merge_key(const ActionTree& tree);

// Joins consecutive entries whose per-hand merge keys agree. Each hand keeps
// the tree that showed the most ingredient leaves (earliest on ties).
Timeline merge_segments(const Timeline& timeline);

// One hand's action across consecutive entries with equal merge keys, so a
// hand that keeps working while its partner changes activity is one run.
struct HandRun {
  HandKey hand;
  FrameRange span;
  ActionTree tree;  // most ingredient leaves, earliest on ties
  std::size_t first_entry = 0;
};

// Runs ordered by first entry, then hand.
std::vector<HandRun> hand_runs(const Timeline& merged);

// ---------------------------------------------------------------------------
// Primitives and library

enum class PrimitiveKind { Grasp, Engage, Actuate, Place };
std::string_view to_string(PrimitiveKind k);
PrimitiveKind parse_primitive_kind(std::string_view text);

// Fields may reference directive slots: $tool/$object (grasped object),
// $target (first target), $ingredient, $src, $dst, $partner, $action.
struct PrimitiveTemplate {
  PrimitiveKind kind = PrimitiveKind::Grasp;
  std::string object;
  std::string target;
  std::map<std::string, std::string> params;
  std::string tag;  // names a node for synchronisation; tagged nodes are never elided

  bool operator==(const PrimitiveTemplate&) const = default;
};

struct PrimitiveLibrary {
  // Keys: action names, plus handover:giver, handover:receiver, holding:holder.
  std::map<std::string, std::vector<PrimitiveTemplate>> templates;

  const std::vector<PrimitiveTemplate>& lookup(const std::string& key) const;  // throws PlanError
  static PrimitiveLibrary defaults();
  bool operator==(const PrimitiveLibrary&) const = default;
};

PrimitiveLibrary parse_library(std::istream& in);
PrimitiveLibrary load_library(const std::filesystem::path& path);
void write_library(const PrimitiveLibrary& lib, std::ostream& out);
void save_library(const PrimitiveLibrary& lib, const std::filesystem::path& path);

std::string template_key(const ActionDirective& d);

struct MotionPrimitive {
  int id = -1;
  std::string agent;
  PrimitiveKind kind = PrimitiveKind::Grasp;
  std::string object;
  std::string target;
  std::map<std::string, std::string> params;

  std::string tag() const;
  bool operator==(const MotionPrimitive&) const = default;
};

// Template instantiation; ids are left at -1.
std::vector<MotionPrimitive> decompose(const ActionDirective& d, const PrimitiveLibrary& lib);

// ---------------------------------------------------------------------------
// Action graph

using Edge = std::pair<int, int>;

struct ActionGraph {
  std::vector<std::string> agents;
  std::vector<MotionPrimitive> nodes;  // nodes[i].id == i
  std::vector<Edge> edges;             // lane order
  std::vector<Edge> sync_edges;        // cross-agent
  std::map<std::string, std::vector<int>> lanes;

  const MotionPrimitive& node(int id) const { return nodes.at(static_cast<std::size_t>(id)); }
  std::vector<Edge> all_edges() const;
  bool operator==(const ActionGraph&) const = default;
};

struct BuildOptions {
  bool elide_transitions = true;
};

ActionGraph build_graph(const Timeline& merged, const PrimitiveLibrary& lib, const BuildOptions& options = {});

// Kahn order; throws PlanError naming the nodes left on a cycle.
std::vector<int> topological_order(const ActionGraph& g);

// Structural checks: ids, edge endpoints, lanes, sync edges crossing agents,
// acyclicity. Throws PlanError.
void validate_graph(const ActionGraph& g);

void write_plan(const ActionGraph& g, std::ostream& out);
ActionGraph parse_plan(std::istream& in);
void save_plan(const ActionGraph& g, const std::filesystem::path& path);
ActionGraph load_plan(const std::filesystem::path& path);

std::string plan_to_dot(const ActionGraph& g);

}  // namespace video2plan
