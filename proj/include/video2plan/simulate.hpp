#pragma once

#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "video2plan/plan.hpp"

namespace video2plan {

struct DurationModel {
  std::map<PrimitiveKind, double> defaults{
      {PrimitiveKind::Grasp, 2.0},
      {PrimitiveKind::Engage, 3.0},
      {PrimitiveKind::Actuate, 4.0},
      {PrimitiveKind::Place, 2.0},
  };
  std::map<int, double> per_node;

  double duration(const MotionPrimitive& p) const;
  void validate() const;  // throws InputError unless every duration is > 0
};

// {"defaults": {"grasp": 2, ...}, "nodes": {"3": 1.5}}; missing kinds keep
// their defaults.
DurationModel parse_durations(std::istream& in);
DurationModel load_durations(const std::filesystem::path& path);

enum class Phase { Start, End };

struct TraceEvent {
  double time = 0;
  std::string agent;
  int node = 0;
  Phase phase = Phase::Start;

  bool operator==(const TraceEvent&) const = default;
};

struct ExecutionTrace {
  std::vector<TraceEvent> events;
  double makespan = 0;

  bool operator==(const ExecutionTrace&) const = default;
};

// Every agent walks its lane; a node starts once all its predecessors have
// ended. Events are ordered by time, ends before starts, then agent and node.
// Throws PlanError naming the blocked nodes when no node can start.
ExecutionTrace run(const ActionGraph& graph, const DurationModel& durations = {});

// Length of the duration-weighted longest path.
double critical_path(const ActionGraph& graph, const DurationModel& durations = {});

// One message per violated edge or malformed node record; empty when the
// trace honours the graph.
std::vector<std::string> check_trace(const ExecutionTrace& trace, const ActionGraph& graph);

void write_trace(const ExecutionTrace& trace, std::ostream& out);
ExecutionTrace parse_trace(std::istream& in);
void save_trace(const ExecutionTrace& trace, const std::filesystem::path& path);
ExecutionTrace load_trace(const std::filesystem::path& path);

}  // namespace video2plan
