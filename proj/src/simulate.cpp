#include "video2plan/simulate.hpp"

#include <fstream>
#include <iomanip>
#include <queue>
#include <set>
#include <sstream>
#include <tuple>

#include <json.hpp>

namespace video2plan {

double DurationModel::duration(const MotionPrimitive& p) const {
  if (auto it = per_node.find(p.id); it != per_node.end()) return it->second;
  if (auto it = defaults.find(p.kind); it != defaults.end()) return it->second;
  throw InputError("no duration for primitive kind '" + std::string(to_string(p.kind)) + "'");
}

void DurationModel::validate() const {
  for (const auto& [k, d] : defaults) {
    if (!(d > 0)) throw InputError("duration of " + std::string(to_string(k)) + " must be > 0");
  }
  for (const auto& [id, d] : per_node) {
    if (!(d > 0)) throw InputError("duration of node " + std::to_string(id) + " must be > 0");
  }
}

DurationModel parse_durations(std::istream& in) {
  DurationModel m;
  try {
    const auto j = nlohmann::json::parse(in);
    if (j.contains("defaults")) {
      for (const auto& [k, v] : j.at("defaults").items()) m.defaults[parse_primitive_kind(k)] = v.get<double>();
    }
    if (j.contains("nodes")) {
      for (const auto& [k, v] : j.at("nodes").items()) m.per_node[std::stoi(k)] = v.get<double>();
    }
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("malformed durations file: ") + e.what());
  } catch (const std::logic_error& e) {
    throw InputError(std::string("malformed durations file: ") + e.what());
  }
  m.validate();
  return m;
}

DurationModel load_durations(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open durations file " + path.string());
  return parse_durations(in);
}

namespace {

// Lane and sync edges plus consecutive lane pairs, deduplicated.
std::vector<Edge> constraints(const ActionGraph& g) {
  std::set<Edge> seen;
  std::vector<Edge> out;
  auto add = [&](const Edge& e) {
    if (seen.insert(e).second) out.push_back(e);
  };
  for (const auto& e : g.all_edges()) add(e);
  for (const auto& [agent, lane] : g.lanes) {
    for (std::size_t k = 1; k < lane.size(); ++k) add({lane[k - 1], lane[k]});
  }
  return out;
}

}  // namespace

ExecutionTrace run(const ActionGraph& graph, const DurationModel& durations) {
  durations.validate();
  const std::size_t n = graph.nodes.size();
  std::vector<std::vector<int>> succ(n);
  std::vector<int> waiting(n, 0);
  for (const auto& [u, v] : constraints(graph)) {
    succ[static_cast<std::size_t>(u)].push_back(v);
    ++waiting[static_cast<std::size_t>(v)];
  }

  struct AgentState {
    const std::vector<int>* lane = nullptr;
    std::size_t next = 0;
    bool busy = false;
  };
  std::map<std::string, AgentState> agents;
  for (const auto& [agent, lane] : graph.lanes) agents[agent].lane = &lane;

  using Pending = std::tuple<double, std::string, int>;  // end time, agent, node
  std::priority_queue<Pending, std::vector<Pending>, std::greater<>> ends;

  ExecutionTrace trace;
  std::size_t finished = 0;
  double now = 0;
  while (true) {
    for (auto& [agent, st] : agents) {
      if (st.busy || st.next >= st.lane->size()) continue;
      const int id = (*st.lane)[st.next];
      if (waiting[static_cast<std::size_t>(id)] > 0) continue;
      st.busy = true;
      ++st.next;
      trace.events.push_back({now, agent, id, Phase::Start});
      ends.emplace(now + durations.duration(graph.node(id)), agent, id);
    }
    if (ends.empty()) break;
    now = std::get<0>(ends.top());
    while (!ends.empty() && std::get<0>(ends.top()) == now) {
      const auto [t, agent, id] = ends.top();
      ends.pop();
      trace.events.push_back({t, agent, id, Phase::End});
      agents[agent].busy = false;
      ++finished;
      for (int v : succ[static_cast<std::size_t>(id)]) --waiting[static_cast<std::size_t>(v)];
    }
  }

  if (finished != n) {
    std::string blocked;
    for (const auto& [agent, st] : agents) {
      if (st.next < st.lane->size()) {
        blocked += (blocked.empty() ? "" : ", ") + agent + ":" + std::to_string((*st.lane)[st.next]);
      }
    }
    throw PlanError("deadlock; blocked nodes " + blocked);
  }

  std::stable_sort(trace.events.begin(), trace.events.end(), [](const TraceEvent& a, const TraceEvent& b) {
    const int pa = a.phase == Phase::End ? 0 : 1;
    const int pb = b.phase == Phase::End ? 0 : 1;
    return std::tie(a.time, pa, a.agent, a.node) < std::tie(b.time, pb, b.agent, b.node);
  });
  for (const auto& e : trace.events) trace.makespan = std::max(trace.makespan, e.time);
  return trace;
}

double critical_path(const ActionGraph& graph, const DurationModel& durations) {
  ActionGraph g = graph;
  g.edges = constraints(graph);
  g.sync_edges.clear();
  std::vector<std::vector<int>> pred(g.nodes.size());
  for (const auto& [u, v] : g.edges) pred[static_cast<std::size_t>(v)].push_back(u);
  std::vector<double> finish(g.nodes.size(), 0);
  double best = 0;
  for (int v : topological_order(g)) {
    double start = 0;
    for (int u : pred[static_cast<std::size_t>(v)]) start = std::max(start, finish[static_cast<std::size_t>(u)]);
    finish[static_cast<std::size_t>(v)] = start + durations.duration(g.node(v));
    best = std::max(best, finish[static_cast<std::size_t>(v)]);
  }
  return best;
}

std::vector<std::string> check_trace(const ExecutionTrace& trace, const ActionGraph& graph) {
  std::vector<std::string> out;
  const std::size_t n = graph.nodes.size();
  std::vector<std::optional<double>> start(n), end(n);
  for (const auto& e : trace.events) {
    if (e.node < 0 || static_cast<std::size_t>(e.node) >= n) {
      out.push_back("event for unknown node " + std::to_string(e.node));
      continue;
    }
    auto& slot = e.phase == Phase::Start ? start[static_cast<std::size_t>(e.node)] : end[static_cast<std::size_t>(e.node)];
    if (slot) out.push_back("node " + std::to_string(e.node) + " has a repeated event");
    slot = e.time;
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (!start[i] || !end[i]) {
      out.push_back("node " + std::to_string(i) + " lacks a start or end event");
    } else if (*start[i] > *end[i]) {
      out.push_back("node " + std::to_string(i) + " ends before it starts");
    }
  }
  const std::set<Edge> sync(graph.sync_edges.begin(), graph.sync_edges.end());
  for (const auto& [u, v] : constraints(graph)) {
    const auto& eu = end[static_cast<std::size_t>(u)];
    const auto& sv = start[static_cast<std::size_t>(v)];
    if (!eu || !sv || *eu <= *sv) continue;
    std::ostringstream msg;
    msg << (sync.count({u, v}) ? "sync edge " : "edge ") << u << "->" << v << " violated: end(" << u << ")=" << *eu
        << " > start(" << v << ")=" << *sv;
    out.push_back(msg.str());
  }
  return out;
}

void write_trace(const ExecutionTrace& trace, std::ostream& out) {
  out << "time,agent,node,phase\n";
  std::ostringstream line;
  for (const auto& e : trace.events) {
    line.str("");
    line << std::setprecision(15) << e.time << ',' << e.agent << ',' << e.node << ','
         << (e.phase == Phase::Start ? "start" : "end") << '\n';
    out << line.str();
  }
}

ExecutionTrace parse_trace(std::istream& in) {
  ExecutionTrace trace;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || (line_no == 1 && line.rfind("time,", 0) == 0)) continue;
    std::istringstream cols(line);
    std::string time, agent, node, phase;
    if (!std::getline(cols, time, ',') || !std::getline(cols, agent, ',') || !std::getline(cols, node, ',') ||
        !std::getline(cols, phase)) {
      throw InputError("malformed trace row at line " + std::to_string(line_no), line_no);
    }
    if (phase != "start" && phase != "end") {
      throw InputError("unknown phase '" + phase + "' at line " + std::to_string(line_no), line_no);
    }
    try {
      trace.events.push_back({std::stod(time), agent, std::stoi(node), phase == "start" ? Phase::Start : Phase::End});
    } catch (const std::logic_error&) {
      throw InputError("malformed trace row at line " + std::to_string(line_no), line_no);
    }
    trace.makespan = std::max(trace.makespan, trace.events.back().time);
  }
  return trace;
}

void save_trace(const ExecutionTrace& trace, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  write_trace(trace, out);
}

ExecutionTrace load_trace(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open trace " + path.string());
  return parse_trace(in);
}

}  // namespace video2plan
