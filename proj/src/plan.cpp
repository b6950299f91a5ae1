#include "video2plan/plan.hpp"

#include <fstream>
#include <functional>
#include <queue>
#include <set>
#include <sstream>

#include <json.hpp>

namespace video2plan {

using nlohmann::json;
using nlohmann::ordered_json;

// ---------------------------------------------------------------------------
// Timeline

Timeline make_timeline(std::span<const TreeRecord> records) {
  Timeline out;
  std::optional<int> current;
  for (const auto& r : records) {
    if (!current || *current != r.segment) {
      out.push_back({r.span, {r.segment}, {}});
      current = r.segment;
    }
    if (r.tree && r.hand) {
      if (!out.back().trees.emplace(*r.hand, *r.tree).second) {
        throw InputError("segment " + std::to_string(r.segment) + " has two trees for " + r.hand->str());
      }
    }
  }
  return out;
}

std::string merge_key(const ActionTree& tree) {
  std::string key;
  for (const auto& t : leaves(tree)) {
    if (t.kind == Symbol::O && t.cls == ObjectClass::Ingredient) continue;
    if (!key.empty()) key += ' ';
    key += std::string(to_string(t.kind)) + ":" + t.word;
  }
  return key;
}

namespace {

std::map<HandKey, std::string> entry_key(const TimelineEntry& e) {
  std::map<HandKey, std::string> key;
  for (const auto& [hand, tree] : e.trees) key[hand] = merge_key(tree);
  return key;
}

std::size_t ingredient_leaves(const ActionTree& tree) {
  std::size_t n = 0;
  for (const auto& t : leaves(tree)) n += t.kind == Symbol::O && t.cls == ObjectClass::Ingredient;
  return n;
}

}  // namespace

Timeline merge_segments(const Timeline& timeline) {
  Timeline out;
  std::map<HandKey, std::string> last_key;
  for (const auto& e : timeline) {
    auto key = entry_key(e);
    if (!out.empty() && key == last_key) {
      auto& m = out.back();
      m.span.begin = std::min(m.span.begin, e.span.begin);
      m.span.end = std::max(m.span.end, e.span.end);
      m.segments.insert(m.segments.end(), e.segments.begin(), e.segments.end());
      for (const auto& [hand, tree] : e.trees) {
        auto& kept = m.trees.at(hand);
        if (ingredient_leaves(tree) > ingredient_leaves(kept)) kept = tree;
      }
      continue;
    }
    out.push_back(e);
    last_key = std::move(key);
  }
  return out;
}

std::vector<HandRun> hand_runs(const Timeline& merged) {
  std::vector<HandRun> runs;
  std::map<HandKey, std::pair<std::size_t, std::string>> open;  // hand -> run index, key
  for (std::size_t i = 0; i < merged.size(); ++i) {
    const auto& e = merged[i];
    std::map<HandKey, std::pair<std::size_t, std::string>> next;
    for (const auto& [hand, tree] : e.trees) {
      auto key = merge_key(tree);
      auto it = open.find(hand);
      if (it != open.end() && it->second.second == key && runs[it->second.first].span.end == e.span.begin) {
        auto& r = runs[it->second.first];
        r.span.end = e.span.end;
        if (ingredient_leaves(tree) > ingredient_leaves(r.tree)) r.tree = tree;
        next[hand] = it->second;
        continue;
      }
      next[hand] = {runs.size(), std::move(key)};
      runs.push_back({hand, e.span, tree, i});
    }
    open = std::move(next);
  }
  return runs;
}

// ---------------------------------------------------------------------------
// Library

std::string_view to_string(PrimitiveKind k) {
  switch (k) {
    case PrimitiveKind::Grasp: return "grasp";
    case PrimitiveKind::Engage: return "engage";
    case PrimitiveKind::Actuate: return "actuate";
    case PrimitiveKind::Place: return "place";
  }
  return "grasp";
}

PrimitiveKind parse_primitive_kind(std::string_view text) {
  for (auto k : {PrimitiveKind::Grasp, PrimitiveKind::Engage, PrimitiveKind::Actuate, PrimitiveKind::Place}) {
    if (to_string(k) == text) return k;
  }
  throw InputError("unknown primitive kind '" + std::string(text) + "'");
}

const std::vector<PrimitiveTemplate>& PrimitiveLibrary::lookup(const std::string& key) const {
  auto it = templates.find(key);
  if (it != templates.end()) return it->second;
  std::string known;
  for (const auto& [k, v] : templates) known += (known.empty() ? "" : ", ") + k;
  throw PlanError("no primitive template for action '" + key + "'; library has: " + known);
}

PrimitiveLibrary PrimitiveLibrary::defaults() {
  using K = PrimitiveKind;
  PrimitiveLibrary lib;
  for (ActionLabel a : individual_actions()) {
    lib.templates[std::string(to_string(a))] = {
        {K::Grasp, "$tool", "", {}, ""},
        {K::Engage, "$tool", "$target", {}, ""},
        {K::Actuate, "$tool", "$target", {{"motion", "$action"}}, ""},
        {K::Place, "$tool", "", {}, ""},
    };
  }
  lib.templates["transfer"] = {
      {K::Grasp, "$tool", "", {}, ""},
      {K::Engage, "$tool", "$src", {}, ""},
      {K::Actuate, "$tool", "$ingredient", {{"motion", "scoop"}}, ""},
      {K::Engage, "$tool", "$dst", {}, ""},
      {K::Actuate, "$tool", "$dst", {{"motion", "dump"}}, ""},
      {K::Place, "$tool", "", {}, ""},
  };
  lib.templates["handover:giver"] = {
      {K::Grasp, "$object", "", {}, ""},
      {K::Engage, "$object", "$partner", {}, "meet"},
      {K::Actuate, "$object", "$partner", {{"motion", "release"}}, "release"},
  };
  lib.templates["handover:receiver"] = {
      {K::Engage, "$object", "$partner", {}, "meet"},
      {K::Actuate, "$object", "$partner", {{"motion", "grasp"}}, "take"},
      {K::Place, "$object", "", {}, ""},
  };
  lib.templates["holding:holder"] = {
      {K::Grasp, "$object", "", {}, "grasp"},
      {K::Actuate, "$object", "", {{"motion", "hold"}}, "hold"},
      {K::Place, "$object", "", {}, "close"},
  };
  return lib;
}

PrimitiveLibrary parse_library(std::istream& in) {
  PrimitiveLibrary lib;
  try {
    const json j = json::parse(in);
    for (const auto& [key, list] : j.at("templates").items()) {
      auto& seq = lib.templates[key];
      for (const auto& p : list) {
        PrimitiveTemplate t;
        t.kind = parse_primitive_kind(p.at("kind").get<std::string>());
        t.object = p.value("object", std::string());
        t.target = p.value("target", std::string());
        t.tag = p.value("tag", std::string());
        if (p.contains("params")) {
          for (const auto& [k, v] : p.at("params").items()) t.params[k] = v.get<std::string>();
        }
        seq.push_back(std::move(t));
      }
      if (seq.empty()) throw InputError("template '" + key + "' is empty");
    }
  } catch (const json::exception& e) {
    throw InputError(std::string("malformed primitive library: ") + e.what());
  }
  return lib;
}

PrimitiveLibrary load_library(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open primitive library " + path.string());
  return parse_library(in);
}

void write_library(const PrimitiveLibrary& lib, std::ostream& out) {
  ordered_json j;
  j["templates"] = ordered_json::object();
  for (const auto& [key, seq] : lib.templates) {
    ordered_json list = ordered_json::array();
    for (const auto& t : seq) {
      ordered_json p;
      p["kind"] = std::string(to_string(t.kind));
      if (!t.object.empty()) p["object"] = t.object;
      if (!t.target.empty()) p["target"] = t.target;
      if (!t.params.empty()) p["params"] = t.params;
      if (!t.tag.empty()) p["tag"] = t.tag;
      list.push_back(std::move(p));
    }
    j["templates"][key] = std::move(list);
  }
  out << j.dump(2) << '\n';
}

void save_library(const PrimitiveLibrary& lib, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  write_library(lib, out);
}

std::string template_key(const ActionDirective& d) {
  if (!d.action) throw PlanError("a bare grasp has no primitive template");
  const std::string name(to_string(*d.action));
  switch (d.role) {
    case CollaborationRole::Giver: return name + ":giver";
    case CollaborationRole::Receiver: return name + ":receiver";
    case CollaborationRole::Holder: return name + ":holder";
    default: return name;
  }
}

std::string MotionPrimitive::tag() const {
  auto it = params.find("tag");
  return it == params.end() ? std::string() : it->second;
}

std::vector<MotionPrimitive> decompose(const ActionDirective& d, const PrimitiveLibrary& lib) {
  const std::string key = template_key(d);
  const auto& seq = lib.lookup(key);
  auto bound = [](const Terminal& t) { return t.id.empty() ? t.word : t.id; };

  std::map<std::string, std::string> slots;
  slots["$tool"] = slots["$object"] = bound(d.object);
  slots["$action"] = std::string(to_string(*d.action));
  if (!d.targets.empty()) slots["$target"] = bound(d.targets.front());
  if (d.action == ActionLabel::Transfer && d.targets.size() == 3) {
    slots["$ingredient"] = bound(d.targets[0]);
    slots["$src"] = bound(d.targets[1]);
    slots["$dst"] = bound(d.targets[2]);
  }
  if (d.partner) slots["$partner"] = d.partner->str();

  auto fill = [&](const std::string& v) -> std::string {
    if (v.empty() || v[0] != '$') return v;
    auto it = slots.find(v);
    if (it == slots.end()) throw PlanError("template '" + key + "' uses " + v + " which the directive does not provide");
    return it->second;
  };

  std::vector<MotionPrimitive> out;
  for (const auto& t : seq) {
    MotionPrimitive p;
    p.agent = d.agent();
    p.kind = t.kind;
    p.object = fill(t.object);
    p.target = fill(t.target);
    for (const auto& [k, v] : t.params) p.params[k] = fill(v);
    p.params["action"] = slots["$action"];
    p.params["hand"] = d.hand.str();
    if (d.role != CollaborationRole::None) p.params["role"] = std::string(to_string(d.role));
    if (!t.tag.empty()) p.params["tag"] = t.tag;
    if ((p.kind == PrimitiveKind::Grasp || p.kind == PrimitiveKind::Place) && p.object.empty()) {
      throw PlanError("template '" + key + "': " + std::string(to_string(p.kind)) + " needs an object");
    }
    if (p.kind == PrimitiveKind::Engage && p.target.empty()) {
      throw PlanError("template '" + key + "': engage needs a target");
    }
    out.push_back(std::move(p));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Graph construction

std::vector<Edge> ActionGraph::all_edges() const {
  std::vector<Edge> out = edges;
  out.insert(out.end(), sync_edges.begin(), sync_edges.end());
  return out;
}

namespace {

struct Step {
  ActionDirective directive;
  std::vector<MotionPrimitive> prims;
  std::vector<bool> removed;
  std::vector<int> ids;
};

int tagged(const Step& s, const std::string& tag) {
  for (std::size_t i = 0; i < s.prims.size(); ++i) {
    if (!s.removed[i] && s.prims[i].tag() == tag) return s.ids[i];
  }
  throw PlanError("template '" + template_key(s.directive) + "' has no node tagged '" + tag + "'");
}

int first_of(const Step& s, PrimitiveKind kind, bool last) {
  int found = -1;
  for (std::size_t i = 0; i < s.prims.size(); ++i) {
    if (s.removed[i] || s.prims[i].kind != kind) continue;
    found = s.ids[i];
    if (!last) break;
  }
  if (found < 0) {
    throw PlanError("template '" + template_key(s.directive) + "' has no " + std::string(to_string(kind)) + " node");
  }
  return found;
}

}  // namespace

ActionGraph build_graph(const Timeline& merged, const PrimitiveLibrary& lib, const BuildOptions& options) {
  std::vector<Step> steps;
  int next_event = 0;
  for (const auto& run : hand_runs(merged)) {
    std::map<int, int> events;
    for (auto d : tree_to_directives(run.tree)) {
      if (!d.action) continue;  // bare grasps carry no executable action
      if (d.event >= 0) {
        auto [it, inserted] = events.emplace(d.event, next_event);
        if (inserted) ++next_event;
        d.event = it->second;
      }
      Step s;
      s.prims = decompose(d, lib);
      s.removed.assign(s.prims.size(), false);
      s.ids.assign(s.prims.size(), -1);
      s.directive = std::move(d);
      steps.push_back(std::move(s));
    }
  }

  // Transitioning: drop place(X) immediately followed by grasp(X) in a lane.
  std::map<std::string, std::vector<std::pair<std::size_t, std::size_t>>> lane_refs;
  for (std::size_t si = 0; si < steps.size(); ++si) {
    for (std::size_t pi = 0; pi < steps[si].prims.size(); ++pi) lane_refs[steps[si].directive.agent()].push_back({si, pi});
  }
  if (options.elide_transitions) {
    for (auto& [agent, refs] : lane_refs) {
      for (std::size_t k = 0; k + 1 < refs.size(); ++k) {
        auto& a = steps[refs[k].first].prims[refs[k].second];
        auto& b = steps[refs[k + 1].first].prims[refs[k + 1].second];
        if (a.kind == PrimitiveKind::Place && b.kind == PrimitiveKind::Grasp && a.object == b.object &&
            a.tag().empty() && b.tag().empty()) {
          steps[refs[k].first].removed[refs[k].second] = true;
          steps[refs[k + 1].first].removed[refs[k + 1].second] = true;
          ++k;
        }
      }
    }
  }

  ActionGraph g;
  std::set<std::string> agents;
  for (auto& s : steps) {
    agents.insert(s.directive.agent());
    for (std::size_t pi = 0; pi < s.prims.size(); ++pi) {
      if (s.removed[pi]) continue;
      s.ids[pi] = static_cast<int>(g.nodes.size());
      s.prims[pi].id = s.ids[pi];
      g.nodes.push_back(s.prims[pi]);
    }
  }
  g.agents.assign(agents.begin(), agents.end());
  for (const auto& [agent, refs] : lane_refs) {
    auto& lane = g.lanes[agent];
    for (const auto& [si, pi] : refs) {
      if (!steps[si].removed[pi]) lane.push_back(steps[si].ids[pi]);
    }
    for (std::size_t k = 1; k < lane.size(); ++k) g.edges.push_back({lane[k - 1], lane[k]});
  }

  std::map<int, std::vector<const Step*>> by_event;
  for (const auto& s : steps) {
    if (s.directive.event >= 0) by_event[s.directive.event].push_back(&s);
  }
  for (const auto& [event, members] : by_event) {
    if (members.size() != 2) throw PlanError("collaborative event " + std::to_string(event) + " needs two roles");
    const Step& a = *members[0];
    const Step& b = *members[1];
    const auto ra = a.directive.role;
    const auto rb = b.directive.role;
    if (ra == CollaborationRole::Giver && rb == CollaborationRole::Receiver) {
      g.sync_edges.push_back({tagged(b, "meet"), tagged(a, "release")});
      g.sync_edges.push_back({tagged(a, "meet"), tagged(b, "take")});
    } else if (ra == CollaborationRole::Actor && rb == CollaborationRole::Holder) {
      g.sync_edges.push_back({tagged(b, "hold"), first_of(a, PrimitiveKind::Engage, false)});
      g.sync_edges.push_back({first_of(a, PrimitiveKind::Actuate, true), tagged(b, "close")});
    } else if (ra == CollaborationRole::Holder && rb == CollaborationRole::Holder) {
      g.sync_edges.push_back({tagged(a, "grasp"), tagged(b, "hold")});
      g.sync_edges.push_back({tagged(b, "grasp"), tagged(a, "hold")});
      g.sync_edges.push_back({tagged(a, "hold"), tagged(b, "close")});
      g.sync_edges.push_back({tagged(b, "hold"), tagged(a, "close")});
    } else {
      throw PlanError("collaborative event " + std::to_string(event) + " has an unexpected role pairing");
    }
  }

  validate_graph(g);
  return g;
}

std::vector<int> topological_order(const ActionGraph& g) {
  const std::size_t n = g.nodes.size();
  std::vector<std::vector<int>> succ(n);
  std::vector<int> indegree(n, 0);
  for (const auto& [u, v] : g.all_edges()) {
    succ[static_cast<std::size_t>(u)].push_back(v);
    ++indegree[static_cast<std::size_t>(v)];
  }
  std::priority_queue<int, std::vector<int>, std::greater<>> ready;
  for (std::size_t i = 0; i < n; ++i) {
    if (indegree[i] == 0) ready.push(static_cast<int>(i));
  }
  std::vector<int> order;
  while (!ready.empty()) {
    const int u = ready.top();
    ready.pop();
    order.push_back(u);
    for (int v : succ[static_cast<std::size_t>(u)]) {
      if (--indegree[static_cast<std::size_t>(v)] == 0) ready.push(v);
    }
  }
  if (order.size() != n) {
    std::string stuck;
    for (std::size_t i = 0; i < n; ++i) {
      if (indegree[i] > 0) stuck += (stuck.empty() ? "" : ", ") + std::to_string(i);
    }
    throw PlanError("cycle detected; nodes not orderable: " + stuck);
  }
  return order;
}

void validate_graph(const ActionGraph& g) {
  const auto n = static_cast<int>(g.nodes.size());
  const std::set<std::string> agents(g.agents.begin(), g.agents.end());
  for (int i = 0; i < n; ++i) {
    const auto& node = g.nodes[static_cast<std::size_t>(i)];
    if (node.id != i) throw PlanError("node ids must be 0..n-1 in order");
    if (!agents.count(node.agent)) throw PlanError("node " + std::to_string(i) + " has unknown agent");
  }
  std::vector<int> seen(static_cast<std::size_t>(n), 0);
  for (const auto& [agent, lane] : g.lanes) {
    if (!agents.count(agent)) throw PlanError("lane for unknown agent '" + agent + "'");
    for (int id : lane) {
      if (id < 0 || id >= n) throw PlanError("lane references missing node " + std::to_string(id));
      if (g.node(id).agent != agent) throw PlanError("node " + std::to_string(id) + " is in another agent's lane");
      ++seen[static_cast<std::size_t>(id)];
    }
  }
  for (int i = 0; i < n; ++i) {
    if (seen[static_cast<std::size_t>(i)] != 1) throw PlanError("node " + std::to_string(i) + " must be in one lane");
  }
  auto check = [&](const Edge& e, bool sync) {
    const auto [u, v] = e;
    if (u < 0 || u >= n || v < 0 || v >= n) throw PlanError("edge references a missing node");
    const bool same = g.node(u).agent == g.node(v).agent;
    if (sync && same) {
      throw PlanError("sync edge " + std::to_string(u) + "->" + std::to_string(v) + " does not cross agents");
    }
    if (!sync && !same) {
      throw PlanError("lane edge " + std::to_string(u) + "->" + std::to_string(v) + " crosses agents");
    }
  };
  for (const auto& e : g.edges) check(e, false);
  for (const auto& e : g.sync_edges) check(e, true);
  topological_order(g);
}

// ---------------------------------------------------------------------------
// Serialization

void write_plan(const ActionGraph& g, std::ostream& out) {
  ordered_json j;
  j["agents"] = g.agents;
  j["nodes"] = ordered_json::array();
  for (const auto& p : g.nodes) {
    ordered_json n;
    n["id"] = p.id;
    n["agent"] = p.agent;
    n["kind"] = std::string(to_string(p.kind));
    n["object"] = p.object;
    n["target"] = p.target;
    n["params"] = p.params;
    j["nodes"].push_back(std::move(n));
  }
  auto edges = [](const std::vector<Edge>& list) {
    ordered_json a = ordered_json::array();
    for (const auto& [u, v] : list) a.push_back({u, v});
    return a;
  };
  j["edges"] = edges(g.edges);
  j["sync_edges"] = edges(g.sync_edges);
  j["lanes"] = ordered_json::object();
  for (const auto& [agent, lane] : g.lanes) j["lanes"][agent] = lane;
  out << j.dump(2) << '\n';
}

ActionGraph parse_plan(std::istream& in) {
  ActionGraph g;
  try {
    const json j = json::parse(in);
    g.agents = j.at("agents").get<std::vector<std::string>>();
    for (const auto& n : j.at("nodes")) {
      MotionPrimitive p;
      p.id = n.at("id").get<int>();
      p.agent = n.at("agent").get<std::string>();
      p.kind = parse_primitive_kind(n.at("kind").get<std::string>());
      p.object = n.value("object", std::string());
      p.target = n.value("target", std::string());
      if (n.contains("params")) p.params = n.at("params").get<std::map<std::string, std::string>>();
      g.nodes.push_back(std::move(p));
    }
    for (const auto& e : j.at("edges")) g.edges.push_back({e.at(0).get<int>(), e.at(1).get<int>()});
    for (const auto& e : j.at("sync_edges")) g.sync_edges.push_back({e.at(0).get<int>(), e.at(1).get<int>()});
    if (j.contains("lanes")) {
      g.lanes = j.at("lanes").get<std::map<std::string, std::vector<int>>>();
    } else {
      for (const auto& p : g.nodes) g.lanes[p.agent].push_back(p.id);
    }
  } catch (const json::exception& e) {
    throw InputError(std::string("malformed plan document: ") + e.what());
  }
  validate_graph(g);
  return g;
}

void save_plan(const ActionGraph& g, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  write_plan(g, out);
}

ActionGraph load_plan(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open plan " + path.string());
  return parse_plan(in);
}

std::string plan_to_dot(const ActionGraph& g) {
  std::ostringstream out;
  out << "digraph plan {\n  rankdir=LR;\n  node [shape=box, fontname=\"Helvetica\"];\n";
  for (const auto& [agent, lane] : g.lanes) {
    out << "  subgraph \"cluster_" << agent << "\" {\n    label=\"" << agent << "\";\n";
    for (int id : lane) {
      const auto& p = g.node(id);
      out << "    n" << id << " [label=\"" << id << ": " << to_string(p.kind) << "\\n" << p.object;
      if (!p.target.empty()) out << " -> " << p.target;
      out << "\"];\n";
    }
    out << "  }\n";
  }
  for (const auto& [u, v] : g.edges) out << "  n" << u << " -> n" << v << ";\n";
  for (const auto& [u, v] : g.sync_edges) {
    out << "  n" << u << " -> n" << v << " [style=dashed, color=red, constraint=false];\n";
  }
  out << "}\n";
  return out.str();
}

}  // namespace video2plan
