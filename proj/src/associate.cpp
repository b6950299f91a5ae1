#include "video2plan/associate.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

#include <json.hpp>

namespace video2plan {

using nlohmann::json;
using nlohmann::ordered_json;

int AssociationConfig::persistence_frames(double fps) const {
  if (persistence) return *persistence;
  return static_cast<int>(std::ceil(fps / 2.0));
}

Frame HandObjectLink::support_frames() const {
  Frame n = 0;
  for (const auto& r : support) n += r.length();
  return n;
}

const HandObjectLink* AssociationRecord::link_for(const HandKey& hand) const {
  for (const auto& l : hand_links) {
    if (l.hand == hand) return &l;
  }
  return nullptr;
}

std::optional<std::string> AssociationRecord::target_of(const std::string& source) const {
  for (const auto& l : object_links) {
    if (l.kind == LinkKind::ToolOnTarget && l.source == source) return l.target;
  }
  return std::nullopt;
}

std::vector<std::string> AssociationRecord::contents_of(const std::string& container) const {
  std::vector<std::string> out;
  for (const auto& l : object_links) {
    if (l.kind == LinkKind::ContainerHolds && l.source == container) out.push_back(l.target);
  }
  return out;
}

std::optional<std::string> AssociationRecord::container_of(const std::string& ingredient) const {
  for (const auto& l : object_links) {
    if (l.kind == LinkKind::ContainerHolds && l.target == ingredient) return l.source;
  }
  return std::nullopt;
}

namespace {

// Length of [a0, a0 + al) ∩ [b0, b0 + bl); a contained interval keeps its own
// length so that identical boxes overlap exactly.
double overlap_1d(double a0, double al, double b0, double bl) {
  if (a0 >= b0 && a0 + al <= b0 + bl) return al;
  if (b0 >= a0 && b0 + bl <= a0 + al) return bl;
  return std::min(a0 + al, b0 + bl) - std::max(a0, b0);
}

}  // namespace

double intersection_area(const BoundingBox& a, const BoundingBox& b) {
  const double w = overlap_1d(a.x, a.w, b.x, b.w);
  const double h = overlap_1d(a.y, a.h, b.y, b.h);
  return w > 0 && h > 0 ? w * h : 0.0;
}

double jaccard(const BoundingBox& a, const BoundingBox& b) {
  const double inter = intersection_area(a, b);
  const double uni = a.area() + b.area() - inter;
  return uni > 0 ? inter / uni : 0.0;
}

double center_distance(const BoundingBox& a, const BoundingBox& b) {
  return std::hypot(a.center_x() - b.center_x(), a.center_y() - b.center_y());
}

std::optional<std::string> associate_hand(const FrameDetections& frame, const HandDetection& hand,
                                          const Lexicon& lexicon, const AssociationConfig& cfg,
                                          std::optional<ImageSize> image) {
  const BoundingBox hb = hand_box(hand, cfg.hand_margin, image);
  const ObjectDetection* best = nullptr;
  double best_area = 0;
  for (const auto& o : frame.objects) {
    const auto cls = lexicon.find(o.label);
    if (!cls || *cls == ObjectClass::Ingredient) continue;
    const double area = intersection_area(hb, o.box);
    if (area <= 0) continue;
    if (!best || area > best_area || (area == best_area && o.id < best->id)) {
      best = &o;
      best_area = area;
    }
  }
  if (best) return best->id;

  const double cap = cfg.ingredient_cap_factor * hb.diagonal();
  double best_dist = std::numeric_limits<double>::infinity();
  for (const auto& o : frame.objects) {
    if (lexicon.find(o.label) != ObjectClass::Ingredient) continue;
    const double d = center_distance(hb, o.box);
    if (d > cap) continue;
    if (!best || d < best_dist || (d == best_dist && o.id < best->id)) {
      best = &o;
      best_dist = d;
    }
  }
  if (best) return best->id;
  return std::nullopt;
}

namespace {

const ObjectDetection* nearest_overlapping(const FrameDetections& frame, const ObjectDetection& from,
                                           const Lexicon& lexicon, ObjectClass cls) {
  const ObjectDetection* best = nullptr;
  double best_dist = std::numeric_limits<double>::infinity();
  for (const auto& o : frame.objects) {
    if (o.id == from.id || lexicon.find(o.label) != cls) continue;
    if (intersection_area(from.box, o.box) <= 0) continue;
    const double d = center_distance(from.box, o.box);
    if (!best || d < best_dist || (d == best_dist && o.id < best->id)) {
      best = &o;
      best_dist = d;
    }
  }
  return best;
}

}  // namespace

std::optional<ObjectObjectLink> associate_objects(const FrameDetections& frame, const std::string& grasped,
                                                  const Lexicon& lexicon) {
  const ObjectDetection* g = frame.find_object(grasped);
  if (!g) return std::nullopt;
  const auto cls = lexicon.find(g->label);
  if (const auto* c = nearest_overlapping(frame, *g, lexicon, ObjectClass::Container)) {
    return ObjectObjectLink{g->id, c->id, LinkKind::ToolOnTarget, 0};
  }
  if (cls != ObjectClass::Ingredient) {
    if (const auto* i = nearest_overlapping(frame, *g, lexicon, ObjectClass::Ingredient)) {
      return ObjectObjectLink{g->id, i->id, LinkKind::ToolOnTarget, 0};
    }
  }
  return std::nullopt;
}

std::vector<ObjectObjectLink> container_contents(const FrameDetections& frame, const Lexicon& lexicon, double tau) {
  if (!(tau >= 0 && tau <= 1)) throw std::invalid_argument("container_contents: tau must lie in [0, 1]");
  std::vector<ObjectObjectLink> out;
  for (const auto& ing : frame.objects) {
    if (lexicon.find(ing.label) != ObjectClass::Ingredient) continue;
    const ObjectDetection* best = nullptr;
    double best_j = 0;
    for (const auto& c : frame.objects) {
      if (lexicon.find(c.label) != ObjectClass::Container) continue;
      const double j = jaccard(ing.box, c.box);
      if (!(j > tau)) continue;
      const bool better = !best || j > best_j ||
                          (j == best_j && (c.box.area() < best->box.area() ||
                                           (c.box.area() == best->box.area() && c.id < best->id)));
      if (better) {
        best = &c;
        best_j = j;
      }
    }
    if (best) out.push_back({best->id, ing.id, LinkKind::ContainerHolds, 0});
  }
  std::sort(out.begin(), out.end(),
            [](const auto& a, const auto& b) { return std::tie(a.source, a.target) < std::tie(b.source, b.target); });
  return out;
}

namespace {

// Runs of consecutive record indices at least `min_len` long.
std::vector<std::pair<std::size_t, std::size_t>> persistent_runs(const std::vector<std::size_t>& records,
                                                                  std::size_t min_len) {
  std::vector<std::pair<std::size_t, std::size_t>> runs;
  std::size_t i = 0;
  while (i < records.size()) {
    std::size_t j = i + 1;
    while (j < records.size() && records[j] == records[j - 1] + 1) ++j;
    if (j - i >= min_len) runs.emplace_back(records[i], records[j - 1] + 1);
    i = j;
  }
  return runs;
}

std::size_t run_total(const std::vector<std::pair<std::size_t, std::size_t>>& runs) {
  std::size_t n = 0;
  for (const auto& [a, b] : runs) n += b - a;
  return n;
}

struct Dominant {
  std::string id;
  std::vector<std::pair<std::size_t, std::size_t>> runs;
  std::size_t support = 0;
};

// Picks the candidate with the largest persistent support; ties go to the
// smaller id. `candidates` maps id -> ascending record indices.
std::optional<Dominant> dominant(const std::map<std::string, std::vector<std::size_t>>& candidates,
                                 std::size_t min_len) {
  std::optional<Dominant> best;
  for (const auto& [id, records] : candidates) {
    auto runs = persistent_runs(records, min_len);
    const std::size_t total = run_total(runs);
    if (total == 0) continue;
    if (!best || total > best->support) best = Dominant{id, std::move(runs), total};
  }
  return best;
}

}  // namespace

AssociationRecord summarize_segment(const DetectionStream& stream, const Segment& segment, int segment_id,
                                    const AssociationConfig& cfg) {
  AssociationRecord rec;
  rec.segment_id = segment_id;
  rec.span = segment.range();
  const auto min_len = static_cast<std::size_t>(std::max(1, cfg.persistence_frames(stream.fps)));

  std::vector<std::size_t> records;
  for (std::size_t i = 0; i < stream.frames.size(); ++i) {
    if (segment.range().contains(stream.frames[i].frame_index)) records.push_back(i);
  }

  auto note_object = [&](const FrameDetections& f, const std::string& id) {
    if (rec.objects.count(id)) return;
    if (const auto* o = f.find_object(id)) rec.objects[id] = {o->id, o->label, stream.lexicon.class_of(o->label)};
  };

  // Raw per-frame hand associations.
  std::map<HandKey, std::map<std::string, std::vector<std::size_t>>> raw;
  std::map<std::size_t, std::set<std::string>> raw_grasped;
  for (std::size_t r : records) {
    const auto& f = stream.frames[r];
    for (const auto& h : f.hands) {
      if (auto id = associate_hand(f, h, stream.lexicon, cfg, stream.image)) {
        raw[h.key()][*id].push_back(r);
        raw_grasped[r].insert(*id);
      }
    }
  }

  std::set<std::string> dominant_grasped;
  std::map<std::string, std::set<std::size_t>> grasp_records;  // object -> records where a hand holds it
  for (const auto& [hand, candidates] : raw) {
    auto d = dominant(candidates, min_len);
    if (!d) continue;
    HandObjectLink link{hand, d->id, {}};
    for (const auto& [a, b] : d->runs) {
      link.support.push_back({stream.frames[a].frame_index, stream.frames[b - 1].frame_index + 1});
      for (std::size_t r = a; r < b; ++r) grasp_records[d->id].insert(r);
    }
    note_object(stream.frames[d->runs.front().first], d->id);
    dominant_grasped.insert(d->id);
    rec.hand_links.push_back(std::move(link));
  }

  for (const auto& [grasped, recs] : grasp_records) {
    std::map<std::string, std::vector<std::size_t>> targets;
    for (std::size_t r : recs) {
      if (auto l = associate_objects(stream.frames[r], grasped, stream.lexicon)) targets[l->target].push_back(r);
    }
    if (auto d = dominant(targets, min_len)) {
      note_object(stream.frames[d->runs.front().first], d->id);
      rec.object_links.push_back({grasped, d->id, LinkKind::ToolOnTarget, static_cast<Frame>(d->support)});
    }
  }

  std::map<std::string, std::map<std::string, std::vector<std::size_t>>> holds;  // ingredient -> container -> records
  for (std::size_t r : records) {
    const auto& grasped_now = raw_grasped[r];
    for (const auto& l : container_contents(stream.frames[r], stream.lexicon, cfg.tau)) {
      if (grasped_now.count(l.target)) continue;
      holds[l.target][l.source].push_back(r);
    }
  }
  for (const auto& [ingredient, containers] : holds) {
    if (dominant_grasped.count(ingredient)) continue;
    if (auto d = dominant(containers, min_len)) {
      const auto& f = stream.frames[d->runs.front().first];
      note_object(f, ingredient);
      note_object(f, d->id);
      rec.object_links.push_back({d->id, ingredient, LinkKind::ContainerHolds, static_cast<Frame>(d->support)});
    }
  }
  return rec;
}

std::vector<AssociationRecord> associate_stream(const DetectionStream& stream, const SegmentSequence& segments,
                                                const AssociationConfig& cfg) {
  std::vector<AssociationRecord> out;
  out.reserve(segments.size());
  for (std::size_t i = 0; i < segments.size(); ++i) {
    out.push_back(summarize_segment(stream, segments[i], static_cast<int>(i), cfg));
  }
  return out;
}

namespace {

std::string_view kind_name(LinkKind k) { return k == LinkKind::ToolOnTarget ? "tool_on_target" : "container_holds"; }

LinkKind parse_kind(const std::string& s) {
  if (s == "tool_on_target") return LinkKind::ToolOnTarget;
  if (s == "container_holds") return LinkKind::ContainerHolds;
  throw std::invalid_argument("unknown link kind '" + s + "'");
}

ordered_json record_to_json(const AssociationRecord& r) {
  ordered_json j;
  j["segment"] = r.segment_id;
  j["start"] = r.span.begin;
  j["end"] = r.span.end;
  j["objects"] = ordered_json::object();
  for (const auto& [id, o] : r.objects) {
    j["objects"][id] = {{"label", o.label}, {"class", std::string(to_string(o.cls))}};
  }
  j["hand_links"] = ordered_json::array();
  for (const auto& l : r.hand_links) {
    ordered_json support = ordered_json::array();
    for (const auto& s : l.support) support.push_back({s.begin, s.end});
    j["hand_links"].push_back({{"hand", l.hand.str()}, {"object", l.object_id}, {"support", support}});
  }
  j["object_links"] = ordered_json::array();
  for (const auto& l : r.object_links) {
    j["object_links"].push_back(
        {{"source", l.source}, {"target", l.target}, {"kind", std::string(kind_name(l.kind))}, {"support", l.support}});
  }
  return j;
}

AssociationRecord record_from_json(const json& j) {
  AssociationRecord r;
  r.segment_id = j.at("segment").get<int>();
  r.span = {j.at("start").get<Frame>(), j.at("end").get<Frame>()};
  for (const auto& [id, o] : j.at("objects").items()) {
    r.objects[id] = {id, o.at("label").get<std::string>(), parse_object_class(o.at("class").get<std::string>())};
  }
  for (const auto& l : j.at("hand_links")) {
    HandObjectLink link{HandKey::parse(l.at("hand").get<std::string>()), l.at("object").get<std::string>(), {}};
    for (const auto& s : l.at("support")) link.support.push_back({s.at(0).get<Frame>(), s.at(1).get<Frame>()});
    r.hand_links.push_back(std::move(link));
  }
  for (const auto& l : j.at("object_links")) {
    r.object_links.push_back({l.at("source").get<std::string>(), l.at("target").get<std::string>(),
                              parse_kind(l.at("kind").get<std::string>()), l.at("support").get<Frame>()});
  }
  return r;
}

}  // namespace

void write_associations(const AssociationFile& file, std::ostream& out) {
  out << ordered_json{{"fps", file.fps}}.dump() << '\n';
  for (const auto& r : file.records) out << record_to_json(r).dump() << '\n';
}

AssociationFile parse_associations(std::istream& in) {
  AssociationFile file;
  std::string line;
  std::size_t line_no = 0;
  bool header = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const json j = json::parse(line);
      if (!header && j.contains("fps") && !j.contains("segment")) {
        file.fps = j.at("fps").get<double>();
        header = true;
        continue;
      }
      header = true;
      file.records.push_back(record_from_json(j));
    } catch (const std::exception& e) {
      throw InputError("malformed association record at line " + std::to_string(line_no) + ": " + e.what(), line_no);
    }
  }
  return file;
}

void save_associations(const AssociationFile& file, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  write_associations(file, out);
}

AssociationFile load_associations(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open associations file " + path.string());
  return parse_associations(in);
}

}  // namespace video2plan
