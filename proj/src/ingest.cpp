#include "video2plan/ingest.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

namespace video2plan {

using nlohmann::json;
using nlohmann::ordered_json;

std::vector<FrameRange> normalize_ranges(std::vector<FrameRange> ranges) {
  std::sort(ranges.begin(), ranges.end());
  std::vector<FrameRange> out;
  for (const auto& r : ranges) {
    if (r.length() == 0) continue;
    if (!out.empty() && r.begin <= out.back().end) {
      out.back().end = std::max(out.back().end, r.end);
    } else {
      out.push_back(r);
    }
  }
  return out;
}

double BoundingBox::diagonal() const { return std::hypot(w, h); }

std::string HandKey::str() const { return std::string(side == HandSide::Left ? "LH_" : "RH_") + person; }

HandKey HandKey::parse(std::string_view text) {
  if (text.size() < 4 || text[2] != '_' || text[1] != 'H' || (text[0] != 'L' && text[0] != 'R')) {
    throw InputError("invalid hand key '" + std::string(text) + "'");
  }
  return {std::string(text.substr(3)), text[0] == 'L' ? HandSide::Left : HandSide::Right};
}

std::string_view to_string(ObjectClass c) {
  switch (c) {
    case ObjectClass::Tool: return "tool";
    case ObjectClass::Container: return "container";
    case ObjectClass::Ingredient: return "ingredient";
  }
  return "tool";
}

ObjectClass parse_object_class(std::string_view text) {
  if (text == "tool") return ObjectClass::Tool;
  if (text == "container") return ObjectClass::Container;
  if (text == "ingredient") return ObjectClass::Ingredient;
  throw InputError("unknown object class '" + std::string(text) + "'");
}

std::optional<ObjectClass> Lexicon::find(std::string_view label) const {
  auto it = classes_.find(label);
  if (it == classes_.end()) return std::nullopt;
  return it->second;
}

ObjectClass Lexicon::class_of(std::string_view label) const {
  if (auto c = find(label)) return *c;
  throw InputError("unknown label '" + std::string(label) + "'");
}

const ObjectDetection* FrameDetections::find_object(std::string_view id) const {
  for (const auto& o : objects) {
    if (o.id == id) return &o;
  }
  return nullptr;
}

Lexicon parse_lexicon(std::istream& in) {
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception& e) {
    throw InputError(std::string("malformed lexicon: ") + e.what());
  }
  if (!doc.is_object()) throw InputError("malformed lexicon: expected a label -> class map");
  Lexicon lexicon;
  for (const auto& [label, cls] : doc.items()) {
    if (!cls.is_string()) throw InputError("malformed lexicon: class of '" + label + "' is not a string");
    lexicon.add(label, parse_object_class(cls.get<std::string>()));
  }
  return lexicon;
}

Lexicon load_lexicon(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open lexicon " + path.string());
  return parse_lexicon(in);
}

void save_lexicon(const Lexicon& lexicon, const std::filesystem::path& path) {
  ordered_json doc = ordered_json::object();
  for (const auto& [label, cls] : lexicon.entries()) doc[label] = std::string(to_string(cls));
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out << doc.dump(2) << '\n';
}

namespace {

std::string at_line(std::optional<std::size_t> line) {
  return line ? " at line " + std::to_string(*line) : std::string();
}

BoundingBox box_from_json(const json& j) {
  if (!j.is_array() || j.size() != 4) throw std::invalid_argument("box must be [x, y, w, h]");
  BoundingBox b{j[0].get<double>(), j[1].get<double>(), j[2].get<double>(), j[3].get<double>()};
  return b;
}

HandSide side_from_json(const json& j) {
  const auto s = j.get<std::string>();
  if (s == "left" || s == "L") return HandSide::Left;
  if (s == "right" || s == "R") return HandSide::Right;
  throw std::invalid_argument("side must be 'left' or 'right'");
}

FrameDetections frame_from_json(const json& j) {
  FrameDetections f;
  f.frame_index = j.at("frame").get<Frame>();
  f.time_s = j.at("time_s").get<double>();
  for (const auto& h : j.at("hands")) {
    HandDetection d;
    d.person = h.at("person").get<std::string>();
    d.side = side_from_json(h.at("side"));
    d.box = box_from_json(h.at("box"));
    d.confidence = h.value("confidence", 1.0);
    f.hands.push_back(std::move(d));
  }
  for (const auto& o : j.at("objects")) {
    ObjectDetection d;
    d.id = o.at("id").get<std::string>();
    d.label = o.at("label").get<std::string>();
    d.box = box_from_json(o.at("box"));
    f.objects.push_back(std::move(d));
  }
  return f;
}

ordered_json box_to_json(const BoundingBox& b) { return ordered_json::array({b.x, b.y, b.w, b.h}); }

ordered_json frame_to_json(const FrameDetections& f) {
  ordered_json j;
  j["frame"] = f.frame_index;
  j["time_s"] = f.time_s;
  j["hands"] = ordered_json::array();
  for (const auto& h : f.hands) {
    ordered_json hj;
    hj["person"] = h.person;
    hj["side"] = h.side == HandSide::Left ? "left" : "right";
    hj["box"] = box_to_json(h.box);
    hj["confidence"] = h.confidence;
    j["hands"].push_back(std::move(hj));
  }
  j["objects"] = ordered_json::array();
  for (const auto& o : f.objects) {
    ordered_json oj;
    oj["id"] = o.id;
    oj["label"] = o.label;
    oj["box"] = box_to_json(o.box);
    j["objects"].push_back(std::move(oj));
  }
  return j;
}

void check_box(const BoundingBox& b, const std::string& what, Frame frame, std::optional<std::size_t> line) {
  if (!std::isfinite(b.x) || !std::isfinite(b.y) || !std::isfinite(b.w) || !std::isfinite(b.h) || b.w < 0 ||
      b.h < 0) {
    throw InputError("invalid box for " + what + " in frame " + std::to_string(frame) + at_line(line), line);
  }
}

// Checks one frame against its predecessor. `first` is the first frame of
// the stream, used for the fps consistency check.
void check_frame(const FrameDetections& f, const FrameDetections* prev, const FrameDetections* first, double fps,
                 const Lexicon& lexicon, std::optional<std::size_t> line) {
  if (f.frame_index < 0) throw InputError("negative frame index" + at_line(line), line);
  if (!std::isfinite(f.time_s) || f.time_s < 0) throw InputError("invalid time_s" + at_line(line), line);
  if (prev) {
    if (f.frame_index <= prev->frame_index) throw InputError("non-monotone frame index" + at_line(line), line);
    if (f.time_s < prev->time_s) throw InputError("decreasing time_s" + at_line(line), line);
  }
  if (first) {
    const double expected = first->time_s + static_cast<double>(f.frame_index - first->frame_index) / fps;
    if (std::abs(f.time_s - expected) > 1.0 / fps + 1e-9) {
      throw InputError("time_s inconsistent with fps in frame " + std::to_string(f.frame_index) + at_line(line), line);
    }
  }
  std::set<HandKey> hands;
  for (const auto& h : f.hands) {
    if (!hands.insert(h.key()).second) {
      throw InputError("duplicate hand " + h.key().str() + " in frame " + std::to_string(f.frame_index) + at_line(line),
                       line);
    }
    if (h.person.empty()) throw InputError("empty person id" + at_line(line), line);
    if (!(h.confidence >= 0 && h.confidence <= 1)) {
      throw InputError("hand confidence outside [0,1] in frame " + std::to_string(f.frame_index) + at_line(line), line);
    }
    check_box(h.box, "hand " + h.key().str(), f.frame_index, line);
  }
  std::set<std::string> ids;
  for (const auto& o : f.objects) {
    if (!ids.insert(o.id).second) {
      throw InputError("duplicate object id '" + o.id + "' in frame " + std::to_string(f.frame_index) + at_line(line),
                       line);
    }
    if (!lexicon.find(o.label)) {
      throw InputError("unknown label '" + o.label + "' in frame " + std::to_string(f.frame_index) + at_line(line),
                       line);
    }
    check_box(o.box, "object '" + o.id + "'", f.frame_index, line);
  }
}

}  // namespace

DetectionStream parse_stream(std::istream& in, const Lexicon& lexicon) {
  DetectionStream stream;
  stream.lexicon = lexicon;
  std::string text;
  std::size_t line_no = 0;
  bool seen_record = false;
  while (std::getline(in, text)) {
    ++line_no;
    if (text.find_first_not_of(" \t\r") == std::string::npos) continue;
    json j;
    try {
      j = json::parse(text);
    } catch (const json::exception& e) {
      throw InputError("malformed record at line " + std::to_string(line_no) + ": " + e.what(), line_no);
    }
    if (!j.is_object()) throw InputError("malformed record at line " + std::to_string(line_no), line_no);
    if (!seen_record && !j.contains("frame") && j.contains("fps")) {
      seen_record = true;
      try {
        stream.fps = j.at("fps").get<double>();
        if (j.contains("width") || j.contains("height")) {
          stream.image = ImageSize{j.at("width").get<double>(), j.at("height").get<double>()};
        }
      } catch (const std::exception& e) {
        throw InputError("malformed header at line " + std::to_string(line_no) + ": " + e.what(), line_no);
      }
      if (!(stream.fps > 0) || !std::isfinite(stream.fps)) {
        throw InputError("fps must be positive at line " + std::to_string(line_no), line_no);
      }
      continue;
    }
    seen_record = true;
    FrameDetections f;
    try {
      f = frame_from_json(j);
    } catch (const std::exception& e) {
      throw InputError("malformed record at line " + std::to_string(line_no) + ": " + e.what(), line_no);
    }
    const FrameDetections* prev = stream.frames.empty() ? nullptr : &stream.frames.back();
    const FrameDetections* first = stream.frames.empty() ? nullptr : &stream.frames.front();
    check_frame(f, prev, first, stream.fps, lexicon, line_no);
    stream.frames.push_back(std::move(f));
  }
  return stream;
}

DetectionStream load_stream(const std::filesystem::path& path, const std::filesystem::path& lexicon_path) {
  const Lexicon lexicon = load_lexicon(lexicon_path);
  std::ifstream in(path);
  if (!in) throw InputError("cannot open stream " + path.string());
  return parse_stream(in, lexicon);
}

void validate_stream(const DetectionStream& stream) {
  if (!(stream.fps > 0) || !std::isfinite(stream.fps)) throw InputError("fps must be positive");
  for (std::size_t i = 0; i < stream.frames.size(); ++i) {
    check_frame(stream.frames[i], i ? &stream.frames[i - 1] : nullptr, i ? &stream.frames[0] : nullptr, stream.fps,
                stream.lexicon, std::nullopt);
  }
}

void write_stream(const DetectionStream& stream, std::ostream& out) {
  ordered_json header;
  header["fps"] = stream.fps;
  if (stream.image) {
    header["width"] = stream.image->width;
    header["height"] = stream.image->height;
  }
  out << header.dump() << '\n';
  for (const auto& f : stream.frames) out << frame_to_json(f).dump() << '\n';
}

void save_stream(const DetectionStream& stream, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  write_stream(stream, out);
  if (!out) throw Error("write failed for " + path.string());
}

BoundingBox hand_box(const HandDetection& hand, double margin, std::optional<ImageSize> image) {
  if (!(margin >= 0)) throw std::invalid_argument("hand_box: margin must be >= 0");
  const auto& b = hand.box;
  const double pad = margin * std::max(b.w, b.h);
  double x0 = b.x - pad, y0 = b.y - pad, x1 = b.right() + pad, y1 = b.bottom() + pad;
  if (image) {
    x0 = std::clamp(x0, 0.0, image->width);
    x1 = std::clamp(x1, 0.0, image->width);
    y0 = std::clamp(y0, 0.0, image->height);
    y1 = std::clamp(y1, 0.0, image->height);
  }
  return {x0, y0, x1 - x0, y1 - y0};
}

}  // namespace video2plan
