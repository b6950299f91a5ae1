#pragma once

#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "video2plan/ingest.hpp"
#include "video2plan/segment.hpp"

namespace video2plan {

struct ObjectRef {
  std::string id;
  std::string label;
  ObjectClass cls = ObjectClass::Tool;

  bool operator==(const ObjectRef&) const = default;
  auto operator<=>(const ObjectRef&) const = default;
};

struct AssociationConfig {
  double hand_margin = 0.1;             // fraction of max(w, h), see hand_box
  double ingredient_cap_factor = 1.5;   // nearest-ingredient cap, in hand-box diagonals
  std::optional<int> persistence;       // consecutive frames; defaults to ceil(fps / 2)
  double tau = 0.05;                    // container/ingredient Jaccard threshold

  int persistence_frames(double fps) const;
};

struct HandObjectLink {
  HandKey hand;
  std::string object_id;
  std::vector<FrameRange> support;  // frames where the link held, after the persistence filter

  Frame support_frames() const;
  bool operator==(const HandObjectLink&) const = default;
};

enum class LinkKind { ToolOnTarget, ContainerHolds };

struct ObjectObjectLink {
  std::string source;  // grasped object, or the container
  std::string target;  // manipulated object, or the ingredient
  LinkKind kind = LinkKind::ToolOnTarget;
  Frame support = 0;

  bool operator==(const ObjectObjectLink&) const = default;
};

struct AssociationRecord {
  int segment_id = 0;
  FrameRange span;
  std::vector<HandObjectLink> hand_links;      // one dominant link per hand, ordered by hand
  std::vector<ObjectObjectLink> object_links;  // tool links first, then container contents
  std::map<std::string, ObjectRef> objects;    // every object referenced above

  const HandObjectLink* link_for(const HandKey& hand) const;
  std::optional<std::string> target_of(const std::string& source) const;
  std::vector<std::string> contents_of(const std::string& container) const;
  std::optional<std::string> container_of(const std::string& ingredient) const;
  bool operator==(const AssociationRecord&) const = default;
};

double intersection_area(const BoundingBox& a, const BoundingBox& b);
double jaccard(const BoundingBox& a, const BoundingBox& b);
double center_distance(const BoundingBox& a, const BoundingBox& b);

std::optional<std::string> associate_hand(const FrameDetections& frame, const HandDetection& hand,
                                          const Lexicon& lexicon, const AssociationConfig& cfg = {},
                                          std::optional<ImageSize> image = std::nullopt);

std::optional<ObjectObjectLink> associate_objects(const FrameDetections& frame, const std::string& grasped,
                                                  const Lexicon& lexicon);

std::vector<ObjectObjectLink> container_contents(const FrameDetections& frame, const Lexicon& lexicon, double tau);

AssociationRecord summarize_segment(const DetectionStream& stream, const Segment& segment, int segment_id,
                                    const AssociationConfig& cfg = {});

std::vector<AssociationRecord> associate_stream(const DetectionStream& stream, const SegmentSequence& segments,
                                                const AssociationConfig& cfg = {});

struct AssociationFile {
  double fps = 30.0;
  std::vector<AssociationRecord> records;
};

void write_associations(const AssociationFile& file, std::ostream& out);
AssociationFile parse_associations(std::istream& in);
void save_associations(const AssociationFile& file, const std::filesystem::path& path);
AssociationFile load_associations(const std::filesystem::path& path);

}  // namespace video2plan
