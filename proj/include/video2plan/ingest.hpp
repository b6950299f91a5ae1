#pragma once

#include <compare>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "video2plan/common.hpp"

namespace video2plan {

struct BoundingBox {
  double x = 0;  // left, pixels
  double y = 0;  // top, pixels
  double w = 0;
  double h = 0;

  double area() const { return w * h; }
  double right() const { return x + w; }
  double bottom() const { return y + h; }
  double center_x() const { return x + w / 2; }
  double center_y() const { return y + h / 2; }
  double diagonal() const;

  bool operator==(const BoundingBox&) const = default;
};

struct ImageSize {
  double width = 0;
  double height = 0;
  bool operator==(const ImageSize&) const = default;
};

enum class HandSide { Left, Right };

// Identifies one hand of one person; printed as "LH_P1", "RH_P2", ...
struct HandKey {
  std::string person;
  HandSide side = HandSide::Left;

  std::string str() const;
  static HandKey parse(std::string_view text);

  bool operator==(const HandKey&) const = default;
  auto operator<=>(const HandKey&) const = default;
};

struct HandDetection {
  std::string person;
  HandSide side = HandSide::Left;
  BoundingBox box;
  double confidence = 1.0;

  HandKey key() const { return {person, side}; }
  bool operator==(const HandDetection&) const = default;
};

struct ObjectDetection {
  std::string id;
  std::string label;
  BoundingBox box;
  bool operator==(const ObjectDetection&) const = default;
};

enum class ObjectClass { Tool, Container, Ingredient };

std::string_view to_string(ObjectClass c);
ObjectClass parse_object_class(std::string_view text);

class Lexicon {
 public:
  using ClassMap = std::map<std::string, ObjectClass, std::less<>>;

  Lexicon() = default;
  explicit Lexicon(ClassMap classes) : classes_(std::move(classes)) {}

  void add(const std::string& label, ObjectClass c) { classes_[label] = c; }
  std::optional<ObjectClass> find(std::string_view label) const;
  ObjectClass class_of(std::string_view label) const;  // throws InputError when absent
  const ClassMap& entries() const { return classes_; }
  bool empty() const { return classes_.empty(); }

  bool operator==(const Lexicon&) const = default;

 private:
  ClassMap classes_;
};

struct FrameDetections {
  Frame frame_index = 0;
  double time_s = 0;
  std::vector<HandDetection> hands;
  std::vector<ObjectDetection> objects;

  const ObjectDetection* find_object(std::string_view id) const;
  bool operator==(const FrameDetections&) const = default;
};

struct DetectionStream {
  double fps = 30.0;
  std::optional<ImageSize> image;
  std::vector<FrameDetections> frames;
  Lexicon lexicon;

  // One past the last frame index; 0 for an empty stream.
  Frame length() const { return frames.empty() ? 0 : frames.back().frame_index + 1; }
  bool operator==(const DetectionStream&) const = default;
};

Lexicon parse_lexicon(std::istream& in);
Lexicon load_lexicon(const std::filesystem::path& path);
void save_lexicon(const Lexicon& lexicon, const std::filesystem::path& path);

// Reads a detection stream: an optional header record carrying `fps`
// (and optionally `width`/`height`), followed by one frame record per line.
// Validation is total; on error nothing is returned.
DetectionStream parse_stream(std::istream& in, const Lexicon& lexicon);
DetectionStream load_stream(const std::filesystem::path& path, const std::filesystem::path& lexicon_path);

void write_stream(const DetectionStream& stream, std::ostream& out);
void save_stream(const DetectionStream& stream, const std::filesystem::path& path);

// Checks every stream invariant; throws InputError naming the frame.
void validate_stream(const DetectionStream& stream);

// Expands the hand box by margin * max(w, h) on every side, clamped to the
// image when its size is known.
BoundingBox hand_box(const HandDetection& hand, double margin, std::optional<ImageSize> image = std::nullopt);

}  // namespace video2plan
