#pragma once

#include <algorithm>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace video2plan {

using Frame = std::int64_t;

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed or inconsistent input files. Carries the 1-based line number
// when the problem can be pinned to a line.
class InputError : public Error {
 public:
  explicit InputError(const std::string& what, std::optional<std::size_t> line = std::nullopt)
      : Error(what), line_(line) {}

  std::optional<std::size_t> line() const { return line_; }

 private:
  std::optional<std::size_t> line_;
};

class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t position) : Error(what), position_(position) {}
  std::size_t position() const { return position_; }

 private:
  std::size_t position_;
};

class PlanError : public Error {
 public:
  using Error::Error;
};

// Half-open frame interval [begin, end).
struct FrameRange {
  Frame begin = 0;
  Frame end = 0;

  Frame length() const { return end > begin ? end - begin : 0; }
  bool contains(Frame f) const { return f >= begin && f < end; }
  bool operator==(const FrameRange&) const = default;
  auto operator<=>(const FrameRange&) const = default;
};

inline Frame overlap(const FrameRange& a, const FrameRange& b) {
  const Frame lo = std::max(a.begin, b.begin);
  const Frame hi = std::min(a.end, b.end);
  return hi > lo ? hi - lo : 0;
}

// Merges touching or overlapping ranges; input need not be sorted.
std::vector<FrameRange> normalize_ranges(std::vector<FrameRange> ranges);

}  // namespace video2plan
