#pragma once

#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "video2plan/ingest.hpp"

namespace video2plan {

struct TrajectorySample {
  Frame frame = 0;
  double x = 0;  // hand-box center, pixels
  double y = 0;
  bool interpolated = false;
};

struct HandTrajectory {
  HandKey hand;
  std::vector<TrajectorySample> samples;
  std::vector<FrameRange> gaps;  // undetected spans longer than the interpolation limit

  // Maximal runs of samples not separated by a gap.
  std::vector<std::span<const TrajectorySample>> chunks() const;
};

struct SegmentationConfig {
  double lambda_reg = 1.0;
  int max_breakpoints = 50;
  double min_gain = 0.01;
  double min_segment_s = 1.0;
  std::optional<Frame> boundary_merge_tol;  // frames; defaults to fps / 6
  double max_interp_gap_s = 0.5;
  int min_samples = 5;  // per segment
  bool use_velocity = false;

  Frame merge_tolerance(double fps) const;
  void validate() const;
};

struct Segment {
  Frame start_frame = 0;  // inclusive
  Frame end_frame = 0;    // exclusive
  std::set<HandKey> sources;

  FrameRange range() const { return {start_frame, end_frame}; }
  bool operator==(const Segment&) const = default;
};

using SegmentSequence = std::vector<Segment>;

HandTrajectory extract_trajectory(const DetectionStream& stream, const HandKey& hand, const SegmentationConfig& cfg);

// Regularized Gaussian log-likelihood of the rows of `samples` (m x n):
//   -(m/2) [log det(S + (lambda/m) I) + n log(2 pi) + n]
// with S the maximum-likelihood covariance about the sample mean.
double segment_loglik(const Eigen::Ref<const Eigen::MatrixXd>& samples, double lambda_reg);

// O(n^2) evaluation of segment_loglik over any contiguous row range, using
// prefix sums of the (globally centered) samples.
class SegmentCost {
 public:
  SegmentCost(const Eigen::Ref<const Eigen::MatrixXd>& samples, double lambda_reg);

  double operator()(Eigen::Index begin, Eigen::Index end) const;
  Eigen::Index size() const { return rows_; }

 private:
  Eigen::Index rows_;
  Eigen::Index cols_;
  double lambda_;
  Eigen::MatrixXd sum_;                   // (rows+1) x n
  std::vector<Eigen::MatrixXd> outer_;    // rows+1 matrices n x n
};

struct GgsResult {
  std::vector<Frame> breakpoints;       // interior breakpoints, ascending frames
  std::vector<Eigen::Index> indices;    // same breakpoints as sample indices
  std::vector<double> objective_trace;  // total log-likelihood after each insert/adjust step
};

Eigen::MatrixXd trajectory_features(std::span<const TrajectorySample> chunk, bool use_velocity);

// Greedy Gaussian segmentation of one trajectory chunk: insert the best
// split, then re-optimise every breakpoint against its neighbours, until the
// relative gain drops below cfg.min_gain or cfg.max_breakpoints is reached.
GgsResult ggs_breakpoints(std::span<const TrajectorySample> chunk, const SegmentationConfig& cfg);
GgsResult ggs_breakpoints(const Eigen::Ref<const Eigen::MatrixXd>& features, std::span<const Frame> frames,
                          const SegmentationConfig& cfg);

SegmentSequence union_segments(const std::map<HandKey, std::vector<Frame>>& per_hand, Frame length, double fps,
                               const SegmentationConfig& cfg);

struct SegmentationResult {
  std::map<HandKey, HandTrajectory> trajectories;
  std::map<HandKey, std::vector<Frame>> breakpoints;  // includes chunk boundaries
  SegmentSequence segments;
};

SegmentationResult segment_stream(const DetectionStream& stream, const SegmentationConfig& cfg);

// Same segmentation, but the union is taken per person instead of over the
// whole video.
std::map<std::string, SegmentSequence> segment_stream_per_person(const DetectionStream& stream,
                                                                  const SegmentationConfig& cfg);

void write_segments(const SegmentSequence& segments, std::ostream& out);
SegmentSequence parse_segments(std::istream& in);
void save_segments(const SegmentSequence& segments, const std::filesystem::path& path);
SegmentSequence load_segments(const std::filesystem::path& path);

// CSV rows `hand,frame,segment_id`, segment ids counted per hand.
void write_hand_timeline(const SegmentationResult& result, std::ostream& out);

}  // namespace video2plan
