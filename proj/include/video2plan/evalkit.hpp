#pragma once

#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "video2plan/plan.hpp"

namespace video2plan {

enum class FailureType { ActionRecognition, HandObject, ObjectObject };
std::string_view to_string(FailureType f);  // A, HO, OO
FailureType parse_failure(std::string_view text);

struct LabeledTree {
  FrameRange span;
  std::string agent;  // person
  ActionTree tree;
  std::optional<FailureType> failure;  // truth annotations only

  bool operator==(const LabeledTree&) const = default;
};

// Predictions from a merged timeline: one entry per hand run, bare grasps
// left out.
std::vector<LabeledTree> predictions(const Timeline& merged);

// Tab-separated: start, end, agent, s-expression, optional failure tag.
std::vector<LabeledTree> parse_truth(std::istream& in);
std::vector<LabeledTree> load_truth(const std::filesystem::path& path);
void write_truth(std::span<const LabeledTree> truth, std::ostream& out);

struct Metrics {
  double precision = 0;
  double recall = 0;
  bool no_detections = false;
};

Metrics precision_recall(std::size_t detected, std::size_t correct, std::size_t truth);

struct MatchReport {
  std::size_t detected = 0;
  std::size_t correct = 0;
  std::size_t truth = 0;
  Metrics metrics;
  std::vector<std::pair<std::size_t, std::size_t>> matches;  // (prediction, truth) indices
  std::map<FailureType, std::size_t> failures;                // annotated truth entries left unmatched
};

// Predictions are visited in span order; each takes the unmatched truth entry
// with an identical tree and the largest temporal overlap.
MatchReport match_trees(std::span<const LabeledTree> pred, std::span<const LabeledTree> truth);

struct ConfusionMatrix {
  std::vector<std::string> labels;
  std::vector<std::vector<double>> values;  // rows: truth, columns: prediction

  double at(const std::string& truth, const std::string& pred) const;
};

ConfusionMatrix confusion_matrix(std::span<const std::string> pred, std::span<const std::string> truth,
                                 std::span<const std::string> labels, bool normalize = true);

// Action word of a tree: its first A or C leaf, "grasp" for a bare grasp.
std::string action_label(const ActionTree& tree);

// Pairs every truth entry with the overlapping prediction of the same hand
// (largest overlap); unpaired truth entries get "none".
std::pair<std::vector<std::string>, std::vector<std::string>> aligned_labels(std::span<const LabeledTree> pred,
                                                                             std::span<const LabeledTree> truth);

struct TimelineRow {
  std::string agent;
  Frame frame = 0;
  std::string predicted;
  std::string truth;

  bool operator==(const TimelineRow&) const = default;
};

std::vector<TimelineRow> timeline_export(std::span<const LabeledTree> pred, std::span<const LabeledTree> truth);
void write_timeline_csv(std::span<const TimelineRow> rows, std::ostream& out);

void write_report(const MatchReport& report, const ConfusionMatrix& confusion, std::ostream& out);

}  // namespace video2plan
