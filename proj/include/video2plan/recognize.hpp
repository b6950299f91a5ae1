#pragma once

#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "video2plan/associate.hpp"

namespace video2plan {

enum class ActionLabel {
  Cut,
  Spread,
  Grip,
  Stir,
  Sprinkle,
  Squeeze,
  Heat,
  Wrap,
  Roll,
  Pour,
  Coat,
  Transfer,
  Handover,
  Holding,
};

std::string_view to_string(ActionLabel a);
ActionLabel parse_action(std::string_view text);
std::optional<ActionLabel> find_action(std::string_view text);
bool is_individual(ActionLabel a);
bool is_collaborative(ActionLabel a);

// The eleven single-person actions, in declaration order.
std::span<const ActionLabel> individual_actions();

struct ActionStats {
  double prior = 0;
  std::map<std::string, double, std::less<>> given;  // object word -> P(object | action)
  std::optional<double> unseen;                      // P(object | action) for words not in `given`

  bool operator==(const ActionStats&) const = default;
};

struct BigramSubTable {
  std::map<ActionLabel, ActionStats> actions;

  // P(word | action), falling back to the action's unseen mass, then epsilon.
  double probability(ActionLabel action, std::string_view word, double epsilon) const;
  bool operator==(const BigramSubTable&) const = default;
};

// Commonsense co-occurrence statistics. The general sub-table supplies the
// action prior and tool/container words, the recipe sub-table ingredient words.
struct BigramTable {
  double epsilon = 1e-6;
  BigramSubTable general;
  BigramSubTable recipe;

  std::vector<ActionLabel> candidate_actions() const;
  void validate() const;  // throws InputError
  bool operator==(const BigramTable&) const = default;
};

BigramTable parse_bigram_table(std::istream& in);
BigramTable load_bigram_table(const std::filesystem::path& path);
void write_bigram_table(const BigramTable& table, std::ostream& out);
void save_bigram_table(const BigramTable& table, const std::filesystem::path& path);

// cut/stir table holding the four worked-example probabilities.
BigramTable worked_example_table();
// Hand-set table over all eleven actions for the kitchen fixtures.
BigramTable kitchen_mini_table();

struct CorpusBuild {
  BigramTable table;
  std::vector<std::string> warnings;
};

// Sentence-level co-occurrence counts over plain text. Sentences end at a
// newline or one of . ! ? ;
CorpusBuild build_bigram_table(std::string_view general_text, std::string_view recipe_text,
                               std::span<const ActionLabel> actions, std::span<const std::string> object_labels,
                               double epsilon = 1e-6);

struct RecognitionOptions {
  std::map<ObjectClass, double> class_weights;  // multiplies log P(O|A); default 1
  bool deduplicate = true;                      // count each label once

  double weight(ObjectClass c) const;
};

struct WordObservation {
  std::string label;
  ObjectClass cls = ObjectClass::Tool;
};

struct Recognition {
  ActionLabel action = ActionLabel::Cut;
  double score = 0;  // log P(A) + sum_k w_k log P(O_k | A)
};

// argmax over the table's individual actions; ties go to the
// lexicographically smallest action name.
Recognition recognize_individual(std::span<const WordObservation> objects, const BigramTable& table,
                                 const RecognitionOptions& options = {});

struct TransferObservation {
  int segment = 0;
  std::string container;
};

struct TransferEvent {
  std::string ingredient;
  std::string source;
  std::string destination;
  int segment = 0;  // first segment where the destination holds the ingredient
  int last_source_segment = 0;

  bool operator==(const TransferEvent&) const = default;
};

using ContainerHistory = std::map<std::string, std::vector<TransferObservation>>;

ContainerHistory container_history(std::span<const AssociationRecord> records);
std::vector<TransferEvent> detect_transfer(const ContainerHistory& history);

struct GraspInterval {
  FrameRange frames;
  HandKey hand;
};

using GraspHistory = std::map<std::string, std::vector<GraspInterval>>;

GraspHistory grasp_history(std::span<const AssociationRecord> records);

enum class CollaborationCase { SharedGrasp, ToolOnHeld };

struct CollaborativeEvent {
  ActionLabel label = ActionLabel::Holding;  // handover or holding
  CollaborationCase kind = CollaborationCase::SharedGrasp;
  std::string object;  // the shared or held object
  HandKey first;       // giver, or holder (first grasper) for shared holding, or holder for tool-on-held
  HandKey second;      // receiver, second holder, or actor
  Frame frame = 0;     // exchange frame (handover) or start of the joint grasp
  std::string tool;    // tool-on-held only: the actor's grasped object
  std::optional<int> segment;

  bool operator==(const CollaborativeEvent&) const = default;
};

// Case 1 from the grasp history (handover / holding); case 2 from the
// per-segment tool links (an actor's tool targets an object another person holds).
std::vector<CollaborativeEvent> detect_collaboration(const GraspHistory& history,
                                                     std::span<const AssociationRecord> records,
                                                     Frame gap_tolerance);

struct HandActivity {
  HandKey hand;
  ObjectRef grasped;
  std::optional<ActionLabel> action;
  double score = 0;
  std::vector<ObjectRef> targets;  // [target] | [ingredient, container] | transfer: [ingredient, source, destination]
  bool suppressed = false;         // folded into another hand's collaborative phrase

  bool operator==(const HandActivity&) const = default;
};

struct RecognizedSegment {
  int id = 0;
  FrameRange span;
  std::vector<HandActivity> hands;
  std::vector<CollaborativeEvent> events;
  std::map<std::string, ObjectRef> objects;

  const HandActivity* activity(const HandKey& hand) const;
  bool operator==(const RecognizedSegment&) const = default;
};

struct RecognizeConfig {
  RecognitionOptions options;
  double handover_gap_s = 1.0;
};

std::vector<RecognizedSegment> recognize_segments(std::span<const AssociationRecord> records, double fps,
                                                  const BigramTable& table, const RecognizeConfig& cfg = {});

void write_recognized(const std::vector<RecognizedSegment>& segments, std::ostream& out);
std::vector<RecognizedSegment> parse_recognized(std::istream& in);
void save_recognized(const std::vector<RecognizedSegment>& segments, const std::filesystem::path& path);
std::vector<RecognizedSegment> load_recognized(const std::filesystem::path& path);

}  // namespace video2plan
