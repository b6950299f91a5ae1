#pragma once

#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "video2plan/recognize.hpp"

namespace video2plan {

enum class Symbol { HP, AP, CP, OP, H, O, A, C };

std::string_view to_string(Symbol s);
std::optional<Symbol> find_symbol(std::string_view text);
bool is_terminal(Symbol s);

// A leaf of a visual sentence. `id` and `cls` bind an O leaf to an object
// instance; they ride along with the leaf but take no part in equality.
struct Terminal {
  Symbol kind = Symbol::H;
  std::string word;
  std::string id;
  std::optional<ObjectClass> cls;

  static Terminal hand(const HandKey& h);
  static Terminal object(const ObjectRef& o);
  static Terminal action(ActionLabel a);  // A for individual/transfer, C for handover/holding

  bool operator==(const Terminal& other) const { return kind == other.kind && word == other.word; }
};

struct VisualSentence {
  std::vector<Terminal> terminals;
  int segment = 0;
  HandKey hand;

  std::vector<std::string> words() const;
};

struct ActionTree {
  Symbol label = Symbol::HP;
  Terminal leaf;  // terminals only
  std::vector<ActionTree> children;

  static ActionTree terminal(Terminal t);
  static ActionTree node(Symbol label, std::vector<ActionTree> children);

  bool is_leaf() const { return is_terminal(label); }
  std::size_t size() const;  // number of leaves
  bool operator==(const ActionTree& other) const;
};

// Pattern (a)-(g) construction for one hand of a recognized segment.
// Returns nothing for hands without a grasp or whose activity is folded into
// another hand's collaborative sentence.
std::optional<VisualSentence> build_sentence(const RecognizedSegment& seg, const HandKey& hand);

// Chart parse with the canonical derivation: right-nested OP runs and
// AP/CP attached to the outermost HP. Throws ParseError whose position is the
// first terminal that cannot extend a valid prefix (the sentence length when
// the input ends early).
ActionTree parse(std::span<const Terminal> sentence);
inline ActionTree parse(const VisualSentence& s) { return parse(std::span<const Terminal>(s.terminals)); }

// All derivations, for small inputs. Exponential; meant for tests and oracles.
std::vector<ActionTree> enumerate_parses(std::span<const Terminal> sentence);

// Position of the first offending terminal, or nothing when the sentence is
// in the language.
std::optional<std::size_t> first_error(std::span<const Terminal> sentence);

std::vector<Terminal> leaves(const ActionTree& tree);
VisualSentence unparse(const ActionTree& tree);

// Throws ParseError when a node matches no production.
void validate_tree(const ActionTree& tree);
bool is_canonical(const ActionTree& tree);

std::string to_sexpr(const ActionTree& tree);
ActionTree parse_sexpr(std::string_view text);
std::string to_dot(const ActionTree& tree, std::string_view name = "tree");

enum class CollaborationRole { None, Giver, Receiver, Holder, Actor };
std::string_view to_string(CollaborationRole r);

struct ActionDirective {
  HandKey hand;
  std::optional<ActionLabel> action;  // none for a bare grasp
  Terminal object;                    // grasped object
  std::vector<Terminal> targets;      // transfer: ingredient, source, destination
  CollaborationRole role = CollaborationRole::None;
  std::optional<HandKey> partner;
  int event = -1;  // directives of one collaborative event share this id

  const std::string& agent() const { return hand.person; }
};

// Reads one directive per hand role out of a canonical tree. Collaborative
// attachments yield a directive for both participants.
std::vector<ActionDirective> tree_to_directives(const ActionTree& tree);

// One parsed hand phrase of a segment; a segment without any sentence keeps
// a record with no tree so spans stay contiguous.
struct TreeRecord {
  int segment = 0;
  FrameRange span;
  std::optional<HandKey> hand;
  std::optional<ActionTree> tree;

  bool operator==(const TreeRecord&) const = default;
};

std::vector<TreeRecord> trees_from_segments(std::span<const RecognizedSegment> segments);

// Tab-separated: segment, start, end, hand, bindings (id:class per O leaf),
// s-expression. Empty segments use '-' in the last three columns.
void write_trees(std::span<const TreeRecord> records, std::ostream& out);
std::vector<TreeRecord> parse_trees(std::istream& in);
void save_trees(std::span<const TreeRecord> records, const std::filesystem::path& path);
std::vector<TreeRecord> load_trees(const std::filesystem::path& path);

}  // namespace video2plan
