#include "video2plan/grammar.hpp"

#include <array>
#include <cctype>
#include <fstream>
#include <functional>
#include <sstream>

namespace video2plan {

namespace {

constexpr std::array<std::string_view, 8> kSymbolNames{"HP", "AP", "CP", "OP", "H", "O", "A", "C"};

struct Rule {
  Symbol lhs, left, right;
};

// Order matters only among rules sharing a left-hand side and split; the
// right child's first terminal already separates them.
constexpr std::array<Rule, 9> kRules{{
    {Symbol::HP, Symbol::H, Symbol::O},
    {Symbol::HP, Symbol::HP, Symbol::AP},
    {Symbol::HP, Symbol::HP, Symbol::CP},
    {Symbol::AP, Symbol::A, Symbol::O},
    {Symbol::AP, Symbol::A, Symbol::OP},
    {Symbol::AP, Symbol::A, Symbol::HP},
    {Symbol::CP, Symbol::C, Symbol::HP},
    {Symbol::OP, Symbol::O, Symbol::O},
    {Symbol::OP, Symbol::O, Symbol::OP},
}};

using Cell = unsigned;
constexpr Cell bit(Symbol s) { return 1u << static_cast<unsigned>(s); }

// chart[i][len] holds the symbols deriving terminals [i, i + len).
using Chart = std::vector<std::vector<Cell>>;

Chart fill_chart(std::span<const Terminal> s) {
  const std::size_t n = s.size();
  Chart chart(n, std::vector<Cell>(n + 1, 0));
  for (std::size_t i = 0; i < n; ++i) chart[i][1] = bit(s[i].kind);
  for (std::size_t len = 2; len <= n; ++len) {
    for (std::size_t i = 0; i + len <= n; ++i) {
      Cell cell = 0;
      for (std::size_t k = 1; k < len; ++k) {
        const Cell l = chart[i][k];
        const Cell r = chart[i + k][len - k];
        if (!l || !r) continue;
        for (const auto& rule : kRules) {
          if ((l & bit(rule.left)) && (r & bit(rule.right))) cell |= bit(rule.lhs);
        }
      }
      chart[i][len] = cell;
    }
  }
  return chart;
}

ActionTree build_canonical(const Chart& chart, std::span<const Terminal> s, Symbol sym, std::size_t i,
                           std::size_t len) {
  if (len == 1) return ActionTree::terminal(s[i]);
  for (std::size_t k = len - 1; k >= 1; --k) {
    const Cell l = chart[i][k];
    const Cell r = chart[i + k][len - k];
    for (const auto& rule : kRules) {
      if (rule.lhs == sym && (l & bit(rule.left)) && (r & bit(rule.right))) {
        return ActionTree::node(sym, {build_canonical(chart, s, rule.left, i, k),
                                      build_canonical(chart, s, rule.right, i + k, len - k)});
      }
    }
  }
  throw std::logic_error("parse chart inconsistent");
}

std::vector<ActionTree> enumerate(const Chart& chart, std::span<const Terminal> s, Symbol sym, std::size_t i,
                                  std::size_t len) {
  if (len == 1) {
    if (s[i].kind == sym) return {ActionTree::terminal(s[i])};
    return {};
  }
  std::vector<ActionTree> out;
  if (!(chart[i][len] & bit(sym))) return out;
  for (std::size_t k = 1; k < len; ++k) {
    for (const auto& rule : kRules) {
      if (rule.lhs != sym) continue;
      if (!(chart[i][k] & bit(rule.left)) || !(chart[i + k][len - k] & bit(rule.right))) continue;
      const auto lefts = enumerate(chart, s, rule.left, i, k);
      const auto rights = enumerate(chart, s, rule.right, i + k, len - k);
      for (const auto& l : lefts) {
        for (const auto& r : rights) out.push_back(ActionTree::node(sym, {l, r}));
      }
    }
  }
  return out;
}

bool word_consistent(const Terminal& t) {
  if (t.word.empty()) return false;
  for (char c : t.word) {
    if (std::isspace(static_cast<unsigned char>(c)) || c == '(' || c == ')') return false;
  }
  switch (t.kind) {
    case Symbol::H:
      try {
        HandKey::parse(t.word);
        return true;
      } catch (const std::exception&) {
        return false;
      }
    case Symbol::A: {
      const auto a = find_action(t.word);
      return a && (is_individual(*a) || *a == ActionLabel::Transfer);
    }
    case Symbol::C: {
      const auto a = find_action(t.word);
      return a && is_collaborative(*a);
    }
    default:
      return true;
  }
}

std::string describe(const Terminal& t) { return std::string(to_string(t.kind)) + " '" + t.word + "'"; }

}  // namespace

std::string_view to_string(Symbol s) { return kSymbolNames[static_cast<std::size_t>(s)]; }

std::optional<Symbol> find_symbol(std::string_view text) {
  for (std::size_t i = 0; i < kSymbolNames.size(); ++i) {
    if (kSymbolNames[i] == text) return static_cast<Symbol>(i);
  }
  return std::nullopt;
}

bool is_terminal(Symbol s) { return s == Symbol::H || s == Symbol::O || s == Symbol::A || s == Symbol::C; }

Terminal Terminal::hand(const HandKey& h) { return {Symbol::H, h.str(), {}, std::nullopt}; }
Terminal Terminal::object(const ObjectRef& o) { return {Symbol::O, o.label, o.id, o.cls}; }
Terminal Terminal::action(ActionLabel a) {
  return {is_collaborative(a) ? Symbol::C : Symbol::A, std::string(to_string(a)), {}, std::nullopt};
}

std::vector<std::string> VisualSentence::words() const {
  std::vector<std::string> out;
  for (const auto& t : terminals) out.push_back(t.word);
  return out;
}

ActionTree ActionTree::terminal(Terminal t) {
  ActionTree tree;
  tree.label = t.kind;
  tree.leaf = std::move(t);
  return tree;
}

ActionTree ActionTree::node(Symbol label, std::vector<ActionTree> children) {
  ActionTree tree;
  tree.label = label;
  tree.children = std::move(children);
  return tree;
}

std::size_t ActionTree::size() const {
  if (is_leaf()) return 1;
  std::size_t n = 0;
  for (const auto& c : children) n += c.size();
  return n;
}

bool ActionTree::operator==(const ActionTree& other) const {
  if (label != other.label) return false;
  if (is_leaf()) return leaf == other.leaf;
  return children == other.children;
}

// ---------------------------------------------------------------------------

std::optional<VisualSentence> build_sentence(const RecognizedSegment& seg, const HandKey& hand) {
  const HandActivity* act = seg.activity(hand);
  if (!act || act->suppressed) return std::nullopt;

  VisualSentence s;
  s.segment = seg.id;
  s.hand = hand;
  auto& t = s.terminals;
  auto object = [&](const std::string& id) {
    auto it = seg.objects.find(id);
    if (it == seg.objects.end()) throw Error("segment " + std::to_string(seg.id) + " lacks object '" + id + "'");
    return Terminal::object(it->second);
  };

  for (const auto& e : seg.events) {
    if (e.kind == CollaborationCase::SharedGrasp && e.first == hand) {
      // (e) handover from the giver, (g) holding from the first holder
      t = {Terminal::hand(hand), object(e.object), Terminal::action(e.label), Terminal::hand(e.second),
           object(e.object)};
      return s;
    }
    if (e.kind == CollaborationCase::ToolOnHeld && e.second == hand && act->action) {
      // (f) the actor's action embeds the holder's hand phrase
      t = {Terminal::hand(hand), object(e.tool), Terminal::action(*act->action), Terminal::hand(e.first),
           object(e.object)};
      return s;
    }
  }

  t = {Terminal::hand(hand), Terminal::object(act->grasped)};
  if (act->action) {
    t.push_back(Terminal::action(*act->action));
    for (const auto& o : act->targets) t.push_back(Terminal::object(o));
  }
  return s;
}

std::optional<std::size_t> first_error(std::span<const Terminal> sentence) {
  // The language is H O (A O+ | A H O | C H O)*; walk its automaton.
  enum State { Start, AfterH, Done, AfterA, AfterAO, AfterC };
  State st = Start;
  for (std::size_t i = 0; i < sentence.size(); ++i) {
    const Symbol k = sentence[i].kind;
    std::optional<State> next;
    switch (st) {
      case Start:
        if (k == Symbol::H) next = AfterH;
        break;
      case AfterH:
        if (k == Symbol::O) next = Done;
        break;
      case Done:
        if (k == Symbol::A) next = AfterA;
        if (k == Symbol::C) next = AfterC;
        break;
      case AfterA:
        if (k == Symbol::O) next = AfterAO;
        if (k == Symbol::H) next = AfterH;
        break;
      case AfterAO:
        if (k == Symbol::O) next = AfterAO;
        if (k == Symbol::A) next = AfterA;
        if (k == Symbol::C) next = AfterC;
        break;
      case AfterC:
        if (k == Symbol::H) next = AfterH;
        break;
    }
    if (!next) return i;
    st = *next;
  }
  if (st == Done || st == AfterAO) return std::nullopt;
  return sentence.size();
}

ActionTree parse(std::span<const Terminal> sentence) {
  if (sentence.empty()) throw ParseError("empty sentence", 0);
  for (std::size_t i = 0; i < sentence.size(); ++i) {
    if (!is_terminal(sentence[i].kind)) {
      throw ParseError("non-terminal " + std::string(to_string(sentence[i].kind)) + " in sentence", i);
    }
  }
  const auto chart = fill_chart(sentence);
  if (!(chart[0][sentence.size()] & bit(Symbol::HP))) {
    const std::size_t pos = first_error(sentence).value_or(sentence.size());
    if (pos < sentence.size()) {
      throw ParseError("unexpected " + describe(sentence[pos]) + " at position " + std::to_string(pos), pos);
    }
    throw ParseError("sentence ends before a complete hand phrase", pos);
  }
  return build_canonical(chart, sentence, Symbol::HP, 0, sentence.size());
}

std::vector<ActionTree> enumerate_parses(std::span<const Terminal> sentence) {
  if (sentence.empty()) return {};
  const auto chart = fill_chart(sentence);
  return enumerate(chart, sentence, Symbol::HP, 0, sentence.size());
}

std::vector<Terminal> leaves(const ActionTree& tree) {
  std::vector<Terminal> out;
  std::function<void(const ActionTree&)> walk = [&](const ActionTree& t) {
    if (t.is_leaf()) {
      out.push_back(t.leaf);
      return;
    }
    for (const auto& c : t.children) walk(c);
  };
  walk(tree);
  return out;
}

VisualSentence unparse(const ActionTree& tree) {
  VisualSentence s;
  s.terminals = leaves(tree);
  if (!s.terminals.empty() && s.terminals.front().kind == Symbol::H) s.hand = HandKey::parse(s.terminals.front().word);
  return s;
}

void validate_tree(const ActionTree& tree) {
  if (tree.is_leaf()) {
    if (!tree.children.empty()) throw ParseError("terminal " + describe(tree.leaf) + " has children", 0);
    if (tree.leaf.kind != tree.label || !word_consistent(tree.leaf)) {
      throw ParseError("inconsistent terminal " + describe(tree.leaf), 0);
    }
    return;
  }
  const auto name = std::string(to_string(tree.label));
  if (tree.children.size() != 2) throw ParseError(name + " node must have two children", 0);
  const bool matched = std::any_of(kRules.begin(), kRules.end(), [&](const Rule& r) {
    return r.lhs == tree.label && r.left == tree.children[0].label && r.right == tree.children[1].label;
  });
  if (!matched) {
    throw ParseError("no production " + name + " -> " + std::string(to_string(tree.children[0].label)) + " " +
                         std::string(to_string(tree.children[1].label)),
                     0);
  }
  for (const auto& c : tree.children) validate_tree(c);
}

bool is_canonical(const ActionTree& tree) {
  try {
    validate_tree(tree);
    if (tree.label != Symbol::HP) return false;
    return parse(leaves(tree)) == tree;
  } catch (const ParseError&) {
    return false;
  }
}

// ---------------------------------------------------------------------------

std::string to_sexpr(const ActionTree& tree) {
  if (tree.is_leaf()) return "(" + std::string(to_string(tree.label)) + " " + tree.leaf.word + ")";
  std::string out = "(" + std::string(to_string(tree.label));
  for (const auto& c : tree.children) out += " " + to_sexpr(c);
  return out + ")";
}

namespace {

class SexprReader {
 public:
  explicit SexprReader(std::string_view text) : text_(text) {}

  ActionTree read_all() {
    ActionTree t = read();
    skip_space();
    if (pos_ != text_.size()) fail("trailing characters");
    validate_tree(t);
    return t;
  }

 private:
  [[noreturn]] void fail(const std::string& what) const {
    throw ParseError("s-expression: " + what + " at offset " + std::to_string(pos_), pos_);
  }

  void skip_space() {
    while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
  }

  std::string atom() {
    skip_space();
    const std::size_t start = pos_;
    while (pos_ < text_.size() && !std::isspace(static_cast<unsigned char>(text_[pos_])) && text_[pos_] != '(' &&
           text_[pos_] != ')') {
      ++pos_;
    }
    if (start == pos_) fail("expected a symbol");
    return std::string(text_.substr(start, pos_ - start));
  }

  void expect(char c) {
    skip_space();
    if (pos_ >= text_.size() || text_[pos_] != c) fail(std::string("expected '") + c + "'");
    ++pos_;
  }

  ActionTree read() {
    expect('(');
    const std::string head = atom();
    const auto sym = find_symbol(head);
    if (!sym) fail("unknown symbol '" + head + "'");
    ActionTree t;
    if (is_terminal(*sym)) {
      t = ActionTree::terminal({*sym, atom(), {}, std::nullopt});
    } else {
      t.label = *sym;
      skip_space();
      while (pos_ < text_.size() && text_[pos_] == '(') {
        t.children.push_back(read());
        skip_space();
      }
    }
    expect(')');
    return t;
  }

  std::string_view text_;
  std::size_t pos_ = 0;
};

}  // namespace

ActionTree parse_sexpr(std::string_view text) { return SexprReader(text).read_all(); }

std::string to_dot(const ActionTree& tree, std::string_view name) {
  std::ostringstream out;
  out << "digraph \"" << name << "\" {\n  node [fontname=\"Helvetica\"];\n";
  int next = 0;
  std::function<int(const ActionTree&)> emit = [&](const ActionTree& t) {
    const int id = next++;
    if (t.is_leaf()) {
      out << "  n" << id << " [shape=box, label=\"" << to_string(t.label) << "\\n" << t.leaf.word << "\"];\n";
    } else {
      out << "  n" << id << " [shape=ellipse, label=\"" << to_string(t.label) << "\"];\n";
      for (const auto& c : t.children) {
        const int child = emit(c);
        out << "  n" << id << " -> n" << child << ";\n";
      }
    }
    return id;
  };
  emit(tree);
  out << "}\n";
  return out.str();
}

// ---------------------------------------------------------------------------

std::string_view to_string(CollaborationRole r) {
  switch (r) {
    case CollaborationRole::None: return "none";
    case CollaborationRole::Giver: return "giver";
    case CollaborationRole::Receiver: return "receiver";
    case CollaborationRole::Holder: return "holder";
    case CollaborationRole::Actor: return "actor";
  }
  return "none";
}

namespace {

struct BasePhrase {
  HandKey hand;
  Terminal object;
};

BasePhrase base_phrase(const ActionTree& hp) {
  if (hp.label != Symbol::HP || hp.children.size() != 2 || hp.children[0].label != Symbol::H ||
      hp.children[1].label != Symbol::O) {
    throw ParseError("malformed tree: expected HP(H O), got " + to_sexpr(hp), 0);
  }
  return {HandKey::parse(hp.children[0].leaf.word), hp.children[1].leaf};
}

}  // namespace

std::vector<ActionDirective> tree_to_directives(const ActionTree& tree) {
  validate_tree(tree);
  if (tree.label != Symbol::HP) throw ParseError("malformed tree: root must be HP", 0);

  // Peel the left spine HP -> HP X down to the base hand phrase.
  std::vector<const ActionTree*> attachments;
  const ActionTree* node = &tree;
  while (node->children[0].label == Symbol::HP) {
    attachments.push_back(&node->children[1]);
    node = &node->children[0];
  }
  std::reverse(attachments.begin(), attachments.end());
  const BasePhrase self = base_phrase(*node);

  std::vector<ActionDirective> out;
  if (attachments.empty()) {
    out.push_back({self.hand, std::nullopt, self.object, {}, CollaborationRole::None, std::nullopt, -1});
    return out;
  }

  int event = 0;
  for (const ActionTree* x : attachments) {
    const ActionTree& head = x->children[0];
    const ActionTree& rest = x->children[1];
    const ActionLabel label = parse_action(head.leaf.word);
    if (x->label == Symbol::AP) {
      ActionDirective d{self.hand, label, self.object, {}, CollaborationRole::None, std::nullopt, -1};
      if (rest.label == Symbol::HP) {
        const BasePhrase holder = base_phrase(rest);
        d.targets = {holder.object};
        d.role = CollaborationRole::Actor;
        d.partner = holder.hand;
        d.event = event;
        out.push_back(d);
        out.push_back({holder.hand, ActionLabel::Holding, holder.object, {}, CollaborationRole::Holder, self.hand,
                       event});
        ++event;
      } else {
        d.targets = leaves(rest);
        out.push_back(std::move(d));
      }
    } else {
      const BasePhrase other = base_phrase(rest);
      if (label == ActionLabel::Handover) {
        out.push_back({self.hand, label, self.object, {}, CollaborationRole::Giver, other.hand, event});
        out.push_back({other.hand, label, other.object, {}, CollaborationRole::Receiver, self.hand, event});
      } else {
        out.push_back({self.hand, label, self.object, {}, CollaborationRole::Holder, other.hand, event});
        out.push_back({other.hand, label, other.object, {}, CollaborationRole::Holder, self.hand, event});
      }
      ++event;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Trees file

std::vector<TreeRecord> trees_from_segments(std::span<const RecognizedSegment> segments) {
  std::vector<TreeRecord> out;
  for (const auto& seg : segments) {
    bool any = false;
    for (const auto& h : seg.hands) {
      auto sentence = build_sentence(seg, h.hand);
      if (!sentence) continue;
      out.push_back({seg.id, seg.span, h.hand, parse(*sentence)});
      any = true;
    }
    if (!any) out.push_back({seg.id, seg.span, std::nullopt, std::nullopt});
  }
  return out;
}

namespace {

void bind_leaves(ActionTree& tree, const std::vector<std::pair<std::string, std::optional<ObjectClass>>>& bindings,
                 std::size_t& next) {
  if (tree.is_leaf()) {
    if (tree.label != Symbol::O) return;
    if (next >= bindings.size()) throw InputError("fewer bindings than object leaves");
    tree.leaf.id = bindings[next].first;
    tree.leaf.cls = bindings[next].second;
    ++next;
    return;
  }
  for (auto& c : tree.children) bind_leaves(c, bindings, next);
}

std::vector<std::string> split(const std::string& text, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream in(text);
  while (std::getline(in, cur, sep)) out.push_back(cur);
  if (!text.empty() && text.back() == sep) out.emplace_back();
  return out;
}

}  // namespace

void write_trees(std::span<const TreeRecord> records, std::ostream& out) {
  for (const auto& r : records) {
    out << r.segment << '\t' << r.span.begin << '\t' << r.span.end << '\t';
    if (!r.tree || !r.hand) {
      out << "-\t-\t-\n";
      continue;
    }
    out << r.hand->str() << '\t';
    std::string bindings;
    for (const auto& t : leaves(*r.tree)) {
      if (t.kind != Symbol::O) continue;
      if (!bindings.empty()) bindings += ',';
      bindings += t.id.empty() ? t.word : t.id;
      if (t.cls) bindings += ":" + std::string(to_string(*t.cls));
    }
    out << (bindings.empty() ? "-" : bindings) << '\t' << to_sexpr(*r.tree) << '\n';
  }
}

std::vector<TreeRecord> parse_trees(std::istream& in) {
  std::vector<TreeRecord> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    const auto cols = split(line, '\t');
    try {
      if (cols.size() != 6) throw InputError("expected 6 tab-separated columns");
      TreeRecord r;
      r.segment = std::stoi(cols[0]);
      r.span = {std::stoll(cols[1]), std::stoll(cols[2])};
      if (r.span.end < r.span.begin) throw InputError("segment end before start");
      if (cols[3] != "-") {
        r.hand = HandKey::parse(cols[3]);
        ActionTree tree = parse_sexpr(cols[5]);
        std::vector<std::pair<std::string, std::optional<ObjectClass>>> bindings;
        if (cols[4] != "-") {
          for (const auto& b : split(cols[4], ',')) {
            const auto colon = b.find(':');
            if (colon == std::string::npos) {
              bindings.emplace_back(b, std::nullopt);
            } else {
              bindings.emplace_back(b.substr(0, colon), parse_object_class(b.substr(colon + 1)));
            }
          }
        }
        std::size_t next = 0;
        bind_leaves(tree, bindings, next);
        if (next != bindings.size()) throw InputError("more bindings than object leaves");
        if (tree.children.empty() || tree.label != Symbol::HP) throw InputError("tree root must be HP");
        r.tree = std::move(tree);
      }
      out.push_back(std::move(r));
    } catch (const std::exception& e) {
      throw InputError("malformed tree record at line " + std::to_string(line_no) + ": " + e.what(), line_no);
    }
  }
  return out;
}

void save_trees(std::span<const TreeRecord> records, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  write_trees(records, out);
}

std::vector<TreeRecord> load_trees(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open trees file " + path.string());
  return parse_trees(in);
}

}  // namespace video2plan
