#include "video2plan/evalkit.hpp"

#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

#include <json.hpp>

namespace video2plan {

std::string_view to_string(FailureType f) {
  switch (f) {
    case FailureType::ActionRecognition: return "A";
    case FailureType::HandObject: return "HO";
    case FailureType::ObjectObject: return "OO";
  }
  return "A";
}

FailureType parse_failure(std::string_view text) {
  if (text == "A") return FailureType::ActionRecognition;
  if (text == "HO") return FailureType::HandObject;
  if (text == "OO") return FailureType::ObjectObject;
  throw InputError("unknown failure type '" + std::string(text) + "'");
}

std::vector<LabeledTree> predictions(const Timeline& merged) {
  std::vector<LabeledTree> out;
  for (const auto& run : hand_runs(merged)) {
    if (action_label(run.tree) == "grasp") continue;  // a bare grasp is not an action
    out.push_back({run.span, run.hand.person, run.tree, std::nullopt});
  }
  return out;
}

std::vector<LabeledTree> parse_truth(std::istream& in) {
  std::vector<LabeledTree> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    std::vector<std::string> cols;
    std::istringstream s(line);
    for (std::string c; std::getline(s, c, '\t');) cols.push_back(c);
    try {
      if (cols.size() != 4 && cols.size() != 5) throw InputError("expected 4 or 5 tab-separated columns");
      LabeledTree t;
      t.span = {std::stoll(cols[0]), std::stoll(cols[1])};
      if (t.span.end <= t.span.begin) throw InputError("empty span");
      t.agent = cols[2];
      t.tree = parse_sexpr(cols[3]);
      if (cols.size() == 5 && !cols[4].empty()) t.failure = parse_failure(cols[4]);
      out.push_back(std::move(t));
    } catch (const std::exception& e) {
      throw InputError("malformed truth row at line " + std::to_string(line_no) + ": " + e.what(), line_no);
    }
  }
  return out;
}

std::vector<LabeledTree> load_truth(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open truth file " + path.string());
  return parse_truth(in);
}

void write_truth(std::span<const LabeledTree> truth, std::ostream& out) {
  for (const auto& t : truth) {
    out << t.span.begin << '\t' << t.span.end << '\t' << t.agent << '\t' << to_sexpr(t.tree);
    if (t.failure) out << '\t' << to_string(*t.failure);
    out << '\n';
  }
}

Metrics precision_recall(std::size_t detected, std::size_t correct, std::size_t truth) {
  if (correct > detected || correct > truth) throw std::invalid_argument("correct count exceeds detected or truth");
  Metrics m;
  m.no_detections = detected == 0;
  m.precision = detected == 0 ? 0.0 : static_cast<double>(correct) / static_cast<double>(detected);
  m.recall = truth == 0 ? 0.0 : static_cast<double>(correct) / static_cast<double>(truth);
  return m;
}

MatchReport match_trees(std::span<const LabeledTree> pred, std::span<const LabeledTree> truth) {
  std::vector<std::size_t> order(pred.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return std::tie(pred[a].span, pred[a].agent) < std::tie(pred[b].span, pred[b].agent);
  });

  MatchReport r;
  r.detected = pred.size();
  r.truth = truth.size();
  std::vector<bool> used(truth.size(), false);
  for (std::size_t p : order) {
    std::optional<std::size_t> best;
    Frame best_overlap = 0;
    for (std::size_t t = 0; t < truth.size(); ++t) {
      if (used[t] || !(truth[t].tree == pred[p].tree)) continue;
      const Frame ov = overlap(truth[t].span, pred[p].span);
      if (ov > best_overlap) {
        best = t;
        best_overlap = ov;
      }
    }
    if (best) {
      used[*best] = true;
      r.matches.push_back({p, *best});
    }
  }
  r.correct = r.matches.size();
  r.metrics = precision_recall(r.detected, r.correct, r.truth);
  for (std::size_t t = 0; t < truth.size(); ++t) {
    if (!used[t] && truth[t].failure) ++r.failures[*truth[t].failure];
  }
  return r;
}

double ConfusionMatrix::at(const std::string& truth, const std::string& pred) const {
  const auto row = std::find(labels.begin(), labels.end(), truth);
  const auto col = std::find(labels.begin(), labels.end(), pred);
  if (row == labels.end() || col == labels.end()) throw std::out_of_range("label not in confusion matrix");
  return values[static_cast<std::size_t>(row - labels.begin())][static_cast<std::size_t>(col - labels.begin())];
}

ConfusionMatrix confusion_matrix(std::span<const std::string> pred, std::span<const std::string> truth,
                                 std::span<const std::string> labels, bool normalize) {
  if (pred.size() != truth.size()) throw std::invalid_argument("confusion_matrix: label lists differ in length");
  ConfusionMatrix m;
  m.labels.assign(labels.begin(), labels.end());
  const std::size_t n = m.labels.size();
  m.values.assign(n, std::vector<double>(n, 0.0));
  auto index = [&](const std::string& l) {
    const auto it = std::find(m.labels.begin(), m.labels.end(), l);
    if (it == m.labels.end()) throw std::invalid_argument("confusion_matrix: label '" + l + "' not in label set");
    return static_cast<std::size_t>(it - m.labels.begin());
  };
  for (std::size_t i = 0; i < pred.size(); ++i) m.values[index(truth[i])][index(pred[i])] += 1;
  if (normalize) {
    for (auto& row : m.values) {
      const double total = std::accumulate(row.begin(), row.end(), 0.0);
      if (total > 0) {
        for (auto& v : row) v /= total;
      }
    }
  }
  return m;
}

std::string action_label(const ActionTree& tree) {
  for (const auto& t : leaves(tree)) {
    if (t.kind == Symbol::A || t.kind == Symbol::C) return t.word;
  }
  return "grasp";
}

namespace {

std::string root_hand(const ActionTree& tree) {
  const auto ls = leaves(tree);
  return ls.empty() ? std::string() : ls.front().word;
}

}  // namespace

std::pair<std::vector<std::string>, std::vector<std::string>> aligned_labels(std::span<const LabeledTree> pred,
                                                                             std::span<const LabeledTree> truth) {
  std::vector<std::string> p_out, t_out;
  for (const auto& t : truth) {
    const std::string hand = root_hand(t.tree);
    const LabeledTree* best = nullptr;
    Frame best_overlap = 0;
    for (const auto& p : pred) {
      if (root_hand(p.tree) != hand) continue;
      const Frame ov = overlap(p.span, t.span);
      if (ov > best_overlap) {
        best = &p;
        best_overlap = ov;
      }
    }
    t_out.push_back(action_label(t.tree));
    p_out.push_back(best ? action_label(best->tree) : "none");
  }
  return {p_out, t_out};
}

std::vector<TimelineRow> timeline_export(std::span<const LabeledTree> pred, std::span<const LabeledTree> truth) {
  std::map<std::string, std::map<Frame, std::pair<std::string, std::string>>> grid;
  for (const auto& p : pred) {
    auto& rows = grid[p.agent];
    for (Frame f = p.span.begin; f < p.span.end; ++f) {
      auto& cell = rows.try_emplace(f, "none", "none").first->second;
      if (cell.first == "none") cell.first = action_label(p.tree);
    }
  }
  for (const auto& t : truth) {
    auto& rows = grid[t.agent];
    for (Frame f = t.span.begin; f < t.span.end; ++f) {
      auto& cell = rows.try_emplace(f, "none", "none").first->second;
      if (cell.second == "none") cell.second = action_label(t.tree);
    }
  }
  std::vector<TimelineRow> out;
  for (const auto& [agent, rows] : grid) {
    for (const auto& [frame, cell] : rows) out.push_back({agent, frame, cell.first, cell.second});
  }
  return out;
}

void write_timeline_csv(std::span<const TimelineRow> rows, std::ostream& out) {
  out << "agent,frame,predicted,truth\n";
  for (const auto& r : rows) out << r.agent << ',' << r.frame << ',' << r.predicted << ',' << r.truth << '\n';
}

void write_report(const MatchReport& report, const ConfusionMatrix& confusion, std::ostream& out) {
  nlohmann::ordered_json j;
  j["detected"] = report.detected;
  j["correct"] = report.correct;
  j["truth"] = report.truth;
  j["precision"] = report.metrics.precision;
  j["recall"] = report.metrics.recall;
  j["no_detections"] = report.metrics.no_detections;
  j["matches"] = nlohmann::ordered_json::array();
  for (const auto& [p, t] : report.matches) j["matches"].push_back({p, t});
  j["failures"] = nlohmann::ordered_json::object();
  for (auto f : {FailureType::ActionRecognition, FailureType::HandObject, FailureType::ObjectObject}) {
    auto it = report.failures.find(f);
    j["failures"][std::string(to_string(f))] = it == report.failures.end() ? 0 : it->second;
  }
  j["confusion"] = {{"labels", confusion.labels}, {"rows", confusion.values}};
  out << j.dump(2) << '\n';
}

}  // namespace video2plan
