#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <iostream>
#include <numeric>
#include <set>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "support.hpp"

using namespace video2plan;
using namespace testing;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct Outcome {
  bool pass = true;
  std::string detail;

  void require(bool ok, const std::string& what) {
    if (!ok && pass) detail = what;
    pass = pass && ok;
  }
};

Outcome worked_example() {
  Outcome o;
  const auto table = worked_example_table();
  const std::vector<WordObservation> words{{"knife", ObjectClass::Tool}, {"onion", ObjectClass::Ingredient}};
  const auto t0 = Clock::now();
  const auto r = recognize_individual(words, table);
  const double elapsed = seconds_since(t0);
  o.require(r.action == ActionLabel::Cut, "recognized " + std::string(to_string(r.action)));
  o.require(elapsed < 1e-3, "took " + std::to_string(elapsed * 1e3) + " ms");
  o.detail = o.pass ? "cut in " + std::to_string(elapsed * 1e6) + " us" : o.detail;
  return o;
}

Outcome metric_arithmetic() {
  Outcome o;
  struct Row {
    std::size_t detected, correct, truth;
    double precision, recall;
  };
  // printed values carry two decimals, 0.625 prints as 0.63
  const double tol = 0.005 + 1e-9;
  for (const Row& r : {Row{24, 16, 32, 0.67, 0.50}, Row{24, 14, 37, 0.58, 0.38}, Row{48, 30, 70, 0.63, 0.43}}) {
    const auto m = precision_recall(r.detected, r.correct, r.truth);
    const std::string tag = std::to_string(r.detected) + "/" + std::to_string(r.correct) + "/" + std::to_string(r.truth);
    o.require(std::abs(m.precision - r.precision) <= tol, tag + " precision " + std::to_string(m.precision));
    o.require(std::abs(m.recall - r.recall) <= tol, tag + " recall " + std::to_string(m.recall));
  }
  return o;
}

Outcome segmentation() {
  Outcome o;
  const auto t0 = Clock::now();
  for (std::uint64_t seed : {1, 2, 3}) {
    const auto x = oracles::piecewise_series(900, {300, 600}, 3.0, seed);
    std::vector<Frame> frames(900);
    std::iota(frames.begin(), frames.end(), 0);
    const auto r = ggs_breakpoints(x, frames, {});
    for (Frame truth : {300, 600}) {
      bool found = false;
      for (Frame b : r.breakpoints) found |= std::abs(b - truth) <= 5;
      o.require(found, "seed " + std::to_string(seed) + " missed " + std::to_string(truth));
    }
  }
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    std::mt19937_64 rng(seed);
    const int T = std::uniform_int_distribution<int>(30, 60)(rng);
    const Frame b1 = std::uniform_int_distribution<int>(8, T / 2 - 4)(rng);
    const Frame b2 = std::uniform_int_distribution<int>(T / 2 + 4, T - 8)(rng);
    const auto x = oracles::piecewise_series(T, {b1, b2}, 3.0, seed);
    std::vector<Frame> frames(static_cast<std::size_t>(T));
    std::iota(frames.begin(), frames.end(), 0);
    SegmentationConfig cfg;
    cfg.max_breakpoints = 2;
    const auto greedy = ggs_breakpoints(x, frames, cfg);
    std::vector<Eigen::Index> idx(greedy.indices.begin(), greedy.indices.end());
    const double g = oracles::objective(x, idx, cfg.lambda_reg);
    const double exact = oracles::dp_optimum(x, static_cast<int>(idx.size()), cfg.lambda_reg, cfg.min_samples);
    o.require(std::abs(g - exact) <= 0.01 * std::abs(exact), "greedy off the optimum for seed " + std::to_string(seed));
  }
  const double elapsed = seconds_since(t0);
  o.require(elapsed < 5, "took " + std::to_string(elapsed) + " s");
  return o;
}

Outcome grammar() {
  Outcome o;
  const auto t0 = Clock::now();
  for (const auto& s : success_scenarios()) {
    o.require(to_sexpr(parse(s.sentence)) == s.tree, s.name + " parsed differently");
  }
  std::mt19937_64 rng(2024);
  for (int i = 0; i < 1000; ++i) {
    const auto tree = parse(random_sentence(rng));
    o.require(parse(unparse(tree)) == tree, "round trip " + std::to_string(i));
  }
  for (const auto& s : success_scenarios()) {
    auto sentence = s.sentence;
    sentence.insert(sentence.begin(), A(ActionLabel::Cut));
    o.require(first_error(sentence) == std::size_t{0}, s.name + " accepted with a leading action");
  }
  const double elapsed = seconds_since(t0);
  o.require(elapsed < 1, "took " + std::to_string(elapsed) + " s");
  return o;
}

ActionGraph fixture_plan(const Fixture& fx) {
  const auto segs = run_segment_stage(fx.stream, {});
  const auto rec = recognize_segments(associate_stream(fx.stream, segs), fx.stream.fps, kitchen_mini_table());
  return run_plan_stage(run_parse_stage(rec), PrimitiveLibrary::defaults());
}

Outcome plan_semantics() {
  Outcome o;
  const auto g = build_graph(merge_segments(cut_then_spread_timeline()), PrimitiveLibrary::defaults());
  o.require(g.nodes.size() == 6, "cut then spread has " + std::to_string(g.nodes.size()) + " primitives");
  for (const auto& name : fixture_names()) {
    const auto plan = fixture_plan(make_fixture(name));
    try {
      validate_graph(plan);
    } catch (const PlanError& e) {
      o.require(false, name + ": " + e.what());
      continue;
    }
    const auto trace = run(plan);
    o.require(check_trace(trace, plan).empty(), name + " trace violates the plan");
    o.require(trace.makespan == oracles::longest_path(plan, DurationModel{}), name + " makespan off the longest path");
    for (const auto& [engage, release] : plan.sync_edges) {
      double engage_end = -1, release_start = -1;
      for (const auto& e : trace.events) {
        if (e.node == engage && e.phase == Phase::End) engage_end = e.time;
        if (e.node == release && e.phase == Phase::Start) release_start = e.time;
      }
      o.require(engage_end >= 0 && engage_end <= release_start, name + " exchange out of order");
    }
  }
  return o;
}

Outcome fixtures(const std::filesystem::path& golden) {
  Outcome o;
  for (const auto& name : fixture_names()) {
    const auto fx = make_fixture(name);
    const auto dir = temp_dir("acceptance_" + name);
    write_fixture(fx, dir);
    const auto cfg = load_config(dir / "config.json");
    run_pipeline(cfg);
    std::set<std::string> trees;
    for (const auto& rec : load_trees(cfg.output_dir / "trees.tsv")) {
      if (rec.tree) trees.insert(to_sexpr(*rec.tree));
    }
    for (const auto& t : fx.expected_trees) o.require(trees.count(t) == 1, name + " lacks " + t);
    for (const auto& t : fx.missing_trees) o.require(trees.count(t) == 0, name + " emits " + t);
    for (const char* file : {"trees.tsv", "plan.json"}) {
      o.require(read_file(cfg.output_dir / file) == read_file(golden / name / file),
                name + "/" + file + " differs from golden");
    }
  }
  return o;
}

Outcome test_suites(const std::vector<std::string>& binaries) {
  Outcome o;
  const auto t0 = Clock::now();
  for (const auto& bin : binaries) {
    const std::string cmd = "\"" + bin + "\" --minimal > /dev/null 2>&1";
    o.require(std::system(cmd.c_str()) == 0, std::filesystem::path(bin).filename().string() + " failed");
  }
  const double elapsed = seconds_since(t0);
  o.require(elapsed < 60, "took " + std::to_string(elapsed) + " s");
  if (o.pass) o.detail = std::to_string(elapsed) + " s";
  return o;
}

// Each fixture contributes its full object set and one tool with one other
// object from that set.
std::vector<std::vector<WordObservation>> mini_benchmark() {
  const auto lexicon = kitchen_lexicon();
  std::vector<std::vector<WordObservation>> all, pairs;
  for (const auto& name : fixture_names()) {
    std::vector<WordObservation> words;
    std::set<std::string> seen;
    for (const auto& obj : make_fixture(name).script.objects) {
      if (seen.insert(obj.label).second) words.push_back({obj.label, lexicon.class_of(obj.label)});
    }
    all.push_back(words);
    auto tool = std::find_if(words.begin(), words.end(), [](const auto& w) { return w.cls == ObjectClass::Tool; });
    if (tool == words.end()) tool = words.begin();
    auto other = std::find_if(words.begin(), words.end(), [&](const auto& w) { return w.label != tool->label; });
    pairs.push_back(other == words.end() ? std::vector{*tool} : std::vector{*tool, *other});
  }
  all.insert(all.end(), pairs.begin(), pairs.end());
  return all;
}

Outcome recognition_benchmark() {
  Outcome o;
  const auto table = kitchen_mini_table();
  const auto instances = mini_benchmark();
  std::size_t agree = 0;
  for (const auto& words : instances) {
    agree += recognize_individual(words, table).action == oracles::naive_bayes(words, table, true).first;
  }
  o.require(instances.size() == 20, std::to_string(instances.size()) + " instances");
  o.require(agree == instances.size(), std::to_string(agree) + "/" + std::to_string(instances.size()) + " agree");
  if (o.pass) o.detail = std::to_string(agree) + "/20 agree";
  return o;
}

}  // namespace

int main(int argc, char** argv) {
  if (argc < 2) {
    std::cerr << "usage: acceptance <golden-dir> [test-binary...]\n";
    return 2;
  }
  const std::filesystem::path golden = argv[1];
  const std::vector<std::string> binaries(argv + 2, argv + argc);

  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"worked example", worked_example},
      {"metric arithmetic", metric_arithmetic},
      {"segmentation recovery", segmentation},
      {"grammar", grammar},
      {"plan semantics", plan_semantics},
      {"end-to-end fixtures", [&] { return fixtures(golden); }},
      {"test suites", [&] { return test_suites(binaries); }},
      {"recognition mini-benchmark", recognition_benchmark},
  };

  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail = e.what();
    }
    failed += !o.pass;
    std::printf("%s %zu %s%s%s\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first.c_str(),
                o.detail.empty() ? "" : ": ", o.detail.c_str());
  }
  return failed == 0 ? 0 : 1;
}
