#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "video2plan/fixtures.hpp"
#include "video2plan/pipeline.hpp"

namespace fs = std::filesystem;
using namespace video2plan;

namespace {

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Writes to `path`, or to stdout when it is empty.
template <class Writer>
void emit(const std::string& path, Writer&& writer) {
  if (path.empty() || path == "-") {
    writer(std::cout);
    std::cout.flush();
    return;
  }
  const fs::path p(path);
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary);
  if (!out) throw Error("cannot write " + path);
  writer(out);
  if (!out) throw Error("error writing " + path);
  spdlog::info("wrote {}", path);
}

// Input problems keep their own type; anything that goes wrong afterwards
// is reported as a failure of `stage`.
template <class Fn>
auto compute(const std::string& stage, Fn&& fn) {
  try {
    return fn();
  } catch (const StageError&) {
    throw;
  } catch (const std::exception& e) {
    throw StageError(stage, e.what());
  }
}

struct SegmentFlags {
  std::optional<double> lambda;
  std::optional<double> min_gain;
  std::optional<int> max_k;
  std::optional<double> min_segment_s;

  void add(CLI::App* cmd) {
    cmd->add_option("--lambda", lambda, "covariance regularization (pixels^2)");
    cmd->add_option("--min-gain", min_gain, "relative gain needed to add a breakpoint");
    cmd->add_option("--max-k", max_k, "maximum breakpoints per hand chunk");
    cmd->add_option("--min-segment-s", min_segment_s, "shortest kept segment, seconds");
  }
  void apply(SegmentationConfig& cfg) const {
    if (lambda) cfg.lambda_reg = *lambda;
    if (min_gain) cfg.min_gain = *min_gain;
    if (max_k) cfg.max_breakpoints = *max_k;
    if (min_segment_s) cfg.min_segment_s = *min_segment_s;
  }
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Turn hand/object detections of a cooking video into a multi-agent robot plan"};
  app.require_subcommand(1);
  std::string log_level = "info";
  app.add_option("--log-level", log_level, "trace, debug, info, warn, error or off")
      ->envname("VIDEO2PLAN_LOG_LEVEL")
      ->check(CLI::IsMember({"trace", "debug", "info", "warn", "error", "critical", "off"}));

  std::string stream_path, lexicon_path, segments_path, assoc_path, table_path, recognized_path, trees_path,
      library_path, plan_path, durations_path, truth_path, out_path, dot_path;

  auto* validate = app.add_subcommand("validate", "check a detection stream against a lexicon");
  validate->add_option("--stream", stream_path)->required();
  validate->add_option("--lexicon", lexicon_path)->required();

  SegmentFlags seg_flags;
  bool per_person = false;
  std::string hand_timeline;
  auto* segment = app.add_subcommand("segment", "split the video into segments from hand trajectories");
  segment->add_option("--stream", stream_path)->required();
  segment->add_option("--lexicon", lexicon_path)->required();
  segment->add_option("--out", out_path, "segments file (stdout when omitted)");
  segment->add_flag("--per-person", per_person, "union boundaries per person instead of over the whole video");
  segment->add_option("--hand-timeline", hand_timeline, "also write hand,frame,segment_id CSV");
  seg_flags.add(segment);

  std::optional<double> tau;
  std::optional<int> persistence;
  auto* associate = app.add_subcommand("associate", "link hands to objects and objects to objects per segment");
  associate->add_option("--stream", stream_path)->required();
  associate->add_option("--segments", segments_path)->required();
  associate->add_option("--lexicon", lexicon_path)->required();
  associate->add_option("--out", out_path);
  associate->add_option("--tau", tau, "container/ingredient Jaccard threshold");
  associate->add_option("--persistence", persistence, "consecutive frames needed for a hand link");

  std::string general_path, recipe_path, actions_path;
  double epsilon = 1e-6;
  auto* corpus = app.add_subcommand("corpus-build", "count action/object co-occurrences in plain text");
  corpus->add_option("--general", general_path)->required();
  corpus->add_option("--recipe", recipe_path)->required();
  corpus->add_option("--actions", actions_path, "one action name per line")->required();
  corpus->add_option("--lexicon", lexicon_path, "object labels to count")->required();
  corpus->add_option("--epsilon", epsilon);
  corpus->add_option("--out", out_path);

  std::optional<double> handover_gap;
  auto* recognize = app.add_subcommand("recognize", "label each segment with an action");
  recognize->add_option("--associations", assoc_path)->required();
  recognize->add_option("--table", table_path)->required();
  recognize->add_option("--handover-gap-s", handover_gap);
  recognize->add_option("--out", out_path);

  auto* parse = app.add_subcommand("parse", "build action trees from recognized segments");
  parse->add_option("--recognized", recognized_path)->required();
  parse->add_option("--out", out_path);
  parse->add_option("--dot", dot_path, "directory for one graph file per tree");

  bool no_elide = false;
  auto* plan = app.add_subcommand("plan", "merge trees and build the motion-primitive graph");
  plan->add_option("--trees", trees_path)->required();
  plan->add_option("--library", library_path, "primitive templates (built-in defaults when omitted)");
  plan->add_option("--out", out_path);
  plan->add_option("--dot", dot_path);
  plan->add_flag("--no-elide", no_elide, "keep place/grasp between same-tool actions");

  auto* simulate = app.add_subcommand("simulate", "execute a plan on a logical clock");
  simulate->add_option("--plan", plan_path)->required();
  simulate->add_option("--durations", durations_path);
  simulate->add_option("--trace", out_path);

  std::string timeline_path;
  auto* eval = app.add_subcommand("eval", "compare predicted trees against ground truth");
  eval->add_option("--pred", trees_path)->required();
  eval->add_option("--truth", truth_path)->required();
  eval->add_option("--report", out_path);
  eval->add_option("--timeline", timeline_path, "agent,frame,predicted,truth CSV");

  std::string config_path, output_dir;
  bool no_simulate = false, no_eval = false;
  auto* run_cmd = app.add_subcommand("run", "run every stage from a config file");
  run_cmd->add_option("--config", config_path)->required();
  run_cmd->add_option("--out", output_dir, "output directory (overrides the config)");
  run_cmd->add_option("--table", table_path);
  run_cmd->add_option("--library", library_path);
  run_cmd->add_option("--durations", durations_path);
  run_cmd->add_option("--truth", truth_path);
  run_cmd->add_option("--tau", tau);
  run_cmd->add_option("--handover-gap-s", handover_gap);
  run_cmd->add_flag("--no-simulate", no_simulate);
  run_cmd->add_flag("--no-eval", no_eval);
  SegmentFlags run_seg_flags;
  run_seg_flags.add(run_cmd);

  std::string fixture_name;
  bool list_fixtures = false, all_fixtures = false;
  auto* fixture = app.add_subcommand("fixture", "write a synthetic scenario with its inputs and truth");
  fixture->add_option("--name", fixture_name);
  fixture->add_option("--out", out_path, "target directory");
  fixture->add_flag("--list", list_fixtures);
  fixture->add_flag("--all", all_fixtures, "write every fixture into <out>/<name>");

  auto* version = app.add_subcommand("version", "print tool and config schema versions");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  auto logger = spdlog::stderr_color_mt("video2plan");
  spdlog::set_default_logger(logger);
  spdlog::set_pattern("%^%l%$: %v");
  spdlog::set_level(spdlog::level::from_str(log_level));

  try {
    if (*validate) {
      const auto stream = load_validated_stream(stream_path, lexicon_path);
      std::size_t hands = 0, objects = 0;
      for (const auto& f : stream.frames) {
        hands += f.hands.size();
        objects += f.objects.size();
      }
      spdlog::info("{} frames at {} fps, {} hand and {} object detections", stream.frames.size(), stream.fps, hands,
                   objects);
      std::cout << "ok\n";
    } else if (*segment) {
      const auto stream = load_validated_stream(stream_path, lexicon_path);
      SegmentationConfig cfg;
      seg_flags.apply(cfg);
      const auto result = compute("segment", [&] {
        cfg.validate();
        return segment_stream(stream, cfg);
      });
      if (per_person) {
        // One file per person: segments_P1.txt, segments_P2.txt, ...
        const fs::path base = out_path.empty() ? fs::path("segments.txt") : fs::path(out_path);
        for (const auto& [person, segments] : segment_stream_per_person(stream, cfg)) {
          const fs::path p = base.parent_path() / (base.stem().string() + "_" + person + base.extension().string());
          emit(p.string(), [&](std::ostream& o) { write_segments(segments, o); });
        }
      } else {
        spdlog::info("{} segments", result.segments.size());
        emit(out_path, [&](std::ostream& o) { write_segments(result.segments, o); });
      }
      if (!hand_timeline.empty()) emit(hand_timeline, [&](std::ostream& o) { write_hand_timeline(result, o); });
    } else if (*associate) {
      const auto stream = load_validated_stream(stream_path, lexicon_path);
      const auto segments = load_segments(segments_path);
      AssociationConfig cfg;
      if (tau) cfg.tau = *tau;
      if (persistence) cfg.persistence = *persistence;
      const AssociationFile file{stream.fps, compute("associate", [&] { return associate_stream(stream, segments, cfg); })};
      emit(out_path, [&](std::ostream& o) { write_associations(file, o); });
    } else if (*corpus) {
      const std::string general = read_text(general_path);
      const std::string recipe = read_text(recipe_path);
      std::vector<ActionLabel> actions;
      std::istringstream lines(read_text(actions_path));
      std::string line;
      while (std::getline(lines, line)) {
        const auto b = line.find_first_not_of(" \t\r");
        if (b == std::string::npos || line[b] == '#') continue;
        const auto e = line.find_last_not_of(" \t\r");
        actions.push_back(parse_action(line.substr(b, e - b + 1)));
      }
      std::vector<std::string> labels;
      for (const auto& [label, cls] : load_lexicon(lexicon_path).entries()) labels.push_back(label);
      const auto built = compute("corpus-build", [&] { return build_bigram_table(general, recipe, actions, labels, epsilon); });
      for (const auto& w : built.warnings) spdlog::warn("{}", w);
      emit(out_path, [&](std::ostream& o) { write_bigram_table(built.table, o); });
    } else if (*recognize) {
      const auto file = load_associations(assoc_path);
      const auto table = load_bigram_table(table_path);
      RecognizeConfig cfg;
      if (handover_gap) cfg.handover_gap_s = *handover_gap;
      const auto recognized = compute("recognize", [&] { return recognize_segments(file.records, file.fps, table, cfg); });
      emit(out_path, [&](std::ostream& o) { write_recognized(recognized, o); });
    } else if (*parse) {
      const auto recognized = load_recognized(recognized_path);
      const auto trees = compute("parse", [&] { return run_parse_stage(recognized); });
      emit(out_path, [&](std::ostream& o) { write_trees(trees, o); });
      if (!dot_path.empty()) {
        fs::create_directories(dot_path);
        for (const auto& t : trees) {
          if (!t.tree || !t.hand) continue;
          const std::string name = "segment" + std::to_string(t.segment) + "_" + t.hand->str();
          emit((fs::path(dot_path) / (name + ".dot")).string(), [&](std::ostream& o) { o << to_dot(*t.tree, name); });
        }
      }
    } else if (*plan) {
      const auto trees = load_trees(trees_path);
      const auto library = library_path.empty() ? PrimitiveLibrary::defaults() : load_library(library_path);
      const auto graph = compute("plan", [&] {
        return build_graph(merge_segments(make_timeline(trees)), library, BuildOptions{!no_elide});
      });
      spdlog::info("{} primitives for {} agents", graph.nodes.size(), graph.agents.size());
      emit(out_path, [&](std::ostream& o) { write_plan(graph, o); });
      if (!dot_path.empty()) emit(dot_path, [&](std::ostream& o) { o << plan_to_dot(graph); });
    } else if (*simulate) {
      const auto graph = load_plan(plan_path);
      const auto durations = durations_path.empty() ? DurationModel{} : load_durations(durations_path);
      const auto trace = compute("simulate", [&] {
        auto t = run(graph, durations);
        const auto violations = check_trace(t, graph);
        if (!violations.empty()) throw Error("trace violates the plan: " + violations.front());
        return t;
      });
      spdlog::info("makespan {}", trace.makespan);
      emit(out_path, [&](std::ostream& o) { write_trace(trace, o); });
    } else if (*eval) {
      const auto trees = load_trees(trees_path);
      const auto truth = load_truth(truth_path);
      std::ostringstream report_text;
      const auto report = compute("eval", [&] { return run_eval_stage(trees, truth, report_text); });
      spdlog::info("precision {:.4f} recall {:.4f}", report.metrics.precision, report.metrics.recall);
      emit(out_path, [&](std::ostream& o) { o << report_text.str(); });
      if (!timeline_path.empty()) {
        const auto pred = predictions(merge_segments(make_timeline(trees)));
        const auto rows = timeline_export(pred, truth);
        emit(timeline_path, [&](std::ostream& o) { write_timeline_csv(rows, o); });
      }
    } else if (*run_cmd) {
      PipelineConfig cfg = load_config(config_path);
      if (!output_dir.empty()) cfg.output_dir = output_dir;
      if (!table_path.empty()) cfg.table = table_path;
      if (!library_path.empty()) cfg.library = library_path;
      if (!durations_path.empty()) cfg.durations = durations_path;
      if (!truth_path.empty()) cfg.truth = truth_path;
      if (tau) cfg.association.tau = *tau;
      if (handover_gap) cfg.recognition.handover_gap_s = *handover_gap;
      if (no_simulate) cfg.run_simulate = false;
      if (no_eval) cfg.run_eval = false;
      run_seg_flags.apply(cfg.segmentation);
      const auto manifest = run_pipeline(cfg, [](std::string_view stage, std::string_view msg) {
        spdlog::debug("[{}] {}", stage, msg);
      });
      for (const auto& o : manifest.outputs) spdlog::info("{:<10} {}", o.stage, (cfg.output_dir / o.path).string());
      for (const auto& [k, v] : manifest.metrics) spdlog::info("{} = {}", k, v);
    } else if (*fixture) {
      if (list_fixtures) {
        for (const auto& n : fixture_names()) std::cout << n << '\n';
        return 0;
      }
      if (out_path.empty()) throw InputError("fixture needs --out");
      std::vector<std::string> names;
      if (all_fixtures) names = fixture_names();
      else if (!fixture_name.empty()) names = {fixture_name};
      else throw InputError("fixture needs --name, --all or --list");
      for (const auto& n : names) {
        const Fixture f = make_fixture(n);
        const fs::path dir = all_fixtures ? fs::path(out_path) / n : fs::path(out_path);
        const auto files = write_fixture(f, dir);
        spdlog::info("{}: {} files in {}", n, files.size(), dir.string());
      }
    } else if (*version) {
      std::cout << version_info().str() << '\n';
    }
  } catch (const InputError& e) {
    spdlog::error("{}", e.what());
    return 1;
  } catch (const ParseError& e) {
    spdlog::error("{}", e.what());
    return 1;
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return 2;
  }
  return 0;
}
