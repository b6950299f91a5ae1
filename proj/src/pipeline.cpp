#include "video2plan/pipeline.hpp"

#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>

#include <openssl/evp.h>

#include <json.hpp>

namespace video2plan {

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

std::string VersionInfo::str() const { return tool + " " + version + " (config schema " + config_schema + ")"; }

VersionInfo version_info() { return {}; }

// ---------------------------------------------------------------------------
// Config

namespace {

void reject_unknown(const json& j, const std::set<std::string>& known, const std::string& where) {
  for (const auto& [k, v] : j.items()) {
    if (!known.count(k)) throw InputError("unknown key '" + k + "' in " + where);
  }
}

fs::path resolve(const fs::path& base, const std::string& p) {
  const fs::path path(p);
  return path.is_absolute() || base.empty() ? path : base / path;
}

}  // namespace

PipelineConfig parse_config(std::istream& in, const fs::path& base_dir) {
  PipelineConfig cfg;
  try {
    const json j = json::parse(in);
    reject_unknown(j,
                   {"schema", "stream", "lexicon", "table", "library", "durations", "truth", "output_dir",
                    "segmentation", "association", "recognition", "stages"},
                   "config");
    if (j.contains("schema") && j.at("schema").get<std::string>() != version_info().config_schema) {
      throw InputError("unsupported config schema '" + j.at("schema").get<std::string>() + "'");
    }
    cfg.stream = resolve(base_dir, j.at("stream").get<std::string>());
    cfg.lexicon = resolve(base_dir, j.at("lexicon").get<std::string>());
    cfg.table = resolve(base_dir, j.at("table").get<std::string>());
    if (j.contains("library")) cfg.library = resolve(base_dir, j.at("library").get<std::string>());
    if (j.contains("durations")) cfg.durations = resolve(base_dir, j.at("durations").get<std::string>());
    if (j.contains("truth")) cfg.truth = resolve(base_dir, j.at("truth").get<std::string>());
    if (j.contains("output_dir")) cfg.output_dir = resolve(base_dir, j.at("output_dir").get<std::string>());

    if (j.contains("segmentation")) {
      const auto& s = j.at("segmentation");
      reject_unknown(s,
                     {"lambda", "max_breakpoints", "min_gain", "min_segment_s", "boundary_merge_tol",
                      "max_interp_gap_s", "min_samples", "use_velocity"},
                     "segmentation");
      auto& c = cfg.segmentation;
      c.lambda_reg = s.value("lambda", c.lambda_reg);
      c.max_breakpoints = s.value("max_breakpoints", c.max_breakpoints);
      c.min_gain = s.value("min_gain", c.min_gain);
      c.min_segment_s = s.value("min_segment_s", c.min_segment_s);
      if (s.contains("boundary_merge_tol")) c.boundary_merge_tol = s.at("boundary_merge_tol").get<Frame>();
      c.max_interp_gap_s = s.value("max_interp_gap_s", c.max_interp_gap_s);
      c.min_samples = s.value("min_samples", c.min_samples);
      c.use_velocity = s.value("use_velocity", c.use_velocity);
    }
    if (j.contains("association")) {
      const auto& a = j.at("association");
      reject_unknown(a, {"hand_margin", "ingredient_cap_factor", "persistence", "tau"}, "association");
      auto& c = cfg.association;
      c.hand_margin = a.value("hand_margin", c.hand_margin);
      c.ingredient_cap_factor = a.value("ingredient_cap_factor", c.ingredient_cap_factor);
      if (a.contains("persistence")) c.persistence = a.at("persistence").get<int>();
      c.tau = a.value("tau", c.tau);
    }
    if (j.contains("recognition")) {
      const auto& r = j.at("recognition");
      reject_unknown(r, {"handover_gap_s", "deduplicate", "class_weights"}, "recognition");
      auto& c = cfg.recognition;
      c.handover_gap_s = r.value("handover_gap_s", c.handover_gap_s);
      c.options.deduplicate = r.value("deduplicate", c.options.deduplicate);
      if (r.contains("class_weights")) {
        for (const auto& [k, v] : r.at("class_weights").items()) c.options.class_weights[parse_object_class(k)] = v;
      }
    }
    if (j.contains("stages")) {
      const auto& s = j.at("stages");
      reject_unknown(s, {"simulate", "eval", "dot"}, "stages");
      cfg.run_simulate = s.value("simulate", cfg.run_simulate);
      cfg.run_eval = s.value("eval", cfg.run_eval);
      cfg.write_dot = s.value("dot", cfg.write_dot);
    }
  } catch (const json::exception& e) {
    throw InputError(std::string("malformed config: ") + e.what());
  }
  cfg.segmentation.validate();
  return cfg;
}

PipelineConfig load_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open config " + path.string());
  return parse_config(in, path.parent_path());
}

void write_config(const PipelineConfig& cfg, std::ostream& out) {
  ordered_json j;
  j["schema"] = version_info().config_schema;
  j["stream"] = cfg.stream.generic_string();
  j["lexicon"] = cfg.lexicon.generic_string();
  j["table"] = cfg.table.generic_string();
  if (cfg.library) j["library"] = cfg.library->generic_string();
  if (cfg.durations) j["durations"] = cfg.durations->generic_string();
  if (cfg.truth) j["truth"] = cfg.truth->generic_string();
  j["output_dir"] = cfg.output_dir.generic_string();
  const auto& s = cfg.segmentation;
  j["segmentation"] = {{"lambda", s.lambda_reg},          {"max_breakpoints", s.max_breakpoints},
                       {"min_gain", s.min_gain},          {"min_segment_s", s.min_segment_s},
                       {"max_interp_gap_s", s.max_interp_gap_s}, {"min_samples", s.min_samples},
                       {"use_velocity", s.use_velocity}};
  if (s.boundary_merge_tol) j["segmentation"]["boundary_merge_tol"] = *s.boundary_merge_tol;
  const auto& a = cfg.association;
  j["association"] = {{"hand_margin", a.hand_margin}, {"ingredient_cap_factor", a.ingredient_cap_factor}, {"tau", a.tau}};
  if (a.persistence) j["association"]["persistence"] = *a.persistence;
  j["recognition"] = {{"handover_gap_s", cfg.recognition.handover_gap_s},
                      {"deduplicate", cfg.recognition.options.deduplicate}};
  if (!cfg.recognition.options.class_weights.empty()) {
    ordered_json w = ordered_json::object();
    for (const auto& [c, v] : cfg.recognition.options.class_weights) w[std::string(to_string(c))] = v;
    j["recognition"]["class_weights"] = w;
  }
  j["stages"] = {{"simulate", cfg.run_simulate}, {"eval", cfg.run_eval}, {"dot", cfg.write_dot}};
  out << j.dump(2) << '\n';
}

void check_config(const PipelineConfig& cfg) {
  auto require = [](const fs::path& p, const char* what) {
    if (p.empty()) throw InputError(std::string("config: no ") + what + " path given");
    if (!fs::exists(p)) throw InputError(std::string("config: ") + what + " not found: " + p.string());
  };
  require(cfg.stream, "stream");
  require(cfg.lexicon, "lexicon");
  require(cfg.table, "table");
  if (cfg.library) require(*cfg.library, "primitive library");
  if (cfg.durations) require(*cfg.durations, "durations");
  if (cfg.truth) require(*cfg.truth, "truth");
  cfg.segmentation.validate();
}

// ---------------------------------------------------------------------------
// Hashing

std::string sha256_hex(std::string_view data) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
    throw Error("sha256 failed");
  }
  std::ostringstream out;
  for (unsigned int i = 0; i < len; ++i) out << std::hex << std::setw(2) << std::setfill('0') << int(digest[i]);
  return out.str();
}

std::string sha256_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot read " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return sha256_hex(buf.str());
}

// ---------------------------------------------------------------------------
// Stages

DetectionStream load_validated_stream(const fs::path& stream, const fs::path& lexicon) {
  DetectionStream s = load_stream(stream, lexicon);
  validate_stream(s);
  return s;
}

SegmentSequence run_segment_stage(const DetectionStream& stream, const SegmentationConfig& cfg) {
  return segment_stream(stream, cfg).segments;
}

std::vector<TreeRecord> run_parse_stage(std::span<const RecognizedSegment> recognized) {
  return trees_from_segments(recognized);
}

ActionGraph run_plan_stage(std::span<const TreeRecord> trees, const PrimitiveLibrary& lib) {
  return build_graph(merge_segments(make_timeline(trees)), lib);
}

MatchReport run_eval_stage(std::span<const TreeRecord> trees, std::span<const LabeledTree> truth,
                           std::ostream& report_out) {
  const auto pred = predictions(merge_segments(make_timeline(trees)));
  MatchReport report = match_trees(pred, truth);
  const auto [p_labels, t_labels] = aligned_labels(pred, truth);
  std::set<std::string> label_set(p_labels.begin(), p_labels.end());
  label_set.insert(t_labels.begin(), t_labels.end());
  const std::vector<std::string> labels(label_set.begin(), label_set.end());
  write_report(report, confusion_matrix(p_labels, t_labels, labels), report_out);
  return report;
}

namespace {

template <class Fn>
auto stage(const std::string& name, const ProgressFn& progress, Fn&& fn) {
  if (progress) progress(name, "start");
  try {
    return fn();
  } catch (const StageError&) {
    throw;
  } catch (const std::exception& e) {
    throw StageError(name, e.what());
  }
}

template <class Writer>
void write_file(const fs::path& path, Writer&& writer) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  writer(out);
  if (!out) throw Error("error writing " + path.string());
}

}  // namespace

Manifest run_pipeline(const PipelineConfig& cfg, const ProgressFn& progress) {
  check_config(cfg);
  const BigramTable table = load_bigram_table(cfg.table);
  const PrimitiveLibrary library = cfg.library ? load_library(*cfg.library) : PrimitiveLibrary::defaults();
  const DurationModel durations = cfg.durations ? load_durations(*cfg.durations) : DurationModel{};

  if (progress) progress("validate", "start");
  // Input problems surface here as InputError, before any output is written.
  const DetectionStream stream = load_validated_stream(cfg.stream, cfg.lexicon);

  const fs::path dir = cfg.output_dir;
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw StageError("validate", "cannot create output directory " + dir.string());

  Manifest m;
  auto record = [&](const std::string& name, const std::string& file) {
    m.outputs.push_back({name, file, sha256_file(dir / file)});
    if (progress) progress(name, "wrote " + file);
  };

  stage("segment", progress, [&] {
    const auto segments = run_segment_stage(stream, cfg.segmentation);
    write_file(dir / "segments.txt", [&](std::ostream& o) { write_segments(segments, o); });
    m.metrics["segments"] = static_cast<double>(segments.size());
    return 0;
  });
  record("segment", "segments.txt");

  stage("associate", progress, [&] {
    const auto segments = load_segments(dir / "segments.txt");
    AssociationFile file{stream.fps, associate_stream(stream, segments, cfg.association)};
    write_file(dir / "associations.jsonl", [&](std::ostream& o) { write_associations(file, o); });
    return 0;
  });
  record("associate", "associations.jsonl");

  stage("recognize", progress, [&] {
    const auto file = load_associations(dir / "associations.jsonl");
    const auto recognized = recognize_segments(file.records, file.fps, table, cfg.recognition);
    write_file(dir / "recognized.jsonl", [&](std::ostream& o) { write_recognized(recognized, o); });
    return 0;
  });
  record("recognize", "recognized.jsonl");

  stage("parse", progress, [&] {
    const auto recognized = load_recognized(dir / "recognized.jsonl");
    const auto trees = run_parse_stage(recognized);
    write_file(dir / "trees.tsv", [&](std::ostream& o) { write_trees(trees, o); });
    std::size_t n = 0;
    for (const auto& t : trees) n += t.tree.has_value();
    m.metrics["trees"] = static_cast<double>(n);
    return 0;
  });
  record("parse", "trees.tsv");

  stage("plan", progress, [&] {
    const auto trees = load_trees(dir / "trees.tsv");
    const auto merged = merge_segments(make_timeline(trees));
    const auto graph = build_graph(merged, library);
    write_file(dir / "plan.json", [&](std::ostream& o) { write_plan(graph, o); });
    if (cfg.write_dot) write_file(dir / "plan.dot", [&](std::ostream& o) { o << plan_to_dot(graph); });
    m.metrics["merged_entries"] = static_cast<double>(merged.size());
    m.metrics["plan_nodes"] = static_cast<double>(graph.nodes.size());
    return 0;
  });
  record("plan", "plan.json");
  if (cfg.write_dot) record("plan", "plan.dot");

  if (cfg.run_simulate) {
    stage("simulate", progress, [&] {
      const auto graph = load_plan(dir / "plan.json");
      const auto trace = run(graph, durations);
      const auto violations = check_trace(trace, graph);
      if (!violations.empty()) throw Error("trace violates the plan: " + violations.front());
      write_file(dir / "trace.csv", [&](std::ostream& o) { write_trace(trace, o); });
      m.metrics["makespan"] = trace.makespan;
      return 0;
    });
    record("simulate", "trace.csv");
  }

  if (cfg.run_eval && cfg.truth) {
    stage("eval", progress, [&] {
      const auto trees = load_trees(dir / "trees.tsv");
      const auto truth = load_truth(*cfg.truth);
      MatchReport report;
      write_file(dir / "report.json", [&](std::ostream& o) { report = run_eval_stage(trees, truth, o); });
      m.metrics["precision"] = report.metrics.precision;
      m.metrics["recall"] = report.metrics.recall;
      return 0;
    });
    record("eval", "report.json");
  }

  write_file(dir / "manifest.json", [&](std::ostream& o) { write_manifest(m, o); });
  return m;
}

void write_manifest(const Manifest& m, std::ostream& out) {
  ordered_json j;
  j["tool"] = m.version.tool;
  j["version"] = m.version.version;
  j["config_schema"] = m.version.config_schema;
  j["outputs"] = ordered_json::array();
  for (const auto& o : m.outputs) {
    j["outputs"].push_back({{"stage", o.stage}, {"path", o.path.generic_string()}, {"sha256", o.sha256}});
  }
  j["metrics"] = ordered_json::object();
  for (const auto& [k, v] : m.metrics) j["metrics"][k] = v;
  out << j.dump(2) << '\n';
}

}  // namespace video2plan
