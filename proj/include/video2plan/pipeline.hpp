#pragma once

#include <filesystem>
#include <functional>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "video2plan/associate.hpp"
#include "video2plan/evalkit.hpp"
#include "video2plan/recognize.hpp"
#include "video2plan/segment.hpp"
#include "video2plan/simulate.hpp"

namespace video2plan {

struct VersionInfo {
  std::string tool = "video2plan";
  std::string version = "0.1.0";
  std::string config_schema = "1";

  std::string str() const;
};

VersionInfo version_info();

// A stage that failed after its inputs were accepted.
class StageError : public Error {
 public:
  StageError(std::string stage, const std::string& what) : Error(stage + ": " + what), stage_(std::move(stage)) {}
  const std::string& stage() const { return stage_; }

 private:
  std::string stage_;
};

struct PipelineConfig {
  std::filesystem::path stream;
  std::filesystem::path lexicon;
  std::filesystem::path table;
  std::optional<std::filesystem::path> library;    // default templates when absent
  std::optional<std::filesystem::path> durations;  // default durations when absent
  std::optional<std::filesystem::path> truth;      // eval runs only with truth
  std::filesystem::path output_dir = "out";

  SegmentationConfig segmentation;
  AssociationConfig association;
  RecognizeConfig recognition;

  bool run_simulate = true;
  bool run_eval = true;
  bool write_dot = true;
};

// Relative paths in the file resolve against the file's directory.
PipelineConfig parse_config(std::istream& in, const std::filesystem::path& base_dir = {});
PipelineConfig load_config(const std::filesystem::path& path);
void write_config(const PipelineConfig& cfg, std::ostream& out);

// Throws InputError naming the first referenced path that does not exist.
void check_config(const PipelineConfig& cfg);

struct StageOutput {
  std::string stage;
  std::filesystem::path path;  // relative to the output directory
  std::string sha256;

  bool operator==(const StageOutput&) const = default;
};

struct Manifest {
  VersionInfo version;
  std::vector<StageOutput> outputs;
  std::map<std::string, double> metrics;
};

std::string sha256_file(const std::filesystem::path& path);
std::string sha256_hex(std::string_view data);

using ProgressFn = std::function<void(std::string_view stage, std::string_view message)>;

// validate -> segment -> associate -> recognize -> parse -> plan -> simulate -> eval.
// Every stage reads its predecessor's file, so any stage can be rerun alone.
// Writes manifest.json next to the outputs.
Manifest run_pipeline(const PipelineConfig& cfg, const ProgressFn& progress = {});

void write_manifest(const Manifest& m, std::ostream& out);

// Individual stages, shared by the pipeline and the CLI subcommands.
DetectionStream load_validated_stream(const std::filesystem::path& stream, const std::filesystem::path& lexicon);
SegmentSequence run_segment_stage(const DetectionStream& stream, const SegmentationConfig& cfg);
std::vector<TreeRecord> run_parse_stage(std::span<const RecognizedSegment> recognized);
ActionGraph run_plan_stage(std::span<const TreeRecord> trees, const PrimitiveLibrary& lib);
// Writes the JSON report and returns the match summary.
MatchReport run_eval_stage(std::span<const TreeRecord> trees, std::span<const LabeledTree> truth,
                           std::ostream& report_out);

}  // namespace video2plan
