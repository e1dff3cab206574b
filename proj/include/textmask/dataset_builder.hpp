#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "textmask/bsd_codec.hpp"
#include "textmask/isd_codec.hpp"
#include "textmask/raster.hpp"

namespace textmask::dataset {

enum class Task { kSemantic, kReferring, kGeneralizedReferring, kReasoning };

const char* to_string(Task t);
std::optional<Task> parse_task(std::string_view name);  // "panoptic" reads as semantic

enum class SampleFormat { kIsdFull, kIsdRrle, kBsd };

const char* to_string(SampleFormat f);  // "isd-full", "isd-rrle", "bsd"
std::optional<SampleFormat> parse_format(std::string_view name);

inline constexpr std::string_view kDefaultTemplate =
    "<image>\nCan you segment the {labels} in the image?";

// One input line. Either `mask` (label ids, with `labels` naming them) or
// `instances` (one binary mask per instance) supplies the geometry; a
// no-target annotation supplies neither.
struct Annotation {
  std::string id;
  std::string image;
  std::optional<std::filesystem::path> mask;
  std::optional<std::filesystem::path> labels;
  std::vector<std::filesystem::path> instances;
  Task task = Task::kReferring;
  std::vector<std::string> referents;
  bool no_target = false;
  // Replaces the template query (e.g. the question of a reasoning sample).
  std::optional<std::string> query;
};

// Parses one annotation JSON object; relative paths resolve against
// `base_dir`. Throws ValidationError on schema or invariant violations.
Annotation parse_annotation(std::string_view json_line, const std::filesystem::path& base_dir = {});

struct InstructionSample {
  std::string id;
  std::string image;
  std::string query;
  std::string response;
  SampleFormat format = SampleFormat::kIsdRrle;
  std::size_t resolution = 16;
  Task task = Task::kReferring;
  // Labels of an ISD response; empty for BSD.
  std::optional<LabelTable> labels;

  // {"id", "image", "conversations": [{"from": "human"|"gpt", "value"}],
  //  "task", "format", "resolution", "labels"?} with that key order.
  std::string to_jsonl() const;
};

// A sample together with the downsampled ground truth it encodes.
struct BuiltSample {
  InstructionSample sample;
  std::optional<LabelGrid> grid;           // ISD
  std::vector<BinaryGrid> instances;       // BSD, one per record
};

struct BuildOptions {
  std::vector<std::string> templates{std::string(kDefaultTemplate)};
  // Strict-parse every response and compare it with the ground truth.
  bool verify = true;
};

BuiltSample build_isd_sample(const Annotation& ann, std::size_t resolution,
                             isd::Encoding encoding, const BuildOptions& options = {});
BuiltSample build_bsd_sample(const Annotation& ann, std::uint32_t canvas_res = bsd::kDefaultCanvas,
                             const BuildOptions& options = {});

struct CorpusConfig {
  std::size_t resolution = 16;
  std::uint32_t canvas_res = bsd::kDefaultCanvas;
  std::vector<SampleFormat> formats{SampleFormat::kIsdRrle};
  BuildOptions build;
  std::vector<Task> tasks;  // empty keeps every task
  bool fail_on_error = false;
  unsigned threads = 1;
  // Relative paths in annotations resolve here; defaults to the directory of
  // the annotation file.
  std::optional<std::filesystem::path> base_dir;
};

struct BuildFailure {
  std::size_t line = 0;  // 1-based
  std::string message;
};

struct BuildReport {
  std::size_t annotations = 0;
  std::size_t samples = 0;
  std::size_t filtered = 0;
  std::vector<BuildFailure> failures;
  std::map<std::string, std::size_t> by_task;
  std::map<std::string, std::size_t> by_format;
};

// Streams annotation JSONL into instruction JSONL in input order. With
// fail_on_error, the first failing line aborts (ValidationError) before any
// output is written.
BuildReport build_corpus(const std::filesystem::path& annotations,
                         const std::filesystem::path& output, const CorpusConfig& config);

std::string render_query(const Annotation& ann, const std::vector<std::string>& referents,
                         const std::vector<std::string>& templates);

// Stable 64-bit FNV-1a, used to pick a query template per sample id.
std::uint64_t fnv1a(std::string_view s);

}  // namespace textmask::dataset
