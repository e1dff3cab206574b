#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "textmask/bsd_codec.hpp"
#include "textmask/error.hpp"
#include "textmask/isd_codec.hpp"
#include "textmask/raster.hpp"

namespace textmask {

// What a response is expected to carry.
struct IsdExpectation {
  std::size_t rows = 16;
  std::size_t cols = 16;
  LabelTable table;
  isd::Encoding encoding = isd::Encoding::kRrle;
};

struct BsdExpectation {
  std::uint32_t canvas_res = bsd::kDefaultCanvas;
};

using Expectation = std::variant<IsdExpectation, BsdExpectation>;

enum class TaskKind { kIsd, kBsd };

struct ParsedResponse {
  TaskKind task_kind = TaskKind::kIsd;
  // Set for ISD responses: the extracted payload and its decoded grid.
  std::optional<isd::DescriptorText> descriptors;
  std::optional<LabelGrid> grid;
  // Set for BSD responses.
  std::vector<bsd::BsdRecord> records;
  // Offsets are relative to the full response text.
  Diagnostics diagnostics;

  bool has_errors() const;
};

// Extracts the payload of a model response and hands it to the matching
// codec. Prose outside the markers is ignored. ISD: the payload is the
// outermost <seg>...</seg> span. BSD: every <ref>...</ref><box>...</box>
// <seg>...</seg> triple, in order.
ParsedResponse parse_response(std::string_view text, const Expectation& expected,
                              ParseMode mode = ParseMode::kStrict);

// Instruction-response wrapper, shared with the dataset builder.
inline constexpr std::string_view kResponsePrefix = "The result is: \n";
std::string render_isd_response(const isd::DescriptorText& text);
std::string render_bsd_response(std::span<const bsd::BsdRecord> records);

struct LineResult {
  std::size_t line = 0;  // 1-based
  std::string id;
  bool ok = true;
  Diagnostics diagnostics;
};

struct CorpusReport {
  std::size_t lines = 0;
  std::size_t ok_lines = 0;
  std::size_t error_lines = 0;
  std::size_t warning_count = 0;
  std::map<std::string, std::size_t> by_rule;
  std::vector<LineResult> results;

  int exit_status() const { return error_lines == 0 ? 0 : 3; }
};

struct ValidateOptions {
  ParseMode mode = ParseMode::kStrict;
  std::string field = "response";
  // When unset, each line's format/resolution/labels metadata (as written by
  // the dataset builder) decides the expectation.
  std::optional<Expectation> expected;
  unsigned threads = 1;
};

// Checks one response per JSONL line. The response is read from
// `options.field`, or else from the last "gpt" turn of "conversations".
CorpusReport validate_corpus(const std::filesystem::path& path, const ValidateOptions& options);
CorpusReport validate_lines(const std::vector<std::string>& lines, const ValidateOptions& options);

}  // namespace textmask
