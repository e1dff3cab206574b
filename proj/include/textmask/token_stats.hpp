#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "textmask/raster.hpp"

namespace textmask::tokens {

class Tokenizer {
 public:
  virtual ~Tokenizer() = default;
  virtual std::vector<std::string> tokenize(std::string_view text) const = 0;
  virtual std::size_t count(std::string_view text) const { return tokenize(text).size(); }
};

// Deterministic stand-in for a subword tokenizer:
//  - each maximal run of letters is one token (non-ASCII bytes count as letters)
//  - every digit is its own token
//  - every other symbol, '*' and '|' included, is its own token
//  - a newline is one token; other whitespace separates but emits nothing
//  - brick names fg1..fg63 / bg1..bg63 and the markers <seg> </seg> <ref>
//    </ref> <box> </box> <image> are single tokens
// "others*16" therefore costs four tokens.
class ReferenceTokenizer final : public Tokenizer {
 public:
  std::vector<std::string> tokenize(std::string_view text) const override;
};

// Greedy longest match against a newline-delimited vocabulary. Bytes no
// entry covers become one token per UTF-8 code point.
class VocabTokenizer final : public Tokenizer {
 public:
  explicit VocabTokenizer(const std::vector<std::string>& vocab);
  static VocabTokenizer from_file(const std::filesystem::path& path);

  std::vector<std::string> tokenize(std::string_view text) const override;

 private:
  struct Node {
    std::map<unsigned char, std::size_t> next;
    bool terminal = false;
  };
  std::vector<Node> nodes_;
};

struct TokenizerSpec {
  enum class Kind { kReference, kVocabFile } kind = Kind::kReference;
  std::filesystem::path vocab_path;
};

std::unique_ptr<Tokenizer> make_tokenizer(const TokenizerSpec& spec);

// Convenience wrapper over ReferenceTokenizer.
std::vector<std::string> ref_tokenize(std::string_view text);

struct EncodingCounts {
  std::size_t full = 0;
  std::size_t irle = 0;
  std::size_t rrle = 0;
  std::size_t bsd_no_bricks = 0;
  std::size_t bsd_bricks = 0;
};

// B-SD record whose <seg> holds the row-wise RLE of the box region with the
// referent and "others" as descriptors, the form used without bricks.
std::string bsd_descriptor_record(const BinaryGrid& mask, const std::string& referent);

// Token counts of one square grid under every encoding. ISD payloads are
// counted inside their <seg> markers; B-SD counts one record per
// non-background label present, on a canvas of the grid's resolution.
EncodingCounts compare_encodings(const LabelGrid& grid, const Tokenizer& tokenizer);

struct GroupStats {
  std::size_t samples = 0;
  double mean = 0;
  double median = 0;
  std::size_t min = 0;
  std::size_t max = 0;
};

struct CorpusSample {
  std::string encoding;  // e.g. "isd-full", "isd-rrle", "bsd"
  std::size_t resolution = 0;
  std::string text;
};

struct LengthReport {
  // Keyed by (encoding, resolution).
  std::map<std::pair<std::string, std::size_t>, GroupStats> groups;
  // 1 - mean(encoding) / mean(isd-full) at the same resolution.
  std::map<std::pair<std::string, std::size_t>, double> reduction_vs_full;
  std::vector<std::string> failures;

  std::string to_json() const;
  std::string to_csv() const;
};

GroupStats summarize(std::vector<std::size_t> counts);

LengthReport count_corpus(const std::vector<CorpusSample>& samples, const Tokenizer& tokenizer);

// compare_encodings over many grids, grouped by encoding ("isd-full",
// "isd-irle", "isd-rrle", "bsd-no-bricks", "bsd") and grid resolution.
LengthReport compare_corpus(const std::vector<LabelGrid>& grids, const Tokenizer& tokenizer);

// Reads instruction JSONL (as written by the dataset builder) and counts the
// tokens of every gpt response, grouped by its format and resolution.
LengthReport count_corpus_file(const std::filesystem::path& path, const Tokenizer& tokenizer);

}  // namespace textmask::tokens
