#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "textmask/error.hpp"
#include "textmask/raster.hpp"

// Text codecs for image-wise semantic descriptors.
//
// Grammar shared by all three encodings:
//   payload := row ( "\n" row )*          (IRLE: exactly one row)
//   row     := item ( "|" item )*
//   item    := label | label "*" count     (count >= 2 when emitted)
//
// FULL emits one item per cell, R-RLE emits maximal runs within each row and
// I-RLE emits maximal runs over the row-major stream with no row breaks.
namespace textmask::isd {

enum class Encoding { kFull, kIrle, kRrle };

const char* to_string(Encoding e);
// Accepts "full", "irle", "rrle" (case-insensitive), optionally prefixed "isd-".
std::optional<Encoding> parse_encoding(std::string_view name);

struct DescriptorText {
  Encoding kind = Encoding::kRrle;
  std::string payload;
  std::size_t rows = 0;
  std::size_t cols = 0;
};

struct Run {
  LabelId label = 0;
  std::size_t count = 0;

  bool operator==(const Run&) const = default;
};

// Maximal runs of equal ids.
std::vector<Run> runs_of(std::span<const LabelId> ids);

// Label texts are looked up in `table`; a missing id raises ValidationError
// naming it.
DescriptorText encode(const LabelGrid& grid, Encoding kind, const LabelTable& table);
DescriptorText encode(const LabelGrid& grid, Encoding kind);

inline DescriptorText encode_full(const LabelGrid& g) { return encode(g, Encoding::kFull); }
inline DescriptorText encode_irle(const LabelGrid& g) { return encode(g, Encoding::kIrle); }
inline DescriptorText encode_rrle(const LabelGrid& g) { return encode(g, Encoding::kRrle); }

struct DecodeResult {
  LabelGrid grid;
  Diagnostics diagnostics;
};

// Strict mode throws ParseError on unknown labels, malformed runs, and any
// mismatch in cell or row counts. Lenient mode maps unknown labels to the
// background, truncates overflow, pads shortfall with the background and
// reports every repair.
DecodeResult decode(std::string_view payload, Encoding kind, std::size_t rows,
                    std::size_t cols, const LabelTable& table,
                    ParseMode mode = ParseMode::kStrict);

inline DecodeResult decode(const DescriptorText& text, const LabelTable& table,
                           ParseMode mode = ParseMode::kStrict) {
  return decode(text.payload, text.kind, text.rows, text.cols, table, mode);
}

// Number of descriptor items (runs count once) in a payload.
std::size_t item_count(std::string_view payload);

}  // namespace textmask::isd
