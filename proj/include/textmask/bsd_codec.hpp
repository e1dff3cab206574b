#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "textmask/error.hpp"
#include "textmask/raster.hpp"

// Box-wise semantic descriptors: one record per instance,
//
//   <ref>REFERENT</ref><box>[[x1 y1 x2 y2]]</box><seg>fg12 bg3 ...</seg>
//
// where the bricks run-length encode the binary mask inside the box in
// raster order (runs continue across box rows). An instance with no target
// is written <ref>REFERENT</ref><box>[[]]</box><seg></seg>.
namespace textmask::bsd {

inline constexpr std::uint32_t kDefaultCanvas = 64;
inline constexpr std::uint32_t kMaxBrickLength = 63;

inline constexpr std::string_view kRefOpen = "<ref>";
inline constexpr std::string_view kRefClose = "</ref>";
inline constexpr std::string_view kBoxOpen = "<box>";
inline constexpr std::string_view kBoxClose = "</box>";
inline constexpr std::string_view kSegOpen = "<seg>";
inline constexpr std::string_view kSegClose = "</seg>";

enum class Polarity : std::uint8_t { kBackground = 0, kForeground = 1 };

struct BrickToken {
  Polarity polarity = Polarity::kForeground;
  std::uint32_t length = 1;

  // Throws ValidationError unless 1 <= length <= 63.
  static BrickToken make(Polarity polarity, std::uint32_t length);
  // "fg1".."fg63", "bg1".."bg63"; nullopt for anything else.
  static std::optional<BrickToken> parse(std::string_view name);

  std::string name() const;
  bool operator==(const BrickToken&) const = default;
};

using BrickSeq = std::vector<BrickToken>;

// All 126 brick names, fg1..fg63 then bg1..bg63.
const std::vector<std::string>& brick_vocabulary();

// Greedy maximal runs, runs longer than 63 split into 63-long bricks plus a
// remainder. Throws ValidationError on empty input.
BrickSeq bricks_from_bits(std::span<const std::uint8_t> bits);
// Accepts non-canonical sequences.
std::vector<std::uint8_t> bits_from_bricks(const BrickSeq& seq);
std::size_t brick_sum(const BrickSeq& seq);
// Same-polarity neighbours only directly after a 63-long brick.
bool is_canonical(const BrickSeq& seq);

class BsdRecord {
 public:
  // Throws ValidationError when the referent is empty or holds a marker, the
  // box leaves the canvas, or the brick lengths do not sum to the box area.
  BsdRecord(std::string referent, BoxBins box, BrickSeq bricks,
            std::uint32_t canvas_res = kDefaultCanvas);

  static BsdRecord no_target(std::string referent, std::uint32_t canvas_res = kDefaultCanvas);

  static void check_referent(std::string_view referent);

  const std::string& referent() const noexcept { return referent_; }
  const std::optional<BoxBins>& box() const noexcept { return box_; }
  const BrickSeq& bricks() const noexcept { return bricks_; }
  std::uint32_t canvas_res() const noexcept { return canvas_res_; }
  bool is_no_target() const noexcept { return !box_.has_value(); }

  bool operator==(const BsdRecord&) const = default;

 private:
  BsdRecord() = default;

  std::string referent_;
  std::optional<BoxBins> box_;
  BrickSeq bricks_;
  std::uint32_t canvas_res_ = kDefaultCanvas;
};

// `mask` must be square; its side is the canvas resolution. An all-zero mask
// yields the no-target record.
BsdRecord encode_record(const BinaryGrid& mask, std::string referent);

std::string serialize_record(const BsdRecord& record);
std::string serialize_bsd(std::span<const BsdRecord> records);

struct ParseResult {
  std::vector<BsdRecord> records;
  Diagnostics diagnostics;
};

struct ParseOptions {
  ParseMode mode = ParseMode::kStrict;
  std::uint32_t canvas_res = kDefaultCanvas;
  // Text outside records is skipped silently instead of rejected; used when
  // records are embedded in a model response.
  bool allow_prose = false;
};

// Strict mode throws ParseError (rule name + byte offset) on any grammar
// violation. Lenient mode pads underfilled and truncates overfilled brick
// sequences, skips unknown tokens, repairs boxes, and logs every repair.
ParseResult parse_bsd(std::string_view text, const ParseOptions& options = {});

struct Raster {
  std::vector<BinaryGrid> instances;
  // Record i is painted with id i + 1 in list order; later records win overlaps.
  LabelGrid merged;
};

Raster rasterize(std::span<const BsdRecord> records, std::uint32_t canvas_res = kDefaultCanvas);

// Mask restricted to `box`, row-major.
std::vector<std::uint8_t> crop_bits(const BinaryGrid& mask, const BoxBins& box);

// Box text as emitted inside <box>, e.g. "[[0 0 3 5]]" or "[[]]".
std::string box_text(const std::optional<BoxBins>& box);

}  // namespace textmask::bsd
