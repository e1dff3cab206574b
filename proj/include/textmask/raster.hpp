#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace textmask {

using LabelId = std::uint32_t;

inline constexpr LabelId kBackgroundId = 0;
inline constexpr std::string_view kBackgroundLabel = "others";

// Bidirectional id <-> text map. Id 0 is always present and names the
// background; if the caller does not supply it, "others" is inserted.
class LabelTable {
 public:
  using Entry = std::pair<LabelId, std::string>;

  LabelTable();
  explicit LabelTable(std::vector<Entry> entries);

  // Background plus `labels` numbered 1..n in order.
  static LabelTable from_labels(const std::vector<std::string>& labels);

  // Throws ValidationError when `label` is empty or contains one of the
  // characters reserved by the descriptor grammar: | * newline < >.
  static void check_label(std::string_view label);
  static bool is_valid_label(std::string_view label) noexcept;

  bool contains(LabelId id) const noexcept { return by_id_.count(id) != 0; }
  const std::string& label(LabelId id) const;
  std::optional<LabelId> find(std::string_view label) const;

  // Sorted by id.
  std::vector<Entry> entries() const;
  std::size_t size() const noexcept { return by_id_.size(); }

  bool operator==(const LabelTable& other) const { return by_id_ == other.by_id_; }

 private:
  std::map<LabelId, std::string> by_id_;
  std::map<std::string, LabelId, std::less<>> by_label_;
};

// Full-resolution label-id raster, row-major.
class LabelMask {
 public:
  LabelMask(std::size_t width, std::size_t height, std::vector<LabelId> data,
            LabelTable table);

  std::size_t width() const noexcept { return width_; }
  std::size_t height() const noexcept { return height_; }
  std::span<const LabelId> data() const noexcept { return data_; }
  LabelId at(std::size_t y, std::size_t x) const { return data_[y * width_ + x]; }
  const LabelTable& table() const noexcept { return *table_; }
  const std::shared_ptr<const LabelTable>& shared_table() const noexcept { return table_; }

  bool operator==(const LabelMask& o) const {
    return width_ == o.width_ && height_ == o.height_ && data_ == o.data_ &&
           *table_ == *o.table_;
  }

 private:
  std::size_t width_;
  std::size_t height_;
  std::vector<LabelId> data_;
  std::shared_ptr<const LabelTable> table_;
};

// Downsampled rows x cols grid of label ids; what a descriptor payload encodes.
class LabelGrid {
 public:
  LabelGrid(std::size_t rows, std::size_t cols, std::vector<LabelId> cells,
            LabelTable table);
  LabelGrid(std::size_t rows, std::size_t cols, std::vector<LabelId> cells,
            std::shared_ptr<const LabelTable> table);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::span<const LabelId> cells() const noexcept { return cells_; }
  LabelId at(std::size_t r, std::size_t c) const { return cells_[r * cols_ + c]; }
  const LabelTable& table() const noexcept { return *table_; }
  const std::shared_ptr<const LabelTable>& shared_table() const noexcept { return table_; }

  bool operator==(const LabelGrid& o) const {
    return rows_ == o.rows_ && cols_ == o.cols_ && cells_ == o.cells_ &&
           *table_ == *o.table_;
  }

 private:
  std::size_t rows_;
  std::size_t cols_;
  std::vector<LabelId> cells_;
  std::shared_ptr<const LabelTable> table_;
};

class BinaryGrid {
 public:
  BinaryGrid(std::size_t rows, std::size_t cols);  // all zeros
  BinaryGrid(std::size_t rows, std::size_t cols, std::vector<std::uint8_t> bits);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::span<const std::uint8_t> bits() const noexcept { return bits_; }
  bool at(std::size_t r, std::size_t c) const { return bits_[r * cols_ + c] != 0; }
  void set(std::size_t r, std::size_t c, bool v) { bits_[r * cols_ + c] = v ? 1 : 0; }
  std::size_t count() const noexcept;
  bool any() const noexcept { return count() != 0; }

  bool operator==(const BinaryGrid&) const = default;

 private:
  std::size_t rows_;
  std::size_t cols_;
  std::vector<std::uint8_t> bits_;
};

// Inclusive corner coordinates in bin (cell) units: x is the column, y the row.
struct BoxBins {
  std::uint32_t x1 = 0;
  std::uint32_t y1 = 0;
  std::uint32_t x2 = 0;
  std::uint32_t y2 = 0;

  // Throws ValidationError unless x1 <= x2, y1 <= y2 and, when res > 0,
  // every coordinate is below res.
  static BoxBins make(std::uint32_t x1, std::uint32_t y1, std::uint32_t x2,
                      std::uint32_t y2, std::uint32_t res = 0);

  std::uint32_t width() const noexcept { return x2 - x1 + 1; }
  std::uint32_t height() const noexcept { return y2 - y1 + 1; }
  std::size_t area() const noexcept {
    return static_cast<std::size_t>(width()) * height();
  }
  bool fits(std::uint32_t res) const noexcept { return x2 < res && y2 < res; }

  bool operator==(const BoxBins&) const = default;
};

// Inclusive pixel rectangle.
struct PixelRect {
  std::size_t left = 0;
  std::size_t top = 0;
  std::size_t right = 0;
  std::size_t bottom = 0;
};

// Majority label among the source pixels whose centers fall inside each cell;
// ties go to the smallest id. Cells that contain no pixel center take the
// label of the pixel nearest the cell center.
LabelGrid downsample_mask(const LabelMask& mask, std::size_t rows, std::size_t cols);

// Nearest-cell upsampling: every output pixel takes the cell containing its
// center (boundaries belong to the higher-index cell).
LabelMask upsample_grid(const LabelGrid& grid, std::size_t width, std::size_t height);

BinaryGrid binarize(const LabelGrid& grid, LabelId target);

// Smallest inclusive box containing every set bit, nullopt when none is set.
std::optional<BoxBins> tight_box(const BinaryGrid& bits);

// floor(c * res / extent), clamped to [0, res - 1], on each coordinate.
BoxBins quantize_box(const PixelRect& rect, std::size_t width, std::size_t height,
                     std::uint32_t res);

// Index of the cell (along one axis of length `cells`) containing the center of
// source sample `i` out of `extent`.
inline std::size_t cell_of(std::size_t i, std::size_t extent, std::size_t cells) {
  return ((2 * i + 1) * cells) / (2 * extent);
}

}  // namespace textmask
