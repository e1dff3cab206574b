#include "textmask/raster.hpp"

#include <algorithm>

#include "textmask/error.hpp"

namespace textmask {

namespace {

constexpr std::string_view kReservedChars = "|*\n<>";

struct AxisMap {
  std::vector<std::size_t> begin;  // first source index of each cell
  std::vector<std::size_t> end;    // one past the last
  std::vector<std::size_t> nearest;
};

AxisMap map_axis(std::size_t extent, std::size_t cells) {
  AxisMap m;
  m.begin.assign(cells, 0);
  m.end.assign(cells, 0);
  m.nearest.resize(cells);
  std::vector<bool> seen(cells, false);
  for (std::size_t i = 0; i < extent; ++i) {
    const std::size_t c = cell_of(i, extent, cells);
    if (!seen[c]) {
      m.begin[c] = i;
      seen[c] = true;
    }
    m.end[c] = i + 1;
  }
  for (std::size_t c = 0; c < cells; ++c) {
    m.nearest[c] = std::min(((2 * c + 1) * extent) / (2 * cells), extent - 1);
  }
  return m;
}

std::shared_ptr<const LabelTable> check_cells(std::size_t a, std::size_t b,
                                              std::span<const LabelId> cells,
                                              std::shared_ptr<const LabelTable> table,
                                              const char* what) {
  if (a == 0 || b == 0) {
    throw ValidationError(std::string(what) + " dimensions must be at least 1x1");
  }
  if (cells.size() != a * b) {
    throw ValidationError(std::string(what) + " has " + std::to_string(cells.size()) +
                          " cells, expected " + std::to_string(a * b));
  }
  if (!table) table = std::make_shared<const LabelTable>();
  for (LabelId id : cells) {
    if (!table->contains(id)) {
      throw ValidationError(std::string(what) + " references label id " +
                            std::to_string(id) + " missing from the label table");
    }
  }
  return table;
}

}  // namespace

// LabelTable

LabelTable::LabelTable() : LabelTable(std::vector<Entry>{}) {}

LabelTable::LabelTable(std::vector<Entry> entries) {
  for (auto& [id, label] : entries) {
    check_label(label);
    if (by_id_.count(id)) {
      throw ValidationError("duplicate label id " + std::to_string(id));
    }
    if (by_label_.count(label)) {
      throw ValidationError("duplicate label text '" + label + "'");
    }
    by_label_.emplace(label, id);
    by_id_.emplace(id, std::move(label));
  }
  if (!by_id_.count(kBackgroundId)) {
    if (by_label_.count(kBackgroundLabel)) {
      throw ValidationError("label 'others' is reserved for id 0");
    }
    by_id_.emplace(kBackgroundId, std::string(kBackgroundLabel));
    by_label_.emplace(std::string(kBackgroundLabel), kBackgroundId);
  }
}

LabelTable LabelTable::from_labels(const std::vector<std::string>& labels) {
  std::vector<Entry> entries;
  entries.reserve(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    entries.emplace_back(static_cast<LabelId>(i + 1), labels[i]);
  }
  return LabelTable(std::move(entries));
}

bool LabelTable::is_valid_label(std::string_view label) noexcept {
  return !label.empty() && label.find_first_of(kReservedChars) == std::string_view::npos;
}

void LabelTable::check_label(std::string_view label) {
  if (label.empty()) throw ValidationError("label text must be non-empty");
  if (auto pos = label.find_first_of(kReservedChars); pos != std::string_view::npos) {
    std::string shown(label);
    for (auto& ch : shown) {
      if (ch == '\n') ch = ' ';
    }
    throw ValidationError("label '" + shown + "' contains reserved character at position " +
                          std::to_string(pos));
  }
}

const std::string& LabelTable::label(LabelId id) const {
  auto it = by_id_.find(id);
  if (it == by_id_.end()) {
    throw ValidationError("label id " + std::to_string(id) + " missing from the label table");
  }
  return it->second;
}

std::optional<LabelId> LabelTable::find(std::string_view label) const {
  auto it = by_label_.find(label);
  if (it == by_label_.end()) return std::nullopt;
  return it->second;
}

std::vector<LabelTable::Entry> LabelTable::entries() const {
  return {by_id_.begin(), by_id_.end()};
}

// Rasters

LabelMask::LabelMask(std::size_t width, std::size_t height, std::vector<LabelId> data,
                     LabelTable table)
    : width_(width), height_(height), data_(std::move(data)) {
  table_ = check_cells(height_, width_, data_,
                       std::make_shared<const LabelTable>(std::move(table)), "mask");
}

LabelGrid::LabelGrid(std::size_t rows, std::size_t cols, std::vector<LabelId> cells,
                     LabelTable table)
    : LabelGrid(rows, cols, std::move(cells),
                std::make_shared<const LabelTable>(std::move(table))) {}

LabelGrid::LabelGrid(std::size_t rows, std::size_t cols, std::vector<LabelId> cells,
                     std::shared_ptr<const LabelTable> table)
    : rows_(rows), cols_(cols), cells_(std::move(cells)) {
  table_ = check_cells(rows_, cols_, cells_, std::move(table), "grid");
}

BinaryGrid::BinaryGrid(std::size_t rows, std::size_t cols)
    : BinaryGrid(rows, cols, std::vector<std::uint8_t>(rows * cols, 0)) {}

BinaryGrid::BinaryGrid(std::size_t rows, std::size_t cols, std::vector<std::uint8_t> bits)
    : rows_(rows), cols_(cols), bits_(std::move(bits)) {
  if (bits_.size() != rows_ * cols_) {
    throw ValidationError("binary grid has " + std::to_string(bits_.size()) +
                          " bits, expected " + std::to_string(rows_ * cols_));
  }
  for (auto& b : bits_) {
    if (b > 1) throw ValidationError("binary grid bits must be 0 or 1");
  }
}

std::size_t BinaryGrid::count() const noexcept {
  return static_cast<std::size_t>(std::count(bits_.begin(), bits_.end(), 1));
}

BoxBins BoxBins::make(std::uint32_t x1, std::uint32_t y1, std::uint32_t x2,
                      std::uint32_t y2, std::uint32_t res) {
  if (x1 > x2 || y1 > y2) {
    throw ValidationError("box corners out of order: [" + std::to_string(x1) + " " +
                          std::to_string(y1) + " " + std::to_string(x2) + " " +
                          std::to_string(y2) + "]");
  }
  if (res > 0 && (x2 >= res || y2 >= res)) {
    throw ValidationError("box exceeds the " + std::to_string(res) + "-bin canvas");
  }
  return BoxBins{x1, y1, x2, y2};
}

// Operations

LabelGrid downsample_mask(const LabelMask& mask, std::size_t rows, std::size_t cols) {
  if (rows == 0 || cols == 0) {
    throw ValidationError("downsample target must be at least 1x1");
  }
  const AxisMap ym = map_axis(mask.height(), rows);
  const AxisMap xm = map_axis(mask.width(), cols);

  std::vector<LabelId> cells(rows * cols);
  std::vector<LabelId> scratch;
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) {
      const bool empty = ym.begin[r] == ym.end[r] || xm.begin[c] == xm.end[c];
      if (empty) {
        cells[r * cols + c] = mask.at(ym.nearest[r], xm.nearest[c]);
        continue;
      }
      scratch.clear();
      for (std::size_t y = ym.begin[r]; y < ym.end[r]; ++y) {
        for (std::size_t x = xm.begin[c]; x < xm.end[c]; ++x) {
          scratch.push_back(mask.at(y, x));
        }
      }
      std::sort(scratch.begin(), scratch.end());
      LabelId best = scratch.front();
      std::size_t best_count = 0;
      for (std::size_t i = 0; i < scratch.size();) {
        std::size_t j = i;
        while (j < scratch.size() && scratch[j] == scratch[i]) ++j;
        // Strict '>' keeps the smallest id on ties since ids ascend.
        if (j - i > best_count) {
          best_count = j - i;
          best = scratch[i];
        }
        i = j;
      }
      cells[r * cols + c] = best;
    }
  }
  return LabelGrid(rows, cols, std::move(cells), mask.shared_table());
}

LabelMask upsample_grid(const LabelGrid& grid, std::size_t width, std::size_t height) {
  if (width == 0 || height == 0) {
    throw ValidationError("upsample target must be at least 1x1");
  }
  std::vector<LabelId> data(width * height);
  std::vector<std::size_t> col_of(width);
  for (std::size_t x = 0; x < width; ++x) col_of[x] = cell_of(x, width, grid.cols());
  for (std::size_t y = 0; y < height; ++y) {
    const std::size_t r = cell_of(y, height, grid.rows());
    for (std::size_t x = 0; x < width; ++x) data[y * width + x] = grid.at(r, col_of[x]);
  }
  return LabelMask(width, height, std::move(data), grid.table());
}

BinaryGrid binarize(const LabelGrid& grid, LabelId target) {
  if (!grid.table().contains(target)) {
    throw ValidationError("binarize target id " + std::to_string(target) +
                          " missing from the label table");
  }
  std::vector<std::uint8_t> bits(grid.cells().size());
  std::transform(grid.cells().begin(), grid.cells().end(), bits.begin(),
                 [target](LabelId id) { return static_cast<std::uint8_t>(id == target); });
  return BinaryGrid(grid.rows(), grid.cols(), std::move(bits));
}

std::optional<BoxBins> tight_box(const BinaryGrid& bits) {
  std::size_t min_r = bits.rows(), min_c = bits.cols(), max_r = 0, max_c = 0;
  bool found = false;
  for (std::size_t r = 0; r < bits.rows(); ++r) {
    for (std::size_t c = 0; c < bits.cols(); ++c) {
      if (!bits.at(r, c)) continue;
      found = true;
      min_r = std::min(min_r, r);
      max_r = std::max(max_r, r);
      min_c = std::min(min_c, c);
      max_c = std::max(max_c, c);
    }
  }
  if (!found) return std::nullopt;
  return BoxBins{static_cast<std::uint32_t>(min_c), static_cast<std::uint32_t>(min_r),
                 static_cast<std::uint32_t>(max_c), static_cast<std::uint32_t>(max_r)};
}

BoxBins quantize_box(const PixelRect& rect, std::size_t width, std::size_t height,
                     std::uint32_t res) {
  if (res == 0) throw ValidationError("quantization resolution must be at least 1");
  if (rect.left > rect.right || rect.right >= width || rect.top > rect.bottom ||
      rect.bottom >= height) {
    throw ValidationError("pixel rectangle outside the image or out of order");
  }
  auto bin = [res](std::size_t c, std::size_t extent) {
    const std::size_t b = (c * res) / extent;
    return static_cast<std::uint32_t>(std::min<std::size_t>(b, res - 1));
  };
  return BoxBins{bin(rect.left, width), bin(rect.top, height), bin(rect.right, width),
                 bin(rect.bottom, height)};
}

}  // namespace textmask
