#include "textmask/isd_codec.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>

namespace textmask::isd {

namespace {

struct Item {
  LabelId label = kBackgroundId;
  std::size_t count = 1;
  std::size_t offset = 0;
};

struct Line {
  std::string_view text;
  std::size_t offset = 0;
};

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

std::vector<Line> split_lines(std::string_view payload) {
  std::vector<Line> lines;
  std::size_t start = 0;
  for (;;) {
    const auto nl = payload.find('\n', start);
    if (nl == std::string_view::npos) {
      lines.push_back({payload.substr(start), start});
      return lines;
    }
    lines.push_back({payload.substr(start, nl - start), start});
    start = nl + 1;
  }
}

class Decoder {
 public:
  Decoder(const LabelTable& table, Encoding kind, ParseMode mode, std::size_t budget)
      : table_(table), kind_(kind), mode_(mode), budget_(budget) {}

  // Strict: throw. Lenient: record and continue.
  void report(const std::string& rule, std::size_t offset, const std::string& message) {
    if (mode_ == ParseMode::kStrict) throw ParseError(rule, offset, message);
    diags_.push_back({Severity::kWarning, rule, offset, message});
  }

  std::vector<Item> parse_row(const Line& line) {
    std::vector<Item> items;
    std::size_t start = 0;
    for (;;) {
      const auto bar = line.text.find('|', start);
      const auto end = bar == std::string_view::npos ? line.text.size() : bar;
      parse_item(line.text.substr(start, end - start), line.offset + start, items);
      if (bar == std::string_view::npos) break;
      start = bar + 1;
    }
    return items;
  }

  Diagnostics take_diagnostics() { return std::move(diags_); }

 private:
  void parse_item(std::string_view token, std::size_t offset, std::vector<Item>& out) {
    if (token.empty()) {
      report("empty-descriptor", offset, "empty descriptor between separators");
      return;
    }
    Item item;
    item.offset = offset;
    std::string_view label = token;
    if (const auto star = token.rfind('*'); star != std::string_view::npos) {
      if (kind_ == Encoding::kFull) {
        report("unexpected-run", offset + star, "run syntax in a full-length payload");
      }
      label = token.substr(0, star);
      item.count = parse_count(token.substr(star + 1), offset + star + 1);
    }
    item.label = lookup(label, offset);
    if (item.count > 0) out.push_back(item);
  }

  std::size_t parse_count(std::string_view digits, std::size_t offset) {
    std::uint64_t value = 0;
    auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), value);
    const bool whole = ptr == digits.data() + digits.size();
    if (digits.empty() || ec == std::errc::invalid_argument || !whole || value == 0) {
      report("malformed-run", offset,
             "run count '" + std::string(digits) + "' is not a positive integer");
      return 1;
    }
    if (ec == std::errc::result_out_of_range || value > budget_) {
      // The cell-count check rejects it in strict mode; clamp so lenient
      // expansion stays bounded.
      return budget_ + 1;
    }
    return static_cast<std::size_t>(value);
  }

  LabelId lookup(std::string_view label, std::size_t offset) {
    if (auto id = table_.find(label)) return *id;
    if (mode_ == ParseMode::kLenient) {
      if (auto id = table_.find(trim(label))) {
        report("whitespace", offset, "descriptor '" + std::string(label) + "' matched after trimming");
        return *id;
      }
    }
    report("unknown-label", offset, "descriptor '" + std::string(label) + "' is not in the label table");
    return kBackgroundId;
  }

  const LabelTable& table_;
  Encoding kind_;
  ParseMode mode_;
  std::size_t budget_;
  Diagnostics diags_;
};

// Appends `items` to `cells` up to `limit` cells; returns the offset of the
// first item that did not fit, if any.
std::optional<std::size_t> expand(const std::vector<Item>& items, std::size_t limit,
                                  std::vector<LabelId>& cells) {
  for (const auto& it : items) {
    const std::size_t room = limit - cells.size();
    if (it.count > room) {
      cells.insert(cells.end(), room, it.label);
      return it.offset;
    }
    cells.insert(cells.end(), it.count, it.label);
  }
  return std::nullopt;
}

}  // namespace

const char* to_string(Encoding e) {
  switch (e) {
    case Encoding::kFull:
      return "full";
    case Encoding::kIrle:
      return "irle";
    case Encoding::kRrle:
      return "rrle";
  }
  return "?";
}

std::optional<Encoding> parse_encoding(std::string_view name) {
  std::string n(name);
  std::transform(n.begin(), n.end(), n.begin(), [](unsigned char c) { return std::tolower(c); });
  if (n.rfind("isd-", 0) == 0) n.erase(0, 4);
  if (n == "full") return Encoding::kFull;
  if (n == "irle") return Encoding::kIrle;
  if (n == "rrle") return Encoding::kRrle;
  return std::nullopt;
}

std::vector<Run> runs_of(std::span<const LabelId> ids) {
  std::vector<Run> runs;
  for (LabelId id : ids) {
    if (!runs.empty() && runs.back().label == id) {
      ++runs.back().count;
    } else {
      runs.push_back({id, 1});
    }
  }
  return runs;
}

DescriptorText encode(const LabelGrid& grid, Encoding kind, const LabelTable& table) {
  DescriptorText out{kind, {}, grid.rows(), grid.cols()};
  auto label_of = [&](LabelId id) -> const std::string& {
    if (!table.contains(id)) {
      throw ValidationError("cannot encode label id " + std::to_string(id) +
                            ": missing from the label table");
    }
    return table.label(id);
  };
  auto emit_runs = [&](std::span<const LabelId> ids) {
    bool first = true;
    for (const auto& run : runs_of(ids)) {
      if (!first) out.payload += '|';
      first = false;
      out.payload += label_of(run.label);
      if (run.count > 1) {
        out.payload += '*';
        out.payload += std::to_string(run.count);
      }
    }
  };

  const auto cells = grid.cells();
  switch (kind) {
    case Encoding::kFull:
      for (std::size_t r = 0; r < grid.rows(); ++r) {
        if (r > 0) out.payload += '\n';
        for (std::size_t c = 0; c < grid.cols(); ++c) {
          if (c > 0) out.payload += '|';
          out.payload += label_of(grid.at(r, c));
        }
      }
      break;
    case Encoding::kIrle:
      emit_runs(cells);
      break;
    case Encoding::kRrle:
      for (std::size_t r = 0; r < grid.rows(); ++r) {
        if (r > 0) out.payload += '\n';
        emit_runs(cells.subspan(r * grid.cols(), grid.cols()));
      }
      break;
  }
  return out;
}

DescriptorText encode(const LabelGrid& grid, Encoding kind) {
  return encode(grid, kind, grid.table());
}

DecodeResult decode(std::string_view payload, Encoding kind, std::size_t rows,
                    std::size_t cols, const LabelTable& table, ParseMode mode) {
  if (rows == 0 || cols == 0) throw ValidationError("decode target must be at least 1x1");
  const std::size_t total = rows * cols;
  Decoder dec(table, kind, mode, total);
  std::vector<LabelId> cells;
  cells.reserve(total);

  std::vector<Line> lines = split_lines(payload);

  if (kind == Encoding::kIrle) {
    if (lines.size() > 1) {
      dec.report("unexpected-newline", lines[1].offset - 1,
                 "newline inside an image-wise RLE payload");
    }
    std::size_t overflow_at = std::string_view::npos;
    for (const auto& line : lines) {
      if (line.text.empty() && lines.size() > 1) continue;
      const auto items = dec.parse_row(line);
      if (overflow_at != std::string_view::npos) continue;
      if (auto at = expand(items, total, cells)) overflow_at = *at;
    }
    if (overflow_at != std::string_view::npos) {
      dec.report("cell-count", overflow_at,
                 "payload holds more than " + std::to_string(total) + " cells; truncated");
    } else if (cells.size() < total) {
      dec.report("cell-count", payload.size(),
                 "payload holds " + std::to_string(cells.size()) + " of " +
                     std::to_string(total) + " cells; padded with background");
    }
    cells.resize(total, kBackgroundId);
    return {LabelGrid(rows, cols, std::move(cells), table), dec.take_diagnostics()};
  }

  // FULL and RRLE: one payload line per grid row.
  if (mode == ParseMode::kLenient) {
    while (lines.size() > 1 && trim(lines.back().text).empty()) {
      dec.report("trailing-newline", lines.back().offset, "empty trailing row dropped");
      lines.pop_back();
    }
  }
  if (lines.size() != rows) {
    dec.report("row-count", lines.size() > rows ? lines[rows].offset : payload.size(),
               "payload has " + std::to_string(lines.size()) + " rows, expected " +
                   std::to_string(rows));
  }
  for (std::size_t r = 0; r < rows; ++r) {
    if (r >= lines.size()) {
      cells.resize(total, kBackgroundId);
      break;
    }
    const auto items = dec.parse_row(lines[r]);
    const std::size_t row_end = (r + 1) * cols;
    if (auto at = expand(items, row_end, cells)) {
      dec.report("row-length", *at,
                 "row " + std::to_string(r) + " holds more than " + std::to_string(cols) +
                     " cells; truncated");
    } else if (cells.size() < row_end) {
      dec.report("row-length", lines[r].offset + lines[r].text.size(),
                 "row " + std::to_string(r) + " holds " + std::to_string(cells.size() - r * cols) +
                     " of " + std::to_string(cols) + " cells; padded with background");
      cells.resize(row_end, kBackgroundId);
    }
  }
  return {LabelGrid(rows, cols, std::move(cells), table), dec.take_diagnostics()};
}

std::size_t item_count(std::string_view payload) {
  if (payload.empty()) return 0;
  std::size_t n = 1;
  for (char ch : payload) {
    if (ch == '|' || ch == '\n') ++n;
  }
  return n;
}

}  // namespace textmask::isd
