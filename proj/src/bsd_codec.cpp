#include "textmask/bsd_codec.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <set>

namespace textmask::bsd {

namespace {

constexpr std::string_view kMarkers[] = {kRefOpen, kRefClose, kBoxOpen,
                                         kBoxClose, kSegOpen, kSegClose};

bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }

BrickSeq canonicalize(const BrickSeq& seq) {
  const auto bits = bits_from_bricks(seq);
  if (bits.empty()) return {};
  return bricks_from_bits(bits);
}

class Parser {
 public:
  Parser(std::string_view text, const ParseOptions& opts) : text_(text), opts_(opts) {}

  ParseResult run() {
    while (pos_ < text_.size()) {
      const auto ref = text_.find(kRefOpen, pos_);
      const std::size_t stop = ref == std::string_view::npos ? text_.size() : ref;
      check_gap(pos_, stop);
      if (ref == std::string_view::npos) break;
      pos_ = ref;
      parse_record();
    }
    return {std::move(records_), std::move(diags_)};
  }

 private:
  bool strict() const { return opts_.mode == ParseMode::kStrict; }

  void repair(const std::string& rule, std::size_t offset, const std::string& msg,
              Severity sev = Severity::kWarning) {
    if (strict()) throw ParseError(rule, offset, msg);
    diags_.push_back({sev, rule, offset, msg});
  }

  // Text between records: whitespace is always fine, other text is prose.
  void check_gap(std::size_t from, std::size_t to) {
    const auto gap = text_.substr(from, to - from);
    // Markers outside a record mean a record lost its <ref>.
    for (auto m : kMarkers) {
      if (auto at = gap.find(m); at != std::string_view::npos) {
        repair("missing-ref", from + at, "marker " + std::string(m) + " outside any record",
               Severity::kError);
        return;
      }
    }
    if (opts_.allow_prose) return;
    for (std::size_t i = 0; i < gap.size(); ++i) {
      if (!is_space(gap[i])) {
        repair("stray-text", from + i, "text outside any record");
        return;
      }
    }
  }

  void skip_space() {
    while (pos_ < text_.size() && is_space(text_[pos_])) ++pos_;
  }

  bool at(std::string_view lit) const { return text_.substr(pos_, lit.size()) == lit; }

  // Position of the next record start after `from`, or end of text.
  std::size_t next_record(std::size_t from) const {
    const auto r = text_.find(kRefOpen, from);
    return r == std::string_view::npos ? text_.size() : r;
  }

  void parse_record() {
    const std::size_t record_start = pos_;
    pos_ += kRefOpen.size();
    const auto close = text_.find(kRefClose, pos_);
    const std::size_t limit = next_record(pos_);
    if (close == std::string_view::npos || close > limit) {
      repair("unterminated-ref", record_start, "<ref> without </ref>", Severity::kError);
      pos_ = limit;
      return;
    }
    std::string referent(text_.substr(pos_, close - pos_));
    for (auto m : kMarkers) {
      if (referent.find(m) != std::string::npos) {
        repair("reserved-marker", pos_, "referent contains marker " + std::string(m),
               Severity::kError);
        pos_ = close + kRefClose.size();
        return;
      }
    }
    if (referent.empty()) {
      repair("empty-referent", pos_, "empty <ref></ref>", Severity::kError);
      pos_ = close + kRefClose.size();
      return;
    }
    pos_ = close + kRefClose.size();
    skip_space();

    if (!at(kBoxOpen)) {
      repair("missing-box", pos_, "expected <box> after </ref>", Severity::kError);
      pos_ = std::max(pos_, record_start + 1);
      return;
    }
    pos_ += kBoxOpen.size();
    const auto box_close = text_.find(kBoxClose, pos_);
    if (box_close == std::string_view::npos || box_close > next_record(pos_)) {
      repair("unterminated-box", pos_, "<box> without </box>", Severity::kError);
      pos_ = next_record(pos_);
      return;
    }
    const std::size_t box_offset = pos_;
    auto box = parse_box(text_.substr(pos_, box_close - pos_), box_offset);
    pos_ = box_close + kBoxClose.size();
    if (!box) {
      pos_ = next_record(pos_);
      return;
    }
    skip_space();

    std::string_view seg_body;
    std::size_t seg_offset = pos_;
    if (!at(kSegOpen)) {
      repair("missing-seg", pos_, "expected <seg> after </box>");
    } else {
      pos_ += kSegOpen.size();
      seg_offset = pos_;
      const auto seg_close = text_.find(kSegClose, pos_);
      const std::size_t limit2 = next_record(pos_);
      if (seg_close == std::string_view::npos || seg_close > limit2) {
        repair("unterminated-seg", seg_offset, "<seg> without </seg>; read to end of record");
        seg_body = text_.substr(pos_, limit2 - pos_);
        pos_ = limit2;
      } else {
        seg_body = text_.substr(pos_, seg_close - pos_);
        pos_ = seg_close + kSegClose.size();
      }
    }

    if (box->empty) {
      if (seg_body.find_first_not_of(" \t\r\n") != std::string_view::npos) {
        repair("no-target-seg", seg_offset, "no-target record carries bricks; ignored");
      }
      records_.push_back(BsdRecord::no_target(std::move(referent), opts_.canvas_res));
      return;
    }
    auto bricks = parse_bricks(seg_body, seg_offset, box->box.area());
    records_.emplace_back(std::move(referent), box->box, std::move(bricks), opts_.canvas_res);
  }

  struct BoxParse {
    bool empty = false;
    BoxBins box;
  };

  std::optional<BoxParse> parse_box(std::string_view body, std::size_t offset) {
    std::string_view s = body;
    while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
    while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
    const bool bracketed = s.size() >= 4 && s.substr(0, 2) == "[[" && s.substr(s.size() - 2) == "]]";
    if (!bracketed) {
      repair("box-format", offset, "box must be written [[x1 y1 x2 y2]]");
    }
    std::string_view inner = bracketed ? s.substr(2, s.size() - 4) : s;

    std::vector<std::uint64_t> nums;
    bool junk = false;
    for (std::size_t i = 0; i < inner.size();) {
      if (is_space(inner[i])) {
        ++i;
        continue;
      }
      if (std::isdigit(static_cast<unsigned char>(inner[i]))) {
        std::size_t j = i;
        while (j < inner.size() && std::isdigit(static_cast<unsigned char>(inner[j]))) ++j;
        std::uint64_t v = 0;
        auto [p, ec] = std::from_chars(inner.data() + i, inner.data() + j, v);
        (void)p;
        nums.push_back(ec == std::errc() ? v : UINT64_MAX);
        i = j;
        continue;
      }
      junk = true;
      ++i;
    }
    if (bracketed && nums.empty() && !junk) return BoxParse{true, {}};
    if (junk) repair("box-format", offset, "unexpected characters in box coordinates");
    if (nums.size() != 4) {
      repair("box-format", offset,
             "box has " + std::to_string(nums.size()) + " coordinates, expected 4",
             Severity::kError);
      return std::nullopt;
    }
    const std::uint64_t lim = opts_.canvas_res - 1;
    if (std::any_of(nums.begin(), nums.end(), [&](auto v) { return v > lim; })) {
      repair("box-range", offset,
             "box coordinate outside the " + std::to_string(opts_.canvas_res) +
                 "-bin canvas; clamped");
      for (auto& v : nums) v = std::min(v, lim);
    }
    auto x1 = static_cast<std::uint32_t>(nums[0]), y1 = static_cast<std::uint32_t>(nums[1]);
    auto x2 = static_cast<std::uint32_t>(nums[2]), y2 = static_cast<std::uint32_t>(nums[3]);
    if (x1 > x2 || y1 > y2) {
      repair("box-ordering", offset, "box corners out of order; swapped");
      if (x1 > x2) std::swap(x1, x2);
      if (y1 > y2) std::swap(y1, y2);
    }
    return BoxParse{false, BoxBins{x1, y1, x2, y2}};
  }

  BrickSeq parse_bricks(std::string_view body, std::size_t offset, std::size_t area) {
    BrickSeq seq;
    bool repaired = false;
    for (std::size_t i = 0; i < body.size();) {
      if (is_space(body[i])) {
        ++i;
        continue;
      }
      std::size_t j = i;
      while (j < body.size() && !is_space(body[j])) ++j;
      const auto tok = body.substr(i, j - i);
      if (auto b = BrickToken::parse(tok)) {
        seq.push_back(*b);
      } else {
        repair("unknown-brick", offset + i, "'" + std::string(tok) + "' is not a brick; skipped");
        repaired = true;
      }
      i = j;
    }
    std::size_t sum = brick_sum(seq);
    if (sum < area) {
      repair("underfilled-seg", offset,
             "bricks cover " + std::to_string(sum) + " of " + std::to_string(area) +
                 " box cells; padded with background");
      for (std::size_t left = area - sum; left > 0;) {
        const auto n = static_cast<std::uint32_t>(std::min<std::size_t>(left, kMaxBrickLength));
        seq.push_back({Polarity::kBackground, n});
        left -= n;
      }
      repaired = true;
    } else if (sum > area) {
      repair("overfilled-seg", offset,
             "bricks cover " + std::to_string(sum) + " cells, box holds " +
                 std::to_string(area) + "; truncated");
      std::size_t acc = 0;
      BrickSeq cut;
      for (const auto& b : seq) {
        if (acc == area) break;
        const auto n = static_cast<std::uint32_t>(std::min<std::size_t>(b.length, area - acc));
        cut.push_back({b.polarity, n});
        acc += n;
      }
      seq = std::move(cut);
      repaired = true;
    }
    return repaired ? canonicalize(seq) : seq;
  }

  std::string_view text_;
  ParseOptions opts_;
  std::size_t pos_ = 0;
  std::vector<BsdRecord> records_;
  Diagnostics diags_;
};

}  // namespace

BrickToken BrickToken::make(Polarity polarity, std::uint32_t length) {
  if (length < 1 || length > kMaxBrickLength) {
    throw ValidationError("brick length " + std::to_string(length) + " outside [1, 63]");
  }
  return {polarity, length};
}

std::optional<BrickToken> BrickToken::parse(std::string_view name) {
  if (name.size() < 3 || name.size() > 4) return std::nullopt;
  Polarity pol;
  if (name.substr(0, 2) == "fg") {
    pol = Polarity::kForeground;
  } else if (name.substr(0, 2) == "bg") {
    pol = Polarity::kBackground;
  } else {
    return std::nullopt;
  }
  const auto digits = name.substr(2);
  if (digits.front() == '0') return std::nullopt;
  std::uint32_t n = 0;
  auto [p, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), n);
  if (ec != std::errc() || p != digits.data() + digits.size()) return std::nullopt;
  if (n < 1 || n > kMaxBrickLength) return std::nullopt;
  return BrickToken{pol, n};
}

std::string BrickToken::name() const {
  return (polarity == Polarity::kForeground ? "fg" : "bg") + std::to_string(length);
}

const std::vector<std::string>& brick_vocabulary() {
  static const std::vector<std::string> vocab = [] {
    std::vector<std::string> v;
    for (auto pol : {Polarity::kForeground, Polarity::kBackground}) {
      for (std::uint32_t n = 1; n <= kMaxBrickLength; ++n) v.push_back(BrickToken{pol, n}.name());
    }
    return v;
  }();
  return vocab;
}

BrickSeq bricks_from_bits(std::span<const std::uint8_t> bits) {
  if (bits.empty()) throw ValidationError("cannot build bricks from an empty bit sequence");
  BrickSeq seq;
  for (std::size_t i = 0; i < bits.size();) {
    std::size_t j = i;
    while (j < bits.size() && bits[j] == bits[i]) ++j;
    const Polarity pol = bits[i] ? Polarity::kForeground : Polarity::kBackground;
    for (std::size_t left = j - i; left > 0;) {
      const auto n = static_cast<std::uint32_t>(std::min<std::size_t>(left, kMaxBrickLength));
      seq.push_back({pol, n});
      left -= n;
    }
    i = j;
  }
  return seq;
}

std::vector<std::uint8_t> bits_from_bricks(const BrickSeq& seq) {
  std::vector<std::uint8_t> bits;
  bits.reserve(brick_sum(seq));
  for (const auto& b : seq) {
    bits.insert(bits.end(), b.length, b.polarity == Polarity::kForeground ? 1 : 0);
  }
  return bits;
}

std::size_t brick_sum(const BrickSeq& seq) {
  std::size_t n = 0;
  for (const auto& b : seq) n += b.length;
  return n;
}

bool is_canonical(const BrickSeq& seq) {
  for (std::size_t i = 0; i < seq.size(); ++i) {
    if (seq[i].length < 1 || seq[i].length > kMaxBrickLength) return false;
    if (i > 0 && seq[i].polarity == seq[i - 1].polarity && seq[i - 1].length != kMaxBrickLength) {
      return false;
    }
  }
  return true;
}

void BsdRecord::check_referent(std::string_view referent) {
  if (referent.empty()) throw ValidationError("referent must be non-empty");
  for (auto m : kMarkers) {
    if (referent.find(m) != std::string_view::npos) {
      throw ValidationError("referent '" + std::string(referent) + "' contains reserved marker " +
                            std::string(m));
    }
  }
}

BsdRecord::BsdRecord(std::string referent, BoxBins box, BrickSeq bricks, std::uint32_t canvas_res)
    : referent_(std::move(referent)), box_(box), bricks_(std::move(bricks)), canvas_res_(canvas_res) {
  check_referent(referent_);
  if (canvas_res_ == 0) throw ValidationError("canvas resolution must be at least 1");
  box_ = BoxBins::make(box.x1, box.y1, box.x2, box.y2, canvas_res_);
  for (const auto& b : bricks_) BrickToken::make(b.polarity, b.length);
  if (brick_sum(bricks_) != box.area()) {
    throw ValidationError("bricks cover " + std::to_string(brick_sum(bricks_)) +
                          " cells but the box holds " + std::to_string(box.area()));
  }
}

BsdRecord BsdRecord::no_target(std::string referent, std::uint32_t canvas_res) {
  check_referent(referent);
  if (canvas_res == 0) throw ValidationError("canvas resolution must be at least 1");
  BsdRecord r;
  r.referent_ = std::move(referent);
  r.canvas_res_ = canvas_res;
  return r;
}

std::vector<std::uint8_t> crop_bits(const BinaryGrid& mask, const BoxBins& box) {
  std::vector<std::uint8_t> bits;
  bits.reserve(box.area());
  for (std::uint32_t y = box.y1; y <= box.y2; ++y) {
    for (std::uint32_t x = box.x1; x <= box.x2; ++x) bits.push_back(mask.at(y, x) ? 1 : 0);
  }
  return bits;
}

BsdRecord encode_record(const BinaryGrid& mask, std::string referent) {
  if (mask.rows() != mask.cols()) {
    throw ValidationError("instance mask must be square at canvas resolution, got " +
                          std::to_string(mask.rows()) + "x" + std::to_string(mask.cols()));
  }
  const auto res = static_cast<std::uint32_t>(mask.rows());
  const auto box = tight_box(mask);
  if (!box) return BsdRecord::no_target(std::move(referent), res);
  return BsdRecord(std::move(referent), *box, bricks_from_bits(crop_bits(mask, *box)), res);
}

std::string box_text(const std::optional<BoxBins>& box) {
  if (!box) return "[[]]";
  return "[[" + std::to_string(box->x1) + ' ' + std::to_string(box->y1) + ' ' +
         std::to_string(box->x2) + ' ' + std::to_string(box->y2) + "]]";
}

std::string serialize_record(const BsdRecord& record) {
  std::string out;
  out += kRefOpen;
  out += record.referent();
  out += kRefClose;
  out += kBoxOpen;
  out += box_text(record.box());
  out += kBoxClose;
  out += kSegOpen;
  bool first = true;
  for (const auto& b : record.bricks()) {
    if (!first) out += ' ';
    first = false;
    out += b.name();
  }
  out += kSegClose;
  return out;
}

std::string serialize_bsd(std::span<const BsdRecord> records) {
  std::string out;
  for (const auto& r : records) out += serialize_record(r);
  return out;
}

ParseResult parse_bsd(std::string_view text, const ParseOptions& options) {
  if (options.canvas_res == 0) throw ValidationError("canvas resolution must be at least 1");
  return Parser(text, options).run();
}

Raster rasterize(std::span<const BsdRecord> records, std::uint32_t canvas_res) {
  if (canvas_res == 0) throw ValidationError("canvas resolution must be at least 1");
  Raster out{{}, LabelGrid(canvas_res, canvas_res,
                           std::vector<LabelId>(std::size_t{canvas_res} * canvas_res, 0),
                           LabelTable())};
  std::vector<LabelId> merged(std::size_t{canvas_res} * canvas_res, kBackgroundId);
  std::vector<LabelTable::Entry> entries;
  std::set<std::string, std::less<>> used{std::string(kBackgroundLabel)};

  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& rec = records[i];
    BinaryGrid inst(canvas_res, canvas_res);
    if (const auto& box = rec.box()) {
      if (!box->fits(canvas_res)) {
        throw ValidationError("record " + std::to_string(i) + " box exceeds the " +
                              std::to_string(canvas_res) + "-bin canvas");
      }
      const auto bits = bits_from_bricks(rec.bricks());
      std::size_t k = 0;
      for (std::uint32_t y = box->y1; y <= box->y2; ++y) {
        for (std::uint32_t x = box->x1; x <= box->x2; ++x, ++k) {
          if (k < bits.size() && bits[k]) {
            inst.set(y, x, true);
            merged[std::size_t{y} * canvas_res + x] = static_cast<LabelId>(i + 1);
          }
        }
      }
    }
    out.instances.push_back(std::move(inst));

    // Display label: the referent with grammar-reserved characters replaced,
    // suffixed with its index when it repeats.
    std::string label = rec.referent();
    for (auto& ch : label) {
      if (ch == '|' || ch == '*' || ch == '\n' || ch == '<' || ch == '>') ch = '_';
    }
    for (std::size_t n = i; used.count(label); ++n) label = rec.referent() + "#" + std::to_string(n);
    used.insert(label);
    entries.emplace_back(static_cast<LabelId>(i + 1), std::move(label));
  }
  out.merged = LabelGrid(canvas_res, canvas_res, std::move(merged), LabelTable(std::move(entries)));
  return out;
}

}  // namespace textmask::bsd
