#include <doctest.h>

#include <algorithm>

#include "helpers.hpp"
#include "textmask/error.hpp"
#include "textmask/isd_codec.hpp"
#include "textmask/synth.hpp"

using namespace textmask;
using testutil::grid;

namespace {

LabelTable geo_table() { return LabelTable::from_labels({"sky", "sand", "sea"}); }

std::vector<LabelId> cells_of(const LabelGrid& g) { return {g.cells().begin(), g.cells().end()}; }

std::string rule_of(std::string_view payload, isd::Encoding kind, std::size_t rows, std::size_t cols) {
  try {
    isd::decode(payload, kind, rows, cols, testutil::abc_table());
  } catch (const ParseError& e) {
    return e.rule();
  }
  return "";
}

bool has_rule(const Diagnostics& d, const std::string& rule) {
  return std::any_of(d.begin(), d.end(), [&](const Diagnostic& x) { return x.rule == rule; });
}

}  // namespace

TEST_CASE("encoding names") {
  CHECK(isd::parse_encoding("RRLE") == isd::Encoding::kRrle);
  CHECK(isd::parse_encoding("isd-full") == isd::Encoding::kFull);
  CHECK(isd::parse_encoding("irle") == isd::Encoding::kIrle);
  CHECK_FALSE(isd::parse_encoding("rle").has_value());
  CHECK(std::string(isd::to_string(isd::Encoding::kIrle)) == "irle");
}

TEST_CASE("full encoding") {
  const auto g = LabelGrid(1, 3, {1, 1, 2}, geo_table());
  CHECK(isd::encode_full(g).payload == "sky|sky|sand");

  const auto big = LabelGrid(16, 16, std::vector<LabelId>(256, 0), geo_table());
  const auto t = isd::encode_full(big);
  CHECK(isd::item_count(t.payload) == 256);
  CHECK(std::count(t.payload.begin(), t.payload.end(), '\n') == 15);
  CHECK(t.payload.find('*') == std::string::npos);
}

TEST_CASE("irle and rrle examples") {
  const auto g = grid(2, 2, {1, 1, 1, 2});
  CHECK(isd::encode_irle(g).payload == "a*3|b");
  CHECK(isd::encode_rrle(g).payload == "a*2\na|b");

  const auto constant = LabelGrid(16, 16, std::vector<LabelId>(256, 0), geo_table());
  CHECK(isd::encode_irle(constant).payload == "others*256");
  const auto rrle = isd::encode_rrle(constant).payload;
  std::string expect;
  for (int r = 0; r < 16; ++r) expect += (r ? "\n" : "") + std::string("others*16");
  CHECK(rrle == expect);
}

TEST_CASE("missing label id is reported by id") {
  const auto g = grid(1, 2, {1, 3});
  const auto partial = LabelTable::from_labels({"a"});
  try {
    isd::encode(g, isd::Encoding::kFull, partial);
    FAIL("expected a ValidationError");
  } catch (const ValidationError& e) {
    CHECK(std::string(e.what()).find('3') != std::string::npos);
  }
}

TEST_CASE("decode examples") {
  const auto t = testutil::abc_table();
  CHECK(cells_of(isd::decode("a*3|b", isd::Encoding::kIrle, 2, 2, t).grid) ==
        std::vector<LabelId>{1, 1, 1, 2});
  CHECK(cells_of(isd::decode("a*2\na|b", isd::Encoding::kRrle, 2, 2, t).grid) ==
        std::vector<LabelId>{1, 1, 1, 2});

  const auto lenient = isd::decode("a*5", isd::Encoding::kIrle, 2, 2, t, ParseMode::kLenient);
  CHECK(cells_of(lenient.grid) == std::vector<LabelId>{1, 1, 1, 1});
  REQUIRE(lenient.diagnostics.size() == 1);
  CHECK(lenient.diagnostics[0].rule == "cell-count");
}

TEST_CASE("strict decode rejects with a rule name") {
  using isd::Encoding;
  CHECK(rule_of("a|z", Encoding::kFull, 1, 2) == "unknown-label");
  CHECK(rule_of("a*", Encoding::kIrle, 1, 2) == "malformed-run");
  CHECK(rule_of("a*0|a*2", Encoding::kIrle, 1, 2) == "malformed-run");
  CHECK(rule_of("a*x", Encoding::kIrle, 1, 2) == "malformed-run");
  CHECK(rule_of("a*2", Encoding::kFull, 1, 2) == "unexpected-run");
  CHECK(rule_of("a|a|a", Encoding::kIrle, 1, 2) == "cell-count");
  CHECK(rule_of("a", Encoding::kIrle, 1, 2) == "cell-count");
  CHECK(rule_of("a*2\na*2", Encoding::kIrle, 2, 2) == "unexpected-newline");
  CHECK(rule_of("a*2", Encoding::kRrle, 2, 2) == "row-count");
  CHECK(rule_of("a*2\na*2\na*2", Encoding::kRrle, 2, 2) == "row-count");
  CHECK(rule_of("a*3\na", Encoding::kRrle, 2, 2) == "row-length");
  CHECK(rule_of("", Encoding::kRrle, 1, 1) == "empty-descriptor");
  CHECK(rule_of("a||a", Encoding::kFull, 1, 2) == "empty-descriptor");
  CHECK(rule_of("a*2\na*2\n", Encoding::kRrle, 2, 2) != "");
  CHECK(rule_of(" a|a", Encoding::kFull, 1, 2) != "");
}

TEST_CASE("parse errors carry a byte offset") {
  try {
    isd::decode("a|a\na|zz", isd::Encoding::kFull, 2, 2, testutil::abc_table());
    FAIL("expected a ParseError");
  } catch (const ParseError& e) {
    CHECK(e.rule() == "unknown-label");
    CHECK(e.offset() == 6);
  }
}

TEST_CASE("lenient repairs are all reported") {
  const auto t = testutil::abc_table();
  SUBCASE("unknown label becomes background") {
    const auto r = isd::decode("a|q\nb|c", isd::Encoding::kFull, 2, 2, t, ParseMode::kLenient);
    CHECK(cells_of(r.grid) == std::vector<LabelId>{1, 0, 2, 3});
    CHECK(has_rule(r.diagnostics, "unknown-label"));
  }
  SUBCASE("short rows are padded") {
    const auto r = isd::decode("a\nb|c|c", isd::Encoding::kRrle, 2, 2, t, ParseMode::kLenient);
    CHECK(cells_of(r.grid) == std::vector<LabelId>{1, 0, 2, 3});
    CHECK(r.diagnostics.size() == 2);
  }
  SUBCASE("missing rows are padded") {
    const auto r = isd::decode("a*2", isd::Encoding::kRrle, 3, 2, t, ParseMode::kLenient);
    CHECK(cells_of(r.grid) == std::vector<LabelId>{1, 1, 0, 0, 0, 0});
    CHECK(has_rule(r.diagnostics, "row-count"));
  }
  SUBCASE("huge counts do not allocate the world") {
    const auto r = isd::decode("a*99999999999999999999", isd::Encoding::kIrle, 2, 2, t,
                               ParseMode::kLenient);
    CHECK(r.grid.cells().size() == 4);
    CHECK_FALSE(r.diagnostics.empty());
  }
  SUBCASE("empty payload") {
    const auto r = isd::decode("", isd::Encoding::kFull, 1, 2, t, ParseMode::kLenient);
    CHECK(cells_of(r.grid) == std::vector<LabelId>{0, 0});
    CHECK_FALSE(r.diagnostics.empty());
  }
}

TEST_CASE("round trip, maximality and conservation on random grids") {
  synth::Rng rng(3);
  const auto table = LabelTable::from_labels({"sky", "sand", "sea", "person", "dog"});
  for (int trial = 0; trial < 400; ++trial) {
    const std::size_t rows = rng.uniform(1, 64), cols = rng.uniform(1, 64);
    const double stick = rng.unit();
    const auto g = synth::random_grid(rng, rows, cols, table, stick);
    std::size_t lengths[3];
    for (auto kind : {isd::Encoding::kFull, isd::Encoding::kIrle, isd::Encoding::kRrle}) {
      const auto text = isd::encode(g, kind);
      CHECK(text.rows == rows);
      CHECK(text.cols == cols);
      const auto back = isd::decode(text, table);
      REQUIRE(back.grid == g);
      CHECK(back.diagnostics.empty());
      lengths[static_cast<int>(kind)] = text.payload.size();

      const auto newlines = std::count(text.payload.begin(), text.payload.end(), '\n');
      if (kind == isd::Encoding::kIrle) {
        CHECK(newlines == 0);
      } else {
        CHECK(static_cast<std::size_t>(newlines) == rows - 1);
      }
    }
    CHECK(lengths[1] <= lengths[2]);
    CHECK(lengths[2] <= lengths[0]);

    // Maximal runs: neighbouring runs differ; counts sum to the cell total.
    const auto runs = isd::runs_of(g.cells());
    std::size_t total = 0;
    for (std::size_t i = 0; i < runs.size(); ++i) {
      total += runs[i].count;
      if (i) CHECK(runs[i].label != runs[i - 1].label);
    }
    CHECK(total == rows * cols);
  }
}

TEST_CASE("rrle runs are maximal per row") {
  synth::Rng rng(17);
  const auto table = testutil::abc_table();
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t rows = rng.uniform(1, 12), cols = rng.uniform(1, 12);
    const auto g = synth::random_grid(rng, rows, cols, table, 0.6);
    const auto payload = isd::encode_rrle(g).payload;
    std::size_t start = 0;
    for (std::size_t r = 0; r < rows; ++r) {
      const auto end = std::min(payload.find('\n', start), payload.size());
      const auto line = payload.substr(start, end - start);
      std::vector<std::string> labels;
      std::size_t p = 0;
      while (p <= line.size()) {
        const auto q = std::min(line.find('|', p), line.size());
        auto item = line.substr(p, q - p);
        labels.push_back(item.substr(0, item.find('*')));
        p = q + 1;
      }
      for (std::size_t i = 1; i < labels.size(); ++i) CHECK(labels[i] != labels[i - 1]);
      start = end + 1;
    }
  }
}

TEST_CASE("labels with spaces and utf-8 round trip") {
  const auto table = LabelTable::from_labels({"man in red", "caf\xc3\xa9 sign"});
  const auto g = LabelGrid(2, 3, {1, 1, 2, 0, 2, 2}, table);
  for (auto kind : {isd::Encoding::kFull, isd::Encoding::kIrle, isd::Encoding::kRrle}) {
    CHECK(isd::decode(isd::encode(g, kind), table).grid == g);
  }
}
