#include <doctest.h>

#include <algorithm>
#include <cctype>
#include <fstream>
#include <json.hpp>

#include "helpers.hpp"
#include "textmask/bsd_codec.hpp"
#include "textmask/error.hpp"
#include "textmask/isd_codec.hpp"
#include "textmask/synth.hpp"
#include "textmask/token_stats.hpp"

using namespace textmask;
using namespace textmask::tokens;

TEST_CASE("reference tokenizer examples") {
  CHECK(ref_tokenize("others*16") == std::vector<std::string>{"others", "*", "1", "6"});
  CHECK(ref_tokenize("").empty());
  CHECK(ref_tokenize("fg12 bg3") == std::vector<std::string>{"fg12", "bg3"});
  CHECK(ref_tokenize("a|b\nc") == std::vector<std::string>{"a", "|", "b", "\n", "c"});
  CHECK(ref_tokenize("black dog") == std::vector<std::string>{"black", "dog"});
  CHECK(ref_tokenize("<ref>x</ref><box>[[0 12]]</box>") ==
        std::vector<std::string>{"<ref>", "x", "</ref>", "<box>", "[", "[", "0", "1", "2", "]", "]", "</box>"});
  // Not brick names: out of range, leading zero, glued to more letters.
  CHECK(ref_tokenize("fg64") == std::vector<std::string>{"fg", "6", "4"});
  CHECK(ref_tokenize("fg07") == std::vector<std::string>{"fg", "0", "7"});
  CHECK(ref_tokenize("fgx") == std::vector<std::string>{"fgx"});
  CHECK(ref_tokenize("<se") == std::vector<std::string>{"<", "se"});
  CHECK(ref_tokenize("caf\xc3\xa9!").size() == 2);
}

TEST_CASE("reference tokenizer is total and loses only whitespace") {
  synth::Rng rng(13);
  for (int trial = 0; trial < 500; ++trial) {
    std::string s;
    const auto n = rng.uniform(0, 60);
    for (std::uint64_t i = 0; i < n; ++i) s.push_back(static_cast<char>(rng.uniform(1, 255)));
    std::string joined, stripped;
    for (const auto& t : ref_tokenize(s)) joined += t;
    for (char c : s) {
      if (c == '\n' || !std::isspace(static_cast<unsigned char>(c))) stripped.push_back(c);
    }
    CHECK(joined == stripped);
  }
}

TEST_CASE("16x16 full encoding has 256 descriptors") {
  const auto table = LabelTable::from_labels({"sky"});
  const LabelGrid g(16, 16, std::vector<LabelId>(256, 1), table);
  const auto payload = isd::encode_full(g).payload;
  std::size_t words = 0;
  for (const auto& t : ref_tokenize(payload)) words += t == "sky";
  CHECK(words == 256);
}

TEST_CASE("vocab tokenizer") {
  VocabTokenizer tok({"oth", "others", "*", "16", "\n"});
  CHECK(tok.tokenize("others*16") == std::vector<std::string>{"others", "*", "16"});
  CHECK(tok.tokenize("othx") == std::vector<std::string>{"oth", "x"});
  CHECK(tok.tokenize("\xc3\xa9") == std::vector<std::string>{"\xc3\xa9"});

  testutil::TempDir dir;
  {
    std::ofstream out(dir / "v.txt");
    out << "others\n*\n1\n6\n\\n\n";
  }
  const auto t = make_tokenizer({TokenizerSpec::Kind::kVocabFile, dir / "v.txt"});
  CHECK(t->count("others*16\nothers") == 6);
  CHECK_THROWS_AS(make_tokenizer({TokenizerSpec::Kind::kVocabFile, dir / "none.txt"}), IoError);
}

TEST_CASE("compare_encodings") {
  ReferenceTokenizer tok;
  SUBCASE("constant grid") {
    const LabelGrid g(16, 16, std::vector<LabelId>(256, 0), LabelTable::from_labels({"dog"}));
    const auto c = compare_encodings(g, tok);
    CHECK(c.full > c.rrle);
    CHECK(c.irle <= c.rrle);
    CHECK(c.bsd_bricks == 0);
  }
  SUBCASE("single pixel on 64x64") {
    std::vector<LabelId> cells(64 * 64, 0);
    cells[64 * 20 + 30] = 1;
    const LabelGrid g(64, 64, cells, LabelTable::from_labels({"dog"}));
    const auto c = compare_encodings(g, tok);
    CHECK(c.bsd_bricks * 10 < c.rrle);
    CHECK(c.bsd_no_bricks * 10 < c.rrle);
    CHECK(c.bsd_bricks <= c.bsd_no_bricks);
  }
  SUBCASE("random grids: irle never exceeds rrle") {
    synth::Rng rng(4);
    const auto table = LabelTable::from_labels({"a", "b", "c"});
    for (int trial = 0; trial < 200; ++trial) {
      const std::size_t r = rng.uniform(1, 32);
      const auto g = synth::random_grid(rng, r, r, table, rng.unit());
      const auto c = compare_encodings(g, tok);
      CHECK(c.irle <= c.rrle);
      CHECK(c.rrle <= c.full);
    }
  }
  CHECK_THROWS_AS(compare_encodings(LabelGrid(2, 3, std::vector<LabelId>(6, 0), LabelTable()), tok),
                  ValidationError);
}

TEST_CASE("descriptor record without bricks") {
  BinaryGrid m(8, 8);
  m.set(1, 1, true);
  m.set(1, 2, true);
  m.set(2, 2, true);
  CHECK(bsd_descriptor_record(m, "dog") ==
        "<ref>dog</ref><box>[[1 1 2 2]]</box><seg>dog*2\nothers|dog</seg>");
}

TEST_CASE("brick count lower bound") {
  synth::Rng rng(8);
  for (int trial = 0; trial < 200; ++trial) {
    const auto m = synth::blob_bits(rng, 64);
    const auto rec = bsd::encode_record(m, "x");
    const auto bits = bsd::crop_bits(m, *rec.box());
    std::size_t alternations = 0;
    for (std::size_t i = 1; i < bits.size(); ++i) alternations += bits[i] != bits[i - 1];
    CHECK(rec.bricks().size() >= alternations + 1);
    CHECK(rec.bricks().size() >= (bits.size() + 62) / 63);
  }
}

TEST_CASE("corpus reports") {
  ReferenceTokenizer tok;
  const LabelGrid g(16, 16, std::vector<LabelId>(256, 0), LabelTable::from_labels({"dog"}));
  std::vector<CorpusSample> samples;
  for (int i = 0; i < 5; ++i) samples.push_back({"isd-rrle", 16, isd::encode_rrle(g).payload});
  for (int i = 0; i < 5; ++i) samples.push_back({"isd-full", 16, isd::encode_full(g).payload});
  const auto rep = count_corpus(samples, tok);
  const auto& rr = rep.groups.at({"isd-rrle", 16});
  CHECK(rr.samples == 5);
  CHECK(rr.min == rr.max);
  CHECK(rr.mean == rr.median);
  CHECK(rep.reduction_vs_full.at({"isd-full", 16}) == 0.0);
  CHECK(rep.reduction_vs_full.at({"isd-rrle", 16}) > 0.5);

  // Order independence.
  std::reverse(samples.begin(), samples.end());
  CHECK(count_corpus(samples, tok).to_json() == rep.to_json());

  const auto j = nlohmann::json::parse(rep.to_json());
  CHECK(j["groups"].size() == 2);
  CHECK(rep.to_csv().rfind("encoding,resolution", 0) == 0);

  const auto s = summarize({4, 1, 3, 2});
  CHECK(s.median == 2.5);
  CHECK(s.mean == 2.5);
  CHECK(s.min == 1);
  CHECK(s.max == 4);
}

TEST_CASE("corpus file") {
  testutil::TempDir dir;
  {
    std::ofstream out(dir / "c.jsonl");
    out << R"({"format":"isd-rrle","resolution":2,"conversations":[{"from":"human","value":"q"},{"from":"gpt","value":"<seg>a*2\na|b</seg>"}]})" << '\n';
    out << R"({"format":"bsd","resolution":4,"response":"<ref>x</ref><box>[[0 0 0 0]]</box><seg>fg1</seg>"})" << '\n';
    out << "{broken\n";
  }
  const auto rep = count_corpus_file(dir / "c.jsonl", ReferenceTokenizer());
  CHECK(rep.groups.size() == 2);
  CHECK(rep.groups.at({"bsd", 4}).mean == 16);
  CHECK(rep.failures.size() == 1);
  CHECK_THROWS_AS(count_corpus_file(dir / "missing.jsonl", ReferenceTokenizer()), IoError);
}
