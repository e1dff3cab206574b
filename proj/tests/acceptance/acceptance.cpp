// Acceptance checks. Prints one PASS/FAIL line per criterion, followed by
// indented detail lines, and exits non-zero when any criterion fails.

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <json.hpp>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <unistd.h>
#include <vector>

#include "textmask/bsd_codec.hpp"
#include "textmask/dataset_builder.hpp"
#include "textmask/error.hpp"
#include "textmask/image_io.hpp"
#include "textmask/isd_codec.hpp"
#include "textmask/metrics.hpp"
#include "textmask/raster.hpp"
#include "textmask/response_grammar.hpp"
#include "textmask/synth.hpp"
#include "textmask/token_stats.hpp"

using namespace textmask;
using nlohmann::json;

namespace {

struct Outcome {
  bool pass = true;
  std::vector<std::string> details;

  void note(const std::string& s) { details.push_back(s); }
  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      note("violated: " + what);
    }
  }
};

std::string fmt(double v, int prec = 3) {
  std::ostringstream os;
  os.setf(std::ios::fixed);
  os.precision(prec);
  os << v;
  return os.str();
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// 1. Lossless I-SD round trips.
Outcome lossless_isd() {
  Outcome o;
  synth::Rng rng(1001);
  const auto table = LabelTable::from_labels({"sky", "sand", "sea", "person", "black dog", "tree", "car"});
  std::size_t ok = 0, total = 0;
  const auto t0 = std::chrono::steady_clock::now();
  for (std::size_t res : {4u, 16u, 32u, 64u}) {
    std::size_t res_ok = 0;
    for (int i = 0; i < 1000; ++i) {
      // Alternate between noise and coherent regions.
      const double stick = (i % 4) * 0.3;
      const auto g = synth::random_grid(rng, res, res, table, stick);
      for (auto kind : {isd::Encoding::kFull, isd::Encoding::kIrle, isd::Encoding::kRrle}) {
        ++total;
        try {
          const auto back = isd::decode(isd::encode(g, kind), table, ParseMode::kStrict);
          if (back.grid == g && back.diagnostics.empty()) {
            ++ok;
            ++res_ok;
          }
        } catch (const Error&) {
        }
      }
    }
    o.note("resolution " + std::to_string(res) + ": " + std::to_string(res_ok) + "/3000");
  }
  const double secs = seconds_since(t0);
  o.note("elapsed " + fmt(secs, 2) + " s");
  o.require(ok == total, "every grid round-trips (" + std::to_string(ok) + "/" + std::to_string(total) + ")");
  o.require(secs < 10.0, "total time under 10 s");
  return o;
}

// 2. Brick codec.
Outcome brick_codec() {
  Outcome o;
  synth::Rng rng(2002);
  std::size_t ok = 0, bad_lengths = 0, non_canonical = 0, bricks = 0;
  for (int i = 0; i < 1000; ++i) {
    const std::size_t n = rng.uniform(1, 4096);
    // Vary run structure from noise to long runs.
    const double flip = i % 3 == 0 ? 0.5 : rng.unit() * 0.05;
    std::vector<std::uint8_t> b(n);
    std::uint8_t cur = rng.coin() ? 1 : 0;
    for (auto& v : b) {
      if (rng.coin(flip)) cur ^= 1;
      v = cur;
    }
    const auto seq = bsd::bricks_from_bits(b);
    bricks += seq.size();
    for (const auto& t : seq) bad_lengths += t.length < 1 || t.length > 63;
    non_canonical += !bsd::is_canonical(seq);
    ok += bsd::bits_from_bricks(seq) == b;
  }
  o.note(std::to_string(ok) + "/1000 exact, " + std::to_string(bricks) + " bricks, " +
         std::to_string(bad_lengths) + " out of range, " + std::to_string(non_canonical) + " non-canonical");
  o.require(ok == 1000, "all sequences round-trip");
  o.require(bad_lengths == 0, "brick lengths within [1, 63]");
  o.require(non_canonical == 0, "canonical form");
  return o;
}

// 3. B-SD end to end.
Outcome bsd_end_to_end() {
  Outcome o;
  synth::Rng rng(3003);
  std::size_t ok = 0;
  for (int i = 0; i < 500; ++i) {
    const auto mask = synth::blob_bits(rng, 64);
    const auto& pool = synth::referent_pool();
    try {
      const auto rec = bsd::encode_record(mask, pool[rng.uniform(0, pool.size() - 1)]);
      const auto text = bsd::serialize_bsd(std::vector<bsd::BsdRecord>{rec});
      const auto parsed = bsd::parse_bsd(text, {ParseMode::kStrict, 64, false});
      const auto raster = bsd::rasterize(parsed.records, 64);
      ok += raster.instances.size() == 1 && raster.instances[0] == mask;
    } catch (const Error& e) {
      o.note(std::string("error: ") + e.what());
    }
  }
  o.note(std::to_string(ok) + "/500 masks reproduced bit-exactly");
  o.require(ok == 500, "every mask reproduced");
  return o;
}

// 4. Tokenizer calibration.
Outcome tokenizer_calibration() {
  Outcome o;
  const auto toks = tokens::ref_tokenize("others*16");
  std::string joined;
  for (const auto& t : toks) joined += "[" + t + "]";
  o.note("ref_tokenize(\"others*16\") = " + joined);
  o.require(toks.size() == 4, "exactly 4 tokens");

  const auto table = LabelTable::from_labels({"sky", "sand"});
  synth::Rng rng(4004);
  const auto g = synth::random_grid(rng, 16, 16, table, 0.5);
  const auto payload = isd::encode_full(g).payload;
  std::size_t words = 0;
  for (const auto& t : tokens::ref_tokenize(payload)) words += t == "sky" || t == "sand" || t == "others";
  o.note("16x16 full encoding: " + std::to_string(isd::item_count(payload)) + " items, " +
         std::to_string(words) + " descriptor tokens");
  o.require(isd::item_count(payload) == 256 && words == 256, "256 descriptor occurrences");
  return o;
}

struct SceneCounts {
  tokens::EncodingCounts at64;
  tokens::EncodingCounts at16;
};

const std::vector<SceneCounts>& scene_corpus() {
  static const std::vector<SceneCounts> corpus = [] {
    std::vector<SceneCounts> out;
    synth::Rng rng(5005);
    tokens::ReferenceTokenizer tok;
    for (int i = 0; i < 300; ++i) {
      const auto scene = synth::blob_scene(rng, 256);
      out.push_back({tokens::compare_encodings(downsample_mask(scene.mask, 64, 64), tok),
                     tokens::compare_encodings(downsample_mask(scene.mask, 16, 16), tok)});
    }
    return out;
  }();
  return corpus;
}

double mean_of(const std::vector<SceneCounts>& c, std::function<std::size_t(const SceneCounts&)> f) {
  double s = 0;
  for (const auto& x : c) s += static_cast<double>(f(x));
  return s / static_cast<double>(c.size());
}

// 5. Efficiency ordering at 64x64.
Outcome efficiency_ordering() {
  Outcome o;
  const auto& c = scene_corpus();
  const double bricks = mean_of(c, [](auto& s) { return s.at64.bsd_bricks; });
  const double plain = mean_of(c, [](auto& s) { return s.at64.bsd_no_bricks; });
  const double rrle = mean_of(c, [](auto& s) { return s.at64.rrle; });
  const double gap1 = (plain - bricks) / plain, gap2 = (rrle - plain) / rrle;
  o.note(std::to_string(c.size()) + " scenes; mean tokens: B-SD with bricks " + fmt(bricks, 1) +
         ", B-SD without bricks " + fmt(plain, 1) + ", I-SD R-RLE " + fmt(rrle, 1));
  o.note("relative gaps " + fmt(gap1) + " and " + fmt(gap2));
  o.require(c.size() >= 200, "at least 200 scenes");
  o.require(bricks < plain && plain < rrle, "bricks < no bricks < R-RLE");
  o.require(gap1 >= 0.2 && gap2 >= 0.2, "each gap at least 20%");
  return o;
}

// 6. Compression at 16x16.
Outcome compression() {
  Outcome o;
  const auto& c = scene_corpus();
  const double full = mean_of(c, [](auto& s) { return s.at16.full; });
  const double rrle = mean_of(c, [](auto& s) { return s.at16.rrle; });
  std::size_t irle_over = 0;
  for (const auto& s : c) irle_over += s.at16.irle > s.at16.rrle;
  o.note("mean tokens: full " + fmt(full, 1) + ", R-RLE " + fmt(rrle, 1) + " (ratio " + fmt(rrle / full) + ")");
  o.note(std::to_string(irle_over) + " samples with I-RLE longer than R-RLE");
  o.require(rrle <= 0.5 * full, "R-RLE at most half of full");
  o.require(irle_over == 0, "I-RLE never longer than R-RLE");
  return o;
}

// 7. Metrics oracle.
Outcome metrics_oracle() {
  Outcome o;
  auto grid9 = [](unsigned m) {
    BinaryGrid g(3, 3);
    for (unsigned i = 0; i < 9; ++i) g.set(i / 3, i % 3, (m >> i) & 1u);
    return g;
  };
  std::vector<BinaryGrid> all;
  for (unsigned m = 0; m < 512; ++m) all.push_back(grid9(m));
  std::size_t mismatches = 0, checked = 0;
  for (unsigned x = 0; x < 512; ++x) {
    for (unsigned y = 0; y < 512; ++y) {
      std::size_t i = 0, u = 0;
      for (unsigned k = 0; k < 9; ++k) {
        const bool a = (x >> k) & 1u, b = (y >> k) & 1u;
        i += a && b;
        u += a || b;
      }
      const double expect = u == 0 ? 1.0 : static_cast<double>(i) / static_cast<double>(u);
      mismatches += metrics::iou(all[x], all[y]) != expect;
      ++checked;
    }
  }
  o.note("iou: " + std::to_string(checked - mismatches) + "/" + std::to_string(checked) + " pairs match");
  o.require(checked == 262144 && mismatches == 0, "exhaustive 3x3 oracle");

  // Pairs given as (intersection, union) on a 1x8 strip.
  auto pair_iu = [](std::size_t inter, std::size_t uni) {
    BinaryGrid p(1, 8), g(1, 8);
    for (std::size_t k = 0; k < uni; ++k) g.set(0, k, true);
    for (std::size_t k = 0; k < inter; ++k) p.set(0, k, true);
    return metrics::EvalPair{p, g, {}, {}, ""};
  };
  auto no_target = [](bool empty_prediction) {
    BinaryGrid p(1, 8);
    if (!empty_prediction) p.set(0, 0, true);
    return metrics::EvalPair{p, BinaryGrid(1, 8), {}, {}, ""};
  };
  auto check = [&](const char* name, double got, double expect) {
    const bool ok = std::abs(got - expect) < 1e-12;
    o.note(std::string(name) + " = " + fmt(got, 4) + " (expected " + fmt(expect, 4) + ")");
    o.require(ok, name);
  };
  const std::vector<metrics::EvalPair> ciou_case{pair_iu(1, 2), pair_iu(0, 2)};
  check("cIoU of (I=1,U=2),(I=0,U=2)", metrics::ciou(ciou_case), 0.25);
  const std::vector<metrics::EvalPair> single{pair_iu(1, 3)};
  check("cIoU of a single pair", metrics::ciou(single), 1.0 / 3);
  const std::vector<metrics::EvalPair> giou_case{pair_iu(1, 2), no_target(false)};
  check("gIoU of {0.5, failed no-target}", metrics::giou(giou_case), 0.25);
  const std::vector<metrics::EvalPair> all_nt{no_target(true), no_target(true), no_target(true)};
  check("gIoU of correct no-target pairs", metrics::giou(all_nt), 1.0);
  const std::vector<metrics::EvalPair> fn{no_target(false)};
  check("gIoU of a false negative", metrics::giou(fn), 0.0);
  const std::vector<metrics::EvalPair> miou_case{pair_iu(4, 4), pair_iu(0, 4)};
  check("mIoU of {1, 0}", metrics::miou(miou_case), 0.5);
  check("gIoU = mIoU without no-target pairs", metrics::giou(miou_case), metrics::miou(miou_case));
  return o;
}

// 8. Robust parsing under mutation.
struct Mutant {
  std::string text;
  Expectation expected;
};

std::string mutate(synth::Rng& rng, std::string s) {
  static const std::vector<std::string> markers = {"<seg>", "</seg>", "<ref>", "</ref>", "<box>", "</box>"};
  static const std::vector<std::string> junk = {"zzz", "fg99", "bg0", "*", "|", "\n", "fg7", "bg63",
                                                "others", "dog", "*x", "]]", "[[", "12", "<", "fg"};
  const auto kind = rng.uniform(0, 2);
  if (kind == 0 && !s.empty()) {  // truncation
    s.resize(rng.uniform(0, s.size() - 1));
  } else if (kind == 1) {  // marker deletion
    std::vector<std::size_t> hits;
    std::vector<std::size_t> lens;
    for (const auto& m : markers) {
      for (auto p = s.find(m); p != std::string::npos; p = s.find(m, p + 1)) {
        hits.push_back(p);
        lens.push_back(m.size());
      }
    }
    if (!hits.empty()) {
      const auto k = rng.uniform(0, hits.size() - 1);
      s.erase(hits[k], lens[k]);
    }
  } else {  // token substitution
    std::vector<std::pair<std::size_t, std::size_t>> spans;
    std::size_t i = 0;
    while (i < s.size()) {
      std::size_t j = i;
      const bool alnum = std::isalnum(static_cast<unsigned char>(s[i]));
      if (alnum) {
        while (j < s.size() && std::isalnum(static_cast<unsigned char>(s[j]))) ++j;
      } else {
        j = i + 1;
      }
      spans.emplace_back(i, j - i);
      i = j;
    }
    if (!spans.empty()) {
      const auto [p, n] = spans[rng.uniform(0, spans.size() - 1)];
      s.replace(p, n, junk[rng.uniform(0, junk.size() - 1)]);
    }
  }
  return s;
}

Outcome robust_parsing() {
  Outcome o;
  synth::Rng rng(8008);
  const auto table = LabelTable::from_labels({"dog", "grass", "sky"});
  std::size_t crashes = 0, affected = 0, diagnosed = 0, affected_undiagnosed = 0, identical = 0,
              silent_changes = 0;
  std::map<std::string, std::size_t> by_rule;
  const int kMutants = 10000;
  for (int i = 0; i < kMutants; ++i) {
    std::string original;
    Expectation expected;
    if (i % 2 == 0) {
      const std::size_t res = rng.uniform(2, 16);
      const auto g = synth::random_grid(rng, res, res, table, 0.7);
      const auto kind = i % 4 == 0 ? isd::Encoding::kRrle : isd::Encoding::kFull;
      original = render_isd_response(isd::encode(g, kind));
      expected = IsdExpectation{res, res, table, kind};
    } else {
      const auto res = static_cast<std::uint32_t>(rng.uniform(4, 64));
      std::vector<bsd::BsdRecord> recs;
      const auto n = rng.uniform(1, 3);
      for (std::uint64_t k = 0; k < n; ++k) {
        recs.push_back(bsd::encode_record(synth::blob_bits(rng, res, true), "roi" + std::to_string(k)));
      }
      original = render_bsd_response(recs);
      expected = BsdExpectation{res};
    }
    std::string text = original;
    const auto rounds = rng.uniform(1, 3);
    for (std::uint64_t r = 0; r < rounds; ++r) text = mutate(rng, text);
    if (text == original) ++identical;

    // A line is affected when it no longer passes the strict grammar.
    bool strict_ok = true;
    std::optional<ParsedResponse> strict;
    try {
      strict = parse_response(text, expected, ParseMode::kStrict);
    } catch (const ParseError&) {
      strict_ok = false;
    } catch (const std::exception& e) {
      ++crashes;
      o.note(std::string("strict parser raised a non-parse error: ") + e.what());
      continue;
    }
    try {
      const auto lenient = parse_response(text, expected, ParseMode::kLenient);
      for (const auto& d : lenient.diagnostics) {
        ++by_rule[d.rule];
        if (d.offset > text.size()) o.require(false, "diagnostic offset inside the text");
      }
      if (!strict_ok) {
        ++affected;
        if (lenient.diagnostics.empty()) ++affected_undiagnosed;
      }
      if (!lenient.diagnostics.empty()) ++diagnosed;
      // Zero diagnostics must mean nothing was repaired.
      if (strict_ok && lenient.diagnostics.empty()) {
        const bool same = std::holds_alternative<IsdExpectation>(expected)
                              ? *strict->grid == *lenient.grid
                              : strict->records == lenient.records;
        silent_changes += !same;
      }
    } catch (const std::exception& e) {
      ++crashes;
      o.note(std::string("lenient parser raised: ") + e.what());
    }
  }
  o.note(std::to_string(kMutants) + " mutants (" + std::to_string(identical) + " unchanged by mutation), " +
         std::to_string(crashes) + " crashes");
  o.note(std::to_string(affected) + " strict-invalid, " + std::to_string(diagnosed) +
         " with lenient diagnostics, " + std::to_string(affected_undiagnosed) + " invalid without a diagnostic");
  std::string rules;
  for (const auto& [rule, n] : by_rule) rules += (rules.empty() ? "" : ", ") + rule + "=" + std::to_string(n);
  o.note("diagnostics by rule: " + rules);
  o.require(crashes == 0, "lenient parsing never crashes");
  o.require(diagnosed >= affected && affected_undiagnosed == 0, "every affected line carries a diagnostic");
  o.require(silent_changes == 0, "clean lenient parses equal strict parses");
  return o;
}

// 9. Dataset builder self-consistency.
//
// Masks are drawn as 16x16 designs with every cell blown up to a 16x16 pixel
// block, so the ground truth at 16x16 and at 64x64 follows from the design
// alone, whatever the resampling rule.
struct Truth {
  std::vector<std::string> isd_text;            // 16x16 cell labels
  std::vector<std::string> referents;           // one per B-SD record
  std::vector<std::vector<std::uint8_t>> bits;  // 64x64 masks, one per record
};

std::vector<std::uint16_t> blow_up(const std::vector<LabelId>& design, std::size_t factor) {
  const std::size_t side = 16 * factor;
  std::vector<std::uint16_t> px(side * side);
  for (std::size_t y = 0; y < side; ++y) {
    for (std::size_t x = 0; x < side; ++x) px[y * side + x] = static_cast<std::uint16_t>(design[(y / factor) * 16 + x / factor]);
  }
  return px;
}

std::vector<std::uint8_t> canvas_bits(const std::vector<LabelId>& design, LabelId id) {
  std::vector<std::uint8_t> b(64 * 64);
  for (std::size_t y = 0; y < 64; ++y) {
    for (std::size_t x = 0; x < 64; ++x) b[y * 64 + x] = design[(y / 4) * 16 + x / 4] == id;
  }
  return b;
}

Outcome builder_consistency() {
  Outcome o;
  const auto dir = std::filesystem::temp_directory_path() / ("textmask_acceptance_" + std::to_string(::getpid()));
  std::filesystem::create_directories(dir);
  synth::Rng rng(9009);
  const auto& pool = synth::referent_pool();
  const std::vector<std::string> semantic_names = {"sky", "sand", "sea", "road", "grass"};
  std::map<std::string, Truth> truth;
  {
    std::ofstream ann(dir / "annotations.jsonl");
    for (int i = 0; i < 1000; ++i) {
      const std::string id = "s" + std::to_string(i);
      const auto kind = i % 5;
      Truth t;
      json a{{"id", id}, {"image", "images/" + id + ".jpg"}};
      const std::size_t n = kind == 1 ? 2 : kind == 4 ? rng.uniform(1, 3) : 1;
      std::vector<LabelId> design;
      if (kind != 3) {
        LabelTable ids = LabelTable::from_labels(std::vector<std::string>(semantic_names.begin(), semantic_names.begin() + n));
        const auto g = synth::random_grid(rng, 16, 16, ids, 0.85);
        design.assign(g.cells().begin(), g.cells().end());
        // Keep at least one cell per instance so every record is targeted.
        for (LabelId k = 1; k <= n; ++k) design[rng.uniform(0, 255)] = k;
        for (LabelId k = 1; k <= n; ++k) {
          if (std::find(design.begin(), design.end(), k) == design.end()) design[k] = k;
        }
      }
      const std::string ext = i % 2 ? ".png" : ".pgm";
      if (kind == 0 || kind == 1 || kind == 4) {
        std::vector<std::string> refs;
        std::set<std::string> used;
        while (refs.size() < n) {
          const auto r = pool[rng.uniform(0, pool.size() - 1)];
          if (used.insert(r).second) refs.push_back(r);
        }
        json inst = json::array();
        for (LabelId k = 1; k <= n; ++k) {
          std::vector<LabelId> one(design.size());
          std::transform(design.begin(), design.end(), one.begin(), [k](LabelId v) { return v == k ? LabelId{255} : LabelId{0}; });
          const auto name = id + "_" + std::to_string(k) + ext;
          io::write_gray(dir / name, io::GrayImage{256, 256, 8, blow_up(one, 16)});
          inst.push_back(name);
          t.bits.push_back(canvas_bits(design, k));
          t.referents.push_back(kind == 4 ? "roi" + std::to_string(k - 1) : refs[k - 1]);
        }
        a["task"] = kind == 4 ? "reasoning" : "referring";
        if (kind == 4) {
          a["query"] = "Which regions would a hiker use to rest?";
        } else {
          a["referents"] = refs;
        }
        a["instances"] = inst;
        for (auto v : design) t.isd_text.push_back(v == 0 ? "others" : t.referents[v - 1]);
      } else if (kind == 2) {
        // Semantic: label ids on disk are sparse and unordered.
        const LabelId disk_id = static_cast<LabelId>(rng.uniform(3, 40));
        std::vector<LabelId> on_disk(design.size());
        std::transform(design.begin(), design.end(), on_disk.begin(), [&](LabelId v) { return v ? disk_id : 0; });
        io::write_gray(dir / (id + ext), io::GrayImage{256, 256, 8, blow_up(on_disk, 16)});
        json table = {{"0", "others"}, {std::to_string(disk_id), "sky"}, {std::to_string(disk_id + 50), "sea"}};
        std::ofstream(dir / (id + ".json")) << table.dump();
        a["task"] = "semantic";
        a["mask"] = id + ext;
        a["labels"] = id + ".json";
        t.referents = {"sky"};
        t.bits.push_back(canvas_bits(design, 1));
        for (auto v : design) t.isd_text.push_back(v ? "sky" : "others");
      } else {
        a["task"] = "generalized_referring";
        a["referents"] = {pool[rng.uniform(0, pool.size() - 1)]};
        a["no_target"] = true;
        t.referents = {a["referents"][0]};
        t.bits.emplace_back(64 * 64, 0);
        t.isd_text.assign(256, "others");
      }
      ann << a.dump() << '\n';
      truth[id] = std::move(t);
    }
  }

  dataset::CorpusConfig cfg;
  cfg.resolution = 16;
  cfg.canvas_res = 64;
  cfg.formats = {dataset::SampleFormat::kIsdFull, dataset::SampleFormat::kIsdRrle, dataset::SampleFormat::kBsd};
  cfg.build.verify = false;  // checked here instead
  cfg.threads = 1;
  const auto t0 = std::chrono::steady_clock::now();
  const auto rep = dataset::build_corpus(dir / "annotations.jsonl", dir / "out_a.jsonl", cfg);
  cfg.threads = 4;
  dataset::build_corpus(dir / "annotations.jsonl", dir / "out_b.jsonl", cfg);
  o.note(std::to_string(rep.annotations) + " annotations -> " + std::to_string(rep.samples) + " samples, " +
         std::to_string(rep.failures.size()) + " failures (" + fmt(seconds_since(t0), 2) + " s for two builds)");
  for (const auto& f : rep.failures) o.note("line " + std::to_string(f.line) + ": " + f.message);
  o.require(rep.annotations == 1000 && rep.failures.empty(), "every annotation converts");
  o.require(rep.samples == 3000, "one sample per annotation and format");

  std::size_t checked = 0, consistent = 0;
  std::ifstream in(dir / "out_a.jsonl");
  for (std::string line; std::getline(in, line);) {
    ++checked;
    try {
      const auto j = json::parse(line);
      const auto& t = truth.at(j.at("id").get<std::string>());
      const std::string format = j.at("format");
      const std::string response = j.at("conversations").at(1).at("value");
      if (format == "bsd") {
        const auto r = parse_response(response, BsdExpectation{64}, ParseMode::kStrict);
        const auto raster = bsd::rasterize(r.records, 64);
        bool ok = r.records.size() == t.referents.size();
        for (std::size_t k = 0; ok && k < r.records.size(); ++k) {
          ok = r.records[k].referent() == t.referents[k] &&
               std::equal(raster.instances[k].bits().begin(), raster.instances[k].bits().end(),
                          t.bits[k].begin(), t.bits[k].end());
        }
        consistent += ok;
      } else {
        const auto table = io::parse_label_table(j.at("labels").dump());
        const auto enc = format == "isd-full" ? isd::Encoding::kFull : isd::Encoding::kRrle;
        const auto r = parse_response(response, IsdExpectation{16, 16, table, enc}, ParseMode::kStrict);
        bool ok = true;
        for (std::size_t k = 0; ok && k < 256; ++k) ok = table.label(r.grid->cells()[k]) == t.isd_text[k];
        consistent += ok;
      }
    } catch (const std::exception& e) {
      if (checked - consistent < 5) o.note(std::string("sample failed: ") + e.what());
    }
  }
  o.note(std::to_string(consistent) + "/" + std::to_string(checked) +
         " samples strict-parse and reconstruct the ground truth");
  o.require(checked == 3000 && consistent == checked, "every sample reconstructs its ground truth");

  auto slurp = [](const std::filesystem::path& p) {
    std::ifstream f(p, std::ios::binary);
    std::stringstream ss;
    ss << f.rdbuf();
    return ss.str();
  };
  const bool identical = slurp(dir / "out_a.jsonl") == slurp(dir / "out_b.jsonl");
  o.note(std::string("re-run with 4 threads is ") + (identical ? "byte-identical" : "DIFFERENT"));
  o.require(identical, "byte-identical re-run");

  const auto v = validate_corpus(dir / "out_a.jsonl", ValidateOptions{});
  o.note("validate_corpus: " + std::to_string(v.ok_lines) + "/" + std::to_string(v.lines) + " lines clean");
  o.require(v.error_lines == 0, "validator finds no errors");

  std::error_code ec;
  std::filesystem::remove_all(dir, ec);
  return o;
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"lossless I-SD round trips (4/16/32/64, full/irle/rrle)", lossless_isd},
      {"brick codec round trips and canonical form", brick_codec},
      {"B-SD encode/serialize/parse/rasterize on 64x64 blobs", bsd_end_to_end},
      {"reference tokenizer calibration", tokenizer_calibration},
      {"token efficiency ordering at 64x64", efficiency_ordering},
      {"R-RLE compression at 16x16", compression},
      {"metrics oracle", metrics_oracle},
      {"lenient parsing of mutated responses", robust_parsing},
      {"dataset builder self-consistency", builder_consistency},
  };
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o.pass = false;
      o.note(std::string("unexpected exception: ") + e.what());
    }
    std::cout << (o.pass ? "PASS" : "FAIL") << "  criterion " << i + 1 << ": " << criteria[i].first << '\n';
    for (const auto& d : o.details) std::cout << "      " << d << '\n';
    std::cout.flush();
    failures += !o.pass;
  }
  std::cout << (failures == 0 ? "all criteria passed" : std::to_string(failures) + " criteria failed") << '\n';
  return failures == 0 ? 0 : 1;
}
