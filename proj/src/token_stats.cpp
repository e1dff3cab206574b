#include "textmask/token_stats.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <iomanip>
#include <json.hpp>
#include <numeric>
#include <set>
#include <sstream>

#include "textmask/bsd_codec.hpp"
#include "textmask/error.hpp"
#include "textmask/isd_codec.hpp"

namespace textmask::tokens {

namespace {

constexpr std::string_view kSpecialTokens[] = {"<image>", "</seg>", "</ref>", "</box>",
                                               "<seg>",   "<ref>",  "<box>"};

bool is_letter(unsigned char c) { return std::isalpha(c) || c >= 0x80; }
bool is_digit(unsigned char c) { return c >= '0' && c <= '9'; }

std::size_t utf8_length(unsigned char lead) {
  if (lead < 0x80) return 1;
  if ((lead >> 5) == 0x6) return 2;
  if ((lead >> 4) == 0xe) return 3;
  if ((lead >> 3) == 0x1e) return 4;
  return 1;
}

std::string labels_text(const LabelGrid& grid, isd::Encoding kind) {
  const auto t = isd::encode(grid, kind);
  return std::string(bsd::kSegOpen) + t.payload + std::string(bsd::kSegClose);
}

}  // namespace

std::vector<std::string> ReferenceTokenizer::tokenize(std::string_view text) const {
  std::vector<std::string> out;
  std::size_t i = 0;
  const std::size_t n = text.size();
  while (i < n) {
    const auto c = static_cast<unsigned char>(text[i]);
    if (c == '<') {
      bool matched = false;
      for (auto sp : kSpecialTokens) {
        if (text.substr(i, sp.size()) == sp) {
          out.emplace_back(sp);
          i += sp.size();
          matched = true;
          break;
        }
      }
      if (matched) continue;
    }
    if (c == '\n') {
      out.emplace_back("\n");
      ++i;
    } else if (std::isspace(c)) {
      ++i;
    } else if (is_digit(c)) {
      out.emplace_back(1, text[i]);
      ++i;
    } else if (is_letter(c)) {
      std::size_t j = i;
      while (j < n && is_letter(static_cast<unsigned char>(text[j]))) ++j;
      // fgN / bgN as a whole word is one brick token.
      const auto word = text.substr(i, j - i);
      if (word == "fg" || word == "bg") {
        std::size_t k = j;
        while (k < n && is_digit(static_cast<unsigned char>(text[k]))) ++k;
        const bool bounded = k == n || !std::isalnum(static_cast<unsigned char>(text[k]));
        if (k > j && bounded && bsd::BrickToken::parse(text.substr(i, k - i))) {
          out.emplace_back(text.substr(i, k - i));
          i = k;
          continue;
        }
      }
      out.emplace_back(word);
      i = j;
    } else {
      out.emplace_back(1, text[i]);
      ++i;
    }
  }
  return out;
}

std::vector<std::string> ref_tokenize(std::string_view text) {
  return ReferenceTokenizer().tokenize(text);
}

VocabTokenizer::VocabTokenizer(const std::vector<std::string>& vocab) {
  nodes_.emplace_back();
  for (const auto& word : vocab) {
    if (word.empty()) continue;
    std::size_t cur = 0;
    for (unsigned char ch : word) {
      auto it = nodes_[cur].next.find(ch);
      if (it == nodes_[cur].next.end()) {
        nodes_.emplace_back();
        it = nodes_[cur].next.emplace(ch, nodes_.size() - 1).first;
      }
      cur = it->second;
    }
    nodes_[cur].terminal = true;
  }
}

VocabTokenizer VocabTokenizer::from_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open vocabulary '" + path.string() + "'");
  std::vector<std::string> vocab;
  for (std::string line; std::getline(in, line);) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    // Escapes let entries hold the newline token.
    for (std::size_t p = line.find("\\n"); p != std::string::npos; p = line.find("\\n", p + 1)) {
      line.replace(p, 2, "\n");
    }
    vocab.push_back(std::move(line));
  }
  return VocabTokenizer(vocab);
}

std::vector<std::string> VocabTokenizer::tokenize(std::string_view text) const {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < text.size()) {
    std::size_t cur = 0, best = 0;
    for (std::size_t j = i; j < text.size(); ++j) {
      auto it = nodes_[cur].next.find(static_cast<unsigned char>(text[j]));
      if (it == nodes_[cur].next.end()) break;
      cur = it->second;
      if (nodes_[cur].terminal) best = j + 1 - i;
    }
    if (best == 0) best = std::min(utf8_length(static_cast<unsigned char>(text[i])), text.size() - i);
    out.emplace_back(text.substr(i, best));
    i += best;
  }
  return out;
}

std::unique_ptr<Tokenizer> make_tokenizer(const TokenizerSpec& spec) {
  if (spec.kind == TokenizerSpec::Kind::kVocabFile) {
    return std::make_unique<VocabTokenizer>(VocabTokenizer::from_file(spec.vocab_path));
  }
  return std::make_unique<ReferenceTokenizer>();
}

std::string bsd_descriptor_record(const BinaryGrid& mask, const std::string& referent) {
  const auto rec = bsd::encode_record(mask, referent);
  std::string seg;
  if (const auto& box = rec.box()) {
    const auto bits = bsd::crop_bits(mask, *box);
    std::vector<LabelId> ids(bits.begin(), bits.end());
    LabelTable table({{1, referent}});
    LabelGrid sub(box->height(), box->width(), std::move(ids), table);
    seg = isd::encode(sub, isd::Encoding::kRrle).payload;
  }
  return std::string(bsd::kRefOpen) + referent + std::string(bsd::kRefClose) +
         std::string(bsd::kBoxOpen) + bsd::box_text(rec.box()) + std::string(bsd::kBoxClose) +
         std::string(bsd::kSegOpen) + seg + std::string(bsd::kSegClose);
}

EncodingCounts compare_encodings(const LabelGrid& grid, const Tokenizer& tokenizer) {
  if (grid.rows() != grid.cols()) throw ValidationError("encoding comparison needs a square grid");
  EncodingCounts c;
  c.full = tokenizer.count(labels_text(grid, isd::Encoding::kFull));
  c.irle = tokenizer.count(labels_text(grid, isd::Encoding::kIrle));
  c.rrle = tokenizer.count(labels_text(grid, isd::Encoding::kRrle));

  std::set<LabelId> present(grid.cells().begin(), grid.cells().end());
  std::string with_bricks, without;
  for (LabelId id : present) {
    if (id == kBackgroundId) continue;
    const auto bits = binarize(grid, id);
    const auto& label = grid.table().label(id);
    with_bricks += bsd::serialize_record(bsd::encode_record(bits, label));
    without += bsd_descriptor_record(bits, label);
  }
  c.bsd_bricks = tokenizer.count(with_bricks);
  c.bsd_no_bricks = tokenizer.count(without);
  return c;
}

GroupStats summarize(std::vector<std::size_t> counts) {
  GroupStats g;
  if (counts.empty()) return g;
  std::sort(counts.begin(), counts.end());
  g.samples = counts.size();
  g.min = counts.front();
  g.max = counts.back();
  g.mean = static_cast<double>(std::accumulate(counts.begin(), counts.end(), std::size_t{0})) /
           static_cast<double>(counts.size());
  const std::size_t mid = counts.size() / 2;
  g.median = counts.size() % 2 ? static_cast<double>(counts[mid])
                               : (static_cast<double>(counts[mid - 1]) + counts[mid]) / 2.0;
  return g;
}

LengthReport count_corpus(const std::vector<CorpusSample>& samples, const Tokenizer& tokenizer) {
  std::map<std::pair<std::string, std::size_t>, std::vector<std::size_t>> counts;
  for (const auto& s : samples) {
    counts[{s.encoding, s.resolution}].push_back(tokenizer.count(s.text));
  }
  LengthReport rep;
  for (auto& [key, v] : counts) rep.groups[key] = summarize(std::move(v));
  for (const auto& [key, g] : rep.groups) {
    auto full = rep.groups.find({"isd-full", key.second});
    if (full == rep.groups.end() || full->second.mean == 0) continue;
    rep.reduction_vs_full[key] = 1.0 - g.mean / full->second.mean;
  }
  return rep;
}

LengthReport compare_corpus(const std::vector<LabelGrid>& grids, const Tokenizer& tokenizer) {
  std::map<std::pair<std::string, std::size_t>, std::vector<std::size_t>> counts;
  for (const auto& g : grids) {
    const auto c = compare_encodings(g, tokenizer);
    const auto res = g.rows();
    counts[{"isd-full", res}].push_back(c.full);
    counts[{"isd-irle", res}].push_back(c.irle);
    counts[{"isd-rrle", res}].push_back(c.rrle);
    counts[{"bsd-no-bricks", res}].push_back(c.bsd_no_bricks);
    counts[{"bsd", res}].push_back(c.bsd_bricks);
  }
  LengthReport rep;
  for (auto& [key, v] : counts) rep.groups[key] = summarize(std::move(v));
  for (const auto& [key, g] : rep.groups) {
    const auto& full = rep.groups.at({"isd-full", key.second});
    if (full.mean > 0) rep.reduction_vs_full[key] = 1.0 - g.mean / full.mean;
  }
  return rep;
}

LengthReport count_corpus_file(const std::filesystem::path& path, const Tokenizer& tokenizer) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  std::vector<CorpusSample> samples;
  std::vector<std::string> failures;
  std::size_t line_no = 0;
  for (std::string line; std::getline(in, line);) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      CorpusSample s;
      s.encoding = j.at("format").get<std::string>();
      s.resolution = j.at("resolution").get<std::size_t>();
      if (j.contains("response")) {
        s.text = j["response"].get<std::string>();
      } else {
        const auto& conv = j.at("conversations");
        bool found = false;
        for (auto it = conv.rbegin(); it != conv.rend() && !found; ++it) {
          if (it->value("from", "") == "gpt") {
            s.text = it->at("value").get<std::string>();
            found = true;
          }
        }
        if (!found) throw ValidationError("no gpt turn");
      }
      samples.push_back(std::move(s));
    } catch (const std::exception& e) {
      failures.push_back("line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  auto rep = count_corpus(samples, tokenizer);
  rep.failures = std::move(failures);
  return rep;
}

std::string LengthReport::to_json() const {
  nlohmann::ordered_json j;
  auto arr = nlohmann::ordered_json::array();
  for (const auto& [key, g] : groups) {
    nlohmann::ordered_json e;
    e["encoding"] = key.first;
    e["resolution"] = key.second;
    e["samples"] = g.samples;
    e["mean"] = g.mean;
    e["median"] = g.median;
    e["min"] = g.min;
    e["max"] = g.max;
    auto r = reduction_vs_full.find(key);
    e["reduction_vs_full"] = r == reduction_vs_full.end() ? nlohmann::ordered_json(nullptr)
                                                          : nlohmann::ordered_json(r->second);
    arr.push_back(std::move(e));
  }
  j["groups"] = std::move(arr);
  j["failures"] = failures;
  return j.dump(2);
}

std::string LengthReport::to_csv() const {
  std::ostringstream os;
  os << std::setprecision(4) << std::fixed;
  os << "encoding,resolution,samples,mean,median,min,max,reduction_vs_full\n";
  for (const auto& [key, g] : groups) {
    os << key.first << ',' << key.second << ',' << g.samples << ',' << g.mean << ','
       << g.median << ',' << g.min << ',' << g.max << ',';
    if (auto r = reduction_vs_full.find(key); r != reduction_vs_full.end()) os << r->second;
    os << '\n';
  }
  return os.str();
}

}  // namespace textmask::tokens
