#include "textmask/response_grammar.hpp"

#include <algorithm>
#include <fstream>
#include <json.hpp>
#include <thread>

#include "textmask/image_io.hpp"

namespace textmask {

namespace {

using nlohmann::json;

std::size_t count_of(std::string_view text, std::string_view needle) {
  std::size_t n = 0;
  for (auto p = text.find(needle); p != std::string_view::npos; p = text.find(needle, p + 1)) ++n;
  return n;
}

ParsedResponse parse_isd(std::string_view text, const IsdExpectation& ex, ParseMode mode) {
  ParsedResponse out;
  out.task_kind = TaskKind::kIsd;
  auto report = [&](const std::string& rule, std::size_t offset, const std::string& msg,
                    Severity sev = Severity::kWarning) {
    if (mode == ParseMode::kStrict) throw ParseError(rule, offset, msg);
    out.diagnostics.push_back({sev, rule, offset, msg});
  };

  const auto open = text.find(bsd::kSegOpen);
  const auto close = text.rfind(bsd::kSegClose);
  std::size_t begin = 0;
  std::size_t end = text.size();

  if (open == std::string_view::npos && close == std::string_view::npos) {
    report("missing-seg", 0, "response has no <seg> span", Severity::kError);
    if (text.substr(0, kResponsePrefix.size()) == kResponsePrefix) begin = kResponsePrefix.size();
  } else if (open == std::string_view::npos) {
    report("missing-seg-open", close, "</seg> without <seg>");
    if (text.substr(0, kResponsePrefix.size()) == kResponsePrefix) begin = kResponsePrefix.size();
    end = close;
  } else if (close == std::string_view::npos || close < open) {
    report(close == std::string_view::npos ? "unterminated-seg" : "marker-order",
           open, "<seg> is not closed; payload read to end of text");
    begin = open + bsd::kSegOpen.size();
  } else {
    begin = open + bsd::kSegOpen.size();
    end = close;
    if (count_of(text, bsd::kSegOpen) > 1 || count_of(text, bsd::kSegClose) > 1) {
      const auto second = text.find(bsd::kSegOpen, begin);
      report("unbalanced-seg", second == std::string_view::npos ? begin : second,
             "more than one <seg> span; using the outermost");
    }
  }

  std::string_view payload = text.substr(begin, end - begin);
  // Markers of the payload span itself must not leak into the codec.
  std::string cleaned;
  if (mode == ParseMode::kLenient &&
      (payload.find(bsd::kSegOpen) != std::string_view::npos ||
       payload.find(bsd::kSegClose) != std::string_view::npos)) {
    cleaned.assign(payload);
    for (auto marker : {bsd::kSegOpen, bsd::kSegClose}) {
      for (auto p = cleaned.find(marker); p != std::string::npos; p = cleaned.find(marker, p)) {
        cleaned.erase(p, marker.size());
      }
    }
    payload = cleaned;
  }

  auto decoded = isd::decode(payload, ex.encoding, ex.rows, ex.cols, ex.table, mode);
  rebase(decoded.diagnostics, begin);
  out.diagnostics.insert(out.diagnostics.end(), decoded.diagnostics.begin(),
                         decoded.diagnostics.end());
  out.descriptors = isd::DescriptorText{ex.encoding, std::string(payload), ex.rows, ex.cols};
  out.grid = std::move(decoded.grid);
  return out;
}

ParsedResponse parse_bsd_response(std::string_view text, const BsdExpectation& ex,
                                  ParseMode mode) {
  ParsedResponse out;
  out.task_kind = TaskKind::kBsd;
  auto parsed = bsd::parse_bsd(text, {mode, ex.canvas_res, true});
  out.records = std::move(parsed.records);
  out.diagnostics = std::move(parsed.diagnostics);
  if (out.records.empty()) {
    if (mode == ParseMode::kStrict) throw ParseError("no-records", 0, "response holds no record");
    out.diagnostics.push_back({Severity::kError, "no-records", 0, "response holds no record"});
  }
  return out;
}

std::optional<Expectation> expectation_from_metadata(const json& j) {
  if (!j.contains("format") || !j["format"].is_string()) return std::nullopt;
  const auto fmt = j["format"].get<std::string>();
  if (fmt == "bsd") {
    BsdExpectation ex;
    if (j.contains("resolution")) ex.canvas_res = j["resolution"].get<std::uint32_t>();
    return ex;
  }
  const auto enc = isd::parse_encoding(fmt);
  if (!enc) return std::nullopt;
  IsdExpectation ex;
  ex.encoding = *enc;
  if (j.contains("resolution")) ex.rows = ex.cols = j["resolution"].get<std::size_t>();
  if (j.contains("labels")) ex.table = io::parse_label_table(j["labels"].dump());
  return ex;
}

std::optional<std::string> response_text(const json& j, const std::string& field) {
  if (j.contains(field) && j[field].is_string()) return j[field].get<std::string>();
  if (j.contains("conversations") && j["conversations"].is_array()) {
    const auto& conv = j["conversations"];
    for (auto it = conv.rbegin(); it != conv.rend(); ++it) {
      if (it->value("from", "") == "gpt" && it->contains("value") && (*it)["value"].is_string()) {
        return (*it)["value"].get<std::string>();
      }
    }
  }
  return std::nullopt;
}

LineResult check_line(std::size_t index, const std::string& line, const ValidateOptions& opts) {
  LineResult r;
  r.line = index + 1;
  auto fail = [&](const std::string& rule, std::size_t offset, const std::string& msg) {
    r.ok = false;
    r.diagnostics.push_back({Severity::kError, rule, offset, msg});
  };
  json j;
  try {
    j = json::parse(line);
  } catch (const json::parse_error& e) {
    fail("json", e.byte, "line is not valid JSON");
    return r;
  }
  if (!j.is_object()) {
    fail("json", 0, "line is not a JSON object");
    return r;
  }
  if (j.contains("id")) r.id = j["id"].is_string() ? j["id"].get<std::string>() : j["id"].dump();
  auto text = response_text(j, opts.field);
  if (!text) {
    fail("missing-field", 0, "no '" + opts.field + "' field and no gpt turn");
    return r;
  }
  std::optional<Expectation> expected = opts.expected;
  if (!expected) {
    try {
      expected = expectation_from_metadata(j);
    } catch (const std::exception& e) {
      fail("metadata", 0, e.what());
      return r;
    }
  }
  if (!expected) {
    fail("metadata", 0, "no expectation given and line carries no format metadata");
    return r;
  }
  try {
    auto parsed = parse_response(*text, *expected, opts.mode);
    r.diagnostics = std::move(parsed.diagnostics);
    r.ok = std::none_of(r.diagnostics.begin(), r.diagnostics.end(),
                        [](const Diagnostic& d) { return d.severity == Severity::kError; });
  } catch (const ParseError& e) {
    fail(e.rule(), e.offset(), e.what());
  } catch (const ValidationError& e) {
    fail("invalid", 0, e.what());
  }
  return r;
}

}  // namespace

bool ParsedResponse::has_errors() const {
  return std::any_of(diagnostics.begin(), diagnostics.end(),
                     [](const Diagnostic& d) { return d.severity == Severity::kError; });
}

ParsedResponse parse_response(std::string_view text, const Expectation& expected, ParseMode mode) {
  if (const auto* isd_ex = std::get_if<IsdExpectation>(&expected)) {
    return parse_isd(text, *isd_ex, mode);
  }
  return parse_bsd_response(text, std::get<BsdExpectation>(expected), mode);
}

std::string render_isd_response(const isd::DescriptorText& text) {
  std::string out(kResponsePrefix);
  out += bsd::kSegOpen;
  out += text.payload;
  out += bsd::kSegClose;
  return out;
}

std::string render_bsd_response(std::span<const bsd::BsdRecord> records) {
  return std::string(kResponsePrefix) + bsd::serialize_bsd(records);
}

CorpusReport validate_lines(const std::vector<std::string>& lines, const ValidateOptions& options) {
  std::vector<std::size_t> todo;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (lines[i].find_first_not_of(" \t\r") != std::string::npos) todo.push_back(i);
  }
  std::vector<LineResult> results(todo.size());
  const unsigned workers = std::max(1u, std::min<unsigned>(options.threads, todo.size()));
  {
    std::vector<std::jthread> pool;
    for (unsigned w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] {
        for (std::size_t k = w; k < todo.size(); k += workers) {
          results[k] = check_line(todo[k], lines[todo[k]], options);
        }
      });
    }
  }

  CorpusReport rep;
  rep.lines = results.size();
  for (auto& r : results) {
    (r.ok ? rep.ok_lines : rep.error_lines)++;
    for (const auto& d : r.diagnostics) {
      ++rep.by_rule[d.rule];
      if (d.severity == Severity::kWarning) ++rep.warning_count;
    }
  }
  rep.results = std::move(results);
  return rep;
}

CorpusReport validate_corpus(const std::filesystem::path& path, const ValidateOptions& options) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  std::vector<std::string> lines;
  for (std::string line; std::getline(in, line);) lines.push_back(std::move(line));
  if (in.bad()) throw IoError("failed reading '" + path.string() + "'");
  return validate_lines(lines, options);
}

}  // namespace textmask
