#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "textmask/bsd_codec.hpp"
#include "textmask/cli.hpp"
#include "textmask/error.hpp"
#include "textmask/isd_codec.hpp"
#include "textmask/metrics.hpp"
#include "textmask/raster.hpp"
#include "textmask/response_grammar.hpp"
#include "textmask/token_stats.hpp"

namespace py = pybind11;
using namespace textmask;

namespace {

using Rows = std::vector<std::vector<LabelId>>;
using BitRows = std::vector<std::vector<std::uint8_t>>;

// Labels come in as {id: name}; id 0 defaults to "others" when missing.
LabelTable table_from(const std::map<LabelId, std::string>& labels) {
  std::vector<LabelTable::Entry> entries(labels.begin(), labels.end());
  if (!labels.count(0)) entries.insert(entries.begin(), {0, "others"});
  return LabelTable(std::move(entries));
}

std::map<LabelId, std::string> table_to(const LabelTable& t) {
  std::map<LabelId, std::string> m;
  for (const auto& [id, name] : t.entries()) m[id] = name;
  return m;
}

template <typename T>
std::vector<T> flatten(const std::vector<std::vector<T>>& rows, std::size_t& r, std::size_t& c) {
  r = rows.size();
  c = r ? rows[0].size() : 0;
  std::vector<T> flat;
  flat.reserve(r * c);
  for (const auto& row : rows) {
    if (row.size() != c) throw ValidationError("rows must all have the same length");
    flat.insert(flat.end(), row.begin(), row.end());
  }
  return flat;
}

LabelGrid grid_from(const Rows& rows, const std::map<LabelId, std::string>& labels) {
  std::size_t r, c;
  auto flat = flatten(rows, r, c);
  return LabelGrid(r, c, std::move(flat), table_from(labels));
}

BinaryGrid bits_from(const BitRows& rows) {
  std::size_t r, c;
  auto flat = flatten(rows, r, c);
  for (auto& v : flat) v = v ? 1 : 0;
  return BinaryGrid(r, c, std::move(flat));
}

Rows rows_of(const LabelGrid& g) {
  Rows out(g.rows(), std::vector<LabelId>(g.cols()));
  for (std::size_t r = 0; r < g.rows(); ++r) {
    for (std::size_t c = 0; c < g.cols(); ++c) out[r][c] = g.at(r, c);
  }
  return out;
}

BitRows rows_of(const BinaryGrid& g) {
  BitRows out(g.rows(), std::vector<std::uint8_t>(g.cols()));
  for (std::size_t r = 0; r < g.rows(); ++r) {
    for (std::size_t c = 0; c < g.cols(); ++c) out[r][c] = g.at(r, c);
  }
  return out;
}

isd::Encoding encoding_from(const std::string& name) {
  auto e = isd::parse_encoding(name);
  if (!e) throw ConfigError("unknown encoding: " + name);
  return *e;
}

ParseMode mode_of(bool lenient) { return lenient ? ParseMode::kLenient : ParseMode::kStrict; }

py::list diagnostics_of(const Diagnostics& ds) {
  py::list out;
  for (const auto& d : ds) {
    py::dict e;
    e["severity"] = to_string(d.severity);
    e["rule"] = d.rule;
    e["offset"] = d.offset;
    e["message"] = d.message;
    out.append(e);
  }
  return out;
}

py::object box_of(const std::optional<BoxBins>& b) {
  if (!b) return py::none();
  return py::make_tuple(b->x1, b->y1, b->x2, b->y2);
}

py::list records_of(const std::vector<bsd::BsdRecord>& records, std::uint32_t canvas) {
  py::list out;
  if (records.empty()) return out;
  const auto raster = bsd::rasterize(records, canvas);
  for (std::size_t i = 0; i < records.size(); ++i) {
    py::dict e;
    e["referent"] = records[i].referent();
    e["box"] = box_of(records[i].box());
    std::vector<std::string> names;
    for (const auto& b : records[i].bricks()) names.push_back(b.name());
    e["bricks"] = names;
    e["mask"] = rows_of(raster.instances[i]);
    out.append(e);
  }
  return out;
}

std::optional<BinaryGrid> optional_bits(const std::optional<BitRows>& rows) {
  if (!rows) return std::nullopt;
  return bits_from(*rows);
}

}  // namespace

PYBIND11_MODULE(_textmask, m) {
  m.doc() = "Text descriptors for segmentation masks";

  static py::exception<Error> error(m, "Error");
  static py::exception<IoError> io_error(m, "IoError", error.ptr());
  static py::exception<ValidationError> validation_error(m, "ValidationError", error.ptr());
  static py::exception<ConfigError> config_error(m, "ConfigError", error.ptr());
  static py::exception<ParseError> parse_error(m, "ParseError", validation_error.ptr());
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const ParseError& e) {
      py::object exc = py::reinterpret_borrow<py::object>(parse_error.ptr())(e.what());
      exc.attr("rule") = e.rule();
      exc.attr("offset") = e.offset();
      PyErr_SetObject(parse_error.ptr(), exc.ptr());
    } catch (const IoError& e) {
      py::set_error(io_error, e.what());
    } catch (const ConfigError& e) {
      py::set_error(config_error, e.what());
    } catch (const ValidationError& e) {
      py::set_error(validation_error, e.what());
    } catch (const Error& e) {
      py::set_error(error, e.what());
    }
  });

  m.def(
      "encode_isd",
      [](const Rows& grid, const std::map<LabelId, std::string>& labels, const std::string& encoding) {
        return isd::encode(grid_from(grid, labels), encoding_from(encoding)).payload;
      },
      py::arg("grid"), py::arg("labels"), py::arg("encoding") = "rrle");

  m.def(
      "decode_isd",
      [](const std::string& payload, std::size_t rows, std::size_t cols,
         const std::map<LabelId, std::string>& labels, const std::string& encoding, bool lenient) {
        const auto r = isd::decode(payload, encoding_from(encoding), rows, cols, table_from(labels), mode_of(lenient));
        py::dict out;
        out["grid"] = rows_of(r.grid);
        out["diagnostics"] = diagnostics_of(r.diagnostics);
        return out;
      },
      py::arg("payload"), py::arg("rows"), py::arg("cols"), py::arg("labels"), py::arg("encoding") = "rrle",
      py::arg("lenient") = false);

  m.def(
      "downsample",
      [](const Rows& mask, const std::map<LabelId, std::string>& labels, std::size_t resolution) {
        std::size_t h, w;
        auto flat = flatten(mask, h, w);
        return rows_of(downsample_mask(LabelMask(w, h, std::move(flat), table_from(labels)), resolution, resolution));
      },
      py::arg("mask"), py::arg("labels"), py::arg("resolution"));

  m.def(
      "bricks_from_bits",
      [](const std::vector<std::uint8_t>& bits) {
        std::vector<std::string> out;
        for (const auto& b : bsd::bricks_from_bits(bits)) out.push_back(b.name());
        return out;
      },
      py::arg("bits"));

  m.def(
      "bits_from_bricks",
      [](const std::vector<std::string>& names) {
        bsd::BrickSeq seq;
        for (const auto& n : names) {
          auto b = bsd::BrickToken::parse(n);
          if (!b) throw ValidationError("not a brick: " + n);
          seq.push_back(*b);
        }
        return bsd::bits_from_bricks(seq);
      },
      py::arg("bricks"));

  m.def(
      "encode_bsd",
      [](const BitRows& mask, const std::string& referent) {
        return bsd::serialize_record(bsd::encode_record(bits_from(mask), referent));
      },
      py::arg("mask"), py::arg("referent"));

  m.def(
      "isd_response",
      [](const Rows& grid, const std::map<LabelId, std::string>& labels, const std::string& encoding) {
        return render_isd_response(isd::encode(grid_from(grid, labels), encoding_from(encoding)));
      },
      py::arg("grid"), py::arg("labels"), py::arg("encoding") = "rrle");

  m.def(
      "bsd_response",
      [](const std::vector<std::pair<BitRows, std::string>>& instances) {
        std::vector<bsd::BsdRecord> recs;
        for (const auto& [mask, ref] : instances) recs.push_back(bsd::encode_record(bits_from(mask), ref));
        return render_bsd_response(recs);
      },
      py::arg("instances"));

  m.def(
      "parse_response",
      [](const std::string& text, const std::string& format, std::size_t rows, std::size_t cols,
         const std::map<LabelId, std::string>& labels, std::uint32_t canvas_res, bool lenient) {
        Expectation expected = BsdExpectation{canvas_res};
        if (format != "bsd") {
          const std::string enc = format.rfind("isd-", 0) == 0 ? format.substr(4) : format;
          expected = IsdExpectation{rows, cols, table_from(labels), encoding_from(enc)};
        }
        const auto r = parse_response(text, expected, mode_of(lenient));
        py::dict out;
        out["diagnostics"] = diagnostics_of(r.diagnostics);
        if (r.grid) {
          out["payload"] = r.descriptors->payload;
          out["grid"] = rows_of(*r.grid);
          out["labels"] = table_to(r.grid->table());
        } else {
          out["records"] = records_of(r.records, canvas_res);
        }
        return out;
      },
      py::arg("text"), py::arg("format") = "isd-rrle", py::arg("rows") = 16, py::arg("cols") = 16,
      py::arg("labels") = std::map<LabelId, std::string>{}, py::arg("canvas_res") = 64, py::arg("lenient") = false);

  m.def("tokenize", [](const std::string& text) { return tokens::ref_tokenize(text); }, py::arg("text"));

  m.def(
      "count_tokens",
      [](const std::string& text, const std::optional<std::vector<std::string>>& vocab) {
        if (vocab) return tokens::VocabTokenizer(*vocab).count(text);
        return tokens::ReferenceTokenizer().count(text);
      },
      py::arg("text"), py::arg("vocab") = py::none());

  m.def(
      "compare_encodings",
      [](const Rows& grid, const std::map<LabelId, std::string>& labels) {
        const auto c = tokens::compare_encodings(grid_from(grid, labels), tokens::ReferenceTokenizer());
        py::dict out;
        out["full"] = c.full;
        out["irle"] = c.irle;
        out["rrle"] = c.rrle;
        out["bsd_no_bricks"] = c.bsd_no_bricks;
        out["bsd"] = c.bsd_bricks;
        return out;
      },
      py::arg("grid"), py::arg("labels"));

  m.def(
      "iou", [](const BitRows& a, const BitRows& b) { return metrics::iou(bits_from(a), bits_from(b)); },
      py::arg("a"), py::arg("b"));

  m.def(
      "evaluate",
      [](const std::vector<std::pair<std::optional<BitRows>, std::optional<BitRows>>>& pairs) {
        std::vector<metrics::EvalPair> ps;
        for (const auto& [pred, gt] : pairs) ps.push_back({optional_bits(pred), optional_bits(gt), {}, {}, ""});
        const auto r = metrics::evaluate(ps);
        py::dict out;
        out["pairs"] = r.pairs;
        out["targeted"] = r.targeted;
        out["ciou"] = r.ciou;
        out["giou"] = r.giou;
        out["miou"] = r.miou ? py::cast(*r.miou) : py::none();
        out["per_pair"] = r.per_pair;
        out["no_target_tp"] = r.no_target_tp;
        out["no_target_fn"] = r.no_target_fn;
        return out;
      },
      py::arg("pairs"));

  m.def(
      "run_cli",
      [](const std::vector<std::string>& args) {
        std::ostringstream out, err;
        const int code = cli::run(args, out, err);
        return py::make_tuple(code, out.str(), err.str());
      },
      py::arg("args"));
}
