#include "textmask/cli.hpp"

#include <CLI11.hpp>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <map>
#include <json.hpp>
#include <optional>
#include <set>
#include <sstream>

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

namespace textmask::cli {

namespace {

using nlohmann::json;
using nlohmann::ordered_json;

struct CliConfig {
  std::size_t resolution = 16;
  std::uint32_t canvas_res = bsd::kDefaultCanvas;
  std::string format = "isd-rrle";
  std::vector<std::string> formats{"isd-rrle"};
  std::vector<std::string> templates{std::string(dataset::kDefaultTemplate)};
  std::vector<std::string> tasks;
  std::string on_error = "skip";
  bool lenient = false;
  bool verify = true;
  unsigned threads = 1;
  std::string field = "response";
  tokens::TokenizerSpec tokenizer;
};

void check_config(const CliConfig& c) {
  if (c.resolution == 0) throw ConfigError("resolution must be at least 1");
  if (c.canvas_res == 0) throw ConfigError("canvas_res must be at least 1");
  if (c.on_error != "skip" && c.on_error != "fail") {
    throw ConfigError("on_error must be 'skip' or 'fail'");
  }
  if (c.threads == 0) throw ConfigError("threads must be at least 1");
}

void load_config_file(const std::filesystem::path& path, CliConfig& c) {
  const std::string text = io::read_text(path);
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError("config '" + path.string() + "' is not valid JSON: " + e.what());
  }
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  static const std::set<std::string> known = {"resolution", "canvas_res", "encoding", "format",
                                              "formats",    "templates",  "tasks",    "on_error",
                                              "lenient",    "verify",     "threads",  "field",
                                              "tokenizer"};
  try {
    for (auto& [key, value] : j.items()) {
      if (!known.count(key)) throw ConfigError("unknown config key '" + key + "'");
    }
    c.resolution = j.value("resolution", c.resolution);
    c.canvas_res = j.value("canvas_res", c.canvas_res);
    c.format = j.value("format", j.value("encoding", c.format));
    c.formats = j.value("formats", c.formats);
    c.templates = j.value("templates", c.templates);
    c.tasks = j.value("tasks", c.tasks);
    c.on_error = j.value("on_error", c.on_error);
    c.lenient = j.value("lenient", c.lenient);
    c.verify = j.value("verify", c.verify);
    c.threads = j.value("threads", c.threads);
    c.field = j.value("field", c.field);
    if (j.contains("tokenizer")) {
      const auto& t = j["tokenizer"];
      if (t.is_string() && t.get<std::string>() == "reference") {
        c.tokenizer = {};
      } else if (t.is_object() && t.contains("vocab")) {
        c.tokenizer = {tokens::TokenizerSpec::Kind::kVocabFile, t["vocab"].get<std::string>()};
      } else {
        throw ConfigError("tokenizer must be \"reference\" or {\"vocab\": PATH}");
      }
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config value has the wrong type: ") + e.what());
  }
}

struct Format {
  bool bsd = false;
  isd::Encoding encoding = isd::Encoding::kRrle;
};

Format parse_format(const std::string& name) {
  if (name == "bsd") return {true, isd::Encoding::kRrle};
  if (name.rfind("isd-", 0) == 0) {
    if (auto e = isd::parse_encoding(name)) return {false, *e};
  }
  throw ConfigError("unknown format '" + name + "' (isd-full, isd-irle, isd-rrle or bsd)");
}

LabelTable table_for(const std::optional<std::string>& path, const io::GrayImage* image) {
  if (path) return io::read_label_table(*path);
  // Without a table, every id present gets a generated name.
  std::set<LabelId> ids;
  if (image) ids.insert(image->pixels.begin(), image->pixels.end());
  std::vector<LabelTable::Entry> entries;
  for (LabelId id : ids) {
    if (id != kBackgroundId) entries.emplace_back(id, "label" + std::to_string(id));
  }
  return LabelTable(std::move(entries));
}

void print_diagnostics(const Diagnostics& diags, std::ostream& err) {
  for (const auto& d : diags) {
    err << to_string(d.severity) << ": " << d.rule << " at byte " << d.offset << ": " << d.message
        << '\n';
  }
}

ordered_json diagnostics_json(const Diagnostics& diags) {
  auto arr = ordered_json::array();
  for (const auto& d : diags) {
    arr.push_back(ordered_json{{"severity", to_string(d.severity)},
                               {"rule", d.rule},
                               {"offset", d.offset},
                               {"message", d.message}});
  }
  return arr;
}

bool looks_like_image(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  char sig[4] = {};
  in.read(sig, 4);
  if (in.gcount() >= 2 && sig[0] == 'P' && sig[1] == '5') return true;
  return in.gcount() == 4 && static_cast<unsigned char>(sig[0]) == 0x89 && sig[1] == 'P' &&
         sig[2] == 'N' && sig[3] == 'G';
}

struct Decoded {
  LabelGrid grid;
  Diagnostics diagnostics;
  std::vector<bsd::BsdRecord> records;
};

Decoded decode_text(const std::string& text, const Format& fmt, const CliConfig& cfg,
                    const LabelTable& table, ParseMode mode) {
  if (fmt.bsd) {
    auto parsed = parse_response(text, BsdExpectation{cfg.canvas_res}, mode);
    auto raster = bsd::rasterize(parsed.records, cfg.canvas_res);
    return {std::move(raster.merged), std::move(parsed.diagnostics), std::move(parsed.records)};
  }
  if (text.find(bsd::kSegOpen) != std::string::npos || text.find(bsd::kSegClose) != std::string::npos) {
    auto parsed = parse_response(text, IsdExpectation{cfg.resolution, cfg.resolution, table, fmt.encoding}, mode);
    return {std::move(*parsed.grid), std::move(parsed.diagnostics), {}};
  }
  auto res = isd::decode(text, fmt.encoding, cfg.resolution, cfg.resolution, table, mode);
  return {std::move(res.grid), std::move(res.diagnostics), {}};
}

// Binary union of everything a parsed response marks as foreground.
struct Target {
  std::optional<BinaryGrid> mask;
  std::optional<BoxBins> box;
};

Target target_of(const ParsedResponse& r) {
  Target t;
  if (r.task_kind == TaskKind::kIsd) {
    std::vector<std::uint8_t> bits(r.grid->cells().size());
    std::transform(r.grid->cells().begin(), r.grid->cells().end(), bits.begin(),
                   [](LabelId id) { return static_cast<std::uint8_t>(id != kBackgroundId); });
    t.mask = BinaryGrid(r.grid->rows(), r.grid->cols(), std::move(bits));
    t.box = tight_box(*t.mask);
    return t;
  }
  return t;
}

Target bsd_target(const std::vector<bsd::BsdRecord>& records, std::uint32_t res) {
  Target t;
  auto raster = bsd::rasterize(records, res);
  BinaryGrid u(res, res);
  for (const auto& inst : raster.instances) {
    for (std::size_t r = 0; r < res; ++r) {
      for (std::size_t c = 0; c < res; ++c) {
        if (inst.at(r, c)) u.set(r, c, true);
      }
    }
  }
  t.mask = std::move(u);
  for (const auto& rec : records) {
    if (rec.box()) {
      t.box = rec.box();
      break;
    }
  }
  return t;
}

std::optional<std::string> gpt_response(const json& j, const std::string& field) {
  if (j.contains(field) && j[field].is_string()) return j[field].get<std::string>();
  if (j.contains("conversations") && j["conversations"].is_array()) {
    const auto& conv = j["conversations"];
    for (auto it = conv.rbegin(); it != conv.rend(); ++it) {
      if (it->value("from", "") == "gpt") return it->value("value", "");
    }
  }
  return std::nullopt;
}

std::vector<json> read_jsonl(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  std::vector<json> out;
  std::size_t n = 0;
  for (std::string line; std::getline(in, line);) {
    ++n;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(json::parse(line));
    } catch (const json::parse_error&) {
      throw ValidationError(path.string() + ":" + std::to_string(n) + ": not valid JSON");
    }
  }
  return out;
}

std::string id_of(const json& j) {
  if (!j.contains("id")) return {};
  return j["id"].is_string() ? j["id"].get<std::string>() : j["id"].dump();
}

std::string report_json(const ordered_json& j) { return j.dump(2) + "\n"; }

std::vector<std::size_t> parse_resolutions(const std::string& list) {
  std::vector<std::size_t> out;
  std::stringstream ss(list);
  for (std::string item; std::getline(ss, item, ',');) {
    try {
      std::size_t used = 0;
      const auto v = std::stoul(item, &used);
      if (used != item.size() || v == 0) throw std::invalid_argument(item);
      out.push_back(v);
    } catch (const std::exception&) {
      throw ConfigError("bad resolution '" + item + "'");
    }
  }
  if (out.empty()) throw ConfigError("no resolution given");
  return out;
}

}  // namespace

std::array<std::uint8_t, 3> palette_color(LabelId id) {
  std::array<std::uint8_t, 3> rgb{0, 0, 0};
  LabelId c = id;
  for (int shift = 7; c != 0 && shift >= 0; --shift) {
    for (int ch = 0; ch < 3; ++ch) {
      rgb[ch] = static_cast<std::uint8_t>(rgb[ch] | (((c >> ch) & 1u) << shift));
    }
    c >>= 3;
  }
  return rgb;
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Text codecs, datasets and metrics for text-serialized segmentation masks", "textmask"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "textmask 0.1.0");

  std::optional<std::string> config_path;
  app.add_option("--config", config_path,
                 std::string("JSON config file; defaults to $") + kConfigEnv);

  // Flags shared by several subcommands; std::optional marks "given".
  std::optional<std::size_t> resolution;
  std::optional<std::uint32_t> canvas_res;
  std::optional<std::string> format;
  std::optional<std::string> labels_path;
  std::optional<std::string> output;
  std::optional<unsigned> threads;
  bool json_out = false;
  bool lenient = false;

  auto add_geometry = [&](CLI::App* sub) {
    sub->add_option("--resolution,-r", resolution, "I-SD grid resolution (R x R)");
    sub->add_option("--canvas-res", canvas_res, "B-SD canvas resolution");
  };

  // encode
  auto* encode = app.add_subcommand("encode", "Encode a label mask as descriptor text");
  std::string enc_input;
  std::vector<std::string> targets;
  bool enc_response = false;
  encode->add_option("mask", enc_input, "PGM/PNG label mask")->required();
  encode->add_option("--labels,-l", labels_path, "label table JSON");
  encode->add_option("--format,-f", format, "isd-full | isd-irle | isd-rrle | bsd");
  encode->add_option("--target,-t", targets, "B-SD: labels to emit (default: every label present)");
  encode->add_option("--output,-o", output, "output file (default stdout)");
  encode->add_flag("--response", enc_response, "wrap the payload in the response template");
  add_geometry(encode);

  // decode
  auto* decode = app.add_subcommand("decode", "Decode descriptor text to a label mask");
  std::string dec_input;
  std::optional<std::string> labels_out;
  bool fail_on_warning = false;
  decode->add_option("text", dec_input, "payload or response text file")->required();
  decode->add_option("--labels,-l", labels_path, "label table JSON (I-SD)");
  decode->add_option("--format,-f", format, "isd-full | isd-irle | isd-rrle | bsd");
  decode->add_option("--output,-o", output, "output PGM/PNG of label ids");
  decode->add_option("--labels-out", labels_out, "write the decoded label table JSON here");
  decode->add_flag("--lenient", lenient, "repair malformed input instead of failing");
  decode->add_flag("--fail-on-warning", fail_on_warning, "exit 3 when lenient decoding repaired anything");
  decode->add_flag("--json", json_out, "JSON report on stdout");
  add_geometry(decode);

  // render
  auto* render = app.add_subcommand("render", "Upsample a decoded grid to a color image");
  std::string ren_input;
  std::size_t ren_width = 256, ren_height = 256;
  std::string ren_output;
  render->add_option("input", ren_input, "label grid image, or descriptor text")->required();
  render->add_option("--labels,-l", labels_path, "label table JSON (descriptor text input)");
  render->add_option("--format,-f", format, "format of descriptor text input");
  render->add_option("--width", ren_width, "output width")->check(CLI::PositiveNumber);
  render->add_option("--height", ren_height, "output height")->check(CLI::PositiveNumber);
  render->add_option("--output,-o", ren_output, "output .png or .ppm")->required();
  add_geometry(render);

  // build
  auto* build = app.add_subcommand("build", "Build instruction JSONL from annotations");
  std::string build_input;
  std::vector<std::string> build_formats, build_templates, build_tasks;
  std::optional<std::string> on_error;
  bool no_verify = false;
  build->add_option("annotations", build_input, "annotation JSONL")->required();
  build->add_option("--output,-o", output, "instruction JSONL")->required();
  build->add_option("--format,-f", build_formats, "isd-full | isd-rrle | bsd (repeatable)");
  build->add_option("--template", build_templates, "query template with {labels} (repeatable)");
  build->add_option("--task", build_tasks, "keep only these tasks (repeatable)");
  build->add_option("--on-error", on_error, "skip | fail");
  build->add_option("--threads,-j", threads, "worker threads");
  build->add_flag("--no-verify", no_verify, "skip the strict self-check of every sample");
  build->add_flag("--json", json_out, "JSON report on stdout");
  add_geometry(build);

  // validate
  auto* validate = app.add_subcommand("validate", "Parse every response of a JSONL corpus");
  std::string val_input;
  std::optional<std::string> field;
  validate->add_option("corpus", val_input, "JSONL corpus")->required();
  validate->add_option("--field", field, "response field (default: response, else gpt turn)");
  validate->add_option("--format,-f", format, "expected format (default: per-line metadata)");
  validate->add_option("--labels,-l", labels_path, "label table JSON for --format isd-*");
  validate->add_option("--threads,-j", threads, "worker threads");
  validate->add_flag("--lenient", lenient, "lenient parsing; only errors fail");
  validate->add_flag("--json", json_out, "JSON report on stdout");
  add_geometry(validate);

  // eval
  auto* eval = app.add_subcommand("eval", "Score predicted responses against ground truth");
  std::string pred_path, gt_path;
  std::optional<std::string> csv_path;
  bool per_sample = false;
  eval->add_option("--pred", pred_path, "predictions JSONL (id + response)")->required();
  eval->add_option("--gt", gt_path, "ground-truth instruction JSONL")->required();
  eval->add_option("--field", field, "prediction response field");
  eval->add_option("--csv", csv_path, "also write a CSV summary here");
  eval->add_flag("--per-sample", per_sample, "include per-sample scores");
  eval->add_flag("--json", json_out, "JSON report on stdout");

  // stats
  auto* stats = app.add_subcommand("stats", "Token-length statistics");
  std::optional<std::string> stats_input;
  std::size_t synthetic = 0;
  std::uint64_t seed = 1;
  std::string resolutions = "16,64";
  std::optional<std::string> vocab;
  stats->add_option("corpus", stats_input, "instruction JSONL to measure");
  stats->add_option("--synthetic", synthetic, "measure N synthetic single-blob scenes instead");
  stats->add_option("--seed", seed, "seed for --synthetic");
  stats->add_option("--resolutions", resolutions, "comma-separated resolutions for --synthetic");
  stats->add_option("--vocab", vocab, "longest-match vocabulary file instead of the reference tokenizer");
  stats->add_option("--csv", csv_path, "also write a CSV summary here");
  stats->add_flag("--json", json_out, "JSON report on stdout");

  std::vector<char*> argv;
  std::vector<std::string> storage = args.empty() ? std::vector<std::string>{"textmask"} : args;
  for (auto& a : storage) argv.push_back(a.data());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::CallForVersion&) {
    out << "textmask 0.1.0\n";
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    return kExitConfig;
  }

  try {
    CliConfig cfg;
    if (!config_path) {
      if (const char* env = std::getenv(kConfigEnv); env && *env) config_path = env;
    }
    if (config_path) load_config_file(*config_path, cfg);
    if (resolution) cfg.resolution = *resolution;
    if (canvas_res) cfg.canvas_res = *canvas_res;
    if (format) cfg.format = *format;
    if (threads) cfg.threads = *threads;
    if (field) cfg.field = *field;
    if (on_error) cfg.on_error = *on_error;
    if (lenient) cfg.lenient = true;
    if (no_verify) cfg.verify = false;
    if (!build_formats.empty()) cfg.formats = build_formats;
    if (!build_templates.empty()) cfg.templates = build_templates;
    if (!build_tasks.empty()) cfg.tasks = build_tasks;
    if (vocab) cfg.tokenizer = {tokens::TokenizerSpec::Kind::kVocabFile, *vocab};
    check_config(cfg);
    const ParseMode mode = cfg.lenient ? ParseMode::kLenient : ParseMode::kStrict;

    if (encode->parsed()) {
      const Format fmt = parse_format(cfg.format);
      const auto image = io::read_gray(enc_input);
      const LabelTable table = table_for(labels_path, &image);
      const LabelMask mask(image.width, image.height,
                           std::vector<LabelId>(image.pixels.begin(), image.pixels.end()), table);
      std::string text;
      if (!fmt.bsd) {
        const auto grid = downsample_mask(mask, cfg.resolution, cfg.resolution);
        const auto desc = isd::encode(grid, fmt.encoding);
        text = enc_response ? render_isd_response(desc) : desc.payload;
      } else {
        std::vector<LabelId> ids;
        std::vector<bsd::BsdRecord> records;
        if (!targets.empty()) {
          // A target absent from the table has no pixels: it is a no-target record.
          for (const auto& t : targets) {
            if (auto id = table.find(t)) {
              ids.push_back(*id);
            } else {
              records.push_back(bsd::BsdRecord::no_target(t, cfg.canvas_res));
            }
          }
        } else {
          std::set<LabelId> present(mask.data().begin(), mask.data().end());
          for (const auto& [id, label] : table.entries()) {
            if (id != kBackgroundId && present.count(id)) ids.push_back(id);
          }
          if (ids.empty()) {
            for (const auto& [id, label] : table.entries()) {
              if (id != kBackgroundId) ids.push_back(id);
            }
          }
        }
        if (ids.empty() && records.empty()) {
          throw ValidationError("label table names no instance to encode; pass --target");
        }
        for (LabelId id : ids) {
          std::vector<LabelId> bin(mask.data().size());
          std::transform(mask.data().begin(), mask.data().end(), bin.begin(),
                         [id](LabelId v) { return static_cast<LabelId>(v == id); });
          LabelMask m(mask.width(), mask.height(), std::move(bin), LabelTable::from_labels({"fg"}));
          const auto bits = binarize(downsample_mask(m, cfg.canvas_res, cfg.canvas_res), 1);
          records.push_back(bsd::encode_record(bits, table.label(id)));
        }
        text = enc_response ? render_bsd_response(records) : bsd::serialize_bsd(records);
      }
      if (output) {
        io::write_text(*output, text);
      } else {
        out << text;
      }
      return kExitOk;
    }

    if (decode->parsed()) {
      const Format fmt = parse_format(cfg.format);
      const std::string text = io::read_text(dec_input);
      const LabelTable table = fmt.bsd ? LabelTable() : table_for(labels_path, nullptr);
      auto decoded = decode_text(text, fmt, cfg, table, mode);
      if (output) io::write_label_grid(*output, decoded.grid);
      if (labels_out) io::write_text(*labels_out, io::label_table_json(decoded.grid.table()));
      const bool failed = fail_on_warning && !decoded.diagnostics.empty();
      if (json_out) {
        ordered_json j;
        j["ok"] = !failed;
        j["rows"] = decoded.grid.rows();
        j["cols"] = decoded.grid.cols();
        j["records"] = decoded.records.size();
        j["diagnostics"] = diagnostics_json(decoded.diagnostics);
        out << report_json(j);
      }
      print_diagnostics(decoded.diagnostics, err);
      if (mode == ParseMode::kLenient) err << "diagnostics: " << decoded.diagnostics.size() << '\n';
      return failed ? kExitValidation : kExitOk;
    }

    if (render->parsed()) {
      std::optional<LabelGrid> grid;
      if (looks_like_image(ren_input)) {
        const auto image = io::read_gray(ren_input);
        const LabelTable table = table_for(labels_path, &image);
        grid.emplace(image.height, image.width,
                     std::vector<LabelId>(image.pixels.begin(), image.pixels.end()), table);
      } else {
        const Format fmt = parse_format(cfg.format);
        const LabelTable table = fmt.bsd ? LabelTable() : table_for(labels_path, nullptr);
        auto decoded = decode_text(io::read_text(ren_input), fmt, cfg, table, ParseMode::kLenient);
        print_diagnostics(decoded.diagnostics, err);
        grid.emplace(std::move(decoded.grid));
      }
      const auto up = upsample_grid(*grid, ren_width, ren_height);
      io::RgbImage img{ren_width, ren_height, {}};
      img.pixels.reserve(ren_width * ren_height * 3);
      for (LabelId id : up.data()) {
        const auto c = palette_color(id);
        img.pixels.insert(img.pixels.end(), c.begin(), c.end());
      }
      io::write_rgb(ren_output, img);
      return kExitOk;
    }

    if (build->parsed()) {
      dataset::CorpusConfig cc;
      cc.resolution = cfg.resolution;
      cc.canvas_res = cfg.canvas_res;
      cc.formats.clear();
      for (const auto& f : cfg.formats) {
        auto sf = dataset::parse_format(f);
        if (!sf) throw ConfigError("unknown build format '" + f + "' (isd-full, isd-rrle or bsd)");
        cc.formats.push_back(*sf);
      }
      for (const auto& t : cfg.tasks) {
        auto task = dataset::parse_task(t);
        if (!task) throw ConfigError("unknown task '" + t + "'");
        cc.tasks.push_back(*task);
      }
      if (cfg.templates.empty()) throw ConfigError("at least one template is required");
      cc.build.templates = cfg.templates;
      cc.build.verify = cfg.verify;
      cc.fail_on_error = cfg.on_error == "fail";
      cc.threads = cfg.threads;
      const auto rep = dataset::build_corpus(build_input, *output, cc);
      ordered_json j;
      j["annotations"] = rep.annotations;
      j["samples"] = rep.samples;
      j["filtered"] = rep.filtered;
      j["failed"] = rep.failures.size();
      j["by_task"] = rep.by_task;
      j["by_format"] = rep.by_format;
      auto fails = ordered_json::array();
      for (const auto& f : rep.failures) {
        fails.push_back(ordered_json{{"line", f.line}, {"message", f.message}});
        err << "line " << f.line << ": " << f.message << '\n';
      }
      j["failures"] = std::move(fails);
      if (json_out) {
        out << report_json(j);
      } else {
        out << "annotations: " << rep.annotations << "\nsamples: " << rep.samples
            << "\nfiltered: " << rep.filtered << "\nfailed: " << rep.failures.size() << '\n';
        for (const auto& [k, v] : rep.by_format) out << "format " << k << ": " << v << '\n';
        for (const auto& [k, v] : rep.by_task) out << "task " << k << ": " << v << '\n';
      }
      return kExitOk;
    }

    if (validate->parsed()) {
      ValidateOptions vo;
      vo.mode = mode;
      vo.field = cfg.field;
      vo.threads = cfg.threads;
      if (format) {
        const Format fmt = parse_format(cfg.format);
        if (fmt.bsd) {
          vo.expected = BsdExpectation{cfg.canvas_res};
        } else {
          vo.expected = IsdExpectation{cfg.resolution, cfg.resolution,
                                       table_for(labels_path, nullptr), fmt.encoding};
        }
      }
      const auto rep = validate_corpus(val_input, vo);
      if (json_out) {
        ordered_json j;
        j["lines"] = rep.lines;
        j["ok"] = rep.ok_lines;
        j["errors"] = rep.error_lines;
        j["warnings"] = rep.warning_count;
        j["by_rule"] = rep.by_rule;
        auto bad = ordered_json::array();
        for (const auto& r : rep.results) {
          if (r.ok && r.diagnostics.empty()) continue;
          bad.push_back(ordered_json{{"line", r.line}, {"id", r.id}, {"ok", r.ok},
                                     {"diagnostics", diagnostics_json(r.diagnostics)}});
        }
        j["lines_with_diagnostics"] = std::move(bad);
        out << report_json(j);
      } else {
        out << "lines: " << rep.lines << "\nok: " << rep.ok_lines << "\nerrors: " << rep.error_lines
            << "\nwarnings: " << rep.warning_count << '\n';
        for (const auto& [rule, n] : rep.by_rule) out << "rule " << rule << ": " << n << '\n';
      }
      for (const auto& r : rep.results) {
        if (r.ok) continue;
        for (const auto& d : r.diagnostics) {
          if (d.severity == Severity::kError) {
            err << "line " << r.line << ": " << d.rule << " at byte " << d.offset << ": " << d.message << '\n';
          }
        }
      }
      return rep.exit_status();
    }

    if (eval->parsed()) {
      const auto gts = read_jsonl(gt_path);
      // One annotation yields a sample per format under the same id, so
      // predictions that name their format are matched on both.
      std::map<std::pair<std::string, std::string>, std::string> preds;
      for (const auto& p : read_jsonl(pred_path)) {
        preds[{id_of(p), p.value("format", "")}] = gpt_response(p, cfg.field).value_or("");
      }
      std::vector<metrics::EvalPair> pairs;
      for (const auto& g : gts) {
        const std::string id = id_of(g);
        const auto gt_text = gpt_response(g, "response");
        if (!gt_text) throw ValidationError("ground truth '" + id + "' has no response");
        const std::string fmt_name = g.value("format", "");
        const Format fmt = parse_format(fmt_name);
        metrics::EvalPair pair;
        pair.id = id;
        auto it = preds.find({id, fmt_name});
        if (it == preds.end()) it = preds.find({id, ""});
        const std::string pred_text = it == preds.end() ? std::string() : it->second;
        if (fmt.bsd) {
          const auto res = g.value("resolution", bsd::kDefaultCanvas);
          const BsdExpectation ex{res};
          const auto gt = parse_response(*gt_text, ex, ParseMode::kStrict);
          const auto pr = parse_response(pred_text, ex, ParseMode::kLenient);
          auto gt_t = bsd_target(gt.records, res);
          auto pr_t = bsd_target(pr.records, res);
          pair.ground_truth = std::move(gt_t.mask);
          pair.ground_truth_box = gt_t.box;
          pair.prediction = std::move(pr_t.mask);
          pair.predicted_box = pr_t.box;
        } else {
          const auto res = g.value("resolution", std::size_t{16});
          const LabelTable table = g.contains("labels") ? io::parse_label_table(g["labels"].dump()) : LabelTable();
          const IsdExpectation ex{res, res, table, fmt.encoding};
          auto gt_t = target_of(parse_response(*gt_text, ex, ParseMode::kStrict));
          auto pr_t = target_of(parse_response(pred_text, ex, ParseMode::kLenient));
          pair.ground_truth = std::move(gt_t.mask);
          pair.ground_truth_box = gt_t.box;
          pair.prediction = std::move(pr_t.mask);
          pair.predicted_box = pr_t.box;
        }
        pairs.push_back(std::move(pair));
      }
      const auto rep = metrics::evaluate(pairs);
      if (csv_path) io::write_text(*csv_path, rep.to_csv());
      if (json_out) {
        out << rep.to_json(per_sample) << '\n';
      } else {
        out << rep.to_csv();
      }
      return kExitOk;
    }

    if (stats->parsed()) {
      const auto tok = tokens::make_tokenizer(cfg.tokenizer);
      tokens::LengthReport rep;
      if (synthetic > 0) {
        const auto res_list = parse_resolutions(resolutions);
        synth::Rng rng(seed);
        std::vector<LabelGrid> grids;
        for (std::size_t i = 0; i < synthetic; ++i) {
          const auto scene = synth::blob_scene(rng);
          for (auto r : res_list) grids.push_back(downsample_mask(scene.mask, r, r));
        }
        rep = tokens::compare_corpus(grids, *tok);
      } else if (stats_input) {
        rep = tokens::count_corpus_file(*stats_input, *tok);
      } else {
        throw ConfigError("stats needs a corpus file or --synthetic N");
      }
      if (csv_path) io::write_text(*csv_path, rep.to_csv());
      if (json_out) {
        out << rep.to_json() << '\n';
      } else {
        out << rep.to_csv();
      }
      for (const auto& f : rep.failures) err << f << '\n';
      return rep.failures.empty() ? kExitOk : kExitValidation;
    }
  } catch (const IoError& e) {
    err << "error: " << e.what() << '\n';
    return kExitIo;
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const ParseError& e) {
    err << "error: " << e.rule() << ": " << e.what() << '\n';
    return kExitValidation;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return kExitValidation;
  }
  return kExitConfig;
}

}  // namespace textmask::cli
