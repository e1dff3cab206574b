#include "textmask/dataset_builder.hpp"

#include <algorithm>
#include <fstream>
#include <json.hpp>
#include <set>
#include <thread>

#include "textmask/image_io.hpp"
#include "textmask/response_grammar.hpp"

namespace textmask::dataset {

namespace {

using nlohmann::json;
using nlohmann::ordered_json;

std::string roi_name(std::size_t i) { return "roi" + std::to_string(i); }

bool needs_referent(Task t) {
  return t == Task::kReferring || t == Task::kGeneralizedReferring;
}

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
  std::filesystem::path path(p);
  if (path.is_relative() && !base.empty()) return base / path;
  return path;
}

// Binary instance mask resampled onto an R x R grid.
BinaryGrid downsample_bits(const BinaryGrid& bits, std::size_t res) {
  std::vector<LabelId> ids(bits.bits().begin(), bits.bits().end());
  LabelMask m(bits.cols(), bits.rows(), std::move(ids), LabelTable::from_labels({"fg"}));
  return binarize(downsample_mask(m, res, res), 1);
}

std::vector<BinaryGrid> load_instances(const Annotation& ann) {
  std::vector<BinaryGrid> out;
  for (const auto& p : ann.instances) {
    out.push_back(io::read_binary_mask(p));
    if (out.back().rows() != out.front().rows() || out.back().cols() != out.front().cols()) {
      throw ValidationError("instance masks of '" + ann.id + "' differ in size");
    }
  }
  return out;
}

// Referent of each instance: roi identifiers for reasoning, one shared
// referent for a multi-instance expression, else pairwise.
std::vector<std::string> instance_referents(const Annotation& ann, std::size_t n) {
  std::vector<std::string> out;
  if (ann.task == Task::kReasoning) {
    for (std::size_t i = 0; i < n; ++i) out.push_back(roi_name(i));
    return out;
  }
  if (ann.referents.size() == n) return ann.referents;
  if (ann.referents.size() == 1) return std::vector<std::string>(n, ann.referents.front());
  throw ValidationError("annotation '" + ann.id + "' pairs " + std::to_string(ann.referents.size()) +
                        " referents with " + std::to_string(n) + " instances");
}

// Referents of a label-mask annotation, checked against its label table.
std::vector<std::pair<LabelId, std::string>> mask_referents(const Annotation& ann,
                                                            const LabelMask& mask) {
  std::vector<std::pair<LabelId, std::string>> out;
  if (ann.referents.empty()) {
    std::set<LabelId> present(mask.data().begin(), mask.data().end());
    for (const auto& [id, label] : mask.table().entries()) {
      if (id != kBackgroundId && present.count(id)) out.emplace_back(id, label);
    }
    return out;
  }
  for (const auto& r : ann.referents) {
    auto id = mask.table().find(r);
    if (!id) throw ValidationError("referent '" + r + "' of '" + ann.id + "' is not in its label table");
    out.emplace_back(*id, r);
  }
  return out;
}

LabelMask load_label_mask(const Annotation& ann) {
  if (!ann.labels) throw ValidationError("annotation '" + ann.id + "' has a mask but no label table");
  return io::read_label_mask(*ann.mask, io::read_label_table(*ann.labels));
}

void check_sample(const BuiltSample& built, std::uint32_t res, isd::Encoding enc) {
  const auto& s = built.sample;
  if (s.format == SampleFormat::kBsd) {
    auto parsed = parse_response(s.response, BsdExpectation{res}, ParseMode::kStrict);
    auto raster = bsd::rasterize(parsed.records, res);
    if (raster.instances != built.instances) {
      throw ValidationError("sample '" + s.id + "' does not reconstruct its instances");
    }
    return;
  }
  IsdExpectation ex{res, res, *s.labels, enc};
  auto parsed = parse_response(s.response, ex, ParseMode::kStrict);
  if (!(*parsed.grid == *built.grid)) {
    throw ValidationError("sample '" + s.id + "' does not reconstruct its grid");
  }
}

std::vector<std::string> read_lines(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  std::vector<std::string> lines;
  for (std::string line; std::getline(in, line);) lines.push_back(std::move(line));
  if (in.bad()) throw IoError("failed reading '" + path.string() + "'");
  return lines;
}

}  // namespace

const char* to_string(Task t) {
  switch (t) {
    case Task::kSemantic:
      return "semantic";
    case Task::kReferring:
      return "referring";
    case Task::kGeneralizedReferring:
      return "generalized_referring";
    case Task::kReasoning:
      return "reasoning";
  }
  return "?";
}

std::optional<Task> parse_task(std::string_view name) {
  if (name == "semantic" || name == "panoptic") return Task::kSemantic;
  if (name == "referring") return Task::kReferring;
  if (name == "generalized_referring") return Task::kGeneralizedReferring;
  if (name == "reasoning") return Task::kReasoning;
  return std::nullopt;
}

const char* to_string(SampleFormat f) {
  switch (f) {
    case SampleFormat::kIsdFull:
      return "isd-full";
    case SampleFormat::kIsdRrle:
      return "isd-rrle";
    case SampleFormat::kBsd:
      return "bsd";
  }
  return "?";
}

std::optional<SampleFormat> parse_format(std::string_view name) {
  if (name == "isd-full") return SampleFormat::kIsdFull;
  if (name == "isd-rrle") return SampleFormat::kIsdRrle;
  if (name == "bsd") return SampleFormat::kBsd;
  return std::nullopt;
}

std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

Annotation parse_annotation(std::string_view json_line, const std::filesystem::path& base_dir) {
  json j;
  try {
    j = json::parse(json_line);
  } catch (const json::parse_error& e) {
    throw ValidationError(std::string("annotation is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw ValidationError("annotation must be a JSON object");
  try {
    Annotation a;
    a.id = j.at("id").is_string() ? j.at("id").get<std::string>() : j.at("id").dump();
    a.image = j.value("image", "");
    if (j.contains("mask") && !j["mask"].is_null()) a.mask = resolve(base_dir, j["mask"].get<std::string>());
    if (j.contains("labels") && !j["labels"].is_null()) a.labels = resolve(base_dir, j["labels"].get<std::string>());
    for (const auto& p : j.value("instances", json::array())) a.instances.push_back(resolve(base_dir, p.get<std::string>()));
    const auto task = j.value("task", "referring");
    auto t = parse_task(task);
    if (!t) throw ValidationError("unknown task '" + task + "'");
    a.task = *t;
    a.referents = j.value("referents", std::vector<std::string>{});
    a.no_target = j.value("no_target", false);
    if (j.contains("query") && j["query"].is_string()) a.query = j["query"].get<std::string>();

    if (needs_referent(a.task) && a.referents.empty()) {
      throw ValidationError("referring annotation '" + a.id + "' carries no referent");
    }
    if (a.no_target && (!a.instances.empty() || a.mask)) {
      throw ValidationError("no-target annotation '" + a.id + "' must not carry masks");
    }
    if (!a.no_target && a.instances.empty() && !a.mask) {
      throw ValidationError("annotation '" + a.id + "' has neither mask nor instances");
    }
    if (a.mask && !a.instances.empty()) {
      throw ValidationError("annotation '" + a.id + "' gives both mask and instances");
    }
    return a;
  } catch (const json::exception& e) {
    throw ValidationError(std::string("annotation schema: ") + e.what());
  }
}

std::string render_query(const Annotation& ann, const std::vector<std::string>& referents,
                         const std::vector<std::string>& templates) {
  if (ann.query) return "<image>\n" + *ann.query;
  if (templates.empty()) throw ConfigError("at least one query template is required");
  std::string joined;
  for (std::size_t i = 0; i < referents.size(); ++i) {
    if (i) joined += ", ";
    joined += referents[i];
  }
  std::string q = templates[fnv1a(ann.id) % templates.size()];
  for (auto p = q.find("{labels}"); p != std::string::npos; p = q.find("{labels}", p + joined.size())) {
    q.replace(p, 8, joined);
  }
  return q;
}

std::string InstructionSample::to_jsonl() const {
  ordered_json j;
  j["id"] = id;
  j["image"] = image;
  j["conversations"] = ordered_json::array({
      ordered_json{{"from", "human"}, {"value", query}},
      ordered_json{{"from", "gpt"}, {"value", response}},
  });
  j["task"] = to_string(task);
  j["format"] = to_string(format);
  j["resolution"] = resolution;
  if (labels) {
    ordered_json lj = ordered_json::object();
    for (const auto& [lid, label] : labels->entries()) lj[std::to_string(lid)] = label;
    j["labels"] = std::move(lj);
  }
  return j.dump();
}

BuiltSample build_isd_sample(const Annotation& ann, std::size_t resolution, isd::Encoding encoding,
                             const BuildOptions& options) {
  if (resolution == 0) throw ValidationError("resolution must be at least 1");
  if (encoding == isd::Encoding::kIrle) {
    throw ValidationError("instruction samples use full or row-wise encodings");
  }
  std::vector<std::string> labels;  // id i + 1 -> labels[i]
  std::vector<LabelId> cells;

  if (ann.no_target) {
    labels = ann.referents;
    cells.assign(resolution * resolution, kBackgroundId);
  } else if (!ann.instances.empty()) {
    const auto inst = load_instances(ann);
    const auto refs = instance_referents(ann, inst.size());
    std::vector<LabelId> ids;
    for (const auto& r : refs) {
      auto it = std::find(labels.begin(), labels.end(), r);
      if (it == labels.end()) {
        labels.push_back(r);
        it = labels.end() - 1;
      }
      ids.push_back(static_cast<LabelId>(it - labels.begin() + 1));
    }
    std::vector<LabelId> full(inst.front().rows() * inst.front().cols(), kBackgroundId);
    for (std::size_t i = 0; i < inst.size(); ++i) {
      const auto bits = inst[i].bits();
      for (std::size_t k = 0; k < bits.size(); ++k) {
        if (bits[k]) full[k] = ids[i];
      }
    }
    LabelMask m(inst.front().cols(), inst.front().rows(), std::move(full), LabelTable::from_labels(labels));
    auto g = downsample_mask(m, resolution, resolution);
    cells.assign(g.cells().begin(), g.cells().end());
  } else {
    const auto mask = load_label_mask(ann);
    const auto refs = mask_referents(ann, mask);
    std::map<LabelId, LabelId> remap;
    for (const auto& [id, label] : refs) {
      if (!remap.count(id)) {
        labels.push_back(label);
        remap[id] = static_cast<LabelId>(labels.size());
      }
    }
    std::vector<LabelId> full(mask.data().size());
    std::transform(mask.data().begin(), mask.data().end(), full.begin(), [&](LabelId id) {
      auto it = remap.find(id);
      return it == remap.end() ? kBackgroundId : it->second;
    });
    LabelMask m(mask.width(), mask.height(), std::move(full), LabelTable::from_labels(labels));
    auto g = downsample_mask(m, resolution, resolution);
    cells.assign(g.cells().begin(), g.cells().end());
  }

  LabelTable table = LabelTable::from_labels(labels);
  LabelGrid grid(resolution, resolution, std::move(cells), table);
  BuiltSample built{{}, grid, {}};
  auto& s = built.sample;
  s.id = ann.id;
  s.image = ann.image;
  s.query = render_query(ann, labels, options.templates);
  s.response = render_isd_response(isd::encode(grid, encoding));
  s.format = encoding == isd::Encoding::kFull ? SampleFormat::kIsdFull : SampleFormat::kIsdRrle;
  s.resolution = resolution;
  s.task = ann.task;
  s.labels = std::move(table);
  if (options.verify) check_sample(built, static_cast<std::uint32_t>(resolution), encoding);
  return built;
}

BuiltSample build_bsd_sample(const Annotation& ann, std::uint32_t canvas_res,
                             const BuildOptions& options) {
  if (canvas_res == 0) throw ValidationError("canvas resolution must be at least 1");
  std::vector<bsd::BsdRecord> records;
  std::vector<BinaryGrid> truth;
  std::vector<std::string> query_refs;

  auto add = [&](const BinaryGrid& full_res, const std::string& referent) {
    auto bits = downsample_bits(full_res, canvas_res);
    records.push_back(bsd::encode_record(bits, referent));
    truth.push_back(std::move(bits));
  };

  if (ann.no_target) {
    query_refs = ann.referents;
    std::vector<std::string> refs = ann.referents;
    if (refs.empty()) refs.push_back(roi_name(0));
    for (const auto& r : refs) {
      records.push_back(bsd::BsdRecord::no_target(r, canvas_res));
      truth.emplace_back(canvas_res, canvas_res);
    }
  } else if (!ann.instances.empty()) {
    const auto inst = load_instances(ann);
    const auto refs = instance_referents(ann, inst.size());
    for (std::size_t i = 0; i < inst.size(); ++i) add(inst[i], refs[i]);
    for (const auto& r : refs) {
      if (std::find(query_refs.begin(), query_refs.end(), r) == query_refs.end()) query_refs.push_back(r);
    }
  } else {
    const auto mask = load_label_mask(ann);
    const auto refs = mask_referents(ann, mask);
    for (std::size_t i = 0; i < refs.size(); ++i) {
      std::vector<std::uint8_t> bits(mask.data().size());
      std::transform(mask.data().begin(), mask.data().end(), bits.begin(),
                     [&](LabelId id) { return static_cast<std::uint8_t>(id == refs[i].first); });
      const std::string referent = ann.task == Task::kReasoning ? roi_name(i) : refs[i].second;
      add(BinaryGrid(mask.height(), mask.width(), std::move(bits)), referent);
      query_refs.push_back(referent);
    }
  }
  if (records.empty()) throw ValidationError("annotation '" + ann.id + "' yields no instance");

  BuiltSample built{{}, std::nullopt, std::move(truth)};
  auto& s = built.sample;
  s.id = ann.id;
  s.image = ann.image;
  s.query = render_query(ann, query_refs, options.templates);
  s.response = render_bsd_response(records);
  s.format = SampleFormat::kBsd;
  s.resolution = canvas_res;
  s.task = ann.task;
  if (options.verify) check_sample(built, canvas_res, isd::Encoding::kRrle);
  return built;
}

BuildReport build_corpus(const std::filesystem::path& annotations,
                         const std::filesystem::path& output, const CorpusConfig& config) {
  if (config.formats.empty()) throw ConfigError("at least one output format is required");
  const auto lines = read_lines(annotations);
  const auto base = config.base_dir ? *config.base_dir : annotations.parent_path();

  struct Outcome {
    bool blank = true;
    bool filtered = false;
    std::string task;
    std::vector<std::pair<SampleFormat, std::string>> samples;
    std::optional<std::string> error;
  };
  std::vector<Outcome> outcomes(lines.size());

  auto convert = [&](std::size_t i) {
    Outcome& o = outcomes[i];
    if (lines[i].find_first_not_of(" \t\r") == std::string::npos) return;
    o.blank = false;
    try {
      const auto ann = parse_annotation(lines[i], base);
      o.task = to_string(ann.task);
      if (!config.tasks.empty() &&
          std::find(config.tasks.begin(), config.tasks.end(), ann.task) == config.tasks.end()) {
        o.filtered = true;
        return;
      }
      for (auto fmt : config.formats) {
        BuiltSample b = fmt == SampleFormat::kBsd
                            ? build_bsd_sample(ann, config.canvas_res, config.build)
                            : build_isd_sample(ann, config.resolution,
                                               fmt == SampleFormat::kIsdFull ? isd::Encoding::kFull
                                                                             : isd::Encoding::kRrle,
                                               config.build);
        o.samples.emplace_back(fmt, b.sample.to_jsonl());
      }
    } catch (const Error& e) {
      o.samples.clear();
      o.error = e.what();
    }
  };

  const unsigned workers = std::max(1u, std::min<unsigned>(config.threads, lines.size()));
  {
    std::vector<std::jthread> pool;
    for (unsigned w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] {
        for (std::size_t i = w; i < lines.size(); i += workers) convert(i);
      });
    }
  }

  BuildReport rep;
  for (std::size_t i = 0; i < outcomes.size(); ++i) {
    const auto& o = outcomes[i];
    if (o.blank) continue;
    ++rep.annotations;
    if (o.error) {
      if (config.fail_on_error) {
        throw ValidationError("line " + std::to_string(i + 1) + ": " + *o.error);
      }
      rep.failures.push_back({i + 1, *o.error});
      continue;
    }
    if (o.filtered) {
      ++rep.filtered;
      continue;
    }
    for (const auto& [fmt, text] : o.samples) {
      ++rep.samples;
      ++rep.by_task[o.task];
      ++rep.by_format[to_string(fmt)];
    }
  }

  std::ofstream out(output, std::ios::binary);
  if (!out) throw IoError("cannot write '" + output.string() + "'");
  for (const auto& o : outcomes) {
    if (o.error) continue;
    for (const auto& [fmt, text] : o.samples) out << text << '\n';
  }
  if (!out) throw IoError("failed writing '" + output.string() + "'");
  return rep;
}

}  // namespace textmask::dataset
