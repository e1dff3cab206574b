#include "textmask/image_io.hpp"

#include <png.h>

#include <algorithm>
#include <cctype>
#include <csetjmp>
#include <cstdio>
#include <fstream>
#include <memory>
#include <json.hpp>
#include <sstream>

#include "textmask/error.hpp"

namespace textmask::io {

namespace {

using FilePtr = std::unique_ptr<std::FILE, int (*)(std::FILE*)>;

FilePtr open_file(const std::filesystem::path& path, const char* mode) {
  FilePtr f(std::fopen(path.c_str(), mode), &std::fclose);
  if (!f) throw IoError("cannot open '" + path.string() + "'");
  return f;
}

bool has_png_extension(const std::filesystem::path& path) {
  std::string ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  return ext == ".png";
}

// PGM header tokens are separated by whitespace and may carry '#' comments.
std::size_t read_pgm_number(std::istream& in, const std::string& name) {
  for (;;) {
    int ch = in.peek();
    if (ch == '#') {
      std::string skip;
      std::getline(in, skip);
    } else if (std::isspace(ch)) {
      in.get();
    } else {
      break;
    }
  }
  std::size_t v = 0;
  if (!(in >> v)) throw IoError("malformed PGM header in '" + name + "'");
  return v;
}

GrayImage read_pgm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  char magic[2] = {};
  in.read(magic, 2);
  if (magic[0] != 'P' || magic[1] != '5') {
    throw IoError("'" + path.string() + "' is not a binary PGM (P5)");
  }
  GrayImage img;
  img.width = read_pgm_number(in, path.string());
  img.height = read_pgm_number(in, path.string());
  const std::size_t maxval = read_pgm_number(in, path.string());
  if (img.width == 0 || img.height == 0 || maxval == 0 || maxval > 65535) {
    throw IoError("unsupported PGM geometry in '" + path.string() + "'");
  }
  in.get();  // single whitespace before the raster
  img.bit_depth = maxval < 256 ? 8 : 16;
  const std::size_t n = img.width * img.height;
  const std::size_t bpp = img.bit_depth / 8;
  std::vector<unsigned char> raw(n * bpp);
  in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
  if (static_cast<std::size_t>(in.gcount()) != raw.size()) {
    throw IoError("truncated PGM raster in '" + path.string() + "'");
  }
  img.pixels.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    img.pixels[i] = bpp == 1 ? raw[i] : static_cast<std::uint16_t>((raw[2 * i] << 8) | raw[2 * i + 1]);
  }
  return img;
}

void write_pgm(const std::filesystem::path& path, const GrayImage& img) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  const bool wide = img.bit_depth == 16;
  out << "P5\n" << img.width << ' ' << img.height << '\n' << (wide ? 65535 : 255) << '\n';
  std::vector<unsigned char> raw;
  raw.reserve(img.pixels.size() * (wide ? 2 : 1));
  for (auto v : img.pixels) {
    if (wide) raw.push_back(static_cast<unsigned char>(v >> 8));
    raw.push_back(static_cast<unsigned char>(v & 0xff));
  }
  out.write(reinterpret_cast<const char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
  if (!out) throw IoError("failed writing '" + path.string() + "'");
}

struct PngReader {
  png_structp png = nullptr;
  png_infop info = nullptr;
  ~PngReader() { png_destroy_read_struct(&png, info ? &info : nullptr, nullptr); }
};

struct PngWriter {
  png_structp png = nullptr;
  png_infop info = nullptr;
  ~PngWriter() { png_destroy_write_struct(&png, info ? &info : nullptr); }
};

GrayImage read_png(const std::filesystem::path& path) {
  auto file = open_file(path, "rb");
  PngReader r;
  r.png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!r.png) throw IoError("libpng initialization failed");
  r.info = png_create_info_struct(r.png);
  if (!r.info) throw IoError("libpng initialization failed");

  GrayImage img;
  std::vector<png_bytep> rows;
  std::vector<unsigned char> buffer;
  if (setjmp(png_jmpbuf(r.png))) {
    throw IoError("malformed PNG '" + path.string() + "'");
  }
  png_init_io(r.png, file.get());
  png_read_info(r.png, r.info);
  const auto color = png_get_color_type(r.png, r.info);
  const int depth = png_get_bit_depth(r.png, r.info);
  if (color != PNG_COLOR_TYPE_GRAY && color != PNG_COLOR_TYPE_GRAY_ALPHA &&
      color != PNG_COLOR_TYPE_PALETTE) {
    throw IoError("'" + path.string() + "' is not a single-channel PNG");
  }
  // Palette indices and low-depth gray values are label ids; unpack without rescaling.
  if (depth < 8) png_set_packing(r.png);
  if (color & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(r.png);
  png_read_update_info(r.png, r.info);

  img.width = png_get_image_width(r.png, r.info);
  img.height = png_get_image_height(r.png, r.info);
  img.bit_depth = depth == 16 ? 16 : 8;
  const std::size_t stride = png_get_rowbytes(r.png, r.info);
  buffer.resize(stride * img.height);
  rows.resize(img.height);
  for (std::size_t y = 0; y < img.height; ++y) rows[y] = buffer.data() + y * stride;
  png_read_image(r.png, rows.data());
  png_read_end(r.png, nullptr);

  img.pixels.resize(img.width * img.height);
  for (std::size_t y = 0; y < img.height; ++y) {
    const unsigned char* row = rows[y];
    for (std::size_t x = 0; x < img.width; ++x) {
      img.pixels[y * img.width + x] =
          img.bit_depth == 16 ? static_cast<std::uint16_t>((row[2 * x] << 8) | row[2 * x + 1])
                              : row[x];
    }
  }
  return img;
}

void write_png(const std::filesystem::path& path, std::size_t width, std::size_t height,
               int bit_depth, int color_type, std::span<const unsigned char> raw,
               std::size_t stride) {
  auto file = open_file(path, "wb");
  PngWriter w;
  w.png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!w.png) throw IoError("libpng initialization failed");
  w.info = png_create_info_struct(w.png);
  if (!w.info) throw IoError("libpng initialization failed");
  std::vector<png_bytep> rows(height);
  for (std::size_t y = 0; y < height; ++y) {
    rows[y] = const_cast<png_bytep>(raw.data() + y * stride);
  }
  if (setjmp(png_jmpbuf(w.png))) {
    throw IoError("failed writing PNG '" + path.string() + "'");
  }
  png_init_io(w.png, file.get());
  png_set_IHDR(w.png, w.info, static_cast<png_uint_32>(width), static_cast<png_uint_32>(height),
               bit_depth, color_type, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(w.png, w.info);
  png_write_image(w.png, rows.data());
  png_write_end(w.png, nullptr);
}

GrayImage to_gray(std::span<const LabelId> ids, std::size_t width, std::size_t height) {
  GrayImage img;
  img.width = width;
  img.height = height;
  img.pixels.reserve(ids.size());
  LabelId max_id = 0;
  for (LabelId id : ids) {
    if (id > 65535) throw ValidationError("label id " + std::to_string(id) + " exceeds 16 bits");
    max_id = std::max(max_id, id);
    img.pixels.push_back(static_cast<std::uint16_t>(id));
  }
  img.bit_depth = max_id < 256 ? 8 : 16;
  return img;
}

}  // namespace

GrayImage read_gray(const std::filesystem::path& path) {
  unsigned char sig[8] = {};
  {
    auto f = open_file(path, "rb");
    if (std::fread(sig, 1, sizeof sig, f.get()) < 2) {
      throw IoError("'" + path.string() + "' is too short to be an image");
    }
  }
  if (png_sig_cmp(sig, 0, 8) == 0) return read_png(path);
  return read_pgm(path);
}

void write_gray(const std::filesystem::path& path, const GrayImage& image) {
  GrayImage img = image;
  const auto max_v = img.pixels.empty() ? 0 : *std::max_element(img.pixels.begin(), img.pixels.end());
  img.bit_depth = max_v < 256 ? 8 : 16;
  if (!has_png_extension(path)) {
    write_pgm(path, img);
    return;
  }
  const std::size_t bpp = img.bit_depth / 8;
  std::vector<unsigned char> raw;
  raw.reserve(img.pixels.size() * bpp);
  for (auto v : img.pixels) {
    if (bpp == 2) raw.push_back(static_cast<unsigned char>(v >> 8));
    raw.push_back(static_cast<unsigned char>(v & 0xff));
  }
  write_png(path, img.width, img.height, img.bit_depth, PNG_COLOR_TYPE_GRAY, raw,
            img.width * bpp);
}

void write_rgb(const std::filesystem::path& path, const RgbImage& image) {
  if (has_png_extension(path)) {
    write_png(path, image.width, image.height, 8, PNG_COLOR_TYPE_RGB, image.pixels,
              image.width * 3);
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  out << "P6\n" << image.width << ' ' << image.height << "\n255\n";
  out.write(reinterpret_cast<const char*>(image.pixels.data()),
            static_cast<std::streamsize>(image.pixels.size()));
  if (!out) throw IoError("failed writing '" + path.string() + "'");
}

LabelTable parse_label_table(const std::string& json_text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ValidationError(std::string("label table is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw ValidationError("label table must be a JSON object of id -> label");
  std::vector<LabelTable::Entry> entries;
  for (auto& [key, value] : j.items()) {
    std::size_t used = 0;
    unsigned long id = 0;
    try {
      id = std::stoul(key, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != key.size() || key.empty() || !std::isdigit(static_cast<unsigned char>(key[0]))) {
      throw ValidationError("label table key '" + key + "' is not a non-negative integer");
    }
    if (!value.is_string()) {
      throw ValidationError("label table value for id " + key + " must be a string");
    }
    entries.emplace_back(static_cast<LabelId>(id), value.get<std::string>());
  }
  return LabelTable(std::move(entries));
}

LabelTable read_label_table(const std::filesystem::path& path) {
  return parse_label_table(read_text(path));
}

std::string label_table_json(const LabelTable& table) {
  // Keys in ascending numeric order.
  nlohmann::ordered_json j = nlohmann::ordered_json::object();
  for (const auto& [id, label] : table.entries()) j[std::to_string(id)] = label;
  return j.dump();
}

LabelMask read_label_mask(const std::filesystem::path& path, const LabelTable& table) {
  GrayImage img = read_gray(path);
  std::vector<LabelId> data(img.pixels.begin(), img.pixels.end());
  return LabelMask(img.width, img.height, std::move(data), table);
}

BinaryGrid read_binary_mask(const std::filesystem::path& path) {
  GrayImage img = read_gray(path);
  std::vector<std::uint8_t> bits(img.pixels.size());
  std::transform(img.pixels.begin(), img.pixels.end(), bits.begin(),
                 [](std::uint16_t v) { return static_cast<std::uint8_t>(v != 0); });
  return BinaryGrid(img.height, img.width, std::move(bits));
}

void write_label_grid(const std::filesystem::path& path, const LabelGrid& grid) {
  write_gray(path, to_gray(grid.cells(), grid.cols(), grid.rows()));
}

void write_label_mask(const std::filesystem::path& path, const LabelMask& mask) {
  write_gray(path, to_gray(mask.data(), mask.width(), mask.height()));
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  out << text;
  if (!out) throw IoError("failed writing '" + path.string() + "'");
}

}  // namespace textmask::io
