#include "textmask/synth.hpp"

#include <cmath>
#include <numbers>

namespace textmask::synth {

namespace {

struct Blob {
  double cx, cy, rx, ry, theta, a2, p2, a3, p3;

  bool contains(double x, double y) const {
    const double dx = x - cx, dy = y - cy;
    const double c = std::cos(theta), s = std::sin(theta);
    const double u = (c * dx + s * dy) / rx;
    const double v = (-s * dx + c * dy) / ry;
    const double phi = std::atan2(v, u);
    const double edge = 1.0 + a2 * std::sin(2 * phi + p2) + a3 * std::sin(3 * phi + p3);
    return std::sqrt(u * u + v * v) <= edge;
  }
};

Blob random_blob(Rng& rng, double size) {
  Blob b;
  b.cx = size * (0.2 + 0.6 * rng.unit());
  b.cy = size * (0.2 + 0.6 * rng.unit());
  b.rx = size * (0.05 + 0.22 * rng.unit());
  b.ry = size * (0.05 + 0.22 * rng.unit());
  b.theta = std::numbers::pi * rng.unit();
  b.a2 = 0.15 * rng.unit();
  b.p2 = 2 * std::numbers::pi * rng.unit();
  b.a3 = 0.1 * rng.unit();
  b.p3 = 2 * std::numbers::pi * rng.unit();
  return b;
}

}  // namespace

std::uint64_t Rng::uniform(std::uint64_t lo, std::uint64_t hi) {
  const std::uint64_t span = hi - lo + 1;
  if (span == 0) return next();  // full 64-bit range
  // Rejection keeps the mapping exactly uniform.
  const std::uint64_t limit = UINT64_MAX - UINT64_MAX % span;
  std::uint64_t x;
  do {
    x = next();
  } while (x >= limit);
  return lo + x % span;
}

double Rng::unit() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

const std::vector<std::string>& referent_pool() {
  static const std::vector<std::string> pool = {
      "dog",          "black dog",     "brown dog on the left", "cat",
      "person",       "man in red",    "woman holding umbrella", "red car",
      "bus",          "tree",          "bird on the branch",     "horse",
      "chair",        "laptop",        "giraffe on the right",   "boat",
  };
  return pool;
}

Scene blob_scene(Rng& rng, std::size_t size) {
  const Blob b = random_blob(rng, static_cast<double>(size));
  std::vector<LabelId> data(size * size, kBackgroundId);
  for (std::size_t y = 0; y < size; ++y) {
    for (std::size_t x = 0; x < size; ++x) {
      if (b.contains(x + 0.5, y + 0.5)) data[y * size + x] = 1;
    }
  }
  const auto& pool = referent_pool();
  std::string referent = pool[rng.uniform(0, pool.size() - 1)];
  return Scene{LabelMask(size, size, std::move(data), LabelTable::from_labels({referent})),
               std::move(referent)};
}

BinaryGrid blob_bits(Rng& rng, std::size_t res, bool allow_empty) {
  BinaryGrid g(res, res);
  if (allow_empty && rng.coin(0.05)) return g;
  const Blob b = random_blob(rng, static_cast<double>(res));
  bool any = false;
  for (std::size_t y = 0; y < res; ++y) {
    for (std::size_t x = 0; x < res; ++x) {
      if (b.contains(x + 0.5, y + 0.5)) {
        g.set(y, x, true);
        any = true;
      }
    }
  }
  if (!any) g.set(static_cast<std::size_t>(b.cy), static_cast<std::size_t>(b.cx), true);
  return g;
}

LabelGrid random_grid(Rng& rng, std::size_t rows, std::size_t cols, const LabelTable& table,
                      double stickiness) {
  const auto entries = table.entries();
  std::vector<LabelId> cells(rows * cols);
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (i > 0 && rng.coin(stickiness)) {
      cells[i] = cells[i - 1];
    } else {
      cells[i] = entries[rng.uniform(0, entries.size() - 1)].first;
    }
  }
  return LabelGrid(rows, cols, std::move(cells), table);
}

}  // namespace textmask::synth
