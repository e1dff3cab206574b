#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "textmask/raster.hpp"

// Seeded generators for synthetic masks, used by the stats command, the
// acceptance suite and the python smoke tests.
namespace textmask::synth {

// mt19937_64 with range mapping done here rather than by <random>
// distributions, so a seed yields the same stream on every standard library.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  std::uint64_t next() { return gen_(); }
  // Uniform in [lo, hi].
  std::uint64_t uniform(std::uint64_t lo, std::uint64_t hi);
  // Uniform in [0, 1).
  double unit();
  bool coin(double p = 0.5) { return unit() < p; }

 private:
  std::mt19937_64 gen_;
};

struct Scene {
  LabelMask mask;  // 0 = background, 1 = the instance
  std::string referent;
};

// One irregular blob (perturbed rotated ellipse) on a size x size canvas.
Scene blob_scene(Rng& rng, std::size_t size = 256);

// Binary blob mask at `res` x `res`; may be empty when `allow_empty`.
BinaryGrid blob_bits(Rng& rng, std::size_t res, bool allow_empty = false);

// Grid with uniformly random labels drawn from ids 0..labels-1 of `table`,
// optionally smoothed into runs with probability `stickiness` of repeating
// the previous cell.
LabelGrid random_grid(Rng& rng, std::size_t rows, std::size_t cols, const LabelTable& table,
                      double stickiness = 0.0);

const std::vector<std::string>& referent_pool();

}  // namespace textmask::synth
