#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "textmask/raster.hpp"

namespace textmask::metrics {

// A prediction/ground-truth pair. A missing or all-zero grid means "no
// target". Boxes are optional and only feed Acc@0.5.
struct EvalPair {
  std::optional<BinaryGrid> prediction;
  std::optional<BinaryGrid> ground_truth;
  std::optional<BoxBins> predicted_box;
  std::optional<BoxBins> ground_truth_box;
  std::string id;
};

struct Overlap {
  std::size_t intersection = 0;
  std::size_t uni = 0;
};

// Throws ValidationError when dimensions differ.
Overlap overlap(const BinaryGrid& a, const BinaryGrid& b);

// |a & b| / |a | b|; 1 when neither grid has a set bit.
double iou(const BinaryGrid& a, const BinaryGrid& b);

// Box IoU on inclusive bin rectangles.
double box_iou(const BoxBins& a, const BoxBins& b);

bool is_no_target(const EvalPair& p);

// Intersection and union of one pair; zero for a no-target ground truth.
Overlap pair_overlap(const EvalPair& p);

// Per-pair score under the no-target convention: a no-target ground truth
// scores 1 when the prediction is empty and 0 otherwise.
double pair_score(const EvalPair& p);

// Each of these throws ValidationError on an empty corpus.
double ciou(std::span<const EvalPair> pairs);
double giou(std::span<const EvalPair> pairs);
// Mean IoU over targeted pairs; throws ValidationError when there are none.
double miou(std::span<const EvalPair> pairs);

// Fraction of pairs whose predicted box overlaps the ground truth with
// IoU >= 0.5; a missing prediction counts as a miss. Throws on length mismatch.
double acc_at_05(std::span<const std::optional<BoxBins>> predicted,
                 std::span<const BoxBins> ground_truth);

struct EvalReport {
  std::vector<double> per_pair;  // pair_score of each input pair
  std::vector<std::string> ids;
  double ciou = 0;
  double giou = 0;
  std::optional<double> miou;       // unset without targeted pairs
  std::optional<double> acc_at_05;  // unset without any ground-truth box
  std::size_t pairs = 0;
  std::size_t targeted = 0;
  std::size_t no_target_tp = 0;  // no-target ground truth, empty prediction
  std::size_t no_target_fn = 0;  // no-target ground truth, non-empty prediction
  std::size_t targeted_empty_predictions = 0;
  // Partial sums, mergeable across shards.
  std::size_t cum_intersection = 0;
  std::size_t cum_union = 0;

  std::string to_json(bool per_sample) const;
  std::string to_csv() const;
};

EvalReport evaluate(std::span<const EvalPair> pairs);

}  // namespace textmask::metrics
