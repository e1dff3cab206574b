#include "textmask/metrics.hpp"

#include <algorithm>
#include <iomanip>
#include <json.hpp>
#include <sstream>

#include "textmask/error.hpp"

namespace textmask::metrics {

namespace {

bool empty_grid(const std::optional<BinaryGrid>& g) { return !g || !g->any(); }

void require_pairs(std::span<const EvalPair> pairs) {
  if (pairs.empty()) throw ValidationError("metrics need at least one pair");
}

// Corpus-level cIoU when every pair was no-target: nothing to accumulate, so
// the score reduces to whether all no-target pairs were predicted empty.
double ciou_from(std::size_t inter, std::size_t uni, bool all_tp) {
  if (uni == 0) return all_tp ? 1.0 : 0.0;
  return static_cast<double>(inter) / static_cast<double>(uni);
}

}  // namespace

Overlap overlap(const BinaryGrid& a, const BinaryGrid& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw ValidationError("IoU of grids with different dimensions");
  }
  Overlap o;
  const auto x = a.bits();
  const auto y = b.bits();
  for (std::size_t i = 0; i < x.size(); ++i) {
    o.intersection += static_cast<std::size_t>(x[i] & y[i]);
    o.uni += static_cast<std::size_t>(x[i] | y[i]);
  }
  return o;
}

double iou(const BinaryGrid& a, const BinaryGrid& b) {
  const auto o = overlap(a, b);
  if (o.uni == 0) return 1.0;
  return static_cast<double>(o.intersection) / static_cast<double>(o.uni);
}

double box_iou(const BoxBins& a, const BoxBins& b) {
  const auto ix1 = std::max(a.x1, b.x1), iy1 = std::max(a.y1, b.y1);
  const auto ix2 = std::min(a.x2, b.x2), iy2 = std::min(a.y2, b.y2);
  std::size_t inter = 0;
  if (ix1 <= ix2 && iy1 <= iy2) inter = std::size_t{ix2 - ix1 + 1} * (iy2 - iy1 + 1);
  const std::size_t uni = a.area() + b.area() - inter;
  return static_cast<double>(inter) / static_cast<double>(uni);
}

bool is_no_target(const EvalPair& p) { return empty_grid(p.ground_truth); }

Overlap pair_overlap(const EvalPair& p) {
  if (is_no_target(p)) return {};
  if (empty_grid(p.prediction)) return {0, p.ground_truth->count()};
  return overlap(*p.prediction, *p.ground_truth);
}

double pair_score(const EvalPair& p) {
  if (is_no_target(p)) return empty_grid(p.prediction) ? 1.0 : 0.0;
  const auto o = pair_overlap(p);
  return static_cast<double>(o.intersection) / static_cast<double>(o.uni);
}

double ciou(std::span<const EvalPair> pairs) {
  require_pairs(pairs);
  std::size_t inter = 0, uni = 0;
  bool all_tp = true;
  for (const auto& p : pairs) {
    const auto o = pair_overlap(p);
    inter += o.intersection;
    uni += o.uni;
    if (is_no_target(p) && !empty_grid(p.prediction)) all_tp = false;
  }
  return ciou_from(inter, uni, all_tp);
}

double giou(std::span<const EvalPair> pairs) {
  require_pairs(pairs);
  double sum = 0;
  for (const auto& p : pairs) sum += pair_score(p);
  return sum / static_cast<double>(pairs.size());
}

double miou(std::span<const EvalPair> pairs) {
  require_pairs(pairs);
  double sum = 0;
  std::size_t n = 0;
  for (const auto& p : pairs) {
    if (is_no_target(p)) continue;
    sum += pair_score(p);
    ++n;
  }
  if (n == 0) throw ValidationError("mIoU needs at least one targeted pair");
  return sum / static_cast<double>(n);
}

double acc_at_05(std::span<const std::optional<BoxBins>> predicted,
                 std::span<const BoxBins> ground_truth) {
  if (predicted.size() != ground_truth.size()) {
    throw ValidationError("Acc@0.5 needs one predicted box per ground-truth box");
  }
  if (ground_truth.empty()) throw ValidationError("Acc@0.5 needs at least one box");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < ground_truth.size(); ++i) {
    if (predicted[i] && box_iou(*predicted[i], ground_truth[i]) >= 0.5) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(ground_truth.size());
}

EvalReport evaluate(std::span<const EvalPair> pairs) {
  require_pairs(pairs);
  EvalReport r;
  r.pairs = pairs.size();
  std::vector<std::optional<BoxBins>> pred_boxes;
  std::vector<BoxBins> gt_boxes;
  double targeted_sum = 0;
  for (const auto& p : pairs) {
    const double s = pair_score(p);
    r.per_pair.push_back(s);
    r.ids.push_back(p.id);
    const auto o = pair_overlap(p);
    r.cum_intersection += o.intersection;
    r.cum_union += o.uni;
    if (is_no_target(p)) {
      (empty_grid(p.prediction) ? r.no_target_tp : r.no_target_fn)++;
    } else {
      ++r.targeted;
      targeted_sum += s;
      if (empty_grid(p.prediction)) ++r.targeted_empty_predictions;
    }
    if (p.ground_truth_box) {
      gt_boxes.push_back(*p.ground_truth_box);
      pred_boxes.push_back(p.predicted_box);
    }
  }
  r.ciou = ciou_from(r.cum_intersection, r.cum_union, r.no_target_fn == 0);
  r.giou = giou(pairs);
  if (r.targeted > 0) r.miou = targeted_sum / static_cast<double>(r.targeted);
  if (!gt_boxes.empty()) r.acc_at_05 = acc_at_05(pred_boxes, gt_boxes);
  return r;
}

std::string EvalReport::to_json(bool per_sample) const {
  nlohmann::ordered_json j;
  j["pairs"] = pairs;
  j["targeted"] = targeted;
  j["ciou"] = ciou;
  j["giou"] = giou;
  j["miou"] = miou ? nlohmann::ordered_json(*miou) : nlohmann::ordered_json(nullptr);
  j["acc_at_05"] = acc_at_05 ? nlohmann::ordered_json(*acc_at_05) : nlohmann::ordered_json(nullptr);
  j["cum_intersection"] = cum_intersection;
  j["cum_union"] = cum_union;
  j["no_target_tp"] = no_target_tp;
  j["no_target_fn"] = no_target_fn;
  j["targeted_empty_predictions"] = targeted_empty_predictions;
  j["conventions"] = {
      "empty/empty pair IoU is 1",
      "no-target ground truth: empty prediction scores 1, non-empty scores 0",
      "targeted ground truth with empty prediction scores IoU 0",
  };
  if (per_sample) {
    auto arr = nlohmann::ordered_json::array();
    for (std::size_t i = 0; i < per_pair.size(); ++i) {
      arr.push_back(nlohmann::ordered_json{{"id", ids[i]}, {"score", per_pair[i]}});
    }
    j["per_sample"] = std::move(arr);
  }
  return j.dump(2);
}

std::string EvalReport::to_csv() const {
  std::ostringstream os;
  os << std::setprecision(6) << std::fixed;
  os << "pairs,targeted,ciou,giou,miou,acc_at_05,no_target_tp,no_target_fn\n";
  os << pairs << ',' << targeted << ',' << ciou << ',' << giou << ',';
  if (miou) os << *miou;
  os << ',';
  if (acc_at_05) os << *acc_at_05;
  os << ',' << no_target_tp << ',' << no_target_fn << '\n';
  return os.str();
}

}  // namespace textmask::metrics
