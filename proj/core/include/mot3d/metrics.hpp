#pragma once

#include <cstddef>
#include <limits>
#include <map>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "mot3d/geometry.hpp"

namespace mot3d {

// How a hypothesis box must relate to a ground-truth box to count as a match.
struct MatchCriterion {
  enum class Kind { IoU, Distance };

  Kind kind = Kind::IoU;
  double threshold = 0.25;  // IoU_thres, or Dist_thres in meters
  DistanceMode distance_mode = DistanceMode::Ground;

  static MatchCriterion iou(double thres) { return {Kind::IoU, thres, DistanceMode::Ground}; }
  static MatchCriterion distance(double thres, DistanceMode mode = DistanceMode::Ground) {
    return {Kind::Distance, thres, mode};
  }

  // IoU, or 1 - d / Dist_thres, so that higher is better in both modes.
  double affinity(const Box3D& gt, const Box3D& hyp) const;
  // Strict: IoU above the threshold, or distance below it.
  bool passes(const Box3D& gt, const Box3D& hyp) const;
  std::string label() const;
};

struct GtObject {
  int track_id = 0;
  Box3D box;
};

struct HypObject {
  int track_id = 0;
  Box3D box;
  double score = 1.0;
};

struct SequenceGroundTruth {
  std::string name;
  std::vector<std::vector<GtObject>> frames;
  // Boxes of neighbouring classes; hypotheses matching only these are neither TP nor FP.
  std::vector<std::vector<Box3D>> ignored;
};

struct GroundTruthSet {
  std::string class_label;
  std::vector<SequenceGroundTruth> sequences;

  std::size_t num_gt() const;
};

struct SequenceHypotheses {
  std::string name;
  std::vector<std::vector<HypObject>> frames;
};

struct HypothesisSet {
  std::string class_label;
  std::vector<SequenceHypotheses> sequences;

  // (sequence index, track id) -> mean of the trajectory's frame scores. Always recomputed.
  std::map<std::pair<std::size_t, int>, double> confidences() const;
  // Keeps whole trajectories whose confidence is >= threshold.
  HypothesisSet filtered(double threshold) const;
};

// gt track id -> hyp track id of its most recent match.
using Correspondence = std::unordered_map<int, int>;

struct MatchedPair {
  std::size_t gt = 0;   // index into the frame's gt list
  std::size_t hyp = 0;  // index into the frame's hypothesis list
  double affinity = 0.0;
  bool id_switch = false;
};

struct FrameMatch {
  std::vector<MatchedPair> pairs;
  std::size_t fp = 0;
  std::size_t fn = 0;
  std::size_t ids = 0;
  std::size_t ignored_hyps = 0;
  Correspondence correspondence;  // prior updated with this frame's matches
};

// Maximum-cardinality matching among criterion-passing pairs that maximizes total affinity,
// with a small bonus for continuing `prior` correspondences.
FrameMatch match_frame(std::span<const GtObject> gt, std::span<const HypObject> hyp,
                       const MatchCriterion& criterion, const Correspondence& prior,
                       std::span<const Box3D> ignored = {});

// Tie-break weight favouring continued correspondences; far below any meaningful affinity gap.
inline constexpr double kPersistenceBonus = 1e-6;

struct ClearScore {
  double threshold = -std::numeric_limits<double>::infinity();  // confidence cut, -inf for none
  std::size_t num_gt = 0;
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;
  std::size_t ids = 0;
  std::size_t frag = 0;
  double recall = 0.0;
  double precision = 0.0;
  double f1 = 0.0;
  double mota = 0.0;
  double motp = 0.0;
  double smota = 0.0;  // at the achieved recall
};

// Throws UndefinedMetricError when num_gt is 0.
ClearScore clear_metrics(const GroundTruthSet& gt, const HypothesisSet& hyp, const MatchCriterion& criterion);

double mota(std::size_t fp, std::size_t fn, std::size_t ids, std::size_t num_gt);

// max(0, 1 - (fp + fn + ids - (1 - r) num_gt) / (r num_gt)), capped at 1. Counts may be
// fractional (interpolated sweep entries). Throws InvalidArgument unless 0 < r <= 1 and num_gt > 0.
double smota_r(double fp, double fn, double ids, double r, std::size_t num_gt);

inline constexpr int kDefaultRecallSteps = 40;

// One operating point of the recall sweep at target recall r.
//
// Hypothesis subsets are nested by trajectory confidence. `score` is the highest-threshold
// subset whose recall reaches r; `lower` is the highest-threshold subset whose recall stays
// at or below r. Counts are interpolated between the two so that recall is exactly r, as if
// the cut were randomized between the two thresholds (weight is the share of `score`).
// Entries whose r exceeds the maximum achievable recall are out of range and contribute 0.
struct SweepEntry {
  double target_recall = 0.0;
  bool in_range = false;
  ClearScore score;  // full hypothesis set when out of range
  ClearScore lower;
  double weight = 0.0;
  double fp = 0.0;
  double fn = 0.0;
  double ids = 0.0;
  double mota = 0.0;
  double smota = 0.0;
  double motp = 0.0;
};

// One entry per target recall r = 1/L, 2/L, ..., 1.
std::vector<SweepEntry> recall_sweep(const GroundTruthSet& gt, const HypothesisSet& hyp,
                                     const MatchCriterion& criterion, int steps = kDefaultRecallSteps);

struct IntegralMetrics {
  double samota = 0.0;
  double amota = 0.0;
  double amotp = 0.0;
};

// Throws InvalidArgument when sweep.size() != steps.
IntegralMetrics integral_metrics(std::span<const SweepEntry> sweep, int steps = kDefaultRecallSteps);

struct ClassReport {
  std::string class_label;
  IntegralMetrics integral;
  ClearScore full;         // all hypotheses, no confidence cut
  ClearScore best;         // highest-MOTA operating point over the sweep and the full set
  std::vector<SweepEntry> sweep;
};

struct MetricsReport {
  MatchCriterion criterion;
  int recall_steps = kDefaultRecallSteps;
  std::vector<ClassReport> classes;
  std::vector<std::string> skipped;  // requested classes without ground truth
  IntegralMetrics mean;              // unweighted mean over evaluated classes
};

ClassReport evaluate_class(const GroundTruthSet& gt, const HypothesisSet& hyp, const MatchCriterion& criterion,
                           int steps = kDefaultRecallSteps);

struct CurveRow {
  double recall = 0.0;
  double threshold = 0.0;
  double fp = 0.0;
  double fn = 0.0;
  double ids = 0.0;
  double mota = 0.0;
  double smota = 0.0;
  double motp = 0.0;
};

// Rows in ascending recall order.
std::vector<CurveRow> emit_curves(std::span<const SweepEntry> sweep);

// Header recall,threshold,fp,fn,ids,mota,smota,motp; every value with 6 decimals.
std::string curves_to_csv(std::span<const CurveRow> rows);

enum class CurveMetric { FP, FN, MOTA, SMOTA };
// Self-contained SVG line chart of one metric against recall.
std::string curve_to_svg(std::span<const CurveRow> rows, CurveMetric metric);

std::string report_to_json(const MetricsReport& report);
// Human-readable table: one row per class plus the mean.
std::string report_to_table(const MetricsReport& report);

}  // namespace mot3d
