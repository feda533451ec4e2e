#include "mot3d/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <optional>
#include <sstream>
#include <unordered_set>

#include <nlohmann/json.hpp>

#include "mot3d/assignment.hpp"
#include "mot3d/errors.hpp"

namespace mot3d {

// ---------------------------------------------------------------------------------------------
// Criterion and input sets
// ---------------------------------------------------------------------------------------------

double MatchCriterion::affinity(const Box3D& gt, const Box3D& hyp) const {
  if (kind == Kind::IoU) return iou_3d(gt, hyp);
  return 1.0 - center_distance(gt, hyp, distance_mode) / threshold;
}

bool MatchCriterion::passes(const Box3D& gt, const Box3D& hyp) const {
  if (kind == Kind::IoU) return iou_3d(gt, hyp) > threshold;
  return center_distance(gt, hyp, distance_mode) < threshold;
}

std::string MatchCriterion::label() const {
  char buf[64];
  std::snprintf(buf, sizeof buf, kind == Kind::IoU ? "IoU_thres=%g" : "Dist_thres=%g", threshold);
  return buf;
}

std::size_t GroundTruthSet::num_gt() const {
  std::size_t n = 0;
  for (const auto& seq : sequences) {
    for (const auto& frame : seq.frames) n += frame.size();
  }
  return n;
}

std::map<std::pair<std::size_t, int>, double> HypothesisSet::confidences() const {
  std::map<std::pair<std::size_t, int>, std::pair<double, std::size_t>> acc;
  for (std::size_t s = 0; s < sequences.size(); ++s) {
    for (const auto& frame : sequences[s].frames) {
      for (const auto& h : frame) {
        auto& [sum, count] = acc[{s, h.track_id}];
        sum += h.score;
        ++count;
      }
    }
  }
  std::map<std::pair<std::size_t, int>, double> out;
  for (const auto& [key, v] : acc) out.emplace(key, v.first / static_cast<double>(v.second));
  return out;
}

HypothesisSet HypothesisSet::filtered(double threshold) const {
  const auto conf = confidences();
  HypothesisSet out;
  out.class_label = class_label;
  out.sequences.resize(sequences.size());
  for (std::size_t s = 0; s < sequences.size(); ++s) {
    out.sequences[s].name = sequences[s].name;
    out.sequences[s].frames.resize(sequences[s].frames.size());
    for (std::size_t f = 0; f < sequences[s].frames.size(); ++f) {
      for (const auto& h : sequences[s].frames[f]) {
        if (conf.at({s, h.track_id}) >= threshold) out.sequences[s].frames[f].push_back(h);
      }
    }
  }
  return out;
}

// ---------------------------------------------------------------------------------------------
// Per-frame matching
// ---------------------------------------------------------------------------------------------

FrameMatch match_frame(std::span<const GtObject> gt, std::span<const HypObject> hyp,
                       const MatchCriterion& criterion, const Correspondence& prior,
                       std::span<const Box3D> ignored) {
  FrameMatch result;
  result.correspondence = prior;
  const std::size_t m = gt.size();
  const std::size_t n = hyp.size();
  std::vector<char> hyp_matched(n, 0);

  if (m > 0 && n > 0) {
    // Forbidden pairs cost more than any set of allowed pairs can save, so the optimum has
    // maximum cardinality first and maximum affinity second.
    const double forbidden = static_cast<double>(std::max(m, n)) + 2.0;
    Eigen::MatrixXd cost(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(n));
    Eigen::MatrixXd aff(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(n));
    Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic> ok(m, n);
    for (std::size_t i = 0; i < m; ++i) {
      const auto prev = prior.find(gt[i].track_id);
      for (std::size_t j = 0; j < n; ++j) {
        const auto ii = static_cast<Eigen::Index>(i);
        const auto jj = static_cast<Eigen::Index>(j);
        ok(ii, jj) = criterion.passes(gt[i].box, hyp[j].box);
        aff(ii, jj) = criterion.affinity(gt[i].box, hyp[j].box);
        const bool continues = prev != prior.end() && prev->second == hyp[j].track_id;
        cost(ii, jj) = ok(ii, jj) ? 1.0 - aff(ii, jj) - (continues ? kPersistenceBonus : 0.0) : forbidden;
      }
    }
    for (const auto& [i, j] : hungarian(cost)) {
      const auto ii = static_cast<Eigen::Index>(i);
      const auto jj = static_cast<Eigen::Index>(j);
      if (!ok(ii, jj)) continue;
      MatchedPair p{i, j, aff(ii, jj), false};
      const auto prev = prior.find(gt[i].track_id);
      if (prev != prior.end() && prev->second != hyp[j].track_id) {
        p.id_switch = true;
        ++result.ids;
      }
      result.correspondence[gt[i].track_id] = hyp[j].track_id;
      hyp_matched[j] = 1;
      result.pairs.push_back(p);
    }
  }

  result.fn = m - result.pairs.size();
  for (std::size_t j = 0; j < n; ++j) {
    if (hyp_matched[j]) continue;
    const bool on_ignored = std::any_of(ignored.begin(), ignored.end(),
                                        [&](const Box3D& b) { return criterion.passes(b, hyp[j].box); });
    if (on_ignored) {
      ++result.ignored_hyps;
    } else {
      ++result.fp;
    }
  }
  return result;
}

// ---------------------------------------------------------------------------------------------
// CLEAR metrics
// ---------------------------------------------------------------------------------------------

double mota(std::size_t fp, std::size_t fn, std::size_t ids, std::size_t num_gt) {
  if (num_gt == 0) throw UndefinedMetricError("MOTA is undefined for num_gt = 0");
  return 1.0 - static_cast<double>(fp + fn + ids) / static_cast<double>(num_gt);
}

double smota_r(double fp, double fn, double ids, double r, std::size_t num_gt) {
  if (!(r > 0.0 && r <= 1.0)) throw InvalidArgument("smota_r: recall must lie in (0, 1]");
  if (num_gt == 0) throw InvalidArgument("smota_r: num_gt must be positive");
  if (!(fp >= 0.0 && fn >= 0.0 && ids >= 0.0)) throw InvalidArgument("smota_r: counts must be non-negative");
  const double n = static_cast<double>(num_gt);
  const double errors = fp + fn + ids - (1.0 - r) * n;
  return std::clamp(1.0 - errors / (r * n), 0.0, 1.0);
}

ClearScore clear_metrics(const GroundTruthSet& gt, const HypothesisSet& hyp, const MatchCriterion& criterion) {
  ClearScore score;
  score.num_gt = gt.num_gt();
  if (score.num_gt == 0) {
    throw UndefinedMetricError("no ground-truth objects for class '" + gt.class_label + "'");
  }

  double affinity_sum = 0.0;
  const std::size_t num_seq = std::max(gt.sequences.size(), hyp.sequences.size());
  for (std::size_t s = 0; s < num_seq; ++s) {
    const SequenceGroundTruth* gseq = s < gt.sequences.size() ? &gt.sequences[s] : nullptr;
    const SequenceHypotheses* hseq = s < hyp.sequences.size() ? &hyp.sequences[s] : nullptr;
    const std::size_t num_frames =
        std::max(gseq ? gseq->frames.size() : 0, hseq ? hseq->frames.size() : 0);

    Correspondence corr;
    std::unordered_map<int, bool> tracked_last;  // gt id -> tracked in its last present frame
    std::unordered_set<int> ever_tracked;
    for (std::size_t f = 0; f < num_frames; ++f) {
      std::span<const GtObject> g;
      std::span<const Box3D> ign;
      std::span<const HypObject> h;
      if (gseq && f < gseq->frames.size()) g = gseq->frames[f];
      if (gseq && f < gseq->ignored.size()) ign = gseq->ignored[f];
      if (hseq && f < hseq->frames.size()) h = hseq->frames[f];

      FrameMatch fm = match_frame(g, h, criterion, corr, ign);
      score.tp += fm.pairs.size();
      score.fp += fm.fp;
      score.fn += fm.fn;
      score.ids += fm.ids;

      std::vector<char> matched(g.size(), 0);
      for (const auto& p : fm.pairs) {
        matched[p.gt] = 1;
        affinity_sum += p.affinity;
      }
      for (std::size_t k = 0; k < g.size(); ++k) {
        const int id = g[k].track_id;
        const bool now = matched[k] != 0;
        const auto it = tracked_last.find(id);
        if (now && it != tracked_last.end() && !it->second && ever_tracked.contains(id)) ++score.frag;
        tracked_last[id] = now;
        if (now) ever_tracked.insert(id);
      }
      corr = std::move(fm.correspondence);
    }
  }

  const double n = static_cast<double>(score.num_gt);
  score.recall = static_cast<double>(score.tp) / n;
  score.precision = score.tp + score.fp > 0 ? static_cast<double>(score.tp) / static_cast<double>(score.tp + score.fp) : 0.0;
  score.f1 = score.precision + score.recall > 0.0
                 ? 2.0 * score.precision * score.recall / (score.precision + score.recall)
                 : 0.0;
  score.mota = mota(score.fp, score.fn, score.ids, score.num_gt);
  score.motp = score.tp > 0 ? affinity_sum / static_cast<double>(score.tp) : 0.0;
  score.smota = score.recall > 0.0 ? smota_r(static_cast<double>(score.fp), static_cast<double>(score.fn),
                                             static_cast<double>(score.ids), std::min(score.recall, 1.0), score.num_gt)
                                   : 0.0;
  return score;
}

// ---------------------------------------------------------------------------------------------
// Recall sweep and integral metrics
// ---------------------------------------------------------------------------------------------

namespace {

constexpr double kRecallTolerance = 1e-12;

// Lazily evaluated nested subsets. Index 0 is the empty subset; index i keeps trajectories
// with confidence >= thresholds[i - 1]. Achieved recall is non-decreasing in the index since
// per-frame matching maximizes cardinality and the subsets are nested.
class NestedSubsets {
 public:
  NestedSubsets(const GroundTruthSet& gt, const HypothesisSet& hyp, const MatchCriterion& criterion)
      : gt_(gt), hyp_(hyp), criterion_(criterion) {
    for (const auto& [key, c] : hyp.confidences()) thresholds_.push_back(c);
    std::sort(thresholds_.begin(), thresholds_.end(), std::greater<>());
    thresholds_.erase(std::unique(thresholds_.begin(), thresholds_.end()), thresholds_.end());
    cache_.resize(thresholds_.size() + 1);
  }

  std::size_t size() const { return cache_.size(); }

  const ClearScore& at(std::size_t i) {
    if (!cache_[i]) {
      const double cut = i == 0 ? std::numeric_limits<double>::infinity() : thresholds_[i - 1];
      ClearScore s = clear_metrics(gt_, hyp_.filtered(cut), criterion_);
      s.threshold = cut;
      cache_[i] = s;
    }
    return *cache_[i];
  }

  // Largest index whose recall is <= r (index 0 always qualifies).
  std::size_t last_at_most(double r) {
    std::size_t lo = 0;
    std::size_t hi = size() - 1;
    while (lo < hi) {
      const std::size_t mid = lo + (hi - lo + 1) / 2;
      if (at(mid).recall <= r + kRecallTolerance) {
        lo = mid;
      } else {
        hi = mid - 1;
      }
    }
    return lo;
  }

  // Smallest index with the same recall as index i.
  std::size_t first_with_recall_of(std::size_t i) {
    const double target = at(i).recall;
    std::size_t lo = 0;
    std::size_t hi = i;
    while (lo < hi) {
      const std::size_t mid = lo + (hi - lo) / 2;
      if (at(mid).recall >= target - kRecallTolerance) {
        hi = mid;
      } else {
        lo = mid + 1;
      }
    }
    return lo;
  }

 private:
  const GroundTruthSet& gt_;
  const HypothesisSet& hyp_;
  const MatchCriterion& criterion_;
  std::vector<double> thresholds_;
  std::vector<std::optional<ClearScore>> cache_;
};

}  // namespace

std::vector<SweepEntry> recall_sweep(const GroundTruthSet& gt, const HypothesisSet& hyp,
                                     const MatchCriterion& criterion, int steps) {
  if (steps < 1) throw InvalidArgument("recall_sweep: steps must be >= 1");
  if (gt.num_gt() == 0) {
    throw UndefinedMetricError("no ground-truth objects for class '" + gt.class_label + "'");
  }
  NestedSubsets subsets(gt, hyp, criterion);
  const std::size_t full = subsets.size() - 1;
  const double max_recall = subsets.at(full).recall;
  const double n = static_cast<double>(gt.num_gt());

  std::vector<SweepEntry> sweep;
  sweep.reserve(static_cast<std::size_t>(steps));
  for (int l = 1; l <= steps; ++l) {
    SweepEntry e;
    const double r = static_cast<double>(l) / static_cast<double>(steps);
    e.target_recall = r;
    if (r > max_recall + kRecallTolerance) {
      e.score = e.lower = subsets.at(full);
      e.weight = 1.0;
      e.fp = static_cast<double>(e.score.fp);
      e.fn = static_cast<double>(e.score.fn);
      e.ids = static_cast<double>(e.score.ids);
      sweep.push_back(e);
      continue;
    }
    e.in_range = true;
    const std::size_t below = subsets.last_at_most(r);
    e.lower = subsets.at(subsets.first_with_recall_of(below));
    if (e.lower.recall >= r - kRecallTolerance) {
      e.score = e.lower;
      e.weight = 0.0;
    } else {
      // below < full here, since the full set reaches r
      e.score = subsets.at(below + 1);
      e.weight = (r - e.lower.recall) / (e.score.recall - e.lower.recall);
    }
    const double w = e.weight;
    auto mix = [w](double lo, double hi) { return (1.0 - w) * lo + w * hi; };
    e.fp = mix(static_cast<double>(e.lower.fp), static_cast<double>(e.score.fp));
    e.ids = mix(static_cast<double>(e.lower.ids), static_cast<double>(e.score.ids));
    e.fn = mix(static_cast<double>(e.lower.fn), static_cast<double>(e.score.fn));
    const double tp = mix(static_cast<double>(e.lower.tp), static_cast<double>(e.score.tp));
    const double affinity = mix(e.lower.motp * static_cast<double>(e.lower.tp),
                                e.score.motp * static_cast<double>(e.score.tp));
    e.mota = 1.0 - (e.fp + e.fn + e.ids) / n;
    e.smota = smota_r(e.fp, e.fn, e.ids, r, gt.num_gt());
    e.motp = tp > 0.0 ? affinity / tp : 0.0;
    sweep.push_back(e);
  }
  return sweep;
}

IntegralMetrics integral_metrics(std::span<const SweepEntry> sweep, int steps) {
  if (steps < 1 || sweep.size() != static_cast<std::size_t>(steps)) {
    throw InvalidArgument("integral_metrics: expected " + std::to_string(steps) + " sweep entries, got " +
                          std::to_string(sweep.size()));
  }
  IntegralMetrics m;
  for (const auto& e : sweep) {
    m.samota += e.smota;
    m.amota += e.mota;
    m.amotp += e.motp;
  }
  const double l = static_cast<double>(steps);
  m.samota /= l;
  m.amota /= l;
  m.amotp /= l;
  return m;
}

ClassReport evaluate_class(const GroundTruthSet& gt, const HypothesisSet& hyp, const MatchCriterion& criterion,
                           int steps) {
  ClassReport r;
  r.class_label = gt.class_label;
  r.full = clear_metrics(gt, hyp, criterion);
  r.sweep = recall_sweep(gt, hyp, criterion, steps);
  r.integral = integral_metrics(r.sweep, steps);
  r.best = r.full;
  for (const auto& e : r.sweep) {
    if (!e.in_range) continue;
    if (e.lower.mota > r.best.mota) r.best = e.lower;
    if (e.score.mota > r.best.mota) r.best = e.score;
  }
  return r;
}

// ---------------------------------------------------------------------------------------------
// Curves and report formatting
// ---------------------------------------------------------------------------------------------

std::vector<CurveRow> emit_curves(std::span<const SweepEntry> sweep) {
  std::vector<CurveRow> rows;
  rows.reserve(sweep.size());
  for (const auto& e : sweep) {
    rows.push_back({e.target_recall, e.score.threshold, e.fp, e.fn, e.ids, e.mota, e.smota, e.motp});
  }
  std::stable_sort(rows.begin(), rows.end(), [](const CurveRow& a, const CurveRow& b) { return a.recall < b.recall; });
  return rows;
}

std::string curves_to_csv(std::span<const CurveRow> rows) {
  std::string out = "recall,threshold,fp,fn,ids,mota,smota,motp\n";
  char buf[256];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%.6f,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f\n", r.recall, r.threshold, r.fp, r.fn,
                  r.ids, r.mota, r.smota, r.motp);
    out += buf;
  }
  return out;
}

std::string curve_to_svg(std::span<const CurveRow> rows, CurveMetric metric) {
  constexpr double kW = 480.0, kH = 320.0, kPad = 48.0;
  auto value = [metric](const CurveRow& r) -> double {
    switch (metric) {
      case CurveMetric::FP: return r.fp;
      case CurveMetric::FN: return r.fn;
      case CurveMetric::MOTA: return r.mota;
      case CurveMetric::SMOTA: return r.smota;
    }
    return 0.0;
  };
  const char* name = metric == CurveMetric::FP   ? "FP"
                     : metric == CurveMetric::FN ? "FN"
                     : metric == CurveMetric::MOTA ? "MOTA"
                                                   : "sMOTA";
  double lo = 0.0, hi = 1.0;
  for (const auto& r : rows) {
    lo = std::min(lo, value(r));
    hi = std::max(hi, value(r));
  }
  if (hi - lo <= 0.0) hi = lo + 1.0;

  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kW << "\" height=\"" << kH << "\">\n";
  svg << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  svg << "<line x1=\"" << kPad << "\" y1=\"" << kH - kPad << "\" x2=\"" << kW - kPad << "\" y2=\"" << kH - kPad
      << "\" stroke=\"black\"/>\n";
  svg << "<line x1=\"" << kPad << "\" y1=\"" << kPad << "\" x2=\"" << kPad << "\" y2=\"" << kH - kPad
      << "\" stroke=\"black\"/>\n";
  svg << "<text x=\"" << kW / 2 << "\" y=\"" << kH - 12 << "\" text-anchor=\"middle\">Recall</text>\n";
  svg << "<text x=\"12\" y=\"" << kH / 2 << "\" transform=\"rotate(-90 12 " << kH / 2
      << ")\" text-anchor=\"middle\">" << name << "</text>\n";
  svg << "<text x=\"" << kPad - 4 << "\" y=\"" << kH - kPad << "\" text-anchor=\"end\">" << lo << "</text>\n";
  svg << "<text x=\"" << kPad - 4 << "\" y=\"" << kPad + 4 << "\" text-anchor=\"end\">" << hi << "</text>\n";
  svg << "<polyline fill=\"none\" stroke=\"steelblue\" stroke-width=\"2\" points=\"";
  for (const auto& r : rows) {
    const double x = kPad + r.recall * (kW - 2 * kPad);
    const double y = kH - kPad - (value(r) - lo) / (hi - lo) * (kH - 2 * kPad);
    svg << x << ',' << y << ' ';
  }
  svg << "\"/>\n</svg>\n";
  return svg.str();
}

namespace {

nlohmann::json finite_or_null(double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(); }

nlohmann::json to_json(const ClearScore& s) {
  return {{"threshold", finite_or_null(s.threshold)},
          {"num_gt", s.num_gt},
          {"tp", s.tp},
          {"fp", s.fp},
          {"fn", s.fn},
          {"ids", s.ids},
          {"frag", s.frag},
          {"recall", s.recall},
          {"precision", s.precision},
          {"f1", s.f1},
          {"mota", s.mota},
          {"motp", s.motp},
          {"smota", s.smota}};
}

nlohmann::json to_json(const IntegralMetrics& m) {
  return {{"sAMOTA", m.samota}, {"AMOTA", m.amota}, {"AMOTP", m.amotp}};
}

}  // namespace

std::string report_to_json(const MetricsReport& report) {
  nlohmann::json j;
  j["criterion"] = {{"kind", report.criterion.kind == MatchCriterion::Kind::IoU ? "iou" : "distance"},
                    {"threshold", report.criterion.threshold}};
  j["recall_steps"] = report.recall_steps;
  j["classes"] = nlohmann::json::array();
  for (const auto& c : report.classes) {
    nlohmann::json jc = to_json(c.integral);
    jc["class"] = c.class_label;
    jc["full"] = to_json(c.full);
    jc["best"] = to_json(c.best);
    jc["sweep"] = nlohmann::json::array();
    for (const auto& e : c.sweep) {
      nlohmann::json je = to_json(e.score);
      je["target_recall"] = e.target_recall;
      je["in_range"] = e.in_range;
      je["lower_threshold"] = finite_or_null(e.lower.threshold);
      je["weight"] = e.weight;
      je["fp_r"] = e.fp;
      je["fn_r"] = e.fn;
      je["ids_r"] = e.ids;
      je["mota_r"] = e.mota;
      je["smota_r"] = e.smota;
      je["motp_r"] = e.motp;
      jc["sweep"].push_back(std::move(je));
    }
    j["classes"].push_back(std::move(jc));
  }
  j["skipped"] = report.skipped;
  j["mean"] = to_json(report.mean);
  return j.dump(2);
}

std::string report_to_table(const MetricsReport& report) {
  std::string out;
  char buf[256];
  std::snprintf(buf, sizeof buf, "%-12s %-16s %8s %8s %8s %8s %8s %6s %6s\n", "Class", "Criterion", "sAMOTA",
                "AMOTA", "AMOTP", "MOTA", "MOTP", "IDS", "FRAG");
  out += buf;
  const std::string crit = report.criterion.label();
  for (const auto& c : report.classes) {
    std::snprintf(buf, sizeof buf, "%-12s %-16s %8.2f %8.2f %8.2f %8.2f %8.2f %6zu %6zu\n", c.class_label.c_str(),
                  crit.c_str(), 100.0 * c.integral.samota, 100.0 * c.integral.amota, 100.0 * c.integral.amotp,
                  100.0 * c.best.mota, 100.0 * c.best.motp, c.best.ids, c.best.frag);
    out += buf;
  }
  if (report.classes.size() > 1) {
    std::snprintf(buf, sizeof buf, "%-12s %-16s %8.2f %8.2f %8.2f\n", "mean", crit.c_str(), 100.0 * report.mean.samota,
                  100.0 * report.mean.amota, 100.0 * report.mean.amotp);
    out += buf;
  }
  for (const auto& s : report.skipped) out += "warning: class '" + s + "' has no ground truth; omitted\n";
  return out;
}

}  // namespace mot3d
