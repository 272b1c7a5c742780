// ntckws/eval.hpp
//
// Copyright 2026 The ntckws Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef NTCKWS_EVAL_HPP_
#define NTCKWS_EVAL_HPP_

#include <algorithm>
#include <map>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include "ntckws/decoder.hpp"
#include "ntckws/simulate.hpp"

#include "json.hpp"

namespace ntckws {

struct MatchOptions {
  // Utterance-level matching: any detection on a positive utterance counts.
  // Span matching requires overlap with the reference span widened by
  // `collar` frames on both sides.
  bool utterance_level = true;
  int collar = 10;
};

struct MatchCounts {
  int tp = 0;
  int fa = 0;
  int misses = 0;
};

namespace detail {

inline bool detection_matches(const Detection& d, const ManifestEntry& ref,
                              const MatchOptions& opts) {
  if (opts.utterance_level || ref.span_begin < 0) return true;
  int lo = ref.span_begin - opts.collar;
  int hi = ref.span_end + opts.collar;
  return d.end >= lo && d.start < hi;
}

inline std::unordered_map<std::string, const ManifestEntry*> index_refs(
    const std::vector<ManifestEntry>& refs) {
  std::unordered_map<std::string, const ManifestEntry*> by_utt;
  for (const auto& r : refs) {
    if (!by_utt.emplace(r.utt, &r).second)
      throw ValidationError(strcat("duplicate utterance id in references: ", r.utt));
  }
  return by_utt;
}

}  // namespace detail

// Counts at a fixed operating point. A positive utterance scores at most
// one true positive — duplicate activations on it collapse; every
// detection on a negative is a separate false alarm. Detections whose
// utterance is unknown are an error.
inline MatchCounts match_detections(const std::vector<Detection>& dets,
                                    const std::vector<ManifestEntry>& refs,
                                    const MatchOptions& opts = {}) {
  auto by_utt = detail::index_refs(refs);
  std::set<std::string> hit;
  MatchCounts counts;
  for (const Detection& d : dets) {
    auto it = by_utt.find(d.utt);
    if (it == by_utt.end())
      throw ValidationError(strcat("detection for unknown utterance: ", d.utt));
    const ManifestEntry& ref = *it->second;
    if (ref.label == 1) {
      if (detail::detection_matches(d, ref, opts)) hit.insert(d.utt);
    } else {
      counts.fa += 1;
    }
  }
  int positives = 0;
  for (const auto& r : refs) positives += (r.label == 1);
  counts.tp = static_cast<int>(hit.size());
  counts.misses = positives - counts.tp;
  return counts;
}

// Spec-shaped overload: span matching with the given collar.
inline MatchCounts match_detections(const std::vector<Detection>& dets,
                                    const std::vector<ManifestEntry>& refs,
                                    int collar) {
  MatchOptions opts;
  opts.utterance_level = false;
  opts.collar = collar;
  return match_detections(dets, refs, opts);
}

struct CurvePoint {
  double threshold = 0.0;
  double far_per_hour = 0.0;
  double recall = 0.0;
};

struct Curve {
  std::vector<CurvePoint> points;  // thresholds descending FAR/recall ascending
};

// Full monotone DET staircase: one point per distinct detection confidence
// plus the point above the maximum (0 FA, 0 recall). Detections on
// positives that fail the span match contribute nothing.
inline Curve sweep(const std::vector<Detection>& dets,
                   const std::vector<ManifestEntry>& refs, double neg_hours,
                   const MatchOptions& opts = {}) {
  if (neg_hours <= 0.0) throw ValidationError("sweep: neg_hours must be > 0");
  auto by_utt = detail::index_refs(refs);

  int positives = 0;
  for (const auto& r : refs) positives += (r.label == 1);

  // Best matching confidence per positive; all negative-side confidences.
  std::unordered_map<std::string, double> best_pos;
  std::vector<double> neg_confs;
  for (const Detection& d : dets) {
    auto it = by_utt.find(d.utt);
    if (it == by_utt.end())
      throw ValidationError(strcat("detection for unknown utterance: ", d.utt));
    const ManifestEntry& ref = *it->second;
    if (ref.label == 1) {
      if (!detail::detection_matches(d, ref, opts)) continue;
      auto [slot, fresh] = best_pos.emplace(d.utt, d.confidence);
      if (!fresh && d.confidence > slot->second) slot->second = d.confidence;
    } else {
      neg_confs.push_back(d.confidence);
    }
  }

  std::vector<double> thresholds;
  thresholds.reserve(dets.size());
  for (const Detection& d : dets) thresholds.push_back(d.confidence);
  std::sort(thresholds.begin(), thresholds.end(), std::greater<double>());
  thresholds.erase(std::unique(thresholds.begin(), thresholds.end()),
                   thresholds.end());

  std::vector<double> pos_confs;
  pos_confs.reserve(best_pos.size());
  for (const auto& [utt, c] : best_pos) pos_confs.push_back(c);
  std::sort(pos_confs.begin(), pos_confs.end(), std::greater<double>());
  std::sort(neg_confs.begin(), neg_confs.end(), std::greater<double>());

  Curve curve;
  // Point above the maximum confidence.
  double top = thresholds.empty() ? 1.0 : thresholds.front();
  curve.points.push_back({std::nextafter(top, 2.0), 0.0, 0.0});
  size_t pi = 0, ni = 0;
  for (double th : thresholds) {
    while (pi < pos_confs.size() && pos_confs[pi] >= th) ++pi;
    while (ni < neg_confs.size() && neg_confs[ni] >= th) ++ni;
    CurvePoint pt;
    pt.threshold = th;
    pt.far_per_hour = static_cast<double>(ni) / neg_hours;
    pt.recall = positives > 0 ? static_cast<double>(pi) / positives : 0.0;
    curve.points.push_back(pt);
  }
  return curve;
}

// Conservative (step-function) readout: the recall of the most permissive
// staircase point whose FAR does not exceed the target. No interpolation,
// so reported recalls never overstate the curve.
inline double recall_at_far(const Curve& curve, double far_per_hour) {
  if (curve.points.empty()) throw ValidationError("recall_at_far: empty curve");
  double best_far = -1.0;
  double best_recall = 0.0;
  for (const CurvePoint& pt : curve.points) {
    if (pt.far_per_hour > far_per_hour) continue;
    if (pt.far_per_hour > best_far ||
        (pt.far_per_hour == best_far && pt.recall > best_recall)) {
      best_far = pt.far_per_hour;
      best_recall = pt.recall;
    }
  }
  return best_recall;
}

// Threshold achieving that operating point (for per-level readouts).
inline double threshold_at_far(const Curve& curve, double far_per_hour) {
  if (curve.points.empty()) throw ValidationError("threshold_at_far: empty curve");
  double best_far = -1.0;
  double best_recall = -1.0;
  double threshold = curve.points.front().threshold;
  for (const CurvePoint& pt : curve.points) {
    if (pt.far_per_hour > far_per_hour) continue;
    if (pt.far_per_hour > best_far ||
        (pt.far_per_hour == best_far && pt.recall > best_recall)) {
      best_far = pt.far_per_hour;
      best_recall = pt.recall;
      threshold = pt.threshold;
    }
  }
  return threshold;
}

struct EvalOptions {
  std::vector<double> far_targets = {0.05, 0.5, 1.0};
  double frames_per_second = 100.0;
  MatchOptions match;
  // Total negative duration in hours; must be supplied (or derivable by
  // the caller from the posteriorgram files).
  double neg_hours = 0.0;
};

struct LevelRecall {
  std::string level;
  int total = 0;
  int detected = 0;
  double recall = 0.0;
};

struct OperatingPoint {
  double far_target = 0.0;
  double threshold = 0.0;
  double achieved_far = 0.0;
  double overall_recall = 0.0;
  std::vector<LevelRecall> per_level;
};

struct EvalReport {
  double neg_hours = 0.0;
  int positives = 0;
  int negatives = 0;
  int detections = 0;
  std::vector<OperatingPoint> operating_points;
  Curve curve;
};

inline EvalReport evaluate(const std::vector<Detection>& dets,
                           const std::vector<ManifestEntry>& refs,
                           const EvalOptions& opts) {
  if (opts.neg_hours <= 0.0)
    throw ValidationError("evaluate: neg_hours must be > 0");
  auto by_utt = detail::index_refs(refs);

  EvalReport report;
  report.neg_hours = opts.neg_hours;
  report.detections = static_cast<int>(dets.size());
  for (const auto& r : refs)
    (r.label == 1 ? report.positives : report.negatives) += 1;

  report.curve = sweep(dets, refs, opts.neg_hours, opts.match);

  // Per-positive best matched confidence, grouped by level.
  std::unordered_map<std::string, double> best_pos;
  for (const Detection& d : dets) {
    const ManifestEntry& ref = *by_utt.at(d.utt);
    if (ref.label != 1 || !detail::detection_matches(d, ref, opts.match)) continue;
    auto [slot, fresh] = best_pos.emplace(d.utt, d.confidence);
    if (!fresh && d.confidence > slot->second) slot->second = d.confidence;
  }

  std::map<std::string, std::vector<double>> level_confs;  // ordered by level name
  for (const auto& r : refs) {
    if (r.label != 1) continue;
    auto it = best_pos.find(r.utt);
    level_confs[r.level].push_back(it == best_pos.end() ? -1.0 : it->second);
  }

  for (double target : opts.far_targets) {
    OperatingPoint op;
    op.far_target = target;
    op.threshold = threshold_at_far(report.curve, target);
    op.overall_recall = recall_at_far(report.curve, target);
    // Achieved FAR at that threshold.
    for (const CurvePoint& pt : report.curve.points)
      if (pt.threshold == op.threshold) op.achieved_far = pt.far_per_hour;
    for (const auto& [level, confs] : level_confs) {
      LevelRecall lr;
      lr.level = level;
      lr.total = static_cast<int>(confs.size());
      for (double c : confs) lr.detected += (c >= op.threshold);
      lr.recall = lr.total > 0 ? static_cast<double>(lr.detected) / lr.total : 0.0;
      op.per_level.push_back(std::move(lr));
    }
    report.operating_points.push_back(std::move(op));
  }
  return report;
}

inline nlohmann::ordered_json report_to_json(const EvalReport& r) {
  nlohmann::ordered_json j;
  j["neg_hours"] = r.neg_hours;
  j["positives"] = r.positives;
  j["negatives"] = r.negatives;
  j["detections"] = r.detections;
  j["operating_points"] = nlohmann::ordered_json::array();
  for (const auto& op : r.operating_points) {
    nlohmann::ordered_json jo;
    jo["far_target"] = op.far_target;
    jo["threshold"] = op.threshold;
    jo["achieved_far"] = op.achieved_far;
    jo["overall_recall"] = op.overall_recall;
    jo["per_level"] = nlohmann::ordered_json::array();
    for (const auto& lr : op.per_level) {
      nlohmann::ordered_json jl;
      jl["level"] = lr.level;
      jl["total"] = lr.total;
      jl["detected"] = lr.detected;
      jl["recall"] = lr.recall;
      jo["per_level"].push_back(jl);
    }
    j["operating_points"].push_back(jo);
  }
  return j;
}

inline void write_curve_csv(const Curve& curve, std::ostream& os) {
  os << "threshold,far_per_hour,recall\n";
  os.precision(17);
  for (const CurvePoint& pt : curve.points)
    os << pt.threshold << ',' << pt.far_per_hour << ',' << pt.recall << '\n';
}

}  // namespace ntckws

#endif  // NTCKWS_EVAL_HPP_
