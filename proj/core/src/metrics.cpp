#include "detbench/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "detbench/errors.hpp"

namespace detbench {

int MatchResult::threshold_index(double tau) const {
  for (std::size_t i = 0; i < thresholds.size(); ++i) {
    if (std::abs(thresholds[i] - tau) < 1e-9) return static_cast<int>(i);
  }
  raise(Errc::bad_config, "IoU threshold " + std::to_string(tau) + " not in match result");
}

void MatchResult::merge(const MatchResult& other) {
  if (thresholds.empty() && outcomes.empty() && gt_total == 0) {
    *this = other;
    return;
  }
  if (thresholds != other.thresholds) {
    raise(Errc::bad_config, "cannot merge match results with different thresholds");
  }
  const auto offset = static_cast<int>(gt_total);
  for (PredictionOutcome o : other.outcomes) {
    for (auto& g : o.matched_gt) {
      if (g >= 0) g += offset;
    }
    outcomes.push_back(std::move(o));
  }
  if (other.gt_per_class.size() > gt_per_class.size()) {
    gt_per_class.resize(other.gt_per_class.size(), 0);
  }
  for (std::size_t c = 0; c < other.gt_per_class.size(); ++c) gt_per_class[c] += other.gt_per_class[c];
  gt_total += other.gt_total;
}

namespace {

void validate_thresholds(const std::vector<double>& taus) {
  if (taus.empty()) raise(Errc::bad_config, "no IoU thresholds given");
  for (std::size_t i = 0; i < taus.size(); ++i) {
    if (taus[i] <= 0.0 || taus[i] > 1.0) {
      raise(Errc::bad_config, "IoU threshold " + std::to_string(taus[i]) + " outside (0,1]");
    }
    if (i > 0 && taus[i] <= taus[i - 1]) {
      raise(Errc::bad_config, "IoU thresholds must be strictly ascending");
    }
  }
}

// Input-order indices sorted by descending confidence; stable, so equal
// confidences keep input order.
std::vector<int> confidence_order(const std::vector<BoundingBox>& preds) {
  std::vector<int> order(preds.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    return *preds[static_cast<std::size_t>(a)].confidence >
           *preds[static_cast<std::size_t>(b)].confidence;
  });
  return order;
}

}  // namespace

MatchResult match_predictions(const std::vector<BoundingBox>& gts,
                              const std::vector<BoundingBox>& preds,
                              const std::vector<double>& iou_thresholds) {
  validate_thresholds(iou_thresholds);
  MatchResult result;
  result.thresholds = iou_thresholds;
  result.gt_total = static_cast<std::int64_t>(gts.size());
  for (const auto& g : gts) {
    if (g.class_id < 0) raise(Errc::unknown_class, "ground truth with negative class id");
    if (g.class_id >= static_cast<int>(result.gt_per_class.size())) {
      result.gt_per_class.resize(static_cast<std::size_t>(g.class_id) + 1, 0);
    }
    ++result.gt_per_class[static_cast<std::size_t>(g.class_id)];
  }

  result.outcomes.resize(preds.size());
  for (std::size_t i = 0; i < preds.size(); ++i) {
    if (!preds[i].confidence) raise(Errc::missing_confidence, "prediction without confidence");
    auto& o = result.outcomes[i];
    o.confidence = *preds[i].confidence;
    o.class_id = preds[i].class_id;
    o.tp.assign(iou_thresholds.size(), 0);
    o.matched_gt.assign(iou_thresholds.size(), -1);
  }
  if (preds.empty() || gts.empty()) return result;

  std::vector<double> overlap(preds.size() * gts.size());
  for (std::size_t p = 0; p < preds.size(); ++p) {
    for (std::size_t g = 0; g < gts.size(); ++g) {
      overlap[p * gts.size() + g] = iou(preds[p], gts[g]);
    }
  }

  const std::vector<int> order = confidence_order(preds);
  std::vector<char> taken(gts.size());
  for (std::size_t ti = 0; ti < iou_thresholds.size(); ++ti) {
    const double tau = iou_thresholds[ti];
    std::fill(taken.begin(), taken.end(), 0);
    for (const int pi : order) {
      const auto p = static_cast<std::size_t>(pi);
      int best = -1;
      double best_iou = 0.0;
      for (std::size_t g = 0; g < gts.size(); ++g) {
        if (taken[g] || gts[g].class_id != preds[p].class_id) continue;
        const double v = overlap[p * gts.size() + g];
        if (v > best_iou) {  // strict: IoU ties keep the lowest gt index
          best_iou = v;
          best = static_cast<int>(g);
        }
      }
      if (best >= 0 && best_iou >= tau) {
        taken[static_cast<std::size_t>(best)] = 1;
        result.outcomes[p].tp[ti] = 1;
        result.outcomes[p].matched_gt[ti] = best;
      }
    }
  }
  return result;
}

double precision(std::int64_t tp, std::int64_t fp) {
  if (tp < 0 || fp < 0) raise(Errc::out_of_range, "negative count");
  if (tp + fp == 0) return 1.0;
  return static_cast<double>(tp) / static_cast<double>(tp + fp);
}

double recall(std::int64_t tp, std::int64_t fn, bool* no_support) {
  if (tp < 0 || fn < 0) raise(Errc::out_of_range, "negative count");
  if (no_support) *no_support = (tp + fn == 0);
  if (tp + fn == 0) return 0.0;
  return static_cast<double>(tp) / static_cast<double>(tp + fn);
}

double f1(double p, double r) {
  if (p < 0.0 || p > 1.0 || r < 0.0 || r > 1.0) raise(Errc::out_of_range, "p/r outside [0,1]");
  if (p + r == 0.0) return 0.0;
  return 2.0 * p * r / (p + r);
}

std::optional<double> average_precision(const MatchResult& match, int class_id,
                                        double iou_threshold) {
  const int ti = match.threshold_index(iou_threshold);
  const std::int64_t n_gt = match.gt_count(class_id);
  if (n_gt == 0) return std::nullopt;

  // Class predictions in descending-confidence order; outcomes already hold
  // input order, so the stable sort reproduces the matching pass's ordering.
  std::vector<int> idx;
  for (std::size_t i = 0; i < match.outcomes.size(); ++i) {
    if (match.outcomes[i].class_id == class_id) idx.push_back(static_cast<int>(i));
  }
  std::stable_sort(idx.begin(), idx.end(), [&](int a, int b) {
    return match.outcomes[static_cast<std::size_t>(a)].confidence >
           match.outcomes[static_cast<std::size_t>(b)].confidence;
  });

  std::vector<double> prec(idx.size()), rec(idx.size());
  std::int64_t tp = 0;
  for (std::size_t i = 0; i < idx.size(); ++i) {
    if (match.outcomes[static_cast<std::size_t>(idx[i])].tp[static_cast<std::size_t>(ti)]) ++tp;
    prec[i] = static_cast<double>(tp) / static_cast<double>(i + 1);
    rec[i] = static_cast<double>(tp) / static_cast<double>(n_gt);
  }

  // Precision envelope: best precision at this recall or beyond.
  std::vector<double> envelope(prec);
  for (std::size_t i = envelope.size(); i-- > 1;) {
    envelope[i - 1] = std::max(envelope[i - 1], envelope[i]);
  }

  double sum = 0.0;
  std::size_t j = 0;
  for (int k = 0; k <= 100; ++k) {
    const double r = static_cast<double>(k) / 100.0;
    while (j < rec.size() && rec[j] < r) ++j;
    if (j < envelope.size()) sum += envelope[j];
  }
  return sum / 101.0;
}

double mean_ap(const std::vector<double>& per_class_aps) {
  if (per_class_aps.empty()) raise(Errc::empty_list, "mean over zero AP values");
  double sum = 0.0;
  for (const double v : per_class_aps) sum += v;
  return sum / static_cast<double>(per_class_aps.size());
}

SweepCurves sweep_curves(const MatchResult& match, double iou_threshold, int n_points,
                         bool include_breakpoints) {
  if (n_points < 2) raise(Errc::bad_config, "sweep needs at least 2 points");
  const auto ti = static_cast<std::size_t>(match.threshold_index(iou_threshold));
  const int classes = static_cast<int>(match.gt_per_class.size());

  std::set<double> grid;
  for (int i = 0; i < n_points; ++i) {
    grid.insert(static_cast<double>(i) / static_cast<double>(n_points - 1));
  }
  if (include_breakpoints) {
    for (const auto& o : match.outcomes) grid.insert(o.confidence);
  }

  SweepCurves out;
  out.thresholds.assign(grid.begin(), grid.end());

  // Per class: confidences descending with a TP prefix sum, so each threshold
  // is a binary search instead of a rescan.
  std::vector<std::vector<double>> conf_desc(static_cast<std::size_t>(classes) + 1);
  std::vector<std::vector<std::int64_t>> tp_prefix(static_cast<std::size_t>(classes) + 1);
  const auto pooled = static_cast<std::size_t>(classes);
  {
    std::vector<std::vector<std::pair<double, char>>> rows(static_cast<std::size_t>(classes) + 1);
    for (const auto& o : match.outcomes) {
      const char hit = o.tp[ti];
      rows[pooled].emplace_back(o.confidence, hit);
      if (o.class_id >= 0 && o.class_id < classes) {
        rows[static_cast<std::size_t>(o.class_id)].emplace_back(o.confidence, hit);
      }
    }
    for (std::size_t c = 0; c < rows.size(); ++c) {
      auto& row = rows[c];
      std::stable_sort(row.begin(), row.end(),
                       [](const auto& a, const auto& b) { return a.first > b.first; });
      conf_desc[c].reserve(row.size());
      tp_prefix[c].assign(row.size() + 1, 0);
      for (std::size_t i = 0; i < row.size(); ++i) {
        conf_desc[c].push_back(row[i].first);
        tp_prefix[c][i + 1] = tp_prefix[c][i] + row[i].second;
      }
    }
  }

  const auto sample_at = [&](std::size_t c, std::int64_t n_gt, double t) {
    const auto& confs = conf_desc[c];
    // count of predictions with confidence >= t
    const auto it = std::partition_point(confs.begin(), confs.end(),
                                         [&](double v) { return v >= t; });
    const auto kept = static_cast<std::int64_t>(it - confs.begin());
    const std::int64_t tp = tp_prefix[c][static_cast<std::size_t>(kept)];
    const std::int64_t fp = kept - tp;
    CurveSample s;
    s.confidence_threshold = t;
    s.precision = precision(tp, fp);
    s.recall = recall(tp, n_gt - tp);
    s.f1 = f1(s.precision, s.recall);
    return s;
  };

  out.per_class.resize(static_cast<std::size_t>(classes));
  for (int c = 0; c < classes; ++c) {
    auto& samples = out.per_class[static_cast<std::size_t>(c)];
    samples.reserve(out.thresholds.size());
    for (const double t : out.thresholds) {
      samples.push_back(sample_at(static_cast<std::size_t>(c), match.gt_count(c), t));
    }
  }
  out.all_classes.reserve(out.thresholds.size());
  for (const double t : out.thresholds) {
    out.all_classes.push_back(sample_at(pooled, match.gt_total, t));
  }

  out.best_f1 = 0.0;
  out.best_f1_threshold = out.thresholds.empty() ? 0.0 : out.thresholds.front();
  for (const auto& s : out.all_classes) {
    if (s.f1 > out.best_f1) {
      out.best_f1 = s.f1;
      out.best_f1_threshold = s.confidence_threshold;
    }
  }
  return out;
}

std::int64_t ConfusionMatrix::at(int true_class, int predicted_class) const {
  const int side = class_count + 1;
  if (true_class < 0 || true_class >= side || predicted_class < 0 || predicted_class >= side) {
    raise(Errc::out_of_range, "confusion matrix index out of range");
  }
  return counts[static_cast<std::size_t>(true_class * side + predicted_class)];
}

std::int64_t& ConfusionMatrix::at(int true_class, int predicted_class) {
  const int side = class_count + 1;
  if (true_class < 0 || true_class >= side || predicted_class < 0 || predicted_class >= side) {
    raise(Errc::out_of_range, "confusion matrix index out of range");
  }
  return counts[static_cast<std::size_t>(true_class * side + predicted_class)];
}

std::vector<double> ConfusionMatrix::normalized() const {
  const int side = class_count + 1;
  std::vector<double> out(counts.size(), 0.0);
  for (int r = 0; r < side; ++r) {
    std::int64_t row_sum = 0;
    for (int c = 0; c < side; ++c) row_sum += at(r, c);
    if (row_sum == 0) continue;
    for (int c = 0; c < side; ++c) {
      out[static_cast<std::size_t>(r * side + c)] =
          static_cast<double>(at(r, c)) / static_cast<double>(row_sum);
    }
  }
  return out;
}

ConfusionMatrix make_confusion_matrix(int class_count, double conf_threshold,
                                      double iou_threshold) {
  if (class_count <= 0) raise(Errc::bad_config, "class count must be positive");
  if (conf_threshold <= 0.0 || conf_threshold >= 1.0 || iou_threshold <= 0.0 ||
      iou_threshold >= 1.0) {
    raise(Errc::bad_config, "confusion thresholds must lie in (0,1)");
  }
  ConfusionMatrix cm;
  cm.class_count = class_count;
  cm.conf_threshold = conf_threshold;
  cm.iou_threshold = iou_threshold;
  cm.counts.assign(static_cast<std::size_t>((class_count + 1) * (class_count + 1)), 0);
  return cm;
}

void accumulate_confusion(ConfusionMatrix& cm, const std::vector<BoundingBox>& gts,
                          const std::vector<BoundingBox>& preds) {
  const int bg = cm.class_count;
  std::vector<int> kept;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    if (!preds[i].confidence) raise(Errc::missing_confidence, "prediction without confidence");
    if (*preds[i].confidence >= cm.conf_threshold) kept.push_back(static_cast<int>(i));
  }
  std::stable_sort(kept.begin(), kept.end(), [&](int a, int b) {
    return *preds[static_cast<std::size_t>(a)].confidence >
           *preds[static_cast<std::size_t>(b)].confidence;
  });

  std::vector<char> taken(gts.size(), 0);
  for (const int pi : kept) {
    const auto& p = preds[static_cast<std::size_t>(pi)];
    if (p.class_id < 0 || p.class_id >= cm.class_count) {
      raise(Errc::unknown_class, "prediction class outside matrix");
    }
    int best = -1;
    double best_iou = 0.0;
    for (std::size_t g = 0; g < gts.size(); ++g) {
      if (taken[g]) continue;  // class ignored: cross-class cells are the point
      const double v = iou(p, gts[g]);
      if (v > best_iou) {
        best_iou = v;
        best = static_cast<int>(g);
      }
    }
    if (best >= 0 && best_iou >= cm.iou_threshold) {
      taken[static_cast<std::size_t>(best)] = 1;
      const int tc = gts[static_cast<std::size_t>(best)].class_id;
      if (tc < 0 || tc >= cm.class_count) raise(Errc::unknown_class, "ground-truth class outside matrix");
      ++cm.at(tc, p.class_id);
    } else {
      ++cm.at(bg, p.class_id);
    }
  }
  for (std::size_t g = 0; g < gts.size(); ++g) {
    if (taken[g]) continue;
    const int tc = gts[g].class_id;
    if (tc < 0 || tc >= cm.class_count) raise(Errc::unknown_class, "ground-truth class outside matrix");
    ++cm.at(tc, bg);
  }
}

ConfusionMatrix confusion_matrix(const std::vector<BoundingBox>& gts,
                                 const std::vector<BoundingBox>& preds, int class_count,
                                 double conf_threshold, double iou_threshold) {
  ConfusionMatrix cm = make_confusion_matrix(class_count, conf_threshold, iou_threshold);
  accumulate_confusion(cm, gts, preds);
  return cm;
}

TimingStats timing_stats(std::vector<double> latencies_ms) {
  if (latencies_ms.empty()) raise(Errc::empty_list, "no latencies");
  double sum = 0.0;
  for (const double v : latencies_ms) {
    if (!(v > 0.0)) raise(Errc::out_of_range, "latency must be positive");
    sum += v;
  }
  TimingStats st;
  st.latencies_ms = std::move(latencies_ms);
  const std::size_t n = st.latencies_ms.size();
  st.mean_ms = sum / static_cast<double>(n);
  st.fps = 1000.0 * static_cast<double>(n) / sum;

  std::vector<double> sorted(st.latencies_ms);
  std::sort(sorted.begin(), sorted.end());
  st.median_ms = (n % 2 == 1) ? sorted[n / 2] : 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]);
  const auto rank = static_cast<std::size_t>(
      std::ceil(0.95 * static_cast<double>(n)));  // nearest-rank, 1-based
  st.p95_ms = sorted[std::max<std::size_t>(rank, 1) - 1];
  return st;
}

}  // namespace detbench
