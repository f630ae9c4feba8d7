#include "sipmask/evaluation.hpp"

#include <algorithm>
#include <numeric>
#include <set>

#include <json.hpp>

namespace sipmask {

std::vector<double> default_iou_thresholds() {
  std::vector<double> t;
  for (int i = 0; i < 10; ++i) t.push_back(0.5 + 0.05 * i);
  return t;
}

double mask_iou(const Tensor& a, const Tensor& b) {
  SIP_CHECK(a.same_shape(b), "mask resolution mismatch: "
                                 << a.dim(0) << "x" << a.dim(1) << " vs "
                                 << b.dim(0) << "x" << b.dim(1));
  size_t inter = 0, uni = 0;
  for (size_t i = 0; i < a.size(); ++i) {
    const bool pa = a[i] > 0, pb = b[i] > 0;
    inter += pa && pb;
    uni += pa || pb;
  }
  return uni ? static_cast<double>(inter) / static_cast<double>(uni) : 0.0;
}

namespace {

constexpr int kRecallPoints = 101;

std::vector<int> classes_with_gt(const std::vector<EvalGroundTruth>& gts) {
  std::set<int> s;
  for (const auto& g : gts) s.insert(g.class_id);
  return {s.begin(), s.end()};
}

std::vector<size_t> preds_by_score(const std::vector<EvalPrediction>& preds,
                                   int class_id) {
  std::vector<size_t> idx;
  for (size_t i = 0; i < preds.size(); ++i)
    if (preds[i].class_id == class_id) idx.push_back(i);
  std::stable_sort(idx.begin(), idx.end(), [&](size_t a, size_t b) {
    return preds[a].score > preds[b].score;
  });
  return idx;
}

// Greedy score-ordered matching at one threshold; returns the TP flags in
// score order plus the gt count.
std::vector<char> match_at_threshold(
    const std::vector<EvalPrediction>& preds,
    const std::vector<EvalGroundTruth>& gts, const std::vector<size_t>& order,
    const std::vector<size_t>& gt_idx,
    const std::vector<std::vector<double>>& iou_cache, double thr) {
  std::vector<char> tp(order.size(), 0);
  std::vector<char> taken(gt_idx.size(), 0);
  for (size_t oi = 0; oi < order.size(); ++oi) {
    const auto& p = preds[order[oi]];
    int best = -1;
    double best_iou = 0;
    for (size_t gi = 0; gi < gt_idx.size(); ++gi) {
      if (taken[gi]) continue;
      if (gts[gt_idx[gi]].image_id != p.image_id) continue;
      const double v = iou_cache[oi][gi];
      if (v >= thr && v > best_iou) {
        best_iou = v;
        best = static_cast<int>(gi);
      }
    }
    if (best >= 0) {
      taken[static_cast<size_t>(best)] = 1;
      tp[oi] = 1;
    }
  }
  return tp;
}

// 101-point interpolated AP via the precision envelope.
double interpolated_ap(const std::vector<char>& tp, size_t n_gt,
                       std::vector<double>* curve) {
  if (n_gt == 0) return 0;
  std::vector<double> prec(tp.size()), rec(tp.size());
  size_t cum_tp = 0;
  for (size_t i = 0; i < tp.size(); ++i) {
    cum_tp += tp[i] ? 1 : 0;
    prec[i] = static_cast<double>(cum_tp) / static_cast<double>(i + 1);
    rec[i] = static_cast<double>(cum_tp) / static_cast<double>(n_gt);
  }
  // monotone envelope from the right
  for (size_t i = prec.size(); i-- > 1;)
    prec[i - 1] = std::max(prec[i - 1], prec[i]);
  double acc = 0;
  std::vector<double> pts(kRecallPoints, 0.0);
  size_t j = 0;
  for (int ri = 0; ri < kRecallPoints; ++ri) {
    const double r = ri / 100.0;
    while (j < rec.size() && rec[j] < r - 1e-12) ++j;
    pts[ri] = j < rec.size() ? prec[j] : 0.0;
    acc += pts[ri];
  }
  if (curve) *curve = pts;
  return acc / kRecallPoints;
}

}  // namespace

APReport mask_ap(const std::vector<EvalPrediction>& preds,
                 const std::vector<EvalGroundTruth>& gts,
                 const std::vector<double>& iou_thresholds) {
  SIP_CHECK(!iou_thresholds.empty(), "need at least one IoU threshold");
  APReport rep;
  const auto classes = classes_with_gt(gts);
  if (classes.empty()) return rep;

  double sum_ap = 0, sum_ap50 = 0, sum_ap75 = 0;
  for (int cls : classes) {
    const auto order = preds_by_score(preds, cls);
    std::vector<size_t> gt_idx;
    for (size_t i = 0; i < gts.size(); ++i)
      if (gts[i].class_id == cls) gt_idx.push_back(i);

    // IoUs once per (pred, gt) pair, reused across thresholds.
    std::vector<std::vector<double>> iou_cache(order.size());
    for (size_t oi = 0; oi < order.size(); ++oi) {
      iou_cache[oi].resize(gt_idx.size(), 0.0);
      for (size_t gi = 0; gi < gt_idx.size(); ++gi)
        if (gts[gt_idx[gi]].image_id == preds[order[oi]].image_id)
          iou_cache[oi][gi] =
              mask_iou(preds[order[oi]].mask, gts[gt_idx[gi]].mask);
    }

    double cls_sum = 0;
    for (size_t ti = 0; ti < iou_thresholds.size(); ++ti) {
      const double thr = iou_thresholds[ti];
      const auto tp = match_at_threshold(preds, gts, order, gt_idx, iou_cache, thr);
      std::vector<double> curve;
      const double ap = interpolated_ap(tp, gt_idx.size(),
                                        ti == 0 ? &curve : nullptr);
      cls_sum += ap;
      if (std::abs(thr - 0.5) < 1e-9) {
        sum_ap50 += ap;
        rep.pr_curves[cls] = curve;
      }
      if (std::abs(thr - 0.75) < 1e-9) sum_ap75 += ap;
    }
    const double cls_ap = cls_sum / static_cast<double>(iou_thresholds.size());
    rep.per_class[cls] = cls_ap;
    sum_ap += cls_ap;
  }
  const double nc = static_cast<double>(classes.size());
  rep.ap = sum_ap / nc;
  rep.ap50 = sum_ap50 / nc;
  rep.ap75 = sum_ap75 / nc;
  return rep;
}

APReport mask_ap_exhaustive(const std::vector<EvalPrediction>& preds,
                            const std::vector<EvalGroundTruth>& gts,
                            const std::vector<double>& iou_thresholds) {
  APReport rep;
  const auto classes = classes_with_gt(gts);
  if (classes.empty()) return rep;

  double sum_ap = 0, sum_ap50 = 0, sum_ap75 = 0;
  for (int cls : classes) {
    double cls_sum = 0;
    for (double thr : iou_thresholds) {
      // fresh score ordering and IoUs every time, no caches
      std::vector<size_t> order;
      for (size_t i = 0; i < preds.size(); ++i)
        if (preds[i].class_id == cls) order.push_back(i);
      std::stable_sort(order.begin(), order.end(), [&](size_t a, size_t b) {
        return preds[a].score > preds[b].score;
      });
      std::set<size_t> taken;
      size_t n_gt = 0;
      for (size_t i = 0; i < gts.size(); ++i)
        if (gts[i].class_id == cls) ++n_gt;

      std::vector<char> tp(order.size(), 0);
      for (size_t oi = 0; oi < order.size(); ++oi) {
        const auto& p = preds[order[oi]];
        double best_iou = 0;
        size_t best = gts.size();
        for (size_t g = 0; g < gts.size(); ++g) {
          if (gts[g].class_id != cls || gts[g].image_id != p.image_id) continue;
          if (taken.count(g)) continue;
          const double v = mask_iou(p.mask, gts[g].mask);
          if (v >= thr && v > best_iou) {
            best_iou = v;
            best = g;
          }
        }
        if (best < gts.size()) {
          taken.insert(best);
          tp[oi] = 1;
        }
      }

      // direct max-precision-at-recall scan, no envelope
      double ap = 0;
      if (n_gt > 0) {
        for (int ri = 0; ri < kRecallPoints; ++ri) {
          const double r = ri / 100.0;
          double best_p = 0;
          size_t cum = 0;
          for (size_t i = 0; i < tp.size(); ++i) {
            cum += tp[i] ? 1 : 0;
            const double recall = static_cast<double>(cum) / static_cast<double>(n_gt);
            const double precision =
                static_cast<double>(cum) / static_cast<double>(i + 1);
            if (recall >= r - 1e-12) best_p = std::max(best_p, precision);
          }
          ap += best_p;
        }
        ap /= kRecallPoints;
      }
      cls_sum += ap;
      if (std::abs(thr - 0.5) < 1e-9) sum_ap50 += ap;
      if (std::abs(thr - 0.75) < 1e-9) sum_ap75 += ap;
    }
    const double cls_ap = cls_sum / static_cast<double>(iou_thresholds.size());
    rep.per_class[cls] = cls_ap;
    sum_ap += cls_ap;
  }
  const double nc = static_cast<double>(classes.size());
  rep.ap = sum_ap / nc;
  rep.ap50 = sum_ap50 / nc;
  rep.ap75 = sum_ap75 / nc;
  return rep;
}

std::string ap_report_to_json(const APReport& rep) {
  nlohmann::json j;
  j["ap"] = rep.ap;
  j["ap50"] = rep.ap50;
  j["ap75"] = rep.ap75;
  nlohmann::json pc = nlohmann::json::object();
  for (const auto& [cls, v] : rep.per_class) pc[std::to_string(cls)] = v;
  j["per_class"] = pc;
  nlohmann::json curves = nlohmann::json::object();
  for (const auto& [cls, curve] : rep.pr_curves)
    curves[std::to_string(cls)] = curve;
  j["pr_curves_50"] = curves;
  return j.dump(2);
}

double identity_consistency(const std::vector<std::vector<FrameTrack>>& tracks,
                            const std::vector<std::vector<FrameGt>>& gt_video,
                            double match_iou) {
  SIP_CHECK(tracks.size() == gt_video.size(),
            "track output and gt video frame counts differ");
  // Per frame, greedy IoU matching between gt instances and track records.
  struct Pair {
    int gt_id;
    int track_id;  // -1 when unmatched
  };
  std::vector<std::vector<Pair>> matched(gt_video.size());
  for (size_t f = 0; f < gt_video.size(); ++f) {
    const auto& g = gt_video[f];
    const auto& t = tracks[f];
    std::vector<char> t_used(t.size(), 0);
    for (const auto& gt : g) {
      int best = -1;
      double best_iou = match_iou;
      for (size_t i = 0; i < t.size(); ++i) {
        if (t_used[i]) continue;
        const double v = iou(gt.box, t[i].box);
        if (v >= best_iou) {
          best_iou = v;
          best = static_cast<int>(i);
        }
      }
      if (best >= 0) t_used[static_cast<size_t>(best)] = 1;
      matched[f].push_back({gt.gt_id, best >= 0 ? t[best].track_id : -1});
    }
  }

  // Majority predicted id per gt instance across the video.
  std::map<int, std::map<int, int>> votes;  // gt_id -> track_id -> count
  size_t total_pairs = 0;
  for (const auto& frame : matched)
    for (const auto& pr : frame) {
      ++total_pairs;
      if (pr.track_id >= 0) votes[pr.gt_id][pr.track_id]++;
    }
  if (total_pairs == 0) return 1.0;

  std::map<int, int> majority;
  for (const auto& [gt_id, counts] : votes) {
    int best_id = -1, best_n = 0;
    for (const auto& [tid, n] : counts)
      if (n > best_n || (n == best_n && tid < best_id)) {
        best_id = tid;
        best_n = n;
      }
    majority[gt_id] = best_id;
  }

  size_t keep = 0;
  for (const auto& frame : matched)
    for (const auto& pr : frame)
      if (pr.track_id >= 0 && majority.count(pr.gt_id) &&
          majority[pr.gt_id] == pr.track_id)
        ++keep;
  return static_cast<double>(keep) / static_cast<double>(total_pairs);
}

}  // namespace sipmask
