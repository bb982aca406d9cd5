#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <vector>

#include "dsl/core.hpp"

namespace dsl {

// OKS falloff constants for the DeepSport 4-part skeleton and the OKS
// thresholds the precision/recall table sweeps.
struct OksConfig {
    double kappa_head = 0.15;
    double kappa_hip = 0.2;
    double kappa_foot = 0.2;
    std::vector<double> oks_thresholds = {0.50, 0.55, 0.60, 0.65, 0.70,
                                          0.75, 0.80, 0.85, 0.90, 0.95};
};

// Head / hip / foot1 / foot2 skeleton; the feet labels are interchangeable
// at evaluation time.
struct DeepSportSkeleton {
    std::optional<Keypoint> head;
    std::optional<Keypoint> hip;
    std::optional<Keypoint> foot1;
    std::optional<Keypoint> foot2;
    double confidence = 0.0;

    int num_parts() const {
        return int(bool(head)) + int(bool(hip)) + int(bool(foot1)) + int(bool(foot2));
    }
};

struct RocPoint {
    double tau = 0.0;
    double fpr = 0.0;
    double tpr = 0.0;
};

struct EvalReport {
    double bdq = 0.0;
    double psq = 0.0;
    double pdq = 0.0;
    double pq = 0.0;
    double ap = 0.0;
    double ar = 0.0;
    double f1 = 0.0;
    std::vector<RocPoint> roc;
    struct PrPoint {
        double tau, precision, recall;
    };
    std::vector<PrPoint> per_threshold;
};

// ---------------------------------------------------------------------------
// Ball detection quality

struct BallRecord {
    bool detected = false;
    double confidence = 0.0;
    bool gt_has_ball = false;
    bool inside_gt_mask = false;
};

inline BallRecord make_ball_record(const std::optional<Keypoint>& detection,
                                   const Scene& scene) {
    BallRecord rec;
    rec.gt_has_ball = scene.ball_mask.has_value() && !scene.ball_mask->empty();
    if (!detection) return rec;
    rec.detected = true;
    rec.confidence = detection->confidence;
    if (rec.gt_has_ball) {
        const int px = static_cast<int>(std::lround(detection->x));
        const int py = static_cast<int>(std::lround(detection->y));
        if (scene.grid.contains_pixel(px, py)) {
            const std::uint32_t idx =
                static_cast<std::uint32_t>(scene.grid.pixel_index(px, py));
            rec.inside_gt_mask = std::binary_search(scene.ball_mask->begin(),
                                                    scene.ball_mask->end(), idx);
        }
    }
    return rec;
}

struct BallRocResult {
    std::vector<RocPoint> curve;
    double bdq = 0.0;
};

// ROC over the top-1 ball detections, swept at every distinct confidence.
// A detection inside the ground-truth ball mask is a TP at threshold tau iff
// its confidence clears tau, otherwise it counts as an FP. TPr is normalized
// by images with an annotated ball, FPr by all images. The curve is closed at
// FPr = 1 with the final TPr, and bDQ is its trapezoidal area.
inline BallRocResult ball_roc(const std::vector<BallRecord>& records) {
    if (records.empty()) throw DomainError("ball_roc needs at least one image");
    const double n_images = static_cast<double>(records.size());
    double n_with_ball = 0;
    for (const auto& r : records) n_with_ball += r.gt_has_ball ? 1.0 : 0.0;

    std::set<double, std::greater<double>> taus;
    for (const auto& r : records)
        if (r.detected) taus.insert(r.confidence);

    auto point_at = [&](double tau) {
        double tp = 0, fp = 0;
        for (const auto& r : records) {
            if (!r.detected || r.confidence < tau) continue;
            if (r.gt_has_ball && r.inside_gt_mask)
                tp += 1.0;
            else
                fp += 1.0;
        }
        RocPoint p;
        p.tau = tau;
        p.tpr = n_with_ball > 0 ? tp / n_with_ball : 0.0;
        p.fpr = fp / n_images;
        return p;
    };

    BallRocResult result;
    result.curve.push_back({std::numeric_limits<double>::infinity(), 0.0, 0.0});
    for (double tau : taus) result.curve.push_back(point_at(tau));
    RocPoint last = point_at(0.0);
    last.tau = 0.0;
    last.fpr = 1.0;  // closing point of the sweep
    result.curve.push_back(last);

    double auc = 0.0;
    for (std::size_t i = 1; i < result.curve.size(); ++i)
        auc += 0.5 * (result.curve[i].tpr + result.curve[i - 1].tpr) *
               (result.curve[i].fpr - result.curve[i - 1].fpr);
    result.bdq = auc;
    return result;
}

// ---------------------------------------------------------------------------
// Player segmentation quality

inline double mask_iou(const std::vector<std::uint32_t>& a,
                       const std::vector<std::uint32_t>& b) {
    if (a.empty() && b.empty()) return 0.0;
    std::size_t inter = 0;
    auto ia = a.begin();
    auto ib = b.begin();
    while (ia != a.end() && ib != b.end()) {
        if (*ia < *ib)
            ++ia;
        else if (*ib < *ia)
            ++ib;
        else {
            ++inter;
            ++ia;
            ++ib;
        }
    }
    const std::size_t uni = a.size() + b.size() - inter;
    return uni == 0 ? 0.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

struct MaskMatchResult {
    struct Pair {
        int pred, gt;
        double iou;
    };
    std::vector<Pair> pairs;
    std::vector<int> unmatched_pred;
    std::vector<int> unmatched_gt;
};

// IoU >= 0.5 matching. A pair above 0.5 is provably unique per instance, so a
// greedy pass over the predictions is already optimal; equal-IoU ties at the
// 0.5 boundary go to the lower ground-truth index.
inline MaskMatchResult match_masks(const std::vector<InstanceMask>& pred,
                                   const std::vector<InstanceMask>& gt) {
    MaskMatchResult result;
    std::vector<bool> gt_used(gt.size(), false);
    for (std::size_t i = 0; i < pred.size(); ++i) {
        int best_gt = -1;
        double best_iou = 0.0;
        for (std::size_t j = 0; j < gt.size(); ++j) {
            if (gt_used[j]) continue;
            const double iou = mask_iou(pred[i].pixels, gt[j].pixels);
            if (iou >= 0.5 && iou > best_iou) {
                best_iou = iou;
                best_gt = static_cast<int>(j);
            }
        }
        if (best_gt >= 0) {
            gt_used[best_gt] = true;
            result.pairs.push_back({static_cast<int>(i), best_gt, best_iou});
        } else {
            result.unmatched_pred.push_back(static_cast<int>(i));
        }
    }
    for (std::size_t j = 0; j < gt.size(); ++j)
        if (!gt_used[j]) result.unmatched_gt.push_back(static_cast<int>(j));
    return result;
}

struct PanopticResult {
    double psq = 0.0;
    double pdq = 0.0;
    double pq = 0.0;
};

inline PanopticResult psq_pdq(const std::vector<double>& tp_ious,
                              std::size_t n_pred, std::size_t n_gt) {
    PanopticResult r;
    if (!tp_ious.empty()) {
        double sum = 0.0;
        for (double v : tp_ious) sum += v;
        r.psq = sum / tp_ious.size();
    }
    if (n_pred + n_gt > 0)
        r.pdq = 2.0 * tp_ious.size() / static_cast<double>(n_pred + n_gt);
    r.pq = r.psq * r.pdq;
    return r;
}

// ---------------------------------------------------------------------------
// Skeleton conversion and OKS

namespace detail {

inline std::optional<Keypoint> midpoint(const std::optional<Keypoint>& a,
                                        const std::optional<Keypoint>& b,
                                        int type) {
    if (!a || !b) return std::nullopt;
    return Keypoint{type, 0.5 * (a->x + b->x), 0.5 * (a->y + b->y),
                    0.5 * (a->confidence + b->confidence)};
}

}  // namespace detail

// COCO 17-part to DeepSport 4-part conversion: head from the ears, hip from
// the hips, feet from the ankles. A derived part is absent when either source
// is.
inline DeepSportSkeleton convert_skeleton(const Skeleton& coco) {
    DeepSportSkeleton ds;
    ds.head = detail::midpoint(coco.parts[kp::left_ear], coco.parts[kp::right_ear], 0);
    ds.hip = detail::midpoint(coco.parts[kp::left_hip], coco.parts[kp::right_hip], 1);
    if (coco.parts[kp::left_ankle]) {
        ds.foot1 = coco.parts[kp::left_ankle];
        ds.foot1->type = 2;
    }
    if (coco.parts[kp::right_ankle]) {
        ds.foot2 = coco.parts[kp::right_ankle];
        ds.foot2->type = 3;
    }
    double sum = 0.0;
    int n = 0;
    for (const auto* p : {&ds.head, &ds.hip, &ds.foot1, &ds.foot2})
        if (*p) {
            sum += (*p)->confidence;
            ++n;
        }
    ds.confidence = n == 0 ? 0.0 : sum / n;
    return ds;
}

// Scale of a ground-truth skeleton: sqrt of the area of the tight bounding
// box of its annotated parts, floored at 1 px for degenerate boxes.
inline double skeleton_scale(const DeepSportSkeleton& gt) {
    double min_x = 1e30, min_y = 1e30, max_x = -1e30, max_y = -1e30;
    bool any = false;
    for (const auto* p : {&gt.head, &gt.hip, &gt.foot1, &gt.foot2}) {
        if (!*p) continue;
        any = true;
        min_x = std::min(min_x, (*p)->x);
        min_y = std::min(min_y, (*p)->y);
        max_x = std::max(max_x, (*p)->x);
        max_y = std::max(max_y, (*p)->y);
    }
    if (!any) throw DomainError("scale of skeleton with no annotated parts");
    return std::max(1.0, std::sqrt((max_x - min_x) * (max_y - min_y)));
}

// Single-keypoint similarity term of the OKS.
inline double ks(double dist2, double s, double kappa) {
    if (s <= 0.0 || kappa <= 0.0) throw DomainError("ks needs positive s and kappa");
    return std::exp(-dist2 / (2.0 * s * s * kappa * kappa));
}

inline double ks(const Keypoint& pred, const Keypoint& gt, double s, double kappa) {
    return ks((pred.point() - gt.point()).norm2(), s, kappa);
}

struct OksDetail {
    double value = 0.0;
    bool feet_swapped = false;  // prediction's feet flipped in the best assignment
};

// Object keypoint similarity: mean over the annotated ground-truth parts of
// the per-part Gaussian similarity, a missing predicted part contributing 0.
// Both assignments of the interchangeable feet are tried and the higher OKS
// kept.
inline OksDetail oks_detail(const DeepSportSkeleton& pred,
                            const DeepSportSkeleton& gt, const OksConfig& cfg = {}) {
    const int n = gt.num_parts();
    if (n == 0) throw DomainError("oks against ground truth with no annotated parts");
    const double s = skeleton_scale(gt);

    auto term = [&](const std::optional<Keypoint>& p,
                    const std::optional<Keypoint>& g, double kappa) {
        if (!g) return 0.0;
        if (!p) return 0.0;
        return ks(*p, *g, s, kappa);
    };

    double fixed = term(pred.head, gt.head, cfg.kappa_head) +
                   term(pred.hip, gt.hip, cfg.kappa_hip);
    const double straight = term(pred.foot1, gt.foot1, cfg.kappa_foot) +
                            term(pred.foot2, gt.foot2, cfg.kappa_foot);
    const double swapped = term(pred.foot2, gt.foot1, cfg.kappa_foot) +
                           term(pred.foot1, gt.foot2, cfg.kappa_foot);

    OksDetail out;
    out.feet_swapped = swapped > straight;
    out.value = (fixed + std::max(straight, swapped)) / n;
    return out;
}

inline double oks(const DeepSportSkeleton& pred, const DeepSportSkeleton& gt,
                  const OksConfig& cfg = {}) {
    return oks_detail(pred, gt, cfg).value;
}

// ---------------------------------------------------------------------------
// Pose estimation quality

struct PoseMatch {
    int pred, gt;
    double oks;
};

// Greedy one-to-one assignment: predictions in descending confidence claim
// the unmatched ground truth with the highest OKS (ties: lower gt index).
inline std::vector<PoseMatch> match_poses(const std::vector<DeepSportSkeleton>& preds,
                                          const std::vector<DeepSportSkeleton>& gts,
                                          const OksConfig& cfg = {}) {
    std::vector<int> order(preds.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
        return preds[a].confidence > preds[b].confidence;
    });

    std::vector<bool> gt_used(gts.size(), false);
    std::vector<PoseMatch> matches;
    for (int pi : order) {
        int best_gt = -1;
        double best_oks = -1.0;
        for (std::size_t j = 0; j < gts.size(); ++j) {
            if (gt_used[j] || gts[j].num_parts() == 0) continue;
            const double v = oks(preds[pi], gts[j], cfg);
            if (v > best_oks) {
                best_oks = v;
                best_gt = static_cast<int>(j);
            }
        }
        if (best_gt >= 0) {
            gt_used[best_gt] = true;
            matches.push_back({pi, best_gt, best_oks});
        }
    }
    return matches;
}

struct PeqResult {
    double ap = 0.0;
    double ar = 0.0;
    double f1 = 0.0;
    std::vector<EvalReport::PrPoint> per_threshold;
};

// AP / AR averaged over the OKS thresholds; counts aggregated over all
// images. F1 is the harmonic mean of AP and AR.
inline PeqResult peq(const std::vector<std::vector<DeepSportSkeleton>>& preds,
                     const std::vector<std::vector<DeepSportSkeleton>>& gts,
                     const OksConfig& cfg = {}) {
    if (preds.size() != gts.size())
        throw DomainError("peq: image count mismatch between preds and gts");
    std::vector<double> match_oks;
    std::size_t n_pred = 0, n_gt = 0;
    for (std::size_t img = 0; img < preds.size(); ++img) {
        n_pred += preds[img].size();
        for (const auto& g : gts[img])
            if (g.num_parts() > 0) ++n_gt;
        for (const auto& m : match_poses(preds[img], gts[img], cfg))
            match_oks.push_back(m.oks);
    }

    PeqResult r;
    for (double tau : cfg.oks_thresholds) {
        std::size_t tp = 0;
        for (double v : match_oks)
            if (v >= tau) ++tp;
        const double pr = n_pred > 0 ? static_cast<double>(tp) / n_pred : 0.0;
        const double re = n_gt > 0 ? static_cast<double>(tp) / n_gt : 0.0;
        r.per_threshold.push_back({tau, pr, re});
        r.ap += pr;
        r.ar += re;
    }
    if (!cfg.oks_thresholds.empty()) {
        r.ap /= cfg.oks_thresholds.size();
        r.ar /= cfg.oks_thresholds.size();
    }
    r.f1 = (r.ap + r.ar) > 0.0 ? 2.0 * r.ap * r.ar / (r.ap + r.ar) : 0.0;
    return r;
}

// ---------------------------------------------------------------------------
// Court filtering

namespace detail {

inline bool on_segment(const Vec2& p, const Vec2& a, const Vec2& b, double eps = 1e-9) {
    const double cross = (b.x - a.x) * (p.y - a.y) - (b.y - a.y) * (p.x - a.x);
    if (std::abs(cross) > eps * std::max(1.0, (b - a).norm())) return false;
    const double dot = (p.x - a.x) * (b.x - a.x) + (p.y - a.y) * (b.y - a.y);
    return dot >= -eps && dot <= (b - a).norm2() + eps;
}

inline bool segments_properly_intersect(const Vec2& a, const Vec2& b,
                                        const Vec2& c, const Vec2& d) {
    auto orient = [](const Vec2& p, const Vec2& q, const Vec2& r) {
        const double v = (q.x - p.x) * (r.y - p.y) - (q.y - p.y) * (r.x - p.x);
        return v > 0.0 ? 1 : (v < 0.0 ? -1 : 0);
    };
    const int o1 = orient(a, b, c), o2 = orient(a, b, d);
    const int o3 = orient(c, d, a), o4 = orient(c, d, b);
    return o1 * o2 < 0 && o3 * o4 < 0;
}

}  // namespace detail

inline void validate_polygon(const std::vector<Vec2>& poly) {
    if (poly.size() < 3) throw DomainError("court polygon needs >= 3 vertices");
    const std::size_t n = poly.size();
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            // Skip adjacent edges (sharing a vertex), including the wrap-around.
            if (j == i + 1 || (i == 0 && j == n - 1)) continue;
            if (detail::segments_properly_intersect(poly[i], poly[(i + 1) % n],
                                                    poly[j], poly[(j + 1) % n]))
                throw DomainError("self-intersecting court polygon");
        }
    }
}

// Even-odd point-in-polygon test with a closed boundary (boundary points are
// inside).
inline bool court_contains(const std::vector<Vec2>& poly, const Vec2& p) {
    validate_polygon(poly);
    const std::size_t n = poly.size();
    for (std::size_t i = 0; i < n; ++i)
        if (detail::on_segment(p, poly[i], poly[(i + 1) % n])) return true;
    bool inside = false;
    for (std::size_t i = 0; i < n; ++i) {
        const Vec2& a = poly[i];
        const Vec2& b = poly[(i + 1) % n];
        if ((a.y > p.y) != (b.y > p.y)) {
            const double x = a.x + (p.y - a.y) / (b.y - a.y) * (b.x - a.x);
            if (x > p.x) inside = !inside;
        }
    }
    return inside;
}

inline Vec2 reference_point(const Skeleton& skel) {
    double sx = 0.0, sy = 0.0;
    int n = 0;
    for (const auto& p : skel.parts)
        if (p) {
            sx += p->x;
            sy += p->y;
            ++n;
        }
    if (n == 0) throw DomainError("reference point of empty skeleton");
    return {sx / n, sy / n};
}

// Keep the players whose reference point (mask centroid when a mask exists,
// otherwise the mean of the skeleton parts) lies inside the court polygon.
inline std::vector<Player> filter_court(const std::vector<Player>& players,
                                        const std::optional<std::vector<Vec2>>& court,
                                        const GridSpec& grid) {
    if (!court) return players;
    validate_polygon(*court);
    std::vector<Player> kept;
    for (const auto& player : players) {
        const Vec2 ref = player.mask.pixels.empty()
                             ? reference_point(player.skeleton)
                             : mask_centroid(player.mask.pixels, grid);
        if (court_contains(*court, ref)) kept.push_back(player);
    }
    return kept;
}

}  // namespace dsl
