#pragma once

#include <vector>

#include "dsl/breakdown.hpp"
#include "dsl/metrics.hpp"
#include "dsl/scene_file.hpp"

namespace dsl {

// Per-image evaluation inputs after optional court filtering.
struct ImagePair {
    Prediction pred;
    Scene gt;
};

inline void apply_court_filter(ImagePair& pair) {
    if (!pair.gt.court) return;
    pair.gt.players = filter_court(pair.gt.players, pair.gt.court, pair.gt.grid);
    pair.pred.players = filter_court(pair.pred.players, pair.gt.court, pair.pred.grid);
}

struct EvalAccumulator {
    std::vector<BallRecord> ball_records;
    std::vector<double> tp_ious;
    std::size_t n_pred_masks = 0;
    std::size_t n_gt_masks = 0;
    std::vector<std::vector<DeepSportSkeleton>> pred_poses;
    std::vector<std::vector<DeepSportSkeleton>> gt_poses;
    BreakdownReport breakdown;

    void add_image(const ImagePair& pair, const OksConfig& cfg = {}) {
        ball_records.push_back(make_ball_record(pair.pred.ball, pair.gt));

        std::vector<InstanceMask> pred_masks, gt_masks;
        for (const auto& p : pair.pred.players) pred_masks.push_back(p.mask);
        for (const auto& p : pair.gt.players) gt_masks.push_back(p.mask);
        const MaskMatchResult mm = match_masks(pred_masks, gt_masks);
        for (const auto& pr : mm.pairs) tp_ious.push_back(pr.iou);
        n_pred_masks += pred_masks.size();
        n_gt_masks += gt_masks.size();

        std::vector<DeepSportSkeleton> preds, gts;
        for (const auto& p : pair.pred.players)
            preds.push_back(convert_skeleton(p.skeleton));
        for (const auto& p : pair.gt.players)
            gts.push_back(convert_skeleton(p.skeleton));
        const auto matches = match_poses(preds, gts, cfg);
        const BreakdownReport br = classify(preds, gts, matches, cfg);
        for (int c = 0; c < kNumCategories; ++c) {
            breakdown.by_category[c] += br.by_category[c];
            for (int t = 0; t < kNumDsParts; ++t)
                breakdown.by_type[t][c] += br.by_type[t][c];
        }
        pred_poses.push_back(std::move(preds));
        gt_poses.push_back(std::move(gts));
    }

    EvalReport report(const OksConfig& cfg = {}) const {
        EvalReport out;
        const BallRocResult roc = ball_roc(ball_records);
        out.bdq = roc.bdq;
        out.roc = roc.curve;
        const PanopticResult pan = psq_pdq(tp_ious, n_pred_masks, n_gt_masks);
        out.psq = pan.psq;
        out.pdq = pan.pdq;
        out.pq = pan.pq;
        const PeqResult pe = peq(pred_poses, gt_poses, cfg);
        out.ap = pe.ap;
        out.ar = pe.ar;
        out.f1 = pe.f1;
        out.per_threshold = pe.per_threshold;
        return out;
    }
};

inline EvalReport evaluate(std::vector<ImagePair> pairs, bool use_court,
                           const OksConfig& cfg = {}) {
    EvalAccumulator acc;
    for (auto& pair : pairs) {
        if (use_court) apply_court_filter(pair);
        acc.add_image(pair, cfg);
    }
    return acc.report(cfg);
}

}  // namespace dsl
