#pragma once

#include <array>
#include <vector>

#include "dsl/core.hpp"
#include "dsl/metrics.hpp"

namespace dsl {

// Keypoint error taxonomy. Inversion cannot occur because the feet are
// evaluated under their best assignment.
enum class ErrorCategory : int { Good = 0, Jitter, Swap, Miss, FnKp };
constexpr int kNumCategories = 5;

inline std::string_view category_name(ErrorCategory c) {
    static constexpr std::array<std::string_view, kNumCategories> names = {
        "good", "jitter", "swap", "miss", "fn_kp"};
    return names[static_cast<int>(c)];
}

constexpr int kNumDsParts = 4;

inline std::string_view ds_part_name(int part) {
    static constexpr std::array<std::string_view, kNumDsParts> names = {
        "head", "hip", "foot1", "foot2"};
    if (part < 0 || part >= kNumDsParts) throw DomainError("bad DeepSport part index");
    return names[part];
}

struct BreakdownReport {
    std::array<long, kNumCategories> by_category{};
    // by_type[part][category]
    std::array<std::array<long, kNumCategories>, kNumDsParts> by_type{};

    long total() const {
        long t = 0;
        for (long c : by_category) t += c;
        return t;
    }
    void add(int part, ErrorCategory c) {
        ++by_category[static_cast<int>(c)];
        ++by_type[part][static_cast<int>(c)];
    }
};

constexpr double kGoodKs = 0.85;
constexpr double kJitterKs = 0.5;

namespace detail {

inline double part_kappa(int part, const OksConfig& cfg) {
    switch (part) {
        case 0: return cfg.kappa_head;
        case 1: return cfg.kappa_hip;
        default: return cfg.kappa_foot;
    }
}

inline const std::optional<Keypoint>& ds_part(const DeepSportSkeleton& s, int part) {
    switch (part) {
        case 0: return s.head;
        case 1: return s.hip;
        case 2: return s.foot1;
        default: return s.foot2;
    }
}

// KS of a predicted keypoint against another skeleton's same-type keypoint,
// with that skeleton's own scale. Feet compare against either foot.
inline double cross_ks(const Keypoint& pred, int part,
                       const DeepSportSkeleton& other, const OksConfig& cfg) {
    if (other.num_parts() == 0) return 0.0;
    const double s = skeleton_scale(other);
    double best = 0.0;
    if (part >= 2) {
        for (const auto* g : {&other.foot1, &other.foot2})
            if (*g) best = std::max(best, ks(pred, **g, s, cfg.kappa_foot));
    } else {
        const auto& g = ds_part(other, part);
        if (g) best = ks(pred, *g, s, part_kappa(part, cfg));
    }
    return best;
}

}  // namespace detail

// Classify every annotated ground-truth keypoint of every ground-truth
// skeleton. A gt skeleton with no matched prediction contributes FN KP for
// each of its annotated parts. For matched pairs the feet of the prediction
// are first aligned to the assignment that maximizes the pair's OKS.
inline BreakdownReport classify(const std::vector<DeepSportSkeleton>& preds,
                                const std::vector<DeepSportSkeleton>& gts,
                                const std::vector<PoseMatch>& matches,
                                const OksConfig& cfg = {}) {
    std::vector<int> matched_pred(gts.size(), -1);
    for (const auto& m : matches) matched_pred[m.gt] = m.pred;

    BreakdownReport report;
    for (std::size_t j = 0; j < gts.size(); ++j) {
        const DeepSportSkeleton& gt = gts[j];
        if (gt.num_parts() == 0) continue;

        if (matched_pred[j] < 0) {
            for (int part = 0; part < kNumDsParts; ++part)
                if (detail::ds_part(gt, part)) report.add(part, ErrorCategory::FnKp);
            continue;
        }

        DeepSportSkeleton pred = preds[matched_pred[j]];
        if (oks_detail(pred, gt, cfg).feet_swapped) std::swap(pred.foot1, pred.foot2);
        const double s = skeleton_scale(gt);

        for (int part = 0; part < kNumDsParts; ++part) {
            const auto& g = detail::ds_part(gt, part);
            if (!g) continue;
            const auto& p = detail::ds_part(pred, part);
            if (!p) {
                report.add(part, ErrorCategory::FnKp);
                continue;
            }
            const double v = ks(*p, *g, s, detail::part_kappa(part, cfg));
            if (v >= kGoodKs) {
                report.add(part, ErrorCategory::Good);
            } else if (v >= kJitterKs) {
                report.add(part, ErrorCategory::Jitter);
            } else {
                bool swap = false;
                for (std::size_t o = 0; o < gts.size(); ++o) {
                    if (o == j) continue;
                    if (detail::cross_ks(*p, part, gts[o], cfg) >= kJitterKs) {
                        swap = true;
                        break;
                    }
                }
                report.add(part, swap ? ErrorCategory::Swap : ErrorCategory::Miss);
            }
        }
    }
    return report;
}

}  // namespace dsl
