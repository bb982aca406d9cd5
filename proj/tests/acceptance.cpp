// Acceptance gate: one pass/fail line per criterion, exit 5 on any failure.
// argv[1] is the path to the command-line tool, used by the determinism check.

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <numeric>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>
#include <sstream>

#include "dsl/breakdown.hpp"
#include "dsl/decode.hpp"
#include "dsl/encode.hpp"
#include "dsl/evaluate.hpp"
#include "dsl/field_file.hpp"
#include "dsl/loss.hpp"
#include "dsl/metrics.hpp"
#include "dsl/scene_file.hpp"
#include "dsl/synth.hpp"

namespace fs = std::filesystem;
using namespace dsl;

namespace {

int g_failures = 0;

void verdict(const std::string& name, bool pass, const std::string& detail = "") {
    std::cout << (pass ? "PASS" : "FAIL") << "  " << name;
    if (!detail.empty()) std::cout << "  (" << detail << ")";
    std::cout << '\n';
    if (!pass) ++g_failures;
}

double now_seconds() {
    using clock = std::chrono::steady_clock;
    return std::chrono::duration<double>(clock::now().time_since_epoch()).count();
}

// ---------------------------------------------------------------------------

void check_roundtrip() {
    const double t0 = now_seconds();
    bool pass = true;
    double worst_psq = 1.0, worst_oks = 1.0, worst_px = 0.0;
    for (std::uint64_t seed = 0; seed < 50 && pass; ++seed) {
        SynthConfig cfg;
        cfg.seed = seed;
        cfg.n_players = 1 + int(seed % 5);
        cfg.ball = seed % 7 != 0;
        const Scene scene = synth_scene(cfg);
        const FieldSet fields = encode(scene);
        const DecodeResult result = decode(fields);

        ImagePair pair;
        pair.gt = scene;
        pair.pred.grid = scene.grid;
        pair.pred.ball = result.ball;
        for (std::size_t i = 0; i < result.masks.size(); ++i)
            pair.pred.players.push_back({result.masks[i], result.skeletons[i]});
        EvalAccumulator acc;
        acc.add_image(pair);
        const EvalReport report = acc.report();
        worst_psq = std::min(worst_psq, std::min(report.psq, report.pdq));
        if (std::abs(report.psq - 1.0) > 1e-9 || std::abs(report.pdq - 1.0) > 1e-9)
            pass = false;

        std::vector<DeepSportSkeleton> preds, gts;
        for (const auto& p : pair.pred.players)
            preds.push_back(convert_skeleton(p.skeleton));
        for (const auto& p : pair.gt.players)
            gts.push_back(convert_skeleton(p.skeleton));
        const auto matches = match_poses(preds, gts);
        if (matches.size() != gts.size()) pass = false;
        for (const auto& m : matches) {
            worst_oks = std::min(worst_oks, m.oks);
            if (std::abs(m.oks - 1.0) > 1e-6) pass = false;
        }

        // Keypoint recovery: decoded parts within half a pixel of the truth.
        const MaskMatchResult mm = match_masks(result.masks,
                                               [&] {
                                                   std::vector<InstanceMask> v;
                                                   for (const auto& p : scene.players)
                                                       v.push_back(p.mask);
                                                   return v;
                                               }());
        for (const auto& pr : mm.pairs) {
            const Skeleton& dec = result.skeletons[pr.pred];
            const Skeleton& truth = scene.players[pr.gt].skeleton;
            for (int k = 0; k < kNumParts; ++k) {
                if (!truth.parts[k]) continue;
                if (!dec.parts[k]) {
                    pass = false;
                    continue;
                }
                const double err =
                    (dec.parts[k]->point() - truth.parts[k]->point()).norm();
                worst_px = std::max(worst_px, err);
                if (err > 0.5) pass = false;
            }
        }
        if (scene.ball_mask && result.ball) {
            const Vec2 c = mask_centroid(*scene.ball_mask, scene.grid);
            worst_px = std::max(worst_px, (result.ball->point() - c).norm());
            if ((result.ball->point() - c).norm() > 0.5) pass = false;
        }
    }
    const double elapsed = now_seconds() - t0;
    if (elapsed > 60.0) pass = false;
    std::ostringstream d;
    d << "50 seeds, min pSQ/pDQ " << worst_psq << ", min OKS " << worst_oks
      << ", max keypoint err " << worst_px << " px, " << elapsed << " s";
    verdict("roundtrip reconstruction", pass, d.str());
}

// ---------------------------------------------------------------------------

std::vector<double> fuse_dense(const std::vector<double>& conf,
                               const std::vector<Vec2>& loc,
                               const std::vector<double>& sigma,
                               const GridSpec& grid) {
    std::vector<double> out(grid.num_pixels(), 0.0);
    for (int y = 0; y < grid.height_hr; ++y)
        for (int x = 0; x < grid.width_hr; ++x) {
            double sum = 0.0;
            for (int uy = 0; uy < grid.height_lr(); ++uy)
                for (int ux = 0; ux < grid.width_lr(); ++ux) {
                    const std::size_t i = grid.cell_index({ux, uy});
                    if (conf[i] <= 0.0) continue;
                    const Vec2 t = cell_center({ux, uy}, grid) + loc[i];
                    const double d2 = (Vec2{double(x), double(y)} - t).norm2();
                    sum += conf[i] * std::exp(-d2 / (2.0 * sigma[i] * sigma[i]));
                }
            out[grid.pixel_index(x, y)] = sum;
        }
    return out;
}

void check_fusion() {
    std::mt19937_64 rng(2024);
    const GridSpec grid(64, 64, 8);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::uniform_real_distribution<double> off(-4.0, 4.0);
    std::uniform_real_distribution<double> sig(1.0, 4.0);

    double worst3 = 0.0, worst6 = 0.0;
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<double> conf(grid.num_cells(), 0.0);
        std::vector<Vec2> loc(grid.num_cells());
        std::vector<double> sigma(grid.num_cells(), 1.0);
        // Fused target points keep a 32 px separation so the truncation
        // tails of distinct sources never stack at one pixel.
        std::vector<Vec2> targets;
        for (int uy = 0; uy < grid.height_lr(); ++uy)
            for (int ux = 0; ux < grid.width_lr(); ++ux) {
                if (unit(rng) > 0.15) continue;
                const std::size_t i = grid.cell_index({ux, uy});
                const Vec2 l{off(rng), off(rng)};
                const Vec2 t = cell_center({ux, uy}, grid) + l;
                bool far = true;
                for (const Vec2& o : targets) far &= (t - o).norm() >= 32.0;
                if (!far) continue;
                targets.push_back(t);
                conf[i] = 0.2 + 0.8 * unit(rng);
                loc[i] = l;
                sigma[i] = sig(rng);
            }
        const auto dense = fuse_dense(conf, loc, sigma, grid);

        DecodeConfig c3;
        c3.gaussian_truncation = 3.0;
        const auto t3 = fuse_highres(conf, loc, sigma, grid, c3);
        DecodeConfig c6;
        c6.gaussian_truncation = 6.0;
        const auto t6 = fuse_highres(conf, loc, sigma, grid, c6);
        for (std::size_t i = 0; i < dense.size(); ++i) {
            worst3 = std::max(worst3, std::abs(t3[i] - dense[i]));
            worst6 = std::max(worst6, std::abs(t6[i] - dense[i]));
        }
    }
    std::ostringstream d;
    d << "20 grids, max |err| " << worst3 << " at 3 sigma, " << worst6
      << " at 6 sigma";
    verdict("truncated fusion vs dense oracle", worst3 <= 1.2e-2 && worst6 <= 1e-6,
            d.str());
}

// ---------------------------------------------------------------------------

void check_gradients() {
    std::mt19937_64 rng(31);
    const GridSpec grid(32, 32, 8);
    std::uniform_real_distribution<double> prob(0.05, 0.95);
    std::uniform_real_distribution<double> vec(-4.0, 4.0);
    std::uniform_real_distribution<double> logsig(-0.5, 1.5);
    std::uniform_real_distribution<double> sig(0.5, 5.0);
    std::bernoulli_distribution bit(0.3);
    const LossWeights w;
    const double step = 1e-4;

    double worst = 0.0;
    for (int trial = 0; trial < 20; ++trial) {
        FieldSet pred(grid), target(grid);
        for (auto& v : pred.semantic) v = prob(rng);
        for (auto& v : pred.offsets) v = {vec(rng), vec(rng)};
        for (auto& v : target.semantic) v = bit(rng) ? 1.0 : 0.0;
        for (auto& v : target.offsets) v = {vec(rng), vec(rng)};
        for (int k = 0; k < kNumTypes; ++k)
            for (std::size_t i = 0; i < pred.conf[k].size(); ++i) {
                pred.conf[k][i] = prob(rng);
                pred.loc[k][i] = {vec(rng), vec(rng)};
                pred.log_sigma[k][i] = logsig(rng);
                pred.log_scale[k][i] = logsig(rng);
                target.conf[k][i] = bit(rng) ? 1.0 : 0.0;
                target.loc[k][i] = {vec(rng), vec(rng)};
                target.set_sigma(k, i, sig(rng));
            }

        const FieldGradients an = grad_total(pred, target, w);
        auto fd = [&](double& slot) {
            const double saved = slot;
            slot = saved + step;
            const double hi = loss_total(pred, target, w).total;
            slot = saved - step;
            const double lo = loss_total(pred, target, w).total;
            slot = saved;
            return (hi - lo) / (2.0 * step);
        };
        auto check = [&](double analytic, double numeric) {
            const double denom = std::max({1.0, std::abs(analytic), std::abs(numeric)});
            worst = std::max(worst, std::abs(analytic - numeric) / denom);
        };

        std::uniform_int_distribution<std::size_t> pick(0, pred.semantic.size() - 1);
        for (int s = 0; s < 64; ++s) {
            const std::size_t i = pick(rng);
            check(an.semantic[i], fd(pred.semantic[i]));
            check(an.offsets[i].x, fd(pred.offsets[i].x));
            check(an.offsets[i].y, fd(pred.offsets[i].y));
        }
        for (int k = 0; k < kNumTypes; ++k)
            for (std::size_t i = 0; i < pred.conf[k].size(); ++i) {
                check(an.conf[k][i], fd(pred.conf[k][i]));
                check(an.loc[k][i].x, fd(pred.loc[k][i].x));
                check(an.loc[k][i].y, fd(pred.loc[k][i].y));
                check(an.log_scale[k][i], fd(pred.log_scale[k][i]));
                if (std::abs(pred.sigma(k, i) - target.sigma(k, i)) > 1e-3) {
                    const double saved = pred.log_sigma[k][i];
                    const double s = std::exp(saved);
                    pred.log_sigma[k][i] = std::log(s + step);
                    const double hi = loss_total(pred, target, w).total;
                    pred.log_sigma[k][i] = std::log(s - step);
                    const double lo = loss_total(pred, target, w).total;
                    pred.log_sigma[k][i] = saved;
                    check(an.sigma[k][i], (hi - lo) / (2.0 * step));
                }
            }
    }
    std::ostringstream d;
    d << "20 grids, max rel err " << worst;
    verdict("analytic gradients vs finite differences", worst <= 1e-4, d.str());
}

// ---------------------------------------------------------------------------

void check_bdq_oracle() {
    std::mt19937_64 rng(47);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    double worst = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
        std::uniform_int_distribution<int> n_images(1, 20);
        std::vector<BallRecord> records(n_images(rng));
        for (auto& r : records) {
            r.gt_has_ball = unit(rng) < 0.7;
            r.detected = unit(rng) < 0.9;
            r.confidence = unit(rng);
            r.inside_gt_mask = r.gt_has_ball && unit(rng) < 0.6;
        }
        const double got = ball_roc(records).bdq;

        // Oracle: explicit sweep over every distinct confidence.
        std::vector<double> taus;
        for (const auto& r : records)
            if (r.detected) taus.push_back(r.confidence);
        std::sort(taus.begin(), taus.end(), std::greater<double>());
        taus.erase(std::unique(taus.begin(), taus.end()), taus.end());
        double n_ball = 0;
        for (const auto& r : records) n_ball += r.gt_has_ball ? 1 : 0;
        std::vector<std::pair<double, double>> pts{{0.0, 0.0}};
        for (double tau : taus) {
            double tp = 0, fp = 0;
            for (const auto& r : records) {
                if (!r.detected || r.confidence < tau) continue;
                if (r.gt_has_ball && r.inside_gt_mask)
                    tp += 1;
                else
                    fp += 1;
            }
            pts.push_back({fp / records.size(), n_ball > 0 ? tp / n_ball : 0.0});
        }
        pts.push_back({1.0, pts.back().second});
        double want = 0.0;
        for (std::size_t i = 1; i < pts.size(); ++i)
            want += 0.5 * (pts[i].second + pts[i - 1].second) *
                    (pts[i].first - pts[i - 1].first);
        worst = std::max(worst, std::abs(got - want));
    }
    std::ostringstream d;
    d << "100 record sets, max |err| " << worst;
    verdict("bDQ vs threshold-sweep oracle", worst <= 1e-9, d.str());
}

// ---------------------------------------------------------------------------

void check_matching_oracle() {
    std::mt19937_64 rng(59);
    const GridSpec grid(96, 96, 8);
    auto box = [&](int x, int y, int w, int h, int id) {
        InstanceMask m;
        m.instance_id = id;
        for (int yy = y; yy <= std::min(95, y + h); ++yy)
            for (int xx = x; xx <= std::min(95, x + w); ++xx)
                m.pixels.push_back(std::uint32_t(grid.pixel_index(xx, yy)));
        std::sort(m.pixels.begin(), m.pixels.end());
        return m;
    };

    bool pass = true;
    for (int trial = 0; trial < 200 && pass; ++trial) {
        std::uniform_int_distribution<int> count(0, 6);
        std::uniform_int_distribution<int> wiggle(4, 8);
        std::uniform_int_distribution<int> size(3, 9);
        std::uniform_int_distribution<int> shift(-4, 4);
        std::vector<InstanceMask> gt, pred;
        const int n = count(rng);
        // Ground-truth boxes in disjoint 24 px lattice cells: a prediction
        // shifted by at most 4 px can only overlap its own gt, so the set of
        // IoU >= 0.5 pairs is the unique optimal matching.
        std::vector<int> slots(16);
        std::iota(slots.begin(), slots.end(), 0);
        std::shuffle(slots.begin(), slots.end(), rng);
        for (int i = 0; i < n; ++i) {
            const int bx = (slots[i] % 4) * 24, by = (slots[i] / 4) * 24;
            const int x = bx + wiggle(rng), y = by + wiggle(rng);
            const int w = size(rng), h = size(rng);
            gt.push_back(box(x, y, w, h, i));
            pred.push_back(box(x + shift(rng), y + shift(rng), w, h, i));
        }
        const MaskMatchResult mm = match_masks(pred, gt);

        // Any IoU >= 0.5 pair is exclusive for both sides, so the optimal
        // matching is forced; verify it pair by pair.
        std::size_t expected = 0;
        for (std::size_t i = 0; i < pred.size(); ++i)
            for (std::size_t j = 0; j < gt.size(); ++j)
                if (mask_iou(pred[i].pixels, gt[j].pixels) >= 0.5) {
                    ++expected;
                    bool found = false;
                    for (const auto& p : mm.pairs)
                        found |= p.pred == int(i) && p.gt == int(j);
                    if (!found) pass = false;
                }
        if (mm.pairs.size() != expected) pass = false;
        if (mm.pairs.size() + mm.unmatched_pred.size() != pred.size()) pass = false;
        if (mm.pairs.size() + mm.unmatched_gt.size() != gt.size()) pass = false;
    }
    verdict("mask matching vs exhaustive oracle", pass, "200 scenes");
}

// ---------------------------------------------------------------------------

void check_oks_boundary() {
    OksConfig cfg;
    DeepSportSkeleton gt;
    gt.head = Keypoint{0, 100, 100, 1.0};
    gt.hip = Keypoint{1, 100, 140, 1.0};
    gt.foot1 = Keypoint{2, 90, 180, 1.0};
    gt.foot2 = Keypoint{3, 110, 180, 1.0};
    const double s = skeleton_scale(gt);

    // Distance at which the head similarity is exactly the Good threshold.
    const double d = s * cfg.kappa_head * std::sqrt(2.0 * std::log(1.0 / kGoodKs));
    auto pred_at = [&](double dist) {
        auto p = gt;
        p.head->x += dist;
        return p;
    };
    const double at = ks(*pred_at(d).head, *gt.head, s, cfg.kappa_head);
    const bool boundary_ok = std::abs(at - kGoodKs) <= 1e-9;

    const auto just_in = pred_at(d * (1.0 - 1e-6));
    const auto just_out = pred_at(d * (1.0 + 1e-6));
    const BreakdownReport rin =
        classify({just_in}, {gt}, match_poses({just_in}, {gt}, cfg), cfg);
    const BreakdownReport rout =
        classify({just_out}, {gt}, match_poses({just_out}, {gt}, cfg), cfg);
    const bool sides_ok = rin.by_type[0][int(ErrorCategory::Good)] == 1 &&
                          rout.by_type[0][int(ErrorCategory::Jitter)] == 1;

    std::ostringstream det;
    det << "KS at boundary distance = " << at;
    verdict("keypoint similarity boundary at 0.85", boundary_ok && sides_ok, det.str());
}

// ---------------------------------------------------------------------------

void check_breakdown_exhaustive() {
    std::mt19937_64 rng(67);
    std::uniform_real_distribution<double> pos(20.0, 400.0);
    std::uniform_real_distribution<double> jitter(-40.0, 40.0);
    std::bernoulli_distribution keep(0.8);
    bool pass = true;

    for (int trial = 0; trial < 100 && pass; ++trial) {
        std::uniform_int_distribution<int> count(1, 4);
        std::vector<DeepSportSkeleton> gts, preds;
        long annotated = 0;
        const int n = count(rng);
        for (int i = 0; i < n; ++i) {
            DeepSportSkeleton g;
            const double cx = pos(rng), cy = pos(rng);
            if (keep(rng)) g.head = Keypoint{0, cx, cy, 1.0};
            if (keep(rng)) g.hip = Keypoint{1, cx, cy + 20, 1.0};
            if (keep(rng)) g.foot1 = Keypoint{2, cx - 5, cy + 40, 1.0};
            if (keep(rng)) g.foot2 = Keypoint{3, cx + 5, cy + 40, 1.0};
            if (g.num_parts() == 0) g.head = Keypoint{0, cx, cy, 1.0};
            annotated += g.num_parts();
            gts.push_back(g);
            if (keep(rng)) {
                auto p = g;
                for (auto* kpp : {&p.head, &p.hip, &p.foot1, &p.foot2})
                    if (*kpp) {
                        (*kpp)->x += jitter(rng);
                        (*kpp)->y += jitter(rng);
                    }
                p.confidence = pos(rng) / 400.0;
                preds.push_back(p);
            }
        }
        const BreakdownReport r = classify(preds, gts, match_poses(preds, gts));
        if (r.total() != annotated) pass = false;
        long cat_sum = 0;
        for (long c : r.by_category) cat_sum += c;
        long type_sum = 0;
        for (const auto& row : r.by_type)
            for (long c : row) type_sum += c;
        if (cat_sum != annotated || type_sum != annotated) pass = false;
    }
    verdict("breakdown classifies each annotated keypoint exactly once", pass,
            "100 scenes");
}

// ---------------------------------------------------------------------------

std::string slurp(const fs::path& p) {
    std::ifstream is(p, std::ios::binary);
    std::ostringstream os;
    os << is.rdbuf();
    return os.str();
}

int run(const std::string& cmd) { return std::system(cmd.c_str()); }

void check_cli_determinism(const std::string& cli) {
    const fs::path dir = fs::temp_directory_path() / "dsl_acceptance";
    fs::remove_all(dir);
    fs::create_directories(dir / "gt");
    fs::create_directories(dir / "pred");

    bool pass = true;
    for (int i = 0; i < 4 && pass; ++i) {
        const std::string name = "img" + std::to_string(i) + ".json";
        const fs::path scene = dir / "gt" / name;
        const fs::path fields = dir / ("f" + std::to_string(i) + ".dslf");
        const fs::path pred = dir / "pred" / name;
        pass = pass &&
               run(cli + " synth --seed " + std::to_string(100 + i) +
                   " --players " + std::to_string(1 + i) + " -o " + scene.string()) == 0 &&
               run(cli + " encode " + scene.string() + " -o " + fields.string()) == 0 &&
               run(cli + " decode " + fields.string() + " -o " + pred.string()) == 0;
    }

    const fs::path r1 = dir / "report1.json", r2 = dir / "report2.json",
                   r4 = dir / "report4.json";
    pass = pass &&
           run(cli + " eval --pred " + (dir / "pred").string() + " --gt " +
               (dir / "gt").string() + " --jobs 1 -o " + r1.string() +
               " > /dev/null") == 0 &&
           run(cli + " eval --pred " + (dir / "pred").string() + " --gt " +
               (dir / "gt").string() + " --jobs 1 -o " + r2.string() +
               " > /dev/null") == 0 &&
           run(cli + " eval --pred " + (dir / "pred").string() + " --gt " +
               (dir / "gt").string() + " --jobs 4 -o " + r4.string() +
               " > /dev/null") == 0;
    if (pass) {
        const std::string a = slurp(r1);
        pass = !a.empty() && a == slurp(r2) && a == slurp(r4);
    }

    // Re-encoding the same scene is byte-identical too.
    if (pass) {
        const fs::path f2 = dir / "f0_again.dslf";
        pass = run(cli + " encode " + (dir / "gt" / "img0.json").string() + " -o " +
                   f2.string()) == 0 &&
               slurp(dir / "f0.dslf") == slurp(f2);
    }
    verdict("command-line pipeline is deterministic across runs and job counts",
            pass);
    fs::remove_all(dir);
}

// ---------------------------------------------------------------------------

void check_performance() {
    SynthConfig cfg;
    cfg.seed = 4;
    cfg.n_players = 10;
    cfg.width = 648;
    cfg.height = 648;
    const Scene scene = synth_scene(cfg);
    const FieldSet fields = encode(scene);

    const double t0 = now_seconds();
    const DecodeResult result = decode(fields);
    const double elapsed = now_seconds() - t0;

    std::ostringstream d;
    d << "648x648, 10 players, " << result.masks.size() << " instances, "
      << elapsed << " s";
    verdict("full decode within one second", elapsed <= 1.0 && !result.masks.empty(),
            d.str());
}

}  // namespace

int main(int argc, char** argv) {
    if (argc < 2) {
        std::cerr << "usage: acceptance <path-to-cli>\n";
        return 5;
    }
    check_roundtrip();
    check_fusion();
    check_gradients();
    check_bdq_oracle();
    check_matching_oracle();
    check_oks_boundary();
    check_breakdown_exhaustive();
    check_cli_determinism(argv[1]);
    check_performance();
    if (g_failures > 0) {
        std::cout << g_failures << " criterion(s) failed\n";
        return 5;
    }
    std::cout << "all acceptance criteria passed\n";
    return 0;
}
