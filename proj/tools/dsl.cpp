#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <random>
#include <thread>

#include <CLI11.hpp>
#include <json.hpp>

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
using nlohmann::json;

namespace {

constexpr int kExitFormat = 2;
constexpr int kExitSchema = 3;
constexpr int kExitInfeasible = 4;
constexpr int kExitAcceptance = 5;

int worker_count(int jobs_flag) {
    if (jobs_flag > 0) return jobs_flag;
    if (const char* env = std::getenv("DSL_JOBS")) {
        const int n = std::atoi(env);
        if (n > 0) return n;
    }
    return 1;
}

json report_to_json(const dsl::EvalReport& r) {
    return json{{"bDQ", r.bdq}, {"pSQ", r.psq}, {"pDQ", r.pdq}, {"PQ", r.pq},
                {"AP", r.ap},   {"AR", r.ar},   {"F1", r.f1}};
}

void write_roc_csv(const std::string& path, const std::vector<dsl::RocPoint>& roc) {
    std::ofstream os(path);
    if (!os) throw dsl::FormatError("cannot open for writing: " + path);
    os << "tau,fpr,tpr\n";
    for (const auto& p : roc) os << p.tau << ',' << p.fpr << ',' << p.tpr << '\n';
}

void write_pr_csv(const std::string& path,
                  const std::vector<dsl::EvalReport::PrPoint>& pts) {
    std::ofstream os(path);
    if (!os) throw dsl::FormatError("cannot open for writing: " + path);
    os << "tau,precision,recall\n";
    for (const auto& p : pts)
        os << p.tau << ',' << p.precision << ',' << p.recall << '\n';
}

void write_breakdown_csv(const std::string& path, const dsl::BreakdownReport& br) {
    std::ofstream os(path);
    if (!os) throw dsl::FormatError("cannot open for writing: " + path);
    os << "category,keypoint_type,count\n";
    for (int c = 0; c < dsl::kNumCategories; ++c)
        for (int t = 0; t < dsl::kNumDsParts; ++t)
            os << dsl::category_name(static_cast<dsl::ErrorCategory>(c)) << ','
               << dsl::ds_part_name(t) << ',' << br.by_type[t][c] << '\n';
}

// Pairs of (pred, gt) files: either two plain files or two directories whose
// entries are matched by filename.
std::vector<std::pair<std::string, std::string>> collect_pairs(
    const std::string& pred, const std::string& gt) {
    if (fs::is_directory(pred) != fs::is_directory(gt))
        throw dsl::SchemaError("--pred and --gt must both be files or both directories");
    if (!fs::is_directory(pred)) return {{pred, gt}};
    std::vector<std::string> names;
    for (const auto& entry : fs::directory_iterator(pred))
        if (entry.is_regular_file()) names.push_back(entry.path().filename().string());
    std::sort(names.begin(), names.end());
    std::vector<std::pair<std::string, std::string>> pairs;
    for (const auto& name : names) {
        const fs::path gt_path = fs::path(gt) / name;
        if (!fs::exists(gt_path))
            throw dsl::SchemaError("no ground-truth file for " + name);
        pairs.push_back({(fs::path(pred) / name).string(), gt_path.string()});
    }
    if (pairs.empty()) throw dsl::SchemaError("no prediction files in " + pred);
    return pairs;
}

struct ImagePartial {
    dsl::EvalAccumulator acc;
};

dsl::EvalAccumulator evaluate_pairs(
    const std::vector<std::pair<std::string, std::string>>& files, bool use_court,
    int jobs) {
    std::vector<ImagePartial> partials(files.size());
    std::atomic<std::size_t> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;

    auto work = [&] {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= files.size()) return;
            try {
                dsl::ImagePair pair;
                pair.pred = dsl::load_prediction(files[i].first);
                pair.gt = dsl::load_scene(files[i].second);
                if (use_court) dsl::apply_court_filter(pair);
                partials[i].acc.add_image(pair);
            } catch (...) {
                std::lock_guard<std::mutex> lock(error_mutex);
                if (!error) error = std::current_exception();
                return;
            }
        }
    };

    const int n_workers = std::min<std::size_t>(worker_count(jobs), files.size());
    std::vector<std::thread> threads;
    for (int t = 0; t < n_workers; ++t) threads.emplace_back(work);
    for (auto& t : threads) t.join();
    if (error) std::rethrow_exception(error);

    // Deterministic reduction in lexicographic file order.
    dsl::EvalAccumulator acc;
    for (auto& p : partials) {
        acc.ball_records.insert(acc.ball_records.end(), p.acc.ball_records.begin(),
                                p.acc.ball_records.end());
        acc.tp_ious.insert(acc.tp_ious.end(), p.acc.tp_ious.begin(),
                           p.acc.tp_ious.end());
        acc.n_pred_masks += p.acc.n_pred_masks;
        acc.n_gt_masks += p.acc.n_gt_masks;
        for (auto& v : p.acc.pred_poses) acc.pred_poses.push_back(std::move(v));
        for (auto& v : p.acc.gt_poses) acc.gt_poses.push_back(std::move(v));
        for (int c = 0; c < dsl::kNumCategories; ++c) {
            acc.breakdown.by_category[c] += p.acc.breakdown.by_category[c];
            for (int t = 0; t < dsl::kNumDsParts; ++t)
                acc.breakdown.by_type[t][c] += p.acc.breakdown.by_type[t][c];
        }
    }
    return acc;
}

// Central finite-difference verdict for the analytic gradients, on a
// deterministic sample of entries.
bool run_grad_check(const dsl::FieldSet& pred, const dsl::FieldSet& gt,
                    double& max_rel_err) {
    const dsl::LossWeights w;
    const double step = 1e-4;
    max_rel_err = 0.0;
    dsl::FieldSet work = pred;
    const dsl::FieldGradients g = dsl::grad_total(pred, gt, w);

    auto fd = [&](double& slot) {
        const double saved = slot;
        slot = saved + step;
        const double hi = dsl::loss_total(work, gt, w).total;
        slot = saved - step;
        const double lo = dsl::loss_total(work, gt, w).total;
        slot = saved;
        return (hi - lo) / (2.0 * step);
    };
    auto check = [&](double analytic, double numeric) {
        const double denom = std::max({1.0, std::abs(analytic), std::abs(numeric)});
        max_rel_err = std::max(max_rel_err, std::abs(analytic - numeric) / denom);
    };

    std::mt19937_64 rng(12345);
    std::uniform_int_distribution<std::size_t> pick(0, work.semantic.size() - 1);
    const std::size_t n_px = std::min<std::size_t>(work.semantic.size(), 256);
    for (std::size_t s = 0; s < n_px; ++s) {
        const std::size_t i = pick(rng);
        check(g.semantic[i], fd(work.semantic[i]));
        check(g.offsets[i].x, fd(work.offsets[i].x));
    }
    for (int k = 0; k < dsl::kNumTypes; ++k) {
        for (std::size_t i = 0; i < work.conf[k].size(); ++i) {
            check(g.conf[k][i], fd(work.conf[k][i]));
            check(g.loc[k][i].x, fd(work.loc[k][i].x));
            check(g.loc[k][i].y, fd(work.loc[k][i].y));
            check(g.log_scale[k][i], fd(work.log_scale[k][i]));
            // Sigma gradient is in linear space; skip kink-adjacent entries.
            if (std::abs(work.sigma(k, i) - gt.sigma(k, i)) > 1e-3) {
                const double saved = work.log_sigma[k][i];
                const double sig = std::exp(saved);
                work.log_sigma[k][i] = std::log(sig + step);
                const double hi = dsl::loss_total(work, gt, w).total;
                work.log_sigma[k][i] = std::log(sig - step);
                const double lo = dsl::loss_total(work, gt, w).total;
                work.log_sigma[k][i] = saved;
                check(g.sigma[k][i], (hi - lo) / (2.0 * step));
            }
        }
    }
    return max_rel_err <= 1e-4;
}

struct RoundtripOutcome {
    dsl::EvalReport report;
    std::vector<double> oks_values;
    bool pass = false;
};

RoundtripOutcome run_roundtrip(std::uint64_t seed, int players, bool ball) {
    dsl::SynthConfig cfg;
    cfg.seed = seed;
    cfg.n_players = players;
    cfg.ball = ball;
    const dsl::Scene scene = dsl::synth_scene(cfg);
    const dsl::FieldSet fields = dsl::encode(scene);
    const dsl::DecodeResult result = dsl::decode(fields);

    dsl::ImagePair pair;
    pair.gt = scene;
    pair.pred.grid = scene.grid;
    pair.pred.ball = result.ball;
    for (std::size_t i = 0; i < result.masks.size(); ++i)
        pair.pred.players.push_back({result.masks[i], result.skeletons[i]});

    dsl::EvalAccumulator acc;
    acc.add_image(pair);
    RoundtripOutcome out;
    out.report = acc.report();

    std::vector<dsl::DeepSportSkeleton> preds, gts;
    for (const auto& p : pair.pred.players)
        preds.push_back(dsl::convert_skeleton(p.skeleton));
    for (const auto& p : pair.gt.players)
        gts.push_back(dsl::convert_skeleton(p.skeleton));
    for (const auto& m : dsl::match_poses(preds, gts))
        out.oks_values.push_back(m.oks);

    out.pass = std::abs(out.report.psq - 1.0) <= 1e-9 &&
               std::abs(out.report.pdq - 1.0) <= 1e-9 &&
               out.oks_values.size() == gts.size();
    for (double v : out.oks_values)
        if (std::abs(v - 1.0) > 1e-6) out.pass = false;
    return out;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"DeepSportLab field encoding, decoding, and evaluation toolkit"};
    app.require_subcommand(1);

    // synth
    auto* synth = app.add_subcommand("synth", "generate a synthetic scene");
    dsl::SynthConfig synth_cfg;
    std::string synth_out;
    synth->add_option("--seed", synth_cfg.seed);
    synth->add_option("--players", synth_cfg.n_players);
    synth->add_flag("--ball,!--no-ball", synth_cfg.ball);
    synth->add_option("--width", synth_cfg.width);
    synth->add_option("--height", synth_cfg.height);
    synth->add_option("--stride", synth_cfg.stride);
    synth->add_option("--min-separation", synth_cfg.min_separation);
    synth->add_option("-o,--output", synth_out)->required();

    // encode
    auto* encode = app.add_subcommand("encode", "encode a scene into target fields");
    std::string encode_in, encode_out;
    encode->add_option("scene", encode_in)->required();
    encode->add_option("-o,--output", encode_out)->required();

    // decode
    auto* decode = app.add_subcommand("decode", "decode fields into a prediction");
    std::string decode_in, decode_out;
    dsl::DecodeConfig decode_cfg;
    decode->add_option("fields", decode_in)->required();
    decode->add_option("--threshold", decode_cfg.keypoint_threshold);
    decode->add_option("--semantic-threshold", decode_cfg.semantic_threshold);
    decode->add_option("--nms-radius", decode_cfg.nms_radius);
    decode->add_option("-o,--output", decode_out)->required();

    // eval
    auto* eval = app.add_subcommand("eval", "evaluate predictions against ground truth");
    std::string eval_pred, eval_gt, eval_out, eval_roc, eval_pr;
    bool eval_court = false;
    int eval_jobs = 0;
    eval->add_option("--pred", eval_pred)->required();
    eval->add_option("--gt", eval_gt)->required();
    eval->add_flag("--court", eval_court);
    eval->add_option("--jobs", eval_jobs);
    eval->add_option("-o,--output", eval_out);
    eval->add_option("--roc", eval_roc);
    eval->add_option("--pr", eval_pr);

    // breakdown
    auto* breakdown = app.add_subcommand("breakdown", "keypoint error breakdown");
    std::string bd_pred, bd_gt, bd_out;
    breakdown->add_option("--pred", bd_pred)->required();
    breakdown->add_option("--gt", bd_gt)->required();
    breakdown->add_option("-o,--output", bd_out)->required();

    // loss
    auto* loss = app.add_subcommand("loss", "loss breakdown between two field files");
    std::string loss_pred, loss_gt;
    bool loss_grad_check = false;
    loss->add_option("--pred", loss_pred)->required();
    loss->add_option("--gt", loss_gt)->required();
    loss->add_flag("--grad-check", loss_grad_check);

    // roundtrip
    auto* roundtrip = app.add_subcommand("roundtrip", "synth-encode-decode-eval in one shot");
    std::uint64_t rt_seed = 0;
    int rt_players = 3;
    bool rt_ball = true;
    roundtrip->add_option("--seed", rt_seed);
    roundtrip->add_option("--players", rt_players);
    roundtrip->add_flag("--ball,!--no-ball", rt_ball);

    CLI11_PARSE(app, argc, argv);

    try {
        if (*synth) {
            dsl::save_scene(synth_out, dsl::synth_scene(synth_cfg));
        } else if (*encode) {
            const dsl::Scene scene = dsl::load_scene(encode_in);
            dsl::write_field_file(encode_out, dsl::encode(scene));
        } else if (*decode) {
            const dsl::FieldSet fields = dsl::read_field_file(decode_in);
            dsl::save_prediction(decode_out, fields.grid,
                                 dsl::decode(fields, decode_cfg));
        } else if (*eval) {
            const auto files = collect_pairs(eval_pred, eval_gt);
            const dsl::EvalAccumulator acc =
                evaluate_pairs(files, eval_court, eval_jobs);
            const dsl::EvalReport report = acc.report();
            const json doc = report_to_json(report);
            if (!eval_out.empty())
                dsl::detail::write_json_file(eval_out, doc);
            std::cout << doc.dump(2) << '\n';
            if (!eval_roc.empty()) write_roc_csv(eval_roc, report.roc);
            if (!eval_pr.empty()) write_pr_csv(eval_pr, report.per_threshold);
        } else if (*breakdown) {
            const auto files = collect_pairs(bd_pred, bd_gt);
            const dsl::EvalAccumulator acc = evaluate_pairs(files, false, 0);
            write_breakdown_csv(bd_out, acc.breakdown);
        } else if (*loss) {
            const dsl::FieldSet pred = dsl::read_field_file(loss_pred);
            const dsl::FieldSet gt = dsl::read_field_file(loss_gt);
            const dsl::LossBreakdown lb = dsl::loss_total(pred, gt);
            std::cout << json{{"sem", lb.sem}, {"off", lb.off}, {"cnf", lb.cnf},
                              {"loc", lb.loc}, {"sig", lb.sig}, {"total", lb.total}}
                             .dump(2)
                      << '\n';
            if (loss_grad_check) {
                double max_rel_err = 0.0;
                const bool ok = run_grad_check(pred, gt, max_rel_err);
                std::cout << "grad-check " << (ok ? "PASS" : "FAIL")
                          << " max_rel_err=" << max_rel_err << '\n';
                if (!ok) return kExitAcceptance;
            }
        } else if (*roundtrip) {
            const RoundtripOutcome out = run_roundtrip(rt_seed, rt_players, rt_ball);
            std::cout << "pSQ " << 100.0 * out.report.psq << "  pDQ "
                      << 100.0 * out.report.pdq << "  poses " << out.oks_values.size()
                      << "  " << (out.pass ? "PASS" : "FAIL") << '\n';
            if (!out.pass) return kExitAcceptance;
        }
    } catch (const dsl::FormatError& e) {
        std::cerr << "format error: " << e.what() << '\n';
        return kExitFormat;
    } catch (const dsl::SchemaError& e) {
        std::cerr << "schema error: " << e.what() << '\n';
        return kExitSchema;
    } catch (const dsl::InfeasibleError& e) {
        std::cerr << "infeasible: " << e.what() << '\n';
        return kExitInfeasible;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
