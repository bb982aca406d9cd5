#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "dsl/core.hpp"

namespace dsl {

struct DecodeConfig {
    double keypoint_threshold = 0.1;
    double semantic_threshold = 0.5;
    double nms_radius = 0.0;  // 0 means: use the grid stride
    double gaussian_truncation = 3.0;

    double effective_nms_radius(const GridSpec& grid) const {
        return nms_radius > 0.0 ? nms_radius : grid.stride;
    }
};

struct DecodeResult {
    std::optional<Keypoint> ball;
    std::vector<InstanceMask> masks;
    std::vector<Skeleton> skeletons;
    std::vector<Keypoint> centers;
};

// High-resolution confidence map for one keypoint-type: each low-res source
// cell contributes an unnormalized Gaussian of its own sigma, centered on the
// point its localization vector designates. Contributions beyond
// gaussian_truncation * sigma are dropped.
inline std::vector<double> fuse_highres(const std::vector<double>& conf,
                                        const std::vector<Vec2>& loc,
                                        const std::vector<double>& sigma,
                                        const GridSpec& grid,
                                        const DecodeConfig& cfg = {}) {
    if (conf.size() != grid.num_cells() || loc.size() != conf.size() ||
        sigma.size() != conf.size())
        throw DomainError("fuse input shape mismatch");
    std::vector<double> out(grid.num_pixels(), 0.0);
    for (int uy = 0; uy < grid.height_lr(); ++uy) {
        for (int ux = 0; ux < grid.width_lr(); ++ux) {
            const std::size_t i = grid.cell_index({ux, uy});
            const double c = conf[i];
            if (c <= 0.0) continue;
            const double s = sigma[i];
            if (s <= 0.0) throw DomainError("non-positive sigma at active cell");
            const Vec2 t = cell_center({ux, uy}, grid) + loc[i];
            const double inv = 1.0 / (2.0 * s * s);
            const double radius = cfg.gaussian_truncation * s;
            int x0 = 0, x1 = grid.width_hr - 1, y0 = 0, y1 = grid.height_hr - 1;
            if (std::isfinite(radius)) {
                x0 = std::max(0, static_cast<int>(std::ceil(t.x - radius)));
                x1 = std::min(grid.width_hr - 1, static_cast<int>(std::floor(t.x + radius)));
                y0 = std::max(0, static_cast<int>(std::ceil(t.y - radius)));
                y1 = std::min(grid.height_hr - 1, static_cast<int>(std::floor(t.y + radius)));
            }
            const double r2max = radius * radius;
            for (int y = y0; y <= y1; ++y) {
                const double dy = y - t.y;
                double* row = out.data() + grid.pixel_index(0, y);
                for (int x = x0; x <= x1; ++x) {
                    const double dx = x - t.x;
                    const double d2 = dx * dx + dy * dy;
                    if (d2 > r2max) continue;
                    row[x] += c * std::exp(-d2 * inv);
                }
            }
        }
    }
    return out;
}

inline std::vector<double> fuse_highres(const FieldSet& fields, int k,
                                        const DecodeConfig& cfg = {}) {
    return fuse_highres(fields.conf[k], fields.loc[k], fields.sigma_slice(k),
                        fields.grid, cfg);
}

namespace detail {

// Sub-pixel peak refinement by per-axis quadratic fit in log-space, exact for
// a sampled Gaussian. Falls back to the pixel position when a neighbor is
// non-positive or outside the grid.
inline Vec2 refine_peak(const std::vector<double>& map, const GridSpec& grid,
                        int px, int py) {
    auto axis_offset = [&](int xm, int x0, int xp, bool valid) -> double {
        if (!valid) return 0.0;
        const double wm = map[xm], w0 = map[x0], wp = map[xp];
        if (wm <= 0.0 || w0 <= 0.0 || wp <= 0.0) return 0.0;
        const double lm = std::log(wm), l0 = std::log(w0), lp = std::log(wp);
        const double denom = lm - 2.0 * l0 + lp;
        if (std::abs(denom) < 1e-12) return 0.0;
        const double off = 0.5 * (lm - lp) / denom;
        return std::clamp(off, -0.499, 0.499);
    };
    const std::size_t i = grid.pixel_index(px, py);
    const double dx = axis_offset(i - 1, i, i + 1, px > 0 && px < grid.width_hr - 1);
    const double dy = axis_offset(i - grid.width_hr, i, i + grid.width_hr,
                                  py > 0 && py < grid.height_hr - 1);
    return {px + dx, py + dy};
}

}  // namespace detail

// Top-1 detection: the global argmax of the fused ball map, ties broken in
// row-major order. Thresholding is left to the ROC sweep downstream.
inline Keypoint detect_ball(const std::vector<double>& ball_map,
                            const GridSpec& grid) {
    if (ball_map.size() != grid.num_pixels())
        throw DomainError("ball map shape mismatch");
    std::size_t best = 0;
    for (std::size_t i = 1; i < ball_map.size(); ++i)
        if (ball_map[i] > ball_map[best]) best = i;
    const int px = static_cast<int>(best % grid.width_hr);
    const int py = static_cast<int>(best / grid.width_hr);
    const Vec2 p = ball_map[best] > 0.0 ? detail::refine_peak(ball_map, grid, px, py)
                                        : Vec2{double(px), double(py)};
    return {kp::ball, p.x, p.y, std::min(1.0, ball_map[best])};
}

// Greedy radius-NMS peak extraction on the fused player-center map.
inline std::vector<Keypoint> detect_centers(const std::vector<double>& ply_map,
                                            const GridSpec& grid,
                                            const DecodeConfig& cfg = {}) {
    if (ply_map.size() != grid.num_pixels())
        throw DomainError("center map shape mismatch");
    struct Candidate {
        double value;
        std::size_t index;
    };
    std::vector<Candidate> candidates;
    for (std::size_t i = 0; i < ply_map.size(); ++i)
        if (ply_map[i] >= cfg.keypoint_threshold && ply_map[i] > 0.0)
            candidates.push_back({ply_map[i], i});
    std::sort(candidates.begin(), candidates.end(),
              [](const Candidate& a, const Candidate& b) {
                  if (a.value != b.value) return a.value > b.value;
                  return a.index < b.index;
              });

    const double radius = cfg.effective_nms_radius(grid);
    const double r2 = radius * radius;
    std::vector<Keypoint> centers;
    std::vector<Vec2> taken;
    for (const Candidate& c : candidates) {
        const double px = static_cast<double>(c.index % grid.width_hr);
        const double py = static_cast<double>(c.index / grid.width_hr);
        bool suppressed = false;
        for (const Vec2& t : taken)
            if ((Vec2{px, py} - t).norm2() <= r2) {
                suppressed = true;
                break;
            }
        if (suppressed) continue;
        taken.push_back({px, py});
        const Vec2 p = detail::refine_peak(ply_map, grid, static_cast<int>(px),
                                           static_cast<int>(py));
        centers.push_back({kp::ply, p.x, p.y, std::min(1.0, c.value)});
    }
    return centers;
}

// Center-regression grouping: every foreground pixel goes to the center
// closest to p + offset(p). Centers that end up with no pixels are dropped;
// surviving masks keep their center's original index as instance_id.
inline std::vector<InstanceMask> group_instances(
    const std::vector<double>& semantic, const std::vector<Vec2>& offsets,
    const std::vector<Keypoint>& centers, const GridSpec& grid,
    const DecodeConfig& cfg = {}) {
    if (semantic.size() != grid.num_pixels() || offsets.size() != semantic.size())
        throw DomainError("grouping input shape mismatch");
    std::vector<InstanceMask> masks(centers.size());
    for (std::size_t i = 0; i < centers.size(); ++i)
        masks[i].instance_id = static_cast<int>(i);
    if (centers.empty()) return {};

    for (int y = 0; y < grid.height_hr; ++y) {
        for (int x = 0; x < grid.width_hr; ++x) {
            const std::size_t i = grid.pixel_index(x, y);
            if (semantic[i] < cfg.semantic_threshold) continue;
            const Vec2 target = Vec2{double(x), double(y)} + offsets[i];
            std::size_t best = 0;
            double best_d2 = std::numeric_limits<double>::infinity();
            for (std::size_t j = 0; j < centers.size(); ++j) {
                const double d2 = (centers[j].point() - target).norm2();
                if (d2 < best_d2) {
                    best_d2 = d2;
                    best = j;
                }
            }
            masks[best].pixels.push_back(static_cast<std::uint32_t>(i));
        }
    }
    std::vector<InstanceMask> out;
    for (auto& m : masks)
        if (!m.pixels.empty()) out.push_back(std::move(m));
    return out;
}

// Per-mask body-part extraction: for each mask and part type, the argmax of
// the fused map restricted to the mask's pixels, kept if it clears the
// keypoint threshold.
inline std::vector<Skeleton> assemble_skeletons(
    const std::array<std::vector<double>, kNumParts>& part_maps,
    const std::vector<InstanceMask>& masks, const GridSpec& grid,
    const DecodeConfig& cfg = {}) {
    std::vector<Skeleton> skeletons;
    skeletons.reserve(masks.size());
    for (const auto& mask : masks) {
        Skeleton skel;
        skel.instance_id = mask.instance_id;
        for (int k = 0; k < kNumParts; ++k) {
            const auto& map = part_maps[k];
            if (map.size() != grid.num_pixels())
                throw DomainError("part map shape mismatch");
            std::uint32_t best = 0;
            double best_value = -1.0;
            for (std::uint32_t idx : mask.pixels)
                if (map[idx] > best_value) {
                    best_value = map[idx];
                    best = idx;
                }
            if (best_value < cfg.keypoint_threshold) continue;
            const int px = static_cast<int>(best % grid.width_hr);
            const int py = static_cast<int>(best / grid.width_hr);
            const Vec2 p = detail::refine_peak(map, grid, px, py);
            skel.parts[k] = Keypoint{k, p.x, p.y, std::min(1.0, best_value)};
        }
        skeletons.push_back(std::move(skel));
    }
    return skeletons;
}

// Full inference pipeline: fuse all 19 types, detect the ball, extract player
// centers, group foreground pixels into instances, assemble skeletons.
inline DecodeResult decode(const FieldSet& fields, const DecodeConfig& cfg = {}) {
    const GridSpec& grid = fields.grid;
    DecodeResult result;

    result.ball = detect_ball(fuse_highres(fields, kp::ball, cfg), grid);

    const std::vector<Keypoint> raw_centers =
        detect_centers(fuse_highres(fields, kp::ply, cfg), grid, cfg);
    std::vector<InstanceMask> masks =
        group_instances(fields.semantic, fields.offsets, raw_centers, grid, cfg);

    // Keep only centers whose instance survived, renumber densely.
    for (std::size_t i = 0; i < masks.size(); ++i) {
        result.centers.push_back(raw_centers[masks[i].instance_id]);
        masks[i].instance_id = static_cast<int>(i);
    }
    result.masks = std::move(masks);

    std::array<std::vector<double>, kNumParts> part_maps;
    for (int k = 0; k < kNumParts; ++k) part_maps[k] = fuse_highres(fields, k, cfg);
    result.skeletons = assemble_skeletons(part_maps, result.masks, grid, cfg);
    for (std::size_t i = 0; i < result.skeletons.size(); ++i)
        result.skeletons[i].instance_id = static_cast<int>(i);
    return result;
}

}  // namespace dsl
