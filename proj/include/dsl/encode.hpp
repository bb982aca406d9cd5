#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "dsl/core.hpp"

namespace dsl {

// Per-type size constants used to derive the target sigma from the instance
// size. Body-part values follow the COCO per-keypoint standard deviations.
struct EncodeConfig {
    std::array<double, kNumTypes> kappa_scale;
    double min_sigma = 1.0;

    EncodeConfig() {
        kappa_scale = {
            0.026,  // nose
            0.025, 0.025,  // eyes
            0.035, 0.035,  // ears
            0.079, 0.079,  // shoulders
            0.072, 0.072,  // elbows
            0.062, 0.062,  // wrists
            0.107, 0.107,  // hips
            0.087, 0.087,  // knees
            0.089, 0.089,  // ankles
            0.050,         // ball
            0.100,         // ply
        };
    }
};

// Binary player-vs-background map: 1 on the union of player masks.
inline std::vector<double> encode_semantic(const Scene& scene) {
    std::vector<double> out(scene.grid.num_pixels(), 0.0);
    for (const auto& player : scene.players)
        for (std::uint32_t idx : player.mask.pixels) out[idx] = 1.0;
    return out;
}

// Per-pixel displacement toward the centroid of the owning instance. Pixels
// covered by several masks are owned by the instance with the smaller id.
inline std::vector<Vec2> encode_offsets(const Scene& scene) {
    std::vector<Vec2> out(scene.grid.num_pixels(), Vec2{});
    std::vector<int> owner(scene.grid.num_pixels(), -1);

    std::vector<std::size_t> order(scene.players.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return scene.players[a].mask.instance_id < scene.players[b].mask.instance_id;
    });

    for (std::size_t i : order) {
        const auto& mask = scene.players[i].mask;
        const Vec2 c = mask_centroid(mask.pixels, scene.grid);
        for (std::uint32_t idx : mask.pixels) {
            if (owner[idx] >= 0) continue;
            owner[idx] = mask.instance_id;
            const double px = idx % scene.grid.width_hr;
            const double py = idx / scene.grid.width_hr;
            out[idx] = {c.x - px, c.y - py};
        }
    }
    return out;
}

namespace detail {

struct KeypointInstance {
    int type;
    Vec2 point;
    double size;
};

// Stamp one keypoint instance onto the per-type low-res target fields. When
// patches of two instances overlap, each cell keeps the instance whose
// keypoint is nearer to the cell center.
inline void stamp(const KeypointInstance& inst, const EncodeConfig& cfg,
                  const GridSpec& grid, std::vector<double>& conf,
                  std::vector<Vec2>& loc, std::vector<double>& sigma,
                  std::vector<double>& owner_dist2) {
    const double target_sigma =
        std::max(cfg.min_sigma, cfg.kappa_scale[inst.type] * inst.size);
    for (const Cell& u : patch_cells(inst.point, grid)) {
        const std::size_t i = grid.cell_index(u);
        const Vec2 center = cell_center(u, grid);
        const double d2 = (inst.point - center).norm2();
        if (conf[i] > 0.0 && d2 >= owner_dist2[i]) continue;
        conf[i] = 1.0;
        loc[i] = inst.point - center;
        sigma[i] = target_sigma;
        owner_dist2[i] = d2;
    }
}

}  // namespace detail

// Ground-truth target fields for supervision: binary semantic map, offset
// vectors, and per-type confidence / localization / sigma patches around each
// keypoint. The loss scale B has no ground truth and stays at 1.
inline FieldSet encode(const Scene& scene, const EncodeConfig& cfg = {}) {
    FieldSet fields(scene.grid);
    fields.semantic = encode_semantic(scene);
    fields.offsets = encode_offsets(scene);

    std::array<std::vector<detail::KeypointInstance>, kNumTypes> instances;
    for (const auto& player : scene.players) {
        const double size = mask_size(player.mask.pixels, scene.grid);
        for (int k = 0; k < kNumParts; ++k)
            if (player.skeleton.parts[k])
                instances[k].push_back({k, player.skeleton.parts[k]->point(), size});
        instances[kp::ply].push_back(
            {kp::ply, mask_centroid(player.mask.pixels, scene.grid), size});
    }
    if (scene.ball_mask && !scene.ball_mask->empty())
        instances[kp::ball].push_back(
            {kp::ball, mask_centroid(*scene.ball_mask, scene.grid),
             std::sqrt(static_cast<double>(scene.ball_mask->size()))});

    for (int k = 0; k < kNumTypes; ++k) {
        if (instances[k].empty()) continue;
        std::vector<double> sigma(scene.grid.num_cells(), 1.0);
        std::vector<double> owner_dist2(scene.grid.num_cells(), 0.0);
        for (const auto& inst : instances[k])
            detail::stamp(inst, cfg, scene.grid, fields.conf[k], fields.loc[k],
                          sigma, owner_dist2);
        for (std::size_t i = 0; i < sigma.size(); ++i)
            if (fields.conf[k][i] > 0.0) fields.set_sigma(k, i, sigma[i]);
    }
    return fields;
}

}  // namespace dsl
