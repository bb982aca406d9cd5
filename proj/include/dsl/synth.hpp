#pragma once

#include <algorithm>
#include <cmath>
#include <random>

#include "dsl/core.hpp"

namespace dsl {

// Reproducible synthetic-scene generator: elliptical player masks with
// ear/hip/ankle keypoints, an optional circular ball mask, and a court
// polygon covering most of the image.
struct SynthConfig {
    std::uint64_t seed = 0;
    int n_players = 3;
    double min_player_size = 28.0;  // ellipse height range in pixels
    double max_player_size = 64.0;
    bool ball = true;
    double min_separation = 32.0;  // gap between player bounding boxes
    int width = 512;
    int height = 512;
    int stride = 8;
};

namespace detail {

struct Ellipse {
    double cx, cy, rx, ry;

    double bbox_gap(const Ellipse& o) const {
        const double gx = std::max({o.cx - o.rx - (cx + rx), cx - rx - (o.cx + o.rx), 0.0});
        const double gy = std::max({o.cy - o.ry - (cy + ry), cy - ry - (o.cy + o.ry), 0.0});
        if (gx == 0.0 && gy == 0.0) return 0.0;
        return std::sqrt(gx * gx + gy * gy);
    }
};

inline std::vector<std::uint32_t> ellipse_pixels(const Ellipse& e,
                                                 const GridSpec& grid) {
    std::vector<std::uint32_t> pixels;
    const int y0 = std::max(0, static_cast<int>(std::floor(e.cy - e.ry)));
    const int y1 = std::min(grid.height_hr - 1, static_cast<int>(std::ceil(e.cy + e.ry)));
    for (int y = y0; y <= y1; ++y) {
        const int x0 = std::max(0, static_cast<int>(std::floor(e.cx - e.rx)));
        const int x1 = std::min(grid.width_hr - 1, static_cast<int>(std::ceil(e.cx + e.rx)));
        for (int x = x0; x <= x1; ++x) {
            const double dx = (x - e.cx) / e.rx;
            const double dy = (y - e.cy) / e.ry;
            if (dx * dx + dy * dy <= 1.0)
                pixels.push_back(static_cast<std::uint32_t>(grid.pixel_index(x, y)));
        }
    }
    return pixels;
}

}  // namespace detail

inline Scene synth_scene(const SynthConfig& cfg) {
    GridSpec grid(cfg.width, cfg.height, cfg.stride);
    std::mt19937_64 rng(cfg.seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);

    Scene scene;
    scene.grid = grid;

    // Court polygon: a rectangle with a 4 px margin.
    const double m = 4.0;
    scene.court = std::vector<Vec2>{{m, m},
                                    {grid.width_hr - 1 - m, m},
                                    {grid.width_hr - 1 - m, grid.height_hr - 1 - m},
                                    {m, grid.height_hr - 1 - m}};

    std::vector<detail::Ellipse> placed;
    for (int i = 0; i < cfg.n_players; ++i) {
        bool ok = false;
        detail::Ellipse e{};
        for (int attempt = 0; attempt < 500 && !ok; ++attempt) {
            const double h = cfg.min_player_size +
                             (cfg.max_player_size - cfg.min_player_size) * unit(rng);
            e.ry = 0.5 * h;
            e.rx = 0.3 * h;
            const double margin = 3.0;
            const double lo_x = e.rx + margin, hi_x = grid.width_hr - 1 - e.rx - margin;
            const double lo_y = e.ry + margin, hi_y = grid.height_hr - 1 - e.ry - margin;
            if (lo_x >= hi_x || lo_y >= hi_y) continue;
            e.cx = lo_x + (hi_x - lo_x) * unit(rng);
            e.cy = lo_y + (hi_y - lo_y) * unit(rng);
            ok = true;
            for (const auto& other : placed)
                if (e.bbox_gap(other) < cfg.min_separation) {
                    ok = false;
                    break;
                }
        }
        if (!ok)
            throw InfeasibleError("cannot place " + std::to_string(cfg.n_players) +
                                  " players at the requested separation");
        placed.push_back(e);

        Player player;
        player.mask.instance_id = i;
        player.mask.pixels = detail::ellipse_pixels(e, grid);
        player.skeleton.instance_id = i;
        auto put = [&](int type, double fx, double fy) {
            player.skeleton.parts[type] =
                Keypoint{type, e.cx + fx * e.rx, e.cy + fy * e.ry, 1.0};
        };
        put(kp::left_ear, -0.25, -0.75);
        put(kp::right_ear, 0.25, -0.75);
        put(kp::left_hip, -0.30, 0.05);
        put(kp::right_hip, 0.30, 0.05);
        put(kp::left_ankle, -0.40, 0.80);
        put(kp::right_ankle, 0.40, 0.80);
        scene.players.push_back(std::move(player));
    }

    if (cfg.ball) {
        const double r = 4.0 + 5.0 * unit(rng);
        const double margin = r + 3.0;
        detail::Ellipse ball{margin + (grid.width_hr - 1 - 2 * margin) * unit(rng),
                             margin + (grid.height_hr - 1 - 2 * margin) * unit(rng),
                             r, r};
        scene.ball_mask = detail::ellipse_pixels(ball, grid);
    }
    return scene;
}

}  // namespace dsl
