#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace dsl {

// Error taxonomy, mapped onto CLI exit codes by the tool.
struct DomainError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct FormatError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct SchemaError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct InfeasibleError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// 19 keypoint-types: the 17 COCO body parts in COCO order, then ball and
// player-center.
namespace kp {
enum : int {
    nose = 0,
    left_eye,
    right_eye,
    left_ear,
    right_ear,
    left_shoulder,
    right_shoulder,
    left_elbow,
    right_elbow,
    left_wrist,
    right_wrist,
    left_hip,
    right_hip,
    left_knee,
    right_knee,
    left_ankle,
    right_ankle,
    ball = 17,
    ply = 18,
};
}  // namespace kp

constexpr int kNumParts = 17;
constexpr int kNumTypes = 19;

inline const std::array<std::string_view, kNumTypes>& keypoint_names() {
    static const std::array<std::string_view, kNumTypes> names = {
        "nose",        "left_eye",       "right_eye",      "left_ear",
        "right_ear",   "left_shoulder",  "right_shoulder", "left_elbow",
        "right_elbow", "left_wrist",     "right_wrist",    "left_hip",
        "right_hip",   "left_knee",      "right_knee",     "left_ankle",
        "right_ankle", "ball",           "ply"};
    return names;
}

inline std::string_view keypoint_name(int id) {
    if (id < 0 || id >= kNumTypes) throw DomainError("keypoint id out of range");
    return keypoint_names()[id];
}

inline int keypoint_id(std::string_view name) {
    const auto& names = keypoint_names();
    for (int i = 0; i < kNumTypes; ++i)
        if (names[i] == name) return i;
    throw DomainError("unknown keypoint name: " + std::string(name));
}

struct Vec2 {
    double x = 0.0;
    double y = 0.0;

    Vec2 operator+(const Vec2& o) const { return {x + o.x, y + o.y}; }
    Vec2 operator-(const Vec2& o) const { return {x - o.x, y - o.y}; }
    Vec2 operator*(double s) const { return {x * s, y * s}; }
    double norm2() const { return x * x + y * y; }
    double norm() const { return std::sqrt(norm2()); }
    bool operator==(const Vec2& o) const { return x == o.x && y == o.y; }
};

struct Cell {
    int x = 0;
    int y = 0;
    bool operator==(const Cell& o) const { return x == o.x && y == o.y; }
};

// High-resolution pixel grid plus the stride tying it to the low-resolution
// field grid. Both dimensions must be multiples of the stride.
struct GridSpec {
    int width_hr = 0;
    int height_hr = 0;
    int stride = 8;

    GridSpec() = default;
    GridSpec(int w, int h, int s) : width_hr(w), height_hr(h), stride(s) {
        if (w <= 0 || h <= 0 || s <= 0)
            throw DomainError("grid dimensions and stride must be positive");
        if (w % s != 0 || h % s != 0)
            throw DomainError("grid dimensions must be divisible by the stride");
    }

    int width_lr() const { return width_hr / stride; }
    int height_lr() const { return height_hr / stride; }
    std::size_t num_pixels() const {
        return std::size_t(width_hr) * std::size_t(height_hr);
    }
    std::size_t num_cells() const {
        return std::size_t(width_lr()) * std::size_t(height_lr());
    }
    std::size_t pixel_index(int x, int y) const {
        return std::size_t(y) * width_hr + x;
    }
    std::size_t cell_index(const Cell& u) const {
        return std::size_t(u.y) * width_lr() + u.x;
    }
    bool contains_pixel(int x, int y) const {
        return x >= 0 && x < width_hr && y >= 0 && y < height_hr;
    }
    bool contains_point(const Vec2& p) const {
        return p.x >= 0.0 && p.x < width_hr && p.y >= 0.0 && p.y < height_hr;
    }
    bool contains_cell(const Cell& u) const {
        return u.x >= 0 && u.x < width_lr() && u.y >= 0 && u.y < height_lr();
    }
    bool operator==(const GridSpec& o) const {
        return width_hr == o.width_hr && height_hr == o.height_hr &&
               stride == o.stride;
    }
};

// Center of a low-res cell expressed in high-res pixel coordinates. A keypoint
// sitting exactly on a cell center has a zero localization vector.
inline Vec2 cell_center(const Cell& u, const GridSpec& grid) {
    if (!grid.contains_cell(u)) throw DomainError("cell outside low-res grid");
    return {(u.x + 0.5) * grid.stride, (u.y + 0.5) * grid.stride};
}

// The 4x4 block of low-res cells around a high-res point, clipped at borders.
// These are the cells that carry supervision for a keypoint at p.
inline std::vector<Cell> patch_cells(const Vec2& p, const GridSpec& grid) {
    if (!grid.contains_point(p)) throw DomainError("point outside high-res grid");
    const int cx = static_cast<int>(std::floor(p.x / grid.stride));
    const int cy = static_cast<int>(std::floor(p.y / grid.stride));
    std::vector<Cell> cells;
    cells.reserve(16);
    for (int y = cy - 1; y <= cy + 2; ++y) {
        if (y < 0 || y >= grid.height_lr()) continue;
        for (int x = cx - 1; x <= cx + 2; ++x) {
            if (x < 0 || x >= grid.width_lr()) continue;
            cells.push_back({x, y});
        }
    }
    return cells;
}

struct Keypoint {
    int type = 0;
    double x = 0.0;
    double y = 0.0;
    double confidence = 1.0;

    Vec2 point() const { return {x, y}; }
};

// Pixel indices (row-major, x fastest) of one player or ball instance.
struct InstanceMask {
    std::vector<std::uint32_t> pixels;  // sorted, unique
    int instance_id = 0;
};

inline Vec2 mask_centroid(const std::vector<std::uint32_t>& pixels,
                          const GridSpec& grid) {
    if (pixels.empty()) throw DomainError("centroid of empty mask");
    double sx = 0.0, sy = 0.0;
    for (std::uint32_t idx : pixels) {
        sx += idx % grid.width_hr;
        sy += idx / grid.width_hr;
    }
    const double n = static_cast<double>(pixels.size());
    return {sx / n, sy / n};
}

struct BBox {
    double min_x = 0, min_y = 0, max_x = 0, max_y = 0;
    double width() const { return max_x - min_x; }
    double height() const { return max_y - min_y; }
};

inline BBox mask_bbox(const std::vector<std::uint32_t>& pixels,
                      const GridSpec& grid) {
    if (pixels.empty()) throw DomainError("bbox of empty mask");
    BBox b{1e30, 1e30, -1e30, -1e30};
    for (std::uint32_t idx : pixels) {
        const double x = idx % grid.width_hr;
        const double y = idx / grid.width_hr;
        b.min_x = std::min(b.min_x, x);
        b.min_y = std::min(b.min_y, y);
        b.max_x = std::max(b.max_x, x);
        b.max_y = std::max(b.max_y, y);
    }
    return b;
}

// Size proxy of an instance: square root of the area of the tight bounding
// box of its mask pixels.
inline double mask_size(const std::vector<std::uint32_t>& pixels,
                        const GridSpec& grid) {
    const BBox b = mask_bbox(pixels, grid);
    return std::sqrt((b.width() + 1.0) * (b.height() + 1.0));
}

// One player's typed body-part keypoints (COCO vocabulary, at most one per
// type). Confidence is the mean over present parts.
struct Skeleton {
    std::array<std::optional<Keypoint>, kNumParts> parts;
    int instance_id = 0;

    double confidence() const {
        double sum = 0.0;
        int n = 0;
        for (const auto& p : parts)
            if (p) {
                sum += p->confidence;
                ++n;
            }
        return n == 0 ? 0.0 : sum / n;
    }
    int num_parts() const {
        int n = 0;
        for (const auto& p : parts)
            if (p) ++n;
        return n;
    }
};

struct Player {
    InstanceMask mask;
    Skeleton skeleton;
};

// Ground-truth annotations for one image.
struct Scene {
    GridSpec grid;
    std::optional<std::vector<std::uint32_t>> ball_mask;
    std::vector<Player> players;
    std::optional<std::vector<Vec2>> court;
};

// The full stack of network outputs (or their ground-truth targets) as data.
// Sigma and the localization-loss scale are held in log-space and
// exponentiated on read.
class FieldSet {
  public:
    GridSpec grid;
    std::vector<double> semantic;                 // H*W, in [0,1]
    std::vector<Vec2> offsets;                    // H*W
    std::array<std::vector<double>, kNumTypes> conf;       // lr cells, in [0,1]
    std::array<std::vector<Vec2>, kNumTypes> loc;          // lr cells
    std::array<std::vector<double>, kNumTypes> log_sigma;  // lr cells
    std::array<std::vector<double>, kNumTypes> log_scale;  // lr cells

    FieldSet() = default;
    explicit FieldSet(const GridSpec& g) : grid(g) {
        semantic.assign(g.num_pixels(), 0.0);
        offsets.assign(g.num_pixels(), Vec2{});
        for (int k = 0; k < kNumTypes; ++k) {
            conf[k].assign(g.num_cells(), 0.0);
            loc[k].assign(g.num_cells(), Vec2{});
            log_sigma[k].assign(g.num_cells(), 0.0);
            log_scale[k].assign(g.num_cells(), 0.0);
        }
    }

    double sigma(int k, std::size_t i) const { return std::exp(log_sigma[k][i]); }
    double scale(int k, std::size_t i) const { return std::exp(log_scale[k][i]); }

    void set_sigma(int k, std::size_t i, double value) {
        if (value <= 0.0) throw DomainError("sigma must be positive");
        log_sigma[k][i] = std::log(value);
    }
    void set_scale(int k, std::size_t i, double value) {
        if (value <= 0.0) throw DomainError("scale must be positive");
        log_scale[k][i] = std::log(value);
    }

    // Per-type sigma slice in linear space.
    std::vector<double> sigma_slice(int k) const {
        std::vector<double> out(log_sigma[k].size());
        for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::exp(log_sigma[k][i]);
        return out;
    }

    bool operator==(const FieldSet& o) const {
        return grid == o.grid && semantic == o.semantic && offsets == o.offsets &&
               conf == o.conf && loc == o.loc && log_sigma == o.log_sigma &&
               log_scale == o.log_scale;
    }
};

}  // namespace dsl
