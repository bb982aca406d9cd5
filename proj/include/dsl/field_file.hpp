#pragma once

#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <string>

#include "dsl/core.hpp"

namespace dsl {

// Binary field container: "DSLF" magic, version, grid spec, then one tagged
// tensor block per field. All payload floats are 32-bit little-endian,
// row-major with x fastest.
namespace fieldfile {

constexpr char kMagic[4] = {'D', 'S', 'L', 'F'};
constexpr std::uint32_t kVersion = 1;

enum Tag : std::uint8_t {
    kSemantic = 1,
    kOffsets = 2,
    kConf = 3,
    kLoc = 4,
    kLogSigma = 5,
    kLogScale = 6,
};

namespace detail {

inline void write_u32(std::ostream& os, std::uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v),
                          static_cast<unsigned char>(v >> 8),
                          static_cast<unsigned char>(v >> 16),
                          static_cast<unsigned char>(v >> 24)};
    os.write(reinterpret_cast<const char*>(b), 4);
}

inline std::uint32_t read_u32(std::istream& is) {
    unsigned char b[4];
    if (!is.read(reinterpret_cast<char*>(b), 4))
        throw FormatError("truncated field file");
    return std::uint32_t(b[0]) | std::uint32_t(b[1]) << 8 |
           std::uint32_t(b[2]) << 16 | std::uint32_t(b[3]) << 24;
}

inline void write_f32(std::ostream& os, float v) {
    static_assert(sizeof(float) == 4);
    std::uint32_t bits;
    std::memcpy(&bits, &v, 4);
    write_u32(os, bits);
}

inline float read_f32(std::istream& is) {
    const std::uint32_t bits = read_u32(is);
    float v;
    std::memcpy(&v, &bits, 4);
    return v;
}

inline void write_block_header(std::ostream& os, Tag tag,
                               const std::vector<std::uint32_t>& dims) {
    const unsigned char t = tag;
    const unsigned char nd = static_cast<unsigned char>(dims.size());
    os.write(reinterpret_cast<const char*>(&t), 1);
    os.write(reinterpret_cast<const char*>(&nd), 1);
    for (std::uint32_t d : dims) write_u32(os, d);
}

inline void expect_dims(std::istream& is, const std::vector<std::uint32_t>& want) {
    unsigned char nd;
    if (!is.read(reinterpret_cast<char*>(&nd), 1))
        throw FormatError("truncated field file");
    if (nd != want.size()) throw FormatError("unexpected tensor rank");
    for (std::uint32_t w : want)
        if (read_u32(is) != w) throw FormatError("unexpected tensor dimensions");
}

}  // namespace detail

}  // namespace fieldfile

inline void write_field_file(std::ostream& os, const FieldSet& fields) {
    using namespace fieldfile;
    using namespace fieldfile::detail;
    os.write(kMagic, 4);
    write_u32(os, kVersion);
    write_u32(os, static_cast<std::uint32_t>(fields.grid.width_hr));
    write_u32(os, static_cast<std::uint32_t>(fields.grid.height_hr));
    write_u32(os, static_cast<std::uint32_t>(fields.grid.stride));
    write_u32(os, kNumTypes);

    const std::uint32_t w = fields.grid.width_hr, h = fields.grid.height_hr;
    const std::uint32_t wl = fields.grid.width_lr(), hl = fields.grid.height_lr();
    const std::uint32_t kt = kNumTypes;

    write_block_header(os, kSemantic, {h, w});
    for (double v : fields.semantic) write_f32(os, static_cast<float>(v));

    write_block_header(os, kOffsets, {h, w, 2});
    for (const Vec2& v : fields.offsets) {
        write_f32(os, static_cast<float>(v.x));
        write_f32(os, static_cast<float>(v.y));
    }

    write_block_header(os, kConf, {kt, hl, wl});
    for (int k = 0; k < kNumTypes; ++k)
        for (double v : fields.conf[k]) write_f32(os, static_cast<float>(v));

    write_block_header(os, kLoc, {kt, hl, wl, 2});
    for (int k = 0; k < kNumTypes; ++k)
        for (const Vec2& v : fields.loc[k]) {
            write_f32(os, static_cast<float>(v.x));
            write_f32(os, static_cast<float>(v.y));
        }

    write_block_header(os, kLogSigma, {kt, hl, wl});
    for (int k = 0; k < kNumTypes; ++k)
        for (double v : fields.log_sigma[k]) write_f32(os, static_cast<float>(v));

    write_block_header(os, kLogScale, {kt, hl, wl});
    for (int k = 0; k < kNumTypes; ++k)
        for (double v : fields.log_scale[k]) write_f32(os, static_cast<float>(v));
}

inline FieldSet read_field_file(std::istream& is) {
    using namespace fieldfile;
    using namespace fieldfile::detail;
    char magic[4];
    if (!is.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0)
        throw FormatError("bad field file magic");
    if (read_u32(is) != kVersion) throw FormatError("unsupported field file version");
    const std::uint32_t w = read_u32(is);
    const std::uint32_t h = read_u32(is);
    const std::uint32_t stride = read_u32(is);
    if (read_u32(is) != kNumTypes)
        throw FormatError("unexpected keypoint-type count");

    GridSpec grid;
    try {
        grid = GridSpec(static_cast<int>(w), static_cast<int>(h),
                        static_cast<int>(stride));
    } catch (const DomainError& e) {
        throw FormatError(std::string("invalid grid spec: ") + e.what());
    }
    FieldSet fields(grid);
    const std::uint32_t wl = grid.width_lr(), hl = grid.height_lr();
    const std::uint32_t kt = kNumTypes;

    bool seen[7] = {};
    for (int block = 0; block < 6; ++block) {
        unsigned char tag;
        if (!is.read(reinterpret_cast<char*>(&tag), 1))
            throw FormatError("truncated field file");
        if (tag < 1 || tag > 6 || seen[tag])
            throw FormatError("unexpected tensor tag");
        seen[tag] = true;
        switch (tag) {
            case kSemantic:
                expect_dims(is, {h, w});
                for (double& v : fields.semantic) v = read_f32(is);
                break;
            case kOffsets:
                expect_dims(is, {h, w, 2});
                for (Vec2& v : fields.offsets) {
                    v.x = read_f32(is);
                    v.y = read_f32(is);
                }
                break;
            case kConf:
                expect_dims(is, {kt, hl, wl});
                for (int k = 0; k < kNumTypes; ++k)
                    for (double& v : fields.conf[k]) v = read_f32(is);
                break;
            case kLoc:
                expect_dims(is, {kt, hl, wl, 2});
                for (int k = 0; k < kNumTypes; ++k)
                    for (Vec2& v : fields.loc[k]) {
                        v.x = read_f32(is);
                        v.y = read_f32(is);
                    }
                break;
            case kLogSigma:
                expect_dims(is, {kt, hl, wl});
                for (int k = 0; k < kNumTypes; ++k)
                    for (double& v : fields.log_sigma[k]) v = read_f32(is);
                break;
            case kLogScale:
                expect_dims(is, {kt, hl, wl});
                for (int k = 0; k < kNumTypes; ++k)
                    for (double& v : fields.log_scale[k]) v = read_f32(is);
                break;
        }
    }
    return fields;
}

inline void write_field_file(const std::string& path, const FieldSet& fields) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw FormatError("cannot open for writing: " + path);
    write_field_file(os, fields);
    if (!os) throw FormatError("write failed: " + path);
}

inline FieldSet read_field_file(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw FormatError("cannot open: " + path);
    return read_field_file(is);
}

}  // namespace dsl
