#pragma once

#include <fstream>
#include <string>

#include <json.hpp>

#include "dsl/core.hpp"
#include "dsl/decode.hpp"

namespace dsl {

// Run-length encoding of a sorted pixel-index set over row-major pixel order.
inline std::vector<std::pair<std::uint32_t, std::uint32_t>> rle_encode(
    const std::vector<std::uint32_t>& pixels) {
    std::vector<std::pair<std::uint32_t, std::uint32_t>> runs;
    for (std::uint32_t idx : pixels) {
        if (!runs.empty() && runs.back().first + runs.back().second == idx)
            ++runs.back().second;
        else
            runs.push_back({idx, 1});
    }
    return runs;
}

inline std::vector<std::uint32_t> rle_decode(
    const std::vector<std::pair<std::uint32_t, std::uint32_t>>& runs,
    std::size_t num_pixels) {
    std::vector<std::uint32_t> pixels;
    std::uint32_t prev_end = 0;
    bool first = true;
    for (const auto& [start, len] : runs) {
        if (len == 0) throw SchemaError("zero-length RLE run");
        if (!first && start < prev_end)
            throw SchemaError("RLE runs must be strictly ordered and disjoint");
        if (std::uint64_t(start) + len > num_pixels)
            throw SchemaError("RLE run exceeds the grid");
        for (std::uint32_t i = 0; i < len; ++i) pixels.push_back(start + i);
        prev_end = start + len;
        first = false;
    }
    return pixels;
}

namespace scenejson {

using nlohmann::json;

inline json runs_to_json(const std::vector<std::uint32_t>& pixels) {
    json arr = json::array();
    for (const auto& [start, len] : rle_encode(pixels))
        arr.push_back(json::array({start, len}));
    return arr;
}

inline std::vector<std::uint32_t> runs_from_json(const json& arr,
                                                 std::size_t num_pixels) {
    if (!arr.is_array()) throw SchemaError("mask RLE must be an array");
    std::vector<std::pair<std::uint32_t, std::uint32_t>> runs;
    for (const auto& run : arr) {
        if (!run.is_array() || run.size() != 2 || !run[0].is_number_unsigned() ||
            !run[1].is_number_unsigned())
            throw SchemaError("RLE run must be a [start, length] pair");
        runs.push_back({run[0].get<std::uint32_t>(), run[1].get<std::uint32_t>()});
    }
    return rle_decode(runs, num_pixels);
}

inline json keypoint_to_json(const Keypoint& k) {
    return json{{"type", std::string(keypoint_name(k.type))},
                {"x", k.x},
                {"y", k.y},
                {"confidence", k.confidence}};
}

inline Keypoint keypoint_from_json(const json& j, const GridSpec& grid) {
    if (!j.is_object() || !j.contains("type") || !j.contains("x") || !j.contains("y"))
        throw SchemaError("keypoint must carry type, x, and y");
    Keypoint k;
    try {
        k.type = keypoint_id(j.at("type").get<std::string>());
    } catch (const DomainError& e) {
        throw SchemaError(e.what());
    }
    k.x = j.at("x").get<double>();
    k.y = j.at("y").get<double>();
    k.confidence = j.value("confidence", 1.0);
    if (!grid.contains_point({k.x, k.y}))
        throw SchemaError("keypoint outside the grid");
    if (k.confidence < 0.0 || k.confidence > 1.0)
        throw SchemaError("keypoint confidence outside [0,1]");
    return k;
}

inline json grid_to_json(const GridSpec& g) {
    return json{{"width", g.width_hr}, {"height", g.height_hr}, {"stride", g.stride}};
}

inline GridSpec grid_from_json(const json& j) {
    if (!j.is_object() || !j.contains("width") || !j.contains("height") ||
        !j.contains("stride"))
        throw SchemaError("grid must carry width, height, and stride");
    try {
        return GridSpec(j.at("width").get<int>(), j.at("height").get<int>(),
                        j.at("stride").get<int>());
    } catch (const DomainError& e) {
        throw SchemaError(e.what());
    }
}

inline json skeleton_keypoints_to_json(const Skeleton& skel) {
    json arr = json::array();
    for (const auto& part : skel.parts)
        if (part) arr.push_back(keypoint_to_json(*part));
    return arr;
}

inline Skeleton skeleton_from_json(const json& arr, const GridSpec& grid) {
    if (!arr.is_array()) throw SchemaError("keypoints must be an array");
    Skeleton skel;
    for (const auto& kj : arr) {
        const Keypoint k = keypoint_from_json(kj, grid);
        if (k.type >= kNumParts)
            throw SchemaError("player keypoints must be body-part types");
        if (skel.parts[k.type]) throw SchemaError("duplicate keypoint type");
        skel.parts[k.type] = k;
    }
    return skel;
}

}  // namespace scenejson

inline nlohmann::json scene_to_json(const Scene& scene) {
    using scenejson::json;
    json doc;
    doc["grid"] = scenejson::grid_to_json(scene.grid);
    if (scene.court) {
        json poly = json::array();
        for (const Vec2& v : *scene.court) poly.push_back(json::array({v.x, v.y}));
        doc["court"] = poly;
    }
    if (scene.ball_mask) doc["ball_mask"] = scenejson::runs_to_json(*scene.ball_mask);
    json players = json::array();
    for (const auto& player : scene.players)
        players.push_back(
            json{{"mask", scenejson::runs_to_json(player.mask.pixels)},
                 {"keypoints", scenejson::skeleton_keypoints_to_json(player.skeleton)}});
    doc["players"] = players;
    return doc;
}

inline Scene scene_from_json(const nlohmann::json& doc) {
    using scenejson::json;
    if (!doc.is_object() || !doc.contains("grid") || !doc.contains("players"))
        throw SchemaError("scene must carry grid and players");
    Scene scene;
    scene.grid = scenejson::grid_from_json(doc.at("grid"));
    if (doc.contains("court") && !doc.at("court").is_null()) {
        std::vector<Vec2> poly;
        for (const auto& v : doc.at("court")) {
            if (!v.is_array() || v.size() != 2)
                throw SchemaError("court vertex must be an [x, y] pair");
            poly.push_back({v[0].get<double>(), v[1].get<double>()});
        }
        if (poly.size() < 3) throw SchemaError("court polygon needs >= 3 vertices");
        scene.court = std::move(poly);
    }
    if (doc.contains("ball_mask") && !doc.at("ball_mask").is_null())
        scene.ball_mask =
            scenejson::runs_from_json(doc.at("ball_mask"), scene.grid.num_pixels());
    int next_id = 0;
    for (const auto& pj : doc.at("players")) {
        if (!pj.is_object() || !pj.contains("mask") || !pj.contains("keypoints"))
            throw SchemaError("player must carry mask and keypoints");
        Player player;
        player.mask.pixels =
            scenejson::runs_from_json(pj.at("mask"), scene.grid.num_pixels());
        if (player.mask.pixels.empty()) throw SchemaError("empty player mask");
        player.mask.instance_id = next_id;
        player.skeleton = scenejson::skeleton_from_json(pj.at("keypoints"), scene.grid);
        player.skeleton.instance_id = next_id;
        ++next_id;
        scene.players.push_back(std::move(player));
    }
    return scene;
}

// Decoded predictions for one image: same document shape as a scene, plus the
// top-1 ball record.
struct Prediction {
    GridSpec grid;
    std::optional<Keypoint> ball;
    std::vector<Player> players;
};

inline nlohmann::json prediction_to_json(const GridSpec& grid,
                                         const DecodeResult& result) {
    using scenejson::json;
    json doc;
    doc["grid"] = scenejson::grid_to_json(grid);
    if (result.ball) doc["ball"] = scenejson::keypoint_to_json(*result.ball);
    json players = json::array();
    for (std::size_t i = 0; i < result.masks.size(); ++i)
        players.push_back(json{
            {"mask", scenejson::runs_to_json(result.masks[i].pixels)},
            {"keypoints", scenejson::skeleton_keypoints_to_json(result.skeletons[i])},
            {"confidence", result.skeletons[i].confidence()}});
    doc["players"] = players;
    return doc;
}

inline Prediction prediction_from_json(const nlohmann::json& doc) {
    if (!doc.is_object() || !doc.contains("grid") || !doc.contains("players"))
        throw SchemaError("prediction must carry grid and players");
    Prediction pred;
    pred.grid = scenejson::grid_from_json(doc.at("grid"));
    if (doc.contains("ball") && !doc.at("ball").is_null()) {
        Keypoint k = scenejson::keypoint_from_json(doc.at("ball"), pred.grid);
        k.type = kp::ball;
        pred.ball = k;
    }
    int next_id = 0;
    for (const auto& pj : doc.at("players")) {
        if (!pj.is_object() || !pj.contains("mask") || !pj.contains("keypoints"))
            throw SchemaError("player must carry mask and keypoints");
        Player player;
        player.mask.pixels =
            scenejson::runs_from_json(pj.at("mask"), pred.grid.num_pixels());
        player.mask.instance_id = next_id;
        player.skeleton = scenejson::skeleton_from_json(pj.at("keypoints"), pred.grid);
        player.skeleton.instance_id = next_id;
        ++next_id;
        pred.players.push_back(std::move(player));
    }
    return pred;
}

namespace detail {

inline nlohmann::json parse_json_file(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw FormatError("cannot open: " + path);
    nlohmann::json doc = nlohmann::json::parse(is, nullptr, false);
    if (doc.is_discarded()) throw FormatError("invalid JSON: " + path);
    return doc;
}

inline void write_json_file(const std::string& path, const nlohmann::json& doc) {
    std::ofstream os(path);
    if (!os) throw FormatError("cannot open for writing: " + path);
    os << doc.dump(2) << '\n';
    if (!os) throw FormatError("write failed: " + path);
}

}  // namespace detail

inline Scene load_scene(const std::string& path) {
    return scene_from_json(detail::parse_json_file(path));
}

inline void save_scene(const std::string& path, const Scene& scene) {
    detail::write_json_file(path, scene_to_json(scene));
}

inline Prediction load_prediction(const std::string& path) {
    return prediction_from_json(detail::parse_json_file(path));
}

inline void save_prediction(const std::string& path, const GridSpec& grid,
                            const DecodeResult& result) {
    detail::write_json_file(path, prediction_to_json(grid, result));
}

}  // namespace dsl
