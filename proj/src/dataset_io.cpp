#include "phong_splat/dataset_io.hpp"

#include <cstdio>
#include <fstream>

#include <json.hpp>

namespace phong_splat {

namespace {

using nlohmann::json;

Vec3d read_vec3(const json& j, const char* key, int frame) {
    if (!j.contains(key)) throw DatasetError(std::string("missing '") + key + "'", frame);
    const json& v = j.at(key);
    if (!v.is_array() || v.size() != 3) throw DatasetError(std::string("'") + key + "' must have 3 numbers", frame);
    try {
        return {v[0].get<double>(), v[1].get<double>(), v[2].get<double>()};
    } catch (const json::exception&) {
        throw DatasetError(std::string("'") + key + "' must have 3 numbers", frame);
    }
}

std::array<double, 16> read_matrix(const json& j, int frame) {
    if (!j.contains("transform_matrix")) throw DatasetError("missing 'transform_matrix'", frame);
    const json& m = j.at("transform_matrix");
    if (!m.is_array() || m.size() != 4) throw DatasetError("'transform_matrix' must be 4x4", frame);
    std::array<double, 16> out{};
    for (std::size_t r = 0; r < 4; ++r) {
        if (!m[r].is_array() || m[r].size() != 4) throw DatasetError("'transform_matrix' must be 4x4", frame);
        for (std::size_t c = 0; c < 4; ++c) out[r * 4 + c] = m[r][c].get<double>();
    }
    return out;
}

}  // namespace

Dataset load_dataset(const std::filesystem::path& dir, bool srgb) {
    const auto manifest_path = dir / kManifestName;
    std::ifstream in(manifest_path);
    if (!in) throw DatasetError("missing manifest '" + manifest_path.string() + "'");
    json root;
    try {
        in >> root;
    } catch (const json::exception& e) {
        throw DatasetError("malformed manifest: " + std::string(e.what()));
    }

    double fx = 0;
    double fy = 0;
    double cx = 0;
    double cy = 0;
    int w = 0;
    int h = 0;
    try {
        fx = root.at("fx").get<double>();
        fy = root.at("fy").get<double>();
        cx = root.at("cx").get<double>();
        cy = root.at("cy").get<double>();
        w = root.at("w").get<int>();
        h = root.at("h").get<int>();
    } catch (const json::exception& e) {
        throw DatasetError("manifest intrinsics: " + std::string(e.what()));
    }
    if (!root.contains("frames") || !root["frames"].is_array()) throw DatasetError("manifest has no 'frames' array");

    Dataset dataset;
    dataset.name = root.value("name", dir.filename().string());
    const json& frames = root["frames"];
    if (frames.empty()) throw DatasetError("manifest has no frames");
    for (std::size_t i = 0; i < frames.size(); ++i) {
        const int fi = static_cast<int>(i);
        const json& f = frames[i];
        if (!f.contains("file_path")) throw DatasetError("missing 'file_path'", fi);
        OLATCapture cap;
        cap.camera = Camera::from_camera_to_world(read_matrix(f, fi), fx, fy, cx, cy, w, h);
        try {
            cap.camera.validate();
        } catch (const std::invalid_argument& e) {
            throw DatasetError(e.what(), fi);
        }
        cap.light.position = read_vec3(f, "light_position", fi);
        cap.light.color = f.contains("light_color") ? read_vec3(f, "light_color", fi) : Vec3d{1, 1, 1};
        try {
            cap.light.validate();
        } catch (const std::invalid_argument& e) {
            throw DatasetError(e.what(), fi);
        }
        cap.split = f.value("split", std::string());
        const auto image_path = dir / f["file_path"].get<std::string>();
        try {
            cap.image = read_png(image_path, srgb);
        } catch (const ImageIoError& e) {
            throw DatasetError(std::string("unreadable image: ") + e.what(), fi);
        }
        if (cap.image.width != w || cap.image.height != h) {
            throw DatasetError("image dimension mismatch: " + std::to_string(cap.image.width) + "x" +
                                   std::to_string(cap.image.height) + " vs manifest " + std::to_string(w) + "x" +
                                   std::to_string(h),
                               fi);
        }
        dataset.captures.push_back(std::move(cap));
    }
    return dataset;
}

void save_dataset(const std::filesystem::path& dir, const Dataset& dataset) {
    if (dataset.captures.empty()) throw DatasetError("cannot save an empty dataset");
    std::filesystem::create_directories(dir);
    const Camera& first = dataset.captures.front().camera;
    json root;
    root["name"] = dataset.name;
    root["fx"] = first.fx;
    root["fy"] = first.fy;
    root["cx"] = first.cx;
    root["cy"] = first.cy;
    root["w"] = first.width;
    root["h"] = first.height;
    json frames = json::array();
    for (std::size_t i = 0; i < dataset.captures.size(); ++i) {
        const OLATCapture& cap = dataset.captures[i];
        const Camera& c = cap.camera;
        if (c.fx != first.fx || c.fy != first.fy || c.cx != first.cx || c.cy != first.cy || c.width != first.width ||
            c.height != first.height) {
            throw DatasetError("captures must share intrinsics", static_cast<int>(i));
        }
        char name[32];
        std::snprintf(name, sizeof(name), "r_%04zu.png", i);
        write_png(dir / name, cap.image);
        const auto m = c.camera_to_world();
        json f;
        f["file_path"] = name;
        f["transform_matrix"] = {{m[0], m[1], m[2], m[3]},
                                 {m[4], m[5], m[6], m[7]},
                                 {m[8], m[9], m[10], m[11]},
                                 {m[12], m[13], m[14], m[15]}};
        f["light_position"] = {cap.light.position.x, cap.light.position.y, cap.light.position.z};
        f["light_color"] = {cap.light.color.x, cap.light.color.y, cap.light.color.z};
        if (!cap.split.empty()) f["split"] = cap.split;
        frames.push_back(std::move(f));
    }
    root["frames"] = std::move(frames);
    std::ofstream out(dir / kManifestName);
    out << root.dump(2) << '\n';
    if (!out) throw DatasetError("failed writing manifest");
}

}  // namespace phong_splat
