#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "phong_splat/scene.hpp"

namespace phong_splat {

class DatasetError : public std::runtime_error {
public:
    DatasetError(const std::string& message, int frame = -1)
        : std::runtime_error(frame >= 0 ? "frame " + std::to_string(frame) + ": " + message : message),
          frame_(frame) {}
    int frame() const { return frame_; }

private:
    int frame_;
};

inline constexpr const char* kManifestName = "transforms.json";

// Reads `<dir>/transforms.json` and the images it references.
Dataset load_dataset(const std::filesystem::path& dir, bool srgb = false);

// Writes one PNG per capture plus the manifest. Every capture must share the
// intrinsics of the first one.
void save_dataset(const std::filesystem::path& dir, const Dataset& dataset);

}  // namespace phong_splat
