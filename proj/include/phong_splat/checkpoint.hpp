#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <vector>

#include "phong_splat/scene.hpp"

namespace phong_splat {

class CheckpointError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

inline constexpr char kCheckpointMagic[4] = {'P', 'H', 'G', 'S'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

// Little-endian: magic "PHGS", u32 version, u64 count, then per point the
// float32 attributes in GaussianPoint field order.
void save_checkpoint(const std::vector<GaussianPoint>& points, const std::filesystem::path& path);
std::vector<GaussianPoint> load_checkpoint(const std::filesystem::path& path);

std::vector<unsigned char> encode_checkpoint(const std::vector<GaussianPoint>& points);
std::vector<GaussianPoint> decode_checkpoint(const std::vector<unsigned char>& bytes);

}  // namespace phong_splat
