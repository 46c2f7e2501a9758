#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "phong_splat/scene.hpp"

namespace phong_splat {

struct LightTask {
    std::size_t id = 0;
    std::vector<std::size_t> members;  // capture indices, ascending
    std::vector<std::size_t> support;
    std::vector<std::size_t> query;
};

// Groups captures by light position with seeded k-means (50 Lloyd steps);
// clusters with fewer than two captures join their nearest cluster. Each
// cluster is shuffled and split into ceil(fraction * size) support captures,
// keeping at least one query capture.
std::vector<LightTask> partition_tasks(const Dataset& dataset, std::size_t num_tasks, double support_fraction,
                                       std::uint64_t seed);
std::vector<LightTask> partition_tasks(const std::vector<Vec3d>& lights, std::size_t num_tasks,
                                       double support_fraction, std::uint64_t seed);

}  // namespace phong_splat
