#include "phong_splat/tasks.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "phong_splat/rng.hpp"

namespace phong_splat {

namespace {

constexpr int kLloydIterations = 50;

double dist2(const Vec3d& a, const Vec3d& b) {
    const Vec3d d = a - b;
    return dot(d, d);
}

std::size_t nearest(const std::vector<Vec3d>& centers, const std::vector<bool>& alive, const Vec3d& p,
                    std::size_t skip = std::numeric_limits<std::size_t>::max()) {
    std::size_t best = centers.size();
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < centers.size(); ++c) {
        if (!alive[c] || c == skip) continue;
        const double d = dist2(centers[c], p);
        if (d < best_d) {
            best_d = d;
            best = c;
        }
    }
    return best;
}

}  // namespace

std::vector<LightTask> partition_tasks(const std::vector<Vec3d>& lights, std::size_t num_tasks,
                                       double support_fraction, std::uint64_t seed) {
    const std::size_t n = lights.size();
    if (n < 2) throw std::invalid_argument("partition_tasks: need at least 2 captures");
    if (num_tasks < 1 || num_tasks > n) throw std::invalid_argument("partition_tasks: num_tasks must lie in [1, captures]");
    if (!(support_fraction > 0.0 && support_fraction < 1.0)) {
        throw std::invalid_argument("partition_tasks: support_fraction must lie in (0, 1)");
    }
    Rng rng(seed);

    // k-means++ seeding.
    std::vector<Vec3d> centers;
    centers.push_back(lights[rng.below(n)]);
    std::vector<double> d2(n);
    while (centers.size() < num_tasks) {
        double total = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            double best = std::numeric_limits<double>::infinity();
            for (const Vec3d& c : centers) best = std::min(best, dist2(c, lights[i]));
            d2[i] = best;
            total += best;
        }
        std::size_t pick = 0;
        if (total > 0.0) {
            double r = rng.uniform() * total;
            for (pick = 0; pick + 1 < n; ++pick) {
                r -= d2[pick];
                if (r < 0.0) break;
            }
        } else {
            pick = rng.below(n);
        }
        centers.push_back(lights[pick]);
    }

    std::vector<bool> alive(num_tasks, true);
    std::vector<std::size_t> label(n, 0);
    for (int it = 0; it < kLloydIterations; ++it) {
        for (std::size_t i = 0; i < n; ++i) label[i] = nearest(centers, alive, lights[i]);
        std::vector<Vec3d> sum(num_tasks, Vec3d{0, 0, 0});
        std::vector<std::size_t> count(num_tasks, 0);
        for (std::size_t i = 0; i < n; ++i) {
            sum[label[i]] = sum[label[i]] + lights[i];
            ++count[label[i]];
        }
        for (std::size_t c = 0; c < num_tasks; ++c) {
            if (count[c] > 0) centers[c] = sum[c] / static_cast<double>(count[c]);
        }
    }

    // Merge clusters that are too small to split into support and query.
    for (;;) {
        std::vector<std::size_t> count(num_tasks, 0);
        for (std::size_t l : label) ++count[l];
        std::size_t small = num_tasks;
        for (std::size_t c = 0; c < num_tasks; ++c) {
            if (alive[c] && count[c] < 2) {
                small = c;
                break;
            }
        }
        if (small == num_tasks) break;
        alive[small] = false;
        if (count[small] == 0) continue;
        const std::size_t target = nearest(centers, alive, centers[small], small);
        if (target == centers.size()) throw std::logic_error("partition_tasks: no cluster left to merge into");
        for (std::size_t& l : label) {
            if (l == small) l = target;
        }
    }

    std::vector<LightTask> tasks;
    for (std::size_t c = 0; c < num_tasks; ++c) {
        if (!alive[c]) continue;
        LightTask t;
        t.id = tasks.size();
        for (std::size_t i = 0; i < n; ++i) {
            if (label[i] == c) t.members.push_back(i);
        }
        if (t.members.empty()) continue;
        std::vector<std::size_t> shuffled = t.members;
        rng.shuffle(shuffled);
        const auto size = shuffled.size();
        std::size_t support = static_cast<std::size_t>(std::ceil(support_fraction * static_cast<double>(size)));
        support = std::clamp<std::size_t>(support, 1, size - 1);
        t.support.assign(shuffled.begin(), shuffled.begin() + static_cast<std::ptrdiff_t>(support));
        t.query.assign(shuffled.begin() + static_cast<std::ptrdiff_t>(support), shuffled.end());
        std::sort(t.support.begin(), t.support.end());
        std::sort(t.query.begin(), t.query.end());
        tasks.push_back(std::move(t));
    }
    return tasks;
}

std::vector<LightTask> partition_tasks(const Dataset& dataset, std::size_t num_tasks, double support_fraction,
                                       std::uint64_t seed) {
    std::vector<Vec3d> lights;
    lights.reserve(dataset.size());
    for (const auto& c : dataset.captures) lights.push_back(c.light.position);
    return partition_tasks(lights, num_tasks, support_fraction, seed);
}

}  // namespace phong_splat
