#pragma once
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <numeric>
#include <vector>

#include "oacnn/coords.hpp"
#include "oacnn/errors.hpp"
#include "oacnn/matrix.hpp"

namespace oacnn {

inline constexpr double kDefaultVoxelSize = 0.02; // meters

struct PointCloud {
    std::vector<std::array<double, 3>> positions; // meters
    Matrix<double> features;                      // n x d, e.g. RGB in [0,1]
    std::vector<int> labels;                      // empty or one class id per point

    int size() const { return int(positions.size()); }
    int channels() const { return features.cols; }
};

// Quantizes a point cloud to voxels at stride 1. Points falling into the same
// cell have their features averaged; the voxel label is the majority vote with
// ties broken by the smallest class id. Output is in canonical coordinate
// order.
template <class Real>
SparseTensor<Real> voxelize(const PointCloud &pc, double voxel_size = kDefaultVoxelSize) {
    if (pc.size() == 0) throw EmptyInput("voxelize: empty point cloud");
    if (!(voxel_size > 0.0)) throw ConfigError("voxelize: voxel_size must be positive");
    if (!pc.labels.empty() && int(pc.labels.size()) != pc.size())
        throw ShapeError("voxelize: label count does not match point count");

    const int n = pc.size();
    const int d = pc.channels();

    std::vector<VoxelCoord> cell(n);
    for (int i = 0; i < n; ++i) {
        std::int32_t q[3];
        for (int a = 0; a < 3; ++a) {
            const double p = pc.positions[std::size_t(i)][std::size_t(a)];
            if (!std::isfinite(p))
                throw InvalidGeometry("voxelize: non-finite coordinate at point " +
                                      std::to_string(i));
            const double f = std::floor(p / voxel_size);
            if (f < double(std::numeric_limits<std::int32_t>::min()) ||
                f > double(std::numeric_limits<std::int32_t>::max()))
                throw CoordOverflow("voxelize: quantized coordinate exceeds 32-bit range");
            q[a] = std::int32_t(f);
        }
        cell[std::size_t(i)] = VoxelCoord{q[0], q[1], q[2], 0};
    }

    // Group points by cell in canonical order.
    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](int a, int b) { return coord_less(cell[a], cell[b]); });

    SparseTensor<Real> out;
    out.stride = 1;
    const bool labeled = !pc.labels.empty();

    std::vector<std::vector<double>> feat_rows;
    std::vector<int> voxel_labels;
    int i = 0;
    while (i < n) {
        int j = i;
        while (j < n && cell[order[j]] == cell[order[i]]) ++j;
        std::vector<double> mean(std::size_t(d), 0.0);
        std::map<int, int> votes;
        for (int k = i; k < j; ++k) {
            const double *row = pc.features.row(order[k]);
            for (int c = 0; c < d; ++c) mean[std::size_t(c)] += row[c];
            if (labeled) ++votes[pc.labels[std::size_t(order[k])]];
        }
        for (int c = 0; c < d; ++c) mean[std::size_t(c)] /= double(j - i);
        out.coords.push_back(cell[order[i]]);
        feat_rows.push_back(std::move(mean));
        if (labeled) {
            // std::map iteration is ascending, so the first maximal count wins
            // = majority vote with smallest-id tie break.
            int best_label = 0, best_count = -1;
            for (const auto &[label, count] : votes)
                if (count > best_count) { best_label = label; best_count = count; }
            voxel_labels.push_back(best_label);
        }
        i = j;
    }

    const int nv = int(out.coords.size());
    out.features = Matrix<Real>(nv, d);
    for (int r = 0; r < nv; ++r)
        for (int c = 0; c < d; ++c) out.features(r, c) = Real(feat_rows[std::size_t(r)][std::size_t(c)]);
    out.labels = std::move(voxel_labels);
    return out;
}

// Non-overlapping partition of a voxel set into axis-aligned cubes of side
// `grid_size` (base voxel units). Grids are keyed per batch element, compacted
// to dense ids in ascending key order, and never empty.
struct GridPartition {
    int grid_size = 1;
    std::vector<int> grid_ids;       // per voxel: containing grid id
    std::vector<int> member_offsets; // CSR offsets, grid_count()+1 entries
    std::vector<int> members;        // voxel rows grouped by grid, ascending within a grid

    int grid_count() const { return int(member_offsets.size()) - 1; }
    int member_count(int g) const { return member_offsets[std::size_t(g) + 1] - member_offsets[std::size_t(g)]; }
    const int *members_of(int g) const { return members.data() + member_offsets[std::size_t(g)]; }
};

inline GridPartition partition(const std::vector<VoxelCoord> &coords, int stride, int grid_size) {
    if (grid_size < 1 || grid_size % stride != 0)
        throw InvalidGridSize("partition: grid size " + std::to_string(grid_size) +
                              " is not a positive multiple of stride " + std::to_string(stride));

    const int n = int(coords.size());
    std::vector<VoxelCoord> key{};
    key.resize(std::size_t(n));
    for (int i = 0; i < n; ++i) {
        key[std::size_t(i)] = VoxelCoord{std::int32_t(floor_div(coords[std::size_t(i)].x, grid_size)),
                                         std::int32_t(floor_div(coords[std::size_t(i)].y, grid_size)),
                                         std::int32_t(floor_div(coords[std::size_t(i)].z, grid_size)),
                                         coords[std::size_t(i)].batch};
    }

    std::vector<int> order{};
    order.resize(std::size_t(n));
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](int a, int b) {
        const VoxelCoord &ka = key[std::size_t(a)], &kb = key[std::size_t(b)];
        if (!(ka == kb)) return coord_less(ka, kb);
        return a < b;
    });

    GridPartition part;
    part.grid_size = grid_size;
    part.grid_ids.assign(std::size_t(n), -1);
    part.members.reserve(std::size_t(n));
    part.member_offsets.push_back(0);
    int i = 0;
    while (i < n) {
        int j = i;
        while (j < n && key[std::size_t(order[std::size_t(j)])] == key[std::size_t(order[std::size_t(i)])]) ++j;
        const int grid = part.grid_count();
        for (int k = i; k < j; ++k) {
            part.members.push_back(order[std::size_t(k)]);
            part.grid_ids[std::size_t(order[std::size_t(k)])] = grid;
        }
        part.member_offsets.push_back(int(part.members.size()));
        i = j;
    }
    return part;
}

template <class Real>
GridPartition partition(const SparseTensor<Real> &t, int grid_size) {
    return partition(t.coords, t.stride, grid_size);
}

} // namespace oacnn
