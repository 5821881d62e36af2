#pragma once
#include <array>
#include <cstdint>
#include <memory>
#include <utility>
#include <vector>

#include "oacnn/coords.hpp"
#include "oacnn/errors.hpp"
#include "oacnn/hash.hpp"

namespace oacnn {

// Precomputed (input_row -> output_row) pairs per kernel offset. Offsets are
// enumerated x-major: for odd kernels dx,dy,dz in [-r, r], for the strided
// 2x2x2 kernel dx,dy,dz in {0, 1}. Within one offset every input row and every
// output row appears at most once, which makes per-offset parallel gathers and
// scatters write-disjoint.
struct KernelMap {
    int kernel_size = 3;
    int stride = 1; // stride of the input tensor
    std::vector<std::vector<std::pair<int, int>>> pairs;

    int offset_count() const { return int(pairs.size()); }
    std::size_t pair_count() const {
        std::size_t n = 0;
        for (const auto &p : pairs) n += p.size();
        return n;
    }
};

// Offset displacement for an odd (submanifold) kernel, in kernel cells.
inline std::array<int, 3> submanifold_offset(int kernel_size, int index) {
    const int r = kernel_size / 2;
    const int dz = index % kernel_size;
    const int dy = (index / kernel_size) % kernel_size;
    const int dx = index / (kernel_size * kernel_size);
    return {dx - r, dy - r, dz - r};
}

// Pairs (j -> i) exist iff p_j = p_i + offset * stride and both voxels are
// occupied; the output coordinate set equals the input set.
inline KernelMap build_submanifold_map(const std::vector<VoxelCoord> &coords, int stride,
                                       const HashIndex &index, int kernel_size = 3) {
    if (kernel_size < 1 || kernel_size % 2 == 0)
        throw ConfigError("submanifold kernel size must be odd, got " +
                          std::to_string(kernel_size));

    KernelMap map;
    map.kernel_size = kernel_size;
    map.stride = stride;
    const int volume = kernel_size * kernel_size * kernel_size;
    map.pairs.resize(std::size_t(volume));

    const int n = int(coords.size());
#pragma omp parallel for schedule(dynamic) if (volume > 1)
    for (int o = 0; o < volume; ++o) {
        const auto off = submanifold_offset(kernel_size, o);
        auto &list = map.pairs[std::size_t(o)];
        for (int i = 0; i < n; ++i) {
            VoxelCoord nb = coords[std::size_t(i)];
            nb.x += std::int32_t(off[0] * stride);
            nb.y += std::int32_t(off[1] * stride);
            nb.z += std::int32_t(off[2] * stride);
            if (auto j = index.lookup(nb)) list.emplace_back(*j, i);
        }
    }
    return map;
}

template <class Real>
KernelMap build_submanifold_map(const SparseTensor<Real> &t, const HashIndex &index,
                                int kernel_size = 3) {
    return build_submanifold_map(t.coords, t.stride, index, kernel_size);
}

struct StridedMap {
    KernelMap map;                      // 8 offsets, kernel_size 2
    std::vector<VoxelCoord> out_coords; // canonical order, stride doubled
    int out_stride = 2;
};

// Factor-2-per-axis downsampling map: output cells are the occupied parent
// cells at twice the stride; each input voxel connects to its parent with the
// kernel offset given by its position inside the 2x2x2 cell.
inline StridedMap build_strided_map(const std::vector<VoxelCoord> &coords, int stride) {
    StridedMap out;
    out.out_stride = stride * 2;
    out.map.kernel_size = 2;
    out.map.stride = stride;
    out.map.pairs.resize(8);

    const int n = int(coords.size());
    const int span = stride * 2;
    std::vector<VoxelCoord> parent{};
    parent.resize(std::size_t(n));
    for (int i = 0; i < n; ++i) {
        const VoxelCoord &c = coords[std::size_t(i)];
        parent[std::size_t(i)] = VoxelCoord{std::int32_t(floor_div(c.x, span) * span),
                                            std::int32_t(floor_div(c.y, span) * span),
                                            std::int32_t(floor_div(c.z, span) * span), c.batch};
    }

    out.out_coords = parent;
    std::sort(out.out_coords.begin(), out.out_coords.end(), coord_less);
    out.out_coords.erase(std::unique(out.out_coords.begin(), out.out_coords.end()),
                         out.out_coords.end());

    HashIndex parent_index(out.out_coords);
    for (int i = 0; i < n; ++i) {
        const VoxelCoord &c = coords[std::size_t(i)];
        const VoxelCoord &p = parent[std::size_t(i)];
        const int dx = (c.x - p.x) / stride;
        const int dy = (c.y - p.y) / stride;
        const int dz = (c.z - p.z) / stride;
        const int o = (dx * 2 + dy) * 2 + dz;
        out.map.pairs[std::size_t(o)].emplace_back(i, *parent_index.lookup(p));
    }
    return out;
}

template <class Real>
StridedMap build_strided_map(const SparseTensor<Real> &t) {
    return build_strided_map(t.coords, t.stride);
}

} // namespace oacnn
