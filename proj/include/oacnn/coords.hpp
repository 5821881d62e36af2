#pragma once
#include <algorithm>
#include <cstdint>
#include <numeric>
#include <tuple>
#include <vector>

#include "oacnn/matrix.hpp"

namespace oacnn {

struct VoxelCoord {
    std::int32_t x = 0, y = 0, z = 0;
    std::int32_t batch = 0;

    friend bool operator==(const VoxelCoord &, const VoxelCoord &) = default;
};

// Canonical order used for every externally visible voxel list.
inline bool coord_less(const VoxelCoord &a, const VoxelCoord &b) {
    return std::tie(a.batch, a.x, a.y, a.z) < std::tie(b.batch, b.x, b.y, b.z);
}

// Floor division, consistent across the origin for negative coordinates.
inline std::int64_t floor_div(std::int64_t v, std::int64_t d) {
    std::int64_t q = v / d;
    if ((v % d) != 0 && ((v < 0) != (d < 0))) --q;
    return q;
}

// Occupied voxels with per-voxel feature vectors at one stride level.
// Invariants: coords are distinct, sorted canonically, every component is a
// multiple of `stride`; labels is empty or has one entry per voxel.
template <class Real>
struct SparseTensor {
    std::vector<VoxelCoord> coords;
    Matrix<Real> features; // N x d
    int stride = 1;
    std::vector<int> labels;

    int size() const { return int(coords.size()); }
    int channels() const { return features.cols; }
};

// Reorders voxels into canonical (batch,x,y,z) order. Returns the permutation
// applied (new row -> old row).
template <class Real>
std::vector<int> sort_canonical(SparseTensor<Real> &t) {
    const int n = t.size();
    std::vector<int> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    std::sort(perm.begin(), perm.end(),
              [&](int a, int b) { return coord_less(t.coords[a], t.coords[b]); });

    std::vector<VoxelCoord> coords(n);
    Matrix<Real> feats(n, t.channels());
    std::vector<int> labels;
    if (!t.labels.empty()) labels.resize(n);
    for (int i = 0; i < n; ++i) {
        coords[i] = t.coords[perm[i]];
        const Real *src = t.features.row(perm[i]);
        std::copy(src, src + t.channels(), feats.row(i));
        if (!t.labels.empty()) labels[i] = t.labels[perm[i]];
    }
    t.coords = std::move(coords);
    t.features = std::move(feats);
    t.labels = std::move(labels);
    return perm;
}

} // namespace oacnn
