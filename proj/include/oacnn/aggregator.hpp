#pragma once
#include <memory>
#include <utility>
#include <vector>

#include "oacnn/arconv.hpp"
#include "oacnn/ops.hpp"

// Spatially adaptive receptive fields: per-voxel preference weights over the
// K pyramid grid scales, fusion of the broadcast grid outputs with the
// projected voxel feature, and the receptive-field size readout.

namespace oacnn {

template <class Real>
struct AggregatorParams {
    LinearLayer<Real> adp; // d -> K
    ProjUnit<Real> proj;   // d -> d
    ProjUnit<Real> out;    // 2d -> d
    std::vector<int> grid_sizes; // base voxel units, strictly increasing

    AggregatorParams() = default;
    AggregatorParams(const std::string &name, int channels, std::vector<int> sizes)
        : adp(name + ".adp", channels, int(sizes.size())),
          proj(name + ".proj", channels, channels),
          out(name + ".out", 2 * channels, channels), grid_sizes(std::move(sizes)) {
        if (grid_sizes.empty()) throw ConfigError("aggregator: needs at least one grid size");
        for (std::size_t k = 1; k < grid_sizes.size(); ++k)
            if (grid_sizes[k] <= grid_sizes[k - 1])
                throw ConfigError("aggregator: grid sizes must be strictly increasing");
    }

    int scale_count() const { return int(grid_sizes.size()); }

    // Preference weights start uniform: zero-initialized scale selector.
    void init(Rng &rng) {
        proj.init(rng);
        out.init(rng);
        adp.weight.init_constant(Real(0));
        adp.bias.init_constant(Real(0));
    }
};

// Per-voxel softmax preference over the K scales; rows sum to 1.
template <class Real>
VarPtr<Real> preference_weights(Tape<Real> *tape, const VarPtr<Real> &x,
                                AggregatorParams<Real> &p) {
    return row_softmax(tape, p.adp.apply(tape, x));
}

// s[i] = sum_k w[i][k] * outputs_k[grid containing voxel i at scale k].
template <class Real>
VarPtr<Real> scale_mix(
    Tape<Real> *tape, const VarPtr<Real> &w,
    const std::vector<std::pair<VarPtr<Real>, std::shared_ptr<const GridPartition>>> &scales) {
    const int n = w->value.rows;
    const int nk = int(scales.size());
    if (w->value.cols != nk)
        throw ShapeError("scale_mix: preference columns (" + std::to_string(w->value.cols) +
                         ") do not match scale count (" + std::to_string(nk) + ")");
    int d = 0;
    for (int k = 0; k < nk; ++k) {
        const auto &[outputs, part] = scales[std::size_t(k)];
        if (int(part->grid_ids.size()) != n || outputs->value.rows != part->grid_count())
            throw ShapeError("scale_mix: partition/outputs mismatch at scale " + std::to_string(k));
        if (k == 0) d = outputs->value.cols;
        else if (outputs->value.cols != d) throw ShapeError("scale_mix: channel mismatch across scales");
    }

    auto y = make_var(Matrix<Real>(n, d));
    // Fixed ascending scale order keeps the summation deterministic.
    for (int k = 0; k < nk; ++k) {
        const auto &[outputs, part] = scales[std::size_t(k)];
#pragma omp parallel for if (std::size_t(n) * d > 16384)
        for (int i = 0; i < n; ++i) {
            const Real wi = w->value(i, k);
            const Real *og = outputs->value.row(part->grid_ids[std::size_t(i)]);
            Real *yi = y->value.row(i);
            for (int c = 0; c < d; ++c) yi[c] += wi * og[c];
        }
    }

    detail::record<Real>(tape, [w, y, scales]() {
        const int n = w->value.rows, d = y->value.cols;
        const int nk = int(scales.size());
        for (int k = 0; k < nk; ++k) {
            const auto &[outputs, part] = scales[std::size_t(k)];
#pragma omp parallel for if (std::size_t(n) * d > 16384)
            for (int i = 0; i < n; ++i) {
                const Real *og = outputs->value.row(part->grid_ids[std::size_t(i)]);
                const Real *gy = y->grad.row(i);
                Real acc = 0;
                for (int c = 0; c < d; ++c) acc += og[c] * gy[c];
                w->grad(i, k) += acc;
            }
            const int ng = part->grid_count();
#pragma omp parallel for if (std::size_t(n) * d > 16384)
            for (int g = 0; g < ng; ++g) {
                Real *go = outputs->grad.row(g);
                for (int t = part->member_offsets[std::size_t(g)]; t < part->member_offsets[std::size_t(g) + 1]; ++t) {
                    const int i = part->members[std::size_t(t)];
                    const Real wi = w->value(i, k);
                    const Real *gy = y->grad.row(i);
                    for (int c = 0; c < d; ++c) go[c] += wi * gy[c];
                }
            }
        }
    });
    return y;
}

// f'_i = out( proj(f_i) (+)concat sum_k w_ik * o_(grid of i, k) ).
// Coordinates and stride are untouched.
template <class Real>
VarPtr<Real> fuse(
    Tape<Real> *tape, const VarPtr<Real> &x,
    const std::vector<std::pair<VarPtr<Real>, std::shared_ptr<const GridPartition>>> &scales,
    const VarPtr<Real> &w, AggregatorParams<Real> &p, NormMode mode) {
    if (int(scales.size()) != p.scale_count())
        throw ShapeError("fuse: expected " + std::to_string(p.scale_count()) + " scales, got " +
                         std::to_string(scales.size()));
    auto projected = p.proj.apply(tape, x, mode);
    auto mixed = scale_mix(tape, w, scales);
    return p.out.apply(tape, concat_cols(tape, projected, mixed), mode);
}

// r_i = sum_k w_ik * g_k, in base voxel units; always inside [min G, max G].
template <class Real>
std::vector<double> receptive_field_sizes(const Matrix<Real> &w, const std::vector<int> &grid_sizes) {
    if (w.cols != int(grid_sizes.size()))
        throw ShapeError("receptive_field_sizes: weight columns do not match grid sizes");
    std::vector<double> r(std::size_t(w.rows));
    for (int i = 0; i < w.rows; ++i) {
        double acc = 0;
        for (int k = 0; k < w.cols; ++k) acc += double(w(i, k)) * double(grid_sizes[std::size_t(k)]);
        r[std::size_t(i)] = acc;
    }
    return r;
}

} // namespace oacnn
