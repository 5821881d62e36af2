#pragma once
#include <cmath>
#include <memory>
#include <utility>
#include <vector>

#include "oacnn/geometry.hpp"
#include "oacnn/ops.hpp"

// Adaptive relation convolution at one grid scale. Members of every grid
// form one centroid agent; per-member kernel weights are generated from each
// member's difference to the centroid feature, normalized channel-wise with a
// per-grid stabilized softmax, and applied as a depthwise grid convolution.
//
// Dynamic kernels are stored member-major: an M x d matrix (M = total voxel
// count, rows in partition member order) whose row m is the kernel column of
// member m. Member order groups rows by grid, so per-grid slices are
// contiguous and grids parallelize independently.

namespace oacnn {

template <class Real>
struct ArconvScaleParams {
    ProjUnit<Real> proj;          // d -> d, feeds the centroid pooling
    LinearLayer<Real> weight_gen; // d -> d, generates kernel columns

    ArconvScaleParams() = default;
    ArconvScaleParams(const std::string &name, int channels)
        : proj(name + ".proj", channels, channels),
          weight_gen(name + ".weight_gen", channels, channels) {}

    void init(Rng &rng) {
        proj.init(rng);
        weight_gen.init(rng);
    }
};

// Centroid feature per grid: grid mean of the projected (linear+norm+act)
// member features.
template <class Real>
VarPtr<Real> centroid_features(Tape<Real> *tape, const VarPtr<Real> &x,
                               std::shared_ptr<const GridPartition> part,
                               ArconvScaleParams<Real> &p, NormMode mode) {
    auto projected = p.proj.apply(tape, x, mode);
    return grid_avg_pool(tape, projected, std::move(part));
}

// D[m] = x[member m] - centroid[grid of m], rows in member order.
template <class Real>
VarPtr<Real> member_minus_centroid(Tape<Real> *tape, const VarPtr<Real> &x,
                                   const VarPtr<Real> &centroid,
                                   std::shared_ptr<const GridPartition> part) {
    const int n = x->value.rows, d = x->value.cols;
    if (centroid->value.rows != part->grid_count() || centroid->value.cols != d)
        throw ShapeError("member_minus_centroid: centroid shape mismatch");

    auto y = make_var(Matrix<Real>(n, d));
    const int ng = part->grid_count();
#pragma omp parallel for if (std::size_t(n) * d > 16384)
    for (int g = 0; g < ng; ++g) {
        const Real *ctr = centroid->value.row(g);
        for (int t = part->member_offsets[std::size_t(g)]; t < part->member_offsets[std::size_t(g) + 1]; ++t) {
            const Real *xj = x->value.row(part->members[std::size_t(t)]);
            Real *ym = y->value.row(t);
            for (int c = 0; c < d; ++c) ym[c] = xj[c] - ctr[c];
        }
    }
    detail::record<Real>(tape, [x, centroid, y, part]() {
        const int d = x->value.cols;
        const int ng = part->grid_count();
#pragma omp parallel for if (std::size_t(x->value.rows) * d > 16384)
        for (int g = 0; g < ng; ++g) {
            Real *gc = centroid->grad.row(g);
            for (int t = part->member_offsets[std::size_t(g)]; t < part->member_offsets[std::size_t(g) + 1]; ++t) {
                const Real *gy = y->grad.row(t);
                Real *gx = x->grad.row(part->members[std::size_t(t)]);
                for (int c = 0; c < d; ++c) {
                    gx[c] += gy[c];
                    gc[c] -= gy[c];
                }
            }
        }
    });
    return y;
}

// Unnormalized dynamic kernel: one generated column per member, from its
// difference to the grid centroid.
template <class Real>
VarPtr<Real> relation_weights(Tape<Real> *tape, const VarPtr<Real> &x,
                              std::shared_ptr<const GridPartition> part,
                              const VarPtr<Real> &centroid, ArconvScaleParams<Real> &p) {
    auto diff = member_minus_centroid(tape, x, centroid, std::move(part));
    return p.weight_gen.apply(tape, diff);
}

// Channel-wise softmax across each grid's members, stabilized by subtracting
// the grid's global max. The subtraction cancels in the quotient, so the
// stabilized and plain forms agree analytically; `stabilize=false` exists to
// check that numerically.
template <class Real>
VarPtr<Real> normalize_kernel(Tape<Real> *tape, const VarPtr<Real> &w,
                              std::shared_ptr<const GridPartition> part, bool stabilize = true) {
    const int n = w->value.rows, d = w->value.cols;
    if (int(part->members.size()) != n)
        throw ShapeError("normalize_kernel: kernel rows do not match partition members");

    auto y = make_var(Matrix<Real>(n, d));
    const int ng = part->grid_count();
    bool finite = true;
#pragma omp parallel for schedule(static) reduction(&& : finite) if (std::size_t(n) * d > 8192)
    for (int g = 0; g < ng; ++g) {
        const int lo = part->member_offsets[std::size_t(g)];
        const int hi = part->member_offsets[std::size_t(g) + 1];
        Real grid_max = 0;
        if (stabilize) {
            grid_max = w->value(lo, 0);
            for (int t = lo; t < hi; ++t)
                for (int c = 0; c < d; ++c) {
                    const Real v = w->value(t, c);
                    if (!std::isfinite(double(v))) finite = false;
                    if (v > grid_max) grid_max = v;
                }
        } else {
            for (int t = lo; t < hi; ++t)
                for (int c = 0; c < d; ++c)
                    if (!std::isfinite(double(w->value(t, c)))) finite = false;
        }
        if (!finite) continue;
        for (int c = 0; c < d; ++c) {
            Real sum = 0;
            for (int t = lo; t < hi; ++t) {
                const Real e = std::exp(w->value(t, c) - grid_max);
                y->value(t, c) = e;
                sum += e;
            }
            const Real inv = Real(1) / sum;
            for (int t = lo; t < hi; ++t) y->value(t, c) *= inv;
        }
    }
    if (!finite) throw NumericError("normalize_kernel: non-finite kernel weight");

    detail::record<Real>(tape, [w, y, part]() {
        const int d = w->value.cols;
        const int ng = part->grid_count();
#pragma omp parallel for if (std::size_t(w->value.rows) * d > 8192)
        for (int g = 0; g < ng; ++g) {
            const int lo = part->member_offsets[std::size_t(g)];
            const int hi = part->member_offsets[std::size_t(g) + 1];
            for (int c = 0; c < d; ++c) {
                Real dot = 0;
                for (int t = lo; t < hi; ++t) dot += y->grad(t, c) * y->value(t, c);
                for (int t = lo; t < hi; ++t)
                    w->grad(t, c) += y->value(t, c) * (y->grad(t, c) - dot);
            }
        }
    });
    return y;
}

// Depthwise grid convolution: o[g][c] = sum over members m of grid g of
// wn[m][c] * x[member m][c]. One output vector per grid.
template <class Real>
VarPtr<Real> grid_depthwise(Tape<Real> *tape, const VarPtr<Real> &wn, const VarPtr<Real> &x,
                            std::shared_ptr<const GridPartition> part) {
    const int d = x->value.cols;
    if (wn->value.cols != d || int(part->members.size()) != wn->value.rows ||
        int(part->grid_ids.size()) != x->value.rows)
        throw ShapeError("grid_depthwise: kernel/partition/input mismatch");

    const int ng = part->grid_count();
    auto y = make_var(Matrix<Real>(ng, d));
#pragma omp parallel for if (std::size_t(x->value.rows) * d > 16384)
    for (int g = 0; g < ng; ++g) {
        Real *yg = y->value.row(g);
        for (int t = part->member_offsets[std::size_t(g)]; t < part->member_offsets[std::size_t(g) + 1]; ++t) {
            const Real *xm = x->value.row(part->members[std::size_t(t)]);
            const Real *wm = wn->value.row(t);
            for (int c = 0; c < d; ++c) yg[c] += wm[c] * xm[c];
        }
    }
    detail::record<Real>(tape, [wn, x, y, part]() {
        const int d = x->value.cols;
        const int ng = part->grid_count();
#pragma omp parallel for if (std::size_t(x->value.rows) * d > 16384)
        for (int g = 0; g < ng; ++g) {
            const Real *gy = y->grad.row(g);
            for (int t = part->member_offsets[std::size_t(g)]; t < part->member_offsets[std::size_t(g) + 1]; ++t) {
                const int m = part->members[std::size_t(t)];
                const Real *xm = x->value.row(m);
                const Real *wm = wn->value.row(t);
                Real *gw = wn->grad.row(t);
                Real *gx = x->grad.row(m);
                for (int c = 0; c < d; ++c) {
                    gw[c] += gy[c] * xm[c];
                    gx[c] += gy[c] * wm[c];
                }
            }
        }
    });
    return y;
}

// Full ARConv at one scale on an existing partition: centroid formation,
// relation kernel generation, stabilized normalization, depthwise grid
// convolution. Returns one feature vector per grid.
template <class Real>
VarPtr<Real> arconv_scale(Tape<Real> *tape, const VarPtr<Real> &x,
                          std::shared_ptr<const GridPartition> part, ArconvScaleParams<Real> &p,
                          NormMode mode) {
    auto ctr = centroid_features(tape, x, part, p, mode);
    auto w = relation_weights(tape, x, part, ctr, p);
    auto wn = normalize_kernel(tape, w, part);
    return grid_depthwise(tape, wn, x, part);
}

// Convenience overload that also builds the partition for grid size g.
template <class Real>
std::pair<VarPtr<Real>, std::shared_ptr<const GridPartition>>
arconv_scale(Tape<Real> *tape, const VarPtr<Real> &x, const std::vector<VoxelCoord> &coords,
             int stride, int grid_size, ArconvScaleParams<Real> &p, NormMode mode) {
    auto part = std::make_shared<const GridPartition>(partition(coords, stride, grid_size));
    auto out = arconv_scale(tape, x, part, p, mode);
    return {out, part};
}

} // namespace oacnn
