#pragma once
#include <cmath>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "oacnn/geometry.hpp"
#include "oacnn/kernel_map.hpp"
#include "oacnn/matrix.hpp"
#include "oacnn/tape.hpp"

// Differentiable primitive layers. Every op runs forward immediately and, when
// a tape is given, records a closure that accumulates gradients into its
// inputs' grad buffers. Parallel loops only ever split write-disjoint outputs
// and keep accumulation order fixed, so results are identical for any thread
// count.

namespace oacnn {

namespace detail {

template <class Real, class F>
struct FnNode final : Tape<Real>::OpNode {
    F fn;
    explicit FnNode(F f) : fn(std::move(f)) {}
    void backward() override { fn(); }
};

template <class Real, class F>
void record(Tape<Real> *tape, F fn) {
    if (tape) tape->record(std::make_unique<FnNode<Real, F>>(std::move(fn)));
}

// Entering an OpenMP region costs microseconds even with an if(false) clause,
// which dwarfs small ops; branch in plain C++ instead. `work` is an estimate
// of total scalar operations.
inline constexpr std::int64_t kParallelGrain = 32768;

template <class F>
void parallel_for(std::int64_t n, std::int64_t work, const F &f) {
    if (work > kParallelGrain && n > 1) {
#pragma omp parallel for schedule(static)
        for (std::int64_t i = 0; i < n; ++i) f(int(i));
    } else {
        for (std::int64_t i = 0; i < n; ++i) f(int(i));
    }
}

} // namespace detail

// ---------------------------------------------------------------------------
// Activation
// ---------------------------------------------------------------------------

template <class Real>
VarPtr<Real> relu(Tape<Real> *tape, const VarPtr<Real> &x) {
    const int n = x->value.rows, d = x->value.cols;
    auto y = make_var(Matrix<Real>(n, d));
    detail::parallel_for(n, std::int64_t(n) * d, [&](int i) {
        const Real *xi = x->value.row(i);
        Real *yi = y->value.row(i);
        for (int c = 0; c < d; ++c) yi[c] = xi[c] > Real(0) ? xi[c] : Real(0);
    });
    detail::record<Real>(tape, [x, y]() {
        const int n = x->value.rows, d = x->value.cols;
        detail::parallel_for(n, std::int64_t(n) * d, [&](int i) {
            const Real *xi = x->value.row(i);
            const Real *gy = y->grad.row(i);
            Real *gx = x->grad.row(i);
            for (int c = 0; c < d; ++c)
                if (xi[c] > Real(0)) gx[c] += gy[c];
        });
    });
    return y;
}

// ---------------------------------------------------------------------------
// Linear
// ---------------------------------------------------------------------------

template <class Real>
VarPtr<Real> linear(Tape<Real> *tape, const VarPtr<Real> &x, ParamTensor<Real> &w,
                    ParamTensor<Real> *b = nullptr) {
    const int n = x->value.rows, din = x->value.cols;
    if (w.shape.size() != 2 || w.dim(0) != din)
        throw ShapeError("linear: weight " + w.name + " expects " +
                         std::to_string(w.shape.empty() ? -1 : w.dim(0)) + " input channels, got " +
                         std::to_string(din));
    const int dout = w.dim(1);
    if (b && int(b->size()) != dout) throw ShapeError("linear: bias shape mismatch for " + b->name);

    auto y = make_var(Matrix<Real>(n, dout));
#pragma omp parallel for if (std::size_t(n) * din * dout > 16384)
    for (int i = 0; i < n; ++i) {
        const Real *xi = x->value.row(i);
        Real *yi = y->value.row(i);
        for (int c = 0; c < dout; ++c) yi[c] = b ? b->value[std::size_t(c)] : Real(0);
        for (int k = 0; k < din; ++k) {
            const Real xv = xi[k];
            const Real *wk = &w.value[std::size_t(k) * dout];
            for (int c = 0; c < dout; ++c) yi[c] += xv * wk[c];
        }
    }

    ParamTensor<Real> *wp = &w, *bp = b;
    detail::record<Real>(tape, [x, y, wp, bp]() {
        const int n = x->value.rows, din = x->value.cols, dout = y->value.cols;
#pragma omp parallel for if (std::size_t(n) * din * dout > 16384)
        for (int i = 0; i < n; ++i) {
            const Real *gy = y->grad.row(i);
            Real *gx = x->grad.row(i);
            for (int k = 0; k < din; ++k) {
                const Real *wk = &wp->value[std::size_t(k) * dout];
                Real acc = 0;
                for (int c = 0; c < dout; ++c) acc += wk[c] * gy[c];
                gx[k] += acc;
            }
        }
#pragma omp parallel for if (std::size_t(n) * din * dout > 16384)
        for (int k = 0; k < din; ++k) {
            Real *gw = &wp->grad[std::size_t(k) * dout];
            for (int i = 0; i < n; ++i) {
                const Real xv = x->value(i, k);
                const Real *gy = y->grad.row(i);
                for (int c = 0; c < dout; ++c) gw[c] += xv * gy[c];
            }
        }
        if (bp) {
            for (int i = 0; i < n; ++i) {
                const Real *gy = y->grad.row(i);
                for (int c = 0; c < dout; ++c) bp->grad[std::size_t(c)] += gy[c];
            }
        }
    });
    return y;
}

// ---------------------------------------------------------------------------
// Batch-style normalization over the voxel dimension, per channel
// ---------------------------------------------------------------------------

enum class NormMode { kTrain, kEval };

template <class Real>
struct NormParams {
    ParamTensor<Real> scale, shift;
    std::vector<Real> running_mean, running_var;
    double eps = 1e-5;
    double momentum = 0.1;

    NormParams() = default;
    NormParams(const std::string &name, int channels)
        : scale(name + ".scale", {channels}), shift(name + ".shift", {channels}),
          running_mean(std::size_t(channels), Real(0)), running_var(std::size_t(channels), Real(1)) {
        scale.init_constant(Real(1));
    }
    int channels() const { return int(scale.size()); }
};

template <class Real>
VarPtr<Real> normalize(Tape<Real> *tape, const VarPtr<Real> &x, NormParams<Real> &p, NormMode mode) {
    const int n = x->value.rows, d = x->value.cols;
    if (p.channels() != d) throw ShapeError("normalize: " + p.scale.name + " has " +
                                            std::to_string(p.channels()) + " channels, input has " +
                                            std::to_string(d));
    if (n < 1) throw EmptyInput("normalize: empty input");

    auto y = make_var(Matrix<Real>(n, d));
    const Real eps = Real(p.eps);

    if (mode == NormMode::kEval) {
#pragma omp parallel for if (std::size_t(n) * d > 16384)
        for (int i = 0; i < n; ++i) {
            const Real *xi = x->value.row(i);
            Real *yi = y->value.row(i);
            for (int c = 0; c < d; ++c) {
                const Real inv_std = Real(1) / std::sqrt(p.running_var[std::size_t(c)] + eps);
                yi[c] = p.scale.value[std::size_t(c)] * (xi[c] - p.running_mean[std::size_t(c)]) * inv_std +
                        p.shift.value[std::size_t(c)];
            }
        }
        NormParams<Real> *pp = &p;
        detail::record<Real>(tape, [x, y, pp, eps]() {
            const int n = x->value.rows, d = x->value.cols;
            for (int c = 0; c < d; ++c) {
                const Real inv_std = Real(1) / std::sqrt(pp->running_var[std::size_t(c)] + eps);
                const Real mean = pp->running_mean[std::size_t(c)];
                Real dscale = 0, dshift = 0;
                for (int i = 0; i < n; ++i) {
                    const Real gy = y->grad(i, c);
                    dscale += gy * (x->value(i, c) - mean) * inv_std;
                    dshift += gy;
                    x->grad(i, c) += gy * pp->scale.value[std::size_t(c)] * inv_std;
                }
                pp->scale.grad[std::size_t(c)] += dscale;
                pp->shift.grad[std::size_t(c)] += dshift;
            }
        });
        return y;
    }

    // Training mode: batch statistics, biased variance.
    std::vector<Real> mean(std::size_t(d), Real(0)), inv_std(std::size_t(d), Real(0));
    auto xhat = std::make_shared<Matrix<Real>>(n, d);
#pragma omp parallel for if (std::size_t(n) * d > 16384)
    for (int c = 0; c < d; ++c) {
        Real m = 0;
        for (int i = 0; i < n; ++i) m += x->value(i, c);
        m /= Real(n);
        Real v = 0;
        for (int i = 0; i < n; ++i) {
            const Real t = x->value(i, c) - m;
            v += t * t;
        }
        v /= Real(n);
        mean[std::size_t(c)] = m;
        inv_std[std::size_t(c)] = Real(1) / std::sqrt(v + eps);
        p.running_mean[std::size_t(c)] =
            Real(1 - p.momentum) * p.running_mean[std::size_t(c)] + Real(p.momentum) * m;
        p.running_var[std::size_t(c)] =
            Real(1 - p.momentum) * p.running_var[std::size_t(c)] + Real(p.momentum) * v;
    }
#pragma omp parallel for if (std::size_t(n) * d > 16384)
    for (int i = 0; i < n; ++i) {
        const Real *xi = x->value.row(i);
        Real *yi = y->value.row(i);
        Real *xh = xhat->row(i);
        for (int c = 0; c < d; ++c) {
            xh[c] = (xi[c] - mean[std::size_t(c)]) * inv_std[std::size_t(c)];
            yi[c] = p.scale.value[std::size_t(c)] * xh[c] + p.shift.value[std::size_t(c)];
        }
    }

    NormParams<Real> *pp = &p;
    detail::record<Real>(tape, [x, y, pp, xhat, inv_std = std::move(inv_std)]() {
        const int n = x->value.rows, d = x->value.cols;
#pragma omp parallel for if (std::size_t(n) * d > 8192)
        for (int c = 0; c < d; ++c) {
            Real sum_gy = 0, sum_gy_xhat = 0;
            for (int i = 0; i < n; ++i) {
                const Real gy = y->grad(i, c);
                sum_gy += gy;
                sum_gy_xhat += gy * (*xhat)(i, c);
            }
            pp->scale.grad[std::size_t(c)] += sum_gy_xhat;
            pp->shift.grad[std::size_t(c)] += sum_gy;
            const Real g = pp->scale.value[std::size_t(c)] * inv_std[std::size_t(c)] / Real(n);
            for (int i = 0; i < n; ++i) {
                const Real gy = y->grad(i, c);
                x->grad(i, c) += g * (Real(n) * gy - sum_gy - (*xhat)(i, c) * sum_gy_xhat);
            }
        }
    });
    return y;
}

// ---------------------------------------------------------------------------
// Sparse convolution driven by a kernel map (submanifold and strided share
// the same gather/scatter core; they differ only in the map and output rows)
// ---------------------------------------------------------------------------

template <class Real>
VarPtr<Real> conv_with_map(Tape<Real> *tape, const VarPtr<Real> &x, ParamTensor<Real> &w,
                           std::shared_ptr<const KernelMap> map, int out_rows) {
    const int din = x->value.cols;
    const int volume = map->offset_count();
    if (w.shape.size() != 3 || w.dim(0) != volume || w.dim(1) != din)
        throw ShapeError("conv: weight " + w.name + " incompatible with map/input (" +
                         std::to_string(volume) + " offsets, " + std::to_string(din) +
                         " input channels)");
    const int dout = w.dim(2);

    auto y = make_var(Matrix<Real>(out_rows, dout));
    // Offsets are applied in fixed order; within one offset all output rows
    // are distinct, so the pair loop is write-disjoint.
    for (int o = 0; o < volume; ++o) {
        const auto &list = map->pairs[std::size_t(o)];
        const Real *wo = &w.value[std::size_t(o) * din * dout];
        const std::int64_t np = std::int64_t(list.size());
#pragma omp parallel for if (np * din * dout > 16384)
        for (std::int64_t t = 0; t < np; ++t) {
            const auto [j, i] = list[std::size_t(t)];
            const Real *xj = x->value.row(j);
            Real *yi = y->value.row(i);
            for (int k = 0; k < din; ++k) {
                const Real xv = xj[k];
                const Real *wk = wo + std::size_t(k) * dout;
                for (int c = 0; c < dout; ++c) yi[c] += xv * wk[c];
            }
        }
    }

    ParamTensor<Real> *wp = &w;
    detail::record<Real>(tape, [x, y, wp, map]() {
        const int din = x->value.cols, dout = y->value.cols;
        const int volume = map->offset_count();
        for (int o = 0; o < volume; ++o) {
            const auto &list = map->pairs[std::size_t(o)];
            const Real *wo = &wp->value[std::size_t(o) * din * dout];
            const std::int64_t np = std::int64_t(list.size());
            // Within one offset input rows are distinct as well.
#pragma omp parallel for if (np * din * dout > 16384)
            for (std::int64_t t = 0; t < np; ++t) {
                const auto [j, i] = list[std::size_t(t)];
                const Real *gy = y->grad.row(i);
                Real *gx = x->grad.row(j);
                for (int k = 0; k < din; ++k) {
                    const Real *wk = wo + std::size_t(k) * dout;
                    Real acc = 0;
                    for (int c = 0; c < dout; ++c) acc += wk[c] * gy[c];
                    gx[k] += acc;
                }
            }
        }
        // dW: each (offset, input channel) row is owned by one iteration.
        const std::int64_t vk = std::int64_t(volume) * din;
#pragma omp parallel for if (vk * dout > 2048)
        for (std::int64_t ok = 0; ok < vk; ++ok) {
            const int o = int(ok / din), k = int(ok % din);
            const auto &list = map->pairs[std::size_t(o)];
            Real *gw = &wp->grad[(std::size_t(o) * din + std::size_t(k)) * dout];
            for (const auto &[j, i] : list) {
                const Real xv = x->value(j, k);
                const Real *gy = y->grad.row(i);
                for (int c = 0; c < dout; ++c) gw[c] += xv * gy[c];
            }
        }
    });
    return y;
}

// Coordinate set and stride are unchanged; pairs come from build_submanifold_map.
template <class Real>
VarPtr<Real> submanifold_conv(Tape<Real> *tape, const VarPtr<Real> &x, ParamTensor<Real> &w,
                              std::shared_ptr<const KernelMap> map) {
    return conv_with_map(tape, x, w, std::move(map), x->value.rows);
}

// Downsampling convolution; output rows follow the strided map's parent cells.
template <class Real>
VarPtr<Real> strided_conv(Tape<Real> *tape, const VarPtr<Real> &x, ParamTensor<Real> &w,
                          const std::shared_ptr<const StridedMap> &smap) {
    auto map = std::shared_ptr<const KernelMap>(smap, &smap->map);
    return conv_with_map(tape, x, w, std::move(map), int(smap->out_coords.size()));
}

// ---------------------------------------------------------------------------
// Grid average pooling: one mean feature per partition grid
// ---------------------------------------------------------------------------

template <class Real>
VarPtr<Real> grid_avg_pool(Tape<Real> *tape, const VarPtr<Real> &x,
                           std::shared_ptr<const GridPartition> part) {
    const int d = x->value.cols;
    const int ng = part->grid_count();
    if (int(part->grid_ids.size()) != x->value.rows)
        throw ShapeError("grid_avg_pool: partition built on a different tensor");

    auto y = make_var(Matrix<Real>(ng, d));
#pragma omp parallel for if (std::size_t(x->value.rows) * d > 16384)
    for (int g = 0; g < ng; ++g) {
        Real *yg = y->value.row(g);
        const int cnt = part->member_count(g);
        const int *mem = part->members_of(g);
        for (int t = 0; t < cnt; ++t) {
            const Real *xj = x->value.row(mem[t]);
            for (int c = 0; c < d; ++c) yg[c] += xj[c];
        }
        const Real inv = Real(1) / Real(cnt);
        for (int c = 0; c < d; ++c) yg[c] *= inv;
    }

    detail::record<Real>(tape, [x, y, part]() {
        const int d = x->value.cols;
        const int ng = part->grid_count();
#pragma omp parallel for if (std::size_t(x->value.rows) * d > 16384)
        for (int g = 0; g < ng; ++g) {
            const Real *gy = y->grad.row(g);
            const int cnt = part->member_count(g);
            const int *mem = part->members_of(g);
            const Real inv = Real(1) / Real(cnt);
            for (int t = 0; t < cnt; ++t) {
                Real *gx = x->grad.row(mem[t]);
                for (int c = 0; c < d; ++c) gx[c] += gy[c] * inv;
            }
        }
    });
    return y;
}

// ---------------------------------------------------------------------------
// Structural ops
// ---------------------------------------------------------------------------

template <class Real>
VarPtr<Real> concat_cols(Tape<Real> *tape, const VarPtr<Real> &a, const VarPtr<Real> &b) {
    if (a->value.rows != b->value.rows)
        throw ShapeError("concat: row mismatch " + std::to_string(a->value.rows) + " vs " +
                         std::to_string(b->value.rows));
    const int n = a->value.rows, da = a->value.cols, db = b->value.cols;
    auto y = make_var(Matrix<Real>(n, da + db));
#pragma omp parallel for if (std::size_t(n) * (da + db) > 16384)
    for (int i = 0; i < n; ++i) {
        Real *yi = y->value.row(i);
        const Real *ai = a->value.row(i);
        const Real *bi = b->value.row(i);
        for (int c = 0; c < da; ++c) yi[c] = ai[c];
        for (int c = 0; c < db; ++c) yi[da + c] = bi[c];
    }
    detail::record<Real>(tape, [a, b, y]() {
        const int n = a->value.rows, da = a->value.cols, db = b->value.cols;
#pragma omp parallel for if (std::size_t(n) * (da + db) > 16384)
        for (int i = 0; i < n; ++i) {
            const Real *gy = y->grad.row(i);
            Real *ga = a->grad.row(i);
            Real *gb = b->grad.row(i);
            for (int c = 0; c < da; ++c) ga[c] += gy[c];
            for (int c = 0; c < db; ++c) gb[c] += gy[da + c];
        }
    });
    return y;
}

template <class Real>
VarPtr<Real> add(Tape<Real> *tape, const VarPtr<Real> &a, const VarPtr<Real> &b) {
    if (!a->value.same_shape(b->value)) throw ShapeError("add: shape mismatch");
    const int n = a->value.rows, d = a->value.cols;
    auto y = make_var(Matrix<Real>(n, d));
#pragma omp parallel for if (std::size_t(n) * d > 16384)
    for (int i = 0; i < n; ++i) {
        const Real *ai = a->value.row(i);
        const Real *bi = b->value.row(i);
        Real *yi = y->value.row(i);
        for (int c = 0; c < d; ++c) yi[c] = ai[c] + bi[c];
    }
    detail::record<Real>(tape, [a, b, y]() {
        const int n = a->value.rows, d = a->value.cols;
#pragma omp parallel for if (std::size_t(n) * d > 16384)
        for (int i = 0; i < n; ++i) {
            const Real *gy = y->grad.row(i);
            Real *ga = a->grad.row(i);
            Real *gb = b->grad.row(i);
            for (int c = 0; c < d; ++c) {
                ga[c] += gy[c];
                gb[c] += gy[c];
            }
        }
    });
    return y;
}

// y[i] = x[rows[i]]. Backward scatters through a source-grouped CSR so the
// accumulation order is independent of thread count.
template <class Real>
VarPtr<Real> rows_gather(Tape<Real> *tape, const VarPtr<Real> &x,
                         std::shared_ptr<const std::vector<int>> rows) {
    const int n = int(rows->size()), d = x->value.cols, nsrc = x->value.rows;
    auto y = make_var(Matrix<Real>(n, d));
    for (int i = 0; i < n; ++i) {
        const int src = (*rows)[std::size_t(i)];
        if (src < 0 || src >= nsrc)
            throw TopologyError("rows_gather: source row " + std::to_string(src) +
                                " out of range [0," + std::to_string(nsrc) + ")");
        const Real *xs = x->value.row(src);
        Real *yi = y->value.row(i);
        for (int c = 0; c < d; ++c) yi[c] = xs[c];
    }
    if (tape) {
        auto offsets = std::make_shared<std::vector<int>>(std::size_t(nsrc) + 1, 0);
        auto children = std::make_shared<std::vector<int>>(std::size_t(n));
        for (int i = 0; i < n; ++i) ++(*offsets)[std::size_t((*rows)[std::size_t(i)]) + 1];
        for (int s = 0; s < nsrc; ++s) (*offsets)[std::size_t(s) + 1] += (*offsets)[std::size_t(s)];
        {
            std::vector<int> cursor(*offsets);
            for (int i = 0; i < n; ++i)
                (*children)[std::size_t(cursor[std::size_t((*rows)[std::size_t(i)])]++)] = i;
        }
        detail::record<Real>(tape, [x, y, offsets, children]() {
            const int d = x->value.cols, nsrc = x->value.rows;
#pragma omp parallel for if (std::size_t(y->value.rows) * d > 16384)
            for (int s = 0; s < nsrc; ++s) {
                Real *gx = x->grad.row(s);
                for (int t = (*offsets)[std::size_t(s)]; t < (*offsets)[std::size_t(s) + 1]; ++t) {
                    const Real *gy = y->grad.row((*children)[std::size_t(t)]);
                    for (int c = 0; c < d; ++c) gx[c] += gy[c];
                }
            }
        });
    }
    return y;
}

// Row-wise softmax with per-row max subtraction.
template <class Real>
VarPtr<Real> row_softmax(Tape<Real> *tape, const VarPtr<Real> &x) {
    const int n = x->value.rows, d = x->value.cols;
    auto y = make_var(Matrix<Real>(n, d));
#pragma omp parallel for if (std::size_t(n) * d > 16384)
    for (int i = 0; i < n; ++i) {
        const Real *xi = x->value.row(i);
        Real *yi = y->value.row(i);
        Real mx = xi[0];
        for (int c = 1; c < d; ++c) mx = std::max(mx, xi[c]);
        Real sum = 0;
        for (int c = 0; c < d; ++c) {
            yi[c] = std::exp(xi[c] - mx);
            sum += yi[c];
        }
        const Real inv = Real(1) / sum;
        for (int c = 0; c < d; ++c) yi[c] *= inv;
    }
    detail::record<Real>(tape, [x, y]() {
        const int n = x->value.rows, d = x->value.cols;
#pragma omp parallel for if (std::size_t(n) * d > 16384)
        for (int i = 0; i < n; ++i) {
            const Real *yi = y->value.row(i);
            const Real *gy = y->grad.row(i);
            Real *gx = x->grad.row(i);
            Real dot = 0;
            for (int c = 0; c < d; ++c) dot += gy[c] * yi[c];
            for (int c = 0; c < d; ++c) gx[c] += yi[c] * (gy[c] - dot);
        }
    });
    return y;
}

// ---------------------------------------------------------------------------
// Parameter bundles
// ---------------------------------------------------------------------------

template <class Real>
struct LinearLayer {
    ParamTensor<Real> weight; // din x dout
    ParamTensor<Real> bias;   // dout

    LinearLayer() = default;
    LinearLayer(const std::string &name, int din, int dout)
        : weight(name + ".weight", {din, dout}), bias(name + ".bias", {dout}) {}

    VarPtr<Real> apply(Tape<Real> *tape, const VarPtr<Real> &x) {
        return linear(tape, x, weight, &bias);
    }
    void init(Rng &rng) {
        const double bound = 1.0 / std::sqrt(double(weight.dim(0)));
        weight.init_uniform(rng, bound);
        bias.init_uniform(rng, bound);
    }
};

// Linear projection with normalization and activation.
template <class Real>
struct ProjUnit {
    LinearLayer<Real> lin;
    NormParams<Real> norm;

    ProjUnit() = default;
    ProjUnit(const std::string &name, int din, int dout)
        : lin(name, din, dout), norm(name + ".norm", dout) {}

    VarPtr<Real> apply(Tape<Real> *tape, const VarPtr<Real> &x, NormMode mode) {
        return relu(tape, normalize(tape, lin.apply(tape, x), norm, mode));
    }
    void init(Rng &rng) { lin.init(rng); }
};

// Decoder up-block: parent feature lookup, skip concatenation, one linear
// layer. No convolution on the upsampling path.
template <class Real>
VarPtr<Real> parent_upsample(Tape<Real> *tape, const VarPtr<Real> &coarse,
                             std::shared_ptr<const std::vector<int>> parent_rows,
                             const VarPtr<Real> &skip, ParamTensor<Real> &w,
                             ParamTensor<Real> *b = nullptr) {
    if (int(parent_rows->size()) != skip->value.rows)
        throw ShapeError("parent_upsample: parent rows do not match skip voxel count");
    auto gathered = rows_gather(tape, coarse, std::move(parent_rows));
    auto cat = concat_cols(tape, gathered, skip);
    return linear(tape, cat, w, b);
}

} // namespace oacnn
