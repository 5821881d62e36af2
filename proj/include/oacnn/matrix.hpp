#pragma once
#include <algorithm>
#include <cstddef>
#include <string>
#include <vector>

#include "oacnn/errors.hpp"
#include "oacnn/rng.hpp"

namespace oacnn {

// Dense row-major matrix of features, N rows x d channels.
template <class Real>
struct Matrix {
    int rows = 0, cols = 0;
    std::vector<Real> data;

    Matrix() = default;
    Matrix(int r, int c, Real fill_value = Real(0))
        : rows(r), cols(c), data(std::size_t(r) * std::size_t(c), fill_value) {}

    Real &operator()(int i, int j) { return data[std::size_t(i) * cols + j]; }
    Real operator()(int i, int j) const { return data[std::size_t(i) * cols + j]; }
    Real *row(int i) { return data.data() + std::size_t(i) * cols; }
    const Real *row(int i) const { return data.data() + std::size_t(i) * cols; }

    void fill(Real v) { std::fill(data.begin(), data.end(), v); }
    bool same_shape(const Matrix &o) const { return rows == o.rows && cols == o.cols; }
};

// Named learnable tensor with a gradient of identical shape.
template <class Real>
struct ParamTensor {
    std::string name;
    std::vector<int> shape;
    std::vector<Real> value;
    std::vector<Real> grad;

    ParamTensor() = default;
    ParamTensor(std::string n, std::vector<int> s) : name(std::move(n)), shape(std::move(s)) {
        std::size_t count = 1;
        for (int d : shape) count *= std::size_t(d);
        value.assign(count, Real(0));
        grad.assign(count, Real(0));
    }

    std::size_t size() const { return value.size(); }
    int dim(int i) const { return shape[std::size_t(i)]; }
    void zero_grad() { std::fill(grad.begin(), grad.end(), Real(0)); }

    void init_uniform(Rng &rng, double bound) {
        for (auto &v : value) v = Real(rng.uniform(-bound, bound));
    }
    void init_constant(Real c) { std::fill(value.begin(), value.end(), c); }
};

} // namespace oacnn
