#pragma once
#include <functional>
#include <memory>
#include <set>
#include <string>
#include <vector>

#include "oacnn/aggregator.hpp"
#include "oacnn/arconv.hpp"
#include "oacnn/network.hpp"
#include "oacnn/ops.hpp"
#include "oacnn/training.hpp"

// Finite-difference gradient auditing. The FD oracle is central differences
// at 64-bit: (f(t+h) - f(t-h)) / 2h per scalar. Ops are probed through a
// scalar loss sum(R . out) with a fixed random cotangent R; the full model is
// probed through its cross-entropy loss.

namespace oacnn {

struct GradCheckReport {
    std::string op;
    std::string worst_param;
    double max_rel_err = 0;
    std::size_t checked = 0;

    bool pass(double tol) const { return max_rel_err <= tol; }
};

// Central differences of a scalar function with respect to a flat parameter
// vector, evaluated in 64-bit.
template <class F>
std::vector<double> fd_gradient(std::vector<double> &theta, const F &eval, double h = 1e-5) {
    std::vector<double> grad(theta.size());
    for (std::size_t i = 0; i < theta.size(); ++i) {
        const double saved = theta[i];
        theta[i] = saved + h;
        const double fp = eval();
        theta[i] = saved - h;
        const double fm = eval();
        theta[i] = saved;
        grad[i] = (fp - fm) / (2.0 * h);
    }
    return grad;
}

// Central differences resolve |grad| down to roughly eps_f/h ~ 1e-10 here;
// when both sides sit under that floor they agree as zeros (a bias feeding a
// batch norm, say, has an exactly-zero gradient and pure FD noise).
inline double rel_err(double a, double b) {
    if (std::abs(a) < 1e-7 && std::abs(b) < 1e-7) return 0.0;
    return std::abs(a - b) / std::max(std::abs(a) + std::abs(b), 1e-5);
}

// A forward closure plus the leaf inputs it rebuilt from ParamTensors, so
// input gradients are audited exactly like parameter gradients.
struct OpForward {
    VarPtr<double> out;
    std::vector<std::pair<ParamTensor<double> *, VarPtr<double>>> leaves;

    VarPtr<double> leaf(ParamTensor<double> &p, int rows, int cols) {
        Matrix<double> m(rows, cols);
        for (std::size_t i = 0; i < p.size(); ++i) m.data[i] = p.value[i];
        auto v = make_var(std::move(m));
        leaves.emplace_back(&p, v);
        return v;
    }
};

struct OpCheck {
    std::string name;
    std::vector<ParamTensor<double> *> params; // everything to perturb, leaves included
    std::function<OpForward(Tape<double> *)> forward;
};

inline GradCheckReport check_op(OpCheck &check, double h = 1e-5, std::uint64_t cotangent_seed = 91,
                                double corrupt = 0.0) {
    GradCheckReport report;
    report.op = check.name;

    // Analytic pass.
    for (auto *p : check.params) p->zero_grad();
    Tape<double> tape;
    OpForward fwd = check.forward(&tape);
    Matrix<double> cotangent(fwd.out->value.rows, fwd.out->value.cols);
    {
        Rng rng(cotangent_seed);
        for (auto &v : cotangent.data) v = rng.uniform(-1.0, 1.0);
    }
    fwd.out->grad = cotangent;
    tape.backward();
    for (auto &[p, leaf] : fwd.leaves)
        for (std::size_t i = 0; i < p->size(); ++i) p->grad[i] += leaf->grad.data[i];

    std::vector<std::vector<double>> analytic;
    for (auto *p : check.params) analytic.push_back(p->grad);
    if (corrupt != 0.0 && !analytic.empty() && !analytic[0].empty())
        analytic[0][0] += corrupt * (1.0 + std::abs(analytic[0][0]));

    // FD pass.
    auto eval = [&]() {
        OpForward f = check.forward(nullptr);
        double loss = 0;
        for (std::size_t i = 0; i < f.out->value.data.size(); ++i)
            loss += f.out->value.data[i] * cotangent.data[i];
        return loss;
    };
    for (std::size_t t = 0; t < check.params.size(); ++t) {
        ParamTensor<double> &p = *check.params[t];
        const std::vector<double> numeric = fd_gradient(p.value, eval, h);
        for (std::size_t i = 0; i < numeric.size(); ++i) {
            const double e = rel_err(analytic[t][i], numeric[i]);
            ++report.checked;
            if (e > report.max_rel_err) {
                report.max_rel_err = e;
                report.worst_param = p.name + "[" + std::to_string(i) + "]";
            }
        }
    }
    return report;
}

// Full-model audit through the cross-entropy loss, every parameter element.
inline GradCheckReport check_model(const ModelConfig &cfg, const SparseTensor<double> &input,
                                   double h = 1e-5, double corrupt = 0.0) {
    GradCheckReport report;
    report.op = "model_forward";

    ModelParams<double> model(cfg);
    auto eval = [&]() {
        auto fwd = model_forward<double>(nullptr, model, input, NormMode::kTrain);
        return cross_entropy(fwd.logits->value, input.labels).loss;
    };

    model.zero_grad();
    Tape<double> tape;
    auto fwd = model_forward(&tape, model, input, NormMode::kTrain);
    auto loss = cross_entropy(fwd.logits->value, input.labels);
    fwd.logits->grad = loss.dlogits;
    tape.backward();

    std::vector<std::vector<double>> analytic;
    for (auto *p : model.params) analytic.push_back(p->grad);
    if (corrupt != 0.0) analytic[0][0] += corrupt * (1.0 + std::abs(analytic[0][0]));

    for (std::size_t t = 0; t < model.params.size(); ++t) {
        ParamTensor<double> &p = *model.params[t];
        const std::vector<double> numeric = fd_gradient(p.value, eval, h);
        for (std::size_t i = 0; i < numeric.size(); ++i) {
            const double e = rel_err(analytic[t][i], numeric[i]);
            ++report.checked;
            if (e > report.max_rel_err) {
                report.max_rel_err = e;
                report.worst_param = p.name + "[" + std::to_string(i) + "]";
            }
        }
    }
    return report;
}

// ---------------------------------------------------------------------------
// Fixtures
// ---------------------------------------------------------------------------

namespace gradcheck_detail {

inline std::vector<VoxelCoord> random_coords(int n, int extent, Rng &rng) {
    std::set<std::tuple<int, int, int>> seen;
    std::vector<VoxelCoord> coords;
    while (int(coords.size()) < n) {
        const int x = rng.uniform_int(0, extent - 1);
        const int y = rng.uniform_int(0, extent - 1);
        const int z = rng.uniform_int(0, extent - 1);
        if (seen.insert({x, y, z}).second)
            coords.push_back(VoxelCoord{std::int32_t(x), std::int32_t(y), std::int32_t(z), 0});
    }
    std::sort(coords.begin(), coords.end(), coord_less);
    return coords;
}

inline ParamTensor<double> random_param(const std::string &name, std::vector<int> shape, Rng &rng,
                                        double scale = 1.0) {
    ParamTensor<double> p(name, std::move(shape));
    for (auto &v : p.value) v = rng.uniform(-scale, scale);
    return p;
}

// Keeps ReLU preactivations away from the kink so h=1e-5 never crosses it.
inline void nudge_from_zero(ParamTensor<double> &p, double margin = 0.05) {
    for (auto &v : p.value)
        if (std::abs(v) < margin) v = v < 0 ? v - margin : v + margin;
}

} // namespace gradcheck_detail

// Per-op FD suites. `scope` is one of ops / arconv / aggregator / network /
// all. `corrupt` injects a deliberate gradient error into the first op of the
// suite (negative-control fixture).
std::vector<GradCheckReport> gradcheck_suite(const std::string &scope, double h = 1e-5,
                                             bool corrupt = false);

} // namespace oacnn
