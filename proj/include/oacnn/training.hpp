#pragma once
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "oacnn/errors.hpp"
#include "oacnn/matrix.hpp"

namespace oacnn {

inline constexpr int kIgnoreLabel = 255;

// ---------------------------------------------------------------------------
// Loss
// ---------------------------------------------------------------------------

template <class Real>
struct LossResult {
    double loss = 0;
    Matrix<Real> dlogits;
    int counted = 0; // voxels that contributed (ignore label excluded)
};

// Mean over voxels of -log softmax(logits)[label]; gradient is
// (softmax - onehot) / counted. Rows labeled kIgnoreLabel contribute nothing.
template <class Real>
LossResult<Real> cross_entropy(const Matrix<Real> &logits, const std::vector<int> &labels,
                               int ignore_label = kIgnoreLabel) {
    const int n = logits.rows, c = logits.cols;
    if (int(labels.size()) != n)
        throw ShapeError("cross_entropy: " + std::to_string(labels.size()) + " labels for " +
                         std::to_string(n) + " rows");
    LossResult<Real> result;
    result.dlogits = Matrix<Real>(n, c);

    int counted = 0;
    for (int i = 0; i < n; ++i) {
        const int label = labels[std::size_t(i)];
        if (label == ignore_label) continue;
        if (label < 0 || label >= c)
            throw LabelError("cross_entropy: label " + std::to_string(label) + " outside [0," +
                             std::to_string(c) + ")");
        ++counted;
    }
    result.counted = counted;
    if (counted == 0) return result;

    // Serial accumulation keeps the loss bit-stable across thread counts.
    double total = 0;
    for (int i = 0; i < n; ++i) {
        const int label = labels[std::size_t(i)];
        if (label == ignore_label) continue;
        const Real *row = logits.row(i);
        double mx = double(row[0]);
        for (int k = 1; k < c; ++k) mx = std::max(mx, double(row[k]));
        double sum = 0;
        for (int k = 0; k < c; ++k) sum += std::exp(double(row[k]) - mx);
        const double log_z = mx + std::log(sum);
        total += log_z - double(row[label]);
        Real *g = result.dlogits.row(i);
        const double inv = 1.0 / double(counted);
        for (int k = 0; k < c; ++k)
            g[k] = Real((std::exp(double(row[k]) - log_z) - (k == label ? 1.0 : 0.0)) * inv);
    }
    result.loss = total / double(counted);
    return result;
}

// ---------------------------------------------------------------------------
// Optimizer and schedule
// ---------------------------------------------------------------------------

// AdamW with decoupled weight decay: decay scales the parameter directly and
// never enters the moment estimates.
template <class Real>
struct AdamW {
    double lr = 1e-3;
    double beta1 = 0.9, beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 0.02;
    std::int64_t step_count = 0;
    std::vector<std::vector<Real>> m, v;

    void reset(const std::vector<ParamTensor<Real> *> &params) {
        m.clear();
        v.clear();
        for (const auto *p : params) {
            m.emplace_back(p->size(), Real(0));
            v.emplace_back(p->size(), Real(0));
        }
        step_count = 0;
    }

    void step(const std::vector<ParamTensor<Real> *> &params, double lr_t) {
        if (m.size() != params.size()) reset(params);
        ++step_count;
        const double bc1 = 1.0 - std::pow(beta1, double(step_count));
        const double bc2 = 1.0 - std::pow(beta2, double(step_count));
        for (std::size_t t = 0; t < params.size(); ++t) {
            ParamTensor<Real> &p = *params[t];
            auto &mt = m[t];
            auto &vt = v[t];
            const std::int64_t n = std::int64_t(p.size());
#pragma omp parallel for if (n > 4096)
            for (std::int64_t i = 0; i < n; ++i) {
                const double g = double(p.grad[std::size_t(i)]);
                double mi = beta1 * double(mt[std::size_t(i)]) + (1.0 - beta1) * g;
                double vi = beta2 * double(vt[std::size_t(i)]) + (1.0 - beta2) * g * g;
                mt[std::size_t(i)] = Real(mi);
                vt[std::size_t(i)] = Real(vi);
                double value = double(p.value[std::size_t(i)]);
                value -= lr_t * weight_decay * value;
                value -= lr_t * (mi / bc1) / (std::sqrt(vi / bc2) + eps);
                p.value[std::size_t(i)] = Real(value);
            }
        }
    }
};

inline double cosine_lr(std::int64_t step, std::int64_t total_steps, double lr0) {
    if (total_steps <= 0 || step < 0 || step > total_steps)
        throw ConfigError("cosine_lr: step " + std::to_string(step) + " outside [0," +
                          std::to_string(total_steps) + "]");
    constexpr double kPi = 3.14159265358979323846;
    return lr0 * 0.5 * (1.0 + std::cos(kPi * double(step) / double(total_steps)));
}

// ---------------------------------------------------------------------------
// Segmentation metrics
// ---------------------------------------------------------------------------

struct SegMetrics {
    double accuracy = 0;
    double miou = 0;
    std::vector<double> per_class_iou; // NaN-free: classes absent from the union are skipped
};

// Streaming confusion matrix; mIoU averages IoU over classes whose union is
// non-empty.
class ConfusionMatrix {
  public:
    explicit ConfusionMatrix(int num_classes)
        : num_classes_(num_classes), counts_(std::size_t(num_classes) * num_classes, 0) {}

    void add(const std::vector<int> &pred, const std::vector<int> &truth,
             int ignore_label = kIgnoreLabel) {
        if (pred.size() != truth.size()) throw ShapeError("confusion: size mismatch");
        for (std::size_t i = 0; i < pred.size(); ++i) {
            if (truth[i] == ignore_label) continue;
            if (truth[i] < 0 || truth[i] >= num_classes_ || pred[i] < 0 || pred[i] >= num_classes_)
                throw LabelError("confusion: label outside [0," + std::to_string(num_classes_) + ")");
            ++counts_[std::size_t(truth[i]) * num_classes_ + std::size_t(pred[i])];
        }
    }

    SegMetrics metrics() const {
        SegMetrics out;
        std::int64_t correct = 0, total = 0;
        double iou_sum = 0;
        int iou_classes = 0;
        for (int t = 0; t < num_classes_; ++t) {
            std::int64_t tp = counts_[std::size_t(t) * num_classes_ + std::size_t(t)];
            std::int64_t row = 0, col = 0;
            for (int k = 0; k < num_classes_; ++k) {
                row += counts_[std::size_t(t) * num_classes_ + std::size_t(k)];
                col += counts_[std::size_t(k) * num_classes_ + std::size_t(t)];
            }
            correct += tp;
            total += row;
            const std::int64_t uni = row + col - tp;
            if (uni > 0) {
                const double iou = double(tp) / double(uni);
                out.per_class_iou.push_back(iou);
                iou_sum += iou;
                ++iou_classes;
            }
        }
        out.accuracy = total > 0 ? double(correct) / double(total) : 0.0;
        out.miou = iou_classes > 0 ? iou_sum / double(iou_classes) : 0.0;
        return out;
    }

  private:
    int num_classes_;
    std::vector<std::int64_t> counts_;
};

// Row argmax; ties take the smallest class id.
template <class Real>
std::vector<int> predict_labels(const Matrix<Real> &logits) {
    std::vector<int> out(std::size_t(logits.rows));
    for (int i = 0; i < logits.rows; ++i) {
        const Real *row = logits.row(i);
        int best = 0;
        for (int c = 1; c < logits.cols; ++c)
            if (row[c] > row[best]) best = c;
        out[std::size_t(i)] = best;
    }
    return out;
}

} // namespace oacnn
