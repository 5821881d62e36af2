#pragma once
#include <fstream>
#include <memory>
#include <string>
#include <vector>

#include <json.hpp>

#include "oacnn/checkpoint.hpp"
#include "oacnn/network.hpp"
#include "oacnn/synth.hpp"
#include "oacnn/tape.hpp"
#include "oacnn/training.hpp"

namespace oacnn {

struct TrainOptions {
    ModelConfig model;
    SynthSceneConfig scene;
    int epochs = 40;
    int batch_scenes = 4;
    int max_points = 20000; // per-scene subsample cap
    int train_scenes = 48;
    int eval_scenes = 16;
    std::uint64_t data_seed = 100; // scene seeds are data_seed + index
    bool augment = true;
    double lr = 1e-3;
    double weight_decay = 0.02;
    std::string metrics_path;    // empty: keep rows in memory only
    std::string checkpoint_path; // empty: do not save
    // When non-empty these labeled clouds replace the synthetic generator;
    // train/eval counts are taken from the vector sizes.
    std::vector<PointCloud> external_train, external_eval;
};

struct MetricsRow {
    int epoch = 0;
    std::int64_t step = 0;
    double lr = 0;
    double train_loss = 0;
    double eval_acc = 0;
    double eval_miou = 0;
};

struct TrainResult {
    std::vector<MetricsRow> rows;
    SegMetrics final_eval;
};

inline std::string metrics_line(const MetricsRow &row) {
    nlohmann::ordered_json j;
    j["epoch"] = row.epoch;
    j["step"] = row.step;
    j["lr"] = row.lr;
    j["train_loss"] = row.train_loss;
    j["eval_acc"] = row.eval_acc;
    j["eval_miou"] = row.eval_miou;
    return j.dump();
}

namespace detail {

inline PointCloud subsample(const PointCloud &pc, int max_points, Rng &rng) {
    if (pc.size() <= max_points) return pc;
    // Partial Fisher-Yates over index array.
    std::vector<int> idx(std::size_t(pc.size()));
    std::iota(idx.begin(), idx.end(), 0);
    for (int i = 0; i < max_points; ++i) {
        const int j = i + rng.uniform_int(0, pc.size() - 1 - i);
        std::swap(idx[std::size_t(i)], idx[std::size_t(j)]);
    }
    PointCloud out;
    out.positions.resize(std::size_t(max_points));
    out.features = Matrix<double>(max_points, pc.channels());
    if (!pc.labels.empty()) out.labels.resize(std::size_t(max_points));
    for (int i = 0; i < max_points; ++i) {
        const int s = idx[std::size_t(i)];
        out.positions[std::size_t(i)] = pc.positions[std::size_t(s)];
        for (int c = 0; c < pc.channels(); ++c) out.features(i, c) = pc.features(s, c);
        if (!pc.labels.empty()) out.labels[std::size_t(i)] = pc.labels[std::size_t(s)];
    }
    return out;
}

// Random x/y flip and uniform scale in [0.9, 1.1], positions only.
inline PointCloud augment_flip_scale(const PointCloud &pc, Rng &rng) {
    const bool flip_x = rng.bernoulli(0.5);
    const bool flip_y = rng.bernoulli(0.5);
    const double scale = rng.uniform(0.9, 1.1);
    PointCloud out = pc;
    for (auto &p : out.positions) {
        if (flip_x) p[0] = -p[0];
        if (flip_y) p[1] = -p[1];
        p[0] *= scale;
        p[1] *= scale;
        p[2] *= scale;
    }
    return out;
}

// Merge per-scene voxel tensors into one batch; scenes keep their canonical
// order, batch index ascending, so the result is canonically sorted.
template <class Real>
SparseTensor<Real> merge_batch(const std::vector<SparseTensor<Real>> &scenes) {
    int total = 0;
    const int d = scenes.front().channels();
    for (const auto &s : scenes) total += s.size();
    SparseTensor<Real> out;
    out.stride = scenes.front().stride;
    out.coords.reserve(std::size_t(total));
    out.features = Matrix<Real>(total, d);
    out.labels.reserve(std::size_t(total));
    int row = 0;
    for (int b = 0; b < int(scenes.size()); ++b) {
        const auto &s = scenes[std::size_t(b)];
        for (int i = 0; i < s.size(); ++i) {
            VoxelCoord c = s.coords[std::size_t(i)];
            c.batch = b;
            out.coords.push_back(c);
            const Real *src = s.features.row(i);
            std::copy(src, src + d, out.features.row(row));
            out.labels.push_back(s.labels.empty() ? kIgnoreLabel : s.labels[std::size_t(i)]);
            ++row;
        }
    }
    return out;
}

} // namespace detail

template <class Real>
SegMetrics evaluate(ModelParams<Real> &model, const std::vector<SparseTensor<Real>> &scenes) {
    ConfusionMatrix confusion(model.config.num_classes);
    for (const auto &scene : scenes) {
        auto result = model_forward<Real>(nullptr, model, scene, NormMode::kEval);
        confusion.add(predict_labels(result.logits->value), scene.labels);
    }
    return confusion.metrics();
}

// Toy training loop: synthetic scenes, AdamW, cosine annealing, per-epoch
// eval on held-out scenes. Deterministic for a fixed option set regardless of
// thread count.
template <class Real>
TrainResult train_loop(const TrainOptions &opt) {
    opt.model.validate();
    opt.scene.validate();
    if (opt.epochs < 0 || opt.batch_scenes < 1 || opt.train_scenes < 1 || opt.eval_scenes < 0)
        throw ConfigError("train: bad epochs/batch/scene counts");

    // Data: point clouds are generated once; augmentation re-voxelizes per epoch.
    std::vector<PointCloud> train_points;
    std::vector<SparseTensor<Real>> eval_scenes;
    {
        Rng data_rng(opt.scene.seed ^ 0x7c0fd7a531454a11ull);
        if (!opt.external_train.empty()) {
            for (const auto &pc : opt.external_train)
                train_points.push_back(detail::subsample(pc, opt.max_points, data_rng));
            for (const auto &pc : opt.external_eval)
                eval_scenes.push_back(
                    voxelize<Real>(detail::subsample(pc, opt.max_points, data_rng), opt.model.voxel_size));
        } else {
            for (int i = 0; i < opt.train_scenes; ++i) {
                SynthSceneConfig cfg = opt.scene;
                cfg.seed = opt.data_seed + std::uint64_t(i);
                train_points.push_back(detail::subsample(synth_scene(cfg), opt.max_points, data_rng));
            }
            for (int i = 0; i < opt.eval_scenes; ++i) {
                SynthSceneConfig cfg = opt.scene;
                cfg.seed = opt.data_seed + std::uint64_t(opt.train_scenes + i);
                auto pc = detail::subsample(synth_scene(cfg), opt.max_points, data_rng);
                eval_scenes.push_back(voxelize<Real>(pc, opt.model.voxel_size));
            }
        }
    }
    const int train_count = int(train_points.size());

    ModelParams<Real> model(opt.model);
    AdamW<Real> optim;
    optim.lr = opt.lr;
    optim.weight_decay = opt.weight_decay;
    optim.reset(model.params);

    const int batches_per_epoch = (train_count + opt.batch_scenes - 1) / opt.batch_scenes;
    const std::int64_t total_steps = std::int64_t(opt.epochs) * batches_per_epoch;

    Rng loop_rng(opt.model.seed ^ 0x51e0d7d0b5bca9d3ull);
    TrainResult result;
    std::int64_t global_step = 0;

    for (int epoch = 1; epoch <= opt.epochs; ++epoch) {
        const double epoch_lr = cosine_lr(global_step, total_steps, optim.lr);

        std::vector<int> order;
        order.resize(std::size_t(train_count));
        std::iota(order.begin(), order.end(), 0);
        for (int i = train_count - 1; i > 0; --i)
            std::swap(order[std::size_t(i)], order[std::size_t(loop_rng.uniform_int(0, i))]);

        double loss_sum = 0;
        int loss_count = 0;
        for (int b0 = 0; b0 < train_count; b0 += opt.batch_scenes) {
            std::vector<SparseTensor<Real>> batch;
            for (int k = b0; k < std::min(b0 + opt.batch_scenes, train_count); ++k) {
                PointCloud pc = train_points[std::size_t(order[std::size_t(k)])];
                if (opt.augment) pc = detail::augment_flip_scale(pc, loop_rng);
                batch.push_back(voxelize<Real>(pc, opt.model.voxel_size));
            }
            auto merged = detail::merge_batch(batch);

            const double lr_t = cosine_lr(global_step, total_steps, optim.lr);
            Tape<Real> tape;
            model.zero_grad();
            auto fwd = model_forward(&tape, model, merged, NormMode::kTrain);
            auto loss = cross_entropy(fwd.logits->value, merged.labels);
            fwd.logits->grad = loss.dlogits;
            tape.backward();
            optim.step(model.params, lr_t);

            loss_sum += loss.loss;
            ++loss_count;
            ++global_step;
        }

        MetricsRow row;
        row.epoch = epoch;
        row.step = global_step;
        row.lr = epoch_lr;
        row.train_loss = loss_count ? loss_sum / loss_count : 0.0;
        if (!eval_scenes.empty()) {
            const SegMetrics m = evaluate(model, eval_scenes);
            row.eval_acc = m.accuracy;
            row.eval_miou = m.miou;
            result.final_eval = m;
        }
        result.rows.push_back(row);
    }

    if (!opt.metrics_path.empty()) {
        std::ofstream out(opt.metrics_path, std::ios::binary);
        if (!out) throw IoError("cannot open metrics file " + opt.metrics_path);
        for (const auto &row : result.rows) out << metrics_line(row) << "\n";
        out.close();
        if (!out) throw IoError("write failed: " + opt.metrics_path);
    }
    if (!opt.checkpoint_path.empty()) save_model(opt.checkpoint_path, model);
    return result;
}

} // namespace oacnn
