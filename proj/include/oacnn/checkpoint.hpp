#pragma once
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "oacnn/binary_io.hpp"
#include "oacnn/network.hpp"

// Checkpoint container (OACN): little-endian binary.
//   magic 'OACN' | u32 version=1 | length-prefixed canonical config text |
//   u32 tensor_count | per tensor: { length-prefixed name, u32 dtype (0=f32),
//   u32 ndim, u32 dims[ndim], u64 byte offset into payload } |
//   u64 payload byte length | payload (f32 little-endian)
// Tensors appear in registration order: parameters first, then normalization
// running statistics. Values are stored as f32, whatever the compute type.

namespace oacnn {

inline constexpr std::uint32_t kCheckpointVersion = 1;
inline constexpr std::uint32_t kDtypeF32 = 0;

struct CheckpointTensor {
    std::string name;
    std::vector<int> shape;
    std::vector<float> values;
};

struct Checkpoint {
    ModelConfig config;
    std::vector<CheckpointTensor> tensors;

    const CheckpointTensor *find(const std::string &name) const {
        for (const auto &t : tensors)
            if (t.name == name) return &t;
        return nullptr;
    }
};

template <class Real>
Checkpoint snapshot(const ModelParams<Real> &model) {
    Checkpoint ckpt;
    ckpt.config = model.config;
    for (const auto *p : model.params) {
        CheckpointTensor t;
        t.name = p->name;
        t.shape = p->shape;
        t.values.reserve(p->size());
        for (Real v : p->value) t.values.push_back(float(v));
        ckpt.tensors.push_back(std::move(t));
    }
    for (const auto &[name, buf] : model.buffers) {
        CheckpointTensor t;
        t.name = name;
        t.shape = {int(buf->size())};
        t.values.reserve(buf->size());
        for (Real v : *buf) t.values.push_back(float(v));
        ckpt.tensors.push_back(std::move(t));
    }
    return ckpt;
}

inline void write_checkpoint(const std::string &path, const Checkpoint &ckpt) {
    BinaryWriter w(path);
    w.magic("OACN");
    w.u32(kCheckpointVersion);
    w.str(ckpt.config.canonical_text());
    w.u32(std::uint32_t(ckpt.tensors.size()));
    std::uint64_t offset = 0;
    for (const auto &t : ckpt.tensors) {
        w.str(t.name);
        w.u32(kDtypeF32);
        w.u32(std::uint32_t(t.shape.size()));
        for (int d : t.shape) w.u32(std::uint32_t(d));
        w.u64(offset);
        offset += std::uint64_t(t.values.size()) * 4;
    }
    w.u64(offset);
    for (const auto &t : ckpt.tensors)
        for (float v : t.values) w.f32(v);
    w.close();
}

inline Checkpoint read_checkpoint(const std::string &path) {
    BinaryReader r(path);
    r.expect_magic("OACN");
    const std::uint32_t version = r.u32();
    if (version != kCheckpointVersion)
        throw ParseError(path + ": unsupported checkpoint version " + std::to_string(version));
    Checkpoint ckpt;
    ckpt.config = ModelConfig::parse_text(r.str());
    const std::uint32_t count = r.u32();
    std::vector<std::uint64_t> offsets;
    for (std::uint32_t i = 0; i < count; ++i) {
        CheckpointTensor t;
        t.name = r.str(4096);
        const std::uint32_t dtype = r.u32();
        if (dtype != kDtypeF32) throw ParseError(path + ": unsupported dtype " + std::to_string(dtype));
        const std::uint32_t ndim = r.u32();
        if (ndim > 8) throw ParseError(path + ": implausible tensor rank");
        std::size_t n = 1;
        for (std::uint32_t k = 0; k < ndim; ++k) {
            t.shape.push_back(int(r.u32()));
            n *= std::size_t(t.shape.back());
        }
        offsets.push_back(r.u64());
        t.values.resize(n);
        ckpt.tensors.push_back(std::move(t));
    }
    const std::uint64_t payload_len = r.u64();
    std::uint64_t expected = 0;
    for (std::size_t i = 0; i < ckpt.tensors.size(); ++i) {
        if (offsets[i] != expected) throw ParseError(path + ": non-contiguous tensor payload");
        expected += std::uint64_t(ckpt.tensors[i].values.size()) * 4;
    }
    if (expected != payload_len) throw ParseError(path + ": payload length mismatch");
    for (auto &t : ckpt.tensors)
        for (auto &v : t.values) v = r.f32();
    if (!r.at_eof()) throw ParseError(path + ": trailing bytes after payload");
    return ckpt;
}

template <class Real>
void save_model(const std::string &path, const ModelParams<Real> &model) {
    write_checkpoint(path, snapshot(model));
}

// Rebuilds the model from the stored config and restores every tensor by
// name. Shape or naming drift raises CompatError.
template <class Real>
std::unique_ptr<ModelParams<Real>> load_model(const std::string &path) {
    const Checkpoint ckpt = read_checkpoint(path);
    auto model = std::make_unique<ModelParams<Real>>(ckpt.config);

    auto restore = [&](const std::string &name, std::vector<Real> &dst,
                       const std::vector<int> *shape) {
        const CheckpointTensor *t = ckpt.find(name);
        if (!t) throw CompatError(path + ": missing tensor " + name);
        if (shape && t->shape != *shape) throw CompatError(path + ": shape mismatch for " + name);
        if (t->values.size() != dst.size()) throw CompatError(path + ": size mismatch for " + name);
        for (std::size_t i = 0; i < dst.size(); ++i) dst[i] = Real(t->values[i]);
    };
    for (auto *p : model->params) restore(p->name, p->value, &p->shape);
    for (auto &[name, buf] : model->buffers) restore(name, *buf, nullptr);
    return model;
}

} // namespace oacnn
