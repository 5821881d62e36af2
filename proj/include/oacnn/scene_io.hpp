#pragma once
#include <string>

#include "oacnn/binary_io.hpp"
#include "oacnn/coords.hpp"

// Voxel scene container (OAVX): little-endian binary, one scene per file.
//   magic 'OAVX' | u32 version=1 | u32 N | u32 d | u32 stride |
//   u32 flags (bit0: labels present) | N * (i32 x, i32 y, i32 z) |
//   N*d f32 features | N u16 labels (if flagged)
// Batch indices are not stored; a scene file is always batch 0.

namespace oacnn {

inline constexpr std::uint32_t kSceneFormatVersion = 1;

template <class Real>
void save_scene(const std::string &path, const SparseTensor<Real> &t) {
    if (!t.labels.empty() && int(t.labels.size()) != t.size())
        throw ShapeError("save_scene: label count mismatch");
    BinaryWriter w(path);
    w.magic("OAVX");
    w.u32(kSceneFormatVersion);
    w.u32(std::uint32_t(t.size()));
    w.u32(std::uint32_t(t.channels()));
    w.u32(std::uint32_t(t.stride));
    w.u32(t.labels.empty() ? 0u : 1u);
    for (const auto &c : t.coords) {
        w.i32(c.x);
        w.i32(c.y);
        w.i32(c.z);
    }
    for (int i = 0; i < t.size(); ++i)
        for (int c = 0; c < t.channels(); ++c) w.f32(float(t.features(i, c)));
    for (int label : t.labels) w.u16(std::uint16_t(label));
    w.close();
}

template <class Real>
SparseTensor<Real> load_scene(const std::string &path) {
    BinaryReader r(path);
    r.expect_magic("OAVX");
    const std::uint32_t version = r.u32();
    if (version != kSceneFormatVersion)
        throw ParseError(path + ": unsupported scene version " + std::to_string(version));
    const std::uint32_t n = r.u32();
    const std::uint32_t d = r.u32();
    const std::uint32_t stride = r.u32();
    const std::uint32_t flags = r.u32();
    if (stride == 0) throw ParseError(path + ": zero stride");

    SparseTensor<Real> t;
    t.stride = int(stride);
    t.coords.resize(n);
    for (auto &c : t.coords) {
        c.x = r.i32();
        c.y = r.i32();
        c.z = r.i32();
        c.batch = 0;
    }
    t.features = Matrix<Real>(int(n), int(d));
    for (std::uint32_t i = 0; i < n; ++i)
        for (std::uint32_t c = 0; c < d; ++c) t.features(int(i), int(c)) = Real(r.f32());
    if (flags & 1u) {
        t.labels.resize(n);
        for (auto &label : t.labels) label = int(r.u16());
    }
    if (!r.at_eof()) throw ParseError(path + ": trailing bytes after scene payload");
    return t;
}

} // namespace oacnn
