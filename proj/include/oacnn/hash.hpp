#pragma once
#include <cstdint>
#include <cstring>
#include <optional>
#include <vector>

#include "oacnn/coords.hpp"
#include "oacnn/errors.hpp"

namespace oacnn {

inline constexpr std::uint64_t kFnv64OffsetBasis = 0xcbf29ce484222325ull;
inline constexpr std::uint64_t kFnv64Prime = 0x100000001b3ull;

// FNV-1a over a byte buffer.
inline std::uint64_t fnv1a_bytes(const void *data, std::size_t n,
                                 std::uint64_t h = kFnv64OffsetBasis) {
    const auto *p = static_cast<const unsigned char *>(data);
    for (std::size_t i = 0; i < n; ++i) {
        h ^= p[i];
        h *= kFnv64Prime;
    }
    return h;
}

// FNV-1a of the little-endian serialization of (batch, x, y, z) as four
// 32-bit signed integers. Platform independent.
inline std::uint64_t fnv1a_hash(const VoxelCoord &c) {
    unsigned char buf[16];
    const std::int32_t v[4] = {c.batch, c.x, c.y, c.z};
    for (int i = 0; i < 4; ++i) {
        const auto u = std::uint32_t(v[i]);
        buf[4 * i + 0] = (unsigned char)(u & 0xff);
        buf[4 * i + 1] = (unsigned char)((u >> 8) & 0xff);
        buf[4 * i + 2] = (unsigned char)((u >> 16) & 0xff);
        buf[4 * i + 3] = (unsigned char)((u >> 24) & 0xff);
    }
    return fnv1a_bytes(buf, sizeof(buf));
}

// Open-addressed coordinate -> row map. Collisions are resolved by exact key
// comparison (linear probing); a hash collision can never alias two coords.
class HashIndex {
  public:
    HashIndex() = default;

    explicit HashIndex(const std::vector<VoxelCoord> &coords) : keys_(coords) {
        std::size_t cap = 16;
        while (cap < coords.size() * 2) cap <<= 1;
        mask_ = cap - 1;
        slots_.assign(cap, -1);
        for (int row = 0; row < int(coords.size()); ++row) {
            std::size_t slot = fnv1a_hash(coords[row]) & mask_;
            while (slots_[slot] >= 0) {
                if (keys_[std::size_t(slots_[slot])] == coords[row])
                    throw DuplicateVoxel("duplicate voxel coordinate at rows " +
                                         std::to_string(slots_[slot]) + " and " +
                                         std::to_string(row));
                slot = (slot + 1) & mask_;
            }
            slots_[slot] = row;
        }
    }

    std::optional<int> lookup(const VoxelCoord &c) const {
        if (slots_.empty()) return std::nullopt;
        std::size_t slot = fnv1a_hash(c) & mask_;
        while (slots_[slot] >= 0) {
            if (keys_[std::size_t(slots_[slot])] == c) return slots_[slot];
            slot = (slot + 1) & mask_;
        }
        return std::nullopt;
    }

    std::size_t size() const { return keys_.size(); }

  private:
    std::vector<VoxelCoord> keys_;
    std::vector<std::int32_t> slots_;
    std::size_t mask_ = 0;
};

} // namespace oacnn
