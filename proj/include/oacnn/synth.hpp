#pragma once
#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <vector>

#include "oacnn/geometry.hpp"
#include "oacnn/rng.hpp"

// Synthetic labeled indoor scenes: a floor plane, four walls, and randomly
// placed boxes and spheres. Points are surface-sampled with probability
// proportional to primitive area, colored by a per-class tint plus Gaussian
// noise. Everything is a deterministic function of the config seed.

namespace oacnn {

inline constexpr int kClassFloor = 0;
inline constexpr int kClassWall = 1;
inline constexpr int kClassBox = 2;
inline constexpr int kClassSphere = 3;
inline constexpr int kSynthClassCount = 4;

struct SynthSceneConfig {
    double room_min = 2.2, room_max = 3.0; // x/y extent range, meters
    double wall_height = 1.2;
    double surface_thickness = 0.03; // slab thickness for floor/walls
    int min_boxes = 2, max_boxes = 4;
    int min_spheres = 2, max_spheres = 4;
    double box_size_min = 0.25, box_size_max = 0.55;
    double sphere_radius_min = 0.14, sphere_radius_max = 0.30;
    double color_noise = 0.08;
    int points_per_scene = 8000;
    std::uint64_t seed = 0;

    void validate() const {
        if (!(room_min > 0) || room_max < room_min || !(wall_height > 0))
            throw ConfigError("synth: degenerate room extents");
        if (surface_thickness < 0) throw ConfigError("synth: negative thickness");
        if (min_boxes < 0 || max_boxes < min_boxes || min_spheres < 0 || max_spheres < min_spheres)
            throw ConfigError("synth: bad object counts");
        if (!(box_size_min > 0) || box_size_max < box_size_min)
            throw ConfigError("synth: bad box size range");
        if (!(sphere_radius_min > 0) || sphere_radius_max < sphere_radius_min)
            throw ConfigError("synth: bad sphere radius range");
        if (color_noise < 0) throw ConfigError("synth: negative color noise");
        if (points_per_scene < 1) throw ConfigError("synth: points_per_scene must be >= 1");
    }
};

struct ScenePrimitive {
    enum Kind { kRect, kSphere } kind = kRect;
    int label = 0;
    // kRect: origin + u*edge_u + v*edge_v, (u,v) in [0,1]^2; normal points out
    // of the slab, points are displaced up to surface_thickness along -normal.
    std::array<double, 3> origin{}, edge_u{}, edge_v{}, normal{};
    // kSphere
    std::array<double, 3> center{};
    double radius = 0;
    double area = 0;
};

struct SceneSpec {
    double room_x = 0, room_y = 0;
    std::vector<ScenePrimitive> prims;
    double total_area = 0;
    double class_area[kSynthClassCount] = {0, 0, 0, 0};
};

inline const std::array<std::array<double, 3>, kSynthClassCount> &synth_class_tints() {
    static const std::array<std::array<double, 3>, kSynthClassCount> tints = {{
        {0.45, 0.45, 0.45}, // floor
        {0.78, 0.74, 0.62}, // wall
        {0.66, 0.34, 0.24}, // box
        {0.30, 0.44, 0.64}, // sphere
    }};
    return tints;
}

namespace detail {

inline ScenePrimitive make_rect(int label, std::array<double, 3> origin, std::array<double, 3> eu,
                                std::array<double, 3> ev, std::array<double, 3> normal) {
    ScenePrimitive p;
    p.kind = ScenePrimitive::kRect;
    p.label = label;
    p.origin = origin;
    p.edge_u = eu;
    p.edge_v = ev;
    p.normal = normal;
    const double lu = std::sqrt(eu[0] * eu[0] + eu[1] * eu[1] + eu[2] * eu[2]);
    const double lv = std::sqrt(ev[0] * ev[0] + ev[1] * ev[1] + ev[2] * ev[2]);
    p.area = lu * lv;
    return p;
}

inline void add_box(SceneSpec &spec, int label, std::array<double, 3> lo, std::array<double, 3> size) {
    const double sx = size[0], sy = size[1], sz = size[2];
    const auto &o = lo;
    // Six faces, normals outward; slab displacement goes into the solid.
    spec.prims.push_back(make_rect(label, {o[0], o[1], o[2] + sz}, {sx, 0, 0}, {0, sy, 0}, {0, 0, 1}));
    spec.prims.push_back(make_rect(label, {o[0], o[1], o[2]}, {sx, 0, 0}, {0, sy, 0}, {0, 0, -1}));
    spec.prims.push_back(make_rect(label, {o[0], o[1], o[2]}, {sx, 0, 0}, {0, 0, sz}, {0, -1, 0}));
    spec.prims.push_back(make_rect(label, {o[0], o[1] + sy, o[2]}, {sx, 0, 0}, {0, 0, sz}, {0, 1, 0}));
    spec.prims.push_back(make_rect(label, {o[0], o[1], o[2]}, {0, sy, 0}, {0, 0, sz}, {-1, 0, 0}));
    spec.prims.push_back(make_rect(label, {o[0] + sx, o[1], o[2]}, {0, sy, 0}, {0, 0, sz}, {1, 0, 0}));
}

} // namespace detail

// Scene layout as a deterministic function of the seed.
inline SceneSpec build_scene_spec(const SynthSceneConfig &cfg) {
    cfg.validate();
    Rng rng(cfg.seed * 0x9e3779b97f4a7c15ull + 1);

    SceneSpec spec;
    spec.room_x = rng.uniform(cfg.room_min, cfg.room_max);
    spec.room_y = rng.uniform(cfg.room_min, cfg.room_max);
    const double h = cfg.wall_height;

    spec.prims.push_back(detail::make_rect(kClassFloor, {0, 0, 0}, {spec.room_x, 0, 0},
                                           {0, spec.room_y, 0}, {0, 0, 1}));
    spec.prims.push_back(detail::make_rect(kClassWall, {0, 0, 0}, {spec.room_x, 0, 0}, {0, 0, h}, {0, -1, 0}));
    spec.prims.push_back(detail::make_rect(kClassWall, {0, spec.room_y, 0}, {spec.room_x, 0, 0}, {0, 0, h}, {0, 1, 0}));
    spec.prims.push_back(detail::make_rect(kClassWall, {0, 0, 0}, {0, spec.room_y, 0}, {0, 0, h}, {-1, 0, 0}));
    spec.prims.push_back(detail::make_rect(kClassWall, {spec.room_x, 0, 0}, {0, spec.room_y, 0}, {0, 0, h}, {1, 0, 0}));

    const int n_boxes = rng.uniform_int(cfg.min_boxes, cfg.max_boxes);
    for (int b = 0; b < n_boxes; ++b) {
        std::array<double, 3> size{rng.uniform(cfg.box_size_min, cfg.box_size_max),
                                   rng.uniform(cfg.box_size_min, cfg.box_size_max),
                                   rng.uniform(cfg.box_size_min, cfg.box_size_max)};
        const double margin = 0.05;
        std::array<double, 3> lo{
            rng.uniform(margin, std::max(margin + 1e-3, spec.room_x - size[0] - margin)),
            rng.uniform(margin, std::max(margin + 1e-3, spec.room_y - size[1] - margin)), 0.0};
        detail::add_box(spec, kClassBox, lo, size);
    }

    const int n_spheres = rng.uniform_int(cfg.min_spheres, cfg.max_spheres);
    for (int s = 0; s < n_spheres; ++s) {
        ScenePrimitive p;
        p.kind = ScenePrimitive::kSphere;
        p.label = kClassSphere;
        p.radius = rng.uniform(cfg.sphere_radius_min, cfg.sphere_radius_max);
        const double margin = 0.05 + p.radius;
        p.center = {rng.uniform(margin, std::max(margin + 1e-3, spec.room_x - margin)),
                    rng.uniform(margin, std::max(margin + 1e-3, spec.room_y - margin)), p.radius};
        p.area = 4.0 * 3.14159265358979323846 * p.radius * p.radius;
        spec.prims.push_back(p);
    }

    for (const auto &p : spec.prims) {
        spec.total_area += p.area;
        spec.class_area[p.label] += p.area;
    }
    return spec;
}

// Surface sampling, area-proportional across primitives.
inline PointCloud sample_scene(const SceneSpec &spec, const SynthSceneConfig &cfg, Rng &rng) {
    std::vector<double> cumulative;
    cumulative.reserve(spec.prims.size());
    double acc = 0;
    for (const auto &p : spec.prims) {
        acc += p.area;
        cumulative.push_back(acc);
    }

    const auto &tints = synth_class_tints();
    PointCloud pc;
    pc.positions.resize(std::size_t(cfg.points_per_scene));
    pc.features = Matrix<double>(cfg.points_per_scene, 3);
    pc.labels.resize(std::size_t(cfg.points_per_scene));

    for (int i = 0; i < cfg.points_per_scene; ++i) {
        const double r = rng.uniform() * acc;
        std::size_t pi = std::size_t(std::lower_bound(cumulative.begin(), cumulative.end(), r) -
                                     cumulative.begin());
        if (pi >= spec.prims.size()) pi = spec.prims.size() - 1;
        const ScenePrimitive &p = spec.prims[pi];

        std::array<double, 3> pos{};
        if (p.kind == ScenePrimitive::kRect) {
            const double u = rng.uniform(), v = rng.uniform();
            const double depth = rng.uniform() * cfg.surface_thickness;
            for (int a = 0; a < 3; ++a)
                pos[std::size_t(a)] = p.origin[std::size_t(a)] + u * p.edge_u[std::size_t(a)] +
                                      v * p.edge_v[std::size_t(a)] - depth * p.normal[std::size_t(a)];
        } else {
            double nx, ny, nz, norm;
            do {
                nx = rng.normal();
                ny = rng.normal();
                nz = rng.normal();
                norm = std::sqrt(nx * nx + ny * ny + nz * nz);
            } while (norm < 1e-9);
            pos = {p.center[0] + p.radius * nx / norm, p.center[1] + p.radius * ny / norm,
                   p.center[2] + p.radius * nz / norm};
        }
        pc.positions[std::size_t(i)] = pos;
        pc.labels[std::size_t(i)] = p.label;
        for (int ch = 0; ch < 3; ++ch) {
            double v = tints[std::size_t(p.label)][std::size_t(ch)] + rng.normal(0.0, cfg.color_noise);
            pc.features(i, ch) = std::min(1.0, std::max(0.0, v));
        }
    }
    return pc;
}

inline PointCloud synth_scene(const SynthSceneConfig &cfg) {
    const SceneSpec spec = build_scene_spec(cfg);
    Rng rng(cfg.seed * 0x9e3779b97f4a7c15ull + 2);
    return sample_scene(spec, cfg, rng);
}

} // namespace oacnn
