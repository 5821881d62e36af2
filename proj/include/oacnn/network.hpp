#pragma once
#include <cmath>
#include <cstdio>
#include <map>
#include <memory>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "oacnn/aggregator.hpp"
#include "oacnn/arconv.hpp"
#include "oacnn/geometry.hpp"
#include "oacnn/hash.hpp"
#include "oacnn/kernel_map.hpp"
#include "oacnn/ops.hpp"

namespace oacnn {

// ---------------------------------------------------------------------------
// Model configuration
// ---------------------------------------------------------------------------

// Grid sizes are configured in cells at each stage's own stride; the partition
// grid size in base voxel units is cells * stride, which keeps the physical
// extent comparable across stages and is automatically a multiple of the
// stride.
struct ModelConfig {
    std::vector<int> blocks_per_stage{2, 2, 2, 2};
    std::vector<int> channels_per_stage{64, 64, 128, 256};
    std::vector<std::vector<int>> grid_cells_per_stage{{6, 12, 24}, {4, 8, 16}, {3, 6, 12}, {2, 4, 8}};
    int in_channels = 3;
    int num_classes = 4;
    double voxel_size = kDefaultVoxelSize;
    std::uint64_t seed = 1;
    bool residual = true;
    bool adaptive_aggregator = true;
    double grid_scale = 1.0;

    int num_stages() const { return int(blocks_per_stage.size()); }
    int stage_stride(int stage) const { return 1 << stage; }

    void validate() const {
        const std::size_t s = blocks_per_stage.size();
        if (s == 0) throw ConfigError("config: at least one stage required");
        if (channels_per_stage.size() != s || grid_cells_per_stage.size() != s)
            throw ConfigError("config: blocks/channels/grid lists must have equal length");
        for (int b : blocks_per_stage)
            if (b < 1) throw ConfigError("config: blocks per stage must be >= 1");
        for (int c : channels_per_stage)
            if (c < 1) throw ConfigError("config: channels must be >= 1");
        for (const auto &g : grid_cells_per_stage) {
            if (g.empty()) throw ConfigError("config: each stage needs at least one grid size");
            for (std::size_t k = 0; k < g.size(); ++k) {
                if (g[k] < 1) throw ConfigError("config: grid cells must be >= 1");
                if (k > 0 && g[k] <= g[k - 1])
                    throw ConfigError("config: grid cells must be strictly increasing");
            }
        }
        if (in_channels < 1) throw ConfigError("config: in_channels must be >= 1");
        if (num_classes < 1) throw ConfigError("config: num_classes must be >= 1");
        if (!(voxel_size > 0)) throw ConfigError("config: voxel_size must be positive");
        if (!(grid_scale > 0)) throw ConfigError("config: grid_scale must be positive");
    }

    // Effective partition sizes for one stage, in base voxel units. With the
    // adaptive aggregator disabled only the middle scale survives.
    std::vector<int> effective_grid_sizes(int stage) const {
        const auto &cells = grid_cells_per_stage[std::size_t(stage)];
        std::vector<int> scaled;
        for (int c : cells) {
            int v = int(std::lround(double(c) * grid_scale));
            if (v < 1) v = 1;
            scaled.push_back(v * stage_stride(stage));
        }
        for (std::size_t k = 1; k < scaled.size(); ++k)
            if (scaled[k] <= scaled[k - 1])
                throw ConfigError("config: grid_scale collapses grid sizes at stage " +
                                  std::to_string(stage));
        if (!adaptive_aggregator) return {scaled[scaled.size() / 2]};
        return scaled;
    }

    static ModelConfig preset(const std::string &name) {
        ModelConfig cfg;
        if (name == "S") {
            cfg.blocks_per_stage = {2, 2, 2, 2};
        } else if (name == "B") {
            cfg.blocks_per_stage = {3, 3, 9, 3};
        } else if (name == "L") {
            cfg.blocks_per_stage = {3, 3, 9, 8};
        } else if (name == "micro") {
            cfg.blocks_per_stage = {1, 1, 2, 1};
            cfg.channels_per_stage = {16, 16, 32, 64};
        } else {
            throw ConfigError("unknown model preset '" + name + "' (expected S, B, L or micro)");
        }
        return cfg;
    }

    std::string canonical_text() const;
    static ModelConfig parse_text(const std::string &text);
};

namespace detail {

inline std::string format_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

inline std::string join_ints(const std::vector<int> &v, char sep = ',') {
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) out += sep;
        out += std::to_string(v[std::size_t(i)]);
    }
    return out;
}

inline std::vector<int> split_ints(const std::string &s, char sep = ',') {
    std::vector<int> out;
    std::size_t pos = 0;
    while (pos <= s.size()) {
        const std::size_t next = s.find(sep, pos);
        const std::string tok = s.substr(pos, next == std::string::npos ? std::string::npos : next - pos);
        if (tok.empty()) throw ParseError("config: empty integer field in '" + s + "'");
        out.push_back(std::stoi(tok));
        if (next == std::string::npos) break;
        pos = next + 1;
    }
    return out;
}

} // namespace detail

inline std::string ModelConfig::canonical_text() const {
    std::string grids;
    for (std::size_t s = 0; s < grid_cells_per_stage.size(); ++s) {
        if (s) grids += ';';
        grids += detail::join_ints(grid_cells_per_stage[s]);
    }
    std::ostringstream os;
    os << "oacnn-config-v1\n";
    os << "adaptive_aggregator=" << (adaptive_aggregator ? 1 : 0) << "\n";
    os << "blocks=" << detail::join_ints(blocks_per_stage) << "\n";
    os << "channels=" << detail::join_ints(channels_per_stage) << "\n";
    os << "grid_cells=" << grids << "\n";
    os << "grid_scale=" << detail::format_double(grid_scale) << "\n";
    os << "in_channels=" << in_channels << "\n";
    os << "num_classes=" << num_classes << "\n";
    os << "residual=" << (residual ? 1 : 0) << "\n";
    os << "seed=" << seed << "\n";
    os << "voxel_size=" << detail::format_double(voxel_size) << "\n";
    return os.str();
}

inline ModelConfig ModelConfig::parse_text(const std::string &text) {
    std::istringstream is(text);
    std::string line;
    if (!std::getline(is, line) || line != "oacnn-config-v1")
        throw ParseError("config: missing version header");
    ModelConfig cfg;
    std::map<std::string, std::string> kv;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw ParseError("config: malformed line '" + line + "'");
        kv[line.substr(0, eq)] = line.substr(eq + 1);
    }
    auto need = [&](const char *key) {
        auto it = kv.find(key);
        if (it == kv.end()) throw ParseError(std::string("config: missing key '") + key + "'");
        return it->second;
    };
    cfg.adaptive_aggregator = need("adaptive_aggregator") == "1";
    cfg.blocks_per_stage = detail::split_ints(need("blocks"));
    cfg.channels_per_stage = detail::split_ints(need("channels"));
    cfg.grid_cells_per_stage.clear();
    {
        const std::string grids = need("grid_cells");
        std::size_t pos = 0;
        while (pos <= grids.size()) {
            const std::size_t next = grids.find(';', pos);
            cfg.grid_cells_per_stage.push_back(detail::split_ints(
                grids.substr(pos, next == std::string::npos ? std::string::npos : next - pos)));
            if (next == std::string::npos) break;
            pos = next + 1;
        }
    }
    cfg.grid_scale = std::stod(need("grid_scale"));
    cfg.in_channels = std::stoi(need("in_channels"));
    cfg.num_classes = std::stoi(need("num_classes"));
    cfg.residual = need("residual") == "1";
    cfg.seed = std::stoull(need("seed"));
    cfg.voxel_size = std::stod(need("voxel_size"));
    cfg.validate();
    return cfg;
}

// ---------------------------------------------------------------------------
// Parameters
// ---------------------------------------------------------------------------

template <class Real>
struct BlockParams {
    std::vector<ArconvScaleParams<Real>> scales; // one per pyramid scale
    AggregatorParams<Real> agg;
    ParamTensor<Real> conv1_w, conv2_w; // 27 x d x d
    NormParams<Real> norm1, norm2;
};

template <class Real>
struct StageParams {
    std::vector<BlockParams<Real>> blocks;
    bool has_down = false;
    ParamTensor<Real> down_w; // 8 x d_s x d_{s+1}
    NormParams<Real> down_norm;
};

// All learnable tensors plus normalization running statistics, registered in
// a fixed order with unique names. Not copyable: the registries point into
// the owned structures.
template <class Real>
struct ModelParams {
    ModelConfig config;
    ParamTensor<Real> stem_w; // 27 x in_channels x channels[0]
    NormParams<Real> stem_norm;
    std::vector<StageParams<Real>> stages;
    std::vector<LinearLayer<Real>> up; // up[t]: (d_{t+1} + d_t) -> d_t
    LinearLayer<Real> head;            // channels[0] -> num_classes

    std::vector<ParamTensor<Real> *> params;
    std::vector<std::pair<std::string, std::vector<Real> *>> buffers;

    ModelParams(const ModelParams &) = delete;
    ModelParams &operator=(const ModelParams &) = delete;

    explicit ModelParams(ModelConfig cfg) : config(std::move(cfg)) {
        config.validate();
        const int nstages = config.num_stages();

        stem_w = ParamTensor<Real>("stem.weight", {27, config.in_channels, config.channels_per_stage[0]});
        stem_norm = NormParams<Real>("stem.norm", config.channels_per_stage[0]);

        stages.resize(std::size_t(nstages));
        for (int s = 0; s < nstages; ++s) {
            const int d = config.channels_per_stage[std::size_t(s)];
            const auto grid_sizes = config.effective_grid_sizes(s);
            const std::string sname = "stage" + std::to_string(s);
            auto &stage = stages[std::size_t(s)];
            stage.blocks.reserve(std::size_t(config.blocks_per_stage[std::size_t(s)]));
            for (int b = 0; b < config.blocks_per_stage[std::size_t(s)]; ++b) {
                const std::string bname = sname + ".block" + std::to_string(b);
                BlockParams<Real> block;
                for (std::size_t k = 0; k < grid_sizes.size(); ++k)
                    block.scales.emplace_back(bname + ".arconv.scale" + std::to_string(k), d);
                block.agg = AggregatorParams<Real>(bname + ".agg", d, grid_sizes);
                block.conv1_w = ParamTensor<Real>(bname + ".conv1.weight", {27, d, d});
                block.conv2_w = ParamTensor<Real>(bname + ".conv2.weight", {27, d, d});
                block.norm1 = NormParams<Real>(bname + ".norm1", d);
                block.norm2 = NormParams<Real>(bname + ".norm2", d);
                stage.blocks.push_back(std::move(block));
            }
            if (s + 1 < nstages) {
                stage.has_down = true;
                const int dn = config.channels_per_stage[std::size_t(s) + 1];
                stage.down_w = ParamTensor<Real>(sname + ".down.weight", {8, d, dn});
                stage.down_norm = NormParams<Real>(sname + ".down.norm", dn);
            }
        }
        for (int t = 0; t + 1 < nstages; ++t) {
            const int df = config.channels_per_stage[std::size_t(t)];
            const int dc = config.channels_per_stage[std::size_t(t) + 1];
            up.emplace_back("up" + std::to_string(t), dc + df, df);
        }
        head = LinearLayer<Real>("head", config.channels_per_stage[0], config.num_classes);

        register_all();
        init_all();
    }

    void zero_grad() {
        for (auto *p : params) p->zero_grad();
    }

    std::size_t param_count() const {
        std::size_t n = 0;
        for (const auto *p : params) n += p->size();
        return n;
    }

    ParamTensor<Real> *find(const std::string &name) {
        for (auto *p : params)
            if (p->name == name) return p;
        return nullptr;
    }

  private:
    void register_param(ParamTensor<Real> &t) {
        for (const auto *p : params)
            if (p->name == t.name) throw ConfigError("duplicate parameter name " + t.name);
        params.push_back(&t);
    }
    void register_linear(LinearLayer<Real> &l) {
        register_param(l.weight);
        register_param(l.bias);
    }
    void register_norm(NormParams<Real> &n) {
        register_param(n.scale);
        register_param(n.shift);
        const std::string base = n.scale.name.substr(0, n.scale.name.size() - 6); // strip ".scale"
        buffers.emplace_back(base + ".running_mean", &n.running_mean);
        buffers.emplace_back(base + ".running_var", &n.running_var);
    }
    void register_proj(ProjUnit<Real> &p) {
        register_linear(p.lin);
        register_norm(p.norm);
    }

    void register_all() {
        register_param(stem_w);
        register_norm(stem_norm);
        for (auto &stage : stages) {
            for (auto &block : stage.blocks) {
                for (auto &scale : block.scales) {
                    register_proj(scale.proj);
                    register_linear(scale.weight_gen);
                }
                register_linear(block.agg.adp);
                register_proj(block.agg.proj);
                register_proj(block.agg.out);
                register_param(block.conv1_w);
                register_norm(block.norm1);
                register_param(block.conv2_w);
                register_norm(block.norm2);
            }
            if (stage.has_down) {
                register_param(stage.down_w);
                register_norm(stage.down_norm);
            }
        }
        for (auto &u : up) register_linear(u);
        register_linear(head);
    }

    void init_all() {
        Rng rng(config.seed);
        auto init_conv = [&](ParamTensor<Real> &w) {
            w.init_uniform(rng, 1.0 / std::sqrt(double(w.dim(0)) * double(w.dim(1))));
        };
        init_conv(stem_w);
        for (auto &stage : stages) {
            for (auto &block : stage.blocks) {
                for (auto &scale : block.scales) scale.init(rng);
                block.agg.init(rng);
                init_conv(block.conv1_w);
                init_conv(block.conv2_w);
            }
            if (stage.has_down) init_conv(stage.down_w);
        }
        for (auto &u : up) u.init(rng);
        head.init(rng);
    }
};

// ---------------------------------------------------------------------------
// Forward passes
// ---------------------------------------------------------------------------

template <class Real>
struct EncoderStage {
    std::vector<VoxelCoord> coords;
    int stride = 1;
    std::shared_ptr<const KernelMap> subm;
    std::vector<std::shared_ptr<const GridPartition>> parts;
    VarPtr<Real> output;
    std::shared_ptr<const std::vector<int>> parent_rows; // into the next coarser stage
};

// One basic block: ARConv over every pyramid scale, adaptive fusion, two
// submanifold convolutions with norm+activation, identity residual.
template <class Real>
VarPtr<Real> block_forward(Tape<Real> *tape, const VarPtr<Real> &x,
                           const std::vector<std::shared_ptr<const GridPartition>> &parts,
                           const std::shared_ptr<const KernelMap> &subm, BlockParams<Real> &bp,
                           NormMode mode, bool residual) {
    std::vector<std::pair<VarPtr<Real>, std::shared_ptr<const GridPartition>>> scales;
    scales.reserve(parts.size());
    for (std::size_t k = 0; k < parts.size(); ++k)
        scales.emplace_back(arconv_scale(tape, x, parts[k], bp.scales[k], mode), parts[k]);
    auto w = preference_weights(tape, x, bp.agg);
    auto fused = fuse(tape, x, scales, w, bp.agg, mode);
    auto h = relu(tape, normalize(tape, submanifold_conv(tape, fused, bp.conv1_w, subm), bp.norm1, mode));
    h = relu(tape, normalize(tape, submanifold_conv(tape, h, bp.conv2_w, subm), bp.norm2, mode));
    return residual ? add(tape, x, h) : h;
}

namespace detail {

// Parent row of every input voxel in the strided map's output coordinates.
inline std::shared_ptr<const std::vector<int>> parent_rows_of(const StridedMap &smap, int n) {
    auto rows = std::make_shared<std::vector<int>>(std::size_t(n), -1);
    for (const auto &list : smap.map.pairs)
        for (const auto &[j, i] : list) (*rows)[std::size_t(j)] = i;
    for (int j = 0; j < n; ++j)
        if ((*rows)[std::size_t(j)] < 0)
            throw TopologyError("strided map left voxel " + std::to_string(j) + " without a parent");
    return rows;
}

} // namespace detail

// Hierarchical encoder: stem, then per stage the configured blocks and (for
// all but the last stage) a (2,2,2) strided downsampling convolution.
template <class Real>
std::vector<EncoderStage<Real>> encoder_forward(Tape<Real> *tape, ModelParams<Real> &model,
                                                const SparseTensor<Real> &input, NormMode mode) {
    const ModelConfig &cfg = model.config;
    if (input.channels() != cfg.in_channels)
        throw ShapeError("encoder: input has " + std::to_string(input.channels()) +
                         " channels, config expects " + std::to_string(cfg.in_channels));
    if (input.size() == 0) throw EmptyInput("encoder: empty scene");

    const int nstages = cfg.num_stages();
    std::vector<EncoderStage<Real>> out;
    out.resize(std::size_t(nstages));

    std::vector<VoxelCoord> coords = input.coords;
    int stride = input.stride;
    auto x = make_var(input.features);

    for (int s = 0; s < nstages; ++s) {
        auto &stage = out[std::size_t(s)];
        stage.coords = coords;
        stage.stride = stride;
        HashIndex index(coords);
        stage.subm = std::make_shared<const KernelMap>(build_submanifold_map(coords, stride, index));
        for (int g : cfg.effective_grid_sizes(s))
            stage.parts.push_back(std::make_shared<const GridPartition>(partition(coords, stride, g)));

        if (s == 0)
            x = relu(tape, normalize(tape, submanifold_conv(tape, x, model.stem_w, stage.subm),
                                     model.stem_norm, mode));

        for (auto &block : model.stages[std::size_t(s)].blocks)
            x = block_forward(tape, x, stage.parts, stage.subm, block, mode, cfg.residual);
        stage.output = x;

        if (model.stages[std::size_t(s)].has_down) {
            auto smap = std::make_shared<const StridedMap>(build_strided_map(coords, stride));
            stage.parent_rows = detail::parent_rows_of(*smap, int(coords.size()));
            x = relu(tape, normalize(tape, strided_conv(tape, x, model.stages[std::size_t(s)].down_w, smap),
                                     model.stages[std::size_t(s)].down_norm, mode));
            coords = smap->out_coords;
            stride = smap->out_stride;
        }
    }
    return out;
}

// Lightweight decoder: from coarsest to finest, parent lookup + skip
// concatenation + one linear layer per transition. No convolutions.
template <class Real>
VarPtr<Real> decoder_forward(Tape<Real> *tape, ModelParams<Real> &model,
                             const std::vector<EncoderStage<Real>> &stages) {
    const int nstages = int(stages.size());
    VarPtr<Real> cur = stages[std::size_t(nstages) - 1].output;
    for (int t = nstages - 2; t >= 0; --t) {
        const auto &fine = stages[std::size_t(t)];
        if (!fine.parent_rows) throw TopologyError("decoder: missing parent rows for stage " + std::to_string(t));
        cur = parent_upsample(tape, cur, fine.parent_rows, fine.output, model.up[std::size_t(t)].weight,
                              &model.up[std::size_t(t)].bias);
    }
    return cur;
}

template <class Real>
struct ForwardResult {
    VarPtr<Real> logits; // N x num_classes, canonical voxel order
    std::vector<EncoderStage<Real>> stages;
};

// Stem -> encoder -> decoder -> classification head.
template <class Real>
ForwardResult<Real> model_forward(Tape<Real> *tape, ModelParams<Real> &model,
                                  const SparseTensor<Real> &input, NormMode mode) {
    ForwardResult<Real> result;
    result.stages = encoder_forward(tape, model, input, mode);
    auto decoded = decoder_forward(tape, model, result.stages);
    result.logits = model.head.apply(tape, decoded);
    return result;
}

// Receptive-field readout: preference weights of the first block of `stage`
// (0-based), evaluated on the block's input features.
template <class Real>
struct RfReadout {
    Matrix<Real> weights; // N_stage x K
    std::vector<int> grid_sizes;
    std::vector<VoxelCoord> coords;
    int stride = 1;
};

template <class Real>
RfReadout<Real> rf_readout(ModelParams<Real> &model, const SparseTensor<Real> &input, int stage) {
    const ModelConfig &cfg = model.config;
    if (stage < 0 || stage >= cfg.num_stages())
        throw ConfigError("rf_readout: stage " + std::to_string(stage) + " out of range [0," +
                          std::to_string(cfg.num_stages()) + ")");

    std::vector<VoxelCoord> coords = input.coords;
    int stride = input.stride;
    auto x = make_var(input.features);

    for (int s = 0; s <= stage; ++s) {
        HashIndex index(coords);
        auto subm = std::make_shared<const KernelMap>(build_submanifold_map(coords, stride, index));
        std::vector<std::shared_ptr<const GridPartition>> parts;
        for (int g : cfg.effective_grid_sizes(s))
            parts.push_back(std::make_shared<const GridPartition>(partition(coords, stride, g)));

        if (s == 0)
            x = relu<Real>(nullptr, normalize<Real>(nullptr, submanifold_conv<Real>(nullptr, x, model.stem_w, subm),
                                                    model.stem_norm, NormMode::kEval));
        if (s == stage) {
            auto w = preference_weights<Real>(nullptr, x, model.stages[std::size_t(s)].blocks[0].agg);
            RfReadout<Real> r;
            r.weights = w->value;
            r.grid_sizes = cfg.effective_grid_sizes(s);
            r.coords = coords;
            r.stride = stride;
            return r;
        }
        for (auto &block : model.stages[std::size_t(s)].blocks)
            x = block_forward<Real>(nullptr, x, parts, subm, block, NormMode::kEval, cfg.residual);
        auto smap = std::make_shared<const StridedMap>(build_strided_map(coords, stride));
        x = relu<Real>(nullptr, normalize<Real>(nullptr, strided_conv<Real>(nullptr, x, model.stages[std::size_t(s)].down_w, smap),
                                                model.stages[std::size_t(s)].down_norm, NormMode::kEval));
        coords = smap->out_coords;
        stride = smap->out_stride;
    }
    throw ConfigError("rf_readout: unreachable");
}

} // namespace oacnn
