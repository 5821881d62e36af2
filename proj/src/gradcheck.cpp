#include "oacnn/gradcheck.hpp"

namespace oacnn {

namespace {

using gradcheck_detail::nudge_from_zero;
using gradcheck_detail::random_coords;
using gradcheck_detail::random_param;

OpCheck linear_check() {
    struct Fix {
        ParamTensor<double> x, w, b;
    };
    auto fix = std::make_shared<Fix>();
    Rng rng(11);
    fix->x = random_param("x", {7, 5}, rng);
    fix->w = random_param("linear.weight", {5, 4}, rng);
    fix->b = random_param("linear.bias", {4}, rng);
    OpCheck c;
    c.name = "linear";
    c.params = {&fix->x, &fix->w, &fix->b};
    c.forward = [fix](Tape<double> *tape) {
        OpForward f;
        auto x = f.leaf(fix->x, 7, 5);
        f.out = linear(tape, x, fix->w, &fix->b);
        return f;
    };
    return c;
}

OpCheck relu_check() {
    struct Fix {
        ParamTensor<double> x;
    };
    auto fix = std::make_shared<Fix>();
    Rng rng(12);
    fix->x = random_param("x", {6, 5}, rng);
    nudge_from_zero(fix->x);
    OpCheck c;
    c.name = "activation";
    c.params = {&fix->x};
    c.forward = [fix](Tape<double> *tape) {
        OpForward f;
        f.out = relu(tape, f.leaf(fix->x, 6, 5));
        return f;
    };
    return c;
}

OpCheck normalize_check(NormMode mode) {
    struct Fix {
        ParamTensor<double> x;
        NormParams<double> norm;
    };
    auto fix = std::make_shared<Fix>();
    Rng rng(13);
    fix->x = random_param("x", {9, 4}, rng, 1.5);
    fix->norm = NormParams<double>("norm", 4);
    for (auto &v : fix->norm.scale.value) v = rng.uniform(0.5, 1.5);
    for (auto &v : fix->norm.shift.value) v = rng.uniform(-0.5, 0.5);
    for (auto &v : fix->norm.running_mean) v = rng.uniform(-0.3, 0.3);
    for (auto &v : fix->norm.running_var) v = rng.uniform(0.5, 1.5);
    OpCheck c;
    c.name = mode == NormMode::kTrain ? "normalize(train)" : "normalize(eval)";
    c.params = {&fix->x, &fix->norm.scale, &fix->norm.shift};
    c.forward = [fix, mode](Tape<double> *tape) {
        OpForward f;
        f.out = normalize(tape, f.leaf(fix->x, 9, 4), fix->norm, mode);
        return f;
    };
    return c;
}

OpCheck submanifold_conv_check() {
    struct Fix {
        std::vector<VoxelCoord> coords;
        std::shared_ptr<const KernelMap> map;
        ParamTensor<double> x, w;
    };
    auto fix = std::make_shared<Fix>();
    Rng rng(14);
    fix->coords = random_coords(20, 4, rng);
    HashIndex index(fix->coords);
    fix->map = std::make_shared<const KernelMap>(build_submanifold_map(fix->coords, 1, index));
    fix->x = random_param("x", {20, 3}, rng);
    fix->w = random_param("conv.weight", {27, 3, 4}, rng, 0.5);
    OpCheck c;
    c.name = "submanifold_conv";
    c.params = {&fix->x, &fix->w};
    c.forward = [fix](Tape<double> *tape) {
        OpForward f;
        f.out = submanifold_conv(tape, f.leaf(fix->x, 20, 3), fix->w, fix->map);
        return f;
    };
    return c;
}

OpCheck strided_conv_check() {
    struct Fix {
        std::vector<VoxelCoord> coords;
        std::shared_ptr<const StridedMap> map;
        ParamTensor<double> x, w;
    };
    auto fix = std::make_shared<Fix>();
    Rng rng(15);
    fix->coords = random_coords(20, 4, rng);
    fix->map = std::make_shared<const StridedMap>(build_strided_map(fix->coords, 1));
    fix->x = random_param("x", {20, 3}, rng);
    fix->w = random_param("down.weight", {8, 3, 4}, rng, 0.5);
    OpCheck c;
    c.name = "strided_conv";
    c.params = {&fix->x, &fix->w};
    c.forward = [fix](Tape<double> *tape) {
        OpForward f;
        f.out = strided_conv(tape, f.leaf(fix->x, 20, 3), fix->w, fix->map);
        return f;
    };
    return c;
}

OpCheck grid_avg_pool_check() {
    struct Fix {
        std::vector<VoxelCoord> coords;
        std::shared_ptr<const GridPartition> part;
        ParamTensor<double> x;
    };
    auto fix = std::make_shared<Fix>();
    Rng rng(16);
    fix->coords = random_coords(18, 6, rng);
    fix->part = std::make_shared<const GridPartition>(partition(fix->coords, 1, 3));
    fix->x = random_param("x", {18, 4}, rng);
    OpCheck c;
    c.name = "grid_avg_pool";
    c.params = {&fix->x};
    c.forward = [fix](Tape<double> *tape) {
        OpForward f;
        f.out = grid_avg_pool(tape, f.leaf(fix->x, 18, 4), fix->part);
        return f;
    };
    return c;
}

OpCheck concat_check() {
    struct Fix {
        ParamTensor<double> a, b;
    };
    auto fix = std::make_shared<Fix>();
    Rng rng(17);
    fix->a = random_param("a", {6, 3}, rng);
    fix->b = random_param("b", {6, 2}, rng);
    OpCheck c;
    c.name = "concat";
    c.params = {&fix->a, &fix->b};
    c.forward = [fix](Tape<double> *tape) {
        OpForward f;
        f.out = concat_cols(tape, f.leaf(fix->a, 6, 3), f.leaf(fix->b, 6, 2));
        return f;
    };
    return c;
}

OpCheck add_check() {
    struct Fix {
        ParamTensor<double> a, b;
    };
    auto fix = std::make_shared<Fix>();
    Rng rng(18);
    fix->a = random_param("a", {6, 3}, rng);
    fix->b = random_param("b", {6, 3}, rng);
    OpCheck c;
    c.name = "add";
    c.params = {&fix->a, &fix->b};
    c.forward = [fix](Tape<double> *tape) {
        OpForward f;
        f.out = add(tape, f.leaf(fix->a, 6, 3), f.leaf(fix->b, 6, 3));
        return f;
    };
    return c;
}

OpCheck parent_upsample_check() {
    struct Fix {
        ParamTensor<double> coarse, skip, w, b;
        std::shared_ptr<const std::vector<int>> rows;
    };
    auto fix = std::make_shared<Fix>();
    Rng rng(19);
    fix->coarse = random_param("coarse", {5, 3}, rng);
    fix->skip = random_param("skip", {9, 2}, rng);
    fix->w = random_param("up.weight", {5, 4}, rng);
    fix->b = random_param("up.bias", {4}, rng);
    auto rows = std::make_shared<std::vector<int>>();
    for (int i = 0; i < 9; ++i) rows->push_back(rng.uniform_int(0, 4));
    fix->rows = rows;
    OpCheck c;
    c.name = "parent_upsample";
    c.params = {&fix->coarse, &fix->skip, &fix->w, &fix->b};
    c.forward = [fix](Tape<double> *tape) {
        OpForward f;
        f.out = parent_upsample(tape, f.leaf(fix->coarse, 5, 3), fix->rows, f.leaf(fix->skip, 9, 2),
                                fix->w, &fix->b);
        return f;
    };
    return c;
}

// Shared fixture for the arconv ops: 18 voxels, d=4, grid size 4.
struct ArconvFix {
    std::vector<VoxelCoord> coords;
    std::shared_ptr<const GridPartition> part;
    ParamTensor<double> x;
    ArconvScaleParams<double> params{"arconv", 4};

    explicit ArconvFix(std::uint64_t seed) {
        Rng rng(seed);
        coords = random_coords(18, 6, rng);
        part = std::make_shared<const GridPartition>(partition(coords, 1, 4));
        x = random_param("x", {18, 4}, rng);
        Rng init_rng(seed + 1);
        params.init(init_rng);
    }
    std::vector<ParamTensor<double> *> param_list() {
        return {&x,
                &params.proj.lin.weight,
                &params.proj.lin.bias,
                &params.proj.norm.scale,
                &params.proj.norm.shift,
                &params.weight_gen.weight,
                &params.weight_gen.bias};
    }
};

OpCheck centroid_check() {
    auto fix = std::make_shared<ArconvFix>(21);
    OpCheck c;
    c.name = "centroid_features";
    c.params = fix->param_list();
    c.forward = [fix](Tape<double> *tape) {
        OpForward f;
        f.out = centroid_features(tape, f.leaf(fix->x, 18, 4), fix->part, fix->params, NormMode::kTrain);
        return f;
    };
    return c;
}

OpCheck relation_weights_check() {
    auto fix = std::make_shared<ArconvFix>(22);
    OpCheck c;
    c.name = "relation_weights";
    c.params = fix->param_list();
    c.forward = [fix](Tape<double> *tape) {
        OpForward f;
        auto x = f.leaf(fix->x, 18, 4);
        auto ctr = centroid_features(tape, x, fix->part, fix->params, NormMode::kTrain);
        f.out = relation_weights(tape, x, fix->part, ctr, fix->params);
        return f;
    };
    return c;
}

OpCheck normalize_kernel_check() {
    struct Fix {
        std::vector<VoxelCoord> coords;
        std::shared_ptr<const GridPartition> part;
        ParamTensor<double> w;
    };
    auto fix = std::make_shared<Fix>();
    Rng rng(23);
    fix->coords = random_coords(18, 6, rng);
    fix->part = std::make_shared<const GridPartition>(partition(fix->coords, 1, 4));
    fix->w = random_param("kernel", {18, 4}, rng, 2.0);
    OpCheck c;
    c.name = "normalize_kernel";
    c.params = {&fix->w};
    c.forward = [fix](Tape<double> *tape) {
        OpForward f;
        f.out = normalize_kernel(tape, f.leaf(fix->w, 18, 4), fix->part);
        return f;
    };
    return c;
}

OpCheck grid_depthwise_check() {
    struct Fix {
        std::vector<VoxelCoord> coords;
        std::shared_ptr<const GridPartition> part;
        ParamTensor<double> wn, x;
    };
    auto fix = std::make_shared<Fix>();
    Rng rng(24);
    fix->coords = random_coords(18, 6, rng);
    fix->part = std::make_shared<const GridPartition>(partition(fix->coords, 1, 4));
    fix->wn = random_param("kernel", {18, 4}, rng);
    fix->x = random_param("x", {18, 4}, rng);
    OpCheck c;
    c.name = "grid_depthwise";
    c.params = {&fix->wn, &fix->x};
    c.forward = [fix](Tape<double> *tape) {
        OpForward f;
        f.out = grid_depthwise(tape, f.leaf(fix->wn, 18, 4), f.leaf(fix->x, 18, 4), fix->part);
        return f;
    };
    return c;
}

OpCheck arconv_scale_check() {
    auto fix = std::make_shared<ArconvFix>(25);
    OpCheck c;
    c.name = "arconv_scale";
    c.params = fix->param_list();
    c.forward = [fix](Tape<double> *tape) {
        OpForward f;
        f.out = arconv_scale(tape, f.leaf(fix->x, 18, 4), fix->part, fix->params, NormMode::kTrain);
        return f;
    };
    return c;
}

// Aggregator fixture: 16 voxels, d=4, K=2 partitions (sizes 2 and 4).
struct AggFix {
    std::vector<VoxelCoord> coords;
    std::vector<std::shared_ptr<const GridPartition>> parts;
    ParamTensor<double> x;
    AggregatorParams<double> params{"agg", 4, {2, 4}};
    std::vector<ArconvScaleParams<double>> scales;

    explicit AggFix(std::uint64_t seed) {
        Rng rng(seed);
        coords = random_coords(16, 6, rng);
        parts.push_back(std::make_shared<const GridPartition>(partition(coords, 1, 2)));
        parts.push_back(std::make_shared<const GridPartition>(partition(coords, 1, 4)));
        x = random_param("x", {16, 4}, rng);
        scales.emplace_back("scale0", 4);
        scales.emplace_back("scale1", 4);
        Rng init_rng(seed + 1);
        for (auto &s : scales) s.init(init_rng);
        params.init(init_rng);
        // Uniform preferences have zero gradient into adp; perturb so the
        // selector path is exercised.
        for (auto &v : params.adp.weight.value) v = init_rng.uniform(-0.5, 0.5);
        for (auto &v : params.adp.bias.value) v = init_rng.uniform(-0.2, 0.2);
    }
};

OpCheck preference_weights_check() {
    auto fix = std::make_shared<AggFix>(31);
    OpCheck c;
    c.name = "preference_weights";
    c.params = {&fix->x, &fix->params.adp.weight, &fix->params.adp.bias};
    c.forward = [fix](Tape<double> *tape) {
        OpForward f;
        f.out = preference_weights(tape, f.leaf(fix->x, 16, 4), fix->params);
        return f;
    };
    return c;
}

OpCheck scale_mix_check() {
    struct Fix {
        AggFix agg{32};
        ParamTensor<double> w, o0, o1;
    };
    auto fix = std::make_shared<Fix>();
    Rng rng(33);
    fix->w = random_param("pref", {16, 2}, rng);
    fix->o0 = random_param("out0", {fix->agg.parts[0]->grid_count(), 4}, rng);
    fix->o1 = random_param("out1", {fix->agg.parts[1]->grid_count(), 4}, rng);
    OpCheck c;
    c.name = "scale_mix";
    c.params = {&fix->w, &fix->o0, &fix->o1};
    c.forward = [fix](Tape<double> *tape) {
        OpForward f;
        std::vector<std::pair<VarPtr<double>, std::shared_ptr<const GridPartition>>> scales;
        scales.emplace_back(f.leaf(fix->o0, fix->agg.parts[0]->grid_count(), 4), fix->agg.parts[0]);
        scales.emplace_back(f.leaf(fix->o1, fix->agg.parts[1]->grid_count(), 4), fix->agg.parts[1]);
        f.out = scale_mix(tape, f.leaf(fix->w, 16, 2), scales);
        return f;
    };
    return c;
}

OpCheck fuse_check() {
    auto fix = std::make_shared<AggFix>(34);
    OpCheck c;
    c.name = "fuse";
    c.params = {&fix->x,
                &fix->params.adp.weight,
                &fix->params.adp.bias,
                &fix->params.proj.lin.weight,
                &fix->params.proj.lin.bias,
                &fix->params.proj.norm.scale,
                &fix->params.proj.norm.shift,
                &fix->params.out.lin.weight,
                &fix->params.out.lin.bias,
                &fix->params.out.norm.scale,
                &fix->params.out.norm.shift};
    for (auto &s : fix->scales) {
        c.params.push_back(&s.proj.lin.weight);
        c.params.push_back(&s.proj.lin.bias);
        c.params.push_back(&s.proj.norm.scale);
        c.params.push_back(&s.proj.norm.shift);
        c.params.push_back(&s.weight_gen.weight);
        c.params.push_back(&s.weight_gen.bias);
    }
    c.forward = [fix](Tape<double> *tape) {
        OpForward f;
        auto x = f.leaf(fix->x, 16, 4);
        std::vector<std::pair<VarPtr<double>, std::shared_ptr<const GridPartition>>> scales;
        for (std::size_t k = 0; k < fix->parts.size(); ++k)
            scales.emplace_back(arconv_scale(tape, x, fix->parts[k], fix->scales[k], NormMode::kTrain),
                                fix->parts[k]);
        auto w = preference_weights(tape, x, fix->params);
        f.out = fuse(tape, x, scales, w, fix->params, NormMode::kTrain);
        return f;
    };
    return c;
}

} // namespace

// Micro model pinned by the network-scope audit: d=8, 2 stages, K=2, 30
// voxels, 2 classes.
static SparseTensor<double> network_check_input() {
    Rng rng(41);
    SparseTensor<double> input;
    input.coords = gradcheck_detail::random_coords(30, 6, rng);
    input.stride = 1;
    input.features = Matrix<double>(30, 3);
    for (auto &v : input.features.data) v = rng.uniform(-1.0, 1.0);
    for (int i = 0; i < 30; ++i) input.labels.push_back(rng.uniform_int(0, 1));
    return input;
}

std::vector<GradCheckReport> gradcheck_suite(const std::string &scope, double h, bool corrupt) {
    std::vector<OpCheck> checks;
    const bool all = scope == "all";
    if (scope == "ops" || all) {
        checks.push_back(linear_check());
        checks.push_back(relu_check());
        checks.push_back(normalize_check(NormMode::kTrain));
        checks.push_back(normalize_check(NormMode::kEval));
        checks.push_back(submanifold_conv_check());
        checks.push_back(strided_conv_check());
        checks.push_back(grid_avg_pool_check());
        checks.push_back(concat_check());
        checks.push_back(add_check());
        checks.push_back(parent_upsample_check());
    }
    if (scope == "arconv" || all) {
        checks.push_back(centroid_check());
        checks.push_back(relation_weights_check());
        checks.push_back(normalize_kernel_check());
        checks.push_back(grid_depthwise_check());
        checks.push_back(arconv_scale_check());
    }
    if (scope == "aggregator" || all) {
        checks.push_back(preference_weights_check());
        checks.push_back(scale_mix_check());
        checks.push_back(fuse_check());
    }
    const bool network = scope == "network" || all;
    if (checks.empty() && !network)
        throw ConfigError("gradcheck: unknown scope '" + scope +
                          "' (expected ops, arconv, aggregator, network or all)");

    std::vector<GradCheckReport> reports;
    bool first = true;
    for (auto &c : checks) {
        reports.push_back(check_op(c, h, 91, corrupt && first ? 5e-3 : 0.0));
        first = false;
    }
    if (network) {
        ModelConfig micro;
        micro.blocks_per_stage = {1, 1};
        micro.channels_per_stage = {8, 8};
        micro.grid_cells_per_stage = {{2, 4}, {2, 4}};
        micro.in_channels = 3;
        micro.num_classes = 2;
        micro.seed = 5;
        reports.push_back(check_model(micro, network_check_input(), h, corrupt && first ? 5e-3 : 0.0));
    }
    return reports;
}

} // namespace oacnn
