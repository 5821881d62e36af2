// Command-line front end: voxelize, train, infer, rf-viz, gradcheck, bench.
// Exit codes: 0 success, 1 verification failure, 2 usage/config error, 3 IO
// error. OA_SEED overrides the default seed when --seed is not given.

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

#include <CLI11.hpp>
#include <json.hpp>

#include "oacnn/checkpoint.hpp"
#include "oacnn/gradcheck.hpp"
#include "oacnn/io.hpp"
#include "oacnn/scene_io.hpp"
#include "oacnn/synth.hpp"
#include "oacnn/trainer.hpp"
#include "oacnn/version.hpp"

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;
using Real = float; // training/inference numerics; gradcheck runs in double

namespace {

constexpr int kExitVerification = 1;
constexpr int kExitUsage = 2;
constexpr int kExitIo = 3;

struct ManifestInfo {
    std::string command;
    json config;
    std::uint64_t seed = 0;
    std::vector<std::string> inputs, outputs;
    std::chrono::steady_clock::time_point started = std::chrono::steady_clock::now();
};

void write_manifest(const ManifestInfo &info, const std::string &path) {
    json j;
    j["command"] = info.command;
    j["config"] = info.config;
    j["seed"] = info.seed;
    j["tool_version"] = oacnn::kToolVersion;
    j["inputs"] = info.inputs;
    j["outputs"] = info.outputs;
    j["wall_clock_sec"] =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - info.started).count();
    std::ofstream out(path, std::ios::binary);
    if (!out) throw oacnn::IoError("cannot write manifest " + path);
    out << j.dump(2) << "\n";
}

std::uint64_t env_seed(std::uint64_t fallback) {
    if (const char *env = std::getenv("OA_SEED")) return std::strtoull(env, nullptr, 10);
    return fallback;
}

void apply_threads(int threads) {
#ifdef _OPENMP
    if (threads > 0) omp_set_num_threads(threads);
#else
    (void)threads;
#endif
}

// Class palette for prediction PLYs (20 entries, wraps around).
const std::array<std::array<int, 3>, 20> kClassPalette = {{
    {171, 198, 230}, {143, 223, 142}, {0, 120, 177},   {255, 188, 126}, {189, 189, 57},
    {144, 86, 76},   {255, 152, 153}, {222, 40, 47},   {197, 176, 212}, {150, 103, 185},
    {200, 156, 149}, {0, 190, 206},   {252, 183, 210}, {219, 219, 146}, {255, 127, 0},
    {150, 150, 150}, {227, 119, 194}, {213, 92, 176},  {94, 106, 211},  {82, 84, 163},
}};

oacnn::PointCloud colored_voxel_cloud(const std::vector<oacnn::VoxelCoord> &coords, int stride,
                                      double voxel_size,
                                      const std::vector<std::array<double, 3>> &colors) {
    oacnn::PointCloud pc;
    pc.positions.resize(coords.size());
    pc.features = oacnn::Matrix<double>(int(coords.size()), 3);
    const double half = 0.5 * stride * voxel_size;
    for (std::size_t i = 0; i < coords.size(); ++i) {
        pc.positions[i] = {coords[i].x * voxel_size + half, coords[i].y * voxel_size + half,
                           coords[i].z * voxel_size + half};
        for (int c = 0; c < 3; ++c) pc.features(int(i), c) = colors[i][std::size_t(c)];
    }
    return pc;
}

// Loads a scene for inference-style commands: point files are voxelized at
// the model's voxel size, .oavx scenes are taken as stored.
oacnn::SparseTensor<Real> load_input_scene(const std::string &path, const oacnn::ModelConfig &cfg) {
    const auto dot = path.rfind('.');
    const std::string ext = dot == std::string::npos ? "" : path.substr(dot);
    oacnn::SparseTensor<Real> scene;
    if (ext == ".oavx") scene = oacnn::load_scene<Real>(path);
    else scene = oacnn::voxelize<Real>(oacnn::read_point_file(path), cfg.voxel_size);
    if (scene.channels() != cfg.in_channels)
        throw oacnn::CompatError("input has " + std::to_string(scene.channels()) +
                                 " feature channels, checkpoint expects " +
                                 std::to_string(cfg.in_channels));
    return scene;
}

// ---------------------------------------------------------------------------
// voxelize
// ---------------------------------------------------------------------------

struct VoxelizeArgs {
    std::string input, output;
    double voxel_size = oacnn::kDefaultVoxelSize;
};

int run_voxelize(const VoxelizeArgs &args) {
    ManifestInfo info;
    info.command = "voxelize";
    info.config = {{"voxel_size", args.voxel_size}};
    info.inputs = {args.input};
    info.outputs = {args.output};

    const oacnn::PointCloud pc = oacnn::read_point_file(args.input);
    const auto scene = oacnn::voxelize<float>(pc, args.voxel_size);
    oacnn::save_scene(args.output, scene);
    write_manifest(info, args.output + ".manifest.json");
    std::cout << "voxelized " << pc.size() << " points -> " << scene.size() << " voxels ("
              << args.output << ")\n";
    return 0;
}

// ---------------------------------------------------------------------------
// train
// ---------------------------------------------------------------------------

struct TrainArgs {
    std::string model = "micro";
    std::string data = "synth:100-163";
    std::string out;
    int epochs = 40;
    int batch = 4;
    int eval_scenes = -1; // default: quarter of the data
    int max_points = 20000;
    int scene_points = 8000;
    std::uint64_t seed = 1;
    double voxel_size = oacnn::kDefaultVoxelSize;
    double lr = 1e-3;
    double weight_decay = 0.02;
    double grid_scale = 1.0;
    int num_classes = oacnn::kSynthClassCount;
    bool no_residual = false;
    bool no_adaptive = false;
    bool no_augment = false;
};

int run_train(const TrainArgs &args) {
    oacnn::TrainOptions opt;
    opt.model = oacnn::ModelConfig::preset(args.model);
    opt.model.in_channels = 3;
    opt.model.num_classes = args.num_classes;
    opt.model.voxel_size = args.voxel_size;
    opt.model.seed = args.seed;
    opt.model.residual = !args.no_residual;
    opt.model.adaptive_aggregator = !args.no_adaptive;
    opt.model.grid_scale = args.grid_scale;
    opt.epochs = args.epochs;
    opt.batch_scenes = args.batch;
    opt.max_points = args.max_points;
    opt.augment = !args.no_augment;
    opt.lr = args.lr;
    opt.weight_decay = args.weight_decay;
    opt.scene.points_per_scene = args.scene_points;

    ManifestInfo info;
    info.command = "train";
    info.seed = args.seed;

    if (args.data.rfind("synth:", 0) == 0) {
        const std::string range = args.data.substr(6);
        const auto dash = range.find('-');
        if (dash == std::string::npos)
            throw oacnn::ConfigError("train: --data synth:<begin>-<end>, got " + args.data);
        const std::uint64_t begin = std::strtoull(range.substr(0, dash).c_str(), nullptr, 10);
        const std::uint64_t end = std::strtoull(range.substr(dash + 1).c_str(), nullptr, 10);
        if (end < begin) throw oacnn::ConfigError("train: empty synth seed range");
        const int total = int(end - begin + 1);
        opt.eval_scenes = args.eval_scenes >= 0 ? args.eval_scenes : total / 4;
        if (opt.eval_scenes >= total) throw oacnn::ConfigError("train: eval scenes exhaust the data");
        opt.train_scenes = total - opt.eval_scenes;
        opt.data_seed = begin;
    } else {
        std::vector<fs::path> files;
        for (const auto &entry : fs::directory_iterator(args.data)) {
            const auto ext = entry.path().extension();
            if (ext == ".ply" || ext == ".txt") files.push_back(entry.path());
        }
        if (files.empty()) throw oacnn::IoError("train: no .ply/.txt files in " + args.data);
        std::sort(files.begin(), files.end());
        const int total = int(files.size());
        const int eval = args.eval_scenes >= 0 ? args.eval_scenes : total / 4;
        if (eval >= total) throw oacnn::ConfigError("train: eval scenes exhaust the data");
        for (int i = 0; i < total; ++i) {
            auto pc = oacnn::read_point_file(files[std::size_t(i)].string());
            if (pc.labels.empty())
                throw oacnn::ConfigError("train: " + files[std::size_t(i)].string() + " has no labels");
            if (i < total - eval) opt.external_train.push_back(std::move(pc));
            else opt.external_eval.push_back(std::move(pc));
            info.inputs.push_back(files[std::size_t(i)].string());
        }
    }

    fs::create_directories(args.out);
    opt.metrics_path = (fs::path(args.out) / "metrics.jsonl").string();
    opt.checkpoint_path = (fs::path(args.out) / "checkpoint.oacn").string();
    info.outputs = {opt.metrics_path, opt.checkpoint_path};
    info.config = {{"model", args.model},
                   {"data", args.data},
                   {"epochs", args.epochs},
                   {"batch", args.batch},
                   {"train_scenes", opt.train_scenes},
                   {"eval_scenes", opt.eval_scenes},
                   {"max_points", args.max_points},
                   {"voxel_size", args.voxel_size},
                   {"lr", args.lr},
                   {"weight_decay", args.weight_decay},
                   {"residual", !args.no_residual},
                   {"adaptive_aggregator", !args.no_adaptive},
                   {"grid_scale", args.grid_scale}};

    const auto result = oacnn::train_loop<Real>(opt);
    for (const auto &row : result.rows)
        std::cout << "epoch " << row.epoch << " loss " << row.train_loss << " acc " << row.eval_acc
                  << " miou " << row.eval_miou << "\n";
    write_manifest(info, (fs::path(args.out) / "manifest.json").string());
    return 0;
}

// ---------------------------------------------------------------------------
// infer
// ---------------------------------------------------------------------------

struct InferArgs {
    std::string ckpt, input, output_labels, output_ply;
};

int run_infer(const InferArgs &args) {
    ManifestInfo info;
    info.command = "infer";
    info.inputs = {args.ckpt, args.input};

    auto model = oacnn::load_model<Real>(args.ckpt);
    const auto scene = load_input_scene(args.input, model->config);
    auto fwd = oacnn::model_forward<Real>(nullptr, *model, scene, oacnn::NormMode::kEval);
    const std::vector<int> pred = oacnn::predict_labels(fwd.logits->value);

    {
        std::ofstream out(args.output_labels, std::ios::binary);
        if (!out) throw oacnn::IoError("cannot write " + args.output_labels);
        for (int label : pred) out << label << "\n";
    }
    info.outputs = {args.output_labels};
    if (!args.output_ply.empty()) {
        std::vector<std::array<double, 3>> colors(pred.size());
        for (std::size_t i = 0; i < pred.size(); ++i) {
            const auto &rgb = kClassPalette[std::size_t(pred[i]) % kClassPalette.size()];
            colors[i] = {rgb[0] / 255.0, rgb[1] / 255.0, rgb[2] / 255.0};
        }
        oacnn::write_ply(args.output_ply,
                         colored_voxel_cloud(scene.coords, scene.stride, model->config.voxel_size, colors));
        info.outputs.push_back(args.output_ply);
    }
    info.config = {{"voxels", scene.size()}, {"num_classes", model->config.num_classes}};
    write_manifest(info, args.output_labels + ".manifest.json");
    std::cout << "labeled " << pred.size() << " voxels -> " << args.output_labels << "\n";
    return 0;
}

// ---------------------------------------------------------------------------
// rf-viz
// ---------------------------------------------------------------------------

struct RfVizArgs {
    std::string ckpt, input, output_ply;
    int stage = 1; // 1-based
};

int run_rfviz(const RfVizArgs &args) {
    ManifestInfo info;
    info.command = "rf-viz";
    info.inputs = {args.ckpt, args.input};
    info.outputs = {args.output_ply};

    auto model = oacnn::load_model<Real>(args.ckpt);
    if (args.stage < 1 || args.stage > model->config.num_stages())
        throw oacnn::ConfigError("rf-viz: stage " + std::to_string(args.stage) + " out of range [1," +
                                 std::to_string(model->config.num_stages()) + "]");
    const auto scene = load_input_scene(args.input, model->config);
    const auto readout = oacnn::rf_readout(*model, scene, args.stage - 1);
    const std::vector<double> r = oacnn::receptive_field_sizes(readout.weights, readout.grid_sizes);

    // Linear colormap: blue (0,0,255) at min grid size, red (255,0,0) at max.
    const double lo = readout.grid_sizes.front(), hi = readout.grid_sizes.back();
    std::vector<std::array<double, 3>> colors(r.size());
    for (std::size_t i = 0; i < r.size(); ++i) {
        const double t = hi > lo ? (r[i] - lo) / (hi - lo) : 0.5;
        colors[i] = {t, 0.0, 1.0 - t};
    }
    oacnn::write_ply(args.output_ply, colored_voxel_cloud(readout.coords, readout.stride,
                                                          model->config.voxel_size, colors));
    info.config = {{"stage", args.stage},
                   {"grid_sizes", readout.grid_sizes},
                   {"r_min", *std::min_element(r.begin(), r.end())},
                   {"r_max", *std::max_element(r.begin(), r.end())}};
    write_manifest(info, args.output_ply + ".manifest.json");
    std::cout << "rf sizes in [" << *std::min_element(r.begin(), r.end()) << ", "
              << *std::max_element(r.begin(), r.end()) << "] voxels over " << r.size()
              << " voxels -> " << args.output_ply << "\n";
    return 0;
}

// ---------------------------------------------------------------------------
// gradcheck
// ---------------------------------------------------------------------------

struct GradcheckArgs {
    std::string scope = "all";
    double tol = 1e-4;
    bool inject_fault = false; // negative-control fixture
    std::string report;
};

int run_gradcheck(const GradcheckArgs &args) {
    const auto reports = oacnn::gradcheck_suite(args.scope, 1e-5, args.inject_fault);
    bool ok = true;
    json jreports = json::array();
    for (const auto &r : reports) {
        const bool pass = r.pass(args.tol);
        ok = ok && pass;
        std::printf("%-20s max_rel_err %.3e (%zu values, worst %s) %s\n", r.op.c_str(),
                    r.max_rel_err, r.checked, r.worst_param.empty() ? "-" : r.worst_param.c_str(),
                    pass ? "PASS" : "FAIL");
        jreports.push_back({{"op", r.op},
                            {"max_rel_err", r.max_rel_err},
                            {"checked", r.checked},
                            {"worst_param", r.worst_param},
                            {"pass", pass}});
    }
    if (!args.report.empty()) {
        ManifestInfo info;
        info.command = "gradcheck";
        info.config = {{"scope", args.scope}, {"tol", args.tol}};
        info.outputs = {args.report};
        std::ofstream out(args.report, std::ios::binary);
        if (!out) throw oacnn::IoError("cannot write " + args.report);
        out << jreports.dump(2) << "\n";
        out.close();
        write_manifest(info, args.report + ".manifest.json");
    }
    return ok ? 0 : kExitVerification;
}

// ---------------------------------------------------------------------------
// bench
// ---------------------------------------------------------------------------

struct BenchArgs {
    std::string model = "S";
    int voxels = 50000;
    int repeat = 3;
    int threads = 0;
    std::uint64_t seed = 1;
    std::string out;
};

long peak_rss_kb() {
    std::ifstream in("/proc/self/status");
    std::string line;
    while (std::getline(in, line))
        if (line.rfind("VmHWM:", 0) == 0) return std::strtol(line.c_str() + 6, nullptr, 10);
    return -1;
}

int run_bench(const BenchArgs &args) {
    oacnn::ModelConfig cfg = oacnn::ModelConfig::preset(args.model);
    cfg.in_channels = 3;
    cfg.num_classes = oacnn::kSynthClassCount;
    cfg.seed = args.seed;
    oacnn::ModelParams<Real> model(cfg);

    // Random voxels at fixed 10% occupancy so neighborhood density, and with
    // it work per voxel, stays constant as N grows.
    oacnn::SparseTensor<Real> scene;
    scene.stride = 1;
    {
        const double density = 0.10;
        const int side = std::max(2, int(std::ceil(std::cbrt(double(args.voxels) / density))));
        oacnn::Rng rng(args.seed ^ 0xb5297a4d3f852c1dull);
        std::set<std::tuple<int, int, int>> seen;
        while (int(scene.coords.size()) < args.voxels) {
            const int x = rng.uniform_int(0, side - 1);
            const int y = rng.uniform_int(0, side - 1);
            const int z = rng.uniform_int(0, side - 1);
            if (seen.insert({x, y, z}).second)
                scene.coords.push_back({std::int32_t(x), std::int32_t(y), std::int32_t(z), 0});
        }
        std::sort(scene.coords.begin(), scene.coords.end(), oacnn::coord_less);
        scene.features = oacnn::Matrix<Real>(args.voxels, 3);
        for (auto &v : scene.features.data) v = Real(rng.uniform());
    }

    std::vector<double> times_ms;
    for (int r = 0; r < args.repeat; ++r) {
        const auto t0 = std::chrono::steady_clock::now();
        auto fwd = oacnn::model_forward<Real>(nullptr, model, scene, oacnn::NormMode::kEval);
        const auto t1 = std::chrono::steady_clock::now();
        if (fwd.logits->value.rows != args.voxels) throw oacnn::ShapeError("bench: bad logits");
        times_ms.push_back(std::chrono::duration<double, std::milli>(t1 - t0).count());
    }
    double mean = 0;
    for (double t : times_ms) mean += t;
    mean /= double(times_ms.size());
    double var = 0;
    for (double t : times_ms) var += (t - mean) * (t - mean);
    const double stddev = times_ms.size() > 1 ? std::sqrt(var / double(times_ms.size() - 1)) : 0.0;

    json j;
    j["model"] = args.model;
    j["voxels"] = args.voxels;
    j["repeat"] = args.repeat;
#ifdef _OPENMP
    j["threads"] = omp_get_max_threads();
#else
    j["threads"] = 1;
#endif
    j["times_ms"] = times_ms;
    j["mean_ms"] = mean;
    j["stddev_ms"] = stddev;
    j["voxels_per_sec"] = double(args.voxels) / (mean / 1000.0);
    j["peak_rss_mb"] = double(peak_rss_kb()) / 1024.0;
    std::cout << j.dump(2) << "\n";
    if (!args.out.empty()) {
        ManifestInfo info;
        info.command = "bench";
        info.seed = args.seed;
        info.config = {{"model", args.model}, {"voxels", args.voxels}, {"repeat", args.repeat}};
        info.outputs = {args.out};
        std::ofstream out(args.out, std::ios::binary);
        if (!out) throw oacnn::IoError("cannot write " + args.out);
        out << j.dump(2) << "\n";
        out.close();
        write_manifest(info, args.out + ".manifest.json");
    }
    return 0;
}

} // namespace

int main(int argc, char **argv) {
    CLI::App app{"sparse 3D convolutional engine with adaptive relation convolution"};
    app.require_subcommand(1);
    app.set_version_flag("--version", oacnn::kToolVersion);

    int threads = 0;
    app.add_option("--threads", threads, "worker threads (default: hardware parallelism)")
        ->capture_default_str();

    VoxelizeArgs vox;
    auto *cmd_vox = app.add_subcommand("voxelize", "quantize a point cloud into a voxel scene");
    cmd_vox->add_option("--input", vox.input, "PLY or text point file")->required();
    cmd_vox->add_option("--voxel-size", vox.voxel_size, "voxel edge length in meters")
        ->capture_default_str();
    cmd_vox->add_option("--output", vox.output, "output scene (.oavx)")->required();

    TrainArgs train;
    auto *cmd_train = app.add_subcommand("train", "train a model on synthetic or file scenes");
    cmd_train->add_option("--model", train.model, "S, B, L or micro")->capture_default_str();
    cmd_train->add_option("--data", train.data, "synth:<begin>-<end> or a directory of labeled point files")
        ->capture_default_str();
    cmd_train->add_option("--epochs", train.epochs)->capture_default_str();
    cmd_train->add_option("--batch", train.batch, "scenes per optimizer step")->capture_default_str();
    cmd_train->add_option("--eval-scenes", train.eval_scenes, "held-out scene count (default: 1/4)");
    cmd_train->add_option("--max-points", train.max_points, "per-scene point cap")->capture_default_str();
    cmd_train->add_option("--scene-points", train.scene_points, "points per synthetic scene")
        ->capture_default_str();
    cmd_train->add_option("--seed", train.seed, "model init / loop seed")->capture_default_str();
    cmd_train->add_option("--voxel-size", train.voxel_size)->capture_default_str();
    cmd_train->add_option("--lr", train.lr)->capture_default_str();
    cmd_train->add_option("--weight-decay", train.weight_decay)->capture_default_str();
    cmd_train->add_option("--grid-scale", train.grid_scale, "multiplier on all pyramid grid sizes")
        ->capture_default_str();
    cmd_train->add_option("--num-classes", train.num_classes)->capture_default_str();
    cmd_train->add_flag("--no-residual", train.no_residual, "disable block residual connections");
    cmd_train->add_flag("--no-adaptive", train.no_adaptive,
                        "single-scale ablation: middle grid size only, no adaptive weighting");
    cmd_train->add_flag("--no-augment", train.no_augment, "disable flip/scale augmentation");
    cmd_train->add_option("--out", train.out, "output directory")->required();

    InferArgs infer;
    auto *cmd_infer = app.add_subcommand("infer", "predict per-voxel classes");
    cmd_infer->add_option("--ckpt", infer.ckpt)->required();
    cmd_infer->add_option("--input", infer.input, "PLY/text/.oavx scene")->required();
    cmd_infer->add_option("--output-labels", infer.output_labels)->required();
    cmd_infer->add_option("--output-ply", infer.output_ply, "optional class-colored PLY");

    RfVizArgs rfviz;
    auto *cmd_rfviz = app.add_subcommand("rf-viz", "receptive-field size visualization");
    cmd_rfviz->add_option("--ckpt", rfviz.ckpt)->required();
    cmd_rfviz->add_option("--input", rfviz.input)->required();
    cmd_rfviz->add_option("--stage", rfviz.stage, "stage whose first block is probed (1-based)")
        ->capture_default_str();
    cmd_rfviz->add_option("--output-ply", rfviz.output_ply)->required();

    GradcheckArgs grad;
    auto *cmd_grad = app.add_subcommand("gradcheck", "finite-difference gradient audit");
    cmd_grad->add_option("--scope", grad.scope, "ops, arconv, aggregator, network or all")
        ->capture_default_str();
    cmd_grad->add_option("--tol", grad.tol, "max relative error")->capture_default_str();
    cmd_grad->add_option("--report", grad.report, "optional JSON report path");
    cmd_grad->add_flag("--inject-fault", grad.inject_fault,
                       "corrupt one gradient on purpose (negative control)");

    BenchArgs bench;
    auto *cmd_bench = app.add_subcommand("bench", "forward throughput benchmark");
    cmd_bench->add_option("--model", bench.model)->capture_default_str();
    cmd_bench->add_option("--voxels", bench.voxels)->capture_default_str();
    cmd_bench->add_option("--repeat", bench.repeat)->capture_default_str();
    cmd_bench->add_option("--seed", bench.seed)->capture_default_str();
    cmd_bench->add_option("--out", bench.out, "optional JSON output path");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError &e) {
        return app.exit(e) == 0 ? 0 : kExitUsage;
    }

    try {
        apply_threads(threads);
        if (cmd_train->count() && !cmd_train->count("--seed")) train.seed = env_seed(train.seed);
        if (cmd_bench->count() && !cmd_bench->count("--seed")) bench.seed = env_seed(bench.seed);

        if (cmd_vox->count()) return run_voxelize(vox);
        if (cmd_train->count()) return run_train(train);
        if (cmd_infer->count()) return run_infer(infer);
        if (cmd_rfviz->count()) return run_rfviz(rfviz);
        if (cmd_grad->count()) return run_gradcheck(grad);
        if (cmd_bench->count()) return run_bench(bench);
    } catch (const oacnn::ConfigError &e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const oacnn::CompatError &e) {
        std::cerr << "compatibility error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const oacnn::ShapeError &e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const oacnn::LabelError &e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const oacnn::InvalidGridSize &e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const oacnn::IoError &e) {
        std::cerr << "io error: " << e.what() << "\n";
        return kExitIo;
    } catch (const oacnn::EmptyInput &e) {
        std::cerr << "io error: " << e.what() << "\n";
        return kExitIo;
    } catch (const oacnn::InvalidGeometry &e) {
        std::cerr << "io error: " << e.what() << "\n";
        return kExitIo;
    } catch (const oacnn::CoordOverflow &e) {
        std::cerr << "io error: " << e.what() << "\n";
        return kExitIo;
    } catch (const std::filesystem::filesystem_error &e) {
        std::cerr << "io error: " << e.what() << "\n";
        return kExitIo;
    } catch (const oacnn::Error &e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitVerification;
    }
    return 0;
}
