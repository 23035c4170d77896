// Command-line front end: scene generation, streaming runs, ablation sweeps,
// metric evaluation of dumped grids, and a quick self-check suite.

#include "streamocc/error.hpp"
#include "streamocc/metrics.hpp"
#include "streamocc/parallel.hpp"
#include "streamocc/pipeline.hpp"
#include "streamocc/rng.hpp"
#include "streamocc/run_config.hpp"
#include "streamocc/scene.hpp"

#include <CLI11.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>

namespace fs = std::filesystem;
using namespace streamocc;

namespace {

void write_text_file(const std::string& path, const std::string& content) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw InputError("cannot write " + path);
    f << content;
    if (!f.good()) throw InputError("I/O failure writing " + path);
}

SceneConfig scene_config_or_default(const std::string& scene_path) {
    if (scene_path.empty()) return SceneConfig::default_config();
    if (!fs::exists(scene_path)) throw InputError("scene config not found: " + scene_path);
    return parse_scene_config(scene_path);
}

Eigen::Vector3d origin_inside(const GridSpec& spec, const Eigen::Vector3d& wanted) {
    const Eigen::Vector3d lo = spec.min_corner;
    const Eigen::Vector3d hi = spec.max_corner();
    if (wanted.x() >= lo.x() && wanted.x() <= hi.x() && wanted.y() >= lo.y() &&
        wanted.y() <= hi.y() && wanted.z() >= lo.z() && wanted.z() <= hi.z()) {
        return wanted;
    }
    return 0.5 * (lo + hi);
}

bool grids_equal(const GridSpec& a, const GridSpec& b) {
    return a.dims == b.dims && a.resolution == b.resolution &&
           (a.min_corner - b.min_corner).cwiseAbs().maxCoeff() < 1e-12 && a.frame == b.frame;
}

int cmd_gen_scene(const std::string& scene_path, std::uint64_t seed, const std::string& out_dir) {
    const SceneConfig cfg = scene_config_or_default(scene_path);
    const auto frames = generate_scene(cfg, seed);
    save_scene_dir(out_dir, frames, cfg.grid.resolution);
    std::cout << "wrote " << frames.size() << " frames to " << out_dir << "\n";
    return 0;
}

int cmd_run(const std::string& scene_path, const std::string& config_path,
            const std::string& weights_path, bool random_weights, std::uint64_t seed,
            const std::string& out_dir, const std::string& ablation, bool dump_pred,
            bool emit_json) {
    const SceneConfig scene_cfg = scene_config_or_default(scene_path);

    RunConfig run;
    if (!config_path.empty()) {
        if (!fs::exists(config_path)) throw ConfigError("run config not found: " + config_path);
        run = parse_run_config(config_path);
    }
    PipelineConfig& pc = run.pipeline;
    if (run.has_grid) {
        if (!grids_equal(pc.grid, scene_cfg.grid)) {
            throw ConfigError("run config grid does not match the scene grid");
        }
    } else {
        pc.grid = scene_cfg.grid;
    }
    int c_init = 1;
    for (const auto& cam : scene_cfg.cameras) c_init = std::max(c_init, cam.feature_channels);
    pc.c_init = c_init;
    pc.detector.seed = seed;
    pc.ray_origin = origin_inside(pc.grid, pc.ray_origin);

    if (ablation == "base") {
        pc.enable_stream_agg = false;
        pc.enable_query_agg = false;
    } else if (ablation == "stream") {
        pc.enable_stream_agg = true;
        pc.enable_query_agg = false;
    } else if (ablation == "full") {
        pc.enable_stream_agg = true;
        pc.enable_query_agg = true;
    } else if (!ablation.empty()) {
        throw ConfigError("unknown ablation '" + ablation + "' (base|stream|full)");
    }

    PipelineParams params = PipelineParams::make(pc);
    if (!weights_path.empty()) {
        if (!fs::exists(weights_path)) throw ConfigError("weight manifest not found: " + weights_path);
        params.load(weights_path);
    } else if (random_weights) {
        params.init_random(seed);
    } else {
        throw ConfigError("no weights given: pass --weights <manifest> or --random-weights");
    }

    const auto frames = generate_scene(scene_cfg, seed);
    const SequenceResult result = run_sequence(frames, pc, params);

    fs::create_directories(out_dir);
    write_text_file(out_dir + "/report.txt", result.report.to_text());
    if (emit_json) write_text_file(out_dir + "/report.json", result.report.to_json());
    if (dump_pred) {
        for (std::size_t i = 0; i < result.outputs.size(); ++i) {
            char name[64];
            std::snprintf(name, sizeof(name), "pred_%06d.occ", frames[i].timestep);
            save_semantic_grid(out_dir + "/" + name, result.outputs[i].labels,
                               pc.grid.resolution);
        }
    }

    std::cout << result.report.to_text();
    std::fprintf(stderr,
                 "mean per-stage latency (ms): lift %.2f fpn %.2f stream %.2f aux %.2f "
                 "query %.2f decode %.2f total %.2f\n",
                 result.mean_timings.lift_ms, result.mean_timings.fpn_ms,
                 result.mean_timings.stream_ms, result.mean_timings.aux_ms,
                 result.mean_timings.query_ms, result.mean_timings.decode_ms,
                 result.mean_timings.total_ms);
    return 0;
}

std::map<int, fs::path> scan_grid_dumps(const std::string& dir) {
    if (!fs::is_directory(dir)) throw InputError("not a directory: " + dir);
    std::map<int, fs::path> out;
    for (const auto& entry : fs::directory_iterator(dir)) {
        const fs::path& p = entry.path();
        if (p.extension() != ".occ") continue;
        const std::string stem = p.stem().string();
        // Frame index = trailing digits of the stem.
        std::size_t pos = stem.size();
        while (pos > 0 && std::isdigit(static_cast<unsigned char>(stem[pos - 1]))) --pos;
        if (pos == stem.size()) continue;
        out[std::stoi(stem.substr(pos))] = p;
    }
    if (out.empty()) throw InputError("no .occ grid dumps found in " + dir);
    return out;
}

int cmd_eval(const std::string& pred_dir, const std::string& gt_dir,
             const std::string& config_path, bool with_rayiou, bool use_mask, bool emit_json,
             const std::string& out_path) {
    const auto preds = scan_grid_dumps(pred_dir);
    const auto gts = scan_grid_dumps(gt_dir);

    std::string missing;
    for (const auto& [idx, path] : gts) {
        if (!preds.count(idx)) missing += (missing.empty() ? "" : ", ") + std::to_string(idx);
    }
    for (const auto& [idx, path] : preds) {
        if (!gts.count(idx)) missing += (missing.empty() ? "" : ", ") + std::to_string(idx);
    }
    if (!missing.empty()) {
        throw InputError("frame sets differ between " + pred_dir + " and " + gt_dir +
                         " (unmatched frames: " + missing + ")");
    }

    GridSpec spec;
    bool have_spec = false;
    if (!config_path.empty()) {
        const RunConfig rc = parse_run_config(config_path);
        if (rc.has_grid) {
            spec = rc.pipeline.grid;
            have_spec = true;
        }
    }
    if (with_rayiou && !have_spec) {
        throw ConfigError("--rayiou needs --config with a [grid] block for the metric geometry");
    }

    std::optional<ConfusionCounts> confusion;
    std::optional<RayCounts> rays;
    RaySetConfig ray_cfg;
    int frames = 0;
    for (const auto& [idx, gt_path] : gts) {
        double res = 0.0;
        const SemanticGrid gt = load_semantic_grid(gt_path.string(), &res);
        const SemanticGrid pred = load_semantic_grid(preds.at(idx).string());
        if (pred.dims != gt.dims) {
            throw InputError("frame " + std::to_string(idx) + ": pred/gt dims differ");
        }
        const int nc = std::max(pred.num_classes, gt.num_classes);
        if (!confusion) confusion.emplace(nc);
        confusion->accumulate(pred, gt, use_mask);
        if (with_rayiou) {
            if (!rays) rays.emplace(nc);
            rays->accumulate(pred, gt, spec, origin_inside(spec, Eigen::Vector3d::Zero()),
                             ray_cfg);
        }
        ++frames;
    }

    MetricReport report;
    report.frames = frames;
    report.num_classes = confusion->num_classes;
    const IouResult iou = iou_from_confusion(*confusion);
    report.per_class_iou = iou.per_class;
    report.miou = iou.miou;
    report.geometry_iou = iou.geometry_iou;
    if (rays) {
        report.has_rayiou = true;
        report.ray = rayiou_from_counts(*rays);
    }

    std::cout << report.to_text();
    if (!out_path.empty()) {
        write_text_file(out_path, emit_json ? report.to_json() : report.to_text());
    } else if (emit_json) {
        std::cout << report.to_json();
    }
    return 0;
}

// Fast invariant sweep over the numeric core; exits nonzero if anything trips.
int cmd_selfcheck() {
    int failures = 0;
    const auto check = [&](const char* name, bool ok) {
        std::cout << (ok ? "[PASS] " : "[FAIL] ") << name << "\n";
        if (!ok) ++failures;
    };

    {
        Rng rng(7);
        EgoPose a{0, compose(RigidTransform::rot_z(rng.uniform(-3, 3)),
                             RigidTransform::translate(rng.uniform(-5, 5), rng.uniform(-5, 5), 0))};
        const RigidTransform t = relative_transform(a, a);
        check("geometry: relative_transform(a, a) is identity",
              t.orthonormality_error() < 1e-12 &&
                  (t.rotation - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff() < 1e-12 &&
                  t.translation.cwiseAbs().maxCoeff() < 1e-12);
    }
    {
        VoxelVolume vol(3, {6, 5, 4});
        Rng rng(11);
        for (float& v : vol.data()) v = static_cast<float>(rng.uniform(-2, 2));
        float out[3];
        trilinear_sample_one(vol, {2.5, 3.5, 1.5}, out);
        check("trilinear: cell-center sample is bit-exact",
              out[0] == vol.at(0, 2, 3, 1) && out[1] == vol.at(1, 2, 3, 1) &&
                  out[2] == vol.at(2, 2, 3, 1));
    }
    {
        Rng rng(13);
        bool ok = true;
        for (int trial = 0; trial < 100 && ok; ++trial) {
            std::vector<double> v(16);
            for (double& x : v) x = rng.uniform(-50, 50);
            const auto s = softmax(v);
            double sum = 0.0;
            for (double x : s) sum += x;
            ok = std::abs(sum - 1.0) < 1e-6;
        }
        check("softmax: outputs sum to 1", ok);
    }
    {
        GridSpec spec;
        spec.dims = {8, 8, 4};
        spec.min_corner = Eigen::Vector3d(-1.6, -1.6, 0.0);
        spec.resolution = 0.4;
        VoxelVolume vol(2, spec.dims);
        Rng rng(17);
        for (float& v : vol.data()) v = static_cast<float>(rng.uniform(-1, 1));
        const VoxelVolume warped = warp_volume(vol, RigidTransform::identity(), spec);
        bool ok = true;
        for (std::int64_t i = 0; i < vol.size(); ++i) {
            ok = ok && vol.data()[i] == warped.data()[i];
        }
        check("warp: identity motion is bit-exact", ok);
    }
    {
        GridSpec spec;
        spec.dims = {10, 10, 4};
        spec.min_corner = Eigen::Vector3d(-2.0, -2.0, -0.8);
        spec.resolution = 0.4;
        Rng rng(19);
        bool ok = true;
        for (int trial = 0; trial < 10 && ok; ++trial) {
            InstanceQuery q;
            q.box.center = Eigen::Vector3d(rng.uniform(-1.5, 1.5), rng.uniform(-1.5, 1.5),
                                           rng.uniform(-0.5, 0.5));
            q.box.size = Eigen::Vector3d(rng.uniform(0.3, 2.0), rng.uniform(0.3, 2.0),
                                         rng.uniform(0.3, 1.0));
            q.box.yaw = rng.uniform(-3.14, 3.14);
            const auto index = build_voxel_query_index({q}, spec);
            for (int k = 0; k < spec.dims[2] && ok; ++k)
                for (int j = 0; j < spec.dims[1] && ok; ++j)
                    for (int i = 0; i < spec.dims[0] && ok; ++i) {
                        const bool inside = q.box.contains(spec.cell_center(i, j, k));
                        const bool indexed = index.cells.count(spec.cell_index(i, j, k)) > 0;
                        ok = inside == indexed;
                    }
        }
        check("index: matches brute-force containment", ok);
    }
    {
        Rng rng(23);
        SemanticGrid a({6, 6, 3}, 4), b({6, 6, 3}, 4);
        for (auto& v : a.labels) v = static_cast<std::uint8_t>(rng.next_u64() % 5);
        for (auto& v : b.labels) v = static_cast<std::uint8_t>(rng.next_u64() % 5);
        const IouResult r = iou_miou(a, b);
        const IouResult self = iou_miou(a, a);
        check("iou: self-comparison is exactly 1",
              self.miou == 1.0 && self.geometry_iou == 1.0 && r.miou <= 1.0);
    }
    return failures == 0 ? 0 : 3;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"streamocc: streaming dual-aggregation 3D occupancy engine"};
    app.require_subcommand(1);

    int threads = 0;
    app.add_option("--threads", threads, "Worker threads for dense kernels (0 = hardware)");

    std::string scene_path, config_path, weights_path, out_dir, ablation, pred_dir, gt_dir,
        out_path;
    std::uint64_t seed = 0;
    bool random_weights = false, dump_pred = false, emit_json = false, with_rayiou = false,
         use_mask = false;

    CLI::App* gen = app.add_subcommand("gen-scene", "Generate a synthetic scene directory");
    gen->add_option("--scene", scene_path, "Scene config file (omit for the built-in default)");
    gen->add_option("--seed", seed, "Generation seed");
    gen->add_option("--out", out_dir, "Output directory")->required();

    CLI::App* runc = app.add_subcommand("run", "Stream a scene through the engine");
    runc->add_option("--scene", scene_path, "Scene config file (omit for the built-in default)");
    runc->add_option("--config", config_path, "Run configuration (JSON)");
    runc->add_option("--weights", weights_path, "Weight manifest");
    runc->add_flag("--random-weights", random_weights, "Seeded untrained-weights mode");
    runc->add_option("--seed", seed, "Seed for scene, detector noise and random weights");
    runc->add_option("--out", out_dir, "Output directory")->required();
    runc->add_option("--ablation", ablation, "base | stream | full");
    runc->add_flag("--dump-pred", dump_pred, "Dump predicted grids per frame");
    runc->add_flag("--json", emit_json, "Also write report.json");

    CLI::App* evalc = app.add_subcommand("eval", "Evaluate dumped grids against ground truth");
    evalc->add_option("--pred", pred_dir, "Directory of predicted grid dumps")->required();
    evalc->add_option("--gt", gt_dir, "Directory of ground-truth grid dumps")->required();
    evalc->add_option("--config", config_path, "Run config providing the grid geometry");
    evalc->add_flag("--rayiou", with_rayiou, "Also compute RayIoU (needs --config)");
    evalc->add_flag("--mask", use_mask, "Apply the visibility mask where present");
    evalc->add_flag("--json", emit_json, "Emit JSON instead of text to --out");
    evalc->add_option("--out", out_path, "Write the report to this file");

    app.add_subcommand("selfcheck", "Run the built-in invariant checks");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e); // --help
        app.exit(e);
        return 1;
    }

    set_thread_count(threads);

    try {
        if (app.got_subcommand("gen-scene")) return cmd_gen_scene(scene_path, seed, out_dir);
        if (app.got_subcommand("run")) {
            return cmd_run(scene_path, config_path, weights_path, random_weights, seed, out_dir,
                           ablation, dump_pred, emit_json);
        }
        if (app.got_subcommand("eval")) {
            return cmd_eval(pred_dir, gt_dir, config_path, with_rayiou, use_mask, emit_json,
                            out_path);
        }
        if (app.got_subcommand("selfcheck")) return cmd_selfcheck();
    } catch (const InputError& e) {
        std::cerr << "input error: " << e.what() << "\n";
        return 1;
    } catch (const ConfigError& e) {
        std::cerr << "configuration error: " << e.what() << "\n";
        return 2;
    } catch (const ContractViolation& e) {
        std::cerr << "contract violation: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    }
    return 0;
}
