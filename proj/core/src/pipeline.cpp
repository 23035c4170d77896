#include "streamocc/pipeline.hpp"

#include "streamocc/error.hpp"

#include <chrono>
#include <cmath>

namespace streamocc {

namespace {

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point start) {
    return std::chrono::duration<double, std::milli>(Clock::now() - start).count();
}

} // namespace

void PipelineConfig::validate() const {
    grid.validate();
    require(grid.dims[0] % 4 == 0 && grid.dims[1] % 4 == 0 && grid.dims[2] % 4 == 0,
            "pipeline: grid dims must be divisible by 4");
    require(channels % 4 == 0, "pipeline: channels must be divisible by 4");
    require(channels % v2q_heads == 0, "pipeline: channels must divide by v2q heads");
    require(c_init >= 1 && n_classes >= 1, "pipeline: channel/class counts must be >= 1");
    require(selection.conf_thresh > 0.0 && selection.iou_thresh > 0.0 &&
                selection.geo_thresh > 0.0,
            "pipeline: selection thresholds must be positive");
}

PipelineParams PipelineParams::make(const PipelineConfig& config) {
    config.validate();
    PipelineParams p;
    p.fpn = Fpn3dParams::make(config.c_init, config.fpn_c1, config.fpn_c2, config.channels);
    p.refine = RefineNetParams::make(config.channels);
    p.occ_head = OccupiedHeadParams::make(config.occ_head_hidden);
    p.fore_head =
        ForecastHeadParams::make(config.channels, config.decoder_hidden, config.n_classes);
    p.detector = DetectorParams::make(config.n_classes, config.channels);
    p.v2q = DeformAttnParams::make(config.channels, config.channels, config.v2q_heads,
                                   config.v2q_points);
    p.dqa = DqaParams::make(config.channels, config.channels);
    p.decoder = DecoderParams::make(config.channels, config.decoder_hidden, config.n_classes);
    return p;
}

std::vector<ParamBinding> PipelineParams::bindings() {
    std::vector<ParamBinding> b;
    fpn.bind(b, "fpn");
    refine.bind(b, "streamagg");
    occ_head.bind(b, "streamagg.occ_head");
    fore_head.bind(b, "streamagg.fore_head");
    detector.bind(b, "queryagg.detector");
    v2q.bind(b, "queryagg.v2q");
    dqa.bind(b, "queryagg.dqa", "queryagg.ffn");
    decoder.bind(b, "decoder");
    return b;
}

void PipelineParams::load(const std::string& manifest_path) {
    auto b = bindings();
    load_weights(manifest_path, b);
}

void PipelineParams::save(const std::string& manifest_path) {
    const auto b = bindings();
    save_weights(manifest_path, b);
}

void PipelineParams::init_random(std::uint64_t seed) {
    auto b = bindings();
    init_uniform_weights(b, seed);
}

std::pair<FrameOutput, StreamState> step(const StreamState& state, const SceneFrame& frame,
                                         const PipelineConfig& config,
                                         const PipelineParams& params) {
    config.validate();
    const bool cold = state.is_cold();
    if (!cold) {
        require(state.timestep + 1 == frame.timestep,
                "step: timestep discontinuity (state " + std::to_string(state.timestep) +
                    ", frame " + std::to_string(frame.timestep) + ")");
    }

    const GridSpec half = config.half_grid();
    FrameOutput out;
    const auto t_total = Clock::now();

    auto t0 = Clock::now();
    const VoxelVolume v_init = lift_splat(frame, config.grid);
    out.timings.lift_ms = ms_since(t0);

    t0 = Clock::now();
    const VoxelVolume v_curr = fpn3d(v_init, params.fpn);
    out.timings.fpn_ms = ms_since(t0);

    // Stream aggregation. The cold start is a pure single-frame pass: with no
    // history the refined warped volume is zero and V_SA = V_curr.
    t0 = Clock::now();
    VoxelVolume v_sa;
    std::optional<RefineResult> refined;
    if (config.enable_stream_agg && !cold) {
        const RigidTransform motion = relative_transform(state.prev_pose, frame.ego);
        const VoxelVolume v_warp = warp_volume(state.prev_volume, motion, half);
        refined = refine(v_warp, params.refine);
        v_sa = fuse(refined->v_refwarp, v_curr);
    } else {
        v_sa = v_curr;
    }
    out.timings.stream_ms = ms_since(t0);

    t0 = Clock::now();
    if (config.enable_aux_heads && refined.has_value()) {
        out.occupied_logits = occupied_head(refined->maps, params.occ_head, config.grid.dims);
        out.forecast_logits = forecast_head(refined->v_refwarp, params.fore_head);
    }
    out.timings.aux_ms = ms_since(t0);

    t0 = Clock::now();
    std::vector<InstanceQuery> surviving;
    VoxelVolume v_fin;
    if (config.enable_query_agg) {
        const std::vector<InstanceQuery> raw =
            detector_source(frame, state, config.detector, params.detector);
        const std::vector<InstanceQuery> q_vox = v2q_deform_attn(raw, v_sa, params.v2q, half);
        std::optional<std::vector<GtBox>> gt;
        if (config.select_mode == SelectMode::train) {
            std::vector<GtBox> boxes;
            for (const auto& d : frame.dynamic_boxes) boxes.push_back({d.class_id, d.box});
            gt = std::move(boxes);
        }
        surviving = select_queries(q_vox, gt, config.select_mode, config.selection);
        const VoxelQueryIndex index = build_voxel_query_index(surviving, half);
        const VoxelVolume v_dqa = dqa(v_sa, surviving, index, params.dqa);
        v_fin = ffn_residual(v_dqa, params.dqa);
        out.selected_query_count = static_cast<int>(surviving.size());
    } else {
        v_fin = v_sa;
    }
    out.timings.query_ms = ms_since(t0);

    t0 = Clock::now();
    DecodeResult dec = decode(v_fin, params.decoder);
    out.timings.decode_ms = ms_since(t0);

    out.logits = std::move(dec.logits);
    out.labels = std::move(dec.labels);
    out.v_fin = v_fin;
    out.timings.total_ms = ms_since(t_total);

    StreamState next;
    next.prev_volume = std::move(v_fin);
    next.prev_pose = frame.ego;
    next.prev_queries = std::move(surviving);
    next.timestep = frame.timestep;
    return {std::move(out), std::move(next)};
}

SequenceResult run_sequence(const std::vector<SceneFrame>& frames, const PipelineConfig& config,
                            const PipelineParams& params) {
    SequenceResult result;
    result.report.num_classes = config.n_classes;
    result.report.per_class_iou.assign(static_cast<std::size_t>(config.n_classes),
                                       std::numeric_limits<double>::quiet_NaN());
    if (frames.empty()) return result;

    ConfusionCounts confusion(config.n_classes);
    RayCounts ray_counts(config.n_classes);
    double loss_occ = 0.0, loss_fore = 0.0, loss_bin = 0.0;
    int fore_frames = 0;
    std::int64_t selected_total = 0;

    StreamState state = StreamState::cold_start();
    for (const auto& frame : frames) {
        auto [output, next] = step(state, frame, config, params);
        state = std::move(next);

        confusion.accumulate(output.labels, frame.gt_grid, false);
        if (config.compute_rayiou) {
            ray_counts.accumulate(output.labels, frame.gt_grid, config.grid, config.ray_origin,
                                  config.rays);
        }
        const LossReport frame_loss =
            losses(&output.logits,
                   output.forecast_logits ? &*output.forecast_logits : nullptr,
                   output.occupied_logits ? &*output.occupied_logits : nullptr, frame.gt_grid,
                   config.loss_weights);
        loss_occ += frame_loss.occ;
        if (frame_loss.has_fore) {
            loss_fore += frame_loss.fore;
            loss_bin += frame_loss.bin;
            ++fore_frames;
        }
        selected_total += output.selected_query_count;

        result.mean_timings.lift_ms += output.timings.lift_ms;
        result.mean_timings.fpn_ms += output.timings.fpn_ms;
        result.mean_timings.stream_ms += output.timings.stream_ms;
        result.mean_timings.aux_ms += output.timings.aux_ms;
        result.mean_timings.query_ms += output.timings.query_ms;
        result.mean_timings.decode_ms += output.timings.decode_ms;
        result.mean_timings.total_ms += output.timings.total_ms;

        result.outputs.push_back(std::move(output));
    }

    const double n = static_cast<double>(frames.size());
    result.mean_timings.lift_ms /= n;
    result.mean_timings.fpn_ms /= n;
    result.mean_timings.stream_ms /= n;
    result.mean_timings.aux_ms /= n;
    result.mean_timings.query_ms /= n;
    result.mean_timings.decode_ms /= n;
    result.mean_timings.total_ms /= n;

    const IouResult iou = iou_from_confusion(confusion);
    result.report.frames = static_cast<int>(frames.size());
    result.report.per_class_iou = iou.per_class;
    result.report.miou = iou.miou;
    result.report.geometry_iou = iou.geometry_iou;
    if (config.compute_rayiou) {
        result.report.has_rayiou = true;
        result.report.ray = rayiou_from_counts(ray_counts);
    }
    result.report.loss.occ = loss_occ / n;
    if (fore_frames > 0) {
        result.report.loss.fore = loss_fore / fore_frames;
        result.report.loss.bin = loss_bin / fore_frames;
        result.report.loss.has_fore = true;
        result.report.loss.has_bin = true;
    }
    result.report.loss.total = config.loss_weights.occ * result.report.loss.occ +
                               config.loss_weights.fore * result.report.loss.fore +
                               config.loss_weights.bin * result.report.loss.bin;
    result.report.mean_selected_queries = static_cast<double>(selected_total) / n;
    return result;
}

} // namespace streamocc
