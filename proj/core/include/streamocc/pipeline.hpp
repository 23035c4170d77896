#pragma once

#include "streamocc/decoder.hpp"
#include "streamocc/geometry.hpp"
#include "streamocc/metrics.hpp"
#include "streamocc/query_agg.hpp"
#include "streamocc/scene.hpp"
#include "streamocc/semantic_grid.hpp"
#include "streamocc/stream_agg.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace streamocc {

struct PipelineConfig {
    GridSpec grid; // full resolution
    int channels = 64;
    int c_init = 8;
    int n_classes = ClassTable::kNumClasses;
    int fpn_c1 = 64, fpn_c2 = 64;
    int decoder_hidden = 32;
    int occ_head_hidden = 16;

    DetectorConfig detector;
    SelectionConfig selection;
    SelectMode select_mode = SelectMode::infer;
    int v2q_heads = 8;
    int v2q_points = 4;

    bool enable_stream_agg = true;
    bool enable_query_agg = true;
    bool enable_aux_heads = true;

    bool compute_rayiou = true;
    RaySetConfig rays;
    Eigen::Vector3d ray_origin = Eigen::Vector3d::Zero();
    LossWeights loss_weights;

    void validate() const;
    GridSpec half_grid() const { return grid.half(); }
};

/// Every learned block in the engine, addressable by name for the weight
/// file. See docs/formats.md for the block list.
struct PipelineParams {
    Fpn3dParams fpn;
    RefineNetParams refine;
    OccupiedHeadParams occ_head;
    ForecastHeadParams fore_head;
    DetectorParams detector;
    DeformAttnParams v2q;
    DqaParams dqa;
    DecoderParams decoder;

    static PipelineParams make(const PipelineConfig& config);
    std::vector<ParamBinding> bindings();

    void load(const std::string& manifest_path);
    void save(const std::string& manifest_path);
    void init_random(std::uint64_t seed);
};

struct StageTimings {
    double lift_ms = 0.0;
    double fpn_ms = 0.0;
    double stream_ms = 0.0;
    double aux_ms = 0.0;
    double query_ms = 0.0;
    double decode_ms = 0.0;
    double total_ms = 0.0;
};

struct FrameOutput {
    SemanticGrid labels;
    VoxelVolume logits;
    std::optional<VoxelVolume> occupied_logits;
    std::optional<VoxelVolume> forecast_logits;
    int selected_query_count = 0;
    StageTimings timings;
    VoxelVolume v_fin; // half resolution, carried into the next state
};

/// One step of the recurrence: lift -> fpn -> [warp, refine, fuse] ->
/// [detect, v2q, select, index, dqa, ffn] -> decode. Ablation flags bypass
/// stages (stream off: V_SA = V_curr; query off: V_fin = V_SA). The input
/// state is not mutated; the returned state carries V_fin, the frame's pose
/// and the surviving queries.
std::pair<FrameOutput, StreamState> step(const StreamState& state, const SceneFrame& frame,
                                         const PipelineConfig& config,
                                         const PipelineParams& params);

struct SequenceResult {
    std::vector<FrameOutput> outputs;
    MetricReport report;
    StageTimings mean_timings;
};

/// Folds step over the frames from a cold start and aggregates metrics
/// against the frames' ground truth.
SequenceResult run_sequence(const std::vector<SceneFrame>& frames, const PipelineConfig& config,
                            const PipelineParams& params);

} // namespace streamocc
