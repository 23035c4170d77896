#pragma once

#include "streamocc/geometry.hpp"
#include "streamocc/instance_query.hpp"
#include "streamocc/nn_ops.hpp"
#include "streamocc/scene.hpp"
#include "streamocc/stream_agg.hpp"
#include "streamocc/voxel_volume.hpp"
#include "streamocc/weights.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace streamocc {

// ---------------------------------------------------------------------------
// Detector stand-in

enum class DetectorMode { oracle_noise, replay };

/// Oracle mode perturbs ground-truth dynamic boxes with Gaussian noise and
/// samples confidences from a truncated normal; replay mode serves recorded
/// detections from a text file. Both produce features via a class embedding
/// plus a learned projection of the box parameters.
struct DetectorConfig {
    DetectorMode mode = DetectorMode::oracle_noise;
    double center_sigma = 0.3; // meters
    double size_sigma = 0.1;   // meters
    double yaw_sigma = 0.1;    // radians
    double conf_mean = 0.8;
    double conf_sigma = 0.1;
    int max_queries = 900;
    std::uint64_t seed = 0;
    std::string replay_path; // required in replay mode
};

struct DetectorParams {
    std::vector<float> class_embed; // (n_classes + 1) x feature_dim
    LinearLayer box_proj;           // 7 -> feature_dim ([cx cy cz l w h yaw])
    int feature_dim = 0;
    int n_classes = 0;

    static DetectorParams make(int n_classes, int feature_dim);
    void bind(std::vector<ParamBinding>& out, const std::string& prefix);
    std::vector<float> feature_of(int class_id, const OrientedBox& box) const;
};

/// One recorded detection; see docs/formats.md for the line format.
struct ReplayRecord {
    int frame_index = 0;
    int track_id = 0;
    int class_id = 0;
    double confidence = 0.0;
    OrientedBox box;
};

std::vector<ReplayRecord> parse_replay_file(const std::string& path);

std::vector<InstanceQuery> detector_source(const SceneFrame& frame, const StreamState& state,
                                           const DetectorConfig& config,
                                           const DetectorParams& params);

// ---------------------------------------------------------------------------
// Voxel-to-query deformable attention

struct DeformAttnParams {
    int heads = 8;
    int points = 4;
    LinearLayer offset_net; // C_q -> H*O*3, offsets in meters
    LinearLayer weight_net; // C_q -> H*O, pre-softmax logits per head
    std::vector<LinearLayer> value_proj; // per head: C -> C/H
    std::vector<LinearLayer> out_proj;   // per head: C/H -> C_q

    static DeformAttnParams make(int channels, int query_dim, int heads, int points);
    void bind(std::vector<ParamBinding>& out, const std::string& prefix);
};

/// Per query and head, samples the aggregated volume at offset points around
/// the query center, blends them with per-head softmax weights, projects and
/// adds the result to the query feature. Samples outside the grid contribute
/// zeros.
std::vector<InstanceQuery> v2q_deform_attn(const std::vector<InstanceQuery>& queries,
                                           const VoxelVolume& v_sa,
                                           const DeformAttnParams& params,
                                           const GridSpec& spec_half);

/// Per-head sampling weights for one query feature: heads x points, each row
/// softmax-normalized. This is the weight path v2q_deform_attn uses.
std::vector<std::vector<double>> v2q_attention_weights(const DeformAttnParams& params,
                                                       std::span<const float> feature);

// ---------------------------------------------------------------------------
// Query selection

enum class SelectMode { train, infer };

struct SelectionConfig {
    double conf_thresh = 0.3;
    double iou_thresh = 0.4;   // large objects, BEV IoU vs matched GT
    double geo_thresh = 1.5;   // small objects: sigma_c*D_center + sigma_b*D_size
    double sigma_center = 2.0;
    double sigma_size = 1.0;
    /// Class ids treated as large; defaults to ClassTable::is_large.
    std::vector<int> large_classes = {2, 4, 5, 6, 10, 11};

    bool is_large(int class_id) const;
};

struct GtBox {
    int class_id = 0;
    OrientedBox box;
};

/// Infer mode keeps queries with confidence above the threshold. Train mode
/// additionally requires agreement with a matched ground-truth box: BEV IoU
/// for large classes, or the weighted center/size deviation score for small
/// ones. Matching is greedy in descending confidence; each GT box is claimed
/// at most once (by best IoU, nearest center on IoU ties).
std::vector<InstanceQuery> select_queries(const std::vector<InstanceQuery>& queries,
                                          const std::optional<std::vector<GtBox>>& gt_boxes,
                                          SelectMode mode, const SelectionConfig& config);

// ---------------------------------------------------------------------------
// Query-to-voxel mapping and aggregation

/// Sparse map from half-resolution cell index to the queries whose oriented
/// boxes contain that cell's center (ascending query order).
struct VoxelQueryIndex {
    std::map<std::int64_t, std::vector<int>> cells;

    std::size_t indexed_cell_count() const { return cells.size(); }
};

VoxelQueryIndex build_voxel_query_index(const std::vector<InstanceQuery>& queries,
                                        const GridSpec& spec_half);

struct DqaParams {
    LinearLayer w_q;     // C -> d (d = C)
    LinearLayer w_kv;    // C_q -> d, shared key/value projection
    LinearLayer w_gate;  // 2C -> C, sigmoid
    LinearLayer pos_enc; // 3 (normalized cell coords) -> C
    LinearLayer ffn0;    // C -> 4C, relu
    LinearLayer ffn1;    // 4C -> C
    std::vector<float> norm_in_scale, norm_in_shift;   // C
    std::vector<float> norm_out_scale, norm_out_shift; // C

    static DqaParams make(int channels, int query_dim);
    void bind(std::vector<ParamBinding>& out, const std::string& prefix,
              const std::string& ffn_prefix);
};

/// Gated query-to-voxel attention. Cells without indexed queries are copied
/// bit-exactly; indexed cells receive V_SA + g * z where z is the softmax
/// attention blend of the selected queries' projected features.
VoxelVolume dqa(const VoxelVolume& v_sa, const std::vector<InstanceQuery>& selected,
                const VoxelQueryIndex& index, const DqaParams& params);

/// Attention weights of one indexed cell over its query list; `kv` holds the
/// shared key/value projections of the listed queries. This is the weight
/// path dqa() uses per cell.
std::vector<double> dqa_cell_attention(const DqaParams& params,
                                       std::span<const float> cell_feature,
                                       const Eigen::Vector3d& normalized_pos,
                                       const std::vector<std::vector<float>>& kv);

/// Per-cell feed-forward with pre/post channel standardization and residual:
/// out = norm_out(cell + ffn(norm_in(cell))).
VoxelVolume ffn_residual(const VoxelVolume& v_dqa, const DqaParams& params);

} // namespace streamocc
